public void e(android.content.Context p5) {
  android.location.LocationManager v0_1 =
      ((android.location.LocationManager) p5.getSystemService("location"));
  android.location.Location v1_1 = v0_1.getLastKnownLocation("network");
  if (v1_1 != null) {
    android.content.SharedPreferences$Editor v2_2 =
        p5.getSharedPreferences("w", 0).edit();
    v2_2.putFloat("lat", ((float) v1_1.getLatitude()));
    v2_2.putFloat("lon", ((float) v1_1.getLongitude()));
    v2_2.apply();
  }
  return;
}
