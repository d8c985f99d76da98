public static a.c.h a(String p5) {
  org.json.JSONObject v0_1 = new org.json.JSONObject(p5);
  a.c.h v1_1 = new a.c.h();
  v1_1.a = v0_1.optInt("version", 1);
  v1_1.b = v0_1.optBoolean("dark_mode", 0);
  org.json.JSONArray v2_1 = v0_1.optJSONArray("tabs");
  if (v2_1 != null) {
    int v3_0 = 0;
    while (v3_0 < v2_1.length()) {
      v1_1.c.add(v2_1.getString(v3_0));
      v3_0++;
    }
  }
  return v1_1;
}
