public static String a(long p6, String p8) {
  java.text.NumberFormat v0_1 = java.text.NumberFormat.getCurrencyInstance();
  v0_1.setCurrency(java.util.Currency.getInstance(p8));
  if (p6 < 0) {
    return "-" + v0_1.format((((double) (-p6)) / 100.0));
  } else {
    return v0_1.format((((double) p6) / 100.0));
  }
}
