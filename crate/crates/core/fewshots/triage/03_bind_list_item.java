public void onBindViewHolder(a.b.c p3, int p4) {
  a.b.d v0_1 = ((a.b.d) this.c.get(p4));
  p3.u.setText(v0_1.a);
  p3.v.setText(v0_1.b);
  if (v0_1.c) {
    p3.w.setVisibility(0);
  } else {
    p3.w.setVisibility(8);
  }
  p3.a.setOnClickListener(new a.b.e(this, v0_1));
  return;
}
