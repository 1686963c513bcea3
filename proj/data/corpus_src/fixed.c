typedef int q16;

q16 q_mul(q16 a, q16 b) { return (q16)(((long long)a * b) >> 16); }

q16 q_div(q16 a, q16 b) { return (q16)(((long long)a << 16) / b); }

void q_lerp(const q16 *a, const q16 *b, q16 t, q16 *out, int n) {
  for (int i = 0; i < n; ++i) out[i] = a[i] + q_mul(b[i] - a[i], t);
}
