double horner(const double *c, int deg, double x) {
  double r = c[deg];
  for (int i = deg - 1; i >= 0; --i) r = r * x + c[i];
  return r;
}

void poly_mul(const int *a, int na, const int *b, int nb, int *out) {
  for (int i = 0; i < na + nb - 1; ++i) out[i] = 0;
  for (int i = 0; i < na; ++i)
    for (int j = 0; j < nb; ++j) out[i + j] += a[i] * b[j];
}
