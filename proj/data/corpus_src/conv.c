void conv1d(const float *x, int n, const float *k, int m, float *y) {
  for (int i = 0; i + m <= n; ++i) {
    float s = 0.0f;
    for (int j = 0; j < m; ++j) s += x[i + j] * k[j];
    y[i] = s;
  }
}

void relu(float *x, int n) {
  for (int i = 0; i < n; ++i) x[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void maxpool2(const float *x, int n, float *y) {
  for (int i = 0; i + 1 < n; i += 2) y[i / 2] = x[i] > x[i + 1] ? x[i] : x[i + 1];
}
