void transpose(int n, const float *a, float *t) {
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) t[j * n + i] = a[i * n + j];
}

void scale_rows(int m, int n, float *a, const float *s) {
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) a[i * n + j] *= s[i];
}

float trace(int n, const float *a) {
  float t = 0.0f;
  for (int i = 0; i < n; ++i) t += a[i * n + i];
  return t;
}
