void jacobi1d(int n, const float *in, float *out) {
  for (int i = 1; i < n - 1; ++i) out[i] = 0.33333f * (in[i - 1] + in[i] + in[i + 1]);
}

void jacobi2d(int n, const float *in, float *out) {
  for (int i = 1; i < n - 1; ++i)
    for (int j = 1; j < n - 1; ++j)
      out[i * n + j] = 0.2f * (in[i * n + j] + in[(i - 1) * n + j] + in[(i + 1) * n + j] +
                               in[i * n + j - 1] + in[i * n + j + 1]);
}
