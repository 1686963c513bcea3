void histogram(const unsigned char *data, int n, unsigned *bins) {
  for (int i = 0; i < 256; ++i) bins[i] = 0;
  for (int i = 0; i < n; ++i) bins[data[i]]++;
}

void prefix_sum(const int *in, int *out, int n) {
  int acc = 0;
  for (int i = 0; i < n; ++i) {
    acc += in[i];
    out[i] = acc;
  }
}
