long sum_i64(const long *v, int n) {
  long s = 0;
  for (int i = 0; i < n; ++i) s += v[i];
  return s;
}

int max_index(const int *v, int n) {
  int best = 0;
  for (int i = 1; i < n; ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

unsigned count_if_positive(const float *v, unsigned n) {
  unsigned c = 0;
  for (unsigned i = 0; i < n; ++i) c += v[i] > 0.0f;
  return c;
}
