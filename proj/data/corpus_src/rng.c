static unsigned long long state = 88172645463325252ull;

unsigned long long xorshift64(void) {
  state ^= state << 13;
  state ^= state >> 7;
  state ^= state << 17;
  return state;
}

double uniform01(void) { return (xorshift64() >> 11) * (1.0 / 9007199254740992.0); }

void fill_random(double *v, int n) {
  for (int i = 0; i < n; ++i) v[i] = uniform01();
}
