unsigned popcount32(unsigned x) {
  unsigned c = 0;
  while (x) {
    x &= x - 1;
    ++c;
  }
  return c;
}

unsigned reverse_bits(unsigned x) {
  unsigned r = 0;
  for (int i = 0; i < 32; ++i) {
    r = (r << 1) | (x & 1);
    x >>= 1;
  }
  return r;
}

unsigned long hash_fnv(const unsigned char *p, unsigned long n) {
  unsigned long h = 1469598103934665603ul;
  for (unsigned long i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ul;
  }
  return h;
}
