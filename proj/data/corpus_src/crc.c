unsigned crc32(const unsigned char *p, unsigned long n) {
  unsigned crc = 0xffffffffu;
  for (unsigned long i = 0; i < n; ++i) {
    crc ^= p[i];
    for (int k = 0; k < 8; ++k) crc = (crc >> 1) ^ (0xedb88320u & (0u - (crc & 1u)));
  }
  return ~crc;
}

unsigned adler32(const unsigned char *p, unsigned long n) {
  unsigned a = 1, b = 0;
  for (unsigned long i = 0; i < n; ++i) {
    a = (a + p[i]) % 65521u;
    b = (b + a) % 65521u;
  }
  return (b << 16) | a;
}
