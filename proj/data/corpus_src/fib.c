unsigned long fib(unsigned n) {
  if (n < 2) return n;
  return fib(n - 1) + fib(n - 2);
}

unsigned long fib_iter(unsigned n) {
  unsigned long a = 0, b = 1;
  for (unsigned i = 0; i < n; ++i) {
    unsigned long t = a + b;
    a = b;
    b = t;
  }
  return a;
}

unsigned gcd(unsigned a, unsigned b) { return b == 0 ? a : gcd(b, a % b); }
