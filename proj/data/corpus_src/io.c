#include <stdio.h>

void print_array(const int *v, int n) {
  for (int i = 0; i < n; ++i) printf("%d ", v[i]);
  printf("\n");
}

int read_ints(FILE *f, int *out, int cap) {
  int n = 0;
  while (n < cap && fscanf(f, "%d", &out[n]) == 1) ++n;
  return n;
}
