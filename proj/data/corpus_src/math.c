#include <math.h>

double norm2(const double *v, int n) {
  double s = 0;
  for (int i = 0; i < n; ++i) s += v[i] * v[i];
  return sqrt(s);
}

void normalize(double *v, int n) {
  double len = norm2(v, n);
  if (len == 0) return;
  for (int i = 0; i < n; ++i) v[i] /= len;
}

float sigmoidf(float x) { return 1.0f / (1.0f + expf(-x)); }

void softmax(float *v, int n) {
  float m = v[0];
  for (int i = 1; i < n; ++i) m = fmaxf(m, v[i]);
  float s = 0;
  for (int i = 0; i < n; ++i) {
    v[i] = expf(v[i] - m);
    s += v[i];
  }
  for (int i = 0; i < n; ++i) v[i] /= s;
}
