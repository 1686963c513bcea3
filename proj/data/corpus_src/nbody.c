#include <math.h>

void nbody_step(int n, float *px, float *py, float *vx, float *vy, const float *m, float dt) {
  for (int i = 0; i < n; ++i) {
    float ax = 0.0f, ay = 0.0f;
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      float dx = px[j] - px[i], dy = py[j] - py[i];
      float d2 = dx * dx + dy * dy + 1e-3f;
      float inv = m[j] / (d2 * sqrtf(d2));
      ax += dx * inv;
      ay += dy * inv;
    }
    vx[i] += ax * dt;
    vy[i] += ay * dt;
  }
  for (int i = 0; i < n; ++i) {
    px[i] += vx[i] * dt;
    py[i] += vy[i] * dt;
  }
}
