struct vec3 {
  float x, y, z;
};

struct vec3 vadd(struct vec3 a, struct vec3 b) {
  struct vec3 r = {a.x + b.x, a.y + b.y, a.z + b.z};
  return r;
}

float vdot(const struct vec3 *a, const struct vec3 *b) {
  return a->x * b->x + a->y * b->y + a->z * b->z;
}

void integrate(struct vec3 *pos, const struct vec3 *vel, int n, float dt) {
  for (int i = 0; i < n; ++i) {
    pos[i].x += vel[i].x * dt;
    pos[i].y += vel[i].y * dt;
    pos[i].z += vel[i].z * dt;
  }
}
