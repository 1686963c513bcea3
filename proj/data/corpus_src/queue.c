#define CAP 64

struct ring {
  int data[CAP];
  unsigned head, tail;
};

int ring_push(struct ring *r, int v) {
  if (r->tail - r->head == CAP) return 0;
  r->data[r->tail++ % CAP] = v;
  return 1;
}

int ring_pop(struct ring *r, int *out) {
  if (r->head == r->tail) return 0;
  *out = r->data[r->head++ % CAP];
  return 1;
}
