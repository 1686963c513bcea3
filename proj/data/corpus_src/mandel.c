int mandel(double cr, double ci, int max_iter) {
  double zr = 0, zi = 0;
  int k = 0;
  while (k < max_iter && zr * zr + zi * zi < 4.0) {
    double t = zr * zr - zi * zi + cr;
    zi = 2 * zr * zi + ci;
    zr = t;
    ++k;
  }
  return k;
}

void render(int w, int h, int *out) {
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out[y * w + x] = mandel(-2.0 + 3.0 * x / w, -1.5 + 3.0 * y / h, 64);
}
