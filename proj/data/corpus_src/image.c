void grayscale(const unsigned char *rgb, unsigned char *gray, int pixels) {
  for (int i = 0; i < pixels; ++i) {
    int r = rgb[3 * i], g = rgb[3 * i + 1], b = rgb[3 * i + 2];
    gray[i] = (unsigned char)((77 * r + 150 * g + 29 * b) >> 8);
  }
}

void threshold(unsigned char *img, int n, unsigned char t) {
  for (int i = 0; i < n; ++i) img[i] = img[i] >= t ? 255 : 0;
}

void box_blur(const unsigned char *in, unsigned char *out, int w, int h) {
  for (int y = 1; y < h - 1; ++y)
    for (int x = 1; x < w - 1; ++x) {
      int s = 0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) s += in[(y + dy) * w + x + dx];
      out[y * w + x] = (unsigned char)(s / 9);
    }
}
