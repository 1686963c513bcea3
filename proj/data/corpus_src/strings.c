#include <stddef.h>

size_t my_strlen(const char *s) {
  size_t n = 0;
  while (s[n]) ++n;
  return n;
}

int my_strcmp(const char *a, const char *b) {
  while (*a && *a == *b) {
    ++a;
    ++b;
  }
  return (unsigned char)*a - (unsigned char)*b;
}

void to_upper(char *s) {
  for (; *s; ++s)
    if (*s >= 'a' && *s <= 'z') *s = (char)(*s - 32);
}
