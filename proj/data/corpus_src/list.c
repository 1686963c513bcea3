#include <stdlib.h>

struct node {
  int value;
  struct node *next;
};

struct node *push_front(struct node *head, int value) {
  struct node *n = malloc(sizeof *n);
  if (!n) return head;
  n->value = value;
  n->next = head;
  return n;
}

int list_sum(const struct node *head) {
  int s = 0;
  for (; head; head = head->next) s += head->value;
  return s;
}

void list_free(struct node *head) {
  while (head) {
    struct node *next = head->next;
    free(head);
    head = next;
  }
}
