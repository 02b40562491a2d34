int socket(int d, int t, int p) { return 0; }
int bind(int s, const void *a, unsigned l) { return 0; }
int listen(int s, int b) { return 0; }
int accept(int s, void *a, void *l) { return 0; }
long recv(int s, void *b, unsigned n, int f) { return 0; }
long recvfrom(int s, void *b, unsigned n, int f, void *a, void *l) { return 0; }
int pthread_create(void *t, const void *at, void *(*fn)(void *), void *arg) { return 0; }
int system(const char *c) { return 0; }
void *memset(void *p, int c, unsigned n) { return p; }
