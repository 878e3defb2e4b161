/*
 * Stress harness: n threads each perform `iterations` increments of a plain
 * counter inside the CNA lock. Prints one result line per run:
 *   counter=<n> expected=<n> anomalies=<n> mode=<verified|buggy>
 * followed by a "# max_gap=<n>" line (the longest run of other threads'
 * critical sections between two of one thread's own, a starvation probe).
 * Exit status is nonzero iff a verified-mode run lost increments.
 *
 * usage: stress THREADS ITERATIONS [RUNS]
 */
#define _GNU_SOURCE
#include <dirent.h>
#include <pthread.h>
#include <sched.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "cnalock.h"

#ifdef CNA_BUGGY
#define MODE_NAME "buggy"
#else
#define MODE_NAME "verified"
#endif

void cna_pause(void) { sched_yield(); }

static cna_lock_t lock;
static long counter;       /* guarded by lock, deliberately not atomic */
static long seq;           /* critical-section sequence number, guarded */
static long iterations;

typedef struct {
    int id;
    int numa;
    long max_gap;
    cna_node_t node;
} worker_t;

static int online_nodes(void) {
    DIR *d = opendir("/sys/devices/system/node");
    if (!d)
        return 0;
    int n = 0;
    struct dirent *e;
    while ((e = readdir(d)) != NULL)
        if (strncmp(e->d_name, "node", 4) == 0 && e->d_name[4] >= '0' && e->d_name[4] <= '9')
            n++;
    closedir(d);
    return n;
}

static int cpu_node(int cpu) {
    char path[128];
    snprintf(path, sizeof path, "/sys/devices/system/cpu/cpu%d", cpu);
    DIR *d = opendir(path);
    if (!d)
        return -1;
    int node = -1;
    struct dirent *e;
    while ((e = readdir(d)) != NULL)
        if (strncmp(e->d_name, "node", 4) == 0 && e->d_name[4] >= '0' && e->d_name[4] <= '9')
            node = atoi(e->d_name + 4);
    closedir(d);
    return node;
}

/* platform topology when there is more than one node, else id mod 2 */
static int numa_of(int id) {
    if (online_nodes() > 1) {
        int node = cpu_node(sched_getcpu());
        if (node >= 0)
            return node;
    }
    return id % 2;
}

static void *run(void *arg) {
    worker_t *w = arg;
    w->numa = numa_of(w->id);
    long last = -1;
    for (long i = 0; i < iterations; i++) {
        cna_lock(&lock, &w->node, w->numa);
        counter++;
        long s = seq++;
        cna_unlock(&lock, &w->node);
        if (last >= 0 && s - last - 1 > w->max_gap)
            w->max_gap = s - last - 1;
        last = s;
    }
    return NULL;
}

int main(int argc, char **argv) {
    if (argc < 3) {
        fprintf(stderr, "usage: %s THREADS ITERATIONS [RUNS]\n", argv[0]);
        return 64;
    }
    int n = atoi(argv[1]);
    iterations = atol(argv[2]);
    int runs = argc > 3 ? atoi(argv[3]) : 1;
    if (n < 1 || iterations < 0 || runs < 1) {
        fprintf(stderr, "threads and runs must be >= 1, iterations >= 0\n");
        return 64;
    }
    worker_t *ws = aligned_alloc(64, sizeof(worker_t) * (size_t)n);
    pthread_t *ts = malloc(sizeof(pthread_t) * (size_t)n);
    int failed = 0;
    for (int r = 0; r < runs; r++) {
        counter = 0;
        seq = 0;
        atomic_store(&lock.tail, NULL);
        memset(ws, 0, sizeof(worker_t) * (size_t)n);
        for (int i = 0; i < n; i++) {
            ws[i].id = i;
            pthread_create(&ts[i], NULL, run, &ws[i]);
        }
        long gap = 0;
        for (int i = 0; i < n; i++) {
            pthread_join(ts[i], NULL);
            if (ws[i].max_gap > gap)
                gap = ws[i].max_gap;
        }
        long expected = (long)n * iterations;
        long anomalies = expected - counter;
        printf("counter=%ld expected=%ld anomalies=%ld mode=%s\n", counter, expected, anomalies, MODE_NAME);
        printf("# max_gap=%ld\n", gap);
        fflush(stdout);
#ifndef CNA_BUGGY
        if (anomalies != 0)
            failed = 1;
#endif
    }
    free(ts);
    free(ws);
    return failed;
}
