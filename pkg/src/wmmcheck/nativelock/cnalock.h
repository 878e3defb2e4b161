/*
 * CNA lock on C11 atomics. Orderings are the ones chosen by the barrier
 * optimizer; wmmcheck/programs/cna.py tags each access "cnalock.h:<line>"
 * and the audit test checks the memory_order on that line. One access per
 * line. -DCNA_BUGGY demotes the local hand-off store (succ->spin) to relaxed.
 */
#ifndef CNALOCK_H
#define CNALOCK_H
#include <stdatomic.h>
#include <stddef.h>
#include <stdint.h>
#ifdef CNA_BUGGY
#define CNA_HANDOFF_ORDER memory_order_relaxed
#else
#define CNA_HANDOFF_ORDER memory_order_release
#endif
#ifndef CNA_LOCAL_THRESHOLD
#define CNA_LOCAL_THRESHOLD 256
#endif

typedef struct cna_node {
    _Atomic(struct cna_node *) next;
    _Atomic(uintptr_t) spin; /* 0 wait, 1 go, >1 secondary queue head */
    _Atomic(int) socket;
    _Atomic(struct cna_node *) secTail;
} cna_node_t;

typedef struct { _Atomic(cna_node_t *) tail; } cna_lock_t;
void cna_pause(void);
static _Thread_local int cna_numa = 0;
static _Thread_local unsigned cna_releases = 0;
static inline int current_numa_node(void) { return cna_numa; }
/* every CNA_LOCAL_THRESHOLD-th release hands the lock to another socket */
static inline int keep_lock_local(void) { return ++cna_releases % CNA_LOCAL_THRESHOLD != 0; }

static inline void cna_lock(cna_lock_t *lock, cna_node_t *me, int numa) {
    cna_numa = numa;
    atomic_store_explicit(&me->next, NULL, memory_order_relaxed);
    atomic_store_explicit(&me->socket, -1, memory_order_relaxed);
    atomic_store_explicit(&me->spin, 0, memory_order_relaxed);

    cna_node_t *tail =
        atomic_exchange_explicit(&lock->tail, me, memory_order_seq_cst);
    if (!tail) {
        atomic_store_explicit(&me->spin, 1, memory_order_relaxed);
        return;
    }

    atomic_store_explicit(&me->socket, current_numa_node(), memory_order_relaxed);
    atomic_store_explicit(&tail->next, me, memory_order_release);
    while (!atomic_load_explicit(&me->spin, memory_order_acquire))
        cna_pause();
}

static inline cna_node_t *find_successor(cna_node_t *me) {
    cna_node_t *next = atomic_load_explicit(&me->next, memory_order_relaxed);
    int mySocket = atomic_load_explicit(&me->socket, memory_order_relaxed);
    if (mySocket == -1)
        mySocket = current_numa_node();
    if (atomic_load_explicit(&next->socket, memory_order_relaxed) == mySocket)
        return next;

    cna_node_t *secHead = next;
    cna_node_t *secTail = next;
    cna_node_t *cur = atomic_load_explicit(&next->next, memory_order_acquire);
    while (cur) {
        if (atomic_load_explicit(&cur->socket, memory_order_relaxed) == mySocket) {
            if (atomic_load_explicit(&me->spin, memory_order_relaxed) > 1) {
                cna_node_t *head = (cna_node_t *)atomic_load_explicit(&me->spin, memory_order_relaxed);
                cna_node_t *last = atomic_load_explicit(&head->secTail, memory_order_relaxed);
                atomic_store_explicit(&last->next, secHead, memory_order_relaxed);
            } else {
                atomic_store_explicit(&me->spin, (uintptr_t)secHead, memory_order_relaxed);
            }
            atomic_store_explicit(&secTail->next, NULL, memory_order_relaxed);
            cna_node_t *head = (cna_node_t *)atomic_load_explicit(&me->spin, memory_order_relaxed);
            atomic_store_explicit(&head->secTail, secTail, memory_order_relaxed);
            return cur;
        }
        secTail = cur;
        cur = atomic_load_explicit(&cur->next, memory_order_acquire);
    }
    return NULL;
}

static inline void cna_unlock(cna_lock_t *lock, cna_node_t *me) {
    if (!atomic_load_explicit(&me->next, memory_order_acquire)) {
        if (atomic_load_explicit(&me->spin, memory_order_relaxed) == 1) {
            cna_node_t *expected = me;
            if (atomic_compare_exchange_strong_explicit(&lock->tail, &expected, NULL, memory_order_seq_cst, memory_order_seq_cst))
                return;
        } else {
            cna_node_t *secHead = (cna_node_t *)atomic_load_explicit(&me->spin, memory_order_relaxed);
            cna_node_t *expected = me;
            cna_node_t *secTail = atomic_load_explicit(&secHead->secTail, memory_order_relaxed);
            if (atomic_compare_exchange_strong_explicit(&lock->tail, &expected, secTail, memory_order_seq_cst, memory_order_seq_cst)) {
                atomic_store_explicit(&secHead->spin, 1, memory_order_release);
                return;
            }
        }
        while (atomic_load_explicit(&me->next, memory_order_relaxed) == NULL)
            cna_pause();
    }
    cna_node_t *succ = NULL;
    if (keep_lock_local() && (succ = find_successor(me))) {
        uintptr_t spin = atomic_load_explicit(&me->spin, memory_order_relaxed);
        atomic_store_explicit(&succ->spin, spin, CNA_HANDOFF_ORDER);
    } else if (atomic_load_explicit(&me->spin, memory_order_relaxed) > 1) {
        succ = (cna_node_t *)atomic_load_explicit(&me->spin, memory_order_relaxed);
        cna_node_t *last = atomic_load_explicit(&succ->secTail, memory_order_relaxed);
        cna_node_t *next = atomic_load_explicit(&me->next, memory_order_relaxed);
        atomic_store_explicit(&last->next, next, memory_order_relaxed);
        atomic_store_explicit(&succ->spin, 1, memory_order_release);
    } else {
        cna_node_t *next = atomic_load_explicit(&me->next, memory_order_relaxed);
        atomic_store_explicit(&next->spin, 1, memory_order_release);
    }
}

#endif /* CNALOCK_H */
