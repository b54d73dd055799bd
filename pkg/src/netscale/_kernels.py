"""Compiled inner loops.

All randomness inside these kernels comes from numba's per-thread Mersenne
Twister, reseeded explicitly by each entry point so outputs depend only on
the seeds passed in.
"""

from __future__ import annotations

import numpy as np
from numba import njit

WALK_STEP_FACTOR = 100
MAX_RESTARTS = 1000
SWAP_ATTEMPT_FACTOR = 100


@njit(cache=True)
def _mix32(a, b):
    # splitmix-style integer hash, kept inside uint32 range
    z = (a * 0x9E3779B1 + b * 0x85EBCA77 + 0x165667B1) & 0xFFFFFFFF
    z ^= z >> 16
    z = (z * 0x7FEB352D) & 0xFFFFFFFF
    z ^= z >> 15
    z = (z * 0x846CA68B) & 0xFFFFFFFF
    z ^= z >> 16
    return z


@njit(cache=True)
def _swap_steps(edges, target, max_attempts):
    m = edges.shape[0]
    attempted = 0
    succeeded = 0
    while succeeded < target and attempted < max_attempts:
        attempted += 1
        i = np.random.randint(m)
        j = np.random.randint(m - 1)
        if j >= i:
            j += 1
        u = edges[i, 0]
        v = edges[i, 1]
        if np.random.random() < 0.5:
            u, v = v, u
        x = edges[j, 0]
        y = edges[j, 1]
        if np.random.random() < 0.5:
            x, y = y, x
        # u != v and x != y hold because the multigraph has no loops
        if u == x or u == y or v == x or v == y:
            continue
        edges[i, 0] = u
        edges[i, 1] = x
        edges[j, 0] = v
        edges[j, 1] = y
        succeeded += 1
    return attempted, succeeded


@njit(cache=True)
def swap_chain(edges, target, max_attempts, seed):
    """Apply ``target`` successful random swaps to ``edges`` in place."""
    np.random.seed(seed)
    return _swap_steps(edges, target, max_attempts)


@njit(cache=True)
def walk_batch(indptr, indices, starts, kappa, seeds, out_vertices, out_counts, out_steps):
    """Random-walk samples, one per seed.

    Fills ``out_vertices[s]`` with the first-visit sequence and
    ``out_counts[s]`` with induced edge multiplicities (symmetric). Returns
    the index of the first sample that exhausted its restarts, or -1.
    """
    n = indptr.shape[0] - 1
    pos = np.full(n, -1, np.int64)
    step_cap = WALK_STEP_FACTOR * kappa
    for s in range(seeds.shape[0]):
        np.random.seed(seeds[s])
        total = 0
        done = False
        for _ in range(MAX_RESTARTS):
            v = starts[np.random.randint(starts.shape[0])]
            pos[v] = 0
            out_vertices[s, 0] = v
            count = 1
            steps = 0
            while count < kappa and steps < step_cap:
                lo = indptr[v]
                v = indices[lo + np.random.randint(indptr[v + 1] - lo)]
                steps += 1
                if pos[v] < 0:
                    pos[v] = count
                    out_vertices[s, count] = v
                    count += 1
            total += steps
            if count == kappa:
                done = True
                break
            for k in range(count):
                pos[out_vertices[s, k]] = -1
        if not done:
            return s
        for a in range(kappa):
            v = out_vertices[s, a]
            for p in range(indptr[v], indptr[v + 1]):
                b = pos[indices[p]]
                if b >= 0:
                    out_counts[s, a, b] += 1
        for k in range(kappa):
            pos[out_vertices[s, k]] = -1
        out_steps[s] = total
    return -1


@njit(cache=True)
def canonical_order(adj):
    """Degree-preferring BFS order of a simple adjacency matrix.

    Returns an order of length k, or an array whose first entry is -1 when
    the graph is disconnected.
    """
    k = adj.shape[0]
    deg = np.zeros(k, np.int64)
    for i in range(k):
        for j in range(k):
            if adj[i, j]:
                deg[i] += 1
    root = 0
    for i in range(1, k):
        if deg[i] > deg[root]:
            root = i
    order = np.empty(k, np.int64)
    seen = np.zeros(k, np.bool_)
    order[0] = root
    seen[root] = True
    head = 0
    tail = 1
    while head < tail:
        v = order[head]
        head += 1
        start = tail
        for w in range(k):
            if adj[v, w] and not seen[w]:
                seen[w] = True
                order[tail] = w
                tail += 1
        # stable insertion sort by descending degree; index order breaks ties
        for a in range(start + 1, tail):
            w = order[a]
            b = a - 1
            while b >= start and deg[order[b]] < deg[w]:
                order[b + 1] = order[b]
                b -= 1
            order[b + 1] = w
    if tail < k:
        order[0] = -1
    return order


@njit(cache=True)
def signature_batch(simple, out):
    """Canonical images for a stack of simple adjacency matrices.

    Returns the index of the first disconnected matrix, or -1.
    """
    k = simple.shape[1]
    for s in range(simple.shape[0]):
        order = canonical_order(simple[s])
        if order[0] < 0:
            return s
        for i in range(k):
            for j in range(k):
                out[s, i, j] = simple[s, order[i], order[j]]
    return -1


@njit(cache=True)
def component_counts(simple):
    S = simple.shape[0]
    k = simple.shape[1]
    out = np.zeros(S, np.int64)
    stack = np.empty(k, np.int64)
    seen = np.zeros(k, np.bool_)
    for s in range(S):
        seen[:] = False
        comps = 0
        for r in range(k):
            if seen[r]:
                continue
            comps += 1
            seen[r] = True
            top = 0
            stack[0] = r
            top = 1
            while top > 0:
                top -= 1
                v = stack[top]
                for w in range(k):
                    if simple[s, v, w] and not seen[w]:
                        seen[w] = True
                        stack[top] = w
                        top += 1
        out[s] = comps
    return out


@njit(cache=True)
def _prufer_decode(seq, t, edges):
    degree = np.ones(t, np.int64)
    for x in seq:
        degree[x] += 1
    for i in range(t - 2):
        x = seq[i]
        leaf = 0
        while degree[leaf] != 1:
            leaf += 1
        edges[i, 0] = leaf
        edges[i, 1] = x
        degree[leaf] -= 1
        degree[x] -= 1
    a = -1
    for v in range(t):
        if degree[v] == 1:
            if a < 0:
                a = v
            else:
                edges[t - 2, 0] = a
                edges[t - 2, 1] = v
                break


@njit(cache=True)
def prufer_decode(seq, t):
    edges = np.empty((t - 1, 2), np.int32)
    _prufer_decode(seq, t, edges)
    return edges


@njit(cache=True)
def random_tree_edges(t, seed):
    np.random.seed(seed)
    seq = np.empty(max(t - 2, 0), np.int64)
    for i in range(t - 2):
        seq[i] = np.random.randint(t)
    return prufer_decode(seq, t)


@njit(cache=True)
def _uf_find(parent, v):
    while parent[v] != v:
        parent[v] = parent[parent[v]]
        v = parent[v]
    return v


@njit(cache=True)
def edges_connected(edges, n):
    parent = np.arange(n)
    comps = n
    for e in range(edges.shape[0]):
        a = _uf_find(parent, edges[e, 0])
        b = _uf_find(parent, edges[e, 1])
        if a != b:
            parent[a] = b
            comps -= 1
    return comps == 1


@njit(cache=True)
def tree_demo_batch(t, trials, multiplier, seed):
    """Randomize ``trials`` uniform random trees of size ``t``.

    Returns (connected_count, failed_trial); failed_trial is -1 unless the
    swap chain stalled on some trial.
    """
    m = t - 1
    target = multiplier * m
    seq = np.empty(max(t - 2, 0), np.int64)
    edges = np.empty((m, 2), np.int32)
    deg = np.zeros(t, np.int64)
    connected = 0
    for trial in range(trials):
        np.random.seed(_mix32(seed, trial))
        for i in range(t - 2):
            seq[i] = np.random.randint(t)
        _prufer_decode(seq, t, edges)
        deg[:] = 0
        for e in range(m):
            deg[edges[e, 0]] += 1
            deg[edges[e, 1]] += 1
        if deg.max() == m:
            # a star admits no swap: its degree sequence has a single realization
            connected += 1
            continue
        attempted, succeeded = _swap_steps(edges, target, SWAP_ATTEMPT_FACTOR * target)
        if succeeded < target:
            return connected, trial
        if edges_connected(edges, t):
            connected += 1
    return connected, -1
