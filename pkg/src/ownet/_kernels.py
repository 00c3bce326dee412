"""Compiled inner loops: local moving, edge swaps and hypergeometric tails."""

import math

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def local_moving(indptr, indices, weights, k, m2, comm, seed, tol, sweep_tol, max_moves):
    """Greedy node moves between neighbouring communities until no gain.

    ``comm`` is updated in place. Returns ``(delta_q, n_moves)`` where
    ``delta_q`` is the accumulated modularity change. A move needs a gain
    above ``tol``. Each sweep visits, in a fresh random order, only nodes
    with a neighbour that moved in the previous sweep; when none are left a
    full sweep over all nodes confirms convergence. Sweeps also stop once a
    whole sweep gains ``sweep_tol`` or less. Self-loop weights (aggregated
    nodes) are skipped when counting links to a community. Weights must be
    positive. ``max_moves < 0`` means unlimited.
    """
    n = k.shape[0]
    tot = np.zeros(n)
    for i in range(n):
        tot[comm[i]] += k[i]
    neigh_w = np.zeros(n)  # zero means "not a neighbouring community"
    cand = np.empty(n, dtype=np.int64)
    order = np.empty(n, dtype=np.int64)
    queued = np.zeros(n, dtype=np.bool_)
    nxt = np.empty(n, dtype=np.int64)
    n_next = 0
    np.random.seed(seed)
    delta_q = 0.0
    moves = 0
    full = True
    while True:
        if full:
            for i in range(n):
                order[i] = i
            for q in range(n_next):
                queued[nxt[q]] = False
            n_order = n
        else:
            for q in range(n_next):
                order[q] = nxt[q]
                queued[nxt[q]] = False
            n_order = n_next
        n_next = 0
        for a in range(n_order - 1, 0, -1):
            b = np.random.randint(a + 1)
            t = order[a]
            order[a] = order[b]
            order[b] = t
        moved = 0
        sweep_gain = 0.0
        for pos in range(n_order):
            i = order[pos]
            ci = comm[i]
            ki = k[i]
            nc = 0
            for p in range(indptr[i], indptr[i + 1]):
                j = indices[p]
                if j == i:
                    continue
                c = comm[j]
                if neigh_w[c] == 0.0:
                    cand[nc] = c
                    nc += 1
                neigh_w[c] += weights[p]
            tot[ci] -= ki
            gain_own = neigh_w[ci] - ki * tot[ci] / m2
            best_c = ci
            best_gain = gain_own
            for q in range(nc):
                c = cand[q]
                if c == ci:
                    continue
                g = neigh_w[c] - ki * tot[c] / m2
                if best_c == ci:
                    if 2.0 * (g - gain_own) / m2 > tol:
                        best_c = c
                        best_gain = g
                elif g > best_gain or (g == best_gain and c < best_c):
                    best_c = c
                    best_gain = g
            for q in range(nc):
                neigh_w[cand[q]] = 0.0
            tot[best_c] += ki
            if best_c != ci:
                comm[i] = best_c
                step = 2.0 * (best_gain - gain_own) / m2
                delta_q += step
                sweep_gain += step
                moved += 1
                moves += 1
                for p in range(indptr[i], indptr[i + 1]):
                    j = indices[p]
                    if not queued[j]:
                        queued[j] = True
                        nxt[n_next] = j
                        n_next += 1
                if not queued[i]:
                    queued[i] = True
                    nxt[n_next] = i
                    n_next += 1
                if max_moves >= 0 and moves >= max_moves:
                    return delta_q, moves
        if moved == 0 or sweep_gain <= sweep_tol:
            if full:
                break
            # pruned sweeps have settled: verify with a full sweep
            full = True
        else:
            full = False
    return delta_q, moves


# open-addressing edge set; EMPTY/TOMB mark free slots
_EMPTY = -1
_TOMB = -2


@njit(cache=True, inline="always")
def _mix(key, mask):
    h = (key * 0x5851F42D4C957F2D) & 0x7FFFFFFFFFFFFFFF
    h ^= h >> 29
    return h & mask


@njit(cache=True, inline="always")
def _probe(table, key, mask):
    """Slot holding ``key`` (>= 0), else ``-1 - slot`` where it may be inserted.

    The insertion slot is the first tombstone on the probe path, or the
    empty slot that ends it.
    """
    pos = _mix(key, mask)
    free = -1
    while True:
        v = table[pos]
        if v == key:
            return pos
        if v == _EMPTY:
            return -1 - (pos if free < 0 else free)
        if v == _TOMB and free < 0:
            free = pos
        pos = (pos + 1) & mask


@njit(cache=True, nogil=True)
def edge_table(src, dst, n_nodes, table, slot):
    """Fill ``table`` (all slots overwritten) with the edge keys ``src * n + dst``."""
    table[:] = _EMPTY
    mask = table.shape[0] - 1
    for e in range(src.shape[0]):
        key = src[e] * n_nodes + dst[e]
        pos = -1 - _probe(table, key, mask)
        table[pos] = key
        slot[e] = pos


@njit(cache=True, nogil=True)
def swap_edges(src, dst, share, n_nodes, in_sum, table, slot, state, e1s, e2s,
               max_reject_streak, eps):
    """Attempt the double-edge swaps ``(e1s[i], e2s[i])`` in order, editing ``dst``.

    Swapping edges e1 = (s1 -> t1) and e2 = (s2 -> t2) produces (s1 -> t2) and
    (s2 -> t1); shares stay with their source. A swap is rejected when it
    creates a self-loop or a duplicate edge, or would push a target's incoming
    share sum above ``1 + eps``. ``table`` is the edge-key set built by
    :func:`edge_table` and ``in_sum`` the incoming share sums; both are kept
    current. ``state`` holds ``(accepted, reject streak, used slots)`` across
    calls. Returns True when the reject streak exceeded its limit.
    """
    mask = table.shape[0] - 1
    accepted, streak, used = state[0], state[1], state[2]
    aborted = False
    for a in range(e1s.shape[0]):
        e1 = e1s[a]
        e2 = e2s[a]
        s1 = src[e1]
        t1 = dst[e1]
        s2 = src[e2]
        t2 = dst[e2]
        ok = s1 != s2 and t1 != t2 and s1 != t2 and s2 != t1
        a1 = share[e1]
        a2 = share[e2]
        if ok:
            d = a2 - a1
            if d > 0.0:
                ok = in_sum[t1] + d <= 1.0 + eps
            else:
                ok = in_sum[t2] - d <= 1.0 + eps
        p1 = p2 = 0
        if ok:
            p1 = _probe(table, s1 * n_nodes + t2, mask)
            ok = p1 < 0
            if ok:
                p2 = _probe(table, s2 * n_nodes + t1, mask)
                ok = p2 < 0
        if not ok:
            streak += 1
            if streak > max_reject_streak:
                aborted = True
                break
            continue
        streak = 0
        table[slot[e1]] = _TOMB
        table[slot[e2]] = _TOMB
        p1 = -1 - p1
        p2 = -1 - p2
        used += table[p1] == _EMPTY
        table[p1] = s1 * n_nodes + t2
        if p2 == p1:
            # both new keys probed to the same free slot
            p2 = -1 - _probe(table, s2 * n_nodes + t1, mask)
        used += table[p2] == _EMPTY
        table[p2] = s2 * n_nodes + t1
        slot[e1] = p1
        slot[e2] = p2
        in_sum[t1] += a2 - a1
        in_sum[t2] += a1 - a2
        dst[e1] = t2
        dst[e2] = t1
        accepted += 1
        if used * 4 > 3 * table.shape[0]:
            # too many tombstones: rebuild from the live edge list
            edge_table(src, dst, n_nodes, table, slot)
            used = src.shape[0]
    state[0], state[1], state[2] = accepted, streak, used
    return aborted


@njit(cache=True, inline="always")
def _lchoose(a, b):
    return math.lgamma(a + 1.0) - math.lgamma(b + 1.0) - math.lgamma(a - b + 1.0)


@njit(cache=True)
def hypergeom_sf(k, N, K, n):
    """P(X >= k) for X ~ Hypergeom(N, K, n), elementwise.

    Sums pmf ratios away from ``k`` over whichever tail has terms that only
    shrink, so no term overflows: the upper tail when ``k`` is above the mean,
    otherwise one minus the lower tail.
    """
    out = np.empty(k.shape[0])
    for i in range(k.shape[0]):
        kk, NN, KK, nn = float(k[i]), float(N[i]), float(K[i]), float(n[i])
        lo = max(0.0, nn + KK - NN)
        hi = min(nn, KK)
        if kk <= lo:
            out[i] = 1.0
            continue
        if kk > hi:
            out[i] = 0.0
            continue
        upper = kk > nn * KK / NN
        j = kk if upper else kk - 1.0
        log_t0 = _lchoose(KK, j) + _lchoose(NN - KK, nn - j) - _lchoose(NN, nn)
        s = 1.0
        r = 1.0
        if upper:
            while j < hi:
                r *= (KK - j) * (nn - j) / ((j + 1.0) * (NN - KK - nn + j + 1.0))
                s += r
                j += 1.0
                if r < 1e-17 * s:
                    break
            out[i] = math.exp(log_t0 + math.log(s))
        else:
            while j > lo:
                r *= j * (NN - KK - nn + j) / ((KK - j + 1.0) * (nn - j + 1.0))
                s += r
                j -= 1.0
                if r < 1e-17 * s:
                    break
            out[i] = max(0.0, 1.0 - math.exp(log_t0 + math.log(s)))
    return out
