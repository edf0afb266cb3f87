"""Compiled slot-level kernels of the network simulator.

All state lives in flat numpy arrays owned by :class:`NetworkState`; the
functions here mutate them in place.  Randomness always comes from the
``numpy.random.Generator`` passed in, consumed in a fixed order, so a run is
a pure function of its seed.

Cells are indexed ``x * m + y``.  Node ``u`` is paired with ``u ^ 1``.
Local queues are ring buffers holding each packet's creation slot; the
caller guarantees spare capacity before each block of slots.
"""

import numpy as np
from numba import njit

SD = 0
SR = 1
RD = 2

MOBILITY_IID = 0
MOBILITY_RW = 1
SCHEME_LTS = 0
SCHEME_GTS = 1

# Indices into the int64 counter vector.
C_ARRIVALS = 0
C_DELIVERED = 1
C_ARRIVALS_MEAS = 2
C_DELIVERED_MEAS = 3
C_FULL_OBS = 4
C_LOCAL_SUM = 5
C_RELAY_SUM = 6
C_ACTIVE_CELLS = 7
C_TAGGED_LOCAL_SUM = 8
N_COUNTERS = 9


@njit(cache=True)
def randbelow(rng, k):
    r = int(rng.random() * k)
    if r >= k:
        r = k - 1
    return r


@njit(cache=True)
def mobility_iid(cells, m, rng):
    m2 = m * m
    for u in range(cells.shape[0]):
        cells[u] = randbelow(rng, m2)


@njit(cache=True)
def mobility_random_walk(cells, m, rng):
    """Move each node to one of the 9 cells around it (torus), uniformly."""
    for u in range(cells.shape[0]):
        step = randbelow(rng, 9)
        x = cells[u] // m + step // 3 - 1
        y = cells[u] % m + step % 3 - 1
        x = (x + m) % m
        y = (y + m) % m
        cells[u] = x * m + y


@njit(cache=True)
def arrivals(lam, slot, local_buf, local_head, local_len, created, rng):
    n = local_len.shape[0]
    cap = local_buf.shape[1]
    count = 0
    for u in range(n):
        if lam <= 0.0:
            break
        if lam >= 1.0 or rng.random() < lam:
            pos = (local_head[u] + local_len[u]) % cap
            local_buf[u, pos] = slot
            local_len[u] += 1
            created[u] += 1
            count += 1
    return count


@njit(cache=True)
def bin_nodes(cells, m2, counts, starts, fill, order):
    counts[:m2] = 0
    for u in range(cells.shape[0]):
        counts[cells[u]] += 1
    s = 0
    for c in range(m2):
        starts[c] = s
        fill[c] = s
        s += counts[c]
    for u in range(cells.shape[0]):
        c = cells[u]
        order[fill[c]] = u
        fill[c] += 1


@njit(cache=True)
def _pick_other(rng, members, base, k, sender):
    """Uniform member of members[base:base+k] other than ``sender``."""
    pos = 0
    for j in range(k):
        if members[base + j] == sender:
            pos = j
            break
    j = randbelow(rng, k - 1)
    if j >= pos:
        j += 1
    return members[base + j]


@njit(cache=True)
def schedule_lts(cells, m, alpha, rng, counts, starts, fill, order, tx):
    """One transmission per cell holding two or more nodes.

    A source-destination pair in the cell takes precedence (S-D); otherwise
    a random sender picks a random receiver in the cell and chooses S-R with
    probability ``alpha``, R-D otherwise.  Rows of ``tx`` are
    (cell, sender, receiver, kind); the number of rows written is returned.
    """
    m2 = m * m
    bin_nodes(cells, m2, counts, starts, fill, order)
    ntx = 0
    for c in range(m2):
        k = counts[c]
        if k < 2:
            continue
        base = starts[c]
        npairs = 0
        for j in range(k):
            u = order[base + j]
            if u % 2 == 0 and cells[u + 1] == c:
                npairs += 1
        if npairs > 0:
            pick = randbelow(rng, npairs)
            u = -1
            for j in range(k):
                u = order[base + j]
                if u % 2 == 0 and cells[u + 1] == c:
                    if pick == 0:
                        break
                    pick -= 1
            if rng.random() < 0.5:
                s, r = u, u + 1
            else:
                s, r = u + 1, u
            kind = SD
        else:
            s = order[base + randbelow(rng, k)]
            r = _pick_other(rng, order, base, k, s)
            kind = SR if rng.random() < alpha else RD
        tx[ntx, 0] = c
        tx[ntx, 1] = s
        tx[ntx, 2] = r
        tx[ntx, 3] = kind
        ntx += 1
    return ntx


@njit(cache=True)
def schedule_gts(cells, m, nu, eps, keep, slot, alpha, rng, counts, starts, fill, order, tx, scratch,
                 active):
    """Transmissions of the cell group active in ``slot``.

    Group ``slot mod eps^2`` is the lattice of cells congruent to
    ``(g // eps, g % eps)`` modulo ``eps``; each of its cells is kept with
    probability ``keep``.  An active cell ``c`` reaches every node within
    ``nu - 1`` cells of it in both axes (no wraparound).  An S-D pair with
    one end in ``c`` and the other in range takes precedence; otherwise a
    sender in ``c`` picks a receiver in range and flips the alpha coin.
    ``active[0]`` receives the number of cells that survived thinning.
    """
    m2 = m * m
    bin_nodes(cells, m2, counts, starts, fill, order)
    g = slot % (eps * eps)
    ax = g // eps
    ay = g % eps
    reach = nu - 1
    ntx = 0
    active[0] = 0
    for x in range(ax, m, eps):
        for y in range(ay, m, eps):
            if keep < 1.0 and rng.random() >= keep:
                continue
            active[0] += 1
            c = x * m + y
            in_cell = counts[c]
            if in_cell == 0:
                continue
            nr = 0
            for xx in range(max(0, x - reach), min(m, x + reach + 1)):
                for yy in range(max(0, y - reach), min(m, y + reach + 1)):
                    cc = xx * m + yy
                    for j in range(counts[cc]):
                        scratch[nr] = order[starts[cc] + j]
                        nr += 1
            if nr < 2:
                continue
            base = starts[c]
            npairs = 0
            for j in range(in_cell):
                u = order[base + j]
                p = u ^ 1
                px = cells[p] // m
                py = cells[p] % m
                if abs(px - x) <= reach and abs(py - y) <= reach:
                    if cells[p] == c and p < u:
                        continue
                    npairs += 1
            if npairs > 0:
                pick = randbelow(rng, npairs)
                u = -1
                p = -1
                for j in range(in_cell):
                    u = order[base + j]
                    p = u ^ 1
                    px = cells[p] // m
                    py = cells[p] % m
                    if abs(px - x) <= reach and abs(py - y) <= reach:
                        if cells[p] == c and p < u:
                            continue
                        if pick == 0:
                            break
                        pick -= 1
                if cells[p] == c and rng.random() < 0.5:
                    s, r = p, u
                else:
                    s, r = u, p
                kind = SD
            else:
                s = order[base + randbelow(rng, in_cell)]
                r = _pick_other(rng, scratch, 0, nr, s)
                kind = SR if rng.random() < alpha else RD
            tx[ntx, 0] = c
            tx[ntx, 1] = s
            tx[ntx, 2] = r
            tx[ntx, 3] = kind
            ntx += 1
    return ntx


@njit(cache=True)
def _pop_local(u, local_buf, local_head, local_len, created, moved):
    cap = local_buf.shape[1]
    head = local_head[u]
    moved[0] = created[u] - local_len[u]
    moved[1] = local_buf[u, head]
    local_head[u] = (head + 1) % cap
    local_len[u] -= 1


@njit(cache=True)
def execute(kind, s, r, slot, B, local_buf, local_head, local_len, created,
            relay_src, relay_seq, relay_born, relay_stamp, relay_len, moved):
    """Carry out one scheduled transmission; return 1 if a packet moved.

    ``moved`` receives (sequence number, creation slot) of the packet.  S-R
    needs a packet at the sender and room at the receiver (handshake); R-D
    delivers the oldest relayed packet addressed to the receiver.
    """
    if kind == SD:
        if local_len[s] == 0:
            return 0
        _pop_local(s, local_buf, local_head, local_len, created, moved)
        return 1
    if kind == SR:
        if local_len[s] == 0 or relay_len[r] >= B:
            return 0
        _pop_local(s, local_buf, local_head, local_len, created, moved)
        j = relay_len[r]
        relay_src[r, j] = s
        relay_seq[r, j] = moved[0]
        relay_born[r, j] = moved[1]
        relay_stamp[r, j] = slot
        relay_len[r] = j + 1
        return 1
    # R-D: entries are kept in insertion order, so the first match is the oldest.
    L = relay_len[s]
    for j in range(L):
        if (relay_src[s, j] ^ 1) == r:
            moved[0] = relay_seq[s, j]
            moved[1] = relay_born[s, j]
            for q in range(j, L - 1):
                relay_src[s, q] = relay_src[s, q + 1]
                relay_seq[s, q] = relay_seq[s, q + 1]
                relay_born[s, q] = relay_born[s, q + 1]
                relay_stamp[s, q] = relay_stamp[s, q + 1]
            relay_len[s] = L - 1
            return 1
    return 0


@njit(cache=True)
def run_block(t0, t1, warmup, tagged, mobility, scheme, m, alpha, lam, B, nu, eps, keep,
              cells, local_buf, local_head, local_len, created,
              relay_src, relay_seq, relay_born, relay_stamp, relay_len,
              delivered, delivered_meas, sched, done, counters,
              counts, starts, fill, order, tx, scratch, active, moved, rng):
    """Advance the network through slots ``t0 .. t1 - 1``.

    Per slot: mobility, arrivals, local-queue sampling, scheduling,
    execution, end-of-slot sampling.  Statistics are accumulated only for
    slots at or after ``warmup``.
    """
    n = cells.shape[0]
    for t in range(t0, t1):
        if mobility == MOBILITY_IID:
            mobility_iid(cells, m, rng)
        else:
            mobility_random_walk(cells, m, rng)
        a = arrivals(lam, t, local_buf, local_head, local_len, created, rng)
        counters[C_ARRIVALS] += a
        measuring = t >= warmup
        if measuring:
            counters[C_ARRIVALS_MEAS] += a
            total = 0
            for u in range(n):
                total += local_len[u]
            counters[C_LOCAL_SUM] += total
            counters[C_TAGGED_LOCAL_SUM] += local_len[tagged]
        if scheme == SCHEME_LTS:
            ntx = schedule_lts(cells, m, alpha, rng, counts, starts, fill, order, tx)
            if measuring:
                counters[C_ACTIVE_CELLS] += m * m
        else:
            ntx = schedule_gts(cells, m, nu, eps, keep, t, alpha, rng,
                               counts, starts, fill, order, tx, scratch, active)
            if measuring:
                counters[C_ACTIVE_CELLS] += active[0]
        for q in range(ntx):
            kind = tx[q, 3]
            s = tx[q, 1]
            r = tx[q, 2]
            ok = execute(kind, s, r, t, B, local_buf, local_head, local_len, created,
                         relay_src, relay_seq, relay_born, relay_stamp, relay_len, moved)
            if measuring:
                sched[s, kind] += 1
            if ok:
                if kind != SR:
                    delivered[r] += 1
                    counters[C_DELIVERED] += 1
                    if measuring:
                        delivered_meas[r] += 1
                        counters[C_DELIVERED_MEAS] += 1
                if measuring:
                    done[kind] += 1
        if measuring:
            full = 0
            occ = 0
            for u in range(n):
                occ += relay_len[u]
                if relay_len[u] >= B:
                    full += 1
            counters[C_FULL_OBS] += full
            counters[C_RELAY_SUM] += occ


@njit(cache=True)
def mobility_histogram(cells, m, slots, mobility, rng):
    """Run mobility alone; return per-cell visit counts and same-cell repeats."""
    hist = np.zeros(m * m, dtype=np.int64)
    prev = cells.copy()
    repeats = 0
    for _ in range(slots):
        if mobility == MOBILITY_IID:
            mobility_iid(cells, m, rng)
        else:
            mobility_random_walk(cells, m, rng)
        for u in range(cells.shape[0]):
            hist[cells[u]] += 1
            if cells[u] == prev[u]:
                repeats += 1
            prev[u] = cells[u]
    return hist, repeats
