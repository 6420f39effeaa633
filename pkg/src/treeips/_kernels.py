"""Compiled inner loops: log sampling, log sweeps and direct CTMC simulation.

Process modes
-------------
0 contact forward, 1 contact dual, 2 voter forward reset-to-parity,
3 voter forward flip-when-odd-count, 4 voter forward rate-one-on-disagreement,
5 voter dual (annihilating branching).
"""
import numpy as np
from numba import njit

from .rng import (CH_BIRTH, CH_DEATH, CH_GILLESPIE, CH_KEEP, CH_RESET,
                  CH_SUBSET, CH_VDEATH, stream_key, uniform)

BIRTH, DEATH, RESET, VDEATH = 0, 1, 2, 3
CONTACT_FWD, CONTACT_DUAL, VOTER_PARITY, VOTER_ODDFLIP, VOTER_DISAGREE, VOTER_DUAL = range(6)
FORWARD_MODES = (CONTACT_FWD, VOTER_PARITY, VOTER_ODDFLIP, VOTER_DISAGREE)


@njit(cache=True)
def _grow_f(a, n):
    b = np.empty(n, a.dtype)
    b[:a.shape[0]] = a
    return b


@njit(cache=True)
def present_mask(nbr, v):
    m = 0
    for s in range(nbr.shape[1]):
        if nbr[v, s] >= 0:
            m |= 1 << s
    return m


@njit(cache=True)
def odd_submasks(mask):
    """Odd-cardinality submasks of ``mask`` in increasing order."""
    out = np.empty(1 << 7, np.int64)
    n = 0
    sub = 1
    while sub <= mask:
        if (sub & mask) == sub:
            c = 0
            s = sub
            while s:
                c += s & 1
                s >>= 1
            if c & 1:
                out[n] = sub
                n += 1
        sub += 1
    return out[:n]


@njit(cache=True)
def sample_log(nbr, model, rate, T, seed, rep):
    """Sample the event streams of one replicate.

    ``model`` 0: contact (births at ``rate``, deaths at 1);
    ``model`` 1: voter (resets at 1, deaths at ``rate``).
    Returns arrays (times, vertices, kinds, masks, keep) in generation order
    (vertex-major, then kind, then time); ``keep`` holds the thinning
    uniforms of contact births.
    """
    V = nbr.shape[0]
    cap = int(V * (rate + 1.0) * T * 1.2) + 64
    times = np.empty(cap)
    verts = np.empty(cap, np.int64)
    kinds = np.empty(cap, np.int8)
    masks = np.empty(cap, np.int16)
    keep = np.empty(cap)
    n = 0
    seed = np.uint64(seed)
    rep = np.uint64(rep)
    for v in range(V):
        pm = present_mask(nbr, v)
        subs = odd_submasks(pm)
        for ch in range(2):
            if model == 0:
                r = rate if ch == 0 else 1.0
                kind = BIRTH if ch == 0 else DEATH
                chan = CH_BIRTH if ch == 0 else CH_DEATH
            else:
                r = 1.0 if ch == 0 else rate
                kind = RESET if ch == 0 else VDEATH
                chan = CH_RESET if ch == 0 else CH_VDEATH
            if r <= 0.0:
                continue
            key = stream_key(seed, rep, np.uint64(v), np.uint64(chan))
            aux = stream_key(seed, rep, np.uint64(v),
                             np.uint64(CH_KEEP if model == 0 else CH_SUBSET))
            t = 0.0
            k = 0
            while True:
                t += -np.log(uniform(key, k)) / r
                if t >= T:
                    break
                if n == cap:
                    cap = 2 * cap
                    times = _grow_f(times, cap)
                    verts = _grow_f(verts, cap)
                    kinds = _grow_f(kinds, cap)
                    masks = _grow_f(masks, cap)
                    keep = _grow_f(keep, cap)
                times[n] = t
                verts[n] = v
                kinds[n] = kind
                keep[n] = 0.0
                if kind == BIRTH:
                    masks[n] = pm
                    keep[n] = uniform(aux, k)
                elif kind == RESET:
                    j = int(uniform(aux, k) * subs.shape[0])
                    masks[n] = subs[min(j, subs.shape[0] - 1)]
                else:
                    masks[n] = 0
                n += 1
                k += 1
    order = np.argsort(times[:n], kind="mergesort")
    return times[:n][order], verts[:n][order], kinds[:n][order], masks[:n][order], keep[:n][order]


@njit(cache=True)
def _parity(state, nbr, x, mask):
    p = 0
    for s in range(nbr.shape[1]):
        if (mask >> s) & 1:
            w = nbr[x, s]
            if w >= 0:
                p ^= state[w]
    return p


@njit(cache=True)
def _touches(nbr, depth, R, x, mask):
    if depth[x] == R:
        return True
    for s in range(nbr.shape[1]):
        if (mask >> s) & 1:
            w = nbr[x, s]
            if w >= 0 and depth[w] == R:
                return True
    return False


@njit(cache=True)
def _fill_grid(grid, g, upto, state, nocc, census, snaps, inclusive):
    # record the current state at every grid time before ``upto``
    G = grid.shape[0]
    while g < G and (grid[g] < upto or (inclusive and grid[g] <= upto)):
        census[g] = nocc
        if snaps.shape[0] > 0:
            snaps[g, :] = state
        g += 1
    return g


@njit(cache=True)
def sweep(times, verts, kinds, masks, nbr, depth, R, mode, state0, T_end,
          grid, want_snaps, record, stop_full):
    """Apply a (possibly reversed) event log to an initial state.

    Returns (state, census, snaps, ct, cv, cval, nrec, absorb_time,
    absorb_state, touched_time).
    """
    V = state0.shape[0]
    D = nbr.shape[1]
    state = state0.copy()
    nocc = 0
    for v in range(V):
        nocc += state[v]
    G = grid.shape[0]
    census = np.zeros(G, np.int64)
    snaps = np.zeros((G if want_snaps else 0, V), np.uint8)
    nev = times.shape[0]
    rcap = nev * (D + 1) + 1 if record else 1
    ct = np.empty(rcap)
    cv = np.empty(rcap, np.int64)
    cval = np.empty(rcap, np.uint8)
    nrec = 0
    absorb_time = -1.0
    absorb_state = -1
    touched_time = -1.0
    g = 0
    if nocc == 0 or (stop_full and nocc == V):
        absorb_time = 0.0
        absorb_state = 0 if nocc == 0 else 1
    else:
        for i in range(nev):
            t = times[i]
            if t > T_end:
                break
            g = _fill_grid(grid, g, t, state, nocc, census, snaps, False)
            x = verts[i]
            k = kinds[i]
            m = masks[i]
            changed = False
            if mode == CONTACT_FWD:
                if k == BIRTH:
                    if state[x] == 0:
                        for s in range(D):
                            w = nbr[x, s]
                            if w >= 0 and state[w] == 1:
                                changed = True
                                break
                        if changed:
                            state[x] = 1
                            nocc += 1
                            if record:
                                ct[nrec] = t; cv[nrec] = x; cval[nrec] = 1; nrec += 1
                elif state[x] == 1:
                    state[x] = 0
                    nocc -= 1
                    changed = True
                    m = 0
                    if record:
                        ct[nrec] = t; cv[nrec] = x; cval[nrec] = 0; nrec += 1
            elif mode == CONTACT_DUAL:
                if state[x] == 1:
                    if k == BIRTH:
                        for s in range(D):
                            w = nbr[x, s]
                            if w >= 0 and state[w] == 0:
                                state[w] = 1
                                nocc += 1
                                changed = True
                                if record:
                                    ct[nrec] = t; cv[nrec] = w; cval[nrec] = 1; nrec += 1
                    else:
                        state[x] = 0
                        nocc -= 1
                        changed = True
                        m = 0
                        if record:
                            ct[nrec] = t; cv[nrec] = x; cval[nrec] = 0; nrec += 1
            elif mode == VOTER_DUAL:
                if state[x] == 1:
                    state[x] = 0
                    nocc -= 1
                    changed = True
                    if record:
                        ct[nrec] = t; cv[nrec] = x; cval[nrec] = 0; nrec += 1
                    if k == RESET:
                        for s in range(D):
                            if (m >> s) & 1:
                                w = nbr[x, s]
                                if w >= 0:
                                    state[w] ^= 1
                                    nocc += 1 if state[w] == 1 else -1
                                    if record:
                                        ct[nrec] = t; cv[nrec] = w; cval[nrec] = state[w]; nrec += 1
                    else:
                        m = 0
            else:
                new = state[x]
                if k == VDEATH:
                    new = 0
                    m = 0
                elif mode == VOTER_PARITY:
                    new = _parity(state, nbr, x, m)
                elif mode == VOTER_ODDFLIP:
                    if _parity(state, nbr, x, m) == 1:
                        new = 1 - state[x]
                else:
                    m = 0
                    for s in range(D):
                        w = nbr[x, s]
                        if w >= 0:
                            m |= 1 << s
                            if state[w] != state[x]:
                                new = 1 - state[x]
                if new != state[x]:
                    state[x] = new
                    nocc += 1 if new == 1 else -1
                    changed = True
                    if record:
                        ct[nrec] = t; cv[nrec] = x; cval[nrec] = new; nrec += 1
            if changed:
                if touched_time < 0 and _touches(nbr, depth, R, x, m):
                    touched_time = t
                if nocc == 0 or (stop_full and nocc == V):
                    absorb_time = t
                    absorb_state = 0 if nocc == 0 else 1
                    break
    g = _fill_grid(grid, g, np.inf, state, nocc, census, snaps, True)
    return state, census, snaps, ct[:nrec], cv[:nrec], cval[:nrec], nrec, absorb_time, absorb_state, touched_time


# ---------------------------------------------------------------------------
# direct simulation from the generators


@njit(cache=True)
def _fw_build(rates):
    n = rates.shape[0]
    fw = np.zeros(n + 1)
    for i in range(n):
        j = i + 1
        fw[j] += rates[i]
        p = j + (j & -j)
        if p <= n:
            fw[p] += fw[j]
    return fw


@njit(cache=True)
def _fw_add(fw, i, delta):
    n = fw.shape[0] - 1
    j = i + 1
    while j <= n:
        fw[j] += delta
        j += j & -j


@njit(cache=True)
def _fw_find(fw, target):
    n = fw.shape[0] - 1
    pos = 0
    step = 1
    while step * 2 <= n:
        step *= 2
    while step > 0:
        nxt = pos + step
        if nxt <= n and fw[nxt] < target:
            pos = nxt
            target -= fw[nxt]
        step //= 2
    return min(pos, n - 1)


@njit(cache=True)
def _rate(mode, x, state, nbr, lam, delta):
    D = nbr.shape[1]
    if mode == CONTACT_FWD:
        if state[x] == 1:
            return 1.0
        for s in range(D):
            w = nbr[x, s]
            if w >= 0 and state[w] == 1:
                return lam
        return 0.0
    if mode == CONTACT_DUAL:
        return 1.0 + lam if state[x] == 1 else 0.0
    if mode == VOTER_DUAL:
        return 1.0 + delta if state[x] == 1 else 0.0
    occ = 0
    deg = 0
    for s in range(D):
        w = nbr[x, s]
        if w >= 0:
            deg += 1
            occ += state[w]
    if mode == VOTER_DISAGREE:
        r = 0.0
        if (state[x] == 1 and occ < deg) or (state[x] == 0 and occ > 0):
            r = 1.0
        return r + (delta if state[x] == 1 else 0.0)
    # probability that the parity over a uniform odd subset is 1
    if occ == 0:
        p1 = 0.0
    elif occ == deg:
        p1 = 1.0
    else:
        p1 = 0.5
    if mode == VOTER_PARITY:
        if state[x] == 0:
            return p1
        return 1.0 - p1 + delta
    return p1 + (delta if state[x] == 1 else 0.0)


@njit(cache=True)
def gillespie(nbr, depth, R, mode, lam, delta, state0, T, seed, rep, grid,
              want_snaps, want_hits, record, stop_full, pop_cap, stop_on_touch):
    """Exact CTMC simulation with per-vertex rates kept in a Fenwick tree.

    Returns (state, census, snaps, first_hit, ct, cv, cval, absorb_time,
    absorb_state, touched_time, capped_time, t_end).
    """
    V = state0.shape[0]
    D = nbr.shape[1]
    state = state0.copy()
    key = stream_key(np.uint64(seed), np.uint64(rep), np.uint64(0), np.uint64(CH_GILLESPIE))
    counter = 0
    nocc = 0
    for v in range(V):
        nocc += state[v]
    rates = np.zeros(V)
    for v in range(V):
        rates[v] = _rate(mode, v, state, nbr, lam, delta)
    fw = _fw_build(rates)
    total = rates.sum()
    G = grid.shape[0]
    census = np.zeros(G, np.int64)
    snaps = np.zeros((G if want_snaps else 0, V), np.uint8)
    first_hit = np.full(V if want_hits else 0, np.inf)
    if want_hits:
        for v in range(V):
            if state[v] == 1:
                first_hit[v] = 0.0
    rcap = 1024 if record else 1
    ct = np.empty(rcap)
    cv = np.empty(rcap, np.int64)
    cval = np.empty(rcap, np.uint8)
    nrec = 0
    changed = np.empty(D + 1, np.int64)
    absorb_time = -1.0
    absorb_state = -1
    touched_time = -1.0
    capped_time = -1.0
    t = 0.0
    g = 0
    updates = 0
    if nocc == 0 or (stop_full and nocc == V):
        absorb_time = 0.0
        absorb_state = 0 if nocc == 0 else 1
    elif nocc >= pop_cap:
        capped_time = 0.0
    else:
        while True:
            if total <= 1e-12:
                break
            t_prev = t
            t += -np.log(uniform(key, counter)) / total
            counter += 1
            if t > T:
                break
            g = _fill_grid(grid, g, t, state, nocc, census, snaps, False)
            x = _fw_find(fw, uniform(key, counter) * total)
            counter += 1
            if rates[x] <= 0.0:
                # round-off landed on an empty slot; rebuild and retry
                fw = _fw_build(rates)
                total = rates.sum()
                t = t_prev
                continue
            nch = 0
            m = 0
            if mode == CONTACT_DUAL:
                if uniform(key, counter) * (1.0 + lam) < 1.0:
                    state[x] = 0
                    changed[nch] = x; nch += 1
                else:
                    for s in range(D):
                        w = nbr[x, s]
                        if w >= 0:
                            m |= 1 << s
                            if state[w] == 0:
                                state[w] = 1
                                changed[nch] = w; nch += 1
                counter += 1
            elif mode == VOTER_DUAL:
                state[x] = 0
                changed[nch] = x; nch += 1
                if uniform(key, counter) * (1.0 + delta) < 1.0:
                    subs = odd_submasks(present_mask(nbr, x))
                    j = int(uniform(key, counter + 1) * subs.shape[0])
                    m = subs[min(j, subs.shape[0] - 1)]
                    for s in range(D):
                        if (m >> s) & 1:
                            w = nbr[x, s]
                            state[w] ^= 1
                            changed[nch] = w; nch += 1
                counter += 2
            else:
                state[x] = 1 - state[x]
                changed[nch] = x; nch += 1
                if mode != CONTACT_FWD or state[x] == 1:
                    m = present_mask(nbr, x)
            for j in range(nch):
                w = changed[j]
                nocc += 1 if state[w] == 1 else -1
                if want_hits and state[w] == 1 and first_hit[w] == np.inf:
                    first_hit[w] = t
                if record:
                    if nrec == ct.shape[0]:
                        ct = _grow_f(ct, 2 * nrec)
                        cv = _grow_f(cv, 2 * nrec)
                        cval = _grow_f(cval, 2 * nrec)
                    ct[nrec] = t; cv[nrec] = w; cval[nrec] = state[w]; nrec += 1
            if nch > 0 and touched_time < 0 and _touches(nbr, depth, R, x, m):
                touched_time = t
                if stop_on_touch:
                    break
            # refresh rates of every vertex whose rate may have moved
            for j in range(nch):
                w = changed[j]
                for s in range(-1, D):
                    u = w if s < 0 else nbr[w, s]
                    if u < 0:
                        continue
                    if s >= 0 and (mode == CONTACT_DUAL or mode == VOTER_DUAL):
                        continue
                    r = _rate(mode, u, state, nbr, lam, delta)
                    if r != rates[u]:
                        _fw_add(fw, u, r - rates[u])
                        total += r - rates[u]
                        rates[u] = r
                        updates += 1
            if updates > V + 64:
                fw = _fw_build(rates)
                total = rates.sum()
                updates = 0
            if nocc == 0 or (stop_full and nocc == V):
                absorb_time = t
                absorb_state = 0 if nocc == 0 else 1
                break
            if nocc >= pop_cap:
                capped_time = t
                break
    t_end = min(t, T)
    g = _fill_grid(grid, g, np.inf, state, nocc, census, snaps, True)
    return (state, census, snaps, first_hit, ct[:nrec], cv[:nrec], cval[:nrec],
            absorb_time, absorb_state, touched_time, capped_time, t_end)
