"""Contact process on the infinite tree for bounded populations.

A vertex (n, r) is the key (n, hi, lo): lo is the prefix code of the last
labels of r (1 for the empty word, v -> v*d + c - 1 to append c) holding at
most K labels, hi the prefix code of the earlier labels in whole blocks of K.
Only occupied vertices and their neighbors are materialized, so there is no
truncation boundary; runs stop at a population cap instead.
"""
import numpy as np
from numba import njit, types
from numba.typed import Dict

from .rng import CH_GILLESPIE, stream_key, uniform

# restriction modes
WHOLE = 0
SUBTREE_O = 1         # T_o: o and its descendants
SUBTREE_X1_O = 2      # T_{x1} together with o

EXTINCT, CAPPED, ALIVE, OVERFLOW = 0, 1, 2, 3

KEY = types.UniTuple(types.int64, 3)


def block(d):
    """Labels per 62-bit block for branching d."""
    k = 0
    while d ** (k + 2) < (1 << 62):
        k += 1
    return k


def max_word(d):
    """Longest r the key can hold: one full hi block plus a lo block, less one
    so that neighbors of an admitted vertex still fit."""
    return 2 * block(d) - 1


def encode(addr, d):
    n, r = addr
    k = block(d)
    hi = lo = 1
    for c in r:
        if lo >= d ** k:
            hi = hi * d ** k + (lo - d ** k)
            lo = 1
        lo = lo * d + (c - 1)
    return (n, hi, lo)


def _digits(v, d):
    out = []
    while v > 1:
        out.append(v % d + 1)
        v //= d
    return out[::-1]


def decode(key, d):
    n, hi, lo = key
    k = block(d)
    r = []
    blocks = []
    while hi > 1:
        blocks.append(hi % d ** k)
        hi //= d ** k
    for b in reversed(blocks):
        r.extend(_digits(d ** k + b, d))
    r.extend(_digits(lo, d))
    return (n, r)


@njit(cache=True)
def _nbr(key, s, d, dk):
    n, hi, lo = key
    if s == 0:
        if lo > 1:
            lo //= d
            if lo == 1 and hi > 1:
                lo = dk + hi % dk
                hi //= dk
            return (n, hi, lo)
        return (n + 1, 1, 1)
    if lo == 1 and hi == 1 and n >= 1 and s == 1:
        return (n - 1, 1, 1)
    if lo >= dk:
        hi = hi * dk + (lo - dk)
        lo = 1
    return (n, hi, lo * d + s - 1)


@njit(cache=True)
def _wordlen(key, d, k):
    n, hi, lo = key
    m = 0
    while lo > 1:
        lo //= d
        m += 1
    while hi > 1:
        hi //= d
        m += 1
    return m


@njit(cache=True)
def _allowed(key, mode, d):
    if mode == 0:
        return True
    n, hi, lo = key
    if n != 0:
        return False
    if mode == 1:
        return True
    v = hi if hi > 1 else lo
    if v == 1:
        return True
    while v >= d * d:
        v //= d
    return v == d  # first label is 1


@njit(cache=True)
def _is_spine(x, d):
    # (0, (1,)*m): all digits zero below the leading 1
    n, hi, lo = x
    if n != 0 or hi != 1:
        return -1
    m = 0
    while lo > 1:
        if lo % d != 0:
            return -1
        lo //= d
        m += 1
    return m


@njit(cache=True)
def lazy_contact(d, lam, init, T, seed, rep, pop_cap, mode, grid, ball_n, nspine):
    """One replicate.

    Returns (outcome, stop time, max depth, census, ball census, root
    occupancy, spine first-hit times).  Grid entries after a cap stop are -1.
    """
    D = d + 1
    occ_idx = Dict.empty(key_type=KEY, value_type=types.int64)
    cnt = Dict.empty(key_type=KEY, value_type=types.int64)
    fr_idx = Dict.empty(key_type=KEY, value_type=types.int64)
    cap = pop_cap + 1
    occ = [(0, 1, 1)] * cap
    fr = [(0, 1, 1)] * (cap * D + 1)
    k_blk = 0
    while d ** (k_blk + 2) < (1 << 62):
        k_blk += 1
    dk = d ** k_blk
    maxlen = 2 * k_blk - 1
    root = (0, 1, 1)
    nocc = 0
    nfr = 0
    nin = 0
    maxdepth = 0
    G = grid.shape[0]
    census = np.full(G, -1, np.int64)
    incount = np.full(G, -1, np.int64)
    rootocc = np.full(G, -1, np.int64)
    hits = np.full(nspine + 1, np.inf)
    g = 0
    rkey = stream_key(np.uint64(seed), np.uint64(rep), np.uint64(0), np.uint64(CH_GILLESPIE))
    k = 0
    outcome = ALIVE
    t = 0.0
    for i in range(init.shape[0] + 1 << 30):
        # index i < len(init): initial placement; afterwards: dynamics
        if i < init.shape[0]:
            x = (init[i, 0], init[i, 1], init[i, 2])
            if x in occ_idx or not _allowed(x, mode, d):
                continue
            birth = True
        else:
            if i == init.shape[0]:
                if nocc == 0:
                    outcome = EXTINCT
                elif nocc >= pop_cap:
                    outcome = CAPPED
            if outcome != ALIVE:
                break
            tot = nocc + lam * nfr
            t += -np.log(uniform(rkey, k)) / tot
            u = uniform(rkey, k + 1) * tot
            k += 2
            if t > T:
                t = T
                break
            while g < G and grid[g] < t:
                census[g] = nocc
                incount[g] = nin
                rootocc[g] = 1 if root in occ_idx else 0
                g += 1
            if u < nocc:
                birth = False
                x = occ[min(int(u), nocc - 1)]
            else:
                birth = True
                x = fr[min(int((u - nocc) / lam), nfr - 1)]
        m = _wordlen(x, d, k_blk)
        dep = x[0] + m
        if birth:
            if x in fr_idx:
                j = fr_idx[x]
                del fr_idx[x]
                lw = fr[nfr - 1]
                fr[j] = lw
                if lw != x:
                    fr_idx[lw] = j
                nfr -= 1
            occ_idx[x] = nocc
            occ[nocc] = x
            nocc += 1
            if dep <= ball_n:
                nin += 1
            if dep > maxdepth:
                maxdepth = dep
            sp = _is_spine(x, d)
            if sp >= 0 and sp <= nspine and hits[sp] == np.inf:
                hits[sp] = t
            for s in range(D):
                w = _nbr(x, s, d, dk)
                if not _allowed(w, mode, d):
                    continue
                c = cnt.get(w, 0) + 1
                cnt[w] = c
                if c == 1 and w not in occ_idx:
                    fr_idx[w] = nfr
                    fr[nfr] = w
                    nfr += 1
            if i >= init.shape[0]:
                if m >= maxlen:
                    outcome = OVERFLOW
                elif nocc >= pop_cap:
                    outcome = CAPPED
        else:
            j = occ_idx[x]
            del occ_idx[x]
            last = occ[nocc - 1]
            occ[j] = last
            if last != x:
                occ_idx[last] = j
            nocc -= 1
            if dep <= ball_n:
                nin -= 1
            for s in range(D):
                w = _nbr(x, s, d, dk)
                if not _allowed(w, mode, d):
                    continue
                c = cnt[w] - 1
                if c == 0:
                    del cnt[w]
                    if w in fr_idx:
                        jj = fr_idx[w]
                        del fr_idx[w]
                        lw = fr[nfr - 1]
                        fr[jj] = lw
                        if lw != w:
                            fr_idx[lw] = jj
                        nfr -= 1
                else:
                    cnt[w] = c
            if x in cnt:
                fr_idx[x] = nfr
                fr[nfr] = x
                nfr += 1
            if nocc == 0:
                outcome = EXTINCT
    if outcome != CAPPED and outcome != OVERFLOW:
        while g < G and (outcome == EXTINCT or grid[g] <= t + 1e-12):
            census[g] = nocc
            incount[g] = nin
            rootocc[g] = 1 if root in occ_idx else 0
            g += 1
    return outcome, t, maxdepth, census, incount, rootocc, hits


class LazyRuns:
    """Replicate outputs of ``run_lazy`` as arrays over replicates."""

    def __init__(self, outcome, stop_time, max_depth, census, ball, root, hits):
        self.outcome = outcome
        self.stop_time = stop_time
        self.max_depth = max_depth
        self.census = census
        self.ball = ball
        self.root = root
        self.hits = hits

    @property
    def reps(self):
        return self.outcome.size

    def count(self, code):
        return int(np.sum(self.outcome == code))


def run_lazy(d, lam, init_addrs, T, seed, reps, pop_cap=200, mode=WHOLE, grid=(),
             ball_n=-1, nspine=0, rep0=0):
    """Replicate the bounded-population infinite-tree contact process."""
    if d < 2:
        raise ValueError("d must be >= 2")
    if lam < 0 or T < 0:
        raise ValueError("negative rate or horizon")
    init = np.array([encode(a, d) for a in init_addrs], dtype=np.int64).reshape(-1, 3)
    grid = np.asarray(grid, dtype=float)
    lam = max(float(lam), 1e-300)
    out = np.empty(reps, np.int64)
    tt = np.empty(reps)
    dep = np.empty(reps, np.int64)
    G = grid.size
    cen = np.empty((reps, G), np.int64)
    ball = np.empty((reps, G), np.int64)
    root = np.empty((reps, G), np.int64)
    hits = np.empty((reps, nspine + 1))
    for r in range(reps):
        res = lazy_contact(int(d), lam, init, float(T), int(seed), rep0 + r, int(pop_cap),
                           int(mode), grid, int(ball_n), int(nspine))
        out[r], tt[r], dep[r], cen[r], ball[r], root[r], hits[r] = res
    return LazyRuns(out, tt, dep, cen, ball, root, hits)
