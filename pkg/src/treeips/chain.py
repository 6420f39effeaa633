"""One-dimensional chains behind the survival argument at lambda = 1/(d-1).

The population of the threshold-one contact process at lambda = 1/(d-1)
dominates a birth-death chain with up-rate n + 2/(d-1) and down-rate n
(0 absorbing), which in turn dominates the rescaled walk with both rates
equal to n.  The embedded jump chain of the rescaled walk is the simple
random walk absorbed at 0.
"""
import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy import linalg

from .rng import CH_AUX, stream_key, uniform


@dataclass(frozen=True)
class BDChainSpec:
    """Birth-death chain with up-rate n + drift and down-rate n."""
    drift: float = 0.0

    @classmethod
    def dominating(cls, d):
        if d < 2:
            raise ValueError("d must be >= 2")
        return cls(2.0 / (d - 1))

    @classmethod
    def rescaled_walk(cls):
        return cls(0.0)

    def up(self, n):
        return np.where(np.asarray(n) > 0, np.asarray(n, dtype=float) + self.drift, 0.0)

    def down(self, n):
        return np.asarray(n, dtype=float)


def expected_absorption_truncated(spec, N):
    """E^n[tau_0 ^ tau_N] for n = 1..N-1 from the tridiagonal first-step equations."""
    if N < 2:
        raise ValueError("N must be >= 2")
    n = np.arange(1, N)
    up, down = spec.up(n), spec.down(n)
    m = N - 1
    ab = np.zeros((3, m))
    ab[0, 1:] = -up[:-1]          # super-diagonal
    ab[1, :] = up + down           # diagonal
    ab[2, :-1] = -down[1:]         # sub-diagonal
    return linalg.solve_banded((1, 1), ab, np.ones(m))


def absorption_lower_bound(N):
    """Partial sum over n = 2..N-1 of 1 / (8 (n+1) ln n)."""
    n = np.arange(2, N)
    return float(np.sum(1.0 / (8.0 * (n + 1) * np.log(n))))


def absorption_table(d, Ns):
    """Rows (N, rescaled walk E^1, dominating chain E^1, lower bound)."""
    walk, dom = BDChainSpec.rescaled_walk(), BDChainSpec.dominating(d)
    return [dict(N=int(N), walk=float(expected_absorption_truncated(walk, N)[0]),
                 dominating=float(expected_absorption_truncated(dom, N)[0]),
                 bound=absorption_lower_bound(N)) for N in Ns]


@njit(cache=True)
def _absorption_mc(drift, N, start, reps, seed):
    out = np.empty(reps)
    for r in range(reps):
        key = stream_key(np.uint64(seed), np.uint64(r), np.uint64(0), np.uint64(CH_AUX))
        k = 0
        n = start
        t = 0.0
        while 0 < n < N:
            up = n + drift
            tot = up + n
            t += -np.log(uniform(key, k)) / tot
            n += 1 if uniform(key, k + 1) * tot < up else -1
            k += 2
        out[r] = t
    return out


def absorption_mc(spec, N, reps, seed, start=1):
    """Monte Carlo absorption times of the truncated chain (mean, se)."""
    x = _absorption_mc(float(spec.drift), int(N), int(start), int(reps), int(seed))
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(reps))


def gambler_ruin_exact(n):
    """P^1(T_n < T_0) for the simple random walk."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return 1.0 / n


def gambler_ruin_solve(n):
    """Same probability from the linear system h(k) = (h(k-1) + h(k+1)) / 2."""
    if n == 1:
        return 1.0
    m = n - 1
    ab = np.zeros((3, m))
    ab[0, 1:] = -0.5
    ab[1, :] = 1.0
    ab[2, :-1] = -0.5
    rhs = np.zeros(m)
    rhs[-1] = 0.5
    return float(linalg.solve_banded((1, 1), ab, rhs)[0])


def m_n(n):
    return int(math.floor(n * n / (3.0 * math.log(n))))


def _srw_tail_and_max(m, a):
    """P^0(X_m >= a) and P^0(max_{i <= m} X_i >= a) by dynamic programming."""
    size = 2 * m + 1
    p = np.zeros(size)          # positions -m..m, offset m
    p[m] = 1.0
    hit = 0.0
    for _ in range(m):
        q = np.zeros(size)
        q[1:] += 0.5 * p[:-1]
        q[:-1] += 0.5 * p[1:]
        # positions at or above a are absorbed for the running maximum
        idx = m + a
        hit += q[idx:].sum() if idx < size else 0.0
        if idx < size:
            q[idx:] = 0.0
        p = q
    # tail from the free walk
    free = np.zeros(size)
    free[m] = 1.0
    for _ in range(m):
        g = np.zeros(size)
        g[1:] += 0.5 * free[:-1]
        g[:-1] += 0.5 * free[1:]
        free = g
    tail = free[m + a:].sum() if m + a < size else 0.0
    return float(tail), float(hit)


def _hit_before_zero_by(n, m):
    """P^1(T_n < T_0, T_n < m) for the walk on [0, n] with absorbing ends."""
    p = np.zeros(n + 1)
    p[1] = 1.0
    got = 0.0
    for _ in range(m - 1):
        q = np.zeros(n + 1)
        q[2:] += 0.5 * p[1:-1]
        q[:-2] += 0.5 * p[2:]
        q[1] += 0.0
        got += q[n]
        q[0] = 0.0
        q[n] = 0.0
        p = q
    return float(got)


def srw_bounds_check(n, dp_cap=200_000):
    """Evaluate every link of the random-walk bound chain at n exactly."""
    if n < 10:
        raise ValueError("n must be >= 10")
    m = m_n(n)
    if m > dp_cap:
        raise ValueError("DP size cap exceeded")
    a = n - 1
    tail, mx = _srw_tail_and_max(m, a)
    chernoff = math.exp(-a * a / m)
    hoeffding = math.exp(-a * a / (2.0 * m))
    joint = 1.0 / n - _hit_before_zero_by(n, m)
    links = {
        "reflection": mx <= 2 * tail + 1e-15,
        "chernoff": tail <= chernoff,
        "exp_vs_power": chernoff <= n ** -2.0,
        "joint_lower": joint >= 1.0 / (2 * n),
    }
    return dict(n=n, m_n=m, tail=tail, max_prob=mx, chernoff_bound=chernoff,
                hoeffding_bound=hoeffding, tail_le_n_minus_2=tail <= n ** -2.0,
                joint=joint, links=links, holds=all(links.values()))


# ---------------------------------------------------------------------------
# domination coupling


@njit(cache=True)
def _coupled_run(nbr, depth, R, lam, drift, T, seed, rep):
    """Contact process from {o} jointly with the dominating chain from 1.

    Returns (violations, contract_void, boundary_hit, final |xi|, final chain).
    """
    V = nbr.shape[0]
    D = nbr.shape[1]
    state = np.zeros(V, np.uint8)
    occ_pos = np.full(V, -1, np.int64)
    occ = np.empty(V, np.int64)
    fr_pos = np.full(V, -1, np.int64)
    fr = np.empty(V, np.int64)
    cnt = np.zeros(V, np.int64)
    nocc = 0
    nfr = 0
    key = stream_key(np.uint64(seed), np.uint64(rep), np.uint64(1), np.uint64(CH_AUX))
    k = 0
    # start: occupy the root
    state[0] = 1
    occ[0] = 0
    occ_pos[0] = 0
    nocc = 1
    for s in range(D):
        w = nbr[0, s]
        if w >= 0:
            cnt[w] += 1
            if cnt[w] == 1:
                fr_pos[w] = nfr
                fr[nfr] = w
                nfr += 1
    chain = 1
    t = 0.0
    violations = 0
    void = False
    boundary = False
    while nocc > 0:
        birth = lam * nfr
        if chain < nocc and chain > 0:
            crate = 2.0 * chain + drift
        else:
            crate = 0.0
        tot = nocc + birth + crate
        t += -np.log(uniform(key, k)) / tot
        u = uniform(key, k + 1) * tot
        k += 2
        if t > T:
            break
        move_chain_up = False
        move_chain_down = False
        if u < nocc:
            j = min(int(u), nocc - 1)
            x = occ[j]
            # death
            last = occ[nocc - 1]
            occ[j] = last
            occ_pos[last] = j
            occ_pos[x] = -1
            nocc -= 1
            state[x] = 0
            for s in range(D):
                w = nbr[x, s]
                if w >= 0:
                    cnt[w] -= 1
                    if cnt[w] == 0 and state[w] == 0:
                        jj = fr_pos[w]
                        lw = fr[nfr - 1]
                        fr[jj] = lw
                        fr_pos[lw] = jj
                        fr_pos[w] = -1
                        nfr -= 1
            if cnt[x] > 0:
                fr_pos[x] = nfr
                fr[nfr] = x
                nfr += 1
            if chain == nocc + 1 and chain > 0:
                move_chain_down = True
        elif u < nocc + birth:
            j = min(int((u - nocc) / lam), nfr - 1)
            x = fr[j]
            lw = fr[nfr - 1]
            fr[j] = lw
            fr_pos[lw] = j
            fr_pos[x] = -1
            nfr -= 1
            state[x] = 1
            occ_pos[x] = nocc
            occ[nocc] = x
            nocc += 1
            if depth[x] == R:
                boundary = True
            for s in range(D):
                w = nbr[x, s]
                if w >= 0:
                    cnt[w] += 1
                    if cnt[w] == 1 and state[w] == 0:
                        fr_pos[w] = nfr
                        fr[nfr] = w
                        nfr += 1
            if chain == nocc - 1 and chain > 0:
                p = (chain + drift) / birth
                if p > 1.0 + 1e-12:
                    void = True
                if uniform(key, k) < p:
                    move_chain_up = True
                k += 1
        else:
            if uniform(key, k) * crate < chain + drift:
                move_chain_up = True
            else:
                move_chain_down = True
            k += 1
        if move_chain_up:
            chain += 1
        if move_chain_down:
            chain -= 1
        if chain > nocc:
            violations += 1
        if boundary:
            break
    return violations, void, boundary, nocc, chain


def domination_coupling_check(tree, T, reps, seed, lam=None):
    """Run the coupling of |xi_t| with the dominating chain; count violations of
    chain <= |xi| and replicates aborted at the ball boundary."""
    d = tree.d
    lam = 1.0 / (d - 1) if lam is None else float(lam)
    drift = 2.0 / (d - 1)
    violations = aborted = void = 0
    for r in range(reps):
        v, vd, b, _, _ = _coupled_run(tree.nbr, tree.depth, tree.R, lam, drift, float(T),
                                      int(seed), r)
        violations += v > 0
        aborted += b
        void += vd
    return dict(d=d, lam=lam, reps=reps, violations=int(violations), aborted=int(aborted),
                contract_void=bool(void) or lam < 1.0 / (d - 1) - 1e-12)


# ---------------------------------------------------------------------------
# conditioned paths


def harmonic_path_bound(path, n):
    """Check sum_{i<m} 1/x_i >= m/n for an embedded path 1 = x_0, ..., x_m = n."""
    path = np.asarray(path)
    if path[0] != 1 or path[-1] != n or np.any(np.abs(np.diff(path)) != 1):
        raise ValueError("not a nearest-neighbor path from 1 to n")
    inner = path[:-1]
    if inner.min() < 1 or inner.max() > n - 1:
        raise ValueError("path leaves [1, n-1] before hitting n")
    m = len(path) - 1
    return float(np.sum(1.0 / inner)), m / n


@njit(cache=True)
def _sample_paths(n, reps, seed, maxlen):
    lengths = np.zeros(reps, np.int64)
    harm = np.zeros(reps)
    hold = np.zeros(reps)
    for r in range(reps):
        key = stream_key(np.uint64(seed), np.uint64(r), np.uint64(2), np.uint64(CH_AUX))
        x = 1
        k = 0
        h = 0.0
        dur = 0.0
        while 0 < x < n and k < maxlen:
            h += 1.0 / x
            dur += -np.log(uniform(key, 2 * k + 1)) / (2.0 * x)
            x += 1 if uniform(key, 2 * k) < 0.5 else -1
            k += 1
        lengths[r] = k if x == n else -1
        harm[r] = h
        hold[r] = dur
    return lengths, harm, hold


def conditioned_path_time_bound(n, reps, seed):
    """Sample embedded paths from 1 that reach n before 0 and check the
    harmonic-sum bound; aggregate over paths with at least m_n steps."""
    lengths, harm, dur = _sample_paths(int(n), int(reps), int(seed), 50 * n * n)
    ok = lengths > 0
    per_path = bool(np.all(harm[ok] >= lengths[ok] / n))
    m = m_n(n)
    long_ = ok & (lengths >= m)
    sel = dur[long_]
    mean = float(sel.mean()) if sel.size else float("nan")
    se = float(sel.std(ddof=1) / math.sqrt(sel.size)) if sel.size > 1 else float("nan")
    return dict(n=n, m_n=m, paths=int(ok.sum()), long_paths=int(long_.sum()),
                per_path_bound=per_path, mean_duration=mean, se=se,
                mean_harmonic=float(harm[long_].mean()) if sel.size else float("nan"),
                target=m / n, log_target=n / (4 * math.log(n)))
