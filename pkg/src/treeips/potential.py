"""The tree-indexed Markov field nu_eps, the test function f and its drift.

Under nu_eps on T_2 the value at a vertex is 1 with probability
eps/(q+eps); along an edge a 1 is followed by a 0 with probability q and a
0 by a 1 with probability eps, and the neighbors of a vertex are
conditionally independent given its value.  The test function is the
eps -> 0 limit

    f(A) = lim (1 - nu_eps(eta = 0 on A)) / nu_eps(eta(x) = 1)

which equals the inclusion-exclusion sum over nonempty B in A of
(-1)^{|B|+1} c^{|hull(B)|-1} with c = 1 - q.  The drift h(A) is the
generator of the dual contact process applied to f.
"""
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numba import njit

from .rng import CH_AUX, stream_key, uniform
from .tree import (components, connected_hull, distance, is_connected, partition_KLK)

IE_CAP = 16
RATIO_TARGET = 1.0 / 0.6369


# ---------------------------------------------------------------------------
# finite-eps oracle


def _rooted_hull(tree, vertices):
    hull = connected_hull(tree, vertices)
    root = min(hull, key=lambda v: (tree.depth[v], v))
    order, children = [root], {}
    for v in order:
        kids = [int(w) for w in tree.nbr[v] if w >= 0 and int(w) in hull and int(tree.up[w]) == v]
        children[v] = kids
        order.extend(kids)
    return root, order, children


def nu_eps_exact(tree, psi, q, eps):
    """Probability of {eta = psi on A} under nu_eps (psi maps vertex -> 0/1)."""
    if not (0 < q < 1 and eps > 0 and q + eps <= 1 + 1e-15):
        raise ValueError("need 0 < q < 1 and 0 < eps with q + eps <= 1")
    if not psi:
        return 1.0
    P = np.array([[1 - eps, eps], [q, 1 - q]])   # P[s, s']
    pi1 = eps / (q + eps)
    pi = np.array([1 - pi1, pi1])
    root, order, children = _rooted_hull(tree, list(psi))
    F = {}
    for v in reversed(order):
        vals = np.ones(2)
        if v in psi:
            vals[1 - int(psi[v])] = 0.0
        for c in children[v]:
            vals = vals * (P @ F[c])
        F[v] = vals
    return float(pi @ F[root])


def _richardson(xs, ys):
    """Value at 0 of the interpolating polynomial (Neville)."""
    xs, p = list(xs), list(ys)
    n = len(xs)
    for m in range(1, n):
        for i in range(n - m):
            p[i] = (xs[i + m] * p[i] - xs[i] * p[i + 1]) / (xs[i + m] - xs[i])
    return p[0]


def f_limit_numeric(tree, A, q, eps_sequence=(1e-3, 1e-4, 1e-5)):
    """f(A) from the defining ratio at finite eps, extrapolated to eps -> 0."""
    eps_sequence = list(eps_sequence)
    if any(b >= a for a, b in zip(eps_sequence, eps_sequence[1:])):
        raise ValueError("eps sequence must be strictly decreasing")
    A = sorted(A)
    if not A:
        return 0.0
    ratios = []
    for eps in eps_sequence:
        zero = nu_eps_exact(tree, {v: 0 for v in A}, q, eps)
        ratios.append((1.0 - zero) / (eps / (q + eps)))
    return float(_richardson(eps_sequence, ratios))


# ---------------------------------------------------------------------------
# inclusion-exclusion machinery


def _preorder(tree):
    cached = getattr(tree, "_preorder", None)
    if cached is None:
        cached = np.empty(tree.V, np.int64)
        stack, k = [0], 0
        while stack:
            v = stack.pop()
            cached[v] = k
            k += 1
            kids = [int(w) for w in tree.nbr[v] if w >= 0 and int(tree.up[w]) == v]
            stack.extend(reversed(kids))
        tree._preorder = cached
    return cached


@njit(cache=True)
def _steiner_sizes(dist):
    """|hull(S)| for every nonempty subset S (bitmask) of points listed in
    depth-first order: half the cyclic tour length plus one."""
    k = dist.shape[0]
    out = np.zeros(1 << k, np.int64)
    idx = np.empty(k, np.int64)
    for mask in range(1, 1 << k):
        n = 0
        for i in range(k):
            if (mask >> i) & 1:
                idx[n] = i
                n += 1
        tour = 0
        for j in range(n):
            tour += dist[idx[j], idx[(j + 1) % n]]
        out[mask] = tour // 2 + 1
    return out


def _ordered(tree, vertices):
    pre = _preorder(tree)
    vs = sorted(set(int(v) for v in vertices), key=lambda v: pre[v])
    dist = np.array([[distance(tree, a, b) for b in vs] for a in vs], dtype=np.int64)
    return vs, dist


def _popcounts(k):
    m = np.arange(1 << k)
    return np.array([bin(x).count("1") for x in m])


def f_poly(tree, A):
    """Integer coefficients a_e with f(A) = sum_e a_e c^e."""
    A = list(A)
    if len(A) > IE_CAP:
        raise ValueError("|A| = %d exceeds the inclusion-exclusion cap %d" % (len(A), IE_CAP))
    if not A:
        return np.zeros(1, np.int64)
    vs, dist = _ordered(tree, A)
    sizes = _steiner_sizes(dist)
    pc = _popcounts(len(vs))
    coef = np.zeros(int(sizes.max()), np.int64)
    sign = np.where(pc % 2 == 1, 1, -1)
    np.add.at(coef, sizes[1:] - 1, sign[1:])
    return coef


def cond_zero_poly(tree, y, C):
    """Coefficients of lim nu(eta = 0 on C | eta(y) = 1) in powers of c (y not in C)."""
    C = [v for v in C if v != y]
    if len(C) + 1 > IE_CAP + 1:
        raise ValueError("set exceeds the inclusion-exclusion cap")
    vs, dist = _ordered(tree, C + [y])
    iy = vs.index(y)
    sizes = _steiner_sizes(dist)
    pc = _popcounts(len(vs))
    masks = np.arange(1 << len(vs))
    sel = (masks >> iy) & 1 == 1
    coef = np.zeros(int(sizes.max()), np.int64)
    sign = np.where((pc[sel] - 1) % 2 == 0, 1, -1)
    np.add.at(coef, sizes[sel] - 1, sign)
    return coef


def peval(coef, q):
    return float(np.polynomial.polynomial.polyval(1.0 - q, coef))


def f_limit(tree, A, q):
    """Closed-form f(A) by inclusion-exclusion over subsets of A."""
    return peval(f_poly(tree, A), q)


def cond_zero(tree, y, C, q):
    return peval(cond_zero_poly(tree, y, C), q)


# ---------------------------------------------------------------------------
# first-order series evaluation over the hull (any set size)


@njit(cache=True)
def _f_series(nbr, up, depth, members, q):
    """f(A) via the eps-expansion of nu_eps(eta = 0 on A), in O(hull) time.

    For each hull vertex v (hull rooted at its top vertex) keep
    a_v: first-order coefficient of 1 - P(0 on A below v | eta(v) = 0),
    b_v: P(0 on A below v | eta(v) = 1) at eps = 0.
    """
    k = members.shape[0]
    if k == 0:
        return 0.0
    V = nbr.shape[0]
    # union of root paths, then cut it at the top of the hull
    mark = {}
    below = {}
    order = sorted([(depth[m], m) for m in members])
    for i in range(k - 1, -1, -1):
        v = order[i][1]
        while True:
            if v in mark:
                break
            mark[v] = 1
            if up[v] < 0:
                break
            v = up[v]
    cnt = {}
    inA = {}
    for m in members:
        inA[m] = 1
    verts = sorted([(depth[v], v) for v in mark])
    for v in mark:
        cnt[v] = 1 if v in inA else 0
    for i in range(len(verts) - 1, -1, -1):
        v = verts[i][1]
        if up[v] >= 0 and up[v] in mark:
            cnt[up[v]] += cnt[v]
    top = -1
    for i in range(len(verts)):
        v = verts[i][1]
        if cnt[v] == k:
            top = v
    a = {}
    b = {}
    for i in range(len(verts) - 1, -1, -1):
        v = verts[i][1]
        if cnt[v] == 0 or (cnt[v] == k and v != top):
            continue
        av = 0.0
        bv = 0.0 if v in inA else 1.0
        for s in range(nbr.shape[1]):
            w = nbr[v, s]
            if w >= 0 and w in a and up[w] == v:
                av += 1.0 + a[w] - b[w]
                bv *= q + (1.0 - q) * b[w]
        a[v] = av
        b[v] = bv
        if v == top:
            break
    return q * a[top] + 1.0 - b[top]


def f_series(tree, A, q):
    """f(A) for sets of any size (exact limit, linear in the hull size)."""
    members = np.fromiter(sorted(set(A)), dtype=np.int64)
    return float(_f_series(tree.nbr, tree.up, tree.depth, members, float(q)))


# ---------------------------------------------------------------------------
# gamma and the two drift evaluators


def side_of(tree, x, y, A):
    """A cap S_y(x): members whose geodesic to x passes through y."""
    return [z for z in A if distance(tree, z, x) == distance(tree, z, y) + 1]


def gamma(tree, x, y, A, q):
    """1 - nu(eta = 0 on A cap S_y(x) | eta(y) = 1)."""
    if int(y) not in {int(w) for w in tree.nbr[x] if w >= 0}:
        raise ValueError("y is not a neighbor of x")
    side = side_of(tree, x, y, A)
    if y in side:
        return 1.0
    if not side:
        return 0.0
    return 1.0 - cond_zero(tree, y, side, q)


def _check_drift_args(tree, A):
    if tree.d != 2:
        raise ValueError("the drift formulas are for d = 2")
    A = sorted(set(A))
    if not A:
        raise ValueError("A must be nonempty")
    if not tree.interior(A):
        raise ValueError("A touches the truncation boundary")
    if len(A) > IE_CAP:
        raise ValueError("|A| exceeds the inclusion-exclusion cap")
    return A


def _outside_pairs(tree, A):
    S = set(A)
    return [(x, int(y)) for x in A for y in tree.nbr[x] if y >= 0 and int(y) not in S]


@dataclass
class DriftPolys:
    """Polynomials in c = 1 - q for the boundary and interior sums of h."""
    boundary: np.ndarray
    interior: np.ndarray

    def terms(self, q):
        return peval(self.boundary, q), peval(self.interior, q)

    def h(self, lam, q):
        b, i = self.terms(q)
        return lam * b - i

    def ratio(self, q):
        b, i = self.terms(q)
        return b / i


def _padd(a, b):
    n = max(len(a), len(b))
    out = np.zeros(n, np.int64)
    out[:len(a)] += a
    out[:len(b)] += b
    return out


def drift_polys(tree, A):
    A = _check_drift_args(tree, A)
    bnd = np.zeros(1, np.int64)
    for x, y in _outside_pairs(tree, A):
        bnd = _padd(bnd, cond_zero_poly(tree, y, A))
    inner = np.zeros(1, np.int64)
    for x in A:
        inner = _padd(inner, cond_zero_poly(tree, x, [z for z in A if z != x]))
    return DriftPolys(bnd, inner)


def drift_h_global(tree, A, lam, q):
    """h(A) = lam * sum over boundary pairs of nu(0 on A | eta(y)=1)
    - sum over x in A of nu(0 on A minus x | eta(x)=1)."""
    return drift_polys(tree, A).h(lam, q)


@dataclass
class PotentialReport:
    A: tuple
    q: float
    lam: float
    f: float
    contributions: list = field(default_factory=list)
    h_components: float = 0.0
    h_global: float = 0.0

    @property
    def residual(self):
        return abs(self.h_global - self.h_components)

    def as_dict(self):
        return dict(A=list(self.A), q=self.q, lam=self.lam, f=self.f,
                    contributions=self.contributions, h_components=self.h_components,
                    h_global=self.h_global, residual=self.residual)


def component_drift(tree, B, A, lam, q):
    """Contribution of the component B of A to h(A)."""
    B = set(B)
    if len(B) == 1:
        x = next(iter(B))
        gs = [gamma(tree, x, int(y), A, q) for y in tree.nbr[x]]
        return lam * q * sum(1 - g for g in gs) - float(np.prod([1 - (1 - q) * g for g in gs]))
    K, L, Kp = partition_KLK(tree, B)
    h = -len(K) * q ** 3
    for x in L:
        (y,) = [int(w) for w in tree.nbr[x] if int(w) not in B]
        g = gamma(tree, x, y, A, q)
        h += q * lam * (1 - g) - q * q * (1 - (1 - q) * g)
    for x in Kp:
        z, zs = [int(w) for w in tree.nbr[x] if int(w) not in B]
        gz, gzs = gamma(tree, x, z, A, q), gamma(tree, x, zs, A, q)
        h += q * lam * (2 - gz - gzs) - q * (1 - (1 - q) * gz) * (1 - (1 - q) * gzs)
    return h


def drift_h_components(tree, A, lam, q):
    """h(A) assembled from per-component contributions; carries the global
    evaluator for comparison."""
    A = _check_drift_args(tree, A)
    contribs = []
    for B in components(tree, A):
        contribs.append({"B": sorted(B), "h_B": component_drift(tree, B, A, lam, q)})
    total = float(sum(c["h_B"] for c in contribs))
    return PotentialReport(tuple(A), q, lam, f_limit(tree, A, q), contribs, total,
                           drift_h_global(tree, A, lam, q))


def inequality_410_check(tree, A, q):
    """Ratio of the boundary sum to the interior sum of the drift."""
    if not A:
        raise ValueError("A must be nonempty")
    return drift_polys(tree, A).ratio(q)


# ---------------------------------------------------------------------------
# families of sets and the q scan


def tree_shapes(max_size, max_degree=3):
    """Non-isomorphic trees with at most ``max_size`` vertices and bounded degree,
    as adjacency lists."""
    import networkx as nx
    shapes = [[[]]]
    for n in range(2, max_size + 1):
        for g in nx.nonisomorphic_trees(n):
            if max(dict(g.degree()).values()) <= max_degree:
                shapes.append([sorted(g.neighbors(v)) for v in range(n)])
    return shapes


def embed_shape(tree, adj):
    """Place an abstract tree in the ball with a central vertex at the root."""
    n = len(adj)
    # center: minimize eccentricity
    def ecc(s):
        dist, stack = {s: 0}, [s]
        while stack:
            u = stack.pop()
            for w in adj[u]:
                if w not in dist:
                    dist[w] = dist[u] + 1
                    stack.append(w)
        return max(dist.values())
    c = min(range(n), key=ecc)
    place = {c: 0}
    stack = [c]
    while stack:
        u = stack.pop()
        free = [int(w) for w in tree.nbr[place[u]] if w >= 0 and int(w) not in place.values()]
        for w in adj[u]:
            if w not in place:
                place[w] = free.pop(0)
                stack.append(w)
    return frozenset(place.values())


def connected_family(tree, max_size):
    """One representative of every connected shape with |A| <= max_size."""
    return [embed_shape(tree, adj) for adj in tree_shapes(max_size)]


def q_grid():
    return np.round(np.arange(0.50, 0.95 + 1e-9, 0.005), 3)


def q_scan(tree, family, lam, qs=None):
    """Minimum drift and minimum ratio over the family at each q."""
    qs = q_grid() if qs is None else np.asarray(qs)
    polys = [(A, drift_polys(tree, A)) for A in family]
    rows = []
    for q in qs:
        hs = [(p.h(lam, q), A) for A, p in polys]
        rs = [(p.ratio(q), A) for A, p in polys]
        hmin, Ah = min(hs, key=lambda t: t[0])
        rmin, Ar = min(rs, key=lambda t: t[0])
        rows.append(dict(q=float(q), min_h=float(hmin), argmin_h=sorted(Ah),
                         min_ratio=float(rmin), argmin_ratio=sorted(Ar)))
    return rows


def select_q(rows, tol=1e-9):
    """Among q with min h >= -tol, the one with the largest minimum ratio;
    None if no q qualifies."""
    ok = [r for r in rows if r["min_h"] >= -tol]
    if not ok:
        return None
    return max(ok, key=lambda r: (r["min_ratio"], r["min_h"]))


# ---------------------------------------------------------------------------
# supermartingale harness


def static_family(tree, max_size=8, n_random=200, seed=0):
    """Connected shapes up to ``max_size``, every subset of B(o, 2) with at most
    ``max_size`` members, and random subsets of B(o, 3)."""
    from itertools import combinations
    fam = {A for A in connected_family(tree, max_size)}
    b2 = [int(v) for v in np.flatnonzero(tree.depth <= 2)]
    for k in range(1, max_size + 1):
        for c in combinations(b2, k):
            fam.add(frozenset(c))
    rng = np.random.default_rng(seed)
    b3 = np.flatnonzero(tree.depth <= 3)
    for _ in range(n_random):
        k = int(rng.integers(1, max_size + 1))
        fam.add(frozenset(int(v) for v in rng.choice(b3, size=k, replace=False)))
    return sorted(fam, key=lambda A: (len(A), sorted(A)))


def static_bounds(tree, family, q, jump_cap=7.0, tol=1e-12):
    """Removal increments, branching jumps and the linear sandwich of f.

    Checks q^3 <= f(A) - f(A minus x) <= 1 for x in A, and
    f(A cup N_x) - f(A) <= jump_cap for x in A.  Returns the extremes, the
    first offending set of each kind, and C1 = min f/|A|, C2 = max f/|A|.
    """
    lo, hi, jmax = np.inf, -np.inf, -np.inf
    bad_inc = bad_jump = None
    c1, c2 = np.inf, -np.inf
    cache = {}

    def f(S):
        S = frozenset(S)
        if S not in cache:
            cache[S] = f_series(tree, S, q) if S else 0.0
        return cache[S]

    q3 = q ** 3
    for A in family:
        fa = f(A)
        c1 = min(c1, fa / len(A))
        c2 = max(c2, fa / len(A))
        for x in A:
            inc = fa - f(A - {x})
            if inc < lo:
                lo = inc
            if inc > hi:
                hi = inc
            if (inc < q3 - tol or inc > 1 + tol) and bad_inc is None:
                bad_inc = (sorted(A), x, inc)
            nb = {int(w) for w in tree.nbr[x] if w >= 0}
            if len(nb) < tree.d + 1:
                raise ValueError("set touches the last sphere; use a larger ball")
            jump = f(A | nb) - fa
            if jump > jmax:
                jmax = jump
            if jump > jump_cap + tol and bad_jump is None:
                bad_jump = (sorted(A), x, jump)
    return dict(q=float(q), sets=len(family), min_increment=float(lo),
                max_increment=float(hi), q3=q3, max_jump=float(jmax),
                increment_ok=bad_inc is None, jump_ok=bad_jump is None,
                bad_increment=bad_inc, bad_jump=bad_jump, C1=float(c1), C2=float(c2))




@njit(cache=True)
def _dual_f_path(nbr, up, depth, R, lam, q, init, T, seed, rep, grid, c):
    """Dual contact process from ``init`` with f(xi) tracked up to
    tau = inf{t : f(xi_t) <= c}.  Returns (f at grid times, frozen after tau;
    tau or -1; first time a branching event was clipped by the ball or -1)."""
    V = nbr.shape[0]
    D = nbr.shape[1]
    state = np.zeros(V, np.uint8)
    pos = np.full(V, -1, np.int64)
    items = np.empty(V, np.int64)
    n = 0
    for v in init:
        if state[v] == 0:
            state[v] = 1
            pos[v] = n
            items[n] = v
            n += 1
    key = stream_key(np.uint64(seed), np.uint64(rep), np.uint64(0), np.uint64(CH_AUX))
    counter = 0
    # f(A) >= q^3 |A|, so f <= c is only possible for small sets
    small = c / (q * q * q)
    G = grid.shape[0]
    out = np.zeros(G)
    t = 0.0
    g = 0
    tau = -1.0
    clipped = -1.0
    fcur = _f_series(nbr, up, depth, items[:n].copy(), q)
    if fcur <= c:
        tau = 0.0
    while tau < 0 and n > 0:
        t += -np.log(uniform(key, counter)) / (n * (1.0 + lam))
        counter += 1
        if t > T:
            break
        while g < G and grid[g] < t:
            if fcur < 0:
                fcur = _f_series(nbr, up, depth, items[:n].copy(), q)
            out[g] = fcur
            g += 1
        j = int(uniform(key, counter) * n)
        counter += 1
        if j >= n:
            j = n - 1
        x = items[j]
        if uniform(key, counter) * (1.0 + lam) < 1.0:
            last = items[n - 1]
            items[j] = last
            pos[last] = j
            pos[x] = -1
            state[x] = 0
            n -= 1
        else:
            if depth[x] == R and clipped < 0:
                clipped = t
            for s in range(D):
                w = nbr[x, s]
                if w >= 0 and state[w] == 0:
                    state[w] = 1
                    pos[w] = n
                    items[n] = w
                    n += 1
        counter += 1
        if n <= small:
            fcur = _f_series(nbr, up, depth, items[:n].copy(), q)
            if fcur <= c:
                tau = t
        else:
            fcur = -1.0
    if fcur < 0:
        fcur = _f_series(nbr, up, depth, items[:n].copy(), q)
    while g < G:
        out[g] = fcur
        g += 1
    return out, tau, clipped


def supermartingale_dynamic(tree, lam, q, A0, T, reps, seed, c=1.0, grid=None):
    """E[1 / f(dual_{t ^ tau})] along a grid, with tau = inf{t : f <= c}."""
    grid = np.arange(0.0, T + 1e-9, 1.0) if grid is None else np.asarray(grid, dtype=float)
    init = np.fromiter(sorted(set(A0)), dtype=np.int64)
    inv = np.empty((reps, grid.size))
    clipped = stopped = 0
    for r in range(reps):
        fvals, tau, clip = _dual_f_path(tree.nbr, tree.up, tree.depth, tree.R, float(lam),
                                        float(q), init, float(T), int(seed), r, grid, float(c))
        inv[r] = 1.0 / fvals
        clipped += clip >= 0
        stopped += tau >= 0
    mean = inv.mean(axis=0)
    se = inv.std(axis=0, ddof=1) / np.sqrt(reps)
    return dict(grid=grid.tolist(), mean=mean.tolist(), se=se.tolist(),
                stopped_fraction=stopped / reps, contamination=clipped / reps, c=c)
