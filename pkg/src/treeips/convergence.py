"""Complete-convergence and parity-limit experiments on a finite ball.

All runs use the ball itself as the graph.  The mixture and parity
identities are then statements about the finite system at the given
horizon; the fraction of replicates whose backward influence cone reaches
the last sphere is reported with every estimate so the distance to the
infinite-tree statement stays visible.
"""
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .dynamics import ModelSpec, as_state, run_gillespie, run_log
from .events import sample_contact_log, sample_voter_log
from .stats import proportion


@dataclass(frozen=True)
class InitialMeasure:
    """variant is one of finite, all_ones, product, dense, doubly_dense."""
    variant: str
    A: tuple = ()
    p: float = 0.5
    N: int = 2

    VARIANTS = ("finite", "all_ones", "product", "dense", "doubly_dense")

    def __post_init__(self):
        if self.variant not in self.VARIANTS:
            raise ValueError("unknown initial measure %r" % (self.variant,))
        if not 0 <= self.p <= 1:
            raise ValueError("p outside [0, 1]")
        if self.variant in ("dense", "doubly_dense") and self.N < 1:
            raise ValueError("pattern parameter N must be >= 1")

    @classmethod
    def finite(cls, A):
        return cls("finite", A=tuple(sorted(int(a) for a in A)))

    @classmethod
    def all_ones(cls):
        return cls("all_ones")

    @classmethod
    def product(cls, p):
        return cls("product", p=float(p))

    @classmethod
    def dense(cls, N=2):
        return cls("dense", N=int(N))

    @classmethod
    def doubly_dense(cls, N=2):
        return cls("doubly_dense", N=int(N))

    @property
    def deterministic(self):
        return self.variant in ("finite", "all_ones")

    def describe(self):
        if self.variant == "finite":
            return "finite%s" % (list(self.A),)
        if self.variant == "product":
            return "product(%g)" % self.p
        if self.variant in ("dense", "doubly_dense"):
            return "%s(%d)" % (self.variant, self.N)
        return self.variant


def sample_initial(tree, measure, seed, replicate=0):
    """Configuration drawn from ``measure``; deterministic given the seeds.

    Dense patterns occupy one depth class mod N+1 (random offset) and fill
    the rest at random with probability 1/2; the doubly dense pattern also
    forces the next depth class vacant.
    """
    rng = np.random.default_rng([int(seed), int(replicate), 0x1A17])
    V = tree.V
    v = measure.variant
    if v == "finite":
        return as_state(tree, measure.A)
    if v == "all_ones":
        return np.ones(V, np.uint8)
    if v == "product":
        return (rng.random(V) < measure.p).astype(np.uint8)
    N = measure.N
    if N > tree.R:
        raise ValueError("pattern parameter exceeds the radius")
    period = N + 1
    off = int(rng.integers(period))
    state = (rng.random(V) < 0.5).astype(np.uint8)
    cls = tree.depth % period
    state[cls == off] = 1
    if v == "doubly_dense":
        state[cls == (off + 1) % period] = 0
    return state


def _ball_members(tree, x, N):
    seen = {x: 0}
    q = deque([x])
    while q:
        u = q.popleft()
        if seen[u] == N:
            continue
        for w in tree.nbr[u]:
            if w >= 0 and w not in seen:
                seen[w] = seen[u] + 1
                q.append(w)
    return list(seen)


def audit_pattern(tree, state, N, doubly=False):
    """Interior vertices x (B_x(N) inside the ball) whose ball lacks an
    occupied vertex, or a vacant one when ``doubly``."""
    bad = []
    for x in np.flatnonzero(tree.depth <= tree.R - N):
        vals = state[_ball_members(tree, int(x), N)]
        if not vals.any() or (doubly and vals.all()):
            bad.append(int(x))
    return bad


def _event(kind, state, b):
    n = int(np.sum(state & b, axis=-1)) if state.ndim == 1 else np.sum(state & b, axis=-1)
    return (n > 0) if kind == "contact" else (n % 2 == 1)


@dataclass
class ConvergenceTrace:
    model: str
    initial: str
    B: list
    grid: list
    estimate: list
    se: list
    reps: int
    contamination: float
    predicted: float = float("nan")
    predicted_se: float = float("nan")
    components: dict = field(default_factory=dict)

    @property
    def final(self):
        return self.estimate[-1], self.se[-1]

    @property
    def residual(self):
        return self.estimate[-1] - self.predicted

    @property
    def combined_se(self):
        return math.sqrt(self.se[-1] ** 2 + self.predicted_se ** 2)

    @property
    def consistent(self):
        if not np.isfinite(self.predicted):
            return None
        return abs(self.residual) <= 3 * self.combined_se

    def as_dict(self):
        return dict(model=self.model, initial=self.initial, B=self.B, grid=self.grid,
                    estimate=self.estimate, se=self.se, reps=self.reps,
                    contamination=self.contamination, predicted=self.predicted,
                    predicted_se=self.predicted_se, residual=self.residual,
                    combined_se=self.combined_se, consistent=self.consistent,
                    components=self.components)


def _sample_log(tree, spec, T, seed, rep):
    if spec.kind == "contact":
        return sample_contact_log(tree, spec.lam, T, seed, rep)
    return sample_voter_log(tree, spec.delta, T, seed, rep)


def limit_cylinder_trace(tree, spec, measure, B, t_grid, reps, seed):
    """P(xi_t cap B nonempty) (contact) or P(|zeta_t cap B| odd) (voter) over
    ``t_grid`` from ``measure``, driven by event logs.

    Contamination: fraction of replicates whose dual cone from B over the
    whole window reaches the last sphere.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    b = as_state(tree, B)
    hits = np.zeros(t_grid.size)
    touched = 0
    T = float(t_grid.max())
    if not b.any() or (measure.variant == "finite" and not measure.A):
        z = [0.0] * t_grid.size
        return ConvergenceTrace(spec.kind, measure.describe(), sorted(B), t_grid.tolist(),
                                z, z, reps, 0.0)
    for r in range(reps):
        state0 = sample_initial(tree, measure, seed, r)
        if T == 0:
            hits += _event(spec.kind, state0, b)
            continue
        log = _sample_log(tree, spec, T, seed, r)
        snaps = run_log(log, state0, spec, "forward", grid=t_grid, snaps=True)[2]
        hits += _event(spec.kind, snaps, b)
        touched += run_log(log, b, spec, "dual")[-1] >= 0
    p = hits / reps
    se = np.sqrt(p * (1 - p) / reps)
    return ConvergenceTrace(spec.kind, measure.describe(), sorted(int(x) for x in B),
                            t_grid.tolist(), p.tolist(), se.tolist(), reps, touched / reps)


def alpha_estimate(tree, spec, measure, T, reps, seed):
    """Frequency of absorption at the empty set by T (censored at T).

    For the pure voter the frequency of absorption at all ones is returned
    as ``beta``.
    """
    empty = full = 0
    for r in range(reps):
        state0 = sample_initial(tree, measure, seed, r)
        out = run_gillespie(tree, spec, state0, T, seed, r)
        if out[7] >= 0:
            empty += out[8] == 0
            full += out[8] == 1
    a, sa = proportion(empty, reps)
    res = dict(alpha=a, alpha_se=sa, reps=reps, T=float(T), censored_note="absorption after T not counted")
    if spec.kind == "voter":
        res["beta"], res["beta_se"] = proportion(full, reps)
    return res


def dual_survival(tree, spec, B, T, reps, seed):
    """P(dual from B nonempty at T) by direct simulation."""
    b = as_state(tree, B)
    alive = 0
    for r in range(reps):
        alive += bool(run_gillespie(tree, spec, b, T, seed, r, "dual")[0].any())
    return proportion(alive, reps)


def aitken(values, ses):
    """Aitken extrapolation of three values on a geometric horizon ladder.

    Falls back to the last value when the second difference is not resolved
    (within two standard errors) or the extrapolate leaves [0, 1].
    """
    a1, a2, a3 = values
    d1, d2 = a2 - a1, a3 - a2
    den = d2 - d1
    noise = 2 * math.sqrt(ses[0] ** 2 + 4 * ses[1] ** 2 + ses[2] ** 2)
    if abs(den) <= noise or den == 0:
        return a3, ses[2], True
    x = a3 - d2 * d2 / den
    if not 0 <= x <= 1:
        return a3, ses[2], True
    return x, max(ses[2], abs(x - a3)), False


def voter_parity_limit(tree, delta, measure, B, t_grid, reps, seed, dual_horizons=(20, 40, 80),
                       dual_reps=None, semantics="reset_to_parity"):
    """Parity trace against 1/2 of the extrapolated dual survival probability."""
    spec = (ModelSpec.voter_with_death(delta, semantics) if delta > 0
            else ModelSpec.voter(semantics))
    trace = limit_cylinder_trace(tree, spec, measure, B, t_grid, reps, seed)
    if not len(B):
        trace.predicted, trace.predicted_se = 0.0, 0.0
        return trace
    dual_reps = reps if dual_reps is None else dual_reps
    if delta == 0 and len(B) % 2 == 1:
        # odd dual cardinality is conserved, so the dual never dies
        surv, ses, fallback = [1.0] * len(dual_horizons), [0.0] * len(dual_horizons), False
        omega, omega_se = 1.0, 0.0
    else:
        surv, ses = [], []
        for i, h in enumerate(dual_horizons):
            p, s = dual_survival(tree, spec, B, h, dual_reps, seed + 104729 * (i + 1))
            surv.append(p)
            ses.append(s)
        omega, omega_se, fallback = aitken(surv, ses)
    T = float(np.max(t_grid))
    same_t, same_t_se = dual_survival(tree, spec, B, T, dual_reps, seed + 7)
    trace.predicted = 0.5 * omega
    trace.predicted_se = 0.5 * omega_se
    trace.components = dict(dual_horizons=list(dual_horizons), dual_survival=surv,
                            dual_survival_se=ses, omega=omega, omega_se=omega_se,
                            aitken_fallback=fallback, same_t_dual=same_t,
                            same_t_dual_se=same_t_se, delta=delta)
    return trace


def mixture_check(tree, lam, B, t=20.0, reps=2000, seed=0, alpha_T=None, initial=(0,)):
    """Compare P(xi_t cap B nonempty) from a finite initial set with
    (1 - alpha) * nu_bar(B); the three terms use disjoint seeds."""
    from .duality import nu_bar_estimate
    spec = ModelSpec.contact(lam)
    m = InitialMeasure.finite(initial)
    trace = limit_cylinder_trace(tree, spec, m, B, [t], reps, seed)
    al = alpha_estimate(tree, spec, m, t if alpha_T is None else alpha_T, reps, seed + 1)
    nu, nu_se, nu_cont = nu_bar_estimate(tree, lam, B, t, reps, seed + 2)
    a, sa = al["alpha"], al["alpha_se"]
    trace.predicted = (1 - a) * nu
    trace.predicted_se = math.sqrt(((1 - a) * nu_se) ** 2 + (nu * sa) ** 2)
    trace.components = dict(alpha=a, alpha_se=sa, nu_bar=nu, nu_bar_se=nu_se,
                            nu_bar_contamination=nu_cont)
    return trace


def symmetry_check(log, state0):
    """0 <-> 1 exchange on a pure voter log: the run from the complement is
    the complement of the run."""
    spec = ModelSpec.voter()
    a = run_log(log, state0, spec, "forward")[0]
    b = run_log(log, (1 - state0).astype(np.uint8), spec, "forward")[0]
    return bool(np.all(a ^ b))


def dual_parity_conserved(tree, B, T, seed, replicate=0, delta=0.0):
    """Record a pure-voter dual run and check |dual| mod 2 never changes
    (with delta > 0 only deaths may change it)."""
    spec = ModelSpec.voter_with_death(delta) if delta > 0 else ModelSpec.voter()
    b = as_state(tree, B)
    out = run_gillespie(tree, spec, b, T, seed, replicate, "dual", record=True)
    ct, cv, cval = out[4], out[5], out[6]
    n = int(b.sum())
    parity = n % 2
    ok = True
    i = 0
    while i < ct.size:
        j = i
        while j < ct.size and ct[j] == ct[i]:
            n += 1 if cval[j] == 1 else -1
            j += 1
        if delta == 0 and n % 2 != parity:
            ok = False
        i = j
    return ok
