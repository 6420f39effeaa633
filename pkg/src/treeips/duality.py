"""Coalescing and annihilating duality checks.

The coalescing identity is pathwise: on one log, an open path runs from
A x {0} to B x {T} iff the reversed log has an open path from B x {0} to
A x {T}.  The annihilating identity holds in distribution: the parity of
|eta_t cap B| from eta_A has the law of the parity of |dual_t cap A| from B.
"""
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .dynamics import ModelSpec, SEMANTICS, as_state, run_log, run_gillespie
from .events import sample_contact_log, sample_coupled_contact_logs, sample_voter_log
from .stats import proportion, two_proportion_z


def _hits(state, B_state):
    return bool(np.any(state & B_state))


def pathwise_coalescing_check(tree, lam, T, A, B, seed, replicate=0, log=None):
    """True iff forward-from-A hits B at T exactly when dual-from-B hits A."""
    if log is None:
        log = sample_contact_log(tree, lam, T, seed, replicate)
    spec = ModelSpec.contact(log.rate)
    a, b = as_state(tree, A), as_state(tree, B)
    fwd = run_log(log, a, spec, "forward")[0]
    dual = run_log(log, b, spec, "dual")[0]
    return _hits(fwd, b) == _hits(dual, a)


def pathwise_parity_check(log, A, B, spec):
    """Per-log parity identity for the voter construction."""
    a, b = as_state(log.tree, A), as_state(log.tree, B)
    fwd = run_log(log, a, spec, "forward")[0]
    dual = run_log(log, b, spec, "dual")[0]
    return int(np.sum(fwd & b)) % 2 == int(np.sum(dual & a)) % 2


@dataclass
class DualityResult:
    p_forward: float
    se_forward: float
    p_dual: float
    se_dual: float
    z: float
    reps: int

    @property
    def consistent(self):
        return abs(self.z) <= 4.0

    def as_dict(self):
        return dict(p_forward=self.p_forward, se_forward=self.se_forward, p_dual=self.p_dual,
                    se_dual=self.se_dual, z=self.z, reps=self.reps, consistent=self.consistent)


def _event(spec, state, target):
    n = int(np.sum(state & target))
    return (n % 2 == 1) if spec.kind != "contact" else n > 0


def statistical_duality(tree, spec, A, B, t, reps, seed, method="log"):
    """Two-sample comparison of forward and dual hitting (or parity) probabilities.

    The forward side uses replicates 0..reps-1 and the dual side
    reps..2*reps-1 of the same master seed, so the samples are independent.
    ``method`` "log" uses event-log sweeps, "gillespie" the generators.
    """
    if reps < 100:
        raise ValueError("need at least 100 replicates")
    a, b = as_state(tree, A), as_state(tree, B)
    kf = kd = 0
    for r in range(reps):
        for side in (0, 1):
            rep = r + side * reps
            start, target = (a, b) if side == 0 else (b, a)
            direction = "forward" if side == 0 else "dual"
            if method == "gillespie":
                state = run_gillespie(tree, spec, start, t, seed, rep, direction)[0]
            else:
                if spec.kind == "contact":
                    log = sample_contact_log(tree, spec.lam, t, seed, rep)
                else:
                    log = sample_voter_log(tree, spec.delta, t, seed, rep)
                state = run_log(log, start, spec, direction)[0]
            hit = _event(spec, state, target)
            if side == 0:
                kf += hit
            else:
                kd += hit
    pf, sf = proportion(kf, reps)
    pd, sd = proportion(kd, reps)
    return DualityResult(pf, sf, pd, sd, two_proportion_z(kf, reps, kd, reps), reps)


def nu_bar_estimate(tree, lam, B, t, reps, seed, grid=None):
    """P(xi_t cap B nonempty) for the contact process started from all ones.

    Returns (estimate, se, contamination) at time t, or arrays over ``grid``.
    Contamination counts replicates in which the dual from B reached the
    last sphere (the backward influence cone of the cylinder event).
    """
    b = as_state(tree, B)
    if not b.any():
        raise ValueError("B must be nonempty")
    grid = np.atleast_1d(np.asarray([t] if grid is None else grid, dtype=float))
    ones = np.ones(tree.V, np.uint8)
    spec = ModelSpec.contact(lam)
    hits = np.zeros(grid.size)
    touched = 0
    for r in range(reps):
        T = float(grid.max())
        if T == 0:
            hits += 1
            continue
        log = sample_contact_log(tree, lam, T, seed, r)
        out = run_log(log, ones, spec, "forward", grid=grid, snaps=True)
        hits += (out[2] & b).any(axis=1)
        cone = run_log(log, b, spec, "dual")
        touched += cone[-1] >= 0
    p = hits / reps
    se = np.sqrt(p * (1 - p) / reps)
    if grid.size == 1 and np.ndim(t) == 0:
        return float(p[0]), float(se[0]), touched / reps
    return p, se, touched / reps


def nu_bar_dual(tree, lam, B, t, reps, seed):
    """Same cylinder probability from dual survival (the identity with A = all ones)."""
    b = as_state(tree, B)
    spec = ModelSpec.contact(lam)
    alive = 0
    for r in range(reps):
        state = run_gillespie(tree, spec, b, t, seed, r, "dual")[0]
        alive += bool(state.any())
    return proportion(alive, reps)


def monotonicity_check(tree, lam1, lam2, A, B, T, reps, seed, grid=None):
    """Count pathwise containment violations of xi^{lam1, A} in xi^{lam2, B}."""
    A, B = set(A), set(B)
    if not A <= B:
        raise ValueError("A must be a subset of B")
    grid = np.linspace(0, T, 9) if grid is None else np.asarray(grid, dtype=float)
    a, b = as_state(tree, A), as_state(tree, B)
    s1, s2 = ModelSpec.contact(lam1), ModelSpec.contact(lam2)
    violations = 0
    for r in range(reps):
        log1, log2 = sample_coupled_contact_logs(tree, lam1, lam2, T, seed, r)
        x = run_log(log1, a, s1, "forward", grid=grid, snaps=True)[2]
        y = run_log(log2, b, s2, "forward", grid=grid, snaps=True)[2]
        violations += int(np.any(x > y))
    return violations


def attractiveness_check(tree, spec, A, B, T, reps, seed, grid=None):
    """Containment violations of xi^A in xi^B (A subset of B) on shared logs."""
    A, B = set(A), set(B)
    if not A <= B:
        raise ValueError("A must be a subset of B")
    grid = np.linspace(0, T, 9) if grid is None else np.asarray(grid, dtype=float)
    a, b = as_state(tree, A), as_state(tree, B)
    violations = 0
    for r in range(reps):
        if spec.kind == "contact":
            log = sample_contact_log(tree, spec.lam, T, seed, r)
        else:
            log = sample_voter_log(tree, spec.delta, T, seed, r)
        x = run_log(log, a, spec, "forward", grid=grid, snaps=True)[2]
        y = run_log(log, b, spec, "forward", grid=grid, snaps=True)[2]
        violations += int(np.any(x > y))
    return violations


# the five scenarios used to pick the forward voter rule
PARITY_BATTERY = (
    dict(delta=0.3, A="o", B="o+s1", t=1.0),
    dict(delta=0.3, A="o+s1", B="o", t=1.0),
    dict(delta=0.0, A="o", B="o+s1", t=1.0),
    dict(delta=0.0, A="B1", B="o", t=0.5),
    dict(delta=0.5, A="o+c2", B="o+s1", t=2.0),
)


def _named_set(tree, name):
    o, s1 = 0, tree.spine(1)
    return {"o": {o}, "o+s1": {o, s1}, "o+c2": {o, tree.children(o)[1]},
            "B1": set(np.flatnonzero(tree.depth <= 1).tolist())}[name]


def parity_duality_battery(tree, reps, seed, semantics=SEMANTICS, scenarios=PARITY_BATTERY):
    """Run every scenario for every forward voter rule; report |z| and the
    rules passing all scenarios."""
    table = {}
    for sem in semantics:
        rows = []
        for i, sc in enumerate(scenarios):
            spec = (ModelSpec.voter_with_death(sc["delta"], sem) if sc["delta"] > 0
                    else ModelSpec.voter(sem))
            res = statistical_duality(tree, spec, _named_set(tree, sc["A"]),
                                      _named_set(tree, sc["B"]), sc["t"], reps, seed + 7919 * i)
            rows.append(dict(sc, **res.as_dict()))
        table[sem] = rows
    passing = [s for s in semantics if all(r["consistent"] for r in table[s])]
    return {"table": table, "passing": passing,
            "selected": passing[0] if len(passing) == 1 else None}
