"""Fast oracle suite behind ``treeips selftest``."""
import math

import numpy as np


def _check(name, fn):
    try:
        ok, detail = fn()
    except Exception as exc:  # reported, not raised
        ok, detail = False, "error: %r" % (exc,)
    return dict(name=name, ok=bool(ok), detail=str(detail))


def run_all(seed=0, reps=300):
    from . import _lazy as L
    from . import chain as C
    from . import potential as P
    from .convergence import InitialMeasure, audit_pattern, sample_initial, symmetry_check
    from .duality import pathwise_coalescing_check
    from .dynamics import ModelSpec, as_state, run_log
    from .events import reverse_log, sample_contact_log, sample_voter_log
    from .tree import (ball_size, boundary, build_ball, canonical_address, distance,
                       partition_KLK, connected_sets)

    t2 = build_ball(2, 4)
    t3 = build_ball(3, 3)

    def sizes():
        ok = t2.V == ball_size(2, 4) == 46 and t3.V == 53
        ok &= all(len(t2.sphere(n)) == 3 * 2 ** (n - 1) for n in range(1, 5))
        return ok, (t2.V, t3.V)

    def addresses():
        ok = all(t2.vertex(canonical_address(t2, v)) == v for v in range(t2.V))
        ok &= all(distance(t2, t2.spine(j), t2.spine(k)) == abs(j - k)
                  for j in range(-4, 5) for k in range(-4, 5))
        return ok, "round trip and spine distances"

    def boundary_bound():
        sets = connected_sets(t2, 5, within=np.flatnonzero(t2.depth <= 3))
        bad = [A for A in sets if boundary(t2, A).size < len(A) + 2]
        klk = all(len(partition_KLK(t2, A)[2]) == len(partition_KLK(t2, A)[0]) + 2
                  for A in sets if len(A) > 1)
        return not bad and klk, "%d connected sets" % len(sets)

    def log_determinism():
        a = sample_contact_log(t2, 0.7, 2.0, seed, 3)
        b = sample_contact_log(t2, 0.7, 2.0, seed, 3)
        r = reverse_log(reverse_log(a))
        ok = a.same_events(b) and np.allclose(r.times, a.times, rtol=0, atol=1e-12)
        ok &= np.array_equal(r.vertices, a.vertices) and np.array_equal(r.masks, a.masks)
        return ok, "%d events" % a.times.size

    def additivity():
        spec = ModelSpec.contact(0.9)
        A, B = {0}, {int(t2.spine(2))}
        bad = 0
        for r in range(min(reps, 200)):
            lg = sample_contact_log(t2, 0.9, 2.0, seed, r)
            fa = run_log(lg, as_state(t2, A), spec)[0]
            fb = run_log(lg, as_state(t2, B), spec)[0]
            fab = run_log(lg, as_state(t2, A | B), spec)[0]
            bad += np.any((fa | fb) != fab)
        return bad == 0, "%d violations" % bad

    def coalescing():
        rng = np.random.default_rng(seed)
        inner = np.flatnonzero(t2.depth <= 3)
        bad = 0
        for r in range(reps):
            A = rng.choice(inner, size=int(rng.integers(1, 5)), replace=False)
            B = rng.choice(inner, size=int(rng.integers(1, 5)), replace=False)
            bad += not pathwise_coalescing_check(t2, 0.7, 2.0, A, B, seed, r)
        return bad == 0, "%d/%d failures" % (bad, reps)

    def voter_absorbing():
        lg = sample_voter_log(t2, 0.0, 2.0, seed, 1)
        out = run_log(lg, np.ones(t2.V, np.uint8), ModelSpec.voter())[0]
        return bool(out.all()), "all ones kept"

    def voter_symmetry():
        lg = sample_voter_log(t2, 0.0, 2.0, seed, 2)
        s0 = sample_initial(t2, InitialMeasure.product(0.5), seed)
        return symmetry_check(lg, s0), "0/1 exchange"

    def potential_values():
        t = build_ball(2, 5)
        s1 = t.spine(1)
        ok = abs(P.f_limit(t, {0}, 0.6) - 1) < 1e-12
        ok &= abs(P.f_limit(t, {0, s1}, 0.6) - 1.6) < 1e-12
        ok &= abs(P.f_limit_numeric(t, {0, s1}, 0.6) - 1.6) < 1e-6
        ok &= abs(P.drift_h_global(t, {0}, 0.7, 0.6) - (3 * 0.7 * 0.6 - 1)) < 1e-12
        return ok, "closed forms"

    def chain_values():
        ok = C.m_n(100) == 723
        ok &= abs(C.expected_absorption_truncated(C.BDChainSpec.rescaled_walk(), 2)[0] - 0.5) < 1e-12
        ok &= max(abs(C.gambler_ruin_solve(n) - 1 / n) for n in range(1, 50)) < 1e-12
        return ok, "m_100, N=2, ruin"

    def lazy_nbrs():
        t = build_ball(2, 4)
        k = L.block(2)
        ok = True
        for v in range(t.V):
            c = L.encode(canonical_address(t, v), 2)
            for s in range(3):
                w = t.nbr[v, s]
                if w >= 0:
                    ok &= L._nbr(c, s, 2, 2 ** k) == L.encode(canonical_address(t, w), 2)
        return ok, "infinite-tree neighbors match the ball"

    def dense_audit():
        t = build_ball(2, 6)
        s = sample_initial(t, InitialMeasure.dense(2), seed)
        s2 = sample_initial(t, InitialMeasure.doubly_dense(2), seed)
        return not audit_pattern(t, s, 2) and not audit_pattern(t, s2, 2, True), "N=2"

    def pure_death():
        runs = L.run_lazy(2, 0.0, [(0, [])], 1.0, seed, 4 * reps, grid=[1.0])
        p = float(np.mean(runs.census[:, 0] > 0))
        se = math.sqrt(p * (1 - p) / (4 * reps))
        return abs(p - math.exp(-1)) <= 3 * se, "%.4f vs %.4f" % (p, math.exp(-1))

    checks = [("tree_sizes", sizes), ("addresses", addresses), ("boundary_bound", boundary_bound),
              ("log_determinism", log_determinism), ("additivity", additivity),
              ("pathwise_coalescing", coalescing), ("voter_absorbing", voter_absorbing),
              ("voter_symmetry", voter_symmetry), ("potential_values", potential_values),
              ("chain_values", chain_values), ("lazy_neighbors", lazy_nbrs),
              ("dense_audit", dense_audit), ("pure_death", pure_death)]
    return [_check(n, f) for n, f in checks]
