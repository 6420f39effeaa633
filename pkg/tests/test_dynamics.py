"""Forward and dual evolutions against independent oracles.

Log sweeps are checked event by event against a plain Python reading of the
graphical construction, and distributions against the exact semigroup
exp(tQ) of the generator on a small ball.
"""
import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.linalg import expm

from treeips import _kernels as K
from treeips.dynamics import (ModelSpec, as_state, census, evolve, gillespie_evolve,
                              run_gillespie, run_log)
from treeips.events import reverse_log, sample_contact_log, sample_voter_log
from treeips.tree import build_ball


def sweep_oracle(log, A, kind, direction):
    tree = log.tree
    src = reverse_log(log) if direction == "dual" and len(log) else log
    occ = set(A)
    for x, k, m in zip(src.vertices.tolist(), src.kinds.tolist(), src.masks.tolist()):
        nb = [int(w) for w in tree.nbr[x] if w >= 0]
        sub = [int(tree.nbr[x, s]) for s in range(tree.d + 1) if (m >> s) & 1]
        if kind == "contact" and direction == "forward":
            if k == K.BIRTH and any(w in occ for w in nb):
                occ.add(x)
            elif k == K.DEATH:
                occ.discard(x)
        elif kind == "contact":
            if x in occ:
                if k == K.BIRTH:
                    occ.update(nb)
                else:
                    occ.discard(x)
        elif direction == "forward":
            if k == K.VDEATH:
                occ.discard(x)
            elif sum(w in occ for w in sub) % 2:
                occ.add(x)
            else:
                occ.discard(x)
        else:
            if x in occ:
                occ.discard(x)
                if k == K.RESET:
                    occ.symmetric_difference_update(sub)
    return occ


@given(st.integers(0, 2 ** 31), st.sets(st.integers(0, 45), min_size=1, max_size=6))
def test_contact_sweeps_match_oracle(seed, A):
    t = build_ball(2, 4)
    lg = sample_contact_log(t, 0.9, 2.0, seed)
    spec = ModelSpec.contact(0.9)
    for direction in ("forward", "dual"):
        got = set(np.flatnonzero(run_log(lg, as_state(t, A), spec, direction)[0]).tolist())
        assert got == sweep_oracle(lg, A, "contact", direction)


@given(st.integers(0, 2 ** 31), st.sets(st.integers(0, 45), min_size=1, max_size=6),
       st.sampled_from([0.0, 0.4]))
def test_voter_sweeps_match_oracle(seed, A, delta):
    t = build_ball(2, 4)
    lg = sample_voter_log(t, delta, 1.5, seed)
    spec = ModelSpec.voter_with_death(delta) if delta else ModelSpec.voter()
    for direction in ("forward", "dual"):
        got = set(np.flatnonzero(run_log(lg, as_state(t, A), spec, direction)[0]).tolist())
        if direction == "forward" and len(got) == t.V:
            continue  # absorbed at all ones; the sweep stops there
        assert got == sweep_oracle(lg, A, "voter", direction)


def test_empty_and_full_are_absorbing():
    t = build_ball(2, 3)
    lg = sample_contact_log(t, 1.0, 3.0, 0)
    tr = evolve(lg, set(), ModelSpec.contact(1.0))
    assert tr.absorbed_state == "empty" and tr.extinction_time == 0.0
    v = sample_voter_log(t, 0.0, 3.0, 0)
    tr = evolve(v, np.ones(t.V, np.uint8), ModelSpec.voter())
    assert tr.absorbed_state == "full" and tr.final().all()


def test_trajectory_replay_and_census():
    t = build_ball(2, 4)
    lg = sample_contact_log(t, 1.1, 3.0, 5)
    tr = evolve(lg, {0, t.spine(1)}, ModelSpec.contact(1.1))
    grid = np.linspace(0, 3, 7)
    out = run_log(lg, as_state(t, {0, t.spine(1)}), ModelSpec.contact(1.1), grid=grid,
                  snaps=True)
    for g, snap, c in zip(grid, out[2], census(tr, grid)):
        assert np.array_equal(tr.state_at(g), snap)
        assert c == snap.sum()
    with pytest.raises(ValueError):
        tr.state_at(4.0)


def test_spec_validation():
    with pytest.raises(ValueError):
        ModelSpec("voter", delta=0.2)
    with pytest.raises(ValueError):
        ModelSpec.voter("majority")
    with pytest.raises(ValueError):
        ModelSpec.contact(1.0).mode("sideways")
    t = build_ball(2, 2)
    with pytest.raises(ValueError):
        run_log(sample_contact_log(t, 0.5, 1.0, 0), as_state(t, {0}), ModelSpec.contact(0.6))
    with pytest.raises(IndexError):
        as_state(t, {t.V})


# -- exact semigroup on B(o, 2) of T_2 (10 vertices, 1024 states) ----------

def odd_subsets(slots):
    return [c for k in range(1, len(slots) + 1, 2) for c in itertools.combinations(slots, k)]


def generator(tree, kind, rate, direction="forward"):
    V = tree.V
    S = 1 << V
    Q = np.zeros((S, S))
    nbrs = [[int(w) for w in tree.nbr[x] if w >= 0] for x in range(V)]
    for s in range(S):
        for x in range(V):
            bit = (s >> x) & 1
            moves = []
            if kind == "contact" and direction == "forward":
                if bit:
                    moves.append((s & ~(1 << x), 1.0))
                elif any((s >> w) & 1 for w in nbrs[x]):
                    moves.append((s | (1 << x), rate))
            elif kind == "contact":
                if bit:
                    moves.append((s & ~(1 << x), 1.0))
                    s2 = s
                    for w in nbrs[x]:
                        s2 |= 1 << w
                    moves.append((s2, rate))
            elif direction == "forward":
                subs = odd_subsets(nbrs[x])
                for sub in subs:
                    p = sum((s >> w) & 1 for w in sub) % 2
                    moves.append(((s & ~(1 << x)) | (p << x), 1.0 / len(subs)))
                moves.append((s & ~(1 << x), rate))
            else:
                if bit:
                    subs = odd_subsets(nbrs[x])
                    for sub in subs:
                        s2 = s & ~(1 << x)
                        for w in sub:
                            s2 ^= 1 << w
                        moves.append((s2, 1.0 / len(subs)))
                    moves.append((s & ~(1 << x), rate))
            for s2, r in moves:
                if s2 != s:
                    Q[s, s2] += r
                    Q[s, s] -= r
    return Q


def exact_prob(tree, kind, rate, A, B, t, direction="forward"):
    P = expm(t * generator(tree, kind, rate, direction))
    a = sum(1 << v for v in A)
    bmask = sum(1 << v for v in B)
    row = P[a]
    if kind == "contact":
        ev = np.array([(s & bmask) != 0 for s in range(row.size)])
    else:
        ev = np.array([bin(s & bmask).count("1") % 2 == 1 for s in range(row.size)])
    return float(row[ev].sum())


@pytest.fixture(scope="module")
def small():
    return build_ball(2, 2)


def mc(tree, spec, A, B, t, reps, seed, method, direction="forward"):
    a, b = as_state(tree, A), as_state(tree, B)
    hits = 0
    for r in range(reps):
        if method == "gillespie":
            st_ = run_gillespie(tree, spec, a, t, seed, r, direction)[0]
        else:
            lg = (sample_contact_log(tree, spec.lam, t, seed, r) if spec.kind == "contact"
                  else sample_voter_log(tree, spec.delta, t, seed, r))
            st_ = run_log(lg, a, spec, direction)[0]
        n = int(np.sum(st_ & b))
        hits += (n > 0) if spec.kind == "contact" else (n % 2 == 1)
    return hits / reps


@pytest.mark.parametrize("method", ["log", "gillespie"])
@pytest.mark.parametrize("direction", ["forward", "dual"])
def test_contact_matches_semigroup(small, method, direction):
    lam, t, reps = 1.3, 1.0, 4000
    A, B = {0}, {small.spine(1), small.spine(2)}
    p = exact_prob(small, "contact", lam, A, B, t, direction)
    phat = mc(small, ModelSpec.contact(lam), A, B, t, reps, 17, method, direction)
    assert abs(phat - p) <= 4 * np.sqrt(p * (1 - p) / reps)


@pytest.mark.parametrize("method", ["log", "gillespie"])
@pytest.mark.parametrize("direction", ["forward", "dual"])
def test_voter_parity_matches_semigroup(small, method, direction):
    delta, t, reps = 0.3, 0.8, 4000
    A, B = {0, small.spine(1)}, {0, small.spine(-1)}
    p = exact_prob(small, "voter", delta, A, B, t, direction)
    phat = mc(small, ModelSpec.voter_with_death(delta), A, B, t, reps, 19, method, direction)
    assert abs(phat - p) <= 4 * np.sqrt(p * (1 - p) / reps)


def test_exact_annihilating_duality(small):
    # the semigroup identity itself, without Monte Carlo
    for A, B in [({0}, {0, small.spine(1)}), ({0, small.spine(1)}, {small.spine(-1)})]:
        f = exact_prob(small, "voter", 0.3, A, B, 1.2, "forward")
        d = exact_prob(small, "voter", 0.3, B, A, 1.2, "dual")
        assert abs(f - d) < 1e-10
        f = exact_prob(small, "contact", 0.8, A, B, 1.2, "forward")
        d = exact_prob(small, "contact", 0.8, B, A, 1.2, "dual")
        assert abs(f - d) < 1e-10


def test_gillespie_records_consistent_path():
    t = build_ball(2, 5)
    tr = gillespie_evolve(t, ModelSpec.contact(1.5), {0}, 2.0, 3, 0)
    assert tr.state_at(0).sum() == 1
    assert np.all(np.diff(tr.times) >= 0)
    assert census(tr, [2.0])[0] == tr.final().sum()
