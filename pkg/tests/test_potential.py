import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from treeips import potential as P
from treeips.tree import build_ball, connected_hull, connected_sets


@pytest.fixture(scope="module")
def tree():
    return build_ball(2, 6)


def random_set(tree, seed, k, depth=3):
    rng = np.random.default_rng(seed)
    pool = np.flatnonzero(tree.depth <= depth)
    return frozenset(int(v) for v in rng.choice(pool, size=k, replace=False))


def brute_nu(tree, psi, q, eps):
    """Sum over all configurations of the hull, each weighted by the edge chain."""
    hull = sorted(connected_hull(tree, list(psi)))
    root = min(hull, key=lambda v: tree.depth[v])
    Pm = np.array([[1 - eps, eps], [q, 1 - q]])
    pi1 = eps / (q + eps)
    total = 0.0
    for bits in itertools.product((0, 1), repeat=len(hull)):
        cfg = dict(zip(hull, bits))
        if any(cfg[v] != s for v, s in psi.items()):
            continue
        w = pi1 if cfg[root] else 1 - pi1
        for v in hull:
            if v != root:
                w *= Pm[cfg[int(tree.up[v])], cfg[v]]
        total += w
    return total


@pytest.mark.parametrize("seed", range(6))
def test_nu_eps_against_enumeration(tree, seed):
    A = random_set(tree, seed, 3, depth=2)
    rng = np.random.default_rng(seed)
    psi = {v: int(rng.integers(0, 2)) for v in A}
    for q, eps in ((0.6, 0.1), (0.3, 0.5)):
        assert abs(P.nu_eps_exact(tree, psi, q, eps) - brute_nu(tree, psi, q, eps)) < 1e-13


def test_nu_eps_rejects_bad_parameters(tree):
    with pytest.raises(ValueError):
        P.nu_eps_exact(tree, {0: 0}, 0.9, 0.2)


def test_small_values(tree):
    s1, s2 = tree.spine(1), tree.spine(2)
    q = 0.6
    c = 1 - q
    assert P.f_limit(tree, {0}, q) == pytest.approx(1.0, abs=1e-14)
    assert P.f_limit(tree, {0, s1}, q) == pytest.approx(2 - c, abs=1e-14)
    assert P.f_limit(tree, {0, s2}, q) == pytest.approx(2 - c * c, abs=1e-14)
    assert P.f_limit(tree, set(), q) == 0.0


@pytest.mark.parametrize("k", range(1, 7))
def test_path_sets(tree, k):
    # k consecutive spine vertices: f = k - (k - 1) c
    A = {tree.spine(j) for j in range(k)}
    for q in (0.55, 0.8):
        assert P.f_limit(tree, A, q) == pytest.approx(k - (k - 1) * (1 - q), abs=1e-12)


def test_singleton_drift(tree):
    for lam, q in ((0.637, 0.56), (1.0, 0.7)):
        assert P.drift_h_global(tree, {0}, lam, q) == pytest.approx(3 * lam * q - 1, abs=1e-12)
        assert P.drift_h_components(tree, {0}, lam, q).residual < 1e-12


@given(st.integers(0, 10 ** 6), st.integers(1, 6), st.floats(0.5, 0.95))
def test_series_matches_inclusion_exclusion(seed, k, q):
    t = build_ball(2, 6)
    A = random_set(t, seed, k, depth=4)
    assert abs(P.f_series(t, A, q) - P.f_limit(t, A, q)) < 1e-10


@given(st.integers(0, 10 ** 6), st.integers(1, 5))
def test_limit_matches_numeric(seed, k):
    t = build_ball(2, 6)
    A = random_set(t, seed, k)
    assert abs(P.f_limit(t, A, 0.6) - P.f_limit_numeric(t, A, 0.6)) < 1e-6


@given(st.integers(0, 10 ** 6), st.integers(1, 6), st.floats(0.5, 0.95))
def test_drift_evaluators_agree(seed, k, q):
    t = build_ball(2, 6)
    A = random_set(t, seed, k)
    assert P.drift_h_components(t, A, 0.637, q).residual < 1e-9


@given(st.integers(0, 10 ** 6), st.integers(2, 7), st.floats(0.5, 0.95))
def test_f_is_monotone_and_subadditive(seed, k, q):
    t = build_ball(2, 6)
    A = random_set(t, seed, k)
    x = min(A)
    fa, fb = P.f_limit(t, A, q), P.f_limit(t, A - {x}, q)
    assert fa - fb >= q ** 3 - 1e-12
    assert fa - fb <= 1 + 1e-12
    assert fa <= len(A) + 1e-12


def test_drift_rejects_boundary_and_d3():
    t = build_ball(2, 3)
    with pytest.raises(ValueError):
        P.drift_h_global(t, {next(iter(t.sphere(3)))}, 0.6, 0.6)
    with pytest.raises(ValueError):
        P.drift_h_global(build_ball(3, 3), {0}, 0.6, 0.6)
    with pytest.raises(ValueError):
        P.f_poly(t, range(17))


def test_shapes_enumeration():
    # trees with max degree three: 1, 1, 1, 2, 2, 4, 6, 11 shapes for n = 1..8
    shapes = P.tree_shapes(8)
    sizes = [len(a) for a in shapes]
    assert [sizes.count(n) for n in range(1, 9)] == [1, 1, 1, 2, 2, 4, 6, 11]
    t = build_ball(2, 6)
    fam = P.connected_family(t, 8)
    assert all(len(A) == len(a) for A, a in zip(fam, shapes))


def test_q_scan_and_selection(tree):
    fam = P.connected_family(tree, 6)
    rows = P.q_scan(tree, fam, 0.637, qs=[0.5, 0.56, 0.7, 0.9])
    assert [r["q"] for r in rows] == [0.5, 0.56, 0.7, 0.9]
    sel = P.select_q(rows)
    assert sel is not None and sel["min_h"] >= -1e-9
    assert P.select_q([dict(q=0.5, min_h=-1.0, min_ratio=2.0)]) is None


def test_static_bounds_frozen(tree):
    fam = P.static_family(tree, max_size=5, n_random=20, seed=1)
    res = P.static_bounds(tree, fam, 0.56)
    assert res["increment_ok"] and res["jump_ok"]
    # removing the center of a three-star costs exactly q^3
    star = {0, *tree.neighbors(0)}
    assert P.f_limit(tree, star, 0.56) - P.f_limit(tree, star - {0}, 0.56) == pytest.approx(
        0.56 ** 3, abs=1e-12)
    assert res["min_increment"] == pytest.approx(0.56 ** 3, abs=1e-12)
    assert res["max_increment"] == pytest.approx(1.0, abs=1e-12)
    assert res["max_jump"] <= 7.0


def test_supermartingale_dynamic_shapes(tree):
    out = P.supermartingale_dynamic(tree, 0.637, 0.56, [0], 2.0, 50, 0)
    assert len(out["mean"]) == 3
    # singleton start: f = 1 <= c, so tau = 0 and the path is frozen
    assert out["stopped_fraction"] == 1.0
    assert out["mean"] == pytest.approx([1.0, 1.0, 1.0])
