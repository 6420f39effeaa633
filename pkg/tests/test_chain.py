import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from treeips import chain as C
from treeips.tree import build_ball


def walk_closed_form(N):
    # Green's function of the killed walk: E^1[tau] = H_{N-1} - (N-1)/N
    return sum(1.0 / k for k in range(1, N)) - (N - 1) / N


@pytest.mark.parametrize("N", [2, 3, 10, 57, 200])
def test_walk_absorption_closed_form(N):
    got = C.expected_absorption_truncated(C.BDChainSpec.rescaled_walk(), N)[0]
    assert got == pytest.approx(walk_closed_form(N), rel=1e-12)


def test_absorption_against_dense_solve():
    spec = C.BDChainSpec.dominating(3)
    N = 40
    n = np.arange(1, N)
    up, dn = spec.up(n), spec.down(n)
    A = np.diag(up + dn) - np.diag(up[:-1], 1) - np.diag(dn[1:], -1)
    dense = np.linalg.solve(A, np.ones(N - 1))
    assert np.allclose(C.expected_absorption_truncated(spec, N), dense, rtol=1e-12)


def test_absorption_table_frozen():
    rows = C.absorption_table(2, [3, 10, 200])
    assert rows[0]["walk"] == pytest.approx(5 / 6, abs=1e-14)
    assert rows[0]["dominating"] == pytest.approx(0.5, abs=1e-14)
    assert rows[2]["dominating"] == pytest.approx(49.75, rel=1e-10)
    assert rows[1]["bound"] == pytest.approx(0.14989949667907895, rel=1e-12)
    assert all(r["walk"] > r["bound"] for r in rows)


def test_absorption_mc_matches_exact():
    spec = C.BDChainSpec.rescaled_walk()
    mean, se = C.absorption_mc(spec, 12, 20000, 3)
    assert abs(mean - walk_closed_form(12)) <= 4 * se


def test_bad_arguments():
    with pytest.raises(ValueError):
        C.expected_absorption_truncated(C.BDChainSpec(), 1)
    with pytest.raises(ValueError):
        C.BDChainSpec.dominating(1)
    with pytest.raises(ValueError):
        C.gambler_ruin_exact(0)
    with pytest.raises(ValueError):
        C.srw_bounds_check(5)


@given(st.integers(1, 300))
def test_gambler_ruin(n):
    assert abs(C.gambler_ruin_solve(n) - C.gambler_ruin_exact(n)) <= 1e-12


def test_m_n_values():
    assert C.m_n(10) == 14
    assert C.m_n(100) == 723


@pytest.mark.parametrize("n", [10, 20, 33, 60])
def test_srw_tail_against_binomial(n):
    # X_m >= a iff the number of up steps is >= (m + a) / 2; the running
    # maximum follows from the reflection principle exactly
    res = C.srw_bounds_check(n)
    m, a = res["m_n"], n - 1
    k = math.ceil((m + a) / 2)
    tail = stats.binom.sf(k - 1, m, 0.5)
    at = stats.binom.pmf((m + a) // 2, m, 0.5) if (m + a) % 2 == 0 else 0.0
    assert res["tail"] == pytest.approx(tail, rel=1e-10)
    assert res["max_prob"] == pytest.approx(2 * tail - at, rel=1e-10)


def test_srw_links_frozen():
    r = C.srw_bounds_check(20)
    assert r["m_n"] == 44
    assert r["links"] == {"reflection": True, "chernoff": False, "exp_vs_power": True,
                          "joint_lower": True}
    assert r["tail"] <= r["hoeffding_bound"]
    assert r["joint"] == pytest.approx(0.04995825610028533, rel=1e-9)


def test_domination_coupling():
    res = C.domination_coupling_check(build_ball(2, 10), 4.0, 200, 1)
    assert res["violations"] == 0 and not res["contract_void"]
    res = C.domination_coupling_check(build_ball(3, 6), 3.0, 200, 2)
    assert res["violations"] == 0
    assert C.domination_coupling_check(build_ball(2, 8), 2.0, 10, 0, lam=0.8)["contract_void"]


def test_harmonic_path_bound():
    h, target = C.harmonic_path_bound([1, 2, 3, 2, 3, 4], 4)
    assert h == pytest.approx(1 + 1 / 2 + 1 / 3 + 1 / 2 + 1 / 3)
    assert target == 5 / 4 and h >= target
    with pytest.raises(ValueError):
        C.harmonic_path_bound([1, 3, 4], 4)
    with pytest.raises(ValueError):
        C.harmonic_path_bound([1, 0, 1, 2], 2)


def test_conditioned_paths():
    res = C.conditioned_path_time_bound(12, 4000, 0)
    assert res["per_path_bound"]
    assert res["paths"] > 0 and res["long_paths"] > 0
    assert res["target"] == C.m_n(12) / 12
