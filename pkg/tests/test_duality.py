import numpy as np
import pytest
from hypothesis import given, strategies as st

from treeips.duality import (attractiveness_check, monotonicity_check, nu_bar_dual,
                             nu_bar_estimate, parity_duality_battery,
                             pathwise_coalescing_check, pathwise_parity_check,
                             statistical_duality)
from treeips.dynamics import ModelSpec, as_state, run_log
from treeips.events import sample_contact_log, sample_voter_log
from treeips.tree import build_ball


@pytest.fixture(scope="module")
def tree():
    return build_ball(2, 6)


def test_empty_log_reduces_to_intersection(tree):
    lg = sample_contact_log(tree, 0.7, 0.0, 0)
    s1 = tree.spine(1)
    assert pathwise_coalescing_check(tree, 0.7, 0.0, {0}, {0, s1}, 0, log=lg)
    spec = ModelSpec.contact(0.7)
    assert run_log(lg, as_state(tree, {0}), spec)[0][s1] == 0


@given(st.integers(0, 2 ** 31), st.sets(st.integers(0, 45), min_size=1, max_size=5),
       st.sets(st.integers(0, 45), min_size=1, max_size=5))
def test_pathwise_coalescing(seed, A, B):
    t = build_ball(2, 6)
    assert pathwise_coalescing_check(t, 0.7, 3.0, A, B, seed)


def test_all_ones_forward_is_dual_survival(tree):
    # with A = every vertex, forward hitting equals dual survival on each log
    ones = np.ones(tree.V, np.uint8)
    spec = ModelSpec.contact(0.9)
    b = as_state(tree, {0})
    for r in range(100):
        lg = sample_contact_log(tree, 0.9, 2.0, 4, r)
        fwd = bool(np.any(run_log(lg, ones, spec)[0] & b))
        dual = bool(run_log(lg, b, spec, "dual")[0].any())
        assert fwd == dual


def test_parity_pathwise_on_short_logs():
    t = build_ball(2, 3)
    spec = ModelSpec.voter_with_death(0.3)
    checked = 0
    for r in range(300):
        lg = sample_voter_log(t, 0.3, 0.05, 8, r)
        if len(lg) <= 20:
            assert pathwise_parity_check(lg, {0, t.spine(1)}, {0}, spec)
            checked += 1
    assert checked > 100


def test_statistical_contact(tree):
    res = statistical_duality(tree, ModelSpec.contact(0.7), {0}, {0}, 0.5, 2000, 1)
    assert res.consistent and abs(res.z) <= 4
    with pytest.raises(ValueError):
        statistical_duality(tree, ModelSpec.contact(0.7), {0}, {0}, 0.5, 50, 1)


def test_statistical_gillespie_voter(tree):
    res = statistical_duality(tree, ModelSpec.voter_with_death(0.3), {0}, {0, tree.spine(1)},
                              1.0, 2000, 2, method="gillespie")
    assert res.consistent


def test_monotone_coupling(tree):
    s1 = tree.spine(1)
    assert monotonicity_check(tree, 0.5, 1.0, {0}, {0, s1}, 3.0, 200, 0) == 0
    assert monotonicity_check(tree, 0.7, 0.7, {0}, {0}, 3.0, 50, 0) == 0
    with pytest.raises(ValueError):
        monotonicity_check(tree, 0.5, 1.0, {0, s1}, {0}, 3.0, 10, 0)


def test_contact_attractive(tree):
    assert attractiveness_check(tree, ModelSpec.contact(0.9), {0}, {0, tree.spine(1)},
                                3.0, 200, 0) == 0


def test_nu_bar(tree):
    p, se, cont = nu_bar_estimate(tree, 0.7, [0], 0.0, 10, 0)
    assert p == 1.0
    ps, ses, _ = nu_bar_estimate(tree, 0.7, [0], 4.0, 800, 1, grid=[1.0, 4.0])
    assert ps[0] >= ps[1] - 3 * ses[1]
    sub = nu_bar_estimate(tree, 0.2, [0], 6.0, 800, 2)[0]
    assert sub < 0.02
    pd, sd = nu_bar_dual(tree, 0.7, [0], 1.0, 800, 3)
    pf, sf, _ = nu_bar_estimate(tree, 0.7, [0], 1.0, 800, 4)
    assert abs(pd - pf) <= 4 * np.hypot(sd, sf)


def test_battery_selects_reset_to_parity():
    out = parity_duality_battery(build_ball(2, 4), 2000, 5)
    assert out["passing"] == ["reset_to_parity"]
    assert out["selected"] == "reset_to_parity"
    zs = [abs(r["z"]) for r in out["table"]["flip_when_odd"]]
    assert max(zs) > 4
