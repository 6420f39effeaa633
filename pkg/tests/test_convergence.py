import math

import numpy as np
import pytest

from treeips.convergence import (ConvergenceTrace, InitialMeasure, aitken, alpha_estimate,
                                 audit_pattern, dual_parity_conserved, dual_survival,
                                 limit_cylinder_trace, mixture_check, sample_initial,
                                 symmetry_check, voter_parity_limit)
from treeips.dynamics import ModelSpec
from treeips.events import sample_voter_log
from treeips.tree import build_ball


@pytest.fixture(scope="module")
def tree():
    return build_ball(2, 6)


def test_measures(tree):
    assert InitialMeasure.finite([3, 1]).A == (1, 3)
    assert InitialMeasure.product(0.3).describe() == "product(0.3)"
    with pytest.raises(ValueError):
        InitialMeasure("gibbs")
    with pytest.raises(ValueError):
        InitialMeasure.product(1.5)
    s = sample_initial(tree, InitialMeasure.product(0.5), 0, 0)
    assert np.array_equal(s, sample_initial(tree, InitialMeasure.product(0.5), 0, 0))
    many = np.concatenate([sample_initial(tree, InitialMeasure.product(0.3), 1, r)
                           for r in range(50)])
    assert abs(many.mean() - 0.3) <= 4 * math.sqrt(0.21 / many.size)
    assert sample_initial(tree, InitialMeasure.all_ones(), 0).all()


@pytest.mark.parametrize("N", [1, 2, 3])
def test_dense_patterns(tree, N):
    for r in range(5):
        s = sample_initial(tree, InitialMeasure.dense(N), 2, r)
        assert audit_pattern(tree, s, N) == []
        s = sample_initial(tree, InitialMeasure.doubly_dense(N), 2, r)
        assert audit_pattern(tree, s, N, doubly=True) == []
    with pytest.raises(ValueError):
        sample_initial(tree, InitialMeasure.dense(7), 0)


def test_audit_finds_holes(tree):
    s = np.zeros(tree.V, np.uint8)
    assert 0 in audit_pattern(tree, s, 2)
    assert 0 in audit_pattern(tree, np.ones(tree.V, np.uint8), 2, doubly=True)


def test_aitken_geometric():
    # a_k = L - c r^k has the exact limit L
    vals = [0.4 - 0.2 * 0.5 ** k for k in range(3)]
    x, se, fb = aitken(vals, [1e-6] * 3)
    assert not fb and x == pytest.approx(0.4, abs=1e-12)
    x, se, fb = aitken([0.3, 0.3, 0.3], [0.01] * 3)
    assert fb and x == 0.3


def test_trace_properties():
    tr = ConvergenceTrace("contact", "finite[0]", [0], [1.0], [0.5], [0.03], 100, 0.0,
                          predicted=0.45, predicted_se=0.04)
    assert tr.residual == pytest.approx(0.05)
    assert tr.combined_se == pytest.approx(0.05)
    assert tr.consistent
    assert ConvergenceTrace("x", "y", [], [1], [0], [0], 1, 0).consistent is None
    assert tr.as_dict()["consistent"]


def test_empty_inputs(tree):
    tr = limit_cylinder_trace(tree, ModelSpec.contact(1.0), InitialMeasure.finite([]), [0],
                              [1.0], 10, 0)
    assert tr.estimate == [0.0]


def test_symmetry_and_parity(tree):
    for r in range(20):
        lg = sample_voter_log(tree, 0.0, 3.0, 1, r)
        s0 = sample_initial(tree, InitialMeasure.product(0.5), 1, r)
        assert symmetry_check(lg, s0)
        assert dual_parity_conserved(tree, [0, tree.spine(1), tree.spine(2)], 5.0, 1, r)


def test_alpha_pure_death(tree):
    # lambda tiny: alpha by T is the probability the single particle dies, 1 - e^{-T}
    res = alpha_estimate(tree, ModelSpec.contact(1e-9), InitialMeasure.finite([0]), 1.0,
                         4000, 3)
    assert abs(res["alpha"] - (1 - math.exp(-1))) <= 4 * res["alpha_se"]


def test_dual_survival_odd_voter(tree):
    p, se = dual_survival(tree, ModelSpec.voter(), [0], 3.0, 200, 0)
    assert p == 1.0


def test_voter_symmetry_limit(tree):
    tr = voter_parity_limit(tree, 0.0, InitialMeasure.product(0.5), [0], [2.0, 4.0], 2000, 4)
    assert tr.predicted == 0.5
    assert tr.consistent


def test_mixture_small(tree):
    tr = mixture_check(tree, 1.2, [0], t=4.0, reps=300, seed=5)
    comp = tr.components
    assert 0 <= comp["alpha"] <= 1 and 0 <= comp["nu_bar"] <= 1
    assert tr.predicted == pytest.approx((1 - comp["alpha"]) * comp["nu_bar"])
