import numpy as np
import pytest
from hypothesis import given, strategies as st

from treeips import _kernels as K
from treeips.events import (load_log, log_bytes, restrict_log, reverse_log,
                            sample_contact_log, sample_coupled_contact_logs, sample_voter_log)
from treeips.rng import CH_BIRTH, CH_DEATH, uniforms
from treeips.stats import chi2_uniform_pvalue
from treeips.tree import build_ball


def test_uniforms_reproducible_and_distinct():
    a = uniforms(1, 2, 3, CH_BIRTH, 1000)
    assert np.array_equal(a, uniforms(1, 2, 3, CH_BIRTH, 1000))
    assert not np.array_equal(a, uniforms(1, 2, 3, CH_DEATH, 1000))
    assert not np.array_equal(a, uniforms(1, 3, 3, CH_BIRTH, 1000))
    assert np.all((a > 0) & (a < 1))


def test_uniforms_pass_chi2():
    u = uniforms(7, 0, 0, CH_BIRTH, 50000)
    counts = np.histogram(u, bins=20, range=(0, 1))[0]
    assert chi2_uniform_pvalue(counts) > 1e-4


def test_log_is_sorted_and_deterministic():
    t = build_ball(2, 4)
    a = sample_contact_log(t, 0.7, 3.0, 11, 5)
    b = sample_contact_log(t, 0.7, 3.0, 11, 5)
    assert a.same_events(b)
    assert log_bytes(a) == log_bytes(b)
    assert np.all(np.diff(a.times) >= 0)
    assert not a.same_events(sample_contact_log(t, 0.7, 3.0, 11, 6))


def test_empty_horizon():
    t = build_ball(2, 3)
    assert len(sample_contact_log(t, 0.7, 0.0, 0)) == 0
    assert len(sample_voter_log(t, 0.3, 0.0, 0)) == 0


def test_rejects_bad_rates():
    t = build_ball(2, 3)
    with pytest.raises(ValueError):
        sample_contact_log(t, 0.0, 1.0, 0)
    with pytest.raises(ValueError):
        sample_voter_log(t, -0.1, 1.0, 0)
    with pytest.raises(ValueError):
        sample_contact_log(t, 0.5, float("inf"), 0)
    with pytest.raises(ValueError):
        sample_coupled_contact_logs(t, 0.9, 0.5, 1.0, 0)


def test_event_rates():
    t = build_ball(2, 4)
    lam, T, reps = 0.8, 5.0, 40
    births = deaths = resets = vdeaths = 0
    for r in range(reps):
        c = sample_contact_log(t, lam, T, 3, r)
        births += np.sum(c.kinds == K.BIRTH)
        deaths += np.sum(c.kinds == K.DEATH)
        v = sample_voter_log(t, 0.4, T, 3, r)
        resets += np.sum(v.kinds == K.RESET)
        vdeaths += np.sum(v.kinds == K.VDEATH)
    exposure = t.V * T * reps
    for count, rate in ((births, lam), (deaths, 1.0), (resets, 1.0), (vdeaths, 0.4)):
        assert abs(count - rate * exposure) <= 4 * np.sqrt(rate * exposure)


def test_voter_masks_are_odd_subsets_of_present_slots():
    t = build_ball(2, 3)
    lg = sample_voter_log(t, 0.2, 4.0, 1)
    for x, k, m in zip(lg.vertices, lg.kinds, lg.masks):
        if k == K.RESET:
            assert bin(int(m)).count("1") % 2 == 1
            assert all(t.nbr[x, s] >= 0 for s in range(3) if (m >> s) & 1)
        else:
            assert m == 0


def test_voter_subsets_uniform_at_interior():
    t = build_ball(2, 2)
    lg = sample_voter_log(t, 0.0, 400.0, 2)
    sel = (lg.vertices == 0) & (lg.kinds == K.RESET)
    vals, counts = np.unique(lg.masks[sel], return_counts=True)
    # four odd subsets of three slots
    assert sorted(vals.tolist()) == [1, 2, 4, 7]
    assert chi2_uniform_pvalue(counts) > 1e-4


@given(st.integers(0, 2 ** 31), st.floats(0.5, 3.0))
def test_reverse_is_involution(seed, T):
    t = build_ball(2, 3)
    lg = sample_voter_log(t, 0.3, T, seed)
    rr = reverse_log(reverse_log(lg))
    assert np.allclose(rr.times, lg.times, atol=1e-12)
    assert np.array_equal(rr.vertices, lg.vertices)
    assert np.array_equal(rr.kinds, lg.kinds)
    assert np.array_equal(rr.masks, lg.masks)
    assert rr.reversed == lg.reversed


def test_reverse_window():
    t = build_ball(2, 3)
    lg = sample_contact_log(t, 1.0, 4.0, 0)
    r = reverse_log(lg, 2.0)
    assert r.T == 2.0 and len(r) == np.sum(lg.times <= 2.0)
    with pytest.raises(ValueError):
        reverse_log(lg, 5.0)
    assert len(restrict_log(lg, 1.0)) == np.sum(lg.times <= 1.0)


def test_coupled_logs_share_deaths_and_thin_births():
    t = build_ball(2, 3)
    l1, l2 = sample_coupled_contact_logs(t, 0.4, 1.0, 3.0, 9)
    d1 = l1.times[l1.kinds == K.DEATH]
    d2 = l2.times[l2.kinds == K.DEATH]
    assert np.array_equal(d1, d2)
    b1 = set(l1.times[l1.kinds == K.BIRTH].tolist())
    assert b1 <= set(l2.times[l2.kinds == K.BIRTH].tolist())
    same1, same2 = sample_coupled_contact_logs(t, 1.0, 1.0, 3.0, 9)
    assert np.array_equal(same1.times, same2.times)


def test_save_load_round_trip(tmp_path):
    t = build_ball(2, 3)
    lg = sample_voter_log(t, 0.3, 2.0, 4, 1)
    p = tmp_path / "log.npz"
    from treeips.events import save_log
    save_log(lg, p)
    back = load_log(p)
    assert back.same_events(lg) and back.rate == lg.rate and back.tree.R == 3
    with pytest.raises(ValueError):
        load_log(p, build_ball(2, 4))
