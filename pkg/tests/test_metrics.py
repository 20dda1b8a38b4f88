import numpy as np
import pytest

from evaluation.metrics import (
    ScoreSet, candidate_thresholds, eer, frr_far, gauss_separation_ratio, separation_score,
)
from feature_extractor.vae import LatentGaussian


def eer_oracle(genuine, forgery):
    """Quadratic sweep: count errors at every candidate threshold, interpolate the first crossing."""
    distinct = sorted(set(genuine) | set(forgery))
    points = [distinct[0] - 1.0] + distinct + [0.5 * (a + b) for a, b in zip(distinct, distinct[1:])]
    points.append(distinct[-1] + 1.0)
    points.sort()
    prev = None
    for t in points:
        frr = sum(1 for g in genuine if g < t) / len(genuine)
        far = sum(1 for f in forgery if f >= t) / len(forgery)
        if frr - far >= 0:
            if frr == far or prev is None:
                return frr, t
            pt, pfrr, pfar = prev
            lam = -(pfrr - pfar) / ((frr - far) - (pfrr - pfar))
            return pfrr + lam * (frr - pfrr), pt + lam * (t - pt)
        prev = (t, frr, far)
    raise AssertionError("no crossing")


def test_frr_far_examples():
    s = ScoreSet([0.9, 0.8], [0.1, 0.2])
    assert frr_far(s, -np.inf) == (0.0, 1.0)
    assert frr_far(s, np.inf) == (1.0, 0.0)
    assert frr_far(s, 0.5) == (0.0, 0.0)


def test_frr_far_rejects_empty_class():
    with pytest.raises(ValueError):
        frr_far(ScoreSet([0.5], []), 0.0)
    with pytest.raises(ValueError):
        eer(ScoreSet([], [0.5]))


def test_accept_rule_includes_threshold():
    assert frr_far(ScoreSet([0.5], [0.5]), 0.5) == (0.0, 1.0)


def test_eer_separable_is_zero():
    rate, t = eer(ScoreSet([0.9, 0.8, 0.7], [0.1, 0.2]))
    assert rate == 0.0
    assert frr_far(ScoreSet([0.9, 0.8, 0.7], [0.1, 0.2]), t) == (0.0, 0.0)


def test_eer_single_crossing():
    rate, t = eer(ScoreSet([0.6, 0.4], [0.5, 0.3]))
    assert rate == 0.5
    assert t == pytest.approx(0.45)


def test_eer_exact_tie_takes_smallest_crossing():
    s = ScoreSet([-0.3, -0.2, -0.1, 0.2, 0.6, 1.1, 1.4], [-2.6, -2.5, -0.5, -0.2, 0.2, 0.4, 1.0])
    rate, t = eer(s)
    assert t == pytest.approx(0.05, abs=1e-12)
    assert rate == pytest.approx(3 / 7, abs=1e-12)
    frr, far = frr_far(s, t)
    assert frr == far == pytest.approx(3 / 7)


def test_eer_fully_inverted_scores():
    rate, _ = eer(ScoreSet([0.1, 0.2], [0.8, 0.9]))
    assert rate == pytest.approx(1.0)


def test_eer_matches_sweep_oracle():
    rng = np.random.default_rng(31)
    for _ in range(100):
        n_g, n_f = rng.integers(1, 12, size=2)
        genuine = np.round(rng.normal(0.5, 1.0, n_g), 1)
        forgery = np.round(rng.normal(-0.5, 1.0, n_f), 1)
        rate, t = eer(ScoreSet(genuine, forgery))
        o_rate, o_t = eer_oracle(list(genuine), list(forgery))
        assert rate == pytest.approx(o_rate, abs=1e-12)
        assert t == pytest.approx(o_t, abs=1e-12)
        assert 0.0 <= rate <= 1.0


def test_rates_monotone_along_sweep():
    rng = np.random.default_rng(32)
    s = ScoreSet(rng.normal(1, 1, 30), rng.normal(0, 1, 40))
    rates = np.array([frr_far(s, t) for t in candidate_thresholds(s)])
    assert np.all(np.diff(rates[:, 0]) >= 0)
    assert np.all(np.diff(rates[:, 1]) <= 0)


def test_eer_bracketed_by_neighbouring_points():
    rng = np.random.default_rng(33)
    for _ in range(20):
        s = ScoreSet(rng.normal(1, 1, 15), rng.normal(0, 1, 25))
        rate, t = eer(s)
        thresholds = candidate_thresholds(s)
        below = thresholds[thresholds <= t].max()
        above = thresholds[thresholds >= t].min()
        frr_lo, far_lo = frr_far(s, below)
        frr_hi, far_hi = frr_far(s, above)
        assert min(frr_lo, far_hi) - 1e-12 <= rate <= max(frr_hi, far_lo) + 1e-12


def test_only_filters_forgery_kind():
    s = ScoreSet([1.0], [0.1, 0.2, 0.3], ['skilled', 'random', 'skilled'])
    np.testing.assert_array_equal(s.only('skilled').forgery_scores, [0.1, 0.3])
    assert s.only('random').forgery_kinds == ['random']
    assert not s.only('other').has_both_classes()


def test_kinds_length_checked():
    with pytest.raises(ValueError):
        ScoreSet([1.0], [0.1, 0.2], ['skilled'])


def test_separation_score():
    features = {
        'a': np.array([[0.0, 1.0], [0.0, -1.0]]),
        'b': np.array([[4.0, 1.0], [4.0, -1.0]]),
    }
    assert separation_score(features) == pytest.approx(4.0)
    tight = {'a': np.zeros((2, 2)), 'b': np.ones((2, 2))}
    assert separation_score(tight) == float('inf')


def test_gauss_separation_ratio():
    genuine = LatentGaussian(np.array([[0.0], [1.0]]), np.ones((2, 1)))
    forgeries = LatentGaussian(np.array([[3.0]]), np.ones((1, 1)))
    ratio, mean_gg, mean_gf = gauss_separation_ratio(genuine, forgeries)
    assert mean_gg == pytest.approx(1.0)
    assert mean_gf == pytest.approx((9.0 + 4.0) / 2)
    assert ratio == pytest.approx(6.5)
