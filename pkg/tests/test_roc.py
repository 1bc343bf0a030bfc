import numpy as np
import pytest
from scipy.integrate import trapezoid

from utils.data import Dataset, GridConfig, IndexValues, make_t_grid
from utils.errors import InvalidConfig
from utils.roc import (
    auc,
    fp_inverse,
    partial_auc,
    roc_at_grid,
    roc_points,
    tp_fp_at_cutoff,
    weighted_auc,
    weighted_tp_fp,
)


def _brute_tp_fp(g, y, c):
    n1 = sum(1 for yi in y if yi == 1)
    n0 = len(y) - n1
    tp = sum(1 for gi, yi in zip(g, y) if yi == 1 and gi > c) / n1
    fp = sum(1 for gi, yi in zip(g, y) if yi == 0 and gi > c) / n0
    return tp, fp


def _brute_inverse(g, y, t):
    cands = [-np.inf] + sorted(set(gi for gi, yi in zip(g, y) if yi == 0))
    rates = {c: _brute_tp_fp(g, y, c) for c in cands}
    return [min(c for c in cands if rates[c][1] <= tj + 1e-12) for tj in t], rates


def _brute_curve(g, y, t):
    cutoffs, rates = _brute_inverse(g, y, t)
    return np.array([rates[c][0] for c in cutoffs])


def _random_fixture(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(10, 201))
    y = rng.integers(0, 2, n).astype(float)
    y[:2] = (1.0, 0.0)
    levels = int(rng.integers(3, 40))
    g = np.round(rng.integers(0, levels, n) / levels + 0.3 * y, 6)
    return Dataset(y=y, x=g.reshape(-1, 1), columns=("g",))


def _brute_auc(g, y):
    pos = [gi for gi, yi in zip(g, y) if yi == 1]
    neg = [gi for gi, yi in zip(g, y) if yi == 0]
    s = sum(1.0 if a > b else 0.5 if a == b else 0.0 for a in pos for b in neg)
    return s / (len(pos) * len(neg))


class TestCutoffCounts:

    def test_worked_example(self, tiny):
        assert tp_fp_at_cutoff(tiny, tiny.x[:, 0], 0.5) == (0.5, 0.5)

    def test_extremes(self, tiny):
        assert tp_fp_at_cutoff(tiny, tiny.x[:, 0], 0.0) == (1.0, 1.0)
        assert tp_fp_at_cutoff(tiny, tiny.x[:, 0], 0.9) == (0.0, 0.0)

    def test_against_double_loop(self, random_small):
        g, y = random_small.x[:, 0], random_small.y
        for c in (-1.0, 0.0, 0.3, 0.45, 1.2):
            assert tp_fp_at_cutoff(random_small, g, c) == pytest.approx(_brute_tp_fp(g, y, c))

    def test_unit_weights_match_unweighted(self, random_small):
        g, y = random_small.x[:, 0], random_small.y
        a = weighted_tp_fp(g, y, None, [0.1, 0.5])
        b = weighted_tp_fp(g, y, np.ones_like(g), [0.1, 0.5])
        np.testing.assert_array_equal(a, b)

    def test_integer_weights_replicate_rows(self, random_small):
        g, y = random_small.x[:, 0], random_small.y
        w = np.arange(60) % 3
        keep = np.repeat(np.arange(60), w)
        a = weighted_tp_fp(g, y, w, [0.2, 0.7])
        b = weighted_tp_fp(g[keep], y[keep], None, [0.2, 0.7])
        np.testing.assert_allclose(a, b, atol=1e-12)


class TestInversion:

    @pytest.fixture
    def four_negatives(self):
        return Dataset(y=[0, 0, 0, 0, 1, 1], x=[[0.2], [0.4], [0.6], [0.8], [0.5], [0.9]],
                       columns=("g",))

    def test_step_inversion(self, four_negatives):
        assert fp_inverse(four_negatives, four_negatives.x[:, 0], 0.5) == 0.4

    def test_t_one_is_below_everything(self, four_negatives):
        assert fp_inverse(four_negatives, four_negatives.x[:, 0], 1.0) == -np.inf

    def test_t_zero_is_the_top_negative(self, four_negatives):
        assert fp_inverse(four_negatives, four_negatives.x[:, 0], 0.0) == 0.8

    def test_just_below_a_step(self, four_negatives):
        g = four_negatives.x[:, 0]
        t = 0.5 - 1e-10
        c = fp_inverse(four_negatives, g, t)
        assert c == 0.6
        assert tp_fp_at_cutoff(four_negatives, g, c)[1] <= t

    def test_out_of_range(self, four_negatives):
        with pytest.raises(InvalidConfig):
            fp_inverse(four_negatives, four_negatives.x[:, 0], 1.5)


class TestRocAtGrid:

    def test_perfect_separation(self):
        d = Dataset(y=[1, 1, 0, 0], x=[[0.9], [0.8], [0.2], [0.1]], columns=("g",))
        curve = roc_at_grid(d, d.x[:, 0], make_t_grid(GridConfig()))
        np.testing.assert_array_equal(curve.r_values, 1.0)
        assert curve.auc == 1.0

    def test_reversed_separation(self):
        d = Dataset(y=[1, 1, 0, 0], x=[[0.9], [0.8], [0.2], [0.1]], columns=("g",))
        curve = roc_at_grid(d, -d.x[:, 0], [0.1, 0.25, 0.4])
        np.testing.assert_array_equal(curve.r_values, 0.0)

    def test_against_brute_force(self, random_small):
        g, y = random_small.x[:, 0], random_small.y
        t = make_t_grid(GridConfig(0.0, 1.0, 0.05))
        np.testing.assert_allclose(roc_at_grid(random_small, g, t).r_values, _brute_curve(g, y, t))

    def test_monotone_in_t(self, sample, model):
        curve = roc_at_grid(sample, model.index(sample), make_t_grid(GridConfig()))
        assert np.all(np.diff(curve.r_values) >= 0)

    def test_bad_grid(self, random_small):
        with pytest.raises(InvalidConfig):
            roc_at_grid(random_small, random_small.x[:, 0], [0.5, 0.2])

    @pytest.mark.parametrize("name", ["exp", "cube"])
    def test_transform_invariance(self, sample, model, name):
        t = make_t_grid(GridConfig())
        base = roc_at_grid(sample, model.index(sample), t)
        other = roc_at_grid(sample, model.with_transform(name).index(sample), t)
        np.testing.assert_array_equal(base.r_values, other.r_values)
        np.testing.assert_array_equal(base.c_obs, other.c_obs)
        assert base.auc == other.auc

    def test_frame_columns(self, tiny):
        frame = roc_at_grid(tiny, tiny.x[:, 0], [0.0, 0.5, 1.0]).to_frame()
        assert list(frame.columns) == ["t", "r", "c_hat"]


class TestAuc:

    def test_constant_index_is_half(self, tiny):
        assert auc(tiny, np.full(4, 0.3)) == 0.5

    def test_against_pair_count(self, random_small):
        g, y = random_small.x[:, 0], random_small.y
        assert auc(random_small, g) == pytest.approx(_brute_auc(g, y), abs=1e-12)

    def test_equals_area_under_step_locus(self, random_small):
        fp, tp = roc_points(random_small, random_small.x[:, 0])
        assert auc(random_small, random_small.x[:, 0]) == pytest.approx(trapezoid(tp, fp), abs=1e-12)

    def test_negated_index(self, random_small):
        g = random_small.x[:, 0]
        assert auc(random_small, -g) == pytest.approx(1.0 - auc(random_small, g), abs=1e-12)

    def test_accepts_index_values(self, random_small):
        g = random_small.x[:, 0]
        assert auc(random_small, IndexValues(g=g)) == auc(random_small, g)

    def test_weighted_mann_whitney(self):
        g = np.array([0.1, 0.5, 0.3, 0.7])
        y = np.array([0.0, 1.0, 0.0, 1.0])
        assert weighted_auc(g, y, np.array([1.0, 1.0, 3.0, 1.0])) == 1.0

    def test_partial_auc_of_flat_curve(self):
        d = Dataset(y=[1, 1, 0, 0], x=[[0.9], [0.8], [0.2], [0.1]], columns=("g",))
        curve = roc_at_grid(d, d.x[:, 0], make_t_grid(GridConfig(0.2, 0.6, 0.1)))
        assert partial_auc(curve) == pytest.approx(0.4)


class TestRandomFixtures:
    """Every estimator against double-loop counting on tie-heavy random samples."""

    T = make_t_grid(GridConfig(0.0, 1.0, 0.1))

    @pytest.mark.parametrize("seed", range(100))
    def test_matches_brute_force(self, seed):
        d = _random_fixture(seed)
        g, y = d.x[:, 0], d.y
        for c in (-np.inf, *np.unique(g)[::7], 0.55):
            assert tp_fp_at_cutoff(d, g, c) == pytest.approx(_brute_tp_fp(g, y, c), abs=1e-12)
        cutoffs, _ = _brute_inverse(g, y, self.T)
        assert [fp_inverse(d, g, t) for t in self.T] == cutoffs
        np.testing.assert_allclose(roc_at_grid(d, g, self.T).r_values, _brute_curve(g, y, self.T), atol=1e-12)
        assert auc(d, g) == pytest.approx(_brute_auc(g, y), abs=1e-12)
