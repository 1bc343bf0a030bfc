import math

import numpy as np
import pytest

from utils.data import GridConfig, IndexValues
from utils.dgp import draw_sample
from utils.errors import BoundaryEstimate, DegenerateDifference, InvalidConfig
from utils.influence import pointwise_table
from utils.inference import (
    auc_compare,
    dominance_test,
    pointwise_band,
    pointwise_ci,
    uniform_band,
    utility_weights,
)
from utils.kernels import KernelConfig
from utils.logit import fit_logit
from utils.resample import BootstrapConfig
from utils.roc import tp_fp_at_cutoff

MULT = BootstrapConfig(scheme="multiplier", boot=500, seed=1)
WEIGHTED = BootstrapConfig(scheme="weighted", boot=100, seed=1)


@pytest.fixture(scope="module")
def pair(noise_sample):
    """(noise-only index, full logit) on the same sample."""
    return fit_logit(noise_sample, ["z1"]), fit_logit(noise_sample, ["x1", "x2", "x3"])


class TestPointwiseCI:

    def test_conventional_estimated_index(self, sample, model):
        ci = pointwise_ci(sample, model, 0.5, "tp", "conventional_estimated_index")
        tp, _ = tp_fp_at_cutoff(sample, model.probabilities(sample), 0.5)
        se = math.sqrt(tp * (1 - tp) / sample.pi_hat / sample.n)
        assert ci.estimate == tp
        assert ci.se == pytest.approx(se)
        assert ci.lower == pytest.approx(tp - 1.6448536269514722 * se)

    def test_fixed_index(self, spec, sample):
        truth = IndexValues(g=spec.probabilities(sample.x))
        ci = pointwise_ci(sample, truth, 0.5, "tp_minus_fp", "conventional_fixed_index")
        assert ci.lower < ci.estimate < ci.upper
        assert ci.target == "tp_minus_fp"

    def test_corrected_uses_influence_covariance(self, sample, model):
        ci = pointwise_ci(sample, model, 0.5, "tp", "corrected_analytic")
        cov = pointwise_table(sample, model, [0.5], KernelConfig()).pointwise_cov(0)
        assert ci.se == pytest.approx(math.sqrt(cov[0, 0] / sample.n))

    def test_corrected_bootstrap(self, sample, model):
        ci = pointwise_ci(sample, model, 0.5, "tp", "corrected_bootstrap", bcfg=WEIGHTED)
        assert np.isfinite(ci.se) and ci.se > 0

    def test_linear_target(self, sample, model):
        a = pointwise_ci(sample, model, 0.5, (1.0, -1.0), "corrected_analytic")
        b = pointwise_ci(sample, model, 0.5, "tp_minus_fp", "corrected_analytic")
        assert a.target == "linear(1,-1)"
        assert (a.estimate, a.se) == pytest.approx((b.estimate, b.se))

    def test_boundary(self, sample, model):
        with pytest.raises(BoundaryEstimate):
            pointwise_ci(sample, model, 0.9999, "tp", "corrected_analytic")

    def test_corrected_needs_a_model(self, sample, model):
        with pytest.raises(InvalidConfig):
            pointwise_ci(sample, model.index(sample), 0.5, "tp", "corrected_analytic")

    @pytest.mark.parametrize("kw", [{"method": "exact"}, {"level": 1.5}, {"target": "auc"}])
    def test_invalid_arguments(self, sample, model, kw):
        args = {"target": "tp", "method": "conventional_estimated_index", "level": 0.9, **kw}
        with pytest.raises(InvalidConfig):
            pointwise_ci(sample, model, 0.5, **args)

    def test_correction_widens_high_cutoff(self, spec):
        ratios = []
        for seed in range(5):
            data = draw_sample(spec, 100 + seed)
            fit = fit_logit(data)
            conventional = pointwise_ci(data, fit, 0.8, "tp", "conventional_estimated_index")
            corrected = pointwise_ci(data, fit, 0.8, "tp", "corrected_analytic")
            ratios.append(corrected.se / conventional.se)
        assert np.median(ratios) > 1.2

    def test_utility_weights(self):
        assert utility_weights(0.5, 0.5) == (0.25, -0.25)
        assert utility_weights(0.2, 0.4) == pytest.approx((0.32, -0.12))


class TestUniformBand:

    @pytest.fixture(scope="class")
    def band(self, sample, model):
        return uniform_band(sample, model, GridConfig(), bcfg=MULT)

    def test_contains_estimate(self, band):
        assert np.all(band.lower <= band.r_hat) and np.all(band.r_hat <= band.upper)
        assert band.variance_source == "analytic" and band.scheme == "multiplier"

    def test_wider_than_pointwise(self, sample, model, band):
        pw = pointwise_band(sample, model, GridConfig())
        assert band.critical_value > pw.critical_value
        assert np.all(band.upper >= pw.upper)

    def test_one_sided(self, sample, model, band):
        one = uniform_band(sample, model, GridConfig(), bcfg=MULT, mode="one_sided")
        assert np.all(np.isinf(one.upper))
        assert one.critical_value <= band.critical_value

    def test_reproducible(self, sample, model, band):
        again = uniform_band(sample, model, GridConfig(), bcfg=MULT, workers=3)
        np.testing.assert_array_equal(again.lower, band.lower)

    def test_transform_invariance(self, sample, model, band):
        other = uniform_band(sample, model.with_transform("cube"), GridConfig(), bcfg=MULT)
        np.testing.assert_array_equal(other.lower, band.lower)
        np.testing.assert_array_equal(other.upper, band.upper)

    def test_weighted_scheme(self, sample, model):
        band = uniform_band(sample, model, GridConfig(0.1, 0.9, 0.05), bcfg=WEIGHTED)
        assert band.variance_source == "bootstrap"
        assert band.diagnostics["B"] == 100
        assert np.all(np.isfinite(band.lower))

    def test_frame(self, band):
        assert list(band.to_frame().columns) == ["t", "r_hat", "lower", "upper"]


class TestDominance:

    def test_identical_models(self, sample, model):
        with pytest.raises(DegenerateDifference):
            dominance_test(sample, model, fit_logit(sample), GridConfig(), bcfg=MULT)

    def test_informative_index_dominates_noise(self, noise_sample, pair):
        res = dominance_test(noise_sample, *pair, GridConfig(alpha=0.05), bcfg=MULT)
        assert res.reject
        assert res.statistic > res.critical_value
        assert 0.05 <= res.argmax_t <= 0.95

    def test_noise_does_not_dominate(self, noise_sample, pair):
        weak, strong = pair
        res = dominance_test(noise_sample, strong, weak, GridConfig(alpha=0.05), bcfg=MULT)
        assert not res.reject


    @pytest.mark.parametrize("name", ["exp", "cube"])
    def test_transform_invariance(self, noise_sample, pair, name):
        base = dominance_test(noise_sample, *pair, GridConfig(alpha=0.05), bcfg=MULT)
        weak, strong = (m.with_transform(name) for m in pair)
        other = dominance_test(noise_sample, weak, strong, GridConfig(alpha=0.05), bcfg=MULT)
        assert (other.statistic, other.critical_value, other.reject) == \
            (base.statistic, base.critical_value, base.reject)
        np.testing.assert_array_equal(other.sigma_rd, base.sigma_rd)


class TestAucCompare:

    def test_identical_models(self, sample, model):
        res = auc_compare(sample, model, fit_logit(sample), GridConfig(0.0, 1.0, 0.01), bcfg=MULT)
        assert res.diff == 0.0
        assert res.degenerate_warning
        assert math.isnan(res.p_value)
        assert res.domain == "full"

    def test_detects_gap(self, noise_sample, pair):
        res = auc_compare(noise_sample, *pair, GridConfig(), bcfg=MULT)
        assert res.domain == "grid"
        assert res.diff > 0 and res.z > 2
        assert res.p_value < 0.05

    def test_bootstrap_variance(self, noise_sample, pair):
        res = auc_compare(noise_sample, *pair, GridConfig(0.1, 0.9, 0.05), bcfg=WEIGHTED)
        assert res.variance_source == "bootstrap"
        assert res.v_hat_a > 0
