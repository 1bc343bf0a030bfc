import numpy as np
import pytest
from scipy.optimize import minimize
from scipy.special import expit

from utils.data import Dataset
from utils.dgp import DgpSpec, draw_sample
from utils.errors import AllZeroClassWeight, InvalidConfig, InvalidWeights, Separation
from utils.logit import WeightVector, draw_weights, fit_logit, fit_logit_weighted, influence_rows


def _negloglik(beta, X, y):
    eta = X @ beta
    return -np.sum(y * eta - np.logaddexp(0.0, eta))


class TestFitLogit:

    def test_intercept_only_at_half(self):
        d = Dataset(y=[1, 0, 1, 0, 1, 0], x=np.arange(6.0).reshape(-1, 1), columns=("x",))
        m = fit_logit(d, [])
        np.testing.assert_allclose(m.beta_hat, [0.0], atol=1e-10)

    def test_separation(self):
        d = Dataset(y=[0, 0, 1, 1], x=[[1.0], [2.0], [3.0], [4.0]], columns=("x",))
        with pytest.raises(Separation):
            fit_logit(d)

    def test_matches_independent_optimizer(self):
        d = draw_sample(DgpSpec(n=200), 3)
        X = d.design()
        res = minimize(_negloglik, np.zeros(X.shape[1]), args=(X, d.y), method="BFGS",
                       jac=lambda b, X, y: -X.T @ (y - expit(X @ b)),
                       options={"gtol": 1e-10, "maxiter": 10_000})
        np.testing.assert_allclose(fit_logit(d).beta_hat, res.x, atol=1e-4)

    def test_score_is_zero_at_optimum(self, sample, model):
        np.testing.assert_allclose(model.psi_beta.mean(axis=0), 0.0, atol=1e-8)

    def test_a_matrix_is_the_numerical_hessian(self, sample, model):
        X, y, n = sample.design(), sample.y, sample.n

        def score(b):
            return X.T @ (y - expit(X @ b)) / n

        eps = 1e-6
        k = model.beta_hat.shape[0]
        num = np.empty((k, k))
        for j in range(k):
            e = np.zeros(k)
            e[j] = eps
            num[:, j] = -(score(model.beta_hat + e) - score(model.beta_hat - e)) / (2 * eps)
        np.testing.assert_allclose(model.a_matrix, num, rtol=1e-5, atol=1e-8)

    def test_v_hat_from_influence(self, sample, model):
        psi = influence_rows(model, sample)
        np.testing.assert_allclose(model.v_hat, psi.T @ psi / sample.n)

    def test_rescaling_predictors(self, sample, model):
        scaled = Dataset(y=sample.y, x=2.0 * sample.x, columns=sample.columns)
        m2 = fit_logit(scaled)
        np.testing.assert_allclose(m2.beta_hat[1:], model.beta_hat[1:] / 2.0, rtol=1e-6)
        np.testing.assert_allclose(m2.probabilities(scaled), model.probabilities(sample), atol=1e-9)

    def test_column_subset(self, sample):
        m = fit_logit(sample, ["x3"])
        assert m.columns == ("x3",)
        assert m.beta_hat.shape == (2,)

    def test_unknown_transform(self, model):
        with pytest.raises(InvalidConfig):
            model.with_transform("log")

    def test_to_dict_names_coefficients(self, model):
        d = model.to_dict()
        assert list(d["coefficients"]) == ["intercept", "x1", "x2", "x3"]


class TestWeightedFit:

    def test_unit_weights_reproduce_fit(self, sample, model):
        mw = fit_logit_weighted(sample, WeightVector(np.ones(sample.n)))
        np.testing.assert_array_equal(mw.beta_hat, model.beta_hat)

    def test_doubling_a_half_sample(self, sample):
        h = sample.n // 2
        w = np.r_[np.full(h, 2.0), np.zeros(sample.n - h)]
        half = Dataset(y=sample.y[:h], x=sample.x[:h], columns=sample.columns)
        np.testing.assert_allclose(fit_logit_weighted(sample, WeightVector(w)).beta_hat,
                                   fit_logit(half).beta_hat, atol=1e-7)

    def test_replicated_rows(self, sample):
        w = np.ones(sample.n)
        w[:50] = 3.0
        rep = Dataset(y=np.r_[sample.y, sample.y[:50], sample.y[:50]],
                      x=np.vstack([sample.x, sample.x[:50], sample.x[:50]]), columns=sample.columns)
        np.testing.assert_allclose(fit_logit_weighted(sample, WeightVector(w)).beta_hat,
                                   fit_logit(rep).beta_hat, atol=1e-7)

    def test_zero_weight_class(self, sample):
        w = np.where(sample.y == 1.0, 0.0, 1.0)
        with pytest.raises(AllZeroClassWeight):
            fit_logit_weighted(sample, WeightVector(w))

    def test_negative_weights(self):
        with pytest.raises(InvalidWeights):
            WeightVector([1.0, -1.0])

    @pytest.mark.slow
    def test_bootstrap_spread_matches_v_hat(self, sample, model):
        rng = np.random.default_rng(0)
        reps = []
        while len(reps) < 500:
            w = draw_weights(rng, sample.n)
            reps.append(fit_logit_weighted(sample, w).beta_hat)
        dev = np.sqrt(sample.n) * (np.array(reps) - model.beta_hat)
        np.testing.assert_allclose(np.diag(dev.T @ dev / len(reps)), np.diag(model.v_hat), rtol=0.25)


class TestDrawWeights:

    def test_two_point_support(self):
        w = draw_weights(np.random.default_rng(1), 1000, "two_point").w
        assert set(np.unique(w)) <= {0.0, 2.0}

    def test_exponential_moments(self):
        w = draw_weights(np.random.default_rng(1), 200_000, "exponential").w
        assert abs(w.mean() - 1.0) < 0.01
        assert abs(w.var() - 1.0) < 0.03

    def test_gaussian_rejected(self):
        with pytest.raises(InvalidWeights):
            draw_weights(np.random.default_rng(1), 10, "gaussian")

    def test_unknown_law(self):
        with pytest.raises(InvalidConfig):
            draw_weights(np.random.default_rng(1), 10, "poisson")
