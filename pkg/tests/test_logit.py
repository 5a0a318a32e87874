import numpy as np
import pytest

from topicflow.errors import ConvergenceError, DataError, SingularMatrixError
from topicflow.logit import fit_logit, gradient, marginal_effects, _design, _sigmoid
from topicflow.synth import gen_feature_table


def planted(n=5000, beta=(1.0, -1.0, 0.5), seed=0):
    _, X, y = gen_feature_table(np.array(beta), n, seed)
    return X, y, np.array(beta)


class TestFit:
    def test_planted_recovery_within_wald_ci(self):
        X, y, beta = planted()
        fit = fit_logit(X, y)
        assert fit.converged
        for j, true in enumerate(beta, start=1):
            lo = fit.beta[j] - 1.96 * fit.std_errors[j]
            hi = fit.beta[j] + 1.96 * fit.std_errors[j]
            assert lo <= true <= hi

    def test_gradient_vanishes_at_optimum(self):
        X, y, _ = planted(n=2000, seed=3)
        fit = fit_logit(X, y)
        g = gradient(_design(X), y, fit.beta)
        assert np.abs(g).max() < 1e-6

    def test_log_likelihood_nondecreasing_by_construction(self):
        # step-halving guarantees monotone ascent; spot-check the final value
        # dominates the start
        X, y, _ = planted(n=500, seed=4)
        fit = fit_logit(X, y)
        ll0 = float(np.sum(y * 0.0 - np.logaddexp(0.0, np.zeros(len(y)))))
        assert fit.log_likelihood >= ll0

    def test_se_matches_finite_difference_hessian(self):
        X, y, _ = planted(n=400, seed=5)
        fit = fit_logit(X, y)
        D = _design(X)

        def ll(beta):
            eta = D @ beta
            return float(np.sum(y * eta - np.logaddexp(0.0, eta)))

        d = len(fit.beta)
        h = 1e-5
        H = np.zeros((d, d))
        for i in range(d):
            for j in range(d):
                bpp = fit.beta.copy(); bpp[i] += h; bpp[j] += h
                bpm = fit.beta.copy(); bpm[i] += h; bpm[j] -= h
                bmp = fit.beta.copy(); bmp[i] -= h; bmp[j] += h
                bmm = fit.beta.copy(); bmm[i] -= h; bmm[j] -= h
                H[i, j] = (ll(bpp) - ll(bpm) - ll(bmp) + ll(bmm)) / (4 * h * h)
        se_fd = np.sqrt(np.diag(np.linalg.inv(-H)))
        np.testing.assert_allclose(fit.std_errors, se_fd, rtol=1e-4)

    def test_single_class_rejected(self):
        X = np.random.default_rng(0).normal(size=(50, 2))
        with pytest.raises(DataError):
            fit_logit(X, np.ones(50))

    def test_duplicated_column_singular(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(100, 1))
        X = np.hstack([x, x])
        y = (rng.random(100) < _sigmoid(x[:, 0])).astype(float)
        with pytest.raises(SingularMatrixError):
            fit_logit(X, y)

    def test_zero_variance_feature_named(self):
        rng = np.random.default_rng(2)
        X = np.hstack([rng.normal(size=(60, 1)), np.full((60, 1), 3.0)])
        y = (rng.random(60) < 0.5).astype(float)
        with pytest.raises(DataError, match="flatline"):
            fit_logit(X, y, feature_names=["ok", "flatline"])

    def test_perfect_separation_diverges(self):
        x = np.linspace(-2, 2, 80)[:, None]
        y = (x[:, 0] > 0).astype(float)
        with pytest.raises(ConvergenceError):
            fit_logit(x, y)

    def test_standardization_preserves_probabilities(self):
        X, y, _ = planted(n=600, seed=7)
        raw = fit_logit(X, y, standardize=False)
        std = fit_logit(X, y, standardize=True)
        np.testing.assert_allclose(
            raw.predict_proba(X), std.predict_proba(X), atol=1e-9
        )
        assert not np.allclose(raw.beta, std.beta)

    def test_pseudo_r2_in_range(self):
        X, y, _ = planted(n=800, seed=8)
        fit = fit_logit(X, y)
        assert 0.0 <= fit.pseudo_r2 < 1.0


class TestMarginalEffects:
    def test_hand_computed_value(self):
        # slope 1, x in {-1, 0, 1}: AME = mean of p(1-p) = 0.21441
        X = np.array([[-1.0], [0.0], [1.0]])
        from topicflow.logit import LogitFit

        base = LogitFit(
            feature_names=["const", "x"],
            beta=np.array([0.0, 1.0]),
            std_errors=np.array([1.0, 1.0]),
            z_values=np.zeros(2),
            p_values=np.ones(2),
            log_likelihood=0.0,
            ll_null=-1.0,
            pseudo_r2=0.0,
            converged=True,
            n_obs=3,
            cov=np.eye(2),
            standardized=False,
        )
        ame = marginal_effects(base, X)
        assert ame.ame[0] == pytest.approx(0.21441, abs=1e-5)

    def test_zero_coefficient_zero_effect(self):
        rng = np.random.default_rng(9)
        X = rng.normal(size=(300, 2))
        y = (rng.random(300) < _sigmoid(X[:, 0])).astype(float)
        fit = fit_logit(X, y)
        fit.beta[2] = 0.0
        ame = marginal_effects(fit, X)
        assert ame.ame[1] == 0.0

    def test_sign_matches_coefficient(self):
        X, y, _ = planted(n=1500, seed=10)
        fit = fit_logit(X, y)
        ame = marginal_effects(fit, X)
        assert np.all(np.sign(ame.ame) == np.sign(fit.beta[1:]))

    def test_requires_convergence(self):
        X, y, _ = planted(n=300, seed=11)
        fit = fit_logit(X, y)
        fit.converged = False
        with pytest.raises(ConvergenceError):
            marginal_effects(fit, X)
