"""Binary logistic regression by Newton-Raphson maximum likelihood.

Covariance is the inverse observed information at the optimum; Wald z and
two-sided p-values per coefficient; average marginal effects via the delta
method.  Step-halving keeps the log-likelihood nondecreasing; coefficients
wandering past +-50 are treated as separation-driven divergence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .errors import ConvergenceError, DataError, SingularMatrixError

MAX_ITER = 100
LL_TOL = 1e-10
BETA_LIMIT = 50.0


@dataclass
class LogitFit:
    feature_names: list[str]  # includes "const" first
    beta: np.ndarray
    std_errors: np.ndarray
    z_values: np.ndarray
    p_values: np.ndarray
    log_likelihood: float
    ll_null: float
    pseudo_r2: float
    converged: bool
    n_obs: int
    cov: np.ndarray
    standardized: bool
    scale_mean: np.ndarray | None = None
    scale_std: np.ndarray | None = None

    def coef_table(self) -> dict[str, dict[str, float]]:
        return {
            name: {
                "coef": float(self.beta[i]),
                "std_err": float(self.std_errors[i]),
                "z": float(self.z_values[i]),
                "p": float(self.p_values[i]),
            }
            for i, name in enumerate(self.feature_names)
        }

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if self.standardized:
            X = (X - self.scale_mean) / self.scale_std
        return _sigmoid(_design(X) @ self.beta)


@dataclass
class MarginalEffects:
    feature_names: list[str]  # non-constant features
    ame: np.ndarray
    std_errors: np.ndarray
    z_values: np.ndarray
    p_values: np.ndarray

    def table(self) -> dict[str, dict[str, float]]:
        return {
            name: {
                "dydx": float(self.ame[i]),
                "std_err": float(self.std_errors[i]),
                "z": float(self.z_values[i]),
                "p": float(self.p_values[i]),
            }
            for i, name in enumerate(self.feature_names)
        }


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _design(X: np.ndarray) -> np.ndarray:
    return np.hstack([np.ones((X.shape[0], 1)), X])


def _log_likelihood(y: np.ndarray, eta: np.ndarray) -> float:
    # log L = sum y*eta - log(1 + exp(eta)), stable via logaddexp
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)))


def gradient(X: np.ndarray, y: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """Score vector at beta over the design matrix (constant included)."""
    return X.T @ (y - _sigmoid(X @ beta))


def fit_logit(
    X: np.ndarray,
    y: np.ndarray,
    feature_names: list[str] | None = None,
    standardize: bool = False,
) -> LogitFit:
    """Fit P(y=1 | x) = sigmoid(b0 + x . b); the intercept is always included."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise DataError("X must be (n, d) and y (n,) with matching n")
    if not np.all((y == 0) | (y == 1)):
        raise DataError("y must be binary 0/1")
    n, d = X.shape
    classes, counts = np.unique(y, return_counts=True)
    if len(classes) < 2 or counts.min() < 2:
        raise DataError("need at least 2 observations of each class")

    names = list(feature_names) if feature_names else [f"x{i}" for i in range(d)]
    if len(names) != d:
        raise DataError(f"{len(names)} names for {d} features")
    stds = X.std(axis=0)
    for j, s in enumerate(stds):
        if s == 0.0:
            raise DataError(f"zero-variance feature: {names[j]}")

    mean = X.mean(axis=0)
    if standardize:
        Xs = (X - mean) / stds
    else:
        Xs = X
    D = _design(Xs)

    beta = np.zeros(d + 1)
    ll = _log_likelihood(y, D @ beta)
    converged = False
    # Divergence heuristic on the per-standard-deviation scale, so raw
    # covariate units (calendar years, tight [0,1] scores) cannot trip it;
    # the intercept is excluded because it absorbs covariate location.
    slope_scale = np.ones(d) if standardize else stds
    for _ in range(MAX_ITER):
        p = _sigmoid(D @ beta)
        w = p * (1.0 - p)
        g = D.T @ (y - p)
        info = (D * w[:, None]).T @ D
        try:
            step = np.linalg.solve(info, g)
        except np.linalg.LinAlgError as exc:
            raise SingularMatrixError(f"singular information matrix: {exc}") from exc
        # step-halving so the log-likelihood never decreases
        scale = 1.0
        for _ in range(30):
            candidate = beta + scale * step
            ll_new = _log_likelihood(y, D @ candidate)
            if ll_new >= ll - 1e-14:
                break
            scale /= 2.0
        beta = beta + scale * step
        if np.any(np.abs(beta[1:] * slope_scale) > BETA_LIMIT):
            raise ConvergenceError(
                "coefficients diverged (likely perfect separation)"
            )
        if abs(ll_new - ll) < LL_TOL:
            ll = ll_new
            converged = True
            break
        ll = ll_new

    p = _sigmoid(D @ beta)
    w = p * (1.0 - p)
    info = (D * w[:, None]).T @ D
    try:
        cov = np.linalg.inv(info)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(f"singular information matrix: {exc}") from exc
    se = np.sqrt(np.diag(cov))
    z = beta / se
    pvals = 2.0 * norm.sf(np.abs(z))

    base = y.mean()
    ll_null = float(n * (base * np.log(base) + (1 - base) * np.log(1 - base)))
    return LogitFit(
        feature_names=["const"] + names,
        beta=beta,
        std_errors=se,
        z_values=z,
        p_values=pvals,
        log_likelihood=ll,
        ll_null=ll_null,
        pseudo_r2=1.0 - ll / ll_null,
        converged=converged,
        n_obs=n,
        cov=cov,
        standardized=standardize,
        scale_mean=mean if standardize else None,
        scale_std=stds if standardize else None,
    )


def marginal_effects(fit: LogitFit, X: np.ndarray) -> MarginalEffects:
    """Average marginal effects dP/dx_j = mean_i p_i (1 - p_i) beta_j with
    delta-method standard errors."""
    if not fit.converged:
        raise ConvergenceError("marginal effects require a converged fit")
    X = np.asarray(X, dtype=np.float64)
    if fit.standardized:
        X = (X - fit.scale_mean) / fit.scale_std
    D = _design(X)
    n, p_dim = D.shape
    eta = D @ fit.beta
    p = _sigmoid(eta)
    w = p * (1.0 - p)

    slopes = fit.beta[1:]
    ame = w.mean() * slopes

    # Jacobian of AME_j wrt the full beta (const included):
    # d/d beta_k mean_i w_i beta_j = delta_jk mean(w) + beta_j mean_i (1-2p_i) w_i D_ik
    jac = np.zeros((p_dim - 1, p_dim))
    mw = w.mean()
    grad_w = ((1.0 - 2.0 * p) * w)[:, None] * D  # n x p_dim
    mean_grad_w = grad_w.mean(axis=0)
    for j in range(1, p_dim):
        jac[j - 1] = slopes[j - 1] * mean_grad_w
        jac[j - 1, j] += mw
    var = np.einsum("jk,kl,jl->j", jac, fit.cov, jac)
    se = np.sqrt(np.maximum(var, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, ame / se, 0.0)
    pvals = 2.0 * norm.sf(np.abs(z))
    return MarginalEffects(
        feature_names=fit.feature_names[1:],
        ame=ame,
        std_errors=se,
        z_values=z,
        p_values=pvals,
    )
