"""Minimum density power divergence estimation for one log-normal sample.

For ``beta > 0`` the estimator minimizes

    h(mu, sigma) = (2 pi)^(-beta/2) sigma^(-beta) * [
        exp(-beta mu + sigma^2 beta^2 / (2 (1 + beta))) / (1 + beta)^(3/2)
        - 1/(n beta) * sum_i x_i^(-beta) exp(-beta (log x_i - mu)^2 / (2 sigma^2)) ]

which is the divergence objective divided by ``1 + beta``.  At ``beta = 0``
the objective is the mean negative log-likelihood and the minimizer is the
closed-form MLE.

The optimizer works in ``(mu, log sigma)`` and minimizes ``h + 1/beta``,
rewritten with ``expm1`` so it stays accurate as ``beta`` approaches zero.
Objective values are only comparable at a fixed ``beta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import ConvergenceError, DegenerateSampleError, UnsupportedMethodError
from .model import LognormalParams, SampleLike, positive_values
from .optim import OptimizerSettings, minimize_bfgs

_LOG_2PI = math.log(2.0 * math.pi)
MAD_SCALE = 1.4826


def check_beta(beta: float) -> float:
    beta = float(beta)
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must lie in [0, 1], got {beta}")
    return beta


@dataclass(frozen=True)
class FitResult:
    params: LognormalParams
    beta: float
    objective_value: float
    gradient_norm: float
    iterations: int
    converged: bool
    start_points_used: int

    @property
    def mu(self) -> float:
        return self.params.mu

    @property
    def sigma(self) -> float:
        return self.params.sigma

    def to_dict(self) -> dict:
        return {
            "mu": self.params.mu,
            "sigma": self.params.sigma,
            "sigma2": self.params.sigma2,
            "beta": self.beta,
            "objective_value": self.objective_value,
            "gradient_norm": self.gradient_norm,
            "iterations": self.iterations,
            "converged": self.converged,
            "start_points_used": self.start_points_used,
        }


# --------------------------------------------------------------------------
# objective and gradient


def _integral_term(mu, sigma, beta):
    return math.exp(-beta * mu + sigma * sigma * beta * beta / (2 * (1 + beta))) / (1 + beta) ** 1.5


def _negloglik(y, mu, sigma):
    z = (y - mu) / sigma
    return math.log(sigma) + 0.5 * _LOG_2PI + 0.5 * float(np.mean(z * z)) + float(np.mean(y))


def _shifted_objective(y, mu, sigma, beta):
    """``h + 1/beta`` evaluated without cancellation."""
    c = math.log(sigma) + 0.5 * _LOG_2PI
    z = (y - mu) / sigma
    v = y + 0.5 * z * z + c
    tail = float(np.mean(np.expm1(-beta * v))) / beta
    return math.exp(-beta * c) * _integral_term(mu, sigma, beta) - tail


def dpd_objective(s: SampleLike, p: LognormalParams, beta: float) -> float:
    """The MDPD objective ``h`` at ``p`` (negative mean log-likelihood at ``beta = 0``)."""
    y = np.log(positive_values(s))
    beta = float(beta)
    if beta < 0:
        raise ValueError("beta must be non-negative")
    if beta == 0.0:
        return _negloglik(y, p.mu, p.sigma)
    c = math.exp(-beta * (math.log(p.sigma) + 0.5 * _LOG_2PI))
    z = (y - p.mu) / p.sigma
    b = float(np.mean(np.exp(-beta * (y + 0.5 * z * z))))
    return c * (_integral_term(p.mu, p.sigma, beta) - b / beta)


def _gradient(y, mu, sigma, beta):
    c = math.exp(-beta * (math.log(sigma) + 0.5 * _LOG_2PI))
    a = _integral_term(mu, sigma, beta)
    z = (y - mu) / sigma
    e = np.exp(-beta * (y + 0.5 * z * z))
    d_mu = c * (-beta * a - float(np.mean(e * z)) / sigma)
    d_sigma = c * (a * beta * (sigma * beta / (1 + beta) - 1.0 / sigma)
                   + float(np.mean(e * (1.0 - z * z))) / sigma)
    return np.array([d_mu, d_sigma])


def _nll_gradient(y, mu, sigma):
    z = (y - mu) / sigma
    return np.array([-float(np.mean(z)) / sigma, (1.0 - float(np.mean(z * z))) / sigma])


def dpd_gradient(s: SampleLike, p: LognormalParams, beta: float) -> np.ndarray:
    """Analytic ``(dh/dmu, dh/dsigma)`` for ``beta > 0``."""
    if float(beta) == 0.0:
        raise UnsupportedMethodError("beta = 0 has a closed-form minimizer; use fit_mle")
    if beta < 0:
        raise ValueError("beta must be non-negative")
    y = np.log(positive_values(s))
    return _gradient(y, p.mu, p.sigma, float(beta))


# --------------------------------------------------------------------------
# estimators


def fit_mle(s: SampleLike) -> FitResult:
    """Closed-form log-normal MLE (variance divisor ``n``)."""
    y = np.log(positive_values(s))
    if y.size < 2 or np.all(y == y[0]):
        raise DegenerateSampleError("MLE needs at least two distinct observations")
    mu = float(np.mean(y))
    sigma = math.sqrt(float(np.mean((y - mu) ** 2)))
    if not sigma > 0:
        raise DegenerateSampleError("sample has zero spread on the log scale")
    g = _nll_gradient(y, mu, sigma)
    return FitResult(
        params=LognormalParams(mu, sigma),
        beta=0.0,
        objective_value=_negloglik(y, mu, sigma),
        gradient_norm=float(np.linalg.norm(g)),
        iterations=0,
        converged=True,
        start_points_used=0,
    )


def robust_start(y: np.ndarray) -> tuple:
    """Median and scaled MAD of the logs (falls back to the SD when MAD is zero)."""
    med = float(np.median(y))
    mad = MAD_SCALE * float(np.median(np.abs(y - med)))
    if not mad > 0:
        mad = float(np.std(y))
    return med, mad


def fit_mdpd(s: SampleLike, beta: float, opts: Optional[OptimizerSettings] = None) -> FitResult:
    """MDPD estimate of ``(mu, sigma)``.

    Two starts are used, the MLE and the robust (median, 1.4826 MAD) pair of
    the logs; the converged solution with the lower objective is returned.

    Raises
    ------
    ConvergenceError
        If no start reaches the gradient tolerance.  ``err.best`` holds the
        lowest-objective iterate.
    """
    beta = check_beta(beta)
    mle = fit_mle(s)
    if beta == 0.0:
        return mle
    opts = opts or OptimizerSettings()
    values = positive_values(s)
    y = np.log(values)

    # trial points whose sigma under- or overflows are rejected by the line search
    def fun(t):
        try:
            sigma = math.exp(t[1])
            if sigma == 0.0:
                return math.inf
            with np.errstate(over="ignore", invalid="ignore"):
                return _shifted_objective(y, t[0], sigma, beta)
        except (OverflowError, ZeroDivisionError):
            return math.inf

    def grad(t):
        try:
            sigma = math.exp(t[1])
            if sigma == 0.0:
                return np.full(2, np.nan)
            with np.errstate(over="ignore", invalid="ignore"):
                g = _gradient(y, t[0], sigma, beta)
        except (OverflowError, ZeroDivisionError):
            return np.full(2, np.nan)
        return np.array([g[0], g[1] * sigma])

    def norm(t, g):
        return math.hypot(g[0], g[1] / math.exp(t[1]))

    starts = [(mle.mu, mle.sigma), robust_start(y)]
    runs = []
    for mu0, sigma0 in starts:
        runs.append(minimize_bfgs(fun, grad, [mu0, math.log(sigma0)], opts, norm))

    iterations = sum(r.iterations for r in runs)

    def to_fit(r, converged):
        p = LognormalParams(float(r.x[0]), math.exp(float(r.x[1])))
        return FitResult(p, beta, dpd_objective(values, p, beta), float(r.grad_norm),
                         iterations, converged, len(starts))

    ok = [r for r in runs if r.converged]
    if not ok:
        best = min(runs, key=lambda r: r.fun if np.isfinite(r.fun) else np.inf)
        raise ConvergenceError(
            f"MDPD fit (beta={beta}) did not converge from any start: {best.message}, "
            f"gradient norm {best.grad_norm:.3g}",
            best=to_fit(best, False),
        )
    best = min(ok, key=lambda r: r.fun)
    return to_fit(best, True)
