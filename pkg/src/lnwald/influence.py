"""Influence-function diagnostics for the MDPD estimator and the Wald functional.

The estimator influence function at ``x`` is ``J^-1 (u(x) f(x)^beta - xi)``.
It is bounded in ``x`` for ``beta > 0`` and tends to ``-J^-1 xi`` at both
ends of the support; at ``beta = 0`` it is the unbounded MLE influence
function.  The score used inside it is the likelihood score
``d log f / d(mu, sigma)`` (see :func:`likelihood_score`); that is the form
matched by the finite-difference derivative of :func:`population_mdpd_functional`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional, Sequence

import numpy as np

from .asymptotics import check_weight, inverse_2x2, j_matrix, normal_expectation
from .exceptions import ConvergenceError, UnsupportedMethodError
from .mdpd import check_beta
from .model import EtaVector, LognormalParams
from .optim import OptimizerSettings, minimize_bfgs
from .wald import m_gradient, on_null, sigma2_m

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class IfPoint:
    x: float
    value: np.ndarray


@dataclass(frozen=True)
class MixtureSpec:
    """``(1 - epsilon) F_base + epsilon * (point mass at atom)``."""

    base: LognormalParams
    epsilon: float
    atom: float

    def __post_init__(self):
        if not 0.0 <= self.epsilon < 0.5:
            raise ValueError("epsilon must lie in [0, 0.5)")
        if not self.atom > 0:
            raise ValueError("atom must be positive")


class Contaminated(str, Enum):
    POP1 = "pop1"
    POP2 = "pop2"
    CROSS = "cross"


def _check_x(x):
    x = float(x)
    if not x > 0:
        raise ValueError(f"x must be positive, got {x}")
    return x


def score_function(x: float, p: LognormalParams) -> np.ndarray:
    """Score pair ``((log x - mu)/sigma, ((log x - mu)^2/sigma^2 - 1)/sigma)``.

    This is the displayed published form.  Its first component is ``sigma``
    times ``d log f / d mu``; the two agree only at ``sigma = 1``.
    """
    z = (math.log(_check_x(x)) - p.mu) / p.sigma
    return np.array([z, (z * z - 1.0) / p.sigma])


def likelihood_score(x, p: LognormalParams) -> np.ndarray:
    """``d log f / d(mu, sigma)``; vectorized over ``x`` along the last axis."""
    y = np.log(np.asarray(x, dtype=float))
    z = (y - p.mu) / p.sigma
    return np.array([z / p.sigma, (z * z - 1.0) / p.sigma])


def _xi_prefactor(p, b):
    s = p.sigma
    return math.exp(-p.mu * b + s * s * b * b / (2 * (1 + b))) / (
        s ** (1 + b) * (2 * math.pi) ** (b / 2) * (1 + b) ** 1.5)


def xi_vector(p: LognormalParams, beta: float) -> np.ndarray:
    """``integral of u f^(1+beta)`` in closed form, ``u`` the likelihood score.

    The second component is ``beta (beta sigma^2 - 1 - beta) / (1 + beta)``
    times the prefactor.  The often-quoted variant with ``1 - beta`` in place
    of ``-1 - beta`` (kept as :func:`xi_vector_published`) disagrees with
    direct quadrature and with the second term of ``K``.
    """
    b, s = float(beta), p.sigma
    return _xi_prefactor(p, b) * np.array([-s * b, b * (b * s * s - 1 - b) / (1 + b)])


def xi_vector_published(p: LognormalParams, beta: float) -> np.ndarray:
    b, s = float(beta), p.sigma
    return _xi_prefactor(p, b) * np.array([-s * b, b * (1 - b + b * s * s) / (1 + b)])


def if_limit(p: LognormalParams, beta: float) -> np.ndarray:
    """Value of the estimator influence function as ``x -> 0`` or ``x -> inf`` (``beta > 0``)."""
    if float(beta) <= 0:
        raise UnsupportedMethodError("the MLE influence function has no finite limit")
    return -inverse_2x2(j_matrix(p, beta)) @ xi_vector(p, beta)


def _log_pdf(y, p):
    z = (y - p.mu) / p.sigma
    return -0.5 * z * z - y - math.log(p.sigma) - 0.5 * _LOG_2PI


def estimator_if(x: float, p: LognormalParams, beta: float) -> IfPoint:
    """Influence function of the MDPD functional at the model ``p``."""
    x = _check_x(x)
    b = float(beta)
    y = math.log(x)
    if b == 0.0:
        value = np.array([y - p.mu,
                          -(p.sigma ** 2 - p.mu ** 2 + 2 * p.mu * y - y * y) / (2 * p.sigma)])
        return IfPoint(x, value)
    if b < 0:
        raise ValueError("beta must be non-negative")
    weight = math.exp(b * _log_pdf(y, p))
    u = likelihood_score(x, p)
    value = inverse_2x2(j_matrix(p, b)) @ (u * weight - xi_vector(p, b))
    return IfPoint(x, value)


def influence_table(betas: Iterable[float], p: LognormalParams, xs: Sequence[float]) -> list:
    """Rows ``(beta, x, IF_mu, IF_sigma)`` for plotting."""
    rows = []
    for b in betas:
        for x in xs:
            v = estimator_if(x, p, b).value
            rows.append((float(b), float(x), float(v[0]), float(v[1])))
    return rows


# --------------------------------------------------------------------------
# population functional


def _model_integral(mu, sigma, b):
    """``integral of f^(1+b)`` and its gradient in ``(mu, sigma)``."""
    val = math.exp(-0.5 * b * _LOG_2PI - b * math.log(sigma) - b * mu
                   + b * b * sigma * sigma / (2 * (1 + b))) / math.sqrt(1 + b)
    return val, np.array([-b * val, val * (-b / sigma + sigma * b * b / (1 + b))])


def population_mdpd_functional(mix: MixtureSpec, beta: float,
                               opts: Optional[OptimizerSettings] = None) -> LognormalParams:
    """MDPD functional evaluated at a log-normal contaminated by a point mass.

    Minimizes ``int f^(1+b) - (1 + 1/b) [(1 - eps) E_F f^b + eps f^b(atom)]``
    over ``(mu, sigma)``, with ``E_F`` computed by Gauss-Hermite quadrature,
    starting from the base parameters.
    """
    b = check_beta(beta)
    if b == 0.0:
        raise UnsupportedMethodError("the population functional is implemented for beta > 0 only")
    eps = mix.epsilon
    base = mix.base
    y_atom = math.log(mix.atom)
    opts = opts or OptimizerSettings(gtol=1e-12, max_iter=500)

    def parts(t):
        mu, sigma = t[0], math.exp(t[1])
        p = LognormalParams(mu, sigma)
        integral, d_integral = _model_integral(mu, sigma, b)

        def fb_and_grad(y):
            fb = np.exp(b * _log_pdf(y, p))
            return np.vstack([fb, fb * b * likelihood_score(np.exp(y), p)]).T

        ef = normal_expectation(fb_and_grad, base.mu, base.sigma)
        atom = fb_and_grad(np.array([y_atom]))[0]
        mix_term = (1 - eps) * ef + eps * atom
        value = integral - (1 + 1 / b) * mix_term[0]
        grad = d_integral - (1 + 1 / b) * mix_term[1:]
        return value, grad, sigma

    def fun(t):
        try:
            return parts(t)[0]
        except (OverflowError, ValueError):
            return math.inf

    def grad(t):
        try:
            _, g, sigma = parts(t)
        except (OverflowError, ValueError):
            return np.full(2, np.nan)
        return np.array([g[0], g[1] * sigma])

    def norm(t, g):
        return math.hypot(g[0], g[1] / math.exp(t[1]))

    r = minimize_bfgs(fun, grad, [base.mu, math.log(base.sigma)], opts, norm)
    if not r.converged:
        raise ConvergenceError(f"population functional did not converge: {r.message}",
                               best=LognormalParams(float(r.x[0]), math.exp(float(r.x[1]))))
    return LognormalParams(float(r.x[0]), math.exp(float(r.x[1])))


# --------------------------------------------------------------------------
# Wald functional


def _projections(x, eta0, beta):
    g = m_gradient(eta0)
    a1 = float(g[:2] @ estimator_if(x, eta0.pop1, beta).value)
    a2 = float(g[2:] @ estimator_if(x, eta0.pop2, beta).value)
    return a1, a2


def second_order_partial_if(x: float, eta0: EtaVector, w: float, beta: float,
                            which: str) -> float:
    """Second-order partial influence function of ``m^2 / sigma2_m`` at a null point.

    ``which`` selects contamination of population 1 (``"pop1"``), of
    population 2 (``"pop2"``), or the mixed derivative (``"cross"``).  Each
    population's estimator influence function is embedded in its own block
    of the 4-vector and projected on ``grad m``.
    """
    which = Contaminated(which)
    x = _check_x(x)
    check_weight(w)
    if not on_null(eta0):
        raise ValueError("second-order partial influence functions are defined at null points")
    a1, a2 = _projections(x, eta0, beta)
    scale = 2.0 / sigma2_m(eta0, w, beta)
    if which is Contaminated.POP1:
        return scale * a1 * a1
    if which is Contaminated.POP2:
        return scale * a2 * a2
    return scale * a1 * a2


def bias_approximation(x: float, eta0: EtaVector, w: float, beta: float,
                       eps1: float, eps2: float) -> float:
    """Quadratic approximation of the change in ``m^2 / sigma2_m`` under contamination at ``x``."""
    for e in (eps1, eps2):
        if not 0.0 <= e < 0.5:
            raise ValueError("contamination proportions must lie in [0, 0.5)")
    p1 = second_order_partial_if(x, eta0, w, beta, "pop1")
    p2 = second_order_partial_if(x, eta0, w, beta, "pop2")
    pc = second_order_partial_if(x, eta0, w, beta, "cross")
    return 0.5 * eps1 * eps1 * p1 + eps1 * eps2 * pc + 0.5 * eps2 * eps2 * p2
