"""Asymptotic matrices of the MDPD estimator of ``(mu, sigma)``.

``J`` is the limiting Hessian of the MDPD objective, ``K`` the covariance of
its per-observation gradient, and ``Sigma = J^-1 K J^-1`` the asymptotic
covariance of ``sqrt(n) (theta_hat - theta)``.  At ``beta = 0`` all of them
reduce to (inverse) Fisher information forms.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from numpy.polynomial.hermite_e import hermegauss

from .exceptions import NumericalError
from .model import EtaVector, LognormalParams

_LOG_2PI = math.log(2.0 * math.pi)
DET_FLOOR = 1e-300
MAX_CONDITION = 1e12
GH_NODES = 120


def check_weight(w: float) -> float:
    w = float(w)
    if not 0.0 < w < 1.0:
        raise ValueError(f"weight must lie in (0, 1), got {w}")
    return w


# --------------------------------------------------------------------------
# prefactors


def _log_l_factors(beta, p):
    mu, s = p.mu, p.sigma
    b = float(beta)
    log_s = math.log(s)
    log_l = (-b * mu + b * b * s * s / (2 * (1 + b)) - (1 + b) * log_s
             - 0.5 * b * _LOG_2PI - 2.5 * math.log1p(b))
    log_l1 = (-2 * b * mu + 2 * b * b * s * s / (1 + 2 * b) - (2 * b + 1) * log_s
              - b * _LOG_2PI - 2.5 * math.log1p(2 * b))
    log_l2 = (-2 * b * mu + b * b * s * s / (1 + b) - (2 * b + 2) * log_s
              - b * _LOG_2PI - 3.0 * math.log1p(b))
    return log_l, log_l1, log_l2


def l_factors(beta: float, p: LognormalParams) -> tuple:
    """Scalar prefactors ``(L, L*, L**)`` of ``J`` and of the two terms of ``K``."""
    return tuple(math.exp(v) for v in _log_l_factors(beta, p))


def _j_core(b, s):
    s2 = s * s
    off = b * (-b * b * s2 / (1 + b) + b - 2)
    return np.array([
        [(1 + b + b * b * s2) / s, off],
        [off, (b ** 4 * s2 * s2 / (1 + b) ** 2 + 6 * b * b * s2 / (1 + b) + b * b * (1 - 2 * s2) + 2) / s],
    ])


def _k_cores(b, s):
    s2 = s * s
    off = b * (-8 * s2 * b * b / (1 + 2 * b) + 4 * b - 4)
    first = np.array([
        [(1 + 2 * b + 4 * b * b * s2) / s, off],
        [off, (16 * b ** 4 * s2 * s2 / (1 + 2 * b) ** 2 + 24 * s2 * b * b / (1 + 2 * b)
               + 4 * b * b * (1 - 2 * s2) + 2) / s],
    ])
    c = -1 - b + b * s2
    cross = -s * b * b * c / (1 + b)
    second = np.array([
        [s2 * b * b, cross],
        [cross, b * b * c * c / (1 + b) ** 2],
    ])
    return first, second


def j_matrix(p: LognormalParams, beta: float) -> np.ndarray:
    L = l_factors(beta, p)[0]
    return L * _j_core(float(beta), p.sigma)


def k_matrix(p: LognormalParams, beta: float) -> np.ndarray:
    _, L1, L2 = l_factors(beta, p)
    first, second = _k_cores(float(beta), p.sigma)
    return L1 * first - L2 * second


def inverse_2x2(m: np.ndarray) -> np.ndarray:
    """Adjugate inverse of a 2x2 matrix with determinant and condition guards."""
    a, b, c, d = m[0, 0], m[0, 1], m[1, 0], m[1, 1]
    det = a * d - b * c
    if not abs(det) > DET_FLOOR:
        raise NumericalError(f"determinant {det:.3g} below floor")
    inv = np.array([[d, -b], [-c, a]]) / det
    cond = np.linalg.norm(m, 1) * np.linalg.norm(inv, 1)
    if not cond < MAX_CONDITION:
        raise NumericalError(f"matrix condition number {cond:.3g} too large")
    return inv


def sigma_matrix(p: LognormalParams, beta: float) -> np.ndarray:
    """Sandwich covariance ``J^-1 K J^-1``.

    Computed as ``Jc^-1 (L*/L^2 K1 - L**/L^2 K2) Jc^-1`` with ``Jc = J / L``,
    so the ``exp(-beta mu)`` factors cancel exactly instead of under- or
    overflowing for large ``|mu|``.
    """
    b = float(beta)
    log_l, log_l1, log_l2 = _log_l_factors(b, p)
    first, second = _k_cores(b, p.sigma)
    inner = math.exp(log_l1 - 2 * log_l) * first - math.exp(log_l2 - 2 * log_l) * second
    jc_inv = inverse_2x2(_j_core(b, p.sigma))
    out = jc_inv @ inner @ jc_inv
    return 0.5 * (out + out.T)


def joint_covariance(eta: EtaVector, w: float, beta: float) -> np.ndarray:
    """Block-diagonal ``diag((1 - w) Sigma(pop1), w Sigma(pop2))``."""
    w = check_weight(w)
    out = np.zeros((4, 4))
    out[:2, :2] = (1.0 - w) * sigma_matrix(eta.pop1, beta)
    out[2:, 2:] = w * sigma_matrix(eta.pop2, beta)
    return out


# --------------------------------------------------------------------------
# shared integrator


@lru_cache(maxsize=8)
def _gh_rule(n):
    t, wts = hermegauss(n)
    return t, wts / math.sqrt(2.0 * math.pi)


def normal_expectation(fn, mu: float, sigma: float, nodes: int = GH_NODES):
    """``E[fn(Y)]`` for ``Y ~ N(mu, sigma^2)`` by Gauss-Hermite quadrature.

    Integration runs on the standardized scale ``t = (y - mu) / sigma``.
    ``fn`` must accept a vector of ``y`` values and may return an array of
    shape ``(nodes, ...)``; the expectation is taken along the first axis.
    """
    t, wts = _gh_rule(nodes)
    vals = np.asarray(fn(mu + sigma * t))
    return np.tensordot(wts, vals, axes=(0, 0))
