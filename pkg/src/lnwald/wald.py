"""Wald-type test for equality of two log-normal means built on MDPD estimates.

With ``eta = (mu1, sigma1, mu2, sigma2)`` the null hypothesis is
``m(eta) = exp(mu1 + sigma1^2/2) - exp(mu2 + sigma2^2/2) = 0`` and the statistic is

    W = n1 n2 / (n1 + n2) * m(eta_hat)^2 / sigma2_m(eta_hat),

where ``sigma2_m`` is the delta-method variance of ``m`` under the joint
block-diagonal covariance of both MDPD estimators.  ``W`` is asymptotically
chi-square with one degree of freedom under the null.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy.special import erfc, gammaincc, gammaln, ndtr, ndtri

from .asymptotics import check_weight, joint_covariance
from .mdpd import check_beta, fit_mdpd
from .model import EtaVector, SampleLike, as_sample
from .optim import OptimizerSettings

DEFAULT_ALPHA = 0.05
NULL_TOL = 1e-10
SERIES_TAIL = 1e-12


@dataclass
class TestResult:
    """Outcome of a two-sample test.

    ``statistic`` is on the chi-square(1) scale for every method (the squared
    Z for the Z test); ``reference`` names the distribution it is judged by.
    """

    __test__ = False  # not a pytest class

    statistic: float
    p_value: float
    method: str
    n1: int
    n2: int
    beta: Optional[float] = None
    eta_hat: Optional[EtaVector] = None
    m_hat: Optional[float] = None
    sigma2_m_hat: Optional[float] = None
    reference: str = "chi2(1)"
    diagnostics: dict = field(default_factory=dict)

    def reject(self, alpha: float = DEFAULT_ALPHA) -> bool:
        if self.reference == "bootstrap":
            return self.p_value < alpha
        return self.statistic > chi2_critical(alpha)

    def to_dict(self, alpha: Optional[float] = None) -> dict:
        out = {
            "method": self.method,
            "beta": self.beta,
            "statistic": self.statistic,
            "p_value": self.p_value,
            "n1": self.n1,
            "n2": self.n2,
            "eta_hat": None if self.eta_hat is None else {
                "mu1": self.eta_hat.mu1, "sigma1": self.eta_hat.sigma1,
                "mu2": self.eta_hat.mu2, "sigma2": self.eta_hat.sigma2,
            },
            "m_hat": self.m_hat,
            "sigma2_m_hat": self.sigma2_m_hat,
            "reference": self.reference,
            "diagnostics": dict(self.diagnostics),
        }
        if alpha is not None:
            out["alpha"] = alpha
            out["reject"] = self.reject(alpha)
        return out


@dataclass(frozen=True)
class PowerQuery:
    eta_star: EtaVector
    n1: int
    n2: int
    beta: float
    alpha: float = DEFAULT_ALPHA

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")


@dataclass(frozen=True)
class ContiguousSpec:
    """Local alternative around a null point ``eta0``.

    ``direction`` is either a 4-vector ``d`` (alternatives
    ``eta0 + d / sqrt(n1 n2 / (n1 + n2))``) or a scalar ``delta`` for
    ``m(eta_n) = delta / sqrt(n1 n2 / (n1 + n2))``.
    """

    eta0: EtaVector
    direction: Union[float, tuple]
    w: float

    def __post_init__(self):
        check_weight(self.w)
        if not on_null(self.eta0):
            raise ValueError(f"eta0 is not on the null: m(eta0) = {m_eta(self.eta0):.3g}")

    def delta(self) -> float:
        d = np.asarray(self.direction, dtype=float)
        if d.ndim == 0:
            return float(d)
        if d.shape != (4,):
            raise ValueError("direction must be a scalar or a 4-vector")
        return float(m_gradient(self.eta0) @ d)


# --------------------------------------------------------------------------
# mean difference and its gradient


def _log_means(eta):
    return eta.mu1 + 0.5 * eta.sigma1 ** 2, eta.mu2 + 0.5 * eta.sigma2 ** 2


def _scaled_m(eta):
    """``(m / exp(M), grad m / exp(M), M)`` with ``M`` the larger log mean."""
    a1, a2 = _log_means(eta)
    top = max(a1, a2)
    e1, e2 = math.exp(a1 - top), math.exp(a2 - top)
    if a1 >= a2:
        diff = -math.expm1(a2 - a1)
    else:
        diff = math.expm1(a1 - a2)
    grad = np.array([e1, eta.sigma1 * e1, -e2, -eta.sigma2 * e2])
    return diff, grad, top


def _exp(x):
    # reported magnitudes saturate instead of raising; the statistic never needs them
    return math.inf if x > 709.0 else math.exp(x)


def m_eta(eta: EtaVector) -> float:
    """Difference of the two population means."""
    diff, _, top = _scaled_m(eta)
    if diff == 0.0:
        return 0.0
    return math.copysign(_exp(math.log(abs(diff)) + top), diff)


def m_gradient(eta: EtaVector) -> np.ndarray:
    a1, a2 = _log_means(eta)
    e1, e2 = _exp(a1), _exp(a2)
    return np.array([e1, eta.sigma1 * e1, -e2, -eta.sigma2 * e2])


def on_null(eta: EtaVector, tol: float = NULL_TOL) -> bool:
    """``|m(eta)| <= tol`` relative to the larger mean (and absolutely when means are below 1)."""
    diff, _, top = _scaled_m(eta)
    return abs(diff) <= tol * max(1.0, math.exp(-top))


def sigma2_m(eta: EtaVector, w: float, beta: float) -> float:
    """Delta-method variance ``grad m' Sigma_w grad m``."""
    g = m_gradient(eta)
    return float(g @ joint_covariance(eta, w, beta) @ g)


def wald_functional(eta: EtaVector, w: float, beta: float) -> float:
    """``m^2 / sigma2_m``: the statistic without its sample-size factor."""
    diff, g, _ = _scaled_m(eta)
    return diff * diff / float(g @ joint_covariance(eta, w, beta) @ g)


# --------------------------------------------------------------------------
# reference distributions


def chi2_survival(x: float) -> float:
    """``P(chi2_1 > x)`` as ``erfc(sqrt(x / 2))``."""
    x = float(x)
    if x < 0 or math.isnan(x):
        raise ValueError(f"chi-square argument must be non-negative, got {x}")
    return float(erfc(math.sqrt(0.5 * x)))


def chi2_critical(alpha: float) -> float:
    """Upper ``alpha`` point of chi-square(1), the square of the normal ``1 - alpha/2`` quantile."""
    z = float(ndtri(1.0 - 0.5 * alpha))
    return z * z


def ncx2_survival(x: float, ncp: float, df: float = 1.0) -> float:
    """Noncentral chi-square survival function by the Poisson-mixture series.

    ``P(X > x) = sum_j Pois(j; ncp/2) P(chi2_{df + 2j} > x)``, summed from
    ``j = 0`` until the remaining Poisson weight falls below 1e-12.
    """
    if x < 0:
        raise ValueError("x must be non-negative")
    if ncp < 0:
        raise ValueError("noncentrality must be non-negative")
    half = 0.5 * ncp
    if half == 0.0:
        return float(gammaincc(0.5 * df, 0.5 * x))
    total = 0.0
    mass = 0.0
    j = 0
    log_half = math.log(half)
    while True:
        wj = math.exp(-half + j * log_half - gammaln(j + 1.0))
        total += wj * float(gammaincc(0.5 * df + j, 0.5 * x))
        mass += wj
        j += 1
        if j > half and 1.0 - mass < SERIES_TAIL:
            break
        if j > 100000:
            break
    return min(1.0, max(0.0, total))


# --------------------------------------------------------------------------
# the test


def _weight(n1, n2):
    return n1 / (n1 + n2)


def wald_test(s1: SampleLike, s2: SampleLike, beta: float,
              opts: Optional[OptimizerSettings] = None) -> TestResult:
    """Wald-type test of equal means with MDPD(``beta``) plug-in estimates."""
    beta = check_beta(beta)
    s1, s2 = as_sample(s1), as_sample(s2)
    f1, f2 = fit_mdpd(s1, beta, opts), fit_mdpd(s2, beta, opts)
    eta = EtaVector.from_params(f1.params, f2.params)
    n1, n2 = len(s1), len(s2)
    w = _weight(n1, n2)
    diff, g, top = _scaled_m(eta)
    q = float(g @ joint_covariance(eta, w, beta) @ g)
    root = math.sqrt(n1 * n2 / (n1 + n2)) * diff / math.sqrt(q)
    stat = root * root
    return TestResult(
        statistic=stat,
        p_value=chi2_survival(stat),
        method="dpd",
        n1=n1,
        n2=n2,
        beta=beta,
        eta_hat=eta,
        m_hat=m_eta(eta),
        sigma2_m_hat=q * _exp(2 * top),
        diagnostics={"w_hat": w, "fit1": f1.to_dict(), "fit2": f2.to_dict()},
    )


# --------------------------------------------------------------------------
# power


def v_function(eta1: EtaVector, eta2: EtaVector, w: float, beta: float) -> float:
    """``m(eta1)^2 / sigma2_m(eta2)``."""
    return m_eta(eta1) ** 2 / sigma2_m(eta2, w, beta)


def v_gradient(eta: EtaVector, w: float, beta: float) -> np.ndarray:
    """Gradient of ``V(eta1, eta)`` in ``eta1`` at ``eta1 = eta``."""
    return 2.0 * m_eta(eta) * m_gradient(eta) / sigma2_m(eta, w, beta)


def phi2(eta: EtaVector, w: float, beta: float) -> float:
    """Asymptotic variance of ``V(eta_hat, eta_hat)`` as the quadratic form in ``grad V``."""
    g = v_gradient(eta, w, beta)
    return float(g @ joint_covariance(eta, w, beta) @ g)


def phi2_simplified(eta: EtaVector, w: float, beta: float) -> float:
    """Closed form ``4 V(eta, eta)`` of :func:`phi2`."""
    return 4.0 * v_function(eta, eta, w, beta)


def approximate_power(q: PowerQuery) -> float:
    """Normal approximation to the power at a fixed alternative ``eta_star``."""
    beta = check_beta(q.beta)
    if m_eta(q.eta_star) == 0.0 or on_null(q.eta_star):
        raise ValueError("eta_star lies on the null; the power approximation degenerates")
    k = q.n1 * q.n2 / (q.n1 + q.n2)
    w = _weight(q.n1, q.n2)
    v = v_function(q.eta_star, q.eta_star, w, beta)
    phi = math.sqrt(phi2(q.eta_star, w, beta))
    arg = math.sqrt(k) * (chi2_critical(q.alpha) / k - v) / phi
    return float(1.0 - ndtr(arg))


def contiguous_power(spec: ContiguousSpec, beta: float, alpha: float = DEFAULT_ALPHA) -> float:
    """Limiting power ``P(chi2_1(ncp) > chi2_{1,alpha})`` with ``ncp = delta^2 / sigma2_m(eta0)``."""
    beta = check_beta(beta)
    delta = spec.delta()
    ncp = delta * delta / sigma2_m(spec.eta0, spec.w, beta)
    return ncx2_survival(chi2_critical(alpha), ncp)
