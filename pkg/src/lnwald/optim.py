"""Small BFGS engine with a backtracking line search.

Written for the smooth low-dimensional problems of this package (two or three
unknowns), where converging to gradient norms around 1e-10 matters more than
per-iteration cost.  The stopping rule is supplied by the caller through
``grad_norm`` so that problems optimized in a transformed parametrization can
report stationarity in their natural coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

_EPS = np.finfo(float).eps


@dataclass
class OptimizerSettings:
    gtol: float = 1e-10
    max_iter: int = 200


@dataclass
class QuasiNewtonResult:
    x: np.ndarray
    fun: float
    grad: np.ndarray
    grad_norm: float
    iterations: int
    converged: bool
    message: str = ""


def _fd_hessian(grad, x, step=1e-5):
    k = x.size
    H = np.empty((k, k))
    for j in range(k):
        h = step * max(1.0, abs(x[j]))
        e = np.zeros(k)
        e[j] = h
        H[:, j] = (grad(x + e) - grad(x - e)) / (2 * h)
    return 0.5 * (H + H.T)


def minimize_bfgs(
    fun: Callable[[np.ndarray], float],
    grad: Callable[[np.ndarray], np.ndarray],
    x0,
    settings: Optional[OptimizerSettings] = None,
    grad_norm: Optional[Callable[[np.ndarray, np.ndarray], float]] = None,
) -> QuasiNewtonResult:
    """Minimize ``fun`` from ``x0`` using its analytic gradient ``grad``.

    Parameters
    ----------
    fun, grad : callable
        Objective and gradient in the optimization coordinates.
    x0 : array_like
        Start point.
    settings : OptimizerSettings, optional
        Gradient tolerance and iteration cap.
    grad_norm : callable, optional
        ``grad_norm(x, g)`` returns the quantity compared with ``gtol``.
        Defaults to the Euclidean norm of ``g``.

    Returns
    -------
    QuasiNewtonResult

    Notes
    -----
    When the Armijo test can no longer be met because objective differences
    have reached round-off, a step is still accepted if the objective did not
    rise beyond round-off and the gradient norm dropped.  If even that fails,
    Newton steps on a finite-difference Hessian of the analytic gradient are
    tried before giving up.
    """
    settings = settings or OptimizerSettings()
    norm = grad_norm or (lambda x, g: float(np.linalg.norm(g)))
    x = np.array(x0, dtype=float)
    f = float(fun(x))
    g = np.asarray(grad(x), dtype=float)
    if not (np.isfinite(f) and np.all(np.isfinite(g))):
        return QuasiNewtonResult(x, f, g, np.inf, 0, False, "non-finite start")
    gn = norm(x, g)
    H = np.eye(x.size)
    first = True
    it = 0
    message = "maximum iterations reached"
    while it < settings.max_iter:
        if gn <= settings.gtol:
            message = "gradient tolerance reached"
            break
        it += 1
        p = -H @ g
        slope = float(g @ p)
        if not slope < 0:
            H = np.eye(x.size)
            p = -g
            slope = float(g @ p)
        step_found = False
        alpha = 1.0
        noise = 16 * _EPS * (1.0 + abs(f))
        for _ in range(60):
            x_new = x + alpha * p
            f_new = float(fun(x_new))
            if np.isfinite(f_new):
                if f_new <= f + 1e-4 * alpha * slope:
                    step_found = True
                    break
                if f_new <= f + noise:
                    g_try = np.asarray(grad(x_new), dtype=float)
                    if np.all(np.isfinite(g_try)) and norm(x_new, g_try) < gn:
                        step_found = True
                        break
                # quadratic interpolation, safeguarded
                denom = 2.0 * (f_new - f - alpha * slope)
                a_q = -slope * alpha * alpha / denom if denom > 0 else 0.5 * alpha
                alpha = min(max(a_q, 0.1 * alpha), 0.5 * alpha)
            else:
                alpha *= 0.1
        if not step_found:
            x_new, f_new = _newton_polish(fun, grad, x, g, norm, gn)
            if x_new is None:
                message = "line search failed"
                break
        g_new = np.asarray(grad(x_new), dtype=float)
        s = x_new - x
        y = g_new - g
        sy = float(s @ y)
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            if first:
                H = np.eye(x.size) * (sy / float(y @ y))
                first = False
            rho = 1.0 / sy
            V = np.eye(x.size) - rho * np.outer(s, y)
            H = V @ H @ V.T + rho * np.outer(s, s)
        x, f, g = x_new, f_new, g_new
        gn = norm(x, g)
    converged = gn <= settings.gtol
    if converged:
        message = "gradient tolerance reached"
    return QuasiNewtonResult(x, f, g, gn, it, converged, message)


def _newton_polish(fun, grad, x, g, norm, gn):
    try:
        H = _fd_hessian(grad, x)
        p = -np.linalg.solve(H, g)
    except np.linalg.LinAlgError:
        return None, None
    for alpha in (1.0, 0.5, 0.25):
        x_new = x + alpha * p
        g_new = np.asarray(grad(x_new), dtype=float)
        if np.all(np.isfinite(g_new)) and norm(x_new, g_new) < gn:
            return x_new, float(fun(x_new))
    return None, None
