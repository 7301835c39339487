"""Damped least-squares (Levenberg-Marquardt) engine shared by all fitters.

The solver minimises ``0.5 * ||r(p)||**2`` with a Marquardt-scaled damping
term, updated by the gain-ratio rule. Jacobians come from central differences
unless the caller supplies one. Bounds are enforced by projecting each trial
point back into the box.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


class FitError(RuntimeError):
    """Raised when a fit cannot be set up or evaluated."""


@dataclass
class FitProblem:
    residual: Callable[[np.ndarray], np.ndarray]
    p0: np.ndarray
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None
    max_iter: int = 200
    xtol: float = 1e-12
    gtol: float = 1e-12
    ftol: float = 1e-15
    jac: Optional[Callable[[np.ndarray], np.ndarray]] = None
    # cube root of machine epsilon balances truncation and rounding error
    diff_step: float = 6e-6

    def __post_init__(self):
        self.p0 = np.atleast_1d(np.asarray(self.p0, dtype=float)).copy()
        n = self.p0.size
        self.lower = (np.full(n, -np.inf) if self.lower is None
                      else np.broadcast_to(np.asarray(self.lower, float), (n,)).copy())
        self.upper = (np.full(n, np.inf) if self.upper is None
                      else np.broadcast_to(np.asarray(self.upper, float), (n,)).copy())
        if np.any(self.lower > self.upper):
            raise FitError("lower bound exceeds upper bound")
        if np.any(self.p0 < self.lower) or np.any(self.p0 > self.upper):
            raise FitError("initial parameters outside bounds")


@dataclass
class FitResult:
    params: np.ndarray
    covariance: np.ndarray
    uncertainties: np.ndarray
    cost: float
    iterations: int
    converged: bool
    residual: np.ndarray = field(repr=False)
    jacobian: np.ndarray = field(repr=False)
    message: str = ""

    @property
    def dof(self) -> int:
        return max(self.residual.size - self.params.size, 0)

    @property
    def rms(self) -> float:
        return float(np.sqrt(np.mean(self.residual ** 2))) if self.residual.size else 0.0


def numeric_jacobian(fun, p, r0=None, rel_step=6e-6, lower=None, upper=None):
    """Central-difference Jacobian with step ``max(rel_step, rel_step*|p|)``.

    Near a bound the stencil falls back to a one-sided difference so that the
    residual is never evaluated outside the box.
    """
    p = np.asarray(p, dtype=float)
    if r0 is None:
        r0 = np.asarray(fun(p), dtype=float)
    jac = np.empty((r0.size, p.size))
    steps = np.maximum(rel_step, rel_step * np.abs(p))
    for j, h in enumerate(steps):
        fwd_ok = upper is None or p[j] + h <= upper[j]
        bwd_ok = lower is None or p[j] - h >= lower[j]
        pp = p.copy()
        pm = p.copy()
        if fwd_ok and bwd_ok:
            pp[j] += h
            pm[j] -= h
            jac[:, j] = (np.asarray(fun(pp)) - np.asarray(fun(pm))) / (2 * h)
        elif fwd_ok:
            pp[j] += h
            jac[:, j] = (np.asarray(fun(pp)) - r0) / h
        else:
            pm[j] -= h
            jac[:, j] = (r0 - np.asarray(fun(pm))) / h
    return jac


def covariance_from_jacobian(jac, residual, scale_by_chi2=True):
    """Linearised parameter covariance ``s^2 (J^T J)^-1`` via SVD."""
    m, n = jac.shape
    _, sv, vt = np.linalg.svd(jac, full_matrices=False)
    tiny = np.finfo(float).eps * max(m, n) * (sv[0] if sv.size else 0.0)
    inv = np.where(sv > tiny, 1.0 / np.where(sv > tiny, sv, 1.0) ** 2, 0.0)
    cov = (vt.T * inv) @ vt
    if scale_by_chi2 and m > n:
        cov *= float(residual @ residual) / (m - n)
    return 0.5 * (cov + cov.T)


def _evaluate(fun, p):
    r = np.asarray(fun(p), dtype=float).ravel()
    return r


def solve(problem: FitProblem, scale_by_chi2: bool = True) -> FitResult:
    """Run Levenberg-Marquardt on ``problem``.

    Returns a result with ``converged=False`` if the iteration budget runs
    out. Raises :class:`FitError` if the residual is not finite at the
    starting point.
    """
    lo, hi = problem.lower, problem.upper
    p = problem.p0.copy()
    r = _evaluate(problem.residual, p)
    if not np.all(np.isfinite(r)):
        raise FitError("residual is not finite at the initial parameters")

    def jacobian(x, rx):
        if problem.jac is not None:
            return np.asarray(problem.jac(x), dtype=float)
        return numeric_jacobian(problem.residual, x, rx, problem.diff_step, lo, hi)

    cost = 0.5 * float(r @ r)
    J = jacobian(p, r)
    A = J.T @ J
    g = J.T @ r
    diag = np.maximum(np.diag(A), np.finfo(float).tiny)
    # small initial damping: near-Gauss-Newton steps unless the gain ratio objects
    mu = 1e-10
    nu = 2.0
    converged = cost == 0.0 or np.max(np.abs(g), initial=0.0) <= problem.gtol
    message = "zero residual" if cost == 0.0 else ("gradient tolerance" if converged else "")
    it = 0
    while not converged and it < problem.max_iter:
        it += 1
        try:
            h = np.linalg.solve(A + mu * np.diag(diag), -g)
        except np.linalg.LinAlgError:
            h = np.linalg.lstsq(A + mu * np.diag(diag), -g, rcond=None)[0]
        p_new = np.clip(p + h, lo, hi)
        h = p_new - p
        if np.linalg.norm(h) <= problem.xtol * (np.linalg.norm(p) + problem.xtol):
            converged = True
            message = "step tolerance"
            break
        r_new = _evaluate(problem.residual, p_new)
        cost_new = 0.5 * float(r_new @ r_new) if np.all(np.isfinite(r_new)) else np.inf
        predicted = -(g @ h + 0.5 * h @ A @ h)
        rho = (cost - cost_new) / predicted if predicted > 0 else -1.0
        # at the rounding floor neither the actual nor the predicted gain is resolvable
        if abs(cost - cost_new) <= problem.ftol * cost and 0 <= predicted <= problem.ftol * cost:
            if np.all(np.isfinite(r_new)):
                p, r, cost = p_new, r_new, cost_new
                J = jacobian(p, r)
            converged, message = True, "cost tolerance"
            break
        if rho > 0 and cost_new <= cost:
            small_change = (cost - cost_new) <= problem.ftol * cost
            p, r, cost = p_new, r_new, cost_new
            J = jacobian(p, r)
            A = J.T @ J
            g = J.T @ r
            diag = np.maximum(diag, np.diag(A))
            mu *= max(1.0 / 3.0, 1.0 - (2.0 * rho - 1.0) ** 3)
            nu = 2.0
            if cost == 0.0:
                converged, message = True, "zero residual"
            elif np.max(np.abs(g)) <= problem.gtol:
                converged, message = True, "gradient tolerance"
            elif small_change:
                converged, message = True, "cost tolerance"
        else:
            mu *= nu
            nu *= 2.0
            if mu > 1e30:
                converged, message = True, "damping saturated"
    if not converged:
        message = "maximum iterations reached"

    cov = covariance_from_jacobian(J, r, scale_by_chi2)
    return FitResult(params=p, covariance=cov, uncertainties=np.sqrt(np.clip(np.diag(cov), 0, None)),
                     cost=cost, iterations=it, converged=converged, residual=r,
                     jacobian=J, message=message)


def curve_fit(model, x, y, p0, sigma=None, **kwargs) -> FitResult:
    """Convenience wrapper: fit ``model(x, *p)`` to ``y``."""
    x = np.asarray(x)
    y = np.asarray(y, dtype=float)
    w = 1.0 if sigma is None else 1.0 / np.asarray(sigma, dtype=float)

    def residual(p):
        return (np.asarray(model(x, *p), dtype=float) - y) * w

    return solve(FitProblem(residual=residual, p0=p0, **kwargs))
