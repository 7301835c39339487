"""CPW design electricals and kinetic-inductance thermometry.

Conformal mapping for a zero-thickness coplanar waveguide, lumped quarter-wave
equivalents, and the two-fluid temperature shift of a kinetically loaded
resonator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from . import fitcore
from ._validation import DomainError, check_xy, check_1d
from .units import C_LIGHT, gap_from_tc


@dataclass(frozen=True)
class CpwGeometry:
    """Physical CPW layout, SI units.

    ``substrate_thickness=None`` means a semi-infinite substrate. With a finite
    value the dielectric filling factor uses the finite-substrate mapping.
    """

    center_width: float
    gap: float
    length: float
    substrate_eps_r: float
    substrate_thickness: Optional[float] = None

    def __post_init__(self):
        for name in ("center_width", "gap", "length"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be > 0, got {getattr(self, name)!r}")
        if not self.substrate_eps_r >= 1:
            raise DomainError("substrate_eps_r must be >= 1")
        if self.substrate_thickness is not None and not self.substrate_thickness > 0:
            raise DomainError("substrate_thickness must be > 0 when given")

    @property
    def n_squares(self) -> float:
        """Number of squares along the center conductor."""
        return self.length / self.center_width


@dataclass(frozen=True)
class CpwElectrical:
    z0: float
    eps_eff: float
    c0: float
    l0: float
    f0: float

    @property
    def omega0(self) -> float:
        return 2 * math.pi * self.f0


@dataclass(frozen=True)
class KineticFilm:
    alpha_k: float
    lk_total: float
    lk_per_square: float
    tc: float = float("nan")

    @property
    def gap0(self) -> float:
        """Gap energy in eV."""
        return float(gap_from_tc(self.tc))


def ellipk_agm(k, rtol=1e-12):
    """Complete elliptic integral of the first kind K(k), modulus ``k``.

    Uses the arithmetic-geometric mean, K(k) = pi / (2 AGM(1, sqrt(1-k^2))).
    """
    k = float(k)
    if not 0.0 <= k < 1.0:
        raise DomainError(f"elliptic modulus must be in [0, 1), got {k}")
    a, b = 1.0, math.sqrt(1.0 - k * k)
    while abs(a - b) > rtol * a:
        a, b = 0.5 * (a + b), math.sqrt(a * b)
    return math.pi / (2.0 * 0.5 * (a + b))


def _k_ratio(k):
    """K(k) / K(k')."""
    return ellipk_agm(k) / ellipk_agm(math.sqrt(1.0 - k * k))


def cpw_impedance(geom: CpwGeometry):
    """Return (Z0, eps_eff) from the quasi-static conformal mapping."""
    k0 = geom.center_width / (geom.center_width + 2 * geom.gap)
    if geom.substrate_thickness is None:
        eps_eff = 0.5 * (geom.substrate_eps_r + 1.0)
    else:
        h = geom.substrate_thickness
        k1 = (math.sinh(math.pi * geom.center_width / (4 * h))
              / math.sinh(math.pi * (geom.center_width + 2 * geom.gap) / (4 * h)))
        q = 0.5 * _k_ratio(k1) / _k_ratio(k0)
        eps_eff = 1.0 + q * (geom.substrate_eps_r - 1.0)
    z0 = 30.0 * math.pi / math.sqrt(eps_eff) / _k_ratio(k0)
    return z0, eps_eff


def lumped_quarter_wave(z0, f0):
    """Parallel-LC equivalent (C0, L0) of a shorted quarter-wave line."""
    if not (z0 > 0 and f0 > 0):
        raise DomainError("z0 and f0 must be > 0")
    w0 = 2 * math.pi * f0
    c0 = math.pi / (4 * z0 * w0)
    l0 = 1.0 / (w0 * w0 * c0)
    return c0, l0


def cpw_electricals(geom: CpwGeometry, f0: float) -> CpwElectrical:
    if not f0 > 0:
        raise DomainError("f0 must be > 0")
    z0, eps_eff = cpw_impedance(geom)
    c0, l0 = lumped_quarter_wave(z0, f0)
    return CpwElectrical(z0=z0, eps_eff=eps_eff, c0=c0, l0=l0, f0=f0)


def quarter_wave_f0(geom: CpwGeometry, eps_eff: Optional[float] = None) -> float:
    if eps_eff is None:
        eps_eff = cpw_impedance(geom)[1]
    return C_LIGHT / (4.0 * geom.length * math.sqrt(eps_eff))


def kinetic_fraction(f_meas, f_design):
    """Kinetic inductance fraction 1 - (f_meas/f_design)^2."""
    if not (0 < f_meas <= f_design):
        raise DomainError(
            f"need 0 < f_meas <= f_design, got f_meas={f_meas}, f_design={f_design}")
    return 1.0 - (f_meas / f_design) ** 2


def frequency_from_fraction(alpha_k, f_design):
    return f_design * math.sqrt(1.0 - alpha_k)


def lk_decompose(alpha_k, cpw: CpwElectrical, geom: CpwGeometry) -> KineticFilm:
    """Split the kinetic fraction into total and per-square inductance.

    Only the center conductor is counted when converting to squares.
    """
    if not 0 <= alpha_k < 1:
        raise DomainError(f"alpha_k must be in [0, 1), got {alpha_k}")
    lk_total = alpha_k * cpw.l0 / (1.0 - alpha_k)
    return KineticFilm(alpha_k=alpha_k, lk_total=lk_total,
                       lk_per_square=lk_total / geom.n_squares)


def two_fluid_shift(T, tc, alpha_k):
    """Fractional frequency shift of a kinetically loaded resonator.

    ``-alpha_k / (2 (1 - (T/tc)^4)) + alpha_k / 2``; zero at T = 0 and
    diverging at T = tc.
    """
    T = np.asarray(T, dtype=float)
    if not tc > 0:
        raise DomainError("tc must be > 0")
    if np.any(T < 0) or np.any(T >= tc):
        raise DomainError("temperatures must satisfy 0 <= T < tc")
    x4 = (T / tc) ** 4
    # alpha/2 * (1 - 1/(1-x4)) written without cancellation
    out = -0.5 * alpha_k * x4 / (1.0 - x4)
    return out if out.ndim else float(out)


def relative_shift(temperatures, frequencies):
    """Delta f / f(0) using the coldest point as the zero-temperature reference."""
    t, f = check_xy(temperatures, frequencies, min_points=2)
    f_ref = f[np.argmin(t)]
    return (f - f_ref) / f_ref


@dataclass(frozen=True)
class TcFit:
    tc: float
    tc_sigma: float
    alpha_k: float
    converged: bool
    t_ref: float = 0.0

    @property
    def gap0(self) -> float:
        return float(gap_from_tc(self.tc))

    @property
    def gap0_sigma(self) -> float:
        return float(gap_from_tc(self.tc_sigma))

    def to_record(self):
        return {"tc_k": self.tc, "tc_sigma_k": self.tc_sigma,
                "gap_uev": self.gap0 * 1e6}


def referenced_shift(T, tc, alpha_k, t_ref=0.0):
    """Two-fluid shift measured against the frequency at ``t_ref`` instead of T = 0."""
    s = two_fluid_shift(T, tc, alpha_k)
    s_ref = two_fluid_shift(t_ref, tc, alpha_k)
    return (s - s_ref) / (1.0 + s_ref)


def fit_tc(temperatures, shifts, alpha_k, tc0=None, t_ref=None) -> TcFit:
    """Least-squares T_C with alpha_k held fixed.

    Shifts are taken relative to the frequency at ``t_ref``, by default the
    coldest temperature, matching :func:`relative_shift`.
    """
    t, y = check_xy(temperatures, shifts, min_points=3)
    t_ref = float(t.min()) if t_ref is None else float(t_ref)
    if np.unique(t).size < 2 or np.ptp(t) == 0:
        raise fitcore.FitError("temperatures are degenerate; cannot fit T_C")
    t_max = float(t.max())
    if tc0 is None:
        tc0 = _tc_guess(t, y, alpha_k)
    lower = t_max * (1 + 1e-9)

    def residual(p):
        x4 = (t / p[0]) ** 4
        x4_ref = (t_ref / p[0]) ** 4
        s = -0.5 * alpha_k * x4 / (1.0 - x4)
        s_ref = -0.5 * alpha_k * x4_ref / (1.0 - x4_ref)
        return (s - s_ref) / (1.0 + s_ref) - y

    res = fitcore.solve(fitcore.FitProblem(
        residual=residual, p0=[max(tc0, lower * 1.001)], lower=[lower]))
    return TcFit(tc=float(res.params[0]), tc_sigma=float(res.uncertainties[0]),
                 alpha_k=alpha_k, converged=res.converged, t_ref=t_ref)


def _tc_guess(t, y, alpha_k):
    # Invert the model pointwise on the hottest point with a usable shift.
    order = np.argsort(t)[::-1]
    for i in order:
        if y[i] < 0 and t[i] > 0:
            r = -2.0 * y[i] / alpha_k
            x4 = r / (1.0 + r)
            return float(t[i] / x4 ** 0.25)
    return float(t.max()) * 1.5


class TwoFluidTcEstimator(RegressorMixin, BaseEstimator):
    """Fit T_C of the two-fluid shift model with a fixed kinetic fraction.

    ``X`` holds temperatures in K (one column), ``y`` the fractional shifts.
    """

    def __init__(self, alpha_k=0.0867, tc0=None):
        self.alpha_k = alpha_k
        self.tc0 = tc0

    def fit(self, X, y):
        t = check_1d(X, "X")
        result = fit_tc(t, y, self.alpha_k, self.tc0)
        self.tc_ = result.tc
        self.tc_sigma_ = result.tc_sigma
        self.gap_ev_ = result.gap0
        self.result_ = result
        return self

    def predict(self, X):
        check_is_fitted(self, "tc_")
        return referenced_shift(check_1d(X, "X"), self.tc_, self.alpha_k, self.result_.t_ref)
