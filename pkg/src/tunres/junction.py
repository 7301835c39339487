"""Josephson inductance <-> critical current <-> resonant frequency.

A quarter-wave CPW is modelled as a dispersionless TEM line whose per-length
inductance includes the film's kinetic inductance. The junction is a lumped
series inductor inserted a fraction ``junction_position`` of the way from the
grounded end (0 = directly shorting the line to ground).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import DomainError, SolverError, check_1d
from .em_model import CpwElectrical
from .units import PHI0_RED

MAX_POSITION = 0.95
F_BRACKET_LOW = 1e6


@dataclass(frozen=True)
class JunctionState:
    lj: float
    ic: float


def lj_from_ic(ic) -> JunctionState:
    if not ic > 0:
        raise DomainError(f"critical current must be > 0, got {ic}")
    return JunctionState(lj=PHI0_RED / ic, ic=float(ic))


def ic_from_lj(lj) -> JunctionState:
    if not lj > 0:
        raise DomainError(f"Josephson inductance must be > 0, got {lj}")
    return JunctionState(lj=float(lj), ic=PHI0_RED / lj)


@dataclass(frozen=True)
class TunableResonator:
    cpw: CpwElectrical
    lk_total: float = 0.0
    lj: float = 0.0
    junction_position: float = 0.0

    def __post_init__(self):
        if self.lk_total < 0 or self.lj < 0:
            raise DomainError("inductances must be >= 0")
        if not 0 <= self.junction_position < MAX_POSITION:
            raise DomainError(
                f"junction_position must be in [0, {MAX_POSITION}), got {self.junction_position}")

    @property
    def l_line(self) -> float:
        """Lumped inductance of the bare mode, geometric plus kinetic."""
        return self.cpw.l0 + self.lk_total

    @property
    def loading(self) -> float:
        """sqrt(L0 / (L0 + LK)); phase velocity reduction from kinetic inductance."""
        return math.sqrt(self.cpw.l0 / self.l_line)

    @property
    def f_loaded(self) -> float:
        """Quarter-wave frequency of the kinetically loaded line (L_J = 0)."""
        return self.cpw.f0 * self.loading

    @property
    def z_loaded(self) -> float:
        """Characteristic impedance including kinetic inductance per length."""
        return self.cpw.z0 / self.loading

    def with_lj(self, lj) -> "TunableResonator":
        return replace(self, lj=float(lj))


def _resonance_function(res: TunableResonator, omega):
    """Pole-free form of Z = (w L_J + Z tan(b d)) tan(b (l-d)); root is the mode."""
    bl = 0.5 * math.pi * omega / (2 * math.pi * res.f_loaded)
    bd = bl * res.junction_position
    bo = bl - bd
    z = res.z_loaded
    return ((omega * res.lj * math.cos(bd) + z * math.sin(bd)) * math.sin(bo)
            - z * math.cos(bd) * math.cos(bo))


def _bisect(fun, lo, hi, max_iter=200):
    f_lo = fun(lo)
    f_hi = fun(hi)
    if not (f_lo < 0 < f_hi):
        raise SolverError(
            f"no sign change in bracket [{lo / 2 / math.pi:.6g}, {hi / 2 / math.pi:.6g}] Hz")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if fun(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def positioned_frequency(res: TunableResonator) -> float:
    """Fundamental resonant frequency for a junction anywhere on the line."""
    f0 = res.f_loaded
    if res.lj == 0:
        return f0
    fun = lambda om: _resonance_function(res, om)  # noqa: E731
    w_hi = 2 * math.pi * f0
    # tiny L_J: w L_J is below the rounding residue of cos(pi/2), root is f0
    if not fun(w_hi) > 0:
        return f0
    w = _bisect(fun, 2 * math.pi * F_BRACKET_LOW, w_hi)
    return w / (2 * math.pi)


def tunable_frequency(res: TunableResonator) -> float:
    """Resonant frequency with the junction shorting the line to ground."""
    if res.junction_position != 0:
        raise DomainError("tunable_frequency requires junction_position = 0; "
                          "use positioned_frequency")
    return positioned_frequency(res)


def lj_from_frequency(res: TunableResonator, f_target) -> float:
    """Junction inductance that puts the mode at ``f_target``.

    The resonance condition is linear in L_J, so the inverse is closed form.
    """
    f_max = res.f_loaded
    if not 0 < f_target <= f_max:
        raise DomainError(f"f_target must be in (0, {f_max:.6g}] Hz, got {f_target}")
    if f_target == f_max:
        return 0.0
    omega = 2 * math.pi * f_target
    bl = 0.5 * math.pi * f_target / f_max
    bd = bl * res.junction_position
    lj = res.z_loaded * (1.0 / math.tan(bl - bd) - math.tan(bd)) / omega
    return max(lj, 0.0)


def participation(lj, l0, lk):
    """Inductive participation ratio of the junction."""
    lj, l0, lk = (np.asarray(v, dtype=float) for v in (lj, l0, lk))
    if np.any(lj < 0) or np.any(l0 < 0) or np.any(lk < 0):
        raise DomainError("inductances must be >= 0")
    total = lj + l0 + lk
    if np.any(total <= 0):
        raise DomainError("total inductance must be > 0")
    out = lj / total
    return out if out.ndim else float(out)


def lumped_frequency(res: TunableResonator) -> float:
    """Lumped LC estimate of the mode.

    The line contributes its full capacitance 2 C0 and half of its inductance,
    which is exact at L_J = 0 and in the L_J -> infinity limit.
    """
    c_eff = 2.0 * res.cpw.c0
    l_eff = res.lj + 0.5 * res.l_line
    return 1.0 / (2 * math.pi * math.sqrt(l_eff * c_eff))


def frequency_sweep(res: TunableResonator, lj_values):
    """Resonant frequencies for each junction inductance in ``lj_values``."""
    return np.array([positioned_frequency(res.with_lj(v)) for v in np.asarray(lj_values, float)])


def tuning_range(res: TunableResonator, lj_max) -> float:
    return res.f_loaded - positioned_frequency(res.with_lj(lj_max))


def position_table(res: TunableResonator, lj_values, positions=(0.0, 0.5, 0.9)):
    """Rows (position, lj, f_r) for a junction-placement comparison."""
    rows = []
    for pos in positions:
        r = replace(res, junction_position=pos)
        for lj, f in zip(lj_values, frequency_sweep(r, lj_values)):
            rows.append((pos, float(lj), float(f)))
    return rows


class InductanceMapper(TransformerMixin, BaseEstimator):
    """Map measured resonant frequencies to junction inductances.

    ``transform`` takes frequencies in Hz and returns L_J in H;
    ``inverse_transform`` goes the other way.
    """

    def __init__(self, cpw=None, lk_total=0.0, junction_position=0.0):
        self.cpw = cpw
        self.lk_total = lk_total
        self.junction_position = junction_position

    def fit(self, X=None, y=None):
        if self.cpw is None:
            raise ValueError("cpw electricals are required")
        self.resonator_ = TunableResonator(self.cpw, self.lk_total, 0.0, self.junction_position)
        self.f_max_ = self.resonator_.f_loaded
        return self

    def transform(self, X):
        check_is_fitted(self, "resonator_")
        f = check_1d(X, "X")
        return np.array([lj_from_frequency(self.resonator_, v) for v in f])

    def inverse_transform(self, X):
        check_is_fitted(self, "resonator_")
        return frequency_sweep(self.resonator_, check_1d(X, "X"))
