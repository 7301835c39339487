"""Notch-type S21 model and circle-fit extraction of resonator quality factors.

The extraction follows the usual hanger pipeline: remove cable delay, fit a
circle algebraically, fit the phase around the centred circle, read amplitude
and impedance-mismatch angle off the off-resonant point. The pipeline result
then seeds one joint least-squares fit of the full complex model, whose
covariance provides the reported 1-sigma uncertainties.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np
import scipy.linalg
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import fitcore
from ._validation import DomainError, check_ascending, check_xy, warn
from .units import HBAR, dbm_to_watt

MIN_POINTS = 16
NOISE_FACTOR = 5.0


class NoResonanceError(fitcore.FitError):
    pass


class InconsistentFitError(fitcore.FitError):
    pass


@dataclass
class ComplexTrace:
    freq: np.ndarray
    s21: np.ndarray
    power_dbm: Optional[float] = None
    gate_v: Optional[float] = None
    temp_k: Optional[float] = None

    def __post_init__(self):
        self.freq, self.s21 = check_xy(self.freq, self.s21, MIN_POINTS, complex_y=True)
        check_ascending(self.freq)

    @property
    def metadata(self):
        return {k: v for k, v in (("power_dbm", self.power_dbm), ("gate_v", self.gate_v),
                                  ("temp_k", self.temp_k)) if v is not None}


@dataclass(frozen=True)
class NotchModel:
    f_r: float
    q_l: float
    q_ext_mag: float
    phi: float = 0.0
    amp: float = 1.0
    phase0: float = 0.0
    delay: float = 0.0

    def __post_init__(self):
        if not (self.f_r > 0 and self.q_l > 0 and self.q_ext_mag > 0):
            raise DomainError("f_r, q_l and q_ext_mag must be > 0")
        if not self.inv_q_int > 0:
            raise DomainError("model implies a non-positive internal quality factor")

    @property
    def inv_q_int(self) -> float:
        return 1.0 / self.q_l - math.cos(self.phi) / self.q_ext_mag

    @property
    def q_int(self) -> float:
        return 1.0 / self.inv_q_int

    @property
    def diameter(self) -> float:
        """Diameter of the resonance circle for unit baseline."""
        return self.q_l / self.q_ext_mag

    @property
    def linewidth(self) -> float:
        return self.f_r / self.q_l


def notch_s21(model: NotchModel, f):
    """Hanger-geometry transmission including cable delay and baseline."""
    f = np.asarray(f, dtype=float)
    return _notch(f, model.f_r, model.q_l, model.q_ext_mag, model.phi,
                  model.amp, model.phase0, model.delay)


def _notch(f, f_r, q_l, q_ext, phi, amp, phase0, delay, f_ref=0.0):
    env = amp * np.exp(1j * (phase0 - 2 * np.pi * (f - f_ref) * delay))
    return env * (1.0 - (q_l / q_ext) * np.exp(1j * phi) / (1.0 + 2j * q_l * (f / f_r - 1.0)))


@dataclass
class ResonanceFit:
    f_r: float
    q_l: float
    q_ext_mag: float
    phi: float
    amp: float
    phase0: float
    delay: float
    q_int: float
    sigmas: dict
    residual_rms: float
    noise_rms: float = float("nan")
    converged: bool = True
    warnings: list = field(default_factory=list)

    @property
    def model(self) -> NotchModel:
        return NotchModel(self.f_r, self.q_l, self.q_ext_mag, self.phi,
                          self.amp, self.phase0, self.delay)

    def to_record(self):
        rec = asdict(self)
        rec["sigmas"] = {k: float(v) for k, v in self.sigmas.items()}
        return rec


def fit_circle(z):
    """Algebraic circle fit with the Pratt constraint.

    Returns (center, radius). The generalised eigenproblem of the moment
    matrix is solved directly, so no starting guess is needed.
    """
    z = np.asarray(z, dtype=complex)
    shift = z.mean()
    scale = np.abs(z - shift).max() or 1.0
    zs = (z - shift) / scale
    x, y = zs.real, zs.imag
    w = x * x + y * y
    design = np.column_stack([w, x, y, np.ones_like(x)])
    moments = design.T @ design / x.size
    constraint = np.array([[0, 0, 0, -2], [0, 1, 0, 0], [0, 0, 1, 0], [-2, 0, 0, 0]], float)
    vals, vecs = scipy.linalg.eig(moments, constraint)
    vals = np.real(vals)
    ok = np.isfinite(vals) & (vals >= -1e-12 * np.abs(vals[np.isfinite(vals)]).max(initial=1.0))
    if not np.any(ok):
        raise fitcore.FitError("circle fit failed")
    idx = np.where(ok)[0][np.argmin(vals[ok])]
    a, b, c, d = np.real(vecs[:, idx])
    if a == 0:
        raise fitcore.FitError("points are collinear")
    center = complex(-b / (2 * a), -c / (2 * a))
    radius = math.sqrt(max(b * b + c * c - 4 * a * d, 0.0)) / (2 * abs(a))
    return shift + scale * center, scale * radius


def estimate_noise(z):
    """Per-quadrature noise sigma from point-to-point differences (robust)."""
    dz = np.diff(np.asarray(z, dtype=complex))
    return math.sqrt(np.median(np.abs(dz) ** 2) / (4 * math.log(2)))


def _magnitude_guess(f, z):
    """Rough (f_r, Q_L) from the |S21|^2 dip, which is delay independent."""
    mag2 = np.abs(z) ** 2
    n_edge = max(len(f) // 10, 2)
    base = np.median(np.concatenate([mag2[:n_edge], mag2[-n_edge:]]))
    i_min = int(np.argmin(mag2))
    half = 0.5 * (base + mag2[i_min])
    below = mag2 < half
    lo = i_min
    while lo > 0 and below[lo - 1]:
        lo -= 1
    hi = i_min
    while hi < len(f) - 1 and below[hi + 1]:
        hi += 1
    fwhm = max(f[min(hi + 1, len(f) - 1)] - f[max(lo - 1, 0)], 2 * np.median(np.diff(f)))
    f_r = f[i_min]
    return f_r, f_r / fwhm


def _estimate_delay(f, z, fraction=0.1):
    n_edge = max(int(len(f) * fraction), 2)
    phase = np.unwrap(np.angle(z))
    idx = np.r_[0:n_edge, len(f) - n_edge:len(f)]
    slope = np.polyfit(f[idx], phase[idx], 1)[0]
    return -slope / (2 * np.pi)


def _phase_fit(f, zc, f_r0, q_l0):
    theta = np.unwrap(np.angle(zc))
    # anchor theta0 on the point nearest the guessed resonance
    i0 = int(np.argmin(np.abs(f - f_r0)))
    theta0 = theta[i0]

    def residual(p):
        th0, ql, fr_off = p
        fr = f_r0 * (1.0 + fr_off / q_l0)
        return th0 + 2 * np.arctan(2 * ql * q_l0 * (1 - f / fr)) - theta

    res = fitcore.solve(fitcore.FitProblem(residual, [theta0, 1.0, 0.0],
                                           lower=[-np.inf, 1e-6, -np.inf], max_iter=300))
    th0, ql, fr_off = res.params
    return th0, ql * q_l0, f_r0 * (1.0 + fr_off / q_l0)


def _wrap(angle):
    return (angle + np.pi) % (2 * np.pi) - np.pi


def circle_fit(trace: ComplexTrace, refine: bool = True) -> ResonanceFit:
    """Extract f_r, Q_L, |Q_ext|, phi and Q_int from a notch trace."""
    f, z = trace.freq, trace.s21
    notes = []
    f_r0, q_l0 = _magnitude_guess(f, z)
    span = f[-1] - f[0]
    if span < 3 * f_r0 / q_l0:
        delay = 0.0
        notes.append("span shorter than 3 linewidths; delay fixed to 0")
        warn(notes[-1])
    else:
        delay = _estimate_delay(f, z)
    zd = z * np.exp(2j * np.pi * f * delay)

    center, radius = fit_circle(zd)
    noise = estimate_noise(zd)
    extent = 0.5 * np.abs(zd - np.median(zd)).max()
    if min(radius, extent) < NOISE_FACTOR * noise:
        raise NoResonanceError(
            f"no resonance: circle radius {min(radius, extent):.3g} < {NOISE_FACTOR} x noise {noise:.3g}")

    theta0, q_l, f_r = _phase_fit(f, zd - center, f_r0, q_l0)
    off = center + radius * np.exp(1j * (theta0 + np.pi))
    amp = abs(off)
    alpha = math.atan2(off.imag, off.real)
    zn = center / off
    r_n = radius / amp
    phi = math.atan2(-(zn.imag), 1.0 - zn.real)
    q_ext = q_l / (2 * r_n)
    p = dict(f_r=f_r, q_l=q_l, q_ext_mag=q_ext, phi=phi, amp=amp, phase0=alpha, delay=delay)

    if refine:
        p, sigmas, rms, converged = _refine(f, z, p)
    else:
        sigmas = {k: float("nan") for k in p}
        sigmas["q_int"] = float("nan")
        rms = float(np.sqrt(np.mean(np.abs(notch_s21(NotchModel(**p), f) - z) ** 2)))
        converged = True
    inv_qi = 1.0 / p["q_l"] - math.cos(p["phi"]) / p["q_ext_mag"]
    if not inv_qi > 0:
        raise InconsistentFitError("fitted parameters imply Q_int <= 0")
    return ResonanceFit(q_int=1.0 / inv_qi, sigmas=sigmas, residual_rms=rms, noise_rms=noise,
                        converged=converged, warnings=notes, **p)


_PARAM_ORDER = ("f_r", "q_l", "q_ext_mag", "phi", "amp", "phase0", "delay")


def _refine(f, z, p):
    """Joint complex least-squares refinement in scaled coordinates."""
    f_c = 0.5 * (f[0] + f[-1])
    span = f[-1] - f[0]
    lw = p["f_r"] / p["q_l"]
    scale = np.array([lw, p["q_l"], p["q_ext_mag"], 1.0, p["amp"], 1.0, 1.0 / (2 * np.pi * span)])
    offset = np.array([p["f_r"], 0, 0, 0, 0, 0, 0], float)
    phase0_c = p["phase0"] - 2 * np.pi * f_c * p["delay"]
    s0 = np.array([0.0, 1.0, 1.0, p["phi"], 1.0, _wrap(phase0_c), p["delay"] * 2 * np.pi * span])

    def unpack(s):
        return offset + scale * s

    def residual(s):
        fr, ql, qe, phi, amp, ph, tau = unpack(s)
        d = _notch(f, fr, ql, qe, phi, amp, ph, tau, f_ref=f_c) - z
        return np.concatenate([d.real, d.imag])

    lower = np.array([-np.inf, 1e-9, 1e-9, -np.inf, 1e-9, -np.inf, -np.inf])
    res = fitcore.solve(fitcore.FitProblem(residual, s0, lower=lower, max_iter=200))
    vals = unpack(res.params)
    # physical covariance; phase0 referenced to f = 0 mixes in the delay
    T = np.diag(scale)
    T[5, 6] = 2 * np.pi * f_c * scale[6]
    cov = T @ res.covariance @ T.T
    fr, ql, qe, phi, amp, ph_c, tau = vals
    out = dict(f_r=fr, q_l=ql, q_ext_mag=qe, phi=_wrap(phi), amp=amp,
               phase0=float(_wrap(ph_c + 2 * np.pi * f_c * tau)), delay=tau)
    sig = np.sqrt(np.clip(np.diag(cov), 0, None))
    sigmas = dict(zip(_PARAM_ORDER, map(float, sig)))
    # Q_int through the delta method
    inv_qi = 1 / ql - math.cos(phi) / qe
    grad = np.zeros(7)
    grad[1] = 1 / ql ** 2
    grad[2] = -math.cos(phi) / qe ** 2
    grad[3] = -math.sin(phi) / qe
    grad /= inv_qi ** 2
    sigmas["q_int"] = float(math.sqrt(max(grad @ cov @ grad, 0.0)))
    rms = float(np.sqrt(2 * res.cost / f.size))
    return out, sigmas, rms, res.converged


def photon_number(p_in_dbm, fit) -> float:
    """Mean intracavity photon number of a hanger resonator at input power."""
    omega = 2 * np.pi * fit.f_r
    p_w = dbm_to_watt(p_in_dbm)
    n = 2.0 / (HBAR * omega ** 2) * fit.q_l ** 2 / fit.q_ext_mag * p_w
    return n if np.ndim(n) else float(n)


def photon_number_watt(p_in_w, fit):
    omega = 2 * np.pi * fit.f_r
    return 2.0 / (HBAR * omega ** 2) * fit.q_l ** 2 / fit.q_ext_mag * np.asarray(p_in_w, float)


class NotchResonanceFitter(BaseEstimator):
    """Circle-fit estimator for hanger resonances.

    ``fit(X, y)`` takes frequencies (Hz) and complex S21; ``predict(X)``
    evaluates the fitted notch model.
    """

    def __init__(self, refine=True):
        self.refine = refine

    def fit(self, X, y):
        trace = ComplexTrace(np.asarray(X).ravel(), y)
        self.result_ = circle_fit(trace, refine=self.refine)
        self.f_r_ = self.result_.f_r
        self.q_l_ = self.result_.q_l
        self.q_int_ = self.result_.q_int
        self.q_ext_ = self.result_.q_ext_mag
        return self

    def predict(self, X):
        check_is_fitted(self, "result_")
        return notch_s21(self.result_.model, np.asarray(X, dtype=float).ravel())
