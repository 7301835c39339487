"""Steady-state Duffing response, bifurcation curves and critical-power extraction.

Reduced units: detuning ``omega = 2 Q_L (f_r - f) / f_r`` (positive below the
linear resonance) and reduced stored energy ``u``, which shifts the resonance
down by ``u``. The steady state solves

    u * ((omega - u)**2 + 1) = p_rel * 8 / (3 sqrt(3))

so the first fold appears at omega = sqrt(3), p_rel = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq
from scipy.ndimage import median_filter
from scipy.signal import savgol_filter
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import DomainError, check_ascending, check_uniform, warn
from .units import db_to_ratio

SQRT3 = math.sqrt(3.0)
CRITICAL_DRIVE = 8.0 / (3.0 * SQRT3)
CRITICAL_ENERGY = 2.0 / SQRT3
DEFAULT_DEPTH = 0.3


class ExtractionError(ValueError):
    pass


@dataclass(frozen=True)
class DuffingParams:
    """Softening Duffing resonator.

    ``q_ext_mag`` defaults to Q_L / DEFAULT_DEPTH, a dip deep enough for the
    fold jump to stand out of 40 dB noise yet shallow enough that the
    |S21| nonlinearity barely moves the susceptibility peak.
    """

    f_r: float
    q_l: float
    p_c_dbm: float
    q_ext_mag: Optional[float] = None
    phi: float = 0.0
    amp: float = 1.0

    def __post_init__(self):
        if not self.q_l > 1:
            raise DomainError("q_l must be > 1")
        if not self.f_r > 0:
            raise DomainError("f_r must be > 0")
        if not math.isfinite(self.p_c_dbm):
            raise DomainError("p_c_dbm must be finite")

    @property
    def depth(self) -> float:
        q_ext = self.q_l / DEFAULT_DEPTH if self.q_ext_mag is None else self.q_ext_mag
        return self.q_l / q_ext

    def omega(self, f):
        return 2.0 * self.q_l * (self.f_r - np.asarray(f, float)) / self.f_r

    def frequency(self, omega):
        return self.f_r * (1.0 - np.asarray(omega, float) / (2.0 * self.q_l))

    def p_rel(self, p_dbm):
        return db_to_ratio(np.asarray(p_dbm, float) - self.p_c_dbm)


@dataclass(frozen=True)
class ReducedPoint:
    omega: float
    p_rel: float


def _cubic_roots(omega, drive):
    """Real roots of u^3 - 2 w u^2 + (w^2 + 1) u - drive, vectorised.

    Returns (low, mid, high, n) where rows with a single root carry it in
    all three slots and ``n == 1``.
    """
    w = np.asarray(omega, dtype=float)
    P = np.broadcast_to(np.asarray(drive, dtype=float), w.shape)
    shift = 2.0 * w / 3.0
    p = 1.0 - w * w / 3.0
    q = 2.0 * w ** 3 / 27.0 + 2.0 * w / 3.0 - P
    disc = 4.0 * p ** 3 + 27.0 * q * q
    three = (disc < 0) & (p < 0)

    t_one = np.empty_like(w)
    pos = p > 0
    zero = p == 0
    neg = ~pos & ~zero
    with np.errstate(invalid="ignore", divide="ignore"):
        sp = np.sqrt(np.abs(p) / 3.0)
        arg_pos = 1.5 * q / np.where(pos, np.abs(p), 1.0) / np.where(pos, sp, 1.0)
        t_one[pos] = -2.0 * sp[pos] * np.sinh(np.arcsinh(arg_pos[pos]) / 3.0)
        t_one[zero] = np.cbrt(-q[zero])
        arg_neg = 1.5 * np.abs(q) / np.where(neg, np.abs(p), 1.0) / np.where(neg, sp, 1.0)
        arg_neg = np.maximum(arg_neg, 1.0)
        t_one[neg] = -2.0 * np.sign(q[neg]) * sp[neg] * np.cosh(np.arccosh(arg_neg[neg]) / 3.0)

        arg3 = np.clip(1.5 * q / np.where(three, p, -1.0) / np.where(three, sp, 1.0), -1.0, 1.0)
        base = np.arccos(arg3) / 3.0
        t3 = np.stack([2.0 * sp * np.cos(base - 2.0 * np.pi * k / 3.0) for k in range(3)])
    t3.sort(axis=0)
    roots = np.where(three, t3, t_one) + shift
    roots = _newton_polish(roots, w, P)
    n = np.where(three, 3, 1)
    return roots[0], roots[1], roots[2], n


def _newton_polish(u, w, P):
    f = u * ((w - u) ** 2 + 1.0) - P
    df = 3.0 * u * u - 4.0 * w * u + w * w + 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        step = np.where(np.abs(df) > 1e-8, f / df, 0.0)
    return u - step


def steady_amplitudes(omega, p_rel):
    """Real steady-state reduced energies, ascending (one or three values)."""
    if p_rel < 0:
        raise DomainError("p_rel must be >= 0")
    if p_rel == 0:
        return np.array([0.0])
    lo, mid, hi, n = _cubic_roots(np.array([float(omega)]), p_rel * CRITICAL_DRIVE)
    if n[0] == 1:
        return np.array([lo[0]])
    return np.array([lo[0], mid[0], hi[0]])


def _drive_at(u, omega):
    return u * ((omega - u) ** 2 + 1.0) / CRITICAL_DRIVE


def bifurcation_locus_oracle(omega):
    """Fold powers (lower, upper) in units of P_C from the double-root condition."""
    w = np.asarray(omega, dtype=float)
    if not np.all(w > SQRT3):
        raise DomainError("omega must exceed sqrt(3)")
    s = np.sqrt(w * w - 3.0)
    lower = _drive_at((2.0 * w + s) / 3.0, w)
    upper = _drive_at((2.0 * w - s) / 3.0, w)
    if w.ndim == 0:
        return float(lower), float(upper)
    return lower, upper


def universal_curve(omega, regime="above", exponent=1.5):
    """Reduced critical-curve power P/P_C at reduced frequency ``omega``.

    ``regime='above'`` returns the (lower, upper) pair of the two branches
    that meet at P = P_C; ``'below'`` returns the single maximum-slope value.
    ``exponent`` selects the power on the square-root term of the above-P_C
    curve (1.5 by default; 2/3 reproduces a printed variant).
    """
    w = np.asarray(omega, dtype=float)
    scalar = w.ndim == 0
    if regime == "above":
        if np.any(w < SQRT3):
            raise DomainError("above-critical curve needs omega >= sqrt(3)")
        pref = w ** 3 / (12.0 * SQRT3)
        core = 1.0 + 9.0 / w ** 2
        root = np.maximum(1.0 - 3.0 / w ** 2, 0.0) ** exponent
        lower, upper = pref * (core - root), pref * (core + root)
        return (float(lower), float(upper)) if scalar else (lower, upper)
    if regime == "below":
        if np.any(w < 1.0 / SQRT3 - 1e-15) or np.any(w > SQRT3 + 1e-15):
            raise DomainError("below-critical curve needs 1/sqrt(3) <= omega <= sqrt(3)")
        out = w * SQRT3 / 2.0 - 0.5
        return float(out) if scalar else out
    raise ValueError(f"unknown regime {regime!r}")


def universal_omega(p_rel, branch="forward", exponent=1.5):
    """Inverse of the universal curves: expected reduced frequency at P/P_C.

    Below P_C the single maximum-slope curve applies. Above it, ``branch``
    picks the jump seen in an upward frequency sweep (``'forward'``, upper
    power branch) or a downward one (``'backward'``).
    """
    if p_rel <= 0:
        raise DomainError("p_rel must be > 0")
    if p_rel <= 1.0:
        return (p_rel + 0.5) * 2.0 / SQRT3
    idx = 1 if branch == "forward" else 0

    def g(w):
        return universal_curve(w, "above", exponent)[idx] - p_rel

    hi = 2.0 * SQRT3
    while g(hi) < 0:
        hi *= 2.0
    return brentq(g, SQRT3, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps)


def sweep_energy(omega_seq, p_rel, reverse=False):
    """Reduced energy along a sweep, following the branch it is on.

    At each point the stable root nearest the previous one is kept; the
    middle root is never selected. When the followed branch disappears at a
    fold, the sweep jumps to the remaining root. ``reverse=True`` walks the
    sequence from its end; roots are computed once in the given order, so
    both directions agree bit for bit wherever the root is unique.
    """
    omega_seq = np.asarray(omega_seq, dtype=float)
    if p_rel == 0:
        return np.zeros_like(omega_seq)
    lo, _, hi, n = _cubic_roots(omega_seq, p_rel * CRITICAL_DRIVE)
    out = np.empty_like(omega_seq)
    prev = 0.0
    order = range(omega_seq.size - 1, -1, -1) if reverse else range(omega_seq.size)
    for i in order:
        if n[i] == 1:
            prev = lo[i]
        else:
            prev = lo[i] if abs(lo[i] - prev) <= abs(hi[i] - prev) else hi[i]
        out[i] = prev
    return out


def response(params: DuffingParams, freqs, p_dbm, direction="forward"):
    """Complex S21 of the driven resonator for an up or down frequency sweep.

    ``freqs`` must be ascending; the returned array is always in ascending
    frequency order regardless of sweep direction.
    """
    freqs = check_ascending(np.asarray(freqs, dtype=float))
    p_rel = float(params.p_rel(p_dbm))
    omega = params.omega(freqs)
    if direction == "forward":
        u = sweep_energy(omega, p_rel)
    elif direction == "backward":
        u = sweep_energy(omega, p_rel, reverse=True)
    else:
        raise ValueError("direction must be 'forward' or 'backward'")
    det = omega - u
    return params.amp * (1.0 - params.depth * np.exp(1j * params.phi) / (1.0 - 1j * det))


def forward_sweep(params: DuffingParams, freqs, p_dbm):
    return response(params, freqs, p_dbm, "forward")


def backward_sweep(params: DuffingParams, freqs, p_dbm):
    return response(params, freqs, p_dbm, "backward")


def susceptibility(freqs, mag, smooth=None):
    """-d|S21|/df on the grid.

    Without smoothing this is the forward difference, reported at the
    midpoint of each interval. With ``smooth=n`` a quartic Savitzky-Golay
    derivative over ``n`` points is used and values sit on the grid points.
    """
    freqs = np.asarray(freqs, dtype=float)
    mag = np.asarray(mag, dtype=float)
    if smooth is None or smooth <= 2:
        return 0.5 * (freqs[1:] + freqs[:-1]), -np.diff(mag) / np.diff(freqs)
    if smooth % 2 == 0 or smooth < 7 or smooth > mag.size:
        raise ValueError("smooth must be an odd window of 7..len(trace) points")
    df = np.mean(np.diff(freqs))
    return freqs, -savgol_filter(mag, smooth, 4, deriv=1, delta=df)


def extract_fb(freqs, mag, smooth=None):
    """Frequency of maximum susceptibility; returns (f_B, peak value).

    The smoothed variant refines the peak position with a three-point
    parabola, so f_B is not quantised to the grid.
    """
    freqs = np.asarray(freqs, dtype=float)
    mag = np.abs(np.asarray(mag))
    if freqs.size < 3 or freqs.size != mag.size:
        raise ExtractionError("need at least 3 matching points")
    d = np.diff(mag)
    if np.all(d >= 0) or np.all(d <= 0):
        raise ExtractionError("trace is flat or monotone; no dip to analyse")
    f_s, chi = susceptibility(freqs, mag, smooth)
    i = int(np.argmax(chi))
    if smooth is None or smooth <= 2 or i == 0 or i == chi.size - 1:
        return float(f_s[i]), float(chi[i])
    a, b, c = chi[i - 1:i + 2]
    curv = a - 2 * b + c
    off = 0.5 * (a - c) / curv if curv < 0 else 0.0
    return float(f_s[i] + off * (f_s[1] - f_s[0])), float(chi[i])


def jump_score(mag, prefilter=7):
    """Evidence for a discontinuity in one |S21| trace.

    Largest downward step of the median-filtered trace divided by (four
    noise sigmas plus the step two samples away). Smooth dips score below
    about 1.5 however steep they are; a fold jump scores well above.
    """
    mag = np.abs(np.asarray(mag, dtype=float))
    mm = median_filter(mag, prefilter, mode="nearest") if prefilter > 1 else mag
    d = -np.diff(mm)
    j = int(np.argmax(d))
    raw = np.diff(mag)
    sigma = 1.4826 * np.median(np.abs(raw - np.median(raw))) / math.sqrt(2.0)
    nb = max(abs(d[max(j - 2, 0)]), abs(d[min(j + 2, d.size - 1)]))
    den = 4.0 * sigma + nb
    return float(d[j] / den) if den > 0 else (math.inf if d[j] > 0 else 0.0)


@dataclass
class BifurcationExtraction:
    powers_dbm: np.ndarray
    f_b: np.ndarray
    chi_max: np.ndarray
    d_chi_dp: np.ndarray
    p_c_dbm: float
    bifurcation: bool
    edge: bool = False
    jump_score: float = 0.0
    warnings: list = field(default_factory=list)

    def to_record(self, params: Optional[DuffingParams] = None):
        rec = {"p_c_dbm": self.p_c_dbm if self.bifurcation else None,
               "bifurcation": self.bifurcation,
               "edge_warning": self.edge,
               "jump_score": self.jump_score,
               "f_b_by_power": [{"power_dbm": float(p), "f_b_hz": float(f)}
                                for p, f in zip(self.powers_dbm, self.f_b)]}
        if params is not None and self.bifurcation:
            pts = rescale_stack(self, params)
            rec["omega_points"] = [{"omega": pt.omega, "p_rel": pt.p_rel} for pt in pts]
        return rec


# Median jump_score over the traces just above the candidate P_C needed to
# call the stack bifurcating.
JUMP_THRESHOLD = 1.75
# Number of power steps above the candidate P_C that are scored.
JUMP_SPAN = 30


def extract_pc(powers_dbm, freqs, mags, prefilter=7, power_filter=5,
               smooth=81, regularize=21) -> BifurcationExtraction:
    """Critical power and per-power f_B from a stack of |S21| traces.

    The susceptibility maximum of each trace is taken from forward
    differences of the trace after a ``prefilter``-point running median,
    which keeps a fold jump sharp while suppressing noise. Those maxima are
    median filtered across ``power_filter`` powers and P_C is placed where
    their discrete power derivative peaks.

    f_B above P_C is the jump position; at and below P_C it comes from a
    ``smooth``-point Savitzky-Golay derivative. If ``regularize`` > 1, f_B is
    then smoothed across power within each regime with a quadratic
    Savitzky-Golay filter of that many points. ``prefilter=1,
    power_filter=1, smooth=None, regularize=1`` gives plain forward
    differences throughout.
    """
    powers = np.asarray(powers_dbm, dtype=float)
    mags = np.abs(np.asarray(mags))
    freqs = np.asarray(freqs, dtype=float)
    if powers.size < 3:
        raise ExtractionError("need at least 3 power steps")
    check_ascending(powers, "powers")
    check_uniform(powers, "powers")
    if mags.shape != (powers.size, freqs.size):
        raise ExtractionError("stack shape does not match powers x freqs")
    check_ascending(freqs, "freqs")

    filt = median_filter(mags, size=(1, prefilter), mode="nearest") if prefilter > 1 else mags
    steps = -np.diff(filt, axis=1)
    chi = steps.max(axis=1) / np.diff(freqs).mean()
    if power_filter > 1:
        chi = median_filter(chi, power_filter, mode="nearest")
    dp = powers[1] - powers[0]
    dchi = np.diff(chi) / dp
    i = int(np.argmax(dchi))
    p_c = 0.5 * (powers[i] + powers[i + 1])

    scored = range(i + 1, min(i + 1 + JUMP_SPAN, powers.size))
    score = float(np.median([jump_score(mags[k], prefilter) for k in scored]))
    detected = score > JUMP_THRESHOLD

    f_b = np.empty(powers.size)
    for k in range(powers.size):
        if detected and powers[k] > p_c:
            j = int(np.argmax(steps[k]))
            f_b[k] = 0.5 * (freqs[j] + freqs[j + 1])
        else:
            f_b[k] = extract_fb(freqs, mags[k], smooth)[0]
    if regularize and regularize > 1:
        regimes = (powers < p_c, powers > p_c) if detected else (np.ones(powers.size, bool),)
        for m in regimes:
            if m.sum() > regularize:
                f_b[m] = savgol_filter(f_b[m], regularize, 2)

    notes = []
    # within this many steps of either end the power median and the
    # derivative see a truncated window, so P_C there is not trustworthy
    margin = max(2, power_filter // 2 + 1)
    edge = detected and (i < margin or i > dchi.size - 1 - margin)
    if edge:
        notes.append("critical power at the edge of the power grid")
        warn(notes[-1])
    if not detected:
        notes.append("no bifurcation detected")
    return BifurcationExtraction(powers, f_b, chi, dchi, float(p_c), detected, edge,
                                 score, notes)


def rescale(f_b, params: DuffingParams, p_dbm=None) -> ReducedPoint:
    omega = float(params.omega(f_b))
    p_rel = float(params.p_rel(p_dbm)) if p_dbm is not None else float("nan")
    return ReducedPoint(omega, p_rel)


def rescale_stack(extraction: BifurcationExtraction, params: DuffingParams, p_c_dbm=None):
    """Reduced points for every power, normalised by ``p_c_dbm`` (default: extracted)."""
    p_c = extraction.p_c_dbm if p_c_dbm is None else p_c_dbm
    pr = params.__class__(params.f_r, params.q_l, p_c, params.q_ext_mag, params.phi, params.amp)
    return [rescale(f, pr, p) for f, p in zip(extraction.f_b, extraction.powers_dbm)]


class CriticalPowerExtractor(BaseEstimator):
    """Estimator wrapper around :func:`extract_pc`.

    ``fit(X, y)``: ``X`` is the (n_powers, n_freqs) magnitude stack and ``y``
    the power grid in dBm; frequencies are passed at construction.
    """

    def __init__(self, freqs=None, prefilter=7, power_filter=5, smooth=81, regularize=21):
        self.freqs = freqs
        self.prefilter = prefilter
        self.power_filter = power_filter
        self.smooth = smooth
        self.regularize = regularize

    def fit(self, X, y):
        if self.freqs is None:
            raise ValueError("freqs must be set")
        self.extraction_ = extract_pc(y, self.freqs, X, self.prefilter, self.power_filter,
                                      self.smooth, self.regularize)
        self.p_c_dbm_ = self.extraction_.p_c_dbm
        self.bifurcation_ = self.extraction_.bifurcation
        return self

    def transform(self, X=None):
        """Per-power f_B values of the fitted stack."""
        check_is_fitted(self, "extraction_")
        return self.extraction_.f_b
