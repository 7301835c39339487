"""Avoided crossing between a fixed mode and a gate-tuned mode.

The tuned mode is linear in gate voltage, f2(v) = f1 + slope * (v - v_cross),
and the hybridised branches are

    f_pm = (f1 + f2) / 2 +- sqrt(g^2 + kappa * (f1 - f2)^2)

with kappa = 1/2 ("half", the default) or 1/4 ("quarter", the textbook
coupled-oscillator form).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from . import fitcore
from ._validation import DomainError, check_1d, warn

KAPPA = {"half": 0.5, "quarter": 0.25}


def _kappa(mode):
    try:
        return KAPPA[mode]
    except KeyError:
        raise DomainError(f"coefficient_mode must be one of {sorted(KAPPA)}, got {mode!r}") from None


@dataclass(frozen=True)
class CrossingModel:
    f1: float
    slope: float
    v_cross: float
    g_2pi: float
    coefficient_mode: str = "half"

    def __post_init__(self):
        if not self.g_2pi >= 0:
            raise DomainError(f"g_2pi must be >= 0, got {self.g_2pi}")
        _kappa(self.coefficient_mode)

    @property
    def kappa(self) -> float:
        return KAPPA[self.coefficient_mode]

    def f2(self, v):
        return self.f1 + self.slope * (np.asarray(v, dtype=float) - self.v_cross)


@dataclass(frozen=True)
class CrossingData:
    gate_v: np.ndarray
    f_plus: np.ndarray
    f_minus: np.ndarray

    def __post_init__(self):
        v = check_1d(self.gate_v, "gate_v")
        fp = check_1d(self.f_plus, "f_plus")
        fm = check_1d(self.f_minus, "f_minus")
        if not v.size == fp.size == fm.size:
            raise ValueError("gate_v, f_plus and f_minus must have equal length")
        # per-voltage sort so that f_plus is always the upper branch
        hi, lo = np.maximum(fp, fm), np.minimum(fp, fm)
        object.__setattr__(self, "gate_v", v)
        object.__setattr__(self, "f_plus", hi)
        object.__setattr__(self, "f_minus", lo)

    def __len__(self):
        return self.gate_v.size


def branch_frequencies(model: CrossingModel, v):
    """(f_plus, f_minus) at gate voltages ``v``."""
    f2 = model.f2(v)
    mean = 0.5 * (model.f1 + f2)
    half = np.sqrt(model.g_2pi ** 2 + model.kappa * (model.f1 - f2) ** 2)
    fp, fm = mean + half, mean - half
    if fp.ndim == 0:
        return float(fp), float(fm)
    return fp, fm


@dataclass
class CrossingFit:
    model: CrossingModel
    sigmas: dict
    residuals: np.ndarray
    converged: bool
    warnings: list = field(default_factory=list)

    def to_record(self):
        m = self.model
        return {"f1_hz": m.f1, "slope_hz_per_v": m.slope, "v_cross_v": m.v_cross,
                "g_2pi_hz": m.g_2pi, "coefficient_mode": m.coefficient_mode,
                "uncertainties": dict(self.sigmas), "converged": self.converged,
                "residuals_hz": [float(r) for r in self.residuals],
                "warnings": list(self.warnings)}


def _initial_guess(data: CrossingData):
    v, fp, fm = data.gate_v, data.f_plus, data.f_minus
    order = np.argsort(v)
    v, fp, fm = v[order], fp[order], fm[order]
    split = fp - fm
    k = int(np.argmin(split))
    g0 = 0.5 * split[k]
    # The tuned mode occupies the upper branch on one side and the lower on
    # the other; the flat branch pieces carry f1.
    s_plus = (fp[-1] - fp[0]) / (v[-1] - v[0]) if v[-1] != v[0] else 0.0
    s_minus = (fm[-1] - fm[0]) / (v[-1] - v[0]) if v[-1] != v[0] else 0.0
    rising = s_plus + s_minus > 0
    if rising:
        flat = np.concatenate([fp[:k], fm[k + 1:]])
        tuned_lo, tuned_hi = fm[0], fp[-1]
    else:
        flat = np.concatenate([fm[:k], fp[k + 1:]])
        tuned_lo, tuned_hi = fp[0], fm[-1]
    f1 = float(np.median(flat)) if flat.size else float(0.5 * (fp[k] + fm[k]))
    slope = (tuned_hi - tuned_lo) / (v[-1] - v[0]) if v[-1] != v[0] else 0.0
    if slope == 0:
        slope = 1.0
    # f2 = f1 exactly where the branch sum equals 2 f1
    total = fp + fm - 2 * f1
    sign = np.nonzero(np.diff(np.sign(total)))[0]
    if sign.size:
        i = sign[0]
        v0 = v[i] - total[i] * (v[i + 1] - v[i]) / (total[i + 1] - total[i])
    else:
        v0 = v[k]
    return np.array([f1, slope, float(v0), max(g0, 0.0)])


def fit_crossing(data: CrossingData, coefficient_mode="half", p0=None) -> CrossingFit:
    """Least-squares fit of both branches over (f1, slope, v_cross, g_2pi)."""
    kappa = _kappa(coefficient_mode)
    if len(data) < 4:
        raise DomainError("need at least 4 rows")
    v, fp, fm = data.gate_v, data.f_plus, data.f_minus
    p0 = _initial_guess(data) if p0 is None else np.asarray(p0, dtype=float)

    # Work in scaled units so every parameter is O(1) for the Jacobian.
    f_scale = max(abs(p0[0]), 1.0)
    v_scale = max(np.ptp(v), 1e-12)
    scale = np.array([f_scale, f_scale / v_scale, v_scale, f_scale])
    x = v / v_scale

    def residual(q):
        f1, slope, v0, g = q * scale
        f2 = f1 + slope * (x * v_scale - v0)
        mean = 0.5 * (f1 + f2)
        half = np.sqrt(g * g + kappa * (f1 - f2) ** 2)
        return np.concatenate([mean + half - fp, mean - half - fm]) / f_scale

    lower = np.array([-np.inf, -np.inf, -np.inf, 0.0])
    res = fitcore.solve(fitcore.FitProblem(residual=residual, p0=p0 / scale, lower=lower))
    params = res.params * scale
    sig = res.uncertainties * scale
    notes = []
    f2 = params[0] + params[1] * (v - params[2])
    if np.all(f2 > params[0]) or np.all(f2 < params[0]):
        notes.append("data cover one side of the crossing only; fit is poorly conditioned")
        warn(notes[-1])
    model = CrossingModel(float(params[0]), float(params[1]), float(params[2]),
                          float(params[3]), coefficient_mode)
    names = ("f1", "slope", "v_cross", "g_2pi")
    return CrossingFit(model, {n: float(s) for n, s in zip(names, sig)},
                       res.residual * f_scale, res.converged, notes)


def min_splitting(model: CrossingModel, v_min, v_max, n=20001):
    """Minimum of f_plus - f_minus over a dense voltage grid."""
    v = np.linspace(v_min, v_max, n)
    fp, fm = branch_frequencies(model, v)
    return float(np.min(fp - fm))


def detuning_metrics(gate_v, f_plus, f_minus, v_ref=None):
    """Detuning Delta = |f+ - f-| and the on/off ratios on each side of its minimum.

    The on/off ratio of a side is Delta at the reference gate voltage over
    min Delta. With ``v_ref=None`` the reference of each side is the point
    farthest from the minimum, i.e. the largest detuning reached there.
    """
    v = check_1d(gate_v, "gate_v")
    delta = np.abs(check_1d(f_plus, "f_plus") - check_1d(f_minus, "f_minus"))
    if v.size < 2 or delta.size != v.size:
        raise DomainError("need at least 2 matching rows")
    order = np.argsort(v)
    v, delta = v[order], delta[order]
    k = int(np.argmin(delta))
    d_min = float(delta[k])
    if d_min <= 0:
        raise DomainError("minimum detuning is zero; on/off ratio undefined")

    def side_ratio(sel):
        if not sel.any():
            return math.nan
        if v_ref is None:
            return float(delta[sel].max() / d_min)
        i = int(np.argmin(np.abs(v - v_ref) + np.where(sel, 0, np.inf)))
        return float(delta[i] / d_min)

    idx = np.arange(v.size)
    return {"gate_v": v, "delta": delta, "min_delta": d_min, "v_min": float(v[k]),
            "on_off_low_side": side_ratio(idx < k),
            "on_off_high_side": side_ratio(idx > k)}


def on_off_ratio(delta_ref, delta_min):
    if not (delta_ref > 0 and delta_min > 0):
        raise DomainError("detunings must be > 0")
    return delta_ref / delta_min


class CrossingEstimator(RegressorMixin, BaseEstimator):
    """Fit an avoided crossing; ``predict`` returns (n, 2) branch frequencies.

    ``X`` holds gate voltages, ``y`` an (n, 2) array of branch frequencies.
    """

    def __init__(self, coefficient_mode="half"):
        self.coefficient_mode = coefficient_mode

    def fit(self, X, y):
        y = np.asarray(y, dtype=float)
        if y.ndim != 2 or y.shape[1] != 2:
            raise ValueError("y must have shape (n, 2)")
        result = fit_crossing(CrossingData(check_1d(X, "X"), y[:, 0], y[:, 1]),
                              self.coefficient_mode)
        self.result_ = result
        self.model_ = result.model
        self.g_2pi_ = result.model.g_2pi
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        fp, fm = branch_frequencies(self.model_, check_1d(X, "X"))
        return np.column_stack([fp, fm])

    def score(self, X, y, sample_weight=None):
        y = np.asarray(y, dtype=float)
        pred = self.predict(X)
        ss = np.sum((np.sort(y, axis=1)[:, ::-1] - pred) ** 2)
        tot = np.sum((y - y.mean(axis=0)) ** 2)
        return 1.0 - ss / tot


def with_mode(model: CrossingModel, mode) -> CrossingModel:
    return replace(model, coefficient_mode=mode)
