"""Seeded synthetic data for round-trip tests of every fitter.

PRNG: numpy's Philox4x64-10 counter-based generator, keyed by the integer
seed. Trace k of a stack draws from ``Philox(seed).jumped(k)``, so each trace
is reproducible on its own and stacks can be generated in any order. Noise is
additive complex Gaussian on S21 with per-quadrature sigma given relative to
the baseline amplitude.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._validation import DomainError, check_ascending, check_uniform
from .coupling import CrossingData, CrossingModel, branch_frequencies
from .duffing import DuffingParams, response
from .em_model import two_fluid_shift
from .spectro import ComplexTrace, NotchModel, notch_s21
from .units import snr_db_to_sigma

STACK_POWERS = (-76.0, -56.0, 0.1)
STACK_POINTS = 1201
STACK_SPAN = 100e6
# Fraction of the span placed below f_r; softening pushes the jump downward.
STACK_SPAN_BELOW = 0.65


@dataclass(frozen=True)
class NoiseSpec:
    seed: int = 0
    sigma: float = 0.0

    def __post_init__(self):
        if not self.sigma >= 0:
            raise DomainError(f"sigma must be >= 0, got {self.sigma}")
        if int(self.seed) != self.seed or self.seed < 0:
            raise DomainError("seed must be a non-negative integer")

    @classmethod
    def from_snr(cls, snr_db, seed=0):
        return cls(seed=seed, sigma=float(snr_db_to_sigma(snr_db)))

    def generator(self, stream=0) -> np.random.Generator:
        bitgen = np.random.Philox(int(self.seed))
        if stream:
            bitgen = bitgen.jumped(int(stream))
        return np.random.Generator(bitgen)

    def complex_noise(self, n, amplitude=1.0, stream=0):
        if self.sigma == 0:
            return np.zeros(n, dtype=complex)
        g = self.generator(stream)
        s = self.sigma * abs(amplitude)
        return s * g.standard_normal(n) + 1j * s * g.standard_normal(n)

    def real_noise(self, n, sigma, stream=0):
        if sigma == 0:
            return np.zeros(n)
        return sigma * self.generator(stream).standard_normal(n)


def notch_grid(model: NotchModel, n=10001, span_linewidths=8.0):
    """Uniform grid centred on f_r covering ``span_linewidths`` linewidths."""
    half = 0.5 * span_linewidths * model.linewidth
    return np.linspace(model.f_r - half, model.f_r + half, n)


def synth_notch(model: NotchModel, grid, noise: NoiseSpec = NoiseSpec(), **meta) -> ComplexTrace:
    f = check_ascending(np.asarray(grid, dtype=float))
    z = notch_s21(model, f) + noise.complex_noise(f.size, model.amp)
    return ComplexTrace(f, z, **meta)


@dataclass
class TraceStack:
    """S21 traces on one frequency grid, one row per drive power."""

    freqs: np.ndarray
    powers_dbm: np.ndarray
    s21: np.ndarray

    def __post_init__(self):
        self.freqs = np.asarray(self.freqs, dtype=float)
        self.powers_dbm = np.asarray(self.powers_dbm, dtype=float)
        self.s21 = np.asarray(self.s21, dtype=complex)
        if self.s21.shape != (self.powers_dbm.size, self.freqs.size):
            raise ValueError("s21 must have shape (n_powers, n_freqs)")

    @property
    def mags(self):
        return np.abs(self.s21)

    def trace(self, k) -> ComplexTrace:
        return ComplexTrace(self.freqs, self.s21[k], power_dbm=float(self.powers_dbm[k]))

    def __len__(self):
        return self.powers_dbm.size


def stack_powers(start=STACK_POWERS[0], stop=STACK_POWERS[1], step=STACK_POWERS[2]):
    n = int(round((stop - start) / step)) + 1
    return np.round(start + step * np.arange(n), 10)


def stack_grid(f_r, n=STACK_POINTS, span=STACK_SPAN, below=STACK_SPAN_BELOW):
    return np.linspace(f_r - below * span, f_r + (1 - below) * span, n)


def synth_duffing_stack(params: DuffingParams, powers=None, freqs=None,
                        noise: NoiseSpec = NoiseSpec(), direction="forward") -> TraceStack:
    powers = stack_powers() if powers is None else np.asarray(powers, dtype=float)
    check_uniform(check_ascending(powers, "powers"), "powers")
    freqs = stack_grid(params.f_r) if freqs is None else np.asarray(freqs, dtype=float)
    rows = np.empty((powers.size, freqs.size), dtype=complex)
    for k, p in enumerate(powers):
        rows[k] = response(params, freqs, p, direction) + noise.complex_noise(
            freqs.size, params.amp, stream=k)
    return TraceStack(freqs, powers, rows)


def synth_crossing(model: CrossingModel, gate_v, noise_hz=0.0, seed=0) -> CrossingData:
    """Branch frequencies with independent Gaussian noise of ``noise_hz`` on each."""
    v = np.asarray(gate_v, dtype=float)
    fp, fm = branch_frequencies(model, v)
    ns = NoiseSpec(seed=seed)
    fp = np.asarray(fp) + ns.real_noise(v.size, noise_hz, stream=0)
    fm = np.asarray(fm) + ns.real_noise(v.size, noise_hz, stream=1)
    return CrossingData(v, fp, fm)


def synth_tsweep(tc, alpha_k, temperatures, f0=1.0, noise_rel=0.0, seed=0,
                 t_ref: Optional[float] = None, shift_noise_rel=0.0):
    """(T, f) pairs following the two-fluid shift.

    ``noise_rel`` is relative noise on each frequency; ``shift_noise_rel``
    is relative noise on each shift, i.e. a 1% value perturbs every
    Delta f / f by 1% of itself. The shift is taken relative to ``t_ref``
    (default: the coldest point), the same convention the fitter uses.
    """
    t = np.asarray(temperatures, dtype=float)
    ns = NoiseSpec(seed=seed)
    shift = two_fluid_shift(t, tc, alpha_k)
    shift = shift * (1.0 + ns.real_noise(t.size, shift_noise_rel, stream=1))
    t_ref = float(t.min()) if t_ref is None else t_ref
    f_zero = f0 / (1.0 + float(two_fluid_shift(t_ref, tc, alpha_k)))
    f = f_zero * (1.0 + shift)
    f = f * (1.0 + ns.real_noise(t.size, noise_rel))
    return t, f
