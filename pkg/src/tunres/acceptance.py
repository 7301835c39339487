"""Acceptance checks against the bundled reference values.

Shared by ``tunres repro`` and the test suite. Every check reports its
measured value next to the tolerance it was judged against.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace

import numpy as np

from . import reference
from .coupling import CrossingModel, detuning_metrics, fit_crossing, min_splitting
from .duffing import (SQRT3, DuffingParams, backward_sweep, bifurcation_locus_oracle,
                      extract_pc, forward_sweep, rescale_stack, universal_curve, universal_omega)
from .em_model import (cpw_electricals, cpw_impedance, fit_tc, kinetic_fraction,
                       lk_decompose, lumped_quarter_wave, quarter_wave_f0, relative_shift)
from .junction import (TunableResonator, frequency_sweep, lj_from_frequency, participation,
                       tuning_range)
from .spectro import NotchModel, circle_fit
from .synth import (NoiseSpec, notch_grid, synth_crossing, synth_duffing_stack, synth_notch,
                    synth_tsweep)
from .units import gap_from_tc

SNR_DB = 40.0


@dataclass
class Check:
    criterion: int
    name: str
    passed: bool
    detail: str

    def line(self):
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.criterion}. {self.name}: {self.detail}"


def _rel(a, b):
    return abs(a - b) / abs(b)


def check_conformal(seed=0):
    z0_ref = reference.scalars()["geometry"]["z0_ohm"]
    z0, eps = cpw_impedance(reference.chip_geometry(1e-3))
    err = _rel(z0, z0_ref)
    return [Check(1, "conformal-mapping Z0", err <= 0.005,
                  f"Z0 = {z0:.4f} ohm (eps_eff {eps:.4f}) vs {z0_ref} ohm, rel err {err:.2e} <= 5e-3")]


def check_design_table(seed=0):
    out = []
    for row in reference.design_table():
        geom = reference.chip_geometry(row.length)
        z0, _ = cpw_impedance(geom)
        c0, l0 = lumped_quarter_wave(z0, row.f0)
        ec, el = _rel(c0, row.c0), _rel(l0, row.l0)
        out.append(Check(2, f"{row.name} C0/L0", ec <= 0.01 and el <= 0.01,
                         f"C0 {c0 * 1e12:.4f} pF (err {ec:.2%}), L0 {l0 * 1e9:.4f} nH "
                         f"(err {el:.2%}), tol 1%"))
        f0 = quarter_wave_f0(geom)
        ef = (f0 - row.f0) / row.f0
        out.append(Check(2, f"{row.name} quarter-wave f0", abs(ef) <= 0.025,
                         f"{f0 / 1e9:.4f} GHz vs {row.f0 / 1e9:.3f} GHz, err {ef:+.2%}, tol 2.5%"))
    return out


def check_kinetic(seed=0):
    k = reference.scalars()["kinetic"]
    out = []
    alpha = kinetic_fraction(k["f_meas_hz"], k["f_design_hz"])
    # "exactly" at the four published digits: half a unit in the last place
    out.append(Check(3, "alpha_K from (f_r, f0)", abs(alpha - k["alpha_k"]) < 5e-5,
                     f"alpha_K = {alpha:.5f} vs {k['alpha_k']} (|diff| < 5e-5)"))

    r3 = next(r for r in reference.design_table() if r.name == "R3")
    geom = reference.chip_geometry(r3.length)
    cpw = cpw_electricals(geom, r3.f0)
    film = lk_decompose(k["alpha_k"], cpw, geom)
    e = _rel(film.lk_per_square, k["lk_per_square_h"])
    out.append(Check(3, "L_K per square", e <= 0.10,
                     f"{film.lk_per_square * 1e12:.4f} pH vs {k['lk_per_square_h'] * 1e12} pH, "
                     f"err {e:.1%}, tol 10%"))

    temps = np.linspace(0.05, 1.1, 43)
    # 1% relative noise on every measured shift
    t, f = synth_tsweep(k["tc_k"], k["alpha_k"], temps, f0=k["f_meas_hz"], seed=seed,
                        shift_noise_rel=0.01)
    fit = fit_tc(t, relative_shift(t, f), k["alpha_k"])
    e = _rel(fit.tc, k["tc_k"])
    out.append(Check(3, "T_C round trip", e <= 0.01 and fit.converged,
                     f"T_C = {fit.tc:.5f} +- {fit.tc_sigma:.1e} K vs {k['tc_k']} K, err {e:.2%}, "
                     "tol 1%"))
    gap = gap_from_tc(fit.tc) * 1e6
    ok = abs(gap - k["gap_uev"]) <= k["gap_sigma_uev"]
    out.append(Check(3, "gap from T_C", ok,
                     f"Delta0 = {gap:.1f} ueV vs {k['gap_uev']} +- {k['gap_sigma_uev']} ueV"))
    return out


def check_universal_curve(seed=0):
    out = []
    omega = np.linspace(SQRT3 + 1e-3, 20.0, 4000)
    lower, upper = universal_curve(omega, "above")
    o_lo, o_hi = bifurcation_locus_oracle(omega)
    err = max(np.max(np.abs(lower / o_lo - 1)), np.max(np.abs(upper / o_hi - 1)))
    out.append(Check(4, "above-P_C curve vs double-root oracle", err <= 1e-12,
                     f"max rel err {err:.2e} <= 1e-12 on [sqrt3+1e-3, 20]"))
    lo, hi = universal_curve(SQRT3, "above")
    below = universal_curve(SQRT3, "below")
    meet = max(abs(lo - 1), abs(hi - 1), abs(below - 1))
    out.append(Check(4, "branches meet at (sqrt3, 1)", meet <= 1e-12,
                     f"max |P/P_C - 1| = {meet:.2e}"))
    p0 = float(universal_curve(1 / SQRT3, "below"))
    out.append(Check(4, "below-P_C endpoint Omega = 1/sqrt3 at P -> 0", abs(p0) <= 1e-15,
                     f"P/P_C({1 / SQRT3:.6f}) = {p0:.2e}"))
    return out


def _pipeline_row(row, seed):
    params = DuffingParams(row.f_r, row.q_l, row.p_c_dbm)
    stack = synth_duffing_stack(params, noise=NoiseSpec.from_snr(SNR_DB, seed))
    ex = extract_pc(stack.powers_dbm, stack.freqs, stack.mags)
    pts = rescale_stack(ex, params)
    errs = []
    for pt in pts:
        if 0.2 <= pt.p_rel <= 4.0:
            ref = universal_omega(pt.p_rel, "forward")
            errs.append(abs(pt.omega / ref - 1))
    return ex, np.array(errs)


def check_pipeline(seed=0):
    out = []
    for row in reference.bifurcation_table():
        ex, errs = _pipeline_row(row, seed)
        dp = ex.p_c_dbm - row.p_c_dbm
        tag = f"V_G = {row.gate_v:+g} V"
        out.append(Check(5, f"{tag} P_C", ex.bifurcation and abs(dp) <= 0.5,
                         f"P_C = {ex.p_c_dbm:.2f} dBm vs {row.p_c_dbm} dBm, diff {dp:+.2f} dB, "
                         "tol 0.5 dB"))
        worst = float(errs.max()) if errs.size else math.inf
        out.append(Check(5, f"{tag} rescaled points on universal curves", worst <= 0.05,
                         f"{errs.size} points with P/P_C in [0.2, 4], worst Omega err "
                         f"{worst:.2%}, tol 5%"))
    return out


def _jump_frequency(freqs, s21):
    d = -np.diff(np.abs(s21))
    i = int(np.argmax(d))
    return 0.5 * (freqs[i] + freqs[i + 1])


def check_hysteresis(seed=0):
    row = reference.bifurcation_table()[2]
    params = DuffingParams(row.f_r, row.q_l, row.p_c_dbm)
    freqs = np.linspace(row.f_r - 65e6, row.f_r + 35e6, 20001)
    df = freqs[1] - freqs[0]
    bad = []
    for off in (-10.0, -3.0, -1.0, -0.3, 0.3, 1.0, 3.0, 10.0):
        p = row.p_c_dbm + off
        fw, bw = forward_sweep(params, freqs, p), backward_sweep(params, freqs, p)
        gap = abs(_jump_frequency(freqs, fw) - _jump_frequency(freqs, bw))
        if off < 0:
            if np.max(np.abs(fw - bw)) > 0 or gap > 0:
                bad.append(off)
        elif not gap > df:
            bad.append(off)
    return [Check(6, "forward/backward jump frequencies differ iff P > P_C", not bad,
                  "offsets from P_C (dB) checked: -10, -3, -1, -0.3 (identical), "
                  "+0.3, +1, +3, +10 (distinct)" + (f"; failing at {bad}" if bad else ""))]


def random_notch_models(n, seed=0):
    g = NoiseSpec(seed=seed).generator(stream=1_000_000)
    models = []
    for _ in range(n):
        q_l = 10 ** g.uniform(2, 5)
        depth = g.uniform(0.2, 0.8)
        models.append(NotchModel(f_r=g.uniform(4e9, 8e9), q_l=q_l, q_ext_mag=q_l / depth,
                                 phi=g.uniform(-0.5, 0.5), amp=g.uniform(0.5, 2.0),
                                 phase0=g.uniform(-math.pi, math.pi), delay=g.uniform(0, 60e-9)))
    return models


CIRCLE_TRIALS = 100
CIRCLE_POINTS = 10001
CIRCLE_SPAN_LINEWIDTHS = 8.0


def circle_trials(n=CIRCLE_TRIALS, seed=0):
    noise_sigma = NoiseSpec.from_snr(SNR_DB).sigma
    rows = []
    for k, m in enumerate(random_notch_models(n, seed)):
        grid = notch_grid(m, CIRCLE_POINTS, CIRCLE_SPAN_LINEWIDTHS)
        trace = synth_notch(m, grid, NoiseSpec(seed=seed + k, sigma=noise_sigma))
        fit = circle_fit(trace)
        rows.append((m, fit))
    return rows


def check_circle_fit(seed=0):
    rows = circle_trials(seed=seed)
    f_err = np.array([abs(fit.f_r / m.f_r - 1) for m, fit in rows])
    names = ("q_l", "q_ext_mag", "q_int")
    q_err = np.array([[abs(getattr(fit, n) / getattr(m, n) - 1) for n in names]
                      for m, fit in rows])
    z = []
    for m, fit in rows:
        for n in ("f_r",) + names:
            z.append((getattr(fit, n) - getattr(m, n)) / fit.sigmas[n])
    cover = float(np.mean(np.abs(z) <= 1.959963984540054))
    missed = [m.q_l for (m, _), e in zip(rows, f_err) if e > 1e-6]
    detail = f"worst {f_err.max():.2e}; {len(missed)}/{len(rows)} trials above 1e-6"
    if missed:
        detail += f" (all at Q_L <= {max(missed):.0f})"
    return [
        Check(7, "f_r within 1e-6 relative", not missed, detail),
        Check(7, "Q_L, |Q_ext|, Q_int within 1%", bool(np.all(q_err <= 0.01)),
              "worst " + ", ".join(f"{n} {e:.2%}" for n, e in zip(names, q_err.max(axis=0)))),
        Check(7, "coverage of 95% intervals from 1-sigma", 0.88 <= cover <= 0.99,
              f"{cover:.1%} of {len(z)} intervals (f_r, Q_L, |Q_ext|, Q_int) in [88%, 99%]"),
    ]


def check_crossing(seed=0):
    c = reference.scalars()["crossing"]
    truth = CrossingModel(c["f1_hz"], c["slope_hz_per_v"], c["v_cross_v"], c["g_2pi_hz"], "half")
    v = np.linspace(c["v_cross_v"] - 1.0, c["v_cross_v"] + 1.0, 101)
    data = synth_crossing(truth, v, noise_hz=1e6, seed=seed)
    fit = fit_crossing(data, "half")
    g = fit.model.g_2pi
    e = _rel(g, c["g_2pi_hz"])
    out = [Check(8, "g/2pi round trip", e <= 0.02 and fit.converged,
                 f"g/2pi = {g / 1e6:.3f} +- {fit.sigmas['g_2pi'] / 1e6:.3f} MHz vs "
                 f"{c['g_2pi_hz'] / 1e6} MHz, err {e:.2%}, tol 2%")]
    d_min = min_splitting(truth, v[0], v[-1])
    e = abs(2 * g - d_min) / d_min
    out.append(Check(8, "min-detuning consistency", e < 0.015,
                     f"2 g/2pi = {2 * g / 1e6:.3f} MHz vs min Delta {d_min / 1e6:.3f} MHz, "
                     f"err {e:.2%} < 1.5%"))
    d = reference.scalars()["detuning"]
    m = detuning_metrics(*reference.detuning_table())
    hi, lo = round(m["on_off_high_side"], 2), round(m["on_off_low_side"], 2)
    out.append(Check(8, "on/off ratios from detuning table",
                     hi == d["on_off_high_side"] and lo == d["on_off_low_side"],
                     f"{m['on_off_high_side']:.4f} -> {hi} (ref {d['on_off_high_side']}), "
                     f"{m['on_off_low_side']:.4f} -> {lo} (ref {d['on_off_low_side']})"))
    return out


def _tr2_resonator(lk=None):
    row = next(r for r in reference.design_table() if r.name == "TR2")
    cpw = cpw_electricals(reference.chip_geometry(row.length), row.f0)
    if lk is None:
        lk = reference.scalars()["junction"]["lk_h"]
    return TunableResonator(cpw, lk_total=lk)


def check_tuning(seed=0):
    j = reference.scalars()["junction"]
    res = _tr2_resonator()
    lj = np.linspace(0.0, 3e-9, 301)
    f = frequency_sweep(res, lj)
    mono = bool(np.all(np.diff(f) < 0))
    out = [Check(9, "f_r strictly decreasing in L_J", mono,
                 f"{lj.size} points over L_J in [0, 3] nH, f_r {f[0] / 1e9:.4f} -> "
                 f"{f[-1] / 1e9:.4f} GHz")]
    back = np.array([lj_from_frequency(res, x) for x in f[1:]])
    err = float(np.max(np.abs(back / lj[1:] - 1)))
    out.append(Check(9, "L_J <-> f_r round trip", err <= 1e-9,
                     f"max rel err {err:.2e} <= 1e-9"))
    p = participation(j["lj_h"], j["l0_h"], j["lk_h"]) * 100
    out.append(Check(9, "participation ratio", abs(p - j["p_j"] * 100) <= 0.01,
                     f"p_J = {p:.4f}% vs {j['p_j'] * 100:.2f}% +- 0.01"))
    span = tuning_range(res, 1.3e-9)
    out.append(Check(9, "tuning range for L_J <= 1.3 nH", span >= j["tuning_range_hz"],
                     f"{span / 1e9:.3f} GHz >= {j['tuning_range_hz'] / 1e9:g} GHz"))
    return out


def check_position(seed=0):
    res = _tr2_resonator()
    spans = {pos: tuning_range(replace(res, junction_position=pos), 3e-9) for pos in (0.0, 0.5, 0.9)}
    ok = spans[0.0] >= spans[0.5] >= spans[0.9]
    return [Check(10, "tuning range bottom >= middle >= top", ok,
                  ", ".join(f"d={k:g}: {v / 1e9:.3f} GHz" for k, v in spans.items()))]


CRITERIA = {
    1: check_conformal,
    2: check_design_table,
    3: check_kinetic,
    4: check_universal_curve,
    5: check_pipeline,
    6: check_hysteresis,
    7: check_circle_fit,
    8: check_crossing,
    9: check_tuning,
    10: check_position,
}


def run(criteria=None, seed=0, echo=None):
    """Run the selected criteria (default all); returns the list of checks."""
    results = []
    for n in criteria or sorted(CRITERIA):
        t0 = time.perf_counter()
        checks = CRITERIA[n](seed)
        checks[-1].detail += f" [{time.perf_counter() - t0:.1f} s]"
        for c in checks:
            if echo:
                echo(c.line())
        results.extend(checks)
    return results


def summary(results):
    return {"passed": sum(c.passed for c in results), "failed": sum(not c.passed for c in results),
            "checks": [{"criterion": c.criterion, "name": c.name, "passed": c.passed,
                        "detail": c.detail} for c in results]}

