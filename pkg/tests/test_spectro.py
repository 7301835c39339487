import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tunres.spectro import (ComplexTrace, InconsistentFitError, NoResonanceError, NotchModel,
                            NotchResonanceFitter, circle_fit, fit_circle, notch_s21,
                            photon_number, photon_number_watt)
from tunres.synth import NoiseSpec, notch_grid, synth_notch

REF = NotchModel(f_r=6.114e9, q_l=473, q_ext_mag=700, phi=0.1, amp=0.8, phase0=0.4, delay=30e-9)


def test_baseline_far_off_resonance():
    m = NotchModel(6e9, 500, 700)
    assert abs(notch_s21(m, 6e9 * 1.5)) == pytest.approx(1.0, abs=1e-3)


def test_on_resonance_depth():
    m = NotchModel(6.114e9, 473, 700)
    assert notch_s21(m, 6.114e9) == pytest.approx(1 - 473 / 700)
    assert abs(notch_s21(m, 6.114e9)) == pytest.approx(0.324, abs=1e-3)


@given(st.floats(100, 1e5), st.floats(1.1, 10), st.floats(-1.0, 1.0))
def test_notch_traces_a_circle(q_l, ratio, phi):
    m = NotchModel(5e9, q_l, q_l * ratio, phi, 1.0, 0.0, 0.0)
    z = notch_s21(m, notch_grid(m, n=301))
    c, r = fit_circle(z)
    assert np.max(np.abs(np.abs(z - c) - r)) < 1e-10 * r
    assert 2 * r == pytest.approx(m.diameter, rel=1e-9)


def test_model_identities():
    m = NotchModel(6e9, 350, 700, 0.0)
    assert m.q_int == pytest.approx(700)
    with pytest.raises(Exception):
        NotchModel(6e9, 800, 700, 0.0)


def test_round_trip_at_40db():
    trace = synth_notch(REF, notch_grid(REF), NoiseSpec.from_snr(40, seed=3))
    fit = circle_fit(trace)
    assert fit.f_r == pytest.approx(REF.f_r, rel=0.01)
    assert fit.q_l == pytest.approx(REF.q_l, rel=0.01)
    assert fit.q_ext_mag == pytest.approx(REF.q_ext_mag, rel=0.01)
    assert fit.q_int == pytest.approx(REF.q_int, rel=0.01)
    assert fit.phi == pytest.approx(REF.phi, abs=0.01)
    assert fit.converged
    assert all(np.isfinite(v) and v > 0 for v in fit.sigmas.values())


def test_noiseless_round_trip():
    trace = synth_notch(REF, notch_grid(REF, n=2001))
    fit = circle_fit(trace)
    for name in ("f_r", "q_l", "q_ext_mag", "amp", "delay"):
        assert getattr(fit, name) == pytest.approx(getattr(REF, name), rel=1e-6)
    assert fit.residual_rms < 1e-8
    assert 1 / fit.q_int + math.cos(fit.phi) / fit.q_ext_mag == pytest.approx(1 / fit.q_l,
                                                                               rel=1e-12)


@settings(max_examples=20)
@given(st.floats(-math.pi, math.pi), st.floats(0.01, 100.0))
def test_invariant_under_rotation_and_scaling(angle, scale):
    trace = synth_notch(REF, notch_grid(REF, n=1001), NoiseSpec.from_snr(50, seed=1))
    base = circle_fit(trace)
    moved = circle_fit(ComplexTrace(trace.freq, trace.s21 * scale * np.exp(1j * angle)))
    for name in ("f_r", "q_l", "q_int"):
        assert getattr(moved, name) == pytest.approx(getattr(base, name), rel=1e-6)
    assert moved.amp == pytest.approx(base.amp * scale, rel=1e-6)


def test_no_resonance_on_pure_noise():
    f = np.linspace(6e9, 6.1e9, 1001)
    z = 1.0 + NoiseSpec(seed=0, sigma=0.01).complex_noise(f.size)
    with pytest.raises(NoResonanceError):
        circle_fit(ComplexTrace(f, z))


def test_inconsistent_error_is_a_fit_error():
    from tunres.fitcore import FitError
    assert issubclass(InconsistentFitError, FitError)
    assert issubclass(NoResonanceError, FitError)


def test_short_span_warns_and_fixes_delay():
    m = NotchModel(6e9, 500, 700)
    with pytest.warns(UserWarning, match="delay fixed"):
        fit = circle_fit(synth_notch(m, notch_grid(m, n=501, span_linewidths=2.5)))
    assert fit.f_r == pytest.approx(6e9, rel=1e-6)


def test_trace_validation():
    with pytest.raises(ValueError):
        ComplexTrace(np.linspace(1, 2, 5), np.ones(5))
    with pytest.raises(ValueError):
        ComplexTrace(np.linspace(2, 1, 100), np.ones(100))


def test_photon_number():
    m = NotchModel(6.204e9, 2000, 7830)
    assert photon_number_watt(0.0, m) == 0.0
    assert photon_number_watt(2e-12, m) == pytest.approx(2 * photon_number_watt(1e-12, m))
    # direct evaluation anchor
    assert photon_number(-96.0, m) == pytest.approx(1601.58041, rel=1e-8)


def test_estimator():
    f = notch_grid(REF, n=2001)
    est = NotchResonanceFitter().fit(f, notch_s21(REF, f))
    assert est.f_r_ == pytest.approx(REF.f_r, rel=1e-9)
    np.testing.assert_allclose(est.predict(f), notch_s21(REF, f), atol=1e-8)
    assert NotchResonanceFitter(refine=False).get_params() == {"refine": False}
