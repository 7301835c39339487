import numpy as np
import pytest
from hypothesis import given, strategies as st
from sklearn.base import clone

from tunres._validation import DomainError
from tunres.coupling import (CrossingData, CrossingEstimator, CrossingModel, branch_frequencies,
                             detuning_metrics, fit_crossing, min_splitting, on_off_ratio,
                             with_mode)
from tunres.synth import synth_crossing

REF = CrossingModel(f1=5.427e9, slope=0.628e9, v_cross=-13.5, g_2pi=51.203e6)
GRID = np.linspace(REF.v_cross - 1, REF.v_cross + 1, 101)

models = st.builds(CrossingModel, st.floats(1e9, 1e10), st.floats(-2e9, 2e9).filter(
    lambda s: abs(s) > 1e6), st.floats(-20, 20),
    # couplings below ~1 Hz vanish in rounding next to GHz frequencies
    st.just(0.0) | st.floats(1.0, 2e8),
    st.sampled_from(["half", "quarter"]))


def test_degenerate_point_splitting():
    fp, fm = branch_frequencies(REF, REF.v_cross)
    assert fp - fm == pytest.approx(2 * REF.g_2pi, rel=1e-9)
    m = CrossingModel(5.4e9, 0.6e9, 0.0, 51.765e6)
    assert min_splitting(m, -1, 1) == pytest.approx(103.53e6, rel=1e-6)


def test_uncoupled_limit():
    m = CrossingModel(5e9, 1e9, 0.0, 0.0, "quarter")
    v = np.linspace(-1, 1, 11)
    fp, fm = branch_frequencies(m, v)
    np.testing.assert_allclose(fp, np.maximum(5e9, m.f2(v)), rtol=1e-15)
    np.testing.assert_allclose(fm, np.minimum(5e9, m.f2(v)), rtol=1e-15)


@given(models, st.floats(-30, 30))
def test_branch_invariants(model, v):
    fp, fm = branch_frequencies(model, v)
    assert fp >= fm
    if model.g_2pi > 0:
        assert fp > fm
    assert fp + fm == pytest.approx(model.f1 + float(model.f2(v)), rel=1e-14)


@pytest.mark.parametrize("mode,factor", [("half", np.sqrt(2.0)), ("quarter", 1.0)])
def test_far_detuned_asymptote(mode, factor):
    m = CrossingModel(5e9, 1e9, 0.0, 50e6, mode)
    fp, fm = branch_frequencies(m, 1e3)
    assert (fp - fm) / abs(m.f1 - m.f2(1e3)) == pytest.approx(factor, rel=1e-8)


def test_model_validation():
    with pytest.raises(DomainError):
        CrossingModel(5e9, 1e9, 0.0, -1.0)
    with pytest.raises(DomainError):
        CrossingModel(5e9, 1e9, 0.0, 1.0, "third")
    assert with_mode(REF, "quarter").kappa == 0.25


def test_data_rows_sorted():
    d = CrossingData([0, 1], [1.0, 5.0], [2.0, 3.0])
    np.testing.assert_array_equal(d.f_plus, [2.0, 5.0])
    np.testing.assert_array_equal(d.f_minus, [1.0, 3.0])
    with pytest.raises(ValueError):
        CrossingData([0, 1], [1.0], [2.0, 3.0])


@pytest.mark.parametrize("mode", ["half", "quarter"])
def test_noiseless_exact_recovery(mode):
    m = with_mode(REF, mode)
    fit = fit_crossing(synth_crossing(m, GRID), mode)
    assert fit.converged
    assert fit.model.g_2pi == pytest.approx(m.g_2pi, rel=1e-8)
    assert fit.model.f1 == pytest.approx(m.f1, rel=1e-12)
    assert fit.model.slope == pytest.approx(m.slope, rel=1e-8)
    assert fit.model.v_cross == pytest.approx(m.v_cross, abs=1e-8)


def test_round_trip_with_noise():
    fit = fit_crossing(synth_crossing(REF, GRID, noise_hz=1e6, seed=0))
    assert fit.model.g_2pi == pytest.approx(REF.g_2pi, rel=0.02)
    assert 0 < fit.sigmas["g_2pi"] < 1e6
    rec = fit.to_record()
    assert rec["coefficient_mode"] == "half" and len(rec["residuals_hz"]) == 2 * GRID.size


@given(st.floats(-50, 50))
def test_translation_invariance(shift):
    data = synth_crossing(REF, GRID, noise_hz=1e6, seed=4)
    base = fit_crossing(data)
    moved = fit_crossing(CrossingData(data.gate_v + shift, data.f_plus, data.f_minus))
    assert moved.model.g_2pi == pytest.approx(base.model.g_2pi, rel=1e-6)
    assert moved.model.v_cross == pytest.approx(base.model.v_cross + shift, abs=1e-6)


def test_one_sided_data_warns():
    v = np.linspace(REF.v_cross + 0.5, REF.v_cross + 1.5, 40)
    with pytest.warns(UserWarning, match="one side"):
        fit = fit_crossing(synth_crossing(REF, v, noise_hz=1e6, seed=1))
    assert fit.warnings


def test_too_few_rows():
    with pytest.raises(DomainError):
        fit_crossing(CrossingData([0, 1, 2], [3, 4, 5], [1, 1, 1]))


def test_on_off_ratios():
    assert round(on_off_ratio(669e6, 79e6), 2) == 8.47
    assert round(on_off_ratio(1285e6, 79e6), 2) == 16.27
    with pytest.raises(DomainError):
        on_off_ratio(1.0, 0.0)


def test_detuning_metrics_symmetric_table():
    m = CrossingModel(5e9, 1e9, 0.0, 40e6)
    v = np.linspace(-2, 2, 41)
    fp, fm = branch_frequencies(m, v)
    out = detuning_metrics(v, fp, fm)
    assert out["v_min"] == pytest.approx(0.0, abs=1e-12)
    assert out["min_delta"] == pytest.approx(80e6)
    assert out["on_off_low_side"] == pytest.approx(out["on_off_high_side"], rel=1e-12)


def test_detuning_metrics_reference_gate():
    v = np.array([-2.0, -1.0, 0.0, 1.0])
    out = detuning_metrics(v, [10.0, 7.0, 5.0, 9.0], [0.0, 1.0, 4.0, 1.0], v_ref=-1.0)
    assert out["min_delta"] == 1.0
    assert out["on_off_low_side"] == 6.0
    assert out["on_off_high_side"] == 8.0


def test_estimator():
    data = synth_crossing(REF, GRID)
    y = np.column_stack([data.f_minus, data.f_plus])  # order within rows is irrelevant
    est = CrossingEstimator().fit(GRID, y)
    assert est.g_2pi_ == pytest.approx(REF.g_2pi, rel=1e-8)
    assert est.predict(GRID).shape == (GRID.size, 2)
    assert est.score(GRID, y) > 0.999999
    assert clone(est).get_params() == {"coefficient_mode": "half"}
    with pytest.raises(ValueError):
        est.fit(GRID, data.f_plus)
