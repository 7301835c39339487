import csv
import hashlib
import io
import json
import shutil

import numpy as np
import pytest

from tunres import reference
from tunres import io as tio
from tunres.cli import main
from tunres.spectro import NotchModel
from tunres.synth import NoiseSpec, notch_grid, synth_notch


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(list(argv), stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def test_cpw_matches_design_table():
    code, out, _ = run("cpw")
    assert code == 0
    table = {r.name: r for r in reference.design_table()}
    for row in rows(out):
        ref = table[row["resonator"]]
        assert float(row["c0_f"]) == pytest.approx(ref.c0, rel=0.01)
        assert float(row["l0_h"]) == pytest.approx(ref.l0, rel=0.01)


def test_kinetic_defaults():
    code, out, _ = run("kinetic")
    rec = json.loads(out)
    assert code == 0
    assert rec["alpha_k"] == pytest.approx(0.08648, abs=1e-5)
    assert rec["lk_per_square_h"] == pytest.approx(1.012e-12, rel=0.1)


def test_kinetic_with_sweep(tmp_path):
    from tunres.em_model import relative_shift
    from tunres.synth import synth_tsweep
    t, f = synth_tsweep(1.244, 0.0867, np.linspace(0.05, 1.1, 30))
    tio.write_table(tmp_path / "t.csv", tio.TSWEEP_COLUMNS,
                    {"temperature_k": t, "delta_f_over_f": relative_shift(t, f)})
    code, out, _ = run("kinetic", "--tsweep", str(tmp_path / "t.csv"), "--alpha-k", "0.0867")
    assert code == 0
    assert json.loads(out)["fit"]["tc_k"] == pytest.approx(1.244, rel=1e-6)


def test_tune_and_position():
    code, out, _ = run("tune", "--lj-max", "1.3", "--points", "14")
    assert code == 0
    f = [float(r["f_r_ghz"]) for r in rows(out)]
    assert np.all(np.diff(f) < 0) and f[0] - f[-1] >= 2.0
    code, out, _ = run("position", "--points", "5")
    assert code == 0
    assert {r["junction_position"] for r in rows(out)} == {"0.0", "0.5", "0.9"}


def test_position_summary(tmp_path):
    code, _, _ = run("position", "--out", str(tmp_path))
    summary = json.loads((tmp_path / "position_summary.json").read_text())
    r = summary["tuning_range_hz"]
    assert code == 0 and r["0.0"] >= r["0.5"] >= r["0.9"]


def test_circlefit(tmp_path):
    m = NotchModel(6.114e9, 473, 700, 0.1)
    tio.write_trace(tmp_path / "t.csv", synth_notch(m, notch_grid(m, n=2001),
                                                   NoiseSpec.from_snr(40, seed=1)))
    code, out, _ = run("circlefit", str(tmp_path / "t.csv"))
    assert code == 0
    assert json.loads(out)["q_l"] == pytest.approx(473, rel=0.01)


def test_duffing_curve_prints_oracle_values():
    assert run("duffing", "curve", "--omega", "2") == (0, "1.2028 1.2990\n", "")
    code, out, _ = run("duffing", "curve", "--omega", "2", "--eq2-exponent", "2/3")
    assert code == 0 and out != "1.2028 1.2990\n"
    assert run("duffing", "curve", "--omega", "1")[1] == "0.3660\n"


def test_duffing_synth_extract_round_trip(tmp_path):
    code, _, _ = run("duffing", "synth", "--row", "-4", "--snr-db", "40", "--out", str(tmp_path))
    assert code == 0
    code, out, _ = run("duffing", "extract", str(tmp_path / "stack.csv"), "--row", "-4")
    rec = json.loads(out)
    assert code == 0 and rec["bifurcation"]
    assert rec["p_c_dbm"] == pytest.approx(-65.6, abs=0.5)


def test_crossing_synth_fit(tmp_path):
    code, _, _ = run("crossing", "synth", "--noise-hz", "1e6", "--out", str(tmp_path))
    assert code == 0
    code, out, _ = run("crossing", "fit", str(tmp_path / "crossing.csv"))
    rec = json.loads(out)
    assert code == 0 and rec["g_2pi_hz"] == pytest.approx(51.203e6, rel=0.02)
    _, out_q, _ = run("crossing", "fit", str(tmp_path / "crossing.csv"),
                      "--crossing-coefficient", "quarter")
    assert json.loads(out_q)["coefficient_mode"] == "quarter"


def test_repro_subset_passes():
    code, out, _ = run("repro", "--criteria", "1", "4")
    assert code == 0
    assert "0 failed" in out and "[FAIL]" not in out


def test_repro_reports_failed_criterion():
    code, out, _ = run("repro", "--criteria", "3")
    assert code == 2
    assert "[FAIL] 3." in out


def test_malformed_csv_exit_1(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("freq_hz,s21_re,s21_im\n1,2,3\n4,oops,6\n")
    code, _, err = run("circlefit", str(p))
    assert code == 1
    assert f"{p}:3:" in err


def test_missing_file_and_bad_params_exit_1(tmp_path):
    assert run("circlefit", str(tmp_path / "none.csv"))[0] == 1
    assert run("duffing", "synth", "--row", "99")[0] == 1
    assert run("duffing", "curve")[0] == 1


def test_no_resonance_is_a_fit_failure(tmp_path):
    f = np.linspace(6e9, 6.1e9, 501)
    z = 1.0 + NoiseSpec(seed=0, sigma=0.01).complex_noise(f.size)
    tio.write_table(tmp_path / "flat.csv", tio.TRACE_COLUMNS,
                    {"freq_hz": f, "s21_re": z.real, "s21_im": z.imag})
    code, _, err = run("circlefit", str(tmp_path / "flat.csv"))
    assert code == 2 and "no resonance" in err


def test_unknown_flag_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        run("cpw", "--bogus")
    assert exc.value.code == 2


@pytest.mark.parametrize("argv", [
    ("cpw",), ("tune",), ("duffing", "synth", "--row", "0", "--snr-db", "40", "--seed", "7"),
    ("crossing", "synth", "--noise-hz", "1e6", "--seed", "3")])
def test_byte_identical_outputs(tmp_path, argv):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(*argv, "--out", str(a))[0] == 0
    assert run(*argv, "--out", str(b))[0] == 0
    names = sorted(p.name for p in a.iterdir())
    assert names and names == sorted(p.name for p in b.iterdir())
    for n in names:
        assert (a / n).read_bytes() == (b / n).read_bytes()


def test_inputs_not_mutated(tmp_path):
    run("crossing", "synth", "--noise-hz", "1e6", "--out", str(tmp_path))
    src = tmp_path / "crossing.csv"
    before = digest(src)
    run("crossing", "fit", str(src), "--out", str(tmp_path / "fit"))
    assert digest(src) == before


def test_fixture_override(tmp_path, monkeypatch):
    shutil.copytree(reference.fixtures_dir(), tmp_path / "fx")
    scalars = json.loads((tmp_path / "fx" / "scalars.json").read_text())
    scalars["crossing"]["g_2pi_hz"] = 30e6
    (tmp_path / "fx" / "scalars.json").write_text(json.dumps(scalars))
    monkeypatch.setenv("TUNRES_FIXTURES", str(tmp_path / "fx"))
    run("crossing", "synth", "--out", str(tmp_path / "o"))
    d = tio.read_crossing(tmp_path / "o" / "crossing.csv")
    assert (d.f_plus - d.f_minus).min() == pytest.approx(60e6, rel=1e-3)


def test_config_override(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"resonators": [{"name": "X", "length_m": 4e-3}]}))
    code, out, _ = run("cpw", "--config", str(cfg))
    assert code == 0
    (row,) = rows(out)
    assert row["resonator"] == "X"
    cfg.write_text("[1, 2]")
    assert run("cpw", "--config", str(cfg))[0] == 1
