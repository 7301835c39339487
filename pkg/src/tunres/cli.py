"""Command-line entry point: ``tunres <subcommand> [options]``.

Exit status: 0 on success, 1 on invalid input, 2 when a fit does not
converge (or, for ``repro``, when an acceptance check fails).
"""

from __future__ import annotations

import argparse
import io as _stdio
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import acceptance, reference
from . import io as tio
from ._validation import DomainError, SolverError
from .coupling import CrossingModel, detuning_metrics, fit_crossing
from .duffing import (DuffingParams, ExtractionError, bifurcation_locus_oracle, extract_pc,
                      universal_curve)
from .em_model import (CpwGeometry, cpw_electricals, fit_tc, kinetic_fraction, lk_decompose,
                       quarter_wave_f0)
from .fitcore import FitError
from .junction import TunableResonator, frequency_sweep, participation, tuning_range
from .spectro import circle_fit
from .synth import NoiseSpec, synth_crossing, synth_duffing_stack
from .units import snr_db_to_sigma

EXIT_OK, EXIT_INPUT, EXIT_FIT = 0, 1, 2
EQ2_EXPONENTS = {"3/2": 1.5, "2/3": 2.0 / 3.0}
CROSSING_MODES = {"half": "half", "quarter": "quarter"}


def _load_config(path):
    if path is None:
        return {}
    with open(path) as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise ValueError(f"{path}: config must be a JSON object")
    return cfg


class Output:
    """Send each artifact to ``--out/<name>`` or, without ``--out``, to stdout."""

    def __init__(self, out_dir, stream=None):
        self.dir = Path(out_dir) if out_dir else None
        self.stream = stream or sys.stdout
        if self.dir:
            self.dir.mkdir(parents=True, exist_ok=True)

    def text(self, name, content):
        if self.dir:
            (self.dir / name).write_text(content)
        else:
            self.stream.write(content)

    def json(self, name, record):
        self.text(name, tio.dumps(record))

    def table(self, name, columns, rows):
        buf = _stdio.StringIO()
        buf.write(",".join(columns) + "\n")
        for row in rows:
            buf.write(",".join(v if isinstance(v, str) else repr(float(v)) for v in row) + "\n")
        self.text(name, buf.getvalue())


def _geometry(cfg, length):
    g = reference.scalars()["geometry"]
    g = {**g, **cfg.get("geometry", {})}
    return CpwGeometry(g["center_width_m"], g["gap_m"], length, g["substrate_eps_r"],
                       g.get("substrate_thickness_m"))


def cmd_cpw(args, cfg, out):
    rows = cfg.get("resonators")
    if rows is None:
        rows = [{"name": r.name, "length_m": r.length, "f0_hz": r.f0}
                for r in reference.design_table()]
    table = []
    for r in rows:
        geom = _geometry(cfg, float(r["length_m"]))
        f0 = float(r.get("f0_hz") or quarter_wave_f0(geom))
        e = cpw_electricals(geom, f0)
        table.append((str(r["name"]), geom.length, e.z0, e.eps_eff, f0, quarter_wave_f0(geom),
                      e.c0, e.l0))
    out.table("cpw.csv", ("resonator", "length_m", "z0_ohm", "eps_eff", "f0_hz",
                          "f0_quarter_wave_hz", "c0_f", "l0_h"), table)
    return EXIT_OK


def cmd_kinetic(args, cfg, out):
    k = {**reference.scalars()["kinetic"], **cfg.get("kinetic", {})}
    f_meas = args.f_meas if args.f_meas is not None else k["f_meas_hz"]
    f_design = args.f_design if args.f_design is not None else k["f_design_hz"]
    alpha = kinetic_fraction(f_meas, f_design)
    alpha_fit = args.alpha_k if args.alpha_k is not None else alpha
    rec = {"alpha_k": alpha, "f_meas_hz": f_meas, "f_design_hz": f_design}
    length = cfg.get("length_m")
    if length is None:
        length = next(r.length for r in reference.design_table() if r.name == "R3")
    geom = _geometry(cfg, float(length))
    film = lk_decompose(alpha_fit, cpw_electricals(geom, f_design), geom)
    rec.update(lk_total_h=film.lk_total, lk_per_square_h=film.lk_per_square)
    status = EXIT_OK
    if args.tsweep:
        t, y = tio.read_tsweep(args.tsweep)
        fit = fit_tc(t, y, alpha_fit)
        rec["fit"] = {**fit.to_record(), "alpha_k": alpha_fit, "converged": fit.converged}
        if not fit.converged:
            status = EXIT_FIT
    out.json("kinetic.json", rec)
    return status


def _tunable(cfg, args):
    name = cfg.get("resonator", "TR2")
    row = next((r for r in reference.design_table() if r.name == name), None)
    length = float(cfg.get("length_m", row.length if row else np.nan))
    f0 = float(cfg.get("f0_hz", row.f0 if row else np.nan))
    cpw = cpw_electricals(_geometry(cfg, length), f0)
    lk = float(cfg.get("lk_h", reference.scalars()["junction"]["lk_h"]))
    pos = float(cfg.get("junction_position", getattr(args, "position", 0.0) or 0.0))
    return TunableResonator(cpw, lk_total=lk, junction_position=pos)


def cmd_tune(args, cfg, out):
    res = _tunable(cfg, args)
    lj_nh = np.linspace(args.lj_min, args.lj_max, args.points)
    f = frequency_sweep(res, lj_nh * 1e-9)
    p = participation(lj_nh * 1e-9, res.cpw.l0, res.lk_total)
    out.table("tune.csv", ("lj_nh", "f_r_ghz", "p_j"), zip(lj_nh, f / 1e9, p))
    return EXIT_OK


def cmd_position(args, cfg, out):
    res = _tunable(cfg, args)
    lj = np.linspace(0.0, args.lj_max * 1e-9, args.points)
    rows = []
    for pos in args.positions:
        r = replace(res, junction_position=pos)
        for a, b in zip(lj, frequency_sweep(r, lj)):
            rows.append((pos, a * 1e9, b / 1e9))
    out.table("position.csv", ("junction_position", "lj_nh", "f_r_ghz"), rows)
    summary = {str(pos): tuning_range(replace(res, junction_position=pos), lj[-1])
               for pos in args.positions}
    if out.dir:
        out.json("position_summary.json", {"tuning_range_hz": summary, "lj_max_h": lj[-1]})
    return EXIT_OK


def cmd_circlefit(args, cfg, out):
    fit = circle_fit(tio.read_trace(args.trace), refine=not args.no_refine)
    out.json("circlefit.json", fit.to_record())
    return EXIT_OK if fit.converged else EXIT_FIT


def _duffing_params(args, cfg):
    d = cfg.get("duffing", {})
    if args.row is not None:
        row = next((r for r in reference.bifurcation_table() if r.gate_v == args.row), None)
        if row is None:
            raise DomainError(f"no reference row at gate voltage {args.row} V")
        d = {"f_r_hz": row.f_r, "q_l": row.q_l, "p_c_dbm": row.p_c_dbm, **d}
    for key, attr in (("f_r_hz", "f_r"), ("q_l", "q_l"), ("p_c_dbm", "p_c")):
        if getattr(args, attr, None) is not None:
            d[key] = getattr(args, attr)
    missing = [k for k in ("f_r_hz", "q_l") if k not in d]
    if missing:
        raise DomainError(f"missing Duffing parameter(s): {', '.join(missing)}")
    return DuffingParams(float(d["f_r_hz"]), float(d["q_l"]), float(d.get("p_c_dbm", 0.0)),
                         d.get("q_ext_mag"), float(d.get("phi", 0.0)), float(d.get("amp", 1.0)))


def cmd_duffing(args, cfg, out):
    exponent = EQ2_EXPONENTS[args.eq2_exponent]
    if args.action == "curve":
        if args.omega is None:
            raise DomainError("--omega is required")
        w = args.omega
        if w >= np.sqrt(3.0):
            lo, hi = universal_curve(w, "above", exponent)
            rec = {"omega": w, "p_rel_lower": lo, "p_rel_upper": hi}
            if w > np.sqrt(3.0) and exponent == 1.5:
                rec["oracle"] = list(bifurcation_locus_oracle(w))
            text = f"{lo:.4f} {hi:.4f}\n"
        else:
            p = universal_curve(w, "below")
            rec = {"omega": w, "p_rel": p}
            text = f"{p:.4f}\n"
        if out.dir:
            out.json("curve.json", rec)
        else:
            out.text("", text)
        return EXIT_OK
    params = _duffing_params(args, cfg)
    if args.action == "synth":
        noise = NoiseSpec(seed=args.seed, sigma=float(snr_db_to_sigma(args.snr_db))
                          if args.snr_db is not None else 0.0)
        stack = synth_duffing_stack(params, noise=noise)
        out.text("stack.csv", tio.format_stack(stack))
        return EXIT_OK
    if args.stack is None:
        raise DomainError("duffing extract needs a stack path")
    stack = tio.read_stack(args.stack)
    ex = extract_pc(stack.powers_dbm, stack.freqs, stack.mags)
    out.json("extraction.json", ex.to_record(params))
    return EXIT_OK


def cmd_crossing(args, cfg, out):
    mode = CROSSING_MODES[args.crossing_coefficient]
    if args.action == "fit":
        if args.data is None:
            raise DomainError("crossing fit needs a CSV path")
        data = tio.read_crossing(args.data)
        fit = fit_crossing(data, mode)
        rec = fit.to_record()
        rec["detuning"] = {k: v for k, v in detuning_metrics(data.gate_v, data.f_plus,
                                                             data.f_minus).items()}
        out.json("crossing.json", rec)
        return EXIT_OK if fit.converged else EXIT_FIT
    c = {**reference.scalars()["crossing"], **cfg.get("crossing", {})}
    model = CrossingModel(c["f1_hz"], c["slope_hz_per_v"], c["v_cross_v"], c["g_2pi_hz"], mode)
    v = np.linspace(model.v_cross - args.v_half_span, model.v_cross + args.v_half_span,
                    args.points)
    data = synth_crossing(model, v, noise_hz=args.noise_hz, seed=args.seed)
    out.table("crossing.csv", tio.CROSSING_COLUMNS,
              zip(data.gate_v, data.f_plus, data.f_minus))
    return EXIT_OK


def cmd_repro(args, cfg, out):
    lines = []
    results = acceptance.run(args.criteria, seed=args.seed, echo=lines.append)
    text = "\n".join(lines) + "\n"
    s = acceptance.summary(results)
    text += f"{s['passed']} passed, {s['failed']} failed\n"
    if out.dir:
        out.json("repro.json", s)
    out.stream.write(text)
    return EXIT_OK if s["failed"] == 0 else EXIT_FIT


def _common():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="JSON file with model parameter overrides")
    p.add_argument("--out", help="output directory (default: stdout)")
    p.add_argument("--seed", type=int, default=0, help="PRNG seed (default 0)")
    p.add_argument("--eq2-exponent", choices=sorted(EQ2_EXPONENTS), default="3/2",
                   help="exponent of the square-root term above P_C")
    p.add_argument("--crossing-coefficient", choices=sorted(CROSSING_MODES), default="half",
                   help="coefficient on (f1-f2)^2 in the branch splitting")
    return p


def build_parser():
    common = _common()
    parser = argparse.ArgumentParser(prog="tunres", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("cpw", parents=[common], help="CPW design electricals table")

    p = sub.add_parser("kinetic", parents=[common], help="kinetic fraction, L_K and T_C fit")
    p.add_argument("--f-meas", type=float, help="measured frequency [Hz]")
    p.add_argument("--f-design", type=float, help="geometric design frequency [Hz]")
    p.add_argument("--alpha-k", type=float, help="fraction held fixed in the T_C fit")
    p.add_argument("--tsweep", help="CSV temperature_k,delta_f_over_f")

    p = sub.add_parser("tune", parents=[common], help="L_J -> f_r sweep")
    p.add_argument("--lj-min", type=float, default=0.0, help="nH")
    p.add_argument("--lj-max", type=float, default=3.0, help="nH")
    p.add_argument("--points", type=int, default=61)
    p.add_argument("--position", type=float, default=0.0)

    p = sub.add_parser("position", parents=[common], help="junction placement comparison")
    p.add_argument("--lj-max", type=float, default=3.0, help="nH")
    p.add_argument("--points", type=int, default=31)
    p.add_argument("--positions", type=float, nargs="+", default=[0.0, 0.5, 0.9])

    p = sub.add_parser("circlefit", parents=[common], help="notch circle fit of one trace")
    p.add_argument("trace", help="CSV freq_hz,s21_re,s21_im")
    p.add_argument("--no-refine", action="store_true")

    p = sub.add_parser("duffing", parents=[common], help="Duffing synth / extract / curve")
    p.add_argument("action", choices=("synth", "extract", "curve"))
    p.add_argument("stack", nargs="?", help="stack CSV or directory (extract)")
    p.add_argument("--omega", type=float)
    p.add_argument("--row", type=float, help="reference row by gate voltage [V]")
    p.add_argument("--f-r", type=float, help="Hz")
    p.add_argument("--q-l", type=float)
    p.add_argument("--p-c", type=float, help="dBm")
    p.add_argument("--snr-db", type=float, default=None)

    p = sub.add_parser("crossing", parents=[common], help="avoided-crossing fit / synth")
    p.add_argument("action", choices=("fit", "synth"))
    p.add_argument("data", nargs="?", help="CSV gate_v,f_plus_hz,f_minus_hz (fit)")
    p.add_argument("--noise-hz", type=float, default=0.0)
    p.add_argument("--points", type=int, default=101)
    p.add_argument("--v-half-span", type=float, default=1.0)

    p = sub.add_parser("repro", parents=[common], help="run the acceptance checks")
    p.add_argument("--criteria", type=int, nargs="+", choices=sorted(acceptance.CRITERIA))
    return parser


COMMANDS = {"cpw": cmd_cpw, "kinetic": cmd_kinetic, "tune": cmd_tune, "position": cmd_position,
            "circlefit": cmd_circlefit, "duffing": cmd_duffing, "crossing": cmd_crossing,
            "repro": cmd_repro}


def main(argv=None, stdout=None, stderr=None):
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args.config)
        return COMMANDS[args.command](args, cfg, Output(args.out, stdout))
    except (FitError, SolverError, ExtractionError) as exc:
        stderr.write(f"tunres: fit failed: {exc}\n")
        return EXIT_FIT
    except (ValueError, OSError, KeyError) as exc:
        stderr.write(f"tunres: {exc}\n")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
