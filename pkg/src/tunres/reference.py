"""Loaders for the bundled reference tables.

Set ``TUNRES_FIXTURES`` to a directory to use a different copy.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass
from pathlib import Path

from .em_model import CpwGeometry

ENV_VAR = "TUNRES_FIXTURES"


def fixtures_dir() -> Path:
    override = os.environ.get(ENV_VAR)
    if override:
        path = Path(override)
        if not path.is_dir():
            raise FileNotFoundError(f"{ENV_VAR}={override} is not a directory")
        return path
    return Path(__file__).with_name("fixtures")


def _rows(name):
    with (fixtures_dir() / name).open(newline="") as fh:
        lines = [ln for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    return list(csv.DictReader(lines))


def scalars() -> dict:
    with (fixtures_dir() / "scalars.json").open() as fh:
        return json.load(fh)


@dataclass(frozen=True)
class DesignRow:
    name: str
    length: float
    f0: float
    q_ext: float
    c0: float
    l0: float
    has_junction: bool


def design_table():
    return [DesignRow(r["resonator"], float(r["length_mm"]) * 1e-3, float(r["f0_ghz"]) * 1e9,
                      float(r["q_ext"]), float(r["c0_pf"]) * 1e-12, float(r["l0_nh"]) * 1e-9,
                      r["has_junction"] == "1")
            for r in _rows("design_table.csv")]


@dataclass(frozen=True)
class BifurcationRow:
    gate_v: float
    f_r: float
    q_l: float
    q_l_sigma: float
    p_c_dbm: float


def bifurcation_table():
    return [BifurcationRow(float(r["gate_v"]), float(r["f_r_ghz"]) * 1e9, float(r["q_l"]),
                           float(r["q_l_sigma"]), float(r["p_c_dbm"]))
            for r in _rows("bifurcation_table.csv")]


def detuning_table():
    rows = _rows("detuning_scalars.csv")
    return ([float(r["gate_v"]) for r in rows], [float(r["f_plus_hz"]) for r in rows],
            [float(r["f_minus_hz"]) for r in rows])


def chip_geometry(length, finite_substrate=True) -> CpwGeometry:
    g = scalars()["geometry"]
    return CpwGeometry(g["center_width_m"], g["gap_m"], length, g["substrate_eps_r"],
                       g["substrate_thickness_m"] if finite_substrate else None)
