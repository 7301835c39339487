"""CSV and JSON readers/writers for traces, stacks, sweeps and fit records.

CSV files may start with ``# key=value`` lines; other ``#`` lines are
comments. Frequencies are always in Hz.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .coupling import CrossingData
from .spectro import ComplexTrace
from .synth import TraceStack

TRACE_COLUMNS = ("freq_hz", "s21_re", "s21_im")
STACK_COLUMNS = ("power_dbm",) + TRACE_COLUMNS
TSWEEP_COLUMNS = ("temperature_k", "delta_f_over_f")
CROSSING_COLUMNS = ("gate_v", "f_plus_hz", "f_minus_hz")
TUNE_COLUMNS = ("lj_nh", "f_r_ghz", "p_j")
META_KEYS = ("power_dbm", "gate_v", "temp_k")


class CsvFormatError(ValueError):
    def __init__(self, path, line, message):
        super().__init__(f"{path}:{line}: {message}")
        self.path = path
        self.line = line


def _parse_value(text):
    try:
        return float(text)
    except ValueError:
        return text.strip()


def read_table(path, columns):
    """Read a headed CSV, returning ({column: float array}, {meta key: value}).

    Columns beyond ``columns`` are ignored; missing ones, wrong field counts
    and non-numeric cells raise :class:`CsvFormatError` with the line number.
    """
    path = Path(path)
    meta = {}
    header = None
    rows = []
    with path.open(newline="") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body and header is None:
                    key, _, value = body.partition("=")
                    meta[key.strip()] = _parse_value(value)
                continue
            fields = next(csv.reader([line]))
            if header is None:
                header = [h.strip() for h in fields]
                missing = [c for c in columns if c not in header]
                if missing:
                    raise CsvFormatError(path, lineno, f"missing column(s) {', '.join(missing)}")
                idx = [header.index(c) for c in columns]
                continue
            if len(fields) != len(header):
                raise CsvFormatError(path, lineno,
                                     f"expected {len(header)} fields, got {len(fields)}")
            try:
                vals = [float(fields[i]) for i in idx]
            except ValueError:
                raise CsvFormatError(path, lineno, f"non-numeric value in {fields!r}") from None
            if not all(math.isfinite(v) for v in vals):
                raise CsvFormatError(path, lineno, "non-finite value")
            rows.append(vals)
    if header is None:
        raise CsvFormatError(path, 0, "no header line")
    if not rows:
        raise CsvFormatError(path, 0, "no data rows")
    arr = np.array(rows, dtype=float)
    return {c: arr[:, k] for k, c in enumerate(columns)}, meta


def _fmt(x):
    return repr(float(x))


def format_table(columns, data, meta=None) -> str:
    buf = io.StringIO()
    for key, value in (meta or {}).items():
        buf.write(f"# {key}={value}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in zip(*(np.asarray(data[c]) for c in columns)):
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def write_table(path, columns, data, meta=None):
    Path(path).write_text(format_table(columns, data, meta))


def read_trace(path) -> ComplexTrace:
    cols, meta = read_table(path, TRACE_COLUMNS)
    kw = {k: float(meta[k]) for k in META_KEYS if k in meta}
    return ComplexTrace(cols["freq_hz"], cols["s21_re"] + 1j * cols["s21_im"], **kw)


def write_trace(path, trace: ComplexTrace):
    write_table(path, TRACE_COLUMNS,
                {"freq_hz": trace.freq, "s21_re": trace.s21.real, "s21_im": trace.s21.imag},
                trace.metadata)


def read_stack(path) -> TraceStack:
    """Stack from one long-format CSV or a directory of trace CSVs."""
    path = Path(path)
    if path.is_dir():
        traces = [read_trace(p) for p in sorted(path.glob("*.csv"))]
        if not traces:
            raise CsvFormatError(path, 0, "directory holds no .csv traces")
        if any(t.power_dbm is None for t in traces):
            raise CsvFormatError(path, 0, "every trace needs a '# power_dbm=' header")
        traces.sort(key=lambda t: t.power_dbm)
        freqs = traces[0].freq
        for t in traces:
            if t.freq.size != freqs.size or not np.allclose(t.freq, freqs, rtol=1e-12, atol=0):
                raise CsvFormatError(path, 0, "traces use different frequency grids")
        return TraceStack(freqs, [t.power_dbm for t in traces], np.array([t.s21 for t in traces]))
    cols, _ = read_table(path, STACK_COLUMNS)
    powers = np.unique(cols["power_dbm"])
    rows = []
    freqs = None
    for p in powers:
        sel = cols["power_dbm"] == p
        order = np.argsort(cols["freq_hz"][sel])
        f = cols["freq_hz"][sel][order]
        if freqs is None:
            freqs = f
        elif f.size != freqs.size or not np.allclose(f, freqs, rtol=1e-12, atol=0):
            raise CsvFormatError(path, 0, f"power {p} dBm uses a different frequency grid")
        rows.append((cols["s21_re"][sel] + 1j * cols["s21_im"][sel])[order])
    return TraceStack(freqs, powers, np.array(rows))


def format_stack(stack: TraceStack) -> str:
    n_f = stack.freqs.size
    return format_table(STACK_COLUMNS, {
        "power_dbm": np.repeat(stack.powers_dbm, n_f),
        "freq_hz": np.tile(stack.freqs, len(stack)),
        "s21_re": stack.s21.real.ravel(),
        "s21_im": stack.s21.imag.ravel()})


def write_stack(path, stack: TraceStack):
    Path(path).write_text(format_stack(stack))


def read_tsweep(path):
    cols, _ = read_table(path, TSWEEP_COLUMNS)
    return cols["temperature_k"], cols["delta_f_over_f"]


def read_crossing(path) -> CrossingData:
    cols, _ = read_table(path, CROSSING_COLUMNS)
    return CrossingData(cols["gate_v"], cols["f_plus_hz"], cols["f_minus_hz"])


def write_crossing(path, data: CrossingData):
    write_table(path, CROSSING_COLUMNS, {"gate_v": data.gate_v, "f_plus_hz": data.f_plus,
                                         "f_minus_hz": data.f_minus})


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def dumps(record) -> str:
    return json.dumps(_jsonable(record), indent=2, sort_keys=True) + "\n"


def write_json(path, record):
    Path(path).write_text(dumps(record))


def read_json(path):
    with Path(path).open() as fh:
        return json.load(fh)
