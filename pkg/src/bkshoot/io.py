"""File formats: profile CSV, JSON reports, fate-map CSV, key=value config, plot scripts."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import asdict
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1
PROFILE_COLUMNS = ("r", "w", "wp", "A", "T", "m", "F2", "v")
FATEMAP_COLUMNS = (
    "lambda", "fate", "r_event", "w_end", "wp_end", "A_end", "min_A", "min_wp",
    "max_abs_v", "node_count", "steps", "error",
)


def fmt(x) -> str:
    """17 significant digits (round-trips a double); empty for missing values."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return ""
    return format(x, ".17g")


def atomic_write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def profile_csv(profile, T=None) -> str:
    """Profile rows ``r, w, wp, A, T, m, F2, v``; ``T`` column empty when not computed."""
    from .system import f_norm_sq

    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(PROFILE_COLUMNS)
    for k, s in enumerate(profile.states()):
        t = None if T is None else T[k]
        m = 0.5 * s.r * (1.0 - s.A)
        wr.writerow([fmt(v) for v in (s.r, s.w, s.wp, s.A, t, m, f_norm_sq(s), s.A * s.wp)])
    return buf.getvalue()


def read_profile_csv(path):
    """Parse a profile CSV back into a dict of column arrays (empty -> NaN)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    cols = {h: np.array([float(r[i]) if r[i] else np.nan for r in body]) for i, h in enumerate(header)}
    return cols


def fatemap_csv(fmap) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(FATEMAP_COLUMNS)
    for e in fmap:
        s = e.summary
        wr.writerow([
            fmt(e.lam),
            "error" if e.fate is None else e.fate.kind,
            "" if e.fate is None else fmt(e.fate.radius),
            fmt(s.get("w_end")), fmt(s.get("wp_end")), fmt(s.get("A_end")),
            fmt(s.get("min_A")), fmt(s.get("min_wp")), fmt(s.get("max_abs_v")),
            fmt(s.get("node_count")), fmt(s.get("steps")), e.error or "",
        ])
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def report_json(**sections) -> str:
    doc = {"schema_version": SCHEMA_VERSION}
    doc.update(sections)
    return json.dumps(_jsonable(doc), indent=2) + "\n"


def config_dict(cfg) -> dict:
    return asdict(cfg)


# -- key=value config files ------------------------------------------------------


def parse_config_text(text: str) -> dict:
    """``key = value`` lines; ``#`` starts a comment; dashes in keys become underscores."""
    out = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {n}: expected key=value, got {raw!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        if not key:
            raise ValueError(f"config line {n}: empty key")
        out[key.replace("-", "_")] = value
    return out


def read_config_file(path) -> dict:
    return parse_config_text(Path(path).read_text())


# -- plot script -----------------------------------------------------------------


def gnuplot_script(fatemap_csv_name: str, portraits: list[tuple[float, str]]) -> str:
    """Text script for gnuplot: fate vs lambda, and (w, w') phase portraits."""
    lines = [
        "# gnuplot script; run: gnuplot -p <this file>",
        "set datafile separator ','",
        "set key outside",
        "set multiplot layout 1,2",
        "set title 'orbit fate vs lambda'",
        "set xlabel 'lambda'",
        "set ylabel 'event radius'",
        "set logscale y",
        "fates = 'exit_w_minus_one wprime_vanished a_vanished derivative_blowup stayed_in_gamma rest_point'",
        f"plot for [f in fates] '{fatemap_csv_name}' using 1:(strcol(2) eq f ? $3 : 1/0) skip 1 with points pt 7 title f",
        "unset logscale y",
        "set title 'phase portraits (w, w'')'",
        "set xlabel 'w'",
        "set ylabel \"w'\"",
        "set xrange [-1.1:1.1]",
    ]
    if portraits:
        parts = [f"'{name}' using 2:3 skip 1 with lines title 'lambda={lam:g}'" for lam, name in portraits]
        lines.append("plot " + ", \\\n     ".join(parts))
    lines.append("unset multiplot")
    return "\n".join(lines) + "\n"
