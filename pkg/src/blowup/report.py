"""Byte-stable CSV and key/value report output.

Every output starts with a header::

    # blowup <version>
    # config: {"command": ..., ...}

The config line is JSON with sorted keys, so :meth:`RunConfig.from_header`
recovers the configuration that produced a file.  Floats are written with
``repr`` and lines end in ``\\n``.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .quad import IntegralSeries

__all__ = [
    "RunConfig", "header_lines", "series_csv_lines", "diagnosis_lines",
    "read_series_csv", "emit", "fmt",
]


@dataclass
class RunConfig:
    command: str
    f: str | None = None
    n: int | None = None
    domain: str | None = None
    p: float | None = None
    eps: float | None = None
    levels: int | None = None
    ratio: float | None = None
    seed: int = 42
    format: str = "csv"
    out: str | None = None
    extra: dict = field(default_factory=dict)

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text):
        return cls(**json.loads(text))

    @classmethod
    def from_header(cls, lines):
        for line in lines:
            if line.startswith("# config: "):
                return cls.from_json(line[len("# config: "):])
        raise ValueError("no config line in header")


def fmt(x):
    """Stable text for numbers, bools and arrays."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return repr(x)
    if isinstance(x, (list, tuple, np.ndarray)):
        return "[" + ",".join(fmt(v) for v in x) + "]"
    if x is None:
        return "none"
    return str(x)


def header_lines(config):
    return [f"# blowup {__version__}", f"# config: {config.to_json()}"]


def series_csv_lines(series):
    lines = ["eps,value,err,converged"]
    for e, v, r, c in series.rows():
        lines.append(f"{fmt(e)},{fmt(v)},{fmt(r)},{fmt(c)}")
    return lines


def diagnosis_lines(d, prefix=""):
    """Report lines for a diagnosis, classification first."""
    lines = [
        f"{prefix}classification: {d.classification}",
        f"{prefix}a: {fmt(d.a)}",
        f"{prefix}b: {fmt(d.b)}",
        f"{prefix}gamma: {fmt(d.gamma)}",
        f"{prefix}b_stderr: {fmt(d.b_stderr)}",
    ]
    for k in ("constant", "log", "power"):
        lines.append(f"{prefix}residual_{k}: {fmt(d.residuals.get(k, math.nan))}")
    if d.note:
        lines.append(f"{prefix}note: {d.note}")
    return lines


def read_series_csv(path):
    """Read an ``eps,value,err,converged`` file (comment lines skipped)."""
    rows = []
    with open(path) as fh:
        body = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    if not body or body[0].split(",")[:2] != ["eps", "value"]:
        raise ValueError(f"{path}: expected a header starting with eps,value")
    cols = body[0].split(",")
    for ln in body[1:]:
        rows.append(dict(zip(cols, ln.split(","))))
    eps = [float(r["eps"]) for r in rows]
    vals = [float(r["value"]) for r in rows]
    errs = [float(r.get("err", 0.0)) for r in rows]
    conv = [r.get("converged", "true") == "true" for r in rows]
    return IntegralSeries(eps, vals, errs, conv)


def emit(lines, path=None, stream=None):
    """Write lines with ``\\n`` endings to ``path`` or to ``stream``."""
    text = "\n".join(lines) + "\n"
    if path is None:
        stream.write(text)
        return
    try:
        with open(path, "w", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc
