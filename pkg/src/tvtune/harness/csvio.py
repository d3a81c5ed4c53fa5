"""Versioned CSV tables.

The first line is ``# schema=<name>/<version>``, then a header row, then data.
Floats are written with ``repr`` so a read-back reproduces them exactly.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

from ..env import TRACE_FIELDS
from ..errors import ConfigError


@dataclass(frozen=True)
class Schema:
    name: str
    version: int
    columns: tuple
    types: tuple        # one of int, float, str, bool per column

    def tag(self) -> str:
        return f"# schema={self.name}/{self.version}"


def _fmt(v, kind):
    if kind is float:
        return repr(float(v))
    if kind is bool:
        return "1" if v else "0"
    if kind is int:
        return str(int(v))
    return str(v)


def _parse(s, kind):
    if kind is float:
        return float(s)
    if kind is int:
        return int(s)
    if kind is bool:
        if s not in ("0", "1"):
            raise ValueError(s)
        return s == "1"
    return s


def dumps(schema: Schema, rows) -> str:
    buf = io.StringIO()
    buf.write(schema.tag() + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(schema.columns)
    for row in rows:
        if len(row) != len(schema.columns):
            raise ValueError(f"row has {len(row)} fields, schema {schema.name} has "
                             f"{len(schema.columns)}")
        w.writerow([_fmt(v, k) for v, k in zip(row, schema.types)])
    return buf.getvalue()


def loads(schema: Schema, text: str) -> list:
    lines = text.splitlines()
    if not lines or lines[0].strip() != schema.tag():
        raise ConfigError(f"expected {schema.tag()!r} on the first line")
    reader = csv.reader(lines[1:])
    header = next(reader, None)
    if tuple(header or ()) != schema.columns:
        raise ConfigError(f"header mismatch for schema {schema.name}")
    rows = []
    for n, rec in enumerate(reader, 3):
        if len(rec) != len(schema.columns):
            raise ConfigError(f"line {n}: expected {len(schema.columns)} fields")
        try:
            rows.append(tuple(_parse(s, k) for s, k in zip(rec, schema.types)))
        except ValueError:
            raise ConfigError(f"line {n}: malformed value") from None
    return rows


def write_csv(path, schema: Schema, rows) -> list:
    """Write, then read back and check the parse equals what was written."""
    text = dumps(schema, rows)
    Path(path).write_text(text, encoding="utf-8")
    back = read_csv(path, schema)
    if dumps(schema, back) != text:
        raise ConfigError(f"read-back of {path} does not match the written data")
    return back


def read_csv(path, schema: Schema) -> list:
    return loads(schema, Path(path).read_text(encoding="utf-8"))


REWARDS = Schema("reward_history", 1, ("episode", "reward", "mean_last_50"),
                 (int, float, float))
SWEEP = Schema("sweep", 1,
               ("mu", "v0_kmh", "tuner", "max_abs_ex", "terminated", "perf_integral",
                "w_fl", "w_fr", "w_rl", "w_rr"),
               (float, float, str, float, bool, float, float, float, float, float))
GENERALIZE = Schema("generalize", 1,
                    ("tuner", "mu", "v0_kmh", "completed", "max_abs_beta_deg", "max_abs_ex",
                     "perf_integral", "end_time"),
                    (str, float, float, bool, float, float, float, float))
TRACE = Schema("trace", 1, (*TRACE_FIELDS, "reward"), (float,) * (len(TRACE_FIELDS) + 1))
GA_TRACE = Schema("ga_trace", 1, ("generation", "best_fitness", "w_fl", "w_fr", "w_rl", "w_rr"),
                  (int, float, float, float, float, float))
