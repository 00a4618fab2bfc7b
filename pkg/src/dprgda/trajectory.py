"""Per-iteration trajectory records and sinks."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import astuple, dataclass, field, fields
from pathlib import Path
from typing import Optional

CSV_HEADER = ("t", "phase", "phi", "grad_norm", "lambda_min", "v_norm", "eps_spent")


@dataclass
class Row:
    t: int
    phase: str
    phi: float = math.nan
    grad_norm: float = math.nan
    lambda_min: float = math.nan
    v_norm: float = math.nan
    eps_spent: float = 0.0


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


class CsvSink:
    """Streams rows to a CSV file with the fixed trajectory header."""

    def __init__(self, path):
        self.path = Path(path)
        self._fh = self.path.open("w", newline="")
        self._writer = csv.writer(self._fh, lineterminator="\n")
        self._writer.writerow(CSV_HEADER)

    def write(self, row: Row) -> None:
        self._writer.writerow([_fmt(v) for v in astuple(row)])

    def close(self) -> None:
        self._fh.close()


@dataclass
class Trajectory:
    """In-memory trajectory; optional ``sinks`` receive every row as it is appended."""

    rows: list = field(default_factory=list)
    sinks: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def append(self, row: Row) -> None:
        if self.rows and row.t <= self.rows[-1].t:
            raise ValueError("trajectory rows must have increasing t")
        self.rows.append(row)
        for sink in self.sinks:
            sink.write(row)

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> list:
        return [getattr(r, name) for r in self.rows]

    @property
    def final(self) -> Optional[Row]:
        return self.rows[-1] if self.rows else None

    def summary(self) -> dict:
        last = self.final
        if last is None:
            return {}
        return {"t": last.t, "phi": last.phi, "grad_norm": last.grad_norm, "lambda_min": last.lambda_min}

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.rows:
            w.writerow([_fmt(v) for v in astuple(r)])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @staticmethod
    def read_csv(path) -> "Trajectory":
        traj = Trajectory()
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if tuple(reader.fieldnames or ()) != CSV_HEADER:
                raise ValueError(f"unexpected trajectory header {reader.fieldnames}")
            types = {f.name: f.type for f in fields(Row)}
            for rec in reader:
                traj.rows.append(Row(**{
                    k: (int(v) if types[k] in (int, "int") else v if types[k] in (str, "str") else float(v))
                    for k, v in rec.items()
                }))
        return traj
