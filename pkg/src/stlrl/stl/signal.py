from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .formula import variable_names


class WindowError(ValueError):
    """The evaluation window does not fit inside the signal."""


@dataclass(frozen=True, eq=False)
class Signal:
    """Finite discrete-time signal; ``samples[k]`` is the value at time ``t0 + k``."""

    samples: np.ndarray
    t0: int = 0

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.shape[0] == 0:
            raise ValueError("a signal needs at least one sample of shape (n,)")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "t0", int(self.t0))

    def __len__(self) -> int:
        return self.samples.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Signal):
            return NotImplemented
        return self.t0 == other.t0 and np.array_equal(self.samples, other.samples)

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    @property
    def t_end(self) -> int:
        return self.t0 + len(self) - 1

    def at(self, t: int) -> np.ndarray:
        return self.samples[t - self.t0]

    def window(self, t1: int, t2: int) -> "Signal":
        """``s^{t1:t2}`` (both ends inclusive)."""
        if not (self.t0 <= t1 <= t2 <= self.t_end):
            raise WindowError(f"window [{t1},{t2}] outside signal [{self.t0},{self.t_end}]")
        return Signal(self.samples[t1 - self.t0 : t2 - self.t0 + 1], t1)

    def to_csv(self, names: Sequence[str] | None = None) -> str:
        names = names or variable_names(self.dim)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", *names])
        for k, row in enumerate(self.samples):
            w.writerow([self.t0 + k, *(repr(float(v)) for v in row)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, source: str | Path | io.TextIOBase) -> "Signal":
        """Read ``t,x,y,...`` CSV; ``t`` must be consecutive integers."""
        if isinstance(source, Path):
            text = source.read_text()
        elif isinstance(source, str) and "\n" not in source and Path(source).exists():
            text = Path(source).read_text()
        elif isinstance(source, str):
            text = source
        else:
            text = source.read()
        rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
        if not rows or rows[0][0].strip() != "t":
            raise ValueError("signal CSV must start with a header 't,<var>,...'")
        body = rows[1:]
        if not body:
            raise ValueError("signal CSV has no samples")
        width = len(rows[0])
        times, values = [], []
        for lineno, r in enumerate(body, start=2):
            if len(r) != width:
                raise ValueError(f"line {lineno}: expected {width} columns, got {len(r)}")
            times.append(int(r[0]))
            values.append([float(v) for v in r[1:]])
        if times != list(range(times[0], times[0] + len(times))):
            raise ValueError("signal CSV time column must be consecutive integers")
        return cls(np.array(values, dtype=float), times[0])

    def column_names(self) -> tuple:
        return variable_names(self.dim)
