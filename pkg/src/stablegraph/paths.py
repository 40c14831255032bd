"""Grid paths and marked excursions shared by the discrete and continuum code."""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True, eq=False)
class GridPath:
    """Cadlag path sampled at times 0, dt, 2 dt, ...; constant between grid times."""

    dt: float
    values: np.ndarray

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        v = np.array(self.values, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def T(self):
        return (len(self.values) - 1) * self.dt

    @property
    def times(self):
        return np.arange(len(self.values)) * self.dt

    def index(self, t):
        """Grid index of the cell containing time t."""
        return int(np.floor(t / self.dt + 1e-9))

    def at(self, t):
        return float(self.values[min(self.index(t), len(self.values) - 1)])

    def to_csv(self):
        buf = io.StringIO()
        buf.write("t,value\n")
        for t, v in zip(self.times, self.values):
            buf.write(f"{float(t)!r},{float(v)!r}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text):
        rows = np.loadtxt(io.StringIO(text), delimiter=",", skiprows=1, ndmin=2)
        dt = rows[1, 0] - rows[0, 0] if len(rows) > 1 else 1.0
        return cls(dt, rows[:, 1])


@dataclass(frozen=True, eq=False)
class MarkedExcursion:
    """Non-negative path segment with lifetime zeta and surplus marks.

    ``lattice`` excursions come from integer walks (unit steps, dt = 1 in
    walk units).  ``marks`` holds rows (s, x, t): open time, level, close time.
    """

    path: GridPath
    lattice: bool = False
    marks: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))

    @property
    def zeta(self):
        return self.path.T

    @property
    def values(self):
        return self.path.values

    @property
    def dt(self):
        return self.path.dt

    def marks_csv(self):
        buf = io.StringIO()
        buf.write("s,x,t\n")
        for s, x, t in np.asarray(self.marks).reshape(-1, 3):
            buf.write(f"{float(s)!r},{float(x)!r},{float(t)!r}\n")
        return buf.getvalue()
