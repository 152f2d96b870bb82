"""Tabulated curves with provenance, and their CSV / JSON serialization.

CSV layout::

    # quantity,method,n,nA,nB,a,b
    # mi_pdf,direct_jpdf,2,4,5,1,0.33333333333333331
    # rel_tol,abs_tol,max_subdivisions,tail_scale
    # 1e-08,9.9999999999999998e-13,400,2
    x,value
    0,0
    ...

Floats are written with 17 significant digits so reading a file back gives
the identical curve.
"""

from __future__ import annotations

import enum
import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ensemble import ChannelConfig
from .mutualinfo import MiMethod
from .numerics import QuadratureSpec

__all__ = ["DensityCurve", "Quantity", "read_csv", "read_json"]


class Quantity(str, enum.Enum):
    MI_PDF = "mi_pdf"
    MI_CDF = "mi_cdf"
    EIG_MARGINAL = "eig_marginal"
    EIG_MIN_SF = "eig_min_sf"
    EIG_MAX_CDF = "eig_max_cdf"
    EIG_MIN_PDF = "eig_min_pdf"
    EIG_MAX_PDF = "eig_max_pdf"

    @property
    def monotone(self) -> int:
        """+1 for nondecreasing curves, -1 for nonincreasing, 0 otherwise."""
        return {"mi_cdf": 1, "eig_max_cdf": 1, "eig_min_sf": -1}.get(self.value, 0)


_MONO_SLACK = 1e-9


def _g(x) -> str:
    return "%.17g" % x


@dataclass(frozen=True)
class DensityCurve:
    """Values of one quantity on a grid, with the scenario and method that made them.

    Eigenvalue curves computed analytically carry ``MiMethod.DIRECT``;
    empirical curves carry ``MiMethod.MONTE_CARLO``.
    """

    quantity: Quantity
    method: MiMethod
    grid: np.ndarray
    values: np.ndarray
    cfg: ChannelConfig
    spec: QuadratureSpec

    def __post_init__(self):
        object.__setattr__(self, "quantity", Quantity(self.quantity))
        object.__setattr__(self, "method", MiMethod.parse(self.method))
        grid = np.array(self.grid, dtype=float).ravel()
        values = np.array(self.values, dtype=float).ravel()
        if grid.shape != values.shape:
            raise ValueError(f"grid and values differ in length ({grid.size} vs {values.size})")
        if grid.size and not np.all(np.isfinite(grid)):
            raise ValueError("grid must be finite")
        if np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly ascending")
        if not np.all(np.isfinite(values)):
            raise ValueError("values must be finite")
        mono = self.quantity.monotone
        if mono and np.any(mono * np.diff(values) < -_MONO_SLACK):
            raise ValueError(f"{self.quantity.value} values must be monotone")
        grid.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    def __eq__(self, other):
        if not isinstance(other, DensityCurve):
            return NotImplemented
        return (
            self.quantity == other.quantity
            and self.method == other.method
            and self.cfg == other.cfg
            and self.spec == other.spec
            and np.array_equal(self.grid, other.grid)
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None

    # -- CSV ---------------------------------------------------------------

    def to_csv(self) -> str:
        c, s = self.cfg, self.spec
        buf = io.StringIO()
        buf.write("# quantity,method,n,nA,nB,a,b\n")
        buf.write(f"# {self.quantity.value},{self.method.value},{c.n},{c.n_A},{c.n_B},{_g(c.a)},{_g(c.b)}\n")
        buf.write("# rel_tol,abs_tol,max_subdivisions,tail_scale\n")
        buf.write(f"# {_g(s.rel_tol)},{_g(s.abs_tol)},{s.max_subdivisions},{_g(s.tail_scale)}\n")
        buf.write("x,value\n")
        for x, v in zip(self.grid, self.values):
            buf.write(f"{_g(x)},{_g(v)}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "DensityCurve":
        lines = text.splitlines()
        comments = [ln[1:].strip() for ln in lines if ln.startswith("#")]
        if len(comments) < 4:
            raise ValueError("missing metadata header lines")
        q, m, n, na, nb, a, b = comments[1].split(",")
        rel, abs_, maxsub, tail = comments[3].split(",")
        body = [ln for ln in lines if ln and not ln.startswith("#")]
        if not body or body[0].strip() != "x,value":
            raise ValueError("expected an 'x,value' column header")
        rows = [ln.split(",") for ln in body[1:]]
        grid = [float(r[0]) for r in rows]
        values = [float(r[1]) for r in rows]
        cfg = ChannelConfig(int(n), int(na), int(nb), float(a), float(b))
        spec = QuadratureSpec(float(rel), float(abs_), int(maxsub), float(tail))
        return cls(q, m, grid, values, cfg, spec)

    # -- JSON --------------------------------------------------------------

    def to_dict(self) -> dict:
        c, s = self.cfg, self.spec
        return {
            "quantity": self.quantity.value,
            "method": self.method.value,
            "grid": self.grid.tolist(),
            "values": self.values.tolist(),
            "cfg": {"n": c.n, "n_A": c.n_A, "n_B": c.n_B, "a": c.a, "b": c.b},
            "spec": {
                "rel_tol": s.rel_tol,
                "abs_tol": s.abs_tol,
                "max_subdivisions": s.max_subdivisions,
                "tail_scale": s.tail_scale,
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, d: dict) -> "DensityCurve":
        return cls(d["quantity"], d["method"], d["grid"], d["values"],
                   ChannelConfig(**d["cfg"]), QuadratureSpec(**d["spec"]))

    @classmethod
    def from_json(cls, text: str) -> "DensityCurve":
        return cls.from_dict(json.loads(text))

    def write(self, path, fmt: str = "csv"):
        if fmt not in ("csv", "json"):
            raise ValueError(f"unknown format {fmt!r}; use csv or json")
        text = self.to_csv() if fmt == "csv" else self.to_json()
        Path(path).write_text(text)


def read_csv(path) -> DensityCurve:
    return DensityCurve.from_csv(Path(path).read_text())


def read_json(path) -> DensityCurve:
    return DensityCurve.from_json(Path(path).read_text())
