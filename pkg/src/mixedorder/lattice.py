"""Lattice geometry shared by the dense and Monte Carlo layers."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Literal

import numpy as np

from .errors import BadSiteSet


@dataclass(frozen=True)
class LatticeSpec:
    """Chain or square lattice; site (x, y) has index y*Lx + x.

    Bonds are listed row-major, all horizontal bonds before all vertical ones.
    A periodic direction of length 2 contributes a single bond per pair.
    """

    kind: Literal["chain", "square"] = "chain"
    Lx: int = 2
    Ly: int = 1
    boundary: Literal["open", "periodic"] = "open"

    def __post_init__(self):
        if self.kind not in ("chain", "square"):
            raise BadSiteSet(f"unknown lattice kind {self.kind!r}")
        if self.boundary not in ("open", "periodic"):
            raise BadSiteSet(f"unknown boundary {self.boundary!r}")
        if self.kind == "chain" and self.Ly != 1:
            raise BadSiteSet("a chain has Ly = 1")
        if self.Lx < 1 or self.Ly < 1:
            raise BadSiteSet("lattice extents must be positive")

    @classmethod
    def chain(cls, L: int, boundary: str = "open") -> "LatticeSpec":
        return cls("chain", L, 1, boundary)

    @classmethod
    def square(cls, Lx: int, Ly: int | None = None, boundary: str = "open") -> "LatticeSpec":
        return cls("square", Lx, Lx if Ly is None else Ly, boundary)

    @property
    def n_sites(self) -> int:
        return self.Lx * self.Ly

    def site(self, x: int, y: int = 0) -> int:
        return y * self.Lx + x

    def coords(self, i: int) -> tuple[int, int]:
        return i % self.Lx, i // self.Lx

    @staticmethod
    def _steps(length: int, periodic: bool) -> list[tuple[int, int]]:
        pairs = [(a, a + 1) for a in range(length - 1)]
        if periodic and length > 2:
            pairs.append((length - 1, 0))
        return pairs

    @cached_property
    def bonds(self) -> tuple[tuple[int, int], ...]:
        per = self.boundary == "periodic"
        out = []
        for y in range(self.Ly):
            for a, b in self._steps(self.Lx, per):
                out.append((self.site(a, y), self.site(b, y)))
        if self.kind == "square":
            for y0, y1 in self._steps(self.Ly, per):
                for x in range(self.Lx):
                    out.append((self.site(x, y0), self.site(x, y1)))
        return tuple(out)

    @property
    def n_bonds(self) -> int:
        return len(self.bonds)

    @cached_property
    def bond_array(self) -> np.ndarray:
        return np.asarray(self.bonds, dtype=np.int64).reshape(-1, 2)

    def distance(self, i: int, j: int) -> float:
        (xi, yi), (xj, yj) = self.coords(i), self.coords(j)
        dx, dy = abs(xi - xj), abs(yi - yj)
        if self.boundary == "periodic":
            dx, dy = min(dx, self.Lx - dx), min(dy, self.Ly - dy)
        return float(np.hypot(dx, dy))

    def farthest_pair(self) -> tuple[int, int]:
        """A pair at maximal distance, smallest indices first."""
        best, pair = -1.0, (0, 0)
        for j in range(1, self.n_sites):
            d = self.distance(0, j)
            if d > best + 1e-12:
                best, pair = d, (0, j)
        return pair

    def to_json(self) -> dict:
        return {"kind": self.kind, "Lx": self.Lx, "Ly": self.Ly, "boundary": self.boundary}

    @classmethod
    def from_json(cls, d: dict) -> "LatticeSpec":
        return cls(d.get("kind", "chain"), int(d["Lx"]), int(d.get("Ly", 1)), d.get("boundary", "open"))
