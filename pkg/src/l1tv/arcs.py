"""Piecewise circular-arc/segment loops: exact lengths, refined polylines,
shoelace areas.

An :class:`Arc` runs from parameter ``a0`` through ``a0 + sweep`` around
``center`` (positive sweep is counterclockwise); a :class:`Segment` is a
straight edge.  A loop is an ordered piece list whose endpoints chain; its
signed shoelace area is positive when traversed counterclockwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

CHORD_TOL = 1e-10  # max sagitta of the polyline refinement, in length units


@dataclass(frozen=True)
class Arc:
    center: tuple[float, float]
    radius: float
    a0: float
    sweep: float

    @property
    def length(self) -> float:
        return self.radius * abs(self.sweep)

    def point(self, t: float) -> tuple[float, float]:
        """Point at angle fraction t in [0, 1]."""
        a = self.a0 + t * self.sweep
        return (
            self.center[0] + self.radius * math.cos(a),
            self.center[1] + self.radius * math.sin(a),
        )

    def polyline(self, chord_tol: float = CHORD_TOL) -> np.ndarray:
        """Vertices sampling the arc so the sagitta stays below chord_tol."""
        if self.radius <= 0 or self.sweep == 0:
            return np.array([self.point(0.0), self.point(1.0)])
        # sagitta of a chord spanning da: r * (1 - cos(da/2)) ~ r * da^2 / 8
        da_max = 2 * math.sqrt(2 * chord_tol / self.radius)
        n = max(2, int(math.ceil(abs(self.sweep) / da_max)) + 1)
        a = self.a0 + self.sweep * np.linspace(0.0, 1.0, n)
        return np.column_stack(
            (self.center[0] + self.radius * np.cos(a), self.center[1] + self.radius * np.sin(a))
        )


@dataclass(frozen=True)
class Segment:
    p0: tuple[float, float]
    p1: tuple[float, float]

    @property
    def length(self) -> float:
        return math.dist(self.p0, self.p1)

    def point(self, t: float) -> tuple[float, float]:
        return (
            self.p0[0] + t * (self.p1[0] - self.p0[0]),
            self.p0[1] + t * (self.p1[1] - self.p0[1]),
        )

    def polyline(self, chord_tol: float = CHORD_TOL) -> np.ndarray:
        return np.array([self.p0, self.p1])


Piece = Union[Arc, Segment]


def loop_perimeter(pieces: list[Piece]) -> float:
    return sum(p.length for p in pieces)


def loop_polyline(pieces: list[Piece], chord_tol: float = CHORD_TOL) -> np.ndarray:
    parts = []
    for k, piece in enumerate(pieces):
        pts = piece.polyline(chord_tol)
        parts.append(pts if k == 0 else pts[1:])
    return np.vstack(parts)


def loop_area(pieces: list[Piece], chord_tol: float = CHORD_TOL) -> float:
    """Signed shoelace area of the refined loop polyline."""
    pts = loop_polyline(pieces, chord_tol)
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def loop_closure_error(pieces: list[Piece]) -> float:
    """Largest gap between consecutive piece endpoints (loop sanity check)."""
    worst = 0.0
    for k, piece in enumerate(pieces):
        nxt = pieces[(k + 1) % len(pieces)]
        worst = max(worst, math.dist(piece.point(1.0), nxt.point(0.0)))
    return worst
