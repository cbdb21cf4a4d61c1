"""Parametric input regions: annulus, square annulus and dumbbell.

Coordinate conventions (all lengths in the same physical unit):

* Annulus: outer circle of radius ``R`` centred at the origin, inner circle
  of radius ``r`` centred at ``(d, 0)`` with ``d = R - r - delta``, so the
  narrowest gap (width ``delta``) sits on the positive x axis.
* Square annulus: centred at the origin, axis aligned.  The outer boundary
  is the set of points at distance ``r`` from the closed square of side
  ``L + 2*delta``; the inner boundary is at distance ``r`` from the
  concentric square of side ``L``.  The region is "outer minus inner", an
  annular channel of width ``delta`` along the straight edges.
* Dumbbell: left disc of radius ``R`` centred at the origin, right disc at
  ``(L + 2*x_f, 0)`` where ``x_f = sqrt((R+r)^2 - (r + delta/2)^2)``.  The
  handle is the rectangle ``x in [x_f, x_f + L]``, ``|y| <= delta/2``; the
  four concave corners are filled up to fillet circles of radius ``r``
  centred at ``(x_f, +-(r + delta/2))`` relative to the adjacent disc.

Boundary points resolve toward membership (non-strict inequalities), which
is irrelevant for areas but keeps the predicates deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

MAX_PIXELS = 2**31 - 1


# ---------------------------------------------------------------------------
# shape specs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AnnulusSpec:
    """Non-concentric annulus: outer radius R, inner radius r, gap delta."""

    R: float
    r: float
    delta: float

    def __post_init__(self):
        if not 0 < self.r < self.R:
            raise ValueError(f"annulus requires 0 < r < R, got r={self.r}, R={self.R}")
        if not 0 < self.delta <= self.R - self.r:
            raise ValueError(
                f"annulus requires 0 < delta <= R - r, got delta={self.delta}, R-r={self.R - self.r}"
            )

    @property
    def d(self) -> float:
        """Distance between the two centres; 0 means concentric."""
        return self.R - self.r - self.delta


@dataclass(frozen=True)
class SquareAnnulusSpec:
    """Rounded-square annulus: corner radius r, inner side L, channel width delta."""

    r: float
    L: float
    delta: float

    def __post_init__(self):
        if self.r <= 0 or self.L <= 0 or self.delta <= 0:
            raise ValueError(
                f"square annulus requires r, L, delta > 0, got r={self.r}, L={self.L}, delta={self.delta}"
            )


@dataclass(frozen=True)
class DumbbellSpec:
    """Two discs of radius R joined by a handle of width delta, fillet radius r."""

    R: float
    r: float
    L: float
    delta: float

    def __post_init__(self):
        if not 0 < self.r < self.R:
            raise ValueError(f"dumbbell requires 0 < r < R, got r={self.r}, R={self.R}")
        if self.L <= 0 or self.delta <= 0:
            raise ValueError(f"dumbbell requires L, delta > 0, got L={self.L}, delta={self.delta}")
        if self.r + self.delta / 2 >= self.R + self.r:
            raise ValueError("fillet construction undefined: r + delta/2 >= R + r")

    @property
    def x_f(self) -> float:
        """x offset of the fillet centres from the adjacent disc centre."""
        return math.sqrt((self.R + self.r) ** 2 - (self.r + self.delta / 2) ** 2)

    @property
    def fill_angle(self) -> float:
        """Polar angle of a fillet centre seen from its disc centre."""
        return math.asin((self.r + self.delta / 2) / (self.R + self.r))


ShapeSpec = Union[AnnulusSpec, SquareAnnulusSpec, DumbbellSpec]


@dataclass(frozen=True)
class Problem:
    """A shape together with the fidelity weight lambda."""

    shape: ShapeSpec
    lam: float

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")


# ---------------------------------------------------------------------------
# admissibility
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConstraintCheck:
    name: str
    passed: bool
    detail: str


@dataclass(frozen=True)
class AdmissibilityReport:
    checks: tuple[ConstraintCheck, ...]

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.checks if not c.passed)

    def __str__(self) -> str:
        lines = [f"[{'pass' if c.passed else 'FAIL'}] {c.name}: {c.detail}" for c in self.checks]
        return "\n".join(lines)


def validate(problem: Problem) -> AdmissibilityReport:
    """Check the family-specific admissibility constraints on lambda.

    Never raises; returns one pass/fail entry per constraint with the
    violated inequality named.  A passing report is the precondition for
    the closed-form energy routines.
    """
    s, lam = problem.shape, problem.lam
    checks: list[ConstraintCheck] = []

    def chk(name, passed, detail):
        checks.append(ConstraintCheck(name, bool(passed), detail))

    if isinstance(s, AnnulusSpec):
        chk("2/lambda < r", 2 / lam < s.r, f"2/lambda = {2 / lam:.6g}, r = {s.r:.6g}")
        chk("r < R", s.r < s.R, f"r = {s.r:.6g}, R = {s.R:.6g}")
        chk(
            "0 < delta <= R - r",
            0 < s.delta <= s.R - s.r,
            f"delta = {s.delta:.6g}, R - r = {s.R - s.r:.6g}",
        )
    elif isinstance(s, SquareAnnulusSpec):
        lo = (s.delta * s.r + s.delta**2) / (2 * s.r + s.delta)
        hi = s.delta / math.sqrt(2)
        chk(
            "(delta*r + delta^2)/(2r + delta) < 1/lambda",
            lo < 1 / lam,
            f"lower bound = {lo:.6g}, 1/lambda = {1 / lam:.6g}",
        )
        chk(
            "1/lambda < delta/sqrt(2)",
            1 / lam < hi,
            f"1/lambda = {1 / lam:.6g}, upper bound = {hi:.6g}",
        )
    elif isinstance(s, DumbbellSpec):
        chk("2/lambda < r", 2 / lam < s.r, f"2/lambda = {2 / lam:.6g}, r = {s.r:.6g}")
        chk("r < R", s.r < s.R, f"r = {s.r:.6g}, R = {s.R:.6g}")
        chk("delta < 2/lambda", s.delta < 2 / lam, f"delta = {s.delta:.6g}, 2/lambda = {2 / lam:.6g}")
    else:  # pragma: no cover
        raise TypeError(f"unknown shape spec {type(s)}")
    return AdmissibilityReport(tuple(checks))


# ---------------------------------------------------------------------------
# membership
# ---------------------------------------------------------------------------

def _dist_to_square(x, y, half):
    """Euclidean distance from (x, y) to the closed axis-aligned square [-half, half]^2."""
    dx = np.maximum(np.abs(x) - half, 0.0)
    dy = np.maximum(np.abs(y) - half, 0.0)
    return np.hypot(dx, dy)


def contains(shape: ShapeSpec, x, y):
    """Exact membership test; accepts scalars or numpy arrays."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if isinstance(shape, AnnulusSpec):
        d = shape.d
        inside_outer = x * x + y * y <= shape.R**2
        inside_inner = (x - d) ** 2 + y * y < shape.r**2
        out = inside_outer & ~inside_inner
    elif isinstance(shape, SquareAnnulusSpec):
        outer = _dist_to_square(x, y, shape.L / 2 + shape.delta) <= shape.r
        inner = _dist_to_square(x, y, shape.L / 2) < shape.r
        out = outer & ~inner
    elif isinstance(shape, DumbbellSpec):
        out = _dumbbell_contains(shape, x, y)
    else:  # pragma: no cover
        raise TypeError(f"unknown shape spec {type(shape)}")
    return bool(out) if out.ndim == 0 else out


def _dumbbell_contains(s: DumbbellSpec, x, y):
    # fold onto the left half and the upper half: both reflections are symmetries
    span = s.L + 2 * s.x_f
    xl = np.where(x > span / 2, span - x, x)
    ya = np.abs(y)
    in_disc = xl * xl + ya * ya <= s.R**2
    in_handle = (x >= s.x_f) & (x <= s.x_f + s.L) & (ya <= s.delta / 2)
    # corner fill: outside the disc and the fillet circle, within the wedge
    # of aperture fill_angle on the handle side of the disc
    fillet_sq = (xl - s.x_f) ** 2 + (ya - (s.r + s.delta / 2)) ** 2
    in_fill = (
        (xl >= 0)
        & (xl <= s.x_f)
        & (xl * xl + ya * ya >= s.R**2)
        & (np.arctan2(ya, xl) <= s.fill_angle)
        & (fillet_sq >= s.r**2)
    )
    return in_disc | in_handle | in_fill


# ---------------------------------------------------------------------------
# geometry helpers
# ---------------------------------------------------------------------------

def bounding_box(shape: ShapeSpec) -> tuple[float, float, float, float]:
    """Tight axis-aligned bounding box (xmin, ymin, xmax, ymax)."""
    if isinstance(shape, AnnulusSpec):
        R = shape.R
        return (-R, -R, R, R)
    if isinstance(shape, SquareAnnulusSpec):
        half = shape.L / 2 + shape.delta + shape.r
        return (-half, -half, half, half)
    if isinstance(shape, DumbbellSpec):
        return (-shape.R, -shape.R, shape.L + 2 * shape.x_f + shape.R, shape.R)
    raise TypeError(f"unknown shape spec {type(shape)}")


def area(shape: ShapeSpec) -> float:
    """Closed-form area of the region."""
    if isinstance(shape, AnnulusSpec):
        return math.pi * (shape.R**2 - shape.r**2)
    if isinstance(shape, SquareAnnulusSpec):
        d, L, r = shape.delta, shape.L, shape.r
        return 4 * d * L + 8 * d * r + 4 * d * d
    if isinstance(shape, DumbbellSpec):
        R, r, de, L = shape.R, shape.r, shape.delta, shape.L
        phi = shape.fill_angle
        return (
            2 * math.pi * R**2
            + (2 * r + de) * shape.x_f
            - 2 * (math.pi / 2 - phi) * r**2
            - 2 * phi * R**2
            + de * L
        )
    raise TypeError(f"unknown shape spec {type(shape)}")


def perimeter(shape: ShapeSpec) -> float:
    """Closed-form boundary length of the region."""
    if isinstance(shape, AnnulusSpec):
        return 2 * math.pi * (shape.R + shape.r)
    if isinstance(shape, SquareAnnulusSpec):
        return 4 * math.pi * shape.r + 8 * shape.L + 8 * shape.delta
    if isinstance(shape, DumbbellSpec):
        phi = shape.fill_angle
        # disc arcs + fillet arcs + the two flat handle edges
        return (
            4 * (math.pi - phi) * shape.R
            + 4 * (math.pi / 2 - phi) * shape.r
            + 2 * shape.L
        )
    raise TypeError(f"unknown shape spec {type(shape)}")


# ---------------------------------------------------------------------------
# rasterization
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class PixelMask:
    """Binary raster on a uniform grid.

    ``bits[iy, ix]`` covers the physical point ``origin + (ix*h, iy*h)``
    with ``h = spacing`` and ``iy`` increasing upward; ``origin`` is the
    centre of pixel (0, 0).
    """

    width: int
    height: int
    spacing: float
    origin: tuple[float, float]
    bits: np.ndarray
    predicate: Callable | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("mask dimensions must be >= 1")
        if self.spacing <= 0:
            raise ValueError("spacing must be positive")
        self.bits = np.asarray(self.bits, dtype=bool)
        if self.bits.shape != (self.height, self.width):
            raise ValueError(
                f"bits shape {self.bits.shape} does not match (height, width) = "
                f"({self.height}, {self.width})"
            )

    def same_grid(self, other: "PixelMask") -> bool:
        return (
            self.width == other.width
            and self.height == other.height
            and math.isclose(self.spacing, other.spacing, rel_tol=1e-12)
            and math.isclose(self.origin[0], other.origin[0], rel_tol=0, abs_tol=1e-12 * self.spacing)
            and math.isclose(self.origin[1], other.origin[1], rel_tol=0, abs_tol=1e-12 * self.spacing)
        )

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Physical pixel-centre coordinate grids (X, Y), each (height, width)."""
        xs = self.origin[0] + np.arange(self.width) * self.spacing
        ys = self.origin[1] + np.arange(self.height) * self.spacing
        return np.meshgrid(xs, ys, indexing="xy")

    def with_bits(self, bits: np.ndarray) -> "PixelMask":
        return PixelMask(self.width, self.height, self.spacing, self.origin, bits)

    def count(self) -> int:
        return int(self.bits.sum())


def rasterize(shape: ShapeSpec, resolution: int, padding: float = 0.05) -> PixelMask:
    """Sample the membership predicate at pixel centres.

    ``resolution`` is the pixel count across the padded bounding-box width;
    spacing is ``(bbox width + 2*padding) / resolution`` and the height
    follows from the padded bounding-box aspect ratio.
    """
    if resolution < 16:
        raise ValueError(f"resolution must be >= 16, got {resolution}")
    xmin, ymin, xmax, ymax = bounding_box(shape)
    w_phys = (xmax - xmin) + 2 * padding
    h_phys = (ymax - ymin) + 2 * padding
    spacing = w_phys / resolution
    width = int(resolution)
    height = max(1, int(round(h_phys / spacing)))
    if width * height > MAX_PIXELS:
        raise MemoryError(
            f"raster of {width} x {height} = {width * height} pixels exceeds the "
            f"{MAX_PIXELS}-pixel limit"
        )
    origin = (xmin - padding + spacing / 2, ymin - padding + spacing / 2)
    xs = origin[0] + np.arange(width) * spacing
    ys = origin[1] + np.arange(height) * spacing
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    bits = contains(shape, X, Y)
    return PixelMask(width, height, spacing, origin, bits, predicate=lambda x, y: contains(shape, x, y))


# ---------------------------------------------------------------------------
# portable graymap serialization
# ---------------------------------------------------------------------------

def write_pgm(mask: PixelMask, path) -> None:
    """Write the mask as a binary PGM (P5, maxval 255, top row first)."""
    header = f"P5 {mask.width} {mask.height} 255\n".encode("ascii")
    data = (mask.bits[::-1].astype(np.uint8) * 255).tobytes()
    with open(path, "wb") as fh:
        fh.write(header + data)


def read_pgm(path, spacing: float = 1.0, origin: tuple[float, float] = (0.0, 0.0)) -> PixelMask:
    """Read a binary PGM written by :func:`write_pgm`."""
    with open(path, "rb") as fh:
        raw = fh.read()
    fields: list[bytes] = []
    pos = 0
    while len(fields) < 4:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        fields.append(raw[start:pos])
    pos += 1  # single whitespace after maxval
    magic, w, h, maxval = fields[0], int(fields[1]), int(fields[2]), int(fields[3])
    if magic != b"P5" or maxval != 255:
        raise ValueError(f"not a P5/255 graymap: magic={magic!r}, maxval={maxval}")
    data = np.frombuffer(raw[pos : pos + w * h], dtype=np.uint8).reshape(h, w)
    return PixelMask(w, h, spacing, origin, data[::-1] > 127)
