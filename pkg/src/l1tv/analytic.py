"""Closed-form candidate energies E(S) = Per(S) + lambda*|S sym-diff Omega|.

Each input family admits a short list of candidate minimizers: the region
itself, the empty set, the union of all (1/lambda)-balls contained in the
region ("the opening"), and, for the two annular families, the solid discs
bounded by the outer or inner boundary.  The opening candidate is only
meaningful when the extreme tangent balls exist and are pairwise disjoint;
its validity status records why it drops out otherwise.

The perimeter/fidelity split reported for the opening candidate follows the
closed-form term grouping (the ball-cap term is shared between boundary
length and area bookkeeping); the totals are what carry geometric meaning
and are cross-checked against the numeric oracle.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .shapes import (
    AnnulusSpec,
    DumbbellSpec,
    Problem,
    ShapeSpec,
    SquareAnnulusSpec,
    area,
    perimeter,
    validate,
)

ARCCOS_SLACK = 1e-12  # |arg| beyond 1 by more than this means infeasible
TIE_RTOL = 1e-12


class Validity(str, enum.Enum):
    VALID = "valid"
    BALLS_OVERLAP_OR_TOUCH = "balls_overlap_or_touch"
    OPENING_EQUALS_OMEGA = "opening_equals_omega"
    ANGLE_UNDEFINED = "angle_undefined"

    def __str__(self) -> str:  # CSV-friendly
        return self.value


@dataclass(frozen=True)
class AnnulusAngles:
    phi: float
    theta: float


@dataclass(frozen=True)
class SquareAngles:
    phi: float
    theta: float


@dataclass(frozen=True)
class DumbbellAngles:
    phi: float
    theta: float
    omega: float
    psi: float


@dataclass(frozen=True)
class CandidateEnergy:
    candidate: str
    label: str
    perimeter: float
    fidelity_area: float
    total: float
    validity: Validity


@dataclass(frozen=True)
class WinnerReport:
    winners: tuple[str, ...]
    total: float

    @property
    def is_tie(self) -> bool:
        return len(self.winners) > 1

    @property
    def winner(self) -> str:
        return self.winners[0]

    def csv_field(self) -> str:
        return "|".join(self.winners)


def _arccos(arg: float) -> Optional[float]:
    """arccos that refuses arguments out of range by more than roundoff."""
    if abs(arg) > 1 + ARCCOS_SLACK:
        return None
    return math.acos(min(1.0, max(-1.0, arg)))


def _require_admissible(problem: Problem) -> None:
    rep = validate(problem)
    if not rep.ok:
        raise ValueError("inadmissible problem: " + ", ".join(rep.failures))


# ---------------------------------------------------------------------------
# annulus
# ---------------------------------------------------------------------------

def annulus_angles(spec: AnnulusSpec, lam: float) -> Optional[AnnulusAngles]:
    """Tangent-ball angles (phi at the inner centre, theta at the outer).

    Both are measured from the ray through the narrow gap.  Returns None when
    no ball of radius 1/lambda can touch both circles (arccos argument out of
    range) or when the annulus is concentric (d = 0).
    """
    d = spec.d
    if d <= 0:
        return None
    a = spec.R - 1 / lam
    b = spec.r + 1 / lam
    phi = _arccos((a * a - d * d - b * b) / (2 * d * b))
    theta = _arccos((a * a + d * d - b * b) / (2 * d * a))
    if phi is None or theta is None:
        return None
    return AnnulusAngles(phi, theta)


def _annulus_opening_validity(spec: AnnulusSpec, lam: float, ang: Optional[AnnulusAngles]) -> Validity:
    if 1 / lam <= spec.delta / 2:
        return Validity.OPENING_EQUALS_OMEGA  # balls pass the narrow gap
    if ang is None:
        return Validity.ANGLE_UNDEFINED
    if math.sin(ang.phi) <= 1 / (lam * spec.r + 1):
        return Validity.BALLS_OVERLAP_OR_TOUCH
    return Validity.VALID


def annulus_energies(spec: AnnulusSpec, lam: float) -> list[CandidateEnergy]:
    """Energies of the five annulus candidates (outer disc, empty, the region,
    the ball union, inner disc)."""
    _require_admissible(Problem(spec, lam))
    R, r, d = spec.R, spec.r, spec.d
    ang = annulus_angles(spec, lam)
    out = [
        _cand("sigma1", "outer_disc", 2 * math.pi * R, math.pi * r * r, lam),
        _cand("sigma2", "empty", 0.0, math.pi * (R * R - r * r), lam),
        _cand("sigma3", "omega", 2 * math.pi * (R + r), 0.0, lam),
    ]
    validity = _annulus_opening_validity(spec, lam, ang)
    if ang is None:
        out.append(CandidateEnergy("sigma4", "balls", math.nan, math.nan, math.nan, validity))
    else:
        phi, th = ang.phi, ang.theta
        per = 2 * (math.pi - phi) * r + 2 * (math.pi - th) * R + (math.pi - phi + th) / lam
        fid = R * R * th - r * r * phi - d * (R - 1 / lam) * math.sin(th)
        out.append(CandidateEnergy("sigma4", "balls", per, fid, per + lam * fid, validity))
    out.append(_cand("sigma5", "inner_disc", 2 * math.pi * r, math.pi * R * R, lam))
    return out


@dataclass(frozen=True)
class TouchDelta:
    """Gap width at which the two extreme tangent balls just touch."""

    delta_star: float
    residual: float
    brackets: int  # sign-change brackets seen in the scan (first one is used)


def annulus_touch_delta(R: float, r: float, lam: float, scan_points: int = 1024) -> Optional[TouchDelta]:
    """Solve for the delta where the two tangent balls meet.

    Uses the touching condition sin(phi) = 1/(lambda*r + 1) combined with the
    closed-form cos(phi), as a root of g(delta) = sin^2 + cos^2 - 1 on
    (0, R - r).  Bisection on the first sign-change bracket from a uniform
    scan; returns None when the scan sees no sign change.
    """
    if not (2 / lam < r < R):
        raise ValueError("requires 2/lambda < r < R")
    sin_t = 1 / (lam * r + 1)

    def g(delta: float) -> float:
        d = R - r - delta
        b = r + 1 / lam
        a = R - 1 / lam
        cos_p = (a * a - d * d - b * b) / (2 * d * b)
        return sin_t * sin_t + cos_p * cos_p - 1

    span = R - r
    deltas = np.linspace(span * 1e-9, span * (1 - 1e-9), scan_points)
    vals = np.array([g(x) for x in deltas])
    sign = np.sign(vals)
    flips = np.nonzero(sign[:-1] * sign[1:] < 0)[0]
    exact = np.nonzero(vals == 0.0)[0]
    if exact.size:
        x = float(deltas[exact[0]])
        return TouchDelta(x, 0.0, int(len(flips) + exact.size))
    if not flips.size:
        return None
    lo, hi = float(deltas[flips[0]]), float(deltas[flips[0] + 1])
    glo = g(lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        if gm == 0.0 or (hi - lo) <= 1e-15 * span:
            lo = hi = mid
            break
        if (gm > 0) == (glo > 0):
            lo, glo = mid, gm
        else:
            hi = mid
    root = 0.5 * (lo + hi)
    return TouchDelta(root, abs(g(root)), int(len(flips)))


# ---------------------------------------------------------------------------
# square annulus
# ---------------------------------------------------------------------------

def square_angles(spec: SquareAnnulusSpec, lam: float) -> Optional[SquareAngles]:
    """Tangent-ball angles off the corner diagonal (phi at the outer-arc
    centre, theta at the inner-arc centre)."""
    r, d = spec.r, spec.delta
    phi = _arccos((2 * r - lam * d * d) / (math.sqrt(2) * d * (lam * r - 1)))
    theta = _arccos((2 * r + lam * d * d) / (math.sqrt(2) * d * (lam * r + 1)))
    if phi is None or theta is None:
        return None
    return SquareAngles(phi, theta)


def square_ball_centers(spec: SquareAnnulusSpec, lam: float) -> np.ndarray:
    """Centres of the eight tangent balls (two per corner), shape (8, 2)."""
    ang = square_angles(spec, lam)
    if ang is None:
        raise ValueError("tangent balls undefined for these parameters")
    a_out = spec.L / 2 + spec.delta
    rho = spec.r - 1 / lam
    pts = []
    for k in range(4):  # corner diagonal directions 45, 135, 225, 315 degrees
        diag = math.pi / 4 + k * math.pi / 2
        cx, cy = a_out * math.copysign(1, math.cos(diag)), a_out * math.copysign(1, math.sin(diag))
        for s in (+1, -1):
            t = diag + s * ang.phi
            pts.append((cx + rho * math.cos(t), cy + rho * math.sin(t)))
    return np.array(pts)


def _square_opening_validity(spec: SquareAnnulusSpec, lam: float, ang: Optional[SquareAngles]) -> Validity:
    if ang is None:
        return Validity.ANGLE_UNDEFINED
    centers = square_ball_centers(spec, lam)
    dmin = min(
        math.dist(centers[i], centers[j])
        for i in range(len(centers))
        for j in range(i + 1, len(centers))
    )
    if dmin <= 2 / lam:
        return Validity.BALLS_OVERLAP_OR_TOUCH
    return Validity.VALID


def square_energies(spec: SquareAnnulusSpec, lam: float) -> list[CandidateEnergy]:
    """Energies of the five square-annulus candidates."""
    _require_admissible(Problem(spec, lam))
    r, L, d = spec.r, spec.L, spec.delta
    sq2 = math.sqrt(2)
    ang = square_angles(spec, lam)
    inner_area = L * L + 4 * r * L + math.pi * r * r
    outer_area = (L + 2 * d + 2 * r) ** 2 - 4 * r * r + math.pi * r * r
    out = [
        _cand("sigma1", "outer_rounded_square", 4 * (L + 2 * d) + 2 * math.pi * r, inner_area, lam),
        _cand("sigma2", "empty", 0.0, area(spec), lam),
        _cand("sigma3", "omega", perimeter(spec), 0.0, lam),
    ]
    validity = _square_opening_validity(spec, lam, ang)
    if ang is None:
        out.append(CandidateEnergy("sigma4", "balls", math.nan, math.nan, math.nan, validity))
    else:
        phi, th = ang.phi, ang.theta
        per = 8 * r * (phi + th) + 4 * (math.pi - phi + th) / lam
        fid = area(spec) - 4 * r * r * (phi - th) - 4 * sq2 * d * (r + 1 / lam) * math.sin(th)
        out.append(CandidateEnergy("sigma4", "balls", per, fid, per + lam * fid, validity))
    out.append(_cand("sigma5", "inner_rounded_square", 4 * L + 2 * math.pi * r, outer_area, lam))
    return out


# ---------------------------------------------------------------------------
# dumbbell
# ---------------------------------------------------------------------------

def dumbbell_angles(spec: DumbbellSpec, lam: float) -> Optional[DumbbellAngles]:
    """Construction angles: phi locates the fillet centre from the disc,
    theta tilts the pinch-ball contact off vertical; omega and psi follow
    exactly (omega = pi/2 + theta, psi = pi - omega - phi)."""
    phi = spec.fill_angle
    theta = _arccos((spec.r + spec.delta / 2) / (spec.r + 1 / lam))
    if theta is None:
        return None
    omega = math.pi / 2 + theta
    psi = math.pi - omega - phi
    return DumbbellAngles(phi, theta, omega, psi)


def _dumbbell_opening_validity(spec: DumbbellSpec, lam: float, ang: Optional[DumbbellAngles]) -> Validity:
    if ang is None or ang.psi <= 0:
        return Validity.ANGLE_UNDEFINED
    s = math.sqrt((spec.r + 1 / lam) ** 2 - (spec.r + spec.delta / 2) ** 2)
    if spec.L + 2 * s <= 2 / lam:  # the two pinch balls meet across the handle
        return Validity.BALLS_OVERLAP_OR_TOUCH
    return Validity.VALID


def dumbbell_energies(spec: DumbbellSpec, lam: float) -> list[CandidateEnergy]:
    """Energies of the three dumbbell candidates (empty, the region, balls)."""
    _require_admissible(Problem(spec, lam))
    R, r, d, L = spec.R, spec.r, spec.delta, spec.L
    ang = dumbbell_angles(spec, lam)
    out = [
        _cand("sigma1", "empty", 0.0, area(spec), lam),
        _cand("sigma2", "omega", perimeter(spec), 0.0, lam),
    ]
    validity = _dumbbell_opening_validity(spec, lam, ang)
    if ang is None:
        out.append(CandidateEnergy("sigma3", "balls", math.nan, math.nan, math.nan, validity))
    else:
        phi, th, om, psi = ang.phi, ang.theta, ang.omega, ang.psi
        per = 4 * (math.pi - phi) * R + 4 * psi * r + 2 * (math.pi - om) / lam
        fid = (
            d * L
            + (2 * r + d) * spec.x_f
            - 2 * th * r * r
            - 2 * (r + 1 / lam) * (R + r) * math.sin(psi)
        )
        out.append(CandidateEnergy("sigma3", "balls", per, fid, per + lam * fid, validity))
    return out


# ---------------------------------------------------------------------------
# shared
# ---------------------------------------------------------------------------

def _cand(cid: str, label: str, per: float, fid: float, lam: float) -> CandidateEnergy:
    return CandidateEnergy(cid, label, per, fid, per + lam * fid, Validity.VALID)


def energies(problem: Problem) -> list[CandidateEnergy]:
    """Dispatch to the family-specific candidate list."""
    s = problem.shape
    if isinstance(s, AnnulusSpec):
        return annulus_energies(s, problem.lam)
    if isinstance(s, SquareAnnulusSpec):
        return square_energies(s, problem.lam)
    if isinstance(s, DumbbellSpec):
        return dumbbell_energies(s, problem.lam)
    raise TypeError(f"unknown shape spec {type(s)}")


def argmin_candidate(cands: Sequence[CandidateEnergy]) -> WinnerReport:
    """Pick the valid candidate with minimal total; report near-exact ties."""
    valid = [c for c in cands if c.validity is Validity.VALID and math.isfinite(c.total)]
    if not valid:
        raise ValueError("no valid candidate in the list")
    best = min(c.total for c in valid)
    tol = TIE_RTOL * max(abs(best), 1e-300)
    winners = tuple(c.candidate for c in valid if c.total - best <= tol)
    return WinnerReport(winners, best)


# ---------------------------------------------------------------------------
# parameter sweeps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepAxis:
    name: str
    lo: float
    hi: float
    steps: int

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if not self.hi >= self.lo:
            raise ValueError("range must be non-decreasing")

    @property
    def values(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.steps)


@dataclass(frozen=True)
class PhaseCell:
    axis1_name: str
    axis1_value: float
    axis2_name: str
    axis2_value: float
    energies: Optional[tuple[CandidateEnergy, ...]]
    winner: Optional[WinnerReport]
    admissible: bool
    reason: str = ""


def _with_param(problem: Problem, name: str, value: float) -> Problem:
    if name == "lambda":
        return dataclasses.replace(problem, lam=value)
    if name not in {f.name for f in dataclasses.fields(problem.shape)}:
        raise ValueError(f"{type(problem.shape).__name__} has no parameter {name!r}")
    return dataclasses.replace(problem, shape=dataclasses.replace(problem.shape, **{name: value}))


def phase_sweep(base: Problem, axis1: SweepAxis, axis2: SweepAxis) -> list[PhaseCell]:
    """Evaluate all candidates over a 2-D parameter grid.

    Cells are emitted in deterministic order (axis2 outer, axis1 inner).
    Grid points whose parameters violate type invariants or admissibility
    are kept, marked inadmissible.
    """
    cells: list[PhaseCell] = []
    for v2 in axis2.values:
        for v1 in axis1.values:
            try:
                prob = _with_param(_with_param(base, axis2.name, float(v2)), axis1.name, float(v1))
            except ValueError as exc:
                cells.append(PhaseCell(axis1.name, float(v1), axis2.name, float(v2), None, None, False, str(exc)))
                continue
            rep = validate(prob)
            if not rep.ok:
                cells.append(
                    PhaseCell(
                        axis1.name, float(v1), axis2.name, float(v2), None, None, False,
                        "; ".join(rep.failures),
                    )
                )
                continue
            es = tuple(energies(prob))
            cells.append(
                PhaseCell(axis1.name, float(v1), axis2.name, float(v2), es, argmin_candidate(es), True)
            )
    return cells
