"""Independent numeric verification of the closed forms.

Three routes that never touch the closed-form angle algebra:

* :func:`numeric_tangency` places the extreme tangent balls by root-finding
  on the raw distance constraints (coarse angular scan + damped 2-D Newton,
  bisection fallback) and recovers the construction angles from the solved
  geometry.
* :func:`opening` computes the morphological opening of a raster by the
  Euclidean disc, from exact integer squared distance transforms, and
  :func:`measure_mask` measures raster area (with optional sub-pixel
  refinement) and perimeter (marching-squares contour of a box-smoothed
  indicator).
* :func:`opening_energy` assembles the opened set's boundary as explicit
  arcs from the tangency solution and evaluates the energy both ways
  (raster and arc-exact).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import ndimage
from skimage import measure as skmeasure

from .arcs import Arc, Piece, Segment, loop_area, loop_closure_error, loop_perimeter
from .analytic import AnnulusAngles, DumbbellAngles, SquareAngles
from .shapes import (
    AnnulusSpec,
    DumbbellSpec,
    PixelMask,
    Problem,
    ShapeSpec,
    SquareAnnulusSpec,
    contains,
    rasterize,
    validate,
)

NEWTON_TOL = 1e-13  # residual target, relative to the characteristic length
SCAN_POINTS = 720
ARC_EST_ERROR = 1e-8


# ---------------------------------------------------------------------------
# tangent-ball placement
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Contact:
    boundary: str
    point: tuple[float, float]


@dataclass(frozen=True)
class TangencyResult:
    center: tuple[float, float]
    contacts: tuple[Contact, ...]
    angles: object
    residual: float


def _two_circle_roots(a1, rho1, a2, rho2, scan_points: int = SCAN_POINTS) -> list[tuple[float, float]]:
    """All intersections of circles (a1, rho1) and (a2, rho2) by scan + Newton.

    The scan walks circle 1 and brackets sign changes of the distance
    residual to circle 2; each bracket is polished by a damped Newton
    iteration on both residuals, falling back to bisection along circle 1.
    """
    a1 = np.asarray(a1, float)
    a2 = np.asarray(a2, float)
    char = max(rho1, rho2, float(np.hypot(*(a2 - a1))))
    tol = NEWTON_TOL * char

    ts = np.linspace(0.0, 2 * math.pi, scan_points, endpoint=False)
    pts = a1 + rho1 * np.column_stack((np.cos(ts), np.sin(ts)))
    f2 = np.hypot(pts[:, 0] - a2[0], pts[:, 1] - a2[1]) - rho2

    roots: list[np.ndarray] = []

    def push(c):
        for r in roots:
            if np.hypot(*(r - c)) < 1e-6 * char:
                return
        roots.append(c)

    def newton(c0):
        c = c0.copy()
        for _ in range(60):
            v1 = c - a1
            v2 = c - a2
            n1 = np.hypot(*v1)
            n2 = np.hypot(*v2)
            if n1 == 0 or n2 == 0:
                return None
            f = np.array([n1 - rho1, n2 - rho2])
            if max(abs(f[0]), abs(f[1])) <= tol:
                return c
            jac = np.array([v1 / n1, v2 / n2])
            det = jac[0, 0] * jac[1, 1] - jac[0, 1] * jac[1, 0]
            if abs(det) < 1e-14:
                return None
            step = np.linalg.solve(jac, -f)
            lim = 0.25 * char
            nrm = np.hypot(*step)
            if nrm > lim:
                step *= lim / nrm
            c = c + step
        v1 = c - a1
        v2 = c - a2
        f = np.array([np.hypot(*v1) - rho1, np.hypot(*v2) - rho2])
        return c if max(abs(f[0]), abs(f[1])) <= tol else None

    def bisect(tlo, thi):
        def val(t):
            p = a1 + rho1 * np.array([math.cos(t), math.sin(t)])
            return np.hypot(*(p - a2)) - rho2

        flo = val(tlo)
        for _ in range(200):
            tm = 0.5 * (tlo + thi)
            fm = val(tm)
            if fm == 0.0 or (thi - tlo) < 1e-16:
                break
            if (fm > 0) == (flo > 0):
                tlo, flo = tm, fm
            else:
                thi = tm
        tm = 0.5 * (tlo + thi)
        return a1 + rho1 * np.array([math.cos(tm), math.sin(tm)])

    for k in range(scan_points):
        k2 = (k + 1) % scan_points
        if f2[k] == 0.0:
            push(pts[k])
            continue
        if f2[k] * f2[k2] < 0:
            tlo = ts[k]
            thi = ts[k2] if k2 != 0 else 2 * math.pi
            seed = a1 + rho1 * np.array([math.cos(0.5 * (tlo + thi)), math.sin(0.5 * (tlo + thi))])
            c = newton(seed)
            if c is None:
                c = bisect(tlo, thi)
            push(c)
    return [(float(c[0]), float(c[1])) for c in roots]


def _residual(c, a1, rho1, a2, rho2) -> float:
    return max(
        abs(math.dist(c, tuple(a1)) - rho1),
        abs(math.dist(c, tuple(a2)) - rho2),
    )


def numeric_tangency(shape: ShapeSpec, lam: float) -> list[TangencyResult]:
    """Solve the extreme tangent-ball placement for one symmetry-distinct
    position; empty list when no such ball exists."""
    rep = validate(Problem(shape, lam))
    if not rep.ok:
        raise ValueError("inadmissible problem: " + ", ".join(rep.failures))
    rho = 1 / lam

    if isinstance(shape, AnnulusSpec):
        if shape.d <= 0:
            return []
        a1, rho1 = (0.0, 0.0), shape.R - rho
        a2, rho2 = (shape.d, 0.0), shape.r + rho
        roots = [c for c in _two_circle_roots(a1, rho1, a2, rho2) if c[1] > 0]
        if not roots:
            return []
        c = roots[0]
        u = np.array(c) / np.hypot(*c)
        w = (np.array(c) - (shape.d, 0.0)) / np.hypot(c[0] - shape.d, c[1])
        contacts = (
            Contact("outer_circle", tuple(shape.R * u)),
            Contact("inner_circle", tuple(np.array((shape.d, 0.0)) + shape.r * w)),
        )
        ang = AnnulusAngles(
            phi=math.atan2(c[1], c[0] - shape.d), theta=math.atan2(c[1], c[0])
        )
        return [TangencyResult(c, contacts, ang, _residual(c, a1, rho1, a2, rho2))]

    if isinstance(shape, SquareAnnulusSpec):
        half_out = shape.L / 2 + shape.delta
        a1, rho1 = (half_out, half_out), shape.r - rho
        a2, rho2 = (shape.L / 2, shape.L / 2), shape.r + rho
        diag = math.pi / 4
        roots = _two_circle_roots(a1, rho1, a2, rho2)
        # keep the ball counterclockwise of the corner diagonal
        roots = [c for c in roots if math.atan2(c[1] - a1[1], c[0] - a1[0]) > diag]
        if not roots:
            return []
        c = roots[0]
        u = (np.array(c) - a1) / np.hypot(c[0] - a1[0], c[1] - a1[1])
        w = (np.array(c) - a2) / np.hypot(c[0] - a2[0], c[1] - a2[1])
        contacts = (
            Contact("outer_arc", tuple(np.array(a1) + shape.r * u)),
            Contact("inner_arc", tuple(np.array(a2) + shape.r * w)),
        )
        ang = SquareAngles(
            phi=abs(math.atan2(c[1] - a1[1], c[0] - a1[0]) - diag),
            theta=abs(math.atan2(c[1] - a2[1], c[0] - a2[0]) - diag),
        )
        return [TangencyResult(c, contacts, ang, _residual(c, a1, rho1, a2, rho2))]

    if isinstance(shape, DumbbellSpec):
        up = (shape.x_f, shape.r + shape.delta / 2)
        dn = (shape.x_f, -(shape.r + shape.delta / 2))
        rr = shape.r + rho
        roots = [c for c in _two_circle_roots(up, rr, dn, rr) if c[0] < shape.x_f]
        if not roots:
            return []
        c = roots[0]
        u = (np.array(c) - up) / np.hypot(c[0] - up[0], c[1] - up[1])
        w = (np.array(c) - dn) / np.hypot(c[0] - dn[0], c[1] - dn[1])
        contacts = (
            Contact("upper_fillet", tuple(np.array(up) + shape.r * -u)),
            Contact("lower_fillet", tuple(np.array(dn) + shape.r * -w)),
        )
        theta = math.atan2(up[0] - c[0], up[1] - c[1])
        phi = shape.fill_angle
        ang = DumbbellAngles(
            phi=phi, theta=theta, omega=math.pi / 2 + theta, psi=math.pi / 2 - theta - phi
        )
        return [TangencyResult(c, contacts, ang, _residual(c, up, rr, dn, rr))]

    raise TypeError(f"unknown shape spec {type(shape)}")


# ---------------------------------------------------------------------------
# raster measurement
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Measure:
    area: float
    perimeter: float
    method: str
    est_error: float


def _sq_edt(mask_bool: np.ndarray) -> np.ndarray:
    """Exact integer squared Euclidean distance to the nearest False pixel."""
    if mask_bool.all():
        return np.full(mask_bool.shape, np.iinfo(np.int64).max, dtype=np.int64)
    ind = ndimage.distance_transform_edt(mask_bool, return_distances=False, return_indices=True)
    ii, jj = np.indices(mask_bool.shape)
    di = ind[0].astype(np.int64) - ii
    dj = ind[1].astype(np.int64) - jj
    return di * di + dj * dj


def measure_mask(mask: PixelMask) -> Measure:
    """Raster area and perimeter of a binary mask.

    Area counts pixels (refining boundary pixels on a 2x2 subgrid when the
    mask carries its membership predicate); perimeter is the length of the
    0.5 isocontour of the 3x3 box-smoothed indicator, which removes the
    staircase bias of simple edge counting.
    """
    bits = mask.bits
    h = mask.spacing
    if not bits.any():
        return Measure(0.0, 0.0, "raster", 0.0)

    if mask.predicate is not None:
        st = np.ones((3, 3), bool)
        band = ndimage.binary_dilation(bits, st) & ~ndimage.binary_erosion(bits, st)
        area = float((bits & ~band).sum()) * h * h
        if band.any():
            X, Y = mask.centers()
            bx, by = X[band], Y[band]
            frac = np.zeros(bx.shape)
            for ox in (-0.25, 0.25):
                for oy in (-0.25, 0.25):
                    frac += mask.predicate(bx + ox * h, by + oy * h)
            area += float(frac.sum()) / 4.0 * h * h
    else:
        area = float(bits.sum()) * h * h

    smooth = ndimage.uniform_filter(bits.astype(np.float64), size=3, mode="constant")
    per = 0.0
    for contour in skmeasure.find_contours(smooth, 0.5):
        seg = np.diff(contour, axis=0)
        per += float(np.hypot(seg[:, 0], seg[:, 1]).sum())
    per *= h

    est = 2.0 * h * per / area if area > 0 else 0.0
    return Measure(area, per, "raster", est)


def opening(mask: PixelMask, radius: float) -> PixelMask:
    """Morphological opening by the closed Euclidean disc of ``radius``.

    Erosion and dilation both come from exact integer squared distance
    transforms, so the operation is a true lattice adjunction: idempotent
    and anti-extensive bit-exactly.
    """
    if radius < mask.spacing:
        raise ValueError(f"radius {radius} below grid spacing {mask.spacing}")
    rho2 = (radius / mask.spacing) ** 2
    if not mask.bits.any():
        return mask.with_bits(np.zeros_like(mask.bits))
    eroded = _sq_edt(mask.bits) > rho2
    if not eroded.any():
        return mask.with_bits(np.zeros_like(mask.bits))
    opened = _sq_edt(~eroded) <= rho2
    return mask.with_bits(opened)


def candidate_energy_numeric(
    shape: ShapeSpec, lam: float, candidate: PixelMask, omega: Optional[PixelMask] = None
) -> float:
    """Raster energy of an arbitrary candidate mask against the shape."""
    if omega is None:
        omega = rasterize(shape, candidate.width, _padding_of(shape, candidate))
    if not candidate.same_grid(omega):
        raise ValueError("candidate mask grid does not match the rasterized region")
    per = measure_mask(candidate).perimeter
    sym = int(np.logical_xor(candidate.bits, omega.bits).sum())
    return per + lam * sym * candidate.spacing**2


def _padding_of(shape: ShapeSpec, mask: PixelMask) -> float:
    from .shapes import bounding_box

    xmin, _, xmax, _ = bounding_box(shape)
    return (mask.width * mask.spacing - (xmax - xmin)) / 2


# ---------------------------------------------------------------------------
# arc-exact opening energy
# ---------------------------------------------------------------------------

def omega_loops(shape: ShapeSpec) -> list[list[Piece]]:
    """The region boundary as arc/segment loops (holes clockwise)."""
    if isinstance(shape, AnnulusSpec):
        return [
            [Arc((0.0, 0.0), shape.R, 0.0, 2 * math.pi)],
            [Arc((shape.d, 0.0), shape.r, 0.0, -2 * math.pi)],
        ]
    if isinstance(shape, SquareAnnulusSpec):
        return [
            _rounded_square_loop(shape.L / 2 + shape.delta, shape.r, ccw=True),
            _rounded_square_loop(shape.L / 2, shape.r, ccw=False),
        ]
    if isinstance(shape, DumbbellSpec):
        return [_dumbbell_loop(shape)]
    raise TypeError(f"unknown shape spec {type(shape)}")


def _rounded_square_loop(half: float, r: float, ccw: bool) -> list[Piece]:
    out: list[Piece] = []
    corners = [(half, half), (-half, half), (-half, -half), (half, -half)]
    for k in range(4):
        cx, cy = corners[k]
        a0 = k * math.pi / 2
        out.append(Arc((cx, cy), r, a0, math.pi / 2))
        nx, ny = corners[(k + 1) % 4]
        a1 = a0 + math.pi / 2
        p0 = (cx + r * math.cos(a1), cy + r * math.sin(a1))
        p1 = (nx + r * math.cos(a1), ny + r * math.sin(a1))
        out.append(Segment(p0, p1))
    if not ccw:
        out = _reverse_loop(out)
    return out


def _reverse_loop(pieces: list[Piece]) -> list[Piece]:
    rev: list[Piece] = []
    for p in reversed(pieces):
        if isinstance(p, Arc):
            rev.append(Arc(p.center, p.radius, p.a0 + p.sweep, -p.sweep))
        else:
            rev.append(Segment(p.p1, p.p0))
    return rev


def _dumbbell_loop(s: DumbbellSpec) -> list[Piece]:
    phi = s.fill_angle
    xf, hw = s.x_f, s.r + s.delta / 2
    cr = s.L + 2 * xf  # right disc centre x
    fl_up, fl_dn = (xf, hw), (xf, -hw)
    fr_up, fr_dn = (cr - xf, hw), (cr - xf, -hw)
    t_h = s.delta / 2
    fillet_sweep = -(math.pi / 2 - phi)  # fillets are concave: traversed clockwise
    return [
        # left disc, the long way around
        Arc((0.0, 0.0), s.R, phi, 2 * (math.pi - phi)),
        # lower-left fillet from disc tangency down to the handle edge
        Arc(fl_dn, s.r, math.pi - phi, fillet_sweep),
        Segment((xf, -t_h), (cr - xf, -t_h)),
        Arc(fr_dn, s.r, math.pi / 2, fillet_sweep),
        Arc((cr, 0.0), s.R, math.pi + phi, 2 * (math.pi - phi)),
        Arc(fr_up, s.r, -phi, fillet_sweep),
        Segment((cr - xf, t_h), (xf, t_h)),
        Arc(fl_up, s.r, -math.pi / 2, fillet_sweep),
    ]


def omega_measure_arcs(shape: ShapeSpec) -> Measure:
    """Arc-exact area and perimeter of the region itself."""
    loops = omega_loops(shape)
    for lp in loops:
        gap = loop_closure_error(lp)
        if gap > 1e-9:
            raise AssertionError(f"open boundary loop, gap {gap}")
    area = sum(loop_area(lp) for lp in loops)
    per = sum(loop_perimeter(lp) for lp in loops)
    return Measure(area, per, "arc-exact", ARC_EST_ERROR)


def opening_loops(shape: ShapeSpec, lam: float) -> list[list[Piece]]:
    """Boundary of the union of contained (1/lambda)-balls, assembled from
    the numeric tangency solution."""
    res = numeric_tangency(shape, lam)
    if not res:
        raise ValueError("no tangent ball: opening boundary has no two-ball pinch")
    c = res[0].center
    rho = 1 / lam

    if isinstance(shape, AnnulusSpec):
        th_b = math.atan2(c[1], c[0])
        ph_b = math.atan2(c[1], c[0] - shape.d)
        cap = math.pi - ph_b + th_b
        c_low = (c[0], -c[1])
        return [[
            Arc((0.0, 0.0), shape.R, th_b, 2 * math.pi - 2 * th_b),
            Arc(c_low, rho, -th_b, cap),
            Arc((shape.d, 0.0), shape.r, -ph_b, -(2 * math.pi - 2 * ph_b)),
            Arc(c, rho, math.pi + ph_b, cap),
        ]]

    if isinstance(shape, SquareAnnulusSpec):
        half_out = shape.L / 2 + shape.delta
        c_out = (half_out, half_out)
        c_in = (shape.L / 2, shape.L / 2)
        diag = math.pi / 4
        ph_b = math.atan2(c[1] - c_out[1], c[0] - c_out[0]) - diag
        th_b = math.atan2(c[1] - c_in[1], c[0] - c_in[0]) - diag
        cap = math.pi - ph_b + th_b
        c_mirror = (c[1], c[0])  # reflected across the corner diagonal
        pocket = [
            Arc(c_out, shape.r, diag - ph_b, 2 * ph_b),
            Arc(c, rho, diag + ph_b, cap),
            Arc(c_in, shape.r, diag + th_b, -2 * th_b),
            Arc(c_mirror, rho, diag - th_b - math.pi, cap),
        ]
        loops = [pocket]
        for k in (1, 2, 3):  # the other three corners by rotation
            rot = k * math.pi / 2
            co, si = math.cos(rot), math.sin(rot)
            loops.append([
                Arc(
                    (a.center[0] * co - a.center[1] * si, a.center[0] * si + a.center[1] * co),
                    a.radius,
                    a.a0 + rot,
                    a.sweep,
                )
                for a in pocket
            ])
        return loops

    if isinstance(shape, DumbbellSpec):
        phi = s_phi = shape.fill_angle
        th_b = math.atan2(shape.x_f - c[0], (shape.r + shape.delta / 2) - c[1])
        om_b = math.pi / 2 + th_b
        psi_b = math.pi - om_b - s_phi
        xf, hw = shape.x_f, shape.r + shape.delta / 2
        cr = shape.L + 2 * xf
        lobe = [
            Arc((0.0, 0.0), shape.R, phi, 2 * (math.pi - phi)),
            Arc((xf, -hw), shape.r, math.pi - phi, -psi_b),
            Arc(c, 1 / lam, th_b - math.pi / 2, math.pi - 2 * th_b),
            Arc((xf, hw), shape.r, -om_b, -psi_b),
        ]
        # right lobe: mirror through the vertical line x = cr/2
        right = []
        for a in reversed(lobe):
            right.append(
                Arc((cr - a.center[0], a.center[1]), a.radius, math.pi - (a.a0 + a.sweep), a.sweep)
            )
        return [lobe, right]

    raise TypeError(f"unknown shape spec {type(shape)}")


@dataclass(frozen=True)
class OpeningEnergy:
    energy_raster: float
    perimeter_raster: float
    fidelity_area_raster: float
    est_error_raster: float
    energy_arc: float
    perimeter_arc: float
    fidelity_area_arc: float
    est_error_arc: float


def opening_energy(
    shape: ShapeSpec, lam: float, resolution: int = 2048, padding: float = 0.05
) -> OpeningEnergy:
    """Energy of the opened region, measured on a raster and arc-exactly."""
    omega = rasterize(shape, resolution, padding)
    opened = opening(omega, 1 / lam)
    m = measure_mask(opened)
    sym = int(np.logical_xor(omega.bits, opened.bits).sum())
    fid_raster = sym * omega.spacing**2
    e_raster = m.perimeter + lam * fid_raster

    loops = opening_loops(shape, lam)
    for lp in loops:
        gap = loop_closure_error(lp)
        if gap > 1e-9:
            raise AssertionError(f"open opening loop, gap {gap}")
    per_arc = sum(loop_perimeter(lp) for lp in loops)
    area_arc = sum(loop_area(lp) for lp in loops)
    om = omega_measure_arcs(shape)
    fid_arc = om.area - area_arc
    e_arc = per_arc + lam * fid_arc
    return OpeningEnergy(
        e_raster, m.perimeter, fid_raster, m.est_error,
        e_arc, per_arc, fid_arc, ARC_EST_ERROR,
    )


# ---------------------------------------------------------------------------
# candidate rasters
# ---------------------------------------------------------------------------

def candidate_ids(shape: ShapeSpec) -> list[str]:
    if isinstance(shape, DumbbellSpec):
        return ["sigma1", "sigma2", "sigma3"]
    return ["sigma1", "sigma2", "sigma3", "sigma4", "sigma5"]


def candidate_mask(shape: ShapeSpec, lam: float, candidate: str, like: PixelMask) -> PixelMask:
    """Rasterize one analytic candidate on the grid of ``like``."""
    X, Y = like.centers()
    empty = np.zeros_like(like.bits)
    if isinstance(shape, AnnulusSpec):
        table = {
            "sigma1": lambda: X * X + Y * Y <= shape.R**2,
            "sigma2": lambda: empty,
            "sigma3": lambda: contains(shape, X, Y),
            "sigma4": lambda: opening(like.with_bits(contains(shape, X, Y)), 1 / lam).bits,
            "sigma5": lambda: (X - shape.d) ** 2 + Y * Y <= shape.r**2,
        }
    elif isinstance(shape, SquareAnnulusSpec):
        from .shapes import _dist_to_square

        table = {
            "sigma1": lambda: _dist_to_square(X, Y, shape.L / 2 + shape.delta) <= shape.r,
            "sigma2": lambda: empty,
            "sigma3": lambda: contains(shape, X, Y),
            "sigma4": lambda: opening(like.with_bits(contains(shape, X, Y)), 1 / lam).bits,
            "sigma5": lambda: _dist_to_square(X, Y, shape.L / 2) <= shape.r,
        }
    elif isinstance(shape, DumbbellSpec):
        table = {
            "sigma1": lambda: empty,
            "sigma2": lambda: contains(shape, X, Y),
            "sigma3": lambda: opening(like.with_bits(contains(shape, X, Y)), 1 / lam).bits,
        }
    else:
        raise TypeError(f"unknown shape spec {type(shape)}")
    if candidate not in table:
        raise ValueError(f"unknown candidate {candidate!r} for {type(shape).__name__}")
    return like.with_bits(np.asarray(table[candidate]()))
