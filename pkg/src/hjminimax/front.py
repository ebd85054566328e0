"""Combinatorics of flat long wave fronts at a fixed time.

A front is a polyline in (q,z), ordered by the seed coordinate q0, carrying
the momentum p per vertex. This module extracts cusps with signs, sections
with branch indices, transversal double points, triangles hanging from
homogeneous double points, the triangle surgery, and the conservative
vanishing-triangle decision rule.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import BallTooLarge, IndexInconsistency, NonGeneric, NotLong

ANGLE_TOL = 1e-6      # radians; smaller intersection angles are non-generic
TIE_TOL = 1e-9        # (q,z) coincidence tolerance after bbox scaling
DEGENERACY_TOL = 1e-4  # |dq/dq0| floor (bbox-scaled) for a vanishing-slope plateau


@dataclass(frozen=True)
class FrontCurve:
    """Polyline (q,z) ordered along the Lagrangian curve (by q0)."""
    time: float
    q: np.ndarray
    z: np.ndarray
    p: np.ndarray
    q0: np.ndarray
    origin: np.ndarray = None  # per-vertex ancestor-vertex id, -1 for synthetic

    def __post_init__(self):
        if self.origin is None:
            object.__setattr__(self, "origin", np.arange(len(self.q)))

    def __len__(self):
        return len(self.q)

    def bbox_scale(self):
        wq = float(self.q.max() - self.q.min()) or 1.0
        wz = float(self.z.max() - self.z.min()) or 1.0
        return wq, wz

    def scaled_points(self):
        wq, wz = self.bbox_scale()
        return np.column_stack([self.q / wq, self.z / wz])


@dataclass(frozen=True)
class Cusp:
    q: float
    z: float
    sign: int          # +1: index rises by 1 along the traversal, -1: falls
    vertex: int        # vertex at which dq/dq0 reverses


@dataclass(frozen=True)
class Section:
    id: int
    start: int         # first vertex (inclusive)
    end: int           # last vertex (inclusive)
    index: int         # branch index; 0 on the noncompact ends
    kind: str          # "noncompact" or "compact"


@dataclass(frozen=True)
class DoublePoint:
    q: float
    z: float
    sections: tuple[int, int]
    homogeneous: bool
    seg_a: int         # earlier segment along the curve
    frac_a: float
    seg_b: int
    frac_b: float


@dataclass(frozen=True)
class Triangle:
    vertex: DoublePoint
    start_seg: int     # loop runs from (start_seg, vertex.frac_a) ...
    end_seg: int       # ... to (end_seg, vertex.frac_b)
    cusps: tuple[Cusp, Cusp]
    loop_sections: tuple[int, ...]
    branch_index: int  # shared index of the two branches at the vertex


@dataclass(frozen=True)
class FrontAnalysis:
    front: FrontCurve
    cusps: tuple[Cusp, ...]
    sections: tuple[Section, ...]
    doubles: tuple[DoublePoint, ...]
    triangles: tuple[Triangle, ...]

    def section_of_vertex(self, v: int) -> Section:
        for s in self.sections:
            if s.start <= v <= s.end:
                return s
        raise KeyError(v)


def build_front(strands, time: float | None = None) -> FrontCurve:
    """Assemble the isochrone front from strand final states."""
    strands = sorted(strands, key=lambda s: s.q0)
    q0 = np.array([s.q0 for s in strands])
    q = np.array([s.q[-1] for s in strands])
    p = np.array([s.p[-1] for s in strands])
    z = np.array([s.z[-1] for s in strands])
    if time is None:
        time = float(strands[0].times[-1])
    f = FrontCurve(time=time, q=q, z=z, p=p, q0=q0)
    dq = np.diff(q)
    if len(dq) and (dq[0] <= 0 or dq[-1] <= 0):
        raise NotLong("front endpoints are not graph-like (dq/dq0 <= 0 at an end)")
    return f


def detect_cusps(f: FrontCurve, degeneracy_tol: float = DEGENERACY_TOL) -> list[Cusp]:
    """Cusps sit where dq/dq0 changes sign between consecutive cells.

    Positions are refined by a local quadratic fit in q0. The sign follows
    the coorientation rule: positive when the traversal passes onto the
    branch lying above (in +z) the branch it leaves.
    """
    n = len(f)
    dq = np.diff(f.q)
    dq0 = np.diff(f.q0)
    wq, wz = f.bbox_scale()
    with np.errstate(divide="ignore", invalid="ignore"):
        slope = np.where(dq0 > 0, dq / np.where(dq0 > 0, dq0, 1.0), 0.0)

    flips = [i for i in range(len(dq) - 1) if dq[i] * dq[i + 1] < 0]

    # vanishing-slope plateau without a sign change: degenerate slice
    s_abs = np.abs(slope) / wq * (f.q0[-1] - f.q0[0])
    for i in range(1, len(slope) - 1):
        if s_abs[i] < degeneracy_tol and np.sign(dq[i - 1]) == np.sign(dq[i + 1]) \
                and dq[i - 1] * dq[i] > 0 and dq[i] * dq[i + 1] > 0:
            if s_abs[i] <= s_abs[i - 1] and s_abs[i] <= s_abs[i + 1]:
                raise NonGeneric(
                    f"near-vertical tangency at q0~{f.q0[i]:.6g} without a fold "
                    "(perestroika instant); shift t by epsilon")

    cusps = []
    for i in flips:
        v = i + 1  # vertex where the direction reverses
        qc, zc = _refine_cusp(f, v)
        sign = _cusp_sign(f, v, flips, n)
        cusps.append(Cusp(q=qc, z=zc, sign=sign, vertex=v))
    return cusps


def _refine_cusp(f: FrontCurve, v: int):
    """Quadratic fit of q(q0) and z(q0) through the reversal vertex."""
    lo, hi = max(0, v - 1), min(len(f) - 1, v + 1)
    s = f.q0[lo:hi + 1]
    if len(s) < 3 or len(set(s)) < 3:
        return float(f.q[v]), float(f.z[v])
    cq = np.polyfit(s - f.q0[v], f.q[lo:hi + 1], 2)
    cz = np.polyfit(s - f.q0[v], f.z[lo:hi + 1], 2)
    if cq[0] == 0:
        return float(f.q[v]), float(f.z[v])
    s_star = -cq[1] / (2.0 * cq[0])
    ds = min(abs(f.q0[v] - f.q0[lo]), abs(f.q0[hi] - f.q0[v]))
    s_star = float(np.clip(s_star, -ds, ds))
    return float(np.polyval(cq, s_star)), float(np.polyval(cz, s_star))


def _cusp_sign(f: FrontCurve, v: int, all_flips, n: int) -> int:
    """Compare the departing and arriving branches at a matched q near the cusp."""
    wq, wz = f.bbox_scale()
    # stay within the adjacent sections
    prev_v = max((fl + 1 for fl in all_flips if fl + 1 < v), default=0)
    next_v = min((fl + 1 for fl in all_flips if fl + 1 > v), default=n - 1)
    for k in range(2, max(3, next_v - v + 1)):
        j = v + k
        if j > next_v:
            break
        qb, zb = f.q[j], f.z[j]
        za = _interp_branch(f, prev_v, v, qb)
        if za is None:
            continue
        diff = (zb - za) / wz
        if abs(diff) > 1e-12:
            return 1 if diff > 0 else -1
    # fall back to the momentum asymmetry across the cusp
    return 1 if f.p[min(v + 1, n - 1)] >= f.p[max(v - 1, 0)] else -1


def _interp_branch(f: FrontCurve, lo: int, hi: int, qx: float):
    """z at abscissa qx on the (monotone-in-q) branch of vertices lo..hi."""
    qs = f.q[lo:hi + 1]
    zs = f.z[lo:hi + 1]
    if len(qs) < 2:
        return None
    if qs[0] > qs[-1]:
        qs, zs = qs[::-1], zs[::-1]
    if not (qs[0] <= qx <= qs[-1]):
        return None
    return float(np.interp(qx, qs, zs))


def split_sections(f: FrontCurve, cusps: Sequence[Cusp]) -> list[Section]:
    """Cut at cusps and propagate the branch index from the left noncompact
    branch (index 0) using the +-1 cusp-sign rule; both ends must close at 0."""
    bounds = [0] + [c.vertex for c in cusps] + [len(f) - 1]
    sections = []
    index = 0
    for i in range(len(bounds) - 1):
        kind = "noncompact" if i == 0 or i == len(bounds) - 2 else "compact"
        sections.append(Section(id=i, start=bounds[i], end=bounds[i + 1],
                                index=index, kind=kind))
        if i < len(cusps):
            index += cusps[i].sign
    if index != 0:
        raise IndexInconsistency(
            f"index walk ends at {index}, not 0: a cusp was missed or missigned")
    return sections


def double_points(f: FrontCurve, sections: Sequence[Section] | None = None,
                  cusps: Sequence[Cusp] = ()) -> list[DoublePoint]:
    """All transversal self-intersections between non-adjacent segments,
    found with a uniform spatial hash over bbox-scaled (q,z) boxes."""
    pts = f.scaled_points()
    n_seg = len(f) - 1
    if n_seg < 3:
        return []
    seg_lo = np.minimum(pts[:-1], pts[1:])
    seg_hi = np.maximum(pts[:-1], pts[1:])
    cell = max(1e-9, float(np.median(np.linalg.norm(pts[1:] - pts[:-1], axis=1))) * 4.0)

    grid: dict[tuple[int, int], list[int]] = {}
    for i in range(n_seg):
        x0, y0 = np.floor(seg_lo[i] / cell).astype(int)
        x1, y1 = np.floor(seg_hi[i] / cell).astype(int)
        for cx in range(x0, x1 + 1):
            for cy in range(y0, y1 + 1):
                grid.setdefault((cx, cy), []).append(i)

    seen = set()
    found = []
    for bucket in grid.values():
        for ai in range(len(bucket)):
            for bi in range(ai + 1, len(bucket)):
                i, j = bucket[ai], bucket[bi]
                if j - i <= 1 or (i, j) in seen:
                    continue
                seen.add((i, j))
                hit = _segment_intersection(pts[i], pts[i + 1], pts[j], pts[j + 1])
                if hit is None:
                    continue
                u, v = hit
                qx = f.q[i] + u * (f.q[i + 1] - f.q[i])
                zx = f.z[i] + u * (f.z[i + 1] - f.z[i])
                found.append((i, u, j, v, qx, zx))

    wq, wz = f.bbox_scale()
    for c in cusps:
        for i, u, j, v, qx, zx in found:
            if abs(qx - c.q) / wq < 10 * TIE_TOL and abs(zx - c.z) / wz < 10 * TIE_TOL:
                raise NonGeneric("cusp and double point coincide (degenerate time slice)")

    result = []
    for i, u, j, v, qx, zx in sorted(found):
        if sections is not None:
            sa = _section_of_segment(sections, i)
            sb = _section_of_segment(sections, j)
            homog = sa.index == sb.index
            ids = (sa.id, sb.id)
        else:
            homog = False
            ids = (-1, -1)
        result.append(DoublePoint(q=float(qx), z=float(zx), sections=ids,
                                  homogeneous=homog, seg_a=i, frac_a=float(u),
                                  seg_b=j, frac_b=float(v)))
    return result


def _section_of_segment(sections, seg):
    for s in sections:
        if s.start <= seg and seg + 1 <= s.end:
            return s
    # segment straddles a cusp vertex boundary; attach to the owner of seg
    for s in sections:
        if s.start <= seg <= s.end:
            return s
    raise KeyError(seg)


def _segment_intersection(a0, a1, b0, b1):
    """Intersection params (u, v) in (0,1)x(0,1), or None. Raises NonGeneric
    on a tangential (near-parallel, overlapping) crossing."""
    d1 = a1 - a0
    d2 = b1 - b0
    den = d1[0] * d2[1] - d1[1] * d2[0]
    n1 = np.hypot(*d1)
    n2 = np.hypot(*d2)
    if n1 == 0 or n2 == 0:
        return None
    r = b0 - a0
    if abs(den) < ANGLE_TOL * n1 * n2:
        # near-parallel: tangential only if the supporting lines nearly touch
        dist = abs(r[0] * d1[1] - r[1] * d1[0]) / n1
        if dist < 1e-7 * max(n1, n2):
            u = np.dot(r, d1) / (n1 * n1)
            if -0.5 <= u <= 1.5:
                raise NonGeneric("tangential self-intersection")
        return None
    u = (r[0] * d2[1] - r[1] * d2[0]) / den
    v = (r[0] * d1[1] - r[1] * d1[0]) / den
    eps = 1e-12
    if eps < u < 1 - eps and eps < v < 1 - eps:
        return float(u), float(v)
    return None


def find_triangles(f: FrontCurve, cusps: Sequence[Cusp],
                   sections: Sequence[Section],
                   doubles: Sequence[DoublePoint]) -> list[Triangle]:
    """A homogeneous double point whose closed subcurve holds exactly two
    cusps is the vertex of a triangle."""
    triangles = []
    for d in doubles:
        if not d.homogeneous:
            continue
        inside = [c for c in cusps if d.seg_a < c.vertex <= d.seg_b]
        if len(inside) != 2:
            continue
        loop_secs = sorted({_section_of_segment(sections, s).id
                            for s in range(d.seg_a, d.seg_b + 1)})
        branch_index = _section_of_segment(sections, d.seg_a).index
        triangles.append(Triangle(vertex=d, start_seg=d.seg_a, end_seg=d.seg_b,
                                  cusps=(inside[0], inside[1]),
                                  loop_sections=tuple(loop_secs),
                                  branch_index=branch_index))
    return triangles


def _loop_polygon(f: FrontCurve, T: Triangle):
    d = T.vertex
    qx = np.concatenate([[d.q], f.q[d.seg_a + 1: d.seg_b + 1], [d.q]])
    zx = np.concatenate([[d.z], f.z[d.seg_a + 1: d.seg_b + 1], [d.z]])
    return qx, zx


def _point_in_polygon(qx, zx, q, z):
    inside = False
    n = len(qx) - 1
    for i in range(n):
        q1, z1, q2, z2 = qx[i], zx[i], qx[i + 1], zx[i + 1]
        if (z1 > z) != (z2 > z):
            q_at = q1 + (z - z1) / (z2 - z1) * (q2 - q1)
            if q_at > q:
                inside = not inside
    return inside


def is_vanishing(f: FrontCurve, T: Triangle, sections: Sequence[Section],
                 doubles: Sequence[DoublePoint]) -> bool:
    """Conservative combinatorial stand-in for the isotopy condition.

    T is vanishing iff (i) no vertex of an outside section lies strictly
    inside T's bounded region, (ii) no homogeneous double point involving an
    outside section sits on T's arcs, and (iii) no outside section of index
    equal to T's branch index crosses the arcs.
    """
    qx, zx = _loop_polygon(f, T)
    wq, wz = f.bbox_scale()
    lo, hi = T.start_seg, T.end_seg

    # (i) outside-section vertices strictly inside the region
    for v in range(len(f)):
        if lo + 1 <= v <= hi:
            continue
        qv, zv = f.q[v], f.z[v]
        on_boundary = np.any((np.abs(qx - qv) / wq < 10 * TIE_TOL)
                             & (np.abs(zx - zv) / wz < 10 * TIE_TOL))
        if not on_boundary and _point_in_polygon(qx, zx, qv, zv):
            return False

    for d in doubles:
        if d is T.vertex:
            continue
        a_in = lo <= d.seg_a <= hi
        b_in = lo <= d.seg_b <= hi
        if a_in == b_in:
            continue  # fully inside-loop or fully outside crossings do not block
        out_seg = d.seg_b if a_in else d.seg_a
        out_sec = _section_of_segment(sections, out_seg)
        # (ii) homogeneous crossing with a third section on an arc
        if d.homogeneous and out_sec.id not in T.loop_sections:
            return False
        # (iii) arc crossed by a section of the triangle's branch index
        if out_sec.index == T.branch_index and out_sec.id not in T.loop_sections:
            return False
    return True


def default_ball_radius(f: FrontCurve, T: Triangle) -> float:
    """0.25 x (bbox-scaled) distance from the vertex to the nearest
    non-incident front feature."""
    wq, wz = f.bbox_scale()
    d = T.vertex
    vx, vz = d.q / wq, d.z / wz
    pts = f.scaled_points()
    incident = set(range(d.seg_a - 1, d.seg_a + 3)) | set(range(d.seg_b - 1, d.seg_b + 3))
    dists = [np.hypot(pts[i, 0] - vx, pts[i, 1] - vz)
             for i in range(len(f)) if i not in incident and not d.seg_a + 1 <= i <= d.seg_b]
    dmin = min(dists) if dists else 1.0
    return 0.25 * float(dmin)


def remove_triangle(f: FrontCurve, T: Triangle, ball_radius: float | None = None,
                    blend_points: int = 17, return_cuts: bool = False):
    """Delete the triangle subcurve and reconnect with a C1 cubic blend
    inside a ball around the vertex. Outside the ball the front is untouched."""
    if ball_radius is None:
        ball_radius = default_ball_radius(f, T)
    wq, wz = f.bbox_scale()
    d = T.vertex
    vx, vz = d.q / wq, d.z / wz

    def dist(i):
        return np.hypot(f.q[i] / wq - vx, f.z[i] / wz - vz)

    # walk outward along the retained branches to the ball boundary
    i1 = d.seg_a
    while i1 > 0 and dist(i1) <= ball_radius:
        i1 -= 1
    i2 = d.seg_b + 1
    while i2 < len(f) - 1 and dist(i2) <= ball_radius:
        i2 += 1
    if dist(i1) <= ball_radius or dist(i2) <= ball_radius:
        raise BallTooLarge("ball swallows a retained noncompact branch")

    # third sections inside the ball
    for v in range(len(f)):
        if i1 < v < i2 and (v <= d.seg_a or v > d.seg_b):
            continue  # vertices of the two incident branches inside the ball
        if (v <= i1 or v >= i2) and dist(v) < ball_radius:
            raise BallTooLarge(f"a third section enters the ball (vertex {v})")

    q1, z1 = f.q[i1], f.z[i1]
    q2, z2 = f.q[i2], f.z[i2]
    m1 = _segment_slope(f, i1)
    m2 = _segment_slope(f, i2 - 1 if i2 > 0 else 0)
    if not q1 < q2:
        raise BallTooLarge("ball boundary points are not q-ordered; radius too large")

    qs = np.linspace(q1, q2, blend_points + 2)[1:-1]
    h = q2 - q1
    s = (qs - q1) / h
    h00 = 2 * s ** 3 - 3 * s ** 2 + 1
    h10 = s ** 3 - 2 * s ** 2 + s
    h01 = -2 * s ** 3 + 3 * s ** 2
    h11 = s ** 3 - s ** 2
    zs = h00 * z1 + h10 * h * m1 + h01 * z2 + h11 * h * m2
    # p on the blend is the Hermite derivative dz/dq
    ps = (6 * s ** 2 - 6 * s) / h * z1 + (3 * s ** 2 - 4 * s + 1) * m1 \
        + (-6 * s ** 2 + 6 * s) / h * z2 + (3 * s ** 2 - 2 * s) * m2

    new_q = np.concatenate([f.q[:i1 + 1], qs, f.q[i2:]])
    new_z = np.concatenate([f.z[:i1 + 1], zs, f.z[i2:]])
    new_p = np.concatenate([f.p[:i1 + 1], ps, f.p[i2:]])
    # q0 on the blend is a monotone placeholder; origin=-1 marks it synthetic
    blend_q0 = np.linspace(f.q0[i1], f.q0[i2], len(qs) + 2)[1:-1]
    new_q0 = np.concatenate([f.q0[:i1 + 1], blend_q0, f.q0[i2:]])
    new_origin = np.concatenate([f.origin[:i1 + 1], np.full(len(qs), -1, dtype=int),
                                 f.origin[i2:]])
    out = FrontCurve(time=f.time, q=new_q, z=new_z, p=new_p, q0=new_q0,
                     origin=new_origin)
    if return_cuts:
        return out, (float(q1), float(q2))
    return out


def _segment_slope(f: FrontCurve, seg: int) -> float:
    dq = f.q[seg + 1] - f.q[seg]
    if dq == 0:
        return float(f.p[seg])
    return float((f.z[seg + 1] - f.z[seg]) / dq)


def analyze(f: FrontCurve) -> FrontAnalysis:
    """Full combinatorial analysis of a front."""
    cusps = detect_cusps(f)
    sections = split_sections(f, cusps)
    doubles = double_points(f, sections, cusps)
    triangles = find_triangles(f, cusps, sections, doubles)
    return FrontAnalysis(front=f, cusps=tuple(cusps), sections=tuple(sections),
                         doubles=tuple(doubles), triangles=tuple(triangles))


def front_to_json(analysis: FrontAnalysis) -> str:
    f = analysis.front
    payload = {
        "time": f.time,
        "vertices": [{"q0": _null_nan(a), "q": b, "z": c, "p": d}
                     for a, b, c, d in zip(f.q0, f.q, f.z, f.p)],
        "cusps": [{"q": c.q, "z": c.z, "sign": c.sign, "vertex": c.vertex}
                  for c in analysis.cusps],
        "sections": [{"id": s.id, "start": s.start, "end": s.end,
                      "index": s.index, "kind": s.kind} for s in analysis.sections],
        "double_points": [{"q": d.q, "z": d.z, "sections": list(d.sections),
                           "homogeneous": d.homogeneous} for d in analysis.doubles],
        "triangles": [{"vertex": {"q": t.vertex.q, "z": t.vertex.z},
                       "loop_sections": list(t.loop_sections),
                       "branch_index": t.branch_index} for t in analysis.triangles],
    }
    return json.dumps(payload, indent=2, sort_keys=True)


def _null_nan(x):
    x = float(x)
    return None if np.isnan(x) else x
