"""Triangle covering constructions with perimeter accounting.

A refinement step replaces a triangle by diamond-carrying cells plus
controlled leftovers.  Matching isosceles triangles receive one inscribed
diamond (half the area; two leftovers similar to the parent at ratio 1/2);
aligned boxes receive a row of diamonds with isosceles gap triangles
between them and four end triangles; generic triangles go through
altitude split -> medial rectangle -> square packing -> rotated inner
squares -> diamond rows.

Child perimeters are summed per class (good / leftover-isosceles /
leftover-generic) for the BV growth ledger; the good area fraction of a
generic cover is at least 2^-5 of the parent.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math
from typing import List, Optional

import numpy as np

from . import cell as cl
from . import inapprox as ia
from .errors import InvalidDomainError, WrongEntryPointError

ISO_TOL = 1e-9           # aspect/axis tolerance for isosceles membership
GOOD_FRACTION = 2.0 ** -5
C2_UNIFORM = 42.0


def c0_constant(h: float) -> float:
    """Per-cover perimeter constant of the h-structured child class."""
    return 10.0 * np.floor(1.0 / h + 1e-12)


def tri_area(v: np.ndarray) -> float:
    """Signed area; positive for counterclockwise vertices."""
    return 0.5 * ((v[1, 0] - v[0, 0]) * (v[2, 1] - v[0, 1])
                  - (v[1, 1] - v[0, 1]) * (v[2, 0] - v[0, 0]))


def tri_areas(verts: np.ndarray) -> np.ndarray:
    a = verts[:, 1] - verts[:, 0]
    b = verts[:, 2] - verts[:, 0]
    return 0.5 * (a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0])


def tri_perimeters(verts: np.ndarray) -> np.ndarray:
    e = verts - np.roll(verts, 1, axis=1)
    return np.linalg.norm(e, axis=2).sum(axis=1)


def _fix_ccw(verts: np.ndarray) -> np.ndarray:
    flip = tri_areas(verts) < 0
    if np.any(flip):
        verts[flip] = verts[flip][:, [0, 2, 1]]
    return verts


def iso_membership(v: np.ndarray, h: float, tol: float = ISO_TOL):
    """(member, apex_direction) test against the base/height = 2h class.

    The base is the short side; the axis runs from the base midpoint to
    the apex.  Membership requires base/height = 2h and the two legs to
    match, both within tol relative to the triangle scale.
    """
    v = np.asarray(v, dtype=float)
    sides = np.array([np.linalg.norm(v[2] - v[1]),
                      np.linalg.norm(v[0] - v[2]),
                      np.linalg.norm(v[1] - v[0])])
    apex = int(np.argmin(sides))
    b1, b2 = v[(apex + 1) % 3], v[(apex + 2) % 3]
    a = v[apex]
    m = 0.5 * (b1 + b2)
    height = np.linalg.norm(a - m)
    scale = sides.max()
    if height <= tol * scale:
        return False, None
    base = sides[apex]
    legs_ok = abs(np.linalg.norm(a - b1) - np.linalg.norm(a - b2)) <= tol * scale
    aspect_ok = abs(base - 2.0 * h * height) <= tol * scale
    if not (legs_ok and aspect_ok):
        return False, None
    return True, (a - m) / height


@dataclass
class CoverResult:
    """Children of one covered triangle, classed for the perimeter ledger.

    good marks the pieces of replaced diamonds (new gradients); leftovers
    keep the parent's affine map.  iso_h > 0 tags leftover isosceles
    children with their class aspect and apex axis, making them eligible
    for the inscribed-diamond fast path later.
    """
    verts: np.ndarray        # (n,3,2), counterclockwise
    grads: np.ndarray        # (n,2,2)
    offs: np.ndarray         # (n,2)
    stages: np.ndarray       # (n,) int16
    phases: np.ndarray       # (n,) uint8, 1 or 2
    good: np.ndarray         # (n,) bool
    star: np.ndarray         # (n,) bool
    iso_h: np.ndarray        # (n,) float, 0 for untagged children
    iso_axis: np.ndarray     # (n,2)
    diam_scales: np.ndarray  # (m,) scale of every placed diamond
    perimeter_good: float
    perimeter_rest_iso: float
    perimeter_rest_generic: float
    parent_perimeter: float
    kind: str                # "iso" | "rect" | "generic"

    @property
    def n_children(self) -> int:
        return self.verts.shape[0]

    def areas(self) -> np.ndarray:
        return tri_areas(self.verts)

    def good_area(self) -> float:
        return float(tri_areas(self.verts[self.good]).sum())


class _Sink:
    """Accumulates child batches before concatenation."""

    def __init__(self, plan: cl.RefinePlan, parent_off: np.ndarray,
                 parent_per: float, kind: str):
        self.plan = plan
        self.poff = np.asarray(parent_off, dtype=float)
        self.parent_per = parent_per
        self.kind = kind
        self.batches: List[tuple] = []
        self.scales: List[np.ndarray] = []
        self.per = {"good": 0.0, "iso": 0.0, "gen": 0.0}

    def add_diamonds(self, centers: np.ndarray, r: float):
        """Place diamonds of one common scale at the given centers."""
        p = self.plan
        nd = centers.shape[0]
        verts = (centers[:, None, None, :]
                 + r * p.unit_verts[None]).reshape(-1, 3, 2)
        mdiff = p.M[None] - p.grads                      # (np,2,2)
        offs = (np.einsum("jkl,il->ijk", mdiff, centers) + r * p.bvec[None]
                + self.poff).reshape(-1, 2)
        grads = np.broadcast_to(p.grads, (nd,) + p.grads.shape).reshape(-1, 2, 2)
        stages = np.broadcast_to(p.stages, (nd, p.n_pieces)).reshape(-1)
        phases = np.broadcast_to(p.phases, (nd, p.n_pieces)).reshape(-1)
        star = np.broadcast_to(p.star, (nd, p.n_pieces)).reshape(-1)
        n = verts.shape[0]
        self.batches.append((verts, grads, offs,
                             stages.astype(np.int16),
                             phases.astype(np.uint8),
                             np.ones(n, dtype=bool), star.astype(bool),
                             np.zeros(n), np.zeros((n, 2))))
        self.scales.append(np.full(nd, r))
        self.per["good"] += nd * r * p.perim_unit

    def add_leftovers(self, verts: np.ndarray, iso_h: float = 0.0,
                      iso_axes: Optional[np.ndarray] = None):
        """Children keeping the parent map; iso_h > 0 tags the iso class."""
        verts = _fix_ccw(np.asarray(verts, dtype=float).reshape(-1, 3, 2))
        n = verts.shape[0]
        if n == 0:
            return
        p = self.plan
        grads = np.broadcast_to(p.M, (n, 2, 2))
        offs = np.broadcast_to(self.poff, (n, 2))
        stages = np.full(n, p.stage, dtype=np.int16)
        phases = np.full(n, p.parent_phase, dtype=np.uint8)
        key = "iso" if iso_h > 0.0 else "gen"
        axes = (np.asarray(iso_axes, dtype=float).reshape(n, 2)
                if iso_h > 0.0 else np.zeros((n, 2)))
        self.batches.append((verts, grads, offs, stages, phases,
                             np.zeros(n, dtype=bool), np.zeros(n, dtype=bool),
                             np.full(n, iso_h), axes))
        self.per[key] += float(tri_perimeters(verts).sum())

    def result(self) -> CoverResult:
        cols = [np.concatenate([b[i] for b in self.batches])
                for i in range(9)]
        scales = (np.concatenate(self.scales) if self.scales
                  else np.zeros(0))
        return CoverResult(cols[0], cols[1], cols[2], cols[3], cols[4],
                           cols[5], cols[6], cols[7], cols[8], scales,
                           self.per["good"], self.per["iso"], self.per["gen"],
                           self.parent_per, self.kind)


def _perp(d: np.ndarray) -> np.ndarray:
    return np.array([-d[1], d[0]])


def _stack_into(sink: _Sink, p0: np.ndarray, e_len: np.ndarray,
                e_w: np.ndarray, length: float, n: int):
    """A row of n diamonds across the box p0 + [0,length]e_len x [0,nh*length]e_w."""
    p = sink.plan
    h = p.h
    w = h * length
    r = 0.5 * length
    i = np.arange(n)[:, None]
    mid = p0 + r * e_len
    centers = mid + (i + 0.5) * w * e_w
    sink.add_diamonds(centers, r)
    tops = p0 + length * e_len + (i + 0.5) * w * e_w
    bots = p0 + (i + 0.5) * w * e_w
    if n > 1:
        touch = mid + (np.arange(1, n)[:, None]) * w * e_w
        upper = np.stack([tops[:-1], tops[1:], touch], axis=1)
        lower = np.stack([bots[1:], bots[:-1], touch], axis=1)
        sink.add_leftovers(upper, iso_h=h,
                           iso_axes=np.broadcast_to(-e_len, (n - 1, 2)))
        sink.add_leftovers(lower, iso_h=h,
                           iso_axes=np.broadcast_to(e_len, (n - 1, 2)))
    # four end triangles (right-angled, legs w/2 and length/2)
    s_left = mid
    s_right = mid + n * w * e_w
    c00, c01 = p0, p0 + length * e_len
    c10, c11 = p0 + n * w * e_w, p0 + length * e_len + n * w * e_w
    ends = np.stack([
        np.stack([c00, bots[0], s_left]),
        np.stack([c01, s_left, tops[0]]),
        np.stack([c10, s_right, bots[-1]]),
        np.stack([c11, tops[-1], s_right]),
    ])
    sink.add_leftovers(ends)


@dataclass
class _StackSpec:
    p0: np.ndarray
    e_len: np.ndarray
    e_w: np.ndarray
    length: float
    n: int


@dataclass
class GenericSpec:
    """Precomputed geometry of one generic cover; cheap to count."""
    stacks: List[_StackSpec] = field(default_factory=list)
    tris: List[np.ndarray] = field(default_factory=list)
    n_pieces: int = 10

    def child_count(self) -> int:
        c = len(self.tris)
        for s in self.stacks:
            c += self.n_pieces * s.n + 2 * (s.n - 1) + 4
        return c


def _square_into(spec: GenericSpec, q: np.ndarray, e1: np.ndarray,
                 e2: np.ndarray, a: float, dhat: np.ndarray, nstack: int):
    """One square of side a: align the diamond row with dhat.

    If a side is parallel to dhat the row fills the square directly;
    otherwise an inner square rotated onto the dhat frame (side ratio
    1/(cos+sin), hence at least half the area) is filled and four corner
    triangles are left over.
    """
    c = float(np.dot(dhat, e1))
    s = float(np.dot(dhat, e2))
    if c < 0:
        q, e1, c = q + a * e1, -e1, -c
    if s < 0:
        q, e2, s = q + a * e2, -e2, -s
    if s <= ISO_TOL:
        spec.stacks.append(_StackSpec(q, e1, e2, a, nstack))
        return
    if c <= ISO_TOL:
        spec.stacks.append(_StackSpec(q, e2, e1, a, nstack))
        return
    t = s / (c + s)
    ap = a / (c + s)
    v0 = q + t * a * e1
    v1 = q + a * e1 + t * a * e2
    v2 = q + a * e1 + a * e2 - t * a * e1
    v3 = q + (1.0 - t) * a * e2
    spec.tris.extend([
        np.stack([q, v0, v3]),
        np.stack([q + a * e1, v1, v0]),
        np.stack([q + a * e1 + a * e2, v2, v1]),
        np.stack([q + a * e2, v3, v2]),
    ])
    e_w = (v3 - v0) / ap
    spec.stacks.append(_StackSpec(v0, dhat.copy(), e_w, ap, nstack))


def _right_into(spec: GenericSpec, v0: np.ndarray, va: np.ndarray,
                vb: np.ndarray, dhat: np.ndarray, nstack: int):
    """Right triangle with the right angle at v0: medial rectangle + packing."""
    la = np.linalg.norm(va - v0)
    lb = np.linalg.norm(vb - v0)
    if la > lb:
        va, vb, la, lb = vb, va, lb, la
    e1 = (va - v0) / la
    e2 = (vb - v0) / lb
    m1 = v0 + 0.5 * la * e1
    m2 = v0 + 0.5 * lb * e2
    hyp = v0 + 0.5 * la * e1 + 0.5 * lb * e2
    spec.tris.append(np.stack([m1, va, hyp]))
    spec.tris.append(np.stack([m2, hyp, vb]))
    a = 0.5 * la
    width = 0.5 * lb
    m = int(np.floor(width / a + 1e-9))
    for i in range(m):
        _square_into(spec, v0 + i * a * e2, e2, e1, a, dhat, nstack)
    res = width - m * a
    if res > 1e-12 * a:
        c0 = v0 + m * a * e2
        c1 = c0 + res * e2
        spec.tris.append(np.stack([c0, c1, c1 + a * e1]))
        spec.tris.append(np.stack([c0, c1 + a * e1, c0 + a * e1]))


def generic_spec(tri: np.ndarray, plan: cl.RefinePlan) -> GenericSpec:
    """Geometry of the generic cover of tri; no children materialized."""
    v = np.asarray(tri, dtype=float)
    area = tri_area(v)
    if area < 0:
        v = v[[0, 2, 1]]
        area = -area
    if area <= 0.0:
        raise InvalidDomainError("degenerate triangle")
    nstack = int(round(1.0 / plan.h))
    if abs(nstack * plan.h - 1.0) > 1e-9:
        raise InvalidDomainError(f"aspect {plan.h} does not divide the unit "
                                 "square row")
    spec = GenericSpec(n_pieces=plan.n_pieces)
    dhat = plan.dhat
    # right-angle detection at each corner
    rights = []
    for i in range(3):
        d = float(np.dot(v[(i + 1) % 3] - v[i], v[(i + 2) % 3] - v[i]))
        lens = (np.linalg.norm(v[(i + 1) % 3] - v[i])
                * np.linalg.norm(v[(i + 2) % 3] - v[i]))
        rights.append(abs(d) <= 1e-12 * lens)
    if any(rights):
        i = rights.index(True)
        _right_into(spec, v[i], v[(i + 1) % 3], v[(i + 2) % 3], dhat, nstack)
        return spec
    # altitude from the vertex opposite the longest side
    sides = np.array([np.linalg.norm(v[2] - v[1]),
                      np.linalg.norm(v[0] - v[2]),
                      np.linalg.norm(v[1] - v[0])])
    i = int(np.argmax(sides))
    p, q, o = v[(i + 1) % 3], v[(i + 2) % 3], v[i]
    d = (q - p) / sides[i]
    foot = p + np.dot(o - p, d) * d
    _right_into(spec, foot, p, o, dhat, nstack)
    _right_into(spec, foot, o, q, dhat, nstack)
    return spec


def emit_spec(spec: GenericSpec, plan: cl.RefinePlan, offset,
              parent_perimeter: float, kind: str = "generic") -> CoverResult:
    sink = _Sink(plan, offset, parent_perimeter, kind)
    for st in spec.stacks:
        _stack_into(sink, st.p0, st.e_len, st.e_w, st.length, st.n)
    if spec.tris:
        sink.add_leftovers(np.stack(spec.tris))
    return sink.result()


def _plan_for(M: np.ndarray, delta: float, stage_rule: str,
              h0: Optional[float]) -> cl.RefinePlan:
    stage = ia.classify(np.asarray(M, dtype=float), delta)
    if stage_rule == "A4":
        if stage < 2:
            raise WrongEntryPointError("A4 rule needs a dyadic-stage input")
        return cl.replace_dyadic_stage(M, delta,
                                       h0 if h0 is not None
                                       else cl.calibrate_h0(delta))
    if stage_rule == "A3":
        if stage >= 2:
            raise WrongEntryPointError("A3 rule covers stages 0 and 1")
        return cl.replace_low_stage(M, delta)
    raise InvalidDomainError(f"unknown stage rule {stage_rule!r}")


def cover_isosceles(tri: np.ndarray, M: np.ndarray, delta: float,
                    plan: Optional[cl.RefinePlan] = None,
                    offset=(0.0, 0.0),
                    stage_rule: str = "A4",
                    h0: Optional[float] = None) -> CoverResult:
    """Inscribed-diamond cover of a matching isosceles triangle.

    The diamond takes exactly half the area (scale H/2 between the base
    midpoint and the apex, equatorial vertices at the leg midpoints); the
    two leftovers are similar copies of the parent at ratio 1/2 with the
    same apex axis.
    """
    if plan is None:
        plan = _plan_for(M, delta, stage_rule, h0)
    v = np.asarray(tri, dtype=float)
    member, axis = iso_membership(v, plan.h)
    if not member:
        raise WrongEntryPointError("triangle is not in the matching "
                                   "isosceles class")
    if abs(float(np.dot(axis, plan.dhat))) < 1.0 - ISO_TOL:
        raise WrongEntryPointError("isosceles axis does not match the "
                                   "diamond frame")
    sides = np.array([np.linalg.norm(v[2] - v[1]),
                      np.linalg.norm(v[0] - v[2]),
                      np.linalg.norm(v[1] - v[0])])
    apex = int(np.argmin(sides))
    a, b1, b2 = v[apex], v[(apex + 1) % 3], v[(apex + 2) % 3]
    m = 0.5 * (b1 + b2)
    height = np.linalg.norm(a - m)
    sink = _Sink(plan, offset, float(sides.sum()), "iso")
    sink.add_diamonds((0.5 * (a + m))[None], 0.5 * height)
    mids = np.stack([0.5 * (a + b1), 0.5 * (a + b2)])
    leftovers = np.stack([np.stack([m, b1, mids[0]]),
                          np.stack([m, mids[1], b2])])
    sink.add_leftovers(leftovers, iso_h=plan.h,
                       iso_axes=np.broadcast_to(axis, (2, 2)))
    return sink.result()


def cover_rectangle(corner: np.ndarray, axis: np.ndarray, r: float, n: int,
                    M: np.ndarray, delta: float,
                    plan: Optional[cl.RefinePlan] = None,
                    offset=(0.0, 0.0),
                    stage_rule: str = "A4",
                    h0: Optional[float] = None) -> CoverResult:
    """Diamond row across the box corner + [0,r]*axis x [0,n*h*r]*perp.

    n diamonds of scale r/2, 2(n-1) gap triangles in the isosceles class,
    and four end triangles.
    """
    if plan is None:
        plan = _plan_for(M, delta, stage_rule, h0)
    axis = np.asarray(axis, dtype=float)
    nrm = np.linalg.norm(axis)
    if not (nrm > 0) or n < 1:
        raise InvalidDomainError("bad box spec")
    axis = axis / nrm
    if abs(abs(float(np.dot(axis, plan.dhat))) - 1.0) > ISO_TOL:
        raise WrongEntryPointError("box axis does not match the diamond "
                                   "frame")
    e_w = _perp(axis)
    per = 2.0 * (r + n * plan.h * r)
    sink = _Sink(plan, offset, per, "rect")
    _stack_into(sink, np.asarray(corner, dtype=float), axis, e_w, r, n)
    return sink.result()


def cover_generic(tri: np.ndarray, M: np.ndarray, delta: float,
                  stage_rule: str = "A4",
                  plan: Optional[cl.RefinePlan] = None,
                  offset=(0.0, 0.0),
                  h0: Optional[float] = None) -> CoverResult:
    """Full generic-triangle cover; good area is at least 2^-5 of the parent."""
    if plan is None:
        plan = _plan_for(M, delta, stage_rule, h0)
    v = np.asarray(tri, dtype=float)
    spec = generic_spec(v, plan)
    per = float(np.linalg.norm(v - np.roll(v, 1, axis=0), axis=1).sum())
    return emit_spec(spec, plan, offset, per)


def perimeter_ledger(result: CoverResult):
    """(sum_good, sum_iso, sum_generic); asserts the per-cover bounds.

    Isosceles covers obey total <= C2 * Per(T); generic covers obey
    good <= C0 * Per(T), leftover-iso <= C0 * Per(T) and leftover-generic
    <= C2 * Per(T), with C0 = 10*floor(1/h) and C2 = 42.
    """
    sums = (result.perimeter_good, result.perimeter_rest_iso,
            result.perimeter_rest_generic)
    if result.n_children == 0:
        return (0.0, 0.0, 0.0)
    per = result.parent_perimeter
    h = result.iso_h.max() if np.any(result.iso_h > 0) else None
    if result.kind == "iso":
        assert sum(sums) <= C2_UNIFORM * per, "iso cover perimeter bound"
    else:
        if h is not None:
            assert sums[1] <= c0_constant(h) * per, "iso-part perimeter bound"
            assert sums[0] <= c0_constant(h) * per, "good perimeter bound"
        assert sums[2] <= C2_UNIFORM * per, "generic-part perimeter bound"
    return sums


# ---------------------------------------------------------------------------
# the covering verification suite
# ---------------------------------------------------------------------------

@dataclass
class CoveringCheckReport:
    delta: float
    cases: int
    failures: int
    failure_examples: list
    max_partition_err: float    # relative to the parent area
    max_continuity_err: float
    max_trace_err: float
    max_stray_len: float        # interface length on the parent boundary
    min_good_fraction: float    # over the generic cases

    @property
    def ok(self) -> bool:
        return self.failures == 0


def _check_cover(res: CoverResult, tri: np.ndarray, M: np.ndarray,
                 report: CoveringCheckReport, label: str):
    from . import analysis as an
    area = abs(tri_area(np.asarray(tri, dtype=float)))
    part = abs(float(tri_areas(res.verts).sum()) - area) / area
    cont = an.continuity_residual(res.verts, res.grads, res.offs)
    v = np.asarray(tri, dtype=float)
    hull = np.stack([v, np.roll(v, -1, axis=0)], axis=1)
    trace, stray = an.boundary_trace_residual(res.verts, res.grads, res.offs,
                                              M, hull_segments=hull)
    report.max_partition_err = max(report.max_partition_err, part)
    report.max_continuity_err = max(report.max_continuity_err, cont)
    report.max_trace_err = max(report.max_trace_err, trace)
    report.max_stray_len = max(report.max_stray_len, stray)
    ledger_ok = True
    try:
        perimeter_ledger(res)
    except AssertionError:
        ledger_ok = False
    scale = math.sqrt(area)
    if (part > 1e-12 or cont > 1e-10 or trace > 1e-10 * max(scale, 1.0)
            or stray > 1e-8 * scale or not ledger_ok):
        report.failures += 1
        if len(report.failure_examples) < 5:
            report.failure_examples.append(
                (label, part, cont, trace, stray, ledger_ok))


def verify_covering(delta: float, stages: tuple = (2, 3),
                    h0: Optional[float] = None) -> CoveringCheckReport:
    """Partition/continuity/trace/ledger sweep over all cover kinds.

    For each stage: the matching isosceles cover, a diamond row over a
    box, and generic covers of a scalene triangle in two placements; plus
    one low-stage cover.  Everything must partition exactly, glue
    continuously, match the affine datum on the parent boundary, keep
    interface segments off the parent boundary, and respect the
    perimeter ledger.
    """
    report = CoveringCheckReport(delta, 0, 0, [], 0.0, 0.0, 0.0, 0.0, 1.0)
    if h0 is None:
        h0 = cl.calibrate_h0(delta)
    for stage in stages:
        M = ia.stage_representative(stage, delta)
        plan = cl.replace_dyadic_stage(M, delta, h0)
        d, p = plan.dhat, _perp(plan.dhat)
        m = np.array([0.15, -0.4])
        H = 0.37
        iso_tri = _fix_ccw(np.stack([m + H * d, m - plan.h * H * p,
                                     m + plan.h * H * p])[None])[0]
        res = cover_isosceles(iso_tri, M, delta, plan=plan)
        report.cases += 1
        if res.n_children != 12:
            report.failures += 1
        _check_cover(res, iso_tri, M, report, f"iso@{stage}")
        res = cover_rectangle(np.zeros(2), d, 0.2, 3, M, delta, plan=plan)
        corner_box = np.stack([np.zeros(2), 0.2 * d,
                               0.2 * d + 3 * plan.h * 0.2 * p,
                               3 * plan.h * 0.2 * p])
        box_tris = np.stack([corner_box[[0, 1, 2]], corner_box[[0, 2, 3]]])
        area_box = float(tri_areas(box_tris).sum())
        part = abs(float(tri_areas(res.verts).sum()) - area_box) / area_box
        report.cases += 1
        report.max_partition_err = max(report.max_partition_err, part)
        if part > 1e-12 or res.n_children != 10 * 3 + 2 * 2 + 4:
            report.failures += 1
            report.failure_examples.append((f"rect@{stage}", part))
        for tri in (np.array([[0.0, 0.0], [0.9, 0.15], [0.25, 0.8]]),
                    np.array([[1.0, 1.0], [1.2, 1.9], [0.3, 1.5]])):
            res = cover_generic(tri, M, delta, plan=plan)
            report.cases += 1
            _check_cover(res, tri, M, report, f"gen@{stage}")
            good_frac = float(tri_areas(res.verts[res.good]).sum()
                              / abs(tri_area(tri)))
            report.min_good_fraction = min(report.min_good_fraction,
                                           good_frac)
            if good_frac < GOOD_FRACTION:
                report.failures += 1
            if np.any(res.stages[res.good] != plan.stage + 1):
                report.failures += 1
    z0 = ia.zeta0(delta)
    M0 = ia.matrix_from_gaps(0.75 * z0, 0.75 * z0, delta, 1.0)
    tri = np.array([[0.0, 0.0], [0.5, 0.1], [0.1, 0.45]])
    res = cover_generic(tri, M0, delta, stage_rule="A3")
    report.cases += 1
    _check_cover(res, tri, M0, report, "low-stage")
    if res.good.any() and res.stages[res.good].min() < 1:
        report.failures += 1
    return report
