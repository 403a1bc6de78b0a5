"""Quantitative certification of refinement runs.

Exact integrals over piecewise-constant/affine fields on triangulations:
L1 step differences via the child->parent map, BV seminorms and
continuity/boundary checks via a vectorized line sweep over coincident
edge intervals, interpolated W^{s,p} bounds, geometric-rate fits, the
regularity threshold, and box-counting dimension of interface edge sets.

The line sweep groups all triangle edges by their carrying line
(quantized normal form), sorts interval endpoints, and accumulates
per-side coverage counts and payloads with segmented cumulative sums, so
jumps across partially overlapping child/neighbor edges are integrated
exactly without any pairwise matching.

Line grouping works in bbox-normalized coordinates and tolerates
coordinate noise up to ~1e-10 of the mesh diameter, with features down
to ~1e-6 of it.  Meshes stored with a large translation relative to
their feature size lose coincidence information in the float format
itself; the sweep flags such inputs through overlap_error rather than
guessing.

overlap_error detects collinear double coverage (two cells claiming the
same side of the same edge interval), the failure mode of misplaced
refinement children.  A cell strictly inside another shares no edge
line and is invisible to the sweep; total-area conservation is the
guard for that case and is checked by the engine on every step.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import InvalidPairError, InvalidParameterError, \
    UndefinedDimensionError

LINE_QUANTUM = 1e-9


# ---------------------------------------------------------------------------
# edge extraction and the segmented line sweep
# ---------------------------------------------------------------------------

def _frame(verts: np.ndarray):
    """Normalizing frame (center, diameter) so line quantization is
    invariant under translation and scaling of the mesh."""
    flat = verts.reshape(-1, 2)
    lo = flat.min(axis=0)
    hi = flat.max(axis=0)
    diam = max(float(hi[0] - lo[0]), float(hi[1] - lo[1]))
    if diam <= 0:
        raise InvalidParameterError("degenerate mesh extent")
    return 0.5 * (lo + hi), diam


def _edge_table(verts: np.ndarray):
    """Per-edge line keys and interval data for all 3N directed edges.

    Works in normalized coordinates (bbox center and diameter divided
    out).  Returns (line_key (E,3) int64, tlo, thi, left (bool: owning
    cell lies left of the canonical tangent), owner, canonical frames
    (nx, ny, c) in normalized coords, and (center, diam)).
    """
    n = verts.shape[0]
    center, diam = _frame(verts)
    w = (verts - center) / diam
    p0 = w.reshape(-1, 2)
    p1 = np.roll(w, -1, axis=1).reshape(-1, 2)
    owner = np.repeat(np.arange(n), 3)
    d = p1 - p0
    length = np.linalg.norm(d, axis=1)
    good = length > 0
    p0, p1, d, length, owner = p0[good], p1[good], d[good], length[good], owner[good]
    dh = d / length[:, None]
    nx, ny = -dh[:, 1], dh[:, 0]
    qnx = np.round(nx / LINE_QUANTUM).astype(np.int64)
    qny = np.round(ny / LINE_QUANTUM).astype(np.int64)
    flip = (qnx < 0) | ((qnx == 0) & (qny < 0))
    s = np.where(flip, -1.0, 1.0)
    nx, ny = nx * s, ny * s
    qnx, qny = qnx * np.where(flip, -1, 1), qny * np.where(flip, -1, 1)
    c = nx * p0[:, 0] + ny * p0[:, 1]
    qc = np.round(c / LINE_QUANTUM).astype(np.int64)
    # tangent = perp of canonical normal; the CCW cell lies left of p0->p1
    t0 = ny * p0[:, 0] - nx * p0[:, 1]
    t1 = ny * p1[:, 0] - nx * p1[:, 1]
    left = t1 > t0
    tlo = np.minimum(t0, t1)
    thi = np.maximum(t0, t1)
    # absolute-coordinate endpoints ordered by t, for exact interval
    # point reconstruction (the quantized frame is only a grouping key)
    a0 = p0 * diam + center
    a1 = p1 * diam + center
    swap = ~left[:, None]
    plo_abs = np.where(swap, a1, a0)
    phi_abs = np.where(swap, a0, a1)
    key = np.stack([qnx, qny, qc], axis=1)
    return key, tlo, thi, left, owner, (plo_abs, phi_abs), (center, diam)


@dataclass
class SweepAccumulator:
    """Subinterval decomposition of all coincident-edge lines.

    For every maximal subinterval on every line: dt (length), the owning
    cell on each side (-1 when uncovered), and the quantized line id.
    Payload integrals are evaluated by the callers through the owners.
    """
    dt: np.ndarray
    left_owner: np.ndarray
    right_owner: np.ndarray
    line_id: np.ndarray
    point_mid: np.ndarray     # (m,2) midpoint of each subinterval
    point_lo: np.ndarray
    point_hi: np.ndarray
    overlap_error: bool


def sweep_intervals(verts: np.ndarray) -> SweepAccumulator:
    """Decompose all edges into subintervals with per-side owners."""
    n = verts.shape[0]
    key, tlo, thi, left, owner, (plo_abs, phi_abs), (center, diam) = \
        _edge_table(verts)
    uniq, line = np.unique(key, axis=0, return_inverse=True)
    line = line.astype(np.int64)
    e = tlo.shape[0]
    # two events per edge; closers sort before openers at equal t
    ev_line = np.repeat(line, 2)
    ev_t = np.empty(2 * e)
    ev_t[0::2], ev_t[1::2] = tlo, thi
    ev_open = np.empty(2 * e, dtype=np.int8)
    ev_open[0::2], ev_open[1::2] = 1, -1
    ev_edge = np.repeat(np.arange(e, dtype=np.int64), 2)
    ev_left = np.repeat(left, 2)
    order = np.lexsort((ev_open, ev_t, ev_line))
    ev_line = ev_line[order]
    ev_t = ev_t[order]
    ev_open = ev_open[order]
    ev_edge = ev_edge[order]
    ev_left = ev_left[order]
    # segmented cumulative bookkeeping: with counts in {0,1} the running
    # sum of (edge+1)*sign is the active edge + 1, and a per-line reset
    # is a subtraction of the running value at line starts
    contrib = (ev_edge + 1) * ev_open
    newline = np.r_[False, ev_line[1:] != ev_line[:-1]]
    starts = np.flatnonzero(np.r_[True, newline[1:]])
    grp = np.cumsum(newline)

    def seg_cumsum(delta):
        c = delta.cumsum()
        off = np.zeros(grp[-1] + 1 if e else 1, dtype=c.dtype)
        off[grp[starts]] = c[starts] - delta[starts]
        return c - off[grp]

    el = seg_cumsum(np.where(ev_left, contrib, 0))
    er = seg_cumsum(np.where(ev_left, 0, contrib))
    nl = seg_cumsum(np.where(ev_left, ev_open, 0).astype(np.int64))
    nr = seg_cumsum(np.where(ev_left, 0, ev_open).astype(np.int64))
    same_line = ev_line[1:] == ev_line[:-1]
    dt = np.where(same_line, ev_t[1:] - ev_t[:-1], 0.0)
    # event t values that should tie differ by float noise ~1e-16, which
    # makes sliver subintervals with transiently wrong coverage counts;
    # they carry no measure and are dropped
    keep = dt > 1e-12
    eL = np.clip(el[:-1][keep] - 1, -1, e - 1)
    eR = np.clip(er[:-1][keep] - 1, -1, e - 1)
    lo = np.where(eL >= 0, owner[np.maximum(eL, 0)], -1)
    ro = np.where(eR >= 0, owner[np.maximum(eR, 0)], -1)
    overlap = bool(np.any(nl[:-1][keep] > 1) or np.any(nr[:-1][keep] > 1))
    li = ev_line[:-1][keep]
    # interval endpoints in absolute coordinates, reconstructed on the
    # active edge's own stored segment: the quantized frame only groups
    # lines, so points must not be rebuilt from it (thin pieces sit
    # closer together than the quantum)
    tl = ev_t[:-1][keep]
    th = ev_t[1:][keep]
    src = np.where(eL >= 0, eL, eR)
    span = np.maximum(thi[src] - tlo[src], 1e-300)
    s0 = np.clip((tl - tlo[src]) / span, 0.0, 1.0)
    s1 = np.clip((th - tlo[src]) / span, 0.0, 1.0)
    seg = phi_abs[src] - plo_abs[src]
    plo = plo_abs[src] + s0[:, None] * seg
    phi = plo_abs[src] + s1[:, None] * seg
    return SweepAccumulator(dt[keep] * diam, lo, ro, li, 0.5 * (plo + phi),
                            plo, phi, overlap)


def bv_seminorm_cells(verts: np.ndarray, values: np.ndarray,
                      include_boundary: bool = False,
                      sweep: Optional[SweepAccumulator] = None) -> float:
    """Exact BV seminorm of a piecewise-constant scalar field.

    Sum over interior edge subintervals of |jump| * length; with
    include_boundary the field is extended by zero outside the mesh.
    """
    sw = sweep if sweep is not None else sweep_intervals(verts)
    vl = np.where(sw.left_owner >= 0, values[sw.left_owner], 0.0)
    vr = np.where(sw.right_owner >= 0, values[sw.right_owner], 0.0)
    both = (sw.left_owner >= 0) & (sw.right_owner >= 0)
    jump = np.abs(vl - vr)
    if include_boundary:
        return float(np.sum(jump * sw.dt))
    return float(np.sum(np.where(both, jump, 0.0) * sw.dt))


def bv_seminorm(state, which: str = "chi1",
                include_boundary: bool = False,
                sweep: Optional[SweepAccumulator] = None) -> float:
    """BV seminorm of a state field: chi1/chi2, grad components, or grad.

    "grad" sums the Frobenius norm of the gradient jump over interior
    subintervals (the four components share one sweep).
    """
    verts, phases, grads = state.verts, state.phases, state.grads
    sw = sweep if sweep is not None else sweep_intervals(verts)
    if which in ("chi1", "chi2"):
        target = 1 if which == "chi1" else 2
        return bv_seminorm_cells(verts, (phases == target).astype(float),
                                 include_boundary, sweep=sw)
    if which.startswith("grad") and len(which) == 6:
        i, j = int(which[4]), int(which[5])
        return bv_seminorm_cells(verts, grads[:, i, j].copy(),
                                 include_boundary, sweep=sw)
    if which == "grad":
        both = (sw.left_owner >= 0) & (sw.right_owner >= 0)
        gl = grads[np.maximum(sw.left_owner, 0)]
        gr = grads[np.maximum(sw.right_owner, 0)]
        if include_boundary:
            gl = np.where((sw.left_owner >= 0)[:, None, None], gl, 0.0)
            gr = np.where((sw.right_owner >= 0)[:, None, None], gr, 0.0)
            jump = np.linalg.norm(gl - gr, axis=(1, 2))
            return float(np.sum(jump * sw.dt))
        jump = np.linalg.norm(gl - gr, axis=(1, 2))
        return float(np.sum(np.where(both, jump, 0.0) * sw.dt))
    raise InvalidParameterError(f"unknown field {which!r}")


def continuity_residual(verts: np.ndarray, grads: np.ndarray,
                        offs: np.ndarray,
                        sweep: Optional[SweepAccumulator] = None) -> float:
    """Sup of the affine-value mismatch across interior subintervals.

    The induced map is continuous iff this vanishes; evaluated at both
    endpoints of every shared subinterval (affine differences attain
    their maximum there).
    """
    sw = sweep if sweep is not None else sweep_intervals(verts)
    both = (sw.left_owner >= 0) & (sw.right_owner >= 0)
    if not np.any(both):
        return 0.0
    lo = sw.left_owner[both]
    ro = sw.right_owner[both]
    dg = grads[lo] - grads[ro]
    do = offs[lo] - offs[ro]
    res = 0.0
    for pts in (sw.point_lo[both], sw.point_hi[both]):
        mis = np.einsum("nij,nj->ni", dg, pts) + do
        res = max(res, float(np.abs(mis).max()))
    return res


def boundary_trace_residual(verts: np.ndarray, grads: np.ndarray,
                            offs: np.ndarray, M: np.ndarray,
                            sweep: Optional[SweepAccumulator] = None,
                            hull_segments: Optional[np.ndarray] = None):
    """Sup of |u - Mx| over single-sided (outer) edge subintervals.

    With hull_segments (m,2,2), the outer intervals are first matched
    geometrically against the domain boundary lines; intervals that sit
    on none of them (partition gaps, or quantization splits of interior
    lines) are excluded from the trace and their total length is
    returned as the second element of (residual, stray_length).
    Without hull_segments, returns the residual alone.
    """
    sw = sweep if sweep is not None else sweep_intervals(verts)
    single = (sw.left_owner >= 0) ^ (sw.right_owner >= 0)
    if not np.any(single):
        return 0.0 if hull_segments is None else (0.0, 0.0)
    own = np.where(sw.left_owner >= 0, sw.left_owner, sw.right_owner)[single]
    p_lo = sw.point_lo[single]
    p_hi = sw.point_hi[single]
    stray = 0.0
    if hull_segments is not None:
        hs = np.asarray(hull_segments, dtype=float)
        a = hs[:, 0]
        d = hs[:, 1] - hs[:, 0]
        nrm = np.stack([-d[:, 1], d[:, 0]], axis=1)
        nrm /= np.linalg.norm(nrm, axis=1, keepdims=True)
        cs = np.einsum("mj,mj->m", nrm, a)
        _, diam = _frame(verts)
        tol = 1e-8 * diam
        dist_lo = np.abs(p_lo @ nrm.T - cs[None, :])
        dist_hi = np.abs(p_hi @ nrm.T - cs[None, :])
        on = np.any((dist_lo <= tol) & (dist_hi <= tol), axis=1)
        stray = float(sw.dt[single][~on].sum())
        own = own[on]
        p_lo, p_hi = p_lo[on], p_hi[on]
        if own.size == 0:
            return 0.0, stray
    dg = grads[own] - M[None]
    do = offs[own]
    res = 0.0
    for pts in (p_lo, p_hi):
        mis = np.einsum("nij,nj->ni", dg, pts) + do
        res = max(res, float(np.abs(mis).max()))
    return res if hull_segments is None else (res, stray)


def interface_segments(verts: np.ndarray, phases: np.ndarray,
                       sweep: Optional[SweepAccumulator] = None):
    """Endpoints of the phase boundary: (m,2,2) array of segments."""
    sw = sweep if sweep is not None else sweep_intervals(verts)
    both = (sw.left_owner >= 0) & (sw.right_owner >= 0)
    jump = both & (phases[np.maximum(sw.left_owner, 0)]
                   != phases[np.maximum(sw.right_owner, 0)])
    return np.stack([sw.point_lo[jump], sw.point_hi[jump]], axis=1)


# ---------------------------------------------------------------------------
# L1 differences between nested states
# ---------------------------------------------------------------------------

def tri_areas(verts: np.ndarray) -> np.ndarray:
    a = verts[:, 1] - verts[:, 0]
    b = verts[:, 2] - verts[:, 0]
    return 0.5 * np.abs(a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0])


def l1_diff(coarse, fine, which: str = "chi1") -> float:
    """Exact L1 distance of piecewise-constant fields on nested states.

    fine must refine coarse: every fine cell carries prev_index, the
    position of the coarse cell it came from (its own position if
    carried over unchanged).
    """
    prev = getattr(fine, "prev_index", None)
    if prev is None:
        raise InvalidPairError("fine state lacks the child->parent map")
    prev = np.asarray(prev)
    if prev.shape[0] != fine.verts.shape[0] or (prev.ndim != 1) \
            or prev.min() < 0 or prev.max() >= coarse.verts.shape[0]:
        raise InvalidPairError("states are not nested")
    areas = tri_areas(fine.verts)
    if which in ("chi1", "chi2"):
        target = 1 if which == "chi1" else 2
        fv = (fine.phases == target).astype(float)
        cv = (coarse.phases == target).astype(float)
        return float(np.sum(areas * np.abs(fv - cv[prev])))
    if which == "grad":
        d = np.linalg.norm(fine.grads - coarse.grads[prev], axis=(1, 2))
        return float(np.sum(areas * d))
    raise InvalidParameterError(f"unknown field {which!r}")


# ---------------------------------------------------------------------------
# interpolation, rates, threshold
# ---------------------------------------------------------------------------

def wsp_interpolated_norm(sup_norm: float, l1_norm: float, bv_norm: float,
                          s: float, p: float) -> float:
    """The interpolation upper bound for the W^{s,p} norm of a field.

    ||u||_inf^{1-1/p} * (||u||_1^{1-sp} * |u|_BV^{sp})^{1/p}, valid for
    s > 0, p in (1, inf), sp < 1, with the field extended by zero.
    """
    if not (s > 0 and p > 1 and np.isfinite(p)):
        raise InvalidParameterError("need s > 0 and finite p > 1")
    if s * p >= 1:
        raise InvalidParameterError(f"sp = {s * p} out of range (needs < 1)")
    if min(sup_norm, l1_norm, bv_norm) < 0:
        raise InvalidParameterError("norms must be nonnegative")
    return float(sup_norm ** (1.0 - 1.0 / p)
                 * (l1_norm ** (1.0 - s * p) * bv_norm ** (s * p))
                 ** (1.0 / p))


def solve_theta0(c_tilde: float, growth: float) -> float:
    """Exponent balancing L1 decay at rate c_tilde against BV growth."""
    if not (0.0 < c_tilde < 1.0):
        raise InvalidParameterError(f"c_tilde = {c_tilde} not in (0,1)")
    if not (growth > 1.0):
        raise InvalidParameterError(f"growth = {growth} not > 1")
    ll = np.log(1.0 / c_tilde)
    return float(ll / (np.log(growth) + ll))


@dataclass
class GeometricFit:
    rate: float
    amplitude: float
    r_squared: float
    window: Tuple[int, int]
    skipped: int              # nonpositive entries dropped from the window


def fit_geometric(series: Sequence[float],
                  window: Optional[Tuple[int, int]] = None) -> GeometricFit:
    """Least squares on log values; rate = exp(slope).

    window = (lo, hi) selects indices lo..hi inclusive; nonpositive
    entries are skipped and counted.  Needs at least 3 usable points.
    """
    y = np.asarray(series, dtype=float)
    idx = np.arange(len(y))
    if window is not None:
        lo, hi = window
        mask = (idx >= lo) & (idx <= hi)
    else:
        mask = np.ones(len(y), dtype=bool)
    usable = mask & (y > 0) & np.isfinite(y)
    skipped = int(mask.sum() - usable.sum())
    if usable.sum() < 3:
        raise InvalidParameterError("fit window has fewer than 3 usable "
                                    "points")
    x = idx[usable].astype(float)
    ly = np.log(y[usable])
    slope, intercept = np.polyfit(x, ly, 1)
    pred = slope * x + intercept
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    w = (int(x[0]), int(x[-1]))
    return GeometricFit(float(np.exp(slope)), float(np.exp(intercept)),
                        r2, w, skipped)


# ---------------------------------------------------------------------------
# metrics over a run
# ---------------------------------------------------------------------------

COLUMNS = ("k", "n_cells", "n_active", "l1_chi_diff", "l1_grad_diff",
           "bv_chi", "bv_grad", "perimeter_sum", "frozen_measure",
           "mean_dist", "energy", "refined_area", "wsup_max", "w_l1_bound",
           "min_stage", "max_stage")


@dataclass
class MetricsSeries:
    """Per-step metric rows; columns() gives plain arrays for fitting."""
    rows: List[dict] = field(default_factory=list)
    stage_hists: List[np.ndarray] = field(default_factory=list)

    def append(self, row: dict, stage_hist: np.ndarray):
        self.rows.append(row)
        self.stage_hists.append(np.asarray(stage_hist, dtype=float))
        fm = self.column("frozen_measure")
        if len(fm) > 1 and fm[-1] < fm[-2] - 1e-12:
            raise InvalidParameterError("frozen measure decreased")

    def column(self, name: str) -> np.ndarray:
        return np.array([r.get(name, np.nan) for r in self.rows])

    def diffs(self, name: str) -> np.ndarray:
        """Step-difference column: entry k belongs to the step k -> k+1."""
        return self.column(name)[1:]

    def wsp_series(self, s: float, p: float) -> np.ndarray:
        """Interpolated W^{s,p} bounds of the per-step displacement diffs."""
        sup = self.column("wsup_max")[1:]
        l1 = self.column("w_l1_bound")[1:]
        bv = self.column("l1_grad_diff")[1:]
        out = np.zeros(len(sup))
        for i, (a, b, c) in enumerate(zip(sup, l1, bv)):
            out[i] = (wsp_interpolated_norm(a, b, c, s, p)
                      if min(a, b, c) > 0 else 0.0)
        return out


@dataclass
class RegularityReport:
    c_tilde: float
    rho_bv: float
    theta0_measured: float
    theta0_constants: float
    alpha: float              # fitted decay exponent of the W^{s,p} series
    s: float
    p: float
    r2_l1: float
    r2_wsp: float
    window: Tuple[int, int]
    frozen_fraction_max: float
    wsp_rate: float
    window_compliant: bool    # transient dropped and frozen under the cap

    def ok(self) -> bool:
        return (0.0 < self.theta0_measured < 1.0
                and self.wsp_rate < 1.0
                and self.window_compliant)


FROZEN_WINDOW_CAP = 0.01   # fits exclude steps frozen beyond this fraction
TRANSIENT_STEPS = 2        # and the low-stage transient k <= 2


def regularity_report(metrics: MetricsSeries, growth_constant: float,
                      window: Optional[Tuple[int, int]] = None,
                      p: float = 2.0,
                      frozen_cap: float = FROZEN_WINDOW_CAP) -> RegularityReport:
    """Threshold and interpolation-decay report from run metrics.

    Window rule over the step-difference series (index i is the
    transition into state i+1): the transient into states k <= 2 is
    dropped and so is every step whose frozen measure exceeds
    frozen_cap * |domain|.  When fewer than three transitions survive,
    the fit falls back to the longest tail that supports one so the
    rates are still reported; window_compliant records the violation
    and ok() fails on it.
    """
    l1 = metrics.diffs("l1_chi_diff")
    bv = metrics.column("bv_chi")[1:]
    total_area = metrics.rows[0].get("domain_area", np.nan)
    frozen = metrics.column("frozen_measure")[1:]
    n = len(l1)
    lo_rule = TRANSIENT_STEPS
    if window is None:
        under_cap = frozen <= frozen_cap * total_area
        hi = lo_rule - 1
        while hi + 1 < n and under_cap[hi + 1]:
            hi += 1
        lo = lo_rule
        if hi - lo < 2:                     # no compliant window exists
            lo, hi = min(lo_rule, max(n - 3, 0)), n - 1
        window = (lo, hi)
    lo, hi = window
    fit_l1 = fit_geometric(l1, window)
    fit_bv = fit_geometric(bv, window)
    c_tilde = fit_l1.rate
    rho = fit_bv.rate
    theta0 = solve_theta0(c_tilde, rho) if (0 < c_tilde < 1 and rho > 1) \
        else float("nan")
    theta0_const = solve_theta0(c_tilde, growth_constant) \
        if 0 < c_tilde < 1 else float("nan")
    if np.isfinite(theta0):
        s = theta0 / (2.0 * p)
        fit_w = fit_geometric(metrics.wsp_series(s, p), window)
        alpha = float(-np.log2(fit_w.rate))
        r2_w, rate_w = fit_w.r_squared, fit_w.rate
    else:
        s = alpha = r2_w = rate_w = float("nan")
    fmax = float(frozen[lo:hi + 1].max() / total_area)
    compliant = lo >= TRANSIENT_STEPS and fmax <= frozen_cap
    return RegularityReport(c_tilde, rho, theta0, theta0_const,
                            alpha, s, p, fit_l1.r_squared, r2_w,
                            window, fmax, rate_w, compliant)


# ---------------------------------------------------------------------------
# box-counting dimension
# ---------------------------------------------------------------------------

def box_dimension(segments: np.ndarray,
                  eps_list: Optional[Sequence[float]] = None,
                  d_report: float = 1.0):
    """Box-counting estimate over a dyadic grid family.

    segments: (m,2,2) interface segments.  One point sample at spacing
    eps_min/3 is reused for every eps, and the grids are nested dyadic
    refinements of a common origin, which makes N_eps monotone by
    construction.  Returns (estimate, table) where table rows are
    (eps, N_eps, m_d = N_eps * eps^d_report).
    """
    segments = np.asarray(segments, dtype=float)
    if segments.size == 0:
        raise UndefinedDimensionError("empty interface")
    if eps_list is None:
        eps_list = [2.0 ** -j for j in range(4, 11)]
    eps_list = sorted(float(e) for e in eps_list)
    for e in eps_list:
        j = np.log2(1.0 / e)
        if abs(j - round(j)) > 1e-9:
            raise InvalidParameterError("eps values must be dyadic")
    lo = segments.reshape(-1, 2).min(axis=0)
    eps_min = eps_list[0]
    a = segments[:, 0]
    b = segments[:, 1]
    lens = np.linalg.norm(b - a, axis=1)
    npts = np.maximum(2, np.ceil(lens / (eps_min / 3.0)).astype(np.int64) + 1)
    pts = [np.linspace(0.0, 1.0, k)[:, None] * (bb - aa) + aa
           for aa, bb, k in zip(a, b, npts)]
    pts = np.concatenate(pts)
    table = []
    for e in sorted(eps_list, reverse=True):
        cells = np.floor((pts - lo) / e).astype(np.int64)
        count = np.unique(cells, axis=0).shape[0]
        table.append((e, count, count * e ** d_report))
    table.reverse()
    ns = np.array([row[1] for row in table], dtype=float)
    js = np.log2(1.0 / np.array([row[0] for row in table]))
    slope = np.polyfit(js, np.log2(ns), 1)[0]
    return float(slope), table


# ---------------------------------------------------------------------------
# raster oracle (brute force, for equivalence tests)
# ---------------------------------------------------------------------------

def rasterize_cells(verts: np.ndarray, values: np.ndarray, n: int = 512,
                    bounds: Optional[Tuple[float, float, float, float]] = None):
    """Point-sample a piecewise-constant field on an n x n pixel grid.

    Pixel centers are assigned by point-in-triangle tests; pixels outside
    the mesh stay at zero.  Returns (grid, pixel_size).
    """
    if bounds is None:
        lo = verts.reshape(-1, 2).min(axis=0)
        hi = verts.reshape(-1, 2).max(axis=0)
        pad = 1e-9 * max(float(hi[0] - lo[0]), float(hi[1] - lo[1]), 1.0)
        bounds = (lo[0] - pad, lo[1] - pad, hi[0] + pad, hi[1] + pad)
    x0, y0, x1, y1 = bounds
    px = max(x1 - x0, y1 - y0) / n
    xs = x0 + (np.arange(n) + 0.5) * px
    ys = y0 + (np.arange(n) + 0.5) * px
    grid = np.zeros((n, n))
    for tri, val in zip(verts, values):
        tlo = tri.min(axis=0)
        thi = tri.max(axis=0)
        ix = np.flatnonzero((xs >= tlo[0]) & (xs <= thi[0]))
        iy = np.flatnonzero((ys >= tlo[1]) & (ys <= thi[1]))
        if ix.size == 0 or iy.size == 0:
            continue
        gx, gy = np.meshgrid(xs[ix], ys[iy], indexing="ij")
        p = np.stack([gx.ravel(), gy.ravel()], axis=1)
        d0 = p - tri[0]
        e1 = tri[1] - tri[0]
        e2 = tri[2] - tri[0]
        det = e1[0] * e2[1] - e1[1] * e2[0]
        u = (d0[:, 0] * e2[1] - d0[:, 1] * e2[0]) / det
        v = (e1[0] * d0[:, 1] - e1[1] * d0[:, 0]) / det
        inside = (u >= 0) & (v >= 0) & (u + v <= 1)
        sub = grid[np.ix_(ix, iy)]
        sub.ravel()[inside] = val
        grid[np.ix_(ix, iy)] = sub
    return grid, px


def raster_l1(grid_a: np.ndarray, grid_b: np.ndarray, px: float) -> float:
    return float(np.abs(grid_a - grid_b).sum() * px * px)


def raster_bv(grid: np.ndarray, px: float) -> float:
    """Anisotropic (grid-direction) BV of a rasterized field."""
    dx = np.abs(np.diff(grid, axis=0)).sum()
    dy = np.abs(np.diff(grid, axis=1)).sum()
    return float((dx + dy) * px)
