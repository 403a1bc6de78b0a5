"""Refinement engine driving covers until the gradient set settles.

The state is a struct-of-arrays triangulation carrying one affine map per
cell.  Every step selects refinable cells largest-first under a linear
cell-capacity ramp toward the budget, covers each with the inscribed
diamond of its replacement plan (the dyadic rule at one uniform aspect
for stages >= 2, the verify-and-shrink rule below), and appends the
children.  Cells that do not fit the capacity slice are frozen for good,
so the mesh stays within budget while the refined region keeps its
exponential stage advance.

All metrics are streamed during emission: the L1 step differences and
the displacement bounds are exact sums of per-diamond contributions
precomputed on the unit diamond, and the BV/perimeter/continuity numbers
come from one shared edge sweep per state.  Everything is deterministic;
there is no randomness anywhere in the pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import analysis as an
from . import cell as cl
from . import covering as cv
from . import inapprox as ia
from . import matgeo as mg
from .errors import ConstructionFailureError, InvalidDomainError, \
    WrongEntryPointError

INTERIOR_MARGIN = 1e-8
ISO_AXIS_TOL = 1e-9


@dataclass
class TwoWellState:
    """One triangulated affine state u(x) = grads[i] x + offs[i] on cell i."""
    delta: float
    k: int
    verts: np.ndarray        # (n,3,2) counterclockwise
    grads: np.ndarray        # (n,2,2)
    offs: np.ndarray         # (n,2)
    stages: np.ndarray       # (n,) int16
    phases: np.ndarray       # (n,) uint8
    frozen: np.ndarray       # (n,) bool
    ids: np.ndarray          # (n,) int64
    parents: np.ndarray      # (n,) int64, -1 for roots
    iso_h: np.ndarray        # (n,) float, 0 when not in the iso class
    iso_axis: np.ndarray     # (n,2)
    prev_index: np.ndarray   # (n,) position of the source cell one step back

    @property
    def n(self) -> int:
        return self.verts.shape[0]

    def areas(self) -> np.ndarray:
        return cv.tri_areas(self.verts)


@dataclass
class EngineConfig:
    cell_budget: int = 10 ** 6
    max_steps: int = 6
    min_area_rel: float = 1e-12
    h0: Optional[float] = None    # None: corridor-calibrated per delta
    checks: str = "fast"          # none | fast | full
    track_bv: bool = True
    keep_states: bool = False
    max_restarts: int = 3
    partition_tol: float = 1e-10
    continuity_tol: float = 1e-9
    trace_tol: float = 1e-10


def _as_domain(domain) -> np.ndarray:
    v = np.asarray(domain, dtype=float)
    if v.ndim == 2 and v.shape == (3, 2):
        v = v[None]
    if v.ndim != 3 or v.shape[1:] != (3, 2) or v.shape[0] == 0 \
            or not np.all(np.isfinite(v)):
        raise InvalidDomainError("domain must be a nonempty list of "
                                 "triangles as (n,3,2) finite reals")
    return cv._fix_ccw(v.copy())


def unit_square_domain() -> np.ndarray:
    return np.array([[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]],
                     [[0.0, 0.0], [1.0, 1.0], [0.0, 1.0]]])


def hull_report(M: np.ndarray, delta: float) -> str:
    """Human-readable membership report for a prospective boundary datum."""
    C = mg.gram(np.asarray(M, dtype=float))
    detM = float(np.linalg.det(M))
    memb = mg.cg_membership(C, delta, margin=INTERIOR_MARGIN)
    d1, d2 = mg.face_gaps(C, delta)
    prod = float(C[0, 0] * C[1, 1] - 1.0)
    return (f"membership={memb} det={detM:.12g} face_gaps=({d1:.6g},"
            f" {d2:.6g}) lamination_gap={prod:.6g}")


class Engine:
    """Stateful driver; construct via init_engine for full validation."""

    def __init__(self, domain, M, delta: float,
                 config: Optional[EngineConfig] = None, wells=None):
        self.config = config or EngineConfig()
        self.delta = float(delta)
        self.wells = self._check_wells(wells)
        self.M = np.asarray(M, dtype=float).copy()
        self._check_datum()
        verts = _as_domain(domain)
        areas = cv.tri_areas(verts)
        if np.any(areas <= 0):
            raise InvalidDomainError("degenerate triangle in domain")
        sw = an.sweep_intervals(verts)
        if sw.overlap_error:
            raise InvalidDomainError("domain triangles overlap")
        self.domain_area = float(areas.sum())
        self.hull_segments = np.stack(
            [verts.reshape(-1, 2),
             np.roll(verts, -1, axis=1).reshape(-1, 2)], axis=1)
        n = verts.shape[0]
        stage = ia.classify(self.M, self.delta)
        self.state = TwoWellState(
            self.delta, 0, verts,
            np.broadcast_to(self.M, (n, 2, 2)).copy(),
            np.zeros((n, 2)),
            np.full(n, stage, dtype=np.int16),
            np.full(n, self._phase_of(self.M), dtype=np.uint8),
            np.zeros(n, dtype=bool),
            np.arange(n, dtype=np.int64),
            np.full(n, -1, dtype=np.int64),
            np.zeros(n), np.zeros((n, 2)),
            np.arange(n, dtype=np.int64))
        self._next_id = n
        self.h0 = (self.config.h0 if self.config.h0 is not None
                   else cl.calibrate_h0(self.delta,
                                        fracs=(0.25, 0.5, 0.75)))
        self._plans: Dict[bytes, cl.RefinePlan] = {}
        self.metrics = an.MetricsSeries()
        self.states: List[TwoWellState] = []
        self.h_dyadic_used: set = set()
        self.iso_fast_hits = 0
        self.stalled = False
        self._record(l1_chi=0.0, l1_grad=0.0, wsup=0.0, wl1=0.0,
                     refined_area=0.0)
        if self.config.keep_states:
            self.states.append(self.state)

    # -- validation -------------------------------------------------------

    def _check_wells(self, wells):
        if wells is None:
            return mg.make_wells(self.delta)
        F0 = getattr(wells, "F0", None)
        ok = (isinstance(wells, mg.WellPair) and F0 is not None
              and F0.shape == (2, 2)
              and abs(F0[0, 0] - 1.0) < 1e-12 and abs(F0[1, 1] - 1.0) < 1e-12
              and abs(F0[1, 0]) < 1e-12 and F0[0, 1] > 0)
        if not ok:
            raise WrongEntryPointError(
                "the construction runs on the shear well pair "
                "SO(2)F0 u SO(2)F0^-1 with F0 = [[1,d],[0,1]]; got "
                f"{type(wells).__name__}")
        return wells

    def _check_datum(self):
        M = self.M
        if M.shape != (2, 2) or not np.all(np.isfinite(M)):
            raise WrongEntryPointError("boundary datum must be a finite "
                                       "2x2 matrix")
        report = hull_report(M, self.delta)
        if abs(float(np.linalg.det(M)) - 1.0) > mg.PIPE_TOL \
                or not report.startswith("membership=interior"):
            raise WrongEntryPointError(
                "boundary datum is not in the interior of the lamination "
                "hull: " + report)

    def _phase_of(self, G: np.ndarray) -> int:
        d = mg.dist_to_wells_b(G[None], self.wells)[0]
        return 1 if d[0] <= d[1] else 2

    # -- plans ------------------------------------------------------------

    def _plan(self, G: np.ndarray) -> cl.RefinePlan:
        key = G.tobytes()
        plan = self._plans.get(key)
        if plan is None:
            stage = int(ia.classify(G, self.delta))
            if stage >= 2:
                plan = cl.replace_dyadic_stage(G, self.delta, self.h0,
                                               max_retries=0)
                self.h_dyadic_used.add(plan.h)
            else:
                plan = cl.replace_low_stage(G, self.delta)
            self._plans[key] = plan
        return plan

    # -- stepping ---------------------------------------------------------

    def step(self):
        if self.stalled:
            raise ConstructionFailureError("engine is stalled at the cell "
                                           "budget")
        cfg = self.config
        st = self.state
        k = st.k + 1
        target = int(round(self._target(k)))
        areas = st.areas()
        floor = cfg.min_area_rel * self.domain_area
        tiny = (~st.frozen) & (areas < floor)
        st.frozen[tiny] = True
        cand = np.flatnonzero(~st.frozen)
        order = cand[np.lexsort((st.ids[cand], -areas[cand]))]
        n_final = st.n
        taken: List[Tuple[int, object, cl.RefinePlan]] = []
        for i in order:
            plan = self._plan(st.grads[i])
            fast = (st.iso_h[i] == plan.h
                    and abs(float(np.dot(st.iso_axis[i], plan.dhat)))
                    >= 1.0 - ISO_AXIS_TOL)
            if fast:
                count, spec = 12, None
            else:
                spec = cv.generic_spec(st.verts[i], plan)
                count = spec.child_count()
            if n_final + count - 1 > target:
                if not taken:
                    if n_final + count - 1 > cfg.cell_budget:
                        self.stalled = True
                        st.frozen[:] = True
                        self._record(0.0, 0.0, 0.0, 0.0, 0.0)
                        return self.metrics.rows[-1]
                else:
                    break
            n_final += count - 1
            taken.append((int(i), spec, plan))
        taken_idx = np.array([t[0] for t in taken], dtype=np.int64)
        keep = np.ones(st.n, dtype=bool)
        keep[taken_idx] = False
        st.frozen[keep & ~st.frozen] = True   # smallest first, permanently
        covers = []
        l1_chi = l1_grad = wl1 = wsup = 0.0
        for i, spec, plan in taken:
            if spec is None:
                self.iso_fast_hits += 1
                res = cv.cover_isosceles(st.verts[i], st.grads[i],
                                         self.delta, plan=plan,
                                         offset=st.offs[i])
            else:
                per = float(np.linalg.norm(
                    st.verts[i] - np.roll(st.verts[i], 1, axis=0),
                    axis=1).sum())
                res = cv.emit_spec(spec, plan, st.offs[i], per)
            if res.stages.min(initial=np.iinfo(np.int16).max) < st.stages[i]:
                raise ConstructionFailureError(
                    f"stage regressed under cover of cell {st.ids[i]}")
            if spec is None and res.stages[res.good].min() != st.stages[i] + 1:
                raise ConstructionFailureError("dyadic cover did not "
                                               "advance the stage")
            r2 = float(np.sum(res.diam_scales ** 2))
            r3 = float(np.sum(res.diam_scales ** 3))
            rmax = float(res.diam_scales.max(initial=0.0))
            l1_chi += plan.flip_area_unit * r2
            l1_grad += plan.grad_l1_unit * r2
            wl1 += plan.w_l1_unit * r3
            wsup = max(wsup, plan.wsup_unit * rmax)
            covers.append((i, res))
        self.state = self._assemble(st, keep, covers, k)
        refined_area = float(areas[taken_idx].sum()) if len(taken) else 0.0
        self._record(l1_chi, l1_grad, wsup, wl1, refined_area)
        if cfg.keep_states:
            self.states.append(self.state)
        return self.metrics.rows[-1]

    def _target(self, k: int) -> float:
        cfg = self.config
        n0 = self.metrics.rows[0]["n_cells"] if self.metrics.rows else 2
        frac = min(k / cfg.max_steps, 1.0) if cfg.max_steps > 0 else 1.0
        return n0 + (cfg.cell_budget - n0) * frac

    def _assemble(self, st: TwoWellState, keep: np.ndarray, covers,
                  k: int) -> TwoWellState:
        kept = np.flatnonzero(keep)
        cols_v = [st.verts[kept]]
        cols_g = [st.grads[kept]]
        cols_o = [st.offs[kept]]
        cols_s = [st.stages[kept]]
        cols_p = [st.phases[kept]]
        cols_f = [st.frozen[kept]]
        cols_id = [st.ids[kept]]
        cols_par = [st.parents[kept]]
        cols_ih = [st.iso_h[kept]]
        cols_ia = [st.iso_axis[kept]]
        cols_prev = [kept.astype(np.int64)]
        nid = self._next_id
        for i, res in covers:
            m = res.n_children
            cols_v.append(res.verts)
            cols_g.append(res.grads)
            cols_o.append(res.offs)
            cols_s.append(res.stages)
            cols_p.append(res.phases)
            cols_f.append(np.zeros(m, dtype=bool))
            cols_id.append(np.arange(nid, nid + m, dtype=np.int64))
            cols_par.append(np.full(m, st.ids[i], dtype=np.int64))
            cols_ih.append(res.iso_h)
            cols_ia.append(res.iso_axis)
            cols_prev.append(np.full(m, i, dtype=np.int64))
            nid += m
        self._next_id = nid
        return TwoWellState(
            st.delta, k,
            np.concatenate(cols_v), np.concatenate(cols_g),
            np.concatenate(cols_o), np.concatenate(cols_s),
            np.concatenate(cols_p), np.concatenate(cols_f),
            np.concatenate(cols_id), np.concatenate(cols_par),
            np.concatenate(cols_ih), np.concatenate(cols_ia),
            np.concatenate(cols_prev))

    # -- metrics and certification ----------------------------------------

    def _record(self, l1_chi, l1_grad, wsup, wl1, refined_area):
        cfg = self.config
        st = self.state
        areas = st.areas()
        total = float(areas.sum())
        dists = mg.dist_to_wells_b(st.grads, self.wells).min(axis=1)
        hist = np.bincount(st.stages, weights=areas)
        row = {
            "k": st.k, "n_cells": st.n,
            "n_active": int(np.count_nonzero(~st.frozen)),
            "l1_chi_diff": l1_chi, "l1_grad_diff": l1_grad,
            "wsup_max": wsup, "w_l1_bound": wl1,
            "perimeter_sum": float(cv.tri_perimeters(st.verts).sum()),
            "frozen_measure": float(areas[st.frozen].sum()),
            "mean_dist": float(np.sum(areas * dists) / total),
            "energy": float(np.sum(areas * 2.0 **
                                   (-0.5 * st.stages.astype(float)))),
            "refined_area": refined_area,
            "domain_area": self.domain_area,
            "partition_err": abs(total - self.domain_area),
            "min_stage": int(st.stages.min()),
            "max_stage": int(st.stages.max()),
        }
        checks = cfg.checks
        sw = None
        if cfg.track_bv or checks == "full":
            sw = an.sweep_intervals(st.verts)
            row["bv_chi"] = an.bv_seminorm_cells(
                st.verts, (st.phases == 1).astype(float), sweep=sw)
            row["bv_grad"] = an.bv_seminorm(st, "grad", sweep=sw)
        if checks in ("fast", "full"):
            if row["partition_err"] > cfg.partition_tol * self.domain_area:
                raise ConstructionFailureError(
                    f"partition error {row['partition_err']:.3e} at step "
                    f"{st.k}")
        if checks == "full":
            if sw.overlap_error:
                raise ConstructionFailureError(f"overlapping cells at step "
                                               f"{st.k}")
            row["continuity_err"] = an.continuity_residual(
                st.verts, st.grads, st.offs, sweep=sw)
            trace, stray = an.boundary_trace_residual(
                st.verts, st.grads, st.offs, self.M, sweep=sw,
                hull_segments=self.hull_segments)
            row["trace_err"] = trace
            row["stray_boundary_len"] = stray
            if row["continuity_err"] > cfg.continuity_tol:
                raise ConstructionFailureError(
                    f"continuity residual {row['continuity_err']:.3e} at "
                    f"step {st.k}")
            if trace > cfg.trace_tol:
                raise ConstructionFailureError(
                    f"boundary trace residual {trace:.3e} at step {st.k}")
        self.metrics.append(row, hist)

    def run(self):
        while self.state.k < self.config.max_steps and not self.stalled:
            self.step()
        return self.metrics


def init_engine(domain, M, delta: float,
                config: Optional[EngineConfig] = None, wells=None) -> Engine:
    """Validated construction entry point (datum, wells, domain)."""
    return Engine(domain, M, delta, config, wells)


def run_construction(domain, M, delta: float,
                     config: Optional[EngineConfig] = None,
                     wells=None) -> Engine:
    """Run to completion; on a failed uniform aspect, halve h0 and restart.

    Restarting (rather than shrinking one cell's aspect in place) keeps
    the single-aspect property of the dyadic sub-run intact.
    """
    cfg = config or EngineConfig()
    h0 = cfg.h0
    last_err: Optional[Exception] = None
    for attempt in range(cfg.max_restarts + 1):
        eng = Engine(domain, M, delta, replace(cfg, h0=h0), wells)
        if attempt > 0:
            eng.restarts = attempt
        try:
            eng.run()
            eng.restarts = attempt
            return eng
        except ConstructionFailureError as err:
            last_err = err
            h0 = eng.h0 * 0.5
    raise ConstructionFailureError(
        f"construction failed after {cfg.max_restarts + 1} attempts: "
        f"{last_err}")
