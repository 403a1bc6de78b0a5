"""Certification machinery: exact BV/L1 sweeps, fits, dimension counting."""

import math

import numpy as np
import pytest

import twowell.cell as cl
from twowell import analysis as an
from twowell import covering as cov
from twowell import inapprox as ia
from twowell.errors import (InvalidParameterError, UndefinedDimensionError)

DELTA = 0.5


def square_mesh():
    """Unit square as two triangles split along the main diagonal."""
    return np.array([
        [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]],
        [[0.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
    ])


def stripe_mesh(n: int):
    """n vertical stripes, two triangles each, alternating 1/0 values."""
    verts, vals = [], []
    for i in range(n):
        x0, x1 = i / n, (i + 1) / n
        verts.append([[x0, 0.0], [x1, 0.0], [x1, 1.0]])
        verts.append([[x0, 0.0], [x1, 1.0], [x0, 1.0]])
        vals += [float(i % 2)] * 2
    return np.array(verts), np.array(vals)


@pytest.fixture(scope="module")
def cover_mesh():
    """A genuine multiscale mesh: generic cover of a skewed triangle."""
    h0 = cl.calibrate_h0(DELTA, fracs=(0.25, 0.5, 0.75))
    M = ia.stage_representative(2, DELTA)
    plan = cl.replace_dyadic_stage(M, DELTA, h0)
    T = np.array([[0.0, 0.0], [0.9, 0.15], [0.25, 0.8]])
    return cov.cover_generic(T, plan.M, DELTA, plan=plan)


class TestBVSeminorm:
    def test_square_indicator(self):
        verts = square_mesh()
        vals = np.array([1.0, 0.0])
        assert an.bv_seminorm_cells(verts, vals) == pytest.approx(np.sqrt(2))
        # zero extension adds the two outer sides of the value-1 triangle
        with_b = an.bv_seminorm_cells(verts, vals, include_boundary=True)
        assert with_b == pytest.approx(np.sqrt(2) + 2.0)

    def test_constant_field(self):
        verts = square_mesh()
        assert an.bv_seminorm_cells(verts, np.ones(2)) == 0.0
        boundary = an.bv_seminorm_cells(verts, np.full(2, 3.0),
                                        include_boundary=True)
        assert boundary == pytest.approx(12.0)   # 3 * perimeter

    def test_stripe_count(self):
        for n in (2, 5, 9):
            verts, vals = stripe_mesh(n)
            assert an.bv_seminorm_cells(verts, vals) == pytest.approx(
                n - 1, rel=1e-12)

    def test_partial_edge_overlap(self):
        # left half square against a right half split by a skew diagonal:
        # jumps are 2 on the shared vertical edge, 1 on the diagonal
        verts = np.array([
            [[0.0, 0.0], [0.5, 0.0], [0.5, 1.0]],
            [[0.0, 0.0], [0.5, 1.0], [0.0, 1.0]],
            [[0.5, 0.0], [1.0, 0.0], [1.0, 1.0]],
            [[0.5, 0.0], [1.0, 1.0], [0.5, 1.0]],
        ])
        vals = np.array([0.0, 0.0, 1.0, 2.0])
        want = 2.0 * 1.0 + 1.0 * math.sqrt(1.25)
        assert an.bv_seminorm_cells(verts, vals) == pytest.approx(
            want, rel=1e-12)

    def test_rigid_motion_and_scale_invariance(self, cover_mesh):
        verts = cover_mesh.verts
        vals = cover_mesh.phases.astype(float)
        base = an.bv_seminorm_cells(verts, vals)
        assert base > 0
        c, s = np.cos(0.3), np.sin(0.3)
        R = np.array([[c, -s], [s, c]])
        rotated = an.bv_seminorm_cells(verts @ R.T, vals)
        assert rotated == pytest.approx(base, rel=1e-10)
        scaled = an.bv_seminorm_cells(verts * 1e6 - 3e5, vals)
        assert scaled == pytest.approx(base * 1e6, rel=1e-10)

    def test_collinear_overlap_flagged(self):
        # two cells claiming the same side of one edge interval: the
        # signature of a misplaced refinement child
        verts = np.array([
            [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            [[0.25, 0.0], [0.75, 0.0], [0.5, 0.4]],
        ])
        sweep = an.sweep_intervals(verts)
        assert sweep.overlap_error
        # a strictly contained cell shares no edge line; the sweep cannot
        # see it and area conservation is the responsible check
        nested = np.array([
            [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            [[0.2, 0.2], [0.5, 0.2], [0.2, 0.5]],
        ])
        assert not an.sweep_intervals(nested).overlap_error
        hull_area = 0.5
        assert an.tri_areas(nested).sum() > hull_area + 0.01


class TestFieldResiduals:
    def test_affine_field_is_continuous(self, cover_mesh):
        M = np.array([[1.3, 0.2], [-0.4, 0.9]])
        n = cover_mesh.n_children
        grads = np.broadcast_to(M, (n, 2, 2))
        offs = np.broadcast_to(np.array([0.7, -0.1]), (n, 2))
        assert an.continuity_residual(cover_mesh.verts, grads, offs) < 1e-12

    def test_offset_defect_detected(self, cover_mesh):
        M = np.array([[1.3, 0.2], [-0.4, 0.9]])
        n = cover_mesh.n_children
        grads = np.broadcast_to(M, (n, 2, 2)).copy()
        offs = np.zeros((n, 2))
        offs[n // 2] = [1e-7, 0.0]
        resid = an.continuity_residual(cover_mesh.verts, grads, offs)
        assert resid == pytest.approx(1e-7, rel=1e-6)

    def test_trace_residual(self, cover_mesh):
        res = cover_mesh
        M = res.grads[~res.good][0]
        T = np.array([[0.0, 0.0], [0.9, 0.15], [0.25, 0.8]])
        hull = np.stack([T, np.roll(T, -1, axis=0)], axis=1)
        resid, stray = an.boundary_trace_residual(
            res.verts, res.grads, res.offs, M, hull_segments=hull)
        assert resid < 1e-10
        assert stray < 1e-8
        # a shifted trace target is detected at its magnitude
        resid2, _ = an.boundary_trace_residual(
            res.verts, res.grads, res.offs + np.array([0.01, 0.0]), M,
            hull_segments=hull)
        assert resid2 == pytest.approx(0.01, rel=1e-6)

    def test_interface_segments_of_diagonal_split(self):
        verts = square_mesh()
        segs = an.interface_segments(verts, np.array([1, 2], dtype=np.uint8))
        length = np.linalg.norm(segs[:, 1] - segs[:, 0], axis=1).sum()
        assert length == pytest.approx(np.sqrt(2), rel=1e-12)


class TestInterpolation:
    def test_square_indicator_value(self):
        # sup 1, L1 1, BV 4 with boundary: interpolated norm 4^(1/4)
        val = an.wsp_interpolated_norm(1.0, 1.0, 4.0, s=0.25, p=2.0)
        assert val == pytest.approx(4.0 ** 0.25, rel=1e-14)

    def test_zero_field(self):
        assert an.wsp_interpolated_norm(0.0, 0.0, 0.0, 0.25, 2.0) == 0.0

    def test_monotone_in_sp(self):
        # for BV >= L1 the bound grows with s (fixed p)
        vals = [an.wsp_interpolated_norm(1.0, 0.3, 5.0, s, 2.0)
                for s in (0.1, 0.2, 0.3, 0.4)]
        assert all(a < b for a, b in zip(vals, vals[1:]))

    def test_parameter_validation(self):
        with pytest.raises(InvalidParameterError):
            an.wsp_interpolated_norm(1.0, 1.0, 1.0, 0.6, 2.0)   # sp >= 1
        with pytest.raises(InvalidParameterError):
            an.wsp_interpolated_norm(1.0, 1.0, 1.0, -0.1, 2.0)
        with pytest.raises(InvalidParameterError):
            an.wsp_interpolated_norm(1.0, 1.0, 1.0, 0.25, 1.0)

    def test_theta0_closed_form(self):
        assert an.solve_theta0(0.5, 2.0) == pytest.approx(0.5, rel=1e-14)
        want = math.log(2) / (math.log(126) + math.log(2))
        assert an.solve_theta0(0.5, 126.0) == pytest.approx(want, rel=1e-14)
        with pytest.raises(InvalidParameterError):
            an.solve_theta0(1.5, 2.0)
        with pytest.raises(InvalidParameterError):
            an.solve_theta0(0.5, 0.9)

    def test_theta0_vanishes_with_growth(self):
        a = an.solve_theta0(0.5, 10.0)
        b = an.solve_theta0(0.5, 1e6)
        assert b < a < 1.0
        assert b < 0.06


class TestFits:
    def test_exact_geometric(self):
        fit = an.fit_geometric([1.0, 0.5, 0.25, 0.125])
        assert fit.rate == pytest.approx(0.5, rel=1e-12)
        assert fit.r_squared == pytest.approx(1.0)
        assert fit.skipped == 0

    def test_growing_series(self):
        fit = an.fit_geometric([1.0, 3.0, 9.0, 27.0])
        assert fit.rate == pytest.approx(3.0, rel=1e-12)

    def test_window_and_skips(self):
        series = [5.0, 1.0, 0.5, 0.0, 0.125, 0.0625, 0.03125]
        fit = an.fit_geometric(series, window=(1, 6))
        assert fit.skipped == 1          # the zero inside the window
        assert fit.rate == pytest.approx(0.5, rel=1e-10)
        with pytest.raises(InvalidParameterError):
            an.fit_geometric(series, window=(3, 4))   # < 3 usable points

    def test_noisy_rate_recovered(self):
        rng = np.random.default_rng(3)
        k = np.arange(10)
        series = 2.0 * 0.7 ** k * np.exp(rng.normal(0, 0.02, 10))
        fit = an.fit_geometric(series)
        assert fit.rate == pytest.approx(0.7, rel=0.03)
        assert fit.r_squared > 0.98


class TestBoxDimension:
    def test_single_segment(self):
        seg = np.array([[[0.0, 0.0], [1.0, 0.0]]])
        est, table = an.box_dimension(seg)
        assert abs(est - 1.0) <= 0.05
        counts = [row[1] for row in table]
        eps = [row[0] for row in table]
        order = np.argsort(eps)
        assert all(np.diff(np.array(counts)[order][::-1]) >= 0)

    def test_square_boundary(self):
        sq = np.array([[0, 0], [1, 0], [1, 1], [0, 1], [0, 0]], dtype=float)
        segs = np.stack([sq[:-1], sq[1:]], axis=1)
        est, _ = an.box_dimension(segs)
        assert abs(est - 1.0) <= 0.05

    def test_diagonal_line_oracle(self):
        t = np.linspace(0, 1, 33)
        pts = np.stack([t, 0.37 * t + 0.1], axis=1)
        segs = np.stack([pts[:-1], pts[1:]], axis=1)
        est, _ = an.box_dimension(segs)
        assert abs(est - 1.0) <= 0.1

    def test_counts_monotone_by_construction(self):
        rng = np.random.default_rng(11)
        pts = rng.uniform(0, 1, (40, 2))
        segs = np.stack([pts[:-1], pts[1:]], axis=1)
        _, table = an.box_dimension(segs)
        eps = np.array([row[0] for row in table])
        n = np.array([row[1] for row in table])
        order = np.argsort(eps)[::-1]       # coarse -> fine
        assert (np.diff(n[order]) >= 0).all()

    def test_validation(self):
        with pytest.raises(UndefinedDimensionError):
            an.box_dimension(np.zeros((0, 2, 2)))
        seg = np.array([[[0.0, 0.0], [1.0, 0.0]]])
        with pytest.raises(InvalidParameterError):
            an.box_dimension(seg, eps_list=[0.1, 0.05])   # not dyadic

    def test_m_d_column(self):
        seg = np.array([[[0.0, 0.0], [1.0, 0.0]]])
        _, table = an.box_dimension(seg, d_report=1.0)
        for eps, n, md in table:
            assert md == pytest.approx(n * eps)
            # a unit segment occupies about 1/eps boxes
            assert 0.5 / eps <= n <= 2.5 / eps + 2


class TestRaster:
    def test_rasterize_half_square(self):
        verts = square_mesh()
        vals = np.array([1.0, 0.0])
        grid, px = an.rasterize_cells(verts, vals, n=128,
                                      bounds=(0.0, 0.0, 1.0, 1.0))
        assert grid.shape == (128, 128)
        assert px == pytest.approx(1 / 128)
        # diagonal split: half the pixels are 1
        assert abs(grid.mean() - 0.5) < 0.02

    def test_raster_l1_and_bv(self):
        verts, vals = stripe_mesh(2)
        grid, px = an.rasterize_cells(verts, vals, n=128,
                                      bounds=(0.0, 0.0, 1.0, 1.0))
        zero, _ = an.rasterize_cells(verts, np.zeros(4), n=128,
                                     bounds=(0.0, 0.0, 1.0, 1.0))
        # the value-1 stripe has area 1/2
        assert an.raster_l1(grid, zero, px) == pytest.approx(0.5, abs=0.01)
        # one vertical interface of length 1
        assert an.raster_bv(grid, px) == pytest.approx(1.0, abs=0.02)


class TestMetricsSeries:
    def _row(self, k, frozen=0.0):
        return dict(k=k, l1_chi_diff=0.5 ** k, l1_grad_diff=0.5 ** k,
                    bv_chi=2.0 ** k, bv_grad=2.0 ** k,
                    perimeter_sum=4.0 * 2.0 ** k, frozen_measure=frozen,
                    domain_area=1.0, wsup_max=0.5 ** k,
                    w_l1_bound=0.25 ** k, mean_dist=0.1 * 0.5 ** k)

    def test_columns_and_diffs(self):
        m = an.MetricsSeries()
        for k in range(4):
            m.append(self._row(k), np.zeros(3))
        assert np.allclose(m.column("bv_chi"), [1, 2, 4, 8])
        assert len(m.diffs("l1_chi_diff")) == 3

    def test_frozen_must_not_decrease(self):
        m = an.MetricsSeries()
        m.append(self._row(0, frozen=0.2), np.zeros(3))
        with pytest.raises(InvalidParameterError):
            m.append(self._row(1, frozen=0.1), np.zeros(3))

    def test_regularity_report_compliant_window(self):
        m = an.MetricsSeries()
        for k in range(7):
            m.append(self._row(k), np.zeros(3))
        rep = an.regularity_report(m, growth_constant=126.0)
        assert rep.window_compliant
        assert rep.window[0] >= an.TRANSIENT_STEPS
        assert 0 < rep.theta0_measured < 1
        assert rep.c_tilde == pytest.approx(0.5, rel=1e-9)
        assert rep.rho_bv == pytest.approx(2.0, rel=1e-9)
        # theta0 solves c^(1-t) * rho^t = 1
        t = rep.theta0_measured
        assert rep.c_tilde ** (1 - t) * rep.rho_bv ** t == pytest.approx(1.0)
        assert rep.ok()

    def test_regularity_report_frozen_violation(self):
        m = an.MetricsSeries()
        for k in range(7):
            m.append(self._row(k, frozen=0.0 if k < 2 else 0.3), np.zeros(3))
        rep = an.regularity_report(m, growth_constant=126.0)
        assert not rep.window_compliant
        assert rep.frozen_fraction_max > 0.01
        assert not rep.ok()
        # the fits themselves are still reported
        assert 0 < rep.theta0_measured < 1
