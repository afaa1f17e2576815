import math

import numpy as np
import pytest
from scipy.linalg import expm

from lcsvortex.errors import LeftDomain
from lcsvortex.flowmap import (
    FlowMapGrid,
    IntegratorConfig,
    advect,
    compute_flow_map_grid,
    deformation_gradient,
    deformation_gradient_field,
    load_flow_map,
    save_flow_map,
)
from lcsvortex.grid import Axis
from lcsvortex.velocity import AnalyticVelocityField, DoubleGyreField, GriddedVelocityField

TOL = IntegratorConfig(method="rk45", abs_tol=1e-9, rel_tol=1e-9)


def uniform_field(ux=1.0, uy=0.0):
    return AnalyticVelocityField(lambda t, x, y: (np.full_like(x, ux), np.full_like(y, uy)))


def rotation_field():
    return AnalyticVelocityField(lambda t, x, y: (-y, x))


class TestAdvect:
    def test_uniform_translation_exact(self):
        end = advect(uniform_field(), np.array([0.0, 0.0]), 0.0, 2.0, TOL)
        assert np.allclose(end, [2.0, 0.0], atol=1e-12)

    def test_zero_horizon_identity(self):
        x0 = np.array([0.3, 0.7])
        assert np.array_equal(advect(rotation_field(), x0, 1.0, 0.0, TOL), x0)

    def test_solid_body_rotation(self):
        end = advect(rotation_field(), np.array([1.0, 0.0]), 0.0, math.pi / 2, TOL)
        assert np.allclose(end, [0.0, 1.0], atol=1e-7)

    def test_rk4_matches_rk45(self):
        cfg4 = IntegratorConfig(method="rk4", step=1e-3)
        a = advect(rotation_field(), np.array([1.0, 0.0]), 0.0, 1.0, cfg4)
        b = advect(rotation_field(), np.array([1.0, 0.0]), 0.0, 1.0, TOL)
        assert np.allclose(a, b, atol=1e-8)

    def test_composition_property(self):
        fld = DoubleGyreField()
        x0 = np.array([0.3, 0.4])
        t1, t2 = 1.3, 2.1
        direct = advect(fld, x0, 0.0, t1 + t2, TOL)
        staged = advect(fld, advect(fld, x0, 0.0, t1, TOL), t1, t2, TOL)
        assert np.linalg.norm(direct - staged) < 10 * 1e-8

    def test_backward_consistency(self):
        fld = DoubleGyreField()
        x0 = np.array([0.62, 0.35])
        fwd = advect(fld, x0, 0.5, 3.0, TOL)
        back = advect(fld, fwd, 3.5, -3.0, TOL)
        assert np.linalg.norm(back - x0) < 10 * 1e-8

    def test_left_domain_raises(self):
        x_axis = Axis("x", 0.0, 0.1, 11)
        y_axis = Axis("y", 0.0, 0.1, 11)
        ny, nx = 11, 11
        fld = GriddedVelocityField(x_axis, y_axis, None,
                                   np.ones((ny, nx)), np.zeros((ny, nx)))
        with pytest.raises(LeftDomain) as err:
            advect(fld, np.array([0.5, 0.5]), 0.0, 10.0, TOL)
        assert 0.0 < err.value.t_exit <= 10.0

    def test_batch_matches_single(self):
        fld = DoubleGyreField()
        pts = np.array([[0.2, 0.2], [0.5, 0.6], [0.8, 0.3]])
        batch = advect(fld, pts, 0.0, 2.0, TOL)
        for i in range(3):
            single = advect(fld, pts[i], 0.0, 2.0, TOL)
            assert np.array_equal(single, batch[i])


class TestFlowMapGrid:
    def test_identity_on_zero_velocity(self):
        fld = uniform_field(0.0, 0.0)
        fm = compute_flow_map_grid(fld, (0, 1, 0, 1), (6, 6), rho=0.1, cfg=TOL, T=1.0)
        from lcsvortex.flowmap import stencil_points

        assert np.allclose(fm.stencil_final, stencil_points(fm.x_axis, fm.y_axis, 0.1),
                           atol=1e-12)
        assert fm.valid.all()

    def test_translation_shifts_everything(self):
        fm = compute_flow_map_grid(uniform_field(0.5, -0.25), (0, 1, 0, 1), (5, 5),
                                   cfg=TOL, T=2.0)
        from lcsvortex.flowmap import stencil_points

        start = stencil_points(fm.x_axis, fm.y_axis, fm.rho)
        assert np.allclose(fm.stencil_final[..., 0], start[..., 0] + 1.0, atol=1e-10)
        assert np.allclose(fm.stencil_final[..., 1], start[..., 1] - 0.5, atol=1e-10)

    def test_gradient_identity_and_translation(self):
        fm = compute_flow_map_grid(uniform_field(0.7, 0.7), (0, 1, 0, 1), (5, 5),
                                   cfg=TOL, T=1.5)
        df = deformation_gradient(fm, 2, 2)
        assert np.allclose(df, np.eye(2), atol=1e-9)

    def test_gradient_matches_matrix_exponential(self):
        m = np.array([[0.2, 0.5], [-0.3, -0.2]])
        fld = AnalyticVelocityField(
            lambda t, x, y: (m[0, 0] * x + m[0, 1] * y, m[1, 0] * x + m[1, 1] * y))
        T = 1.2
        fm = compute_flow_map_grid(fld, (-1, 1, -1, 1), (9, 9), rho=0.1, cfg=TOL, T=T)
        expect = expm(m * T)
        for iy, ix in [(0, 0), (4, 4), (8, 3)]:
            assert np.allclose(deformation_gradient(fm, iy, ix), expect, atol=1e-6)

    def test_double_gyre_unit_jacobian(self):
        # incompressibility: det(DF) = 1 up to stencil truncation error; the
        # full-resolution bound is exercised by the acceptance suite
        fm = compute_flow_map_grid(DoubleGyreField(), (0, 1, 0, 1), (40, 40),
                                   cfg=IntegratorConfig(), T=2.0)
        df = deformation_gradient_field(fm)
        det = df[..., 0, 0] * df[..., 1, 1] - df[..., 0, 1] * df[..., 1, 0]
        err = np.abs(det - 1.0)
        assert np.nanpercentile(err, 99) < 1e-2
        assert np.nanmedian(err) < 1e-3

    def test_masks_exiting_points(self):
        x_axis = Axis("x", 0.0, 0.1, 11)
        y_axis = Axis("y", 0.0, 0.1, 11)
        fld = GriddedVelocityField(x_axis, y_axis, None,
                                   np.ones((11, 11)), np.zeros((11, 11)))
        fm = compute_flow_map_grid(fld, (0.2, 0.8, 0.2, 0.8), (5, 5), cfg=TOL, T=0.5)
        assert not fm.valid.all() and fm.valid.any()
        assert np.isnan(fm.stencil_final[0][~fm.valid]).all()

    def test_spot_check_against_refined_integration(self):
        fld = DoubleGyreField()
        cfg = IntegratorConfig(abs_tol=1e-9, rel_tol=1e-9)
        fm = compute_flow_map_grid(fld, (0, 1, 0, 1), (50, 50), cfg=cfg,
                                   T=5 * math.pi / 2)
        tight = IntegratorConfig(abs_tol=1e-12, rel_tol=1e-12)
        from lcsvortex.flowmap import stencil_points

        start = stencil_points(fm.x_axis, fm.y_axis, fm.rho)
        for iy, ix in [(10, 10), (25, 40), (44, 7)]:
            ref = advect(fld, start[0, iy, ix], 0.0, 5 * math.pi / 2, tight)
            assert np.linalg.norm(fm.stencil_final[0, iy, ix] - ref) < 1e-4

    def test_thread_count_bit_identical(self):
        fld = DoubleGyreField()
        fm1 = compute_flow_map_grid(fld, (0, 1, 0, 1), (20, 20), cfg=TOL, T=2.0,
                                    threads=1)
        fm4 = compute_flow_map_grid(fld, (0, 1, 0, 1), (20, 20), cfg=TOL, T=2.0,
                                    threads=4)
        assert fm1.stencil_final.tobytes() == fm4.stencil_final.tobytes()

    def test_serialization_roundtrip(self, tmp_path):
        fm = compute_flow_map_grid(DoubleGyreField(), (0, 1, 0, 1), (8, 8), cfg=TOL,
                                   T=1.0)
        save_flow_map(tmp_path / "fm.grid", fm)
        back = load_flow_map(tmp_path / "fm.grid")
        assert back.stencil_final.tobytes() == fm.stencil_final.tobytes()
        assert back.rho == fm.rho and back.T == fm.T and back.t0 == fm.t0
        assert np.array_equal(back.valid, fm.valid)

    def test_rejects_rho_out_of_range(self):
        with pytest.raises(ValueError):
            FlowMapGrid(Axis("x", 0, 1, 2), Axis("y", 0, 1, 2), 0.7, 0.0, 1.0,
                        np.zeros((4, 2, 2, 2)), np.ones((2, 2), dtype=bool))
