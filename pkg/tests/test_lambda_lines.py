import math

import numpy as np
import pytest

from conftest import make_eig_tensor_field, make_w_tensor_field, eigen_of
from lcsvortex.cauchy_green import cg_from_gradient, eigen_decompose
from lcsvortex.errors import DegenerateTensor, OutsideDomain, SectionLeavesDomain
from lcsvortex.lambda_lines import (
    EtaFieldSpec,
    HaltReason,
    PoincareSection,
    build_section,
    eta_direction,
    extend_eta,
    find_closed_orbits,
    integrate_lambda_line,
    polyline_length,
    return_distance,
    sweep_lambda,
)
from lcsvortex.topology import Singularity, SingularityType, WedgePair


def spec_for(tf, lam=1.0, sign=1):
    return EtaFieldSpec(lam, sign, tf, eigen_of(tf))


def tangent_circle_field(n=321, extent=(-2.0, 2.0, -2.0, 2.0)):
    theta = lambda X, Y: np.arctan2(Y, X) + math.pi / 2
    return make_eig_tensor_field(lambda X, Y: 0.25, lambda X, Y: 0.5, theta,
                                 extent=extent, n=n)


class TestEtaDirection:
    def test_boundary_cases(self):
        xi1 = np.array([1.0, 0.0])
        xi2 = np.array([0.0, 1.0])
        for sign in (1, -1):
            d = eta_direction(0.25, 4.0, xi1, xi2, 2.0, sign)  # lam^2 = lam2
            assert np.allclose(d, sign * xi2, atol=1e-15)
        d = eta_direction(0.25, 4.0, xi1, xi2, 0.5, 1)  # lam^2 = lam1
        assert np.allclose(d, xi1, atol=1e-15)

    def test_direct_substitution(self):
        xi1 = np.array([1.0, 0.0])
        xi2 = np.array([0.0, 1.0])
        plus = eta_direction(0.25, 4.0, xi1, xi2, 1.0, 1)
        minus = eta_direction(0.25, 4.0, xi1, xi2, 1.0, -1)
        assert plus[0] == pytest.approx(0.894427190999916, rel=1e-14)
        assert plus[1] == pytest.approx(0.447213595499958, rel=1e-14)
        assert minus[1] == pytest.approx(-0.447213595499958, rel=1e-14)

    def test_outside_domain(self):
        with pytest.raises(OutsideDomain):
            eta_direction(0.5, 0.9, np.array([1.0, 0]), np.array([0, 1.0]), 1.0, 1)

    def test_degenerate(self):
        with pytest.raises(DegenerateTensor):
            eta_direction(1.0, 1.0, np.array([1.0, 0]), np.array([0, 1.0]), 1.0, 1)

    def test_random_identities(self):
        rng = np.random.default_rng(42)
        for _ in range(1000):
            a = rng.normal(size=(2, 2))
            if abs(np.linalg.det(a)) < 1e-2:
                continue
            c11, c12, c22 = cg_from_gradient(a)
            c = np.array([[c11, c12], [c12, c22]])
            lam1, lam2, xi1, xi2, degen = eigen_decompose(c)
            if degen:
                continue
            lam = math.sqrt(rng.uniform(lam1, lam2))
            sign = 1 if rng.random() < 0.5 else -1
            eta = eta_direction(lam1, lam2, xi1, xi2, lam, sign)
            assert np.linalg.norm(eta) == pytest.approx(1.0, abs=1e-12)
            stretch = float(eta @ c @ eta)
            assert stretch == pytest.approx(lam * lam, rel=1e-10)

    def test_shear_line_reduction_at_unit_lambda(self):
        # at lam = 1 the coefficients reduce to sqrt((lam2-1)/gap), sqrt((1-lam1)/gap)
        lam1, lam2 = 0.4, 2.5
        xi1 = np.array([0.8, 0.6])
        xi2 = np.array([-0.6, 0.8])
        eta = eta_direction(lam1, lam2, xi1, xi2, 1.0, 1)
        gap = lam2 - lam1
        expected = math.sqrt((lam2 - 1) / gap) * xi1 + math.sqrt((1 - lam1) / gap) * xi2
        assert np.allclose(eta, expected, atol=1e-12)


class TestExtendEta:
    def make_spec(self, lam=1.0):
        # lam2 = 0.8 + x crosses lam^2 = 1 at x = 0.2
        tf = make_eig_tensor_field(lambda X, Y: 0.5 * np.ones_like(X),
                                   lambda X, Y: 0.8 + X,
                                   lambda X, Y: 0.3 + 0.2 * X + 0.1 * Y,
                                   extent=(0.0, 1.0, 0.0, 1.0), n=201)
        return spec_for(tf, lam=lam)

    def test_region_dispatch(self):
        spec = self.make_spec()
        # x < 0.2: lam2 < 1 = lam^2 -> continuation by xi2
        d = extend_eta(spec, (0.1, 0.5))
        theta = 0.3 + 0.2 * 0.1 + 0.1 * 0.5
        assert abs(abs(np.dot(d, [math.cos(theta), math.sin(theta)])) - 1.0) < 1e-9
        # natural region matches the raw formula on the right-handed frame
        # (the field evaluator pins handedness so the branches stay global)
        from lcsvortex.cauchy_green import eigen_at

        pt = np.array([[0.7, 0.4]])
        lam1, lam2, _, xi2, _, _ = eigen_at(spec.tensor_field, pt)
        xi1_rh = np.array([xi2[0, 1], -xi2[0, 0]])
        expect = eta_direction(lam1[0], lam2[0], xi1_rh, xi2[0], 1.0, 1)
        got = extend_eta(spec, (0.7, 0.4))
        assert min(np.linalg.norm(got - expect), np.linalg.norm(got + expect)) < 1e-12

    def test_continuity_across_region_boundary(self):
        spec = self.make_spec()
        xs = np.linspace(0.05, 0.6, 400)
        pts = np.column_stack([xs, np.full_like(xs, 0.5)])
        from lcsvortex.lambda_lines import _eta_batch

        d, ok, _ = _eta_batch(spec, pts)
        assert ok.all()
        ang = np.arctan2(d[:, 1], d[:, 0])
        jumps = np.abs(np.diff(ang))
        jumps = np.minimum(jumps, math.pi - jumps)  # line angles live mod pi
        assert np.max(jumps) < math.pi / 32

    def test_degenerate_raises(self, wedge_tensor_field):
        spec = spec_for(wedge_tensor_field)
        with pytest.raises(DegenerateTensor):
            extend_eta(spec, (0.0, 0.0))


class TestIntegrateLambdaLine:
    def test_constant_field_straight_line(self):
        tf = make_eig_tensor_field(lambda X, Y: 0.25, lambda X, Y: 0.5,
                                   lambda X, Y: 0.3 * np.ones_like(X),
                                   extent=(-5, 5, -5, 5), n=51)
        spec = spec_for(tf)
        verts, halt = integrate_lambda_line(spec, (0.0, 0.0), max_arclength=3.0,
                                            step=0.05)
        assert halt is HaltReason.MAX_ARCLENGTH
        length = polyline_length(verts, closed=False)
        assert length == pytest.approx(3.0, abs=0.06)
        # straightness: endpoint distance equals arclength
        assert np.linalg.norm(verts[-1] - verts[0]) == pytest.approx(length, rel=1e-9)

    def test_circle_field_returns_to_seed(self):
        spec = spec_for(tangent_circle_field())
        verts, halt = integrate_lambda_line(spec, (1.0, 0.0),
                                            max_arclength=2 * math.pi + 0.3,
                                            step=0.01)
        assert halt is HaltReason.MAX_ARCLENGTH
        d = np.linalg.norm(verts - np.array([1.0, 0.0]), axis=1)
        wrapped = np.argmin(d[int(len(verts) * 0.8):]) + int(len(verts) * 0.8)
        assert d[wrapped] < 5e-3

    def test_left_domain_halt(self):
        tf = make_eig_tensor_field(lambda X, Y: 0.25, lambda X, Y: 0.5,
                                   lambda X, Y: np.zeros_like(X),
                                   extent=(0, 1, 0, 1), n=21)
        spec = spec_for(tf)
        verts, halt = integrate_lambda_line(spec, (0.9, 0.5), max_arclength=50.0,
                                            step=0.02)
        assert halt is HaltReason.LEFT_DOMAIN

    def test_degenerate_cell_halt(self, wedge_tensor_field):
        # lam^2 above lam2 near the path: the orbit follows the dominant
        # eigendirection, whose separatrix runs straight into the isotropic
        # point at the origin
        spec = spec_for(wedge_tensor_field, lam=1.1)
        verts, halt = integrate_lambda_line(spec, (0.08, 0.0), max_arclength=1.0,
                                            step=0.01, orientation=(-1.0, 0.0))
        assert halt is HaltReason.DEGENERATE_CELL
        assert np.linalg.norm(verts[-1]) < 0.08


class TestSections:
    def test_seed_spacing(self):
        sec = build_section(np.array([0.0, 0.0]), length=1.0, n_seeds=100)
        assert len(sec.seeds) == 100
        assert np.allclose(np.diff(sec.seeds[:, 0]), 1.0 / 99.0)
        assert np.allclose(sec.seeds[:, 1], 0.0)
        assert np.allclose(sec.endpoint, [1.0, 0.0])

    def test_ocean_defaults(self):
        sec = build_section(np.array([10.0, -35.0]))
        assert sec.length == 1.5 and len(sec.seeds) == 100

    def test_two_seeds_are_endpoints(self):
        sec = build_section(np.array([1.0, 2.0]), length=0.5, n_seeds=2)
        assert np.allclose(sec.seeds, [[1.0, 2.0], [1.5, 2.0]])

    def test_wedge_pair_anchor(self):
        pair = WedgePair(Singularity(0.0, 0.0, SingularityType.WEDGE),
                         Singularity(0.2, 0.1, SingularityType.WEDGE))
        sec = build_section(pair, length=0.4, n_seeds=5)
        assert np.allclose(sec.anchor, [0.1, 0.05])

    def test_truncation_warning(self):
        with pytest.warns(SectionLeavesDomain):
            sec = build_section(np.array([0.8, 0.5]), length=1.0, n_seeds=10,
                                bounds=((0.0, 1.0), (0.0, 1.0)))
        assert sec.length == pytest.approx(0.2)


class TestReturnDistance:
    def test_circle_field_zero_everywhere(self):
        spec = spec_for(tangent_circle_field())
        sec = build_section(np.array([0.3, 0.0]), length=1.2, n_seeds=5)
        for i in range(5):
            res = return_distance(spec, sec, i, step=0.01)
            assert res.halt is HaltReason.RETURNED
            assert abs(res.distance) < 1e-3

    def test_outward_spiral_positive_sign(self):
        def theta(X, Y):
            # tangent tilted slightly outward
            phi = np.arctan2(Y, X)
            return phi + math.pi / 2 - 0.02

        tf = make_eig_tensor_field(lambda X, Y: 0.25, lambda X, Y: 0.5, theta, n=321)
        spec = spec_for(tf)
        sec = build_section(np.array([0.3, 0.0]), length=0.6, n_seeds=4)
        for i in range(3):
            res = return_distance(spec, sec, i, step=0.01)
            assert res.halt is HaltReason.RETURNED
            assert res.distance > 1e-3
        # the outermost seed spirals past the section end: no return inside
        # the capture window
        res = return_distance(spec, sec, 3, step=0.01)
        assert res.distance is None

    def test_no_return_reports_reason(self):
        tf = make_eig_tensor_field(lambda X, Y: 0.25, lambda X, Y: 0.5,
                                   lambda X, Y: np.zeros_like(X),
                                   extent=(0, 2, -1, 1), n=21)
        spec = spec_for(tf)
        sec = PoincareSection(np.array([0.5, 0.0]), 1.0,
                              np.array([[0.5, 0.0], [1.0, 0.0]]))
        res = return_distance(spec, sec, 0, step=0.02)
        assert res.distance is None
        assert res.halt is HaltReason.LEFT_DOMAIN


def attracting_orbit_field(radius=1.0, pull=0.3, n=321):
    def theta(X, Y):
        phi = np.arctan2(Y, X)
        r = np.hypot(X, Y)
        tx = -np.sin(phi) + pull * (radius - r) * np.cos(phi)
        ty = np.cos(phi) + pull * (radius - r) * np.sin(phi)
        return np.arctan2(ty, tx)

    return make_eig_tensor_field(lambda X, Y: 0.25, lambda X, Y: 0.5, theta, n=n)


class TestFindClosedOrbits:
    def test_all_positive_distances_empty(self):
        def theta(X, Y):
            phi = np.arctan2(Y, X)
            return phi + math.pi / 2 - 0.1

        tf = make_eig_tensor_field(lambda X, Y: 0.25, lambda X, Y: 0.5, theta, n=161)
        spec = spec_for(tf)
        sec = build_section(np.array([0.3, 0.0]), length=1.0, n_seeds=12)
        assert find_closed_orbits(spec, sec, step=0.02) == []

    def test_circle_field_every_seed_closes(self):
        spec = spec_for(tangent_circle_field())
        sec = build_section(np.array([0.4, 0.0]), length=1.0, n_seeds=10)
        orbits = find_closed_orbits(spec, sec, step=0.01)
        assert len(orbits) == 10
        offsets = [o.seed_offset for o in orbits]
        assert offsets == sorted(offsets)

    def test_bisection_finds_limit_orbit(self):
        spec = spec_for(attracting_orbit_field())
        sec = build_section(np.array([0.5, 0.0]), length=1.0, n_seeds=12)
        orbits = find_closed_orbits(spec, sec, step=0.01)
        assert len(orbits) == 1
        # the attracting orbit sits at radius 1, i.e. offset 0.5 from anchor
        assert orbits[0].seed_offset == pytest.approx(0.5, abs=5e-3)
        r = np.linalg.norm(orbits[0].vertices, axis=1)
        assert np.max(np.abs(r - 1.0)) < 5e-3

    def test_reversed_orientation_same_point_set(self):
        spec = spec_for(tangent_circle_field(n=641))
        fwd, halt_f = integrate_lambda_line(spec, (1.0, 0.0), 2 * math.pi + 0.2, 0.01,
                                            orientation=(0.0, 1.0))
        bwd, halt_b = integrate_lambda_line(spec, (1.0, 0.0), 2 * math.pi + 0.2, 0.01,
                                            orientation=(0.0, -1.0))
        # same circle traversed in opposite senses: every forward vertex lies
        # on the backward polyline (sampling phases differ, so compare offsets
        # to segments rather than vertex to vertex)
        a = bwd[:-1]
        seg = bwd[1:] - a
        len2 = np.sum(seg**2, axis=1)
        rel = fwd[:, None] - a[None]
        t = np.clip(np.sum(rel * seg[None], axis=2) / len2[None], 0.0, 1.0)
        d = np.linalg.norm(rel - t[..., None] * seg[None], axis=2)
        assert np.max(d.min(axis=1)) < 2e-4
        assert np.dot(fwd[1] - fwd[0], bwd[1] - bwd[0]) < 0


class TestSweepLambda:
    def fake_pair(self, dx=0.05):
        a = Singularity(-dx, 0.0, SingularityType.WEDGE)
        b = Singularity(dx, 0.0, SingularityType.WEDGE)
        return WedgePair(a, b), [a, b]

    def test_no_orbits_returns_none(self):
        def theta(X, Y):
            phi = np.arctan2(Y, X)
            return phi + math.pi / 2 - 0.1

        tf = make_eig_tensor_field(lambda X, Y: 0.25, lambda X, Y: 0.5, theta, n=161)
        pair, sings = self.fake_pair()
        sec = build_section(pair, length=1.0, n_seeds=10)
        out = sweep_lambda(tf, eigen_of(tf), pair, sec, sings,
                           lam_min=0.95, lam_max=1.05, lam_step=0.05, step=0.02)
        assert out is None

    def test_outermost_orbit_with_clean_census(self):
        # the tangent-circle construction lives in the continuation region by
        # design, so the natural-domain filter is disabled here
        tf = tangent_circle_field()
        pair, sings = self.fake_pair()
        sec = build_section(pair, length=1.2, n_seeds=20)
        out = sweep_lambda(tf, eigen_of(tf), pair, sec, sings,
                           lam_min=0.95, lam_max=1.05, lam_step=0.05, step=0.01,
                           natural_fraction_min=0.0)
        assert out is not None
        assert out.census == (2, 0)
        assert out.seed_offset > 1.0  # outermost seed wins
        assert out.polygon.contains(np.array([[0.0, 0.0]]))[0]

    def test_third_singularity_shrinks_acceptance(self):
        tf = tangent_circle_field()
        pair, sings = self.fake_pair()
        intruder = Singularity(0.4, 0.0, SingularityType.WEDGE)
        out = sweep_lambda(tf, eigen_of(tf), pair,
                           build_section(pair, length=1.2, n_seeds=20),
                           sings + [intruder],
                           lam_min=0.95, lam_max=1.05, lam_step=0.05, step=0.01,
                           natural_fraction_min=0.0)
        assert out is not None
        # orbits beyond the intruder's radius are rejected by the census rule
        assert out.seed_offset < 0.4
        assert out.census == (2, 0)

    def test_continuation_orbit_rejected_by_natural_filter(self):
        # with the default filter the all-continuation construction yields
        # no admissible boundary at all
        tf = tangent_circle_field()
        pair, sings = self.fake_pair()
        sec = build_section(pair, length=1.2, n_seeds=20)
        out = sweep_lambda(tf, eigen_of(tf), pair, sec, sings,
                           lam_min=0.95, lam_max=1.05, lam_step=0.05, step=0.01)
        assert out is None
