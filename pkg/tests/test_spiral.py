import math

import numpy as np
import pytest

from spirokin.errors import DomainError
from spirokin.spiral import (SpiralParams, DesignConstraints, spiral_point,
                             solve_design_parameters, compactness_residual,
                             grasp_range, discretize_profile, revolve_mesh)


def closed_form_design(m):
    """Independent reduction of the design system.

    Eliminating k from the compactness identity turns the range-overlap
    condition into u/(1-u) = m with u = e^{-pi b}, so u = m/(1+m).
    """
    u = m / (1.0 + m)
    b = -math.log(u) / math.pi
    k = 0.5 + 0.5 * u * u
    return b, k


class TestSpiralPoint:
    def test_near_circle_limit(self):
        p = SpiralParams(a=1.0, b=1e-12, k=0.5)
        x, y = spiral_point(p, math.pi / 2)
        assert x == pytest.approx(0.0, abs=1e-9)
        assert y == pytest.approx(1.0, abs=1e-9)

    def test_theta_pi(self):
        b = 0.3
        p = SpiralParams(a=1.0, b=b, k=0.5, theta_start=math.pi / 2,
                         theta_end=math.pi / 2 + 3 * math.pi)
        x, y = spiral_point(p, math.pi)
        assert x == pytest.approx(math.exp(b * math.pi), rel=1e-12)
        assert y == pytest.approx(0.0, abs=1e-12)

    def test_scaled_point(self):
        # direct substitution into the Cartesian form with the k factor
        b, k = 0.1601, 0.6829
        p = SpiralParams(a=1.0, b=b, k=k)
        x, y = spiral_point(p, math.pi / 2, scaled=True)
        assert x == pytest.approx(0.0, abs=1e-12)
        assert y == pytest.approx(k * math.exp(b * math.pi / 2), rel=1e-12)

    def test_scaled_is_k_times_unscaled(self, trunk_params):
        thetas = np.linspace(trunk_params.theta_start,
                             trunk_params.theta_end, 50)
        outer = spiral_point(trunk_params, thetas)
        inner = spiral_point(trunk_params, thetas, scaled=True)
        assert np.allclose(inner, trunk_params.k * outer, rtol=0, atol=1e-12)

    def test_out_of_range_raises(self, trunk_params):
        with pytest.raises(DomainError):
            spiral_point(trunk_params, trunk_params.theta_end + 0.1)


class TestDesignSolve:
    def test_matches_closed_form(self):
        for m in (1.2, 1.53, 2.0, 5.0):
            b_ref, k_ref = closed_form_design(m)
            params = solve_design_parameters(
                DesignConstraints(m=m, r_rigid=30.0))
            assert params.b == pytest.approx(b_ref, abs=1e-9)
            assert params.k == pytest.approx(k_ref, abs=1e-9)

    def test_residuals_of_full_system(self, trunk_params):
        b, k, m = trunk_params.b, trunk_params.k, 1.53
        r1 = k - 0.5 - 0.5 * math.exp(-2 * math.pi * b)
        r2 = (math.exp(-2 * math.pi * b) + math.exp(-math.pi * b)) \
            / (2 * (1 - k)) - m
        assert abs(r1) < 1e-10
        assert abs(r2) < 1e-10

    def test_section_ratio_value(self, trunk_params):
        assert trunk_params.k_p == pytest.approx(0.9196, abs=1e-3)

    def test_scale_from_rigid_radius(self, trunk_params):
        base_radius = (1 - trunk_params.k) * trunk_params.a \
            * math.exp(trunk_params.b * trunk_params.theta_end)
        assert base_radius == pytest.approx(28.0, rel=1e-12)

    def test_degenerate_limit_rejected(self):
        # as b -> 0 the compactness identity drives k -> 1, outside (0, 1)
        k_limit = 0.5 + 0.5 * math.exp(-2 * math.pi * 1e-12)
        assert k_limit > 1 - 1e-9
        with pytest.raises(DomainError):
            SpiralParams(a=1.0, b=0.1, k=1.0)

    def test_m_not_above_one_rejected(self):
        with pytest.raises(DomainError):
            DesignConstraints(m=1.0, r_rigid=30.0)


class TestCompactness:
    def test_solved_params_residual(self, trunk_params):
        assert compactness_residual(trunk_params) < 1e-9

    def test_perturbed_k_breaks_identity(self, trunk_params):
        perturbed = SpiralParams(a=trunk_params.a, b=trunk_params.b,
                                 k=trunk_params.k + 0.01)
        assert compactness_residual(perturbed) > 1e-3

    def test_single_angle_component(self, trunk_params):
        # |y_k - mid| at one angle equals |k - (e^{-2pi b}+1)/2| * a e^{b t} sin t
        a, b, k = trunk_params.a, trunk_params.b, trunk_params.k + 0.02
        t = math.pi / 2
        y_in = a * math.exp(b * (t - 2 * math.pi)) * math.sin(t - 2 * math.pi)
        y_out = a * math.exp(b * t) * math.sin(t)
        y_k = k * a * math.exp(b * t) * math.sin(t)
        component = abs(y_k - 0.5 * (y_in + y_out))
        expected = abs(k - 0.5 * (math.exp(-2 * math.pi * b) + 1)) \
            * a * math.exp(b * t)
        assert component == pytest.approx(expected, rel=1e-12)

    def test_identity_for_any_b(self):
        for b in (0.05, 0.2, 0.618):
            k = 0.5 + 0.5 * math.exp(-2 * b * math.pi)
            p = SpiralParams(a=3.0, b=b, k=k)
            assert compactness_residual(p, n_grid=1000) < 1e-9


class TestGraspRange:
    def test_solved_design_meets_exactly(self, trunk_params):
        gr = grasp_range(trunk_params, 1.53)
        # the design equation makes the gripper's max equal the body's min
        assert gr.overlap == pytest.approx(0.0, abs=1e-9 * gr.hj)

    def test_gripper_max_monotone_in_m(self, trunk_params):
        ms = np.linspace(1.1, 3.0, 20)
        maxes = [grasp_range(trunk_params, m).gripper_max for m in ms]
        assert np.all(np.diff(maxes) > 0)
        hjs = {grasp_range(trunk_params, m).hj for m in ms}
        assert len(hjs) == 1  # body minimum does not depend on m

    def test_identity_ratio(self, trunk_params):
        gr = grasp_range(trunk_params, 1.0)
        assert gr.gripper_max == gr.gh

    def test_as_built_prototype_numbers(self):
        # reverse the published prototype dimensions: body minimum 33 mm,
        # gripper base 40/1.53 mm; the chord formulas then return the
        # quoted 40 mm gripper maximum and 7 mm overlap
        m = 1.53
        hj, gripper_max = 33.0, 40.0
        gh = gripper_max / m
        b = math.log(1.0 + gh / hj) / math.pi
        a = hj / (math.exp(b * math.pi / 2) * (1 + math.exp(b * math.pi)))
        params = SpiralParams(a=a, b=b, k=0.5 + 0.5 * math.exp(-2 * b * math.pi))
        gr = grasp_range(params, m)
        assert gr.hj == pytest.approx(33.0, abs=1e-9)
        assert gr.gripper_max == pytest.approx(40.0, abs=1e-9)
        assert gr.overlap == pytest.approx(7.0, abs=1e-9)


class TestDiscretize:
    def test_trunk_section_count(self, trunk_profile):
        assert trunk_profile.n_sections == 18
        assert trunk_profile.cross_sections.shape == (18, 4, 2)

    def test_gripper_coarser(self):
        g = SpiralParams.gripper()
        prof = discretize_profile(g)
        assert prof.n_sections == 6
        assert prof.n_sections < 18

    def test_adjacent_similarity_from_vertices(self, trunk_profile):
        # measure every edge of every quadrilateral; consecutive sections
        # must scale by exactly e^{-b dtheta}
        kp = trunk_profile.k_p
        quads = trunk_profile.cross_sections
        for i in range(len(quads) - 1):
            for e in range(4):
                d0 = np.linalg.norm(quads[i, e] - quads[i, (e + 1) % 4])
                d1 = np.linalg.norm(quads[i + 1, e] - quads[i + 1, (e + 1) % 4])
                assert d1 / d0 == pytest.approx(kp, abs=1e-12)

    def test_scale_invariance_exact(self, trunk_params):
        p2 = SpiralParams(a=2 * trunk_params.a, b=trunk_params.b,
                          k=trunk_params.k)
        q1 = discretize_profile(trunk_params).cross_sections
        q2 = discretize_profile(p2).cross_sections
        assert np.array_equal(q2, 2.0 * q1)

    def test_span_must_divide(self):
        with pytest.raises(DomainError):
            SpiralParams(a=1, b=0.1, k=0.6, delta_theta=0.7,
                         theta_start=0.0, theta_end=2.0)


class TestMesh:
    def test_revolved_tube(self, trunk_profile):
        verts, faces = revolve_mesh(trunk_profile, segments=16)
        assert verts.shape == (19 * 16, 3)
        assert faces.min() >= 0 and faces.max() < len(verts)
        # two triangles per quad strip cell
        assert len(faces) == 18 * 16 * 2
