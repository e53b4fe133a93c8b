import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from spirokin.errors import DomainError
from spirokin.spiral import SpiralParams, spiral_point, discretize_profile
from spirokin.manipulator import build_spec
from spirokin.actuation import (angle_from_chord, chord_from_angle,
                                chord_of_tilt, bend_portions,
                                total_cable_budget, distribute_bend,
                                forward_shape, forward_shape_from_rotations,
                                apply_twist, passive_cable_lengths,
                                actuate_from_rest, rotation_about, tilt_axis,
                                cable_direction, ActuationCommand,
                                JointConfiguration)
from spirokin.gravity import solve_rest_shape, rest_shape
from spirokin.validation import rigid_align


class TestChordAngle:
    def test_zero_chord(self):
        assert angle_from_chord(10.0, 0.0) == 0.0

    def test_right_angle(self):
        assert angle_from_chord(10.0, 10.0 * math.sqrt(2)) == pytest.approx(
            math.pi / 2, abs=1e-12)

    def test_straight_angle(self):
        assert angle_from_chord(10.0, 20.0) == pytest.approx(math.pi, abs=1e-12)

    def test_domain_errors(self):
        with pytest.raises(DomainError):
            angle_from_chord(10.0, 20.1)
        with pytest.raises(DomainError):
            angle_from_chord(10.0, -0.1)
        with pytest.raises(DomainError):
            chord_from_angle(10.0, -0.1)

    @given(st.floats(min_value=1e-3, max_value=1e3),
           st.floats(min_value=0.0, max_value=math.pi))
    def test_round_trip(self, radius, angle):
        chord = chord_from_angle(radius, angle)
        assert angle_from_chord(radius, chord) == pytest.approx(angle,
                                                                abs=1e-12)

    def test_arccos_form_agrees(self):
        r = 7.0
        for x in np.linspace(0.1, 2 * r - 0.1, 25):
            via_acos = math.acos((2 * r * r - x * x) / (2 * r * r))
            assert angle_from_chord(r, x) == pytest.approx(via_acos, abs=1e-9)

    def test_tilt_chord_matches_rotation_matrix(self, spec):
        # closed form against an explicit rigid rotation of the distal hole
        rng = np.random.default_rng(3)
        for _ in range(50):
            j = rng.integers(0, spec.n_joints)
            alpha, gamma = rng.uniform(0, 2 * math.pi, 2)
            beta = rng.uniform(0, spec.joint_limit)
            gap, rim = spec.rest_gap(j), spec.rim_radius(j)
            h = cable_direction(alpha)
            b = np.array([-gap / 2, 0, 0]) + rim * h
            c = rotation_about(tilt_axis(gamma), beta) @ (
                np.array([gap / 2, 0, 0]) + rim * h)
            assert chord_of_tilt(gap, rim, alpha, gamma, beta) == pytest.approx(
                float(np.linalg.norm(b - c)), abs=1e-12)


class TestPortions:
    def test_sum_to_one(self, spec):
        assert math.fsum(bend_portions(spec)) == pytest.approx(1.0, abs=1e-12)

    def test_geometric_ratio(self, spec):
        # chord-rate weights: rim ~ k_p, nominal angle ~ k_p^(mu-3)
        p = bend_portions(spec)
        expected = spec.k_p ** (spec.moment_exponent - 2.0)
        for j in range(len(p) - 1):
            assert p[j + 1] / p[j] == pytest.approx(expected, rel=1e-12)

    def test_uniform_arm_equal_portions(self):
        params = SpiralParams(a=10.0, b=1e-12, k=0.6,
                              delta_theta=math.pi / 6,
                              theta_start=0.0, theta_end=math.pi)
        uniform = build_spec(discretize_profile(params))
        p = bend_portions(uniform)
        assert np.allclose(p, p[0], rtol=1e-9)

    def test_angle_rate_ratio_exact(self, spec):
        # at zero actuation d(angle)/dD = portion / rim; consecutive joints
        # must be in ratio k_p^(mu-3) = k_p^(-11/2) for the default taper
        p = bend_portions(spec)
        rims = np.array([spec.rim_radius(j) for j in range(spec.n_joints)])
        rates = p / rims
        target = spec.k_p ** (spec.moment_exponent - 3.0)
        assert target == pytest.approx(spec.k_p ** -5.5)
        assert target == pytest.approx(1.586, abs=1e-3)
        for j in range(len(rates) - 1):
            assert rates[j + 1] / rates[j] == pytest.approx(target, rel=1e-12)


class TestDistributeBend:
    def test_zero_command(self, spec):
        res = distribute_bend(spec, "dorsal", 0.0)
        assert np.array_equal(res.new_chords, res.budgets)
        assert np.all(res.angles == 0.0)
        assert not res.saturated.any()
        assert res.remainder == 0.0

    def test_negative_rejected(self, spec):
        with pytest.raises(DomainError):
            distribute_bend(spec, "dorsal", -3.0)
        with pytest.raises(DomainError):
            distribute_bend(spec, "sideways", 1.0)

    def test_budget_sum_oracle(self, spec):
        # chord travel from rest to the limit, summed independently
        total = math.fsum(
            chord_from_angle(spec.hole_radius(j), spec.joint_limit)
            for j in range(spec.n_joints))
        assert total_cable_budget(spec) == pytest.approx(total, abs=1e-12)

    def test_full_budget_closes_every_joint(self, spec):
        res = distribute_bend(spec, "dorsal", total_cable_budget(spec))
        assert np.all(res.angles == spec.joint_limit)
        assert np.all(res.new_chords == 0.0)
        assert res.saturated.all()
        assert res.remainder == 0.0

    def test_exact_conservation_random(self, spec):
        rng = np.random.default_rng(1234)
        total_budget = math.fsum(res_budget for res_budget in
                                 (spec.rest_gap(j) for j in range(spec.n_joints)))
        for _ in range(1000):
            d = float(rng.uniform(0.0, 1.4 * total_budget))
            res = distribute_bend(spec, "ventral_right", d)
            consumed_sum = math.fsum(res.consumed)
            assert consumed_sum == min(d, total_budget)
            assert res.remainder == max(0.0, d - total_budget)

    def test_small_increment_geometric_ratio(self, spec):
        # finite increments converge on the taper ratio as D -> 0
        d = total_cable_budget(spec) * 1e-6
        res = distribute_bend(spec, "dorsal", d)
        ratios = res.angles[1:] / res.angles[:-1]
        target = spec.k_p ** -5.5
        assert np.allclose(ratios, target, rtol=1e-6)

    def test_monotone_propagation(self, spec):
        prev = np.zeros(spec.n_joints)
        for d in np.linspace(1.0, total_cable_budget(spec), 30):
            res = distribute_bend(spec, "dorsal", float(d))
            assert np.all(res.angles >= prev - 1e-12)
            assert res.angles[-1] == res.angles.max()
            prev = res.angles

    def test_saturation_is_tip_contiguous(self, spec):
        for d in (30.0, 60.0, 100.0):
            res = distribute_bend(spec, "dorsal", d)
            sat = np.flatnonzero(res.saturated)
            if len(sat):
                assert sat[0] + len(sat) == spec.n_joints


class TestForwardShape:
    def test_straight_line(self, spec):
        shape = forward_shape(spec, np.zeros(spec.n_joints))
        lengths = spec.section_lengths()
        assert shape.tip == pytest.approx([lengths.sum(), 0, 0], abs=1e-9)
        # geometric-series closed form for the self-similar chain
        x1, kp = lengths[0], spec.k_p
        series = x1 * (1 - kp**18) / (1 - kp)
        assert shape.tip[0] == pytest.approx(series, rel=1e-9)

    def test_right_angle_elbow(self, spec):
        angles = np.zeros(spec.n_joints)
        angles[4] = math.pi / 2
        shape = forward_shape(spec, angles)
        # frames past the elbow are rotated by 90 degrees
        r = shape.frames[6, :3, :3]
        assert np.allclose(r @ np.array([1, 0, 0]), [0, 1, 0], atol=1e-12)
        assert shape.planarity_residual() < 1e-9

    def test_full_wrap_lands_on_design_spiral(self, spec, trunk_params):
        res = distribute_bend(spec, "dorsal", total_cable_budget(spec))
        shape = forward_shape(spec, res.configuration(spec))
        verts = shape.positions
        bounds = trunk_params.section_boundaries()
        target2d = spiral_point(trunk_params, bounds, scaled=True)
        target = np.column_stack([target2d, np.zeros(len(target2d))])
        rot, tr = rigid_align(verts, target)
        aligned = target @ rot.T + tr
        err = np.linalg.norm(aligned - verts, axis=1).max()
        assert err < 0.01 * spec.arm_length
        assert err < 1e-6  # in practice the overlay is exact

    def test_frame_validity_random_commands(self, spec):
        rng = np.random.default_rng(99)
        budget = total_cable_budget(spec)
        cables = list(spec.cable_layout)
        for _ in range(200):
            c1, c2 = rng.choice(cables, size=2, replace=False)
            if rng.random() < 0.5:
                config = distribute_bend(
                    spec, c1, float(rng.uniform(0, budget))
                ).configuration(spec)
            else:
                config = apply_twist(
                    spec, (c1, float(rng.uniform(0, budget))),
                    (c2, float(rng.uniform(0, budget)))).configuration
            frames = forward_shape(spec, config).frames
            for f in frames:
                r = f[:3, :3]
                assert np.max(np.abs(r @ r.T - np.eye(3))) < 1e-12
                assert abs(np.linalg.det(r) - 1.0) < 1e-12

    def test_link_rigidity(self, spec):
        rng = np.random.default_rng(5)
        lengths = spec.section_lengths()
        for _ in range(20):
            d = float(rng.uniform(0, total_cable_budget(spec)))
            shape = forward_shape(
                spec, distribute_bend(spec, "ventral_left", d).configuration(spec))
            steps = np.linalg.norm(np.diff(shape.positions, axis=0), axis=1)
            assert np.allclose(steps, lengths, rtol=0, atol=1e-9)

    def test_wrong_count_rejected(self, spec):
        with pytest.raises(DomainError):
            forward_shape(spec, np.zeros(spec.n_joints + 1))


class TestTwist:
    def test_degenerate_second_cable(self, spec):
        bend = distribute_bend(spec, "ventral_left", 42.0)
        tw = apply_twist(spec, ("ventral_left", 42.0), ("ventral_right", 0.0))
        fa = forward_shape(spec, bend.configuration(spec)).frames
        fb = forward_shape(spec, tw.configuration).frames
        assert np.max(np.abs(fa - fb)) < 1e-12
        assert tw.mode == "degenerate"

    def test_same_cable_rejected(self, spec):
        with pytest.raises(DomainError):
            apply_twist(spec, ("dorsal", 5.0), ("dorsal", 5.0))

    def test_equal_ventral_is_sagittal_plane(self, spec):
        arm = spec.arm_length
        for d in (12.0, 45.0, 90.0, 200.0):
            tw = apply_twist(spec, ("ventral_left", d), ("ventral_right", d))
            shape = forward_shape(spec, tw.configuration)
            assert np.max(np.abs(shape.positions[:, 1])) < 1e-6 * arm
            assert shape.planarity_residual() < 1e-6 * arm
            assert tw.mode == "symmetric"
            # inward: equal ventral pull curls the arm downward
            assert shape.tip[2] < 0

    def test_equal_pair_mirror_oracle(self, spec):
        # reflect-and-compare: swapping the two cables must mirror the
        # shape across the sagittal plane
        tw_ab = apply_twist(spec, ("ventral_left", 37.0), ("ventral_right", 37.0))
        tw_ba = apply_twist(spec, ("ventral_right", 37.0), ("ventral_left", 37.0))
        pa = forward_shape(spec, tw_ab.configuration).positions
        pb = forward_shape(spec, tw_ba.configuration).positions
        mirrored = pb * np.array([1.0, -1.0, 1.0])
        assert np.max(np.abs(pa - mirrored)) < 1e-9

    def test_first_cable_chord_preserved(self, spec):
        tw = apply_twist(spec, ("ventral_left", 40.0), ("ventral_right", 22.0))
        h = cable_direction(spec.cable_angle("ventral_left"))
        for j, rot in enumerate(tw.configuration.rotations()):
            gap, rim = spec.rest_gap(j), spec.rim_radius(j)
            b = np.array([-gap / 2, 0, 0]) + rim * h
            c = rot @ (np.array([gap / 2, 0, 0]) + rim * h)
            drift = abs(np.linalg.norm(b - c) - tw.stage1.new_chords[j])
            assert drift < 1e-9

    def test_out_of_plane_monotone(self, spec):
        normal = np.cross([1, 0, 0],
                          cable_direction(spec.cable_angle("ventral_left")))
        prev = -1.0
        for d2 in np.linspace(1.0, 30.0, 12):
            tw = apply_twist(spec, ("ventral_left", 40.0),
                             ("ventral_right", float(d2)))
            if tw.configuration.saturated.sum() > tw.stage1.saturated.sum():
                break  # past the first twist clamp
            tip = forward_shape(spec, tw.configuration).tip
            displacement = abs(float(tip @ normal))
            assert displacement > prev
            prev = displacement

    def test_angles_within_limit(self, spec):
        rng = np.random.default_rng(11)
        for _ in range(60):
            d1 = float(rng.uniform(0, 160))
            d2 = float(rng.uniform(0, 160))
            tw = apply_twist(spec, ("ventral_right", d1), ("dorsal", d2))
            assert np.all(tw.configuration.angles <= spec.joint_limit + 1e-12)
            assert np.all(tw.configuration.angles >= 0.0)

    def test_saturated_arm_reports_remainder(self, spec):
        budget = total_cable_budget(spec)
        tw = apply_twist(spec, ("ventral_left", budget),
                         ("ventral_right", 10.0))
        assert tw.free_up_to == -1
        assert tw.remainder2 == 10.0


class TestPassiveCables:
    def test_straight_all_equal(self, spec):
        config = JointConfiguration(
            axes=np.tile([0.0, 0.0, 1.0], (spec.n_joints, 1)),
            angles=np.zeros(spec.n_joints),
            saturated=np.zeros(spec.n_joints, bool))
        lengths = passive_cable_lengths(spec, config)
        vals = list(lengths.values())
        assert vals[0] == pytest.approx(vals[1], abs=1e-12)
        assert vals[1] == pytest.approx(vals[2], abs=1e-12)

    def test_dorsal_bend_symmetry(self, spec):
        config = distribute_bend(spec, "dorsal", 35.0).configuration(spec)
        lengths = passive_cable_lengths(spec, config)
        assert lengths["dorsal"] < lengths["ventral_left"]
        assert lengths["ventral_left"] == pytest.approx(
            lengths["ventral_right"], abs=1e-9)

    def test_driven_cable_total_matches_bookkeeping(self, spec):
        res = distribute_bend(spec, "dorsal", 35.0)
        lengths = passive_cable_lengths(spec, res.configuration(spec))
        assert lengths["dorsal"] == pytest.approx(
            math.fsum(res.new_chords), abs=1e-9)


class TestActuateFromRest:
    def test_zero_command_reproduces_rest(self, spec):
        rest = solve_rest_shape(spec, 0.3)
        shape = actuate_from_rest(
            spec, rest, ActuationCommand(cable="dorsal", shorten_mm=0.0))
        baseline = rest_shape(spec, rest)
        assert np.max(np.abs(shape.frames - baseline.frames)) < 1e-12

    def test_hanging_equals_pure_actuation(self, spec):
        rest = solve_rest_shape(spec, math.pi / 2)
        cmd = ActuationCommand(cable="ventral_left", shorten_mm=30.0)
        composed = actuate_from_rest(spec, rest, cmd)
        pure = forward_shape(
            spec, distribute_bend(spec, "ventral_left", 30.0).configuration(spec))
        assert np.max(np.abs(composed.frames - pure.frames)) < 1e-9

    def test_gravity_changes_actuated_shape(self, spec):
        cmd = ActuationCommand(cable="dorsal", shorten_mm=40.0)
        tip0 = actuate_from_rest(spec, solve_rest_shape(spec, 0.0), cmd).tip
        tip90 = actuate_from_rest(spec, solve_rest_shape(spec, math.pi / 2),
                                  cmd).tip
        assert np.linalg.norm(tip0 - tip90) > 1.0

    def test_command_validation(self):
        with pytest.raises(DomainError):
            ActuationCommand(cable="dorsal", shorten_mm=-1.0)
        with pytest.raises(DomainError):
            ActuationCommand(cable="dorsal", shorten_mm=1.0, cable2="dorsal",
                             shorten2_mm=1.0)
