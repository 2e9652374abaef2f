from dataclasses import replace

import numpy as np
import pytest

from heis_imcf.api.errors import (
    ConfigError, DimensionMismatchError, EmptyObstacleError, InvalidParameterError,
    MaxPrincipleViolationError, NonConvergedError, NonPositivePotentialError, TruncatedLevelDataError,
)
from heis_imcf.models.grid_models import Box, DomainMask, NodeLabel, ScalarField
from heis_imcf.models.solver_models import LevelRadii, LevelStatus, OuterBC, Scheme, SolverConfig
from heis_imcf.services.closed_form_service import exact_imcf_arrays
from heis_imcf.services.group_geometry import gauge_distance_arrays
from heis_imcf.services.grid_fields import evaluation_nodes
from heis_imcf.services.obstacle_service import (
    GaugeBall, GaugeBallUnion, build_domain_mask, dilate_mask, parse_obstacle,
)
from heis_imcf.services.solver_service import (
    GHOST_FLOOR, CapacitarySolver, check_maximum_principle, clamp_to_boundary_range, continuation,
    cosine_bumps, dilate_problem, eps_sweep, extract_level_radii, fit_flow_constants, fit_level_slopes,
    local_minimality_test, solve_capacitary, to_imcf, to_imcf_values,
)
from heis_imcf.services.verify_service import check_eps_trend, check_exact_potential


@pytest.fixture
def linear():
    return SolverConfig(p=2.0, eps=0.0)


@pytest.fixture
def voxel_p15():
    return SolverConfig(p=1.5, eps=0.0, scheme=Scheme.VOXEL, sigma_schedule=(1e-4, 1e-6), picard_tol=1e-6)


def unit_ball_mask(Lxy, m):
    return build_domain_mask(Box(Lxy, Lxy, m), GaugeBall((0.0, 0.0, 0.0), 1.0))


@pytest.fixture
def exact_u(koranyi_mask):
    u = exact_imcf_arrays((0.0, 0.0, 0.0), 1.0, *koranyi_mask.box.coords)
    u[koranyi_mask.obstacle] = 0.0
    return ScalarField(u, koranyi_mask.box, koranyi_mask)


class TestSolverConfig:

    def test_defaults_are_valid(self):
        cfg = SolverConfig()
        assert cfg.p == 2.0
        assert cfg.outer_bc == OuterBC.EXACT_POWER

    @pytest.mark.parametrize('kwargs', [
        {'p': 1.0},
        {'p': 2.5},
        {'eps': -0.1},
        {'eps': 1.5},
        {'sigma_schedule': (1e-4, 1e-2)},
        {'p_continuation': (1.5, 1.7)},
        {'picard_tol': 0.0},
        {'max_picard': 0},
        {'outer_bc': 'NEUMANN'},
        {'initial_guess': 'RANDOM'},
        {'scheme': 'SUBCELL'},
        {'cg_forcing': 1.0},
        {'ghost_damping': 0.0},
        {'clamp_tol': 1e-9},
    ])
    def test_rejects_bad_values(self, kwargs):
        with pytest.raises(InvalidParameterError):
            SolverConfig(**kwargs)

    def test_from_dict_ignores_unknown_keys(self):
        cfg = SolverConfig.from_dict({'p': 1.5, 'sigma_schedule': [1e-3, 1e-5], 'bumps': 10})
        assert cfg.p == 1.5
        assert cfg.sigma_schedule == (1e-3, 1e-5)

    def test_with_p_and_eps(self):
        cfg = SolverConfig().with_p(1.3).with_eps(0.5)
        assert (cfg.p, cfg.eps) == (1.3, 0.5)
        assert SolverConfig.from_dict(cfg.to_dict()) == cfg


class TestObstacles:

    def test_parse_gauge_ball(self):
        ball = parse_obstacle({'gauge_ball': {'center': [0, 0, 0], 'radius': 1.0}})
        assert isinstance(ball, GaugeBall)
        assert ball.reference_radii((0, 0, 0)) == (1.0, 1.0)

    def test_parse_nested_union_flattens(self):
        data = {'union': [
            {'gauge_ball': {'center': [0, 0, 0], 'radius': 1.0}},
            {'union': [{'gauge_ball': {'center': [0.5, 0, 0], 'radius': 0.5}}]},
        ]}
        union = parse_obstacle(data)
        assert isinstance(union, GaugeBallUnion)
        assert len(union.balls) == 2
        r_inner, r_outer = union.reference_radii(union.center)
        assert r_inner == pytest.approx(1.0)
        assert r_outer == pytest.approx(1.0)

    def test_parse_unknown_shape(self):
        with pytest.raises(ConfigError):
            parse_obstacle({'cube': {'side': 1.0}})

    def test_nonpositive_radius(self):
        with pytest.raises(InvalidParameterError):
            GaugeBall((0, 0, 0), 0.0)

    def test_mask_labels(self, koranyi_mask):
        counts = koranyi_mask.counts()
        assert counts['OBSTACLE'] > 0
        assert counts['INTERIOR'] > counts['OBSTACLE']
        assert koranyi_mask.labels[12, 12, 12] == NodeLabel.OBSTACLE
        assert koranyi_mask.labels[0, 12, 12] == NodeLabel.OUTER_BOUNDARY

    def test_obstacle_without_nodes(self, small_box):
        with pytest.raises(EmptyObstacleError):
            build_domain_mask(small_box, GaugeBall((0.1, 0.1, 0.05), 0.05))

    def test_obstacle_touching_faces(self, small_box):
        with pytest.raises(EmptyObstacleError):
            build_domain_mask(small_box, GaugeBall((0, 0, 0), 2.5))

    def test_level_is_one_on_the_sphere(self):
        ball = GaugeBall((0.0, 0.0, 0.0), 2.0)
        x = np.array([2.0, 0.0, 1.0])
        y = np.array([0.0, -2.0, 0.0])
        t = np.array([0.0, 0.0, 0.0])
        np.testing.assert_allclose(ball.level(x, y, t), 1.0)
        assert ball.level(np.array([0.0]), np.array([0.0]), np.array([0.0]))[0] == 0.0

    def test_union_level_is_the_smallest(self):
        a = GaugeBall((-1.0, 0.0, 0.0), 0.5)
        b = GaugeBall((1.0, 0.0, 0.0), 0.5)
        x, y, t = Box(2.0, 2.0, (9, 9, 9)).coords
        union = GaugeBallUnion((a, b))
        np.testing.assert_allclose(union.level(x, y, t), np.minimum(a.level(x, y, t), b.level(x, y, t)))

    def test_obstacle_nodes_are_level_at_most_one(self, koranyi_mask):
        np.testing.assert_array_equal(koranyi_mask.obstacle, koranyi_mask.level <= 1.0)
        assert koranyi_mask.level[16, 12, 12] == pytest.approx(1.0)

    def test_dilated_mask_keeps_level(self, koranyi_mask):
        mask = dilate_mask(koranyi_mask, 2.0)
        np.testing.assert_array_equal(mask.level, koranyi_mask.level)

    def test_level_shape_checked(self, koranyi_mask):
        with pytest.raises(DimensionMismatchError):
            DomainMask(koranyi_mask.box, koranyi_mask.labels, level=np.ones((3, 3, 3)))


class TestCapacitarySolver:

    def test_requires_obstacle(self, small_box):
        labels = np.full(small_box.shape, int(NodeLabel.INTERIOR), dtype=np.int8)
        labels[[0, -1], :, :] = NodeLabel.OUTER_BOUNDARY
        with pytest.raises(EmptyObstacleError):
            CapacitarySolver(DomainMask(small_box, labels), 0.0)

    def test_eps_mismatch(self, koranyi_mask, linear):
        solver = CapacitarySolver(koranyi_mask, 0.5)
        with pytest.raises(InvalidParameterError):
            solver.solve(linear)

    def test_dirichlet_values(self, koranyi_mask, linear):
        values = CapacitarySolver(koranyi_mask, 0.0).dirichlet_values(linear)
        assert np.all(values[koranyi_mask.obstacle] == 1.0)
        assert np.all(values[koranyi_mask.interior] == 0.0)
        # exact p = 2 power r^-2 at the face x = 3 on the axis
        assert values[-1, 12, 12] == pytest.approx(1.0 / 9.0)

    def test_linear_solve(self, koranyi_mask, linear):
        sol = solve_capacitary(koranyi_mask, linear)
        v = sol.v.values
        assert sol.converged
        assert np.all(v[koranyi_mask.obstacle] == 1.0)
        assert np.min(v[koranyi_mask.interior]) >= np.min(v[koranyi_mask.outer]) - 1e-8
        assert np.max(v[koranyi_mask.interior]) <= 1.0 + 1e-8
        assert sol.max_principle_violation <= 1e-8
        assert sol.clamped_nodes == 0
        # r^-2 along the x axis, off the obstacle
        x = koranyi_mask.box.axes[0][18:23]
        np.testing.assert_allclose(v[18:23, 12, 12], x ** -2.0, rtol=0.08)
        assert sol.u is not None
        assert np.all(sol.u.values[koranyi_mask.obstacle] == 0.0)
        assert sol.max_log_gradient() > 0

    def test_voxel_linear_problem_takes_one_solve(self, koranyi_mask):
        cfg = SolverConfig(p=2.0, eps=1.0, scheme=Scheme.VOXEL, clamp_tol=0.5)
        sol = solve_capacitary(koranyi_mask, cfg)
        assert sol.converged
        assert sol.iterations == 1

    def test_non_convergence_carries_solution(self, koranyi_mask):
        cfg = SolverConfig(p=1.5, eps=0.0, sigma_schedule=(1e-6,), picard_tol=1e-14, max_picard=1)
        with pytest.raises(NonConvergedError) as info:
            solve_capacitary(koranyi_mask, cfg)
        assert info.value.exit_code == 3
        assert info.value.solution is not None
        assert not info.value.solution.converged

    def test_continuation_order(self, small_box):
        mask = build_domain_mask(small_box, GaugeBall((0, 0, 0), 0.8))
        cfg = SolverConfig(eps=0.0, p_continuation=(2.0, 1.7), sigma_schedule=(1e-2, 1e-4, 1e-6),
                           picard_tol=1e-6)
        solutions = continuation(mask, cfg)
        assert [s.p for s in solutions] == [2.0, 1.7]
        assert all(s.converged for s in solutions)
        assert all(s.max_principle_violation <= cfg.max_principle_tol for s in solutions)

    def test_warm_start_needs_fewer_solves(self, koranyi_mask):
        cfg = SolverConfig(p=1.5, eps=0.0, sigma_schedule=(1e-6,), picard_tol=1e-6)
        solver = CapacitarySolver(koranyi_mask, 0.0)
        cold = solver.solve(cfg)
        warm = solver.solve(cfg, initial=cold.v.values, initial_p=1.5)
        assert warm.iterations < cold.iterations
        np.testing.assert_allclose(warm.v.values, cold.v.values, atol=1e-4)

    def test_profile_guess_keeps_profile_across_p(self, koranyi_mask):
        solver = CapacitarySolver(koranyi_mask, 0.0)
        cfg = SolverConfig(p=1.5, eps=0.0)
        r = gauge_distance_arrays((0.0, 0.0, 0.0), *koranyi_mask.box.coords)
        from_p2 = solver.initial_guess(cfg, initial=np.minimum(1.0, r ** -2.0), initial_p=2.0)
        inner = koranyi_mask.interior
        np.testing.assert_allclose(from_p2[inner], r[inner] ** -5.0)

    def test_dilated_solution_matches(self, koranyi_mask):
        cfg = SolverConfig(p=2.0, eps=0.25)
        base = solve_capacitary(koranyi_mask, cfg)
        mask, dilated_cfg = dilate_problem(koranyi_mask, cfg, 2.0)
        dilated = solve_capacitary(mask, dilated_cfg)
        assert dilated.eps == pytest.approx(0.5)
        np.testing.assert_allclose(dilated.v.values, base.v.values, atol=1e-6)

    def test_eps_sweep_shrinks_toward_zero(self, koranyi_mask):
        distances = eps_sweep(koranyi_mask, SolverConfig(p=2.0), (0.2, 0.1, 0.05))
        assert list(distances) == [0.2, 0.1, 0.05]
        report = check_eps_trend(distances)
        assert report.passed
        assert distances[0.05] > 0.0


class TestBoundaryTreatment:

    def test_ghosts_border_free_nodes(self, koranyi_mask):
        solver = CapacitarySolver(koranyi_mask, 0.0)
        assert solver.ghosts.size > 0
        assert np.all(koranyi_mask.obstacle.ravel(order='F')[solver.ghosts])
        assert np.all(np.any(solver.neighbour_free, axis=1))
        # the centre has no free neighbour
        centre = 12 + 25 * (12 + 25 * 12)
        assert centre not in set(solver.ghosts.tolist())

    def test_extrapolation_is_exact_for_a_ball(self, koranyi_mask):
        solver = CapacitarySolver(koranyi_mask, 0.0)
        level = koranyi_mask.level.ravel(order='F')
        w = np.where(solver.free, 1.0 / level, 1.0)
        solver.extrapolate_ghosts(w)
        expected = 1.0 / np.maximum(level[solver.ghosts], GHOST_FLOOR)
        np.testing.assert_allclose(w[solver.ghosts], expected)

    def test_damped_extrapolation(self, koranyi_mask):
        solver = CapacitarySolver(koranyi_mask, 0.0)
        level = koranyi_mask.level.ravel(order='F')
        w = np.where(solver.free, 1.0 / level, 1.0)
        solver.extrapolate_ghosts(w, damping=0.5)
        target = 1.0 / np.maximum(level[solver.ghosts], GHOST_FLOOR)
        np.testing.assert_allclose(w[solver.ghosts], 0.5 + 0.5 * target)

    @pytest.mark.parametrize('p, Lxy, coarse, fine, limit', [
        (2.0, 2.0, 17, 33, 0.05),
        (1.5, 3.0, 25, 33, 0.15),
    ])
    def test_exact_potential_error_shrinks_with_refinement(self, p, Lxy, coarse, fine, limit):
        cfg = SolverConfig(p=p, eps=0.0, picard_tol=1e-6)
        r_max = 0.9 * Lxy
        errors = []
        for m in (coarse, fine):
            sol = solve_capacitary(unit_ball_mask(Lxy, m), cfg)
            errors.append(check_exact_potential(sol, 1.0, 1.2, r_max, tol=limit))
        assert errors[1].worst < errors[0].worst
        assert errors[1].passed
        assert errors[1].details['clamped_nodes'] == 0

    def test_profile_beats_voxel_obstacle(self):
        mask = unit_ball_mask(2.0, 33)
        profile = solve_capacitary(mask, SolverConfig(p=2.0))
        voxel = solve_capacitary(mask, SolverConfig(p=2.0, scheme=Scheme.VOXEL, clamp_tol=0.5))
        profile_error = check_exact_potential(profile, 1.0, 1.2, 1.8).worst
        voxel_error = check_exact_potential(voxel, 1.0, 1.2, 1.8).worst
        assert profile_error < 0.2 * voxel_error


class TestMaximumPrincipleClamp:

    def test_profile_stays_in_range(self, koranyi_mask):
        sol = solve_capacitary(koranyi_mask, SolverConfig(p=1.5, picard_tol=1e-6))
        assert sol.max_principle_violation <= 1e-8
        assert sol.clamped_nodes == 0
        assert np.min(sol.v.values) > 0.0

    def test_voxel_undershoot_is_an_error(self, koranyi_mask, voxel_p15):
        with pytest.raises(MaxPrincipleViolationError) as info:
            solve_capacitary(koranyi_mask, voxel_p15)
        assert info.value.details['violation'] > voxel_p15.clamp_tol

    def test_voxel_undershoot_clamped_and_reported(self, koranyi_mask, voxel_p15):
        sol = solve_capacitary(koranyi_mask, replace(voxel_p15, clamp_tol=0.5))
        v = sol.v.values
        assert sol.max_principle_violation > 1e-2
        assert sol.clamped_nodes > 0
        assert np.min(v[koranyi_mask.interior]) >= np.min(v[koranyi_mask.dirichlet])
        record = sol.to_dict()
        assert record['max_principle_violation'] == sol.max_principle_violation
        assert record['clamped_nodes'] == sol.clamped_nodes
        assert sol.history[-1]['clamped_nodes'] == sol.clamped_nodes

    def test_voxel_energy_is_monotone(self, koranyi_mask, voxel_p15):
        sol = solve_capacitary(koranyi_mask, replace(voxel_p15, clamp_tol=0.5))
        steps = [h for h in sol.history if 'energy' in h]
        for sigma in voxel_p15.sigma_schedule:
            energies = [h['energy'] for h in steps if h['sigma'] == sigma]
            assert len(energies) > 1
            assert np.all(np.diff(energies) <= 1e-8 * abs(energies[0]))

    def test_clamp_to_boundary_range(self, koranyi_mask):
        values = np.where(koranyi_mask.obstacle, 1.0, 0.5)
        values[koranyi_mask.outer] = 0.1
        values[18, 12, 12] = -0.2
        violation, count = clamp_to_boundary_range(values, koranyi_mask, 1e-8)
        assert violation == pytest.approx(0.3)
        assert count == 1
        assert values[18, 12, 12] == pytest.approx(0.1)

    def test_clamp_leaves_values_within_tolerance(self, koranyi_mask):
        values = np.where(koranyi_mask.obstacle, 1.0, 0.5)
        values[koranyi_mask.outer] = 0.1
        violation, count = clamp_to_boundary_range(values, koranyi_mask, 1e-8)
        assert violation == 0.0 and count == 0


class TestImcfSubstitution:

    def test_to_imcf(self, koranyi_mask, linear):
        sol = solve_capacitary(koranyi_mask, linear)
        u = to_imcf(sol)
        assert np.all(u.values[koranyi_mask.obstacle] == 0.0)
        positive = sol.v.values > 0
        np.testing.assert_allclose(u.values[positive & koranyi_mask.interior],
                                   -np.log(sol.v.values[positive & koranyi_mask.interior]))

    def test_nonpositive_potential(self, koranyi_mask):
        values = np.ones(koranyi_mask.box.shape)
        values[18, 12, 12] = 0.0
        with pytest.raises(NonPositivePotentialError):
            to_imcf_values(values, koranyi_mask, 1.5)

    def test_floor_avoids_error(self, koranyi_mask):
        values = np.ones(koranyi_mask.box.shape)
        values[18, 12, 12] = 0.0
        u = to_imcf_values(values, koranyi_mask, 1.5, floor=1e-12)
        assert np.isfinite(u[18, 12, 12])

    def test_maximum_principle(self, koranyi_mask):
        values = np.where(koranyi_mask.obstacle, 1.0, 0.5)
        values[koranyi_mask.outer] = 0.1
        field = ScalarField(values, koranyi_mask.box, koranyi_mask)
        assert check_maximum_principle(field, koranyi_mask, 1e-8) <= 0.0

        values[18, 12, 12] = 1.2
        with pytest.raises(MaxPrincipleViolationError):
            check_maximum_principle(field.with_values(values), koranyi_mask, 1e-3)


class TestLevelSets:

    def test_exact_level_radii(self, exact_u):
        level = extract_level_radii(exact_u, 1.0)
        assert level.status == LevelStatus.OK
        assert level.crossings > 0
        expected = np.exp(1.0 / 3.0)
        assert level.r_inner == pytest.approx(expected, abs=0.1)
        assert level.r_outer == pytest.approx(expected, abs=0.1)

    def test_truncated_level(self, exact_u):
        assert extract_level_radii(exact_u, 4.0).status == LevelStatus.TRUNCATED

    def test_empty_level(self, exact_u):
        level = extract_level_radii(exact_u, 50.0)
        assert level.status == LevelStatus.EMPTY
        assert np.isnan(level.r_inner)

    def test_slopes(self, exact_u):
        levels = [extract_level_radii(exact_u, s) for s in (1.0, 1.5, 2.0, 2.5)]
        slopes = fit_level_slopes(levels)
        assert slopes['levels'] == 4
        assert slopes['slope_inner'] == pytest.approx(1.0 / 3.0, abs=0.05)
        assert slopes['slope_outer'] == pytest.approx(1.0 / 3.0, abs=0.05)

    def test_slopes_need_two_levels(self):
        levels = [LevelRadii(0.5, 1.2, 1.2), LevelRadii(1.0, 1.4, 1.4, LevelStatus.TRUNCATED)]
        with pytest.raises(TruncatedLevelDataError):
            fit_level_slopes(levels)

    def test_flow_constants(self):
        levels = [LevelRadii(s, 0.9 * np.exp(s / 3), 1.2 * np.exp(s / 3)) for s in (0.0, 0.5, 1.0)]
        fit = fit_flow_constants(levels, eps=0.0, Rstar=1.0, Rbar=1.0)
        assert fit['C0'] == pytest.approx(1.2 ** 3)
        assert fit['Chat'] == 1.0
        assert not fit['inner_ok']

        fit = fit_flow_constants(levels, eps=0.5, Rstar=1.0, Rbar=1.0)
        assert fit['inner_ok']
        assert fit['log_Chat'] == pytest.approx(3 * np.log(1 / 0.9) / 0.5 ** 4)


class TestDilationAndBumps:

    def test_dilate_problem(self, koranyi_mask):
        mask, cfg = dilate_problem(koranyi_mask, SolverConfig(eps=0.4), 2.0)
        assert mask.box.Lxy == 6.0 and mask.box.Lt == 12.0
        assert mask.r_outer == pytest.approx(2.0)
        assert cfg.eps == pytest.approx(0.8)
        np.testing.assert_array_equal(mask.labels, koranyi_mask.labels)

    def test_cosine_bumps(self, exact_u, rng):
        K = evaluation_nodes(exact_u.mask)
        bumps = cosine_bumps(exact_u, K, count=4, radius=0.6, amplitude=0.01, rng=rng)
        assert len(bumps) == 4
        for i, bump in enumerate(bumps):
            support = bump != 0
            assert np.all(K[support])
            assert np.max(np.abs(bump)) <= 0.01
            assert np.sign(bump[support].sum()) == (1 if i % 2 == 0 else -1)

    def test_no_bumps_without_room(self, exact_u, rng):
        K = np.zeros(exact_u.box.shape, dtype=bool)
        assert cosine_bumps(exact_u, K, count=3, radius=0.5, amplitude=0.1, rng=rng) == []

    def test_local_minimality_small_bumps(self, exact_u, rng):
        K = evaluation_nodes(exact_u.mask)
        bumps = cosine_bumps(exact_u, K, count=4, radius=0.6, amplitude=0.01, rng=rng)
        report = local_minimality_test(exact_u, bumps, K, 2.0, 0.0, radius=0.6)
        assert report.evaluated == 4
        assert report.passed

    def test_local_minimality_rejects_lowered_u(self, exact_u):
        K = evaluation_nodes(exact_u.mask)
        report = local_minimality_test(exact_u, [np.full(exact_u.box.shape, -10.0)], K, 2.0, 0.0, radius=0.6)
        assert not report.passed
        assert report.worst < -report.tolerance


def test_box_dilation_keeps_counts():
    box = Box(2.0, 3.0, (17, 17, 17)).scaled(0.5)
    assert box.m == (17, 17, 17)
    assert box.Lt == pytest.approx(0.75)
