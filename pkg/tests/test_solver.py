import math

import numpy as np
import pytest

from qkit import (
    CLOSED_FORM_GAUSSIAN,
    DistributionModel,
    EMPIRICAL_GRID,
    GAUSSIAN,
    GRADIENT_DESCENT,
    LAPLACIAN,
    SolverConfig,
    SolverError,
    Tensor,
    closed_form_gaussian,
    empirical_grid,
    expected_pwlq_error,
    perturb_breakpoints,
    solve_breakpoint,
    solve_multi,
    stationarity_residual,
)

GAUSS3 = DistributionModel(GAUSSIAN, 1.0, 3.0)


class TestConfig:
    def test_defaults(self):
        cfg = SolverConfig()
        assert cfg.method == GRADIENT_DESCENT
        assert cfg.k == 1

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"method": "newton"},
            {"max_iters": 0},
            {"step_size": 0.0},
            {"step_size": 1.5},
            {"tolerance": 0.0},
            {"grid_resolution": 1},
            {"k": 4},
            {"perturbation": 0.6},
        ],
    )
    def test_validation(self, kwargs):
        with pytest.raises(ValueError):
            SolverConfig(**kwargs)


class TestGradientDescent:
    def test_gauss_m3_optimum(self):
        sol = solve_breakpoint(GAUSS3, 4, 3.0)
        assert sol.method == GRADIENT_DESCENT
        assert sol.iterations > 0
        np.testing.assert_allclose(sol.breakpoints[0], 1.1570634998159417, atol=1e-7)
        assert abs(sol.residual) <= 1e-11

    @pytest.mark.parametrize("kind", [GAUSSIAN, LAPLACIAN])
    @pytest.mark.parametrize("m", [2.0, 3.0, 4.0])
    def test_converges_everywhere(self, kind, m):
        d = DistributionModel(kind, 1.0, m)
        sol = solve_breakpoint(d, 4, m)
        assert abs(2.0 * sol.residual) <= 1e-11
        assert 0.01 * m < sol.breakpoints[0] < 0.49 * m

    @pytest.mark.parametrize("kind", [GAUSSIAN, LAPLACIAN])
    def test_matches_dense_analytic_grid(self, kind):
        d = DistributionModel(kind, 1.0, 3.0)
        sol = solve_breakpoint(d, 4, 3.0)
        grid = np.linspace(0.01 * 3.0, 0.49 * 3.0, 2001)
        errs = [expected_pwlq_error(d, 4, 3.0, float(p)) for p in grid]
        best = grid[int(np.argmin(errs))]
        assert abs(sol.breakpoints[0] - best) <= grid[1] - grid[0]

    def test_breakpoint_independent_of_bits(self):
        p4 = solve_breakpoint(GAUSS3, 4, 3.0).breakpoints[0]
        p8 = solve_breakpoint(GAUSS3, 8, 3.0).breakpoints[0]
        np.testing.assert_allclose(p4, p8, rtol=1e-9)

    def test_non_convergence_raises(self):
        cfg = SolverConfig(max_iters=1, tolerance=1e-14)
        with pytest.raises(SolverError):
            solve_breakpoint(GAUSS3, 4, 3.0, cfg)

    def test_bits_validated(self):
        with pytest.raises(ValueError):
            solve_breakpoint(GAUSS3, 9, 3.0)


class TestClosedForm:
    def test_log_fit_value(self):
        np.testing.assert_allclose(
            closed_form_gaussian(3.0), math.log(0.8614 * 3.0 + 0.6079), rtol=1e-14
        )

    def test_range_gate(self):
        with pytest.raises(ValueError):
            closed_form_gaussian(1.9)
        with pytest.raises(ValueError):
            closed_form_gaussian(5.1)

    def test_solution_close_to_descent(self):
        cfg = SolverConfig(method=CLOSED_FORM_GAUSSIAN)
        cf = solve_breakpoint(GAUSS3, 4, 3.0, cfg)
        gd = solve_breakpoint(GAUSS3, 4, 3.0)
        assert cf.method == CLOSED_FORM_GAUSSIAN
        assert cf.iterations == 0
        assert cf.expected_error <= 1.01 * gd.expected_error

    def test_falls_back_outside_range(self):
        d = DistributionModel(GAUSSIAN, 1.0, 6.0)
        with pytest.warns(UserWarning, match="falling back"):
            sol = solve_breakpoint(d, 4, 6.0, SolverConfig(method=CLOSED_FORM_GAUSSIAN))
        assert sol.method == GRADIENT_DESCENT
        assert abs(2.0 * sol.residual) <= 1e-11

    def test_falls_back_for_laplacian(self):
        d = DistributionModel(LAPLACIAN, 1.0, 3.0)
        with pytest.warns(UserWarning, match="falling back"):
            sol = solve_breakpoint(d, 4, 3.0, SolverConfig(method=CLOSED_FORM_GAUSSIAN))
        assert sol.method == GRADIENT_DESCENT


class TestMultiBreakpoint:
    def test_k1_matches_single(self):
        single = solve_breakpoint(GAUSS3, 4, 3.0)
        multi = solve_multi(GAUSS3, 4, 3.0, 1)
        np.testing.assert_allclose(
            multi.breakpoints[0], single.breakpoints[0], atol=1e-8
        )

    @pytest.mark.parametrize("bits", [3, 4, 5])
    def test_more_breakpoints_reduce_error(self, bits):
        errs = [solve_multi(GAUSS3, bits, 3.0, k).expected_error for k in (1, 2, 3)]
        assert errs[0] > errs[1] > errs[2]

    def test_breakpoints_sorted(self):
        sol = solve_multi(GAUSS3, 4, 3.0, 3)
        bps = sol.breakpoints
        assert len(bps) == 3
        assert bps[0] < bps[1] < bps[2] < 3.0

    def test_explicit_init(self):
        sol = solve_multi(GAUSS3, 4, 3.0, 2, init=(0.8, 1.8))
        assert len(sol.breakpoints) == 2
        with pytest.raises(ValueError):
            solve_multi(GAUSS3, 4, 3.0, 2, init=(0.8,))

    def test_grid_method_redirects(self):
        with pytest.raises(SolverError):
            solve_breakpoint(GAUSS3, 4, 3.0, SolverConfig(method=EMPIRICAL_GRID))


class TestEmpiricalGrid:
    def test_ties_resolve_to_smallest(self):
        # every element has the same magnitude, so each candidate breakpoint
        # reconstructs the data exactly and all errors tie at zero
        x = np.full(64, 0.75, dtype=np.float32)
        x[1::2] *= -1
        sol = empirical_grid(Tensor(x), 4, resolution=100)
        assert sol.expected_error == 0.0
        np.testing.assert_allclose(sol.breakpoints[0], 0.75 / 100.0, rtol=1e-12)

    def test_refinement_never_worse(self, truncated_sampler):
        t = Tensor(truncated_sampler(GAUSS3, 50000, 42))
        coarse = empirical_grid(t, 4, resolution=10)
        fine = empirical_grid(t, 4, resolution=1000)
        assert fine.expected_error <= coarse.expected_error

    def test_near_analytic_optimum(self, truncated_sampler):
        t = Tensor(truncated_sampler(GAUSS3, 200000, 42))
        sol = empirical_grid(t, 4, resolution=200)
        # sampling noise moves the empirical minimum a little; the analytic
        # optimum is 1.157 for this model
        assert 0.9 < sol.breakpoints[0] < 1.4

    def test_k2_joint_search(self):
        rng = np.random.default_rng(42)
        t = Tensor(rng.normal(0.0, 1.0, 2000).astype(np.float32))
        sol = empirical_grid(t, 4, k=2, resolution=12)
        assert len(sol.breakpoints) == 2
        assert sol.breakpoints[0] < sol.breakpoints[1]
        assert sol.iterations == 11 * 10 // 2
        assert sol.kind is None and sol.scale is None

    def test_all_zero_rejected(self):
        with pytest.raises(ValueError):
            empirical_grid(Tensor(np.zeros(8, dtype=np.float32)), 4)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            empirical_grid(np.empty(0, dtype=np.float32), 4)


class TestPerturb:
    def test_deterministic(self):
        sol = solve_breakpoint(GAUSS3, 4, 3.0)
        a = perturb_breakpoints(sol, 0.2, seed=7)
        b = perturb_breakpoints(sol, 0.2, seed=7)
        assert a.breakpoints == b.breakpoints

    def test_fraction_zero_is_identity(self):
        sol = solve_breakpoint(GAUSS3, 4, 3.0)
        same = perturb_breakpoints(sol, 0.0, seed=7)
        np.testing.assert_allclose(same.breakpoints, sol.breakpoints, rtol=1e-15)

    def test_scales_by_fraction(self):
        sol = solve_breakpoint(GAUSS3, 4, 3.0)
        p = sol.breakpoints[0]
        moved = perturb_breakpoints(sol, 0.25, seed=3).breakpoints[0]
        assert moved in (pytest.approx(0.75 * p), pytest.approx(1.25 * p))

    def test_error_recomputed_with_context(self):
        sol = solve_breakpoint(GAUSS3, 4, 3.0)
        pert = perturb_breakpoints(sol, 0.2, seed=7)
        assert pert.expected_error > sol.expected_error
        np.testing.assert_allclose(
            pert.expected_error,
            expected_pwlq_error(GAUSS3, 4, 3.0, pert.breakpoints[0]),
            rtol=1e-12,
        )

    def test_grid_solution_loses_error(self):
        x = np.linspace(-1.0, 1.0, 256, dtype=np.float32)
        sol = empirical_grid(Tensor(x), 4, resolution=50)
        pert = perturb_breakpoints(sol, 0.2, seed=7)
        assert pert.expected_error is None

    def test_keeps_order_for_multi(self):
        sol = solve_multi(GAUSS3, 4, 3.0, 3)
        for seed in range(8):
            pert = perturb_breakpoints(sol, 0.3, seed=seed)
            assert all(
                a < b for a, b in zip(pert.breakpoints, pert.breakpoints[1:])
            )
            assert 0.0 < pert.breakpoints[0] and pert.breakpoints[-1] < 3.0

    def test_fraction_validated(self):
        sol = solve_breakpoint(GAUSS3, 4, 3.0)
        with pytest.raises(ValueError):
            perturb_breakpoints(sol, 0.6, seed=1)
