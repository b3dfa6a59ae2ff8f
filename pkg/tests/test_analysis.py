import numpy as np
import pytest

from sphereflow import (
    DomainSpec,
    Field,
    ModelParams,
    SpectralGrid,
    StepperConfig,
    a_mu_boundedness,
    basis_mode,
    g_bound,
    gradient_stall_check,
    integrate,
    invariance_growth_test,
    lipschitz_probe,
    lipschitz_radius_scan,
    norm_l2,
    omega_limit_probe,
    random_unit_field,
    rayleigh_quotient,
    sample_v_field,
    scalar_power_gap_constant,
    steady_state_detect,
)
from sphereflow.analysis import predicted_psi_rate
from sphereflow.energy import v_norm

PI = np.pi


def grid_1d(n=32):
    return SpectralGrid(DomainSpec(1, (PI,), (n,)))


class TestGBound:
    def test_zero_arguments_leave_cube_root_term(self):
        assert g_bound(0.0, 0.0, 1) == 1.0
        assert g_bound(0.0, 0.0, 3) == 1.0

    def test_symmetry(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            m, n_arg = rng.uniform(0, 5, size=2)
            for n in (1, 2, 4):
                assert g_bound(m, n_arg, n) == pytest.approx(g_bound(n_arg, m, n))

    def test_monotone_on_grid(self):
        # grid-evaluation oracle: non-decreasing along each axis
        xs = np.linspace(0.0, 4.0, 25)
        for n in (1, 2, 3):
            vals = np.array([[g_bound(a, b, n) for b in xs] for a in xs])
            assert np.all(np.diff(vals, axis=0) >= -1e-12)
            assert np.all(np.diff(vals, axis=1) >= -1e-12)

    def test_rejects_negative_arguments(self):
        with pytest.raises(ValueError):
            g_bound(-1.0, 0.0, 1)


class TestLipschitzProbe:
    def test_finite_and_resolution_stable(self):
        for n in (1, 2, 3):
            p = ModelParams(n=n)
            r1 = lipschitz_probe(grid_1d(32), p, samples=300, seed=4)
            r2 = lipschitz_probe(grid_1d(64), p, samples=300, seed=4)
            assert np.isfinite(r1.max_ratio) and r1.max_ratio > 0
            assert max(r1.max_ratio, r2.max_ratio) / min(r1.max_ratio, r2.max_ratio) <= 2.0

    def test_radius_monotone_on_nested_balls(self):
        scan = lipschitz_radius_scan(grid_1d(), ModelParams(n=2),
                                     [1.0, 2.0, 4.0], samples=300, seed=4)
        assert scan[1.0] <= scan[2.0] <= scan[4.0]

    def test_sampler_hits_target_norm(self):
        g = grid_1d()
        rng = np.random.default_rng(1)
        u = sample_v_field(g, rng, 1.7)
        assert v_norm(u) == pytest.approx(1.7, rel=1e-12)

    def test_probe_validation(self):
        with pytest.raises(ValueError):
            lipschitz_probe(grid_1d(), ModelParams(n=1), ball_radius=0.0)
        with pytest.raises(ValueError):
            lipschitz_probe(grid_1d(), ModelParams(n=1), samples=0)


class TestScalarPowerGap:
    def test_n1_is_exactly_half(self):
        # analytic oracle: |a - b| / (2 |a - b|) = 1/2 for every pair
        assert scalar_power_gap_constant(1) == pytest.approx(0.5, abs=1e-12)

    def test_finite_for_higher_exponents(self):
        for n in (2, 3):
            c0 = scalar_power_gap_constant(n)
            assert np.isfinite(c0)
            # brute-force oracle on a coarser independent grid never exceeds it
            a = np.linspace(-2, 2, 173)
            b = a[:, None]
            num = np.abs(np.abs(a) ** (2 * n - 2) * a - np.abs(b) ** (2 * n - 2) * b)
            den = (np.abs(a) ** (2 * n - 2) + np.abs(b) ** (2 * n - 2)) * np.abs(a - b)
            mask = den > 0
            assert (num[mask] / den[mask]).max() <= c0 * (1 + 1e-9)


class TestXiLipschitzFormulaShape:
    def test_k_formula_grows_with_truncation_level(self):
        # qualitative shape of the global Lipschitz constant of the
        # truncated nonlinearity: K(m) = G(2m, 2m) + 2 m^2 G(2m, 0),
        # evaluated with unit constants, must grow with m
        for n in (1, 2, 3):
            ms = np.linspace(0.5, 8.0, 30)
            k = np.array([
                g_bound(2 * m, 2 * m, n) + 2 * m**2 * g_bound(2 * m, 0.0, n)
                for m in ms
            ])
            assert np.all(np.diff(k) > 0)


class TestInvarianceGrowth:
    def test_scaled_ground_mode_rates(self):
        g = grid_1d(16)
        for eps in (1e-3, -1e-3, 1e-2, -1e-2):
            off = Field(g, np.sqrt(1 + eps) * basis_mode(g, 1).values)
            rep = invariance_growth_test(off, ModelParams(n=1))
            assert rep.relative_error <= 0.01
            # predicted rate is the (1+eps)-scaled version of 2*(1+2+1) = 8
            assert rep.predicted_rate == pytest.approx(8.0 * (1 + eps), rel=1e-10)

    def test_sign_symmetry_of_growth(self):
        g = grid_1d(16)
        up = Field(g, np.sqrt(1 + 1e-3) * basis_mode(g, 1).values)
        dn = Field(g, np.sqrt(1 - 1e-3) * basis_mode(g, 1).values)
        rp = invariance_growth_test(up, ModelParams(n=1))
        rn = invariance_growth_test(dn, ModelParams(n=1))
        assert rp.psi0 > 0 > rn.psi0
        # |psi| grows on both sides at the same rate up to the O(eps)
        # difference between the two base states
        assert rp.measured_rate > 0 and rn.measured_rate > 0
        assert rp.measured_rate == pytest.approx(rn.measured_rate, rel=1e-2)

    def test_random_state_n2(self):
        g = grid_1d(8)
        u = random_unit_field(g, np.random.default_rng(9))
        off = Field(g, np.sqrt(1 + 1e-2) * u.values)
        rep = invariance_growth_test(off, ModelParams(n=2))
        assert rep.relative_error <= 0.01

    def test_on_manifold_is_degenerate(self):
        g = grid_1d(16)
        with pytest.raises(ValueError):
            invariance_growth_test(basis_mode(g, 1), ModelParams(n=1))

    def test_rejects_nonzero_a(self):
        g = grid_1d(16)
        off = Field(g, 1.001 * basis_mode(g, 1).values)
        with pytest.raises(ValueError):
            invariance_growth_test(off, ModelParams(n=1, a=2.0))

    def test_predicted_rate_formula(self):
        g = grid_1d(16)
        u = random_unit_field(g, np.random.default_rng(10))
        from sphereflow import l2n_power, seminorm_h1, seminorm_h2

        p = ModelParams(n=2)
        expected = 2.0 * (
            seminorm_h2(u) ** 2 + 2 * seminorm_h1(u) ** 2 + l2n_power(u, 2)
        )
        assert predicted_psi_rate(u, p) == pytest.approx(expected, rel=1e-12)


class TestAMu:
    def test_stationary_value_scalar_oracle(self):
        g = grid_1d(16)
        traj = integrate(basis_mode(g, 1), ModelParams(n=1),
                         StepperConfig(scheme="etd1", h=1e-3, t_end=0.5,
                                       record_every=50))
        rep = a_mu_boundedness(traj, [0.75, 1.0], t_min=0.1)
        assert abs(rep.sups[0.75] - 3**0.75) <= 1e-10
        assert abs(rep.sups[1.0] - 3.0) <= 1e-10

    def test_trajectory_sups_finite_and_tail_trend(self):
        g = grid_1d(64)
        u0 = random_unit_field(g, np.random.default_rng(42))
        traj = integrate(u0, ModelParams(n=2),
                         StepperConfig(scheme="etd1", h=1e-3, t_end=5.0,
                                       record_every=50))
        rep = a_mu_boundedness(traj, [0.55, 0.6, 0.75, 0.9], t_min=0.1)
        for mu, series in rep.norms.items():
            assert np.isfinite(rep.sups[mu])
            q = len(series) // 4
            assert series[-q:].max() <= series[:q].max() * (1 + 1e-12)

    def test_requires_snapshots(self):
        g = grid_1d(16)
        traj = integrate(basis_mode(g, 1), ModelParams(n=1),
                         StepperConfig(scheme="etd1", h=1e-3, t_end=0.2,
                                       keep_snapshots=False))
        with pytest.raises(ValueError):
            a_mu_boundedness(traj, [0.75])

    def test_requires_tail(self):
        g = grid_1d(16)
        traj = integrate(basis_mode(g, 1), ModelParams(n=1),
                         StepperConfig(scheme="etd1", h=1e-3, t_end=0.01))
        with pytest.raises(ValueError):
            a_mu_boundedness(traj, [0.75], t_min=0.5)


class TestSteadyAndOmega:
    def test_equilibrium_is_steady(self):
        # at N=8 the vector-field evaluation floor sits below 1e-12
        g = SpectralGrid(DomainSpec(1, (PI,), (8,)))
        traj = integrate(basis_mode(g, 1), ModelParams(n=1),
                         StepperConfig(scheme="etd1", h=1e-3, t_end=0.1))
        is_steady, residual = steady_state_detect(traj)
        assert is_steady and residual <= 1e-12

    def test_moving_state_is_not_steady(self):
        g = grid_1d(32)
        u0 = random_unit_field(g, np.random.default_rng(11))
        traj = integrate(u0, ModelParams(n=2),
                         StepperConfig(scheme="etd1", h=1e-3, t_end=0.01))
        is_steady, residual = steady_state_detect(traj)
        assert not is_steady and residual > 1e-4

    def test_omega_limit_ground_state(self):
        g = grid_1d(32)
        u0 = random_unit_field(g, np.random.default_rng(7))
        cfg = StepperConfig(scheme="etd1", h=1e-3, t_end=20.0, record_every=100)
        rep = omega_limit_probe(u0, ModelParams(n=1), cfg, (5.0, 10.0, 15.0))
        assert rep.converged
        assert rep.stall_ok
        assert rep.per_q_max_distance[15.0] <= rep.per_q_max_distance[5.0] + 1e-15
        assert abs(rayleigh_quotient(rep.limit_candidate) - 3.0) <= 1e-6

    def test_stall_events_pass_on_converged_run(self):
        g = grid_1d(32)
        u0 = random_unit_field(g, np.random.default_rng(12))
        traj = integrate(u0, ModelParams(n=1),
                         StepperConfig(scheme="etd1", h=1e-3, t_end=15.0,
                                       record_every=100))
        ok, events = gradient_stall_check(traj)
        assert ok
        assert len(events) > 0  # the converged tail stalls
        for e in events:
            assert e.residual < 1e-6

    def test_omega_q_must_fit_horizon(self):
        g = grid_1d(16)
        u0 = basis_mode(g, 1)
        cfg = StepperConfig(scheme="etd1", h=1e-3, t_end=1.0)
        with pytest.raises(ValueError):
            omega_limit_probe(u0, ModelParams(n=1), cfg, (2.0,))
