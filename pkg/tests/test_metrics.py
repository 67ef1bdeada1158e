import math

import numpy as np
import pytest

from qdimer.dynamics import propagate, steady_state
from qdimer.linalg import logm_psd
from qdimer.metrics import (
    lindblad_entropy_production,
    nh_entropy,
    nh_entropy_rate,
    normalized_output_distance,
    thermo_record,
    trace_distance,
    vn_entropy,
)
from qdimer.model import (
    GeneratorSpec,
    ModelParams,
    bath_dissipators,
    build_hamiltonian,
    build_liouvillian,
    thermal_state,
)
from util import MAIN_PARAMS, random_density

MAIN = ModelParams(g=0.5, **MAIN_PARAMS)


class TestTraceDistance:
    def test_identical_states(self):
        rng = np.random.default_rng(1)
        rho = random_density(rng)
        assert trace_distance(rho, rho) == pytest.approx(0.0, abs=1e-14)

    def test_orthogonal_pure_states(self):
        g = np.diag([1.0, 0.0]).astype(complex)
        e = np.diag([0.0, 1.0]).astype(complex)
        assert trace_distance(g, e) == pytest.approx(1.0, abs=1e-14)

    def test_half_distance_example(self):
        assert trace_distance(np.diag([1.0, 0.0]), np.diag([0.5, 0.5])) == pytest.approx(0.5, abs=1e-14)

    def test_metric_properties(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            a, b, c = (random_density(rng) for _ in range(3))
            assert trace_distance(a, b) == pytest.approx(trace_distance(b, a), abs=1e-14)
            assert trace_distance(a, c) <= trace_distance(a, b) + trace_distance(b, c) + 1e-12

    def test_contractivity_under_full_propagator(self):
        rng = np.random.default_rng(3)
        parts = build_liouvillian(MAIN, GeneratorSpec("local", "full"))
        times = np.array([0.0, 0.7])
        for _ in range(10):
            rho, sigma = random_density(rng), random_density(rng)
            rho_t = propagate(parts.matrix, rho, times).states[-1]
            sigma_t = propagate(parts.matrix, sigma, times).states[-1]
            assert trace_distance(rho_t, sigma_t) <= trace_distance(rho, sigma) + 1e-10


class TestNormalizedOutputDistance:
    def test_scalar_rescale_is_invisible(self):
        rng = np.random.default_rng(4)
        rho = random_density(rng)
        assert normalized_output_distance(0.3 * rho, 0.8 * rho) == pytest.approx(0.0, abs=1e-12)

    def test_reduces_to_trace_distance_for_unit_traces(self):
        rng = np.random.default_rng(5)
        a, b = random_density(rng), random_density(rng)
        assert normalized_output_distance(a, b) == pytest.approx(trace_distance(a, b), abs=1e-14)

    def test_rejects_vanishing_trace(self):
        with pytest.raises(ValueError):
            normalized_output_distance(np.zeros((4, 4)), np.eye(4))


class TestVnEntropy:
    def test_pure_state(self):
        psi = np.zeros(4, dtype=complex)
        psi[2] = 1.0
        assert vn_entropy(np.outer(psi, psi.conj())) == pytest.approx(0.0, abs=1e-12)

    def test_maximally_mixed(self):
        assert vn_entropy(np.eye(4) / 4.0) == pytest.approx(math.log(4), abs=1e-12)

    def test_rank_two(self):
        assert vn_entropy(np.diag([0.5, 0.5, 0.0, 0.0])) == pytest.approx(math.log(2), abs=1e-12)


class TestNhEntropy:
    def test_unit_trace_reduces_to_vn(self):
        rng = np.random.default_rng(6)
        rho = random_density(rng)
        assert nh_entropy(rho, rho) == pytest.approx(vn_entropy(rho), abs=1e-12)

    def test_half_weight_pure_state(self):
        psi = np.array([1.0, 1.0j, 0.0, 0.0]) / math.sqrt(2)
        pure = np.outer(psi, psi.conj())
        assert nh_entropy(pure, 0.5 * pure) == pytest.approx(math.log(2), abs=1e-12)

    def test_rejects_mismatched_state(self):
        rng = np.random.default_rng(7)
        rho, other = random_density(rng), random_density(rng)
        with pytest.raises(ValueError):
            nh_entropy(other, 0.5 * rho)

    def test_closed_form_matches_direct_log(self):
        # S_nH is implemented as S_vN - ln Tr(Omega); check against the
        # defining expression -Tr(rho ln Omega) evaluated independently.
        parts = build_liouvillian(MAIN, GeneratorSpec("local", "none"))
        rho0 = thermal_state(build_hamiltonian(MAIN), MAIN.T_h)
        traj = propagate(parts.matrix, rho0, np.linspace(0.0, 4.0, 9))
        for omega in traj.states:
            rho = omega / np.trace(omega).real
            direct = -np.trace(rho @ logm_psd(omega)).real
            assert nh_entropy(rho, omega) == pytest.approx(direct, abs=1e-10)
            assert nh_entropy(rho, omega) - vn_entropy(rho) == pytest.approx(
                -math.log(np.trace(omega).real), abs=1e-12
            )


class TestNhEntropyRate:
    def test_closed_system_stationary_state(self):
        h = build_hamiltonian(MAIN)
        rho = thermal_state(h, 1.0)  # commutes with H
        rates = nh_entropy_rate(rho, rho, np.zeros_like(h))
        assert rates.eq16 == pytest.approx(0.0, abs=1e-12)
        assert rates.eq17 == pytest.approx(0.0, abs=1e-12)

    def test_identity_gamma_gives_pure_trace_leak(self):
        rng = np.random.default_rng(8)
        rho = random_density(rng)
        c = 0.37
        rates = nh_entropy_rate(rho, rho, c * np.eye(4))
        assert rates.eq17 == pytest.approx(2.0 * c, rel=1e-10)
        assert rates.eq16 == pytest.approx(2.0 * c, rel=1e-10)

    def test_two_forms_agree_along_trajectories(self):
        times = np.linspace(0.0, 10.0, 101)
        for approach in ("local", "global"):
            parts = build_liouvillian(MAIN, GeneratorSpec(approach, "none"))
            rho0 = thermal_state(build_hamiltonian(MAIN), MAIN.T_h)
            traj = propagate(parts.matrix, rho0, times)
            for omega in traj.states:
                rho = omega / np.trace(omega).real
                rates = nh_entropy_rate(rho, omega, parts.gamma)
                assert abs(rates.eq16 - rates.eq17) <= 1e-6 * max(1.0, abs(rates.eq16))

    def test_finite_difference_oracle(self):
        p = ModelParams(g=0.8, alpha_h=0.05, alpha_c=0.2, T_h=1.5, T_c=0.1, omega_c=10.0)
        parts = build_liouvillian(p, GeneratorSpec("local", "none"))
        rho0 = thermal_state(build_hamiltonian(p), p.T_h)
        dt = 1e-3
        times = np.arange(0.0, 0.3 + dt / 2, dt)
        traj = propagate(parts.matrix, rho0, times)
        s_nh = np.array(
            [nh_entropy(om / np.trace(om).real, om) for om in traj.states]
        )
        for k in range(1, len(times) - 1, 25):
            fd = (s_nh[k + 1] - s_nh[k - 1]) / (2 * dt)
            omega = traj.states[k]
            rho = omega / np.trace(omega).real
            analytic = nh_entropy_rate(rho, omega, parts.gamma).eq16
            assert abs(fd - analytic) <= 1e-4 * max(1.0, abs(analytic))


class TestLindbladEntropyProduction:
    def test_equilibrium_steady_state_produces_nothing(self):
        p = ModelParams(g=0.6, alpha_h=0.05, alpha_c=0.2, T_h=0.5, T_c=0.5, omega_c=10.0)
        spec = GeneratorSpec("global", "full")
        parts = build_liouvillian(p, spec)
        ss = steady_state(parts.matrix)
        res = lindblad_entropy_production(
            ss, parts.matrix, bath_dissipators(p, spec), build_hamiltonian(p), p.T_h, p.T_c
        )
        assert abs(res.rate) <= 1e-8
        assert abs(res.heat_hot) <= 1e-8
        assert abs(res.heat_cold) <= 1e-8

    def test_nonequilibrium_steady_state_transports_heat(self):
        p = ModelParams(g=0.8, alpha_h=0.05, alpha_c=0.2, T_h=1.5, T_c=0.1, omega_c=10.0)
        spec = GeneratorSpec("global", "full")
        parts = build_liouvillian(p, spec)
        ss = steady_state(parts.matrix)
        res = lindblad_entropy_production(
            ss, parts.matrix, bath_dissipators(p, spec), build_hamiltonian(p), p.T_h, p.T_c
        )
        assert res.heat_hot > 0.0
        assert res.heat_cold < 0.0
        assert abs(res.heat_hot + res.heat_cold) <= 1e-8
        assert res.rate == pytest.approx(-res.heat_hot / p.T_h - res.heat_cold / p.T_c, abs=1e-8)
        assert res.rate > 0.0

    def test_rate_settles_to_positive_constant(self):
        # the integrated production grows linearly once the state is stationary
        p = ModelParams(g=0.8, alpha_h=0.05, alpha_c=0.2, T_h=1.5, T_c=0.1, omega_c=10.0)
        spec = GeneratorSpec("local", "full")
        parts = build_liouvillian(p, spec)
        dissipators = bath_dissipators(p, spec)
        h = build_hamiltonian(p)
        rho0 = thermal_state(h, p.T_h)
        times = np.linspace(0.0, 40.0, 81)
        traj = propagate(parts.matrix, rho0, times)
        rates = [
            lindblad_entropy_production(s, parts.matrix, dissipators, h, p.T_h, p.T_c).rate
            for s in traj.states[-5:]
        ]
        assert rates[-1] > 0.0
        assert abs(rates[-1] - rates[0]) <= 0.02 * abs(rates[-1])


class TestThermoRecord:
    def test_record_is_consistent(self):
        p = ModelParams(g=0.8, alpha_h=0.05, alpha_c=0.2, T_h=1.5, T_c=0.1, omega_c=10.0)
        h = build_hamiltonian(p)
        rho0 = thermal_state(h, p.T_h)
        spec_full = GeneratorSpec("local", "full")
        parts_full = build_liouvillian(p, spec_full)
        parts_nj = build_liouvillian(p, GeneratorSpec("local", "none"))
        times = np.linspace(0.0, 2.0, 21)
        traj_nj = propagate(parts_nj.matrix, rho0, times)
        traj_full = propagate(parts_full.matrix, rho0, times)
        dissipators = bath_dissipators(p, spec_full)
        for t, omega, rho_l in zip(times, traj_nj.states, traj_full.states):
            rec = thermo_record(
                t, omega, parts_nj.gamma, rho_l, parts_full.matrix, dissipators, h, p.T_h, p.T_c
            )
            assert 0.0 <= rec.S_vN <= math.log(4) + 1e-12
            assert abs(rec.S_nH_rate_eq16 - rec.S_nH_rate_eq17) <= 1e-6 * max(
                1.0, abs(rec.S_nH_rate_eq16)
            )
