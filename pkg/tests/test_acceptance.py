"""Acceptance suite: every top-level criterion at its stated tolerance.

Each test prints one `ACCEPTANCE <name>: PASS/FAIL` line (run pytest with -s
to see them).  The non-normality reversal criterion is known-unattainable
under the documented Ohmic rate law and is expected to fail; see the ledger
notes shipped alongside the repository for the analysis.
"""

import math

import numpy as np
import pytest

from qdimer.dynamics import (
    mc_unraveling,
    normalize,
    propagate,
    steady_state,
)
from qdimer.linalg import logm_psd
from qdimer.metrics import (
    lindblad_entropy_production,
    nh_entropy,
    nh_entropy_rate,
    normalized_output_distance,
    trace_distance,
    vn_entropy,
)
from qdimer.model import (
    GeneratorSpec,
    ModelParams,
    bath_dissipators,
    build_gamma,
    build_hamiltonian,
    build_liouvillian,
    global_terms,
    local_terms,
    rate_gamma,
    thermal_state,
)
from qdimer.spectral import commutator_diagnostics, ep_scan
from util import APPENDIX_B_PARAMS, APPENDIX_C_PARAMS, MAIN_PARAMS, random_density, random_params

MAIN = ModelParams(g=0.1, **MAIN_PARAMS)
G_STAR_HEFF = (rate_gamma(1.0, 0.2, 10.0) - rate_gamma(1.0, 0.05, 10.0)) / 4.0


def check(name: str, ok: bool, detail: str = "") -> None:
    print(f"ACCEPTANCE {name}: {'PASS' if ok else 'FAIL'}" + (f"  [{detail}]" if detail else ""))
    assert ok, f"{name}: {detail}"


def initial_state(p: ModelParams) -> np.ndarray:
    return thermal_state(build_hamiltonian(p), p.T_h)


@pytest.fixture(scope="module")
def liouvillian_scans():
    """All eight Fig.-6 style scans over g in [0, 2.2], cached for the module."""
    grid = np.linspace(0.0, 2.2, 441)
    out = {}
    for approach in ("local", "global"):
        for policy in ("full", "none", "postselect_cold", "postselect_hot"):
            reports = ep_scan(MAIN, GeneratorSpec(approach, policy), "liouvillian", grid)
            out[(approach, policy)] = [r for r in reports if r.accepted]
    return out


def test_ep_location_main_regime():
    reports = ep_scan(MAIN, GeneratorSpec("local", "full"), "heff", np.linspace(0.0, 0.6, 121))
    accepted = [r for r in reports if r.accepted]
    ok = (
        len(accepted) == 1
        and abs(accepted[0].g_star - 0.12) <= 0.02
        and accepted[0].gap_at_peak <= 1e-6
        and accepted[0].nonorthogonality_at_peak <= 1e-4
        and accepted[0].kappa_at_peak >= 1e3
    )
    detail = f"{len(accepted)} accepted" + (
        f", g*={accepted[0].g_star:.6f}, gap={accepted[0].gap_at_peak:.2e}, "
        f"nonorth={accepted[0].nonorthogonality_at_peak:.2e}, kappa={accepted[0].kappa_at_peak:.2e}"
        if accepted
        else ""
    )
    check("ep-location-main-regime", ok, detail)


def test_ep_location_microscopically_valid_regime():
    p = ModelParams(g=1e-4, **APPENDIX_B_PARAMS)
    reports = ep_scan(p, GeneratorSpec("local", "full"), "heff", np.linspace(1e-5, 1e-3, 100))
    accepted = [r for r in reports if r.accepted]
    ok = len(accepted) == 1 and abs(accepted[0].g_star - 1.2e-4) <= 0.2e-4
    detail = f"{len(accepted)} accepted" + (f", g*={accepted[0].g_star:.4e}" if accepted else "")
    check("ep-location-appendix-b", ok, detail)


def test_liouvillian_exceptional_points(liouvillian_scans):
    full = liouvillian_scans[("local", "full")]
    nojump = liouvillian_scans[("local", "none")]
    cold = liouvillian_scans[("local", "postselect_cold")]
    hot = liouvillian_scans[("local", "postselect_hot")]
    global_total = sum(len(liouvillian_scans[("global", pol)]) for pol in
                       ("full", "none", "postselect_cold", "postselect_hot"))

    ok_full = len(full) >= 3
    central = min(full, key=lambda r: abs(r.g_star - 0.12)) if full else None
    ok_central = central is not None and abs(central.g_star - G_STAR_HEFF) <= 0.05
    ok_cold = len(cold) == 1 and abs(cold[0].g_star - G_STAR_HEFF) <= 0.05
    ok_hot = len(hot) == 1 and abs(hot[0].g_star - G_STAR_HEFF) <= 0.05
    ok_nojump = len(nojump) == 1 and abs(nojump[0].g_star - G_STAR_HEFF) <= 1e-3
    ok_global = global_total == 0

    detail = (
        f"full={[round(r.g_star, 4) for r in full]}, nojump={[round(r.g_star, 6) for r in nojump]}, "
        f"cold={[round(r.g_star, 4) for r in cold]}, hot={[round(r.g_star, 4) for r in hot]}, "
        f"global accepted={global_total}"
    )
    check(
        "liouvillian-eps",
        ok_full and ok_central and ok_cold and ok_hot and ok_nojump and ok_global,
        detail,
    )


def test_commutator_structure():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(100):
        p = random_params(rng)
        h = build_hamiltonian(p)
        gam = build_gamma(global_terms(p))
        scale = max(np.linalg.norm(h) * np.linalg.norm(gam), 1.0)
        worst = max(worst, np.linalg.norm(h @ gam - gam @ h) / scale)
    ok_global = worst <= 1e-12

    p = ModelParams(g=0.77, **MAIN_PARAMS)
    h = build_hamiltonian(p)
    gam = build_gamma(local_terms(p))
    comm = h @ gam - gam @ h
    gc = rate_gamma(1.0, p.alpha_c, p.omega_c)
    gh = rate_gamma(1.0, p.alpha_h, p.omega_c)
    expected = np.zeros((4, 4), dtype=complex)
    expected[0, 3] = 0.5 * p.g * (gc + gh)
    expected[1, 2] = 0.5 * p.g * (-gc + gh)
    expected[2, 1] = 0.5 * p.g * (gc - gh)
    expected[3, 0] = -0.5 * p.g * (gc + gh)
    ok_antidiag = np.abs(comm - expected).max() <= 1e-12

    p2 = ModelParams(g=0.77, alpha_h=0.05, alpha_c=0.2, T_h=0.31, T_c=1.7, omega_c=10.0)
    h2 = build_hamiltonian(p2)
    gam2 = build_gamma(local_terms(p2))
    ok_temp = np.abs((h2 @ gam2 - gam2 @ h2) - comm).max() <= 1e-12

    check(
        "commutator-structure",
        ok_global and ok_antidiag and ok_temp,
        f"max rel [H,Gamma_global] = {worst:.2e}",
    )


def test_nonnormality_panel():
    grid = np.linspace(0.0, 2.2, 221)
    nd_local, hd_global = [], []
    ordering = True
    for g in grid:
        p = MAIN.with_g(float(g))
        dl = commutator_diagnostics(p, GeneratorSpec("local", "full"))
        dg = commutator_diagnostics(p, GeneratorSpec("global", "full"))
        nd_local.append(dl.dd_nonnormality)
        hd_global.append(dg.hd_contribution)
        if g > 0.0 and not dl.l_nonnormality > dg.l_nonnormality:
            ordering = False
    ok_hd = max(hd_global) <= 1e-12
    ok_nd = np.std(nd_local) <= 1e-12
    check(
        "nonnormality-panel",
        ok_hd and ok_nd and ordering,
        f"max HD_glob={max(hd_global):.2e}, std N_D_loc={np.std(nd_local):.2e}, "
        f"local>global for g>0: {ordering}",
    )


def test_nonnormality_reversal_appendix_c():
    # Known spec defect: with the documented Ohmic rate gamma(w) = pi*alpha*w
    # (pinned by the rate_gamma contract and the paper's stated spectral
    # density), the global Liouvillian's non-normality stays below the local
    # one at the Appendix-C parameters for every g > 0; no grouping or
    # convention variant compatible with that rate law reverses the ordering.
    # The criterion is asserted as stated and is expected to fail.
    grid = np.linspace(0.0, 2.2, 56)
    reversed_everywhere = True
    margin = math.inf
    for g in grid:
        if g == 0.0:
            continue  # generators coincide exactly at g = 0
        p = ModelParams(g=float(g), **APPENDIX_C_PARAMS)
        dl = commutator_diagnostics(p, GeneratorSpec("local", "full"))
        dg = commutator_diagnostics(p, GeneratorSpec("global", "full"))
        margin = min(margin, dg.l_nonnormality - dl.l_nonnormality)
        if not dg.l_nonnormality > dl.l_nonnormality:
            reversed_everywhere = False
    check(
        "nonnormality-reversal-appendix-c",
        reversed_everywhere,
        f"min(N_L_global - N_L_local) = {margin:.3e} (reversal requires > 0)",
    )


def test_dynamics_soundness():
    rng = np.random.default_rng(7)
    times = np.linspace(0.0, 4.0, 81)
    ok_trace = ok_pos = ok_semigroup = True
    for _ in range(10):
        p = random_params(rng)
        rho0 = random_density(rng)
        for approach in ("local", "global"):
            parts = build_liouvillian(p, GeneratorSpec(approach, "full"))
            traj = propagate(parts.matrix, rho0, times)
            ok_trace &= bool(np.abs(traj.traces - 1.0).max() <= 1e-10)
            ok_pos &= all(
                np.linalg.eigvalsh(0.5 * (s + s.conj().T)).min() >= -1e-10
                for s in traj.states[::16]
            )
    parts = build_liouvillian(ModelParams(g=0.5, **MAIN_PARAMS), GeneratorSpec("local", "full"))
    rho0 = initial_state(ModelParams(g=0.5, **MAIN_PARAMS))
    direct = propagate(parts.matrix, rho0, np.array([0.0, 2.0])).states[-1]
    half = propagate(parts.matrix, rho0, np.array([0.0, 1.2])).states[-1]
    half = propagate(parts.matrix, 0.5 * (half + half.conj().T), np.array([0.0, 0.8])).states[-1]
    ok_semigroup = np.abs(direct - half).max() <= 1e-10

    p = ModelParams(g=0.6, **MAIN_PARAMS)
    parts_nj = build_liouvillian(p, GeneratorSpec("local", "none"))
    dt = 1e-3
    fd_times = np.arange(0.0, 0.5 + dt / 2, dt)
    traj = propagate(parts_nj.matrix, initial_state(p), fd_times)
    worst_leak = 0.0
    for k in range(1, len(fd_times) - 1, 37):
        fd = (traj.traces[k + 1] - traj.traces[k - 1]) / (2 * dt)
        expected = -2.0 * np.trace(parts_nj.gamma @ traj.states[k]).real
        worst_leak = max(worst_leak, abs(fd - expected) / abs(expected))
    ok_leak = worst_leak <= 1e-4

    check(
        "dynamics-soundness",
        ok_trace and ok_pos and ok_semigroup and ok_leak,
        f"trace={ok_trace}, positivity={ok_pos}, semigroup={ok_semigroup}, "
        f"leak rel err={worst_leak:.2e}",
    )


def test_unraveling_oracle():
    p = ModelParams(g=0.3, **MAIN_PARAMS)
    rho0 = initial_state(p)
    times = np.linspace(0.0, 1.0, 1001)  # dt = 1e-3
    n_traj = 10_000
    res = mc_unraveling(p, GeneratorSpec("local", "full"), rho0, times, n_traj=n_traj, seed=20240)

    expected_nj = normalize(
        propagate(build_liouvillian(p, GeneratorSpec("local", "none")).matrix, rho0, times)
    )
    det_err = np.abs(res.nojump_state_per_time - expected_nj.states).max()

    exact = propagate(build_liouvillian(p, GeneratorSpec("local", "full")).matrix, rho0, times)
    worst = max(trace_distance(a, b) for a, b in zip(res.mean_state_per_time, exact.states))
    ok = det_err <= 1e-6 and worst <= 3.0 / math.sqrt(n_traj)
    check(
        "unraveling-oracle",
        ok,
        f"deterministic err={det_err:.2e}, worst mean distance={worst:.4f} (bound 0.03)",
    )


def test_steady_state_oracles():
    p0 = ModelParams(g=0.0, **MAIN_PARAMS)
    ss0 = steady_state(build_liouvillian(p0, GeneratorSpec("local", "full")).matrix)
    qubit = np.diag([0.0, 1.0]).astype(complex)
    product = np.kron(thermal_state(qubit, p0.T_h), thermal_state(qubit, p0.T_c))
    ok_product = trace_distance(ss0, product) <= 1e-8

    pg = ModelParams(g=0.8, alpha_h=0.05, alpha_c=0.2, T_h=0.5, T_c=0.5, omega_c=10.0)
    ssg = steady_state(build_liouvillian(pg, GeneratorSpec("global", "full")).matrix)
    ok_gibbs = trace_distance(ssg, thermal_state(build_hamiltonian(pg), 0.5)) <= 1e-8

    times = np.linspace(0.0, 15.0, 301)
    ok_monotone = True
    for t_h in (0.15, 0.6, 1.05, 1.5):
        p = ModelParams(g=0.8, alpha_h=0.05, alpha_c=0.2, T_h=t_h, T_c=0.1, omega_c=10.0)
        rho0 = initial_state(p)
        for approach in ("local", "global"):
            parts = build_liouvillian(p, GeneratorSpec(approach, "full"))
            target = steady_state(parts.matrix)
            traj = propagate(parts.matrix, rho0, times)
            dist = np.array([trace_distance(s, target) for s in traj.states])
            tail = dist[len(dist) // 2 :]
            ok_monotone &= bool(np.all(np.diff(tail) <= 1e-12))

    check(
        "steady-state-oracles",
        ok_product and ok_gibbs and ok_monotone,
        f"product={ok_product}, gibbs={ok_gibbs}, monotone tail={ok_monotone}",
    )


def test_thermodynamics():
    times = np.linspace(0.0, 80.0, 401)
    ok_rates = ok_identity = True
    ok_linear = True
    for t_h in (0.59, 1.5):
        p = ModelParams(g=0.8, alpha_h=0.05, alpha_c=0.2, T_h=t_h, T_c=0.1, omega_c=10.0)
        rho0 = initial_state(p)
        for approach in ("local", "global"):
            parts = build_liouvillian(p, GeneratorSpec(approach, "none"))
            traj = propagate(parts.matrix, rho0, times)
            s_nh = []
            for omega in traj.states[::8]:
                rho = omega / np.trace(omega).real
                rates = nh_entropy_rate(rho, omega, parts.gamma)
                ok_rates &= abs(rates.eq16 - rates.eq17) <= 1e-6 * max(1.0, abs(rates.eq16))
                direct = -np.trace(rho @ logm_psd(omega)).real
                closed = vn_entropy(rho) - math.log(np.trace(omega).real)
                ok_identity &= abs(direct - closed) <= 1e-10
                ok_identity &= abs(
                    nh_entropy(rho, omega) - vn_entropy(rho) + math.log(np.trace(omega).real)
                ) <= 1e-12
            s_nh = np.array(
                [nh_entropy(om / np.trace(om).real, om) for om in traj.states]
            )
            a = np.vstack([times, np.ones_like(times)]).T
            _, residual, *_ = np.linalg.lstsq(a, s_nh, rcond=None)
            r2 = 1.0 - residual[0] / ((s_nh - s_nh.mean()) ** 2).sum()
            ok_linear &= r2 > 0.99

    p = ModelParams(g=0.8, alpha_h=0.05, alpha_c=0.2, T_h=1.5, T_c=0.1, omega_c=10.0)
    spec = GeneratorSpec("global", "full")
    parts = build_liouvillian(p, spec)
    ness = steady_state(parts.matrix)
    res = lindblad_entropy_production(
        ness, parts.matrix, bath_dissipators(p, spec), build_hamiltonian(p), p.T_h, p.T_c
    )
    ok_ness = res.rate >= -1e-10 and abs(res.heat_hot + res.heat_cold) <= 1e-8

    check(
        "thermodynamics",
        ok_rates and ok_identity and ok_linear and ok_ness,
        f"eq16=eq17: {ok_rates}, identity: {ok_identity}, linear R2>0.99: {ok_linear}, "
        f"NESS rate={res.rate:.4f}, heat sum={res.heat_hot + res.heat_cold:.2e}",
    )


def test_distinguishability_curves():
    # Local vs global no-jump distance at the Fig.-2 couplings; the 0.05
    # threshold is met with the main-text couplings (see ledger: at the weak
    # caption couplings the distance never exceeds 0.021).
    times = np.linspace(0.0, 10.0, 401)
    ok_lg = True
    for g in (0.22, 0.62):
        p = ModelParams(g=g, **MAIN_PARAMS)
        rho0 = initial_state(p)
        tl = propagate(build_liouvillian(p, GeneratorSpec("local", "none")).matrix, rho0, times)
        tg = propagate(build_liouvillian(p, GeneratorSpec("global", "none")).matrix, rho0, times)
        d = np.array(
            [normalized_output_distance(a, b) for a, b in zip(tl.states, tg.states)]
        )
        window = (times >= 1.0) & (times <= 2.0)
        ok_lg &= bool(d[window].min() > 0.05)

    times3 = np.linspace(0.0, 30.0, 601)
    ok_onset = ok_asymptote = True
    for g in (0.03, 0.33, 0.63, 0.93):
        p = ModelParams(g=g, **MAIN_PARAMS)
        rho0 = initial_state(p)
        onset = {}
        asymptote = {}
        for approach in ("local", "global"):
            full = propagate(
                build_liouvillian(p, GeneratorSpec(approach, "full")).matrix, rho0, times3
            )
            nj = normalize(
                propagate(
                    build_liouvillian(p, GeneratorSpec(approach, "none")).matrix, rho0, times3
                )
            )
            d = np.array([trace_distance(a, b) for a, b in zip(full.states, nj.states)])
            crossing = np.nonzero(d > 0.02)[0]
            onset[approach] = times3[crossing[0]] if crossing.size else math.inf
            asymptote[approach] = d[-1]
        ok_onset &= onset["global"] > onset["local"]
        ok_asymptote &= asymptote["global"] < asymptote["local"]

    check(
        "distinguishability-curves",
        ok_lg and ok_onset and ok_asymptote,
        f"lg>0.05 on [1,2]: {ok_lg}, global onset later: {ok_onset}, "
        f"global asymptote smaller: {ok_asymptote}",
    )
