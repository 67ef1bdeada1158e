"""Propagation, Monte-Carlo jump unraveling, and long-time states.

Propagation uses matrix exponentials of the (time-independent) generator, so
the only error is the exponential's.  The jump unraveling serves as an
independent verification oracle: its ensemble mean converges to the full
Lindblad propagation, while its jump-free record reproduces the no-jump
(non-Hermitian) evolution deterministically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import devectorize, eig_general, expm, vectorize
from .model import GeneratorSpec, ModelParams, build_liouvillian, dissipation_terms

__all__ = [
    "Trajectory",
    "UnravelingResult",
    "DegenerateSteadyStateError",
    "propagate",
    "normalize",
    "steady_state",
    "steady_states",
    "longest_lived_state",
    "mc_unraveling",
]

TRACE_FLOOR = 1e-30
STEADY_GAP_TOL = 1e-8
DECAY_DEGENERACY_TOL = 1e-10
MAX_RATE_DT = 1e-2
MC_CHUNK = 2048


class DegenerateSteadyStateError(RuntimeError):
    """The zero eigenvalue of the generator is degenerate; carries all null states."""

    def __init__(self, states: list[np.ndarray]):
        super().__init__(
            f"steady state is not unique: {len(states)} eigenvalues within the gap tolerance"
        )
        self.states = states


@dataclass(frozen=True)
class Trajectory:
    """States on a time grid; unnormalized for no-jump/hybrid policies."""

    times: np.ndarray
    states: np.ndarray  # (nt, 4, 4)
    traces: np.ndarray  # (nt,)


@dataclass(frozen=True)
class UnravelingResult:
    mean_state_per_time: np.ndarray  # (nt, 4, 4) ensemble average
    nojump_state_per_time: np.ndarray  # (nt, 4, 4) normalized jump-free record
    nojump_probability_per_time: np.ndarray  # (nt,)
    n_trajectories: int
    seed: int


def _check_state(rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise ValueError(f"state must be 4x4, got {rho.shape}")
    if np.abs(rho - rho.conj().T).max() > 1e-10:
        raise ValueError("initial state is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > 1e-8:
        raise ValueError(f"initial state must have unit trace, got {np.trace(rho).real}")
    if np.linalg.eigvalsh(rho).min() < -1e-10:
        raise ValueError("initial state is not positive semidefinite")
    return rho


def _check_times(times: np.ndarray) -> np.ndarray:
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size < 1:
        raise ValueError("times must be a nonempty 1-D array")
    if times[0] != 0.0:
        raise ValueError(f"times must start at 0, got {times[0]}")
    if times.size > 1 and not np.all(np.diff(times) > 0.0):
        raise ValueError("times must be strictly increasing")
    return times


def propagate(L: np.ndarray, rho0: np.ndarray, times: np.ndarray) -> Trajectory:
    """Evolve vec(rho0) under exp(t L) on the given grid.

    Uniform grids reuse a single step exponential by repeated application.
    """
    L = np.asarray(L, dtype=complex)
    if L.shape != (16, 16):
        raise ValueError(f"generator must be 16x16, got {L.shape}")
    rho0 = _check_state(rho0)
    times = _check_times(times)

    nt = times.size
    states = np.empty((nt, 4, 4), dtype=complex)
    states[0] = rho0
    if nt > 1:
        dts = np.diff(times)
        v = vectorize(rho0)
        if np.allclose(dts, dts[0], rtol=1e-12, atol=0.0):
            step = expm(dts[0] * L)
            for k in range(1, nt):
                v = step @ v
                states[k] = devectorize(v, 4)
        else:
            for k in range(1, nt):
                states[k] = devectorize(expm(times[k] * L) @ vectorize(rho0), 4)
    traces = np.einsum("kii->k", states).real
    return Trajectory(times=times, states=states, traces=traces)


def normalize(trajectory: Trajectory) -> Trajectory:
    """Divide each state by its trace (the a-posteriori no-jump normalization)."""
    traces = trajectory.traces
    bad = np.nonzero(traces <= TRACE_FLOOR)[0]
    if bad.size:
        raise ValueError(
            f"cannot normalize: trace {traces[bad[0]]:.3e} at time index {bad[0]} "
            f"(t = {trajectory.times[bad[0]]:.6g})"
        )
    states = trajectory.states / traces[:, None, None]
    return Trajectory(times=trajectory.times, states=states, traces=np.ones_like(traces))


def steady_states(L: np.ndarray, gap_tol: float = STEADY_GAP_TOL) -> list[np.ndarray]:
    """All Hermitized, trace-normalized null states of the generator."""
    spectrum = eig_general(L)
    moduli = np.abs(spectrum.eigenvalues)
    zero_tol = max(gap_tol, 1e-10 * max(1.0, float(np.linalg.norm(L))))
    idx = np.nonzero(moduli <= zero_tol)[0]
    if idx.size == 0:
        raise RuntimeError(
            f"no zero eigenvalue found: smallest |lambda| = {moduli.min():.3e} "
            "(is the generator trace preserving?)"
        )
    states = []
    for i in idx:
        m = devectorize(spectrum.right_eigenvectors[:, i], 4)
        m = 0.5 * (m + m.conj().T)
        tr = np.trace(m).real
        if abs(tr) < 1e-12:
            continue  # traceless null direction; cannot be a state on its own
        states.append(m / tr)
    if not states:
        raise RuntimeError("null space contains no unit-trace state")
    return states


def steady_state(L: np.ndarray, gap_tol: float = STEADY_GAP_TOL) -> np.ndarray:
    """The unique fixed point of a trace-preserving generator.

    Raises :class:`DegenerateSteadyStateError` (carrying every candidate) when
    the zero eigenvalue is degenerate within ``gap_tol``.
    """
    spectrum = eig_general(L)
    moduli = np.sort(np.abs(spectrum.eigenvalues))
    if moduli.size > 1 and moduli[1] <= gap_tol:
        raise DegenerateSteadyStateError(steady_states(L, gap_tol=gap_tol))
    return steady_states(L, gap_tol=gap_tol)[0]


def longest_lived_state(heff: np.ndarray) -> list[np.ndarray]:
    """Projector(s) onto the right eigenvector(s) of H_eff with minimal decay rate.

    The decay rate of an eigenvalue is minus its imaginary part.  The returned
    list has one entry generically and several when the minimum is degenerate
    within 1e-10.
    """
    spectrum = eig_general(heff)
    decay = -spectrum.eigenvalues.imag
    dmin = decay.min()
    out = []
    for i in np.nonzero(decay <= dmin + DECAY_DEGENERACY_TOL)[0]:
        v = spectrum.right_eigenvectors[:, i]
        out.append(np.outer(v, v.conj()))
    return out


def _initial_ensemble(rho0: np.ndarray):
    vals, vecs = np.linalg.eigh(rho0)
    probs = np.clip(vals, 0.0, None)
    probs = probs / probs.sum()
    return probs, vecs


def mc_unraveling(
    p: ModelParams,
    spec: GeneratorSpec,
    rho0: np.ndarray,
    times: np.ndarray,
    n_traj: int,
    seed: int,
) -> UnravelingResult:
    """Monte-Carlo jump unraveling of the full Lindblad dynamics.

    Trajectories evolve with the exact one-step no-jump propagator
    exp(-i H_eff dt) interleaved with first-order jumps K_j = L_j sqrt(kappa_j dt).
    The jump-free record and its survival probability are computed
    deterministically (every surviving trajectory carries the same state), so
    they have no sampling error.

    Reproducibility: one seed derives per-trajectory substreams, so identical
    (seed, n_traj, grid) give identical ensemble statistics regardless of how
    the trajectory loop is chunked.
    """
    if spec.jump_policy not in ("full", "none"):
        raise ValueError(
            "mc_unraveling covers the full unraveling and its all-channels-quiet record; "
            f"hybrid policy {spec.jump_policy!r} has no sampled record here"
        )
    rho0 = _check_state(rho0)
    times = _check_times(times)
    if times.size < 2:
        raise ValueError("need at least two grid points")
    dts = np.diff(times)
    dt = dts[0]
    if not np.allclose(dts, dt, rtol=1e-12, atol=0.0):
        raise ValueError("mc_unraveling requires a uniform time grid")
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")

    parts = build_liouvillian(p, spec)
    channels = [(t.rate, t.jump) for t in dissipation_terms(p, spec) if t.rate > 0.0]
    max_rate = max((rate for rate, _ in channels), default=0.0)
    if max_rate * dt > MAX_RATE_DT:
        raise ValueError(
            f"time step too large for the unraveling: max rate * dt = {max_rate * dt:.3e} "
            f"> {MAX_RATE_DT}; need dt <= {MAX_RATE_DT / max_rate:.3e}"
        )

    nt = times.size
    n_steps = nt - 1
    u0 = expm(-1j * parts.heff * dt)
    jump_ops = np.stack([L for _, L in channels]) if channels else np.zeros((0, 4, 4))
    rates = np.array([rate for rate, _ in channels])

    probs0, basis0 = _initial_ensemble(rho0)
    acc = np.zeros((nt, 4, 4), dtype=complex)
    root = np.random.SeedSequence(seed)
    substreams = root.spawn(n_traj)

    for start in range(0, n_traj, MC_CHUNK):
        stop = min(start + MC_CHUNK, n_traj)
        m = stop - start
        rngs = [np.random.default_rng(substreams[i]) for i in range(start, stop)]
        init_draws = np.array([r.random() for r in rngs])
        draws = np.stack([r.random((n_steps, 2)) for r in rngs]) if n_steps else np.zeros((m, 0, 2))

        cum0 = np.cumsum(probs0)
        init_idx = np.searchsorted(cum0, init_draws, side="right").clip(max=probs0.size - 1)
        psi = basis0[:, init_idx].T.copy()  # (m, 4)

        acc[0] += np.einsum("ni,nj->ij", psi, psi.conj())
        for k in range(n_steps):
            if rates.size:
                amp = np.einsum("cij,nj->nci", jump_ops, psi)  # (m, nch, 4)
                weights = rates[None, :] * dt * np.einsum("nci,nci->nc", amp, amp.conj()).real
                total = weights.sum(axis=1)
            else:
                amp = None
                weights = np.zeros((m, 0))
                total = np.zeros(m)
            jumps = draws[:, k, 0] < total

            survivors = ~jumps
            if survivors.any():
                evolved = psi[survivors] @ u0.T
                evolved /= np.linalg.norm(evolved, axis=1, keepdims=True)
                psi[survivors] = evolved
            if jumps.any():
                cum = np.cumsum(weights[jumps], axis=1)
                target = draws[jumps, k, 1] * total[jumps]
                channel = (cum < target[:, None]).sum(axis=1).clip(max=rates.size - 1)
                jumped = amp[jumps, channel, :]
                jumped /= np.linalg.norm(jumped, axis=1, keepdims=True)
                psi[jumps] = jumped
            acc[k + 1] += np.einsum("ni,nj->ij", psi, psi.conj())

    mean_states = acc / n_traj

    nojump_states = np.empty((nt, 4, 4), dtype=complex)
    nojump_prob = np.empty(nt)
    omega = rho0.copy()
    for k in range(nt):
        tr = np.trace(omega).real
        nojump_prob[k] = tr
        nojump_states[k] = omega / tr
        omega = u0 @ omega @ u0.conj().T
    return UnravelingResult(
        mean_state_per_time=mean_states,
        nojump_state_per_time=nojump_states,
        nojump_probability_per_time=nojump_prob,
        n_trajectories=n_traj,
        seed=seed,
    )
