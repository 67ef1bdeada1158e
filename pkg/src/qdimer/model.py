"""Two detuned qubits coupled to hot and cold bosonic baths.

Builds the system Hamiltonian, the local and global (secular) dissipation
terms with Ohmic hard-cutoff spectral densities, the decay operator Gamma,
the effective non-Hermitian Hamiltonian H - i*Gamma, and the vectorized
Liouvillian for each jump policy (full Lindblad, no-jump, hybrid
postselection on one bath).

Conventions: hbar = k_B = 1, energies in units of eps_h; basis order
|gg>, |ge>, |eg>, |ee> with the hot qubit as the first tensor factor and
sigma_plus = |e><g|.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np

from .linalg import kron

__all__ = [
    "ModelParams",
    "DissipationTerm",
    "GeneratorSpec",
    "LiouvillianParts",
    "SIGMA_P",
    "SIGMA_M",
    "SIGMA_X",
    "build_hamiltonian",
    "bose_einstein",
    "rate_gamma",
    "local_terms",
    "global_terms",
    "dissipation_terms",
    "build_gamma",
    "build_heff",
    "build_liouvillian",
    "bath_dissipators",
    "thermal_state",
]

I2 = np.eye(2, dtype=complex)
I4 = np.eye(4, dtype=complex)
SIGMA_P = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex)  # |e><g|
SIGMA_M = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)  # |g><e|
SIGMA_X = SIGMA_P + SIGMA_M
P_EXCITED = SIGMA_P @ SIGMA_M  # |e><e|

# Bohr frequencies closer than this (times eps_h) are merged into one jump operator.
BOHR_GROUP_RTOL = 1e-9

Approach = Literal["local", "global"]
JumpPolicy = Literal["full", "none", "postselect_cold", "postselect_hot"]


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters, all strictly positive except the coupling g >= 0."""

    g: float
    eps_h: float = 1.0
    eps_c: float = 1.0
    alpha_h: float = 0.05
    alpha_c: float = 0.2
    T_h: float = 1.0
    T_c: float = 0.1
    omega_c: float = 10.0

    def __post_init__(self) -> None:
        for name in ("eps_h", "eps_c", "alpha_h", "alpha_c", "T_h", "T_c", "omega_c"):
            value = getattr(self, name)
            if not value > 0.0:
                raise ValueError(f"{name} must be > 0, got {value}")
        if self.g < 0.0:
            raise ValueError(f"g must be >= 0, got {self.g}")

    @property
    def detuning(self) -> float:
        return self.eps_c - self.eps_h

    def with_g(self, g: float) -> "ModelParams":
        return replace(self, g=g)


@dataclass(frozen=True)
class DissipationTerm:
    """One (rate, jump operator) pair of the GKSL generator."""

    rate: float
    jump: np.ndarray
    bath: Literal["hot", "cold"]
    frequency: float = 0.0  # Bohr frequency label; 0 for local terms

    def __post_init__(self) -> None:
        if self.rate < 0.0:
            raise ValueError(f"rate must be >= 0, got {self.rate}")
        if np.abs(self.jump).max() == 0.0:
            raise ValueError("jump operator must be nonzero")


@dataclass(frozen=True)
class GeneratorSpec:
    """Which master equation to build: local/global and how jumps are treated.

    ``postselect_cold`` drops only the cold bath's jump terms (its dissipation
    enters through Gamma alone) while the hot bath keeps full Lindblad
    dissipators; ``postselect_hot`` is the mirror image.
    """

    approach: Approach = "local"
    jump_policy: JumpPolicy = "full"

    def __post_init__(self) -> None:
        if self.approach not in ("local", "global"):
            raise ValueError(f"approach must be 'local' or 'global', got {self.approach!r}")
        if self.jump_policy not in ("full", "none", "postselect_cold", "postselect_hot"):
            raise ValueError(f"unknown jump_policy {self.jump_policy!r}")

    def drops_jumps_of(self, bath: str) -> bool:
        if self.jump_policy == "none":
            return True
        if self.jump_policy == "full":
            return False
        return self.jump_policy == f"postselect_{bath}"


def build_hamiltonian(p: ModelParams) -> np.ndarray:
    """H = eps_h n_h + eps_c n_c + g sigma_x^h sigma_x^c (4x4, Hermitian)."""
    return (
        p.eps_h * kron(P_EXCITED, I2)
        + p.eps_c * kron(I2, P_EXCITED)
        + p.g * kron(SIGMA_X, SIGMA_X)
    )


def bose_einstein(omega: float, T: float) -> float:
    """Bose-Einstein occupation 1/(exp(omega/T) - 1) for omega, T > 0."""
    if omega <= 0.0:
        raise ValueError(f"bose_einstein needs omega > 0, got {omega}")
    if T <= 0.0:
        raise ValueError(f"bose_einstein needs T > 0, got {T}")
    x = omega / T
    if x > 700.0:  # exp would overflow; occupation is indistinguishable from 0
        return 0.0
    return 1.0 / math.expm1(x)


def rate_gamma(omega: float, alpha: float, omega_c: float) -> float:
    """Spontaneous decay rate 2*pi*J(omega) for the Ohmic density with hard cutoff."""
    if omega <= 0.0:
        raise ValueError(f"rate_gamma needs omega > 0, got {omega}")
    if omega >= omega_c:
        return 0.0
    return math.pi * alpha * omega


def _embed(op: np.ndarray, qubit: str) -> np.ndarray:
    return kron(op, I2) if qubit == "h" else kron(I2, op)


def local_terms(p: ModelParams) -> list[DissipationTerm]:
    """Four local dissipators: absorption/emission on each bare qubit frequency."""
    terms: list[DissipationTerm] = []
    for bath, qubit, eps, alpha, T in (
        ("hot", "h", p.eps_h, p.alpha_h, p.T_h),
        ("cold", "c", p.eps_c, p.alpha_c, p.T_c),
    ):
        gamma = rate_gamma(eps, alpha, p.omega_c)
        n = bose_einstein(eps, T)
        terms.append(DissipationTerm(gamma * n, _embed(SIGMA_P, qubit), bath))
        terms.append(DissipationTerm(gamma * (1.0 + n), _embed(SIGMA_M, qubit), bath))
    return terms


def _bohr_decomposition(H: np.ndarray, coupling: np.ndarray, group_tol: float):
    """Eigenoperators A(omega) of ``coupling`` over positive Bohr frequencies of H.

    A(omega) = sum over eigenpairs with E_b - E_a = omega of P_a coupling P_b,
    i.e. the lowering component at that transition frequency.  Frequencies equal
    within ``group_tol`` are merged, which keeps degenerate subspaces
    basis-independent.
    """
    energies, vecs = np.linalg.eigh(H)
    dim = energies.size
    buckets: list[tuple[float, np.ndarray]] = []
    for a in range(dim):
        for b in range(dim):
            omega = energies[b] - energies[a]
            if omega <= group_tol:
                continue
            element = vecs[:, a].conj() @ coupling @ vecs[:, b]
            contrib = element * np.outer(vecs[:, a], vecs[:, b].conj())
            for k, (w, op) in enumerate(buckets):
                if abs(omega - w) <= group_tol:
                    buckets[k] = (w, op + contrib)
                    break
            else:
                buckets.append((omega, contrib))
    buckets.sort(key=lambda item: item[0])
    return buckets


def global_terms(p: ModelParams) -> list[DissipationTerm]:
    """Secular-approximation dissipators built from eigenoperators of H.

    Per bath and positive Bohr frequency omega: an emission term with rate
    gamma(omega)*(1 + n_B) and jump A(omega), plus an absorption term with rate
    gamma(omega)*n_B and jump A(omega)^dag.  Zero jump operators are dropped;
    frequencies at or above the cutoff get zero rate and trigger a warning.
    """
    H = build_hamiltonian(p)
    group_tol = BOHR_GROUP_RTOL * p.eps_h
    terms: list[DissipationTerm] = []
    for bath, qubit, alpha, T in (
        ("hot", "h", p.alpha_h, p.T_h),
        ("cold", "c", p.alpha_c, p.T_c),
    ):
        coupling = _embed(SIGMA_X, qubit)
        for omega, jump in _bohr_decomposition(H, coupling, group_tol):
            if np.linalg.norm(jump) < 1e-12:
                continue
            if omega >= p.omega_c:
                warnings.warn(
                    f"Bohr frequency {omega:.6g} exceeds the cutoff omega_c = {p.omega_c:.6g}; "
                    "its rate is zero",
                    stacklevel=2,
                )
            gamma = rate_gamma(omega, alpha, p.omega_c)
            n = bose_einstein(omega, T)
            terms.append(DissipationTerm(gamma * (1.0 + n), jump, bath, frequency=omega))
            terms.append(DissipationTerm(gamma * n, jump.conj().T, bath, frequency=omega))
    return terms


def dissipation_terms(p: ModelParams, spec: GeneratorSpec) -> list[DissipationTerm]:
    return local_terms(p) if spec.approach == "local" else global_terms(p)


def build_gamma(terms: list[DissipationTerm]) -> np.ndarray:
    """Gamma = (1/2) sum_j kappa_j L_j^dag L_j (Hermitian, positive semidefinite)."""
    if not terms:
        raise ValueError("build_gamma needs at least one dissipation term")
    dim = terms[0].jump.shape[0]
    gamma = np.zeros((dim, dim), dtype=complex)
    for t in terms:
        gamma += 0.5 * t.rate * (t.jump.conj().T @ t.jump)
    return gamma


def build_heff(H: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    """Effective non-Hermitian Hamiltonian H - i*Gamma."""
    if H.shape != gamma.shape:
        raise ValueError(f"shape mismatch: H {H.shape} vs Gamma {gamma.shape}")
    return H - 1j * gamma


@dataclass(frozen=True)
class LiouvillianParts:
    """Vectorized generator with separable unitary and dissipative blocks.

    ``matrix`` = ``hamiltonian_part`` + ``dissipative_part`` generates
    d vec(rho)/dt under column stacking.  ``gamma`` collects every term;
    ``gamma_dropped`` only those whose jump piece the policy removed (it
    controls the trace leak d Tr/dt = -2 Tr(gamma_dropped rho)).
    """

    spec: GeneratorSpec
    matrix: np.ndarray
    hamiltonian_part: np.ndarray
    dissipative_part: np.ndarray
    gamma: np.ndarray
    gamma_dropped: np.ndarray
    heff: np.ndarray
    terms: tuple[DissipationTerm, ...] = field(repr=False, default=())


def _dissipator_superop(term: DissipationTerm, keep_jump: bool) -> np.ndarray:
    L = term.jump
    LdL = L.conj().T @ L
    dim = L.shape[0]
    eye = np.eye(dim, dtype=complex)
    out = -0.5 * (kron(eye, LdL) + kron(LdL.T, eye))
    if keep_jump:
        out = out + kron(L.conj(), L)
    return term.rate * out


def build_liouvillian(p: ModelParams, spec: GeneratorSpec) -> LiouvillianParts:
    """Assemble the 16x16 generator for the requested approach and jump policy."""
    H = build_hamiltonian(p)
    terms = dissipation_terms(p, spec)
    h_part = -1j * (kron(I4, H) - kron(H.T, I4))
    d_part = np.zeros_like(h_part)
    gamma_dropped = np.zeros_like(H)
    for t in terms:
        dropped = spec.drops_jumps_of(t.bath)
        d_part += _dissipator_superop(t, keep_jump=not dropped)
        if dropped:
            gamma_dropped += 0.5 * t.rate * (t.jump.conj().T @ t.jump)
    gamma = build_gamma(terms)
    return LiouvillianParts(
        spec=spec,
        matrix=h_part + d_part,
        hamiltonian_part=h_part,
        dissipative_part=d_part,
        gamma=gamma,
        gamma_dropped=gamma_dropped,
        heff=build_heff(H, gamma),
        terms=tuple(terms),
    )


def bath_dissipators(p: ModelParams, spec: GeneratorSpec) -> dict[str, np.ndarray]:
    """Full (jump-including) dissipator superoperator of each bath separately.

    Used by the heat currents Q_dot_j = Tr(H D_j[rho]) regardless of the jump
    policy used for propagation.
    """
    out = {"hot": np.zeros((16, 16), dtype=complex), "cold": np.zeros((16, 16), dtype=complex)}
    for t in dissipation_terms(p, spec):
        out[t.bath] += _dissipator_superop(t, keep_jump=True)
    return out


def thermal_state(H: np.ndarray, T: float) -> np.ndarray:
    """Gibbs state exp(-H/T)/Z of a Hermitian H at temperature T > 0."""
    if T <= 0.0:
        raise ValueError(f"thermal_state needs T > 0, got {T}")
    vals, vecs = np.linalg.eigh(H)
    weights = np.exp(-(vals - vals.min()) / T)
    weights /= weights.sum()
    return (vecs * weights) @ vecs.conj().T
