"""Distances, entropies, entropy-production rates, and heat currents.

Entropies are in nats.  The two closed forms of the no-jump entropy
production rate (written once through ln(Omega), once through the
von Neumann entropy derivative) are both provided; they agree analytically
and their numerical agreement is a standing invariant of the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .linalg import PSD_SUPPORT_CUTOFF, devectorize, logm_psd, norms, vectorize

__all__ = [
    "ThermoRecord",
    "EntropyRates",
    "LindbladEntropyResult",
    "trace_distance",
    "normalized_output_distance",
    "vn_entropy",
    "nh_entropy",
    "nh_entropy_rate",
    "lindblad_entropy_production",
    "thermo_record",
]

TRACE_FLOOR = 1e-30


class EntropyRates(NamedTuple):
    eq16: float  # 2[Tr(Gamma rho ln Omega) + (S_nH + 1) Tr(Gamma rho)]
    eq17: float  # dS_vN/dt + 2 Tr(Gamma rho)


class LindbladEntropyResult(NamedTuple):
    rate: float
    heat_hot: float
    heat_cold: float
    flagged: bool  # generator pushed weight off the state's support


@dataclass(frozen=True)
class ThermoRecord:
    """One time slice of the thermodynamic diagnostics.

    The entropy fields follow the normalized no-jump state; the Lindblad
    entropy production rate and the heat currents follow the full-policy state
    at the same time.
    """

    time: float
    S_vN: float
    S_nH: float
    S_nH_rate_eq16: float
    S_nH_rate_eq17: float
    entropy_production_rate_lindblad: float
    heat_rate_hot: float
    heat_rate_cold: float


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    """D(rho, sigma) = ||rho - sigma||_1 / 2."""
    rho = np.asarray(rho, dtype=complex)
    sigma = np.asarray(sigma, dtype=complex)
    if rho.shape != sigma.shape:
        raise ValueError(f"shape mismatch: {rho.shape} vs {sigma.shape}")
    return 0.5 * norms(rho - sigma).trace_norm


def normalized_output_distance(e_out: np.ndarray, f_out: np.ndarray) -> float:
    """Trace distance between trace-normalized outputs of two evolutions.

    This is the fixed-input lower bound on the general distance between
    non-trace-preserving operations.
    """
    tr_e = np.trace(e_out).real
    tr_f = np.trace(f_out).real
    if tr_e <= TRACE_FLOOR or tr_f <= TRACE_FLOOR:
        raise ValueError(f"vanishing output trace: Tr E = {tr_e:.3e}, Tr F = {tr_f:.3e}")
    return trace_distance(e_out / tr_e, f_out / tr_f)


def _support_eigvals(rho: np.ndarray) -> np.ndarray:
    vals = np.linalg.eigvalsh(rho)
    vmax = vals.max(initial=0.0)
    return vals[vals > PSD_SUPPORT_CUTOFF * max(vmax, 0.0)]


def vn_entropy(rho: np.ndarray) -> float:
    """Von Neumann entropy -sum p ln p over the nonzero spectrum (0 ln 0 = 0)."""
    p = _support_eigvals(rho)
    return float(-(p * np.log(p)).sum())


def nh_entropy(rho_nh: np.ndarray, omega_nh: np.ndarray) -> float:
    """Non-Hermitian entropy -Tr(rho ln Omega) = S_vN(rho) - ln Tr(Omega).

    ``rho_nh`` must be ``omega_nh`` normalized by its trace; the closed form is
    exact on the shared support.
    """
    tr = np.trace(omega_nh).real
    if tr <= TRACE_FLOOR:
        raise ValueError(f"Omega has vanishing trace {tr:.3e}")
    if np.abs(rho_nh - omega_nh / tr).max() > 1e-10:
        raise ValueError("rho_nh is not Omega_nh normalized by its trace")
    return vn_entropy(rho_nh) - float(np.log(tr))


def nh_entropy_rate(rho_nh: np.ndarray, omega_nh: np.ndarray, gamma: np.ndarray) -> EntropyRates:
    """Both closed forms of dS_nH/dt along the no-jump flow.

    The Hamiltonian commutator of the nonlinear master equation drops out of
    -Tr(rho_dot ln rho) identically, so only Gamma enters: the von Neumann
    derivative reduces to 2 Tr(Gamma rho ln rho) + 2 S_vN Tr(Gamma rho).
    """
    s_nh = nh_entropy(rho_nh, omega_nh)
    s_vn = vn_entropy(rho_nh)
    tr_gr = np.trace(gamma @ rho_nh).real

    ln_omega = logm_psd(omega_nh)
    eq16 = 2.0 * (np.trace(gamma @ rho_nh @ ln_omega).real + (s_nh + 1.0) * tr_gr)

    ln_rho = logm_psd(rho_nh)
    s_vn_dot = 2.0 * np.trace(gamma @ rho_nh @ ln_rho).real + 2.0 * s_vn * tr_gr
    eq17 = s_vn_dot + 2.0 * tr_gr
    return EntropyRates(eq16=float(eq16), eq17=float(eq17))


def lindblad_entropy_production(
    rho: np.ndarray,
    L_full: np.ndarray,
    per_bath_dissipators: dict[str, np.ndarray],
    H: np.ndarray,
    T_h: float,
    T_c: float,
) -> LindbladEntropyResult:
    """Irreversible entropy production rate S_vN_dot - sum_j Q_dot_j / T_j.

    Heat currents are Q_dot_j = Tr(H D_j[rho]) with each bath's full
    dissipator.  When the generator pushes weight off a rank-deficient state's
    support, the logarithm is evaluated with eigenvalues floored at the
    support cutoff and the result is flagged.
    """
    dim = rho.shape[0]
    lrho = devectorize(L_full @ vectorize(rho), dim)

    vals, vecs = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    vmax = vals.max(initial=0.0)
    cutoff = PSD_SUPPORT_CUTOFF * vmax
    off_support = vals <= cutoff
    flagged = False
    if off_support.any():
        p_off = vecs[:, off_support]
        leak = np.linalg.norm(p_off.conj().T @ lrho @ p_off)
        flagged = leak > 1e-12 * max(np.linalg.norm(lrho), 1.0)
    if flagged:
        ln_rho = (vecs * np.log(np.clip(vals, cutoff, None))) @ vecs.conj().T
    else:
        on = ~off_support
        ln_rho = (vecs[:, on] * np.log(vals[on])) @ vecs[:, on].conj().T

    s_vn_dot = -np.trace(lrho @ ln_rho).real
    heats = {}
    for bath, superop in per_bath_dissipators.items():
        drho = devectorize(superop @ vectorize(rho), dim)
        heats[bath] = np.trace(H @ drho).real
    rate = s_vn_dot - heats["hot"] / T_h - heats["cold"] / T_c
    return LindbladEntropyResult(
        rate=float(rate),
        heat_hot=float(heats["hot"]),
        heat_cold=float(heats["cold"]),
        flagged=flagged,
    )


def thermo_record(
    time: float,
    omega_nh: np.ndarray,
    gamma: np.ndarray,
    rho_lindblad: np.ndarray,
    L_full: np.ndarray,
    per_bath_dissipators: dict[str, np.ndarray],
    H: np.ndarray,
    T_h: float,
    T_c: float,
) -> ThermoRecord:
    """Assemble one ThermoRecord from the no-jump and Lindblad states at a time."""
    rho_nh = omega_nh / np.trace(omega_nh).real
    rates = nh_entropy_rate(rho_nh, omega_nh, gamma)
    lind = lindblad_entropy_production(rho_lindblad, L_full, per_bath_dissipators, H, T_h, T_c)
    return ThermoRecord(
        time=float(time),
        S_vN=vn_entropy(rho_nh),
        S_nH=nh_entropy(rho_nh, omega_nh),
        S_nH_rate_eq16=rates.eq16,
        S_nH_rate_eq17=rates.eq17,
        entropy_production_rate_lindblad=lind.rate,
        heat_rate_hot=lind.heat_hot,
        heat_rate_cold=lind.heat_cold,
    )
