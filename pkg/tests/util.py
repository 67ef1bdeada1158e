"""Shared helpers for the test suite."""

import numpy as np

from qdimer.model import ModelParams


def random_density(rng: np.random.Generator, dim: int = 4) -> np.ndarray:
    """Random full-rank density matrix (Hilbert-Schmidt measure-ish)."""
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


def random_matrix(rng: np.random.Generator, dim: int) -> np.ndarray:
    return rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))


def random_params(rng: np.random.Generator) -> ModelParams:
    """Random physical parameters with all Bohr frequencies below the cutoff."""
    return ModelParams(
        g=float(rng.uniform(0.0, 2.0)),
        eps_h=1.0,
        eps_c=float(rng.uniform(0.3, 2.0)),
        alpha_h=float(rng.uniform(0.01, 2.0)),
        alpha_c=float(rng.uniform(0.01, 2.0)),
        T_h=float(rng.uniform(0.05, 2.0)),
        T_c=float(rng.uniform(0.05, 2.0)),
        omega_c=float(rng.uniform(15.0, 20.0)),
    )


MAIN_PARAMS = dict(alpha_h=0.05, alpha_c=0.2, T_h=1.0, T_c=0.1, omega_c=10.0)
WEAK_PARAMS = dict(alpha_h=0.005, alpha_c=0.02, T_h=1.0, T_c=0.1, omega_c=10.0)
APPENDIX_B_PARAMS = dict(alpha_h=5e-5, alpha_c=2e-4, T_h=1.0, T_c=0.1, omega_c=20.0)
APPENDIX_C_PARAMS = dict(eps_c=0.5, alpha_h=2.0, alpha_c=2.0, T_h=0.2, T_c=0.05, omega_c=10.0)
