"""Exceptional-point detection and non-normality diagnostics.

An exceptional point is accepted only when a single eigenvalue pair shows
simultaneous eigenvalue coalescence (small gap), eigenvector coalescence
(small pair non-orthogonality), and a diverging eigenvector condition number.
Requiring all three on the same pair is what filters spurious kappa spikes
and diabolic points (degenerate eigenvalues with orthogonal eigenvectors).

One robustness wrinkle: this model's Liouvillians carry a weak parity
symmetry that keeps some eigenvalue pairs exactly degenerate at every
coupling.  When a coalescing pair sits on top of such a degenerate partner,
the eigensolver may return arbitrary mixtures inside the degenerate cluster
and the raw overlap 1 - |<v_i|v_j>|^2 becomes basis-dependent.  The refiner
therefore certifies clustered pairs through the principal angle between the
range and null space of the cluster's Schur block, which is invariant under
that mixing and reduces to the raw pair measure for isolated pairs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Literal, NamedTuple, Optional

import numpy as np
import scipy.linalg
from scipy.optimize import linear_sum_assignment

from .linalg import EigensolverError, Spectrum, eig_general
from .model import (
    GeneratorSpec,
    ModelParams,
    build_gamma,
    build_hamiltonian,
    build_heff,
    build_liouvillian,
    dissipation_terms,
)

__all__ = [
    "EPThresholds",
    "SweepPoint",
    "EPReport",
    "CommutatorDiagnostics",
    "commutator_diagnostics",
    "eigen_track",
    "ep_scan",
    "ep_refine",
    "peak_filter",
    "generator_family",
]

Target = Literal["heff", "liouvillian"]

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
# Relative prominence a grid local maximum of kappa(V) must have to be refined.
PEAK_PROMINENCE = 1e-9


@dataclass(frozen=True)
class EPThresholds:
    """Joint acceptance criteria for a refined peak."""

    gap_tol: float = 1e-6
    orth_tol: float = 1e-4
    kappa_min: float = 1e3


@dataclass(frozen=True)
class SweepPoint:
    """Eigenstructure diagnostics at one sweep value of the coupling."""

    g: float
    eigenvalues: np.ndarray  # continuity-tracked order
    eigenvectors: np.ndarray  # unit columns, same order
    kappa_v: float
    min_gap: float
    min_pair_nonorthogonality: float
    eigenvalue_moduli: np.ndarray
    ok: bool = True


@dataclass(frozen=True)
class EPReport:
    g_star: float
    coalescing_indices: tuple[int, int]
    kappa_at_peak: float
    gap_at_peak: float
    nonorthogonality_at_peak: float
    filtered: bool
    approach: Optional[str] = None
    jump_policy: Optional[str] = None
    target: Optional[str] = None

    @property
    def accepted(self) -> bool:
        return not self.filtered


@dataclass(frozen=True)
class CommutatorDiagnostics:
    """Norm-based obstructions to normality of H_eff and of the Liouvillian."""

    hgamma_norm: float  # ||[H, Gamma]||_F
    hd_contribution: float  # ||[HH, DD]||_F / (||HH||_F ||DD||_F)
    dd_nonnormality: float  # ||[DD, DD^dag]||_F / ||DD||_F^2
    l_nonnormality: float  # ||[LL, LL^dag]||_F / ||LL||_F^2


def _comm(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def commutator_diagnostics(p: ModelParams, spec: GeneratorSpec) -> CommutatorDiagnostics:
    H = build_hamiltonian(p)
    gamma = build_gamma(dissipation_terms(p, spec))
    parts = build_liouvillian(p, spec)
    hh, dd, ll = parts.hamiltonian_part, parts.dissipative_part, parts.matrix
    norm_h = np.linalg.norm(hh)
    norm_d = np.linalg.norm(dd)
    norm_l = np.linalg.norm(ll)
    return CommutatorDiagnostics(
        hgamma_norm=float(np.linalg.norm(_comm(H, gamma))),
        hd_contribution=float(np.linalg.norm(_comm(hh, dd)) / (norm_h * norm_d))
        if norm_h > 0.0 and norm_d > 0.0
        else 0.0,
        dd_nonnormality=float(np.linalg.norm(_comm(dd, dd.conj().T)) / norm_d**2)
        if norm_d > 0.0
        else 0.0,
        l_nonnormality=float(np.linalg.norm(_comm(ll, ll.conj().T)) / norm_l**2)
        if norm_l > 0.0
        else 0.0,
    )


def generator_family(
    p: ModelParams, spec: GeneratorSpec, target: Target
) -> Callable[[float], np.ndarray]:
    """g |-> generator matrix (4x4 H_eff or 16x16 Liouvillian) at coupling g."""
    if target == "heff":

        def family(g: float) -> np.ndarray:
            pg = p.with_g(g)
            return build_heff(build_hamiltonian(pg), build_gamma(dissipation_terms(pg, spec)))

    elif target == "liouvillian":

        def family(g: float) -> np.ndarray:
            return build_liouvillian(p.with_g(g), spec).matrix

    else:
        raise ValueError(f"target must be 'heff' or 'liouvillian', got {target!r}")
    return family


def _pair_diagnostics(spectrum: Spectrum) -> tuple[float, float, tuple[int, int], float, float]:
    """(min_gap, min_nonorth, argmin-gap pair, gap of pair, nonorth of pair)."""
    vals = spectrum.eigenvalues
    vecs = spectrum.right_eigenvectors
    n = vals.size
    gaps = np.abs(vals[:, None] - vals[None, :])
    overlap = vecs.conj().T @ vecs
    nonorth = np.clip(1.0 - np.abs(overlap) ** 2, 0.0, 1.0)
    iu = np.triu_indices(n, k=1)
    pair_gaps = gaps[iu]
    pair_nonorth = nonorth[iu]
    k = int(np.argmin(pair_gaps))
    pair = (int(iu[0][k]), int(iu[1][k]))
    return (
        float(pair_gaps.min()),
        float(pair_nonorth.min()),
        pair,
        float(pair_gaps[k]),
        float(pair_nonorth[k]),
    )


def _sweep_point(g: float, spectrum: Spectrum) -> SweepPoint:
    min_gap, min_nonorth, _, _, _ = _pair_diagnostics(spectrum)
    return SweepPoint(
        g=float(g),
        eigenvalues=spectrum.eigenvalues,
        eigenvectors=spectrum.right_eigenvectors,
        kappa_v=spectrum.condition_number,
        min_gap=min_gap,
        min_pair_nonorthogonality=min_nonorth,
        eigenvalue_moduli=np.abs(spectrum.eigenvalues),
    )


def _match_order(prev_vecs: np.ndarray, spectrum: Spectrum) -> Spectrum:
    """Permute the new eigenpairs to maximize total squared overlap with the previous ones."""
    overlap = np.abs(prev_vecs.conj().T @ spectrum.right_eigenvectors) ** 2
    _, cols = linear_sum_assignment(-overlap)
    return Spectrum(
        eigenvalues=spectrum.eigenvalues[cols],
        right_eigenvectors=spectrum.right_eigenvectors[:, cols],
        condition_number=spectrum.condition_number,
    )


def eigen_track(
    family: Callable[[float], np.ndarray], g_grid: np.ndarray
) -> list[SweepPoint]:
    """Eigendecompose the family along the grid with continuity-matched ordering."""
    g_grid = np.asarray(g_grid, dtype=float)
    if g_grid.size < 3:
        raise ValueError("g_grid needs at least 3 points")
    if not np.all(np.diff(g_grid) > 0.0):
        raise ValueError("g_grid must be strictly increasing")

    points: list[SweepPoint] = []
    prev_vecs: Optional[np.ndarray] = None
    dim: Optional[int] = None
    for g in g_grid:
        try:
            spectrum = eig_general(family(g))
        except EigensolverError:
            nan_vec = np.full(dim or 0, np.nan, dtype=complex)
            points.append(
                SweepPoint(
                    g=float(g),
                    eigenvalues=nan_vec,
                    eigenvectors=np.full((dim or 0, dim or 0), np.nan, dtype=complex),
                    kappa_v=math.nan,
                    min_gap=math.nan,
                    min_pair_nonorthogonality=math.nan,
                    eigenvalue_moduli=np.abs(nan_vec),
                    ok=False,
                )
            )
            continue
        dim = spectrum.eigenvalues.size
        if prev_vecs is not None:
            spectrum = _match_order(prev_vecs, spectrum)
        points.append(_sweep_point(g, spectrum))
        prev_vecs = spectrum.right_eigenvectors
    return points


def _evaluate_kappa(family: Callable[[float], np.ndarray], g: float) -> float:
    return eig_general(family(g)).condition_number


def _default_bracket_tol(g_lo: float, g_hi: float) -> float:
    # The pair gap scales like sqrt(|g - g*|) near an EP, so the bracket must
    # shrink to float resolution for the refined gap to resolve below gap_tol.
    scale = max(abs(g_lo), abs(g_hi), 1e-3)
    return max(4.0 * float(np.spacing(scale)), 1e-16)


class CoalescenceCertificate(NamedTuple):
    """Best joint eigenvalue/eigenvector coalescence found at one parameter point."""

    score: float  # min over pairs of max(gap/gap_tol, nonorth/orth_tol)
    pair: tuple[int, int]
    gap: float
    nonorthogonality: float
    kappa: float


def _cluster_nonorthogonality(m: np.ndarray, center: complex, cluster_tol: float) -> float:
    """Basis-robust coalescence measure for the eigenvalue cluster around ``center``.

    Orders a Schur decomposition so the cluster spans the leading block B,
    then measures sin^2 of the smallest principal angle between range and
    null space of B - center*I.  A Jordan (defective) cluster puts a range
    direction inside the null space (angle 0); a semisimple degeneracy keeps
    them apart (measure ~ 1).
    """
    t, _, sdim = scipy.linalg.schur(
        m, output="complex", sort=lambda lam: abs(lam - center) <= cluster_tol
    )
    if sdim < 2 or sdim == m.shape[0]:
        return 1.0
    block = t[:sdim, :sdim] - center * np.eye(sdim)
    u, sv, wh = np.linalg.svd(block)
    theta = max(4.0 * cluster_tol, 64.0 * np.finfo(float).eps * max(sv[0], 1.0))
    k = int(np.count_nonzero(sv <= theta))
    if k == 0 or k == sdim:
        return 1.0  # no split: either no coalescence or a fully semisimple cluster
    range_span = u[:, : sdim - k]
    null_span = wh.conj().T[:, sdim - k :]
    cos_max = np.linalg.svd(range_span.conj().T @ null_span, compute_uv=False).max()
    return float(np.clip(1.0 - cos_max**2, 0.0, 1.0))


def _certificate(m: np.ndarray, thresholds: EPThresholds) -> CoalescenceCertificate:
    """Score every near-coalescing pair at this point and return the best one."""
    spectrum = eig_general(m)
    vals = spectrum.eigenvalues
    vecs = spectrum.right_eigenvectors
    n = vals.size
    gaps = np.abs(vals[:, None] - vals[None, :])
    overlap = np.abs(vecs.conj().T @ vecs) ** 2
    nonorth_raw = np.clip(1.0 - overlap, 0.0, 1.0)
    scale = max(1.0, float(np.abs(vals).max()))

    iu = np.triu_indices(n, k=1)
    order = np.argsort(gaps[iu])
    best = CoalescenceCertificate(math.inf, (0, 1), math.inf, 1.0, spectrum.condition_number)
    for k in order:
        i, j = int(iu[0][k]), int(iu[1][k])
        gap = float(gaps[i, j])
        if gap / thresholds.gap_tol >= best.score:
            break  # pairs are gap-sorted; no later pair can beat the current best
        center = 0.5 * (vals[i] + vals[j])
        cluster_tol = max(4.0 * gap, 1e-9 * scale)
        others = np.abs(vals - center) <= cluster_tol
        others[i] = others[j] = False
        if others.any():
            nonorth = _cluster_nonorthogonality(m, center, cluster_tol)
        else:
            nonorth = float(nonorth_raw[i, j])
        score = max(gap / thresholds.gap_tol, nonorth / thresholds.orth_tol)
        if score < best.score:
            best = CoalescenceCertificate(score, (i, j), gap, nonorth, spectrum.condition_number)
    return best


def _refine_score(
    family: Callable[[float], np.ndarray],
    g_lo: float,
    g_hi: float,
    thresholds: EPThresholds,
    tol: float,
) -> tuple[float, CoalescenceCertificate]:
    """Zoom toward the minimum of the coalescence score inside [g_lo, g_hi].

    Coarse sampling plus deterministic re-zooming; gives up early when the
    score stays far above the acceptance level (spurious peaks).
    """
    lo, hi = g_lo, g_hi
    best_g = 0.5 * (lo + hi)
    best = _certificate(family(best_g), thresholds)
    points = 65
    level = 0
    prev_score = math.inf
    while hi - lo > tol:
        gs = np.linspace(lo, hi, points)
        certs = [_certificate(family(g), thresholds) for g in gs]
        k = int(np.argmin([c.score for c in certs]))
        if certs[k].score < best.score:
            best, best_g = certs[k], float(gs[k])
        level += 1
        # A real coalescence keeps improving geometrically as the window
        # shrinks (gap ~ sqrt or linear in the distance); spurious peaks stall.
        stalled = best.score > 0.5 * prev_score
        if level >= 2 and best.score > 50.0 and stalled:
            break
        prev_score = best.score
        width = (hi - lo) / (points - 1)
        lo = max(g_lo, best_g - 1.5 * width)
        hi = min(g_hi, best_g + 1.5 * width)
    return best_g, best


def ep_refine(
    family: Callable[[float], np.ndarray],
    g_lo: float,
    g_hi: float,
    thresholds: EPThresholds = EPThresholds(),
    bracket_tol: Optional[float] = None,
) -> EPReport:
    """Refine a kappa(V) peak inside [g_lo, g_hi] and certify it as an EP.

    Stage one runs a golden-section maximization of kappa(V).  Stage two
    re-refines the joint coalescence score (pair gap and non-orthogonality on
    their tolerance scales) around the peak, which pins the eigenvalue
    coalescence far more tightly than the kappa maximum alone.  ``filtered``
    is set when the joint acceptance criteria fail or no interior maximum
    exists.
    """
    if not g_hi > g_lo:
        raise ValueError(f"need g_lo < g_hi, got [{g_lo}, {g_hi}]")
    tol = _default_bracket_tol(g_lo, g_hi) if bracket_tol is None else bracket_tol

    a, b = g_lo, g_hi
    h = b - a
    c = b - INV_PHI * h
    d = a + INV_PHI * h
    fc = _evaluate_kappa(family, c)
    fd = _evaluate_kappa(family, d)
    while h > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            h = b - a
            c = b - INV_PHI * h
            fc = _evaluate_kappa(family, c)
        else:
            a, c, fc = c, d, fd
            h = b - a
            d = a + INV_PHI * h
            fd = _evaluate_kappa(family, d)
    g_kappa = c if fc > fd else d
    cert_kappa = _certificate(family(g_kappa), thresholds)

    margin = 0.08 * (g_hi - g_lo)
    g_score, cert_score = _refine_score(
        family,
        max(g_lo, g_kappa - margin),
        min(g_hi, g_kappa + margin),
        thresholds,
        tol,
    )
    if cert_score.score <= cert_kappa.score:
        g_star, cert = g_score, cert_score
    else:
        g_star, cert = g_kappa, cert_kappa

    interior = (g_kappa - g_lo) > 2.0 * tol and (g_hi - g_kappa) > 2.0 * tol
    report = EPReport(
        g_star=float(g_star),
        coalescing_indices=cert.pair,
        kappa_at_peak=float(cert.kappa),
        gap_at_peak=cert.gap,
        nonorthogonality_at_peak=cert.nonorthogonality,
        filtered=not interior,
    )
    return peak_filter([report], thresholds)[0]


def peak_filter(reports: list[EPReport], thresholds: EPThresholds = EPThresholds()) -> list[EPReport]:
    """Mark as filtered every peak failing the joint gap/orthogonality/kappa criteria."""
    out = []
    for r in reports:
        ok = (
            r.gap_at_peak <= thresholds.gap_tol
            and r.nonorthogonality_at_peak <= thresholds.orth_tol
            and r.kappa_at_peak >= thresholds.kappa_min
        )
        out.append(replace(r, filtered=r.filtered or not ok))
    return out


def ep_scan(
    p: ModelParams,
    spec: GeneratorSpec,
    target: Target,
    g_grid: np.ndarray,
    thresholds: EPThresholds = EPThresholds(),
    bracket_tol: Optional[float] = None,
) -> list[EPReport]:
    """Locate, refine, and classify every kappa(V) peak along the sweep.

    Returns all reports (accepted and filtered) ordered by g_star; callers
    keep ``r.accepted`` ones as exceptional points.
    """
    family = generator_family(p, spec, target)
    points = eigen_track(family, g_grid)
    kappas = np.array([pt.kappa_v for pt in points])
    gs = np.array([pt.g for pt in points])

    reports: list[EPReport] = []
    for k in range(1, len(points) - 1):
        k0, k1, k2 = kappas[k - 1], kappas[k], kappas[k + 1]
        if not (np.isfinite(k0) and np.isfinite(k2)):
            continue  # flagged or exactly-defective neighbor; adjacent brackets cover it
        exact_hit = math.isinf(k1)
        prominent = (
            np.isfinite(k1)
            and k1 >= k0 * (1.0 + PEAK_PROMINENCE)
            and k1 >= k2 * (1.0 + PEAK_PROMINENCE)
        )
        if exact_hit or prominent:
            report = ep_refine(family, gs[k - 1], gs[k + 1], thresholds, bracket_tol)
            report = replace(
                report, approach=spec.approach, jump_policy=spec.jump_policy, target=target
            )
            reports.append(report)

    reports.sort(key=lambda r: r.g_star)
    spacing = float(np.diff(gs).min()) if gs.size > 1 else 0.0
    deduped: list[EPReport] = []
    for r in reports:
        if deduped and abs(r.g_star - deduped[-1].g_star) < 0.5 * spacing:
            if r.kappa_at_peak > deduped[-1].kappa_at_peak:
                deduped[-1] = r
        else:
            deduped.append(r)
    return deduped
