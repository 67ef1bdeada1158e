"""Two interacting qubits between hot and cold baths.

Local and global Lindblad generators, their no-jump (non-Hermitian) and
hybrid-postselection variants, exact propagation and Monte-Carlo unraveling,
distance/entropy/heat diagnostics, and exceptional-point analysis.
"""

from .dynamics import (
    DegenerateSteadyStateError,
    Trajectory,
    UnravelingResult,
    longest_lived_state,
    mc_unraveling,
    normalize,
    propagate,
    steady_state,
    steady_states,
)
from .linalg import Spectrum, condition_number, eig_general, expm, logm_psd, norms
from .metrics import (
    EntropyRates,
    LindbladEntropyResult,
    ThermoRecord,
    lindblad_entropy_production,
    nh_entropy,
    nh_entropy_rate,
    normalized_output_distance,
    trace_distance,
    vn_entropy,
)
from .model import (
    DissipationTerm,
    GeneratorSpec,
    LiouvillianParts,
    ModelParams,
    bath_dissipators,
    bose_einstein,
    build_gamma,
    build_hamiltonian,
    build_heff,
    build_liouvillian,
    global_terms,
    local_terms,
    rate_gamma,
    thermal_state,
)
from .spectral import (
    CommutatorDiagnostics,
    EPReport,
    EPThresholds,
    SweepPoint,
    commutator_diagnostics,
    eigen_track,
    ep_refine,
    ep_scan,
    generator_family,
    peak_filter,
)

__version__ = "0.1.0"
