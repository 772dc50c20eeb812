"""Spectra of ``A + gamma B`` for Hermitian ``A`` and sectorial ``B``.

Eigenvalue curves along rays ``gamma = t e^{i theta}``, their monodromy
permutations and branch points, Herglotz-function compression with Rouche
certificates, and the large-N limit of rank-one families.
"""

from .curves import (
    RaySpec,
    SpectralCurveSet,
    classify_endpoints,
    find_exceptional_angles,
    localize_critical_point,
    monodromy,
    trace_ray,
)
from .cyclicity import krylov_decompose, verify_upper_halfplane
from .errors import HypothesisError, InputError, NumericalError, PerturbatrixError
from .herglotz import (
    HerglotzFunction,
    SpectralMeasure,
    build_measure,
    eval_m,
    gamma_of_lambda,
    rank_one_measure,
    relative_determinant,
    secular_pair,
)
from .limits import LimitModel, convergence_error, forbidden_region, m_infty, mu_N
from .linalg import general_eig, hermitian_eig, match_spectra, spectral_distance
from .localize import compress, compression_error_bound, rouche_certify, rouche_pairing
from .problem import Problem
from .sectorial import analyze_sectorial, coupling_sector

__version__ = "0.1.0"

__all__ = [
    "HerglotzFunction", "HypothesisError", "InputError", "LimitModel", "NumericalError",
    "PerturbatrixError", "Problem", "RaySpec", "SpectralCurveSet", "SpectralMeasure",
    "analyze_sectorial", "build_measure", "classify_endpoints", "compress",
    "compression_error_bound", "convergence_error", "coupling_sector", "eval_m",
    "find_exceptional_angles", "forbidden_region", "gamma_of_lambda", "general_eig",
    "hermitian_eig", "krylov_decompose", "localize_critical_point", "m_infty", "match_spectra",
    "monodromy", "mu_N", "rank_one_measure", "relative_determinant", "rouche_certify",
    "rouche_pairing", "secular_pair", "spectral_distance", "trace_ray", "verify_upper_halfplane",
]
