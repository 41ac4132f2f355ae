"""Numerical laboratory for cocycles of compact operators.

Computes Lyapunov spectra by two independent routes, certifies dominated
splittings and partial hyperbolicity, measures center-unstable entropy,
and applies two anatomically small perturbations: a localized rotation
bump that trades unstable growth into the central bundle, and a central
balancing that moves the central exponents off zero.
"""

from .base import (BaseSystem, GOLDEN, circle_rotation, torus_translation,
                   cat_map, step, orbit, distance, sample_measure,
                   return_time_stats)
from .domination import (Bundle, PHClassification, SplittingCertificate,
                         Witness, check_domination, classify_ph,
                         finest_search, persistence_probe,
                         tightest_constants)
from .errors import (CocycleLabError, ConfigError, EmptySampleError,
                     FrameCollapseError, IncompleteEvidenceError,
                     InsufficientHorizonError, ParameterError,
                     RankLossError, ShapeError)
from .operator import (Cocycle, ConstantCocycle, HilbertVector,
                       RotationBumpCocycle, SplittingSpec, TableCocycle,
                       Tail, TruncatedOperator, cocycle_product,
                       coordinate_splitting, harmonic_tail,
                       integrability_estimate, operator_distance,
                       operator_norm, zero_tail)
from .perturb import (BalanceResult, PerturbationParams, PerturbationReport,
                      balance_central, bump, delta_bound,
                      max_rotation_angle, perturb_cu, rotation_isotopy,
                      verify_lemma)
from .spectrum import (EntropyReport, LyapunovSpectrum, OseledetsFrames,
                       QRRun, covariant_frame_field, cu_entropy,
                       limit_operator_svd, lyapunov_qr, oseledets_frames,
                       vector_exponent)
from . import fixtures, report

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
