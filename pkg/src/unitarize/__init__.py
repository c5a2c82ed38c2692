"""Continuous Hilbert renormings of finite-rank Banach bundles and
conditional expectations onto stratified multi-matrix bundles."""
from .bundle import (DiscretizedBundle, FamilySpec, bm_profile, bounded_bm_distance,
                     continuity_report, renorm)
from .convex import Ellipsoid, SymmetricBody, gauge, hausdorff_distance, support
from .ellipsoid import bm_bound, john_certificate, john_inscribed, loewner
from .errors import (CertificateError, DegenerateBodyError, DimensionError,
                     HypothesisError, NonConvergenceError, UnitarizeError,
                     ValidationError)
from .expectation import (ExceptionalPoint, GenericInterval, Section, StratifiedBundle,
                          build_expectation, bundle_rank, check_multiplicity_free,
                          check_optimal, check_pullback_cone, evaluate_expectation,
                          fiber_classes, two_sided_bundle, verify_expectation)
from .multimatrix import (BratteliMatrix, MultiMatrixAlgebra, State, extend_state,
                          k_constant, optimal_state, restrict_state)

__version__ = "0.1.0"
