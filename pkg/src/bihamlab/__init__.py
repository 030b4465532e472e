"""Numerical lab for a hierarchy of coth r-matrix Lax flows and its pair of compatible Poisson brackets."""

from .brackets import (
    B1,
    B2,
    DERIVED,
    EXTENDED,
    LI,
    BracketKind,
    ExtendedStatePoint,
    StatePoint,
    TripleStatePoint,
    WCoordinate,
    li_correspondence,
    bracket,
    bracket1,
    bracket2,
    bracket_derived,
    bracket_extended,
    bracket_li,
    exactness_residual,
    jacobi_residual,
    li_original_bracket,
    pencil,
)
from .errors import (
    BihamError,
    ConfigError,
    CrossCheckFailure,
    DimensionMismatch,
    NonzeroDiagonal,
    NotHermitian,
    NotInvertible,
    RegularityLost,
    RegularityViolation,
    SingularValueCollision,
)
from .hierarchy import (
    TangentVector,
    UnreducedPoint,
    build_unreduced,
    exact_flow,
    flow_commutator_check,
    integrate,
    invariant_drift,
    moment_map_Phi,
    moment_map_phi,
    slice_compensators,
    vector_field,
)
from .observables import (
    GradientPair,
    Observable,
    apply_derivation_D,
    canonical_family,
    check_gauge_invariance,
    evaluate,
    gradients,
    hamiltonian,
    parse,
    q_coord,
    word_trace,
    xi_coord,
)

__version__ = "0.1.0"
