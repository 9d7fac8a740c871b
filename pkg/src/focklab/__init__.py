"""Semiclassical coherent-state propagation on truncated bosonic Fock spaces."""

__version__ = "0.1.0"

from .errors import (
    BlowUpError,
    CapacityError,
    ConfigError,
    ConsistencyError,
    DomainViolationError,
    FocklabError,
    HorizonError,
    H1ViolationError,
    TruncationError,
)
from .hilbert import OneParticleSpace, conjugate, inner, validate_h1
from .fock import (
    FockParams,
    FockVector,
    SparseOperator,
    coherent,
    coherent_tail,
    dgamma,
    enumerate_basis,
    gamma_scalar,
    ladder,
    load_fock_vector,
    n_max_for_tail,
    number_operator,
    save_fock_vector,
    segal_field,
    vacuum,
    weyl,
    weyl_apply,
)
from .wick import (
    GrowthWeights,
    Symbol,
    build_entire,
    build_pphi2,
    check_estana_bound,
    check_number_estimate,
    eval_symbol,
    grad_zbar,
    load_symbol,
    omega_integrand,
    quadratic_part,
    remainder_symbol,
    save_symbol,
    symbol_from_entries,
    translate_symbol,
    weighted_norm,
    wick_matrix,
    wick_matrix_reference,
)
from .classical import ClassicalTrajectory, energy, evolve_classical, picard_oracle
from .quadratic import (
    QuadraticGenerator,
    SymplecticMap,
    bogoliubov_residual,
    build_quadratic_generator,
    propagate_u2,
    symplectic_beta,
)
from .quantum import QuantumSystem, evolve_quantum, hepp_expectation
