"""Discrete mixed-dimensional exterior calculus on forest geometries."""

from .cochains import (
    DegreeLayout,
    MassMatrix,
    MixedForm,
    degree_layout,
    inner_product,
    mass_matrix,
    norm_l2,
    restriction_operator,
)
from .geometry import (
    ForestGeometry,
    ParseError,
    ValidationReport,
    load_geometry,
    neighbor_sets,
    orientation_sign,
    parse_geometry,
    validate_conforming,
)
from .hodge import (
    HodgeDecomposition,
    betti_numbers,
    harmonic_basis,
    hodge_decompose,
    poincare_constant,
)
from .laplace import (
    CoefficientField,
    SolveReport,
    coercivity_estimate,
    energy_functional,
    evaluate_functional,
    solve_hodge_laplace,
)
from .operators import (
    OperatorBundle,
    codifferential_apply,
    jump_operator,
    local_exterior_derivative,
    mixed_derivative,
    stokes_check,
)

__version__ = "0.1.0"

__all__ = [
    "DegreeLayout",
    "MassMatrix",
    "MixedForm",
    "degree_layout",
    "inner_product",
    "mass_matrix",
    "norm_l2",
    "restriction_operator",
    "ForestGeometry",
    "ParseError",
    "ValidationReport",
    "load_geometry",
    "neighbor_sets",
    "orientation_sign",
    "parse_geometry",
    "validate_conforming",
    "HodgeDecomposition",
    "betti_numbers",
    "harmonic_basis",
    "hodge_decompose",
    "poincare_constant",
    "CoefficientField",
    "SolveReport",
    "coercivity_estimate",
    "energy_functional",
    "evaluate_functional",
    "solve_hodge_laplace",
    "OperatorBundle",
    "codifferential_apply",
    "jump_operator",
    "local_exterior_derivative",
    "mixed_derivative",
    "stokes_check",
]
