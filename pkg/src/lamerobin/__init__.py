"""Quasi-periodic Lamé problems with a degenerating Robin traction condition.

Solves ``div T(omega, Du) = 0`` in the periodic exterior of a hole, with
``T(omega, Du) nu + b[k] u = g`` on its boundary, either directly for fixed ``k``
or through the convergent power series in ``k`` of the boundary densities.
"""
from .boundary_geom import BoundaryDisc, CurveSpec, boundary_integral, discretize
from .elastic_core import ElasticConfig, linear_part, traction_tensor
from .errors import (
    ConfigError,
    FamilyError,
    GeometryError,
    LameRobinError,
    LatticePointError,
    RadiusWarning,
    SingularSystemError,
    StandoffError,
    ToleranceError,
)
from .lattice_greens import GreensEvaluator, gamma_hat
from .layer_potentials import (
    PotentialMatrices,
    assemble,
    eval_single_layer,
    eval_single_layer_traction,
    jump_relation_check,
)
from .robin_expansion import (
    DensityPair,
    ProblemData,
    RobinFamily,
    SeriesSolution,
    direct_solve,
    eval_solution_direct,
    eval_solution_series,
    series_coefficients,
    validate_family,
)

__version__ = "0.1.0"
