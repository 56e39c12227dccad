"""Quaternionic Monge-Ampere toolkit: hyperhermitian algebra, quaternionic
Hessians, sup/inf-convolutions and a monotone Dirichlet solver."""
from .quaternion import I, J, K, ONE, QPoint, Quaternion, qmul
from .hyperhermitian import (
    EigenGroupingError,
    HyperhermitianMatrix,
    NotHyperhermitianError,
    inf_trace_value,
    is_psd,
    moore_det,
    moore_det_oracle,
    q_eigenvalues,
    real_embed_matrix,
    retrace,
)
from .differential import (
    QuadraticField,
    ScalarField,
    conjugate_hessian,
    delta_a,
    det_inequality_gap,
    ma_det,
    norm_squared_field,
    psh_check,
    quaternionic_hessian,
)
from .grid import Ball, Box, Grid, GridFunction
from .regularization import RhsFunction, inf_convolution, perturbed_rhs, sup_convolution
from .solver import (
    DirichletProblem,
    SolveReport,
    bellman_residual,
    build_direction_set,
    comparison_check,
    discrete_delta_a,
    solve_dirichlet,
)
from .expression import parse_expression

__version__ = "0.1.0"
