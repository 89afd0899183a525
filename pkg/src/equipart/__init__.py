"""Low-rank SDP solver for graph bisection and k-equipartition.

Solves the minimum-bisection SDP and the spectrally bounded k-equipartition
SDP through a rank-r factorization X = R R^T whose feasible set is the
algebraic variety of matrices with unit-norm rows and zero column sums.
Smooth-part descent uses a Riemannian Barzilai-Borwein method with a
geometric-median retraction; rank-one (singular) points are handled by a
rounding step plus an optimality test that either certifies the point or
produces a strict descent direction.  Every solve returns relative KKT
residues of the original convex SDP as a certificate of global optimality.
"""

from .graph_io import Graph, GraphFormatError, laplacian, laplacian_apply, load_graph, save_graph
from .linalg import ThinSVD, center_apply, lanczos_min_eig, project_nsd, project_psd, spectral_split, thin_svd
from .variety import (
    NearSingularError,
    RetractionError,
    SingularPoint,
    TangentVector,
    VarietyPoint,
    geometric_median,
    is_singular,
    normalize_rows,
    project_tangent,
    retract,
    riemannian_gradient,
    round_to_singular,
)
from .certify import Certificate, SolveReport, recover_duals, residues_bisection, residues_equipartition
from .bisection import BBConfig, default_rank, solve_bisection
from .alm import ALMConfig, solve_equipartition

__version__ = "0.1.0"

__all__ = [
    "ALMConfig",
    "BBConfig",
    "Certificate",
    "Graph",
    "GraphFormatError",
    "NearSingularError",
    "RetractionError",
    "SingularPoint",
    "SolveReport",
    "TangentVector",
    "ThinSVD",
    "VarietyPoint",
    "center_apply",
    "default_rank",
    "geometric_median",
    "is_singular",
    "lanczos_min_eig",
    "laplacian",
    "laplacian_apply",
    "load_graph",
    "normalize_rows",
    "project_nsd",
    "project_psd",
    "project_tangent",
    "recover_duals",
    "residues_bisection",
    "residues_equipartition",
    "retract",
    "riemannian_gradient",
    "round_to_singular",
    "save_graph",
    "solve_bisection",
    "solve_equipartition",
    "spectral_split",
    "thin_svd",
]
