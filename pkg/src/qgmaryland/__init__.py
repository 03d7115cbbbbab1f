"""Exactly solvable quasiperiodic Schrödinger operators on periodic quantum graphs.

Vertices of the lattice graph Z^d carry delta couplings
``alpha(m) = -g tan(pi <omega, m> + phi)``; eigenvalues are labelled by lattice
indices and found from the torus phase ``sigma``.
"""
__version__ = "0.1.0"

from .edge_solver import EdgeProfile, dirichlet_spectrum, solve_edge  # noqa: E402
from .errors import (  # noqa: E402
    ConvergenceError, DegeneratePhaseError, InputError, NearDirichletError,
    NumericalError, QGError, RationalityError, ResourceError, SmallDivisorError,
)
from .lattice_model import GraphModel, MarylandParams, spectral_gaps, validate_params  # noqa: E402
from .spectral_solver import (  # noqa: E402
    certify_record, enumerate_eigenvalues, eigenvalue_for_index, graph_eigenfunction,
    lattice_eigenvector,
)
from .torus_analysis import conjugator_coeffs, sigma, sigma_prime  # noqa: E402
from .truncation_oracle import build_truncated, defect, defect_scan  # noqa: E402
