"""Ellipsoid methods for the feasibility of ``A^T y <= u``.

The ellipsoid is kept in a weighted-quadratic form ``E(d, l)``: each row
contributes ``d_j (a_j^T y - l_j)(a_j^T y - u_j) <= 0`` with a certified lower
bound ``l_j``.  Weights can go up (cuts), down, or to zero, and the solver ends
with a feasible point or a verifiable certificate of infeasibility.

Typical use::

    from ellipfeas import Problem, solve
    out = solve(Problem(A, u), init="bigm")
"""
from .errors import EllipfeasError
from .generators import GenSpec, generate, generate_constructed
from .initialization import solve
from .problem import Certificate, Kind, Outcome, Problem, Status, is_feasible, verify_certificate
from .solver import SolverConfig

__version__ = "0.1.0"

__all__ = ["Problem", "Certificate", "Kind", "Outcome", "Status", "SolverConfig", "solve",
           "is_feasible", "verify_certificate", "GenSpec", "generate", "generate_constructed",
           "EllipfeasError"]
