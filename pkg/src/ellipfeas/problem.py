"""The inequality system ``A^T y <= u``, Farkas certificates and run outcomes."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, TextIO

import numpy as np

from .errors import InvalidInput

EPS_CERT = 1e-8


@dataclass(frozen=True)
class Problem:
    """``{y : A^T y <= u}`` with ``A`` of shape (n, m); column j is a_j."""

    A: np.ndarray
    u: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        u = np.asarray(self.u, dtype=float).ravel()
        if A.shape[1] != u.shape[0]:
            raise InvalidInput(f"A has {A.shape[1]} columns but u has {u.shape[0]} entries")
        if np.any(np.all(A == 0.0, axis=0)):
            raise InvalidInput("all columns of A must be nonzero")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "u", u)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.A.shape[1]

    def default_eps_feas(self) -> float:
        return 1e-9 * (1.0 + float(np.max(np.abs(self.u), initial=0.0)))


class Kind(str, enum.Enum):
    TWO_SIDED = "two-sided"
    ONE_SIDED = "one-sided"


@dataclass
class Certificate:
    x: np.ndarray
    kind: Kind = Kind.TWO_SIDED


class Status(str, enum.Enum):
    FEASIBLE = "feasible"
    INFEASIBLE = "infeasible"
    WEAK = "weak"
    AMBIGUOUS = "ambiguous"
    ITERATION_LIMIT = "iteration_limit"
    NUMERICAL_FAILURE = "numerical_failure"

    @property
    def exit_code(self) -> int:
        return {
            Status.FEASIBLE: 0,
            Status.INFEASIBLE: 1,
            Status.WEAK: 2,
            Status.AMBIGUOUS: 2,
            Status.ITERATION_LIMIT: 3,
            Status.NUMERICAL_FAILURE: 4,
        }[self]


@dataclass
class Stats:
    iterations: int = 0
    adds: int = 0
    increases: int = 0
    decreases: int = 0
    drops: int = 0
    pareto: int = 0
    refactorizations: int = 0
    wall_time: float = 0.0
    initial_positive: int = 0

    def merge(self, other: "Stats") -> "Stats":
        return Stats(*(a + b for a, b in zip(vars(self).values(), vars(other).values())))


@dataclass
class Outcome:
    """Terminal result of a run.

    ``problem`` is the system the status refers to.  For an infeasible
    status, ``certificate`` is one-sided for ``problem``; ``raw`` and
    ``raw_lower`` keep the two-sided certificate on the system actually
    iterated on (possibly augmented), when there is one.
    """

    status: Status
    problem: Problem
    y: Optional[np.ndarray] = None
    certificate: Optional[Certificate] = None
    raw: Optional[Certificate] = None
    raw_problem: Optional[Problem] = None
    raw_lower: Optional[np.ndarray] = None
    stats: Stats = field(default_factory=Stats)
    trace: list = field(default_factory=list)
    message: str = ""


def residuals(P: Problem, y) -> np.ndarray:
    return P.A.T @ np.asarray(y, dtype=float) - P.u


def is_feasible(P: Problem, y, eps_feas: Optional[float] = None) -> bool:
    if eps_feas is None:
        eps_feas = P.default_eps_feas()
    return bool(np.max(residuals(P, y)) <= eps_feas)


def _parts(x):
    return np.maximum(x, 0.0), np.maximum(-x, 0.0)


def certificate_gap(P: Problem, l, x) -> float:
    """``u^T x_+ - l^T x_-``; rows with x_i >= 0 never read ``l_i``."""
    xp, xm = _parts(np.asarray(x, dtype=float))
    neg = xm > 0
    return float(P.u @ xp - np.asarray(l, dtype=float)[neg] @ xm[neg])


def verify_certificate(P: Problem, l, c: Certificate, eps_cert: float = EPS_CERT) -> bool:
    """Check a Farkas certificate with relative tolerances.

    The vector is normalised to unit 1-norm first, so the test is invariant
    to the scale of ``x``.  Never raises.
    """
    try:
        x = np.asarray(c.x, dtype=float)
        if x.shape != (P.m,) or not np.all(np.isfinite(x)):
            return False
        s = np.sum(np.abs(x))
        if s == 0.0:
            return False
        x = x / s
        maxcol = float(np.max(np.abs(P.A)))
        if np.max(np.abs(P.A @ x)) > eps_cert * maxcol:
            return False
        scale = float(np.max(np.abs(P.u), initial=0.0)) + 1.0
        if c.kind == Kind.ONE_SIDED:
            if np.min(x) < -eps_cert:
                return False
            gap = float(P.u @ np.maximum(x, 0.0))
        else:
            if l is None:
                return False
            gap = certificate_gap(P, l, x)
            if not np.isfinite(gap):
                return False
        return gap <= -eps_cert * scale
    except Exception:
        return False


def convert_to_one_sided(P: Problem, l, c: Certificate, Lam: np.ndarray, eps_cert: float = EPS_CERT) -> Certificate:
    """``x_+ + Lambda x_-``: a certificate for ``A^T y <= u`` alone."""
    if c.kind == Kind.ONE_SIDED:
        return c
    if not verify_certificate(P, l, c, eps_cert):
        raise InvalidInput("only a valid two-sided certificate can be converted")
    xp, xm = _parts(np.asarray(c.x, dtype=float))
    return Certificate(xp + Lam @ xm, Kind.ONE_SIDED)


# -- text format -----------------------------------------------------------

def read_problem(fh: TextIO) -> Problem:
    """First line ``n m``, then n rows of A, then one row of u."""
    tokens = fh.read().split()
    if len(tokens) < 2:
        raise InvalidInput("empty problem file")
    n, m = int(tokens[0]), int(tokens[1])
    vals = np.array([float(t) for t in tokens[2:]])
    if vals.size != n * m + m:
        raise InvalidInput(f"expected {n * m + m} numbers after the header, got {vals.size}")
    return Problem(vals[: n * m].reshape(n, m), vals[n * m:])


def write_problem(P: Problem, fh: TextIO) -> None:
    fh.write(f"{P.n} {P.m}\n")
    for row in P.A:
        fh.write(" ".join(repr(float(v)) for v in row) + "\n")
    fh.write(" ".join(repr(float(v)) for v in P.u) + "\n")


def write_vector(x, fh: TextIO) -> None:
    for v in np.asarray(x, dtype=float):
        fh.write(f"{float(v)!r}\n")


def read_vector(fh: TextIO) -> np.ndarray:
    return np.array([float(t) for t in fh.read().split()])
