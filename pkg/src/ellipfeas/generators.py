"""Random test instances.

Uniforms come from numpy's PCG64 bit generator (``random_raw`` words mapped
to doubles with the 53-bit recipe); Gaussians use the Box-Muller transform
on pairs of those uniforms.  Both procedures are spelled out here so any
other implementation of PCG64 reproduces the same instances.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .errors import InvalidInput, RetryExhausted
from .problem import Problem


class Stream:
    """Seeded source of uniforms in [0, 1) and standard normals."""

    def __init__(self, seed: int):
        self.bitgen = np.random.PCG64(seed)

    def uniform(self, size: int) -> np.ndarray:
        raw = self.bitgen.random_raw(size)
        return (np.asarray(raw, dtype=np.uint64) >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)

    def normal(self, size: int) -> np.ndarray:
        k = (size + 1) // 2
        u1 = self.uniform(k)
        u2 = self.uniform(k)
        r = np.sqrt(-2.0 * np.log1p(-u1))  # 1 - u1 lies in (0, 1]
        t = 2.0 * np.pi * u2
        return np.concatenate([r * np.cos(t), r * np.sin(t)])[:size]


@dataclass(frozen=True)
class GenSpec:
    n: int
    m: int
    cls: str
    seed: int

    def __post_init__(self):
        if not (self.m > self.n >= 1):
            raise InvalidInput("need m > n >= 1")
        if self.cls not in ("feasible", "infeasible"):
            raise InvalidInput(f"unknown class {self.cls!r}")


def _stream(spec: GenSpec) -> Stream:
    # one stream per (class, n, m, seed) so cells never share draws
    tag = 0 if spec.cls == "feasible" else 1
    return Stream(np.random.SeedSequence([spec.seed, spec.n, spec.m, tag]).generate_state(1)[0])


def generate_feasible(spec: GenSpec) -> Tuple[Problem, np.ndarray]:
    """Gaussian A, ``y0 = 100 N(0, I)``, ``u = A^T y0 + e``."""
    s = _stream(spec)
    A = s.normal(spec.n * spec.m).reshape(spec.n, spec.m)
    y0 = 100.0 * s.normal(spec.n)
    u = A.T @ y0 + 1.0
    return Problem(A, u), y0


def generate_infeasible(spec: GenSpec, max_tries: int = 10) -> Tuple[Problem, np.ndarray]:
    """Gaussian A projected so that ``A x = 0`` for a uniform ``x >= 0``.

    ``u = A^T y0 + N(0, I_m)`` with its sign flipped if needed so that
    ``u^T x < 0``; x is returned as the planted one-sided certificate.
    """
    s = _stream(spec)
    A = s.normal(spec.n * spec.m).reshape(spec.n, spec.m)
    y0 = 100.0 * s.normal(spec.n)
    x = s.uniform(spec.m)
    A = A - np.outer(A @ x, np.ones(spec.m)) / x.sum()
    for _ in range(max_tries):
        u = A.T @ y0 + s.normal(spec.m)
        ux = float(u @ x)
        if ux > 0:
            return Problem(A, -u), x
        if ux < 0:
            return Problem(A, u), x
    raise RetryExhausted("u^T x stayed zero")


def generate(spec: GenSpec):
    return generate_feasible(spec) if spec.cls == "feasible" else generate_infeasible(spec)


@dataclass
class Planted:
    """A system whose condition value ``z = min_y max_i (a_i^T y - u_i)`` is known."""

    P: Problem
    z: float
    y_star: np.ndarray
    x: np.ndarray

    @property
    def tau(self) -> float:
        return abs(self.z)


def generate_constructed(n: int, m: int, tau: float, feasible: bool, seed: int) -> Planted:
    """``u = A^T y* - z e`` with ``A x = 0``, ``x >= 0``, ``e^T x = 1``.

    For any y, ``max_i (a_i^T y - u_i) >= x^T (A^T y - u) = z`` and equality
    holds at y*, so z is exact: ``-tau`` (feasible) or ``+tau`` (infeasible).
    """
    if not tau > 0:
        raise InvalidInput("tau must be positive")
    s = Stream(np.random.SeedSequence([seed, n, m, 7]).generate_state(1)[0])
    A = s.normal(n * m).reshape(n, m)
    x = s.uniform(m) + 0.1
    x /= x.sum()
    A = A - np.outer(A @ x, np.ones(m))
    y_star = s.normal(n)
    z = -tau if feasible else tau
    u = A.T @ y_star - z
    return Planted(Problem(A, u), z, y_star, x)


__all__ = ["Stream", "GenSpec", "generate_feasible", "generate_infeasible", "generate",
           "Planted", "generate_constructed"]
