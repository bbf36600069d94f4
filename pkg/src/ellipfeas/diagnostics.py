"""Analysis-only quantities: the condition value tau and the potentials.

None of this feeds back into the solvers; tau is unknown to a real solver and
is passed in explicitly wherever it is needed.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.linalg import solve_triangular

from . import ellipsoid as ell
from .errors import InvalidInput, NonPositiveF, PhiUndefined, Unsupported
from .problem import Problem


@dataclass(frozen=True)
class ConditionInfo:
    """``z = min_y max_i (a_i^T y - u_i)``; ``tau = |z|``."""

    z: float
    source: str

    @property
    def tau(self) -> float:
        return abs(self.z)


def max_violation(P: Problem, y) -> float:
    return float(np.max(P.A.T @ np.asarray(y, dtype=float) - P.u))


def _grid_min(P: Problem, tol: float, points: int = 11, max_expand: int = 60) -> Tuple[float, np.ndarray]:
    F = lambda y: max_violation(P, y)
    n = P.n
    y, *_ = np.linalg.lstsq(P.A.T, P.u, rcond=None)
    half = max(1.0, 2.0 * float(np.max(np.abs(y))))
    ticks = np.linspace(-1.0, 1.0, points)
    lattice = np.array(list(itertools.product(ticks, repeat=n)))
    best = F(y)
    expansions = 0
    while half > 1e-3 * tol:
        Y = y + half * lattice
        vals = np.max(Y @ P.A - P.u, axis=1)
        k = int(np.argmin(vals))
        if vals[k] < best:
            best, y = float(vals[k]), Y[k].copy()
        on_edge = np.max(np.abs(lattice[k])) == 1.0 and vals[k] <= best
        if on_edge and expansions < max_expand:
            # the minimiser may lie outside the current box
            half *= 2.0
            expansions += 1
            continue
        if expansions >= max_expand:
            return -math.inf, y
        half *= 0.5
    # polish: coordinate search with shrinking step
    step = 4.0 * half
    while step > 1e-3 * tol:
        moved = False
        for k in range(n):
            for sgn in (1.0, -1.0):
                cand = y.copy()
                cand[k] += sgn * step
                v = F(cand)
                if v < best:
                    best, y, moved = v, cand, True
        if not moved:
            step *= 0.5
    return best, y


def tau_oracle(P: Problem, method: str = "grid", planted=None, tol: float = 1e-4) -> ConditionInfo:
    """Condition value of ``A^T y <= u``.

    ``constructed`` reads z off a planted instance (anything with ``z``,
    ``y_star`` and ``x`` attributes) after checking it: ``y_star`` attains z
    and ``x >= 0``, ``A x = 0``, ``e^T x = 1`` proves nothing smaller exists.
    ``grid`` searches a lattice that zooms in around its best point, then
    polishes by coordinate search; only for n <= 3.
    """
    if method == "constructed":
        if planted is None:
            raise InvalidInput("constructed oracle needs the planted instance")
        upper = max_violation(P, planted.y_star)
        x = np.asarray(planted.x, dtype=float)
        lower = float(-(P.u @ x)) / float(x.sum())
        scale = 1.0 + abs(planted.z)
        if (np.any(x < 0) or np.max(np.abs(P.A @ x)) > 1e-9 * scale * (1.0 + np.max(np.abs(P.A)))
                or abs(upper - planted.z) > 1e-9 * scale or abs(lower - planted.z) > 1e-9 * scale):
            raise InvalidInput("planted data do not certify z")
        return ConditionInfo(float(planted.z), "constructed")
    if method == "grid":
        if P.n > 3:
            raise Unsupported("grid oracle is limited to n <= 3")
        z, _ = _grid_min(P, tol)
        return ConditionInfo(z, "grid-oracle")
    raise InvalidInput(f"unknown method {method!r}")


def semi_widths(st) -> np.ndarray:
    """``gamma_i`` for every row, from a fresh triangular solve."""
    if st.f <= 0:
        raise NonPositiveF(f"f = {st.f}")
    Z = solve_triangular(st.chol.L, st.P.A, lower=True, check_finite=False)
    return np.sqrt(st.f * np.sum(Z * Z, axis=0))


def _phi_terms(st) -> np.ndarray:
    if st.f <= 0:
        raise NonPositiveF(f"f = {st.f}")
    if np.any(st.d <= 0):
        raise PhiUndefined("phi needs every d_i > 0")
    return np.sqrt(st.f / st.d)


def _floor(st, tau: float) -> float:
    m = st.m
    return m / (m + 1.0) * tau


def phi(st, tau: float) -> float:
    return float(np.prod(np.maximum(_phi_terms(st), _floor(st, tau))))


def psi(st, tau: float) -> float:
    return float(np.prod(np.maximum(semi_widths(st), _floor(st, tau))))


def phi_hat(st) -> float:
    return float(np.prod(_phi_terms(st)))


def psi_hat(st) -> float:
    return float(np.prod(semi_widths(st)))


def log_psi(st, tau: float) -> float:
    """``ln psi``; products of m terms overflow long before the logs do."""
    return float(np.sum(np.log(np.maximum(semi_widths(st), _floor(st, tau)))))


def potential_step(st, j: int, l_new: Optional[np.ndarray] = None):
    """The weight change ``d~ ~ d/f + 2/((m-1) gamma_j^2) e_j`` with bounds ``l_new``.

    Returns the new state (normalised to f = 1) and the scalar alpha with
    ``d~/f~ = alpha (d/f + ...)``, which the potential guarantee needs to be at
    least ``(m^2 - 1)/m^2``.
    """
    m = st.m
    g = semi_widths(st)[j]
    base = st.d / st.f
    base[j] += 2.0 / ((m - 1) * g * g)
    l = st.l if l_new is None else np.asarray(l_new, dtype=float)
    new = ell.build(st.P, l, base)
    if new.f <= 0:
        raise NonPositiveF(f"f = {new.f}")
    alpha = 1.0 / new.f
    return ell.scale_to_unit_f(new), alpha


__all__ = ["ConditionInfo", "max_violation", "tau_oracle", "semi_widths", "phi", "psi",
           "phi_hat", "psi_hat", "log_psi", "potential_step"]
