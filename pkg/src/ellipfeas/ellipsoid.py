"""Ellipsoids ``E(d, l)`` built from weighted rank-one quadratic inequalities.

Row j contributes ``d_j (a_j^T y - l_j)(a_j^T y - u_j) <= 0``.  Completing the
square around ``ybar = (A D A^T)^{-1} A D r`` gives

    (y - ybar)^T (A D A^T) (y - ybar) <= f(d, l),

with ``r = (u + l)/2``, ``v = (u - l)/2`` and ``tbar = A^T ybar - r``.  Rows
with ``d_j = 0`` may carry ``l_j = -inf`` (no certified lower bound yet);
they are masked out of every sum.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import linalg
from .errors import DegenerateDirection, InvalidInput, NegativeWeight, NonPositiveF
from .problem import Certificate, Kind, Problem, verify_certificate
from .steps import zeta


@dataclass
class FeasiblePoint:
    y: np.ndarray


@dataclass
class EllipsoidState:
    P: Problem
    l: np.ndarray
    d: np.ndarray
    chol: linalg.CholFactor
    ybar: np.ndarray
    s: np.ndarray  # A^T ybar
    f: float
    h: np.ndarray  # a_i^T (A D A^T)^{-1} a_i, updated incrementally
    h_drift: float = 0.0  # worst relative error seen in a cached h_j

    # -- derived quantities -------------------------------------------------
    @property
    def n(self) -> int:
        return self.P.n

    @property
    def m(self) -> int:
        return self.P.m

    @property
    def u(self) -> np.ndarray:
        return self.P.u

    @property
    def active(self) -> np.ndarray:
        return self.d > 0

    @property
    def r(self) -> np.ndarray:
        return 0.5 * (self.P.u + self.l)

    @property
    def v(self) -> np.ndarray:
        return 0.5 * (self.P.u - self.l)

    @property
    def tbar(self) -> np.ndarray:
        return self.s - self.r

    def dt(self) -> np.ndarray:
        """``D tbar`` with inactive rows set to exactly zero."""
        out = np.zeros(self.m)
        a = self.active
        out[a] = self.d[a] * (self.s[a] - 0.5 * (self.P.u[a] + self.l[a]))
        return out

    @property
    def p(self) -> float:
        """``-ln det(A D A^T)``."""
        return -linalg.log_det(self.chol)

    @property
    def g(self) -> float:
        return self.n * np.log(self.f) + self.p if self.f > 0 else np.inf

    @property
    def g_tilde(self) -> float:
        return self.n * self.f + self.p - self.n

    def copy(self) -> "EllipsoidState":
        return EllipsoidState(self.P, self.l.copy(), self.d.copy(), self.chol.copy(),
                              self.ybar.copy(), self.s.copy(), self.f, self.h.copy(), self.h_drift)

    # -- consistency --------------------------------------------------------
    def refresh(self) -> "EllipsoidState":
        """Recompute centre, slacks and f from the current factor."""
        a = self.active
        dr = np.zeros(self.m)
        dr[a] = self.d[a] * 0.5 * (self.P.u[a] + self.l[a])
        self.ybar = linalg.solve(self.chol, self.P.A @ dr)
        self.s = self.P.A.T @ self.ybar
        self.f = f_value(self)
        return self

    def refactorize(self) -> "EllipsoidState":
        S = (self.P.A * self.d) @ self.P.A.T
        self.chol = linalg.factorize(S)
        W = linalg.forward(self.chol, self.P.A)
        self.h = np.einsum("ij,ij->j", W, W)
        self.h_drift = 0.0
        return self.refresh()

    def term_scale(self) -> float:
        a = self.active
        r, v = self.r[a], self.v[a]
        return float(self.d[a] @ (r * r + v * v))


def build(P: Problem, l, d) -> EllipsoidState:
    """State for weights ``d`` and lower bounds ``l`` (``l`` may be a BoundState)."""
    l = np.array(getattr(l, "l", l), dtype=float)
    d = np.array(d, dtype=float)
    if np.any(d < 0):
        raise InvalidInput("weights must be nonnegative")
    if np.any(~np.isfinite(l[d > 0])):
        raise InvalidInput("every row with positive weight needs a finite lower bound")
    st = EllipsoidState(P, l, d, None, None, None, 0.0, None)
    return st.refactorize()


def f_value(st: EllipsoidState) -> float:
    """``v^T D v - tbar^T D tbar``, summed as ``d (u - s)(s - l)``."""
    a = st.active
    s = st.s[a]
    return float(st.d[a] @ ((st.P.u[a] - s) * (s - st.l[a])))


def f_crosscheck(st: EllipsoidState) -> float:
    """``r^T D A^T B A D r - r^T D r + v^T D v`` through a fresh solve."""
    a = st.active
    dr = np.zeros(st.m)
    r, v = st.r[a], st.v[a]
    dr[a] = st.d[a] * r
    adr = st.P.A @ dr
    y = linalg.solve(st.chol, adr)
    return float(adr @ y - st.d[a] @ (r * r) + st.d[a] @ (v * v))


def f_mismatch(st: EllipsoidState) -> float:
    """Relative disagreement between the two forms of f."""
    return abs(f_value(st) - f_crosscheck(st)) / max(st.term_scale(), 1e-300)


def gammas(st: EllipsoidState) -> np.ndarray:
    if st.f <= 0:
        raise NonPositiveF(f"f = {st.f}")
    return np.sqrt(st.f * np.maximum(st.h, 0.0))


def exact_h(st: EllipsoidState, j: int) -> float:
    """``a_j^T B a_j`` by a fresh solve; refreshes the cache and the drift record."""
    z = linalg.forward(st.chol, st.P.A[:, j])
    hj = float(z @ z)
    if hj > 0:
        st.h_drift = max(st.h_drift, abs(st.h[j] - hj) / hj)
    st.h[j] = hj
    return hj


def gamma(st: EllipsoidState, i: int) -> float:
    if st.f <= 0:
        raise NonPositiveF(f"f = {st.f}")
    return float(np.sqrt(st.f * max(st.h[i], 0.0)))


def scale_to_unit_f(st: EllipsoidState) -> EllipsoidState:
    """Divide d by f; the ellipsoid as a set does not change."""
    if st.f <= 0:
        raise NonPositiveF(f"f = {st.f}")
    c = 1.0 / st.f
    st.d *= c
    st.chol.scale(c)
    st.h /= c
    st.f = 1.0
    return st


def modify_weight(st: EllipsoidState, j: int, delta: float, set_to: Optional[float] = None) -> EllipsoidState:
    """``d_j += delta`` with a rank-one change of the factor.

    ``set_to`` pins the resulting weight exactly (drop steps use 0).
    """
    if delta == 0.0:
        return st
    aj = st.P.A[:, j]
    Baj = linalg.solve(st.chol, aj)
    hj = float(aj @ Baj)
    linalg.rank_one_modify(st.chol, aj, delta, inplace=True)
    w = st.P.A.T @ Baj
    st.h = st.h - (delta / (1.0 + delta * hj)) * w * w
    st.d[j] = st.d[j] + delta if set_to is None else set_to
    return st.refresh()


def apply_sigma(st: EllipsoidState, j: int, sigma: float, allow_negative: bool = False,
                tol: float = 1e-12) -> EllipsoidState:
    """Move to ``d_+(sigma) = d + sigma / ((1 - sigma) gamma_j^2) e_j``."""
    if sigma >= 1.0:
        raise InvalidInput("sigma must be < 1")
    if sigma == 0.0:
        return st
    # sigma / ((1 - sigma) gamma_j^2) in the f = 1 scaling; f cancels here
    delta = sigma / ((1.0 - sigma) * st.h[j])
    new = st.d[j] + delta
    if new < 0 and not allow_negative:
        if new < -tol * max(st.d[j], 1e-300):
            raise NegativeWeight(f"d_{j} would become {new}")
        return modify_weight(st, j, -st.d[j], set_to=0.0)
    return modify_weight(st, j, delta)


def drop(st: EllipsoidState, j: int) -> EllipsoidState:
    return modify_weight(st, j, -st.d[j], set_to=0.0)


def pareto_center_to_boundary(st: EllipsoidState, j: int) -> EllipsoidState:
    """Increase d_j until the centre lands on ``a_j^T y = u_j``.

    sigma = 2 (a_j^T ybar - u_j) / ((alpha + beta) gamma_j), which equals
    (a_j^T ybar - u_j) / tbar_j.
    """
    viol = st.s[j] - st.u[j]
    if viol <= 0:
        return st
    tj = st.s[j] - 0.5 * (st.u[j] + st.l[j])
    if not tj > 0:
        raise DegenerateDirection("tbar_j must be positive")
    return apply_sigma(st, j, viol / tj)


def pareto_raise_bound(st: EllipsoidState, j: int, new_lj: float, bs=None) -> EllipsoidState:
    """Raise l_j to ``new_lj`` and d_j by ``(new - l_j)/(u_j - new) d_j``.

    Requires the centre on ``a_j^T y = u_j``; centre and f are unchanged.
    ``bs`` is accepted for symmetry with the bound registry but not needed:
    the caller has already certified ``new_lj``.
    """
    lj, uj = st.l[j], st.u[j]
    if not (lj < new_lj < uj):
        raise InvalidInput(f"new bound {new_lj} must lie strictly in ({lj}, {uj})")
    if st.d[j] == 0.0:
        st.l[j] = new_lj
        return st.refresh()
    mu = (new_lj - lj) / (uj - new_lj) * st.d[j]
    st.l[j] = new_lj
    return modify_weight(st, j, mu)


def certificate_from_state(st: EllipsoidState, bound_l, eps_f_rel: float = 1e-10,
                           eps_feas: Optional[float] = None):
    """Certificate, feasible point, or None.

    ``bound_l`` are the registry's certified bounds (at least as tight as
    ``st.l``).  Returns a two-sided :class:`Certificate`, a
    :class:`FeasiblePoint`, or ``None``.
    """
    P = st.P
    bound_l = np.asarray(bound_l, dtype=float)
    a = st.active
    vdv = float(st.d[a] @ st.v[a] ** 2)
    eps_f = eps_f_rel * (1.0 + abs(vdv))
    x = st.dt()
    if np.any(x != 0):
        c = Certificate(x, Kind.TWO_SIDED)
        if verify_certificate(P, bound_l, c):
            return c
    if st.f > eps_f:
        return None
    if eps_feas is None:
        eps_feas = P.default_eps_feas()
    res = st.s - P.u
    if np.max(res) <= eps_feas:
        return FeasiblePoint(st.ybar.copy())
    xt = _perturbed_certificate(st, x, res, bound_l)
    if xt is not None:
        return xt
    return None


def _perturbed_certificate(st: EllipsoidState, x, res, bound_l):
    P = st.P
    below = st.l - st.s  # > 0 where the centre is under its lower bound
    cand = np.where(res > 0, res, np.where(np.isfinite(below) & (below > 0), below, -np.inf))
    order = np.argsort(-cand, kind="stable")
    for j in order[: min(5, st.m)]:
        if not cand[j] > 0:
            break
        sign = 1.0 if res[j] > 0 else -1.0
        Baj = linalg.solve(st.chol, P.A[:, j])
        dirn = -st.d * (P.A.T @ Baj)
        dirn[j] += 1.0
        nz = x != 0
        flips = nz & (sign * dirn * x < 0)
        if np.any(flips):
            emax = float(np.min(np.abs(x[flips]) / np.abs(dirn[flips])))
        else:
            emax = 2.0 * max(float(np.sum(np.abs(x))), 1.0)
        xt = x + sign * 0.5 * emax * dirn
        c = Certificate(xt, Kind.TWO_SIDED)
        if verify_certificate(P, bound_l, c):
            return c
    return None


def contains(st: EllipsoidState, y, slack: float = 1e-6) -> bool:
    """Whether ``y`` lies in E(d, l) up to a relative slack on f."""
    z = st.chol.L.T @ (np.asarray(y, dtype=float) - st.ybar)
    return float(z @ z) <= st.f * (1.0 + slack)


def quad_form(st: EllipsoidState, Y) -> np.ndarray:
    """``(y - ybar)^T A D A^T (y - ybar)`` for each column of ``Y``."""
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    Z = st.chol.L.T @ (Y - st.ybar[:, None])
    return np.einsum("ij,ij->j", Z, Z)


def debug_dump_line(it: int, j: int, kind: str, sigma: float, st: EllipsoidState) -> str:
    return f"{it}, {j}, {kind}, {sigma!r}, {st.f!r}, {st.p!r}, {st.g!r}"


__all__ = [
    "EllipsoidState", "FeasiblePoint", "build", "f_value", "f_crosscheck", "f_mismatch",
    "gamma", "gammas", "exact_h", "scale_to_unit_f", "apply_sigma", "modify_weight", "drop",
    "pareto_center_to_boundary", "pareto_raise_bound", "certificate_from_state", "contains",
    "quad_form", "zeta",
]
