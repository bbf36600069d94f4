"""Certified lower bounds ``l`` with their multiplier matrix ``Lambda``.

Column j of ``Lambda`` is a nonnegative ``lambda`` with ``A lambda = -a_j``;
then ``a_j^T y = -lambda^T A^T y >= -u^T lambda`` on P, so ``l_j = -u^T lambda``.
Rows without any bound yet carry ``l_j = -inf`` and a zero column.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from . import linalg
from .errors import DegenerateDirection, InvalidInput
from .problem import Certificate, Kind, Problem, verify_certificate

REL_TOL = 1e-8
MULT_TOL = 1e-10  # multipliers less accurate than this are discarded, not installed


@dataclass
class DualVector:
    lam: np.ndarray
    j: int
    bound: float


@dataclass
class InfeasibleEvidence:
    """A bound above ``u_j``; ``certificate`` proves the system empty."""

    bound: float
    certificate: Certificate


def theta(lam, l, u) -> float:
    """``l^T lam_- - u^T lam_+`` with zero entries never touching ``l``."""
    lam = np.asarray(lam, dtype=float)
    pos = lam > 0
    neg = lam < 0
    return float(-(u[pos] @ lam[pos]) - (l[neg] @ lam[neg]))


@dataclass
class BoundState:
    l: np.ndarray
    Lam: np.ndarray

    @property
    def known(self) -> np.ndarray:
        return np.isfinite(self.l)

    def copy(self) -> "BoundState":
        return BoundState(self.l.copy(), self.Lam.copy())

    def residual(self, P: Problem) -> float:
        """Worst relative violation of ``A Lambda = -A`` over known columns."""
        k = self.known
        if not np.any(k):
            return 0.0
        R = P.A @ self.Lam[:, k] + P.A[:, k]
        scale = np.abs(P.A) @ np.abs(self.Lam[:, k]) + np.abs(P.A[:, k])
        return float(np.max(np.abs(R) / np.maximum(scale, 1e-300)))

    def verify(self, P: Problem, tol: float = REL_TOL) -> bool:
        k = self.known
        if np.any(self.Lam < 0):
            return False
        if np.any(self.Lam[:, ~k] != 0):
            return False
        if self.residual(P) > tol:
            return False
        lk = -(P.u @ self.Lam[:, k])
        return bool(np.allclose(lk, self.l[k], rtol=1e-12, atol=1e-12 * (1 + np.max(np.abs(P.u)))))


def polish_column(P: Problem, lam: np.ndarray, target: np.ndarray, sweeps: int = 2) -> np.ndarray:
    """Nudge a nonnegative ``lam`` so that ``A lam`` matches ``target`` more closely.

    Corrections stay on the current support, so zeros stay zero; any entry
    pushed negative is clipped.
    """
    lam = np.maximum(lam, 0.0)
    for _ in range(sweeps):
        S = lam > 0
        if not np.any(S):
            break
        r = target - P.A @ lam
        if np.max(np.abs(r)) <= 1e-15 * (np.max(np.abs(P.A[:, S])) * np.sum(lam) + 1e-300):
            break
        # weighted least-change correction: delta = W A_S^T (A_S W A_S^T)^{-1} r
        w = lam[S]
        AS = P.A[:, S]
        M = (AS * w) @ AS.T
        try:
            z = np.linalg.solve(M, r)
        except np.linalg.LinAlgError:
            z = np.linalg.lstsq(M, r, rcond=None)[0]
        lam[S] = np.maximum(w + w * (AS.T @ z), 0.0)
    return lam


def bound_from_ellipsoid(st, j: int) -> DualVector:
    """``lambda = gamma_j D t - D A^T B a_j``, the multiplier of the ellipsoid minimum.

    Needs f = 1.  ``A lambda = -a_j`` and the bound is ``a_j^T ybar - gamma_j``.
    """
    hj = float(st.h[j])
    if not hj > 0:
        raise DegenerateDirection(f"gamma_{j} is zero")
    gj = np.sqrt(st.f * hj)
    Baj = linalg.solve(st.chol, st.P.A[:, j])
    lam = gj * st.dt() - st.d * (st.P.A.T @ Baj)
    return DualVector(lam, j, theta(lam, st.l, st.u))


def zero_jth_component(dv: DualVector, l, u) -> Union[DualVector, InfeasibleEvidence]:
    j = dv.j
    lj = dv.lam[j]
    if lj == 0.0:
        return dv
    th = theta(dv.lam, l, u)
    if th > u[j]:
        x = dv.lam.copy()
        x[j] += 1.0
        return InfeasibleEvidence(th, Certificate(x, Kind.TWO_SIDED))
    if lj <= -1.0:
        raise InvalidInput("lambda_j must exceed -1")
    lam = dv.lam.copy()
    lam[j] = 0.0
    lam /= 1.0 + lj
    return DualVector(lam, j, theta(lam, l, u))


def nonnegativize(dv: DualVector, bs: BoundState, u) -> DualVector:
    """``Lambda lam_- + lam_+``; keeps ``A lam = -a_j`` and the bound."""
    lam = dv.lam
    neg = lam < 0
    out = np.maximum(lam, 0.0)
    if np.any(neg):
        if not np.all(bs.known[neg]):
            raise InvalidInput("negative multiplier on a row without a lower bound")
        out = out + bs.Lam[:, neg] @ (-lam[neg])
    return DualVector(out, dv.j, float(-(u @ out)))


def _direction(st, j: int):
    """``lambda(mu) = c0 + mu c1`` spanning the multipliers with ``lambda_j = 0``."""
    A = st.P.A
    Baj = linalg.solve(st.chol, A[:, j])
    w1 = st.dt()
    w2 = st.d * (A.T @ Baj)
    hj = float(A[:, j] @ Baj)
    q = st.d[j] * hj
    if 1.0 - q <= 1e-12:
        return None
    w2e = w2.copy()
    w2e[j] -= 1.0
    tj = st.s[j] - 0.5 * (st.u[j] + st.l[j])
    c0 = -w2e / (1.0 - q)
    c0[j] -= 1.0
    coef = st.d[j] * tj / (1.0 - q) if st.d[j] > 0 else 0.0
    c1 = w1 + coef * w2e
    c0[j] = 0.0
    c1[j] = 0.0
    return c0, c1


def _unbounded(st, c1, l, sign) -> Optional[InfeasibleEvidence]:
    x = sign * c1
    c = Certificate(x, Kind.TWO_SIDED)
    if verify_certificate(st.P, l, c):
        return InfeasibleEvidence(np.inf, c)
    return None


def best_lower_bound(st, j: int, l=None) -> Union[DualVector, InfeasibleEvidence, None]:
    """Maximise ``theta(lambda(mu))`` over the line of multipliers with ``lambda_j = 0``.

    ``theta`` is concave and piecewise linear in ``mu`` with a kink where a
    component of ``lambda(mu)`` changes sign; the maximiser is the first
    breakpoint after which the slope is no longer positive.  ``l`` are the
    bounds to evaluate ``theta`` with (the registry's, by default the state's).

    Returns None when row j is essential to ``A D A^T`` (``d_j gamma_j^2``
    near 1) and the multiplier cannot be formed accurately.
    """
    l = st.l if l is None else np.asarray(l, dtype=float)
    u = st.u
    cc = _direction(st, j)
    if cc is None:
        return None
    c0, c1 = cc
    # c1 is D tbar (plus a multiple of the c0 part); at a centred ellipsoid it is
    # pure rounding noise and must not be mistaken for a direction
    scale = max(np.max(np.abs(c1)), 1e-10 * (np.max(np.abs(c0)) + 1.0)) if c1.size else 0.0
    idx = np.flatnonzero(np.abs(c1) > 1e-14 * max(scale, 1e-300))
    if np.max(np.abs(c1), initial=0.0) <= 1e-10 * (np.max(np.abs(c0), initial=0.0) + 1.0):
        idx = idx[:0]
    if idx.size == 0:
        return _finish(DualVector(c0, j, theta(c0, l, u)), u, j, st.P.A, l)
    if not np.all(np.isfinite(l[idx])):
        raise InvalidInput("rows without a lower bound must have zero weight")
    c1i = c1[idx]
    width = u[idx] - l[idx]
    # slope as mu -> -inf, then the decrement at each breakpoint
    slope0 = float(-(np.where(c1i > 0, l[idx], u[idx]) @ c1i))
    mus = -c0[idx] / c1i
    order = np.argsort(mus, kind="stable")
    drops = np.abs(c1i[order]) * width[order]
    slopes = slope0 - np.cumsum(drops)
    tol = 1e-12 * float(np.abs(c1i) @ (np.abs(u[idx]) + np.abs(l[idx])) + 1.0)
    assert np.all(np.diff(slopes) <= tol), "theta(lambda(mu)) is not concave"
    if slope0 < -tol:
        ev = _unbounded(st, c1, l, -1.0)
        if ev is not None:
            return ev
    if slopes[-1] > tol:
        ev = _unbounded(st, c1, l, 1.0)
        if ev is not None:
            return ev
    k = int(np.argmax(slopes <= 0)) if np.any(slopes <= 0) else len(slopes) - 1
    mu = float(mus[order[k]])
    lam = c0 + mu * c1
    lam[idx[order[k]]] = 0.0
    lam[j] = 0.0
    return _finish(DualVector(lam, j, theta(lam, l, u)), u, j, st.P.A, l)


def multiplier_residual(A: np.ndarray, lam: np.ndarray, j: int) -> float:
    """Relative size of ``A lam + a_j``."""
    r = A @ lam + A[:, j]
    scale = np.abs(A) @ np.abs(lam) + np.abs(A[:, j])
    return float(np.max(np.abs(r) / np.maximum(scale, 1e-300)))


def refine_multiplier(A: np.ndarray, lam: np.ndarray, j: int) -> np.ndarray:
    """One least-change correction of ``A lam = -a_j`` on the support of lam.

    Signs are kept: each entry moves by a multiple of its own magnitude.
    """
    lam = np.array(lam, dtype=float)
    S = lam != 0
    if not np.any(S):
        return lam
    r = -A[:, j] - A @ lam
    w = np.abs(lam[S])
    AS = A[:, S]
    M = (AS * w) @ AS.T
    z = np.linalg.lstsq(M, r, rcond=None)[0]
    step = w * (AS.T @ z)
    # a correction that flips a sign is not a refinement
    if np.any(np.abs(step) >= w):
        return lam
    lam[S] += step
    return lam


def _finish(dv, u, j, A=None, l=None):
    if isinstance(dv, InfeasibleEvidence):
        return dv
    if A is not None and multiplier_residual(A, dv.lam, j) > MULT_TOL:
        lam = refine_multiplier(A, dv.lam, j)
        if multiplier_residual(A, lam, j) > MULT_TOL:
            return None
        dv = DualVector(lam, j, theta(lam, l, u) if l is not None else dv.bound)
    if dv.bound > u[j]:
        x = dv.lam.copy()
        x[j] += 1.0
        return InfeasibleEvidence(dv.bound, Certificate(x, Kind.TWO_SIDED))
    return dv


def old_style_bound(st, j: int, l=None) -> Union[DualVector, InfeasibleEvidence, None]:
    """Bound read off the ellipsoid with row j removed, as in earlier variants.

    Works on a copy: drop j, rescale, take the ellipsoid minimum of
    ``a_j^T y``.  Returns None if row j cannot be dropped safely.
    """
    from . import ellipsoid as ell
    from .errors import EllipfeasError

    l = st.l if l is None else np.asarray(l, dtype=float)
    tmp = st.copy()
    try:
        if tmp.d[j] > 0:
            ell.drop(tmp, j)
        if tmp.f <= 0:
            return None
        ell.scale_to_unit_f(tmp)
        dv = bound_from_ellipsoid(tmp, j)
    except (EllipfeasError, np.linalg.LinAlgError):
        return None
    dv.lam[j] = 0.0
    return _finish(DualVector(dv.lam, j, theta(dv.lam, l, st.u)), st.u, j, st.P.A, l)


def accept_bound(bs: BoundState, j: int, dv: DualVector, P: Problem,
                 neg_tol: float = 1e-12, polish: bool = True) -> Union[BoundState, Certificate]:
    """Install ``dv`` as row j's certificate when it improves ``l_j``.

    Mutates and returns ``bs``; returns the one-sided ``lambda + e_j`` instead
    when the new bound reaches ``u_j`` (a certificate if it verifies, a weak
    one otherwise) and leaves ``bs`` untouched in that case.
    """
    lam = np.asarray(dv.lam, dtype=float)
    if np.any(lam < -neg_tol * max(1.0, float(np.max(np.abs(lam))))):
        raise InvalidInput("accept_bound needs a nonnegative multiplier")
    lam = np.maximum(lam, 0.0)
    # a positive own-row weight only weakens the bound; fold it away
    if lam[j] > 0:
        own = lam[j]
        lam[j] = 0.0
        lam = lam / (1.0 + own)
    if polish:
        lam = polish_column(P, lam, -P.A[:, j])
    new = float(-(P.u @ lam))
    # a bound (numerically) at u_j is at best a weak certificate; never install it
    if new >= P.u[j] - 1e-9 * (1.0 + abs(P.u[j])):
        x = lam.copy()
        x[j] += 1.0
        return Certificate(x, Kind.ONE_SIDED)
    if not new > bs.l[j]:
        return bs
    bs.Lam[:, j] = lam
    bs.l[j] = new
    return bs


__all__ = [
    "BoundState", "DualVector", "InfeasibleEvidence", "theta", "bound_from_ellipsoid",
    "zero_jth_component", "nonnegativize", "best_lower_bound", "old_style_bound",
    "accept_bound", "polish_column",
]
