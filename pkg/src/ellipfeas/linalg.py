"""Dense Cholesky factor with rank-one update/downdate.

The solver never forms ``(A D A^T)^{-1}``; every product with it goes through
:func:`solve` on the lower-triangular factor kept here.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.linalg import solve_triangular

from .errors import DowndateIndefinite, NotPositiveDefinite

PD_REL_FLOOR = 1e-12


@njit(cache=True)
def _chol_modify(L, x, sign, floor):
    """In-place update (sign=+1) or hyperbolic downdate (sign=-1) of L.

    ``x`` already carries the sqrt(|c|) scaling and is overwritten.
    Returns False if a downdate pivot drops to ``floor`` or below.
    """
    n = L.shape[0]
    for k in range(n):
        lkk = L[k, k]
        r2 = lkk * lkk + sign * x[k] * x[k]
        if r2 <= floor:
            return False
        r = np.sqrt(r2)
        c = r / lkk
        s = x[k] / lkk
        L[k, k] = r
        for i in range(k + 1, n):
            L[i, k] = (L[i, k] + sign * s * x[i]) / c
            x[i] = c * x[i] - s * L[i, k]
    return True


@dataclass
class CholFactor:
    """Lower-triangular ``L`` with ``L @ L.T`` equal to the factored matrix.

    ``diag`` tracks the diagonal of the factored matrix so the pivot floor
    stays relative to its scale across updates.
    """

    L: np.ndarray
    diag: np.ndarray

    @property
    def n(self) -> int:
        return self.L.shape[0]

    @property
    def floor(self) -> float:
        return PD_REL_FLOOR * float(np.max(self.diag))

    def copy(self) -> "CholFactor":
        return CholFactor(self.L.copy(), self.diag.copy())

    def scale(self, c: float) -> None:
        """Factor of ``c * S`` in place (c > 0)."""
        self.L *= np.sqrt(c)
        self.diag *= c

    def reconstruct(self) -> np.ndarray:
        return self.L @ self.L.T


def factorize(S: np.ndarray) -> CholFactor:
    S = np.asarray(S, dtype=float)
    n = S.shape[0]
    if S.shape != (n, n):
        raise ValueError("factorize needs a square matrix")
    diag = np.diag(S).copy()
    floor = PD_REL_FLOOR * max(float(np.max(diag)) if n else 0.0, 0.0)
    if n and np.max(diag) <= 0:
        raise NotPositiveDefinite("matrix has no positive diagonal entry")
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None
    if n and np.min(np.diag(L)) ** 2 <= floor:
        raise NotPositiveDefinite("pivot below positive-definiteness floor")
    return CholFactor(np.ascontiguousarray(L), diag)


def solve(F: CholFactor, b: np.ndarray) -> np.ndarray:
    """Return ``S^{-1} b`` by forward and back substitution."""
    z = solve_triangular(F.L, b, lower=True, check_finite=False)
    return solve_triangular(F.L, z, lower=True, trans="T", check_finite=False)


def forward(F: CholFactor, b: np.ndarray) -> np.ndarray:
    """Return ``L^{-1} b`` (b may be a matrix)."""
    return solve_triangular(F.L, b, lower=True, check_finite=False)


def rank_one_modify(F: CholFactor, w: np.ndarray, c: float, inplace: bool = False) -> CholFactor:
    """Factor of ``S + c w w^T``.

    Raises DowndateIndefinite when ``c < 0`` and the result is not safely
    positive definite; ``F`` is left untouched in that case.
    """
    out = F if inplace else F.copy()
    if c == 0.0:
        return out
    w = np.asarray(w, dtype=float)
    new_diag = out.diag + c * w * w
    floor = PD_REL_FLOOR * float(np.max(new_diag))
    x = np.sqrt(abs(c)) * w
    if c > 0:
        _chol_modify(out.L, x, 1.0, -1.0)
    else:
        L = out.L.copy()
        ok = _chol_modify(L, x, -1.0, floor)
        if not ok:
            raise DowndateIndefinite("rank-one downdate lost positive definiteness")
        out.L[...] = L
    out.diag = new_diag
    return out


def log_det(F: CholFactor) -> float:
    return 2.0 * float(np.sum(np.log(np.diag(F.L))))
