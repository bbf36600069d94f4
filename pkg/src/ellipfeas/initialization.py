"""Turning ``A^T y <= u`` into a bounded system the ellipsoid loops can start from.

Three schemes:

* big-M: add ``-M e <= y <= M e``;
* Freund-Vera: homogenise with an extra variable ``eta`` and bound everything by 1;
* two-phase: solve ``A^T y <= 0, -e <= y <= e`` first, then restart on the
  original rows with bounds read off the phase-1 multipliers.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import solver as sv
from .bounds import BoundState, polish_column
from .errors import InvalidInput, Unsupported
from .problem import Certificate, Kind, Outcome, Problem, Status, is_feasible, verify_certificate

ORIGINAL, BOUND, HOMOG = "original", "bound", "homog"


def _box_columns(n: int) -> np.ndarray:
    return np.hstack([np.eye(n), -np.eye(n)])


def _box_lambda(A: np.ndarray, m_off: int, total: int) -> np.ndarray:
    """Multipliers certifying ``a_j^T y >= -M ||a_j||_1`` from the box rows.

    Box row ``k`` is ``y_k <= M`` and row ``n + k`` is ``-y_k <= M``; a
    positive ``a_kj`` is cancelled by the ``-y_k`` row and vice versa.
    """
    n, m = A.shape
    Lam = np.zeros((total, m))
    pos = np.maximum(A, 0.0)
    neg = np.maximum(-A, 0.0)
    Lam[m_off + n: m_off + 2 * n, :] = pos
    Lam[m_off: m_off + n, :] = neg
    return Lam


@dataclass
class InitResult:
    setup: sv.Setup
    mode: str
    meta: dict = field(default_factory=dict)

    @property
    def P(self) -> Problem:
        return self.setup.P

    @property
    def bs(self) -> BoundState:
        return self.setup.bs

    @property
    def d0(self) -> np.ndarray:
        return self.setup.d0


def big_m(P: Problem, M: float = 1e4, eps_feas: Optional[float] = None) -> InitResult:
    if not M > 0:
        raise InvalidInput("M must be positive")
    n, m = P.n, P.m
    A = np.hstack([P.A, _box_columns(n)])
    u = np.concatenate([P.u, np.full(2 * n, float(M))])
    mm = m + 2 * n
    Lam = np.zeros((mm, mm))
    Lam[:, :m] = _box_lambda(P.A, m, mm)
    for k in range(n):
        Lam[m + n + k, m + k] = 1.0
        Lam[m + k, m + n + k] = 1.0
    Pa = Problem(A, u)
    l = -(u @ Lam)
    kinds = np.array([ORIGINAL] * m + [BOUND] * (2 * n))
    d0 = np.concatenate([np.zeros(m), np.ones(2 * n)])
    eps = P.default_eps_feas() if eps_feas is None else eps_feas
    tol = np.concatenate([np.full(m, eps), np.full(2 * n, np.inf)])
    setup = sv.Setup(Pa, BoundState(l, Lam), d0, kinds, tol, meta={"M": M})
    return InitResult(setup, "bigm", {"M": M, "m": m})


# -- weak certificates ----------------------------------------------------

one_sided_from_state = sv.one_sided_from_state


def clean_original(P: Problem, x: np.ndarray) -> np.ndarray:
    """Nonnegative ``x`` moved closer to ``A x = 0`` without leaving its support."""
    return polish_column(P, np.maximum(x, 0.0), np.zeros(P.n), sweeps=3)


@dataclass
class WeakHit:
    status: Status
    x: np.ndarray
    xi: float = 0.0


def _bound_share(xh: np.ndarray, kinds: np.ndarray) -> float:
    tot = float(np.sum(xh))
    return float(np.sum(xh[kinds == BOUND])) / tot if tot > 0 else np.inf


def extract_fv_outcome(xh: np.ndarray, P: Problem, meta: dict, eps_w: float = 1e-6,
                       eps_cert: float = 1e-8) -> Optional[WeakHit]:
    """Read ``(x, xi)`` off an augmented multiplier.

    Any part on the original rows that verifies after cleaning is a genuine
    certificate.  Otherwise, with (relatively) no weight on the artificial
    bounds and ``xi`` near zero, it is a weak certificate.  None otherwise.
    """
    m = P.m
    xo = xh[:m]
    xi = float(xh[meta["eta_row"]])
    if np.any(xo > 0) and float(P.u @ xo) < 0:
        x = clean_original(P, xo)
        if verify_certificate(P, None, Certificate(x, Kind.ONE_SIDED), eps_cert):
            return WeakHit(Status.INFEASIBLE, x, xi)
    if _bound_share(xh, meta["kinds"]) <= eps_w and xi <= eps_w * float(np.sum(xh)) and np.any(xo > 0):
        return WeakHit(Status.WEAK, clean_original(P, xo), xi)
    return None


def freund_vera(P: Problem, eps_feas: Optional[float] = None, eps_eta: float = 1e-7,
                eps_w: float = 1e-6) -> InitResult:
    """Rows: ``[a_i; -u_i]`` (m), ``-eta <= 0``, ``+-y_k <= 1`` (2n), ``eta <= 1``."""
    n, m = P.n, P.m
    N = n + 1
    cols = [np.vstack([P.A, -P.u[None, :]])]
    e_eta = np.zeros((N, 1))
    e_eta[n] = 1.0
    cols.append(-e_eta)
    box = np.zeros((N, 2 * n))
    box[:n] = _box_columns(n)
    cols.append(box)
    cols.append(e_eta)
    A = np.hstack(cols)
    h = m  # the -eta <= 0 row
    top = m + 1 + 2 * n  # the eta <= 1 row
    mm = top + 1
    u = np.concatenate([np.zeros(m + 1), np.ones(2 * n + 1)])
    Lam = np.zeros((mm, mm))
    Lam[:, :m] = _box_lambda(P.A, m + 1, mm)
    Lam[top, :m] = np.maximum(P.u, 0.0)
    Lam[h, :m] = np.maximum(-P.u, 0.0)
    Lam[top, h] = 1.0
    Lam[h, top] = 1.0
    for k in range(n):
        Lam[m + 1 + n + k, m + 1 + k] = 1.0
        Lam[m + 1 + k, m + 1 + n + k] = 1.0
    Pa = Problem(A, u)
    l = -(u @ Lam)
    kinds = np.array([ORIGINAL] * m + [HOMOG] + [BOUND] * (2 * n + 1))
    d0 = np.concatenate([np.zeros(m + 1), np.ones(2 * n + 1)])
    eps = P.default_eps_feas() if eps_feas is None else eps_feas

    def row_tol(ybar):
        eta = float(ybar[n])
        t = np.full(mm, np.inf)
        t[:m] = eps * max(eta, 0.0)
        t[h] = -eps_eta  # -eta <= 0 counts as violated until eta >= eps_eta
        return t

    meta = {"kinds": kinds, "eta_row": h, "n": n, "m": m, "eps_eta": eps_eta}

    def hook(st, bs, xh):
        return extract_fv_outcome(xh, P, meta, eps_w)

    setup = sv.Setup(Pa, BoundState(l, Lam), d0, kinds, row_tol, hook=hook, meta=meta)
    return InitResult(setup, "fv", meta)


# -- mapping results back ---------------------------------------------------

def _outcome(status, P, res: sv.RunResult, **kw) -> Outcome:
    return Outcome(status, P, raw=res.raw, raw_problem=res.P, raw_lower=res.lower,
                   stats=res.stats, trace=res.trace, message=kw.pop("message", res.message), **kw)


def _original_certificate(P: Problem, xh: np.ndarray, eps_cert: float):
    if xh is None or not np.any(xh[: P.m] > 0):
        return None
    x = clean_original(P, xh[: P.m])
    c = Certificate(x, Kind.ONE_SIDED)
    return c if verify_certificate(P, None, c, eps_cert) else None


def map_bigm(P: Problem, ir: InitResult, res: sv.RunResult, cfg: sv.SolverConfig) -> Outcome:
    if res.status == Status.FEASIBLE:
        return _outcome(Status.FEASIBLE, P, res, y=res.y)
    if res.status == Status.INFEASIBLE:
        xh = res.certificate.x if res.certificate is not None else None
        c = _original_certificate(P, xh, cfg.eps_cert)
        if c is not None:
            return _outcome(Status.INFEASIBLE, P, res, certificate=c)
        return _outcome(Status.AMBIGUOUS, P, res, message="certificate relies on the artificial box")
    return _outcome(res.status, P, res)


def map_fv(P: Problem, ir: InitResult, res: sv.RunResult, cfg: sv.SolverConfig) -> Outcome:
    n = P.n
    if res.status == Status.FEASIBLE:
        eta = float(res.y[n])
        if eta > cfg.eps_eta:
            y = res.y[:n] / eta
            if is_feasible(P, y, cfg.eps_feas):
                return _outcome(Status.FEASIBLE, P, res, y=y)
        return _outcome(Status.AMBIGUOUS, P, res, message=f"homogeneous point with eta = {eta:.3e}")
    hit = res.hook_value
    if res.status == Status.INFEASIBLE and res.certificate is not None:
        hit = extract_fv_outcome(res.certificate.x, P, ir.meta, cfg.eps_w, cfg.eps_cert)
        if hit is None:
            return _outcome(Status.AMBIGUOUS, P, res, message="certificate relies on the artificial box")
    if isinstance(hit, WeakHit):
        c = Certificate(hit.x, Kind.ONE_SIDED)
        if hit.status == Status.INFEASIBLE:
            return _outcome(Status.INFEASIBLE, P, res, certificate=c, message=f"xi = {hit.xi:.3e}")
        return _outcome(Status.WEAK, P, res, certificate=c, message=f"weak certificate, xi = {hit.xi:.3e}")
    return _outcome(res.status, P, res)


# -- two-phase --------------------------------------------------------------

def phase_one(P: Problem, delta: float = 1e-7) -> InitResult:
    n, m = P.n, P.m
    ir = big_m(Problem(P.A, np.zeros(m)), 1.0)
    norms = np.linalg.norm(P.A, axis=0)
    tol = np.concatenate([-delta * norms, np.full(2 * n, np.inf)])
    ir.setup.row_tol = tol
    return InitResult(ir.setup, "phase1", {"delta": delta})


def scale_phase_one_point(P: Problem, y: np.ndarray) -> Optional[np.ndarray]:
    """Stretch ``y`` with ``A^T y < 0`` until ``A^T y <= u``."""
    s = P.A.T @ y
    delta = float(-np.max(s))
    if not delta > 0:
        return None
    c = max(1.0, float(np.max(-P.u)) / delta + 1.0)
    return c * y


def phase_two_setup(P: Problem, x: np.ndarray, d: np.ndarray, eps_feas: Optional[float] = None) -> sv.Setup:
    """Lower bounds from ``A x = 0, x >= 0``: row j gets ``lambda = x_{-j} / x_j``."""
    m = P.m
    Lam = np.zeros((m, m))
    l = np.full(m, -np.inf)
    for j in np.flatnonzero(x > 0):
        col = x / x[j]
        col[j] = 0.0
        Lam[:, j] = col
        l[j] = -float(P.u @ col)
    eps = P.default_eps_feas() if eps_feas is None else eps_feas
    kinds = np.array([ORIGINAL] * m)
    return sv.Setup(P, BoundState(l, Lam), d.copy(), kinds, np.full(m, eps), meta={"phase": 2})


def two_phase(P: Problem, cfg: Optional[sv.SolverConfig] = None, callback=None) -> Outcome:
    cfg = cfg or sv.SolverConfig()
    if cfg.algorithm != "sea":
        raise Unsupported("the two-phase method is used with the SEA only")
    n, m = P.n, P.m
    ir = phase_one(P, cfg.phase1_delta)
    kinds = ir.setup.kinds
    rel = 1e-9

    def hook(st, bs, xh):
        if not np.any(xh[:m] > 0):
            return None
        if float(P.u @ xh[:m]) < 0:
            c = _original_certificate(P, xh, cfg.eps_cert)
            if c is not None:
                return WeakHit(Status.INFEASIBLE, c.x)
        if _bound_share(xh, kinds) > cfg.eps_w:
            return None
        x = clean_original(P, xh[:m])
        pos = st.d > 0
        if np.any(pos[m:]):
            return None
        if np.any(pos[:m] & ~(x > rel * np.max(x))):
            return None
        return WeakHit(Status.WEAK, x)

    ir.setup.hook = hook
    r1 = sv.run(ir.setup, cfg, callback)
    stats = r1.stats
    if r1.status == Status.FEASIBLE:
        y = scale_phase_one_point(P, r1.y[:n])
        if y is not None and is_feasible(P, y, cfg.eps_feas):
            return Outcome(Status.FEASIBLE, P, y=y, stats=stats, trace=r1.trace, message="phase 1 interior point")
        return Outcome(Status.AMBIGUOUS, P, stats=stats, trace=r1.trace, message="phase-1 point does not scale")
    if r1.status == Status.ITERATION_LIMIT:
        return Outcome(Status.AMBIGUOUS, P, stats=stats, trace=r1.trace, message="phase 1 hit the iteration limit")
    if r1.status == Status.INFEASIBLE:
        # the phase-1 system always contains 0; a certificate here is numerical noise
        return Outcome(Status.NUMERICAL_FAILURE, P, stats=stats, trace=r1.trace, message="phase 1 reported infeasible")
    if r1.status != Status.WEAK:
        return Outcome(r1.status, P, stats=stats, trace=r1.trace, message=r1.message)
    hit = r1.hook_value
    if hit.status == Status.INFEASIBLE:
        return Outcome(Status.INFEASIBLE, P, certificate=Certificate(hit.x, Kind.ONE_SIDED),
                       stats=stats, trace=r1.trace, message="phase-1 multiplier certifies")
    x = np.where(hit.x > rel * np.max(hit.x), hit.x, 0.0)
    d = r1.state.d[:m].copy()
    setup = phase_two_setup(P, x, d, cfg.eps_feas)
    if np.any(setup.bs.l[d > 0] >= P.u[d > 0]):
        return Outcome(Status.WEAK, P, certificate=Certificate(x, Kind.ONE_SIDED), stats=stats,
                       trace=r1.trace, message="phase-1 multiplier has u^T x = 0")
    r2 = sv.run(setup, cfg, callback)
    stats = stats.merge(r2.stats)
    trace = r1.trace + r2.trace
    if r2.status == Status.INFEASIBLE and r2.certificate is None:
        return Outcome(Status.NUMERICAL_FAILURE, P, raw=r2.raw, raw_problem=P, raw_lower=r2.lower,
                       stats=stats, trace=trace, message="two-sided certificate could not be converted")
    return Outcome(r2.status, P, y=r2.y, certificate=r2.certificate, raw=r2.raw, raw_problem=P,
                   raw_lower=r2.lower, stats=stats, trace=trace, message="phase 2: " + r2.message)


def initialize(P: Problem, init: str, cfg: sv.SolverConfig) -> InitResult:
    if init == "bigm":
        return big_m(P, cfg.M, cfg.eps_feas)
    if init == "fv":
        return freund_vera(P, cfg.eps_feas, cfg.eps_eta, cfg.eps_w)
    raise InvalidInput(f"unknown initialization {init!r}")


def solve(P: Problem, init: str = "bigm", cfg: Optional[sv.SolverConfig] = None, callback=None) -> Outcome:
    """Run the configured algorithm on ``A^T y <= u``; never raises for numerical trouble."""
    cfg = cfg or sv.SolverConfig()
    if init == "twophase":
        return two_phase(P, cfg, callback)
    ir = initialize(P, init, cfg)
    res = sv.run(ir.setup, cfg, callback)
    if init == "bigm":
        return map_bigm(P, ir, res, cfg)
    return map_fv(P, ir, res, cfg)


__all__ = [
    "InitResult", "big_m", "freund_vera", "extract_fv_outcome", "two_phase", "phase_one",
    "phase_two_setup", "scale_phase_one_point", "solve", "initialize", "WeakHit",
]
