"""Iteration loops for the standard (SEA) and oblivious (OEA) ellipsoid algorithms.

Both loops work on an augmented problem produced by :mod:`ellipfeas.initialization`
and report a :class:`RunResult` on that problem; mapping back to the user's
system happens in the initialization layer.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from . import bounds as bd
from . import ellipsoid as ell
from . import steps
from .errors import Degenerate, DegenerateDirection, EllipfeasError, NotPositiveDefinite
from .problem import Certificate, Kind, Problem, Stats, Status, convert_to_one_sided, verify_certificate


@dataclass
class SolverConfig:
    algorithm: str = "sea"
    max_iter: Optional[int] = None
    eps_feas: Optional[float] = None
    eps_cert: float = 1e-8
    eps_f: float = 1e-10
    refactor_drift: float = 1e-7
    refactor_every: int = 500
    dim_for_eta: Optional[str] = None
    rng_seed: int = 0
    bound_rule: str = "best"
    allow_decrease: bool = True
    M: float = 1e4
    eps_eta: float = 1e-7
    eps_w: float = 1e-6
    phase1_delta: float = 1e-7
    debug: bool = False
    record_trace: bool = True

    def __post_init__(self):
        if self.algorithm not in ("sea", "oea"):
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.bound_rule not in ("best", "old"):
            raise ValueError(f"unknown bound rule {self.bound_rule!r}")
        if self.max_iter is not None and self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        for name in ("eps_cert", "eps_f", "refactor_drift", "eps_eta", "eps_w"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    def iteration_cap(self, n: int, m: int) -> int:
        if self.max_iter is not None:
            return self.max_iter
        return int(math.ceil(200 * n * math.log(n + m)))

    def eta_dim(self, P: Problem) -> int:
        which = self.dim_for_eta or ("m" if self.algorithm == "oea" else "n")
        return P.m if which == "m" else P.n


@dataclass
class IterationTrace:
    it: int
    j: int
    kind: str
    sigma: float
    f: float
    g: float
    violated: int
    g_before: float = float("nan")
    alpha: float = float("nan")
    beta: float = float("nan")
    eligible: bool = False
    pareto_a: bool = False
    pareto_d: bool = False

    FIELDS = ("it", "j", "kind", "sigma", "f", "g", "violated")

    def csv_row(self) -> str:
        return ",".join(repr(getattr(self, k)) if isinstance(getattr(self, k), float)
                        else str(getattr(self, k)) for k in self.FIELDS)


@dataclass
class Setup:
    """What a run needs: the system iterated on, its bounds, and a start.

    ``row_tol`` gives, per row, how far ``a_i^T ybar - u_i`` may exceed zero
    before the row counts as violated; it may depend on ``ybar``.  ``kinds``
    labels rows as ``original``, ``bound`` or ``homog``.  ``hook`` is called
    once per iteration and may stop the run by returning a non-None value.
    """

    P: Problem
    bs: bd.BoundState
    d0: np.ndarray
    kinds: np.ndarray
    row_tol: object
    hook: Optional[Callable] = None
    meta: dict = field(default_factory=dict)

    def tol(self, ybar) -> np.ndarray:
        t = self.row_tol
        return t(ybar) if callable(t) else t


@dataclass
class RunResult:
    status: Status
    P: Problem
    y: Optional[np.ndarray] = None
    certificate: Optional[Certificate] = None  # one-sided, on P
    raw: Optional[Certificate] = None  # two-sided, on P with ``lower``
    lower: Optional[np.ndarray] = None
    hook_value: object = None
    state: Optional[ell.EllipsoidState] = None
    bs: Optional[bd.BoundState] = None
    stats: Stats = field(default_factory=Stats)
    trace: List[IterationTrace] = field(default_factory=list)
    message: str = ""


H_DRIFT = 1e-6
SIGMA_CAP = 1.0 - 1e-3


def _unit_depth_bound(st, j: int) -> float:
    """The l_j that a Pareto bound raise would leave at depth beta = 1.

    With the centre on a_j^T y = u_j, raising l_j to L scales d_j by
    (u_j - l_j)/(u_j - L), so w = u_j - L solves
    (1 - q) w^2 + q w0 w - f h_j = 0 with q = d_j h_j and w0 = u_j - l_j.
    """
    h = float(st.h[j])
    q = st.d[j] * h
    if not q < 1.0 - 1e-12:
        return -math.inf
    w0 = st.u[j] - st.l[j]
    w = (-q * w0 + math.sqrt((q * w0) ** 2 + 4.0 * (1.0 - q) * st.f * h)) / (2.0 * (1.0 - q))
    return float(st.u[j] - w)


class _Stop(Exception):
    def __init__(self, result: RunResult):
        self.result = result


# -- certificates --------------------------------------------------------

def polish_one_sided(P: Problem, x: np.ndarray, eps_cert: float = 1e-8) -> np.ndarray:
    """Project a nonnegative certificate closer to ``null(A)`` on its support."""
    out = bd.polish_column(P, np.maximum(np.asarray(x, float), 0.0), np.zeros(P.n), sweeps=3)
    c = Certificate(out, Kind.ONE_SIDED)
    if verify_certificate(P, None, c, eps_cert) or not verify_certificate(P, None, Certificate(x, Kind.ONE_SIDED), eps_cert):
        return out
    return np.asarray(x, float)


def _infeasible(P, bs, cert: Certificate, cfg, why: str) -> RunResult:
    """Package a certificate (either kind) as a terminal result."""
    if cert.kind == Kind.TWO_SIDED:
        if not verify_certificate(P, bs.l, cert, cfg.eps_cert):
            return None
        one = convert_to_one_sided(P, bs.l, cert, bs.Lam, cfg.eps_cert)
        raw = cert
    else:
        one, raw = cert, None
    one = Certificate(polish_one_sided(P, one.x, cfg.eps_cert), Kind.ONE_SIDED)
    if not verify_certificate(P, None, one, cfg.eps_cert):
        if raw is None:
            return None
        return RunResult(Status.INFEASIBLE, P, raw=raw, lower=bs.l.copy(), message=why + " (two-sided only)")
    return RunResult(Status.INFEASIBLE, P, certificate=one, raw=raw,
                     lower=None if raw is None else bs.l.copy(), message=why)


def one_sided_from_state(st, bs) -> Optional[np.ndarray]:
    """``x_+ + Lambda x_-`` for ``x = D tbar`` (None when x vanishes)."""
    x = st.dt()
    if not np.any(x):
        return None
    neg = x < 0
    out = np.maximum(x, 0.0)
    if np.any(neg):
        out = out + bs.Lam[:, neg] @ (-x[neg])
    return out


# -- index selection -------------------------------------------------------

def _ratios(st, res) -> np.ndarray:
    g = ell.gammas(st)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(g > 0, res / np.where(g > 0, g, 1.0), np.sign(res) * np.inf)


def select_indices_sea(st, tol):
    """``(j_max, j_min)``: most violated row by ``res/gamma``, and the
    least-violated row among those with positive weight (None if d = 0)."""
    res = st.s - st.u
    ratio = _ratios(st, res)
    viol = res > tol
    jmax = None
    if np.any(viol):
        jmax = int(np.flatnonzero(viol)[np.argmax(ratio[viol])])
    act = st.d > 0
    jmin = None
    if np.any(act):
        jmin = int(np.flatnonzero(act)[np.argmin(ratio[act])])
    return jmax, jmin


def select_index_oea(st, tol):
    res = st.s - st.u
    viol = res > tol
    if not np.any(viol):
        return None
    norms = np.linalg.norm(st.P.A, axis=0)
    score = res / norms
    return int(np.flatnonzero(viol)[np.argmax(score[viol])])


def clipped_products(dmax: Optional[steps.CutDepths], dmin: Optional[steps.CutDepths]):
    pmax = None if dmax is None else min(1.0, dmax.alpha) * min(1.0, dmax.beta)
    pmin = None if dmin is None else max(-1.0, dmin.alpha) * min(1.0, dmin.beta)
    return pmax, pmin


def choose_step_sea(n: int, dmax: Optional[steps.CutDepths], dmin: Optional[steps.CutDepths]) -> str:
    """``increase`` or ``decrease`` by distance of the clipped products from -1/n."""
    if dmin is None or not steps.decrease_eligible(dmin.alpha, dmin.beta, n):
        return "increase" if dmax is not None else "none"
    if dmax is None:
        return "decrease"
    pmax, pmin = clipped_products(dmax, dmin)
    target = -1.0 / n
    return "increase" if abs(pmax - target) >= abs(pmin - target) else "decrease"


def _drop_ok(st, j, n) -> Optional[steps.CutDepths]:
    try:
        dep = steps.cut_depths(st, j)
        if not steps.decrease_eligible(dep.alpha, dep.beta, n):
            return None
        s0 = steps.sigma_zero(st.d[j], dep.gamma)
    except (Degenerate, DegenerateDirection):
        return None
    z = steps.zeta(dep.alpha, dep.beta, s0)
    if not z > 0 or steps.eta(dep.alpha, dep.beta, s0, n) > 0:
        return None
    return dep


# -- the loop --------------------------------------------------------------

class _Runner:
    def __init__(self, setup: Setup, cfg: SolverConfig, callback=None):
        self.setup = setup
        self.cfg = cfg
        self.P = setup.P
        self.bs = setup.bs.copy()
        self.callback = callback
        self.stats = Stats()
        self.trace: List[IterationTrace] = []
        self.n = self.P.n
        self.eta_dim = cfg.eta_dim(self.P)
        self.st = None
        self._weak = None  # (j, multiplier) when row j's best bound sat at u_j

    # bookkeeping
    def _emit(self, *args):
        if self.callback is not None:
            self.callback(*args)

    def _result(self, r: RunResult) -> RunResult:
        r.state = self.st
        r.bs = self.bs
        r.stats = self.stats
        r.trace = self.trace
        return r

    def _check_certificate(self, why: str, force: bool = False):
        st = self.st
        out = ell.certificate_from_state(st, self.bs.l, self.cfg.eps_f)
        if isinstance(out, ell.FeasiblePoint):
            tol = self.setup.tol(out.y)
            if np.all(self.P.A.T @ out.y - self.P.u <= np.maximum(tol, 0.0)):
                raise _Stop(RunResult(Status.FEASIBLE, self.P, y=out.y, message=why))
            out = None
        if isinstance(out, Certificate):
            r = _infeasible(self.P, self.bs, out, self.cfg, why)
            if r is not None:
                raise _Stop(r)
        if force:
            raise _Stop(RunResult(Status.NUMERICAL_FAILURE, self.P,
                                  message=f"f = {st.f:.3e} without a usable certificate"))

    def _maybe_refactor(self, it: int):
        st = self.st
        drift = abs(ell.f_value(st) - ell.f_crosscheck(st))
        if (drift > self.cfg.refactor_drift * (1.0 + abs(st.f)) or st.h_drift > H_DRIFT
                or (it > 0 and it % self.cfg.refactor_every == 0)):
            try:
                st.refactorize()
            except NotPositiveDefinite as exc:
                raise _Stop(RunResult(Status.NUMERICAL_FAILURE, self.P,
                                      message=f"refactorization failed: {exc}"))
            self.stats.refactorizations += 1
        if self.cfg.debug:
            fresh = ell.build(self.P, st.l, st.d)
            scale = 1.0 + np.max(np.abs(fresh.ybar))
            assert np.max(np.abs(fresh.ybar - st.ybar)) <= 1e-6 * scale
            assert abs(fresh.f - st.f) <= 1e-6 * (1.0 + abs(fresh.f))

    def _call_hook(self, xh):
        """Offer a nonnegative multiplier with ``A x = 0`` to the setup's hook.

        ``None`` means the one built from ``D tbar``.
        """
        if self.setup.hook is None:
            return
        if xh is None:
            xh = one_sided_from_state(self.st, self.bs)
            if xh is None:
                return
        hv = self.setup.hook(self.st, self.bs, xh)
        if hv is not None:
            raise _Stop(RunResult(Status.WEAK, self.P, hook_value=hv, message="hook stop"))

    # bound update on a violated row
    def _improve_bound(self, j: int):
        st, bs = self.st, self.bs
        self._weak = None
        tj = st.s[j] - 0.5 * (st.u[j] + st.l[j])
        if st.d[j] > 0 and not tj > 0:
            return
        if self.cfg.bound_rule == "old":
            dv = bd.old_style_bound(st, j, bs.l)
            if dv is None:
                return
        else:
            dv = bd.best_lower_bound(st, j, bs.l)
            if dv is None:
                return
        if isinstance(dv, bd.InfeasibleEvidence):
            r = _infeasible(self.P, bs, dv.certificate, self.cfg, "bound above upper bound")
            if r is not None:
                raise _Stop(r)
            return
        dv = bd.nonnegativize(dv, bs, st.u)
        old = bs.l[j]
        out = bd.accept_bound(bs, j, dv, self.P)
        if isinstance(out, Certificate):
            r = _infeasible(self.P, bs, out, self.cfg, "bound above upper bound")
            if r is not None:
                raise _Stop(r)
            self._call_hook(out.x)
            self._weak = (j, out.x)
            self._blend_bound(j, out.x)
            return
        assert not bs.l[j] < old, "lower bounds must not decrease"

    def _blend_bound(self, j: int, x: np.ndarray, target: Optional[float] = None):
        """Fallback when the best bound sits at u_j and proves nothing.

        ``x - e_j`` and the stored column both satisfy ``A lam = -a_j``, so a
        convex combination does too; pick the one whose bound is the ellipsoid
        minimum of ``a_j^T y``, which keeps the cut depth beta at 1.
        """
        st, bs = self.st, self.bs
        old = bs.l[j]
        lam_new = np.array(x, dtype=float)
        lam_new[j] -= 1.0
        top = float(-(self.P.u @ lam_new))
        if not (np.isfinite(old) and st.f > 0 and lam_new[j] == 0.0 and top > old):
            return
        if target is None:
            target = float(st.s[j] - ell.gamma(st, j))
        if not old < target < top:
            return
        t = (target - old) / (top - old)
        lam = t * lam_new + (1.0 - t) * bs.Lam[:, j]
        bd.accept_bound(bs, j, bd.DualVector(lam, j, target), self.P, polish=False)

    def _increase(self, j: int, it: int, nviol: int, oea: bool):
        st, bs = self.st, self.bs
        was_zero = st.d[j] == 0.0
        g_start = st.g
        self._improve_bound(j)
        if was_zero:
            if not np.isfinite(bs.l[j]):
                raise _Stop(RunResult(Status.NUMERICAL_FAILURE, self.P,
                                      message=f"no lower bound available for row {j}"))
            st.l[j] = bs.l[j]
            st.refresh()
        pa = pd = False
        if st.s[j] > st.u[j]:
            ell.pareto_center_to_boundary(st, j)
            pa = True
            self.stats.pareto += 1
        if st.d[j] > 0 and bs.l[j] > st.l[j]:
            # measured against the semi-width: after a Pareto move with a far-off
            # l_j the centre lands on u_j only up to cancellation in s_j - l_j
            scale = 1e-9 * (1.0 + abs(st.u[j]) + abs(st.s[j])) + 1e-8 * ell.gamma(st, j)
            if (pa or abs(st.s[j] - st.u[j]) <= scale) and bs.l[j] < st.u[j]:
                ell.pareto_raise_bound(st, j, bs.l[j])
                pd = True
                self.stats.pareto += 1
        if not st.f > 0:
            self._check_certificate("after Pareto step", force=True)
        ell.scale_to_unit_f(st)
        dep = steps.cut_depths(st, j)
        if dep.beta > 1.0 and self._weak is not None and self._weak[0] == j and st.d[j] > 0:
            # the Pareto move shrank the ellipsoid below the blended bound; blend again
            self._blend_bound(j, self._weak[1], _unit_depth_bound(st, j))
            if bs.l[j] > st.l[j]:
                ell.pareto_raise_bound(st, j, bs.l[j])
                pd = True
                dep = steps.cut_depths(st, j)
        if oea:
            sigma = max(2.0 / (self.P.m + 1), steps.sigma_eta(dep.alpha, dep.beta, self.eta_dim))
        else:
            sigma = steps.sigma_eta(dep.alpha, dep.beta, self.eta_dim)
        if not sigma < SIGMA_CAP:
            if not np.isfinite(sigma):
                raise Degenerate(f"step sigma = {sigma} for row {j}")
            # n = 1 central cuts ask for sigma = 1 (infinite weight)
            sigma = SIGMA_CAP
        g_before = st.g
        self._emit("pre", st, j, dep)
        ell.apply_sigma(st, j, sigma)
        self._emit("post", st, j, dep)
        kind = "add" if was_zero else "increase"
        if was_zero:
            self.stats.adds += 1
        else:
            self.stats.increases += 1
        self._record(it, j, kind, sigma, nviol, g_before, dep, pa, pd, g_start=g_start)

    def _decrease(self, j: int, it: int, nviol: int, dep: steps.CutDepths):
        st = self.st
        menu = steps.plan_decrease(st.d[j], dep, self.n)
        g_before = st.g
        self._emit("pre", st, j, dep)
        if menu.case == steps.StepCase.CERTIFY:
            sigma = certify_sigma(dep.alpha, dep.beta, menu.sigma0, menu.sigma_zeta)
            ell.apply_sigma(st, j, sigma)
            self._record(it, j, "certify", sigma, nviol, g_before, dep, eligible=True)
            self._emit("post", st, j, dep)
            self._check_certificate("zero-volume decrease", force=True)
            return
        if menu.case == steps.StepCase.DROP:
            ell.drop(st, j)
            self.stats.drops += 1
            kind, sigma = "drop", menu.sigma0
        else:
            ell.apply_sigma(st, j, menu.sigma_eta)
            self.stats.decreases += 1
            kind, sigma = "decrease", menu.sigma_eta
        self._emit("post", st, j, dep)
        self._record(it, j, kind, sigma, nviol, g_before, dep, eligible=True)

    def _drop(self, j: int, it: int, nviol: int, dep: steps.CutDepths) -> bool:
        st = self.st
        g_before = st.g
        s0 = steps.sigma_zero(st.d[j], dep.gamma)
        try:
            self._emit("pre", st, j, dep)
            ell.drop(st, j)
        except NotPositiveDefinite:
            return False
        self._emit("post", st, j, dep)
        self.stats.drops += 1
        self._record(it, j, "drop", s0, nviol, g_before, dep, eligible=True)
        return True

    def _record(self, it, j, kind, sigma, nviol, g_before, dep, pa=False, pd=False, eligible=False, g_start=None):
        if not self.cfg.record_trace:
            return
        st = self.st
        self.trace.append(IterationTrace(
            it, j, kind, float(sigma), float(st.f), float(st.g) if st.f > 0 else float("-inf"), nviol,
            float(g_before), float(dep.alpha), float(dep.beta), eligible, pa, pd))

    def _sea_step(self, it, tol, nviol):
        st = self.st
        jmax, jmin = select_indices_sea(st, tol)
        dmax = steps.cut_depths(st, jmax) if jmax is not None else None
        if self.cfg.allow_decrease:
            cands = []
            act = st.d > 0
            bnd = act & (self.setup.kinds == "bound")
            if np.any(bnd):
                ratio = _ratios(st, st.s - st.u)
                cands.append(int(np.flatnonzero(bnd)[np.argmin(ratio[bnd])]))
            if jmin is not None and jmin not in cands:
                cands.append(jmin)
            for j in cands:
                dep = _drop_ok(st, j, self.n)
                if dep is not None and self._drop(j, it, nviol, dep):
                    return
            dmin = steps.cut_depths(st, jmin) if jmin is not None else None
            if choose_step_sea(self.n, dmax, dmin) == "decrease":
                try:
                    self._decrease(jmin, it, nviol, dmin)
                    return
                except (NotPositiveDefinite, Degenerate):
                    pass
        self._increase(jmax, it, nviol, oea=False)

    def run(self) -> RunResult:
        t0 = time.perf_counter()
        try:
            try:
                self.st = ell.build(self.P, self.bs.l, self.setup.d0)
            except NotPositiveDefinite as exc:
                return self._result(RunResult(Status.NUMERICAL_FAILURE, self.P, message=str(exc)))
            self.stats.initial_positive = int(np.sum(self.st.d > 0))
            cap = self.cfg.iteration_cap(self.P.n, self.P.m)
            oea = self.cfg.algorithm == "oea"
            for it in range(cap):
                st = self.st
                eps_f = self.cfg.eps_f * (1.0 + abs(float(st.d[st.active] @ st.v[st.active] ** 2)))
                if st.f <= eps_f:
                    self._check_certificate("f nonpositive", force=True)
                ell.scale_to_unit_f(st)
                tol = self.setup.tol(st.ybar)
                res = st.s - st.u
                viol = res > tol
                nviol = int(np.sum(viol))
                self._emit("iter", st, it, None)
                if nviol == 0:
                    raise _Stop(RunResult(Status.FEASIBLE, self.P, y=st.ybar.copy(), message="centre feasible"))
                x = st.dt()
                if np.any(x < 0) or np.any(x > 0):
                    r = _infeasible(self.P, self.bs, Certificate(x, Kind.TWO_SIDED), self.cfg, "D tbar certificate")
                    if r is not None:
                        raise _Stop(r)
                self._call_hook(None)
                self.stats.iterations += 1
                try:
                    if oea:
                        j = select_index_oea(st, tol)
                        self._increase(j, it, nviol, oea=True)
                    else:
                        self._sea_step(it, tol, nviol)
                except NotPositiveDefinite as exc:
                    try:
                        st.refactorize()
                        self.stats.refactorizations += 1
                        continue
                    except NotPositiveDefinite:
                        raise _Stop(RunResult(Status.NUMERICAL_FAILURE, self.P, message=str(exc)))
                self._maybe_refactor(it + 1)
            return self._result(RunResult(Status.ITERATION_LIMIT, self.P, message=f"{cap} iterations"))
        except _Stop as stop:
            return self._result(stop.result)
        except EllipfeasError as exc:
            return self._result(RunResult(Status.NUMERICAL_FAILURE, self.P, message=f"{type(exc).__name__}: {exc}"))
        finally:
            self.stats.wall_time = time.perf_counter() - t0


def certify_sigma(alpha: float, beta: float, sigma0: float, sigma_z: float) -> float:
    """A step with ``zeta < 0`` inside ``[sigma0, sigma_zeta]`` when one exists.

    Between the two roots of zeta the aggregate has negative right-hand side,
    which is a certificate outright; stopping exactly at ``sigma_zeta`` leaves
    f = 0 and forces the perturbation route.
    """
    s = alpha + beta
    if abs(s) > steps.ALPHA_BETA_SUM_EPS:
        other = 4.0 / (s * s * sigma_z)
        mid = 0.5 * (sigma_z + other)
    else:
        mid = 2.0 * sigma_z
    sig = max(sigma0, mid)
    if steps.zeta(alpha, beta, sig) < 0:
        return sig
    return sigma_z


def run(setup: Setup, cfg: Optional[SolverConfig] = None, callback=None) -> RunResult:
    """Iterate on ``setup.P`` until a terminal status.

    ``callback(event, state, j, depths)`` sees each iteration (``"iter"``)
    and the state around each main step (``"pre"``/``"post"``).
    """
    return _Runner(setup, cfg or SolverConfig(), callback).run()


def write_trace(trace: List[IterationTrace], fh) -> None:
    fh.write(",".join(IterationTrace.FIELDS) + "\n")
    for rec in trace:
        fh.write(rec.csv_row() + "\n")


__all__ = [
    "SolverConfig", "Setup", "RunResult", "IterationTrace", "run", "select_indices_sea",
    "select_index_oea", "choose_step_sea", "clipped_products", "certify_sigma", "polish_one_sided",
    "write_trace", "one_sided_from_state",
]
