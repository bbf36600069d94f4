"""Cut depths and the critical step sizes along ``d_+(sigma)``.

With f = 1, moving d to ``d + sigma/((1 - sigma) gamma_j^2) e_j`` gives

    f_+    = zeta(sigma) = 1 - alpha*beta*sigma + (beta - alpha)^2/4 * sigma^2/(1 - sigma)
    p_+    = p + ln(1 - sigma)

where ``alpha = (a_j^T ybar - u_j)/gamma_j`` and ``beta = (a_j^T ybar - l_j)/gamma_j``.
Everything here is a pure function of (alpha, beta) plus a dimension.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

from .errors import Degenerate, DegenerateDirection

ALPHA_BETA_SUM_EPS = 1e-12


@dataclass(frozen=True)
class CutDepths:
    alpha: float
    beta: float
    gamma: float

    @property
    def misses(self) -> bool:
        """The upper-bound hyperplane misses the ellipsoid entirely."""
        return self.alpha > 1.0


def cut_depths(st, j: int) -> CutDepths:
    """Depths of row j's two cuts, measured in semi-widths of E."""
    from .ellipsoid import exact_h

    g2 = st.f * exact_h(st, j)
    if not g2 > 0:
        raise DegenerateDirection(f"gamma_{j}^2 = {g2}")
    g = math.sqrt(g2)
    sj = float(st.s[j])
    return CutDepths((sj - st.u[j]) / g, (sj - st.l[j]) / g, g)


def zeta(alpha: float, beta: float, sigma: float) -> float:
    return 1.0 - alpha * beta * sigma + 0.25 * (beta - alpha) ** 2 * sigma * sigma / (1.0 - sigma)


def eta(alpha: float, beta: float, sigma: float, dim: int) -> float:
    """Change in ``dim * ln f + p`` produced by the step sigma."""
    z = zeta(alpha, beta, sigma)
    if z <= 0:
        return -math.inf
    return dim * math.log(z) + math.log1p(-sigma)


def sigma_zero(dj: float, gamma_j: float, eps: float = 1e-12) -> float:
    """Step that takes d_j exactly to zero: ``-d_j gamma_j^2 / (1 - d_j gamma_j^2)``."""
    if dj == 0.0:
        return 0.0
    q = dj * gamma_j * gamma_j
    if q >= 1.0 - eps:
        raise Degenerate("dropping row j would make A D A^T singular")
    return -q / (1.0 - q)


def sigma_zeta(alpha: float, beta: float) -> Optional[float]:
    """Root of zeta closest to zero, when one is a valid step (alpha < -1 < 1 < beta).

    Evaluated as 2 / (1 + alpha*beta - sqrt((1 - alpha^2)(1 - beta^2))), which is
    the product-of-roots form of the closer root and reduces to
    1/(1 - alpha^2) when alpha + beta = 0.
    """
    if not (alpha < -1.0 and beta > 1.0):
        return None
    root = math.sqrt((1.0 - alpha * alpha) * (1.0 - beta * beta))
    return 2.0 / (1.0 + alpha * beta - root)


def sigma_eta(alpha: float, beta: float, dim: int) -> float:
    """Stationary point of ``dim * ln zeta(sigma) + ln(1 - sigma)``.

    The derivative is a positive multiple of
    ``-(dim+1) s^2 sigma^2 + (2 dim s^2 + 4(1 + ab)) sigma - 4(1 + dim ab)``
    with ``s = alpha + beta``; we return its smaller root.
    """
    ab = alpha * beta
    s = alpha + beta
    s2 = s * s
    lin = 1.0 + dim * ab
    if abs(s) <= ALPHA_BETA_SUM_EPS:
        den = 1.0 + ab
        if den == 0.0:
            return -math.inf
        return lin / den
    rho = math.sqrt(4.0 * (1.0 - alpha * alpha) * (1.0 - beta * beta)
                    + dim * dim * (beta * beta - alpha * alpha) ** 2)
    b = 2.0 * (1.0 + ab) + dim * s2
    if b > 0:
        # product of the two roots is 4 lin / ((dim+1) s^2); avoids cancellation
        return 4.0 * lin / (b + rho)
    return (b - rho) / ((dim + 1) * s2)


def decrease_eligible(alpha: float, beta: float, n: int) -> bool:
    return alpha * beta <= -2.0 / n and max(alpha, -beta) <= -2.0 / n


class StepCase(str, enum.Enum):
    INCREASE = "increase"
    DECREASE = "decrease"
    DROP = "drop"
    CERTIFY = "certify"


@dataclass(frozen=True)
class SigmaMenu:
    sigma0: float
    sigma_zeta: Optional[float]
    sigma_eta: float
    case: StepCase

    @property
    def sigma(self) -> float:
        if self.case == StepCase.CERTIFY:
            return self.sigma_zeta
        if self.case == StepCase.DROP:
            return self.sigma0
        return self.sigma_eta


def plan_decrease(dj: float, depths: CutDepths, n: int) -> SigmaMenu:
    """Pick among the certify / drop / decrease steps for a well-satisfied row."""
    a, b = depths.alpha, depths.beta
    s0 = sigma_zero(dj, depths.gamma)
    sz = sigma_zeta(a, b)
    se = sigma_eta(a, b, n)
    if sz is not None and sz >= s0:
        case = StepCase.CERTIFY
    elif se <= s0:
        case = StepCase.DROP
    else:
        case = StepCase.DECREASE
    return SigmaMenu(s0, sz, se, case)


def plan_increase(depths: CutDepths, dim: int) -> SigmaMenu:
    se = sigma_eta(depths.alpha, depths.beta, dim)
    return SigmaMenu(0.0, None, se, StepCase.INCREASE)
