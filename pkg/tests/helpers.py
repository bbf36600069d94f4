"""Random states and brute-force oracles shared by the tests."""
import math

import numpy as np
from scipy.optimize import minimize

from ellipfeas import ellipsoid as ell
from ellipfeas.problem import Problem


def random_state(seed, n=2, m=5, zero_frac=0.0, unit=True):
    """A state whose ellipsoid contains a known point ``y0`` (so f > 0)."""
    rng = np.random.default_rng(seed)
    while True:
        A = rng.normal(size=(n, m))
        y0 = rng.normal(size=n)
        u = A.T @ y0 + rng.uniform(0.2, 2.0, m)
        l = A.T @ y0 - rng.uniform(0.2, 2.0, m)
        d = rng.uniform(0.2, 2.0, m)
        if zero_frac:
            d[rng.uniform(size=m) < zero_frac] = 0.0
        if np.linalg.matrix_rank((A * d) @ A.T) < n:
            continue
        st = ell.build(Problem(A, u), l, d)
        if unit:
            ell.scale_to_unit_f(st)
        return st, y0


def box_state(d=(0.5, 0.5)):
    """The interval -1 <= y <= 1 written as two rows."""
    P = Problem(np.array([[1.0, -1.0]]), np.array([1.0, 1.0]))
    return ell.build(P, np.array([-1.0, -1.0]), np.array(d, dtype=float))


def boundary_points(st, k=10_000, seed=0):
    """k points on the boundary of E(d, l) (n = 2)."""
    t = np.linspace(0.0, 2 * np.pi, k, endpoint=False)
    U = np.vstack([np.cos(t), np.sin(t)])
    # (y - ybar)^T L L^T (y - ybar) = f  <=>  y = ybar + sqrt(f) L^{-T} w, |w| = 1
    W = np.linalg.solve(st.chol.L.T, U)
    return st.ybar[:, None] + np.sqrt(st.f) * W


def grid_oracle(st, j, l):
    """max over mu of theta(lambda(mu)) with lambda_j(mu) = 0, by brute force.

    The grid knows nothing about the breakpoints; concavity lets a ternary
    search between the best grid point's neighbours finish the job.

    lambda = mu D tbar + nu D A^T B a_j + pi e_j with nu + pi = -1 and
    lambda_j = 0; this is solved for (nu, pi) directly at every mu.
    """
    A = st.P.A
    Baj = np.linalg.solve((A * st.d) @ A.T, A[:, j])
    w2 = st.d * (A.T @ Baj)
    dt = st.d * st.tbar
    q = float(w2[j])
    ej = np.zeros(st.m)
    ej[j] = 1.0

    def lam(mu):
        mu = np.atleast_1d(mu)[:, None]
        nu = (1.0 - mu * dt[j]) / (q - 1.0)
        return mu * dt + nu * w2 + (-1.0 - nu) * ej

    def theta(L):
        L = L.copy()
        L[:, j] = 0.0
        pos, neg = np.maximum(L, 0), np.minimum(L, 0)
        return -(pos @ st.P.u) - np.where(neg < 0, neg * l, 0.0).sum(axis=1)

    # a fine grid near the origin, then a geometric one out to |mu| = 1e8
    far = np.geomspace(1000.0, 1e8, 20_000)
    mus = np.concatenate([-far[::-1], np.arange(-1000.0, 1000.0, 1e-3), far])
    th = np.concatenate([theta(lam(c)) for c in np.array_split(mus, 200)])
    k = int(np.argmax(th))
    best = float(th[k])
    a, b = mus[max(k - 1, 0)], mus[min(k + 1, len(mus) - 1)]
    for _ in range(200):
        m1, m2 = a + (b - a) / 3, b - (b - a) / 3
        if theta(lam(m1))[0] < theta(lam(m2))[0]:
            a = m1
        else:
            b = m2
    return max(best, float(theta(lam(0.5 * (a + b)))[0]))


def slice_state(seed, a, b, q=0.7, rounds=200):
    """2D state whose row 0 has depths close to (a, b) and d_0 gamma_0^2 = q.

    Changing u_0, l_0 or d_0 moves the ellipsoid, so iterate to a fixed point.
    """
    st, _ = random_state(seed, n=2, m=4)
    P, l, d = st.P, st.l.copy(), st.d.copy()
    for _ in range(rounds):
        st = ell.scale_to_unit_f(ell.build(P, l, d))
        d, l = st.d.copy(), st.l.copy()
        g = ell.gamma(st, 0)
        l[0] = st.s[0] - b * g
        P = Problem(P.A, np.r_[st.s[0] - a * g, P.u[1:]])
        d[0] = q / (g * g)
    return ell.scale_to_unit_f(ell.build(P, l, d))


def corner_points(st, j):
    """Where the two cut lines of row j meet the boundary of E (n = 2)."""
    v = np.linalg.solve(st.chol.L, st.P.A[:, j])
    vhat = v / np.linalg.norm(v)
    perp = np.array([-vhat[1], vhat[0]])
    g = ell.gamma(st, j)
    out = []
    for bound in (st.u[j], st.l[j]):
        c = (bound - st.s[j]) / g
        for sgn in (1.0, -1.0):
            w = c * vhat + sgn * math.sqrt(max(0.0, 1.0 - c * c)) * perp
            out.append(st.ybar + math.sqrt(st.f) * np.linalg.solve(st.chol.L.T, w))
    return np.array(out).T


def end_piece_samples(st, j, k=10_000, seed=0):
    """Boundary and interior points of E outside the slab of row j.

    Also returns the boundary part alone (with the four corners), which
    spans the same convex hull.
    """
    rng = np.random.default_rng(seed)
    B = np.hstack([boundary_points(st, k), corner_points(st, j)])
    r = np.sqrt(rng.uniform(size=k))
    inner = st.ybar[:, None] + r * (boundary_points(st, k) - st.ybar[:, None])
    aj = st.P.A[:, j]
    tol = 1e-12 * (1 + abs(st.u[j]) + abs(st.l[j]))
    outside = lambda Y: ((aj @ Y) >= st.u[j] - tol) | ((aj @ Y) <= st.l[j] + tol)
    Y = np.hstack([B, inner])
    return Y[:, outside(Y)], B[:, outside(B)]


def min_area_ellipse(Y):
    """ln area of the smallest ellipse around the columns of Y, by direct optimisation.

    The points are whitened first (the problem is affine invariant); the ellipse
    is {x : |K (x - c)| <= 1} with K lower triangular, area pi/det K.  The search
    starts from the unit circle, not from any candidate answer.
    """
    mean = Y.mean(axis=1)
    W = np.linalg.cholesky(np.cov(Y))
    X = np.linalg.solve(W, Y - mean[:, None])
    X /= np.max(np.linalg.norm(X, axis=0))

    def quad(v):
        K = np.array([[math.exp(v[2]), 0.0], [v[3], math.exp(v[4])]])
        Z = K @ (X - v[:2, None])
        return np.einsum("ij,ij->j", Z, Z)

    res = minimize(lambda v: -(v[2] + v[4]), np.zeros(5), method="SLSQP",
                   constraints=[{"type": "ineq", "fun": lambda v: 1.0 - quad(v)}],
                   options={"maxiter": 1000, "ftol": 1e-15})
    # grow to cover every point, so the result is a genuine containing ellipse
    worst = max(1.0, float(np.max(quad(res.x))))
    scale = np.max(np.linalg.norm(np.linalg.solve(W, Y - mean[:, None]), axis=0))
    return (math.log(math.pi) - (res.x[2] + res.x[4]) + math.log(worst)
            + 2 * math.log(scale) + np.linalg.slogdet(W)[1])


def log_area(st):
    # E = {y : (y - ybar)^T H (y - ybar) <= f} in the plane
    H = st.chol.L @ st.chol.L.T
    return math.log(math.pi) + math.log(st.f) - 0.5 * np.linalg.slogdet(H)[1]
