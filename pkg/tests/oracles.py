"""Reference implementations that share no code with the package.

Each oracle here is the slow, obviously-correct way to get a number the
package computes quickly: quadrature for chi-squared, LP/SOCP for polytope
proximity, constrained optimization for supports, noncentral chi-squared for
Gaussian ball mass.
"""
from __future__ import annotations

import math

import cvxpy as cp
import numpy as np
from scipy import integrate, optimize, special, stats


# ---------------------------------------------------------------- chi-squared


def chi2_pdf(x, k):
    if x <= 0.0:
        return 0.0 if k != 2 else 0.5
    return math.exp((k / 2 - 1) * math.log(x) - x / 2 - (k / 2) * math.log(2.0) - math.lgamma(k / 2))


def chi2_cdf_quad(x, k):
    """CDF by adaptive quadrature of the density."""
    if x <= 0.0:
        return 0.0
    # the k=1 density has an integrable singularity at 0
    val, _ = integrate.quad(chi2_pdf, 0.0, x, args=(k,), epsabs=1e-14, epsrel=1e-13, limit=200)
    return val


def chi2_inv_quad(p, k):
    """Quantile by bracketing root search on the quadrature CDF."""
    return optimize.brentq(lambda x: chi2_cdf_quad(x, k) - p, 0.0, 200.0, xtol=1e-13, rtol=1e-14)


def chi2_cdf_closed_k3(x):
    return math.erf(math.sqrt(x / 2)) - math.sqrt(2 / math.pi) * math.sqrt(x) * math.exp(-x / 2)


# -------------------------------------------------------------- Gaussian mass


def ball_hit_probability(distance, radius, sigma):
    """P(|c + d| <= radius) for |c| = distance and d ~ N(0, sigma^2 I):
    a noncentral chi-squared CDF with 3 dof and noncentrality (distance/sigma)^2."""
    return float(stats.ncx2.cdf((radius / sigma) ** 2, 3, (distance / sigma) ** 2))


# ------------------------------------------------------------------ polytopes


def lp_intersects(va, vb):
    """Do the hulls of ``va`` and ``vb`` share a point? Feasibility of
    ``va^T lam = vb^T mu`` over the two simplices."""
    n, m = len(va), len(vb)
    a_eq = np.zeros((5, n + m))
    a_eq[:3, :n] = va.T
    a_eq[:3, n:] = -vb.T
    a_eq[3, :n] = 1.0
    a_eq[4, n:] = 1.0
    b_eq = np.array([0.0, 0.0, 0.0, 1.0, 1.0])
    res = optimize.linprog(np.zeros(n + m), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    return res.status == 0


def socp_distance(va, vb):
    """Euclidean distance between the hulls, with the closest points."""
    lam = cp.Variable(len(va), nonneg=True)
    mu = cp.Variable(len(vb), nonneg=True)
    t = cp.Variable()
    diff = va.T @ lam - vb.T @ mu
    prob = cp.Problem(cp.Minimize(t), [cp.norm(diff, 2) <= t, cp.sum(lam) == 1, cp.sum(mu) == 1])
    prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-10, tol_gap_rel=1e-10, tol_feas=1e-10)
    pa = va.T @ lam.value
    pb = vb.T @ mu.value
    return float(np.linalg.norm(pa - pb)), pa, pb


def random_polytope(rng, center, scale, max_vertices=12):
    n = int(rng.integers(1, max_vertices + 1))
    return center + scale * rng.normal(size=(n, 3))


# --------------------------------------------------------------- supports


def ellipsoid_support_opt(sigma, level, u, normal=None):
    """max u.d subject to d^T sigma^-1 d <= level (and normal.d >= 0), by SLSQP
    from several starts; nonsingular ``sigma`` only."""
    inv = np.linalg.inv(sigma)
    cons = [{"type": "ineq", "fun": lambda d: level - d @ inv @ d, "jac": lambda d: -2 * inv @ d}]
    if normal is not None:
        cons.append({"type": "ineq", "fun": lambda d: d @ normal, "jac": lambda d: normal})
    best = None
    rng = np.random.default_rng(0)
    starts = [np.zeros(3)] + [0.5 * math.sqrt(level) * rng.normal(size=3) for _ in range(4)]
    for x0 in starts:
        r = optimize.minimize(lambda d: -(u @ d), x0, jac=lambda d: -u, constraints=cons, method="SLSQP",
                              options={"ftol": 1e-15, "maxiter": 500})
        if best is None or -r.fun > best:
            best = -r.fun
    return best


def sample_ellipsoid_boundary(sigma, level, n, rng):
    lam, vec = np.linalg.eigh(sigma)
    z = rng.normal(size=(n, 3))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    return math.sqrt(level) * (z * np.sqrt(np.clip(lam, 0, None))) @ vec.T


def sample_ball(n, rng):
    z = rng.normal(size=(n, 3))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    return z * rng.random(n)[:, None] ** (1 / 3)


def random_rotation(rng):
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def random_covariance(rng, scale=0.1, min_eig=0.0):
    a = scale * rng.normal(size=(3, 3))
    return a @ a.T + min_eig * np.eye(3)


def gammainc_cdf(x, k):
    """scipy's regularized gamma, used only as a second opinion."""
    return float(special.gammainc(k / 2, x / 2))
