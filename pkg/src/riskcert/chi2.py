"""Chi-squared CDF and quantiles for small degrees of freedom.

The chi-squared CDF with ``k`` degrees of freedom is the regularized lower
incomplete gamma function ``P(k/2, x/2)``. It is evaluated with the usual
series (small ``x``) / continued fraction (large ``x``) split, and inverted by
log-space Newton iterations safeguarded by a bisection bracket.

The ``_``-prefixed functions are numba-compiled so they can be called from
the certification kernels.
"""
import math

import numba

SUPPORTED_DOF = (1, 2, 3)

_EPS = 1e-16
_FPMIN = 1e-300
_MAX_ITER = 500


@numba.njit(cache=True, nogil=True)
def _gamma_series(a, x):
    # P(a, x) for x < a + 1
    ap = a
    term = 1.0 / a
    total = term
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


@numba.njit(cache=True, nogil=True)
def _gamma_cfrac(a, x):
    # Q(a, x) for x >= a + 1, modified Lentz
    b = x + 1.0 - a
    c = 1.0 / _FPMIN
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = b + an / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


@numba.njit(cache=True, nogil=True)
def _cdf_sf(x, k):
    """Return ``(P(chi2_k <= x), P(chi2_k > x))``, each accurate in its own tail."""
    if x <= 0.0:
        return 0.0, 1.0
    if math.isinf(x):
        return 1.0, 0.0
    a = 0.5 * k
    hx = 0.5 * x
    if hx < a + 1.0:
        p = _gamma_series(a, hx)
        return p, 1.0 - p
    q = _gamma_cfrac(a, hx)
    return 1.0 - q, q


@numba.njit(cache=True, nogil=True)
def _log_pdf(x, k):
    a = 0.5 * k
    return (a - 1.0) * math.log(x) - 0.5 * x - a * math.log(2.0) - math.lgamma(a)


@numba.njit(cache=True, nogil=True)
def _inv(p, q, k):
    """Quantile ``x`` with ``P(x) = p``; ``q = 1 - p`` given separately.

    Whichever of ``p``/``q`` is smaller drives the iteration, so upper-tail
    queries such as ``q = 1e-9`` keep full relative precision.
    """
    if p <= 0.0:
        return 0.0
    if q <= 0.0:
        return math.inf
    upper = q < p
    target = math.log(q) if upper else math.log(p)

    # bracket [lo, hi] with P(lo) <= p <= P(hi)
    lo = 0.0
    hi = 2.0 * k + 2.0
    if upper:
        hi = max(hi, -4.0 * math.log(q) + 2.0 * k)
    while True:
        _, qh = _cdf_sf(hi, k)
        if qh < q:
            break
        lo = hi
        hi *= 2.0

    if upper:
        lq = -math.log(q)
        x = 2.0 * lq + (k - 2.0) * math.log(max(2.0 * lq, 1.0))
    else:
        # leading term of the series: P ~ (x/2)^(k/2) / Gamma(k/2 + 1)
        a = 0.5 * k
        x = 2.0 * math.exp((target + math.lgamma(a + 1.0)) / a)
    if not (lo < x < hi):
        x = 0.5 * (lo + hi)

    for _ in range(200):
        pc, qc = _cdf_sf(x, k)
        if upper:
            if qc > q:
                lo = x
            else:
                hi = x
            g = math.log(qc) - target if qc > 0.0 else -math.inf
            # d/dx log Q = -pdf / Q
            dg = -math.exp(_log_pdf(x, k) - math.log(qc)) if qc > 0.0 else -1.0
        else:
            if pc < p:
                lo = x
            else:
                hi = x
            g = math.log(pc) - target if pc > 0.0 else -math.inf
            dg = math.exp(_log_pdf(x, k) - math.log(pc)) if pc > 0.0 else 1.0
        if g == 0.0:
            return x
        if math.isfinite(g) and dg != 0.0:
            x_new = x - g / dg
        else:
            x_new = 0.5 * (lo + hi)
        if not (lo < x_new < hi):
            x_new = 0.5 * (lo + hi)
        if abs(x_new - x) <= 1e-15 * x or hi - lo <= 1e-15 * hi:
            return x_new
        x = x_new
    return x


@numba.njit(cache=True, nogil=True)
def _isf(q, k):
    """Upper-tail quantile: ``x`` with ``P(chi2_k > x) = q``."""
    return _inv(1.0 - q, q, k)


def _check_dof(k):
    if k not in SUPPORTED_DOF:
        raise ValueError(f"degrees of freedom must be one of {SUPPORTED_DOF}, got {k!r}")


def chi2_cdf(x: float, k: int = 3) -> float:
    """P(chi2_k <= x).

    Raises
    ------
    ValueError
        If ``x`` is negative or NaN, or ``k`` is unsupported.
    """
    _check_dof(k)
    x = float(x)
    if math.isnan(x) or x < 0.0:
        raise ValueError(f"chi2_cdf needs x >= 0, got {x}")
    return _cdf_sf(x, k)[0]


def chi2_sf(x: float, k: int = 3) -> float:
    """P(chi2_k > x), accurate deep into the upper tail."""
    _check_dof(k)
    x = float(x)
    if math.isnan(x) or x < 0.0:
        raise ValueError(f"chi2_sf needs x >= 0, got {x}")
    return _cdf_sf(x, k)[1]


def chi2_inv(p: float, k: int = 3) -> float:
    """Inverse CDF on ``[0, 1)``.

    ``p = 1`` is rejected: the corresponding level set is all of space.
    """
    _check_dof(k)
    p = float(p)
    if math.isnan(p) or p < 0.0 or p >= 1.0:
        raise ValueError(f"chi2_inv needs 0 <= p < 1, got {p}")
    return _inv(p, 1.0 - p, k)


def chi2_isf(q: float, k: int = 3) -> float:
    """Inverse survival function on ``(0, 1]``; ``chi2_isf(eps)`` is the
    ellipsoid level that captures mass ``1 - eps``."""
    _check_dof(k)
    q = float(q)
    if math.isnan(q) or q <= 0.0 or q > 1.0:
        raise ValueError(f"chi2_isf needs 0 < q <= 1, got {q}")
    return _isf(q, k)
