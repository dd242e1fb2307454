"""Compiled support mappings, GJK and the bisection loops.

Bodies reach this module flattened: a *flat set* is the tuple

    (kinds, rot, trans, params, vert_offset, vert_count, verts)

holding posed primitive terms, and a body is a half-open term range
``[lo, hi)`` of one set. Each side of a GJK query also carries an ``extra``
vector of length ``EXTRA_LEN``:

    [flag, level, sigma (9), normal (3), offset (3)]

``flag`` is ``NO_SHADOW``, ``FULL`` or ``HALF``; when set, a covariance
ellipsoid (or half-ellipsoid) with that level is added to the body, and
``offset`` always translates the whole body. The certifier rewrites
``level`` in place between bisection steps and the Monte Carlo oracle
rewrites ``offset`` per sample, so neither ever rebuilds a body.
"""
import math

import numba
import numpy as np

from .chi2 import _isf
from .geometry import BOX, CYLINDER, ELLIPSOID, HALF_ELLIPSOID, POLYTOPE, SPHERE

NO_SHADOW, FULL, HALF = 0, 1, 2
EXTRA_LEN = 17
N_PARAMS = 13

SEPARATED, INTERSECTING, CAP_EXCEEDED = 0, 1, 2

GJK_MAX_ITER = 128
GJK_ABS_TOL = 1e-9
GJK_REL_TOL = 1e-9

# Kernels on the inner loop never allocate and are compiled without the
# reference-counting runtime: with it, every call that passes the flat-set
# arrays pays atomic incref/decref pairs, which dominates a support query.
_leaf = numba.njit(cache=True, nogil=True, _nrt=False)
_kernel = numba.njit(cache=True, nogil=True)


def pack(bodies):
    """Flatten bodies into one flat set; returns ``(flat_set, starts)`` with
    body ``j`` occupying terms ``starts[j]:starts[j+1]``."""
    terms = []
    starts = [0]
    for b in bodies:
        terms.extend(b.terms())
        starts.append(len(terms))
    k = len(terms)
    kinds = np.zeros(k, dtype=np.int64)
    rot = np.zeros((k, 3, 3))
    trans = np.zeros((k, 3))
    params = np.zeros((k, N_PARAMS))
    voff = np.zeros(k, dtype=np.int64)
    vcnt = np.zeros(k, dtype=np.int64)
    verts = []
    nv = 0
    for i, t in enumerate(terms):
        kinds[i] = t.kind
        rot[i] = t.rotation
        trans[i] = t.translation
        params[i, : len(t.params)] = t.params
        voff[i] = nv
        vcnt[i] = len(t.vertices)
        nv += len(t.vertices)
        if len(t.vertices):
            verts.append(t.vertices)
    vert_arr = np.concatenate(verts) if verts else np.zeros((1, 3))
    return (kinds, rot, trans, params, voff, vcnt, np.ascontiguousarray(vert_arr)), np.asarray(starts, dtype=np.int64)


def make_extra(flag=NO_SHADOW, level=0.0, sigma=None, normal=None, offset=None):
    e = np.zeros(EXTRA_LEN)
    e[0] = flag
    e[1] = level
    if sigma is not None:
        e[2:11] = np.asarray(sigma, dtype=float).ravel()
    if normal is not None:
        e[11:14] = normal
    if offset is not None:
        e[14:17] = offset
    return e


@_leaf
def _ell_support(s0, s1, s2, s3, s4, s5, s6, s7, s8, level, ux, uy, uz):
    # sigma given row-major as scalars
    sx = s0 * ux + s1 * uy + s2 * uz
    sy = s3 * ux + s4 * uy + s5 * uz
    sz = s6 * ux + s7 * uy + s8 * uz
    w = ux * sx + uy * sy + uz * sz
    if level == 0.0 or w <= 0.0:
        return 0.0, 0.0, 0.0
    f = math.sqrt(level / w)
    return f * sx, f * sy, f * sz


@_leaf
def _half_support(s0, s1, s2, s3, s4, s5, s6, s7, s8, level, nx, ny, nz, ux, uy, uz):
    px, py, pz = _ell_support(s0, s1, s2, s3, s4, s5, s6, s7, s8, level, ux, uy, uz)
    if nx * px + ny * py + nz * pz >= 0.0:
        return px, py, pz
    snx = s0 * nx + s1 * ny + s2 * nz
    sny = s3 * nx + s4 * ny + s5 * nz
    snz = s6 * nx + s7 * ny + s8 * nz
    f = (snx * ux + sny * uy + snz * uz) / (nx * snx + ny * sny + nz * snz)
    return _ell_support(s0, s1, s2, s3, s4, s5, s6, s7, s8, level, ux - f * nx, uy - f * ny, uz - f * nz)


@_leaf
def _term_support(fs, i, ux, uy, uz):
    kinds, rot, trans, p, voff, vcnt, verts = fs
    # direction in the term's local frame
    lx = rot[i, 0, 0] * ux + rot[i, 1, 0] * uy + rot[i, 2, 0] * uz
    ly = rot[i, 0, 1] * ux + rot[i, 1, 1] * uy + rot[i, 2, 1] * uz
    lz = rot[i, 0, 2] * ux + rot[i, 1, 2] * uy + rot[i, 2, 2] * uz
    kind = kinds[i]
    if kind == POLYTOPE:
        o = voff[i]
        best = o
        bd = verts[o, 0] * lx + verts[o, 1] * ly + verts[o, 2] * lz
        for j in range(o + 1, o + vcnt[i]):
            d = verts[j, 0] * lx + verts[j, 1] * ly + verts[j, 2] * lz
            if d > bd:
                bd = d
                best = j
        sx, sy, sz = verts[best, 0], verts[best, 1], verts[best, 2]
    elif kind == SPHERE:
        f = p[i, 0] / math.sqrt(lx * lx + ly * ly + lz * lz)
        sx, sy, sz = f * lx, f * ly, f * lz
    elif kind == BOX:
        sx = p[i, 0] if lx >= 0.0 else -p[i, 0]
        sy = p[i, 1] if ly >= 0.0 else -p[i, 1]
        sz = p[i, 2] if lz >= 0.0 else -p[i, 2]
    elif kind == CYLINDER:
        rad = math.sqrt(lx * lx + ly * ly)
        sz = p[i, 1] if lz >= 0.0 else -p[i, 1]
        if rad > 0.0:
            sx, sy = p[i, 0] * lx / rad, p[i, 0] * ly / rad
        else:
            sx, sy = 0.0, 0.0
    elif kind == ELLIPSOID:
        sx, sy, sz = _ell_support(p[i, 0], p[i, 1], p[i, 2], p[i, 3], p[i, 4], p[i, 5], p[i, 6], p[i, 7],
                                  p[i, 8], p[i, 9], lx, ly, lz)
    else:
        sx, sy, sz = _half_support(p[i, 0], p[i, 1], p[i, 2], p[i, 3], p[i, 4], p[i, 5], p[i, 6], p[i, 7],
                                   p[i, 8], p[i, 9], p[i, 10], p[i, 11], p[i, 12], lx, ly, lz)
    return (
        rot[i, 0, 0] * sx + rot[i, 0, 1] * sy + rot[i, 0, 2] * sz + trans[i, 0],
        rot[i, 1, 0] * sx + rot[i, 1, 1] * sy + rot[i, 1, 2] * sz + trans[i, 1],
        rot[i, 2, 0] * sx + rot[i, 2, 1] * sy + rot[i, 2, 2] * sz + trans[i, 2],
    )


@_leaf
def support(fs, lo, hi, ex, ux, uy, uz):
    x = ex[14]
    y = ex[15]
    z = ex[16]
    for i in range(lo, hi):
        a, b, c = _term_support(fs, i, ux, uy, uz)
        x += a
        y += b
        z += c
    flag = ex[0]
    if flag == FULL:
        a, b, c = _ell_support(ex[2], ex[3], ex[4], ex[5], ex[6], ex[7], ex[8], ex[9], ex[10], ex[1], ux, uy, uz)
        x += a
        y += b
        z += c
    elif flag == HALF:
        a, b, c = _half_support(ex[2], ex[3], ex[4], ex[5], ex[6], ex[7], ex[8], ex[9], ex[10], ex[1],
                                ex[11], ex[12], ex[13], ux, uy, uz)
        x += a
        y += b
        z += c
    return x, y, z


@_leaf
def _anchor(fs, lo, hi, ex):
    # cheap reference point: sum of term origins plus offset
    x = ex[14]
    y = ex[15]
    z = ex[16]
    trans = fs[2]
    for i in range(lo, hi):
        x += trans[i, 0]
        y += trans[i, 1]
        z += trans[i, 2]
    return x, y, z


@_leaf
def bounding_sphere(fs, lo, hi, ex):
    """Centre and radius of the sphere circumscribing the axis-probe box."""
    xp = support(fs, lo, hi, ex, 1.0, 0.0, 0.0)[0]
    xm = support(fs, lo, hi, ex, -1.0, 0.0, 0.0)[0]
    yp = support(fs, lo, hi, ex, 0.0, 1.0, 0.0)[1]
    ym = support(fs, lo, hi, ex, 0.0, -1.0, 0.0)[1]
    zp = support(fs, lo, hi, ex, 0.0, 0.0, 1.0)[2]
    zm = support(fs, lo, hi, ex, 0.0, 0.0, -1.0)[2]
    hx = 0.5 * (xp - xm)
    hy = 0.5 * (yp - ym)
    hz = 0.5 * (zp - zm)
    return 0.5 * (xp + xm), 0.5 * (yp + ym), 0.5 * (zp + zm), math.sqrt(hx * hx + hy * hy + hz * hz)


@_leaf
def spheres_disjoint(a0, a1, a2, ar, b0, b1, b2, br):
    dx = a0 - b0
    dy = a1 - b1
    dz = a2 - b2
    r = ar + br
    return dx * dx + dy * dy + dz * dz > r * r


# ---------------------------------------------------------------- simplex


@_leaf
def _seg(y, i0, i1):
    """Closest point of segment to the origin: ``(l0, l1, dist_sq)``."""
    ax, ay, az = y[i0, 0], y[i0, 1], y[i0, 2]
    dx, dy, dz = y[i1, 0] - ax, y[i1, 1] - ay, y[i1, 2] - az
    dd = dx * dx + dy * dy + dz * dz
    t = 0.0
    if dd > 0.0:
        t = -(ax * dx + ay * dy + az * dz) / dd
    if t <= 0.0:
        l0, l1 = 1.0, 0.0
    elif t >= 1.0:
        l0, l1 = 0.0, 1.0
    else:
        l0, l1 = 1.0 - t, t
    px = l0 * ax + l1 * y[i1, 0]
    py = l0 * ay + l1 * y[i1, 1]
    pz = l0 * az + l1 * y[i1, 2]
    return l0, l1, px * px + py * py + pz * pz


@_leaf
def _tri(y, i0, i1, i2):
    """Closest point of triangle to the origin by Voronoi-region walk:
    ``(u, v, w, dist_sq)``."""
    a0, a1, a2 = y[i0, 0], y[i0, 1], y[i0, 2]
    b0, b1, b2 = y[i1, 0], y[i1, 1], y[i1, 2]
    c0, c1, c2 = y[i2, 0], y[i2, 1], y[i2, 2]
    ab0, ab1, ab2 = b0 - a0, b1 - a1, b2 - a2
    ac0, ac1, ac2 = c0 - a0, c1 - a1, c2 - a2
    u, v, w = 1.0, 0.0, 0.0
    d1 = -(ab0 * a0 + ab1 * a1 + ab2 * a2)
    d2 = -(ac0 * a0 + ac1 * a1 + ac2 * a2)
    found = d1 <= 0.0 and d2 <= 0.0
    d3 = d4 = d5 = d6 = 0.0
    if not found:
        d3 = -(ab0 * b0 + ab1 * b1 + ab2 * b2)
        d4 = -(ac0 * b0 + ac1 * b1 + ac2 * b2)
        if d3 >= 0.0 and d4 <= d3:
            u, v, w = 0.0, 1.0, 0.0
            found = True
    if not found:
        vc = d1 * d4 - d3 * d2
        if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
            t = d1 / (d1 - d3)
            u, v, w = 1.0 - t, t, 0.0
            found = True
    if not found:
        d5 = -(ab0 * c0 + ab1 * c1 + ab2 * c2)
        d6 = -(ac0 * c0 + ac1 * c1 + ac2 * c2)
        if d6 >= 0.0 and d5 <= d6:
            u, v, w = 0.0, 0.0, 1.0
            found = True
    if not found:
        vb = d5 * d2 - d1 * d6
        if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
            t = d2 / (d2 - d6)
            u, v, w = 1.0 - t, 0.0, t
            found = True
    if not found:
        va = d3 * d6 - d5 * d4
        if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
            t = (d4 - d3) / ((d4 - d3) + (d5 - d6))
            u, v, w = 0.0, 1.0 - t, t
            found = True
        else:
            vc = d1 * d4 - d3 * d2
            vb = d5 * d2 - d1 * d6
            den = va + vb + vc
            if den > 1e-300:
                v = vb / den
                w = vc / den
                u = 1.0 - v - w
                found = True
    if not found:
        # collinear triangle: best of the three edges
        l0, l1, best = _seg(y, i0, i1)
        u, v, w = l0, l1, 0.0
        l0, l1, dd = _seg(y, i0, i2)
        if dd < best:
            best = dd
            u, v, w = l0, 0.0, l1
        l0, l1, dd = _seg(y, i1, i2)
        if dd < best:
            u, v, w = 0.0, l0, l1
    px = u * a0 + v * b0 + w * c0
    py = u * a1 + v * b1 + w * c1
    pz = u * a2 + v * b2 + w * c2
    return u, v, w, px * px + py * py + pz * pz


@_leaf
def _plane_side(y, i0, i1, i2, i3):
    # signed plane values of the origin and of y[i3] for plane (y[i0], y[i1], y[i2])
    ab0, ab1, ab2 = y[i1, 0] - y[i0, 0], y[i1, 1] - y[i0, 1], y[i1, 2] - y[i0, 2]
    ac0, ac1, ac2 = y[i2, 0] - y[i0, 0], y[i2, 1] - y[i0, 1], y[i2, 2] - y[i0, 2]
    n0 = ab1 * ac2 - ab2 * ac1
    n1 = ab2 * ac0 - ab0 * ac2
    n2 = ab0 * ac1 - ab1 * ac0
    so = -(n0 * y[i0, 0] + n1 * y[i0, 1] + n2 * y[i0, 2])
    sd = n0 * (y[i3, 0] - y[i0, 0]) + n1 * (y[i3, 1] - y[i0, 1]) + n2 * (y[i3, 2] - y[i0, 2])
    return so, sd


@_leaf
def _keep(lam, keep, ids, ws, nk):
    # append ids with positive weight; ws holds the candidate weights
    for q in range(len(ids)):
        if ws[q] > 0.0:
            keep[nk] = ids[q]
            lam[nk] = ws[q]
            nk += 1
    return nk


@_leaf
def _reduce(y, pa, pb, n, lam, keep, tmp):
    """Shrink the simplex to the sub-simplex carrying its closest point to the
    origin. Returns ``(n_new, dist_sq, contains_origin)``; ``lam`` holds the
    barycentrics of the kept points."""
    nk = 0
    dsq = 0.0
    w = tmp[3, 0]
    if n == 1:
        lam[0] = 1.0
        keep[0] = 0
        nk = 1
        dsq = y[0, 0] * y[0, 0] + y[0, 1] * y[0, 1] + y[0, 2] * y[0, 2]
    elif n == 2:
        w[0], w[1], dsq = _seg(y, 0, 1)
        nk = _keep(lam, keep, (0, 1), w, 0)
    elif n == 3:
        w[0], w[1], w[2], dsq = _tri(y, 0, 1, 2)
        nk = _keep(lam, keep, (0, 1, 2), w, 0)
    else:
        so, vol = _plane_side(y, 0, 1, 2, 3)
        scale = 0.0
        for i in range(4):
            scale = max(scale, y[i, 0] * y[i, 0] + y[i, 1] * y[i, 1] + y[i, 2] * y[i, 2])
        degenerate = abs(vol) <= 1e-14 * scale * math.sqrt(scale) + 1e-300
        best = math.inf
        any_out = False
        faces = ((0, 1, 2, 3), (0, 2, 3, 1), (0, 3, 1, 2), (1, 3, 2, 0))
        for f in range(4):
            i0, i1, i2, i3 = faces[f]
            so, sd = _plane_side(y, i0, i1, i2, i3)
            if degenerate or so * sd < 0.0:
                any_out = True
                w[0], w[1], w[2], dd = _tri(y, i0, i1, i2)
                if dd < best:
                    best = dd
                    nk = _keep(lam, keep, (i0, i1, i2), w, 0)
        if not any_out:
            for q in range(4):
                lam[q] = 0.25
            return 4, 0.0, True
        dsq = best
    for q in range(n):
        for c in range(3):
            tmp[0, q, c] = y[q, c]
            tmp[1, q, c] = pa[q, c]
            tmp[2, q, c] = pb[q, c]
    for q in range(nk):
        k = keep[q]
        for c in range(3):
            y[q, c] = tmp[0, k, c]
            pa[q, c] = tmp[1, k, c]
            pb[q, c] = tmp[2, k, c]
    return nk, dsq, False


@_kernel
def workspace():
    """Scratch for one GJK run: ``(y, pa, pb, lam, tmp, keep)``."""
    return (np.empty((4, 3)), np.empty((4, 3)), np.empty((4, 3)), np.empty(4),
            np.empty((4, 4, 3)), np.empty(4, dtype=np.int64))


@_leaf
def gjk_ws(fa, loa, hia, exa, fb, lob, hib, exb, boolean, max_iter, ws):
    """GJK on the Minkowski difference ``A - B``.

    ``boolean`` stops at the first separating axis, so a reported distance
    is then only an upper bound. Returns
    ``(status, distance, ax, ay, az, bx, by, bz, iterations)`` where ``a*``
    and ``b*`` are the closest points on A and B.
    """
    y, pa, pb, lam, tmp, keep = ws
    ca0, ca1, ca2 = _anchor(fa, loa, hia, exa)
    cb0, cb1, cb2 = _anchor(fb, lob, hib, exb)
    vx, vy, vz = ca0 - cb0, ca1 - cb1, ca2 - cb2
    if vx * vx + vy * vy + vz * vz < 1e-30:
        vx, vy, vz = 1.0, 0.0, 0.0
    n = 0
    vv = math.inf
    it = 0
    status = CAP_EXCEEDED
    while it < max_iter:
        it += 1
        a = support(fa, loa, hia, exa, -vx, -vy, -vz)
        b = support(fb, lob, hib, exb, vx, vy, vz)
        wx, wy, wz = a[0] - b[0], a[1] - b[1], a[2] - b[2]
        vw = vx * wx + vy * wy + vz * wz
        # any v with v.w > 0 is a separating axis
        if boolean and vw > 0.0:
            status = SEPARATED
            break
        if n > 0 and vv - vw <= GJK_REL_TOL * vv:
            status = SEPARATED
            break
        dup = False
        for q in range(n):
            if y[q, 0] == wx and y[q, 1] == wy and y[q, 2] == wz:
                dup = True
        if dup:
            status = SEPARATED
            break
        y[n, 0], y[n, 1], y[n, 2] = wx, wy, wz
        pa[n, 0], pa[n, 1], pa[n, 2] = a
        pb[n, 0], pb[n, 1], pb[n, 2] = b
        n += 1
        n_new, dsq, inside = _reduce(y, pa, pb, n, lam, keep, tmp)
        if inside:
            vv = 0.0
            status = INTERSECTING
            break
        n = n_new
        nvx = 0.0
        nvy = 0.0
        nvz = 0.0
        for q in range(n):
            nvx += lam[q] * y[q, 0]
            nvy += lam[q] * y[q, 1]
            nvz += lam[q] * y[q, 2]
        nvv = nvx * nvx + nvy * nvy + nvz * nvz
        vx, vy, vz = nvx, nvy, nvz
        if nvv <= GJK_ABS_TOL * GJK_ABS_TOL:
            vv = nvv
            status = INTERSECTING
            break
        if nvv >= vv:
            # no progress: converged at working precision
            vv = nvv
            status = SEPARATED
            break
        vv = nvv
    ax = ay = az = bx = by = bz = 0.0
    for q in range(n):
        ax += lam[q] * pa[q, 0]
        ay += lam[q] * pa[q, 1]
        az += lam[q] * pa[q, 2]
        bx += lam[q] * pb[q, 0]
        by += lam[q] * pb[q, 1]
        bz += lam[q] * pb[q, 2]
    dist = 0.0 if status == INTERSECTING else math.sqrt(vv)
    return status, dist, ax, ay, az, bx, by, bz, it


@_kernel
def gjk(fa, loa, hia, exa, fb, lob, hib, exb, boolean, max_iter):
    return gjk_ws(fa, loa, hia, exa, fb, lob, hib, exb, boolean, max_iter, workspace())


@_kernel
def link_spheres(lfs, starts, lex):
    m = len(starts) - 1
    out = np.empty((m, 4))
    for j in range(m):
        c0, c1, c2, r = bounding_sphere(lfs, starts[j], starts[j + 1], lex)
        out[j, 0], out[j, 1], out[j, 2], out[j, 3] = c0, c1, c2, r
    return out


@_leaf
def first_hit(lfs, starts, lsph, lex, ofs, olo, ohi, oex, max_iter, ws):
    """Index of the first link (scene order) intersecting the obstacle body,
    -1 if none, -2 if GJK ran out of iterations. Also returns how many full
    GJK runs the bounding-sphere screen let through."""
    c0, c1, c2, r = bounding_sphere(ofs, olo, ohi, oex)
    runs = 0
    for j in range(len(starts) - 1):
        if spheres_disjoint(c0, c1, c2, r, lsph[j, 0], lsph[j, 1], lsph[j, 2], lsph[j, 3]):
            continue
        runs += 1
        st = gjk_ws(ofs, olo, ohi, oex, lfs, starts[j], starts[j + 1], lex, True, max_iter, ws)[0]
        if st == INTERSECTING:
            return j, runs
        if st == CAP_EXCEEDED:
            return -2, runs
    return -1, runs


@_kernel
def bisect(lfs, starts, lsph, lex, ofs, olo, ohi, oex, eps_lo, eps_hi, tol, eps_min, max_iter):
    """Bisection on the risk level. ``oex`` carries the shadow kind and its
    level is rewritten in place. Returns ``(eps_lo, eps_hi, steps, gjk_runs,
    last_hit, error_eps)``; ``last_hit`` is the link hit at the final
    ``eps_lo`` and ``error_eps >= 0`` reports a GJK failure at that level."""
    ws = workspace()
    steps = 0
    runs = 0
    last_hit = -1
    while eps_hi - eps_lo > tol:
        eps = 0.5 * (eps_lo + eps_hi)
        e = min(max(eps, eps_min), 1.0 - eps_min)
        oex[1] = _isf(e, 3)
        hit, r = first_hit(lfs, starts, lsph, lex, ofs, olo, ohi, oex, max_iter, ws)
        steps += 1
        runs += r
        if hit == -2:
            return eps_lo, eps_hi, steps, runs, last_hit, eps
        if hit >= 0:
            eps_lo = eps
            last_hit = hit
        else:
            eps_hi = eps
    return eps_lo, eps_hi, steps, runs, last_hit, -1.0


@_kernel
def mc_hits(lfs, starts, lsph, lex, ofs, olo, ohi, oex, disp, max_iter):
    """Collision flags for the obstacle displaced by each row of ``disp``.
    Returns ``(flags, failed_index)``; ``failed_index`` is -1 unless GJK
    failed on that sample, in which case the flags stop there."""
    n = disp.shape[0]
    out = np.zeros(n, dtype=np.int8)
    ws = workspace()
    ex = oex.copy()
    base0, base1, base2 = ex[14], ex[15], ex[16]
    for i in range(n):
        ex[14] = base0 + disp[i, 0]
        ex[15] = base1 + disp[i, 1]
        ex[16] = base2 + disp[i, 2]
        hit, _ = first_hit(lfs, starts, lsph, lex, ofs, olo, ohi, ex, max_iter, ws)
        if hit == -2:
            return out, i
        if hit >= 0:
            out[i] = 1
    return out, -1
