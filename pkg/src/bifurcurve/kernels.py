"""Hot numeric kernels: packed-polynomial evaluation, batched Newton, curve continuation.

Every function here is written in the numpy subset that numba understands and
is decorated with :func:`bifurcurve._accel.njit`, so the same source runs
either compiled or as plain numpy (``BIFURCURVE_DISABLE_NUMBA=1``).

A packed polynomial list is ``(exps, coeffs, owner)``: term k has exponent
row ``exps[k]``, coefficient ``coeffs[k]`` and contributes to output
``owner[k]``.  Terms are summed in storage order, which makes evaluation
bit-reproducible.
"""
from __future__ import annotations

import numpy as np

from ._accel import njit

# trace status codes
CLOSED = 0
EXIT_OUTER = 1
EXIT_INNER = 2
UNDERFLOW = 3
SINGULAR = 4
MAX_POINTS = 5


@njit
def _powers(x, maxdeg):
    n = x.shape[0]
    pw = np.empty((n, maxdeg + 1))
    for j in range(n):
        pw[j, 0] = 1.0
        for e in range(1, maxdeg + 1):
            pw[j, e] = pw[j, e - 1] * x[j]
    return pw


@njit
def poly_eval(exps, coeffs, owner, maxdeg, x, out):
    pw = _powers(x, maxdeg)
    for i in range(out.shape[0]):
        out[i] = 0.0
    nv = exps.shape[1]
    for k in range(coeffs.shape[0]):
        v = coeffs[k]
        for j in range(nv):
            e = exps[k, j]
            if e > 0:
                v *= pw[j, e]
        out[owner[k]] += v


@njit
def poly_eval_scaled(exps, coeffs, owner, maxdeg, x, out, scale):
    """Like :func:`poly_eval`, also accumulating sum |term| per output into ``scale``."""
    pw = _powers(x, maxdeg)
    for i in range(out.shape[0]):
        out[i] = 0.0
        scale[i] = 0.0
    nv = exps.shape[1]
    for k in range(coeffs.shape[0]):
        v = coeffs[k]
        for j in range(nv):
            e = exps[k, j]
            if e > 0:
                v *= pw[j, e]
        out[owner[k]] += v
        scale[owner[k]] += abs(v)


@njit
def poly_eval_batch(exps, coeffs, owner, nout, maxdeg, X):
    N = X.shape[0]
    out = np.zeros((N, nout))
    row = np.zeros(nout)
    for i in range(N):
        poly_eval(exps, coeffs, owner, maxdeg, X[i], row)
        for k in range(nout):
            out[i, k] = row[k]
    return out


@njit
def term_scale(exps, coeffs, maxdeg, x):
    pw = _powers(x, maxdeg)
    total = 0.0
    for k in range(coeffs.shape[0]):
        v = abs(coeffs[k])
        for j in range(exps.shape[1]):
            e = exps[k, j]
            if e > 0:
                v *= abs(pw[j, e])
        total += v
    return total


# ---------------------------------------------------------------------------
# small dense linear algebra (no exceptions, so it is safe inside loops)


@njit
def solve_small(A, b, out):
    """Gaussian elimination with partial pivoting. Returns False when singular."""
    n = A.shape[0]
    M = A.copy()
    r = b.copy()
    anorm = 0.0
    for i in range(n):
        for j in range(n):
            anorm = max(anorm, abs(M[i, j]))
    if anorm == 0.0:
        return False
    for c in range(n):
        p = c
        best = abs(M[c, c])
        for i in range(c + 1, n):
            if abs(M[i, c]) > best:
                best = abs(M[i, c])
                p = i
        if best <= 1e-300 or best <= 1e-15 * anorm:
            return False
        if p != c:
            for j in range(n):
                tmp = M[c, j]
                M[c, j] = M[p, j]
                M[p, j] = tmp
            tmp = r[c]
            r[c] = r[p]
            r[p] = tmp
        for i in range(c + 1, n):
            f = M[i, c] / M[c, c]
            if f != 0.0:
                for j in range(c, n):
                    M[i, j] -= f * M[c, j]
                r[i] -= f * r[c]
    for i in range(n - 1, -1, -1):
        s = r[i]
        for j in range(i + 1, n):
            s -= M[i, j] * out[j]
        out[i] = s / M[i, i]
    return True


@njit
def det_small(A):
    n = A.shape[0]
    if n == 1:
        return A[0, 0]
    if n == 2:
        return A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
    M = A.copy()
    d = 1.0
    for c in range(n):
        p = c
        best = abs(M[c, c])
        for i in range(c + 1, n):
            if abs(M[i, c]) > best:
                best = abs(M[i, c])
                p = i
        if best == 0.0:
            return 0.0
        if p != c:
            for j in range(n):
                tmp = M[c, j]
                M[c, j] = M[p, j]
                M[p, j] = tmp
            d = -d
        d *= M[c, c]
        for i in range(c + 1, n):
            f = M[i, c] / M[c, c]
            for j in range(c, n):
                M[i, j] -= f * M[c, j]
    return d


@njit
def cofactor_vector(J, out):
    """out_i = (-1)^(m+i) det(J without column i), m = rows; det([J; w]) = w . out."""
    m = J.shape[0]
    n = J.shape[1]
    if m == 1 and n == 2:
        out[0] = -J[0, 1]
        out[1] = J[0, 0]
        return
    if m == 2 and n == 3:
        out[0] = J[0, 1] * J[1, 2] - J[0, 2] * J[1, 1]
        out[1] = J[0, 2] * J[1, 0] - J[0, 0] * J[1, 2]
        out[2] = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
        return
    sub = np.empty((m, m))
    for i in range(n):
        for r in range(m):
            cc = 0
            for c in range(n):
                if c != i:
                    sub[r, cc] = J[r, c]
                    cc += 1
        sgn = 1.0 if (m + i) % 2 == 0 else -1.0
        out[i] = sgn * det_small(sub)


@njit
def sigma_min(J):
    """Smallest singular value of a wide m x n matrix (m < n)."""
    m = J.shape[0]
    if m == 1:
        s = 0.0
        for j in range(J.shape[1]):
            s += J[0, j] * J[0, j]
        return np.sqrt(s)
    G = _gram(J)
    if m == 2:
        a = G[0, 0]
        b = G[0, 1]
        d = G[1, 1]
        tr = a + d
        disc = np.sqrt(max((a - d) * (a - d) + 4.0 * b * b, 0.0))
        lam = 0.5 * (tr - disc)
        # cancellation-free form for the small eigenvalue
        det = a * d - b * b
        big = 0.5 * (tr + disc)
        if big > 0.0:
            lam = det / big
        return np.sqrt(max(lam, 0.0))
    w = np.linalg.eigvalsh(G)
    return np.sqrt(max(w[0], 0.0))


@njit
def _norm(v):
    s = 0.0
    for i in range(v.shape[0]):
        s += v[i] * v[i]
    return np.sqrt(s)


@njit
def _dot(a, b):
    s = 0.0
    for i in range(a.shape[0]):
        s += a[i] * b[i]
    return s


# ---------------------------------------------------------------------------
# Newton / Gauss-Newton on packed systems


@njit
def _residual(exps, coeffs, owner, maxdeg, target, x, r, sc):
    poly_eval_scaled(exps, coeffs, owner, maxdeg, x, r, sc)
    worst = 0.0
    for i in range(r.shape[0]):
        r[i] -= target[i]
        s = sc[i] + abs(target[i])
        if s < 1.0:
            s = 1.0
        v = abs(r[i]) / s
        if v > worst:
            worst = v
    return worst


@njit
def _gram(J):
    m = J.shape[0]
    n = J.shape[1]
    G = np.empty((m, m))
    for a in range(m):
        for b in range(a, m):
            v = 0.0
            for k in range(n):
                v += J[a, k] * J[b, k]
            G[a, b] = v
            G[b, a] = v
    return G


@njit
def _gn_step(Jm, r, dx):
    """Minimum-norm Gauss-Newton step dx = J^T (J J^T)^-1 r (plain Newton when square)."""
    m = Jm.shape[0]
    n = Jm.shape[1]
    if m == n:
        return solve_small(Jm, r, dx)
    G = _gram(Jm)
    y = np.zeros(m)
    if not solve_small(G, r, y):
        return False
    for j in range(n):
        s = 0.0
        for i in range(m):
            s += Jm[i, j] * y[i]
        dx[j] = s
    return True


@njit
def newton_point(exps, coeffs, owner, dexps, dcoeffs, downer, nout, maxdeg, target, x0, tol, maxit, maxdist):
    """Damped (Gauss-)Newton from x0 towards {G = target}.

    Returns (x, ok, scaled_residual).  ``maxdist`` bounds the total displacement
    from x0 (pass ``inf`` to disable).
    """
    n = x0.shape[0]
    x = x0.copy()
    r = np.zeros(nout)
    sc = np.zeros(nout)
    jflat = np.zeros(nout * n)
    dx = np.zeros(n)
    xt = np.zeros(n)
    rt = np.zeros(nout)
    res = _residual(exps, coeffs, owner, maxdeg, target, x, r, sc)
    polished = 0
    for it in range(maxit):
        if res <= tol:
            polished += 1
            if polished > 1:
                break
        poly_eval(dexps, dcoeffs, downer, maxdeg, x, jflat)
        Jm = jflat.reshape(nout, n)
        if not _gn_step(Jm, r, dx):
            return x, False, res
        step = 1.0
        accepted = False
        for _ in range(8):
            for j in range(n):
                xt[j] = x[j] - step * dx[j]
            rest = _residual(exps, coeffs, owner, maxdeg, target, xt, rt, sc)
            if rest <= res or rest <= tol:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            if res <= tol:
                break
            return x, False, res
        for j in range(n):
            x[j] = xt[j]
        for i in range(nout):
            r[i] = rt[i]
        res = rest
        d = 0.0
        for j in range(n):
            d += (x[j] - x0[j]) ** 2
        if np.sqrt(d) > maxdist:
            return x, False, res
    for j in range(n):
        if not np.isfinite(x[j]):
            return x, False, res
    return x, res <= tol, res


@njit
def newton_batch(exps, coeffs, owner, dexps, dcoeffs, downer, nout, maxdeg, target, X0, tol, maxit, maxdist):
    N = X0.shape[0]
    X = np.empty_like(X0)
    ok = np.zeros(N, dtype=np.bool_)
    res = np.empty(N)
    for i in range(N):
        x, flag, rr = newton_point(
            exps, coeffs, owner, dexps, dcoeffs, downer, nout, maxdeg, target, X0[i], tol, maxit, maxdist
        )
        X[i] = x
        ok[i] = flag
        res[i] = rr
    return X, ok, res


@njit
def newton_hyperplane(exps, coeffs, owner, dexps, dcoeffs, downer, nout, maxdeg, target, x0, normal, tol, maxit):
    """Newton on {G = target, normal . (x - x0) = 0}; the extra row keeps the
    correction orthogonal to ``normal`` (a tangent direction).  Returns (x, ok)."""
    n = x0.shape[0]
    x = x0.copy()
    r = np.zeros(nout)
    sc = np.zeros(nout)
    jflat = np.zeros(nout * n)
    A = np.zeros((n, n))
    rhs = np.zeros(n)
    dx = np.zeros(n)
    good = 0
    for it in range(maxit):
        res = _residual(exps, coeffs, owner, maxdeg, target, x, r, sc)
        if res <= tol:
            good += 1
            if good > 1:
                return x, True
        poly_eval(dexps, dcoeffs, downer, maxdeg, x, jflat)
        for i in range(nout):
            for j in range(n):
                A[i, j] = jflat[i * n + j]
            rhs[i] = r[i]
        c = 0.0
        for j in range(n):
            A[nout, j] = normal[j]
            c += normal[j] * (x[j] - x0[j])
        rhs[nout] = c
        if not solve_small(A, rhs, dx):
            return x, False
        for j in range(n):
            x[j] -= dx[j]
        if not np.isfinite(_norm(x)):
            return x, False
    res = _residual(exps, coeffs, owner, maxdeg, target, x, r, sc)
    return x, res <= tol


@njit
def linear_offsets(exps, coeffs, owner, dexps, dcoeffs, downer, nout, maxdeg, target, X):
    """First-order distance to {G = target}: length of the min-norm Gauss-Newton step at each row of X."""
    N = X.shape[0]
    n = X.shape[1]
    out = np.empty(N)
    r = np.zeros(nout)
    dx = np.zeros(n)
    jflat = np.zeros(nout * n)
    for i in range(N):
        poly_eval(exps, coeffs, owner, maxdeg, X[i], r)
        poly_eval(dexps, dcoeffs, downer, maxdeg, X[i], jflat)
        for k in range(nout):
            r[k] -= target[k]
        if nout <= n and _gn_step(jflat.reshape(nout, n), r, dx):
            out[i] = _norm(dx)
        else:
            out[i] = np.inf
    return out


@njit
def sphere_newton(exps, coeffs, owner, dexps, dcoeffs, downer, nout, maxdeg, target, z0, radius, tol, maxit):
    """Newton on {G = target, |z|^2 = radius^2} (square: nout = n - 1)."""
    n = z0.shape[0]
    z = z0.copy()
    r = np.zeros(nout)
    sc = np.zeros(nout)
    jflat = np.zeros(nout * n)
    A = np.zeros((n, n))
    rhs = np.zeros(n)
    dz = np.zeros(n)
    r2 = radius * radius
    good = 0
    for it in range(maxit):
        res = _residual(exps, coeffs, owner, maxdeg, target, z, r, sc)
        sres = abs(_dot(z, z) - r2) / max(r2, 1.0)
        if res <= tol and sres <= 1e-14:
            good += 1
            if good > 1:
                return z, True
        poly_eval(dexps, dcoeffs, downer, maxdeg, z, jflat)
        for i in range(nout):
            for j in range(n):
                A[i, j] = jflat[i * n + j]
            rhs[i] = r[i]
        for j in range(n):
            A[nout, j] = 2.0 * z[j]
        rhs[nout] = _dot(z, z) - r2
        if not solve_small(A, rhs, dz):
            return z, False
        for j in range(n):
            z[j] -= dz[j]
    res = _residual(exps, coeffs, owner, maxdeg, target, z, r, sc)
    sres = abs(_dot(z, z) - r2) / max(r2, 1.0)
    return z, (res <= tol and sres <= 1e-12)


@njit
def sphere_newton_batch(exps, coeffs, owner, dexps, dcoeffs, downer, nout, maxdeg, target, Z0, radius, tol, maxit):
    N = Z0.shape[0]
    Z = np.empty_like(Z0)
    ok = np.zeros(N, dtype=np.bool_)
    for i in range(N):
        z, flag = sphere_newton(exps, coeffs, owner, dexps, dcoeffs, downer, nout, maxdeg, target, Z0[i], radius, tol, maxit)
        Z[i] = z
        ok[i] = flag
    return Z, ok


# ---------------------------------------------------------------------------
# predictor-corrector continuation


@njit
def _tangent(jflat, nout, n, orient, out):
    """Unit tangent ``orient * cofactor / |cofactor|``.

    The cofactor field is continuous and nonvanishing along a regular curve,
    so a fixed sign gives a consistent direction of travel; a corrector that
    jumps onto an antiparallel strand shows up as a reversed tangent.
    """
    Jm = jflat.reshape(nout, n)
    cofactor_vector(Jm, out)
    nrm = _norm(out)
    if nrm == 0.0 or not np.isfinite(nrm):
        return 0.0
    for j in range(n):
        out[j] *= orient / nrm
    return nrm


@njit
def _seg_point_dist(a, b, p):
    n = a.shape[0]
    ab2 = 0.0
    t = 0.0
    for j in range(n):
        ab2 += (b[j] - a[j]) ** 2
        t += (p[j] - a[j]) * (b[j] - a[j])
    if ab2 > 0.0:
        t = t / ab2
    if t < 0.0:
        t = 0.0
    elif t > 1.0:
        t = 1.0
    d = 0.0
    for j in range(n):
        q = a[j] + t * (b[j] - a[j])
        d += (p[j] - q) ** 2
    return np.sqrt(d)


@njit
def _sphere_cross_param(a, b, radius):
    """Smallest s in [0, 1] with |a + s (b - a)| = radius, -1 if none."""
    d2 = 0.0
    ad = 0.0
    a2 = 0.0
    for j in range(a.shape[0]):
        dj = b[j] - a[j]
        d2 += dj * dj
        ad += a[j] * dj
        a2 += a[j] * a[j]
    c = a2 - radius * radius
    disc = ad * ad - d2 * c
    if d2 == 0.0 or disc < 0.0:
        return -1.0
    sq = np.sqrt(disc)
    s1 = (-ad - sq) / d2
    s2 = (-ad + sq) / d2
    if 0.0 <= s1 <= 1.0:
        return s1
    if 0.0 <= s2 <= 1.0:
        return s2
    return -1.0


@njit
def trace_branch(
    exps, coeffs, owner, dexps, dcoeffs, downer, nout, maxdeg,
    target, x0, tau0, r_outer, r_inner,
    h0, hmin, hmax, tol, maxit, close_tol, max_points, sing_tol,
):
    """Follow {G = target} from x0 along +tau0 until it leaves the shell, closes or fails.

    Returns (points, status, min_sigma, max_residual).  ``r_inner <= 0`` disables
    the inner sphere.  Closure means the branch came back to x0; the last
    point is then x0 itself.
    """
    n = x0.shape[0]
    pts = np.empty((max_points, n))
    for j in range(n):
        pts[0, j] = x0[j]
    npts = 1
    x = x0.copy()
    tau = tau0.copy()
    nt = _norm(tau)
    for j in range(n):
        tau[j] /= nt
    tau_start = tau.copy()

    r = np.zeros(nout)
    sc = np.zeros(nout)
    jflat = np.zeros(nout * n)
    A = np.zeros((n, n))
    rhs = np.zeros(n)
    dy = np.zeros(n)
    xp = np.zeros(n)
    y = np.zeros(n)
    newtau = np.zeros(n)

    poly_eval(dexps, dcoeffs, downer, maxdeg, x, jflat)
    min_sig = sigma_min(jflat.reshape(nout, n))
    max_res = _residual(exps, coeffs, owner, maxdeg, target, x, r, sc)
    cofactor_vector(jflat.reshape(nout, n), newtau)
    orient = 1.0 if _dot(newtau, tau) >= 0.0 else -1.0

    # leaving the shell right away from a boundary seed
    xn = _norm(x)
    if xn >= r_outer * (1.0 - 1e-12) and _dot(x, tau) >= 0.0:
        return pts[:npts].copy(), EXIT_OUTER, min_sig, max_res
    if r_inner > 0.0 and xn <= r_inner * (1.0 + 1e-12) and _dot(x, tau) <= 0.0:
        return pts[:npts].copy(), EXIT_INNER, min_sig, max_res

    h = h0
    arclen = 0.0
    status = MAX_POINTS
    while True:
        if npts >= max_points - 2:
            status = MAX_POINTS
            break
        for j in range(n):
            xp[j] = x[j] + h * tau[j]
            y[j] = xp[j]
        converged = False
        first = 0.0
        prev = 0.0
        step = np.inf
        iters = 0
        res = 0.0
        for it in range(maxit):
            res = _residual(exps, coeffs, owner, maxdeg, target, y, r, sc)
            if it > 0 and res <= tol and step <= 1e-9 * h + 1e-14 * (1.0 + _norm(y)):
                converged = True
                break
            poly_eval(dexps, dcoeffs, downer, maxdeg, y, jflat)
            for i in range(nout):
                for j in range(n):
                    A[i, j] = jflat[i * n + j]
                rhs[i] = r[i]
            s = 0.0
            for j in range(n):
                A[nout, j] = tau[j]
                s += tau[j] * (y[j] - xp[j])
            rhs[nout] = s
            if not solve_small(A, rhs, dy):
                break
            step = _norm(dy)
            iters = it + 1
            noise = 1e-12 * (1.0 + _norm(y))
            if it == 0:
                first = step
                if step > 0.3 * h + noise:
                    break
            elif step > noise and step > 0.5 * prev:
                break
            prev = step
            for j in range(n):
                y[j] -= dy[j]
        ok = converged and np.isfinite(_norm(y))
        if ok:
            d = 0.0
            for j in range(n):
                d += (y[j] - xp[j]) ** 2
            if np.sqrt(d) > 0.2 * h:
                ok = False
        if ok:
            poly_eval(dexps, dcoeffs, downer, maxdeg, y, jflat)
            nrm = _tangent(jflat, nout, n, orient, newtau)
            if nrm == 0.0:
                ok = False
            elif _dot(newtau, tau) < 0.94:
                ok = False
            else:
                fw = 0.0
                for j in range(n):
                    fw += (y[j] - x[j]) * tau[j]
                if fw <= 0.0:
                    ok = False
        if not ok:
            h *= 0.5
            if h < hmin:
                status = UNDERFLOW
                break
            continue

        sig = sigma_min(jflat.reshape(nout, n))
        if sig < min_sig:
            min_sig = sig
        if res > max_res:
            max_res = res
        if sig <= sing_tol:
            for j in range(n):
                pts[npts, j] = y[j]
            npts += 1
            status = SINGULAR
            break

        yn = _norm(y)
        seglen = 0.0
        for j in range(n):
            seglen += (y[j] - x[j]) ** 2
        seglen = np.sqrt(seglen)

        # loop closure back to the start point
        if npts >= 3 and arclen > 0.0 and _dot(newtau, tau_start) > 0.0:
            dclose = _seg_point_dist(x, y, x0)
            if dclose <= max(close_tol, 0.05 * seglen):
                for j in range(n):
                    pts[npts, j] = x0[j]
                npts += 1
                status = CLOSED
                break

        # shell exits
        crossed = 0
        if yn > r_outer:
            crossed = 1
        elif r_inner > 0.0 and yn < r_inner:
            crossed = 2
        elif r_inner > 0.0:
            # chord dipping inside the inner sphere between two outside points
            sdip = _sphere_cross_param(x, y, r_inner)
            if sdip > 0.0 and sdip < 1.0:
                crossed = 2
        if crossed > 0:
            rad = r_outer if crossed == 1 else r_inner
            sp = _sphere_cross_param(x, y, rad)
            if sp < 0.0:
                sp = 1.0
            z0 = np.empty(n)
            for j in range(n):
                z0[j] = x[j] + sp * (y[j] - x[j])
            z, zok = sphere_newton(exps, coeffs, owner, dexps, dcoeffs, downer, nout, maxdeg, target, z0, rad, tol, maxit + 10)
            dz = 0.0
            for j in range(n):
                dz += (z[j] - z0[j]) ** 2
            if zok and np.sqrt(dz) <= seglen + 1e-12 * rad:
                for j in range(n):
                    pts[npts, j] = z[j]
                npts += 1
                status = EXIT_OUTER if crossed == 1 else EXIT_INNER
                break
            # could not land on the sphere: shorten the step and retry
            h *= 0.5
            if h < hmin:
                status = UNDERFLOW
                break
            continue

        for j in range(n):
            pts[npts, j] = y[j]
            x[j] = y[j]
            tau[j] = newtau[j]
        npts += 1
        arclen += seglen
        if iters <= 3:
            h = min(h * 1.6, hmax)
        elif iters >= 6:
            h = max(h * 0.7, hmin)
    return pts[:npts].copy(), status, min_sig, max_res


# ---------------------------------------------------------------------------
# geometry helpers


@njit
def polyline_excess(P, poly, rel):
    """For each row p of P: min over segments s of poly of dist(p, s) - rel * |s|."""
    N = P.shape[0]
    K = poly.shape[0]
    out = np.full(N, np.inf)
    if K == 1:
        for i in range(N):
            d = 0.0
            for j in range(P.shape[1]):
                d += (P[i, j] - poly[0, j]) ** 2
            out[i] = np.sqrt(d)
        return out
    seglen = np.empty(K - 1)
    for k in range(K - 1):
        s = 0.0
        for j in range(P.shape[1]):
            s += (poly[k + 1, j] - poly[k, j]) ** 2
        seglen[k] = np.sqrt(s)
    for i in range(N):
        best = np.inf
        for k in range(K - 1):
            d = _seg_point_dist(poly[k], poly[k + 1], P[i]) - rel * seglen[k]
            if d < best:
                best = d
        out[i] = best
    return out


@njit
def segment_crossings_2d(P, Q):
    """Index pairs (i, k) and parameters where segment P[i]P[i+1] crosses Q[k]Q[k+1]."""
    res_i = []
    res_k = []
    res_s = []
    for i in range(P.shape[0] - 1):
        ax, ay = P[i, 0], P[i, 1]
        bx, by = P[i + 1, 0], P[i + 1, 1]
        minx, maxx = min(ax, bx), max(ax, bx)
        miny, maxy = min(ay, by), max(ay, by)
        for k in range(Q.shape[0] - 1):
            cx, cy = Q[k, 0], Q[k, 1]
            dx, dy = Q[k + 1, 0], Q[k + 1, 1]
            if max(cx, dx) < minx or min(cx, dx) > maxx or max(cy, dy) < miny or min(cy, dy) > maxy:
                continue
            rx, ry = bx - ax, by - ay
            sx, sy = dx - cx, dy - cy
            den = rx * sy - ry * sx
            if den == 0.0:
                continue
            qpx, qpy = cx - ax, cy - ay
            s = (qpx * sy - qpy * sx) / den
            u = (qpx * ry - qpy * rx) / den
            if 0.0 <= s < 1.0 and 0.0 <= u < 1.0:
                res_i.append(i)
                res_k.append(k)
                res_s.append(s)
    out_i = np.empty(len(res_i), dtype=np.int64)
    out_k = np.empty(len(res_i), dtype=np.int64)
    out_s = np.empty(len(res_i))
    for m in range(len(res_i)):
        out_i[m] = res_i[m]
        out_k[m] = res_k[m]
        out_s[m] = res_s[m]
    return out_i, out_k, out_s
