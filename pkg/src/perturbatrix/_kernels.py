"""Compiled dense eigensolver kernels.

Status codes instead of exceptions: numba cannot raise the library's exception
classes, so callers translate a nonzero ``info`` into ``NoConvergence``.
"""

import numpy as np
from numba import config, njit, prange

# TBB on this platform is often too old and only produces a warning
config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

_EPS = np.finfo(np.float64).eps


@njit(cache=True)
def _cabs1(z):
    return abs(z.real) + abs(z.imag)


# ---------------------------------------------------------------------------
# Hermitian: Householder tridiagonalization + implicit QL
# ---------------------------------------------------------------------------

@njit(cache=True)
def hermitian_tridiagonalize(a):
    """Reduce Hermitian ``a`` to a real symmetric tridiagonal matrix.

    Returns ``(d, e, q)`` with ``a = q @ T @ q^H``, ``T = tridiag(e, d, e)``
    real; ``e[k]`` couples rows ``k`` and ``k + 1``.
    """
    n = a.shape[0]
    h = a.copy()
    q = np.eye(n, dtype=np.complex128)
    for k in range(n - 2):
        m = n - k - 1
        x = h[k + 1:, k].copy()
        xnorm = 0.0
        for i in range(m):
            xnorm += x[i].real ** 2 + x[i].imag ** 2
        xnorm = np.sqrt(xnorm)
        tail = 0.0
        for i in range(1, m):
            tail += x[i].real ** 2 + x[i].imag ** 2
        if tail == 0.0:
            continue
        x0 = x[0]
        ax0 = abs(x0)
        phase = x0 / ax0 if ax0 > 0.0 else 1.0 + 0.0j
        alpha = -phase * xnorm
        v = x.copy()
        v[0] -= alpha
        vnorm = 0.0
        for i in range(m):
            vnorm += v[i].real ** 2 + v[i].imag ** 2
        vnorm = np.sqrt(vnorm)
        for i in range(m):
            v[i] /= vnorm
        # h <- P h P with P = I - 2 v v^H acting on rows/cols k+1..n-1
        w = v.conj() @ np.ascontiguousarray(h[k + 1:, :])
        for i in range(m):
            for j in range(n):
                h[k + 1 + i, j] -= 2.0 * v[i] * w[j]
        w2 = np.ascontiguousarray(h[:, k + 1:]) @ v
        for i in range(n):
            for j in range(m):
                h[i, k + 1 + j] -= 2.0 * w2[i] * np.conj(v[j])
        w3 = np.ascontiguousarray(q[:, k + 1:]) @ v
        for i in range(n):
            for j in range(m):
                q[i, k + 1 + j] -= 2.0 * w3[i] * np.conj(v[j])
    d = np.empty(n)
    e = np.zeros(n)
    # diagonal phase rotation makes the off-diagonal real and nonnegative
    phase = np.ones(n, dtype=np.complex128)
    for k in range(n):
        d[k] = h[k, k].real
    for k in range(n - 1):
        s = h[k + 1, k]
        a_s = abs(s)
        e[k] = a_s
        if a_s > 0.0:
            phase[k + 1] = phase[k] * s / a_s
        else:
            phase[k + 1] = phase[k]
    for i in range(n):
        for j in range(n):
            q[i, j] *= phase[j]
    return d, e, q


@njit(cache=True)
def tridiagonal_ql(d, e, z, max_iter):
    """Implicit QL with Wilkinson shifts on a real symmetric tridiagonal.

    ``d`` (diagonal) and ``e`` (sub-diagonal, ``e[k]`` between ``k`` and
    ``k+1``) are overwritten; rotations are accumulated into the columns of
    ``z``.  Returns the total iteration count, or -1 if ``max_iter`` is hit.
    """
    n = d.shape[0]
    total = 0
    for l in range(n):
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= _EPS * dd:
                    e[m] = 0.0
                    break
                m += 1
            if m == l:
                break
            total += 1
            if total > max_iter:
                return -1
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = np.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + (r if g >= 0.0 else -r))
            s = 1.0
            c = 1.0
            p = 0.0
            i = m - 1
            underflow = False
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = np.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                for k in range(z.shape[0]):
                    f2 = z[k, i + 1]
                    z[k, i + 1] = s * z[k, i] + c * f2
                    z[k, i] = c * z[k, i] - s * f2
                i -= 1
            if underflow:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return total


# ---------------------------------------------------------------------------
# General complex: balance -> Hessenberg -> single-shift QR
# ---------------------------------------------------------------------------

@njit(cache=True)
def balance(a):
    """Diagonal similarity scaling by powers of two; returns scale vector."""
    n = a.shape[0]
    scale = np.ones(n)
    radix = 2.0
    sqrdx = radix * radix
    done = False
    while not done:
        done = True
        for i in range(n):
            c = 0.0
            r = 0.0
            for j in range(n):
                if j != i:
                    c += _cabs1(a[j, i])
                    r += _cabs1(a[i, j])
            if c != 0.0 and r != 0.0:
                g = r / radix
                f = 1.0
                s = c + r
                while c < g:
                    f *= radix
                    c *= sqrdx
                g = r * radix
                while c > g:
                    f /= radix
                    c /= sqrdx
                if (c + r) / f < 0.95 * s:
                    done = False
                    g = 1.0 / f
                    scale[i] *= f
                    for j in range(n):
                        a[i, j] *= g
                    for j in range(n):
                        a[j, i] *= f
    return scale


@njit(cache=True)
def hessenberg(h, q, want_q):
    """In-place Householder reduction to upper Hessenberg form."""
    n = h.shape[0]
    for k in range(n - 2):
        m = n - k - 1
        tail = 0.0
        for i in range(1, m):
            tail += h[k + 1 + i, k].real ** 2 + h[k + 1 + i, k].imag ** 2
        if tail == 0.0:
            continue
        x0 = h[k + 1, k]
        xnorm = np.sqrt(tail + x0.real ** 2 + x0.imag ** 2)
        ax0 = abs(x0)
        phase = x0 / ax0 if ax0 > 0.0 else 1.0 + 0.0j
        alpha = -phase * xnorm
        v = h[k + 1:, k].copy()
        v[0] -= alpha
        vnorm = 0.0
        for i in range(m):
            vnorm += v[i].real ** 2 + v[i].imag ** 2
        vnorm = np.sqrt(vnorm)
        for i in range(m):
            v[i] /= vnorm
        for j in range(k, n):
            s = 0.0j
            for i in range(m):
                s += np.conj(v[i]) * h[k + 1 + i, j]
            s *= 2.0
            for i in range(m):
                h[k + 1 + i, j] -= v[i] * s
        for i in range(n):
            s = 0.0j
            for j in range(m):
                s += h[i, k + 1 + j] * v[j]
            s *= 2.0
            for j in range(m):
                h[i, k + 1 + j] -= s * np.conj(v[j])
        if want_q:
            for i in range(n):
                s = 0.0j
                for j in range(m):
                    s += q[i, k + 1 + j] * v[j]
                s *= 2.0
                for j in range(m):
                    q[i, k + 1 + j] -= s * np.conj(v[j])
        h[k + 1, k] = alpha
        for i in range(k + 2, n):
            h[i, k] = 0.0j


@njit(cache=True)
def _givens(a, b):
    na = abs(a)
    nb = abs(b)
    if nb == 0.0:
        return 1.0, 0.0j
    if na == 0.0:
        return 0.0, np.conj(b) / nb
    nu = np.hypot(na, nb)
    c = na / nu
    s = (a / na) * np.conj(b) / nu
    return c, s


@njit(cache=True)
def hessenberg_qr(h, z, want_t, max_iter_per_eig):
    """Complex single-shift QR on upper Hessenberg ``h`` (in place).

    On success the diagonal of ``h`` holds the eigenvalues and returns 0; if
    ``want_t`` the full Schur form is built and rotations accumulate into
    ``z``.  Returns the (1-based) row at which convergence failed otherwise.
    """
    n = h.shape[0]
    if n == 0:
        return 0
    hnorm = 0.0
    for i in range(n):
        for j in range(max(0, i - 1), n):
            hnorm = max(hnorm, _cabs1(h[i, j]))
    hi = n - 1
    its = 0
    while hi >= 0:
        # locate the active unreduced block [lo, hi]
        lo = hi
        while lo > 0:
            tst = _cabs1(h[lo - 1, lo - 1]) + _cabs1(h[lo, lo])
            if tst == 0.0:
                tst = hnorm
            if _cabs1(h[lo, lo - 1]) <= _EPS * tst:
                h[lo, lo - 1] = 0.0j
                break
            lo -= 1
        if lo == hi:
            hi -= 1
            its = 0
            continue
        its += 1
        if its > max_iter_per_eig:
            return hi + 1
        # shift
        if its % 10 == 0:
            mu = h[hi, hi] + 0.75 * abs(h[hi, hi - 1].real) + 0.75j * abs(h[hi, hi - 1].imag)
        else:
            a = h[hi - 1, hi - 1]
            b = h[hi - 1, hi]
            c = h[hi, hi - 1]
            d = h[hi, hi]
            p = 0.5 * (a - d)
            bc = b * c
            disc = np.sqrt(p * p + bc)
            den1 = p + disc
            den2 = p - disc
            den = den1 if abs(den1) >= abs(den2) else den2
            if abs(den) == 0.0:
                mu = d
            else:
                mu = d - bc / den
        i1 = 0 if want_t else lo
        i2 = n - 1 if want_t else hi
        x = h[lo, lo] - mu
        y = h[lo + 1, lo]
        for k in range(lo, hi):
            if k > lo:
                x = h[k, k - 1]
                y = h[k + 1, k - 1]
            c, s = _givens(x, y)
            jstart = k - 1 if k > lo else k
            for j in range(jstart, i2 + 1):
                t1 = h[k, j]
                t2 = h[k + 1, j]
                h[k, j] = c * t1 + s * t2
                h[k + 1, j] = -np.conj(s) * t1 + c * t2
            if k > lo:
                h[k + 1, k - 1] = 0.0j
            iend = min(k + 2, hi)
            for i in range(i1, iend + 1):
                t1 = h[i, k]
                t2 = h[i, k + 1]
                h[i, k] = c * t1 + np.conj(s) * t2
                h[i, k + 1] = -s * t1 + c * t2
            if want_t:
                for i in range(n):
                    t1 = z[i, k]
                    t2 = z[i, k + 1]
                    z[i, k] = c * t1 + np.conj(s) * t2
                    z[i, k + 1] = -s * t1 + c * t2
    return 0


@njit(cache=True)
def triangular_eigenvectors(t):
    """Right eigenvectors of upper-triangular ``t`` by back substitution."""
    n = t.shape[0]
    tnorm = 0.0
    for i in range(n):
        for j in range(i, n):
            tnorm = max(tnorm, abs(t[i, j]))
    small = max(_EPS * tnorm, 1e-300)
    y = np.zeros((n, n), dtype=np.complex128)
    for k in range(n):
        lam = t[k, k]
        y[k, k] = 1.0
        for j in range(k - 1, -1, -1):
            s = 0.0j
            for l in range(j + 1, k + 1):
                s += t[j, l] * y[l, k]
            den = t[j, j] - lam
            if abs(den) < small:
                den = small
            y[j, k] = -s / den
    return y


# ---------------------------------------------------------------------------
# Winding numbers of a closed polygon
# ---------------------------------------------------------------------------

@njit(cache=True)
def rank_one_scaled_pair(alphas, deltas, lams, log_gc):
    """Scaled ``prod(alpha - l)``, ``gamma c prod(delta - l)`` and their log-derivatives.

    ``log_gc`` is ``log(gamma c)``; pass ``nan`` for ``gamma c == 0``.
    """
    m = lams.size
    p0 = np.empty(m, dtype=np.complex128)
    p1 = np.empty(m, dtype=np.complex128)
    s0 = np.empty(m, dtype=np.complex128)
    s1 = np.empty(m, dtype=np.complex128)
    zero = np.isnan(log_gc.real)
    for k in range(m):
        lam = lams[k]
        l0 = 0j
        d0 = 0j
        for a in alphas:
            x = a - lam
            l0 += np.log(x)
            d0 -= 1.0 / x
        s0[k] = d0
        if zero:
            p0[k] = 1.0
            p1[k] = 0.0
            s1[k] = 0.0
            continue
        l1 = log_gc
        d1 = 0j
        for d in deltas:
            x = d - lam
            l1 += np.log(x)
            d1 -= 1.0 / x
        sc = max(l0.real, l1.real)
        p0[k] = np.exp(l0 - sc)
        p1[k] = np.exp(l1 - sc)
        s1[k] = d1
    return p0, p1, s0, s1


@njit(cache=True, parallel=True)
def winding_numbers(cx, cy, px, py):
    """Winding number of the closed polygon ``(cx, cy)`` about each ``(px, py)``.

    Signed crossings of the rightward horizontal ray; points on an edge get
    an arbitrary but finite answer.
    """
    m = cx.size
    out = np.zeros(px.size, dtype=np.int64)
    for i in prange(px.size):
        x0 = px[i]
        y0 = py[i]
        w = 0
        for k in range(m):
            ax = cx[k]
            ay = cy[k]
            j = k + 1 if k + 1 < m else 0
            bx = cx[j]
            by = cy[j]
            if ay <= y0:
                if by > y0 and (bx - ax) * (y0 - ay) - (x0 - ax) * (by - ay) > 0.0:
                    w += 1
            elif by <= y0 and (bx - ax) * (y0 - ay) - (x0 - ax) * (by - ay) < 0.0:
                w -= 1
        out[i] = w
    return out
