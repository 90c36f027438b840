# cython: language_level=3
"""Compiled twin of the active-set QP core.

Identical contract and pivoting rules as the pure-Python kernel, with the
equality-constrained subproblems solved by a Cholesky factorization of the
Hessian plus a Schur complement on the working rows.  All linear algebra is
done in flat C loops on preallocated scratch, so a full solve of the
package's typical programs (n ~ 60, a few dozen working-set changes) costs
well under a millisecond.
"""

import numpy as np

from libc.math cimport fabs, sqrt, INFINITY


cdef int _chol(double* a, int n) nogil:
    """In-place lower Cholesky of a (n x n, row major). 0 on success.

    Fails on pivots that collapse relative to the largest diagonal entry,
    which flags numerically dependent working sets before they poison the
    step computation.
    """
    cdef int i, j, k
    cdef double s, dmax = 0.0
    for j in range(n):
        if a[j * n + j] > dmax:
            dmax = a[j * n + j]
    for j in range(n):
        s = a[j * n + j]
        for k in range(j):
            s -= a[j * n + k] * a[j * n + k]
        if s <= 1e-13 * dmax or s <= 0.0:
            return 1
        a[j * n + j] = sqrt(s)
        for i in range(j + 1, n):
            s = a[i * n + j]
            for k in range(j):
                s -= a[i * n + k] * a[j * n + k]
            a[i * n + j] = s / a[j * n + j]
    return 0


cdef void _fwd(double* L, double* b, int n) nogil:
    """Solve L y = b in place (L lower from _chol)."""
    cdef int i, k
    cdef double s
    for i in range(n):
        s = b[i]
        for k in range(i):
            s -= L[i * n + k] * b[k]
        b[i] = s / L[i * n + i]


cdef void _bwd(double* L, double* b, int n) nogil:
    """Solve L^T y = b in place."""
    cdef int i, k
    cdef double s
    for i in range(n - 1, -1, -1):
        s = b[i]
        for k in range(i + 1, n):
            s -= L[k * n + i] * b[k]
        b[i] = s / L[i * n + i]


def as_core(double[:, ::1] H, double[::1] f, double[:, ::1] C, double[::1] d,
            double[::1] x, double tol, int max_iter):
    cdef int n = H.shape[0]
    cdef int m = C.shape[0]
    cdef int iters = 0, k = 0, i, j, t, r, block, drop, retires = 0
    cdef double s, xmax, pmax, alpha, ratio, lam_min

    lam_np = np.zeros(m)
    cdef double[::1] lam = lam_np
    x_np = np.asarray(x)

    L_np = np.empty((n, n))
    cdef double[:, ::1] L = L_np
    for i in range(n):
        for j in range(n):
            L[i, j] = H[i, j]
    if _chol(&L[0, 0], n):
        return x_np, lam_np, 0, 2

    # scratch:  V = L^-1 C_W^T (n x k),  S = V^T V and its Cholesky (k x k)
    V_np = np.empty((n, n))
    S_np = np.empty(n * n)   # k x k Schur factor packed at row stride k
    g_np = np.empty(n)
    u_np = np.empty(n)
    p_np = np.empty(n)
    lw_np = np.zeros(n)
    col_np = np.empty(n)
    work_np = np.empty(n, dtype=np.intc)
    inw_np = np.zeros(m if m else 1, dtype=np.intc)
    cdef double[:, ::1] V = V_np
    cdef double[::1] S = S_np
    cdef double[::1] g = g_np
    cdef double[::1] u = u_np
    cdef double[::1] p = p_np
    cdef double[::1] lw = lw_np
    cdef double[::1] col = col_np
    cdef int[::1] work = work_np
    cdef int[::1] inw = inw_np

    # initial working set: active independent rows (Gram-Schmidt screening)
    Q_np = np.empty((n, n))
    cdef double[:, ::1] Q = Q_np
    cdef int nq = 0
    cdef double nr, cn
    for i in range(m):
        s = d[i]
        for j in range(n):
            s -= C[i, j] * x[j]
        if s <= 1e-9 * (1.0 + fabs(d[i])) and k < n:
            for j in range(n):
                col[j] = C[i, j]
            for t in range(nq):
                s = 0.0
                for j in range(n):
                    s += col[j] * Q[t, j]
                for j in range(n):
                    col[j] -= s * Q[t, j]
            nr = 0.0
            cn = 0.0
            for j in range(n):
                nr += col[j] * col[j]
                cn += C[i, j] * C[i, j]
            nr = sqrt(nr)
            if nr > 1e-10 * (1.0 + sqrt(cn)):
                work[k] = i
                inw[i] = 1
                k += 1
                for j in range(n):
                    Q[nq, j] = col[j] / nr
                nq += 1

    while iters < max_iter:
        iters += 1
        # g = Hx + f ; u = L^-1 g
        for i in range(n):
            s = f[i]
            for j in range(n):
                s += H[i, j] * x[j]
            g[i] = s
            u[i] = s
        _fwd(&L[0, 0], &u[0], n)

        if k == 0:
            for i in range(n):
                p[i] = u[i]
            _bwd(&L[0, 0], &p[0], n)
            for i in range(n):
                p[i] = -p[i]
        else:
            for t in range(k):
                r = work[t]
                for j in range(n):
                    col[j] = C[r, j]
                _fwd(&L[0, 0], &col[0], n)
                for j in range(n):
                    V[j, t] = col[j]
            for i in range(k):
                for j in range(i + 1):
                    s = 0.0
                    for t in range(n):
                        s += V[t, i] * V[t, j]
                    S[i * k + j] = s
                    S[j * k + i] = s
            if _chol(&S[0], k):
                # dependent working set; retire the most recent addition
                retires += 1
                if retires > 2 * n:
                    return x_np, lam_np, iters, 2
                k -= 1
                inw[work[k]] = 0
                continue
            for i in range(k):
                s = 0.0
                for t in range(n):
                    s += V[t, i] * u[t]
                lw[i] = -s
            _fwd(&S[0], &lw[0], k)
            _bwd(&S[0], &lw[0], k)
            for i in range(n):
                s = u[i]
                for t in range(k):
                    s += V[i, t] * lw[t]
                p[i] = s
            _bwd(&L[0, 0], &p[0], n)
            for i in range(n):
                p[i] = -p[i]
            # the step must stay in the working-set null space; a large
            # residual means S was too ill-conditioned to trust
            pmax = 0.0
            for i in range(n):
                if fabs(p[i]) > pmax:
                    pmax = fabs(p[i])
            alpha = 0.0
            for t in range(k):
                r = work[t]
                s = 0.0
                for j in range(n):
                    s += C[r, j] * p[j]
                if fabs(s) > alpha:
                    alpha = fabs(s)
            if alpha > 1e-7 * (1.0 + pmax):
                retires += 1
                if retires > 2 * n:
                    return x_np, lam_np, iters, 2
                k -= 1
                inw[work[k]] = 0
                continue

        xmax = 0.0
        pmax = 0.0
        for i in range(n):
            if fabs(x[i]) > xmax:
                xmax = fabs(x[i])
            if fabs(p[i]) > pmax:
                pmax = fabs(p[i])

        if pmax <= 1e-11 * (1.0 + xmax):
            lam_min = 0.0
            drop = -1
            for i in range(k):
                if lw[i] < lam_min:
                    lam_min = lw[i]
                    drop = i
            if drop < 0 or lam_min >= -tol:
                for i in range(m):
                    lam[i] = 0.0
                for i in range(k):
                    lam[work[i]] = lw[i] if lw[i] > 0.0 else 0.0
                return x_np, lam_np, iters, 0
            inw[work[drop]] = 0
            for i in range(drop, k - 1):
                work[i] = work[i + 1]
            k -= 1
            continue

        alpha = 1.0
        block = -1
        for i in range(m):
            if inw[i]:
                continue
            s = 0.0
            for j in range(n):
                s += C[i, j] * p[j]
            if s > 1e-12:
                ratio = d[i]
                for j in range(n):
                    ratio -= C[i, j] * x[j]
                ratio /= s
                if ratio < 0.0:
                    ratio = 0.0
                if ratio < alpha:
                    alpha = ratio
                    block = i
        for i in range(n):
            x[i] += alpha * p[i]
        if block >= 0 and k < n:
            work[k] = block
            inw[block] = 1
            k += 1

    for i in range(m):
        lam[i] = 0.0
    for i in range(k):
        lam[work[i]] = lw[i] if lw[i] > 0.0 else 0.0
    return x_np, lam_np, iters, 1
