"""Pure-Python twin of the active-set QP core.

Same contract as the compiled kernel: given a positive definite Hessian, a
row system C x <= d and a feasible starting point, iterate a primal
active-set method until the KKT conditions hold.  Equality-constrained
subproblems are solved through the bordered KKT matrix; pivoting rules are
deterministic (first index wins every tie).

Returns (x, lam, iterations, status) with status 0 = optimal,
1 = iteration limit, 2 = factorization failure.
"""

from __future__ import annotations

import numpy as np

_P_TOL = 1e-11
_RATIO_TOL = 1e-12
_ACT_TOL = 1e-9
_INDEP_TOL = 1e-10


def _initial_working_set(C, d, x):
    """Active rows at x, screened to a linearly independent subset."""
    work = []
    ortho = []
    resid = d - C @ x
    for i in range(C.shape[0]):
        if resid[i] <= _ACT_TOL * (1.0 + abs(d[i])):
            r = C[i].copy()
            for q in ortho:
                r -= (r @ q) * q
            nr = float(np.linalg.norm(r))
            if nr > _INDEP_TOL * (1.0 + float(np.linalg.norm(C[i]))):
                work.append(i)
                ortho.append(r / nr)
    return work


def as_core(H, f, C, d, x, tol, max_iter):
    n = H.shape[0]
    m = C.shape[0]
    x = np.array(x, dtype=float)
    lam_full = np.zeros(m)

    try:
        np.linalg.cholesky(H)
    except np.linalg.LinAlgError:
        return x, lam_full, 0, 2

    work = _initial_working_set(C, d, x) if m else []
    in_work = np.zeros(m, dtype=bool)
    in_work[work] = True

    iters = 0
    retires = 0
    while iters < max_iter:
        iters += 1
        g = H @ x + f
        k = len(work)
        if k == 0:
            p = np.linalg.solve(H, -g)
            lam_w = np.zeros(0)
        else:
            Cw = C[work]
            K = np.zeros((n + k, n + k))
            K[:n, :n] = H
            K[:n, n:] = Cw.T
            K[n:, :n] = Cw
            rhs = np.concatenate([-g, np.zeros(k)])
            try:
                sol = np.linalg.solve(K, rhs)
            except np.linalg.LinAlgError:
                # dependent working set; retire the most recent addition
                in_work[work.pop()] = False
                continue
            p = sol[:n]
            lam_w = sol[n:]
            # the step must stay in the working-set null space; a large
            # residual means the KKT system was too ill-conditioned to trust
            drift = float(np.abs(Cw @ p).max(initial=0.0))
            if drift > 1e-7 * (1.0 + float(np.abs(p).max(initial=0.0))):
                in_work[work.pop()] = False
                continue

        if float(np.abs(p).max(initial=0.0)) <= _P_TOL * (1.0 + float(np.abs(x).max(initial=0.0))):
            if k == 0 or float(lam_w.min()) >= -tol:
                lam_full[:] = 0.0
                if k:
                    lam_full[work] = np.maximum(lam_w, 0.0)
                return x, lam_full, iters, 0
            j = int(np.argmin(lam_w))
            in_work[work.pop(j)] = False
            continue

        alpha = 1.0
        block = -1
        if m:
            s = C @ p
            slack = d - C @ x
            for i in range(m):
                if not in_work[i] and s[i] > _RATIO_TOL:
                    r = slack[i] / s[i]
                    if r < 0.0:
                        r = 0.0
                    if r < alpha:
                        alpha = r
                        block = i
        x += alpha * p
        if block >= 0:
            work.append(block)
            in_work[block] = True

    lam_full[:] = 0.0
    if work:
        lam_full[work] = np.maximum(lam_w, 0.0) if len(lam_w) == len(work) else 0.0
    return x, lam_full, iters, 1
