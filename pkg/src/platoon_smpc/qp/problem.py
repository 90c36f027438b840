"""Dense convex QP with inequality rows and box bounds.

    min  0.5 x'Hx + f'x
    s.t. Aineq x <= bineq,   lb <= x <= ub

solved by a primal active-set method (deterministic pivoting, no randomized
steps).  Designed for the small dense programs this package produces
(n of order 60); bounds are folded into the constraint rows.  A feasible
start is found with a single-slack phase-I problem run through the same
active-set core when the initial guess violates the inequality rows.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .backend import get_core

OPTIMAL = "optimal"
MAX_ITERATIONS = "max_iterations"
NUMERICAL_FAILURE = "numerical_failure"

_ZERO_ROW_REG = 1e-9     # lifts identically-zero rows of H (slack blocks)
_FEAS_TOL = 1e-9


@dataclass
class QpProblem:
    H: np.ndarray                  # (n, n) symmetric PSD
    f: np.ndarray                  # (n,)
    Aineq: Optional[np.ndarray] = None   # (p, n)
    bineq: Optional[np.ndarray] = None   # (p,)
    lb: Optional[np.ndarray] = None      # (n,), -inf allowed
    ub: Optional[np.ndarray] = None      # (n,), +inf allowed


@dataclass
class QpResult:
    x: np.ndarray
    objective: float
    iterations: int
    status: str
    primal_residual: float
    dual_residual: float
    multipliers: Optional[np.ndarray]  # for the Aineq rows, when present


def _validate(p: QpProblem):
    H = np.asarray(p.H, dtype=float)
    n = H.shape[0]
    if H.shape != (n, n):
        raise ValueError(f"H must be square, got {H.shape}")
    scale = max(1.0, float(np.abs(H).max())) if H.size else 1.0
    if float(np.abs(H - H.T).max(initial=0.0)) > 1e-10 * scale:
        raise ValueError("H must be symmetric within 1e-10")
    f = np.asarray(p.f, dtype=float).reshape(-1)
    if f.shape != (n,):
        raise ValueError(f"f must have length {n}")
    lb = np.full(n, -np.inf) if p.lb is None else np.asarray(p.lb, dtype=float).reshape(-1)
    ub = np.full(n, np.inf) if p.ub is None else np.asarray(p.ub, dtype=float).reshape(-1)
    if lb.shape != (n,) or ub.shape != (n,):
        raise ValueError("lb/ub must match the problem dimension")
    if np.any(lb > ub):
        raise ValueError("infeasible box: lb > ub")
    if p.Aineq is None:
        A = np.zeros((0, n))
        b = np.zeros(0)
    else:
        A = np.asarray(p.Aineq, dtype=float)
        b = np.asarray(p.bineq, dtype=float).reshape(-1)
        if A.ndim != 2 or A.shape[1] != n or b.shape != (A.shape[0],):
            raise ValueError("Aineq/bineq dimensions inconsistent with H")
    return 0.5 * (H + H.T), f, A, b, lb, ub


def _stack_constraints(A, b, lb, ub):
    """Fold finite bounds into the row system C x <= d (Aineq rows first)."""
    n = lb.shape[0]
    rows = [A]
    rhs = [b]
    ub_idx = np.where(np.isfinite(ub))[0]
    lb_idx = np.where(np.isfinite(lb))[0]
    E = np.eye(n)
    rows.append(E[ub_idx])
    rhs.append(ub[ub_idx])
    rows.append(-E[lb_idx])
    rhs.append(-lb[lb_idx])
    return np.vstack(rows), np.concatenate(rhs)


def _regularized(H):
    Hw = H.copy()
    zero_rows = np.where(~np.any(Hw != 0.0, axis=1))[0]
    Hw[zero_rows, zero_rows] = _ZERO_ROW_REG
    return Hw


def _phase_one(C, d, x, lb, ub, max_iter, core):
    """Find a feasible point by minimizing the worst constraint violation.

    One slack variable t relaxes every row; the exact-penalty objective
    0.5||x||^2 + 0.5 t^2 + K t drives t to zero once K exceeds the relevant
    multipliers, so K is escalated a few times.  The unit Hessian keeps the
    subproblem perfectly conditioned.
    """
    n = x.shape[0]
    m = C.shape[0]
    # rows relaxed by the slack; the slack itself stays nonnegative
    C1 = np.zeros((m + 1, n + 1))
    C1[:m, :n] = C
    C1[:m, n] = -1.0
    C1[m, n] = -1.0
    d1 = np.concatenate([d, [0.0]])
    H1 = np.eye(n + 1)
    scale = 1.0 + float(np.abs(d).max(initial=0.0))
    for penalty in (1e3 * scale, 1e6 * scale, 1e9 * scale):
        f1 = np.zeros(n + 1)
        f1[n] = penalty
        t0 = max(0.0, float(np.max(C @ x - d, initial=0.0))) * 1.01 + 1e-6
        x1 = np.concatenate([x, [t0]])
        x1, _, _, status = core(H1, f1, C1, d1, x1, 1e-10, max_iter)
        if status == 2:
            return None
        out = np.clip(x1[:n], lb, ub)
        if float(np.max(C @ out - d, initial=0.0)) <= 1e-7:
            return out
        x = out
    return None


def solve_qp(problem: QpProblem, tol: float = 1e-8, max_iter: int = 500,
             x0=None, backend: Optional[str] = None) -> QpResult:
    """Solve the QP; deterministic for identical inputs.

    ``backend`` overrides the import-time kernel choice ("python" or
    "compiled") for benchmarking; ``x0`` is an optional warm start that is
    clipped to the box and feasibility-repaired if needed.
    """
    H, f, A, b, lb, ub = _validate(problem)
    n = H.shape[0]
    p_rows = A.shape[0]
    core = get_core(backend)

    C, d = _stack_constraints(A, b, lb, ub)
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).reshape(-1).copy()
    x = np.clip(x, lb, ub)

    used_iters = 0
    if C.shape[0] and float(np.max(C @ x - d, initial=0.0)) > _FEAS_TOL:
        repaired = _phase_one(C, d, x, lb, ub, max_iter, core)
        if repaired is None:
            return _result(H, f, C, d, x, np.zeros(C.shape[0]), 0,
                           NUMERICAL_FAILURE, p_rows)
        x = repaired

    Hw = _regularized(H)
    status_code = 2
    lam = np.zeros(C.shape[0])
    for extra in (0.0, 1e-8, 1e-6):
        Hr = Hw if extra == 0.0 else Hw + extra * np.eye(n)
        x_try, lam, iters, status_code = core(Hr, f, C, d, x.copy(), tol, max_iter)
        used_iters += iters
        if status_code != 2:
            x = x_try
            break
    status = {0: OPTIMAL, 1: MAX_ITERATIONS, 2: NUMERICAL_FAILURE}[status_code]
    return _result(H, f, C, d, x, lam, used_iters, status, p_rows)


def _result(H, f, C, d, x, lam, iters, status, p_rows) -> QpResult:
    obj = float(0.5 * x @ (H @ x) + f @ x)
    primal = float(np.max(C @ x - d, initial=0.0))
    g = H @ x + f
    stat = g + (C.T @ lam if C.shape[0] else 0.0)
    dual = float(np.abs(stat).max(initial=0.0)) / max(1.0, float(np.abs(g).max(initial=0.0)))
    return QpResult(x=x, objective=obj, iterations=iters, status=status,
                    primal_residual=max(primal, 0.0), dual_residual=dual,
                    multipliers=lam[:p_rows].copy() if p_rows else None)


def dump_problem(problem: QpProblem, path):
    """Plain-text dump of the problem data for offline cross-checking."""
    H, f, A, b, lb, ub = _validate(problem)
    with open(path, "w", encoding="utf-8") as fh:
        for name, arr in (("H", H), ("f", f), ("Aineq", A), ("bineq", b),
                          ("lb", lb), ("ub", ub)):
            arr2 = np.atleast_2d(arr)
            fh.write(f"# {name} {arr2.shape[0]} {arr2.shape[1]}\n")
            for row in arr2:
                fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")
