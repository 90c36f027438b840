"""Multi-horizon stochastic MPC over a scenario tree, condensed to a dense QP.

Every non-root tree node contributes a probability-weighted quadratic state
cost; controls are shared across nodes at the same depth; a hinge penalty on
the predecessor gap error beyond a tolerance adds one slack variable per
non-root node.  Condensation eliminates the states by walking each node's
ancestor chain, leaving a QP in the stacked controls U and slacks Z:

    min 0.5 [U;Z]' H [U;Z] + f'[U;Z] + D
    s.t. [Bbar_r  -I] [U;Z] <= G,    a_min <= U <= a_max,  0 <= Z <= z_max

The baseline controller runs the identical pipeline on a single-branch chain
that holds the measured leader acceleration constant over the horizon.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import qp
from .driver import (DEFAULT_ACCEL_BOUNDS, DEFAULT_PARAMS, AccelDistribution,
                     DriverParams, predict_distribution)
from .dynamics import IDX_GAP_ERR_PRED, N_STATES, ModelMatrices, State, build_matrices
from .tree import EnvMeasurement, ScenarioTree, build_tree


@dataclass(frozen=True)
class CostWeights:
    q_diag: tuple = (15.0, 10.0, 15.0, 10.0, 1.0)  # state error weights
    r_u: float = 2.0          # control effort weight
    risk_weight: float = 1000.0   # hinge penalty on gap-error exceedance
    e_r: float = 2.0          # m, tolerated one-way predecessor gap error
    a_min: float = -5.0       # m/s^2
    a_max: float = 3.0        # m/s^2
    z_max: float = 100.0      # slack upper bound, far above physical errors

    def __post_init__(self):
        if len(self.q_diag) != N_STATES or any(q < 0 for q in self.q_diag):
            raise ValueError("q_diag must be 5 nonnegative weights")
        if self.r_u < 0 or self.risk_weight <= 0 or self.e_r <= 0 or self.z_max <= 0:
            raise ValueError("r_u >= 0 and risk_weight, e_r, z_max > 0 required")
        if not self.a_min < self.a_max:
            raise ValueError("a_min must be < a_max")


@dataclass(frozen=True)
class ControllerConfig:
    n_max: int = 50           # scenario tree size
    horizon: int = 10         # max tree depth / number of control moves
    branching: int = 3        # distribution support size per expansion
    dt: float = 0.1
    tau_a: float = 0.4        # s, first-order actuation lag
    weights: CostWeights = field(default_factory=CostWeights)
    driver: DriverParams = DEFAULT_PARAMS
    prediction: str = "stochastic"   # "stochastic" | "constant"
    literal_input_matrix: bool = False

    def __post_init__(self):
        if self.n_max < 1 or self.horizon < 1 or self.branching < 1:
            raise ValueError("n_max, horizon and branching must be >= 1")
        if self.prediction not in ("stochastic", "constant"):
            raise ValueError(f"unknown prediction mode {self.prediction!r}")

    def matrices(self) -> ModelMatrices:
        return build_matrices(self.dt, self.tau_a, self.literal_input_matrix)

    @property
    def bounds(self):
        return (self.weights.a_min, self.weights.a_max)

    def to_dict(self) -> dict:
        w = self.weights
        return {
            "n_max": self.n_max, "N": self.horizon, "m": self.branching,
            "dt": self.dt, "tau_a": self.tau_a,
            "Q_diag": list(w.q_diag), "r_u": w.r_u, "M": w.risk_weight,
            "e_r": w.e_r, "a_min": w.a_min, "a_max": w.a_max, "z_max": w.z_max,
            "driver_params": self.driver.to_dict(),
            "prediction": self.prediction,
            "literal_input_matrix": self.literal_input_matrix,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ControllerConfig":
        base = cls()
        w = CostWeights(
            q_diag=tuple(d.get("Q_diag", base.weights.q_diag)),
            r_u=float(d.get("r_u", base.weights.r_u)),
            risk_weight=float(d.get("M", base.weights.risk_weight)),
            e_r=float(d.get("e_r", base.weights.e_r)),
            a_min=float(d.get("a_min", base.weights.a_min)),
            a_max=float(d.get("a_max", base.weights.a_max)),
            z_max=float(d.get("z_max", base.weights.z_max)),
        )
        driver = (DriverParams.from_dict(d["driver_params"])
                  if "driver_params" in d else base.driver)
        return cls(
            n_max=int(d.get("n_max", base.n_max)),
            horizon=int(d.get("N", base.horizon)),
            branching=int(d.get("m", base.branching)),
            dt=float(d.get("dt", base.dt)),
            tau_a=float(d.get("tau_a", base.tau_a)),
            weights=w, driver=driver,
            prediction=str(d.get("prediction", base.prediction)),
            literal_input_matrix=bool(d.get("literal_input_matrix", False)),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


@dataclass
class ControlEnv:
    """Per-step measurements plus platoon-topology context for one follower."""

    v_lead: float
    gap_front: float
    a_lead: float
    a_pred: float
    v_front: Optional[float] = None
    pred_plan: Optional[np.ndarray] = None   # predecessor's broadcast command plan
    pred_is_leader: bool = True

    def measurement(self) -> EnvMeasurement:
        return EnvMeasurement(v_lead=self.v_lead, gap_front=self.gap_front,
                              a_lead=self.a_lead, a_pred=self.a_pred,
                              v_front=self.v_front)


@dataclass
class CondensedSystem:
    abar: np.ndarray      # (5*N_nr, 5)
    bbar: np.ndarray      # (5*N_nr, n_steps)
    cbar: np.ndarray      # (5*N_nr, 2*N_nl)
    abar_r: np.ndarray    # (N_nr, 5)   rows selecting each node's gap_err_pred
    bbar_r: np.ndarray    # (N_nr, n_steps)
    cbar_r: np.ndarray    # (N_nr, 2*N_nl)
    node_order: list      # row block -> node id (non-root, addition order)
    nonleaf_order: list   # column block -> node id (non-leaf, addition order)
    w_stack: np.ndarray   # (2*N_nl,) disturbances of the non-leaf nodes
    n_steps: int          # number of distinct control moves (max depth)


@dataclass
class QpSpec:
    H: np.ndarray
    f: np.ndarray
    D: float
    P: np.ndarray
    G: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    n_controls: int

    def to_problem(self) -> qp.QpProblem:
        return qp.QpProblem(H=self.H, f=self.f, Aineq=self.P, bineq=self.G,
                            lb=self.lb, ub=self.ub)


def condense(tree: ScenarioTree, mm: ModelMatrices) -> CondensedSystem:
    """Unroll the per-node recursion into stacked prediction matrices.

    Row blocks follow non-root nodes in addition order; each block is the
    parent's block advanced by A with the parent's control column and
    disturbance block added, so node i satisfies
    x_i = A x_parent + B u_depth(parent) + C w_parent by construction.
    """
    nodes = tree.nodes
    n = len(nodes)
    if n < 1:
        raise ValueError("tree has no nodes")
    for node in nodes[1:]:
        if node.parent is None or node.parent >= node.id:
            raise ValueError("non-root nodes must have an earlier parent")

    n_steps = tree.n_steps
    non_leaves = tree.non_leaves
    nonleaf_order = [nd.id for nd in nodes if nd.id in non_leaves]
    wcol = {nid: 2 * i for i, nid in enumerate(nonleaf_order)}
    n_nl = len(nonleaf_order)
    n_nr = n - 1

    A, B, C = mm.A, mm.B, mm.C
    # per-node running blocks; the root's state contribution is the identity
    rowsA = {0: np.eye(N_STATES)}
    rowsB = {0: np.zeros((N_STATES, n_steps))}
    rowsC = {0: np.zeros((N_STATES, 2 * n_nl))}

    abar = np.zeros((N_STATES * n_nr, N_STATES))
    bbar = np.zeros((N_STATES * n_nr, n_steps))
    cbar = np.zeros((N_STATES * n_nr, 2 * n_nl))
    node_order = []
    for node in nodes[1:]:
        pa = node.parent
        ra = A @ rowsA[pa]
        rb = A @ rowsB[pa]
        rc = A @ rowsC[pa]
        parent = nodes[pa]
        rb[:, parent.depth] += B[:, 0]
        rc[:, wcol[pa]:wcol[pa] + 2] += C
        rowsA[node.id], rowsB[node.id], rowsC[node.id] = ra, rb, rc
        blk = len(node_order)
        abar[5 * blk:5 * blk + 5] = ra
        bbar[5 * blk:5 * blk + 5] = rb
        cbar[5 * blk:5 * blk + 5] = rc
        node_order.append(node.id)

    w_stack = np.zeros(2 * n_nl)
    for i, nid in enumerate(nonleaf_order):
        w_stack[2 * i] = nodes[nid].a_leader
        w_stack[2 * i + 1] = nodes[nid].a_pred

    sel = slice(IDX_GAP_ERR_PRED, None, N_STATES)
    return CondensedSystem(
        abar=abar, bbar=bbar, cbar=cbar,
        abar_r=abar[sel].copy(), bbar_r=bbar[sel].copy(), cbar_r=cbar[sel].copy(),
        node_order=node_order, nonleaf_order=nonleaf_order,
        w_stack=w_stack, n_steps=n_steps)


def assemble_qp(cs: CondensedSystem, tree: ScenarioTree, weights: CostWeights,
                x0: State) -> QpSpec:
    """Turn the condensed prediction into the standard-form QP."""
    nodes = tree.nodes
    n_nr = len(cs.node_order)
    n_steps = cs.n_steps
    if cs.abar.shape != (N_STATES * n_nr, N_STATES):
        raise ValueError("condensed system inconsistent with tree")

    pis = np.array([nodes[nid].pi for nid in cs.node_order])
    qdiag_full = np.repeat(pis, N_STATES) * np.tile(np.asarray(weights.q_diag, dtype=float), n_nr)

    # shared controls: the move at depth d is paid once per non-leaf node at
    # that depth, weighted by the node's reach probability
    r_steps = np.zeros(n_steps)
    for nid in cs.nonleaf_order:
        r_steps[nodes[nid].depth] += nodes[nid].pi * weights.r_u

    x0v = x0.as_array()
    c0 = cs.abar @ x0v + cs.cbar @ cs.w_stack
    qb = qdiag_full[:, None] * cs.bbar
    h_uu = 2.0 * (cs.bbar.T @ qb + np.diag(r_steps))

    n_dec = n_steps + n_nr
    H = np.zeros((n_dec, n_dec))
    H[:n_steps, :n_steps] = 0.5 * (h_uu + h_uu.T)
    f = np.concatenate([2.0 * (cs.bbar.T @ (qdiag_full * c0)),
                        weights.risk_weight * pis])
    D = float(c0 @ (qdiag_full * c0))

    P = np.hstack([cs.bbar_r, -np.eye(n_nr)])
    G = weights.e_r * np.ones(n_nr) - (cs.abar_r @ x0v + cs.cbar_r @ cs.w_stack)
    lb = np.concatenate([np.full(n_steps, weights.a_min), np.zeros(n_nr)])
    ub = np.concatenate([np.full(n_steps, weights.a_max),
                         np.full(n_nr, weights.z_max)])
    return QpSpec(H=H, f=f, D=D, P=P, G=G, lb=lb, ub=ub, n_controls=n_steps)


@dataclass
class StepResult:
    u0: float
    plan: np.ndarray          # planned command sequence, one entry per step
    tree: ScenarioTree
    qp_result: Optional[qp.QpResult]
    cost: float
    solve_time: float         # s, wall time of the full pipeline
    fallback: bool = False    # held previous command after a solver failure


class _ConstantPredictor:
    """Single-branch predictor holding the measured acceleration."""

    def __init__(self, a_meas: float, bounds):
        a = min(max(a_meas, bounds[0]), bounds[1])
        self._dist = AccelDistribution(values=(a,), probs=(1.0,))

    def __call__(self, v_lead: float, gap_front: float) -> AccelDistribution:
        return self._dist


class _DriverPredictor:
    def __init__(self, params: DriverParams, m: int, dt: float, bounds):
        self.params = params
        self.m = m
        self.dt = dt
        self.bounds = bounds

    def __call__(self, v_lead: float, gap_front: float) -> AccelDistribution:
        return predict_distribution(v_lead, gap_front, self.m, self.dt,
                                    self.params, self.bounds)


def _clamp(u, bounds):
    return min(max(u, bounds[0]), bounds[1])


def solve_step(x0: State, env: ControlEnv, cfg: ControllerConfig,
               prev_u: float = 0.0) -> StepResult:
    """One control step: build the tree, condense, assemble, solve, extract u0.

    On a solver failure the previous command is held (zero-order hold) and
    the step is flagged.  The returned first move is defensively clamped.
    """
    t_start = time.perf_counter()
    bounds = cfg.bounds
    if cfg.prediction == "constant":
        predictor = _ConstantPredictor(env.a_lead, bounds)
    else:
        predictor = _DriverPredictor(cfg.driver, cfg.branching, cfg.dt, bounds)
    pred_rule = "leader" if env.pred_is_leader else (
        env.pred_plan if env.pred_plan is not None else [env.a_pred])

    tree = build_tree(env.measurement(), cfg.n_max, cfg.horizon,
                      predictor, cfg.dt, pred_accel=pred_rule)
    if len(tree.nodes) < 2:
        u0 = _clamp(prev_u, bounds)
        return StepResult(u0=u0, plan=np.array([u0]), tree=tree, qp_result=None,
                          cost=float("nan"),
                          solve_time=time.perf_counter() - t_start, fallback=True)

    cs = condense(tree, cfg.matrices())
    spec = assemble_qp(cs, tree, cfg.weights, x0)

    # warm feasible start: zero controls, slacks lifted onto the hinge
    n_u, n_z = spec.n_controls, spec.G.shape[0]
    x_init = np.zeros(n_u + n_z)
    x_init[:n_u] = np.clip(0.0, cfg.weights.a_min, cfg.weights.a_max)
    y0 = spec.P[:, :n_u] @ x_init[:n_u] - spec.G
    x_init[n_u:] = np.clip(np.maximum(y0, 0.0), 0.0, cfg.weights.z_max)

    result = qp.solve_qp(spec.to_problem(), x0=x_init)
    elapsed = time.perf_counter() - t_start
    if result.status != qp.OPTIMAL:
        u0 = _clamp(prev_u, bounds)
        return StepResult(u0=u0, plan=np.full(n_u, u0), tree=tree,
                          qp_result=result, cost=float("nan"),
                          solve_time=elapsed, fallback=True)
    plan = result.x[:n_u].copy()
    u0 = _clamp(float(plan[0]), bounds)
    return StepResult(u0=u0, plan=plan, tree=tree, qp_result=result,
                      cost=result.objective + spec.D, solve_time=elapsed)


def baseline_step(x0: State, env: ControlEnv, cfg: ControllerConfig,
                  prev_u: float = 0.0) -> StepResult:
    """Constant-disturbance MPC: the same pipeline on a deterministic chain
    of full horizon depth with the measured leader acceleration held."""
    chain_cfg = replace(cfg, prediction="constant", branching=1,
                        n_max=cfg.horizon + 1)
    return solve_step(x0, env, chain_cfg, prev_u=prev_u)


class PlatoonController:
    """Stateful per-follower wrapper holding the previous command for the
    solver-failure fallback."""

    def __init__(self, cfg: ControllerConfig, mode: str = "sdhl"):
        if mode not in ("sdhl", "baseline"):
            raise ValueError(f"unknown controller mode {mode!r}")
        self.cfg = cfg
        self.mode = mode
        self.prev_u = 0.0

    def step(self, x0: State, env: ControlEnv) -> StepResult:
        fn = solve_step if self.mode == "sdhl" else baseline_step
        res = fn(x0, env, self.cfg, prev_u=self.prev_u)
        self.prev_u = res.u0
        return res
