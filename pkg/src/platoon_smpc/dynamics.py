"""Discrete-time error dynamics of a following CAV with first-order actuation lag.

The follower state is a 5-vector of tracking errors w.r.t. the platoon
leader and the immediate predecessor plus the ego acceleration:

    x = [gap_err_leader, dv_leader, gap_err_pred, dv_pred, accel]

Gap errors are desired-minus-actual headway (positive = too close), speed
deltas are other-minus-ego.  The plant is linear,

    x(k+1) = A x(k) + B u(k) + C w(k)

with u the commanded acceleration and w = [a_leader, a_pred] the exogenous
accelerations of leader and predecessor treated as disturbances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

N_STATES = 5
IDX_GAP_ERR_PRED = 2  # 0-based position of the predecessor gap error


@dataclass(frozen=True)
class State:
    gap_err_leader: float  # m, desired minus actual headway to the leader
    dv_leader: float       # m/s, leader speed minus ego speed
    gap_err_pred: float    # m, desired minus actual headway to the predecessor
    dv_pred: float         # m/s, predecessor speed minus ego speed
    accel: float           # m/s^2, realized ego acceleration

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.gap_err_leader, self.dv_leader, self.gap_err_pred,
             self.dv_pred, self.accel],
            dtype=float,
        )

    @classmethod
    def from_array(cls, arr) -> "State":
        a = np.asarray(arr, dtype=float).reshape(-1)
        if a.shape != (N_STATES,):
            raise ValueError(f"state vector must have {N_STATES} elements, got {a.shape}")
        return cls(*a.tolist())

    @classmethod
    def zero(cls) -> "State":
        return cls(0.0, 0.0, 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class Disturbance:
    a_leader: float  # m/s^2
    a_pred: float    # m/s^2

    def as_array(self) -> np.ndarray:
        return np.array([self.a_leader, self.a_pred], dtype=float)


@dataclass(frozen=True)
class ModelMatrices:
    A: np.ndarray   # (5, 5)
    B: np.ndarray   # (5, 1)
    C: np.ndarray   # (5, 2)
    dt: float
    tau_a: float


def build_matrices(dt: float, tau_a: float, literal_input_matrix: bool = False) -> ModelMatrices:
    """Build the (A, B, C) triple for a given control step and actuation lag.

    ``literal_input_matrix`` keeps a direct feedthrough of the command into
    the predecessor speed delta (B[3] = dt).  That variant double-counts the
    actuation path and exists only for comparison; the default drives dv_pred
    purely through the lagged acceleration state and the predecessor
    disturbance.
    """
    if not (dt > 0.0) or not (tau_a > 0.0):
        raise ValueError(f"dt and tau_a must be positive, got dt={dt}, tau_a={tau_a}")

    J = np.zeros((N_STATES, N_STATES))
    J[0, 1] = -1.0
    J[1, 4] = -1.0
    J[2, 3] = -1.0
    J[3, 4] = -1.0
    J[4, 4] = -1.0 / tau_a
    A = np.eye(N_STATES) + dt * J

    B = np.zeros((N_STATES, 1))
    B[4, 0] = dt / tau_a
    if literal_input_matrix:
        B[3, 0] = dt

    C = np.zeros((N_STATES, 2))
    C[1, 0] = dt
    C[3, 1] = dt

    for m in (A, B, C):
        m.setflags(write=False)
    return ModelMatrices(A=A, B=B, C=C, dt=dt, tau_a=tau_a)


def step(m: ModelMatrices, x: State, u: float, w: Disturbance) -> State:
    """One plant update x' = A x + B u + C w.  No saturation is applied here;
    clamping the command is the controller's job and clamping speeds is the
    simulator's."""
    xv = x.as_array()
    wv = w.as_array()
    if not (np.all(np.isfinite(xv)) and math.isfinite(u) and np.all(np.isfinite(wv))):
        raise ValueError("step() requires finite state, input and disturbance")
    nxt = m.A @ xv + m.B[:, 0] * u + m.C @ wv
    return State.from_array(nxt)
