"""Greedy maximum-likelihood scenario tree over lead-vehicle accelerations.

Starting from the measured situation at the root, the tree is grown one node
at a time: every added node generates candidate children from the
acceleration predictor, each candidate carries the probability of reaching it
from the root (parent probability times branch probability), and the
candidate with the highest root-reachability is added next.  Candidates that
lose remain in the pool and stay eligible.  A node's disturbance is the
realized (a_leader, a_pred) pair at that node; the root carries the measured
current values.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

from .driver import AccelDistribution


@dataclass(frozen=True)
class EnvMeasurement:
    """Measured quantities a follower's controller receives each step."""

    v_lead: float            # m/s, lead vehicle speed
    gap_front: float         # m, headway from the lead vehicle to the front traffic
    a_lead: float            # m/s^2, lead vehicle's current acceleration
    a_pred: float            # m/s^2, predecessor's current acceleration
    v_front: Optional[float] = None   # m/s, front traffic speed (defaults to v_lead)


@dataclass
class ScenarioNode:
    id: int                  # order of addition; root is 0
    parent: Optional[int]    # id of parent, None for root
    depth: int               # steps from the root
    a_leader: float          # m/s^2, realized leader acceleration at this node
    a_pred: float            # m/s^2, predecessor acceleration at this node
    pi: float                # probability of reaching this node from the root
    v_lead: float            # m/s, propagated leader speed used to branch here
    gap_front: float         # m, propagated leader-to-front headway


@dataclass
class ScenarioTree:
    nodes: list              # ScenarioNode, in order of addition
    depth_cap: int           # maximum allowed depth
    children: dict = field(default_factory=dict)  # id -> list of child ids

    @property
    def leaves(self) -> set:
        return {n.id for n in self.nodes if not self.children.get(n.id)}

    @property
    def non_leaves(self) -> set:
        return {n.id for n in self.nodes if self.children.get(n.id)}

    @property
    def n_steps(self) -> int:
        """Length of the longest horizon (max node depth)."""
        return max(n.depth for n in self.nodes)

    def path_to(self, node_id: int) -> list:
        """Node ids from the root to ``node_id`` inclusive."""
        path = []
        cur: Optional[int] = node_id
        while cur is not None:
            path.append(cur)
            cur = self.nodes[cur].parent
        return path[::-1]

    def dump(self) -> list:
        """Debug/wire format: one dict per node in addition order."""
        return [
            {"id": n.id, "parent": n.parent, "depth": n.depth,
             "a_L": n.a_leader, "a_p": n.a_pred, "pi": n.pi}
            for n in self.nodes
        ]


# A predictor maps the propagated (v_lead, gap_front) at a node to the
# discrete distribution of that node's children accelerations.
Predictor = Callable[[float, float], AccelDistribution]

# Predecessor-acceleration rule inside the tree: "leader" copies each node's
# own leader acceleration (the predecessor IS the leader, first follower);
# a sequence is a broadcast plan indexed by node depth, held at its last
# value beyond the plan horizon.
PredAccelRule = Union[str, Sequence[float]]


@dataclass
class _Candidate:
    pi: float
    depth: int
    order: int               # creation order, used for deterministic ties
    parent: int
    a_leader: float
    prob: float              # branch probability from the parent
    v_lead: float
    gap_front: float


def _pred_accel_at(rule: PredAccelRule, depth: int, fallback: float) -> float:
    if isinstance(rule, str):
        raise AssertionError("leader rule handled inline")
    if len(rule) == 0:
        return fallback
    return float(rule[min(depth, len(rule) - 1)])


def build_tree(env: EnvMeasurement, n_max: int, depth_cap: int,
               predict: Predictor, dt: float,
               pred_accel: PredAccelRule = "leader") -> ScenarioTree:
    """Grow the scenario tree greedily to at most ``n_max`` nodes.

    Leader state propagation along a branch: the child's speed advances by
    its own realized acceleration over one step (floored at 0) and the
    headway advances by the relative speed against the front traffic, whose
    speed is held at its last measured value.  Nodes at ``depth_cap``
    generate no children.  Construction stops early if the candidate pool
    empties (e.g. single-branch predictors below ``n_max`` nodes).
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    if depth_cap < 1:
        raise ValueError("depth_cap must be >= 1")
    copy_leader = isinstance(pred_accel, str)
    if copy_leader and pred_accel != "leader":
        raise ValueError(f"unknown pred_accel rule {pred_accel!r}")

    v_front = env.v_front if env.v_front is not None else env.v_lead
    root = ScenarioNode(id=0, parent=None, depth=0, a_leader=env.a_lead,
                        a_pred=env.a_pred, pi=1.0, v_lead=env.v_lead,
                        gap_front=env.gap_front)
    nodes = [root]
    children: dict = {0: []}
    pool: list = []
    order_counter = 0

    def expand(node: ScenarioNode):
        nonlocal order_counter
        if node.depth >= depth_cap:
            return
        dist = predict(node.v_lead, node.gap_front)
        child_gap = max(node.gap_front + (v_front - node.v_lead) * dt, 0.0)
        for val, prob in zip(dist.values, dist.probs):
            pool.append(_Candidate(
                pi=node.pi * prob, depth=node.depth + 1, order=order_counter,
                parent=node.id, a_leader=val, prob=prob,
                v_lead=max(node.v_lead + val * dt, 0.0), gap_front=child_gap,
            ))
            order_counter += 1

    expand(root)
    while len(nodes) < n_max and pool:
        best_i = 0
        best = pool[0]
        for i in range(1, len(pool)):
            c = pool[i]
            # maximal pi; ties prefer shallower depth, then earlier creation
            if (c.pi > best.pi
                    or (c.pi == best.pi
                        and (c.depth, c.order) < (best.depth, best.order))):
                best, best_i = c, i
        pool.pop(best_i)
        node = ScenarioNode(
            id=len(nodes), parent=best.parent, depth=best.depth,
            a_leader=best.a_leader,
            a_pred=(best.a_leader if copy_leader
                    else _pred_accel_at(pred_accel, best.depth, env.a_pred)),
            pi=best.pi, v_lead=best.v_lead, gap_front=best.gap_front,
        )
        nodes.append(node)
        children.setdefault(node.id, [])
        children[best.parent].append(node.id)
        expand(node)

    return ScenarioTree(nodes=nodes, depth_cap=depth_cap, children=children)


def horizons(tree: ScenarioTree) -> list:
    """One root-to-leaf id path per leaf, in leaf id order.

    Each path is a prediction horizon; the per-node reach probabilities ride
    along on the nodes themselves.
    """
    return [tree.path_to(leaf) for leaf in sorted(tree.leaves)]
