"""Stochastic optimal-velocity driver model for the lead human-driven vehicle.

The lead vehicle's next-step acceleration is an optimal-velocity relaxation
toward a headway-dependent target speed plus a square-root-diffusion noise
term (noise strength grows with speed):

    a(k+1) = beta * (v_op(s(k)) - v(k)) + sigma0 * sqrt(v(k)) * dW(k)

with dW a Wiener increment of variance dt.  For prediction the one-step
acceleration is discretized into a small support of equally probable values;
for simulation it is sampled from a caller-owned RNG stream.

All evaluation functions accept scalars or numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from statistics import NormalDist

import numpy as np

_STD_NORMAL = NormalDist()


@dataclass(frozen=True)
class DriverParams:
    v0: float      # m/s, free flow speed
    beta: float    # 1/s, reaction coefficient
    sc: float      # m, critical headway
    alpha: float   # dimensionless shift of the optimal-velocity curve
    sigma0: float  # sqrt(m)/s, noise dissipation coefficient

    def __post_init__(self):
        if not (self.v0 > 0 and self.beta > 0 and self.sc > 0 and self.sigma0 >= 0):
            raise ValueError(f"invalid driver parameters: {self}")

    def to_dict(self) -> dict:
        return {"v0": self.v0, "beta": self.beta, "sc": self.sc,
                "alpha": self.alpha, "sigma0": self.sigma0}

    @classmethod
    def from_dict(cls, d: dict) -> "DriverParams":
        return cls(v0=float(d["v0"]), beta=float(d["beta"]), sc=float(d["sc"]),
                   alpha=float(d["alpha"]), sigma0=float(d["sigma0"]))


# Calibrated against freeway car-following trajectories; used as defaults
# throughout the simulator and CLI.
DEFAULT_PARAMS = DriverParams(v0=19.65, beta=1.92, sc=5.38, alpha=2.66, sigma0=0.30)

# Physical command/acceleration envelope shared by all vehicles (m/s^2).
DEFAULT_ACCEL_BOUNDS = (-5.0, 3.0)


@dataclass(frozen=True)
class AccelDistribution:
    """Discrete distribution over next-step leader accelerations."""

    values: tuple  # m/s^2, strictly increasing
    probs: tuple   # positive, summing to 1

    def __post_init__(self):
        if len(self.values) != len(self.probs) or len(self.values) < 1:
            raise ValueError("values and probs must be equal-length and nonempty")
        if any(p <= 0 for p in self.probs):
            raise ValueError("probabilities must be positive")
        if abs(sum(self.probs) - 1.0) > 1e-12:
            raise ValueError(f"probabilities must sum to 1, got {sum(self.probs)}")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ValueError("values must be strictly increasing")

    def mean(self) -> float:
        return float(sum(v * p for v, p in zip(self.values, self.probs)))


def optimal_velocity(s, p: DriverParams):
    """Headway-to-target-speed map (v0/2) * [tanh(s/sc - alpha) + tanh(alpha)]."""
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise ValueError("headway must be nonnegative")
    out = 0.5 * p.v0 * (np.tanh(s / p.sc - p.alpha) + math.tanh(p.alpha))
    return float(out) if out.ndim == 0 else out


def mean_accel(v_lead, s, p: DriverParams):
    """Deterministic relaxation term beta * (v_op(s) - v).  Unclamped."""
    v_lead = np.asarray(v_lead, dtype=float)
    if np.any(v_lead < 0):
        raise ValueError("speed must be nonnegative")
    out = p.beta * (optimal_velocity(s, p) - v_lead)
    return float(out) if np.ndim(out) == 0 else out


def noise_sigma(v_lead, dt: float, p: DriverParams):
    """Standard deviation of the one-step stochastic acceleration term.

    The Wiener increment has variance dt, so the step noise scales with
    sqrt(dt); speeds below zero are treated as zero (square-root-diffusion
    boundary: no randomness at standstill).
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    v_lead = np.asarray(v_lead, dtype=float)
    out = p.sigma0 * np.sqrt(np.maximum(v_lead, 0.0)) * math.sqrt(dt)
    return float(out) if out.ndim == 0 else out


def equilibrium_gap(v: float, p: DriverParams) -> float:
    """Headway at which the optimal-velocity map returns exactly v.

    Inverse of optimal_velocity; only defined for speeds the map can reach.
    """
    hi = 0.5 * p.v0 * (1.0 + math.tanh(p.alpha))
    if not (0 <= v < hi):
        raise ValueError(f"no equilibrium gap for speed {v} (reachable range [0, {hi}))")
    inner = 2.0 * v / p.v0 - math.tanh(p.alpha)
    return p.sc * (p.alpha + math.atanh(inner))


@lru_cache(maxsize=64)
def _normal_bin_means(m: int) -> tuple:
    """Conditional means of the standard normal over m equal-probability bins.

    Bin edges are the i/m quantiles; each bin is represented by its
    conditional mean m*(pdf(z_lo) - pdf(z_hi)), which preserves the mean of
    the distribution exactly.  Computed for the lower half and mirrored so
    the support is exactly symmetric.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    edges = [-math.inf] + [_STD_NORMAL.inv_cdf(i / m) for i in range(1, m)] + [math.inf]
    # enforce exact antisymmetry of the edge grid
    for i in range(1, m):
        edges[m - i] = -edges[i] if i < m - i else edges[m - i]

    def pdf(z):
        return 0.0 if math.isinf(z) else math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)

    half = [m * (pdf(edges[i]) - pdf(edges[i + 1])) for i in range(m // 2)]
    mid = [0.0] if m % 2 == 1 else []
    return tuple(half + mid + [-q for q in reversed(half)])


def predict_distribution(v_lead: float, s: float, m: int, dt: float,
                         p: DriverParams, bounds=DEFAULT_ACCEL_BOUNDS) -> AccelDistribution:
    """Discretize the one-step acceleration into m equally probable values.

    Support points are mean + q_i * sigma with q_i the equal-probability
    conditional means of the standard normal, clamped to ``bounds``; clamped
    duplicates are merged with their probabilities summed.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    a_min, a_max = bounds
    if not a_min < a_max:
        raise ValueError("bounds must satisfy a_min < a_max")
    mu = mean_accel(v_lead, s, p)
    sd = noise_sigma(v_lead, dt, p)
    raw = [min(max(mu + q * sd, a_min), a_max) for q in _normal_bin_means(m)]

    values, counts = [], []
    for v in raw:  # raw is nondecreasing: merge exact duplicates
        if values and v == values[-1]:
            counts[-1] += 1
        else:
            values.append(v)
            counts.append(1)
    probs = [c / m for c in counts]
    return AccelDistribution(values=tuple(values), probs=tuple(probs))


def sample_accel(v_lead: float, s: float, dt: float, p: DriverParams,
                 rng: np.random.Generator, bounds=DEFAULT_ACCEL_BOUNDS) -> float:
    """Draw one realized next-step acceleration, clamped to ``bounds``.

    Always consumes exactly one standard-normal variate from ``rng`` so that
    trajectories with different sigma0 share the same draw sequence.
    """
    z = rng.standard_normal()
    a = mean_accel(v_lead, s, p) + noise_sigma(v_lead, dt, p) * z
    a_min, a_max = bounds
    return min(max(a, a_min), a_max)
