"""
Synthetic workload and ground-truth outcomes standing in for real LLM serving.

Every random draw comes from a generator keyed by (seed, stream, step, ...),
so a sample depends only on those keys and never on the order of other
draws. Policies therefore see common random numbers: the same query stream,
network conditions and per-arm outcome noise at every step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .costs import ArmCostProfile, CostWeights, Outcome, resource_cost, time_cost, total_cost
from .gate import Action, Context, Generation, Retrieval

__all__ = [
    "ArmResponseProfile",
    "ArmSpec",
    "DriftSchedule",
    "Query",
    "WorkloadSpec",
    "expected_accuracy",
    "expected_cost",
    "expected_delay",
    "next_query",
    "positive_sample",
    "realize_outcome",
    "sample_network",
    "stream",
    "zipf_popularity",
]

# Stream ids for keyed generators.
QUERY, NETWORK, ROUTE, OUTCOME, GATE, POLICY, BURN_IN = range(7)


def stream(seed: int, kind: int, *keys: int) -> np.random.Generator:
    """Independent generator for one (seed, stream, keys...) combination."""
    return np.random.default_rng([int(seed), int(kind), *map(int, keys)])


def positive_sample(rng: np.random.Generator, mean: float, stddev: float) -> float:
    """Nonnegative draw with the given mean and standard deviation (log-normal)."""
    if stddev == 0 or mean == 0:
        return float(mean)
    cv = stddev / mean
    if cv < 1e100:
        s2 = math.log1p(cv * cv)
    else:
        # huge or overflowed cv (tiny mean): log1p(cv^2) ~ 2 log cv, taken in log space
        log_cv = math.log(stddev) - math.log(mean)
        s2 = 2.0 * log_cv + math.log1p(math.exp(-2.0 * log_cv))
    return float(rng.lognormal(math.log(mean) - 0.5 * s2, math.sqrt(s2)))


@dataclass(frozen=True)
class ArmResponseProfile:
    """How one arm responds: success probability, service delay, compute cost."""

    base_accuracy: float
    delay_mean_s: float
    delay_std_s: float
    cost: ArmCostProfile
    overlap_slope: float = 0.0
    multihop_penalty: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.base_accuracy <= 1.0:
            raise ValueError("base_accuracy must lie in [0, 1]")
        if self.multihop_penalty < 0:
            raise ValueError("multihop_penalty must be >= 0")
        if self.delay_mean_s < 0 or self.delay_std_s < 0:
            raise ValueError("delay mean and stddev must be >= 0")


@dataclass(frozen=True)
class ArmSpec:
    name: str
    action: Action
    response: ArmResponseProfile


@dataclass(frozen=True)
class DriftSchedule:
    """Time variation of topic popularity.

    ``piecewise``: from each segment's ``start`` step, every edge's popularity
    vector is rotated by that segment's ``shift`` topics.
    ``sinusoidal``: weights are modulated by ``1 + amplitude * sin(2 pi (t /
    period + topic / n_topics))`` and renormalized.
    """

    kind: str = "none"
    segments: tuple[tuple[int, int], ...] = ()
    amplitude: float = 0.0
    period: float = 1.0

    def __post_init__(self):
        if self.kind not in ("none", "piecewise", "sinusoidal"):
            raise ValueError(f"unknown drift kind {self.kind!r}")
        if self.kind == "sinusoidal" and not (0 <= self.amplitude < 1 and self.period > 0):
            raise ValueError("sinusoidal drift needs 0 <= amplitude < 1 and period > 0")

    def apply(self, base: np.ndarray, step: int) -> np.ndarray:
        if self.kind == "piecewise":
            shift = 0
            for start, s in self.segments:
                if step >= start:
                    shift = s
            return np.roll(base, shift, axis=-1) if shift else base
        if self.kind == "sinusoidal":
            n = base.shape[-1]
            phase = 2 * np.pi * (step / self.period + np.arange(n) / n)
            w = base * (1.0 + self.amplitude * np.sin(phase))
            return w / w.sum(axis=-1, keepdims=True)
        return base


def zipf_popularity(n_edges: int, n_topics: int, exponent: float, edge_offset: int) -> np.ndarray:
    """Per-edge Zipf popularity; edge e's favourite topic is ``e * edge_offset``."""
    ranks = np.arange(1, n_topics + 1, dtype=float)
    w = ranks ** -exponent
    w /= w.sum()
    return np.stack([np.roll(w, e * edge_offset) for e in range(n_edges)])


@dataclass(frozen=True)
class Query:
    keywords: frozenset
    multi_hop: bool
    query_len: int
    entity_count: int
    topic: int


@dataclass(frozen=True)
class WorkloadSpec:
    topics: tuple[tuple[int, ...], ...]
    popularity: np.ndarray
    drift: DriftSchedule = field(default_factory=DriftSchedule)
    multihop_rate: float = 0.0
    keywords_per_query: int = 3
    multihop_extra_keywords: int = 2
    query_len: tuple[float, float] = (24.0, 8.0)
    entity_count: tuple[float, float] = (2.0, 1.0)
    cloud_delay: tuple[float, float] = (0.15, 0.05)
    edge_delays: tuple[tuple[float, float], ...] = ((0.05, 0.02),)

    def __post_init__(self):
        pop = np.asarray(self.popularity, dtype=float)
        if pop.shape != (len(self.edge_delays), len(self.topics)):
            raise ValueError(
                f"popularity must be (n_edges, n_topics) = "
                f"({len(self.edge_delays)}, {len(self.topics)}), got {pop.shape}"
            )
        if np.any(pop < 0) or np.any(np.abs(pop.sum(1) - 1.0) > 1e-9):
            raise ValueError("each popularity row must be a probability distribution")
        if not 0.0 <= self.multihop_rate <= 1.0:
            raise ValueError("multihop_rate must lie in [0, 1]")
        object.__setattr__(self, "popularity", pop)

    @property
    def n_edges(self) -> int:
        return len(self.edge_delays)

    def popularity_at(self, step: int) -> np.ndarray:
        return self.drift.apply(self.popularity, step)


def _count(rng, mean: float, std: float, minimum: int) -> int:
    return max(minimum, int(round(rng.normal(mean, std)))) if std > 0 else max(minimum, int(round(mean)))


def next_query(
    spec: WorkloadSpec, step: int, edge_id: int, seed: int, rng: np.random.Generator | None = None
) -> Query:
    """Sample the query arriving at `edge_id` at `step`.

    Multi-hop queries add keywords from a second, distinct topic. Pass `rng`
    to draw from a caller-owned generator instead of the keyed query stream.
    """
    if step < 0:
        raise ValueError("step must be >= 0")
    if rng is None:
        rng = stream(seed, QUERY, step, edge_id)
    p = spec.popularity_at(step)[edge_id]
    topic = int(rng.choice(len(p), p=p))
    kws = spec.topics[topic]
    chosen = set(rng.choice(kws, size=min(spec.keywords_per_query, len(kws)), replace=False).tolist())
    multi_hop = bool(rng.random() < spec.multihop_rate)
    if multi_hop and len(spec.topics) > 1:
        q = p.copy()
        q[topic] = 0.0
        other = int(rng.choice(len(q), p=q / q.sum())) if q.sum() > 0 else (topic + 1) % len(p)
        okws = spec.topics[other]
        n = min(spec.multihop_extra_keywords, len(okws))
        chosen |= set(rng.choice(okws, size=n, replace=False).tolist())
    return Query(
        keywords=frozenset(chosen),
        multi_hop=multi_hop,
        query_len=_count(rng, *spec.query_len, minimum=1),
        entity_count=_count(rng, *spec.entity_count, minimum=1) + (1 if multi_hop else 0),
        topic=topic,
    )


def sample_network(spec: WorkloadSpec, step: int, seed: int) -> tuple[float, np.ndarray]:
    """Cloud link delay and per-edge link delays observed at `step`."""
    rng = stream(seed, NETWORK, step)
    cloud = positive_sample(rng, *spec.cloud_delay)
    edges = np.array([positive_sample(rng, m, s) for m, s in spec.edge_delays])
    return cloud, edges


def network_delay(action: Action, c: Context) -> float:
    """Link delay on the arm's path: edge retrieval hop plus any cloud hop."""
    d = 0.0
    if action.retrieval is Retrieval.EDGE_NAIVE:
        d += c.best_edge_delay_s
    if action.retrieval is Retrieval.CLOUD_GRAPH or action.generation is Generation.CLOUD_LLM:
        d += c.cloud_delay_s
    return d


def expected_accuracy(profile: ArmResponseProfile, c: Context, action: Action) -> float:
    """Success probability, clamped to [0, 1]."""
    p = profile.base_accuracy
    if action.retrieval is Retrieval.EDGE_NAIVE:
        p += profile.overlap_slope * c.best_overlap_ratio
    if c.multi_hop:
        p -= profile.multihop_penalty
    return min(1.0, max(0.0, p))


def expected_delay(profile: ArmResponseProfile, c: Context, action: Action) -> float:
    return profile.delay_mean_s + network_delay(action, c)


def expected_cost(profile: ArmResponseProfile, c: Context, action: Action, weights: CostWeights) -> float:
    cp = profile.cost
    u_r = resource_cost(cp, cp.input_tokens.expected(), cp.output_tokens.expected())
    u_d = time_cost(cp, expected_delay(profile, c, action))
    return total_cost(weights, u_r, u_d)


def realize_outcome(
    profile: ArmResponseProfile,
    c: Context,
    action: Action,
    weights: CostWeights,
    seed: int,
    step: int,
    arm_index: int,
) -> Outcome:
    """Draw the observed outcome of serving context `c` with `action`."""
    rng = stream(seed, OUTCOME, step, arm_index)
    correct = rng.random() < expected_accuracy(profile, c, action)
    delay = positive_sample(rng, profile.delay_mean_s, profile.delay_std_s) + network_delay(action, c)
    cp = profile.cost
    t_in = cp.input_tokens.sample(rng)
    t_out = cp.output_tokens.sample(rng)
    u_r = resource_cost(cp, t_in, t_out)
    u_d = time_cost(cp, delay)
    return Outcome(
        accuracy=1.0 if correct else 0.0,
        delay_s=delay,
        resource_cost_tflops=u_r,
        time_cost_tflops=u_d,
        total_cost=total_cost(weights, u_r, u_d),
        tokens_in=t_in,
        tokens_out=t_out,
    )
