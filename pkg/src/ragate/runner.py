"""
Episode loop, baseline policies and multi-seed comparison.

One query arrives per step. The loop assembles the context (network delays,
best edge overlap, query complexity), asks the policy for an arm, realizes
the outcome, updates the policy, and only then lets the knowledge layer see
the query, so a step never retrieves chunks pushed by its own trigger.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from typing import Sequence

import numpy as np

from .config import ScenarioConfig
from .costs import CostWeights, Outcome
from .environment import (
    BURN_IN,
    GATE,
    POLICY,
    ROUTE,
    ArmSpec,
    WorkloadSpec,
    expected_accuracy,
    expected_cost,
    expected_delay,
    next_query,
    realize_outcome,
    sample_network,
    stream,
)
from .gate import Action, Context, Decision, QoSSpec, SafeGate
from .knowledge import KnowledgeLayer

__all__ = [
    "AlwaysArm",
    "Comparison",
    "OraclePolicy",
    "RunError",
    "RunSummary",
    "SafeOBO",
    "StepRecord",
    "UniformRandom",
    "compare",
    "make_policy",
    "oracle_policy",
    "run",
    "summarize",
]

DEFAULT_REFERENCE = "always:72b-cloud"


class RunError(RuntimeError):
    """A run failed part-way; ``step`` is the 1-based step that failed."""

    def __init__(self, step: int, cause: BaseException):
        self.step = step
        self.cause = cause
        super().__init__(f"run aborted at step {step}: {type(cause).__name__}: {cause}")


# ---------------------------------------------------------------------------
# Policies
# ---------------------------------------------------------------------------

class Policy:
    name = "policy"

    def select(self, c: Context, step: int) -> Decision:
        raise NotImplementedError

    def update(self, c: Context, arm: int, outcome: Outcome) -> None:
        pass


class SafeOBO(Policy):
    """The safe Bayesian gate, configured from a scenario."""

    name = "safeobo"

    def __init__(self, cfg: ScenarioConfig, seed: int):
        g = cfg.gate
        self.gate = SafeGate(
            arms=[a.action for a in cfg.arms],
            qos=cfg.qos,
            weights=cfg.weights,
            kernels=g.kernels,
            safe_seed=[cfg.arm_index(n) for n in g.safe_seed],
            beta_safe=g.beta_safe,
            beta_acq=g.beta_acq,
            warmup_steps=g.warmup_steps,
            window=g.window,
            query_len_norm=g.query_len_norm,
            entity_count_norm=g.entity_count_norm,
            rng=stream(seed, GATE),
        )

    def select(self, c, step):
        return self.gate.select(c)

    def update(self, c, arm, outcome):
        self.gate.update(c, arm, outcome)


class AlwaysArm(Policy):
    def __init__(self, cfg: ScenarioConfig, arm: str):
        self.arm = cfg.arm_index(arm)
        self.action = cfg.arms[self.arm].action
        self.name = f"always:{arm}"

    def select(self, c, step):
        return Decision(self.arm, self.action, "exploit", 1)


class UniformRandom(Policy):
    name = "uniform"

    def __init__(self, cfg: ScenarioConfig, seed: int):
        self.arms = cfg.arms
        self.seed = seed

    def select(self, c, step):
        i = int(stream(self.seed, POLICY, step).integers(len(self.arms)))
        return Decision(i, self.arms[i].action, "exploit", len(self.arms))


def oracle_policy(arms: Sequence[ArmSpec], c: Context, qos: QoSSpec, weights: CostWeights) -> int:
    """Index of the arm with the lowest expected cost among arms whose true
    expected accuracy and delay meet the QoS; the most accurate arm if none do."""
    best, best_cost = None, math.inf
    accs = []
    for i, arm in enumerate(arms):
        r = arm.response
        acc = expected_accuracy(r, c, arm.action)
        accs.append(acc)
        if acc >= qos.min_accuracy and expected_delay(r, c, arm.action) <= qos.max_delay_s:
            cost = expected_cost(r, c, arm.action, weights)
            if cost < best_cost:
                best, best_cost = i, cost
    if best is None:
        best = int(np.argmax(accs))
    return best


class OraclePolicy(Policy):
    name = "oracle"

    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg

    def select(self, c, step):
        i = oracle_policy(self.cfg.arms, c, self.cfg.qos, self.cfg.weights)
        return Decision(i, self.cfg.arms[i].action, "exploit", len(self.cfg.arms))


def make_policy(spec: str, cfg: ScenarioConfig, seed: int) -> Policy:
    """Build a policy from ``safeobo``, ``always:<arm>``, ``uniform`` or ``oracle``."""
    kind, _, arg = spec.partition(":")
    if kind == "safeobo" and not arg:
        return SafeOBO(cfg, seed)
    if kind == "always" and arg:
        return AlwaysArm(cfg, arg)
    if kind == "uniform" and not arg:
        return UniformRandom(cfg, seed)
    if kind == "oracle" and not arg:
        return OraclePolicy(cfg)
    raise ValueError(f"unknown policy {spec!r}; expected safeobo, always:<arm>, uniform or oracle")


# ---------------------------------------------------------------------------
# Records and summaries
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StepRecord:
    step: int
    edge_id: int
    cloud_delay_s: float
    best_edge_delay_s: float
    best_overlap_ratio: float
    best_edge_id: int
    multi_hop: bool
    query_len_tokens: int
    entity_count: int
    arm: str
    phase: str
    accuracy: float
    delay_s: float
    u_r: float
    u_d: float
    u_t: float
    safe_set_size: int
    acc_violation: bool
    delay_violation: bool


@dataclass(frozen=True)
class RunSummary:
    total_steps: int
    exploit_steps: int
    sum_cost: float
    mean_cost: float
    exploit_sum_cost: float
    exploit_mean_cost: float
    accuracy: float
    exploit_accuracy: float
    mean_delay: float
    exploit_mean_delay: float
    acc_violation_rate: float
    delay_violation_rate: float
    violation_rate: float
    warmup_violation_rate: float
    exploit_violation_rate: float
    arm_counts: dict


def _mean(xs) -> float:
    return float(sum(xs) / len(xs)) if xs else float("nan")


def summarize(records: Sequence[StepRecord], arm_names: Sequence[str]) -> RunSummary:
    """Fold step records into a summary (``nan`` for empty phases)."""
    if not records:
        raise ValueError("cannot summarize an empty run")
    exploit = [r for r in records if r.phase == "exploit"]
    warm = [r for r in records if r.phase == "warmup"]

    def viol(r):
        return r.acc_violation or r.delay_violation

    counts = {n: 0 for n in arm_names}
    for r in records:
        counts[r.arm] += 1
    return RunSummary(
        total_steps=len(records),
        exploit_steps=len(exploit),
        sum_cost=float(sum(r.u_t for r in records)),
        mean_cost=_mean([r.u_t for r in records]),
        exploit_sum_cost=float(sum(r.u_t for r in exploit)),
        exploit_mean_cost=_mean([r.u_t for r in exploit]),
        accuracy=_mean([r.accuracy for r in records]),
        exploit_accuracy=_mean([r.accuracy for r in exploit]),
        mean_delay=_mean([r.delay_s for r in records]),
        exploit_mean_delay=_mean([r.delay_s for r in exploit]),
        acc_violation_rate=_mean([float(r.acc_violation) for r in records]),
        delay_violation_rate=_mean([float(r.delay_violation) for r in records]),
        violation_rate=_mean([float(viol(r)) for r in records]),
        warmup_violation_rate=_mean([float(viol(r)) for r in warm]),
        exploit_violation_rate=_mean([float(viol(r)) for r in exploit]),
        arm_counts=counts,
    )


# ---------------------------------------------------------------------------
# Episode loop
# ---------------------------------------------------------------------------

def burn_in(layer: KnowledgeLayer, spec: WorkloadSpec, seed: int, n: int) -> None:
    """Feed `n` queries drawn at the initial popularity through the knowledge layer.

    Stores then start from their steady state under the update rule rather
    than from the preload snapshot, which pushes of duplicate chunks erode.
    """
    for i in range(n):
        rng = stream(seed, BURN_IN, i)
        edge_id = int(rng.integers(spec.n_edges))
        layer.record(edge_id, next_query(spec, 0, edge_id, seed, rng=rng).keywords, 0)


def run(
    cfg: ScenarioConfig, policy: str | Policy, seed: int, steps: int | None = None
) -> tuple[list[StepRecord], RunSummary]:
    """Run one episode of `steps` queries (default: the scenario's ``steps``)."""
    T = cfg.steps if steps is None else int(steps)
    if T < 1:
        raise ValueError("steps must be >= 1")
    pol = make_policy(policy, cfg, seed) if isinstance(policy, str) else policy
    spec = cfg.workload_spec()
    layer = cfg.knowledge_layer(spec.popularity_at(0))
    burn_in(layer, spec, seed, cfg.knowledge.burn_in_queries)
    arms, qos, weights = cfg.arms, cfg.qos, cfg.weights
    records = []
    for t in range(T):
        try:
            edge_id = int(stream(seed, ROUTE, t).integers(spec.n_edges))
            query = next_query(spec, t, edge_id, seed)
            cloud, edges = sample_network(spec, t, seed)
            best_id, ratio = layer.best_edge(query.keywords)
            c = Context(
                cloud_delay_s=cloud,
                best_edge_delay_s=float(edges[best_id]),
                best_overlap_ratio=ratio,
                best_edge_id=best_id,
                multi_hop=query.multi_hop,
                query_len_tokens=query.query_len,
                entity_count=query.entity_count,
            )
            d = pol.select(c, t)
            arm = arms[d.arm]
            out = realize_outcome(arm.response, c, arm.action, weights, seed, t, d.arm)
            pol.update(c, d.arm, out)
            layer.record(edge_id, query.keywords, t)
        except Exception as e:  # noqa: BLE001 - re-raised with the step index
            raise RunError(t + 1, e) from e
        records.append(StepRecord(
            step=t + 1,
            edge_id=edge_id,
            cloud_delay_s=c.cloud_delay_s,
            best_edge_delay_s=c.best_edge_delay_s,
            best_overlap_ratio=c.best_overlap_ratio,
            best_edge_id=best_id,
            multi_hop=c.multi_hop,
            query_len_tokens=c.query_len_tokens,
            entity_count=c.entity_count,
            arm=arm.name,
            phase=d.phase,
            accuracy=out.accuracy,
            delay_s=out.delay_s,
            u_r=out.resource_cost_tflops,
            u_d=out.time_cost_tflops,
            u_t=out.total_cost,
            safe_set_size=d.safe_set_size,
            acc_violation=out.accuracy < qos.min_accuracy,
            delay_violation=out.delay_s > qos.max_delay_s,
        ))
    return records, summarize(records, cfg.arm_names)


# ---------------------------------------------------------------------------
# Comparison
# ---------------------------------------------------------------------------

_NUMERIC = [f.name for f in fields(RunSummary) if f.name != "arm_counts"]


@dataclass(frozen=True)
class Comparison:
    """Seed-averaged summary of one policy."""

    policy: str
    seeds: tuple[int, ...]
    mean: dict
    std: dict
    arm_counts: dict  # mean selections per seed
    reduction: float  # 1 - exploit_mean_cost / reference exploit_mean_cost
    summaries: tuple[RunSummary, ...]

    def as_dict(self) -> dict:
        return {
            "policy": self.policy,
            "seeds": list(self.seeds),
            "mean": self.mean,
            "std": self.std,
            "arm_counts": self.arm_counts,
            "reduction": self.reduction,
        }


def _run_summary(args) -> RunSummary:
    cfg, policy, seed, steps = args
    return run(cfg, policy, seed, steps)[1]


def aggregate(policy: str, seeds: Sequence[int], summaries: Sequence[RunSummary], ref_cost: float) -> Comparison:
    mean, std = {}, {}
    for name in _NUMERIC:
        vals = np.array([getattr(s, name) for s in summaries], dtype=float)
        mean[name] = float(vals.mean())
        std[name] = float(vals.std())
    counts = {k: float(np.mean([s.arm_counts[k] for s in summaries])) for k in summaries[0].arm_counts}
    cost = mean["exploit_mean_cost"]
    reduction = 0.0 if cost == ref_cost else 1.0 - cost / ref_cost
    return Comparison(policy, tuple(seeds), mean, std, counts, reduction, tuple(summaries))


def compare(
    cfg: ScenarioConfig,
    policies: Sequence[str],
    seeds: Sequence[int] | None = None,
    steps: int | None = None,
    reference: str | None = None,
    workers: int = 1,
) -> dict[str, Comparison]:
    """Seed-averaged summaries per policy with cost reduction against `reference`.

    The reference defaults to the scenario's ``reference_policy`` or
    ``always:72b-cloud``; it is run even if not listed in `policies`.
    """
    if not policies:
        raise ValueError("at least one policy is required")
    seeds = tuple(cfg.seeds if seeds is None else seeds)
    if not seeds:
        raise ValueError("at least one seed is required")
    reference = reference or cfg.reference_policy or DEFAULT_REFERENCE
    order = list(dict.fromkeys([*policies, reference]))
    for p in order:
        make_policy(p, cfg, 0)  # fail fast on bad specs
    jobs = [(cfg, p, s, steps) for p in order for s in seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_run_summary, jobs))
    else:
        results = [_run_summary(j) for j in jobs]
    n = len(seeds)
    by_policy = {p: results[i * n:(i + 1) * n] for i, p in enumerate(order)}
    ref_cost = float(np.mean([s.exploit_mean_cost for s in by_policy[reference]]))
    return {p: aggregate(p, seeds, by_policy[p], ref_cost) for p in order}


def summary_dict(s: RunSummary) -> dict:
    return asdict(s)
