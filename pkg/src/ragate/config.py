"""
Scenario configuration: YAML schema, validation and runtime construction.

A scenario file is a YAML mapping with the sections ``arms``, ``gate``,
``qos``, ``weights``, ``workload`` and ``knowledge`` (see README for the
full schema). A file may start from another one with ``extends: <name or
path>``; mappings are merged key by key, lists are replaced.

Validation never stops at the first problem: every error is collected with
its field path and reported together in a :class:`ConfigError`.
"""

from __future__ import annotations

import copy
import dataclasses
import hashlib
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .costs import ArmCostProfile, CostWeights, TokenDist
from .environment import (
    ArmResponseProfile,
    ArmSpec,
    DriftSchedule,
    WorkloadSpec,
    zipf_popularity,
)
from .gate import FEATURE_NAMES, FUNCTIONS, Action, Generation, QoSSpec, Retrieval
from .gp import KernelParams
from .knowledge import EdgeStore, KnowledgeLayer, SynonymMap, build_catalog

__all__ = [
    "ConfigError",
    "GateConfig",
    "KnowledgeConfig",
    "ScenarioConfig",
    "WorkloadConfig",
    "config_hash",
    "dump_config",
    "from_dict",
    "load_and_validate",
    "resolve_scenario",
    "shipped_scenarios",
    "to_dict",
]


class ConfigError(ValueError):
    """Scenario failed to load or validate; ``errors`` lists every problem found."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("invalid scenario:\n  " + "\n  ".join(self.errors))


@dataclass(frozen=True)
class GateConfig:
    warmup_steps: int = 300
    beta_safe: float = 2.0
    beta_acq: float = 2.0
    safe_seed: tuple[str, ...] = ()
    window: int = 512
    query_len_norm: float = 64.0
    entity_count_norm: float = 8.0
    kernels: dict = field(default_factory=dict)  # function name -> KernelParams


@dataclass(frozen=True)
class WorkloadConfig:
    multihop_rate: float = 0.1
    keywords_per_query: int = 3
    multihop_extra_keywords: int = 2
    query_len: tuple[float, float] = (24.0, 8.0)
    entity_count: tuple[float, float] = (2.0, 1.0)
    cloud_delay: tuple[float, float] = (0.15, 0.05)
    edge_delays: tuple[tuple[float, float], ...] = ((0.05, 0.02),)
    popularity: dict = field(default_factory=lambda: {"kind": "zipf", "exponent": 1.0, "edge_offset": 0})
    drift: DriftSchedule = field(default_factory=DriftSchedule)


@dataclass(frozen=True)
class KnowledgeConfig:
    n_topics: int = 30
    keywords_per_topic: int = 5
    chunks_per_community: int = 100
    keywords_per_chunk: int = 2
    capacity: int = 1000
    trigger_threshold: int = 20
    top_k: int = 3
    push_limit: int = 500
    trigger_scope: str = "edge"
    preload: bool = True
    burn_in_queries: int = 0
    synonym_classes: tuple[tuple[int, ...], ...] = ()


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    arms: tuple[ArmSpec, ...]
    gate: GateConfig
    qos: QoSSpec
    weights: CostWeights
    workload: WorkloadConfig
    knowledge: KnowledgeConfig
    steps: int = 2000
    seeds: tuple[int, ...] = (0,)
    reference_policy: str = ""

    @property
    def arm_names(self) -> list[str]:
        return [a.name for a in self.arms]

    def arm_index(self, name: str) -> int:
        try:
            return self.arm_names.index(name)
        except ValueError:
            raise KeyError(f"unknown arm {name!r}; known arms: {self.arm_names}") from None

    @property
    def feature_dim(self) -> int:
        return len(FEATURE_NAMES) + len(self.arms)

    def with_overrides(self, **changes) -> "ScenarioConfig":
        """Copy with gate/qos fields replaced: warmup, beta, qos_acc, qos_delay, steps."""
        gate, qos, top = self.gate, self.qos, {}
        if changes.get("warmup") is not None:
            gate = dataclasses.replace(gate, warmup_steps=int(changes["warmup"]))
        if changes.get("beta") is not None:
            b = float(changes["beta"])
            gate = dataclasses.replace(gate, beta_safe=b, beta_acq=b)
        if changes.get("qos_acc") is not None:
            qos = QoSSpec(float(changes["qos_acc"]), qos.max_delay_s)
        if changes.get("qos_delay") is not None:
            qos = QoSSpec(qos.min_accuracy, float(changes["qos_delay"]))
        if changes.get("steps") is not None:
            top["steps"] = int(changes["steps"])
        return dataclasses.replace(self, gate=gate, qos=qos, **top)

    # runtime objects

    def workload_spec(self) -> WorkloadSpec:
        w, k = self.workload, self.knowledge
        K = k.keywords_per_topic
        topics = tuple(tuple(range(t * K, (t + 1) * K)) for t in range(k.n_topics))
        return WorkloadSpec(
            topics=topics,
            popularity=popularity_matrix(w.popularity, len(w.edge_delays), k.n_topics),
            drift=w.drift,
            multihop_rate=w.multihop_rate,
            keywords_per_query=w.keywords_per_query,
            multihop_extra_keywords=w.multihop_extra_keywords,
            query_len=w.query_len,
            entity_count=w.entity_count,
            cloud_delay=w.cloud_delay,
            edge_delays=w.edge_delays,
        )

    def knowledge_layer(self, popularity: np.ndarray | None = None) -> KnowledgeLayer:
        k = self.knowledge
        stores = [
            EdgeStore(e, capacity=k.capacity, base_delay_s=m)
            for e, (m, _) in enumerate(self.workload.edge_delays)
        ]
        layer = KnowledgeLayer(
            stores=stores,
            cloud=build_catalog(k.n_topics, k.keywords_per_topic, k.chunks_per_community, k.keywords_per_chunk),
            syn=SynonymMap(k.synonym_classes),
            threshold=k.trigger_threshold,
            top_k=k.top_k,
            push_limit=k.push_limit,
            trigger_scope=k.trigger_scope,
        )
        if k.preload:
            if popularity is None:
                popularity = self.workload_spec().popularity_at(0)
            layer.preload(popularity)
        return layer


def popularity_matrix(cfg: dict, n_edges: int, n_topics: int) -> np.ndarray:
    kind = cfg.get("kind", "zipf")
    if kind == "zipf":
        return zipf_popularity(n_edges, n_topics, float(cfg.get("exponent", 1.0)), int(cfg.get("edge_offset", 0)))
    if kind == "uniform":
        return np.full((n_edges, n_topics), 1.0 / n_topics)
    if kind == "explicit":
        w = np.asarray(cfg["weights"], dtype=float)
        return w / w.sum(axis=1, keepdims=True)
    raise ValueError(f"unknown popularity kind {kind!r}")


# ---------------------------------------------------------------------------
# Parsing with error collection
# ---------------------------------------------------------------------------

_MISSING = object()


class _Reader:
    def __init__(self):
        self.errors: list[str] = []

    def err(self, path: str, msg: str):
        self.errors.append(f"{path}: {msg}")

    def section(self, d: Any, key: str, path: str) -> dict:
        v = d.get(key, {}) if isinstance(d, dict) else {}
        if v is None:
            v = {}
        if not isinstance(v, dict):
            self.err(f"{path}{key}", "expected a mapping")
            return {}
        return v

    def num(self, d, key, path, default=_MISSING, *, lo=None, hi=None, lo_open=False,
            integer=False, label=None):
        p = label or f"{path}{key}"
        v = d.get(key, default) if isinstance(d, dict) else default
        if v is _MISSING:
            self.err(p, "required field is missing")
            return 0 if integer else 0.0
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.err(p, f"expected a number, got {v!r}")
            return 0 if integer else (default if isinstance(default, (int, float)) else 0.0)
        if integer and float(v) != int(v):
            self.err(p, f"expected an integer, got {v!r}")
        v = int(v) if integer else float(v)
        if not np.isfinite(v):
            self.err(p, "must be finite")
        if lo is not None and (v <= lo if lo_open else v < lo):
            self.err(p, f"must be {'>' if lo_open else '>='} {lo}, got {v}")
        if hi is not None and v > hi:
            self.err(p, f"must be <= {hi}, got {v}")
        return v

    def pair(self, d, key, path, default=_MISSING, *, label=None):
        p = label or f"{path}{key}"
        v = d.get(key, default) if isinstance(d, dict) else default
        if v is _MISSING:
            self.err(p, "required field is missing")
            return (0.0, 0.0)
        if isinstance(v, dict):
            v = [v.get("mean", _MISSING), v.get("stddev", 0.0)]
        if not isinstance(v, (list, tuple)) or len(v) != 2:
            self.err(p, f"expected [mean, stddev], got {v!r}")
            return (0.0, 0.0)
        out = []
        for i, x in enumerate(v):
            if isinstance(x, bool) or not isinstance(x, (int, float)) or not np.isfinite(x):
                self.err(f"{p}[{i}]", f"expected a finite number, got {x!r}")
                x = 0.0
            elif x < 0:
                self.err(f"{p}[{i}]", f"must be >= 0, got {x}")
            out.append(float(x))
        return tuple(out)

    def choice(self, d, key, path, options, default=_MISSING):
        p = f"{path}{key}"
        v = d.get(key, default) if isinstance(d, dict) else default
        if v is _MISSING:
            self.err(p, "required field is missing")
            return options[0]
        if v not in options:
            self.err(p, f"expected one of {list(options)}, got {v!r}")
            return options[0]
        return v


def _kernel(r: _Reader, d: dict, path: str, dim: int, n_arms: int) -> KernelParams | None:
    ls = d.get("length_scale", _MISSING)
    scales: list[float] = []
    if ls is _MISSING:
        r.err(f"{path}length_scale", "required field is missing")
        return None
    if isinstance(ls, dict):
        names = set(FEATURE_NAMES) | {"arm"}
        for k in ls:
            if k not in names:
                r.err(f"{path}length_scale.{k}", f"unknown feature; expected one of {sorted(names)}")
        for name in FEATURE_NAMES:
            scales.append(r.num(ls, name, f"{path}length_scale.", lo=0, lo_open=True))
        scales += [r.num(ls, "arm", f"{path}length_scale.", lo=0, lo_open=True)] * n_arms
    elif isinstance(ls, (list, tuple)):
        if len(ls) != dim:
            r.err(f"{path}length_scale", f"expected {dim} values, got {len(ls)}")
        for i in range(len(ls)):
            scales.append(r.num({i: ls[i]}, i, "", lo=0, lo_open=True, label=f"{path}length_scale[{i}]"))
    else:
        r.err(f"{path}length_scale", "expected a mapping by feature or a list")
        return None
    sf2 = r.num(d, "signal_variance", path, 1.0, lo=0)
    sn2 = r.num(d, "noise_variance", path, 0.1, lo=0)
    jit = r.num(d, "jitter", path, 1e-8, lo=0, lo_open=True)
    try:
        return KernelParams(tuple(scales), sf2, sn2, jit)
    except ValueError:
        return None


def _arm(r: _Reader, d: Any, path: str) -> ArmSpec | None:
    if not isinstance(d, dict):
        r.err(path.rstrip("."), "expected a mapping")
        return None
    name = d.get("name")
    if not isinstance(name, str) or not name:
        r.err(f"{path}name", "expected a nonempty string")
        name = "?"
    retrieval = r.choice(d, "retrieval", path, [x.value for x in Retrieval])
    generation = r.choice(d, "generation", path, [x.value for x in Generation])

    c = r.section(d, "cost", path)
    cp = f"{path}cost."
    gpu = c.get("gpu", None)
    if gpu is not None and "gpu_rate_tflops" not in c:
        from .costs import GPU_FP64_TFLOPS
        if gpu not in GPU_FP64_TFLOPS:
            r.err(f"{cp}gpu", f"unknown GPU {gpu!r}; known: {sorted(GPU_FP64_TFLOPS)}")
            rate = 1.0
        else:
            rate = GPU_FP64_TFLOPS[gpu]
    else:
        rate = r.num(c, "gpu_rate_tflops", cp, lo=0, lo_open=True)
    model_params = r.num(c, "model_params", cp, lo=0, lo_open=True)
    tin = r.pair(c, "input_tokens", cp)
    tout = r.pair(c, "output_tokens", cp)
    calibration = r.num(c, "calibration", cp, 1.0, lo=0, lo_open=True)

    s = r.section(d, "response", path)
    sp = f"{path}response."
    base = r.num(s, "base_accuracy", sp, lo=0.0, hi=1.0)
    slope = r.num(s, "overlap_slope", sp, 0.0)
    penalty = r.num(s, "multihop_penalty", sp, 0.0, lo=0.0)
    delay = r.pair(s, "delay", sp)
    try:
        cost = ArmCostProfile(model_params, TokenDist(*tin), TokenDist(*tout), rate, calibration)
        resp = ArmResponseProfile(base, delay[0], delay[1], cost, slope, penalty)
    except ValueError:
        return None
    return ArmSpec(name, Action(Retrieval(retrieval), Generation(generation)), resp)


def _drift(r: _Reader, d: dict, path: str) -> DriftSchedule:
    kind = r.choice(d, "kind", path, ["none", "piecewise", "sinusoidal"], "none")
    segments = []
    if kind == "piecewise":
        segs = d.get("segments", [])
        if not isinstance(segs, list):
            r.err(f"{path}segments", "expected a list")
            segs = []
        for i, s in enumerate(segs):
            sp = f"{path}segments[{i}]."
            if not isinstance(s, dict):
                r.err(sp.rstrip("."), "expected a mapping with start and shift")
                continue
            segments.append((r.num(s, "start", sp, lo=0, integer=True), r.num(s, "shift", sp, integer=True)))
        if [s for s, _ in segments] != sorted(s for s, _ in segments):
            r.err(f"{path}segments", "segment starts must be non-decreasing")
    amplitude = r.num(d, "amplitude", path, 0.0, lo=0.0)
    period = r.num(d, "period", path, 1.0, lo=0.0, lo_open=True)
    if kind == "sinusoidal" and amplitude >= 1:
        r.err(f"{path}amplitude", "must be < 1")
    try:
        return DriftSchedule(kind, tuple(segments), amplitude, period)
    except ValueError:
        return DriftSchedule()


def from_dict(raw: Any) -> ScenarioConfig:
    """Build and validate a scenario from a parsed YAML tree."""
    r = _Reader()
    if not isinstance(raw, dict):
        raise ConfigError(["<root>: expected a mapping"])

    name = raw.get("name", "scenario")
    if not isinstance(name, str):
        r.err("name", "expected a string")
        name = "scenario"
    steps = r.num(raw, "steps", "", 2000, lo=1, integer=True)
    seeds_raw = raw.get("seeds", [0])
    seeds = []
    if not isinstance(seeds_raw, list) or not seeds_raw:
        r.err("seeds", "expected a nonempty list of integers")
    else:
        for i, s in enumerate(seeds_raw):
            if isinstance(s, bool) or not isinstance(s, int) or s < 0:
                r.err(f"seeds[{i}]", f"expected a nonnegative integer, got {s!r}")
            else:
                seeds.append(s)

    arms_raw = raw.get("arms", _MISSING)
    arms: list[ArmSpec] = []
    if not isinstance(arms_raw, list) or not arms_raw:
        r.err("arms", "expected a nonempty list of arms")
        arms_raw = []
    for i, a in enumerate(arms_raw):
        arm = _arm(r, a, f"arms[{i}].")
        if arm is not None:
            arms.append(arm)
    names = [a.get("name") for a in arms_raw if isinstance(a, dict)]
    dupes = sorted({n for n in names if isinstance(n, str) and names.count(n) > 1})
    if dupes:
        r.err("arms", f"duplicate arm names {dupes}")
    actions = [a.action for a in arms]
    if len(set(actions)) != len(actions):
        r.err("arms", "two arms share the same retrieval/generation pair")
    n_arms = len(arms_raw)
    dim = len(FEATURE_NAMES) + n_arms

    q = r.section(raw, "qos", "")
    qos_acc = r.num(q, "min_accuracy", "qos.", lo=0.0, hi=1.0)
    qos_delay = r.num(q, "max_delay_s", "qos.", lo=0.0, lo_open=True)
    w = r.section(raw, "weights", "")
    d1 = r.num(w, "delta1", "weights.", 1.0, lo=0.0)
    d2 = r.num(w, "delta2", "weights.", 1.0, lo=0.0)
    if d1 + d2 <= 0:
        r.err("weights", "delta1 + delta2 must be > 0")

    g = r.section(raw, "gate", "")
    gp_ = "gate."
    seed_raw = g.get("safe_seed", _MISSING)
    safe_seed: list[str] = []
    if not isinstance(seed_raw, list) or not seed_raw:
        r.err("gate.safe_seed", "expected a nonempty list of arm names")
    else:
        for i, s in enumerate(seed_raw):
            if s not in names:
                r.err(f"gate.safe_seed[{i}]", f"unknown arm {s!r}")
            else:
                safe_seed.append(s)
    kernels = {}
    if "kernels" in g and "kernel" in g:
        r.err("gate", "give either 'kernel' (shared) or 'kernels' (per function), not both")
    if "kernels" in g:
        ks = r.section(g, "kernels", gp_)
        for fn in FUNCTIONS:
            if fn not in ks:
                r.err(f"gate.kernels.{fn}", "required field is missing")
                continue
            kp = _kernel(r, r.section(ks, fn, "gate.kernels."), f"gate.kernels.{fn}.", dim, n_arms)
            if kp is not None:
                kernels[fn] = kp
    else:
        kp = _kernel(r, r.section(g, "kernel", gp_), "gate.kernel.", dim, n_arms)
        if kp is not None:
            kernels = {fn: kp for fn in FUNCTIONS}
    gate = GateConfig(
        warmup_steps=r.num(g, "warmup_steps", gp_, 300, lo=1, integer=True),
        beta_safe=r.num(g, "beta_safe", gp_, 2.0, lo=0.0, lo_open=True),
        beta_acq=r.num(g, "beta_acq", gp_, g.get("beta_safe", 2.0), lo=0.0, lo_open=True),
        safe_seed=tuple(safe_seed),
        window=r.num(g, "window", gp_, 512, lo=1, integer=True),
        query_len_norm=r.num(g, "query_len_norm", gp_, 64.0, lo=0.0, lo_open=True),
        entity_count_norm=r.num(g, "entity_count_norm", gp_, 8.0, lo=0.0, lo_open=True),
        kernels=kernels,
    )

    wl = r.section(raw, "workload", "")
    wp = "workload."
    edges_raw = wl.get("edge_delays", _MISSING)
    edge_delays = []
    if not isinstance(edges_raw, list) or not edges_raw:
        r.err("workload.edge_delays", "expected a nonempty list of [mean, stddev] (one per edge)")
    else:
        for i in range(len(edges_raw)):
            edge_delays.append(r.pair({i: edges_raw[i]}, i, "", label=f"{wp}edge_delays[{i}]"))
    pop = r.section(wl, "popularity", wp)
    pop_kind = r.choice(pop, "kind", "workload.popularity.", ["zipf", "uniform", "explicit"], "zipf")
    pop = dict(pop)
    pop["kind"] = pop_kind
    kn = r.section(raw, "knowledge", "")
    kp_ = "knowledge."
    n_topics = r.num(kn, "n_topics", kp_, 30, lo=1, integer=True)
    if pop_kind == "zipf":
        r.num(pop, "exponent", "workload.popularity.", 1.0, lo=0.0)
        r.num(pop, "edge_offset", "workload.popularity.", 0, integer=True)
    elif pop_kind == "explicit":
        wts = pop.get("weights")
        arr = None
        try:
            arr = np.asarray(wts, dtype=float)
        except (TypeError, ValueError):
            pass
        if arr is None or arr.ndim != 2 or arr.shape != (len(edge_delays), n_topics):
            r.err("workload.popularity.weights", f"expected a {len(edge_delays)} x {n_topics} matrix")
        elif np.any(arr < 0) or np.any(arr.sum(1) <= 0):
            r.err("workload.popularity.weights", "rows must be nonnegative with positive sums")
    workload = WorkloadConfig(
        multihop_rate=r.num(wl, "multihop_rate", wp, 0.1, lo=0.0, hi=1.0),
        keywords_per_query=r.num(wl, "keywords_per_query", wp, 3, lo=1, integer=True),
        multihop_extra_keywords=r.num(wl, "multihop_extra_keywords", wp, 2, lo=0, integer=True),
        query_len=r.pair(wl, "query_len", wp, (24.0, 8.0)),
        entity_count=r.pair(wl, "entity_count", wp, (2.0, 1.0)),
        cloud_delay=r.pair(wl, "cloud_delay", wp, (0.15, 0.05)),
        edge_delays=tuple(edge_delays),
        popularity=pop,
        drift=_drift(r, r.section(wl, "drift", wp), "workload.drift."),
    )

    syn_raw = kn.get("synonym_classes", [])
    syn = []
    if not isinstance(syn_raw, list):
        r.err("knowledge.synonym_classes", "expected a list of keyword-id lists")
    else:
        for i, cls in enumerate(syn_raw):
            if not isinstance(cls, list) or not cls or not all(isinstance(k, int) for k in cls):
                r.err(f"knowledge.synonym_classes[{i}]", "expected a nonempty list of keyword ids")
            else:
                syn.append(tuple(cls))
        try:
            SynonymMap(syn)
        except ValueError as e:
            r.err("knowledge.synonym_classes", str(e))
    kpt = r.num(kn, "keywords_per_topic", kp_, 5, lo=1, integer=True)
    knowledge = KnowledgeConfig(
        n_topics=n_topics,
        keywords_per_topic=kpt,
        chunks_per_community=r.num(kn, "chunks_per_community", kp_, 100, lo=1, integer=True),
        keywords_per_chunk=r.num(kn, "keywords_per_chunk", kp_, 2, lo=1, hi=kpt, integer=True),
        capacity=r.num(kn, "capacity", kp_, 1000, lo=1, integer=True),
        trigger_threshold=r.num(kn, "trigger_threshold", kp_, 20, lo=1, integer=True),
        top_k=r.num(kn, "top_k", kp_, 3, lo=1, integer=True),
        push_limit=r.num(kn, "push_limit", kp_, 500, lo=1, integer=True),
        trigger_scope=r.choice(kn, "trigger_scope", kp_, ["edge", "global"], "edge"),
        preload=bool(kn.get("preload", True)),
        burn_in_queries=r.num(kn, "burn_in_queries", kp_, 0, lo=0, integer=True),
        synonym_classes=tuple(syn),
    )
    if workload.keywords_per_query > knowledge.keywords_per_topic:
        r.err("workload.keywords_per_query", "must not exceed knowledge.keywords_per_topic")

    reference = raw.get("reference_policy", "")
    if reference and not isinstance(reference, str):
        r.err("reference_policy", "expected a policy string")
        reference = ""

    known = {"name", "extends", "steps", "seeds", "arms", "qos", "weights", "gate",
             "workload", "knowledge", "reference_policy"}
    for k in raw:
        if k not in known:
            r.err(str(k), "unknown top-level field")

    errors = r.errors
    if errors:
        raise ConfigError(errors)
    return ScenarioConfig(
        name=name,
        arms=tuple(arms),
        gate=gate,
        qos=QoSSpec(qos_acc, qos_delay),
        weights=CostWeights(d1, d2),
        workload=workload,
        knowledge=knowledge,
        steps=steps,
        seeds=tuple(seeds),
        reference_policy=reference or "",
    )


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def _kernel_dict(k: KernelParams) -> dict:
    return {
        "length_scale": list(k.length_scale),
        "signal_variance": k.signal_variance,
        "noise_variance": k.noise_variance,
        "jitter": k.jitter,
    }


def to_dict(cfg: ScenarioConfig) -> dict:
    """Plain-data tree that :func:`from_dict` maps back to an equal config."""
    arms = []
    for a in cfg.arms:
        c, s = a.response.cost, a.response
        arms.append({
            "name": a.name,
            "retrieval": a.action.retrieval.value,
            "generation": a.action.generation.value,
            "cost": {
                "model_params": c.model_params,
                "input_tokens": [c.input_tokens.mean, c.input_tokens.stddev],
                "output_tokens": [c.output_tokens.mean, c.output_tokens.stddev],
                "gpu_rate_tflops": c.gpu_rate_tflops,
                "calibration": c.calibration,
            },
            "response": {
                "base_accuracy": s.base_accuracy,
                "overlap_slope": s.overlap_slope,
                "multihop_penalty": s.multihop_penalty,
                "delay": [s.delay_mean_s, s.delay_std_s],
            },
        })
    g, w, k = cfg.gate, cfg.workload, cfg.knowledge
    drift = {"kind": w.drift.kind}
    if w.drift.kind == "piecewise":
        drift["segments"] = [{"start": s, "shift": h} for s, h in w.drift.segments]
    if w.drift.kind == "sinusoidal":
        drift.update(amplitude=w.drift.amplitude, period=w.drift.period)
    out = {
        "name": cfg.name,
        "steps": cfg.steps,
        "seeds": list(cfg.seeds),
        "weights": {"delta1": cfg.weights.delta1, "delta2": cfg.weights.delta2},
        "qos": {"min_accuracy": cfg.qos.min_accuracy, "max_delay_s": cfg.qos.max_delay_s},
        "gate": {
            "warmup_steps": g.warmup_steps,
            "beta_safe": g.beta_safe,
            "beta_acq": g.beta_acq,
            "safe_seed": list(g.safe_seed),
            "window": g.window,
            "query_len_norm": g.query_len_norm,
            "entity_count_norm": g.entity_count_norm,
            "kernels": {fn: _kernel_dict(g.kernels[fn]) for fn in FUNCTIONS},
        },
        "arms": arms,
        "workload": {
            "multihop_rate": w.multihop_rate,
            "keywords_per_query": w.keywords_per_query,
            "multihop_extra_keywords": w.multihop_extra_keywords,
            "query_len": list(w.query_len),
            "entity_count": list(w.entity_count),
            "cloud_delay": list(w.cloud_delay),
            "edge_delays": [list(e) for e in w.edge_delays],
            "popularity": copy.deepcopy(w.popularity),
            "drift": drift,
        },
        "knowledge": {
            "n_topics": k.n_topics,
            "keywords_per_topic": k.keywords_per_topic,
            "chunks_per_community": k.chunks_per_community,
            "keywords_per_chunk": k.keywords_per_chunk,
            "capacity": k.capacity,
            "trigger_threshold": k.trigger_threshold,
            "top_k": k.top_k,
            "push_limit": k.push_limit,
            "trigger_scope": k.trigger_scope,
            "preload": k.preload,
            "burn_in_queries": k.burn_in_queries,
            "synonym_classes": [list(c) for c in k.synonym_classes],
        },
    }
    if cfg.reference_policy:
        out["reference_policy"] = cfg.reference_policy
    return out


def dump_config(cfg: ScenarioConfig) -> str:
    return yaml.safe_dump(to_dict(cfg), sort_keys=False)


def config_hash(data: bytes | str) -> str:
    if isinstance(data, str):
        data = data.encode()
    return hashlib.sha256(data).hexdigest()


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------

def shipped_scenarios() -> list[str]:
    root = resources.files("ragate") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def resolve_scenario(name_or_path: str | Path) -> Path:
    """Path of a scenario given a file path or the name of a shipped scenario."""
    p = Path(name_or_path)
    if p.exists():
        return p
    shipped = resources.files("ragate") / "scenarios" / f"{name_or_path}.yaml"
    if shipped.is_file():
        return Path(str(shipped))
    raise FileNotFoundError(
        f"no scenario file {str(name_or_path)!r} and no shipped scenario of that name "
        f"(shipped: {', '.join(shipped_scenarios())})"
    )


def _merge(base: dict, over: dict) -> dict:
    out = dict(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def _read_tree(path: Path, seen: tuple = ()) -> dict:
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError([f"{path}: cannot read file ({e.strerror or e})"]) from None
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError([f"{path}: YAML parse error: {e}"]) from None
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError([f"{path}: top level must be a mapping"])
    parent = raw.get("extends")
    if parent is None:
        return raw
    if not isinstance(parent, str):
        raise ConfigError(["extends: expected a scenario name or path"])
    candidate = path.parent / parent
    try:
        ppath = candidate if candidate.exists() else resolve_scenario(parent)
    except FileNotFoundError as e:
        raise ConfigError([f"extends: {e}"]) from None
    if ppath.resolve() in seen:
        raise ConfigError([f"extends: cycle through {ppath}"])
    merged = _merge(_read_tree(ppath, seen + (path.resolve(),)), raw)
    merged.pop("extends", None)
    return merged


def load_and_validate(path: str | Path) -> ScenarioConfig:
    """Load a scenario file (or shipped scenario name) and validate it fully."""
    try:
        p = resolve_scenario(path)
    except FileNotFoundError as e:
        raise ConfigError([str(e)]) from None
    return from_dict(_read_tree(p))
