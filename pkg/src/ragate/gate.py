"""
Collaborative gate: safe online Bayesian optimization over retrieval/generation arms.

The gate keeps GP posteriors of total cost, accuracy and delay over joint
(context, arm) features. The first ``warmup_steps`` decisions are uniformly
random; afterwards the gate picks the arm with the lowest cost lower
confidence bound among arms whose accuracy LCB and delay UCB satisfy the QoS
targets, always including the seed arms.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .costs import CostWeights, Outcome
from .gp import GaussianProcess, KernelParams

__all__ = [
    "Action",
    "Context",
    "Decision",
    "FEATURE_NAMES",
    "Generation",
    "QoSSpec",
    "Retrieval",
    "SafeGate",
    "safe_mask",
]

log = logging.getLogger(__name__)

COST, ACCURACY, DELAY = 0, 1, 2
FUNCTIONS = ("cost", "accuracy", "delay")

# Context part of the GP input, in order; the arm one-hot follows.
FEATURE_NAMES = (
    "cloud_delay_s",
    "best_edge_delay_s",
    "best_overlap_ratio",
    "multi_hop",
    "query_len",
    "entity_count",
)


class Retrieval(str, enum.Enum):
    NONE = "none"
    EDGE_NAIVE = "edge_naive"
    CLOUD_GRAPH = "cloud_graph"


class Generation(str, enum.Enum):
    LOCAL_SLM = "local_slm"
    CLOUD_LLM = "cloud_llm"


@dataclass(frozen=True)
class Action:
    retrieval: Retrieval
    generation: Generation

    def __str__(self):
        return f"{self.retrieval.value}+{self.generation.value}"


@dataclass(frozen=True)
class Context:
    """What the gate sees before deciding: network delays, edge knowledge, query complexity."""

    cloud_delay_s: float
    best_edge_delay_s: float
    best_overlap_ratio: float
    best_edge_id: int
    multi_hop: bool
    query_len_tokens: int
    entity_count: int

    def __post_init__(self):
        if not 0.0 <= self.best_overlap_ratio <= 1.0:
            raise ValueError(f"best_overlap_ratio must lie in [0, 1], got {self.best_overlap_ratio}")
        if self.cloud_delay_s < 0 or self.best_edge_delay_s < 0:
            raise ValueError("delays must be >= 0")
        if self.query_len_tokens < 0 or self.entity_count < 0:
            raise ValueError("query_len_tokens and entity_count must be >= 0")


@dataclass(frozen=True)
class QoSSpec:
    min_accuracy: float
    max_delay_s: float

    def __post_init__(self):
        if not 0.0 <= self.min_accuracy <= 1.0:
            raise ValueError("min_accuracy must lie in [0, 1]")
        if not self.max_delay_s > 0:
            raise ValueError("max_delay_s must be > 0")


@dataclass(frozen=True)
class Decision:
    arm: int
    action: Action
    phase: str
    safe_set_size: int


def safe_mask(
    acc_mean: np.ndarray,
    acc_std: np.ndarray,
    delay_mean: np.ndarray,
    delay_std: np.ndarray,
    qos: QoSSpec,
    beta: float,
    seed_mask: np.ndarray,
) -> np.ndarray:
    """Boolean mask of safe arms: seed arms plus arms whose accuracy LCB and
    delay UCB both meet the QoS targets."""
    meets_acc = np.asarray(acc_mean) - beta * np.asarray(acc_std) >= qos.min_accuracy
    meets_delay = np.asarray(delay_mean) + beta * np.asarray(delay_std) <= qos.max_delay_s
    return np.asarray(seed_mask, dtype=bool) | (meets_acc & meets_delay)


class SafeGate:
    """Stateful gate holding the cost/accuracy/delay posteriors.

    Parameters
    ----------
    arms : sequence of Action
        Feasible arms; their order defines the one-hot encoding and tie-breaks.
    qos : QoSSpec
    weights : CostWeights
        Kept for reference; the gate learns the already-weighted total cost.
    kernels : KernelParams or mapping
        One KernelParams for all three functions, or a mapping with keys
        ``cost``, ``accuracy``, ``delay``. Functions with equal parameters
        share one multi-output GP.
    safe_seed : sequence of int
        Indices of arms that are always considered safe.
    beta_safe, beta_acq : float
        Confidence multipliers for the safe set and for the cost LCB.
    warmup_steps : int
        Number of initial uniformly random decisions.
    window : int
        Sliding-window size of each GP.
    query_len_norm, entity_count_norm : float
        Divisors applied to the raw query-complexity features.
    rng : numpy Generator
        Source of warm-up choices.
    """

    def __init__(
        self,
        arms: Sequence[Action],
        qos: QoSSpec,
        weights: CostWeights,
        kernels: KernelParams | Mapping[str, KernelParams],
        safe_seed: Sequence[int],
        beta_safe: float = 2.0,
        beta_acq: float | None = None,
        warmup_steps: int = 100,
        window: int = 512,
        query_len_norm: float = 64.0,
        entity_count_norm: float = 8.0,
        rng: np.random.Generator | None = None,
    ):
        self.arms = tuple(arms)
        if len(set(self.arms)) != len(self.arms) or not self.arms:
            raise ValueError("arms must be a nonempty sequence of distinct actions")
        n_arms = len(self.arms)
        seed = sorted(set(int(i) for i in safe_seed))
        if not seed or seed[0] < 0 or seed[-1] >= n_arms:
            raise ValueError(f"safe_seed must be a nonempty subset of arm indices, got {safe_seed}")
        if not beta_safe > 0 or (beta_acq is not None and not beta_acq > 0):
            raise ValueError("beta must be > 0")
        if warmup_steps < 1:
            raise ValueError("warmup_steps must be positive")

        self.qos = qos
        self.weights = weights
        self.safe_seed = tuple(seed)
        self.beta_safe = float(beta_safe)
        self.beta_acq = float(beta_safe if beta_acq is None else beta_acq)
        self.warmup_steps = int(warmup_steps)
        self.query_len_norm = float(query_len_norm)
        self.entity_count_norm = float(entity_count_norm)
        self.rng = rng if rng is not None else np.random.default_rng()
        self.step = 0
        self.dim = len(FEATURE_NAMES) + n_arms
        self._seed_mask = np.zeros(n_arms, dtype=bool)
        self._seed_mask[list(self.safe_seed)] = True
        self._onehot = np.eye(n_arms)

        if isinstance(kernels, KernelParams):
            kernels = {name: kernels for name in FUNCTIONS}
        missing = set(FUNCTIONS) - set(kernels)
        if missing:
            raise ValueError(f"missing kernel parameters for {sorted(missing)}")
        # Group functions with identical hyperparameters into one model.
        self._groups: list[tuple[GaussianProcess, list[int]]] = []
        by_params: dict[KernelParams, list[int]] = {}
        for i, name in enumerate(FUNCTIONS):
            p = kernels[name]
            if p.dim != self.dim:
                raise ValueError(
                    f"{name} kernel has {p.dim} length scales, features have {self.dim}"
                )
            by_params.setdefault(p, []).append(i)
        for p, idx in by_params.items():
            gp = GaussianProcess(p, max_observations=window, n_outputs=len(idx))
            self._groups.append((gp, idx))

    @property
    def n_arms(self) -> int:
        return len(self.arms)

    @property
    def phase(self) -> str:
        return "warmup" if self.step < self.warmup_steps else "exploit"

    def model(self, function: int | str) -> GaussianProcess:
        """GP housing one of the functions (``cost``, ``accuracy``, ``delay``)."""
        i = FUNCTIONS.index(function) if isinstance(function, str) else function
        for gp, idx in self._groups:
            if i in idx:
                return gp
        raise KeyError(function)

    def arm_index(self, action: Action) -> int:
        try:
            return self.arms.index(action)
        except ValueError:
            raise ValueError(f"{action} is not a feasible arm") from None

    def context_features(self, c: Context) -> np.ndarray:
        return np.array([
            c.cloud_delay_s,
            c.best_edge_delay_s,
            c.best_overlap_ratio,
            1.0 if c.multi_hop else 0.0,
            c.query_len_tokens / self.query_len_norm,
            c.entity_count / self.entity_count_norm,
        ])

    def featurize(self, c: Context, a: Action | int) -> np.ndarray:
        i = a if isinstance(a, (int, np.integer)) else self.arm_index(a)
        if not 0 <= i < self.n_arms:
            raise ValueError(f"arm index {i} out of range")
        return np.concatenate([self.context_features(c), self._onehot[i]])

    def _all_features(self, c: Context) -> np.ndarray:
        ctx = np.broadcast_to(self.context_features(c), (self.n_arms, len(FEATURE_NAMES)))
        return np.hstack([ctx, self._onehot])

    def posteriors(self, c: Context) -> tuple[np.ndarray, np.ndarray]:
        """Posterior means and stddevs, each shaped (3, n_arms): cost, accuracy, delay."""
        Z = self._all_features(c)
        mean = np.empty((3, self.n_arms))
        std = np.empty((3, self.n_arms))
        for gp, idx in self._groups:
            mu, sd = gp.predict(Z)
            mean[idx] = mu.T.reshape(len(idx), -1)
            std[idx] = sd.T.reshape(len(idx), -1)
        return mean, std

    def safe_set_mask(self, c: Context) -> np.ndarray:
        mean, std = self.posteriors(c)
        return self._mask_from(mean, std)

    def _mask_from(self, mean, std) -> np.ndarray:
        return safe_mask(
            mean[ACCURACY], std[ACCURACY], mean[DELAY], std[DELAY],
            self.qos, self.beta_safe, self._seed_mask,
        )

    def safe_set(self, c: Context) -> set[Action]:
        mask = self.safe_set_mask(c)
        return {a for a, ok in zip(self.arms, mask) if ok}

    def select(self, c: Context) -> Decision:
        """Choose an arm for context `c` without touching the posteriors."""
        if self.step < self.warmup_steps:
            i = int(self.rng.integers(self.n_arms))
            return Decision(i, self.arms[i], "warmup", self.n_arms)
        mean, std = self.posteriors(c)
        mask = self._mask_from(mean, std)
        lcb = mean[COST] - self.beta_acq * std[COST]
        i = int(np.argmin(np.where(mask, lcb, np.inf)))
        return Decision(i, self.arms[i], "exploit", int(mask.sum()))

    def decide(self, c: Context) -> Action:
        return self.select(c).action

    def update(self, c: Context, a: Action | int, outcome: Outcome) -> "SafeGate":
        """Add one observation to all three posteriors and advance the step."""
        if not outcome.is_finite():
            raise ValueError(f"outcome has non-finite fields: {outcome}")
        z = self.featurize(c, a)
        targets = (outcome.total_cost, outcome.accuracy, outcome.delay_s)
        for gp, idx in self._groups:
            gp.observe(z, [targets[i] for i in idx])
        if self.step < self.warmup_steps and (
            outcome.accuracy < self.qos.min_accuracy or outcome.delay_s > self.qos.max_delay_s
        ):
            log.debug("warm-up step %d violated QoS: %s", self.step, outcome)
        self.step += 1
        return self
