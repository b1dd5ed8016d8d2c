"""Arm selection with contextual Thompson sampling and the composed policies.

A policy decides, per event, which unknown groups to reveal (through its
selector) and which arm to play on the resulting context (through its arm
bank). Six variants are built by :func:`build_policy`:

=============  ===========================================================
``cts_full``   reveal every group, then CTS
``cts_query``  reveal nothing, CTS on the observed features only
``catso``      CCB selector over ``stages`` rounds, lambda = 1
``ncatso``     ``catso`` with lambda from a GP-UCB tuner
``tsrc``       Beta-sampling selector, then CTS
``wtsrc``      ``tsrc`` with a sliding window over recent events
=============  ===========================================================
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bayes_linear import GaussianLinearEstimator
from .environments import RevealSession
from .errors import BudgetError, ConfigError, DimensionError
from .feature_attention import BetaFeatureSelector, CcbFeatureSelector, FeatureGroupSchema
from .gpucb_tuner import GpUcbTuner

VARIANTS = ("cts_full", "cts_query", "catso", "tsrc")
DISPLAY_NAMES = {
    ("cts_full", False): "CTS-full",
    ("cts_full", True): "CTS-full",
    ("cts_query", False): "CTS-query",
    ("cts_query", True): "CTS-query",
    ("catso", False): "CATSO",
    ("catso", True): "NCATSO",
    ("tsrc", False): "TSRC",
    ("tsrc", True): "WTSRC",
}
ALIASES = {"ncatso": ("catso", True), "wtsrc": ("tsrc", True)}


@dataclass
class RngStreams:
    """Independent generators per consumer, all derived from one run seed.

    Keeping arm draws on their own stream lets a policy that never samples
    features replay exactly the arm draws of one that does.
    """

    features: np.random.Generator
    arms: np.random.Generator
    env: np.random.Generator

    @classmethod
    def from_seed(cls, seed: int) -> "RngStreams":
        return cls(*(np.random.default_rng([seed, salt]) for salt in (1, 2, 3)))


class CtsArmBank:
    def __init__(self, n_arms: int, dim: int, v: float = 0.25):
        if n_arms < 2:
            raise ValueError("need at least two arms")
        self.n_arms = n_arms
        self.dim = dim
        self.v = v
        self.arms = [GaussianLinearEstimator(dim) for _ in range(n_arms)]

    def choose(self, x, rng: np.random.Generator) -> int:
        """Thompson draw per arm, argmax of ``x^T mu_k``, ties to the lowest arm."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dim,):
            raise DimensionError(f"expected context of shape ({self.dim},), got {x.shape}")
        scores = [arm.sample_score(x, self.v, rng) for arm in self.arms]
        return int(np.argmax(scores))

    def update(self, k: int, x, r: float) -> None:
        if not 0 <= k < self.n_arms:
            raise IndexError(f"invalid arm {k}")
        self.arms[k].update(x, r, 1.0)


def stage_budgets(budget: int, stages: int) -> list[int]:
    """Split ``budget`` reveals over ``stages``; earlier stages take the remainder."""
    if stages < 1:
        raise ValueError("need at least one stage")
    if stages > max(budget, 1):
        raise ValueError(f"{stages} stages exceed budget {budget}")
    base, rem = divmod(budget, stages)
    return [base + (s < rem) for s in range(stages)]


class OrchestrationPolicy:
    """Selector + arm bank + budget: one complete orchestration strategy."""

    def __init__(
        self,
        variant: str,
        schema: FeatureGroupSchema,
        arm_bank: CtsArmBank,
        selector: CcbFeatureSelector | BetaFeatureSelector | None,
        budget: int,
        stages: int = 1,
        nonstationary: bool = False,
        tuner: GpUcbTuner | None = None,
        epoch: int = 100,
        min_decay: float = 0.5,
    ):
        if variant not in VARIANTS:
            raise ConfigError(f"unknown policy variant {variant!r}")
        if not 0 <= budget <= schema.n_groups:
            raise ConfigError(f"budget {budget} outside [0, {schema.n_groups}]")
        if variant == "cts_query" and (budget or selector is not None):
            raise ConfigError("cts_query reveals nothing")
        if variant == "cts_full" and budget != schema.n_groups:
            raise ConfigError("cts_full reveals every group")
        if arm_bank.dim != schema.n_features:
            raise DimensionError("arm bank dimension differs from the schema")
        if isinstance(selector, CcbFeatureSelector) and selector.dim != schema.n_features:
            raise DimensionError("selector dimension differs from the schema")
        self.variant = variant
        self.schema = schema
        self.arm_bank = arm_bank
        self.selector = selector
        self.budget = budget
        self.stages = stages
        self.stage_plan = stage_budgets(budget, stages)
        self.nonstationary = nonstationary
        self.tuner = tuner
        self.epoch = epoch
        self.min_decay = min_decay
        self._obs_idx = np.asarray(schema.observed, dtype=np.intp)
        self._group_idx = schema.group_arrays()
        self._t = 0
        self._lam = 1.0
        self._epoch_reward = 0.0
        self._epoch_round = 0

    @property
    def name(self) -> str:
        return DISPLAY_NAMES[(self.variant, self.nonstationary)]

    @property
    def decay(self) -> float:
        """Decay applied to CCB selector updates for the current event."""
        return max(self._lam, self.min_decay) if self.tuner is not None else 1.0

    def _tick_tuner(self) -> None:
        if self.tuner is None or self._t % self.epoch:
            return
        if self._t:
            self.tuner.record(self._lam, self._epoch_reward / self.epoch)
        self._epoch_reward = 0.0
        self._epoch_round += 1
        self._lam = self.tuner.propose(self._epoch_round)

    def choose_groups(self, x: np.ndarray, candidates: list[int], u: int, streams: RngStreams) -> list[int]:
        if self.variant == "cts_full":
            return list(candidates)
        if isinstance(self.selector, CcbFeatureSelector):
            return self.selector.select(x, candidates, u, streams.features)
        if isinstance(self.selector, BetaFeatureSelector):
            return self.selector.select(candidates, u, streams.features)
        return []

    def step(self, session: RevealSession, streams: RngStreams) -> tuple[tuple[int, ...], int, int]:
        """Run one event: staged reveals, arm choice, reward, model updates."""
        self._tick_tuner()
        x = np.zeros(self.schema.n_features)
        x[self._obs_idx] = session.observed_values
        candidates = list(range(self.schema.n_groups))
        revealed: list[int] = []
        plan = [self.budget] if self.variant in ("cts_full", "tsrc") else self.stage_plan
        for u in plan:
            if u == 0:
                continue
            chosen = self.choose_groups(x, candidates, u, streams)
            for g in chosen:
                x[self._group_idx[g]] = session.reveal(g)
            revealed.extend(chosen)
            chosen_set = set(chosen)
            candidates = [g for g in candidates if g not in chosen_set]
        if len(revealed) > self.budget:
            raise BudgetError("policy revealed more groups than its budget")

        k = self.arm_bank.choose(x, streams.arms)
        r = session.commit_arm(k)
        self.arm_bank.update(k, x, r)
        if isinstance(self.selector, CcbFeatureSelector):
            self.selector.update(revealed, x, r, self.decay)
        elif isinstance(self.selector, BetaFeatureSelector):
            self.selector.update(revealed, r, self._t)
        self._epoch_reward += r
        self._t += 1
        return tuple(revealed), k, r


def build_policy(
    policy: str,
    schema: FeatureGroupSchema,
    n_arms: int,
    budget: int = 0,
    stages: int = 1,
    v: float = 0.25,
    nonstationary: bool = False,
    window: int = 100,
    epoch: int = 100,
    min_decay: float = 0.5,
    tuner: GpUcbTuner | None = None,
) -> OrchestrationPolicy:
    """Assemble one of the named variants (``ncatso``/``wtsrc`` imply nonstationary)."""
    policy = policy.lower().replace("-", "_")
    if policy in ALIASES:
        policy, nonstationary = ALIASES[policy]
    if policy not in VARIANTS:
        raise ConfigError(f"unknown policy {policy!r}; choose from {sorted(VARIANTS + tuple(ALIASES))}")
    n = schema.n_features
    bank = CtsArmBank(n_arms, n, v)
    selector = None
    if policy == "cts_full":
        budget, stages = schema.n_groups, 1
    elif policy == "cts_query":
        budget, stages = 0, 1
    elif policy == "catso":
        selector = CcbFeatureSelector(schema.n_groups, n, v)
        if nonstationary and tuner is None:
            tuner = GpUcbTuner()
    elif policy == "tsrc":
        selector = BetaFeatureSelector(schema.n_groups, window if nonstationary else None)
        stages = 1
    if policy != "catso":
        tuner = None
    if not 0 <= budget <= schema.n_groups:
        raise ConfigError(f"budget {budget} outside [0, {schema.n_groups}]")
    if not 1 <= stages <= max(budget, 1):
        raise ConfigError(f"stages must lie in [1, max(budget, 1)], got {stages}")
    return OrchestrationPolicy(
        policy, schema, bank, selector, budget, stages, nonstationary, tuner, epoch, min_decay
    )
