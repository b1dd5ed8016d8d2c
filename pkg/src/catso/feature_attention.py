"""Choosing which unknown feature groups to reveal.

``CcbFeatureSelector`` is the contextual combinatorial selector used by
CATSO: one Gaussian linear model per group, scored against the context
observed so far. ``BetaFeatureSelector`` is the context-free Beta sampling
selector of TSRC, with an optional sliding window for WTSRC.
"""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .bayes_linear import GaussianLinearEstimator
from .errors import BudgetError, SchemaError

OBSERVED = "observed"


@dataclass(frozen=True)
class FeatureGroupSchema:
    """Partition of feature indices into free (observed) and revealable groups."""

    n_features: int
    observed: tuple[int, ...]
    groups: tuple[tuple[int, ...], ...]
    names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "observed", tuple(sorted(int(i) for i in self.observed)))
        object.__setattr__(self, "groups", tuple(tuple(sorted(int(i) for i in g)) for g in self.groups))
        if not self.names:
            object.__setattr__(self, "names", tuple(f"g{i}" for i in range(len(self.groups))))
        if len(self.names) != len(self.groups):
            raise SchemaError("one name per group is required")
        seen = list(self.observed)
        for g in self.groups:
            if not g:
                raise SchemaError("empty feature group")
            seen.extend(g)
        if sorted(seen) != list(range(self.n_features)):
            raise SchemaError(
                "observed features and groups must partition 0..n_features-1 exactly once"
            )

    @classmethod
    def singletons(cls, n_features: int, observed: Iterable[int] = ()) -> "FeatureGroupSchema":
        observed = sorted(set(int(i) for i in observed))
        obs = set(observed)
        unknown = [i for i in range(n_features) if i not in obs]
        return cls(n_features, tuple(observed), tuple((i,) for i in unknown), tuple(f"f{i}" for i in unknown))

    @property
    def n_groups(self) -> int:
        return len(self.groups)

    @property
    def is_singleton(self) -> bool:
        return all(len(g) == 1 for g in self.groups)

    def group_arrays(self) -> list[np.ndarray]:
        return [np.asarray(g, dtype=np.intp) for g in self.groups]

    def to_text(self) -> str:
        lines = []
        if self.observed:
            lines.append(f"{OBSERVED}: {_format_ranges(self.observed)}")
        for name, g in zip(self.names, self.groups):
            lines.append(f"{name}: {_format_ranges(g)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, n_features: int) -> "FeatureGroupSchema":
        """Parse ``name: a-b,c`` lines (0-based, inclusive ranges).

        A line named ``observed`` lists the free features. Features not
        mentioned anywhere become singleton groups.
        """
        observed: list[int] = []
        names, groups = [], []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if ":" not in line:
                raise SchemaError(f"line {lineno}: expected 'name: ranges'")
            name, spec = (s.strip() for s in line.split(":", 1))
            idx = _parse_ranges(spec, lineno)
            if name == OBSERVED:
                observed.extend(idx)
            else:
                names.append(name)
                groups.append(tuple(idx))
        covered = set(observed).union(*map(set, groups)) if groups else set(observed)
        for i in range(n_features):
            if i not in covered:
                names.append(f"f{i}")
                groups.append((i,))
        return cls(n_features, tuple(observed), tuple(groups), tuple(names))


def _parse_ranges(spec: str, lineno: int) -> list[int]:
    out = []
    for part in spec.split(","):
        part = part.strip()
        m = re.fullmatch(r"(\d+)(?:\s*-\s*(\d+))?", part)
        if not m:
            raise SchemaError(f"line {lineno}: bad index range {part!r}")
        lo = int(m.group(1))
        hi = int(m.group(2)) if m.group(2) else lo
        if hi < lo:
            raise SchemaError(f"line {lineno}: descending range {part!r}")
        out.extend(range(lo, hi + 1))
    return out


def _format_ranges(idx: Sequence[int]) -> str:
    parts = []
    start = prev = idx[0]
    for i in list(idx[1:]) + [None]:
        if i is not None and i == prev + 1:
            prev = i
            continue
        parts.append(str(start) if start == prev else f"{start}-{prev}")
        if i is not None:
            start = prev = i
    return ",".join(parts)


def top_u(scores: Sequence[float], candidates: Sequence[int], u: int) -> list[int]:
    """The ``u`` candidates with the largest scores, ties to the lowest index.

    The subset objective is a sum of per-group scores, so this is also the
    argmax over all size-``u`` subsets.
    """
    candidates = list(candidates)
    if u > len(candidates):
        raise BudgetError(f"cannot pick {u} groups from {len(candidates)} candidates")
    if u <= 0:
        return []
    scores = np.asarray(scores, dtype=np.float64)
    key = np.lexsort((np.asarray(candidates), -scores))
    return [candidates[i] for i in key[:u]]


class CcbFeatureSelector:
    """One Gaussian linear model per group, predicting the event reward."""

    def __init__(self, n_groups: int, dim: int, v: float = 0.25, **estimator_kw):
        self.n_groups = n_groups
        self.dim = dim
        self.v = v
        self.estimators = [GaussianLinearEstimator(dim, **estimator_kw) for _ in range(n_groups)]

    def sample_scores(self, x, candidates: Sequence[int], rng: np.random.Generator) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        return np.array([self.estimators[g].sample_score(x, self.v, rng) for g in candidates])

    def select(self, x, candidates: Sequence[int], u: int, rng: np.random.Generator) -> list[int]:
        candidates = sorted(candidates)
        if u > len(candidates):
            raise BudgetError(f"cannot pick {u} groups from {len(candidates)} candidates")
        if u <= 0:
            return []
        if u == len(candidates):
            return candidates
        return top_u(self.sample_scores(x, candidates, rng), candidates, u)

    def update(self, revealed: Iterable[int], x, r: float, decay: float = 1.0) -> None:
        for g in revealed:
            if not 0 <= g < self.n_groups:
                raise IndexError(f"unknown group index {g}")
            self.estimators[g].update(x, r, decay)


class BetaFeatureSelector:
    """Per-group Beta posteriors over "reward when revealed".

    With ``window`` set, the parameters only count the last ``window`` events.
    """

    def __init__(self, n_groups: int, window: int | None = None):
        if window is not None and window < 1:
            raise ValueError("window must be a positive event count")
        self.n_groups = n_groups
        self.window = window
        self.alpha = np.ones(n_groups)
        self.beta = np.ones(n_groups)
        self._buffer: deque[tuple[int, tuple[int, ...], int]] = deque()

    def select(self, candidates: Sequence[int], u: int, rng: np.random.Generator) -> list[int]:
        candidates = sorted(candidates)
        if u > len(candidates):
            raise BudgetError(f"cannot pick {u} groups from {len(candidates)} candidates")
        if u <= 0:
            return []
        if u == len(candidates):
            return candidates
        idx = np.asarray(candidates)
        return top_u(rng.beta(self.alpha[idx], self.beta[idx]), candidates, u)

    def update(self, revealed: Iterable[int], r: int, now: int) -> None:
        if r not in (0, 1):
            raise ValueError(f"Beta selectors need binary rewards, got {r}")
        revealed = tuple(revealed)
        for g in revealed:
            if not 0 <= g < self.n_groups:
                raise IndexError(f"unknown group index {g}")
        self._credit(revealed, r, +1)
        if self.window is None:
            return
        self._buffer.append((now, revealed, r))
        while self._buffer and self._buffer[0][0] <= now - self.window:
            _, old, old_r = self._buffer.popleft()
            self._credit(old, old_r, -1)

    def _credit(self, groups, r, sign):
        if groups:
            idx = np.asarray(groups)
            self.alpha[idx] += sign * r
            self.beta[idx] += sign * (1 - r)

    @property
    def buffer(self) -> list[tuple[int, tuple[int, ...], int]]:
        return list(self._buffer)

    def replay(self) -> tuple[np.ndarray, np.ndarray]:
        """(alpha, beta) rebuilt from the buffered events alone."""
        alpha, beta = np.ones(self.n_groups), np.ones(self.n_groups)
        for _, groups, r in self._buffer:
            for g in groups:
                alpha[g] += r
                beta[g] += 1 - r
        return alpha, beta
