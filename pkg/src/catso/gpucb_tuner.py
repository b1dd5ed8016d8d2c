"""GP-UCB search over the decay parameter on [0, 1]."""

from __future__ import annotations

from collections import deque
from typing import Callable

import numpy as np
from scipy.linalg import cho_factor, cho_solve


def default_alpha(n_grid: int, delta: float = 0.1) -> Callable[[int], float]:
    """Exploration schedule 2 log(|D| t^2 pi^2 / (6 delta))."""

    def alpha(t: int) -> float:
        return 2.0 * np.log(n_grid * t**2 * np.pi**2 / (6.0 * delta))

    return alpha


class GpUcbTuner:
    """Upper-confidence search for lambda with a squared-exponential GP.

    Parameters
    ----------
    n_grid : int
        Number of equispaced candidate values on [0, 1], endpoints included.
    length_scale, signal_var, noise_var : float
        Kernel ``signal_var * exp(-(a - b)^2 / (2 length_scale^2))`` plus
        observation noise.
    capacity : int
        Keep at most this many (lambda, reward) observations; oldest go first.
    alpha : callable, optional
        Maps the round ``t >= 1`` to the UCB exploration weight.
    """

    def __init__(
        self,
        n_grid: int = 101,
        length_scale: float = 0.1,
        signal_var: float = 1.0,
        noise_var: float = 0.1,
        capacity: int = 500,
        alpha: Callable[[int], float] | None = None,
    ):
        if n_grid < 2:
            raise ValueError("grid needs at least both endpoints")
        self.grid = np.linspace(0.0, 1.0, n_grid)
        self.length_scale = length_scale
        self.signal_var = signal_var
        self.noise_var = noise_var
        self.capacity = capacity
        self.alpha = alpha or default_alpha(n_grid)
        self.history: deque[tuple[float, float]] = deque(maxlen=capacity)

    def kernel(self, a, b) -> np.ndarray:
        a = np.asarray(a, dtype=np.float64)[:, None]
        b = np.asarray(b, dtype=np.float64)[None, :]
        return self.signal_var * np.exp(-0.5 * ((a - b) / self.length_scale) ** 2)

    def _posterior(self, query: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        if not self.history:
            return np.zeros(query.size), np.full(query.size, np.sqrt(self.signal_var))
        lam, y = (np.array(c) for c in zip(*self.history))
        K = self.kernel(lam, lam) + self.noise_var * np.eye(lam.size)
        factor = cho_factor(K, lower=True)
        k = self.kernel(lam, query)
        mean = k.T @ cho_solve(factor, y)
        var = self.signal_var - np.einsum("ij,ij->j", k, cho_solve(factor, k))
        return mean, np.sqrt(np.clip(var, 0.0, None))

    def posterior(self, query: float) -> tuple[float, float]:
        """GP posterior (mean, stddev) of the reward at ``query``."""
        _check_unit(query)
        mean, sd = self._posterior(np.array([float(query)]))
        return float(mean[0]), float(sd[0])

    def propose(self, t: int) -> float:
        if t < 1:
            raise ValueError("round counter starts at 1")
        mean, sd = self._posterior(self.grid)
        ucb = mean + np.sqrt(self.alpha(t)) * sd
        return float(self.grid[int(np.argmax(ucb))])

    def record(self, lam: float, reward: float) -> None:
        _check_unit(lam)
        self.history.append((float(lam), float(reward)))


def _check_unit(lam: float) -> None:
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
