"""Bayesian linear regression with a Gaussian posterior and rank-1 updates.

One estimator keeps a precision matrix ``B``, a response vector ``z`` and the
posterior mean. Updates follow

    B <- decay * B + x x^T
    z <- z + x r
    mean <- decay * B^{-1} z

so ``decay=1`` is the usual ridge-regression posterior used for arm models,
and ``decay<1`` is the discounted variant used by the feature selectors. The
inverse of ``B`` is carried along with Sherman-Morrison updates and rebuilt
from ``B`` every ``refresh_every`` updates.
"""

from __future__ import annotations

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import cho_factor, cho_solve
from scipy.linalg.blas import dger

from .errors import DimensionError, NumericalError

__all__ = ["GaussianLinearEstimator", "score"]


def score(w: ArrayLike, x: ArrayLike) -> float:
    """Linear payoff ``w^T x`` of a coefficient vector against a context."""
    w = np.asarray(w, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if w.shape != x.shape or w.ndim != 1:
        raise DimensionError(f"shape mismatch: {w.shape} vs {x.shape}")
    return float(w @ x)


class GaussianLinearEstimator:
    """Conjugate Gaussian posterior over a ``dim``-dimensional weight vector.

    Parameters
    ----------
    dim : int
        Context dimension.
    refresh_every : int, default=1000
        Rebuild the inverse from the precision matrix after this many updates.
    prior_floor, prior_reset : float
        With ``decay < 1`` the identity prior shrinks geometrically. Once its
        weight drops below ``prior_floor`` it is topped back up to
        ``prior_reset`` so the precision stays invertible in float64.
    """

    def __init__(
        self,
        dim: int,
        refresh_every: int = 1000,
        prior_floor: float = 1e-6,
        prior_reset: float = 1e-3,
    ):
        if int(dim) != dim or dim < 1:
            raise DimensionError(f"dim must be a positive integer, got {dim!r}")
        self.dim = int(dim)
        self.refresh_every = refresh_every
        self.prior_floor = prior_floor
        self.prior_reset = prior_reset
        self._precision = np.eye(self.dim, order="F")
        self._inverse = np.eye(self.dim, order="F")
        self._response = np.zeros(self.dim)
        self._mean = np.zeros(self.dim)
        self._prior_weight = 1.0
        self._last_decay = 1.0
        self.n_updates = 0

    @property
    def precision(self) -> NDArray[np.float64]:
        return self._precision.copy()

    @property
    def covariance(self) -> NDArray[np.float64]:
        """Inverse precision (unit exploration scale)."""
        return self._inverse.copy()

    @property
    def response(self) -> NDArray[np.float64]:
        return self._response.copy()

    @property
    def mean(self) -> NDArray[np.float64]:
        return self._mean.copy()

    @property
    def prior_weight(self) -> float:
        """Coefficient currently multiplying the identity prior in the precision."""
        return self._prior_weight

    def _check_context(self, x) -> NDArray[np.float64]:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dim,):
            raise DimensionError(f"expected context of shape ({self.dim},), got {x.shape}")
        return x

    def update(self, x: ArrayLike, r: float, decay: float = 1.0) -> "GaussianLinearEstimator":
        x = self._check_context(x)
        if not 0.0 < decay <= 1.0:
            raise ValueError(f"decay must lie in (0, 1], got {decay}")
        if not 0.0 <= r <= 1.0:
            raise ValueError(f"reward must lie in [0, 1], got {r}")

        if decay != 1.0:
            self._precision *= decay
            self._inverse /= decay
            self._prior_weight *= decay

        nz = np.flatnonzero(x)
        gain = None
        if nz.size:
            xs = x[nz]
            self._precision[np.ix_(nz, nz)] += np.outer(xs, xs)
            # Sherman-Morrison on the inverse; ``gain`` ends up as B'^{-1} x
            gain = self._inverse[:, nz] @ xs
            denom = 1.0 + xs @ gain[nz]
            dger(-1.0 / denom, gain, gain, a=self._inverse, overwrite_a=True)
            gain /= denom
            self._response[nz] += xs * r

        self.n_updates += 1
        refreshed = False
        if self._prior_weight < self.prior_floor:
            self._precision[np.diag_indices(self.dim)] += self.prior_reset - self._prior_weight
            self._prior_weight = self.prior_reset
            refreshed = True
        elif self.n_updates % self.refresh_every == 0:
            refreshed = True

        if refreshed:
            self._last_decay = decay
            self.refresh()
        elif decay == 1.0 and self._last_decay == 1.0:
            if gain is not None:
                self._mean += gain * (r - x @ self._mean)
        else:
            self._last_decay = decay
            self._mean = decay * (self._inverse @ self._response)
        return self

    def refresh(self) -> None:
        """Recompute the inverse and the mean from the precision matrix."""
        try:
            factor = cho_factor(self._precision, lower=True, check_finite=True)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise NumericalError("precision matrix is no longer positive definite") from exc
        inverse = cho_solve(factor, np.eye(self.dim))
        inverse = 0.5 * (inverse + inverse.T)
        self._inverse = np.asfortranarray(inverse)
        self._mean = self._last_decay * (self._inverse @ self._response)

    def sample(self, v: float, rng: np.random.Generator) -> NDArray[np.float64]:
        """Draw coefficients from N(mean, v^2 B^{-1})."""
        if v < 0:
            raise ValueError("exploration scale v must be nonnegative")
        z = rng.standard_normal(self.dim)
        if v == 0:
            return self._mean.copy()
        for attempt in range(2):
            try:
                chol = np.linalg.cholesky(self._inverse)
                break
            except np.linalg.LinAlgError:
                if attempt:
                    raise NumericalError("covariance factorization failed after refresh")
                self.refresh()
        return self._mean + v * (chol @ z)

    def sample_score(self, x: ArrayLike, v: float, rng: np.random.Generator) -> float:
        """Draw ``x^T w`` for ``w ~ N(mean, v^2 B^{-1})`` without sampling ``w``.

        The projection of a Gaussian is the scalar Gaussian
        N(x^T mean, v^2 x^T B^{-1} x), so one standard normal suffices.
        """
        x = self._check_context(x)
        z = rng.standard_normal()
        nz = np.flatnonzero(x)
        if nz.size == 0:
            return 0.0
        xs = x[nz]
        loc = float(xs @ self._mean[nz])
        if v == 0:
            return loc
        var = self._quad(nz, xs)
        if var < 0:
            self.refresh()
            var = self._quad(nz, xs)
            if var < -1e-9:
                raise NumericalError(f"negative predictive variance {var}")
        return loc + v * np.sqrt(max(var, 0.0)) * z

    def _quad(self, nz, xs) -> float:
        if 2 * nz.size > self.dim:
            x = np.zeros(self.dim)
            x[nz] = xs
            return float(x @ self._inverse @ x)
        return float(xs @ self._inverse[np.ix_(nz, nz)] @ xs)

    def __repr__(self) -> str:
        return f"GaussianLinearEstimator(dim={self.dim}, n_updates={self.n_updates})"
