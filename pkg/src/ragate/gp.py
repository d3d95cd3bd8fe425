"""
Gaussian-process regression over joint (context, arm) feature vectors.

Squared-exponential kernel with per-dimension length scales, zero prior
mean on (optionally) standardized targets, and a sliding observation window.
The Cholesky factor is maintained incrementally: appends cost one triangular
solve, evicting the oldest point is a rank-one update of the trailing block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numba import njit
from scipy.linalg import cholesky
from scipy.linalg.blas import dtrsm

__all__ = [
    "FactorizationError",
    "GaussianProcess",
    "KernelParams",
    "kernel",
    "kernel_matrix",
]

MAX_JITTER = 1e-4


class FactorizationError(np.linalg.LinAlgError):
    """Regularized Gram matrix is not positive definite even at maximum jitter."""


@dataclass(frozen=True)
class KernelParams:
    """Hyperparameters of the squared-exponential kernel.

    Parameters
    ----------
    length_scale : sequence of float
        One positive length scale per feature dimension.
    signal_variance : float
        Prior variance of the latent function.
    noise_variance : float
        Gaussian observation noise added to the Gram diagonal.
    jitter : float
        Numerical regularizer added to the Gram diagonal.
    """

    length_scale: tuple[float, ...]
    signal_variance: float = 1.0
    noise_variance: float = 0.1
    jitter: float = 1e-8

    def __post_init__(self):
        object.__setattr__(self, "length_scale", tuple(float(v) for v in self.length_scale))
        if not self.length_scale:
            raise ValueError("length_scale must have at least one dimension")
        if any(not (v > 0 and math.isfinite(v)) for v in self.length_scale):
            raise ValueError(f"length_scale must be positive, got {self.length_scale}")
        if not self.signal_variance >= 0:
            raise ValueError("signal_variance must be >= 0")
        if not self.noise_variance >= 0:
            raise ValueError("noise_variance must be >= 0")
        if not self.jitter > 0:
            raise ValueError("jitter must be > 0")

    @property
    def dim(self) -> int:
        return len(self.length_scale)


def kernel(a: Sequence[float], b: Sequence[float], params: KernelParams) -> float:
    """Evaluate k(a, b) = sf2 * exp(-0.5 * sum(((a - b) / l)**2))."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != (params.dim,) or b.shape != (params.dim,):
        raise ValueError(
            f"kernel inputs must have shape ({params.dim},), got {a.shape} and {b.shape}"
        )
    z = (a - b) / np.asarray(params.length_scale)
    return float(params.signal_variance * math.exp(-0.5 * float(z @ z)))


def kernel_matrix(A: np.ndarray, B: np.ndarray, params: KernelParams) -> np.ndarray:
    """Cross-covariance between the rows of `A` (m x d) and `B` (n x d)."""
    ls = np.asarray(params.length_scale)
    A = np.atleast_2d(A) / ls
    B = np.atleast_2d(B) / ls
    sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * (A @ B.T)
    np.maximum(sq, 0.0, out=sq)
    return params.signal_variance * np.exp(-0.5 * sq)


# The factor is stored transposed: U = L^T is upper triangular and C-ordered,
# so the row sweeps in _evict_first are contiguous and U^T is a free F-ordered
# lower factor for BLAS.


@njit(cache=True)
def _evict_first(U, n):
    # Factor of the Gram matrix without its first row/column, in place: a
    # rank-one update of the trailing block by the dropped row, written one
    # row/column up-left as it goes so the block ends in the top-left corner.
    x = U[0, 1:n].copy()
    for k in range(1, n):
        ukk = U[k, k]
        xk = x[k - 1]
        r = math.sqrt(ukk * ukk + xk * xk)
        c = r / ukk
        s = xk / ukk
        U[k - 1, k - 1] = r
        for i in range(k + 1, n):
            u = (U[k, i] + s * x[i - 1]) / c
            x[i - 1] = c * x[i - 1] - s * u
            U[k - 1, i - 1] = u
        U[k - 1, n - 1] = 0.0
    for j in range(n):
        U[n - 1, j] = 0.0


def _forward(U: np.ndarray, n: int, BT: np.ndarray) -> np.ndarray:
    """Solve L X = B where L = U[:n, :n]^T; right-hand sides are the rows of BT."""
    return dtrsm(1.0, U[:n, :n].T, BT.T, lower=1).T


class GaussianProcess:
    """Sliding-window GP regressor with an incrementally maintained factor.

    Several targets observed at the same inputs under the same kernel can
    share one model (``n_outputs > 1``); each output is standardized and
    predicted independently, only the factorization is shared.

    Parameters
    ----------
    params : KernelParams
        Kernel hyperparameters; fixes the feature dimension.
    max_observations : int
        Window size. Observing beyond it evicts the oldest point.
    n_outputs : int
        Number of targets per observation.
    standardize : bool
        If True, targets are centred and scaled by the window's mean and
        (population) standard deviation before applying the zero-mean prior;
        predictions are returned in natural units.
    refactor_every : int
        Number of incremental factor updates after which the factor is
        recomputed from scratch.
    """

    def __init__(
        self,
        params: KernelParams,
        max_observations: int = 512,
        n_outputs: int = 1,
        standardize: bool = True,
        refactor_every: int = 256,
    ):
        if max_observations < 1:
            raise ValueError("max_observations must be positive")
        if n_outputs < 1:
            raise ValueError("n_outputs must be positive")
        self.params = params
        self.dim = params.dim
        self.max_observations = int(max_observations)
        self.n_outputs = int(n_outputs)
        self.standardize = standardize
        self.refactor_every = refactor_every
        self.jitter = params.jitter
        self._n = 0
        self._X = np.zeros((self.max_observations, self.dim))
        self._y = np.zeros((self.max_observations, self.n_outputs))
        self._U = np.zeros((self.max_observations, self.max_observations))
        self._updates_since_refactor = 0

    @classmethod
    def from_data(cls, params: KernelParams, X, y, **kwargs) -> "GaussianProcess":
        """Batch-build a model whose window holds the last rows of (X, y)."""
        gp = cls(params, **kwargs)
        X = np.asarray(X, dtype=float).reshape(-1, params.dim)
        y = np.asarray(y, dtype=float).reshape(X.shape[0], gp.n_outputs)
        if not np.all(np.isfinite(y)):
            raise ValueError("GP targets must be finite")
        X = X[-gp.max_observations:]
        y = y[-gp.max_observations:]
        gp._n = len(y)
        gp._X[: gp._n] = X
        gp._y[: gp._n] = y
        gp._refactor()
        return gp

    def __len__(self) -> int:
        return self._n

    @property
    def X(self) -> np.ndarray:
        return self._X[: self._n]

    @property
    def y(self) -> np.ndarray:
        y = self._y[: self._n]
        return y[:, 0] if self.n_outputs == 1 else y

    @property
    def cholesky_factor(self) -> np.ndarray:
        """Lower-triangular L with L L^T equal to the regularized Gram matrix."""
        return self._U[: self._n, : self._n].T

    def noise_diag(self) -> float:
        return self.params.noise_variance + self.jitter

    def gram(self) -> np.ndarray:
        """Regularized Gram matrix K + (noise + jitter) I of the current window."""
        K = kernel_matrix(self.X, self.X, self.params)
        K[np.diag_indices_from(K)] += self.noise_diag()
        return K

    def copy(self) -> "GaussianProcess":
        other = GaussianProcess.__new__(GaussianProcess)
        other.__dict__.update(self.__dict__)
        other._X = self._X.copy()
        other._y = self._y.copy()
        other._U = self._U.copy()
        return other

    def observe(self, feature, target) -> "GaussianProcess":
        """Append one observation, evicting the oldest if the window is full."""
        z = np.asarray(feature, dtype=float).reshape(-1)
        if z.shape != (self.dim,):
            raise ValueError(f"feature must have shape ({self.dim},), got {z.shape}")
        if not np.all(np.isfinite(z)):
            raise ValueError("feature must be finite")
        t = np.asarray(target, dtype=float).reshape(-1)
        if t.shape != (self.n_outputs,):
            raise ValueError(f"expected {self.n_outputs} target value(s), got {t.shape[0]}")
        if not np.all(np.isfinite(t)):
            raise ValueError(f"GP target must be finite, got {target!r}")

        if self._n >= self.max_observations:
            self._evict_oldest()
        self._append(z, t)
        return self

    def _evict_oldest(self):
        n = self._n
        _evict_first(self._U, n)
        self._X[: n - 1] = self._X[1:n]
        self._y[: n - 1] = self._y[1:n]
        self._n = n - 1
        self._updates_since_refactor += 1

    def _append(self, z: np.ndarray, target: np.ndarray):
        n = self._n
        self._X[n] = z
        self._y[n] = target
        self._n = n + 1
        if self._updates_since_refactor >= self.refactor_every:
            self._refactor()
            return
        d2 = self.params.signal_variance + self.noise_diag()
        if n:
            row = _forward(self._U, n, kernel_matrix(z[None, :], self._X[:n], self.params))[0]
            d2 -= row @ row
            self._U[:n, n] = row
        if not d2 > 0:
            self._refactor()
            return
        self._U[n, n] = math.sqrt(d2)
        self._updates_since_refactor += 1

    def _refactor(self):
        """Recompute the factor from scratch, doubling jitter on failure."""
        self._updates_since_refactor = 0
        n = self._n
        self._U[:] = 0.0
        if n == 0:
            return
        while True:
            try:
                self._U[:n, :n] = cholesky(self.gram(), lower=False, check_finite=False)
                return
            except np.linalg.LinAlgError:
                if self.jitter >= MAX_JITTER:
                    raise FactorizationError(
                        f"Gram matrix not positive definite at jitter {self.jitter:g}"
                    ) from None
                self.jitter = min(2.0 * self.jitter, MAX_JITTER)

    def _target_scale(self) -> tuple[np.ndarray, np.ndarray]:
        k = self.n_outputs
        if not self.standardize or self._n == 0:
            return np.zeros(k), np.ones(k)
        y = self._y[: self._n]
        mean = y.mean(0)
        std = y.std(0)
        std[~(std > 1e-12)] = 1.0
        return mean, std

    def predict(self, Q) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean and standard deviation at each row of `Q`.

        The standard deviation is that of the latent function (no observation
        noise) and is returned in natural target units. Arrays have shape
        (m,) for a single output and (m, n_outputs) otherwise.
        """
        Q = np.asarray(Q, dtype=float)
        Q = Q.reshape(-1, self.dim) if Q.ndim < 2 else Q
        if Q.shape[1] != self.dim:
            raise ValueError(f"query must have {self.dim} columns, got {Q.shape[1]}")
        prior_var = self.params.signal_variance
        if self._n == 0:
            mu = np.zeros((Q.shape[0], self.n_outputs))
            sd = np.full((Q.shape[0], self.n_outputs), math.sqrt(prior_var))
        else:
            # One forward sweep gives V = L^-1 K(X, Q) and w = L^-1 y_std;
            # mean = V^T w, variance = k(q, q) - |V|^2.
            mean_y, std_y = self._target_scale()
            m = Q.shape[0]
            B = np.empty((m + self.n_outputs, self._n))
            B[:m] = kernel_matrix(Q, self.X, self.params)
            B[m:] = ((self._y[: self._n] - mean_y) / std_y).T
            B = _forward(self._U, self._n, B)
            V = B[:m]
            mu = mean_y + std_y * (V @ B[m:].T)
            var = prior_var - (V * V).sum(1)
            np.maximum(var, 0.0, out=var)
            sd = np.sqrt(var)[:, None] * std_y
        if self.n_outputs == 1:
            return mu[:, 0], sd[:, 0]
        return mu, sd

    def posterior(self, query) -> tuple[float, float]:
        """Posterior (mean, stddev) of a single-output model at one query point."""
        if self.n_outputs != 1:
            raise ValueError("posterior() is defined for single-output models; use predict()")
        query = np.asarray(query, dtype=float)
        if query.shape != (self.dim,):
            raise ValueError(f"query must have shape ({self.dim},), got {query.shape}")
        mu, sd = self.predict(query[None, :])
        return float(mu[0]), float(sd[0])
