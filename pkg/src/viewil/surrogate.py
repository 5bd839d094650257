"""Ask/tell black-box optimizers over a box: a small GP with expected
improvement, and uniform random search with the same interface."""
from __future__ import annotations

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from . import kernels
from .core import ViewError


class OutOfBounds(ViewError, ValueError):
    pass


DEFAULT_LENGTHSCALES = (0.05, 0.1, 0.2, 0.4, 0.8)


class AskTellOptimizer:
    """Maximizer over the box ``[lo, hi]``; subclasses implement ``ask``."""

    def __init__(self, lo, hi, seed=None):
        self.lo = np.asarray(lo, dtype=float).copy()
        self.hi = np.asarray(hi, dtype=float).copy()
        if self.lo.shape != self.hi.shape or np.any(self.lo > self.hi):
            raise ValueError("need lo <= hi with matching shapes")
        self.rng = np.random.default_rng(seed)
        self.xs: list[np.ndarray] = []
        self.ys: list[float] = []

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    @property
    def history(self):
        return list(zip(self.xs, self.ys))

    def _uniform(self, n):
        return self.lo + (self.hi - self.lo) * self.rng.random((n, self.dim))

    def ask(self) -> np.ndarray:
        raise NotImplementedError

    def tell(self, x, y) -> None:
        x = np.asarray(x, dtype=float)
        if x.shape != self.lo.shape:
            raise OutOfBounds(f"point has shape {x.shape}, expected {self.lo.shape}")
        if np.any(x < self.lo - 1e-9) or np.any(x > self.hi + 1e-9):
            raise OutOfBounds(f"{x} outside [{self.lo}, {self.hi}]")
        if not np.isfinite(y):
            raise ValueError("observed value must be finite")
        self.xs.append(x.copy())
        self.ys.append(float(y))
        self._observed()

    def _observed(self):
        pass

    def best(self):
        """(x, y) of the largest observation, or None when empty."""
        if not self.ys:
            return None
        i = int(np.argmax(self.ys))
        return self.xs[i], self.ys[i]


class RandomSearch(AskTellOptimizer):
    def ask(self) -> np.ndarray:
        return self._uniform(1)[0]


class GaussianProcessSurrogate(AskTellOptimizer):
    """Zero-mean GP on unit-cube inputs and standardized outputs."""

    def __init__(self, lo, hi, seed=None, noise=1e-4, jitter=1e-9, n_candidates=1024,
                 refit_every=5, lengthscales=DEFAULT_LENGTHSCALES, lengthscale=0.2):
        super().__init__(lo, hi, seed)
        self.noise = float(noise)
        self.jitter = float(jitter)
        self.n_candidates = int(n_candidates)
        self.refit_every = int(refit_every)
        self.lengthscales = tuple(lengthscales)
        self.lengthscale = float(lengthscale)
        span = self.hi - self.lo
        self._span = np.where(span > 0, span, 1.0)
        self._fit = None

    def _unit(self, x):
        return (np.atleast_2d(x) - self.lo) / self._span

    def _standardized(self):
        y = np.array(self.ys)
        mu = y.mean()
        sd = y.std()
        return (y - mu) / (sd if sd > 0 else 1.0), mu, (sd if sd > 0 else 1.0)

    def _factor(self, X, ell):
        K = kernels.se_cross(X, X, ell)
        K[np.diag_indices_from(K)] += self.noise ** 2 + self.jitter
        return cho_factor(K, lower=True)

    def log_marginal_likelihood(self, ell: float) -> float:
        X = self._unit(np.array(self.xs))
        z, _, _ = self._standardized()
        cf = self._factor(X, ell)
        alpha = cho_solve(cf, z)
        logdet = 2.0 * np.log(np.diag(cf[0])).sum()
        return float(-0.5 * z @ alpha - 0.5 * logdet - 0.5 * len(z) * np.log(2 * np.pi))

    def _observed(self):
        if self.refit_every and len(self.ys) % self.refit_every == 0:
            self.lengthscale = max(self.lengthscales, key=self.log_marginal_likelihood)
        self._fit = None

    def _posterior_std(self):
        if self._fit is None:
            X = self._unit(np.array(self.xs))
            z, mu, sd = self._standardized()
            cf = self._factor(X, self.lengthscale)
            self._fit = (X, z, mu, sd, cf, cho_solve(cf, z))
        return self._fit

    def predict_standardized(self, pts):
        X, z, mu, sd, cf, alpha = self._posterior_std()
        Ks = kernels.se_cross(self._unit(pts), X, self.lengthscale)
        mean = Ks @ alpha
        v = cho_solve(cf, Ks.T)
        var = np.maximum(1.0 - np.einsum("ij,ji->i", Ks, v), 0.0)
        return mean, np.sqrt(var)

    def predict(self, pts):
        """Posterior mean and standard deviation in the original output units."""
        if not self.ys:
            n = np.atleast_2d(pts).shape[0]
            return np.zeros(n), np.ones(n)
        mean, std = self.predict_standardized(pts)
        _, _, mu, sd, _, _ = self._fit
        return mean * sd + mu, std * sd

    def ask(self) -> np.ndarray:
        if not self.ys:
            return self._uniform(1)[0]
        cand = self._uniform(self.n_candidates)
        mean, std = self.predict_standardized(cand)
        z = self._fit[1]
        ei = kernels.expected_improvement(mean, std, float(z.max()))
        return cand[int(np.argmax(ei))]


def make_optimizer(kind: str, lo, hi, seed=None, **kw) -> AskTellOptimizer:
    if kind == "gp":
        return GaussianProcessSurrogate(lo, hi, seed, **kw)
    if kind == "random":
        return RandomSearch(lo, hi, seed)
    raise ValueError(f"unknown optimizer {kind!r}")
