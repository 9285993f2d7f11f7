"""Finite-sum test problems ``f(x) = mean_i f_i(x)`` with analytic gradients."""

from __future__ import annotations

import abc
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from .datasets import Dataset

# max |d^2/dz^2 (1 - tanh z)| = 4 / (3 sqrt 3), attained at tanh z = 1/sqrt 3
_TANH_CURV = 4.0 / (3.0 * np.sqrt(3.0))

NONCONVEX_WEIGHT = 10.0


def _spectral_norm_sq(X) -> float:
    if sp.issparse(X):
        if X.shape[0] * X.shape[1] <= 10**7:
            X = X.toarray()
        else:
            from scipy.sparse.linalg import svds
            return float(svds(X, k=1, return_singular_vectors=False)[0] ** 2)
    return float(np.linalg.norm(X, 2) ** 2)


def _row_norms_sq(X) -> np.ndarray:
    if sp.issparse(X):
        return np.asarray(X.multiply(X).sum(axis=1)).ravel()
    return np.einsum("ij,ij->i", X, X)


class FiniteSumProblem(abc.ABC):
    """Common interface. ``idx=None`` means every sample.

    Subclasses fill in ``lipschitz`` (bound on the full-gradient Lipschitz
    constant), ``lipschitz_sample`` (bound valid for any minibatch mean) and
    ``loss_lower_bound``.
    """

    n_samples: int
    dim: int
    lipschitz: float
    lipschitz_sample: float
    loss_lower_bound: float
    name: str = "problem"

    @abc.abstractmethod
    def sample_losses(self, x, idx=None) -> np.ndarray:
        ...

    @abc.abstractmethod
    def sample_grads(self, x, idx=None) -> np.ndarray:
        """Per-sample gradients as rows of an ``(m, dim)`` array."""

    def loss(self, x, idx=None) -> float:
        return float(np.mean(self.sample_losses(x, idx)))

    def grad(self, x, idx=None) -> np.ndarray:
        return self.sample_grads(x, idx).mean(axis=0)

    def val_metric(self, x) -> Optional[float]:
        return None

    def _rows(self, idx):
        return slice(None) if idx is None else np.asarray(idx, dtype=np.intp)


class _LinearModel(FiniteSumProblem):
    """Shared plumbing for losses of the form ``phi(b_i a_i^T x) + l2/2 ||x||^2``."""

    def __init__(self, dataset: Dataset, l2: float = 0.0, validation: Optional[Dataset] = None):
        labels = np.asarray(dataset.labels, dtype=float)
        if not np.all(np.isin(labels, (-1.0, 1.0))):
            raise ValueError("labels must be -1/+1; use Dataset.one_vs_rest for multi-class data")
        if l2 < 0:
            raise ValueError("l2 must be nonnegative")
        X = dataset.features
        self.X = X.tocsr() if sp.issparse(X) else np.asarray(X, dtype=float)
        self.b = labels
        self.l2 = float(l2)
        self.n_samples, self.dim = self.X.shape
        self.validation = validation
        self.dataset = dataset

    def _margins(self, x, idx):
        rows = self._rows(idx)
        X = self.X[rows]
        return X, self.b[rows] * (X @ x)

    def sample_grads(self, x, idx=None):
        X, z = self._margins(x, idx)
        coef = self.b[self._rows(idx)] * self._dphi(z)
        G = X.multiply(coef[:, None]).toarray() if sp.issparse(X) else X * coef[:, None]
        return G + self.l2 * x

    def grad(self, x, idx=None):
        X, z = self._margins(x, idx)
        coef = self.b[self._rows(idx)] * self._dphi(z)
        return np.asarray(X.T @ coef).ravel() / len(z) + self.l2 * x

    def sample_losses(self, x, idx=None):
        _, z = self._margins(x, idx)
        return self._phi(z) + 0.5 * self.l2 * float(x @ x)

    def val_metric(self, x):
        if self.validation is None:
            return None
        pred = np.where(np.asarray(self.validation.features @ x).ravel() >= 0, 1.0, -1.0)
        return float(np.mean(pred == self.validation.labels))


class LogisticRegression(_LinearModel):
    name = "logistic"

    def __init__(self, dataset, l2=0.0, validation=None):
        super().__init__(dataset, l2, validation)
        self.lipschitz = _spectral_norm_sq(self.X) / (4.0 * self.n_samples) + self.l2
        self.lipschitz_sample = float(_row_norms_sq(self.X).max()) / 4.0 + self.l2
        self.loss_lower_bound = 0.0

    @staticmethod
    def _phi(z):
        return np.logaddexp(0.0, -z)

    @staticmethod
    def _dphi(z):
        return -expit(-z)


class SigmoidSVM(_LinearModel):
    """Nonconvex sigmoid loss ``1 - tanh(b a^T x)``."""

    name = "sigmoid-svm"

    def __init__(self, dataset, l2=0.0, validation=None):
        super().__init__(dataset, l2, validation)
        self.lipschitz = _TANH_CURV * _spectral_norm_sq(self.X) / self.n_samples + self.l2
        self.lipschitz_sample = _TANH_CURV * float(_row_norms_sq(self.X).max()) + self.l2
        self.loss_lower_bound = 0.0

    @staticmethod
    def _phi(z):
        return 1.0 - np.tanh(z)

    @staticmethod
    def _dphi(z):
        t = np.tanh(z)
        return -(1.0 - t * t)


def logistic_regression(dataset: Dataset, l2: float = 0.0, validation=None) -> LogisticRegression:
    return LogisticRegression(dataset, l2, validation)


def sigmoid_svm(dataset: Dataset, l2: float = 0.0, validation=None) -> SigmoidSVM:
    return SigmoidSVM(dataset, l2, validation)


class Quadratic(FiniteSumProblem):
    """``f_i(x) = 1/2 (x - c_i)^T A (x - c_i)`` for a symmetric PSD ``A``."""

    name = "quadratic"

    def __init__(self, A, centers):
        self.A = np.asarray(A, dtype=float)
        self.centers = np.atleast_2d(np.asarray(centers, dtype=float))
        self.n_samples, self.dim = self.centers.shape
        eig = np.linalg.eigvalsh(self.A)
        self.lipschitz = self.lipschitz_sample = float(np.max(np.abs(eig)))
        self.loss_lower_bound = 0.0

    def sample_losses(self, x, idx=None):
        D = x - self.centers[self._rows(idx)]
        return 0.5 * np.einsum("ij,jk,ik->i", D, self.A, D)

    def sample_grads(self, x, idx=None):
        return (x - self.centers[self._rows(idx)]) @ self.A


class SyntheticIllConditioned(FiniteSumProblem):
    """Rotated quadratic with spectrum in ``[1, cond]`` plus sine ripples.

    ``f_i(x) = 1/2 (x - c_i)^T A (x - c_i) + mix * w * sin(a_i^T x + phi_i)``

    ``A = Q diag(spectrum) Q^T``. A few stiff directions (``max(1, n // 10)``)
    have curvature ``cond``; the remaining bulk is flat, geometrically spaced
    in ``[1, min(cond, 10)]``. The ripple directions ``a_i`` live in the flat
    eigenspace, so each sample's loss is nonconvex there (small minibatch
    losses too once ``mix`` is large) while the stiff directions keep
    curvature ``cond``. With independent phases the ripples largely average
    out of the full mean, so the full objective can stay convex; the
    nonconvexity is what the stochastic curvature pairs see. The Hessian is block-diagonal in the ``Q``
    basis, which gives ``L = max(cond, flat_max + mix * w * ||mean a a^T||)``.
    """

    name = "synthetic"

    def __init__(self, n: int, cond: float = 1e4, nonconvex_mix: float = 0.0,
                 seed: int = 0, n_samples: int = 100, center_noise: float = 0.01):
        if n < 2:
            raise ValueError("n must be >= 2")
        if cond < 1:
            raise ValueError("cond must be >= 1")
        if not 0.0 <= nonconvex_mix <= 1.0:
            raise ValueError("nonconvex_mix must lie in [0, 1]")
        rng = np.random.Generator(np.random.Philox(seed))
        self.n_samples, self.dim = int(n_samples), int(n)
        self.cond = float(cond)
        self.mix = float(nonconvex_mix)
        n_stiff = max(1, n // 10)
        n_flat = n - n_stiff
        spectrum = np.concatenate([np.geomspace(1.0, min(self.cond, 10.0), n_flat),
                                   np.full(n_stiff, self.cond)])
        Q, R = np.linalg.qr(rng.standard_normal((n, n)))
        Q = Q * np.sign(np.diag(R))
        self.spectrum = spectrum
        self.Q = Q
        self.A = (Q * spectrum) @ Q.T
        self.A = 0.5 * (self.A + self.A.T)
        base = rng.standard_normal(n)
        self.centers = base + center_noise * rng.standard_normal((self.n_samples, n))
        Z = rng.standard_normal((self.n_samples, n_flat))
        Z /= np.linalg.norm(Z, axis=1, keepdims=True)
        Z *= rng.uniform(0.5, 1.5, size=(self.n_samples, 1))
        self.ripple_dirs = Z @ Q[:, :n_flat].T
        self.ripple_phase = rng.uniform(0.0, 2.0 * np.pi, self.n_samples)
        self.ripple_weight = self.mix * NONCONVEX_WEIGHT

        flat_max = float(spectrum[n_flat - 1])
        W = self.ripple_dirs
        mean_outer = float(np.linalg.norm(W.T @ W / self.n_samples, 2))
        max_row = float(np.max(np.einsum("ij,ij->i", W, W)))
        self.lipschitz = max(self.cond, flat_max + self.ripple_weight * mean_outer)
        self.lipschitz_sample = max(self.cond, flat_max + self.ripple_weight * max_row)
        self.loss_lower_bound = -self.ripple_weight

    def minimizer(self) -> np.ndarray:
        """Closed form, valid only without ripples."""
        if self.mix != 0.0:
            raise ValueError("no closed-form minimizer with nonconvex terms")
        return self.centers.mean(axis=0)

    def sample_losses(self, x, idx=None):
        rows = self._rows(idx)
        D = x - self.centers[rows]
        quad = 0.5 * np.einsum("ij,ij->i", D @ self.A, D)
        return quad + self.ripple_weight * np.sin(self.ripple_dirs[rows] @ x + self.ripple_phase[rows])

    def sample_grads(self, x, idx=None):
        rows = self._rows(idx)
        D = x - self.centers[rows]
        W = self.ripple_dirs[rows]
        ripple = (self.ripple_weight * np.cos(W @ x + self.ripple_phase[rows]))[:, None] * W
        return D @ self.A + ripple


def synthetic_illconditioned(n: int, cond: float = 1e4, nonconvex_mix: float = 0.0,
                             seed: int = 0, n_samples: int = 100) -> SyntheticIllConditioned:
    return SyntheticIllConditioned(n, cond, nonconvex_mix, seed, n_samples)
