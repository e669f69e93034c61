"""Gaussian-process posterior over a function and its Kronecker gradients.

The posterior state is immutable after fitting: two threads predicting
concurrently see bitwise-identical results.  Gradient posteriors of order q
live on the length n^q Kronecker vectorisation of the order-q derivative
tensor; their covariance is repaired to positive semi-definite before any
sampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from sklearn.base import BaseEstimator

from ._validation import as_point, as_points_2d, as_targets_1d
from .mathcore import DomainError, hermite_term_count
from .kernels import (
    KernelSpec,
    kappa,
    kappa_deriv,
    kappa_deriv_vec,
    kappa_vec,
    kron_deriv,
    validate_kernel,
)

__all__ = [
    "Dataset",
    "Posterior",
    "GradPosterior",
    "GradientGP",
    "FitError",
    "fit",
    "predict",
    "predict_batch",
    "grad_posterior",
    "grad_mean_var_1d",
    "sample_grad",
]

_JITTER_START_FACTOR = 1e-10
_JITTER_CAP_FACTOR = 1e-4


class FitError(RuntimeError):
    """Gram matrix could not be factorised even at the maximum jitter."""


@dataclass(frozen=True)
class Dataset:
    """Ordered observations (x_i, y_i) with a shared noise variance."""

    points: np.ndarray
    targets: np.ndarray
    noise_var: float = 0.0

    def __post_init__(self) -> None:
        pts = as_points_2d(self.points)
        tgt = as_targets_1d(self.targets, pts.shape[0])
        if self.noise_var < 0.0:
            raise DomainError(f"noise_var must be >= 0, got {self.noise_var}")
        pts.setflags(write=False)
        tgt.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "targets", tgt)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def append(self, x, y: float) -> "Dataset":
        x = as_point(x, self.dim if len(self) else None)
        pts = np.vstack([self.points, x[None, :]]) if len(self) else x[None, :]
        tgt = np.append(self.targets, float(y))
        return Dataset(points=pts, targets=tgt, noise_var=self.noise_var)

    def to_json(self) -> dict:
        return {
            "x": self.points.tolist(),
            "y": self.targets.tolist(),
            "noise_var": self.noise_var,
        }

    @staticmethod
    def from_json(obj: dict) -> "Dataset":
        return Dataset(
            points=np.asarray(obj["x"], dtype=float),
            targets=np.asarray(obj["y"], dtype=float),
            noise_var=float(obj.get("noise_var", 0.0)),
        )

    @staticmethod
    def empty(dim: int, noise_var: float = 0.0) -> "Dataset":
        return Dataset(
            points=np.zeros((0, dim)), targets=np.zeros(0), noise_var=noise_var
        )


@dataclass(frozen=True)
class Posterior:
    """Fitted GP state: Cholesky factor of the regularised Gram and weights."""

    dataset: Dataset
    kernel: KernelSpec
    chol: np.ndarray
    weights: np.ndarray
    jitter: float

    @property
    def dim(self) -> int:
        return self.dataset.dim

    @staticmethod
    def prior(kernel: KernelSpec, dim: int, noise_var: float = 0.0) -> "Posterior":
        """Data-free posterior (the prior), useful before any observation."""
        return Posterior(
            dataset=Dataset.empty(dim, noise_var),
            kernel=kernel,
            chol=np.zeros((0, 0)),
            weights=np.zeros(0),
            jitter=0.0,
        )


@dataclass(frozen=True)
class GradPosterior:
    """Gaussian posterior of the order-q Kronecker gradient at one point."""

    order: int
    dim: int
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self) -> None:
        size = self.dim**self.order
        if self.mean.shape != (size,) or self.cov.shape != (size, size):
            raise DomainError("gradient posterior shapes inconsistent with order/dim")


def _cross_r(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix of radial arguments 0.5 ||a_i - b_j||^2."""
    diff = a[:, None, :] - b[None, :, :]
    return 0.5 * np.einsum("ijk,ijk->ij", diff, diff)


def fit(dataset: Dataset, kernel: KernelSpec) -> Posterior:
    """Factorise the regularised Gram matrix and precompute weights.

    Jitter starts at 1e-10 * kappa(0) * |D| and escalates tenfold up to
    1e-4 * kappa(0); beyond that the Gram matrix is declared singular.
    """
    verdict = validate_kernel(kernel)
    if not verdict.accepted:
        raise DomainError(verdict.reason)
    m = len(dataset)
    if m == 0:
        return Posterior.prior(kernel, dataset.dim, dataset.noise_var)
    k0 = kappa(kernel, 0.0)
    gram = kappa_vec(kernel, _cross_r(dataset.points, dataset.points))
    gram = gram + dataset.noise_var * np.eye(m)
    jitter = _JITTER_START_FACTOR * k0 * m
    cap = _JITTER_CAP_FACTOR * k0
    while True:
        try:
            chol = np.linalg.cholesky(gram + jitter * np.eye(m))
            break
        except np.linalg.LinAlgError:
            jitter *= 10.0
            if jitter > cap:
                raise FitError(
                    "Gram matrix is singular even at the maximum jitter; "
                    "check for duplicated points with zero noise"
                ) from None
    weights = cho_solve((chol, True), dataset.targets)
    chol.setflags(write=False)
    weights.setflags(write=False)
    return Posterior(
        dataset=dataset, kernel=kernel, chol=chol, weights=weights, jitter=jitter
    )


def predict(post: Posterior, x) -> tuple[float, float]:
    """Posterior mean and variance of f at a single point."""
    means, variances = predict_batch(post, as_point(x, post.dim)[None, :])
    return float(means[0]), float(variances[0])


def predict_batch(post: Posterior, xs) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and variance of f at each row of ``xs``."""
    xs = as_points_2d(xs)
    if xs.shape[1] != post.dim:
        raise DomainError(f"points have dimension {xs.shape[1]}, expected {post.dim}")
    k0 = kappa(post.kernel, 0.0)
    if len(post.dataset) == 0:
        return np.zeros(xs.shape[0]), np.full(xs.shape[0], k0)
    ks = kappa_vec(post.kernel, _cross_r(xs, post.dataset.points))
    means = ks @ post.weights
    v = solve_triangular(post.chol, ks.T, lower=True)
    variances = np.maximum(k0 - np.einsum("ij,ij->j", v, v), 0.0)
    return means, variances


def _repair_psd(cov: np.ndarray) -> np.ndarray:
    sym = 0.5 * (cov + cov.T)
    vals, vecs = np.linalg.eigh(sym)
    vals = np.clip(vals, 0.0, None)
    return (vecs * vals) @ vecs.T


def grad_posterior(post: Posterior, x, q: int) -> GradPosterior:
    """Posterior of the order-q Kronecker gradient of f at ``x``.

    The mean applies the order-q derivative of the cross-covariance vector to
    the precomputed weights; the covariance subtracts the data correction
    from the mixed prior block at (x, x) and repairs it to PSD.
    """
    if q < 1:
        raise DomainError(f"gradient order must be >= 1, got {q}")
    x = as_point(x, post.dim)
    n = post.dim
    size = n**q
    prior_block = kron_deriv(post.kernel, x, x, 2 * q, alpha=q).values.reshape(size, size)
    m = len(post.dataset)
    if m == 0:
        cov = _repair_psd(prior_block)
        return GradPosterior(order=q, dim=n, mean=np.zeros(size), cov=cov)
    g = np.empty((size, m))
    for i in range(m):
        g[:, i] = kron_deriv(post.kernel, x, post.dataset.points[i], q, alpha=0).values
    mean = g @ post.weights
    v = solve_triangular(post.chol, g.T, lower=True)
    cov = _repair_psd(prior_block - v.T @ v)
    return GradPosterior(order=q, dim=n, mean=mean, cov=cov)


def _grad_prior_var_1d(kernel: KernelSpec, q: int) -> float:
    # diagonal prior block for n = 1: (2q-1)!! |kappa^(q)(0)|
    dfac = 1.0
    for j in range(1, 2 * q, 2):
        dfac *= j
    return dfac * abs(kappa_deriv(kernel, 0.0, q))


def grad_mean_var_1d(post: Posterior, xs, q: int) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised order-q gradient posterior (mean, variance) for 1-D inputs.

    Same quantities :func:`grad_posterior` produces point by point, batched
    over a grid.  Only valid when the posterior dimension is 1, where every
    Kronecker tensor is scalar.
    """
    if post.dim != 1:
        raise DomainError("grad_mean_var_1d requires a 1-D posterior")
    if q < 1:
        raise DomainError(f"gradient order must be >= 1, got {q}")
    xs = as_points_2d(xs)
    prior = _grad_prior_var_1d(post.kernel, q)
    m = len(post.dataset)
    if m == 0:
        z = np.zeros(xs.shape[0])
        return z, np.full(xs.shape[0], prior)
    d = post.dataset.points[:, 0][None, :] - xs[:, 0][:, None]  # x_i - x, (n_query, m)
    r = 0.5 * d * d
    g = np.zeros_like(d)
    for i in range(q // 2 + 1):
        g += hermite_term_count(i, q) * d ** (q - 2 * i) * kappa_deriv_vec(
            post.kernel, r, q - i
        )
    if q % 2:
        g = -g  # each query-side gradient factor contributes -(x_i - x)
    means = g @ post.weights
    v = solve_triangular(post.chol, g.T, lower=True)
    variances = np.maximum(prior - np.einsum("ij,ij->j", v, v), 0.0)
    return means, variances


def sample_grad(gp: GradPosterior, count: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``count`` samples from the gradient posterior.

    Uses an eigen-factor of the (already PSD-repaired) covariance, which
    tolerates rank deficiency; a zero covariance reproduces the mean exactly.
    """
    if count < 1:
        raise DomainError(f"count must be >= 1, got {count}")
    vals, vecs = np.linalg.eigh(0.5 * (gp.cov + gp.cov.T))
    vals = np.clip(vals, 0.0, None)
    factor = vecs * np.sqrt(vals)
    z = rng.standard_normal((count, gp.mean.shape[0]))
    return gp.mean[None, :] + z @ factor.T


class GradientGP(BaseEstimator):
    """Scikit-learn style regressor exposing value and gradient posteriors.

    Parameters
    ----------
    kernel_family : str
        One of "rbf", "matern12", "matern32", "matern52".
    kernel_param : float
        Length parameter of the family.
    noise_var : float
        Observation noise variance added to the Gram diagonal.
    """

    def __init__(
        self,
        kernel_family: str = "rbf",
        kernel_param: float = 1.0,
        noise_var: float = 0.0,
    ) -> None:
        self.kernel_family = kernel_family
        self.kernel_param = kernel_param
        self.noise_var = noise_var

    def _spec(self) -> KernelSpec:
        return KernelSpec(family=self.kernel_family, length_param=self.kernel_param)

    def fit(self, X, y) -> "GradientGP":
        X = as_points_2d(X)
        y = as_targets_1d(y, X.shape[0])
        dataset = Dataset(points=X, targets=y, noise_var=self.noise_var)
        self.posterior_ = fit(dataset, self._spec())
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X, return_var: bool = False):
        means, variances = predict_batch(self.posterior_, X)
        return (means, variances) if return_var else means

    def grad_posterior(self, x, q: int) -> GradPosterior:
        return grad_posterior(self.posterior_, x, q)
