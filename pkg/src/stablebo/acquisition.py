"""Gain, stable gain and the four acquisition functions (EI, UCB and their
stability-weighted counterparts EISG and UCBSG).

All evaluations are pure functions of the posterior, the scored observation
set and the candidate point; batch variants over candidate grids are provided
for the optimiser's hot path and agree with the scalar forms exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import ndtr

from .mathcore import DomainError
from .gp import Dataset, Posterior, predict

__all__ = [
    "ScoredDataset",
    "AcqSpec",
    "srinivas_beta",
    "gain",
    "expected_stable_gain",
    "acq_ei",
    "acq_ucb",
    "acq_eisg",
    "acq_ucbsg",
    "ei_values",
    "ucb_values",
    "eisg_values",
]

ACQ_KINDS = ("ei", "ucb", "eisg", "ucbsg")
STABLE_KINDS = ("eisg", "ucbsg")


def srinivas_beta(delta: float = 0.1) -> Callable[[int], float]:
    """Standard GP-UCB exploration schedule beta_t = 2 log((t+1)^2 pi^2/(6 delta))."""

    def schedule(t: int) -> float:
        return 2.0 * math.log((t + 1) ** 2 * math.pi**2 / (6.0 * delta))

    return schedule


@dataclass(frozen=True)
class AcqSpec:
    """Acquisition kind plus its exploration schedule."""

    kind: str
    beta_schedule: Callable[[int], float] = field(compare=False, default_factory=srinivas_beta)

    def __post_init__(self) -> None:
        if self.kind not in ACQ_KINDS:
            raise DomainError(f"unknown acquisition kind {self.kind!r}; expected {ACQ_KINDS}")

    @property
    def needs_scores(self) -> bool:
        return self.kind in STABLE_KINDS

    @staticmethod
    def from_config(obj: dict) -> "AcqSpec":
        kind = str(obj.get("kind", "ucbsg")).lower()
        delta = float(obj.get("beta_delta", 0.1))
        return AcqSpec(kind=kind, beta_schedule=srinivas_beta(delta))


@dataclass(frozen=True)
class ScoredDataset:
    """Observations sorted ascending by target, with per-point stability scores.

    ``order`` maps sorted positions back to the original dataset indices so
    consumers can attribute scores.  Consumers treat ``lower`` as a sentinel
    value below the smallest (clamped) observation.
    """

    y_sorted: np.ndarray
    scores_sorted: np.ndarray
    lower: float
    order: np.ndarray

    def __post_init__(self) -> None:
        if self.y_sorted.shape != self.scores_sorted.shape:
            raise DomainError("scores length must match number of observations")
        if np.any(np.diff(self.y_sorted) < 0.0):
            raise DomainError("observations must be sorted ascending")
        if np.any((self.scores_sorted < 0.0) | (self.scores_sorted > 1.0)):
            raise DomainError("scores must lie in [0, 1]")

    def __len__(self) -> int:
        return self.y_sorted.shape[0]

    @staticmethod
    def build(targets: Sequence[float], scores: Sequence[float], lower: float = 0.0) -> "ScoredDataset":
        y = np.asarray(targets, dtype=float).ravel()
        s = np.asarray(scores, dtype=float).ravel()
        order = np.argsort(y, kind="stable")
        return ScoredDataset(
            y_sorted=y[order], scores_sorted=s[order], lower=float(lower), order=order
        )

    @staticmethod
    def from_dataset(dataset: Dataset, scores: Sequence[float], lower: float = 0.0) -> "ScoredDataset":
        return ScoredDataset.build(dataset.targets, scores, lower)


def _weights(scores_sorted: np.ndarray) -> np.ndarray:
    """Survivor weights w_i = prod_{j >= i} (1 - s_j), with w_n = 1.

    w_i is the probability that no observation from sorted position i upward
    is stable; computed by the backward recursion w_i = w_{i+1} (1 - s_i).
    """
    n = scores_sorted.shape[0]
    w = np.ones(n + 1)
    for i in range(n - 1, -1, -1):
        w[i] = w[i + 1] * (1.0 - scores_sorted[i])
    return w


def gain(sd: ScoredDataset) -> float:
    """Best observed improvement over the lower bound (0 if nothing exceeds it)."""
    if len(sd) == 0:
        return 0.0
    return max(sd.lower, float(sd.y_sorted[-1])) - sd.lower


def expected_stable_gain(sd: ScoredDataset) -> float:
    """Expected improvement over the lower bound from stable observations.

    sum_i (y_i - y_{i-1}) * (1 - prod_{j>=i} (1 - s_j)) over the sorted
    observations, with y values clamped at the lower bound so segments below
    it contribute nothing.
    """
    n = len(sd)
    if n == 0:
        return 0.0
    y = np.maximum(sd.y_sorted, sd.lower)
    w = _weights(sd.scores_sorted)
    prev = np.concatenate([[sd.lower], y[:-1]])
    return float(np.sum((y - prev) * (1.0 - w[:n])))


def acq_ei(post: Posterior, x, y_plus: float) -> float:
    """Expected improvement over ``y_plus`` at ``x``."""
    mean, var = predict(post, x)
    return float(ei_values(np.array([mean]), np.array([var]), y_plus)[0])


def ei_values(means: np.ndarray, variances: np.ndarray, y_plus: float) -> np.ndarray:
    sd = np.sqrt(np.maximum(variances, 0.0))
    out = np.maximum(means - y_plus, 0.0)
    pos = sd > 0.0
    if np.any(pos):
        z = (means[pos] - y_plus) / sd[pos]
        out[pos] = sd[pos] * (z * ndtr(z) + np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi))
    return out


def acq_ucb(post: Posterior, x, beta_t: float) -> float:
    """GP upper confidence bound mean + sqrt(beta_t * variance)."""
    if beta_t < 0.0:
        raise DomainError(f"beta_t must be >= 0, got {beta_t}")
    mean, var = predict(post, x)
    return float(mean + math.sqrt(beta_t * var))


def ucb_values(means: np.ndarray, variances: np.ndarray, beta_t: float) -> np.ndarray:
    if beta_t < 0.0:
        raise DomainError(f"beta_t must be >= 0, got {beta_t}")
    return means + np.sqrt(beta_t * np.maximum(variances, 0.0))


def acq_ucbsg(post: Posterior, x, beta_t: float, score_x: float) -> float:
    """Stability-weighted UCB: exactly score_x * acq_ucb."""
    if not 0.0 <= score_x <= 1.0:
        raise DomainError(f"score_x must be in [0,1], got {score_x}")
    return score_x * acq_ucb(post, x, beta_t)


def acq_eisg(post: Posterior, sd: ScoredDataset, x, score_x: float) -> float:
    """Expected improvement in stable gain at ``x``.

    Closed form over the sorted observations: per segment k the integral of
    the improvement decomposes into a survivor-weighted sum of previous
    increments plus a partial-expectation term; the candidate's own stability
    score multiplies the whole sum.
    """
    if not 0.0 <= score_x <= 1.0:
        raise DomainError(f"score_x must be in [0,1], got {score_x}")
    mean, var = predict(post, x)
    return float(
        eisg_values(np.array([mean]), np.array([var]), sd, np.array([score_x]))[0]
    )


def eisg_values(
    means: np.ndarray,
    variances: np.ndarray,
    sd: ScoredDataset,
    score_x: np.ndarray,
) -> np.ndarray:
    """Vectorised EISG over candidate means/variances.

    Zero-variance candidates receive the degenerate limit, which is the
    deterministic improvement in expected stable gain of adding the
    candidate's posterior-mean observation.
    """
    n = len(sd)
    y = np.maximum(sd.y_sorted, sd.lower)
    w = _weights(sd.scores_sorted)
    stds = np.sqrt(np.maximum(variances, 0.0))
    out = np.zeros_like(means)

    degenerate = stds <= 0.0
    if np.any(degenerate):
        for idx in np.flatnonzero(degenerate):
            out[idx] = score_x[idx] * _eisg_degenerate(float(means[idx]), y, w, sd.lower)
    live = ~degenerate
    if not np.any(live):
        return out

    m = means[live][:, None]
    s = stds[live][:, None]
    # z_i for i = -1..n: y_{-1} = lower, y_n = +inf
    y_ext = np.concatenate([[sd.lower], y, [np.inf]])
    z = (m - y_ext[None, :]) / s  # columns: i = -1, 0, ..., n
    with np.errstate(invalid="ignore"):
        cdf = ndtr(z)
        pdf = np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    cdf[:, -1] = 0.0  # z_n = -inf
    pdf[:, -1] = 0.0
    d_cdf = cdf[:, :-1] - cdf[:, 1:]  # Delta Phi_k, k = 0..n
    d_pdf = pdf[:, :-1] - pdf[:, 1:]
    prev = np.concatenate([[sd.lower], y[:-1]])
    dy_hat = (y - prev)[None, :] / s  # Delta yhat_i, i = 0..n-1
    inner = np.concatenate(
        [np.zeros((dy_hat.shape[0], 1)), np.cumsum(w[:n][None, :] * dy_hat, axis=1)],
        axis=1,
    )  # sum_{i<k} w_i Delta yhat_i for k = 0..n
    tail = w[None, :] * (z[:, :-1] * d_cdf + d_pdf)  # w_k (z_{k-1} DPhi_k + Dphi_k)
    terms = np.clip(d_cdf * inner + tail, 0.0, None)
    out[live] = score_x[live] * stds[live] * np.sum(terms, axis=1)
    return out


def _eisg_degenerate(mean: float, y: np.ndarray, w: np.ndarray, lower: float) -> float:
    """Zero-variance limit: improvement from inserting the mean as an observation.

    The candidate contributes a factor (1 - score) = 0 here (its score is
    applied by the caller), so every survivor weight at or below its slot
    vanishes in the augmented list.
    """
    n = y.shape[0]
    mean = max(mean, lower)
    prev = np.concatenate([[lower], y[:-1]])
    base = float(np.sum((y - prev) * (1.0 - w[:n])))
    k = int(np.searchsorted(y, mean, side="right"))
    y_new = np.insert(y, k, mean)
    prev_new = np.concatenate([[lower], y_new[:-1]])
    w_aug = np.ones(n + 2)
    w_aug[: k + 1] = 0.0
    w_aug[k + 1 : n + 1] = w[k:n]
    new = float(np.sum((y_new - prev_new) * (1.0 - w_aug[: n + 1])))
    return max(new - base, 0.0)
