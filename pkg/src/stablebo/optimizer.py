"""Stability-aware Bayesian optimisation loop.

Exposed both as an autonomous :func:`run` over a callable objective and as an
ask-tell state machine (:class:`AskTellState` with :func:`suggest` /
:func:`tell` / :func:`recommend`) for human-driven campaigns.  All stochastic
behaviour derives from the configured seed: the state owns one generator for
acquisition-time scoring, while observation noise in :func:`run` and
recommendation scoring use independent streams derived from the seed, so
campaigns that differ only in score evaluations still observe identical data.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._validation import as_point, require_positive
from .mathcore import DomainError
from .kernels import KernelSpec, kernel_constants, validate_kernel
from .gp import Dataset, Posterior, fit, predict_batch
from .stability import BoundReport, StabilityParams, scores_at, select_params
from .acquisition import (
    AcqSpec,
    ScoredDataset,
    ei_values,
    eisg_values,
    srinivas_beta,
    ucb_values,
)

__all__ = [
    "OptConfig",
    "TraceRow",
    "AskTellState",
    "ProtocolError",
    "SCHEMA_VERSION",
    "plan",
    "new_state",
    "suggest",
    "tell",
    "recommend",
    "run",
    "trace_to_csv",
    "state_to_json",
    "state_from_json",
]

SCHEMA_VERSION = 1
TRACE_NOISE_TAG = 0xA001
RECOMMEND_TAG = 0xA002
INIT_TAG = 0xA003


class ProtocolError(RuntimeError):
    """Ask-tell alternation contract violated."""


@dataclass(frozen=True)
class OptConfig:
    """Full campaign configuration.

    ``bounds`` is an (n, 2) axis-aligned box; the domain diameter feeding the
    stability bounds is its Euclidean diagonal.  All fields except ``bounds``,
    ``a``, ``b`` and ``g_bound`` have defaults.
    """

    bounds: np.ndarray
    a: float
    b: float
    g_bound: float
    kernel: KernelSpec = field(default_factory=lambda: KernelSpec("rbf", 1.0))
    noise_var: float = 0.0
    policy_gamma: float = 0.0
    p_max: int = 3
    eps_override: float | tuple[float, ...] | None = None
    lower_bound: float = 0.0
    acq_kind: str = "ucbsg"
    beta_delta: float = 0.1
    budget: int = 30
    seed: int = 0
    grid_resolution: int = 1001
    multistart_count: int = 256
    refine_steps: int = 50
    init_points: int = 3
    n_samples: int = 2000
    r_a: int = 1000
    r_b: int = 100

    def __post_init__(self) -> None:
        bounds = np.asarray(self.bounds, dtype=float)
        if bounds.ndim != 2 or bounds.shape[1] != 2:
            raise DomainError(f"bounds must be an (n, 2) array, got {bounds.shape}")
        if np.any(bounds[:, 1] <= bounds[:, 0]):
            raise DomainError("bounds must be non-degenerate (hi > lo per axis)")
        bounds.setflags(write=False)
        object.__setattr__(self, "bounds", bounds)
        require_positive("A", self.a)
        require_positive("B", self.b)
        require_positive("G", self.g_bound)
        if self.budget < 1:
            raise DomainError(f"budget must be >= 1, got {self.budget}")

    @property
    def dim(self) -> int:
        return self.bounds.shape[0]

    @property
    def m_diameter(self) -> float:
        return float(np.linalg.norm(self.bounds[:, 1] - self.bounds[:, 0]))

    def acq_spec(self) -> AcqSpec:
        return AcqSpec(kind=self.acq_kind, beta_schedule=srinivas_beta(self.beta_delta))

    def to_json(self) -> dict:
        eps = self.eps_override
        if isinstance(eps, tuple):
            eps = list(eps)
        return {
            "bounds": self.bounds.tolist(),
            "kernel": self.kernel.to_json(),
            "noise_var": self.noise_var,
            "stability": {
                "A": self.a,
                "B": self.b,
                "policy_gamma": self.policy_gamma,
                "p_max": self.p_max,
                "G": self.g_bound,
                "eps_override": eps,
            },
            "acq": {
                "kind": self.acq_kind,
                "beta_delta": self.beta_delta,
                "lower_bound": self.lower_bound,
            },
            "budget": self.budget,
            "seed": self.seed,
            "acq_opt": {
                "grid_resolution": self.grid_resolution,
                "multistart_count": self.multistart_count,
                "refine_steps": self.refine_steps,
                "init_points": self.init_points,
            },
            "mc": {"n_samples": self.n_samples, "r_a": self.r_a, "r_b": self.r_b},
        }

    @staticmethod
    def from_json(obj: dict) -> "OptConfig":
        try:
            bounds = obj["bounds"]
            stab = obj["stability"]
            a, b, g = float(stab["A"]), float(stab["B"]), float(stab["G"])
        except KeyError as exc:
            raise DomainError(f"config missing required field: {exc}") from None
        kern = obj.get("kernel", {"family": "rbf", "param": 1.0})
        acq = obj.get("acq", {})
        acq_opt = obj.get("acq_opt", {})
        mc = obj.get("mc", {})
        eps = stab.get("eps_override")
        if isinstance(eps, list):
            eps = tuple(float(e) for e in eps)
        elif eps is not None:
            eps = float(eps)
        return OptConfig(
            bounds=np.asarray(bounds, dtype=float),
            a=a,
            b=b,
            g_bound=g,
            kernel=KernelSpec.from_json(kern),
            noise_var=float(obj.get("noise_var", 0.0)),
            policy_gamma=float(stab.get("policy_gamma", 0.0)),
            p_max=int(stab.get("p_max", 3)),
            eps_override=eps,
            lower_bound=float(acq.get("lower_bound", 0.0)),
            acq_kind=str(acq.get("kind", "ucbsg")).lower(),
            beta_delta=float(acq.get("beta_delta", 0.1)),
            budget=int(obj.get("budget", 30)),
            seed=int(obj.get("seed", 0)),
            grid_resolution=int(acq_opt.get("grid_resolution", 1001)),
            multistart_count=int(acq_opt.get("multistart_count", 256)),
            refine_steps=int(acq_opt.get("refine_steps", 50)),
            init_points=int(acq_opt.get("init_points", 3)),
            n_samples=int(mc.get("n_samples", 2000)),
            r_a=int(mc.get("r_a", 1000)),
            r_b=int(mc.get("r_b", 100)),
        )


@dataclass(frozen=True)
class TraceRow:
    iteration: int
    x: tuple[float, ...]
    y: float
    acq_value: float
    score: float
    rec_x: tuple[float, ...]
    stable_gain: float
    manual_override: bool

    def to_json(self) -> dict:
        return {
            "iteration": self.iteration,
            "x": list(self.x),
            "y": self.y,
            "acq_value": None if math.isnan(self.acq_value) else self.acq_value,
            "score": None if math.isnan(self.score) else self.score,
            "rec_x": list(self.rec_x),
            "stable_gain": self.stable_gain,
            "manual_override": self.manual_override,
        }

    @staticmethod
    def from_json(obj: dict) -> "TraceRow":
        return TraceRow(
            iteration=int(obj["iteration"]),
            x=tuple(float(v) for v in obj["x"]),
            y=float(obj["y"]),
            acq_value=math.nan if obj["acq_value"] is None else float(obj["acq_value"]),
            score=math.nan if obj["score"] is None else float(obj["score"]),
            rec_x=tuple(float(v) for v in obj["rec_x"]),
            stable_gain=float(obj["stable_gain"]),
            manual_override=bool(obj["manual_override"]),
        )


@dataclass
class AskTellState:
    """Mutable campaign state; one writer at a time."""

    config: OptConfig
    dataset: Dataset
    posterior: Posterior
    params: StabilityParams
    report: BoundReport
    rng: np.random.Generator
    pending: dict | None = None
    trace: list[TraceRow] = field(default_factory=list)


def plan(config: OptConfig) -> tuple[StabilityParams, BoundReport]:
    """Resolve stability parameters and constants for a configuration."""
    verdict = validate_kernel(config.kernel)
    if not verdict.accepted:
        raise DomainError(verdict.reason)
    constants = kernel_constants(
        config.kernel,
        config.m_diameter,
        n_samples=config.r_a,
        n_radii=config.r_b,
        seed=config.seed,
    )
    return select_params(
        a=config.a,
        b=config.b,
        policy_gamma=config.policy_gamma,
        p_max=config.p_max,
        kernel=config.kernel,
        n=config.dim,
        m_diameter=config.m_diameter,
        g_bound=config.g_bound,
        constants=constants,
        eps_override=config.eps_override,
    )


def new_state(config: OptConfig) -> AskTellState:
    params, report = plan(config)
    dataset = Dataset.empty(config.dim, config.noise_var)
    return AskTellState(
        config=config,
        dataset=dataset,
        posterior=Posterior.prior(config.kernel, config.dim, config.noise_var),
        params=params,
        report=report,
        rng=np.random.default_rng(config.seed),
    )


# ---------------------------------------------------------------------------
# Candidate generation
# ---------------------------------------------------------------------------

def _golden_alphas(dim: int) -> np.ndarray:
    # generalised golden-ratio strides: phi_d solves x^(d+1) = x + 1
    phi = 2.0
    for _ in range(64):
        phi = (1.0 + phi) ** (1.0 / (dim + 1))
    return np.array([(1.0 / phi) ** (k + 1) for k in range(dim)])


def _init_point(config: OptConfig, index: int) -> np.ndarray:
    offset = np.random.default_rng([config.seed, INIT_TAG]).random(config.dim)
    alphas = _golden_alphas(config.dim)
    unit = (offset + alphas * index) % 1.0
    lo, hi = config.bounds[:, 0], config.bounds[:, 1]
    return lo + unit * (hi - lo)


def _candidate_grid(config: OptConfig) -> np.ndarray:
    lo, hi = config.bounds[:, 0], config.bounds[:, 1]
    res = config.grid_resolution
    if config.dim == 1:
        return np.linspace(lo[0], hi[0], res)[:, None]
    axes = [np.linspace(lo[d], hi[d], res) for d in range(config.dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _multistart_candidates(config: OptConfig) -> np.ndarray:
    from scipy.stats import qmc

    eng = qmc.Sobol(d=config.dim, scramble=False, seed=0)
    unit = eng.random(config.multistart_count)
    lo, hi = config.bounds[:, 0], config.bounds[:, 1]
    return lo + unit * (hi - lo)


# ---------------------------------------------------------------------------
# Acquisition evaluation
# ---------------------------------------------------------------------------

def _dataset_scores(state: AskTellState, rng: np.random.Generator) -> np.ndarray:
    if len(state.dataset) == 0:
        return np.zeros(0)
    return scores_at(
        state.posterior,
        state.dataset.points,
        state.params,
        n_samples=state.config.n_samples,
        rng=rng,
    )


def _acq_values(
    state: AskTellState, candidates: np.ndarray, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Acquisition values and stability scores at each candidate row."""
    config = state.config
    spec = config.acq_spec()
    means, variances = predict_batch(state.posterior, candidates)
    t = len(state.dataset)
    if spec.kind == "ei":
        y_plus = max(config.lower_bound, float(np.max(state.dataset.targets))) if t else config.lower_bound
        return ei_values(means, variances, y_plus), np.ones(len(candidates))
    if spec.kind == "ucb":
        return ucb_values(means, variances, spec.beta_schedule(t)), np.ones(len(candidates))
    if spec.kind == "ucbsg":
        scores = scores_at(state.posterior, candidates, state.params, config.n_samples, rng)
        return scores * ucb_values(means, variances, spec.beta_schedule(t)), scores
    # eisg: per-observation scores against the current posterior, then the
    # closed-form expected improvement in stable gain
    obs_scores = _dataset_scores(state, rng)
    sd = ScoredDataset.from_dataset(state.dataset, obs_scores, config.lower_bound)
    scores = scores_at(state.posterior, candidates, state.params, config.n_samples, rng)
    return eisg_values(means, variances, sd, scores), scores


def suggest(state: AskTellState) -> np.ndarray:
    """Select the next test point (argmax of the configured acquisition).

    The first ``init_points`` suggestions of an empty campaign come from a
    deterministic low-discrepancy sequence; afterwards candidates are a
    uniform grid (dim <= 2) or a quasi-random multistart with coordinate
    refinement (dim >= 3).  Ties break to the lowest candidate index.
    """
    if state.pending is not None:
        raise ProtocolError("a suggestion is already pending; tell() it first")
    config = state.config
    if len(state.dataset) < config.init_points:
        x = _init_point(config, len(state.dataset))
        state.pending = {"x": x, "acq": math.nan, "score": math.nan}
        return x
    if config.dim <= 2:
        candidates = _candidate_grid(config)
        values, scores = _acq_values(state, candidates, state.rng)
        best = int(np.argmax(values))
        x = candidates[best]
        state.pending = {"x": x, "acq": float(values[best]), "score": float(scores[best])}
        return x
    # multistart + coordinate refinement
    candidates = _multistart_candidates(config)
    values, scores = _acq_values(state, candidates, state.rng)
    best = int(np.argmax(values))
    x = candidates[best].copy()
    best_val = float(values[best])
    best_score = float(scores[best])
    lo, hi = config.bounds[:, 0], config.bounds[:, 1]
    radius = (hi - lo) / 4.0
    for step in range(config.refine_steps):
        d = step % config.dim
        trial = np.vstack([x, x, x, x])
        trial[0, d] = max(lo[d], x[d] - radius[d])
        trial[1, d] = max(lo[d], x[d] - 0.5 * radius[d])
        trial[2, d] = min(hi[d], x[d] + 0.5 * radius[d])
        trial[3, d] = min(hi[d], x[d] + radius[d])
        t_values, t_scores = _acq_values(state, trial, state.rng)
        k = int(np.argmax(t_values))
        if t_values[k] > best_val:
            best_val = float(t_values[k])
            best_score = float(t_scores[k])
            x = trial[k].copy()
        if (step + 1) % config.dim == 0:
            radius *= 0.8
    state.pending = {"x": x, "acq": best_val, "score": best_score}
    return x


def tell(state: AskTellState, x, y: float) -> AskTellState:
    """Record an observation, refit the posterior and append a trace row.

    Observations at points other than the pending suggestion (or with no
    pending suggestion at all) are accepted with a warning and flagged as
    manual overrides in the trace.
    """
    y = float(y)
    if not math.isfinite(y):
        raise DomainError(f"observed value must be finite, got {y}")
    x = as_point(x, state.config.dim)
    lo, hi = state.config.bounds[:, 0], state.config.bounds[:, 1]
    if np.any(x < lo) or np.any(x > hi):
        warnings.warn(f"observation at {x} lies outside the configured bounds")
    manual = True
    acq_value = math.nan
    score = math.nan
    if state.pending is not None:
        if np.allclose(x, state.pending["x"], rtol=0.0, atol=1e-12):
            manual = False
            acq_value = state.pending["acq"]
            score = state.pending["score"]
        else:
            warnings.warn(
                "observation does not match the pending suggestion; recording as manual override"
            )
    state.dataset = state.dataset.append(x, y)
    state.posterior = fit(state.dataset, state.config.kernel)
    state.pending = None
    rec_x, stable_gain, _ = recommend(state)
    state.trace.append(
        TraceRow(
            iteration=len(state.trace),
            x=tuple(float(v) for v in x),
            y=y,
            acq_value=acq_value,
            score=score,
            rec_x=tuple(float(v) for v in rec_x),
            stable_gain=stable_gain,
            manual_override=manual,
        )
    )
    return state


def recommend(state: AskTellState) -> tuple[np.ndarray, float, list[dict]]:
    """Best stable observed point under the final posterior.

    For the stability-aware acquisition kinds each observation's contribution
    is score * max(y - lower, 0) with scores computed against the current
    posterior (on an independent derived stream, so repeated calls are
    idempotent).  Plain EI/UCB campaigns recommend the best observed value.
    Ties break to the highest observed value, then the lowest index.  If no
    point has a positive stable contribution the best raw observation is
    returned with an empty-contribution table.
    """
    if len(state.dataset) == 0:
        raise DomainError("cannot recommend from an empty dataset")
    config = state.config
    y = state.dataset.targets
    if config.acq_spec().needs_scores:
        rng = np.random.default_rng([config.seed, RECOMMEND_TAG, len(state.dataset)])
        scores = scores_at(
            state.posterior, state.dataset.points, state.params, config.n_samples, rng
        )
    else:
        scores = np.ones(len(state.dataset))
    contributions = scores * np.maximum(y - config.lower_bound, 0.0)
    if np.all(contributions <= 0.0):
        best = int(np.argmax(y))
        stable_gain = 0.0
    else:
        order = sorted(
            range(len(y)), key=lambda i: (-contributions[i], -y[i], i)
        )
        best = order[0]
        stable_gain = float(contributions[best])
    per_point = [
        {
            "x": [float(v) for v in state.dataset.points[i]],
            "y": float(y[i]),
            "score": float(scores[i]),
            "contribution": float(contributions[i]),
        }
        for i in range(len(y))
    ]
    return state.dataset.points[best].copy(), stable_gain, per_point


def run(config: OptConfig, objective) -> AskTellState:
    """Autonomous loop: ``budget`` suggest/tell rounds over ``objective``.

    Observation noise N(0, noise_var) is added by this harness from a noise
    stream derived from the seed (tell itself never adds noise).  Fully
    reproducible given the configuration.
    """
    state = new_state(config)
    noise_rng = np.random.default_rng([config.seed, TRACE_NOISE_TAG])
    noise_sd = math.sqrt(config.noise_var)
    for _ in range(config.budget):
        x = suggest(state)
        y = float(objective(x))
        if noise_sd > 0.0:
            y += noise_sd * float(noise_rng.standard_normal())
        tell(state, x, y)
    return state


# ---------------------------------------------------------------------------
# Serialisation
# ---------------------------------------------------------------------------

def _fmt(v: float) -> str:
    return repr(float(v))


def trace_to_csv(state: AskTellState) -> str:
    """Render the trace as CSV; float fields use shortest-roundtrip repr."""
    dim = state.config.dim
    header = (
        ["iter"]
        + [f"x{d}" for d in range(dim)]
        + ["y", "acq", "score"]
        + [f"rec_x{d}" for d in range(dim)]
        + ["stable_gain", "manual_override"]
    )
    lines = [",".join(header)]
    for row in state.trace:
        fields = (
            [str(row.iteration)]
            + [_fmt(v) for v in row.x]
            + [_fmt(row.y), _fmt(row.acq_value), _fmt(row.score)]
            + [_fmt(v) for v in row.rec_x]
            + [_fmt(row.stable_gain), "1" if row.manual_override else "0"]
        )
        lines.append(",".join(fields))
    return "\n".join(lines) + "\n"


def state_to_json(state: AskTellState) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "config": state.config.to_json(),
        "dataset": state.dataset.to_json(),
        "pending": None
        if state.pending is None
        else {
            "x": [float(v) for v in state.pending["x"]],
            "acq": None if math.isnan(state.pending["acq"]) else state.pending["acq"],
            "score": None if math.isnan(state.pending["score"]) else state.pending["score"],
        },
        "trace": [row.to_json() for row in state.trace],
        "rng_state": state.rng.bit_generator.state,
    }


def state_from_json(obj: dict) -> AskTellState:
    version = obj.get("schema_version")
    if version != SCHEMA_VERSION:
        raise DomainError(f"unsupported session schema version {version}")
    config = OptConfig.from_json(obj["config"])
    params, report = plan(config)
    dataset = Dataset.from_json(obj["dataset"])
    posterior = (
        fit(dataset, config.kernel)
        if len(dataset)
        else Posterior.prior(config.kernel, config.dim, config.noise_var)
    )
    rng = np.random.default_rng(config.seed)
    rng.bit_generator.state = obj["rng_state"]
    pending = None
    if obj.get("pending") is not None:
        p = obj["pending"]
        pending = {
            "x": np.asarray(p["x"], dtype=float),
            "acq": math.nan if p["acq"] is None else float(p["acq"]),
            "score": math.nan if p["score"] is None else float(p["score"]),
        }
    return AskTellState(
        config=config,
        dataset=dataset,
        posterior=posterior,
        params=params,
        report=report,
        rng=rng,
        pending=pending,
        trace=[TraceRow.from_json(r) for r in obj.get("trace", [])],
    )
