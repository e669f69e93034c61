"""Stability quantification: bound constants, order/threshold selection and
Monte-Carlo stability scores under the gradient GP model.

A point is considered stable when input perturbations of Euclidean size at
most B change the output by at most A.  That property is approximated by
bounding the scaled gradient norms (B^q/q!) ||grad^q f||_2 up to an order p
chosen so that the Taylor remainder stays below A; the posterior probability
of those bounds holding is the stability score.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._validation import as_point, as_points_2d, require_positive
from .mathcore import DomainError, lambert_w0
from .kernels import (
    KernelConstants,
    KernelSpec,
    kappa,
    kernel_constants,
    validate_kernel,
)
from .gp import Posterior, grad_mean_var_1d, grad_posterior, sample_grad

__all__ = [
    "StabilityParams",
    "BoundReport",
    "PerturbationTooLargeError",
    "bound_F",
    "bound_D",
    "remainder_bound",
    "min_order",
    "select_params",
    "stability_score_q",
    "stability_score",
    "scores_at",
    "ab_stability_oracle",
]

DEFAULT_N_SAMPLES = 2000


class PerturbationTooLargeError(DomainError):
    """B is not admissible for the kernel's effective length-scale."""


@dataclass(frozen=True)
class StabilityParams:
    """Resolved stability configuration for a campaign.

    ``eps`` holds one threshold per gradient order 1..resolved_p.  ``g_bound``
    is the assumed RKHS-norm bound on the objective and ``m_diameter`` the
    domain diameter; both feed the remainder constants.
    """

    a: float
    b: float
    policy_gamma: float
    p_max: int
    resolved_p: int
    eps: tuple[float, ...]
    g_bound: float
    m_diameter: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.policy_gamma <= 1.0:
            raise DomainError(f"policy_gamma must be in [0,1], got {self.policy_gamma}")
        if self.resolved_p > self.p_max:
            raise DomainError("resolved_p cannot exceed p_max")
        if len(self.eps) != self.resolved_p:
            raise DomainError("need one threshold per order 1..resolved_p")
        if any(e <= 0.0 for e in self.eps):
            raise DomainError(f"all thresholds must be > 0, got {self.eps}")

    def to_json(self) -> dict:
        return {
            "A": self.a,
            "B": self.b,
            "policy_gamma": self.policy_gamma,
            "p_max": self.p_max,
            "resolved_p": self.resolved_p,
            "eps": list(self.eps),
            "G": self.g_bound,
            "M": self.m_diameter,
        }

    @staticmethod
    def from_json(obj: dict) -> "StabilityParams":
        return StabilityParams(
            a=float(obj["A"]),
            b=float(obj["B"]),
            policy_gamma=float(obj["policy_gamma"]),
            p_max=int(obj["p_max"]),
            resolved_p=int(obj["resolved_p"]),
            eps=tuple(float(e) for e in obj["eps"]),
            g_bound=float(obj["G"]),
            m_diameter=float(obj["M"]),
        )


@dataclass(frozen=True)
class BoundReport:
    """Audit trail of the constants behind a parameter selection."""

    f_bound: float
    d_bound: float
    u_of_q: dict[int, float]
    p_min: int
    p_rec: int
    eps_minus: dict[int, float]
    eps_plus: dict[int, float]

    def to_json(self) -> dict:
        return {
            "F": self.f_bound,
            "D": self.d_bound,
            "U": {str(q): u for q, u in self.u_of_q.items()},
            "p_min": self.p_min,
            "p_rec": self.p_rec,
            "eps_minus": {str(q): e for q, e in self.eps_minus.items()},
            "eps_plus": {str(q): e for q, e in self.eps_plus.items()},
        }


def bound_F(kernel: KernelSpec, n: int, m_diameter: float, g_bound: float) -> float:
    """Sup-norm bound on the objective from its RKHS norm.

    kappa(0) * sqrt(pi^(n/2)/Gamma(n/2+1) * (M/2)^n) * G, the RKHS-norm bound
    scaled by the root volume of the largest ball of diameter M.
    """
    require_positive("n", n)
    require_positive("G", g_bound)
    if m_diameter < 0.0:
        raise DomainError(f"M must be >= 0, got {m_diameter}")
    vol = math.pi ** (0.5 * n) / math.gamma(0.5 * n + 1.0) * (0.5 * m_diameter) ** n
    return kappa(kernel, 0.0) * math.sqrt(vol) * g_bound


def _h_tilde(q: int, t: float) -> float:
    total = 0.0
    for i in range(q // 2 // 2 + 1):
        total += (
            math.sqrt(math.factorial(q))
            / (2 ** (2 * i) * math.factorial(2 * i) * math.factorial(q - 4 * i))
            * t ** (q - 4 * i)
        )
    return total


def bound_D(
    kernel: KernelSpec, m_diameter: float, constants: KernelConstants | None = None
) -> float:
    """Remainder prefactor D = D_up + D_cross.

    D_up = 0.816 * pi^(1/4) * exp(L_up * M^2 / 2).  D_cross accumulates the
    mixed-ratio correction over orders 0..s and vanishes when the ratio
    bounds coincide (RBF).
    """
    verdict = validate_kernel(kernel)
    if not verdict.accepted:
        raise DomainError(verdict.reason)
    if constants is None:
        constants = kernel_constants(kernel, max(m_diameter, 1e-300))
    l_up, l_down = constants.l_up, constants.l_down
    d_up = 0.816 * math.pi**0.25 * math.exp(0.5 * l_up * m_diameter * m_diameter)
    if l_up == l_down:
        return d_up
    s = int(kernel.smoothness)
    t = math.sqrt(l_up - l_down) * m_diameter
    d_cross = (l_up - l_down) / l_up * sum(_h_tilde(q, t) for q in range(s + 1))
    return d_up + d_cross


def _check_b_admissible(b: float, l_up: float) -> float:
    limit = 1.0 / math.sqrt(2.0 * l_up)
    if not b < limit:
        raise PerturbationTooLargeError(
            f"input variation B={b} exceeds the effective length-scale limit "
            f"1/sqrt(2*L_up)={limit:.6g}; shrink B or use a longer kernel length-scale"
        )
    return math.sqrt(2.0 * l_up) * b


def remainder_bound(
    kernel: KernelSpec,
    n: int,
    m_diameter: float,
    g_bound: float,
    b: float,
    q: int,
    constants: KernelConstants | None = None,
) -> float:
    """Upper bound U_q(B) on the Taylor remainder of the objective at order q.

    Combines the geometric tail of the derivative bounds with the intrinsic
    remainder floor Delta(B^2/2) * F of finite-smoothness kernels.
    """
    if q < 0:
        raise DomainError(f"q must be >= 0, got {q}")
    if b < 0.0:
        raise DomainError(f"B must be >= 0, got {b}")
    if b == 0.0:
        return 0.0
    if constants is None:
        constants = kernel_constants(kernel, m_diameter)
    t = _check_b_admissible(b, constants.l_up)
    f_bound = bound_F(kernel, n, m_diameter, g_bound)
    d_bound = bound_D(kernel, m_diameter, constants)
    s = kernel.smoothness
    if math.isinf(s):
        geo = t ** (q + 1) / (1.0 - t)
    elif q < s:
        geo = (t ** (q + 1) - t ** (int(s) + 1)) / (1.0 - t)
    else:
        geo = 0.0
    tail = d_bound / math.sqrt(math.factorial(q + 1)) * geo
    floor = constants.delta_of(0.5 * b * b)
    return (tail + floor) * f_bound


def min_order(
    kernel: KernelSpec,
    n: int,
    m_diameter: float,
    g_bound: float,
    a: float,
    b: float,
    constants: KernelConstants | None = None,
) -> int:
    """Smallest expansion order whose remainder bound is at most A.

    Closed form through the principal Lambert W branch; capped at the kernel
    smoothness for finite-smoothness families, where the empty geometric tail
    leaves only the intrinsic floor.
    """
    require_positive("A", a)
    if constants is None:
        constants = kernel_constants(kernel, m_diameter)
    t = _check_b_admissible(b, constants.l_up)
    f_bound = bound_F(kernel, n, m_diameter, g_bound)
    d_bound = bound_D(kernel, m_diameter, constants)
    s = kernel.smoothness
    floor = constants.delta_of(0.5 * b * b) * f_bound
    if floor >= a:
        raise DomainError(
            f"intrinsic remainder floor {floor:.4g} is not below A={a}; "
            "no expansion order can reach the requested tolerance"
        )
    log_arg = d_bound * f_bound / (a - floor) / (1.0 - t) / math.sqrt(math.sqrt(2.0 * math.pi))
    if log_arg <= 1.0:
        p = 1
    else:
        w = lambert_w0(2.0 / (math.e * t * t) * math.log(log_arg))
        p = max(1, math.ceil(t * t * math.exp(1.0 + w) - 1.0))
    if math.isfinite(s):
        if int(s) < 1:
            raise DomainError(
                f"{kernel.family} admits no gradient orders (smoothness {int(s)}); "
                "stability scoring needs a kernel that is at least once differentiable"
            )
        p = min(p, int(s))
    return p


def select_params(
    a: float,
    b: float,
    policy_gamma: float,
    p_max: int,
    kernel: KernelSpec,
    n: int,
    m_diameter: float,
    g_bound: float,
    constants: KernelConstants | None = None,
    eps_override: float | list[float] | tuple[float, ...] | None = None,
) -> tuple[StabilityParams, BoundReport]:
    """Resolve the expansion order and per-order thresholds from (A, B).

    The order resolves to min(p_max, max(p_min, p_rec)) with p_rec = p_min
    (the two selection formulas coincide).  Per order q the threshold blends
    eps_q = gamma * (A - U_q(B)) + (1 - gamma) * (A + U_q(B)); a non-positive
    blend is an error.  An explicit ``eps_override`` (scalar, broadcast, or
    one value per order) replaces the blend, for campaigns where the
    threshold is pinned externally.
    """
    require_positive("A", a)
    require_positive("B", b)
    require_positive("p_max", p_max)
    if constants is None:
        constants = kernel_constants(kernel, m_diameter)
    p_min = min_order(kernel, n, m_diameter, g_bound, a, b, constants)
    p_rec = p_min
    resolved_p = min(int(p_max), max(p_min, p_rec))
    f_bound = bound_F(kernel, n, m_diameter, g_bound)
    d_bound = bound_D(kernel, m_diameter, constants)
    u_of_q: dict[int, float] = {}
    eps_minus: dict[int, float] = {}
    eps_plus: dict[int, float] = {}
    for q in range(1, max(int(p_max), resolved_p) + 1):
        if q > kernel.smoothness:
            break
        u = remainder_bound(kernel, n, m_diameter, g_bound, b, q, constants)
        u_of_q[q] = u
        eps_minus[q] = a - u
        eps_plus[q] = a + u
    report = BoundReport(
        f_bound=f_bound,
        d_bound=d_bound,
        u_of_q=u_of_q,
        p_min=p_min,
        p_rec=p_rec,
        eps_minus=eps_minus,
        eps_plus=eps_plus,
    )
    if eps_override is not None:
        if isinstance(eps_override, (int, float)):
            eps = tuple(float(eps_override) for _ in range(resolved_p))
        else:
            eps = tuple(float(e) for e in eps_override)
            if len(eps) != resolved_p:
                raise DomainError(
                    f"eps_override needs {resolved_p} values, got {len(eps)}"
                )
    else:
        eps = tuple(
            policy_gamma * eps_minus[q] + (1.0 - policy_gamma) * eps_plus[q]
            for q in range(1, resolved_p + 1)
        )
    if any(e <= 0.0 for e in eps):
        raise DomainError(
            f"threshold blend produced non-positive values {eps}; "
            "lower policy_gamma or relax (A, B)"
        )
    cap = a + u_of_q[1]
    if any(e > cap * (1.0 + 1e-12) for e in eps):
        raise DomainError("thresholds cannot exceed A + U_1(B)")
    params = StabilityParams(
        a=a,
        b=b,
        policy_gamma=policy_gamma,
        p_max=int(p_max),
        resolved_p=resolved_p,
        eps=eps,
        g_bound=g_bound,
        m_diameter=m_diameter,
    )
    return params, report


# ---------------------------------------------------------------------------
# Monte-Carlo stability scores
# ---------------------------------------------------------------------------

def stability_score_q(
    post: Posterior,
    x,
    q: int,
    eps_q: float,
    b: float,
    n_samples: int = DEFAULT_N_SAMPLES,
    rng: np.random.Generator | None = None,
) -> float:
    """Posterior probability that the scaled order-q gradient norm is small.

    Draws from the order-q gradient posterior scaled by B^q/q! and returns
    the fraction with Euclidean norm at most ``eps_q``.  Deterministic for a
    fixed generator state.
    """
    require_positive("eps_q", eps_q)
    rng = np.random.default_rng(0) if rng is None else rng
    gp_q = grad_posterior(post, x, q)
    scale = b**q / math.factorial(q)
    samples = scale * sample_grad(gp_q, n_samples, rng)
    norms = np.linalg.norm(samples, axis=1)
    return float(np.mean(norms <= eps_q))


def stability_score(
    post: Posterior,
    x,
    params: StabilityParams,
    n_samples: int = DEFAULT_N_SAMPLES,
    rng: np.random.Generator | None = None,
) -> float:
    """Product of the per-order scores for q = 1..resolved_p."""
    rng = np.random.default_rng(0) if rng is None else rng
    total = 1.0
    for q in range(1, params.resolved_p + 1):
        total *= stability_score_q(post, x, q, params.eps[q - 1], params.b, n_samples, rng)
        if total == 0.0:
            break
    return total


def scores_at(
    post: Posterior,
    xs,
    params: StabilityParams,
    n_samples: int = DEFAULT_N_SAMPLES,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Stability scores over a batch of points.

    For 1-D posteriors the gradient posteriors are scalar, so the batch is
    evaluated in vectorised form with one shared draw matrix per order
    (common random numbers): candidates with identical posterior moments
    receive exactly identical scores, which keeps argmax tie-breaking
    well-defined.  Higher dimensions fall back to per-point evaluation.
    """
    xs = as_points_2d(xs)
    rng = np.random.default_rng(0) if rng is None else rng
    if post.dim == 1:
        scores = np.ones(xs.shape[0])
        for q in range(1, params.resolved_p + 1):
            means, variances = grad_mean_var_1d(post, xs, q)
            scale = params.b**q / math.factorial(q)
            mm = scale * means
            ss = scale * np.sqrt(variances)
            z = rng.standard_normal(n_samples)
            hits = np.abs(mm[:, None] + ss[:, None] * z[None, :]) <= params.eps[q - 1]
            scores *= np.mean(hits, axis=1)
        return scores
    return np.array(
        [stability_score(post, x, params, n_samples, rng) for x in xs]
    )


def ab_stability_oracle(f, x, a: float, b: float, grid_count: int = 501) -> bool:
    """Brute-force check of the perturbation-stability property at ``x``.

    Evaluates the objective over a signed 1-D grid (or a low-discrepancy ball
    sample in higher dimensions) of perturbations with norm at most ``b`` and
    tests whether the worst output variation stays within ``a``.  Test-grade
    oracle: assumes ``f`` is cheap.
    """
    x = as_point(x)
    n = x.shape[0]
    fx = float(f(x[0] if n == 1 else x))
    if n == 1:
        deltas = np.linspace(-b, b, grid_count)[:, None]
    else:
        from scipy.stats import qmc

        eng = qmc.Sobol(d=n + 1, scramble=False, seed=0)
        raw = eng.random(grid_count)
        vec = raw[:, :n] * 2.0 - 1.0
        norms = np.linalg.norm(vec, axis=1)
        norms[norms == 0.0] = 1.0
        radii = b * raw[:, n] ** (1.0 / n)
        deltas = vec / norms[:, None] * radii[:, None]
    for delta in deltas:
        xp = x + delta
        fp = float(f(xp[0] if n == 1 else xp))
        if abs(fp - fx) > a:
            return False
    return True
