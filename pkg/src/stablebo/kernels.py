"""Isotropic kernel families, their scalar and Kronecker-tensor derivatives,
length-scale constants and Taylor-remainder estimation.

Kernels are parameterised as K(x, x') = kappa(0.5 * ||x - x'||^2).  The
supported families are the RBF kernel and the half-integer Matern kernels
(nu in {1/2, 3/2, 5/2}); the rational quadratic kernel is recognised but
rejected by :func:`validate_kernel` because no geometric bound on
|kappa^(q)|/kappa exists for it.

Derivative tensors use a row-major Kronecker layout: the component at
multi-index (i_0, ..., i_{q-1}) sits at flat position sum_k i_k * n^(q-1-k),
which is exactly ``numpy``'s C-order ravel of the (n,)*q tensor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Iterator

import numpy as np

from .mathcore import DomainError, hermite_term_count

__all__ = [
    "KernelSpec",
    "KernelConstants",
    "DerivTensor",
    "KernelVerdict",
    "UnsupportedKernelError",
    "kappa",
    "kappa_deriv",
    "kernel_eval",
    "kron_deriv",
    "kernel_constants",
    "estimate_delta_r",
    "estimate_delta",
    "validate_kernel",
]

RBF = "rbf"
MATERN12 = "matern12"
MATERN32 = "matern32"
MATERN52 = "matern52"
RATIONAL_QUADRATIC = "rationalquadratic"

_FAMILIES = (RBF, MATERN12, MATERN32, MATERN52, RATIONAL_QUADRATIC)
_MATERN_D = {MATERN12: 0, MATERN32: 1, MATERN52: 2}

# Conventional ratio lower-bound factor for the exponential (nu = 1/2)
# kernel, whose single usable order leaves nothing to derive numerically.
_MATERN12_BETA_FACTOR = 0.3764

DEFAULT_R_A = 1000
DEFAULT_R_B = 100


class UnsupportedKernelError(ValueError):
    """Kernel family cannot be used with the stability machinery."""


@dataclass(frozen=True)
class KernelSpec:
    """An isotropic kernel family with its length parameter.

    ``length_param`` is gamma for the RBF kernel, rho for the Matern family
    and theta for the rational quadratic kernel.
    """

    family: str
    length_param: float

    def __post_init__(self) -> None:
        if self.family not in _FAMILIES:
            raise UnsupportedKernelError(
                f"unknown kernel family {self.family!r}; expected one of {_FAMILIES}"
            )
        if not (self.length_param > 0.0 and math.isfinite(self.length_param)):
            raise DomainError(f"length_param must be positive, got {self.length_param}")

    @property
    def smoothness(self) -> float:
        """Largest derivative order usable in Taylor machinery (inf for RBF)."""
        if self.family == RBF:
            return math.inf
        if self.family == RATIONAL_QUADRATIC:
            return math.inf
        return float(_MATERN_D[self.family])

    def to_json(self) -> dict:
        return {"family": self.family, "param": self.length_param}

    @staticmethod
    def from_json(obj: dict) -> "KernelSpec":
        return KernelSpec(family=str(obj["family"]), length_param=float(obj["param"]))


@dataclass(frozen=True)
class KernelConstants:
    """Length-scale bounds and Taylor-remainder handle for a kernel.

    ``l_up`` and ``l_down`` bound |kappa^(q)(r)| between l_down^q kappa(r)
    and l_up^q kappa(r) on the working range; ``delta_of`` maps a radial
    increment to a non-decreasing bound on the intrinsic Taylor remainder
    (identically zero for the RBF kernel).
    """

    l_up: float
    l_down: float
    delta_of: Callable[[float], float] = field(compare=False)


@dataclass(frozen=True)
class DerivTensor:
    """Dense order-q Kronecker derivative tensor in row-major layout."""

    order: int
    dim: int
    values: np.ndarray

    def __post_init__(self) -> None:
        if self.values.shape != (self.dim**self.order,):
            raise DomainError(
                f"tensor length {self.values.shape} inconsistent with "
                f"dim {self.dim} and order {self.order}"
            )

    def as_ndarray(self) -> np.ndarray:
        """Reshape to the (dim,)*order tensor view."""
        return self.values.reshape((self.dim,) * self.order)


@dataclass(frozen=True)
class KernelVerdict:
    accepted: bool
    reason: str


# ---------------------------------------------------------------------------
# Scalar kernel profiles kappa and their derivatives
# ---------------------------------------------------------------------------

def _half_integer_profile(d: int, z: float) -> float:
    # normalised Bessel profile of order d + 1/2 in elementary form:
    # g_{d+1/2}(z) = e^{-z} (d!/(2d)!) sum_i (d+i)!/(i!(d-i)!) (2z)^{d-i};
    # g(0) = 1 and g is completely monotone in z.
    total = 0.0
    for i in range(d + 1):
        total += (
            math.factorial(d + i)
            / (math.factorial(i) * math.factorial(d - i))
            * (2.0 * z) ** (d - i)
        )
    return math.exp(-z) * math.factorial(d) / math.factorial(2 * d) * total


def _matern_z(d: int, rho: float, r: float) -> float:
    # Bessel argument of the Matern(nu = d + 1/2) kernel at radial value r
    return math.sqrt(2.0 * (2 * d + 1) * r) / rho


def kappa(spec: KernelSpec, r: float) -> float:
    """Radial profile kappa(r) with r = 0.5 * squared distance."""
    if r < 0.0:
        raise DomainError(f"r must be >= 0, got {r}")
    p = spec.length_param
    if spec.family == RBF:
        return math.exp(-r / (p * p))
    if spec.family == RATIONAL_QUADRATIC:
        return p / (2.0 * r + p)
    d = _MATERN_D[spec.family]
    return _half_integer_profile(d, _matern_z(d, p, r))


def kappa_deriv(spec: KernelSpec, r: float, q: int) -> float:
    """q-th derivative of the radial profile, kappa^(q)(r).

    The sign alternates as (-1)^q by complete monotonicity.  For the Matern
    family differentiating in r lowers the Bessel order while keeping its
    argument: kappa^(q)(r) = (-nu/rho^2)^q (Gamma(nu-q)/Gamma(nu))
    g_{nu-q}(sqrt(4 nu r)/rho); derivatives exist up to the effective
    smoothness order only.
    """
    if r < 0.0:
        raise DomainError(f"r must be >= 0, got {r}")
    if q < 0:
        raise DomainError(f"q must be >= 0, got {q}")
    p = spec.length_param
    if spec.family == RBF:
        return (-1.0 / (p * p)) ** q * math.exp(-r / (p * p))
    if spec.family == RATIONAL_QUADRATIC:
        return (-2.0) ** q * math.factorial(q) * p / (2.0 * r + p) ** (q + 1)
    d = _MATERN_D[spec.family]
    if q > d:
        raise DomainError(
            f"{spec.family} admits derivatives only to order {d}, requested {q}"
        )
    if q == 0:
        return _half_integer_profile(d, _matern_z(d, p, r))
    nu = d + 0.5
    coeff = (-nu / (p * p)) ** q * math.gamma(nu - q) / math.gamma(nu)
    return coeff * _half_integer_profile(d - q, _matern_z(d, p, r))


def kernel_eval(spec: KernelSpec, x: np.ndarray, x2: np.ndarray) -> float:
    """Evaluate K(x, x') = kappa(0.5 ||x - x'||^2)."""
    x = np.asarray(x, dtype=float).ravel()
    x2 = np.asarray(x2, dtype=float).ravel()
    if x.shape != x2.shape:
        raise DomainError(f"dimension mismatch: {x.shape} vs {x2.shape}")
    d = x - x2
    return kappa(spec, 0.5 * float(d @ d))


# ---------------------------------------------------------------------------
# Kronecker derivative tensors
# ---------------------------------------------------------------------------

def _pair_placements(i: int, q: int) -> Iterator[tuple[tuple[tuple[int, int], ...], tuple[int, ...]]]:
    """Yield canonical placements of ``i`` index pairs among ``q`` slots.

    Each item is (pairs, free_slots).  Pairs are canonical: within a pair the
    smaller slot comes first, and pairs are ordered by their smaller slot,
    which makes every placement unique.  The number of placements equals
    ``hermite_term_count(i, q)``.
    """

    def rec(available: tuple[int, ...], k: int) -> Iterator[tuple[tuple[int, int], ...]]:
        if k == 0:
            yield ()
            return
        first = available[0]
        rest = available[1:]
        for j, partner in enumerate(rest):
            for tail in rec(rest[:j] + rest[j + 1 :], k - 1):
                yield ((first, partner),) + tail

    slots = tuple(range(q))
    for chosen in combinations(slots, 2 * i):
        chosen_set = set(chosen)
        free = tuple(s for s in slots if s not in chosen_set)
        for pairs in rec(chosen, i):
            yield pairs, free


def _a_tensor(i: int, q: int, d: np.ndarray) -> np.ndarray:
    """Dense sum over canonical placements of the order-q structure tensor.

    Free slots carry the displacement vector ``d``; paired slots carry an
    identity coupling.  Per-component accumulation uses exact summation so
    the result is symmetric under index permutations to the last bit.
    Returns the (n,)*q tensor (or a scalar for q = 0).
    """
    n = d.shape[0]
    if q == 0:
        return np.ones(())
    placements = list(_pair_placements(i, q))
    out = np.empty((n,) * q)
    for idx in np.ndindex(*(n,) * q):
        addends = []
        for pairs, free in placements:
            if any(idx[a] != idx[b] for a, b in pairs):
                continue
            # canonical monomial: product over coordinates in fixed order, so
            # permuted indices reproduce the value bit-for-bit
            counts = [0] * n
            for k in free:
                counts[idx[k]] += 1
            val = 1.0
            for m in range(n):
                if counts[m]:
                    val *= d[m] ** counts[m]
            addends.append(val)
        out[idx] = math.fsum(addends) if addends else 0.0
    return out


def kron_deriv(
    spec: KernelSpec, x: np.ndarray, x2: np.ndarray, q: int, alpha: int = 0
) -> DerivTensor:
    """Order-q mixed Kronecker derivative of K(x, x').

    ``alpha`` counts how many of the q gradient factors act on the second
    argument; only the count matters, positions do not affect the value.
    The result is (-1)^(q + alpha) * sum_i a_(i,q)(x' - x) * kappa^(q-i)(r):
    each first-argument gradient contributes a factor (x - x') = -d, each
    second-argument gradient a factor +d, which fixes the leading sign.

    Structural terms whose displacement factor vanishes identically (all
    free-slot components zero) are skipped before the radial derivative is
    evaluated, so diagonal blocks of finite-smoothness kernels remain
    computable whenever the surviving orders exist.
    """
    if q < 0:
        raise DomainError(f"q must be >= 0, got {q}")
    if not 0 <= alpha <= q:
        raise DomainError(f"alpha must lie in [0, {q}], got {alpha}")
    x = np.asarray(x, dtype=float).ravel()
    x2 = np.asarray(x2, dtype=float).ravel()
    if x.shape != x2.shape:
        raise DomainError(f"dimension mismatch: {x.shape} vs {x2.shape}")
    n = x.shape[0]
    d = x2 - x
    r = 0.5 * float(d @ d)
    if q == 0:
        return DerivTensor(order=0, dim=n, values=np.array([kappa(spec, r)]))

    s = spec.smoothness
    d_is_zero = not np.any(d)
    total = np.zeros((n,) * q)
    sign = -1.0 if (q + alpha) % 2 else 1.0
    for i in range(q // 2 + 1):
        needs_d = q - 2 * i > 0
        if needs_d and d_is_zero:
            continue
        if q - i > s:
            raise DomainError(
                f"order-{q} derivative of {spec.family} requires kappa^({q - i}), "
                f"but smoothness is {s}"
            )
        total += _a_tensor(i, q, d) * kappa_deriv(spec, r, q - i)
    return DerivTensor(order=q, dim=n, values=sign * total.ravel())


# ---------------------------------------------------------------------------
# Vectorised radial profiles (hot paths operate on whole distance matrices)
# ---------------------------------------------------------------------------

def _half_integer_profile_vec(d: int, z: np.ndarray) -> np.ndarray:
    total = np.zeros_like(z)
    for i in range(d + 1):
        total += (
            math.factorial(d + i)
            / (math.factorial(i) * math.factorial(d - i))
            * (2.0 * z) ** (d - i)
        )
    return np.exp(-z) * math.factorial(d) / math.factorial(2 * d) * total


def kappa_vec(spec: KernelSpec, r: np.ndarray) -> np.ndarray:
    """Vectorised kappa over an array of radial arguments."""
    r = np.asarray(r, dtype=float)
    p = spec.length_param
    if spec.family == RBF:
        return np.exp(-r / (p * p))
    if spec.family == RATIONAL_QUADRATIC:
        return p / (2.0 * r + p)
    d = _MATERN_D[spec.family]
    z = np.sqrt(2.0 * (2 * d + 1) * r) / p
    return _half_integer_profile_vec(d, z)


def kappa_deriv_vec(spec: KernelSpec, r: np.ndarray, q: int) -> np.ndarray:
    """Vectorised kappa^(q) over an array of radial arguments."""
    r = np.asarray(r, dtype=float)
    p = spec.length_param
    if q == 0:
        return kappa_vec(spec, r)
    if spec.family == RBF:
        return (-1.0 / (p * p)) ** q * np.exp(-r / (p * p))
    if spec.family == RATIONAL_QUADRATIC:
        return (-2.0) ** q * math.factorial(q) * p / (2.0 * r + p) ** (q + 1)
    d = _MATERN_D[spec.family]
    if q > d:
        raise DomainError(
            f"{spec.family} admits derivatives only to order {d}, requested {q}"
        )
    nu = d + 0.5
    coeff = (-nu / (p * p)) ** q * math.gamma(nu - q) / math.gamma(nu)
    z = np.sqrt(2.0 * (2 * d + 1) * r) / p
    return coeff * _half_integer_profile_vec(d - q, z)


# ---------------------------------------------------------------------------
# Length-scale constants and remainder estimation
# ---------------------------------------------------------------------------

def validate_kernel(spec: KernelSpec) -> KernelVerdict:
    """Accept kernels whose derivative ratios admit geometric bounds.

    The rational quadratic profile has |kappa^(q)(r)|/kappa(r) growing like
    (q!)^(1/q) * 2/(2r+theta), so no finite ratio bounds exist and the
    Taylor-remainder machinery would blow up exponentially; it is rejected.
    """
    if spec.family == RATIONAL_QUADRATIC:
        return KernelVerdict(
            accepted=False,
            reason=(
                "rational quadratic derivative ratios grow factorially with the "
                "order, so no finite length-scale bounds exist"
            ),
        )
    return KernelVerdict(accepted=True, reason="supported isotropic family")


def _taylor_abs_remainder(spec: KernelSpec, r: float, dr: float) -> float:
    """|kappa(r + dr) - truncated Taylor expansion about r| to the max order."""
    s = int(spec.smoothness) if math.isfinite(spec.smoothness) else None
    if s is None:
        raise DomainError("intrinsic remainder is only defined for finite smoothness")
    total = kappa(spec, r + dr)
    for k in range(s + 1):
        total -= dr**k / math.factorial(k) * kappa_deriv(spec, r, k)
    return abs(total)


def estimate_delta_r(
    spec: KernelSpec,
    r: float,
    dr: float,
    n_samples: int = DEFAULT_R_A,
    rng: np.random.Generator | None = None,
) -> float:
    """Monte-Carlo upper envelope of the local Taylor remainder at radius r.

    Takes the maximum of the directly evaluated remainder at ``dr`` and the
    remainders at ``n_samples`` uniform draws in (0, dr), which keeps the
    estimate a valid bound at ``dr`` itself and, for a shared unit sample
    pool, approximately non-decreasing in ``dr``.  Returns 0 for the RBF
    kernel, whose expansion converges.
    """
    if dr < 0.0:
        raise DomainError(f"dr must be >= 0, got {dr}")
    if spec.family == RBF:
        return 0.0
    if dr == 0.0:
        return 0.0
    rng = np.random.default_rng(0) if rng is None else rng
    best = _taylor_abs_remainder(spec, r, dr)
    for u in rng.random(n_samples):
        best = max(best, _taylor_abs_remainder(spec, r, float(u) * dr))
    return best


def estimate_delta(
    spec: KernelSpec,
    m_diameter: float,
    dr: float,
    n_samples: int = DEFAULT_R_A,
    n_radii: int = DEFAULT_R_B,
    rng: np.random.Generator | None = None,
) -> float:
    """Monte-Carlo estimate of the normalised global remainder bound.

    Maximises estimate_delta_r(r, dr)/kappa(r) over ``n_radii`` uniform radii
    in (0, M^2/2) plus the two interval endpoints: for the Matern family the
    normalised remainder peaks as r approaches 0, where the second radial
    derivative blows up, and a purely uniform sample badly underestimates
    that edge.  Zero for the RBF kernel and for dr = 0.
    """
    if m_diameter <= 0.0:
        raise DomainError(f"domain diameter must be > 0, got {m_diameter}")
    if spec.family == RBF or dr == 0.0:
        return 0.0
    rng = np.random.default_rng(0) if rng is None else rng
    r_edge = 0.5 * m_diameter * m_diameter
    radii = [0.0, r_edge] + [float(v) * r_edge for v in rng.random(n_radii)]
    best = 0.0
    for r in radii:
        best = max(best, estimate_delta_r(spec, r, dr, n_samples, rng) / kappa(spec, r))
    return best


def kernel_constants(
    spec: KernelSpec,
    m_diameter: float,
    n_samples: int = DEFAULT_R_A,
    n_radii: int = DEFAULT_R_B,
    seed: int = 0,
) -> KernelConstants:
    """Derive the ratio bounds (l_up, l_down) and the remainder handle.

    RBF: l_up = l_down = 1/gamma^2 with a zero remainder.  Matern with at
    least one derivative order: the bounds are the per-order extrema of
    (|kappa^(q)(r)|/kappa(r))^(1/q) over the working range r in [0, M^2/2],
    evaluated on a dense grid and padded by a relative safety margin so the
    ratio inequalities hold strictly.  Matern(1/2) has no derivative orders
    to bound; it keeps the conventional 1/(2 rho) scale constants.  The
    remainder handle memoises Monte-Carlo estimates under a running maximum
    so that it is non-decreasing across queried increments.
    """
    verdict = validate_kernel(spec)
    if not verdict.accepted:
        raise UnsupportedKernelError(verdict.reason)
    if m_diameter <= 0.0:
        raise DomainError(f"domain diameter must be > 0, got {m_diameter}")
    p = spec.length_param
    if spec.family == RBF:
        inv = 1.0 / (p * p)
        return KernelConstants(l_up=inv, l_down=inv, delta_of=lambda dr: 0.0)

    d = _MATERN_D[spec.family]
    nu = d + 0.5
    if d == 0:
        l_up = math.sqrt(nu) / (2.0 * p)
        l_down = _MATERN12_BETA_FACTOR * l_up
    else:
        r_grid = np.linspace(0.0, 0.5 * m_diameter * m_diameter, 4001)
        base = kappa_vec(spec, r_grid)
        l_up = 0.0
        l_down = math.inf
        for q in range(1, d + 1):
            ratio = np.abs(kappa_deriv_vec(spec, r_grid, q)) / base
            l_up = max(l_up, float(np.max(ratio)) ** (1.0 / q))
            l_down = min(l_down, float(np.min(ratio)) ** (1.0 / q))
        l_up *= 1.0 + 1e-9
        l_down *= 1.0 - 1e-9

    cache: dict[float, float] = {}

    def delta_of(dr: float) -> float:
        if dr <= 0.0:
            return 0.0
        if dr not in cache:
            rng = np.random.default_rng([seed, hash(spec.family) & 0xFFFF])
            cache[dr] = estimate_delta(spec, m_diameter, dr, n_samples, n_radii, rng)
        # running maximum over previously queried smaller increments keeps
        # the handle non-decreasing
        result = cache[dr]
        for k, v in cache.items():
            if k <= dr:
                result = max(result, v)
        cache[dr] = result
        return result

    return KernelConstants(l_up=l_up, l_down=l_down, delta_of=delta_of)
