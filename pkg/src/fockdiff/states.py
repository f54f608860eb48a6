"""Diagonal optical-field states: number, chaotic, negative binomial, Laguerre-weighted chaotic.

Every constructor returns a :class:`~fockdiff.fock.DensityMatrix` that is
diagonal in the Fock basis. States are *not* renormalized after truncation;
the analytic tail mass beyond the last retained level is recorded as the
``trace_deficit`` instead. Pass ``renormalize=True`` to rescale explicitly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import stats
from scipy.special import gammaln

from .fock import (
    STRICT,
    DensityMatrix,
    FockSpace,
    TracePolicy,
    TruncationError,
    ladder_ops,
    validate_density,
)
from .special import log_binomial


@dataclass(frozen=True)
class NbsParams:
    s: int
    gamma: float

    def __post_init__(self):
        if int(self.s) != self.s or self.s < 0:
            raise ValueError(f"s must be a nonnegative integer (s >= 0), got {self.s!r}")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must satisfy 0 < gamma < 1, got {self.gamma!r}")
        object.__setattr__(self, "s", int(self.s))

    @property
    def mean(self) -> float:
        return (self.s + 1) * (1.0 - self.gamma) / self.gamma


@dataclass(frozen=True)
class ChaoticParams:
    gamma: float

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must satisfy 0 < gamma < 1, got {self.gamma!r}")

    @property
    def n_c(self) -> float:
        """Mean occupancy 1/gamma - 1."""
        return (1.0 - self.gamma) / self.gamma

    @property
    def f(self) -> float:
        return math.log1p(-self.gamma)

    @property
    def mean(self) -> float:
        return self.n_c


@dataclass(frozen=True)
class LwcsParams:
    """Laguerre-weighted chaotic state; ``lam = 1/(1 + kappa t)``."""

    l: int
    lam: float

    def __post_init__(self):
        if int(self.l) != self.l or self.l < 0:
            raise ValueError(f"l must be a nonnegative integer (l >= 0), got {self.l!r}")
        if not 0.0 < self.lam <= 1.0:
            raise ValueError(f"lambda must satisfy 0 < lambda <= 1, got {self.lam!r}")
        object.__setattr__(self, "l", int(self.l))

    @classmethod
    def from_kappa_t(cls, l: int, kappa_t: float) -> "LwcsParams":
        return cls(l, 1.0 / (1.0 + kappa_t))

    @property
    def kappa_t(self) -> float:
        return 1.0 / self.lam - 1.0

    @property
    def mean(self) -> float:
        return self.l + self.kappa_t


def thermal_occupancy(beta: float, omega: float) -> float:
    """Bose-Einstein occupancy 1/(exp(beta*omega) - 1), with hbar = 1."""
    x = beta * omega
    if not x > 0.0:
        raise ValueError(f"beta*omega must be > 0, got {x!r}")
    return 1.0 / math.expm1(x)


def gamma_from_occupancy(n_c: float) -> float:
    if not n_c > 0.0:
        raise ValueError(f"mean occupancy must be > 0, got {n_c!r}")
    return 1.0 / (1.0 + n_c)


# --- photon-number distributions ------------------------------------------------


def normal_ordered_diagonal(coeffs, base: float, n_max: int) -> np.ndarray:
    """Fock diagonal of ``:exp(K a^dag a) P(a^dag a):`` with ``P(x) = sum_l c_l x^l``.

    ``base`` is ``1 + K``. Uses
    ``<n| :(a^dag a)^l exp(K a^dag a): |n> = n!/(n-l)! (1+K)^(n-l)``,
    evaluated term by term in log space. Returns entries ``n = 0 .. n_max``.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    if base < 0.0:
        raise ValueError(f"diagonal rule needs 1 + K >= 0, got {base}")
    n = np.arange(n_max + 1)
    out = np.zeros(n_max + 1)
    log_base = math.log(base) if base > 0.0 else None
    for l, c in enumerate(coeffs):
        if c == 0.0 or l > n_max:
            continue
        nn = n[l:]
        falling = gammaln(nn + 1) - gammaln(nn - l + 1)
        if log_base is None:
            term = np.where(nn == l, np.exp(falling), 0.0)
        else:
            term = np.exp(falling + (nn - l) * log_base)
        out[l:] += c * term
    return out


def nbs_distribution(p: NbsParams, n_max: int) -> np.ndarray:
    """C(n+s, n) gamma^(s+1) (1-gamma)^n for n = 0 .. n_max (log space)."""
    n = np.arange(n_max + 1)
    # same operation order as chaotic_distribution so s = 0 matches it bit for bit
    return p.gamma ** (p.s + 1) * np.exp(log_binomial(n + p.s, n) + n * math.log1p(-p.gamma))


def nbs_normal_ordered_coeffs(p: NbsParams) -> np.ndarray:
    """Polynomial coefficients of gamma^(s+1) L_s((gamma-1) x)."""
    l = np.arange(p.s + 1)
    # L_s(y) = sum_l C(s,l) (-y)^l / l!  with  -y = (1-gamma) x
    return p.gamma ** (p.s + 1) * np.exp(
        log_binomial(p.s, l) - gammaln(l + 1) + l * math.log1p(-p.gamma)
    )


def nbs_normal_ordered_diagonal(p: NbsParams, n_max: int) -> np.ndarray:
    """Diagonal of gamma^(s+1) :exp(-gamma a^dag a) L_s((gamma-1) a^dag a):."""
    return normal_ordered_diagonal(nbs_normal_ordered_coeffs(p), 1.0 - p.gamma, n_max)


def chaotic_distribution(p: ChaoticParams, n_max: int) -> np.ndarray:
    n = np.arange(n_max + 1)
    return p.gamma * np.exp(n * math.log1p(-p.gamma))


def lwcs_distribution(p: LwcsParams, n_max: int) -> np.ndarray:
    """Diagonal of lam (1-lam)^l :L_l(-lam^2 a^dag a/(1-lam)) exp(-lam a^dag a):."""
    if p.lam == 1.0:
        out = np.zeros(n_max + 1)
        if p.l <= n_max:
            out[p.l] = 1.0
        return out
    k = np.arange(p.l + 1)
    log1m = math.log1p(-p.lam)
    coeffs = np.exp(
        math.log(p.lam)
        + p.l * log1m
        + log_binomial(p.l, k)
        - gammaln(k + 1)
        + k * (2.0 * math.log(p.lam) - log1m)
    )
    return normal_ordered_diagonal(coeffs, 1.0 - p.lam, n_max)


# --- truncation bookkeeping -----------------------------------------------------


def nbs_tail(p: NbsParams, dim: int) -> float:
    """Probability mass at levels >= dim."""
    return float(stats.nbinom.sf(dim - 1, p.s + 1, p.gamma))


def chaotic_tail(p: ChaoticParams, dim: int) -> float:
    return math.exp(dim * math.log1p(-p.gamma))


def lwcs_tail(p: LwcsParams, dim: int) -> float:
    if p.lam == 1.0:
        return 1.0 if p.l >= dim else 0.0
    return _summed_tail(lambda n_max: lwcs_distribution(p, n_max), dim)


def _summed_tail(dist: Callable[[int], np.ndarray], start: int, chunk: int = 256) -> float:
    """Sum a distribution from ``start`` until further terms are negligible."""
    stop = start + chunk
    while True:
        vals = dist(stop)[start:]
        total = math.fsum(vals)
        if vals[-1] <= 1e-20 * max(total, 1e-300) or vals[-1] < 1e-300:
            return total
        stop += chunk


def required_dim(tail: Callable[[int], float], allowed: float, start: int = 2) -> int:
    """Smallest dim >= start with ``tail(dim) <= allowed`` (tail is nonincreasing)."""
    lo = max(start, 2)
    if tail(lo) <= allowed:
        return lo
    hi = lo * 2
    while tail(hi) > allowed:
        lo, hi = hi, hi * 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if tail(mid) <= allowed:
            hi = mid
        else:
            lo = mid
    return hi


def _allowed_deficit(policy: TracePolicy) -> float:
    return policy.trace_tol if policy.mode == "strict" else policy.max_deficit


def _truncated_state(
    space: FockSpace,
    rho: np.ndarray,
    tail: Callable[[int], float],
    policy: TracePolicy,
    renormalize: bool,
    label: str,
) -> DensityMatrix:
    deficit = tail(space.dim)
    if deficit > _allowed_deficit(policy):
        need = required_dim(tail, _allowed_deficit(policy), space.dim)
        raise TruncationError(
            f"{label}: truncation tail {deficit:.3e} exceeds the allowed deficit "
            f"{_allowed_deficit(policy):.1e} at dim {space.dim}",
            need,
        )
    if renormalize:
        rho = rho / math.fsum(rho.diagonal().real)
        deficit = 0.0
    return validate_density(rho, policy, space, trace_deficit=deficit)


# --- constructors ---------------------------------------------------------------


def number_state(space: FockSpace, l: int) -> DensityMatrix:
    if int(l) != l or l < 0:
        raise ValueError(f"number state index must be a nonnegative integer, got {l!r}")
    if l >= space.dim:
        raise TruncationError(f"number state |{l}> outside dim {space.dim}", l + 1)
    rho = np.zeros((space.dim, space.dim))
    rho[l, l] = 1.0
    return validate_density(rho, STRICT, space, trace_deficit=0.0)


def chaotic_state(
    space: FockSpace,
    p: ChaoticParams,
    policy: TracePolicy = STRICT,
    renormalize: bool = False,
) -> DensityMatrix:
    rho = np.diag(chaotic_distribution(p, space.dim - 1))
    return _truncated_state(
        space, rho, lambda d: chaotic_tail(p, d), policy, renormalize, "chaotic state"
    )


def nbs_state(
    space: FockSpace,
    p: NbsParams,
    policy: TracePolicy = STRICT,
    renormalize: bool = False,
) -> DensityMatrix:
    rho = np.diag(nbs_distribution(p, space.dim - 1))
    return _truncated_state(
        space, rho, lambda d: nbs_tail(p, d), policy, renormalize, "negative binomial state"
    )


def nbs_via_subtraction(
    space: FockSpace,
    p: NbsParams,
    policy: TracePolicy = STRICT,
    renormalize: bool = False,
) -> DensityMatrix:
    """Build the NBS as a^s rho_c a^dag^s / (s! n_c^s) with explicit matrix products.

    The chaotic state lives on a space enlarged by ``s`` levels so the
    subtraction does not clip the top of the retained range.
    """
    chaotic = ChaoticParams(p.gamma)
    if p.s == 0:
        return chaotic_state(space, chaotic, policy, renormalize)
    big = FockSpace(space.dim + p.s)
    rho_c = np.diag(chaotic_distribution(chaotic, big.dim - 1))
    a, a_dag = ladder_ops(big)
    a_s = np.linalg.matrix_power(a.entries.real, p.s)
    a_dag_s = np.linalg.matrix_power(a_dag.entries.real, p.s)
    norm = math.exp(math.lgamma(p.s + 1) + p.s * math.log(chaotic.n_c))
    rho = (a_s @ rho_c @ a_dag_s / norm)[: space.dim, : space.dim]
    return _truncated_state(
        space, rho, lambda d: nbs_tail(p, d), policy, renormalize,
        "photon-subtracted chaotic state",
    )


def lwcs_state(
    space: FockSpace,
    p: LwcsParams,
    policy: TracePolicy = STRICT,
    renormalize: bool = False,
) -> DensityMatrix:
    if p.lam == 1.0:
        return number_state(space, p.l)
    rho = np.diag(lwcs_distribution(p, space.dim - 1))
    return _truncated_state(
        space, rho, lambda d: lwcs_tail(p, d), policy, renormalize,
        "Laguerre-weighted chaotic state",
    )


# --- named families (CLI / sweeps) ----------------------------------------------

STATE_KINDS = ("number", "chaotic", "nbs", "lwcs")


@dataclass(frozen=True)
class StateSpec:
    """One of the four state families with its parameters, by name."""

    kind: str
    s: Optional[int] = None
    gamma: Optional[float] = None
    l: Optional[int] = None
    lam: Optional[float] = None

    def __post_init__(self):
        if self.kind not in STATE_KINDS:
            raise ValueError(f"unknown state {self.kind!r}; expected one of {STATE_KINDS}")
        needed = {
            "number": ("l",),
            "chaotic": ("gamma",),
            "nbs": ("s", "gamma"),
            "lwcs": ("l", "lam"),
        }[self.kind]
        for name in needed:
            if getattr(self, name) is None:
                raise ValueError(f"state {self.kind!r} requires parameter {name!r}")
        self.params  # validates

    @property
    def params(self):
        if self.kind == "number":
            if int(self.l) != self.l or self.l < 0:
                raise ValueError(f"l must be a nonnegative integer (l >= 0), got {self.l!r}")
            return LwcsParams(self.l, 1.0)
        if self.kind == "chaotic":
            return ChaoticParams(self.gamma)
        if self.kind == "nbs":
            return NbsParams(self.s, self.gamma)
        return LwcsParams(self.l, self.lam)

    @property
    def mean(self) -> float:
        return self.params.mean

    def distribution(self, n_max: int) -> np.ndarray:
        p = self.params
        if self.kind == "chaotic":
            return chaotic_distribution(p, n_max)
        if self.kind == "nbs":
            return nbs_distribution(p, n_max)
        return lwcs_distribution(p, n_max)

    def tail(self, dim: int) -> float:
        p = self.params
        if self.kind == "chaotic":
            return chaotic_tail(p, dim)
        if self.kind == "nbs":
            return nbs_tail(p, dim)
        return lwcs_tail(p, dim)

    def build(self, space: FockSpace, policy: TracePolicy = STRICT) -> DensityMatrix:
        p = self.params
        if self.kind == "number":
            return number_state(space, self.l)
        if self.kind == "chaotic":
            return chaotic_state(space, p, policy)
        if self.kind == "nbs":
            return nbs_state(space, p, policy)
        return lwcs_state(space, p, policy)

    def as_dict(self) -> dict:
        keys = {"number": ("l",), "chaotic": ("gamma",), "nbs": ("s", "gamma"), "lwcs": ("l", "lam")}
        return {"state": self.kind, **{k: getattr(self, k) for k in keys[self.kind]}}
