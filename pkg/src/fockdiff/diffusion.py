"""The diffusion channel drho/dt = -kappa (a^dag a rho + rho a a^dag - a rho a^dag - a^dag rho a).

Three independent routes to rho(t):

* ``apply_channel_kraus`` sums the closed-form Kraus family
  ``M_{m,n} = sqrt(q^(m+n) / (m! n! (1+q)^(m+n+1))) a^dag^m (1+q)^(-a^dag a) a^n``
  with ``q = kappa t``;
* ``evolve_ode`` integrates the master equation with fixed-step RK4;
* ``evolved_nbs_diagonal`` evaluates the normally ordered closed form
  ``C :exp(E a^dag a) L_s(F a^dag a):`` for an initial negative binomial state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np
from scipy import stats
from scipy.special import gammaln

from .fock import (
    DensityMatrix,
    FockSpace,
    Operator,
    TracePolicy,
    TruncationError,
    mean_photon,
    validate_density,
)
from .special import log_binomial
from .states import (
    NbsParams,
    StateSpec,
    _summed_tail,
    lwcs_distribution,
    LwcsParams,
    normal_ordered_diagonal,
    required_dim,
)

DEFAULT_DEFICIT_TARGET = 1e-10
DEFAULT_MARGIN = 8
# RK4 is stable on the negative real axis down to about -2.78
RK4_STABILITY = 2.5

CHANNEL_POLICY = TracePolicy(mode="deficit", max_deficit=1e-6)


class IntegrationError(RuntimeError):
    """The RK4 integration went unstable."""


@dataclass(frozen=True)
class ChannelConfig:
    """One application of the diffusion channel.

    ``kraus_cutoff=None`` selects the automatic cutoff: the smallest ``M`` whose
    measured completeness defect, weighted by the input populations, stays
    below ``deficit_target``.
    """

    kappa: float
    t: float
    kraus_cutoff: Optional[int] = None
    deficit_target: float = DEFAULT_DEFICIT_TARGET
    margin: int = DEFAULT_MARGIN

    def __post_init__(self):
        if not self.kappa >= 0.0:
            raise ValueError(f"kappa must be >= 0, got {self.kappa!r}")
        if not self.t >= 0.0:
            raise ValueError(f"t must be >= 0, got {self.t!r}")
        if self.kraus_cutoff is not None and (
            int(self.kraus_cutoff) != self.kraus_cutoff or self.kraus_cutoff < 0
        ):
            raise ValueError(f"kraus_cutoff must be a nonnegative integer, got {self.kraus_cutoff!r}")
        if not self.deficit_target > 0.0:
            raise ValueError(f"deficit_target must be > 0, got {self.deficit_target!r}")

    @property
    def kappa_t(self) -> float:
        return self.kappa * self.t


@dataclass(frozen=True)
class EvolvedNbsParams:
    """Parameters of ``C :exp(E a^dag a) L_s(F a^dag a):``."""

    E: float
    F: float
    C: float
    lam: float
    base: float  # 1 + E, computed without cancellation

    @classmethod
    def from_params(cls, p: NbsParams, kappa_t: float) -> "EvolvedNbsParams":
        g, q = p.gamma, kappa_t
        denom = 1.0 + q * g
        E = -g / denom
        F = (g - 1.0) / (denom * (1.0 + q))
        C = (g * (q + 1.0) / denom) ** (p.s + 1) / (1.0 + q)
        return cls(E=E, F=F, C=C, lam=1.0 / (1.0 + q), base=(1.0 + q * g - g) / denom)


# --- Kraus operators ------------------------------------------------------------


def _kraus_log_weight(q: float, m, n):
    """log of (q^(m+n) / (m! n! (1+q)^(m+n+1)))."""
    m = np.asarray(m, dtype=float)
    n = np.asarray(n, dtype=float)
    return (m + n) * math.log(q) - gammaln(m + 1) - gammaln(n + 1) - (m + n + 1) * math.log1p(q)


def _kraus_coeffs(dim: int, q: float, m: int, n: int) -> np.ndarray:
    """Amplitudes ``c_k`` with ``M_{m,n}|k> = c_k |k-n+m>``; zero where the target leaves the space."""
    if q == 0.0:
        return np.ones(dim) if m == n == 0 else np.zeros(dim)
    k = np.arange(dim)
    j = k - n
    ok = (j >= 0) & (j + m < dim)
    out = np.zeros(dim)
    kk, jj = k[ok], j[ok]
    log_c = 0.5 * (
        _kraus_log_weight(q, m, n)
        + gammaln(kk + 1) - gammaln(jj + 1)
        + gammaln(jj + m + 1) - gammaln(jj + 1)
    ) - jj * math.log1p(q)
    out[ok] = np.exp(log_c)
    return out


@dataclass(frozen=True, eq=False)
class KrausTerm:
    """One ``M_{m,n}``, stored as its single shifted band.

    ``coeffs[k]`` is the amplitude of ``|k> -> |k + shift>``. The dense
    ``operator`` is built on first access.
    """

    m: int
    n: int
    space: FockSpace
    coeffs: np.ndarray = field(repr=False)

    @property
    def shift(self) -> int:
        return self.m - self.n

    @cached_property
    def operator(self) -> Operator:
        dim = self.space.dim
        mat = np.zeros((dim, dim))
        k = np.nonzero(self.coeffs)[0]
        mat[k + self.shift, k] = self.coeffs[k]
        return Operator(self.space, mat)


def level_defects(levels, kappa_t: float, cutoff: int) -> np.ndarray:
    """Exact completeness defect ``1 - <k| sum_{m,n<=M} M^dag M |k>`` on an untruncated space.

    For level k the index n is Binomial(k, x) and, given j = k - n, the index m
    is negative binomial with j+1 successes, x = q/(1+q). The defect is the
    probability that either index exceeds the cutoff.
    """
    levels = np.atleast_1d(np.asarray(levels, dtype=int))
    if kappa_t == 0.0:
        return np.zeros(len(levels))
    x = kappa_t / (1.0 + kappa_t)
    n = np.arange(cutoff + 1)
    k = levels[:, None]
    pn = np.where(n[None, :] <= k, stats.binom.pmf(n[None, :], k, x), 0.0)
    j = np.maximum(k - n[None, :], 0)
    m_tail = stats.nbinom.sf(cutoff, j + 1, 1.0 - x)
    return (pn * m_tail).sum(axis=1) + stats.binom.sf(cutoff, levels, x)


def auto_interior_cutoff(dim: int, kappa_t: float, target: float, margin: int = DEFAULT_MARGIN) -> int:
    """Smallest cutoff M whose interior (levels < dim - M - margin) is complete to ``target``."""
    if kappa_t == 0.0:
        return 0
    hi = dim - margin - 1

    def ok(M):
        inner = dim - M - margin
        return inner > 0 and level_defects(np.arange(inner), kappa_t, M).max() <= target

    if hi < 0 or not ok(hi):
        raise TruncationError(
            f"no Kraus cutoff makes any interior level complete to {target:.1e} "
            f"at kappa*t = {kappa_t:g}",
            2 * dim,
        )
    lo = -1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def auto_state_cutoff(populations: np.ndarray, kappa_t: float, target: float) -> int:
    """Smallest cutoff M with population-weighted completeness defect <= target / 2."""
    if kappa_t == 0.0:
        return 0
    populations = np.asarray(populations, dtype=float)
    levels = np.nonzero(populations > 0.0)[0]
    weights = populations[levels]

    def defect(M):
        return float(np.dot(weights, level_defects(levels, kappa_t, M)))

    lo, hi = -1, 8
    while defect(hi) > target / 2:
        lo, hi = hi, hi * 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if defect(mid) <= target / 2:
            hi = mid
        else:
            lo = mid
    return hi


def support_edge(populations: np.ndarray, eps: float) -> int:
    """Smallest K such that the population above level K is at most ``eps``."""
    populations = np.clip(np.asarray(populations, dtype=float), 0.0, None)
    above = np.concatenate([np.cumsum(populations[::-1])[::-1][1:], [0.0]])
    return int(np.argmax(above <= eps))


def kraus_terms(space: FockSpace, cfg: ChannelConfig) -> list[KrausTerm]:
    """All ``M_{m,n}`` with ``m, n <= cutoff``, ordered by ascending ``m+n`` then ``m``.

    With the automatic cutoff the interior ``levels < dim - cutoff - margin``
    is complete to ``cfg.deficit_target``.
    """
    q = cfg.kappa_t
    if q == 0.0:
        return [KrausTerm(0, 0, space, np.ones(space.dim))]
    cutoff = cfg.kraus_cutoff
    if cutoff is None:
        cutoff = auto_interior_cutoff(space.dim, q, cfg.deficit_target, cfg.margin)
    elif cutoff > space.dim - 1:
        raise ValueError(f"kraus_cutoff {cutoff} exceeds dim - 1 = {space.dim - 1}")
    return [
        KrausTerm(m, total - m, space, _kraus_coeffs(space.dim, q, m, total - m))
        for total in range(2 * cutoff + 1)
        for m in range(max(0, total - cutoff), min(total, cutoff) + 1)
    ]


def completeness_diagonal(terms: Sequence[KrausTerm]) -> np.ndarray:
    """Diagonal of ``sum M^dag M`` (each ``M^dag M`` is diagonal)."""
    out = np.zeros(terms[0].space.dim)
    for term in terms:
        out += term.coeffs**2
    return out


def completeness_matrix(terms: Sequence[KrausTerm]) -> np.ndarray:
    """Dense ``sum M^dag M`` from the materialized operators."""
    dim = terms[0].space.dim
    out = np.zeros((dim, dim), dtype=complex)
    for term in terms:
        op = term.operator.entries
        out += op.conj().T @ op
    return out


def interior_levels(dim: int, cutoff: int, margin: int = DEFAULT_MARGIN) -> int:
    return max(dim - cutoff - margin, 0)


# --- channel application ---------------------------------------------------------


def plan_channel(rho0: DensityMatrix, cfg: ChannelConfig) -> tuple[int, int]:
    """Return ``(support_edge, cutoff)`` for ``rho0`` and enforce the truncation-edge policy.

    The input must be supported below ``dim - cutoff - margin``; otherwise a
    :class:`TruncationError` carries the recommended dim.
    """
    pops = rho0.diagonal
    edge = support_edge(pops, cfg.deficit_target * 1e-2)
    q = cfg.kappa_t
    if cfg.kraus_cutoff is not None:
        cutoff = int(cfg.kraus_cutoff)
    else:
        cutoff = auto_state_cutoff(pops[: edge + 1], q, cfg.deficit_target)
    need = edge + cutoff + cfg.margin + 1
    if q > 0.0 and rho0.dim < need:
        raise TruncationError(
            f"input support reaches level {edge}; with Kraus cutoff {cutoff} and margin "
            f"{cfg.margin} it is too close to the truncation edge of dim {rho0.dim}",
            need,
        )
    return edge, cutoff


def _kraus_sum_diagonal(pops: np.ndarray, q: float, cutoff: int) -> np.ndarray:
    dim = len(pops)
    k = np.arange(dim)
    lg = gammaln(np.arange(dim + cutoff + 1) + 1.0)
    l1q = math.log1p(q)
    out = np.zeros(dim)
    for total in range(2 * cutoff + 1):
        m = np.arange(max(0, total - cutoff), min(total, cutoff) + 1)[:, None]
        n = total - m
        j = k[None, :] - n
        ok = (j >= 0) & (j + m < dim)
        jj = np.where(ok, j, 0)
        log_c2 = (
            _kraus_log_weight(q, m, n)
            + lg[k][None, :] - 2.0 * lg[jj] + lg[jj + m]
            - 2.0 * jj * l1q
        )
        vals = np.exp(np.where(ok, log_c2, -np.inf)) * pops[None, :]
        # row-major flattening adds into each target level in ascending m
        np.add.at(out, (jj + m)[ok], vals[ok])
    return out


def _kraus_sum_dense(rho: np.ndarray, q: float, cutoff: int) -> np.ndarray:
    dim = rho.shape[0]
    out = np.zeros_like(rho)
    for total in range(2 * cutoff + 1):
        for m in range(max(0, total - cutoff), min(total, cutoff) + 1):
            n = total - m
            d = m - n
            lo, hi = n, min(dim, dim - d)
            if hi <= lo:
                continue
            c = _kraus_coeffs(dim, q, m, n)[lo:hi]
            out[lo + d : hi + d, lo + d : hi + d] += np.outer(c, c) * rho[lo:hi, lo:hi]
    return out


def apply_channel_kraus(rho0: DensityMatrix, cfg: ChannelConfig) -> DensityMatrix:
    """``sum_{m,n} M_{m,n} rho0 M_{m,n}^dag`` in ascending ``m+n``, then ``m``.

    Diagonal inputs take a vectorized path over populations; the summation
    order per output entry is the same as for the dense path.
    """
    q = cfg.kappa_t
    if q == 0.0:
        return rho0
    _, cutoff = plan_channel(rho0, cfg)
    if rho0.is_diagonal():
        out = np.diag(_kraus_sum_diagonal(rho0.diagonal, q, cutoff))
    else:
        out = _kraus_sum_dense(rho0.entries, q, cutoff)
    return validate_density(out, CHANNEL_POLICY, rho0.space)


# --- master equation ------------------------------------------------------------


def master_equation_rhs(rho, kappa: float) -> np.ndarray:
    """``-kappa (N rho + rho a a^dag - a rho a^dag - a^dag rho a)`` on the truncated space.

    Uses the truncated ``a``; in particular ``(a a^dag)`` has a zero in its last
    diagonal entry. Evaluated by slicing, no matrix products.
    """
    r = rho.entries if isinstance(rho, DensityMatrix) else np.asarray(rho)
    dim = r.shape[0]
    levels = np.arange(dim, dtype=float)
    sq = np.sqrt(levels)
    aad = levels + 1.0
    aad[-1] = 0.0
    out = levels[:, None] * r + r * aad[None, :]
    out[:-1, :-1] -= np.outer(sq[1:], sq[1:]) * r[1:, 1:]
    out[1:, 1:] -= np.outer(sq[1:], sq[1:]) * r[:-1, :-1]
    return -kappa * out


def _rhs_populations(p: np.ndarray, kappa: float) -> np.ndarray:
    dim = len(p)
    levels = np.arange(dim, dtype=float)
    aad = levels + 1.0
    aad[-1] = 0.0
    out = (levels + aad) * p
    out[:-1] -= levels[1:] * p[1:]
    out[1:] -= levels[1:] * p[:-1]
    return -kappa * out


def default_ode_step(kappa: float, dim: int, max_kappa_step: float = 0.01) -> float:
    """Largest step with ``kappa*step <= max_kappa_step`` inside the RK4 stability region.

    The generator's spectral radius is bounded by ``kappa (4 dim - 2)``
    (Gershgorin on the population block).
    """
    return min(max_kappa_step, RK4_STABILITY / (4 * dim - 2)) / kappa


def _rk4(f, y, h, steps):
    for _ in range(steps):
        k1 = f(y)
        k2 = f(y + 0.5 * h * k1)
        k3 = f(y + 0.5 * h * k2)
        k4 = f(y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return y


def evolve_ode_grid(
    rho0: DensityMatrix,
    kappa: float,
    times: Sequence[float],
    step: Optional[float] = None,
    deficit_target: float = DEFAULT_DEFICIT_TARGET,
    margin: int = DEFAULT_MARGIN,
) -> list[DensityMatrix]:
    """RK4 solutions at each of the ascending ``times``, integrating from t = 0."""
    times = [float(t) for t in times]
    if any(t < 0 for t in times) or any(b < a for a, b in zip(times, times[1:])):
        raise ValueError("times must be nonnegative and ascending")
    if not times:
        return []
    if kappa == 0.0 or times[-1] == 0.0:
        return [rho0 for _ in times]
    if step is None:
        step = default_ode_step(kappa, rho0.dim)
    if not step > 0.0:
        raise ValueError(f"ODE step must be > 0, got {step!r}")
    plan_channel(rho0, ChannelConfig(kappa, times[-1], None, deficit_target, margin))

    diagonal = rho0.is_diagonal()
    if diagonal:
        y = rho0.diagonal

        def f(v):
            return _rhs_populations(v, kappa)
    else:
        y = np.array(rho0.entries)

        def f(v):
            return master_equation_rhs(v, kappa)

    trace0 = rho0.trace
    out = []
    t_now = 0.0
    for t in times:
        span = t - t_now
        if span > 0.0:
            steps = max(1, math.ceil(span / step - 1e-9))
            y = _rk4(f, y, span / steps, steps)
            t_now = t
        tr = float(y.sum() if diagonal else np.trace(y).real)
        peak = float(np.abs(y).max())
        if not np.isfinite(peak) or abs(tr - trace0) > 1e-3 or peak > 1.0 + 1e-3:
            raise IntegrationError(
                f"RK4 unstable at t = {t:g}: trace drift {tr - trace0:.3e}, "
                f"max |rho_ij| = {peak:.3e}; reduce the step (kappa*step = {kappa * step:.3g})"
            )
        mat = np.diag(y) if diagonal else 0.5 * (y + y.conj().T)
        out.append(validate_density(mat, CHANNEL_POLICY, rho0.space))
    return out


def evolve_ode(rho0: DensityMatrix, cfg: ChannelConfig, step: Optional[float] = None) -> DensityMatrix:
    """Fixed-step RK4 solution of the master equation at ``cfg.t``."""
    if cfg.t == 0.0:
        return rho0
    return evolve_ode_grid(rho0, cfg.kappa, [cfg.t], step, cfg.deficit_target, cfg.margin)[0]


# --- closed form ------------------------------------------------------------------


def evolved_nbs_diagonal(p: NbsParams, cfg: ChannelConfig, n_max: int) -> np.ndarray:
    """Photon-number distribution of the evolved negative binomial state, n = 0 .. n_max."""
    ev = EvolvedNbsParams.from_params(p, cfg.kappa_t)
    l = np.arange(p.s + 1)
    # -F > 0 for 0 < gamma < 1
    coeffs = ev.C * np.exp(log_binomial(p.s, l) - gammaln(l + 1) + l * math.log(-ev.F))
    return normal_ordered_diagonal(coeffs, ev.base, n_max)


def evolved_nbs_tail(p: NbsParams, cfg: ChannelConfig, start: int) -> float:
    return _summed_tail(lambda n_max: evolved_nbs_diagonal(p, cfg, n_max), start)


def evolved_nbs_n_max(p: NbsParams, cfg: ChannelConfig, eps: float = 1e-16) -> int:
    """Smallest n_max whose neglected tail is at most ``eps``."""
    return required_dim(lambda d: evolved_nbs_tail(p, cfg, d), eps) - 1


def evolved_mean_photon(p: NbsParams, cfg: ChannelConfig) -> float:
    return cfg.kappa_t + p.mean


# --- sweeps -----------------------------------------------------------------------

METHODS = ("kraus", "ode", "analytic")


@dataclass(frozen=True)
class EvolutionResult:
    t: float
    method: str
    mean: float
    trace: float
    trace_deficit: float
    distribution: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class CurveRow:
    t: float
    mean: float
    trace: float
    trace_deficit: float


def plan_dim(
    spec: StateSpec,
    kappa_t: float,
    deficit_target: float = DEFAULT_DEFICIT_TARGET,
    margin: int = DEFAULT_MARGIN,
) -> int:
    """Fock dimension for evolving ``spec`` up to ``kappa_t``.

    Starts from ``ceil(4 * final_mean + 40)`` and grows it to satisfy the
    truncation-edge policy: the initial support edge plus the automatic Kraus
    cutoff plus ``margin``.
    """
    base = math.ceil(4.0 * (spec.mean + kappa_t) + 40.0)
    eps = deficit_target * 1e-2
    edge = required_dim(spec.tail, eps) - 1
    cutoff = auto_state_cutoff(spec.distribution(edge), kappa_t, deficit_target)
    return max(base, edge + cutoff + margin + 1)


def analytic_distribution(spec: StateSpec, kappa_t: float, n_max: int) -> np.ndarray:
    if spec.kind in ("nbs", "chaotic"):
        p = NbsParams(spec.s or 0, spec.gamma)
        return evolved_nbs_diagonal(p, ChannelConfig(1.0, kappa_t), n_max)
    if spec.kind == "number":
        return lwcs_distribution(LwcsParams.from_kappa_t(spec.l, kappa_t), n_max)
    raise ValueError(
        "analytic method is only available for states nbs, chaotic and number, not lwcs"
    )


def _analytic_n_max(spec: StateSpec, kappa_t: float, eps: float) -> int:
    def tail(d):
        return _summed_tail(lambda n: analytic_distribution(spec, kappa_t, n), d)

    return required_dim(tail, eps) - 1


def evolve_spec(
    spec: StateSpec,
    kappa: float,
    times: Sequence[float],
    method: str,
    dim: Optional[int] = None,
    deficit_target: float = DEFAULT_DEFICIT_TARGET,
    step: Optional[float] = None,
    min_levels: int = 0,
) -> list[EvolutionResult]:
    """Evolve a named state to each time with one method.

    ``distribution`` in each result is the full diagonal: length ``dim`` for
    the numerical methods; for ``analytic``, long enough that the neglected
    tail is below ``1e-6 * deficit_target`` and at least ``min_levels``.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    times = [float(t) for t in times]
    if not times:
        return []
    if any(t < 0 for t in times) or any(b < a for a, b in zip(times, times[1:])):
        raise ValueError("times must be nonnegative and ascending")
    if not kappa >= 0.0:
        raise ValueError(f"kappa must be >= 0, got {kappa!r}")

    if method == "analytic":
        out = []
        for t in times:
            q = kappa * t
            n_max = max(_analytic_n_max(spec, q, deficit_target * 1e-6), min_levels - 1)
            dist = analytic_distribution(spec, q, n_max)
            trace = math.fsum(dist)
            out.append(EvolutionResult(t, method, spec.mean + q, trace, 1.0 - trace, dist))
        return out

    if dim is None:
        dim = plan_dim(spec, kappa * times[-1], deficit_target)
    rho0 = spec.build(FockSpace(dim))
    if method == "kraus":
        states = [apply_channel_kraus(rho0, ChannelConfig(kappa, t, None, deficit_target)) for t in times]
    else:
        states = evolve_ode_grid(rho0, kappa, times, step, deficit_target)
    return [
        EvolutionResult(t, method, mean_photon(r), r.trace, r.trace_deficit, r.diagonal)
        for t, r in zip(times, states)
    ]


def mean_curve(
    p: NbsParams,
    kappa: float,
    t_grid: Sequence[float],
    method: str,
    dim: Optional[int] = None,
    deficit_target: float = DEFAULT_DEFICIT_TARGET,
) -> list[CurveRow]:
    """(t, mean, trace, trace_deficit) rows for an initial negative binomial state."""
    spec = StateSpec("nbs", s=p.s, gamma=p.gamma)
    return [
        CurveRow(r.t, r.mean, r.trace, r.trace_deficit)
        for r in evolve_spec(spec, kappa, t_grid, method, dim, deficit_target)
    ]
