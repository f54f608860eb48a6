"""Laguerre polynomials, log-space combinatorics and numerical identity checks."""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
from scipy import integrate
from scipy.special import gammaln

_EXACT_LOGFACT_MAX = 1000


def log_factorial(n: int) -> float:
    """ln(n!).

    Exact up to final rounding for n <= 1000 (log of the integer factorial),
    ``lgamma`` beyond that.
    """
    if n < 0:
        raise ValueError(f"log_factorial needs n >= 0, got {n}")
    if n <= _EXACT_LOGFACT_MAX:
        return math.log(math.factorial(n))
    return math.lgamma(n + 1.0)


def log_binomial(n, k):
    """ln C(n, k), vectorized over numpy arrays."""
    n = np.asarray(n, dtype=float)
    k = np.asarray(k, dtype=float)
    return gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)


def binomial(n, k):
    return np.exp(log_binomial(n, k))


def laguerre_sequence(n_max: int, x) -> np.ndarray:
    """``[L_0(x), ..., L_{n_max}(x)]`` via the three-term recurrence.

    ``x`` may be an array; the result then has shape ``(n_max + 1,) + x.shape``.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty((n_max + 1,) + x.shape)
    out[0] = 1.0
    if n_max >= 1:
        out[1] = 1.0 - x
    for k in range(1, n_max):
        out[k + 1] = ((2 * k + 1 - x) * out[k] - k * out[k - 1]) / (k + 1)
    return out


def laguerre(s: int, x):
    """L_s(x) by the recurrence (k+1) L_{k+1} = (2k+1-x) L_k - k L_{k-1}."""
    if s < 0:
        raise ValueError(f"Laguerre order must be >= 0, got {s}")
    val = laguerre_sequence(s, x)[s]
    return float(val) if np.ndim(val) == 0 else val


def laguerre_explicit(s: int, x: float) -> float:
    """L_s(x) from the finite power sum, evaluated in exact rational arithmetic.

    The float version of this alternating sum loses everything for large x,
    so the binary value of ``x`` is converted exactly and rounded once at the
    end. Used as an independent oracle for :func:`laguerre`.
    """
    xf = Fraction(x)
    total = sum(
        Fraction(math.comb(s, l), math.factorial(l)) * (-xf) ** l for l in range(s + 1)
    )
    return float(total)


def check_negative_binomial_sum(n: int, x: float, terms: int) -> float:
    """|sum_{m=0}^{terms} C(m+n, m) (-x)^m - (1+x)^(-n-1)|."""
    if not 0.0 <= x < 1.0:
        raise ValueError(f"negative binomial series needs 0 <= x < 1, got {x}")
    # exact integer binomials keep each term within a couple of ulps
    partial = math.fsum(math.comb(m + n, m) * (-x) ** m for m in range(terms + 1))
    return abs(partial - (1.0 + x) ** (-n - 1))


def check_generating_function(s: int, lam: float, z: float, terms: int) -> float:
    """Residual of the Laguerre generating function summed to ``terms``.

    Compares sum_n C(n+s, n) (-lam)^n L_{n+s}(z) against
    (1+lam)^(-s-1) exp(lam z/(1+lam)) L_s(z/(1+lam)).
    """
    if abs(lam) >= 1.0:
        raise ValueError(f"generating function needs |lambda| < 1, got {lam}")
    lag = laguerre_sequence(terms + s, z)[s:]
    partial = math.fsum(
        math.comb(n + s, n) * (-lam) ** n * float(lag[n]) for n in range(terms + 1)
    )
    closed = (
        (1.0 + lam) ** (-s - 1)
        * math.exp(lam * z / (1.0 + lam))
        * laguerre(s, z / (1.0 + lam))
    )
    return abs(partial - closed)


def _laguerre_tail_bound(l: int, b: float, cutoff: float) -> float:
    """Upper bound on int_cutoff^inf e^{-bx} |L_l(x)| dx for x >= 0.

    Uses |L_l(x)| <= sum_k C(l,k) x^k / k! and the incomplete gamma sum
    int_X^inf x^k e^{-bx} dx = e^{-bX} sum_{j<=k} k!/j! X^j / b^{k-j+1}.
    """
    total = 0.0
    for k in range(l + 1):
        inc = sum(
            math.factorial(k) / math.factorial(j) * cutoff**j / b ** (k - j + 1)
            for j in range(k + 1)
        )
        total += math.comb(l, k) / math.factorial(k) * inc
    return math.exp(-b * cutoff) * total


def check_laguerre_integral(l: int, b: float, tail_target: float = 1e-13) -> float:
    """|int_0^inf e^{-bx} L_l(x) dx - (b-1)^l b^(-l-1)| by adaptive quadrature.

    The upper limit is doubled until the analytic tail bound drops below
    ``tail_target``; the finite interval is split into width-4 panels so ``quad``
    resolves the polynomial oscillations.
    """
    if b <= 0.5:
        raise ValueError(f"Laguerre integral check needs b > 0.5, got {b}")
    cutoff = 8.0
    while _laguerre_tail_bound(l, b, cutoff) >= tail_target:
        cutoff *= 2.0

    def integrand(x):
        return math.exp(-b * x) * laguerre(l, x)

    edges = np.linspace(0.0, cutoff, int(math.ceil(cutoff / 4.0)) + 1)
    pieces = [
        integrate.quad(integrand, lo, hi, epsabs=1e-14, epsrel=1e-12, limit=200)[0]
        for lo, hi in zip(edges[:-1], edges[1:])
    ]
    closed = (b - 1.0) ** l * b ** (-l - 1)
    return abs(math.fsum(pieces) - closed)
