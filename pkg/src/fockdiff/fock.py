"""Truncated single-mode Fock space: ladder operators, density matrices, expectations.

All matrices are dense ``numpy`` arrays. Levels are indexed ``0 .. dim-1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np


class DensityError(ValueError):
    """A matrix failed one of the density-matrix invariants.

    ``invariant`` is one of ``"shape"``, ``"hermiticity"``, ``"trace"`` or
    ``"positivity"``; ``magnitude`` is the measured size of the violation
    (max anti-Hermitian entry, trace deficit, or minimum eigenvalue).
    """

    def __init__(self, invariant: str, magnitude: float, message: str):
        super().__init__(message)
        self.invariant = invariant
        self.magnitude = magnitude


@dataclass(frozen=True)
class FockSpace:
    dim: int

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 2:
            raise ValueError(f"FockSpace requires integer dim >= 2, got {self.dim!r}")
        object.__setattr__(self, "dim", int(self.dim))

    @property
    def levels(self) -> np.ndarray:
        return np.arange(self.dim)


def _frozen(entries) -> np.ndarray:
    arr = np.array(entries, dtype=complex)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Operator:
    space: FockSpace
    entries: np.ndarray

    def __post_init__(self):
        arr = _frozen(self.entries)
        if arr.shape != (self.space.dim, self.space.dim):
            raise ValueError(
                f"operator shape {arr.shape} does not match dim {self.space.dim}"
            )
        object.__setattr__(self, "entries", arr)

    def dag(self) -> "Operator":
        return Operator(self.space, self.entries.conj().T)

    def __matmul__(self, other: "Operator") -> "Operator":
        _check_same_space(self.space, other.space)
        return Operator(self.space, self.entries @ other.entries)

    def __add__(self, other: "Operator") -> "Operator":
        _check_same_space(self.space, other.space)
        return Operator(self.space, self.entries + other.entries)

    def __sub__(self, other: "Operator") -> "Operator":
        _check_same_space(self.space, other.space)
        return Operator(self.space, self.entries - other.entries)

    def __mul__(self, scalar) -> "Operator":
        return Operator(self.space, self.entries * scalar)

    __rmul__ = __mul__


@dataclass(frozen=True)
class TracePolicy:
    """Tolerances used by :func:`validate_density`.

    ``mode="strict"`` demands ``|Tr - 1| <= trace_tol``. ``mode="deficit"`` is
    meant for truncated states and channel outputs: the trace may fall short
    of one by at most ``max_deficit`` (and exceed it by at most ``trace_tol``),
    and the shortfall is recorded on the result.
    """

    mode: str = "strict"
    trace_tol: float = 1e-8
    max_deficit: float = 1e-6
    herm_tol: float = 1e-12
    psd_tol: float = -1e-10

    def __post_init__(self):
        if self.mode not in ("strict", "deficit"):
            raise ValueError(f"unknown trace policy mode {self.mode!r}")


STRICT = TracePolicy()
DEFICIT = TracePolicy(mode="deficit")


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Validated density matrix on a truncated Fock space.

    Build these through :func:`validate_density` (or the state constructors);
    the bare constructor does not check invariants. ``trace_deficit`` is the
    probability mass missing from the truncated space. Constructors that know
    the analytic tail set it explicitly, otherwise it is ``1 - Tr``.
    """

    space: FockSpace
    entries: np.ndarray
    trace_deficit: float = field(default=None)

    def __post_init__(self):
        arr = _frozen(self.entries)
        if arr.shape != (self.space.dim, self.space.dim):
            raise ValueError(
                f"density shape {arr.shape} does not match dim {self.space.dim}"
            )
        object.__setattr__(self, "entries", arr)
        if self.trace_deficit is None:
            object.__setattr__(self, "trace_deficit", 1.0 - self.trace)

    @property
    def dim(self) -> int:
        return self.space.dim

    @property
    def trace(self) -> float:
        return float(np.trace(self.entries).real)

    @property
    def diagonal(self) -> np.ndarray:
        return self.entries.diagonal().real.copy()

    def is_diagonal(self) -> bool:
        off = self.entries - np.diag(self.entries.diagonal())
        return not np.any(off)

    def max_offdiagonal(self) -> float:
        off = self.entries - np.diag(self.entries.diagonal())
        return float(np.abs(off).max())

    def min_eigenvalue(self) -> float:
        if self.is_diagonal():
            return float(self.entries.diagonal().real.min())
        return float(np.linalg.eigvalsh(self.entries).min())


def _check_same_space(a: FockSpace, b: FockSpace):
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")


def ladder_ops(space: FockSpace) -> tuple[Operator, Operator]:
    """Return ``(a, a_dag)`` with ``<n-1|a|n> = sqrt(n)``."""
    a = np.diag(np.sqrt(np.arange(1, space.dim, dtype=float)), k=1)
    return Operator(space, a), Operator(space, a.T)


def number_op(space: FockSpace) -> Operator:
    return Operator(space, np.diag(np.arange(space.dim, dtype=float)))


def identity(space: FockSpace) -> Operator:
    return Operator(space, np.eye(space.dim))


def expectation(rho: DensityMatrix, obs: Operator) -> complex:
    """``Tr(rho @ obs)``."""
    _check_same_space(rho.space, obs.space)
    # Tr(AB) = sum_ij A_ij B_ji without forming the product
    return complex(np.einsum("ij,ji->", rho.entries, obs.entries))


def mean_photon(rho: DensityMatrix) -> float:
    return float(np.dot(rho.space.levels, rho.entries.diagonal().real))


def validate_density(
    matrix,
    policy: TracePolicy = STRICT,
    space: Optional[FockSpace] = None,
    trace_deficit: Optional[float] = None,
) -> DensityMatrix:
    """Check hermiticity, positivity and trace (in that order); return a :class:`DensityMatrix`.

    Raises :class:`DensityError` naming the first violated invariant.
    ``trace_deficit`` overrides the recorded deficit (for analytic tails that
    are far below the floating point resolution of ``1 - Tr``).
    """
    arr = np.asarray(matrix, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DensityError("shape", float("nan"), f"matrix is not square: {arr.shape}")
    if space is None:
        space = FockSpace(arr.shape[0])
    elif space.dim != arr.shape[0]:
        raise DensityError(
            "shape", float("nan"), f"matrix dim {arr.shape[0]} != space dim {space.dim}"
        )

    herm = float(np.abs(arr - arr.conj().T).max())
    if herm > policy.herm_tol:
        raise DensityError(
            "hermiticity", herm, f"hermiticity violated: max |rho - rho^dag| = {herm:.3e}"
        )

    off = arr - np.diag(arr.diagonal())
    if not np.any(off):
        min_eig = float(arr.diagonal().real.min())
    else:
        min_eig = float(np.linalg.eigvalsh(arr).min())
    if min_eig < policy.psd_tol:
        raise DensityError(
            "positivity", min_eig, f"positivity violated: min eigenvalue {min_eig:.3e}"
        )

    tr = float(np.trace(arr).real)
    deficit = 1.0 - tr
    if policy.mode == "strict":
        if abs(deficit) > policy.trace_tol:
            raise DensityError(
                "trace", deficit, f"trace violated: Tr = {tr:.12g}, deficit {deficit:.3e}"
            )
    elif deficit > policy.max_deficit or deficit < -policy.trace_tol:
        raise DensityError(
            "trace",
            deficit,
            f"trace deficit {deficit:.3e} outside [-{policy.trace_tol:g}, {policy.max_deficit:g}]",
        )

    return DensityMatrix(space, arr, deficit if trace_deficit is None else trace_deficit)


class TruncationError(ValueError):
    """The truncated space is too small for the requested state or evolution.

    ``required_dim`` is the smallest dimension that would satisfy the
    truncation policy.
    """

    def __init__(self, message: str, required_dim: int):
        super().__init__(f"{message}; recommended dim >= {required_dim}")
        self.required_dim = required_dim
