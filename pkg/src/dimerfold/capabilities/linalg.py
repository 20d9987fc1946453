"""
Numerical kernels: Pfaffians, inverses, rank-2 inverse updates and the
det(I + c alpha A)^(1/2) series.

Pfaffians are returned with a separately tracked log-magnitude and phase,
since raw values overflow quickly on Kasteleyn matrices of a few hundred rows.
The Householder tridiagonalization and the Parlett-Reid elimination with
pivoting follow the algorithms of pfapack (M. Wimmer, "Efficient numerical
computation of the Pfaffian for dense and banded skew-symmetric matrices",
ACM Trans. Math. Softw. 38, 2012), reimplemented here on numpy.

Version: 0.1.0
"""

from __future__ import annotations

import cmath
import math
from collections.abc import Iterator, Sequence
from dataclasses import dataclass
from enum import Enum
from typing import Any

import numpy as np

from dimerfold.core.config import get_config
from dimerfold.core.exceptions import (
    NotSkewError,
    OddDimensionError,
    SeriesDivergenceError,
    SingularMatrixError,
)
from dimerfold.core.logging import get_logger
from dimerfold.domain.kasteleyn import SkewMatrix

logger = get_logger(__name__)

SKEW_TOL = 1e-12
PAIRING_ORACLE_MAX = 12


class PfaffianMethod(str, Enum):
    HOUSEHOLDER = "householder"
    PARLETT_REID = "parlett-reid"
    PAIRINGS = "pairings"


@dataclass(frozen=True)
class PfaffianResult:
    """Pf(M) as phase * exp(log_abs); ``log_abs`` is -inf for a zero Pfaffian."""

    log_abs: float
    phase: complex
    method: PfaffianMethod

    @property
    def value(self) -> complex:
        if self.log_abs == -math.inf:
            return 0j
        return self.phase * math.exp(self.log_abs)

    def __truediv__(self, other: PfaffianResult) -> complex:
        if other.log_abs == -math.inf:
            raise ZeroDivisionError("Pfaffian ratio with zero denominator")
        if self.log_abs == -math.inf:
            return 0j
        return self.phase / other.phase * math.exp(self.log_abs - other.log_abs)


class _Accumulator:
    """Running product kept as log-magnitude plus unit phase."""

    def __init__(self) -> None:
        self.log_abs = 0.0
        self.phase = 1.0 + 0j

    def mul(self, factor: complex) -> None:
        size = abs(factor)
        if size == 0:
            self.log_abs = -math.inf
            return
        self.log_abs += math.log(size)
        self.phase *= factor / size

    def result(self, method: PfaffianMethod) -> PfaffianResult:
        phase = self.phase / abs(self.phase) if self.log_abs != -math.inf else 1.0 + 0j
        return PfaffianResult(self.log_abs, phase, method)


def _as_array(M: SkewMatrix | np.ndarray) -> np.ndarray:
    data = M.data if isinstance(M, SkewMatrix) else np.asarray(M)
    return np.array(data, dtype=complex)


def _check_skew(A: np.ndarray, tol: float) -> None:
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise NotSkewError(math.inf, {"shape": A.shape})
    deviation = float(np.abs(A + A.T).max()) if A.size else 0.0
    if deviation > tol * max(1.0, float(np.abs(A).max()) if A.size else 1.0):
        raise NotSkewError(deviation)
    if A.shape[0] % 2:
        raise OddDimensionError(A.shape[0])


# =============================================================================
# Pfaffian algorithms
# =============================================================================


def _householder_vector(x: np.ndarray) -> tuple[np.ndarray, float, complex]:
    """(v, tau, alpha) with (I - tau v v^H) x = alpha e_1."""
    sigma = np.vdot(x[1:], x[1:]).real
    if sigma == 0:
        return np.zeros_like(x), 0.0, complex(x[0])
    norm_x = math.sqrt(abs(x[0]) ** 2 + sigma)
    phase = cmath.exp(1j * cmath.phase(x[0]))
    v = x.copy()
    v[0] += phase * norm_x
    v /= np.linalg.norm(v)
    return v, 2.0, -phase * norm_x


def _pfaffian_householder(A: np.ndarray) -> PfaffianResult:
    n = A.shape[0]
    acc = _Accumulator()
    for i in range(n - 2):
        v, tau, alpha = _householder_vector(A[i + 1 :, i])
        A[i + 1, i] = alpha
        A[i, i + 1] = -alpha
        A[i + 2 :, i] = 0
        A[i, i + 2 :] = 0
        w = tau * (A[i + 1 :, i + 1 :] @ v.conj())
        A[i + 1 :, i + 1 :] += np.outer(v, w) - np.outer(w, v)
        if tau != 0:
            acc.mul(1 - tau)
        if i % 2 == 0:
            acc.mul(-alpha)
    acc.mul(A[n - 2, n - 1])
    return acc.result(PfaffianMethod.HOUSEHOLDER)


def _pfaffian_parlett_reid(A: np.ndarray) -> PfaffianResult:
    n = A.shape[0]
    acc = _Accumulator()
    for k in range(0, n - 1, 2):
        kp = k + 1 + int(np.abs(A[k + 1 :, k]).argmax())
        if kp != k + 1:
            A[[k + 1, kp], k:] = A[[kp, k + 1], k:]
            A[k:, [k + 1, kp]] = A[k:, [kp, k + 1]]
            acc.mul(-1)
        if A[k + 1, k] == 0:
            acc.mul(0)
            break
        tau = A[k, k + 2 :] / A[k, k + 1]
        acc.mul(A[k, k + 1])
        if k + 2 < n:
            A[k + 2 :, k + 2 :] += np.outer(tau, A[k + 2 :, k + 1])
            A[k + 2 :, k + 2 :] -= np.outer(A[k + 2 :, k + 1], tau)
    return acc.result(PfaffianMethod.PARLETT_REID)


def all_pairings(items: Sequence[int]) -> Iterator[list[tuple[int, int]]]:
    """All perfect pairings of ``items``, first item always paired first."""
    items = list(items)
    if not items:
        yield []
        return
    first = items.pop(0)
    for i, item in enumerate(items):
        for rest in all_pairings(items[:i] + items[i + 1 :]):
            yield [(first, item), *rest]


def chord_crossings(pairs: Sequence[tuple[int, int]]) -> int:
    """Crossings of chords drawn inside a disc with endpoints at positions."""
    chords = [tuple(sorted(p)) for p in pairs]
    count = 0
    for k, (a, b) in enumerate(chords):
        for c, d in chords[k + 1 :]:
            if a < c < b < d or c < a < d < b:
                count += 1
    return count


def _pfaffian_pairings(A: np.ndarray) -> PfaffianResult:
    n = A.shape[0]
    if n > PAIRING_ORACLE_MAX:
        raise ValueError(f"pairing oracle limited to dimension {PAIRING_ORACLE_MAX}")
    total = 0j
    for pairing in all_pairings(range(n)):
        term = -1.0 if chord_crossings(pairing) % 2 else 1.0
        for i, j in pairing:
            term *= A[i, j]
        total += term
    acc = _Accumulator()
    acc.mul(total)
    return acc.result(PfaffianMethod.PAIRINGS)


_METHODS = {
    PfaffianMethod.HOUSEHOLDER: _pfaffian_householder,
    PfaffianMethod.PARLETT_REID: _pfaffian_parlett_reid,
    PfaffianMethod.PAIRINGS: _pfaffian_pairings,
}


def pfaffian(
    M: SkewMatrix | np.ndarray,
    method: PfaffianMethod | str | None = None,
    tol: float = SKEW_TOL,
) -> PfaffianResult:
    """Pfaffian of a complex skew matrix.

    Args:
        M: skew matrix (SkewMatrix or ndarray).
        method: householder tridiagonalization, pivoted
            Parlett-Reid, or the signed sum over pairings (dimension <= 12);
            ``None`` takes ``linalg.pfaffian_method`` from the settings.
        tol: relative skewness tolerance.

    Raises:
        NotSkewError: M + M^T is not negligible.
        OddDimensionError: odd dimension (the Pfaffian would be 0).

    Example:
        >>> pfaffian(np.array([[0, 3], [-3, 0]])).value
        (3+0j)
    """
    A = _as_array(M)
    _check_skew(A, tol)
    method = PfaffianMethod(method or get_config().linalg.pfaffian_method)
    if A.shape[0] == 0:
        return PfaffianResult(0.0, 1.0 + 0j, method)
    return _METHODS[method](A)


def pfaffian_ratio(
    numerator: SkewMatrix | np.ndarray,
    denominator: SkewMatrix | np.ndarray,
    method: PfaffianMethod | str | None = None,
) -> complex:
    """Pf(numerator) / Pf(denominator) through log-magnitude differences."""
    return pfaffian(numerator, method) / pfaffian(denominator, method)


# =============================================================================
# Inverses
# =============================================================================


def invert(M: SkewMatrix | np.ndarray, condition_limit: float = 1e12) -> np.ndarray:
    """Dense inverse with a condition-number guard.

    Raises:
        SingularMatrixError: condition estimate above ``condition_limit``.
    """
    A = _as_array(M)
    condition = float(np.linalg.cond(A)) if A.size else 1.0
    if not math.isfinite(condition) or condition > condition_limit:
        raise SingularMatrixError(condition)
    return np.linalg.inv(A)


def rank2_update(
    inverse: np.ndarray,
    rows: Sequence[int],
    cols: Sequence[int],
    condition_limit: float = 1e12,
) -> np.ndarray:
    """Inverse of M with ``rows`` and ``cols`` deleted, from N = M^-1.

    The result is indexed like ``M[keep_rows][:, keep_cols]^-1``: its rows
    follow the kept columns of M, its columns the kept rows, each in their
    original order.

    Raises:
        SingularMatrixError: the deleted block of N is singular, i.e. the
            reduced matrix is not invertible.
    """
    n = inverse.shape[0]
    rows = list(rows)
    cols = list(cols)
    keep_rows = np.setdiff1d(np.arange(n), rows)
    keep_cols = np.setdiff1d(np.arange(n), cols)
    pivot = inverse[np.ix_(cols, rows)]
    condition = float(np.linalg.cond(pivot))
    if not math.isfinite(condition) or condition > condition_limit:
        raise SingularMatrixError(condition, "deleted block of the inverse is singular")
    correction = inverse[np.ix_(keep_cols, rows)] @ np.linalg.solve(
        pivot, inverse[np.ix_(cols, keep_rows)]
    )
    return inverse[np.ix_(keep_cols, keep_rows)] - correction


# =============================================================================
# Trace series
# =============================================================================


def power_traces(A: np.ndarray, n_max: int) -> np.ndarray:
    """tr(A^n) for n = 1..n_max by repeated multiplication."""
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    traces = np.empty(n_max, dtype=complex)
    power = np.array(A, dtype=complex)
    for k in range(n_max):
        traces[k] = np.trace(power)
        if k + 1 < n_max:
            power = power @ A
    return traces


def faddeev_leverrier_traces(A: np.ndarray, n_max: int) -> np.ndarray:
    """tr(A^n) from characteristic-polynomial coefficients and Newton's identities."""
    n = A.shape[0]
    coeffs = [1.0 + 0j]
    M = np.zeros_like(A, dtype=complex)
    identity = np.eye(n, dtype=complex)
    for k in range(1, n + 1):
        M = A @ M + coeffs[-1] * identity
        coeffs.append(-np.trace(A @ M) / k)

    sums: list[complex] = []
    for k in range(1, n_max + 1):
        value = -k * coeffs[k] if k <= n else 0j
        for i in range(1, min(k - 1, n) + 1):
            value -= coeffs[i] * sums[k - i - 1]
        sums.append(value)
    return np.array(sums, dtype=complex)


@dataclass(frozen=True)
class DetRatioSeries:
    """Traces of A and the evaluator for det(I + c alpha A)^(1/2).

    Attributes:
        traces: T_1..T_n_max with T_n = tr(A^n).
        c: scale of alpha.
        eigenvalues: spectrum of A.
        spectral_radius: max |eigenvalue|.
    """

    traces: np.ndarray
    c: float
    eigenvalues: np.ndarray
    spectral_radius: float

    @property
    def radius_of_convergence(self) -> float:
        if self.spectral_radius == 0:
            return math.inf
        return 1.0 / (self.c * self.spectral_radius)

    def _check(self, alpha: float) -> None:
        if abs(alpha) >= self.radius_of_convergence * (1 + 1e-9):
            raise SeriesDivergenceError(alpha, self.spectral_radius)

    def evaluate(self, alpha: float) -> complex:
        """det(I + c alpha A)^(1/2), branch continuous from 1 at alpha = 0.

        Every factor 1 + c alpha lambda has positive real part inside the
        radius of convergence, so the principal square root of each factor
        gives the continuous branch.
        """
        self._check(alpha)
        factors = 1 + self.c * alpha * self.eigenvalues
        return complex(np.prod(np.sqrt(factors)))

    def truncated(self, alpha: float) -> complex:
        """exp(1/2 sum_k (-1)^(k-1) (c alpha)^k T_k / k) over the stored traces."""
        self._check(alpha)
        x = self.c * alpha
        k = np.arange(1, len(self.traces) + 1)
        log_det = np.sum((-1.0) ** (k - 1) * x**k * self.traces / k)
        return complex(np.exp(0.5 * log_det))


def det_ratio_series(
    A: np.ndarray, n_max: int, c: float = 2.0, alpha_max: float | None = None
) -> DetRatioSeries:
    """Build the det-ratio series of A = S K^-1.

    Raises:
        SeriesDivergenceError: ``alpha_max`` lies outside the radius of
            convergence.
    """
    A = np.asarray(A, dtype=complex)
    eigenvalues = np.linalg.eigvals(A) if A.size else np.zeros(0, dtype=complex)
    radius = float(np.abs(eigenvalues).max()) if eigenvalues.size else 0.0
    series = DetRatioSeries(
        traces=power_traces(A, n_max),
        c=c,
        eigenvalues=eigenvalues,
        spectral_radius=radius,
    )
    if alpha_max is not None:
        series._check(alpha_max)
    logger.debug("det_ratio_series", dimension=A.shape[0], spectral_radius=radius)
    return series


def describe(M: SkewMatrix | np.ndarray) -> dict[str, Any]:
    """Size and conditioning summary used in reports."""
    A = _as_array(M)
    return {
        "dimension": int(A.shape[0]),
        "nonzeros": int(np.count_nonzero(A)),
        "condition": float(np.linalg.cond(A)) if A.size else 1.0,
    }
