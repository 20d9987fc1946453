"""
Continuum reference quantities.

Green's-kernel derivatives F_+ and F_-, the iterated path integrals c_n,
complete Bell polynomials and the limit moments built from them, the strip
closed forms, and a numerical check of the inverse Kasteleyn asymptotics.

The n-fold c_n integral is a cyclic product along the path, so after
discretizing the path with Gauss-Legendre nodes it becomes 2 i^n tr(A^n) for
one operator A acting on (sign, node) pairs.

Version: 0.1.0
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu
from scipy.special import comb, roots_legendre

from dimerfold.core.config import get_config
from dimerfold.core.exceptions import (
    DomainError,
    NumericalError,
    QuadratureError,
    SingularMatrixError,
)
from dimerfold.core.logging import get_logger
from dimerfold.core.models import Model
from dimerfold.domain.kasteleyn import assemble_sparse_model, build_folded_graph, complex_phases
from dimerfold.domain.lattice import (
    GraphVariant,
    Point,
    TemperleyanGraph,
    VertexClass,
    restrict_upper,
)

logger = get_logger(__name__)

ComplexFn = Callable[[complex, complex], complex]

_SINGULAR_TOL = 1e-14


def _conjugate(w: complex) -> complex:
    return w.conjugate()


# =============================================================================
# Kernels
# =============================================================================


@dataclass(frozen=True)
class GreenKernel:
    """F_+ and F_- of a symmetric domain.

    ``reflect`` is the symmetry of the reflected domain (conjugation when the
    fold axis is the real line); c_n evaluates the first kernel argument at
    the reflected point. ``orientation`` is (-1) when the reflection axis is
    vertical, which flips the sign of every odd c_n.
    """

    tag: str
    F_plus: ComplexFn
    F_minus: ComplexFn
    reflect: Callable[[complex], complex] = _conjugate
    orientation: int = 1

    def F(self, sign: int, u: complex, v: complex) -> complex:
        """F_+ for sign = +1, F_- for sign = -1."""
        return self.F_plus(u, v) if sign > 0 else self.F_minus(u, v)


def _check_apart(a: complex, b: complex) -> None:
    if abs(a - b) < _SINGULAR_TOL:
        raise NumericalError(
            "kernel evaluated at its singularity", "KERNEL_SINGULARITY", {"point": str(a)}
        )


def strip_kernel() -> GreenKernel:
    """Kernel of the strip |Im| < pi/2, folded along the real axis."""

    def plus(u: complex, v: complex) -> complex:
        eu, ev = np.exp(u), np.exp(v)
        _check_apart(eu, ev)
        return complex(-eu / (2 * math.pi * (eu - ev)))

    def minus(u: complex, v: complex) -> complex:
        eu, ev = np.exp(u.conjugate()), np.exp(v)
        _check_apart(eu, -ev)
        return complex(eu / (2 * math.pi * (eu + ev)))

    return GreenKernel("strip", plus, minus)


def half_plane_kernel() -> GreenKernel:
    """Kernel of the upper half-plane from g = -(1/2 pi) log((u - v)/(conj(u) - v)).

    The half-plane is symmetric under reflection in the imaginary axis.
    """

    def plus(u: complex, v: complex) -> complex:
        _check_apart(u, v)
        return -1 / (2 * math.pi * (u - v))

    def minus(u: complex, v: complex) -> complex:
        _check_apart(u.conjugate(), v)
        return 1 / (2 * math.pi * (u.conjugate() - v))

    return GreenKernel(
        "half-plane", plus, minus, reflect=lambda w: -w.conjugate(), orientation=-1
    )


def mapped_kernel(
    phi: Callable[[complex], complex],
    dphi: Callable[[complex], complex],
    base: GreenKernel | None = None,
    tag: str = "mapped",
) -> GreenKernel:
    """Pull back ``base`` (default: half-plane) along a conformal map phi.

    F_+(u, v) = F_+^base(phi u, phi v) phi'(u) and
    F_-(u, v) = F_-^base(phi u, phi v) conj(phi'(u)).
    """
    base = base or half_plane_kernel()

    def plus(u: complex, v: complex) -> complex:
        return base.F_plus(phi(u), phi(v)) * dphi(u)

    def minus(u: complex, v: complex) -> complex:
        return base.F_minus(phi(u), phi(v)) * complex(dphi(u)).conjugate()

    return GreenKernel(tag, plus, minus)


def strip_to_half_plane(u: complex) -> complex:
    """i e^u, mapping the strip |Im| < pi/2 onto the upper half-plane."""
    return complex(1j * np.exp(u))


# =============================================================================
# c_n path integrals
# =============================================================================


@dataclass(frozen=True)
class PathNodes:
    points: np.ndarray
    weights: np.ndarray  # weight * dz at each node


def path_nodes(path: Sequence[complex], nodes: int) -> PathNodes:
    """Gauss-Legendre nodes on each segment of a polyline."""
    if len(path) < 2:
        raise ValueError("path needs at least two points")
    t, w = roots_legendre(nodes)
    pts, wts = [], []
    for a, b in zip(path[:-1], path[1:], strict=True):
        half = (b - a) / 2
        pts.append(a + half * (t + 1))
        wts.append(w * half)
    return PathNodes(np.concatenate(pts), np.concatenate(wts))


def cn_operator(kernel: GreenKernel, nodes: PathNodes) -> np.ndarray:
    """Block operator on (sigma, node) with c_n = 2 i^n tr(A^n).

    A[(s', k'), (s, k)] = s F^{(s)}_{-s s'}(reflect(z_k'), z_k) dz_k^{(s)},
    where F^{(-1)} and dz^{(-1)} are complex conjugates.
    """
    m = len(nodes.points)
    A = np.zeros((2 * m, 2 * m), dtype=complex)
    signs = (1, -1)
    reflected = [kernel.reflect(complex(z)) for z in nodes.points]
    for bi, s_next in enumerate(signs):
        for bj, s in enumerate(signs):
            which = -s * s_next
            for kp in range(m):
                for k in range(m):
                    value = kernel.F(which, reflected[kp], complex(nodes.points[k]))
                    dz = complex(nodes.weights[k])
                    if s < 0:
                        value, dz = value.conjugate(), dz.conjugate()
                    A[bi * m + kp, bj * m + k] = s * value * dz
    return A


def _cn_values(A: np.ndarray, n_max: int, orientation: int) -> np.ndarray:
    values = np.empty(n_max, dtype=complex)
    power = np.eye(A.shape[0], dtype=complex)
    for n in range(1, n_max + 1):
        power = power @ A
        values[n - 1] = 2 * (1j**n) * np.trace(power) * orientation**n
    return values


@dataclass(frozen=True)
class CnTable:
    """c_1..c_K with quadrature metadata."""

    values: np.ndarray
    nodes: int
    rule: str
    path: tuple[complex, ...]
    imaginary: np.ndarray
    richardson: np.ndarray

    def __getitem__(self, k: int) -> float:
        """c_k, 1-based."""
        return float(self.values[k - 1])

    def __len__(self) -> int:
        return len(self.values)

    def growth(self) -> np.ndarray:
        """|c_n|^(1/n)."""
        n = np.arange(1, len(self.values) + 1)
        return np.abs(self.values) ** (1 / n)

    def to_dict(self) -> dict[str, Any]:
        return {
            "values": self.values.tolist(),
            "nodes": self.nodes,
            "rule": self.rule,
            "path": [[p.real, p.imag] for p in self.path],
            "imaginary": self.imaginary.tolist(),
            "richardson": self.richardson.tolist(),
        }


def compute_cn(
    kernel: GreenKernel,
    z: complex,
    z_boundary: complex,
    path: Sequence[complex] | None = None,
    n_max: int | None = None,
    nodes: int | None = None,
    tolerance: float | None = None,
) -> CnTable:
    """c_1..c_{n_max} along a polyline from z to z_boundary.

    ``path`` holds intermediate corners only; the straight segment is the
    default. Convergence is checked by doubling the nodes per segment.

    Raises:
        QuadratureError: node doubling changes some c_n by more than the
            tolerance, or a c_n has an imaginary residue above it.
    """
    settings = get_config()
    n_max = n_max or settings.series.n_max
    nodes = nodes or settings.quadrature.nodes
    tolerance = tolerance if tolerance is not None else settings.quadrature.tolerance
    polyline = (complex(z), *(complex(p) for p in path or ()), complex(z_boundary))

    coarse = _cn_values(cn_operator(kernel, path_nodes(polyline, nodes)), n_max, kernel.orientation)
    fine = _cn_values(cn_operator(kernel, path_nodes(polyline, 2 * nodes)), n_max, kernel.orientation)
    change = np.abs(fine - coarse)
    scale = 1 + np.abs(fine)
    if np.any(change > tolerance * scale):
        raise QuadratureError(
            "c_n quadrature did not converge under node doubling",
            {"change": change.tolist(), "nodes": nodes},
        )
    residue = np.abs(fine.imag)
    if np.any(residue > max(tolerance, 1e-9) * scale):
        raise QuadratureError("c_n has an imaginary residue", {"imaginary": residue.tolist()})
    logger.debug("cn_computed", kernel=kernel.tag, n_max=n_max, nodes=2 * nodes)
    return CnTable(
        values=fine.real.copy(),
        nodes=2 * nodes,
        rule="gauss-legendre",
        path=polyline,
        imaginary=fine.imag.copy(),
        richardson=change,
    )


def strip_c1(y: float) -> float:
    return -0.5 + y / math.pi


def strip_c2(y: float) -> float:
    return -math.log(math.sin(y)) / math.pi**2


def strip_cn(y: float, n_max: int | None = None, x: float = 0.0) -> CnTable:
    """c_n on the strip for the vertical path from x + iy to the top boundary."""
    return compute_cn(strip_kernel(), complex(x, y), complex(x, math.pi / 2), n_max=n_max)


def conformal_check(y: float, n_max: int = 4, x: float = 0.0) -> np.ndarray:
    """|c_n(strip) - c_n(half-plane at the image points)| for n <= n_max."""
    z, top = complex(x, y), complex(x, math.pi / 2)
    strip = compute_cn(strip_kernel(), z, top, n_max=n_max)
    image = compute_cn(
        half_plane_kernel(), strip_to_half_plane(z), strip_to_half_plane(top), n_max=n_max
    )
    return np.abs(strip.values - image.values)


# =============================================================================
# Bell polynomials and limit moments
# =============================================================================


def bell_polynomial(m: int, x: Sequence[complex] | np.ndarray) -> complex:
    """Complete Bell polynomial B_m(x_1..x_m) by the binomial recurrence.

    Raises:
        ValueError: fewer than m arguments.
    """
    if m < 0:
        raise ValueError("m must be >= 0")
    if len(x) < m:
        raise ValueError(f"B_{m} needs {m} arguments, got {len(x)}")
    values: list[complex] = [1.0]
    for n in range(m):
        values.append(
            sum(comb(n, k, exact=True) * values[n - k] * x[k] for k in range(n + 1))
        )
    return values[m]


def bell_arguments(c: Sequence[float] | np.ndarray) -> np.ndarray:
    """((-2)^(k-1) (k-1)! c_k)_k."""
    return np.array(
        [(-2) ** (k - 1) * math.factorial(k - 1) * ck for k, ck in enumerate(c, start=1)]
    )


def bell_moments(c: CnTable | Sequence[float], order: int, sigma: int) -> float:
    """Limit of E[binom((n - o)/2, order) o^sigma].

    Raises:
        ValueError: sigma not in {0, 1}, or fewer than 2 order + sigma values.
    """
    if sigma not in (0, 1) or order < 0:
        raise ValueError("order must be >= 0 and sigma in {0, 1}")
    values = c.values if isinstance(c, CnTable) else np.asarray(c, dtype=float)
    m = 2 * order + sigma
    if m > len(values):
        raise ValueError(f"moment needs c_1..c_{m}, table has {len(values)}")
    x = bell_arguments(values[:m])
    return float(np.real((-1) ** (order + sigma) * bell_polynomial(m, x) / math.factorial(m)))


@dataclass(frozen=True)
class LimitMoments:
    mean_o: float
    mean_n: float
    var_n: float

    def to_dict(self) -> dict[str, float]:
        return {"mean_o": self.mean_o, "mean_n": self.mean_n, "var_n": self.var_n}


def moments_from_binomials(binomial: Callable[[int, int], float]) -> LimitMoments:
    """E[o], E[n], var(n) from E[binom(r, k) o^sigma] with r = (n - o)/2.

    n = 2r + o, o^2 = o, r^2 = 2 binom(r, 2) + r.
    """
    mean_o = binomial(0, 1)
    mean_r = binomial(1, 0)
    mean_r2 = 2 * binomial(2, 0) + mean_r
    mean_ro = binomial(1, 1)
    mean_n = 2 * mean_r + mean_o
    mean_n2 = 4 * mean_r2 + 4 * mean_ro + mean_o
    return LimitMoments(mean_o=mean_o, mean_n=mean_n, var_n=mean_n2 - mean_n**2)


def limit_moments(c: CnTable | Sequence[float]) -> LimitMoments:
    """E[o] = -c_1, E[n] = 2 c_2 - c_1^2 - c_1, var(n) from c_1..c_4."""
    return moments_from_binomials(lambda k, s: bell_moments(c, k, s))


def ale_targets(y: float) -> tuple[float, float]:
    """(E[n], P[o = 1]) for the arc ensemble of the strip at height y.

    Raises:
        ValueError: y outside (0, pi/2].
    """
    if not 0 < y <= math.pi / 2 + 1e-15:
        raise ValueError(f"y must lie in (0, pi/2], got {y}")
    mean_n = 0.25 - y**2 / math.pi**2 - 2 * math.log(math.sin(y)) / math.pi**2
    return mean_n, 0.5 - y / math.pi


# =============================================================================
# Inverse Kasteleyn asymptotics
# =============================================================================

_SIGN = {VertexClass.W0: 1, VertexClass.W1: -1, VertexClass.B0: 1, VertexClass.B1: -1}

# An interior pair and a pair in the flat ball under the top side of the strip.
STRIP_COUPLING_PAIRS: tuple[tuple[complex, complex], ...] = (
    (0.3j, 1.0 + 0.9j),
    (0.2 + 1.25j, 1.0 + 1.3j),
)
MIN_COUPLING_ORDER = 1.7


def coupling_prediction(kernel: GreenKernel, eps: float, u: complex, v: complex, r: int, s: int) -> complex:
    """(eps/2)(F_+ + r F_- + s conj F_- + r s conj F_+) at (u, v)."""
    fp, fm = kernel.F_plus(u, v), kernel.F_minus(u, v)
    return eps / 2 * (fp + r * fm + s * fm.conjugate() + r * s * fp.conjugate())


def holomorphy_matrix(g: TemperleyanGraph) -> sparse.csc_matrix:
    """Sparse whites x blacks matrix with phases (b - w)/|b - w|."""
    phases = complex_phases(g)
    w_index = {w: k for k, w in enumerate(g.whites)}
    b_index = {b: k for k, b in enumerate(g.blacks)}
    rows, cols, vals = [], [], []
    for w, b in g.edges:
        rows.append(w_index[w])
        cols.append(b_index[b])
        vals.append(phases[(w, b)])
    return sparse.csc_matrix(
        (vals, (rows, cols)), shape=(len(g.whites), len(g.blacks)), dtype=complex
    )


@dataclass(frozen=True)
class CouplingRow:
    r: int
    s: int
    black: Point
    white: Point
    value: complex
    prediction: complex

    @property
    def error(self) -> float:
        return abs(self.value - self.prediction)

    def to_row(self) -> dict[str, Any]:
        return {
            "r": self.r,
            "s": self.s,
            "black": list(self.black),
            "white": list(self.white),
            "value_re": self.value.real,
            "value_im": self.value.imag,
            "prediction_re": self.prediction.real,
            "prediction_im": self.prediction.imag,
            "error": self.error,
        }


@dataclass(frozen=True)
class CouplingReport:
    eps: float
    rows: tuple[CouplingRow, ...]
    green_identity_error: float
    model: Model = Model.FOLDED

    def max_error(self, r: int, s: int) -> float:
        return max((row.error for row in self.rows if (row.r, row.s) == (r, s)), default=0.0)

    def to_dict(self) -> dict[str, Any]:
        return {
            "model": self.model.value,
            "eps": self.eps,
            "green_identity_error": self.green_identity_error,
            "rows": [row.to_row() for row in self.rows],
        }


def _nearest(
    g: TemperleyanGraph, cls: VertexClass, target: complex, exclude: frozenset[Point] = frozenset()
) -> Point:
    candidates = [p for p in g.of_class(cls) if p not in exclude]
    if not candidates:
        raise DomainError("graph has no vertex of class", cls.value)
    return min(candidates, key=lambda p: abs(g.position(p) - target))


def shifted_coupling_prediction(
    kernel: GreenKernel, eps: float, u: complex, v: complex, r: int, s: int
) -> complex:
    """(eps/2)(D_+ + r D_- + s conj D_- + r s conj D_+) with D_tau = -2 F_{-tau}(u, v*).

    The copy kernels are F_tau(u, v) -/+ F_{-tau}(u, v*), v* the mirror image
    of v, so their difference carries no F_tau(u, v) term.
    """
    mirror = kernel.reflect(v)
    d_plus = -2 * kernel.F_minus(u, mirror)
    d_minus = -2 * kernel.F_plus(u, mirror)
    return eps / 2 * (d_plus + r * d_minus + s * d_minus.conjugate() + r * s * d_plus.conjugate())


@dataclass(frozen=True)
class _Unzipped:
    directed_edges: tuple[tuple[Point, Point], ...] = ()


class ShiftedInverse:
    """(K^1)^-1 and (K^2)^-1 from one factorization of the shifted matrix.

    At alpha = 0 the shifted matrix of G^1 folded along its axis splits into
    copy 1 (with the axis), which is K^1, and copy 2 (y > 0), which is K^2.

    Raises:
        SingularMatrixError: the factorization fails.
    """

    def __init__(self, upper: TemperleyanGraph) -> None:
        self.graph = upper
        self.folded = build_folded_graph(upper, upper.axis)
        matrices = assemble_sparse_model(self.folded, _Unzipped(), Model.SHIFTED)
        try:
            self._lu = splu(sparse.csc_matrix(matrices.K, dtype=complex))
        except RuntimeError as e:
            raise SingularMatrixError(math.inf, f"sparse factorization failed: {e}") from e
        self._columns: dict[tuple[Point, int], np.ndarray] = {}

    def column(self, w: Point, copy: int) -> np.ndarray:
        """K^-1[:, (w, copy)] over the folded vertices; copy 0 on the axis."""
        key = (w, copy)
        if key not in self._columns:
            unit = np.zeros(self.folded.size, dtype=complex)
            unit[self.folded.index[key]] = 1.0
            self._columns[key] = self._lu.solve(unit)
        return self._columns[key]

    def copy_one(self, w: Point) -> np.ndarray:
        """(K^1)^-1[:, w] indexed by the blacks of G^1."""
        column = self.column(w, self.folded.lifts(w)[0][1])
        idx = self.folded.index
        return np.array([column[idx[self.folded.lifts(b)[0]]] for b in self.graph.blacks])

    def entries(self, b: Point, w: Point) -> tuple[complex, complex]:
        """((K^1)^-1[b, w], (K^2)^-1[b, w]) for b, w off the axis."""
        idx = self.folded.index
        return (
            complex(self.column(w, 1)[idx[(b, 1)]]),
            complex(self.column(w, 2)[idx[(b, 2)]]),
        )


def coupling_asymptotic_check(
    g: TemperleyanGraph,
    kernel: GreenKernel,
    pairs: Sequence[tuple[complex, complex]] = ((0.3j, 1.0 + 0.9j),),
    model: Model = Model.FOLDED,
) -> CouplingReport:
    """Compare inverse Kasteleyn couplings with the kernel prediction.

    Folded: K^-1(b, w) on the symmetric graph against ``coupling_prediction``.
    Shifted: (K^1)^-1(b, w) - (K^2)^-1(b, w) on the upper graph (the symmetric
    graph is restricted first) against ``shifted_coupling_prediction``.

    Each pair (u, v) of continuum points picks, for each class pair (r, s),
    the black of class B_{(1-s)/2} nearest u and the white of class
    W_{(1-r)/2} nearest v. The identity K^-1 = (K* K)^-1 K* is checked on
    the same columns (of K^1 for the shifted model).

    Raises:
        DomainError: a pair is closer than delta/2.
    """
    if model is Model.SHIFTED:
        return _shifted_coupling_check(g, kernel, pairs)
    A = holomorphy_matrix(g)
    lu = splu(A)
    laplacian = splu((A.conj().T @ A).tocsc())
    b_index = {b: k for k, b in enumerate(g.blacks)}
    w_index = {w: k for k, w in enumerate(g.whites)}
    eps = g.eps
    rows: list[CouplingRow] = []
    identity = 0.0
    for u, v in pairs:
        if abs(u - v) < g.delta / 2:
            raise DomainError("coupling pair closer than delta/2", details={"u": str(u), "v": str(v)})
        for rc in (VertexClass.W0, VertexClass.W1):
            w = _nearest(g, rc, v)
            unit = np.zeros(len(g.whites), dtype=complex)
            unit[w_index[w]] = 1.0
            column = lu.solve(unit)  # K^-1[:, w] indexed by blacks
            via_green = laplacian.solve(A.conj().T @ unit)
            identity = max(identity, float(np.max(np.abs(column - via_green))))
            for sc in (VertexClass.B0, VertexClass.B1):
                b = _nearest(g, sc, u)
                r, s = _SIGN[rc], _SIGN[sc]
                rows.append(
                    CouplingRow(
                        r=r,
                        s=s,
                        black=b,
                        white=w,
                        value=complex(column[b_index[b]]),
                        prediction=coupling_prediction(
                            kernel, eps, g.position(b), g.position(w), r, s
                        ),
                    )
                )
    logger.info("coupling_checked", eps=eps, pairs=len(pairs), identity_error=identity)
    return CouplingReport(eps=eps, rows=tuple(rows), green_identity_error=identity)


def _shifted_coupling_check(
    g: TemperleyanGraph, kernel: GreenKernel, pairs: Sequence[tuple[complex, complex]]
) -> CouplingReport:
    upper = restrict_upper(g) if g.variant is GraphVariant.SYMMETRIC else g
    inverse = ShiftedInverse(upper)
    A = holomorphy_matrix(upper)
    laplacian = splu((A.conj().T @ A).tocsc())
    w_index = {w: k for k, w in enumerate(upper.whites)}
    axis = frozenset(upper.axis)
    eps = upper.eps
    rows: list[CouplingRow] = []
    identity = 0.0
    for u, v in pairs:
        if abs(u - v) < upper.delta / 2:
            raise DomainError("coupling pair closer than delta/2", details={"u": str(u), "v": str(v)})
        for rc in (VertexClass.W0, VertexClass.W1):
            w = _nearest(upper, rc, v, exclude=axis)
            unit = np.zeros(len(upper.whites), dtype=complex)
            unit[w_index[w]] = 1.0
            via_green = laplacian.solve(A.conj().T @ unit)
            identity = max(identity, float(np.max(np.abs(inverse.copy_one(w) - via_green))))
            for sc in (VertexClass.B0, VertexClass.B1):
                b = _nearest(upper, sc, u, exclude=axis)
                r, s = _SIGN[rc], _SIGN[sc]
                first, second = inverse.entries(b, w)
                rows.append(
                    CouplingRow(
                        r=r,
                        s=s,
                        black=b,
                        white=w,
                        value=first - second,
                        prediction=shifted_coupling_prediction(
                            kernel, eps, upper.position(b), upper.position(w), r, s
                        ),
                    )
                )
    logger.info("shifted_coupling_checked", eps=eps, pairs=len(pairs), identity_error=identity)
    return CouplingReport(
        eps=eps, rows=tuple(rows), green_identity_error=identity, model=Model.SHIFTED
    )


def convergence_order(coarse: CouplingReport, fine: CouplingReport) -> dict[tuple[int, int], float]:
    """log(err_coarse / err_fine) / log(eps_coarse / eps_fine) per class pair."""
    ratio = math.log(coarse.eps / fine.eps)
    orders = {}
    for r in (1, -1):
        for s in (1, -1):
            a, b = coarse.max_error(r, s), fine.max_error(r, s)
            orders[(r, s)] = math.log(a / b) / ratio if a > 0 and b > 0 else math.inf
    return orders
