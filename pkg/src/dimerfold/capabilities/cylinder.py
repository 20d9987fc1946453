"""
Traversing arcs on the folded cylinder.

The grid [0, n] x [1, m] folded along its two vertical sides is the cylinder
Z/2nZ x [1, m]. A diagonal connection diag(a, 1/a) on rightward edges gives
every arc joining the two sides the weight a^n + a^-n = rho + 1/rho, and every
other arc or loop the weight 2, so Pf K_a / Pf K is the generating function of
the number N of traversing arcs in Y = (rho + 1/rho)/2.

The same ratio diagonalizes in the horizontal Fourier modes: row mode j
contributes (1 - 2p + p^2 + 4 Y^2 p) / (1 + p)^2 with
p = exp(-2n asinh(sin(pi j / 2(m + 1)))), which tends to q^j with
q = exp(-pi n / (m + 1)).

Version: 0.1.0
"""

from __future__ import annotations

import cmath
import math
from collections import Counter
from collections.abc import Sequence
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Literal

import numpy as np
from numpy.polynomial import chebyshev

from dimerfold.capabilities.enumeration import LoopsArcsConfig, enumerate_configurations
from dimerfold.capabilities.linalg import pfaffian_ratio
from dimerfold.core.exceptions import GraphError, SingularMatrixError
from dimerfold.core.logging import get_logger
from dimerfold.domain.kasteleyn import (
    Connection,
    FoldedGraph,
    assemble_K,
    build_connection,
    build_folded_graph,
    complex_phases,
)
from dimerfold.domain.lattice import LatticeGraph, Point, build_grid

logger = get_logger(__name__)

Aspect = Literal["open", "nominal"]


@dataclass(frozen=True, eq=False)
class CylinderModel:
    """The folded grid [0, n] x [1, m] with boundary {0, n} x [1, m].

    The boundary must carry as many black as white vertices, so even n needs
    even m. For even n the two sides also have the same colouring and the
    fold leaves the cylinder one Kasteleyn sign short around its axis; the
    copy-2 component of the left boundary vectors carries that sign.
    """

    n: int
    m: int

    def __post_init__(self) -> None:
        if self.n < 2 or self.m < 1 or (self.n % 2 == 0 and self.m % 2 == 1):
            raise GraphError(
                "cylinder needs n >= 2, m >= 1 and even m for even n",
                details={"n": self.n, "m": self.m},
            )

    @cached_property
    def grid(self) -> LatticeGraph:
        return build_grid(self.n + 1, self.m, origin=(0, 1))

    @cached_property
    def boundary(self) -> tuple[Point, ...]:
        """Clockwise: up the left side, then down the right side."""
        left = [(0, y) for y in range(1, self.m + 1)]
        right = [(self.n, y) for y in range(self.m, 0, -1)]
        return (*left, *right)

    @cached_property
    def folded(self) -> FoldedGraph:
        return build_folded_graph(self.grid, self.boundary)

    @property
    def seam(self) -> int:
        """Sign on the copy-2 side of the left column: -1 for even n."""
        return -1 if self.n % 2 == 0 else 1

    def connection(self, a: complex) -> Connection:
        """diag(a, 1/a) on rightward bulk steps; psi follows the arc direction.

        Arcs run from their white end to their black end, so the boundary
        vector at a white boundary vertex uses the step out of the boundary
        and at a black one the step into it.
        """
        right = np.diag([a, 1 / a])
        left = np.diag([1 / a, a])

        def transport(w: Point, b: Point) -> np.ndarray | None:
            if w[1] != b[1]:
                return None
            return right if b[0] > w[0] else left

        def vector(p: Point, v: Point) -> tuple[complex, complex]:
            step = v[0] - p[0] if not self.grid.is_black(p) else p[0] - v[0]
            first, second = (a, 1 / a) if step > 0 else (1 / a, a)
            if p[0] == 0:
                second *= self.seam
            return first, second

        return build_connection(self.folded, transport, vector)

    def is_traversing(self, endpoints: tuple[Point, Point]) -> bool:
        return {endpoints[0][0], endpoints[1][0]} == {0, self.n}


def root_of(rho: complex, n: int) -> complex:
    """a with a^n = rho; the positive real root for rho > 0."""
    rho = complex(rho)
    if rho == 0:
        raise ValueError("rho must be nonzero")
    if rho.imag == 0 and rho.real > 0:
        return complex(rho.real ** (1 / n))
    return cmath.exp(cmath.log(rho) / n)


def rho_for(Y: float) -> complex:
    """rho with (rho + 1/rho)/2 = Y; real >= 1 for Y >= 1, unit modulus for |Y| < 1."""
    if Y >= 1:
        return complex(Y + math.sqrt(Y * Y - 1))
    if Y <= -1:
        return complex(Y - math.sqrt(Y * Y - 1))
    return complex(Y, math.sqrt(1 - Y * Y))


def traversal_gf(n: int, m: int, rhos: Sequence[complex]) -> np.ndarray:
    """Pf K_a / Pf K for each rho, a = rho^(1/n).

    Raises:
        SingularMatrixError: the cylinder has no dimer cover (Pf K = 0).
    """
    model = CylinderModel(n, m)
    fg = model.folded
    phases = complex_phases(model.grid)
    base = assemble_K(fg, model.connection(1.0), phases)
    values = []
    for rho in rhos:
        perturbed = assemble_K(fg, model.connection(root_of(rho, n)), phases)
        try:
            values.append(pfaffian_ratio(perturbed, base))
        except ZeroDivisionError as e:
            raise SingularMatrixError(math.inf, "cylinder is not matchable") from e
    logger.debug("cylinder_gf", n=n, m=m, points=len(values))
    return np.array(values, dtype=complex)


def traversal_gf_at(n: int, m: int, Ys: Sequence[float]) -> np.ndarray:
    """Generating function at Y values, real part."""
    return traversal_gf(n, m, [rho_for(Y) for Y in Ys]).real


def mode_weights(n: int, m: int) -> np.ndarray:
    """p_j for the row modes j = m - 1, m - 3, ... > 0 of the n x m cylinder."""
    CylinderModel(n, m)
    j = np.arange(m - 1, 0, -2, dtype=float)
    return np.exp(-2 * n * np.arcsinh(np.sin(np.pi * j / (2 * (m + 1)))))


def closed_form_gf(n: int, m: int, Ys: Sequence[float]) -> np.ndarray:
    """Generating function of N from the diagonalized Kasteleyn matrix.

    For odd m the middle mode has p = 1 and contributes the single factor Y.
    """
    p = mode_weights(n, m)
    values = []
    for Y in Ys:
        factors = (1 - 2 * p + p * p + 4 * Y * Y * p) / (1 + p) ** 2
        values.append(float(np.prod(factors)) * (Y if m % 2 else 1.0))
    return np.array(values)


def effective_q(n: int, m: int, aspect: Aspect = "open") -> float:
    """exp(-pi n / (m + 1)) for the open cylinder, exp(-pi n / m) nominally."""
    if aspect not in ("open", "nominal"):
        raise ValueError(f"unknown aspect {aspect!r}")
    height = m + 1 if aspect == "open" else m
    return math.exp(-math.pi * n / height)


def traversal_distribution(n: int, m: int, degree: int | None = None) -> np.ndarray:
    """P[N = k] for k = 0..degree by interpolation at Chebyshev nodes in Y."""
    degree = m if degree is None else degree
    nodes = np.cos(math.pi * (np.arange(degree + 1) + 0.5) / (degree + 1))
    values = traversal_gf_at(n, m, nodes)
    coefficients = chebyshev.cheb2poly(chebyshev.chebfit(nodes, values, degree))
    probabilities = np.zeros(degree + 1)
    probabilities[: len(coefficients)] = coefficients
    return probabilities


def traversing_arcs(cfg: LoopsArcsConfig, model: CylinderModel) -> int:
    return sum(1 for arc in cfg.arcs if model.is_traversing((arc.white_end, arc.black_end)))


def enumerated_distribution(n: int, m: int) -> dict[int, float]:
    """P[N = k] from the straight matchings of the folded cylinder.

    Raises:
        EnumerationCapError: the cylinder exceeds the enumeration caps.
    """
    model = CylinderModel(n, m)
    omega = enumerate_configurations(model.folded)
    counts: Counter[int] = Counter()
    for cfg, lifts in zip(omega.configs, omega.lifts, strict=True):
        counts[traversing_arcs(cfg, model)] += lifts
    total = sum(counts.values())
    return {k: counts[k] / total for k in sorted(counts)}


def limit_product(q: float, Y: float, j_cut: int | None = None, tolerance: float = 1e-12) -> float:
    """prod over odd j of (1 + q^2j - 2 q^j + 4 Y^2 q^j) / (1 + q^2j + 2 q^j).

    Each factor is 1 + 4 (Y^2 - 1) q^j / (1 + q^j)^2; the product stops once
    the bound on the remaining log-factors drops below ``tolerance`` (or after
    ``j_cut`` odd terms).

    Raises:
        ValueError: q outside (0, 1).
    """
    if not 0 < q < 1:
        raise ValueError(f"q must lie in (0, 1), got {q}")
    shift = 4 * (Y * Y - 1)
    log_value = 0.0
    j = 1
    terms = 0
    while True:
        qj = q**j
        factor = 1 + shift * qj / (1 + qj) ** 2
        if factor <= 0:
            return 0.0
        log_value += math.log(factor)
        terms += 1
        j += 2
        tail = 2 * abs(shift) * q**j / (1 - q * q)
        if tail < tolerance or (j_cut is not None and terms >= j_cut):
            break
    return math.exp(log_value)


@dataclass(frozen=True)
class CylinderRow:
    """Finite value, its closed form and the limit product at both aspects."""

    n: int
    m: int
    Y: float
    finite: float
    closed_form: float
    limit: float
    limit_nominal: float

    @property
    def gap(self) -> float:
        return abs(self.finite - self.limit)

    @property
    def gap_nominal(self) -> float:
        return abs(self.finite - self.limit_nominal)

    @property
    def closed_form_gap(self) -> float:
        return abs(self.finite - self.closed_form)

    def to_row(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "m": self.m,
            "Y": self.Y,
            "finite": self.finite,
            "closed_form": self.closed_form,
            "limit": self.limit,
            "gap": self.gap,
            "limit_nominal": self.limit_nominal,
            "gap_nominal": self.gap_nominal,
        }


def limit_table(sizes: Sequence[tuple[int, int]], Ys: Sequence[float]) -> list[CylinderRow]:
    """Finite generating function against the limit product.

    ``limit`` uses q = exp(-pi n / (m + 1)), the aspect of the m-row cylinder
    between its open ends; ``limit_nominal`` uses q = exp(-pi n / m). Both
    ratios tend to the same tau.
    """
    rows = []
    for n, m in sizes:
        q_open = effective_q(n, m, "open")
        q_nominal = effective_q(n, m, "nominal")
        finite = traversal_gf_at(n, m, Ys)
        closed = closed_form_gf(n, m, Ys)
        for Y, value, exact in zip(Ys, finite, closed, strict=True):
            rows.append(
                CylinderRow(
                    n=n,
                    m=m,
                    Y=Y,
                    finite=float(value),
                    closed_form=float(exact),
                    limit=limit_product(q_open, Y),
                    limit_nominal=limit_product(q_nominal, Y),
                )
            )
    return rows
