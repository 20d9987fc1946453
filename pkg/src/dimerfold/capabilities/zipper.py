"""
Zippers, perturbation matrices and trace series.

The reference path from z to the flat boundary is a staircase of faces: a NE
leg alternates steps right and up, a NW leg left and up. Each step crosses one
edge, stored directed from the left of the path to its right. Consecutive
crossed edges share a corner, so the zipper is a zig-zag chain. Each straight
leg is tiled from its first edge by packets: runs of four edges advancing one
diagonal step and passing through one vertex of each class W0, B0, W1, B1,
anchored at their W0 vertex. The remaining edges (at the exit and around the
turns) are leftovers.

Version: 0.1.0
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Literal, Protocol

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from dimerfold.capabilities.arcs import ModelGraphs, arc_stats, exact_configurations
from dimerfold.capabilities.continuum import bell_polynomial
from dimerfold.capabilities.enumeration import LoopsArcsConfig
from dimerfold.capabilities.linalg import (
    det_ratio_series,
    pfaffian_ratio,
)
from dimerfold.core.exceptions import (
    GraphError,
    InvariantError,
    SingularMatrixError,
    ZipperError,
)
from dimerfold.core.logging import get_logger
from dimerfold.core.models import Model
from dimerfold.domain.kasteleyn import (
    FoldedGraph,
    SkewMatrix,
    assemble_model_matrices,
    assemble_sparse_model,
    build_folded_graph,
    complex_phases,
)
from dimerfold.domain.lattice import (
    Point,
    SymmetricLatticeDomain,
    TemperleyanGraph,
    VertexClass,
    build_temperleyan,
    restrict_upper,
    vertex_class,
)

logger = get_logger(__name__)

Direction = Literal["NE", "NW"]
DirectedEdge = tuple[Point, Point]


# =============================================================================
# Zipper
# =============================================================================


@dataclass(frozen=True)
class Packet:
    """Four zipper edges one diagonal step long.

    ``vertices`` is the chain as walked, a rotation of w0, b0, w1, b1 (or of
    its reverse) closed by the next vertex; ``anchor`` is the W0 vertex.
    """

    vertices: tuple[Point, Point, Point, Point, Point]
    edges: tuple[DirectedEdge, DirectedEdge, DirectedEdge, DirectedEdge]
    phases: tuple[complex, complex, complex, complex]
    anchor: complex
    displacement: complex


@dataclass(frozen=True, eq=False)
class Zipper:
    """Edges crossing the reference path left to right, on the upper graph.

    Attributes:
        graph: host upper graph G^1.
        start: face containing z (lower-left corner, doubled coordinates).
        faces: faces visited by the staircase, from ``start``.
        edges: crossed edges in path order.
        packets / leftovers: decomposition of ``edges``.
        exit_x: doubled x coordinate where the path leaves through the top.
    """

    graph: TemperleyanGraph
    start: Point
    faces: tuple[Point, ...]
    edges: tuple[DirectedEdge, ...]
    packets: tuple[Packet, ...] = ()
    leftovers: tuple[DirectedEdge, ...] = ()
    exit_x: float = 0.0
    legs: tuple[tuple[Direction, int], ...] = field(default=())

    @property
    def directed_edges(self) -> tuple[DirectedEdge, ...]:
        return self.edges

    def __len__(self) -> int:
        return len(self.edges)

    @cached_property
    def folded(self) -> FoldedGraph:
        """G^1 folded along its axis."""
        return build_folded_graph(self.graph, self.graph.axis)

    def reference_path(self) -> list[tuple[float, float]]:
        """Axis-parallel polyline through the visited face centres."""
        pts = [(f[0] + 0.5, f[1] + 0.5) for f in self.faces]
        top = max(p[1] for p in self.graph.vertices)
        return [*pts, (pts[-1][0], top + 0.5)]

    def crossing(self, path: Sequence[Point]) -> int:
        """Net number of times a vertex path crosses the zipper left to right."""
        forward = set(self.edges)
        total = 0
        for p, q in itertools.pairwise(path):
            if (p, q) in forward:
                total += 1
            elif (q, p) in forward:
                total -= 1
        return total


def legs_from_waypoints(
    z: complex, waypoints: Sequence[tuple[float, float]], direction: Direction, eps: float
) -> tuple[list[tuple[Direction, int]], Direction]:
    """Staircase legs through the heights of continuum waypoints.

    Each waypoint ends a leg; directions alternate starting from ``direction``
    and the leg after the last waypoint runs to the boundary.

    Raises:
        ZipperError: a waypoint is not above the previous one.
    """
    legs: list[tuple[Direction, int]] = []
    current: Direction = direction
    y = z.imag
    for wx, wy in waypoints:
        if wy <= y:
            raise ZipperError("waypoints must climb", {"waypoint": (wx, wy)})
        legs.append((current, round((wy - y) / (eps / 2))))
        y = wy
        current = "NW" if current == "NE" else "NE"
    return legs, current


def _step(face: Point, move: str) -> tuple[Point, DirectedEdge]:
    x, y = face
    if move == "R":
        return (x + 1, y), ((x + 1, y + 1), (x + 1, y))
    if move == "L":
        return (x - 1, y), ((x, y), (x, y + 1))
    return (x, y + 1), ((x, y + 1), (x + 1, y + 1))


def _moves(legs: Sequence[tuple[Direction, int]], final: Direction) -> Iterator[str]:
    for direction, pairs in legs:
        side = "R" if direction == "NE" else "L"
        for _ in range(pairs):
            yield side
            yield "U"
    side = "R" if final == "NE" else "L"
    while True:
        yield side
        yield "U"


def _run_vertices(block: Sequence[DirectedEdge]) -> tuple[Point, ...] | None:
    """Chain through consecutive edges; None where the zipper doubles back at a turn."""
    shared: list[Point] = []
    for e, f in itertools.pairwise(block):
        common = set(e) & set(f)
        if len(common) != 1:
            return None
        shared.append(common.pop())
    if len(set(shared)) != len(shared):
        return None
    first = next(p for p in block[0] if p != shared[0])
    last = next(p for p in block[-1] if p != shared[-1])
    return (first, *shared, last)


def _is_packet(run: Sequence[Point]) -> bool:
    """Four zig-zag steps one diagonal step long, through one vertex of each class."""
    if len(run) != 5:
        return False
    if abs(run[4][0] - run[0][0]) != 2 or abs(run[4][1] - run[0][1]) != 2:
        return False
    vertical = [p[0] == q[0] for p, q in itertools.pairwise(run)]
    if any(a == b for a, b in itertools.pairwise(vertical)):
        return False
    return {vertex_class(p) for p in run[:4]} == set(VertexClass)


def _packets(
    edges: Sequence[DirectedEdge], phases: Any, eps: float
) -> tuple[tuple[Packet, ...], tuple[DirectedEdge, ...]]:
    packets: list[Packet] = []
    leftovers: list[DirectedEdge] = []
    i = 0
    while i < len(edges):
        block = tuple(edges[i : i + 4])
        run = _run_vertices(block) if len(block) == 4 else None
        if run is None or not _is_packet(run):
            leftovers.append(edges[i])
            i += 1
            continue
        w0 = next(p for p in run if vertex_class(p) is VertexClass.W0)
        packets.append(
            Packet(
                vertices=run,  # type: ignore[arg-type]
                edges=block,  # type: ignore[arg-type]
                phases=tuple(phases[e] for e in block),  # type: ignore[arg-type]
                anchor=complex(*w0) * eps / 2,
                displacement=complex(run[4][0] - run[0][0], run[4][1] - run[0][1]) * eps / 2,
            )
        )
        i += 4
    return tuple(packets), tuple(leftovers)


def build_zipper(
    g: TemperleyanGraph,
    z: Point,
    legs: Sequence[tuple[Direction, int]] = (),
    final: Direction = "NE",
    check_flat: bool = True,
) -> Zipper:
    """Zipper of the staircase path from face z to the top boundary.

    Args:
        g: upper graph G^1.
        z: start face (lower-left corner); must not touch the axis.
        legs: leading legs as (direction, number of right/left + up pairs).
        final: direction of the last leg, continued until the path exits.
        check_flat: require the exit to lie in the flat ball around the anchor.

    Raises:
        ZipperError: z is not a face, touches the axis, or the path leaves the
            graph other than through the top, or misses the flat ball.
    """
    faces = set(g.faces)
    if z not in faces:
        raise ZipperError("start point is not a face of the graph", {"face": z})
    if z[1] < 1:
        raise ZipperError("start face touches the axis", {"face": z})
    top = max(p[1] for p in g.vertices)

    visited = [z]
    crossed: list[DirectedEdge] = []
    face = z
    exit_x = math.nan
    for move in _moves(legs, final):
        nxt, edge = _step(face, move)
        p, q = edge
        if p not in g.vertices or q not in g.vertices:
            raise ZipperError("path leaves the graph", {"face": face, "move": move})
        crossed.append(edge)
        if nxt not in faces:
            if move == "U" and p[1] == top:
                exit_x = (p[0] + q[0]) / 2
                break
            raise ZipperError("path leaves the domain before the top", {"face": face, "move": move})
        visited.append(nxt)
        face = nxt

    if check_flat and g.anchor is not None:
        distance = abs(exit_x - g.anchor[0]) * g.eps / 2
        if distance > g.delta + g.eps:
            raise ZipperError(
                "path does not end in the flat boundary ball",
                {"exit": exit_x, "anchor": g.anchor, "delta": g.delta},
            )

    phases = complex_phases(g)
    packets, leftovers = _packets(crossed, phases, g.eps)
    zipper = Zipper(
        graph=g,
        start=z,
        faces=tuple(visited),
        edges=tuple(crossed),
        packets=packets,
        leftovers=leftovers,
        exit_x=exit_x,
        legs=tuple(legs),
    )
    logger.debug("zipper_built", edges=len(crossed), packets=len(packets), leftovers=len(leftovers))
    return zipper


# =============================================================================
# Perturbation matrices
# =============================================================================


def build_S(zipper: Zipper, model: Model) -> SkewMatrix:
    """Dense perturbation matrix S with K_{2 alpha} = K + c alpha S.

    Raises:
        GraphError: zipper edges touch the folding boundary.
    """
    return assemble_model_matrices(zipper.folded, zipper, 0.0, model).S


class InverseOperator(Protocol):
    def block(self, rows: Sequence[int], cols: Sequence[int]) -> np.ndarray: ...


@dataclass(frozen=True, eq=False)
class DenseInverse:
    data: np.ndarray

    def block(self, rows: Sequence[int], cols: Sequence[int]) -> np.ndarray:
        return self.data[np.ix_(rows, cols)]


class SparseInverse:
    """K^-1 blocks from a sparse LU factorization of K."""

    def __init__(self, K: sparse.spmatrix) -> None:
        try:
            self._lu = splu(sparse.csc_matrix(K, dtype=complex))
        except RuntimeError as e:
            raise SingularMatrixError(math.inf, f"sparse factorization failed: {e}") from e
        self._n = K.shape[0]

    def block(self, rows: Sequence[int], cols: Sequence[int]) -> np.ndarray:
        rhs = np.zeros((self._n, len(cols)), dtype=complex)
        rhs[list(cols), np.arange(len(cols))] = 1.0
        return self._lu.solve(rhs)[list(rows)]


@dataclass(frozen=True)
class TraceSeries:
    """T_n = tr((S K^-1)^n) for n = 1..n_max.

    ``normalized`` rescales by (c/2)^n so both models compare to the same
    continuum values.
    """

    traces: np.ndarray
    c: float
    eps: float = math.nan
    model: Model | None = None
    spectral_radius: float = 0.0

    @property
    def n_max(self) -> int:
        return len(self.traces)

    @property
    def normalized(self) -> np.ndarray:
        k = np.arange(1, self.n_max + 1)
        return self.traces * (self.c / 2) ** k

    def max_imaginary(self) -> float:
        """max |Im T_n| / (1 + |T_n|)."""
        if not self.n_max:
            return 0.0
        return float(np.max(np.abs(self.traces.imag) / (1 + np.abs(self.traces))))

    def to_dict(self) -> dict[str, Any]:
        return {
            "model": self.model.value if self.model else None,
            "eps": self.eps,
            "c": self.c,
            "spectral_radius": self.spectral_radius,
            "traces_re": self.traces.real.tolist(),
            "traces_im": self.traces.imag.tolist(),
            "normalized": self.normalized.real.tolist(),
        }


def _support(S: np.ndarray | sparse.spmatrix) -> tuple[np.ndarray, np.ndarray]:
    if sparse.issparse(S):
        coo = sparse.coo_matrix(S)
        nz = coo.data != 0
        return np.unique(coo.row[nz]), np.unique(coo.col[nz])
    rows, cols = np.nonzero(S)
    return np.unique(rows), np.unique(cols)


def compressed_product(
    S: SkewMatrix | np.ndarray | sparse.spmatrix, K_inverse: InverseOperator | np.ndarray
) -> np.ndarray:
    """S K^-1 restricted to the rows of S's support; same nonzero spectrum."""
    data = S.data if isinstance(S, SkewMatrix) else S
    inverse = DenseInverse(K_inverse) if isinstance(K_inverse, np.ndarray) else K_inverse
    rows, cols = _support(data)
    if rows.size == 0:
        return np.zeros((0, 0), dtype=complex)
    S_block = data[np.ix_(rows, cols)] if not sparse.issparse(data) else data[rows][:, cols].toarray()
    return np.asarray(S_block, dtype=complex) @ inverse.block(cols, rows)


def trace_series(
    S: SkewMatrix | np.ndarray | sparse.spmatrix,
    K_inverse: InverseOperator | np.ndarray,
    n_max: int,
    c: float = 2.0,
    model: Model | None = None,
    eps: float = math.nan,
) -> TraceSeries:
    """Trace series of S K^-1 through the compressed product.

    Raises:
        ValueError: n_max < 1.
    """
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    B = compressed_product(S, K_inverse)
    if B.size == 0:
        return TraceSeries(np.zeros(n_max, dtype=complex), c, eps, model, 0.0)
    series = det_ratio_series(B, n_max, c)
    return TraceSeries(series.traces, c, eps, model, series.spectral_radius)


# =============================================================================
# Finite-eps identity
# =============================================================================


@dataclass(frozen=True)
class IdentityRow:
    """One alpha of the generating identity.

    ``lhs`` is E[(1 - alpha^2)^r (1 - o alpha)], ``lhs_zipper`` the same
    expectation written as E[prod (1 + kappa_A alpha)] over zipper crossings,
    ``rhs_pfaffian`` is Pf K_{2 alpha} / Pf K and ``rhs_det`` is
    det(I + c alpha S K^-1)^(1/2).
    """

    alpha: float
    lhs: float
    lhs_zipper: float
    rhs_pfaffian: complex
    rhs_det: complex

    @property
    def error(self) -> float:
        return max(abs(self.lhs - self.rhs_pfaffian), abs(self.lhs - self.rhs_det))

    def to_row(self) -> dict[str, Any]:
        return {
            "alpha": self.alpha,
            "lhs": self.lhs,
            "lhs_zipper": self.lhs_zipper,
            "rhs_pfaffian": self.rhs_pfaffian.real,
            "rhs_det": self.rhs_det.real,
            "rhs_imag": max(abs(self.rhs_pfaffian.imag), abs(self.rhs_det.imag)),
            "error": self.error,
        }


def zipper_weight(cfg: LoopsArcsConfig, zipper: Zipper, alpha: float) -> float:
    """prod over arcs of (1 + kappa_A alpha), kappa_A the net zipper crossing."""
    weight = 1.0
    for arc in cfg.arcs:
        weight *= 1 + zipper.crossing(arc.path) * alpha
    return weight


def finite_eps_identity(
    domain: SymmetricLatticeDomain,
    z: Point,
    model: Model,
    alphas: Sequence[float],
    legs: Sequence[tuple[Direction, int]] = (),
    final: Direction = "NE",
    n_max: int = 6,
) -> list[IdentityRow]:
    """Both sides of the generating identity on a domain under the enumeration cap.

    Raises:
        EnumerationCapError: the domain is too large to enumerate.
        InvariantError: the two forms of the left side disagree on a configuration.
    """
    graphs = ModelGraphs.build(domain, model)
    zipper = build_zipper(graphs.upper, z, legs, final, check_flat=False)
    configs = exact_configurations(graphs)
    path = zipper.reference_path()
    stats = [arc_stats(cfg, z, graphs.upper, path=path) for cfg in configs]

    base = assemble_model_matrices(zipper.folded, zipper, 0.0, model)
    K_inverse = np.linalg.inv(base.K.data)
    series = det_ratio_series(compressed_product(base.S, K_inverse), n_max, base.c)

    rows = []
    for alpha in alphas:
        per_config = np.array([(1 - alpha**2) ** s.r * (1 - s.o * alpha) for s in stats])
        zipped = np.array([zipper_weight(cfg, zipper, alpha) for cfg in configs])
        if np.max(np.abs(per_config - zipped)) > 1e-12:
            raise InvariantError("enclosure and zipper crossings disagree", {"alpha": alpha})
        perturbed = assemble_model_matrices(zipper.folded, zipper, alpha, model)
        rows.append(
            IdentityRow(
                alpha=alpha,
                lhs=float(per_config.mean()),
                lhs_zipper=float(zipped.mean()),
                rhs_pfaffian=pfaffian_ratio(perturbed.K_alpha, perturbed.K),
                rhs_det=series.evaluate(alpha),
            )
        )
    logger.info("identity_checked", model=model.value, configurations=len(configs), alphas=len(rows))
    return rows


# =============================================================================
# Moments from traces
# =============================================================================


def bell_arguments(traces: Sequence[complex], c: float) -> np.ndarray:
    """x_k = (-1)^(k-1) c^k (k-1)! T_k / 2; equals (-2)^(k-1) (k-1)! T_k for c = 2."""
    values = []
    for k, t in enumerate(traces, start=1):
        values.append((-1) ** (k - 1) * c**k * math.factorial(k - 1) * t / 2)
    return np.array(values, dtype=complex)


def moments_from_traces(ts: TraceSeries, order: int, sigma: int) -> float:
    """Finite-eps E[binom((n - o)/2, order) o^sigma] from the trace series.

    Raises:
        ZipperError: the series is too short (2 order + sigma > n_max).
    """
    m = 2 * order + sigma
    if sigma not in (0, 1) or order < 0:
        raise ValueError("order must be >= 0 and sigma in {0, 1}")
    if m > ts.n_max:
        raise ZipperError("trace series too short", {"needed": m, "n_max": ts.n_max})
    x = bell_arguments(ts.traces[:m], ts.c)
    value = (-1) ** (order + sigma) * bell_polynomial(m, x) / math.factorial(m)
    return float(np.real(value))


# =============================================================================
# Strip helpers
# =============================================================================


def domain_trace_series(
    domain: SymmetricLatticeDomain,
    z: Point,
    model: Model,
    n_max: int,
    legs: Sequence[tuple[Direction, int]] = (),
    final: Direction = "NE",
    check_flat: bool = True,
) -> tuple[TraceSeries, Zipper]:
    """Trace series on a (possibly large) domain via sparse factorization."""
    upper = restrict_upper(build_temperleyan(domain))
    zipper = build_zipper(upper, z, legs, final, check_flat)
    try:
        mats = assemble_sparse_model(zipper.folded, zipper, model)
    except GraphError as e:
        raise ZipperError("zipper is not inside the bulk", e.details) from e
    series = trace_series(mats.S, SparseInverse(mats.K), n_max, mats.c, model, domain.eps)
    logger.info(
        "trace_series",
        model=model.value,
        eps=domain.eps,
        zipper_edges=len(zipper),
        T1=float(series.traces[0].real),
    )
    return series, zipper
