"""
Exact uniform samplers for dimer covers.

Two methods:

- ``wilson-temperley``: uniform spanning tree of the B1 lattice rooted at b0
  (Wilson's loop-erased random walks), mapped to a dimer cover by the
  Temperley bijection. Primal: every non-root lattice vertex is matched to the
  midpoint of the edge towards its parent. Dual: every face is matched to the
  midpoint crossed by the dual-tree edge towards its parent, the dual tree
  being rooted at the outer face.
- ``determinantal-sequential``: visit whites in a fixed order and pick the
  partner b with probability |K(w,b) K^-1(b,w)|, then condition by deleting
  the pair and updating the inverse. Works on any matchable bipartite graph,
  in particular the strict upper graph with its two convex corners.

Version: 0.1.0
"""

from __future__ import annotations

import gzip
import threading
from collections import deque
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Literal

import numpy as np

from dimerfold.capabilities.enumeration import Matching
from dimerfold.capabilities.linalg import invert, rank2_update
from dimerfold.core.config import get_config
from dimerfold.core.exceptions import SamplerError, SingularMatrixError
from dimerfold.core.logging import get_logger
from dimerfold.domain.kasteleyn import complex_phases
from dimerfold.domain.lattice import (
    GraphVariant,
    LatticeGraph,
    Point,
    TemperleyanGraph,
    VertexClass,
    vertex_class,
)

logger = get_logger(__name__)


class SamplerMethod(str, Enum):
    WILSON = "wilson-temperley"
    DETERMINANTAL = "determinantal-sequential"


@dataclass
class SamplerStats:
    """Counters accumulated over draws."""

    draws: int = 0
    walk_steps: int = 0
    refreshes: int = 0


# =============================================================================
# Wilson + Temperley
# =============================================================================


def _lattice_ends(w: Point) -> tuple[Point, Point]:
    x, y = w
    if vertex_class(w) == VertexClass.W1:
        return (x - 1, y), (x + 1, y)
    return (x, y - 1), (x, y + 1)


def _face_sides(w: Point) -> tuple[Point, Point]:
    x, y = w
    if vertex_class(w) == VertexClass.W1:
        return (x, y - 1), (x, y + 1)
    return (x - 1, y), (x + 1, y)


@dataclass(frozen=True, eq=False)
class _PrimalLattice:
    """B1 vertices plus the root, with white midpoints as edges."""

    nodes: tuple[Point, ...]
    neighbours: dict[Point, tuple[Point, ...]]
    midpoint: dict[tuple[Point, Point], Point]


def _primal_lattice(g: TemperleyanGraph) -> _PrimalLattice:
    if g.variant not in (GraphVariant.SYMMETRIC, GraphVariant.UPPER) or g.b0 is None:
        raise SamplerError(
            "Wilson sampling needs a Temperleyan graph with a root",
            SamplerMethod.WILSON.value,
            {"variant": g.variant.value},
        )
    primal = set(g.of_class(VertexClass.B1)) | {g.b0}
    adjacency: dict[Point, list[Point]] = {p: [] for p in primal}
    midpoint: dict[tuple[Point, Point], Point] = {}
    for w in g.whites:
        a, b = _lattice_ends(w)
        if a not in primal or b not in primal:
            raise SamplerError(
                "white vertex is not the midpoint of a lattice edge",
                SamplerMethod.WILSON.value,
                {"white": w},
            )
        adjacency[a].append(b)
        adjacency[b].append(a)
        midpoint[(a, b)] = midpoint[(b, a)] = w
    return _PrimalLattice(
        nodes=tuple(sorted(primal - {g.b0})),
        neighbours={p: tuple(sorted(q)) for p, q in adjacency.items()},
        midpoint=midpoint,
    )


class _UniformStream:
    """Batched uniforms from a Generator."""

    def __init__(self, rng: np.random.Generator, batch: int) -> None:
        self._rng = rng
        self._batch = batch
        self._buffer = rng.random(batch)
        self._k = 0

    def next(self) -> float:
        if self._k == self._batch:
            self._buffer = self._rng.random(self._batch)
            self._k = 0
        u = self._buffer[self._k]
        self._k += 1
        return float(u)


def wilson_tree(
    nodes: tuple[Point, ...],
    neighbours: dict[Point, tuple[Point, ...]],
    root: Point,
    rng: np.random.Generator,
    stats: SamplerStats | None = None,
) -> dict[Point, Point]:
    """Uniform spanning tree as a parent map, by loop-erased random walks."""
    stream = _UniformStream(rng, get_config().sampler.batch_size)
    in_tree = {root}
    nxt: dict[Point, Point] = {}
    steps = 0
    for start in nodes:
        u = start
        while u not in in_tree:
            nbrs = neighbours[u]
            nxt[u] = nbrs[int(stream.next() * len(nbrs))]
            u = nxt[u]
            steps += 1
        u = start
        while u not in in_tree:
            in_tree.add(u)
            u = nxt[u]
    if stats is not None:
        stats.walk_steps += steps
    return {u: nxt[u] for u in nodes}


def sample_wilson(
    g: TemperleyanGraph, rng: np.random.Generator, stats: SamplerStats | None = None
) -> Matching:
    """Uniform dimer cover of a Temperleyan graph via Wilson + Temperley.

    Raises:
        SamplerError: g is not the symmetric or upper Temperleyan variant, or
            the tree does not map to a perfect matching.
    """
    lattice = _primal_lattice(g)
    parent = wilson_tree(lattice.nodes, lattice.neighbours, g.b0, rng, stats)  # type: ignore[arg-type]

    pairs: list[tuple[Point, Point]] = []
    used: set[Point] = set()
    for v, p in parent.items():
        w = lattice.midpoint[(v, p)]
        pairs.append((v, w))
        used.add(w)

    faces = set(g.of_class(VertexClass.B0))
    dual: dict[Point | None, list[tuple[Point | None, Point]]] = {None: []}
    for f in faces:
        dual[f] = []
    for w in g.whites:
        if w in used:
            continue
        sides: list[Point | None] = [f for f in _face_sides(w) if f in faces]
        if not sides:
            raise SamplerError("dual edge joins the outer face to itself", SamplerMethod.WILSON.value)
        if len(sides) == 1:
            sides.append(None)
        a, b = sides
        dual[a].append((b, w))
        dual[b].append((a, w))

    seen: set[Point | None] = {None}
    queue: deque[Point | None] = deque([None])
    while queue:
        f = queue.popleft()
        for h, w in dual[f]:
            if h in seen:
                continue
            seen.add(h)
            pairs.append((h, w))  # type: ignore[arg-type]
            queue.append(h)

    if 2 * len(pairs) != len(g.vertices):
        raise SamplerError(
            "Temperley map did not give a perfect matching",
            SamplerMethod.WILSON.value,
            {"pairs": len(pairs), "vertices": len(g.vertices)},
        )
    if stats is not None:
        stats.draws += 1
    return Matching.of(pairs)


# =============================================================================
# Determinantal sequential sampler
# =============================================================================


def bipartite_kasteleyn(g: LatticeGraph) -> np.ndarray:
    """Whites × blacks matrix with complex phases ζ = (b - w)/|b - w|."""
    phases = complex_phases(g)
    w_index = {w: k for k, w in enumerate(g.whites)}
    b_index = {b: k for k, b in enumerate(g.blacks)}
    A = np.zeros((len(g.whites), len(g.blacks)), dtype=complex)
    for w, b in g.edges:
        A[w_index[w], b_index[b]] = phases[(w, b)]
    return A


@dataclass(eq=False)
class SamplerState:
    """Per-graph sampler data shared read-only across draws.

    For the determinantal method holds the bipartite Kasteleyn matrix and its
    inverse, computed once.
    """

    graph: LatticeGraph
    method: SamplerMethod
    stats: SamplerStats = field(default_factory=SamplerStats)
    matrix: np.ndarray | None = None
    inverse: np.ndarray | None = None
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @classmethod
    def for_graph(
        cls, g: LatticeGraph, method: Literal["auto", "wilson", "determinantal"] | SamplerMethod = "auto"
    ) -> SamplerState:
        resolved = resolve_method(g, method)
        state = cls(graph=g, method=resolved)
        if resolved is SamplerMethod.DETERMINANTAL:
            if len(g.whites) != len(g.blacks):
                raise SamplerError("graph is not balanced", resolved.value)
            state.matrix = bipartite_kasteleyn(g)
            try:
                state.inverse = invert(state.matrix, get_config().linalg.condition_limit)
            except SingularMatrixError as e:
                raise SamplerError("Kasteleyn matrix is singular", resolved.value, e.details) from e
        return state

    def draw(self, rng: np.random.Generator, check: bool = False) -> Matching:
        stats = SamplerStats()
        if self.method is SamplerMethod.WILSON:
            m = sample_wilson(self.graph, rng, stats)  # type: ignore[arg-type]
        else:
            m = sample_determinantal(self.graph, rng, self, stats)
        if check and not m.is_perfect_on(self.graph.to_networkx()):
            raise SamplerError("sample is not a perfect matching", self.method.value)
        with self._lock:
            self.stats.draws += 1
            self.stats.walk_steps += stats.walk_steps
            self.stats.refreshes += stats.refreshes
        return m


def resolve_method(
    g: LatticeGraph, method: Literal["auto", "wilson", "determinantal"] | SamplerMethod = "auto"
) -> SamplerMethod:
    if isinstance(method, SamplerMethod):
        return method
    if method == "wilson":
        return SamplerMethod.WILSON
    if method == "determinantal":
        return SamplerMethod.DETERMINANTAL
    temperleyan = (
        isinstance(g, TemperleyanGraph)
        and g.variant in (GraphVariant.SYMMETRIC, GraphVariant.UPPER)
        and g.b0 is not None
    )
    return SamplerMethod.WILSON if temperleyan else SamplerMethod.DETERMINANTAL


def sample_determinantal(
    g: LatticeGraph,
    rng: np.random.Generator,
    state: SamplerState | None = None,
    stats: SamplerStats | None = None,
) -> Matching:
    """Uniform dimer cover by sequential conditioning on the inverse Kasteleyn matrix.

    Raises:
        SamplerError: the Kasteleyn matrix is singular (no perfect matching).
    """
    if state is None or state.matrix is None:
        state = SamplerState.for_graph(g, SamplerMethod.DETERMINANTAL)
    A = state.matrix
    N = state.inverse.copy()  # type: ignore[union-attr]
    assert A is not None
    cfg = get_config()
    drift_tol = cfg.sampler.drift_tolerance

    whites, blacks = g.whites, g.blacks
    b_index = {b: k for k, b in enumerate(blacks)}
    rows = list(range(len(whites)))
    cols = list(range(len(blacks)))
    pairs: list[tuple[Point, Point]] = []

    while rows:
        r = rows[0]
        alive = {c: k for k, c in enumerate(cols)}
        options = [alive[c] for b in g.neighbors(whites[r]) if (c := b_index[b]) in alive]
        if not options:
            raise SamplerError("white vertex has no free neighbour", SamplerMethod.DETERMINANTAL.value)
        probs = np.abs(A[r, [cols[k] for k in options]] * N[options, 0])
        if abs(probs.sum() - 1) > drift_tol:
            N = invert(A[np.ix_(rows, cols)], cfg.linalg.condition_limit)
            probs = np.abs(A[r, [cols[k] for k in options]] * N[options, 0])
            if stats is not None:
                stats.refreshes += 1
            logger.debug("inverse_refreshed", remaining=len(rows))
        cumulative = np.cumsum(probs / probs.sum())
        pick = min(int(np.searchsorted(cumulative, rng.random(), side="right")), len(options) - 1)
        k = options[pick]
        pairs.append((whites[r], blacks[cols[k]]))
        if len(rows) > 1:
            N = rank2_update(N, rows=[0], cols=[k], condition_limit=cfg.linalg.condition_limit)
        rows.pop(0)
        cols.pop(k)

    if stats is not None:
        stats.draws += 1
    return Matching.of(pairs)


# =============================================================================
# Batches
# =============================================================================


def substreams(
    seed: int | np.random.SeedSequence, count: int
) -> list[np.random.Generator]:
    """Independent per-sample generators split from one seed."""
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [np.random.default_rng(s) for s in root.spawn(count)]


def draw_samples(
    g: LatticeGraph,
    count: int,
    seed: int | np.random.SeedSequence,
    method: Literal["auto", "wilson", "determinantal"] | SamplerMethod = "auto",
    threads: int = 1,
    state: SamplerState | None = None,
) -> list[Matching]:
    """``count`` independent samples; identical for any ``threads``."""
    state = state or SamplerState.for_graph(g, method)
    check = get_config().logging.level.upper() == "DEBUG"
    rngs = substreams(seed, count)
    if threads <= 1:
        samples = [state.draw(rng, check) for rng in rngs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            samples = list(pool.map(lambda rng: state.draw(rng, check), rngs))
    logger.debug(
        "samples_drawn",
        method=state.method.value,
        count=count,
        refreshes=state.stats.refreshes,
    )
    return samples


def dump_matchings(samples: Sequence[Matching], g: LatticeGraph, path: Path) -> Path:
    """One matching per line as sorted indices into ``g.edges``; gzip for ``.gz``.

    Raises:
        SamplerError: a matched pair is not an edge of ``g``.
    """
    index = {edge: k for k, edge in enumerate(g.edges)}
    lines = []
    for m in samples:
        try:
            ids = sorted(index[(w, b) if not g.is_black(w) else (b, w)] for w, b in m)
        except KeyError as e:
            raise SamplerError("matching uses a pair that is not an edge", details={"pair": str(e)}) from e
        lines.append(" ".join(map(str, ids)))
    text = "\n".join(lines) + "\n"
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.suffix == ".gz":
        with gzip.open(path, "wt", encoding="utf-8") as handle:
            handle.write(text)
    else:
        path.write_text(text, encoding="utf-8")
    return path
