"""Level-k collared graph complexes of 1D labeled patterns.

Tiles are the gaps of a labeled sample; a k-collared tile class is a letter
together with k letters of context on each side.  Gluing endpoint classes
along observed adjacencies yields a finite directed graph whose rational
1-cohomology is computed two ways (Euler count and coboundary rank).  Edge
cochains integrate to site functions on the vertices and are evaluated on
recurrence loops to measure asymptotic negligibility.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .exactnum import ExactScalar, ExactVector, vec1
from .patterns import (
    PatternSample,
    Recurrence,
    WindowError,
    as_scalar,
    classify_patches,
)


class CollarError(ValueError):
    """Collar too small for the requested operation, or window too narrow."""


@dataclass(frozen=True)
class CollaredTileClass:
    """A letter with k letters of observed context on each side."""

    letter: str
    left: str
    right: str

    def text(self) -> str:
        return f"{self.left}|{self.letter}|{self.right}"

    @classmethod
    def from_text(cls, text: str) -> "CollaredTileClass":
        parts = text.split("|")
        if len(parts) == 1:
            return cls(parts[0], "", "")
        if len(parts) != 3:
            raise ValueError(f"bad collared-class key {text!r}")
        return cls(parts[1], parts[0], parts[2])


class _UnionFind:
    def __init__(self):
        self.parent: dict = {}

    def find(self, x):
        p = self.parent.setdefault(x, x)
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


class ApGraph:
    """Level-k collared graph: edges are collared tile classes, vertices are
    endpoint classes glued along observed adjacencies."""

    def __init__(self, sample: PatternSample, level: int):
        if sample.dim != 1:
            raise WindowError("collared graphs are built from 1D samples")
        if sample.labels is None:
            raise ValueError("sample carries no tile labels")
        if level < 0:
            raise ValueError("collar level must be >= 0")
        word = [lab for lab in sample.labels[:-1]]
        if any(lab is None for lab in word):
            raise ValueError("interior points must all be labeled")
        n_tiles = len(word)
        if n_tiles < 2 * level + 1:
            raise WindowError(f"window holds no tile with a full {level}-collar")

        self.sample = sample
        self.level = level
        self.word = "".join(word)

        classes: dict[CollaredTileClass, int] = {}
        occ: dict[int, int] = {}
        for i in range(level, n_tiles - level):
            c = CollaredTileClass(
                letter=self.word[i],
                left=self.word[i - level:i],
                right=self.word[i + 1:i + 1 + level],
            )
            ei = classes.setdefault(c, len(classes))
            occ[i] = ei
        self.edges: tuple[CollaredTileClass, ...] = tuple(classes)
        self.occurrence: dict[int, int] = occ

        # glue endpoints: right end of tile i meets left end of tile i+1
        uf = _UnionFind()
        for e in range(len(self.edges)):
            uf.find((e, 0))
            uf.find((e, 1))
        for i in sorted(occ)[:-1]:
            if i + 1 in occ:
                uf.union((occ[i], 1), (occ[i + 1], 0))
        roots: dict = {}
        source, target = [], []
        for e in range(len(self.edges)):
            for side, acc in ((0, source), (1, target)):
                root = uf.find((e, side))
                acc.append(roots.setdefault(root, len(roots)))
        self.edge_source: tuple[int, ...] = tuple(source)
        self.edge_target: tuple[int, ...] = tuple(target)
        self.n_vertices: int = len(roots)
        self._uf_roots = roots
        self._uf = uf

        # exact geometric data per edge class, from any occurrence
        lengths: list[ExactScalar | None] = [None] * len(self.edges)
        lefts: list[ExactScalar | None] = [None] * len(self.edges)
        rights: list[ExactScalar | None] = [None] * len(self.edges)
        gaps = sample.gaps()
        zero = ExactScalar(0, 0, sample.d)
        for i, e in occ.items():
            if lengths[e] is not None:
                continue
            lengths[e] = gaps[i]
            lspan = zero
            for j in range(i - level, i):
                lspan = lspan + gaps[j]
            rspan = zero
            for j in range(i + 1, i + 1 + level):
                rspan = rspan + gaps[j]
            lefts[e] = lspan
            rights[e] = rspan
        self.edge_lengths: tuple[ExactScalar, ...] = tuple(lengths)
        self._left_extent = tuple(lefts)
        self._right_extent = tuple(rights)

    def __repr__(self):
        return (
            f"<ApGraph level={self.level} edges={len(self.edges)} "
            f"vertices={self.n_vertices}>"
        )

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def min_context_reach(self) -> ExactScalar:
        """Least geometric context length guaranteed by the collar on either
        side of any edge class; an edge class determines the pattern at least
        this far beyond its endpoints."""
        best = None
        for l, r in zip(self._left_extent, self._right_extent):
            for v in (l, r):
                if best is None or (v - best).sign() < 0:
                    best = v
        return best

    def max_collared_extent(self) -> ExactScalar:
        """Largest total geometric extent (left context + tile + right
        context) over edge classes; loop evaluation needs recurrence sizes
        beyond this."""
        best = None
        for l, c, r in zip(self._left_extent, self.edge_lengths, self._right_extent):
            v = l + c + r
            if best is None or (v - best).sign() > 0:
                best = v
        return best

    def collared_tile_range(self) -> tuple[int, int]:
        """Tile indices [lo, hi) carrying a full collar."""
        n_tiles = len(self.word)
        return self.level, n_tiles - self.level

    def vertex_of_point(self, i: int) -> int | None:
        """Vertex class of the i-th sample point, None for uncollared ends."""
        lo, hi = self.collared_tile_range()
        if lo <= i < hi:
            return self._vertex((self.occurrence[i], 0))
        if lo <= i - 1 < hi:
            return self._vertex((self.occurrence[i - 1], 1))
        return None

    def _vertex(self, node) -> int:
        return self._uf_roots[self._uf.find(node)]

    def components(self) -> int:
        uf = _UnionFind()
        for v in range(self.n_vertices):
            uf.find(v)
        for s, t in zip(self.edge_source, self.edge_target):
            uf.union(s, t)
        return len({uf.find(v) for v in range(self.n_vertices)})


def build_ap_graph(sample: PatternSample, level: int) -> ApGraph:
    return ApGraph(sample, level)


@dataclass(frozen=True)
class ForgetMap:
    """Collar-reduction graph morphism from level k+1 to level k."""

    edge_map: tuple[int, ...]
    vertex_map: tuple[int, ...]


def forget_map(fine: ApGraph, coarse: ApGraph) -> ForgetMap:
    """Map each (k+1)-collared class to its k-collar reduction; verified to
    be a surjective graph morphism."""
    if fine.level != coarse.level + 1:
        raise ValueError("forget map joins consecutive collar levels")
    if fine.sample is not coarse.sample:
        raise ValueError("graphs built from different samples")
    k = coarse.level
    index = {c: i for i, c in enumerate(coarse.edges)}
    edge_map = []
    for c in fine.edges:
        red = CollaredTileClass(
            letter=c.letter,
            left=c.left[-k:] if k else "",
            right=c.right[:k],
        )
        if red not in index:
            raise CollarError(f"reduced class {red.text()} unseen at level {k}")
        edge_map.append(index[red])
    vertex_map: list[int | None] = [None] * fine.n_vertices
    for e, em in enumerate(edge_map):
        for sv, tv in (
            (fine.edge_source[e], coarse.edge_source[em]),
            (fine.edge_target[e], coarse.edge_target[em]),
        ):
            if vertex_map[sv] is None:
                vertex_map[sv] = tv
            elif vertex_map[sv] != tv:
                raise CollarError(
                    "collar reduction is not a graph morphism (window censoring)"
                )
    if any(v is None for v in vertex_map):
        raise CollarError("unreached vertex in collar reduction")
    if set(edge_map) != set(range(coarse.n_edges)):
        raise CollarError("collar reduction is not surjective on edges")
    return ForgetMap(tuple(edge_map), tuple(vertex_map))


# -- rational cohomology -------------------------------------------------------


def coboundary_matrix(n_vertices: int, edges: Sequence[tuple[int, int]]):
    """Matrix of g -> (e -> g(t(e)) - g(s(e))) as rows over Q."""
    M = []
    for s, t in edges:
        row = [Fraction(0)] * n_vertices
        row[t] += 1
        row[s] -= 1
        M.append(row)
    return M


def matrix_rank(M) -> int:
    """Rank over Q by fraction-free Gaussian elimination."""
    if not M:
        return 0
    A = [row[:] for row in M]
    rows, cols = len(A), len(A[0])
    rank = 0
    for col in range(cols):
        piv = next((r for r in range(rank, rows) if A[r][col] != 0), None)
        if piv is None:
            continue
        A[rank], A[piv] = A[piv], A[rank]
        inv = A[rank][col]
        A[rank] = [v / inv for v in A[rank]]
        for r in range(rows):
            if r != rank and A[r][col] != 0:
                f = A[r][col]
                A[r] = [v - f * w for v, w in zip(A[r], A[rank])]
        rank += 1
        if rank == rows:
            break
    return rank


def h1_rank_euler(n_vertices: int, edges: Sequence[tuple[int, int]]) -> int:
    """rank H^1 = E - V + C for a graph (no 2-cells)."""
    uf = _UnionFind()
    for v in range(n_vertices):
        uf.find(v)
    for s, t in edges:
        uf.union(s, t)
    comps = len({uf.find(v) for v in range(n_vertices)})
    return len(edges) - n_vertices + comps


def h1_rank_matrix(n_vertices: int, edges: Sequence[tuple[int, int]]) -> int:
    """rank H^1 = E - rank(coboundary), exact rational elimination."""
    return len(edges) - matrix_rank(coboundary_matrix(n_vertices, edges))


def h1_basis(n_vertices: int, edges: Sequence[tuple[int, int]]) -> list[int]:
    """Edge indices whose indicator cochains descend to a basis of
    H^1 = Q^E / im(coboundary): the non-pivot coordinates of im's echelon."""
    D = coboundary_matrix(n_vertices, edges)
    if not D:
        return []
    # columns of the coboundary span im inside Q^E; row reduce its transpose
    cols = len(D)
    A = [[D[e][v] for e in range(cols)] for v in range(n_vertices)]
    pivots = []
    rank = 0
    for col in range(cols):
        piv = next((r for r in range(rank, n_vertices) if A[r][col] != 0), None)
        if piv is None:
            continue
        A[rank], A[piv] = A[piv], A[rank]
        inv = A[rank][col]
        A[rank] = [v / inv for v in A[rank]]
        for r in range(n_vertices):
            if r != rank and A[r][col] != 0:
                f = A[r][col]
                A[r] = [v - f * w for v, w in zip(A[r], A[rank])]
        pivots.append(col)
        rank += 1
    return [e for e in range(cols) if e not in pivots]


def graph_h1(graph: ApGraph) -> dict:
    """Both rank computations and a quotient basis for one graph."""
    edges = list(zip(graph.edge_source, graph.edge_target))
    return {
        "rank_euler": h1_rank_euler(graph.n_vertices, edges),
        "rank_matrix": h1_rank_matrix(graph.n_vertices, edges),
        "basis_edges": h1_basis(graph.n_vertices, edges),
    }


# -- cochains -------------------------------------------------------------------


@dataclass(frozen=True)
class Cochain1:
    """Vector values on the edge classes of a collared graph."""

    graph: ApGraph
    values: tuple[ExactVector, ...]

    def __post_init__(self):
        if len(self.values) != self.graph.n_edges:
            raise ValueError("one value per edge class required")
        dims = {v.dim for v in self.values}
        if len(dims) != 1:
            raise ValueError("mixed cochain value dimensions")

    @property
    def value_dim(self) -> int:
        return self.values[0].dim

    def value_for_class(self, text: str) -> ExactVector:
        c = CollaredTileClass.from_text(text)
        for i, e in enumerate(self.graph.edges):
            if e == c:
                return self.values[i]
        raise KeyError(text)


def tile_length_cochain(graph: ApGraph) -> Cochain1:
    """The cochain of tile lengths: the class of the identity's increments."""
    return Cochain1(graph, tuple(vec1(x) for x in graph.edge_lengths))


def scalar_cochain(graph: ApGraph, per_letter: dict) -> Cochain1:
    """Constant value per letter, lifted to all collared classes."""
    vals = []
    for c in graph.edges:
        v = per_letter[c.letter]
        vals.append(v if isinstance(v, ExactVector) else vec1(v))
    return Cochain1(graph, tuple(vals))


def delta0(graph: ApGraph, vertex_values: Sequence[ExactVector]) -> Cochain1:
    """Coboundary of a vertex function: e -> g(t(e)) - g(s(e))."""
    if len(vertex_values) != graph.n_vertices:
        raise ValueError("one value per vertex required")
    vals = tuple(
        vertex_values[t] - vertex_values[s]
        for s, t in zip(graph.edge_source, graph.edge_target)
    )
    return Cochain1(graph, vals)


def increment_cochain(phi, graph: ApGraph, r) -> Cochain1:
    """Edge values phi(tile end) - phi(tile start), one per class.

    Requires the collar to determine the pattern at least r beyond each tile
    (min context reach >= r, where r is the declared equivariance range of
    phi's increments) and verifies well-definedness over every occurrence;
    a disagreement means the collar level is too small for r.
    """
    sample = graph.sample
    r_s = as_scalar(r, sample.d)
    if (graph.min_context_reach() - r_s).sign() < 0:
        raise CollarError(
            f"collar reach {float(graph.min_context_reach()):.3f} < declared range {float(r_s):.3f}"
        )
    values: list[ExactVector | None] = [None] * graph.n_edges
    for i, e in graph.occurrence.items():
        p, q = sample.points[i], sample.points[i + 1]
        if not (phi.defined_at(p) and phi.defined_at(q)):
            continue
        inc = phi(q) - phi(p)
        if values[e] is None:
            values[e] = inc
        elif values[e] != inc:
            raise CollarError(
                f"occurrences of {graph.edges[e].text()} disagree: collar too small"
            )
    if any(v is None for v in values):
        raise CollarError("some edge class has no occurrence inside phi's domain")
    return Cochain1(graph, tuple(values))


def integrate_cocycle(f: Cochain1, base: ExactVector) -> "SiteFunction":
    """Vertex function psi with psi(base) = 0 and increment f over each
    collared tile; uncollared boundary tiles are excluded from the domain."""
    from .equivariance import SiteFunction

    graph = f.graph
    sample = graph.sample
    lo, hi = graph.collared_tile_range()
    pts = sample.points
    dim = f.value_dim
    zero = ExactVector(tuple(ExactScalar(0, 0, sample.d) for _ in range(dim)))
    psi_vals = [zero]
    acc = zero
    for i in range(lo, hi):
        acc = acc + f.values[graph.occurrence[i]]
        psi_vals.append(acc)
    domain = [pts[i] for i in range(lo, hi + 1)]
    base_idx = next((j for j, p in enumerate(domain) if p == base), None)
    if base_idx is None:
        raise ValueError("base point is not a collared vertex of the sample")
    shift = psi_vals[base_idx]
    mapping = {p: v - shift for p, v in zip(domain, psi_vals)}
    return SiteFunction(sample, mapping)


@dataclass(frozen=True)
class LoopEvaluation:
    recurrence: Recurrence
    value: ExactVector

    @property
    def norm(self) -> float:
        import math

        return math.sqrt(float(self.value.norm_sq()))


@dataclass(frozen=True)
class RecurrenceEvaluation:
    entries: tuple[LoopEvaluation, ...]
    skipped: int  # recurrences below the collar extent (no loop defined)

    def profile(self, radii) -> list[tuple[float, float]]:
        """sup{|value| : size >= r} per requested r, from the explicit list."""
        out = []
        for r in radii:
            rf = float(r)
            vals = [e.norm for e in self.entries if float(e.recurrence.size) >= rf]
            out.append((rf, max(vals) if vals else 0.0))
        return out


def evaluate_on_recurrences(
    f: Cochain1, recurrences: Sequence[Recurrence], base: ExactVector | None = None
) -> RecurrenceEvaluation:
    """psi(x2) - psi(x1) per recurrence, psi the integrated cochain.

    Recurrences of size below the collared extent do not define loops and are
    skipped (counted).  Coboundaries evaluate to exactly zero on every
    qualifying loop.
    """
    graph = f.graph
    extent = graph.max_collared_extent()
    if base is None:
        lo, _ = graph.collared_tile_range()
        base = graph.sample.points[lo]
    psi = integrate_cocycle(f, base)
    entries = []
    skipped = 0
    for rec in recurrences:
        if (rec.size - extent).sign() < 0:
            skipped += 1
            continue
        if not (psi.defined_at(rec.x1) and psi.defined_at(rec.x2)):
            skipped += 1
            continue
        entries.append(LoopEvaluation(rec, psi(rec.x2) - psi(rec.x1)))
    return RecurrenceEvaluation(tuple(entries), skipped)


def negligibility_profile(f: Cochain1, radii) -> list[tuple[float, float]]:
    """sup{|psi(x2) - psi(x1)| : recurrence size >= r} without enumerating
    pairs: anchors with equal r-patches are exactly the recurrences of size
    >= r, so the spread of psi inside each r-patch class realizes the sup.

    Radii below the collared extent are rejected (loop condition).
    """
    graph = f.graph
    sample = graph.sample
    extent = graph.max_collared_extent()
    if f.value_dim != 1:
        raise ValueError("profile implemented for scalar cochains")
    lo, _ = graph.collared_tile_range()
    psi = integrate_cocycle(f, sample.points[lo])
    out = []
    for r in radii:
        r_s = as_scalar(r, sample.d)
        if (r_s - extent).sign() < 0:
            raise CollarError(
                f"profile radius {float(r_s):.3f} below collared extent "
                f"{float(extent):.3f}"
            )
        table = classify_patches(sample, r_s)
        sup = 0.0
        for members in table.anchor_indices:
            vals = [
                psi(sample.points[i]).coords[0]
                for i in members
                if psi.defined_at(sample.points[i])
            ]
            if len(vals) < 2:
                continue
            lo_v = min(vals, key=float)
            hi_v = max(vals, key=float)
            for v in vals:
                if (v - lo_v).sign() < 0:
                    lo_v = v
                if (v - hi_v).sign() > 0:
                    hi_v = v
            sup = max(sup, float(hi_v - lo_v))
        out.append((float(r_s), sup))
    return out
