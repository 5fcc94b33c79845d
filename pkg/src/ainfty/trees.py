"""Rooted metric ribbon trees: enumeration, contraction poset, domains.

A tree is canonically encoded by its planar shape, a nested tuple in which a
leaf is () and an internal vertex is the tuple of its children (always at
least two, so no vertex has valency 2).  The shape's root node is the internal
vertex adjacent to the root edge; leaves are ordered counter-clockwise after
the root.  Isomorphism of ribbon trees is equality of shapes.

Edges are oriented toward the root.  head(e) is the endpoint the orientation
points away from (the far-from-root one), tail(e) the endpoint it points into.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Optional, Sequence

Shape = tuple  # nested tuples; () is a leaf
Path = tuple[int, ...]  # child indices from the shape root


class TreeError(ValueError):
    """Structurally invalid tree input."""


class InvalidContractionError(TreeError):
    """Attempt to contract an external edge."""


@dataclass(frozen=True, order=True)
class Edge:
    """Tree edge as (parent, child) vertex ids; parent is nearer the root."""

    parent: int
    child: int


def _validate_shape(shape: Shape) -> int:
    """Return the leaf count; reject vertices of valency 2."""
    if shape == ():
        return 1
    if not isinstance(shape, tuple) or len(shape) < 2:
        raise TreeError(f"internal vertex needs >= 2 children, got {shape!r}")
    return sum(_validate_shape(child) for child in shape)


def _node_at(shape: Shape, path: Path) -> Shape:
    node = shape
    for idx in path:
        node = node[idx]
    return node


def _all_paths(shape: Shape) -> list[Path]:
    """Every node path in depth-first preorder (root node first)."""
    out: list[Path] = []

    def walk(node: Shape, path: Path):
        out.append(path)
        for i, child in enumerate(node):
            walk(child, path + (i,))

    walk(shape, ())
    return out


class RibbonTree:
    """Combinatorial rooted ribbon tree.

    Vertex ids: 0 is the external root, internal vertices are numbered in
    preorder from 1, then leaves in planar order.  The cyclic order of edges
    at an internal vertex starts with its rootward edge.
    """

    def __init__(self, shape: Shape):
        self.num_leaves = _validate_shape(shape)
        if self.num_leaves < 2:
            raise TreeError("a stable tree needs at least 3 external vertices")
        self.shape = shape
        self.root_vertex = 0

        internal_paths = [p for p in _all_paths(shape) if _node_at(shape, p) != ()]
        leaf_paths = [p for p in _all_paths(shape) if _node_at(shape, p) == ()]
        self._path_of_internal: dict[int, Path] = {}
        self._internal_at: dict[Path, int] = {}
        for i, p in enumerate(internal_paths, start=1):
            self._path_of_internal[i] = p
            self._internal_at[p] = i
        first_leaf = len(internal_paths) + 1
        self._leaf_at: dict[Path, int] = {}
        self._path_of_leaf: dict[int, Path] = {}
        for i, p in enumerate(leaf_paths):
            vid = first_leaf + i
            self._leaf_at[p] = vid
            self._path_of_leaf[vid] = p

        self.internal_vertices = tuple(range(1, first_leaf))
        self.leaves = tuple(first_leaf + i for i in range(len(leaf_paths)))

        self._edge_of_path: dict[Path, Edge] = {}
        edges = []
        for p in _all_paths(shape):
            child_vid = self._vertex_at(p)
            if p == ():
                edge = Edge(self.root_vertex, child_vid)
            else:
                edge = Edge(self._vertex_at(p[:-1]), child_vid)
            self._edge_of_path[p] = edge
            edges.append(edge)
        self.edges = tuple(edges)
        self._path_of_edge = {e: p for p, e in self._edge_of_path.items()}

    def _vertex_at(self, path: Path) -> int:
        if path in self._internal_at:
            return self._internal_at[path]
        return self._leaf_at[path]

    # -- structure queries ----------------------------------------------------

    @property
    def num_external(self) -> int:
        return self.num_leaves + 1

    @property
    def root_edge(self) -> Edge:
        return self._edge_of_path[()]

    def internal_edges(self) -> tuple[Edge, ...]:
        return tuple(
            e for e in self.edges
            if e.parent != self.root_vertex and e.child in self.internal_vertices
        )

    def external_edges(self) -> tuple[Edge, ...]:
        internal = set(self.internal_edges())
        return tuple(e for e in self.edges if e not in internal)

    def leaf_edges(self) -> tuple[Edge, ...]:
        """Edges at the k inputs, in planar leaf order."""
        return tuple(
            self._edge_of_path[self._path_of_leaf[v]] for v in self.leaves
        )

    def valency(self, vertex: int) -> int:
        if vertex in self._path_of_internal:
            path = self._path_of_internal[vertex]
            return len(_node_at(self.shape, path)) + 1
        return 1

    def cyclic_edges(self, vertex: int) -> tuple[Edge, ...]:
        """Incident edges in the planar cyclic order, rootward edge first."""
        if vertex not in self._path_of_internal:
            if vertex == self.root_vertex:
                return (self.root_edge,)
            return (self._edge_of_path[self._path_of_leaf[vertex]],)
        path = self._path_of_internal[vertex]
        node = _node_at(self.shape, path)
        around = [self._edge_of_path[path]]
        around.extend(self._edge_of_path[path + (i,)] for i in range(len(node)))
        return tuple(around)

    def is_trivalent(self) -> bool:
        return all(self.valency(v) == 3 for v in self.internal_vertices)

    def edge_path(self, edge: Edge) -> Path:
        try:
            return self._path_of_edge[edge]
        except KeyError:
            raise TreeError(f"{edge} is not an edge of this tree")

    # -- canonical form ---------------------------------------------------------

    def canonical(self) -> str:
        def render(node: Shape) -> str:
            return "(" + "".join(render(c) for c in node) + ")"

        return render(self.shape)

    @staticmethod
    def from_canonical(text: str) -> "RibbonTree":
        pos = 0

        def parse() -> Shape:
            nonlocal pos
            if pos >= len(text) or text[pos] != "(":
                raise TreeError(f"bad canonical string at index {pos}: {text!r}")
            pos += 1
            children = []
            while pos < len(text) and text[pos] == "(":
                children.append(parse())
            if pos >= len(text) or text[pos] != ")":
                raise TreeError(f"unbalanced canonical string: {text!r}")
            pos += 1
            return tuple(children)

        shape = parse()
        if pos != len(text):
            raise TreeError(f"trailing input in canonical string: {text!r}")
        return RibbonTree(shape)

    def adjacency_listing(self) -> str:
        """Indented rendering: one line per vertex, children beneath parents."""
        lines = [f"root#{self.root_vertex}"]

        def walk(path: Path, depth: int):
            vid = self._vertex_at(path)
            node = _node_at(self.shape, path)
            label = f"v#{vid}" if node != () else f"leaf#{vid}"
            lines.append("  " * depth + label)
            for i in range(len(node)):
                walk(path + (i,), depth + 1)

        walk((), 1)
        return "\n".join(lines)

    def __eq__(self, other):
        return isinstance(other, RibbonTree) and self.shape == other.shape

    def __hash__(self):
        return hash(self.shape)

    def __repr__(self):
        return f"RibbonTree({self.canonical()!r})"


def head_tail(tree: RibbonTree, edge: Edge) -> tuple[int, int]:
    """(head, tail) under the toward-root orientation.

    head(e) is the far-from-root endpoint (the orientation leaves it), tail(e)
    the near one; for the root edge the head is the internal vertex.
    """
    tree.edge_path(edge)
    return edge.child, edge.parent


@dataclass(frozen=True)
class MetricRibbonTree:
    """Tree plus strictly positive rational lengths on internal edges."""

    tree: RibbonTree
    lengths: dict[Edge, Fraction]

    def __post_init__(self):
        expected = set(self.tree.internal_edges())
        got = set(self.lengths)
        if expected != got:
            raise TreeError(
                f"lengths must cover internal edges exactly; missing {expected - got}, "
                f"extra {got - expected}"
            )
        fixed = {e: Fraction(v) for e, v in self.lengths.items()}
        for e, v in fixed.items():
            if v <= 0:
                raise TreeError(f"length of {e} must be positive, got {v}")
        object.__setattr__(self, "lengths", fixed)

    def __hash__(self):
        return hash((self.tree, tuple(sorted(self.lengths.items()))))


@dataclass(frozen=True)
class ExtendedMetric:
    """Lengths allowed to reach zero (the closed stratum)."""

    tree: RibbonTree
    lengths: dict[Edge, Fraction]

    def __post_init__(self):
        fixed = {e: Fraction(v) for e, v in self.lengths.items()}
        for e, v in fixed.items():
            if v < 0:
                raise TreeError(f"negative limit on {e}: {v}")
        object.__setattr__(self, "lengths", fixed)


def enumerate_shapes(num_leaves: int) -> list[Shape]:
    return list(_shapes(num_leaves))


@lru_cache(maxsize=None)
def _shapes(num_leaves: int) -> tuple[Shape, ...]:
    if num_leaves == 1:
        return ((),)
    out = []
    for parts in _compositions(num_leaves):
        if len(parts) < 2:
            continue
        for children in itertools.product(*[_shapes(p) for p in parts]):
            out.append(tuple(children))
    return tuple(out)


def _compositions(total: int) -> Iterable[tuple[int, ...]]:
    """Ordered ways to write total as a sum of positive integers."""
    if total == 0:
        yield ()
        return
    for head in range(1, total + 1):
        for rest in _compositions(total - head):
            yield (head,) + rest


def enumerate_trees(num_external: int) -> list[RibbonTree]:
    """All ribbon trees with the given number of external vertices,
    duplicate-free up to root- and planarity-preserving isomorphism."""
    if num_external < 3:
        raise TreeError(f"no stable tree with {num_external} external vertices")
    trees = [RibbonTree(s) for s in _shapes(num_external - 1)]
    trees.sort(key=lambda t: t.canonical())
    return trees


def stratum_params(tree: RibbonTree) -> int:
    """Number of metric parameters: one length per internal edge."""
    return len(tree.internal_edges())


def _splice(shape: Shape, path: Path) -> Shape:
    """Contract the edge above the node at path into its parent."""
    if not path:
        raise InvalidContractionError("cannot contract the root edge")

    def rebuild(node: Shape, rel: Path) -> Shape:
        idx = rel[0]
        if len(rel) == 1:
            victim = node[idx]
            if victim == ():
                raise InvalidContractionError("cannot contract a leaf edge")
            return node[:idx] + victim + node[idx + 1:]
        return node[:idx] + (rebuild(node[idx], rel[1:]),) + node[idx + 1:]

    return rebuild(shape, path)


def _path_after_contraction(path: Path, contracted: Path,
                            spliced_width: int) -> Optional[Path]:
    """Where a node path lands once the node at `contracted` is merged up."""
    if path == contracted:
        return None
    parent, idx = contracted[:-1], contracted[-1]
    if path[:len(parent)] != parent or len(path) <= len(parent):
        return path
    j = path[len(parent)]
    rest = path[len(parent) + 1:]
    if j < idx:
        return path
    if j > idx:
        return parent + (j + spliced_width - 1,) + rest
    # descends through the contracted node
    return parent + (idx + rest[0],) + rest[1:]


def contract_edge(tree: RibbonTree, edge: Edge) -> RibbonTree:
    """Shrink an internal edge; the merged vertex keeps the concatenated
    cyclic order, so the leaf order is untouched."""
    new_tree, _ = _contract_with_map(tree, edge)
    return new_tree


def _contract_with_map(tree: RibbonTree, edge: Edge
                       ) -> tuple[RibbonTree, dict[Edge, Edge]]:
    if edge not in set(tree.internal_edges()):
        raise InvalidContractionError(f"{edge} is not an internal edge")
    path = tree.edge_path(edge)
    width = len(_node_at(tree.shape, path))
    new_tree = RibbonTree(_splice(tree.shape, path))
    mapping: dict[Edge, Edge] = {}
    for old_edge, old_path in tree._path_of_edge.items():
        new_path = _path_after_contraction(old_path, path, width)
        if new_path is not None:
            mapping[old_edge] = new_tree._edge_of_path[new_path]
    return new_tree, mapping


def limit_metric(seq: Sequence[MetricRibbonTree],
                 limits) -> MetricRibbonTree:
    """Limit of metrics on a fixed tree: zero-length edges get contracted.

    The sequence fixes the underlying tree; limits (a mapping or an
    ExtendedMetric) assigns the limiting length of every internal edge.  The
    result lives on the contraction of all zero-limit edges and is
    independent of the contraction order.
    """
    if not seq:
        raise TreeError("empty sequence of metric trees")
    tree = seq[0].tree
    for m in seq:
        if m.tree != tree:
            raise TreeError("metric trees in a limit must share one tree")
    if isinstance(limits, ExtendedMetric):
        if limits.tree != tree:
            raise TreeError("limit metric lives on a different tree")
        limits = limits.lengths
    limits = {e: Fraction(v) for e, v in limits.items()}
    if set(limits) != set(tree.internal_edges()):
        raise TreeError("limits must be given for every internal edge")
    for e, v in limits.items():
        if v < 0:
            raise TreeError(f"negative limit on {e}: {v}")

    current = tree
    lengths = dict(limits)
    while True:
        zero = [e for e, v in lengths.items() if v == 0]
        if not zero:
            break
        victim = zero[0]
        current, mapping = _contract_with_map(current, victim)
        lengths = {mapping[e]: v for e, v in lengths.items() if e != victim}
    return MetricRibbonTree(current, lengths)


@dataclass(frozen=True)
class DomainDescriptor:
    """Combinatorial model of the assembled domain of a tree trajectory.

    intervals: per edge, ("segment", l) for internal edges, ("ray_minus",)
    for non-root external edges (-inf, 0], ("ray_plus",) for the root edge
    [0, inf).  identifications: one record per (vertex, incident edge) in
    cyclic order: (vertex, mark index, edge, glued parameter), the parameter
    being l(e) at the head of an internal edge and 0 otherwise.
    """

    intervals: dict[Edge, tuple]
    disk_marks: dict[int, int]
    identifications: tuple[tuple[int, int, Edge, Fraction], ...]


def assemble_domain(metric: MetricRibbonTree) -> DomainDescriptor:
    tree = metric.tree
    internal = set(tree.internal_edges())
    intervals: dict[Edge, tuple] = {}
    for e in tree.edges:
        if e in internal:
            intervals[e] = ("segment", metric.lengths[e])
        elif e == tree.root_edge:
            intervals[e] = ("ray_plus",)
        else:
            intervals[e] = ("ray_minus",)

    marks: dict[int, int] = {}
    records = []
    for v in tree.internal_vertices:
        around = tree.cyclic_edges(v)
        marks[v] = len(around)
        for mark_index, e in enumerate(around, start=1):
            head, _ = head_tail(tree, e)
            if e in internal and head == v:
                parameter = metric.lengths[e]
            else:
                parameter = Fraction(0)
            records.append((v, mark_index, e, parameter))
    return DomainDescriptor(intervals, marks, tuple(records))


@dataclass(frozen=True)
class ContractionPoset:
    """Covering relations of the contraction order on one stratum family."""

    trees: tuple[RibbonTree, ...]
    covers: frozenset[tuple[int, int]]  # (bigger, smaller): one edge shrunk

    def index(self, tree: RibbonTree) -> int:
        return self.trees.index(tree)

    def maximal(self) -> list[RibbonTree]:
        smaller = {j for _, j in self.covers}
        return [t for i, t in enumerate(self.trees) if i not in smaller]

    def minimal(self) -> list[RibbonTree]:
        bigger = {i for i, _ in self.covers}
        return [t for i, t in enumerate(self.trees) if i not in bigger]

    def is_graded_by_internal_edges(self) -> bool:
        ranks = [stratum_params(t) for t in self.trees]
        return all(ranks[i] == ranks[j] + 1 for i, j in self.covers)


def contraction_poset(num_external: int) -> ContractionPoset:
    trees = enumerate_trees(num_external)
    index = {t.shape: i for i, t in enumerate(trees)}
    covers = set()
    for i, t in enumerate(trees):
        for e in t.internal_edges():
            smaller = contract_edge(t, e)
            covers.add((i, index[smaller.shape]))
    return ContractionPoset(tuple(trees), frozenset(covers))


def catalan(n: int) -> int:
    value = 1
    for i in range(n):
        value = value * 2 * (2 * i + 1) // (i + 2)
    return value
