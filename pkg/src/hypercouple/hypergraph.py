"""Hypergraph representation, text I/O and instance generators.

Vertices are the integers ``0..n-1``. Edges are stored as sorted tuples so
that two hypergraphs with the same edge sets compare equal after
:func:`canonical`.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

log = logging.getLogger(__name__)

Edge = tuple[int, ...]


class HypergraphFormatError(ValueError):
    """Raised on malformed hypergraph text; carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class Hypergraph:
    n: int
    edges: tuple[Edge, ...]

    def __init__(self, n: int, edges: Iterable[Iterable[int]] = ()):
        if n < 0:
            raise ValueError(f"vertex count must be non-negative, got {n}")
        canon = []
        for idx, e in enumerate(edges):
            edge = tuple(sorted(int(v) for v in e))
            if len(edge) < 2:
                raise ValueError(f"edge {idx} has {len(edge)} vertices; need at least 2")
            if len(set(edge)) != len(edge):
                raise ValueError(f"edge {idx} repeats a vertex: {edge}")
            if edge[0] < 0 or edge[-1] >= n:
                bad = edge[0] if edge[0] < 0 else edge[-1]
                raise ValueError(f"edge {idx}: vertex {bad} out of range [0, {n})")
            canon.append(edge)
        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "edges", tuple(canon))

    def __len__(self) -> int:
        return len(self.edges)

    @cached_property
    def incidence(self) -> tuple[tuple[int, ...], ...]:
        """Edge indices through each vertex."""
        inc: list[list[int]] = [[] for _ in range(self.n)]
        for j, e in enumerate(self.edges):
            for v in e:
                inc[v].append(j)
        return tuple(tuple(x) for x in inc)

    @cached_property
    def degrees(self) -> tuple[int, ...]:
        return tuple(len(x) for x in self.incidence)

    @property
    def max_degree(self) -> int:
        return max(self.degrees, default=0)

    @property
    def min_edge_size(self) -> int:
        return min((len(e) for e in self.edges), default=0)

    @property
    def max_edge_size(self) -> int:
        return max((len(e) for e in self.edges), default=0)

    @property
    def is_graph(self) -> bool:
        return all(len(e) == 2 for e in self.edges)

    def neighbours(self, v: int) -> set[int]:
        """Vertices sharing at least one edge with ``v`` (excluding ``v``)."""
        out: set[int] = set()
        for j in self.incidence[v]:
            out.update(self.edges[j])
        out.discard(v)
        return out

    @cached_property
    def padded(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Dense arrays for the vectorised kernels.

        Returns ``(inc, members, sizes)``. ``inc`` is ``(n, D)`` with edge
        indices padded by ``E`` (a dummy edge); ``members`` is ``(E+1, m_max)``
        padded with the sentinel vertex ``n``; ``sizes`` is ``(E+1,)``.
        """
        E = len(self.edges)
        D = max(self.max_degree, 1)
        width = max(self.max_edge_size, 1)
        inc = np.full((self.n, D), E, dtype=np.intp)
        for v, row in enumerate(self.incidence):
            inc[v, : len(row)] = row
        members = np.full((E + 1, width), self.n, dtype=np.intp)
        sizes = np.zeros(E + 1, dtype=np.intp)
        for j, e in enumerate(self.edges):
            members[j, : len(e)] = e
            sizes[j] = len(e)
        return inc, members, sizes


@dataclass(frozen=True)
class ValidationReport:
    n: int
    n_edges: int
    min_edge_size: int
    max_edge_size: int
    max_degree: int
    is_uniform: bool
    has_duplicates: bool
    duplicate_edges: tuple[Edge, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.has_duplicates

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["duplicate_edges"] = [list(e) for e in self.duplicate_edges]
        return d


def validate(H: Hypergraph) -> ValidationReport:
    seen: set[Edge] = set()
    dups: list[Edge] = []
    for e in H.edges:
        if e in seen and e not in dups:
            dups.append(e)
        seen.add(e)
    return ValidationReport(
        n=H.n,
        n_edges=len(H.edges),
        min_edge_size=H.min_edge_size,
        max_edge_size=H.max_edge_size,
        max_degree=H.max_degree,
        is_uniform=H.min_edge_size == H.max_edge_size,
        has_duplicates=bool(dups),
        duplicate_edges=tuple(dups),
    )


# -- text format ------------------------------------------------------------


def parse_hypergraph(text: str) -> Hypergraph:
    """Parse the ``n E`` header format. ``#`` lines and blank lines are skipped."""
    rows: list[tuple[int, list[str]]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        rows.append((lineno, line.split()))
    if not rows:
        raise HypergraphFormatError("missing header 'n E'", 1)

    head_line, head = rows[0]
    if len(head) != 2:
        raise HypergraphFormatError("header must be 'n E'", head_line)
    try:
        n, n_edges = int(head[0]), int(head[1])
    except ValueError:
        raise HypergraphFormatError(f"non-integer header {' '.join(head)!r}", head_line) from None
    if n < 0 or n_edges < 0:
        raise HypergraphFormatError("header values must be non-negative", head_line)

    body = rows[1:]
    if len(body) != n_edges:
        line = body[-1][0] if body else head_line
        raise HypergraphFormatError(f"header declares {n_edges} edges, found {len(body)}", line)

    edges = []
    for lineno, toks in body:
        try:
            edge = [int(t) for t in toks]
        except ValueError:
            raise HypergraphFormatError(f"non-integer vertex in {' '.join(toks)!r}", lineno) from None
        if len(edge) < 2:
            raise HypergraphFormatError("edge needs at least 2 vertices", lineno)
        for v in edge:
            if not 0 <= v < n:
                raise HypergraphFormatError(f"vertex index {v} out of range [0, {n})", lineno)
        if any(a >= b for a, b in zip(edge, edge[1:])):
            raise HypergraphFormatError("edge vertices must be strictly increasing", lineno)
        edges.append(edge)
    return Hypergraph(n, edges)


def canonical(H: Hypergraph) -> Hypergraph:
    return Hypergraph(H.n, sorted(H.edges))


def serialize(H: Hypergraph) -> str:
    lines = [f"{H.n} {len(H.edges)}"]
    lines.extend(" ".join(map(str, e)) for e in sorted(H.edges))
    return "\n".join(lines) + "\n"


# -- generators -------------------------------------------------------------


def gen_random_uniform(
    n: int,
    m: int,
    max_degree: int,
    edge_target: int,
    seed: int | None = None,
    max_failures: int = 2000,
) -> Hypergraph:
    """Random m-uniform hypergraph with every vertex degree at most ``max_degree``.

    Draws m-subsets from the vertices that still have degree budget, rejecting
    duplicates. Stops at ``edge_target`` edges, or earlier when fewer than m
    vertices have budget left or ``max_failures`` consecutive draws were
    rejected; a shortfall is logged, not raised.
    """
    if m < 2:
        raise ValueError(f"edge size must be at least 2, got {m}")
    if m > n:
        raise ValueError(f"edge size {m} exceeds vertex count {n}")
    if max_degree < 1:
        raise ValueError(f"max degree must be at least 1, got {max_degree}")
    rng = np.random.default_rng(seed)
    budget = np.full(n, max_degree, dtype=np.intp)
    edges: list[Edge] = []
    seen: set[Edge] = set()
    failures = 0
    while len(edges) < edge_target:
        avail = np.flatnonzero(budget > 0)
        if len(avail) < m:
            break
        edge = tuple(sorted(int(v) for v in rng.choice(avail, size=m, replace=False)))
        if edge in seen:
            failures += 1
            if failures >= max_failures or math.comb(len(avail), m) <= len(seen):
                break
            continue
        failures = 0
        seen.add(edge)
        edges.append(edge)
        budget[list(edge)] -= 1
    if len(edges) < edge_target:
        log.warning("random hypergraph: produced %d of %d requested edges", len(edges), edge_target)
    return Hypergraph(n, edges)


def frozen_groups(q: int, m: int) -> list[list[int]]:
    """The q vertex groups (each of size m-1) used by :func:`gen_frozen`."""
    return [list(range(j * (m - 1), (j + 1) * (m - 1))) for j in range(q)]


def gen_frozen(q: int, m: int) -> Hypergraph:
    """Hypergraph on q(m-1) vertices whose group colourings admit no move.

    Vertices are split into q groups of size m-1; for every group and every
    vertex outside it, the group plus that vertex is an edge. Every vertex
    has degree (q-1)m.
    """
    if q < 2:
        raise ValueError(f"need q >= 2, got {q}")
    if m < 3:
        raise ValueError(f"need m >= 3, got {m}")
    groups = frozen_groups(q, m)
    n = q * (m - 1)
    edges = []
    for j, grp in enumerate(groups):
        members = set(grp)
        for v in range(n):
            if v not in members:
                edges.append(grp + [v])
    return canonical(Hypergraph(n, edges))


def frozen_colouring(q: int, m: int, perm: Sequence[int] | None = None) -> np.ndarray:
    """Colour group j with ``perm[j]`` (default j+1)."""
    perm = list(perm) if perm is not None else list(range(1, q + 1))
    if sorted(perm) != list(range(1, q + 1)):
        raise ValueError("perm must be a permutation of 1..q")
    col = np.empty(q * (m - 1), dtype=np.int64)
    for j, grp in enumerate(frozen_groups(q, m)):
        col[grp] = perm[j]
    return col


def gen_blowup(G: Hypergraph, m: int) -> tuple[Hypergraph, int]:
    """Replace each graph vertex by a block of k = ceil(m/2) vertices.

    Graph edge {u, v} becomes the hyperedge W_u ∪ W_v of size 2k, so the
    independent sets of the result count the hard-core partition function of
    ``G`` at fugacity 1/(2^k - 1).
    """
    if not G.is_graph:
        raise ValueError("blow-up needs a graph (all edges of size 2)")
    if m < 3:
        raise ValueError(f"need m >= 3, got {m}")
    k = math.ceil(m / 2)
    block = lambda v: range(v * k, (v + 1) * k)  # noqa: E731
    edges = [list(block(u)) + list(block(v)) for u, v in G.edges]
    return Hypergraph(G.n * k, edges), k


def complete_graph(n: int) -> Hypergraph:
    return Hypergraph(n, combinations(range(n), 2))


def path_graph(n: int) -> Hypergraph:
    return Hypergraph(n, [(i, i + 1) for i in range(n - 1)])


def cycle_graph(n: int) -> Hypergraph:
    if n < 3:
        raise ValueError("cycle needs at least 3 vertices")
    return Hypergraph(n, [(i, (i + 1) % n) for i in range(n)])
