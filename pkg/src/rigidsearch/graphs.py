"""Labeled simple graphs on 0..n-1 stored as adjacency bit rows.

The integer code of a graph concatenates the bits of the upper triangle of
its adjacency matrix (diagonal excluded), row 0 first, most significant bit
first, read as an unsigned integer of n(n-1)/2 bits.  Python integers are
arbitrary precision, so codes for any n round-trip exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple


class Graph:
    """Immutable simple graph; ``rows[v]`` is the neighbor bitmask of v."""

    __slots__ = ("n", "rows")

    def __init__(self, n: int, rows: tuple[int, ...]):
        self.n = n
        self.rows = rows

    @classmethod
    def empty(cls, n: int) -> "Graph":
        return cls(n, (0,) * n)

    @classmethod
    def complete(cls, n: int) -> "Graph":
        full = (1 << n) - 1
        return cls(n, tuple(full ^ (1 << v) for v in range(n)))

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]]) -> "Graph":
        rows = [0] * n
        for u, v in edges:
            if u == v or not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"bad edge ({u}, {v}) for n={n}")
            rows[u] |= 1 << v
            rows[v] |= 1 << u
        return cls(n, tuple(rows))

    def has_edge(self, u: int, v: int) -> bool:
        return bool(self.rows[u] >> v & 1)

    def degree(self, v: int) -> int:
        return self.rows[v].bit_count()

    def neighbors(self, v: int) -> Iterator[int]:
        m = self.rows[v]
        while m:
            b = m & -m
            yield b.bit_length() - 1
            m ^= b

    def edges(self) -> list[tuple[int, int]]:
        out = []
        for u in range(self.n):
            m = self.rows[u] >> (u + 1)
            v = u + 1
            while m:
                if m & 1:
                    out.append((u, v))
                m >>= 1
                v += 1
        return out

    @property
    def edge_count(self) -> int:
        return sum(r.bit_count() for r in self.rows) // 2

    def add_edge(self, u: int, v: int) -> "Graph":
        rows = list(self.rows)
        rows[u] |= 1 << v
        rows[v] |= 1 << u
        return Graph(self.n, tuple(rows))

    def remove_edge(self, u: int, v: int) -> "Graph":
        rows = list(self.rows)
        rows[u] &= ~(1 << v)
        rows[v] &= ~(1 << u)
        return Graph(self.n, tuple(rows))

    def add_vertex(self, neighbors: Iterable[int]) -> "Graph":
        """Append vertex n adjacent to ``neighbors``."""
        z = self.n
        rows = list(self.rows) + [0]
        for u in neighbors:
            rows[u] |= 1 << z
            rows[z] |= 1 << u
        return Graph(z + 1, tuple(rows))

    def delete_vertex(self, v: int) -> "Graph":
        """Remove v and relabel the remaining vertices, order preserved."""
        low = (1 << v) - 1
        rows = []
        for u in range(self.n):
            if u == v:
                continue
            r = self.rows[u]
            rows.append((r & low) | ((r >> (v + 1)) << v))
        return Graph(self.n - 1, tuple(rows))

    def permuted(self, perm: list[int]) -> "Graph":
        """Relabel: vertex v becomes perm[v]."""
        perm = [int(p) for p in perm]
        rows = [0] * self.n
        for u in range(self.n):
            m = self.rows[u]
            ru = 0
            while m:
                b = m & -m
                ru |= 1 << perm[b.bit_length() - 1]
                m ^= b
            rows[perm[u]] = ru
        return Graph(self.n, tuple(rows))

    def is_connected(self) -> bool:
        if self.n == 0:
            return True
        seen = 1
        frontier = 1
        while frontier:
            nxt = 0
            m = frontier
            while m:
                b = m & -m
                nxt |= self.rows[b.bit_length() - 1]
                m ^= b
            frontier = nxt & ~seen
            seen |= frontier
        return seen == (1 << self.n) - 1

    def __eq__(self, other) -> bool:
        return isinstance(other, Graph) and self.n == other.n and self.rows == other.rows

    def __hash__(self) -> int:
        return hash((self.n, self.rows))

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, edges={self.edges()})"


# ---------------------------------------------------------------------------
# integer codec


def encode_int(g: Graph) -> int:
    """Upper-triangle bits of the adjacency matrix as one unsigned integer."""
    x = 0
    for u in range(g.n - 1):
        ru = g.rows[u]
        for v in range(u + 1, g.n):
            x = (x << 1) | (ru >> v & 1)
    return x


def decode_int(x: int, n: int) -> Graph:
    """Inverse of encode_int for a given vertex count."""
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    nbits = n * (n - 1) // 2
    if x < 0 or x.bit_length() > nbits:
        raise ValueError(f"code {x} does not fit in {nbits} bits (n={n})")
    rows = [0] * n
    pos = nbits
    for u in range(n - 1):
        for v in range(u + 1, n):
            pos -= 1
            if x >> pos & 1:
                rows[u] |= 1 << v
                rows[v] |= 1 << u
    return Graph(n, tuple(rows))


def infer_n(x: int) -> int:
    """Smallest n whose upper triangle holds the code's bits."""
    if x < 0:
        raise ValueError("code must be nonnegative")
    n = 1
    while n * (n - 1) // 2 < x.bit_length():
        n += 1
    return n


# ---------------------------------------------------------------------------
# local vertex features


def triangles_at(g: Graph, v: int) -> int:
    """Number of triangles through v."""
    t = 0
    m = g.rows[v]
    while m:
        b = m & -m
        t += (g.rows[b.bit_length() - 1] & g.rows[v]).bit_count()
        m ^= b
    return t // 2


def ldp(g: Graph, v: int) -> tuple[float, float, float, float, float]:
    """Local degree profile: (deg, min, max, mean, std) over neighbor degrees.

    The four neighbor statistics are defined as 0 when deg(v) <= 1, so the
    two vertices of the base state K2 carry constant features.
    """
    deg = g.degree(v)
    if deg <= 1:
        return (float(deg), 0.0, 0.0, 0.0, 0.0)
    ds = [g.degree(u) for u in g.neighbors(v)]
    mean = sum(ds) / deg
    var = sum((d - mean) ** 2 for d in ds) / deg
    return (float(deg), float(min(ds)), float(max(ds)), mean, var ** 0.5)


def clustering(g: Graph, v: int) -> float:
    """Fraction of neighbor pairs joined by an edge; 0 when deg(v) <= 1."""
    deg = g.degree(v)
    if deg <= 1:
        return 0.0
    return 2.0 * triangles_at(g, v) / (deg * (deg - 1))


# ---------------------------------------------------------------------------
# canonical form

class CanonicalCode(NamedTuple):
    n: int
    code: int


def _refine(rows: tuple[int, ...], colors: list[int]) -> list[int]:
    """Iterated neighborhood refinement; colors stay compact ranks."""
    n = len(rows)
    ncolors = len(set(colors))
    while True:
        sigs = []
        for v in range(n):
            m = rows[v]
            nb = []
            while m:
                b = m & -m
                nb.append(colors[b.bit_length() - 1])
                m ^= b
            nb.sort()
            sigs.append((colors[v], tuple(nb)))
        ordered = sorted(set(sigs))
        rank = {s: i for i, s in enumerate(ordered)}
        colors = [rank[s] for s in sigs]
        if len(ordered) == ncolors:
            return colors
        ncolors = len(ordered)


def _degree_colors(rows: tuple[int, ...]) -> list[int]:
    degs = [r.bit_count() for r in rows]
    rank = {d: i for i, d in enumerate(sorted(set(degs)))}
    return [rank[d] for d in degs]


def _individualize(colors: list[int], v: int) -> list[int]:
    """Give v a fresh color just below its current cell."""
    out = [2 * c + 1 for c in colors]
    out[v] = 2 * colors[v]
    ordered = sorted(set(out))
    rank = {c: i for i, c in enumerate(ordered)}
    return [rank[c] for c in out]


def _encode_under(rows: tuple[int, ...], n: int, colors: list[int]) -> int:
    # colors discrete: vertex v gets new label colors[v]
    inv = [0] * n
    for v in range(n):
        inv[colors[v]] = v
    x = 0
    for i in range(n - 1):
        ri = rows[inv[i]]
        for j in range(i + 1, n):
            x = (x << 1) | (ri >> inv[j] & 1)
    return x


def canonical_labeling(g: Graph) -> list[int]:
    """A relabeling v -> perm[v] minimizing encode_int over candidate labelings.

    Individualization-refinement: refine color classes, branch on every
    vertex of the first non-singleton cell, keep the lexicographically
    smallest code.  The candidate set is isomorphism invariant, so equal
    canonical codes characterize isomorphic graphs.
    """
    rows, n = g.rows, g.n
    if n <= 1:
        return [0] * n
    best_code: int | None = None
    best_colors: list[int] | None = None

    def descend(colors: list[int]) -> None:
        nonlocal best_code, best_colors
        cell_of: dict[int, list[int]] = {}
        for v, c in enumerate(colors):
            cell_of.setdefault(c, []).append(v)
        target = None
        for c in sorted(cell_of):
            if len(cell_of[c]) > 1:
                target = cell_of[c]
                break
        if target is None:
            code = _encode_under(rows, n, colors)
            if best_code is None or code < best_code:
                best_code, best_colors = code, colors
            return
        for v in target:
            descend(_refine(rows, _individualize(colors, v)))

    descend(_refine(rows, _degree_colors(rows)))
    assert best_colors is not None
    return best_colors


def canonical_code(g: Graph) -> CanonicalCode:
    """Isomorphism-invariant (n, code): code of the canonically relabeled graph."""
    if g.n <= 1:
        return CanonicalCode(g.n, 0)
    perm = canonical_labeling(g)
    return CanonicalCode(g.n, _encode_under(g.rows, g.n, perm))


def automorphism_count(g: Graph) -> int:
    """Number of adjacency-preserving permutations (backtracking, refined colors)."""
    rows, n = g.rows, g.n
    if n <= 1:
        return 1
    colors = _refine(rows, _degree_colors(rows))
    count = 0
    image = [0] * n
    used = [False] * n

    def place(v: int) -> None:
        nonlocal count
        if v == n:
            count += 1
            return
        rv = rows[v]
        for u in range(n):
            if used[u] or colors[u] != colors[v]:
                continue
            ok = True
            for w in range(v):
                if (rv >> w & 1) != (rows[u] >> image[w] & 1):
                    ok = False
                    break
            if ok:
                image[v] = u
                used[u] = True
                place(v + 1)
                used[u] = False
        return

    place(0)
    return count


# ---------------------------------------------------------------------------
# structural report


@dataclass(frozen=True)
class StructuralReport:
    n: int
    edge_count: int
    min_degree: int
    max_degree: int
    degree_counts: dict[int, int]
    triangle_free: bool
    every_vertex_in_triangle: bool
    hamiltonian: bool
    chromatic_number: int


def is_hamiltonian(g: Graph) -> bool:
    """Backtracking Hamiltonian-cycle search with connectivity pruning."""
    n = g.n
    if n < 3:
        return False
    if any(r.bit_count() < 2 for r in g.rows):
        return False
    rows = g.rows
    full = (1 << n) - 1

    def reachable(src_mask: int, allowed: int) -> int:
        seen = src_mask & allowed
        frontier = seen
        while frontier:
            nxt = 0
            m = frontier
            while m:
                b = m & -m
                nxt |= rows[b.bit_length() - 1]
                m ^= b
            frontier = nxt & allowed & ~seen
            seen |= frontier
        return seen

    def extend(cur: int, visited: int) -> bool:
        if visited == full:
            return bool(rows[cur] & 1)  # close the cycle at vertex 0
        rest = full & ~visited
        # all unvisited vertices must be reachable from cur through unvisited
        if reachable(rows[cur] & rest, rest) != rest:
            return False
        m = rows[cur] & rest
        while m:
            b = m & -m
            v = b.bit_length() - 1
            if extend(v, visited | b):
                return True
            m ^= b
        return False

    return extend(0, 1)


def _is_bipartite(g: Graph) -> bool:
    color = [-1] * g.n
    for s in range(g.n):
        if color[s] >= 0:
            continue
        color[s] = 0
        stack = [s]
        while stack:
            u = stack.pop()
            for v in g.neighbors(u):
                if color[v] < 0:
                    color[v] = 1 - color[u]
                    stack.append(v)
                elif color[v] == color[u]:
                    return False
    return True


def _colorable(g: Graph, k: int) -> bool:
    n = g.n
    order = sorted(range(n), key=lambda v: -g.degree(v))
    rows = g.rows
    assign = [-1] * n

    def place(i: int, used: int) -> bool:
        if i == n:
            return True
        v = order[i]
        seen = 0
        for u in g.neighbors(v):
            if assign[u] >= 0:
                seen |= 1 << assign[u]
        limit = min(k, used + 1)  # first use of a fresh color is canonical
        for c in range(limit):
            if seen >> c & 1:
                continue
            assign[v] = c
            if place(i + 1, max(used, c + 1)):
                return True
            assign[v] = -1
        return False

    return place(0, 0)


def chromatic_number(g: Graph) -> int:
    if g.n == 0:
        return 0
    if g.edge_count == 0:
        return 1
    if _is_bipartite(g):
        return 2
    k = 3
    while not _colorable(g, k):
        k += 1
    return k


def structural_report(g: Graph) -> StructuralReport:
    """Degree, triangle, Hamiltonicity and coloring summary of a graph."""
    degs = [g.degree(v) for v in range(g.n)]
    counts: dict[int, int] = {}
    for d in degs:
        counts[d] = counts.get(d, 0) + 1
    tri = [triangles_at(g, v) for v in range(g.n)]
    return StructuralReport(
        n=g.n,
        edge_count=g.edge_count,
        min_degree=min(degs) if degs else 0,
        max_degree=max(degs) if degs else 0,
        degree_counts=counts,
        triangle_free=all(t == 0 for t in tri),
        every_vertex_in_triangle=all(t > 0 for t in tri),
        hamiltonian=is_hamiltonian(g),
        chromatic_number=chromatic_number(g),
    )
