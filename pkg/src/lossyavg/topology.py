"""Network graphs (M, E): generators, predicates and the edge-list file format.

Nodes are 0-based in code and 1-based in every file or report.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable


class TopologyError(ValueError):
    pass


@dataclass(frozen=True)
class Topology:
    m: int
    edges: frozenset  # of (i, j) tuples with i < j

    def __post_init__(self):
        if not isinstance(self.m, int) or self.m < 2:
            raise TopologyError(f"invalid size m={self.m!r}, need m >= 2")
        norm = set()
        for e in self.edges:
            i, j = e
            if i == j:
                raise TopologyError(f"self loop at node {i + 1}")
            if not (0 <= i < self.m and 0 <= j < self.m):
                raise TopologyError(f"edge {{{i + 1},{j + 1}}} out of range for m={self.m}")
            norm.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", frozenset(norm))

    @classmethod
    def from_edges(cls, m: int, edges: Iterable[tuple[int, int]]) -> "Topology":
        edges = list(edges)
        seen = set()
        for i, j in edges:
            key = (min(i, j), max(i, j))
            if key in seen:
                raise TopologyError(f"duplicate edge {{{key[0] + 1},{key[1] + 1}}}")
            seen.add(key)
        return cls(m, frozenset(edges))

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def has_edge(self, i: int, j: int) -> bool:
        return (min(i, j), max(i, j)) in self.edges

    def neighbors(self, i: int) -> list[int]:
        out = [b if a == i else a for a, b in self.edges if i in (a, b)]
        return sorted(out)

    def degree(self, i: int) -> int:
        return len(self.neighbors(i))

    def adjacency(self):
        import numpy as np

        adj = np.zeros((self.m, self.m), dtype=bool)
        for i, j in self.edges:
            adj[i, j] = adj[j, i] = True
        return adj


def make_complete(m: int) -> Topology:
    _check_size(m, 2)
    return Topology(m, frozenset((i, j) for i in range(m) for j in range(i + 1, m)))


def make_star(m: int) -> Topology:
    """Star with node 0 (node 1 in reports) as the hub."""
    _check_size(m, 2)
    return Topology(m, frozenset((0, i) for i in range(1, m)))


def make_ring(m: int) -> Topology:
    _check_size(m, 3)
    return Topology(m, frozenset((min(i, (i + 1) % m), max(i, (i + 1) % m)) for i in range(m)))


def make_path(m: int) -> Topology:
    _check_size(m, 2)
    return Topology(m, frozenset((i, i + 1) for i in range(m - 1)))


GENERATORS = {
    "complete": make_complete,
    "star": make_star,
    "ring": make_ring,
    "path": make_path,
}


def make(name: str, m: int) -> Topology:
    try:
        gen = GENERATORS[name]
    except KeyError:
        raise TopologyError(f"unknown topology generator {name!r}") from None
    return gen(m)


def random_connected(m: int, p: float, rng) -> Topology:
    """Erdos-Renyi G(m, p) plus a random spanning tree, so the result is connected."""
    _check_size(m, 2)
    perm = rng.permutation(m)
    edges = set()
    for k in range(1, m):
        a, b = int(perm[k]), int(perm[rng.integers(k)])
        edges.add((min(a, b), max(a, b)))
    for i in range(m):
        for j in range(i + 1, m):
            if rng.random() < p:
                edges.add((i, j))
    return Topology(m, frozenset(edges))


def is_connected(t: Topology) -> bool:
    adj = {i: [] for i in range(t.m)}
    for i, j in t.edges:
        adj[i].append(j)
        adj[j].append(i)
    seen = {0}
    stack = [0]
    while stack:
        v = stack.pop()
        for w in adj[v]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == t.m


def is_tree(t: Topology) -> bool:
    return len(t.edges) == t.m - 1 and is_connected(t)


def require_connected(t: Topology) -> None:
    if not is_connected(t):
        raise TopologyError("topology is not connected")


def serialize(t: Topology) -> str:
    lines = [str(t.m)]
    lines += [f"{i + 1} {j + 1}" for i, j in t.sorted_edges()]
    return "\n".join(lines) + "\n"


def parse(text: str) -> Topology:
    rows = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        rows.append(line.split())
    if not rows:
        raise TopologyError("empty edge-list")
    if len(rows[0]) != 1:
        raise TopologyError("first line must hold the node count m")
    try:
        m = int(rows[0][0])
        pairs = [(int(a) - 1, int(b) - 1) for a, b in rows[1:]]
    except ValueError as exc:
        raise TopologyError(f"malformed edge-list: {exc}") from None
    for a, b in pairs:
        if a >= b:
            raise TopologyError(f"edge line must satisfy i < j, got {a + 1} {b + 1}")
    return Topology.from_edges(m, pairs)


def load(path: str | Path) -> Topology:
    return parse(Path(path).read_text())


def save(t: Topology, path: str | Path) -> None:
    Path(path).write_text(serialize(t))


def _check_size(m, lo):
    if not isinstance(m, int) or m < lo:
        raise TopologyError(f"invalid size m={m!r}, need m >= {lo}")
