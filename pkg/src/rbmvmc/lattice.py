"""Graph structures for spin lattices: chains, square lattices, custom edge lists.

Sites are indexed 0..n_sites-1. Two-dimensional lattices use row-major
indexing (site = row * side + col) so that edge enumeration, and hence the
hidden-unit ordering of any RBM built from the edges, is deterministic.
Edges are stored canonically as (i, j) with i < j.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache


@dataclass(frozen=True)
class Lattice:
    """An undirected graph of spin sites.

    Immutable after construction and hashable, so instances can be shared
    freely across threads and used as cache keys.
    """

    n_sites: int
    edges: tuple[tuple[int, int], ...]
    kind: str = "custom"

    def __post_init__(self):
        if self.n_sites < 1:
            raise ValueError("n_sites must be positive")
        seen = set()
        for i, j in self.edges:
            if not (0 <= i < self.n_sites and 0 <= j < self.n_sites):
                raise ValueError(f"edge ({i}, {j}) references a site outside [0, {self.n_sites})")
            if i == j:
                raise ValueError(f"self-loop edge ({i}, {j}) not allowed")
            if i > j:
                raise ValueError(f"edge ({i}, {j}) must be stored as (min, max)")
            if (i, j) in seen:
                raise ValueError(f"duplicate edge ({i}, {j})")
            seen.add((i, j))

    @property
    def n_edges(self) -> int:
        return len(self.edges)


def _canonical(i: int, j: int) -> tuple[int, int]:
    return (i, j) if i < j else (j, i)


def build_chain(length: int, periodic: bool) -> Lattice:
    """One-dimensional chain with nearest-neighbor edges.

    Periodic chains require length >= 3: at length 2 the wrap-around bond
    would duplicate the single interior bond.
    """
    if periodic:
        if length < 3:
            raise ValueError("periodic chain requires length >= 3 (double bond at length 2)")
    elif length < 2:
        raise ValueError("open chain requires length >= 2")
    edges = [(i, i + 1) for i in range(length - 1)]
    if periodic:
        edges.append(_canonical(length - 1, 0))
    kind = "chain-periodic" if periodic else "chain-open"
    return Lattice(n_sites=length, edges=tuple(sorted(edges)), kind=kind)


def build_square(side: int, periodic: bool) -> Lattice:
    """Square side x side lattice with horizontal and vertical edges.

    Row-major site indexing. Periodic boundaries require side >= 3 for the
    same double-bond reason as chains.
    """
    if periodic:
        if side < 3:
            raise ValueError("periodic square lattice requires side >= 3")
    elif side < 2:
        raise ValueError("open square lattice requires side >= 2")

    def site(r: int, c: int) -> int:
        return (r % side) * side + (c % side)

    edges = set()
    for r in range(side):
        for c in range(side):
            if periodic or c + 1 < side:
                edges.add(_canonical(site(r, c), site(r, c + 1)))
            if periodic or r + 1 < side:
                edges.add(_canonical(site(r, c), site(r + 1, c)))
    kind = "square-periodic" if periodic else "square-open"
    return Lattice(n_sites=side * side, edges=tuple(sorted(edges)), kind=kind)


def from_edges(n_sites: int, edges) -> Lattice:
    """Custom lattice from an arbitrary edge list; pairs are canonicalized."""
    canon = sorted({_canonical(int(i), int(j)) for i, j in edges})
    return Lattice(n_sites=n_sites, edges=tuple(canon), kind="custom")


@lru_cache(maxsize=64)
def adjacency(lattice: Lattice) -> tuple[tuple[int, ...], ...]:
    """Neighbor lists per site, cached per lattice instance."""
    nbrs: list[list[int]] = [[] for _ in range(lattice.n_sites)]
    for i, j in lattice.edges:
        nbrs[i].append(j)
        nbrs[j].append(i)
    return tuple(tuple(n) for n in nbrs)
