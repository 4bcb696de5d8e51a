"""Periodic square lattice with a von Neumann (k=4) or Moore (k=8) neighbourhood."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_OFFSETS = {
    4: [(-1, 0), (1, 0), (0, -1), (0, 1)],
    8: [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)],
}


@dataclass(frozen=True)
class Lattice:
    """L x L torus. Agent index is ``row * L + col``."""

    L: int
    k: int = 4
    neighbors: np.ndarray = field(init=False, repr=False, compare=False)
    edges: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.k not in _OFFSETS:
            raise ValueError(f"k must be one of {sorted(_OFFSETS)}, got {self.k}")
        # smaller tori make some neighbours coincide
        min_side = 3
        if self.L < min_side:
            raise ValueError(f"L must be >= {min_side}, got {self.L}")
        L = self.L
        rows, cols = np.divmod(np.arange(L * L), L)
        nbrs = np.empty((L * L, self.k), dtype=np.int64)
        for c, (dr, dc) in enumerate(_OFFSETS[self.k]):
            nbrs[:, c] = ((rows + dr) % L) * L + (cols + dc) % L
        nbrs.setflags(write=False)
        src = np.repeat(np.arange(L * L), self.k)
        dst = nbrs.ravel()
        keep = src < dst
        edges = np.column_stack([src[keep], dst[keep]])
        edges.setflags(write=False)
        object.__setattr__(self, "neighbors", nbrs)
        object.__setattr__(self, "edges", edges)

    @property
    def N(self) -> int:
        return self.L * self.L

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def coords(self, index):
        """(row, col) of an agent index (scalar or array)."""
        return np.divmod(index, self.L)
