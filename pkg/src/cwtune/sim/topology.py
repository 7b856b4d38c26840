"""Carrier-sense graphs between transmitters."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from cwtune import ParameterError


@dataclass(frozen=True)
class Topology:
    """Symmetric carrier-sense relation; ``adjacency[i][j]`` means i hears j."""

    adjacency: tuple[tuple[bool, ...], ...]

    def __post_init__(self):
        a = np.asarray(self.adjacency, dtype=bool)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise ParameterError("adjacency must be a non-empty square matrix")
        if np.any(np.diag(a)):
            raise ParameterError("adjacency diagonal must be zero")
        if not np.array_equal(a, a.T):
            raise ParameterError("adjacency must be symmetric")
        object.__setattr__(self, "adjacency", tuple(tuple(bool(v) for v in row) for row in a))

    @property
    def n(self) -> int:
        return len(self.adjacency)

    def neighbors(self, i: int) -> tuple[int, ...]:
        return tuple(j for j, v in enumerate(self.adjacency[i]) if v)

    def visible(self, i: int) -> tuple[int, ...]:
        """Stations whose traffic node ``i`` can account for: itself and its neighbours."""
        return tuple(sorted((i, *self.neighbors(i))))

    @property
    def fully_connected(self) -> bool:
        return all(len(self.neighbors(i)) == self.n - 1 for i in range(self.n))

    @classmethod
    def full(cls, n: int) -> "Topology":
        if n < 1:
            raise ParameterError("topology needs at least one node")
        return cls(tuple(tuple(i != j for j in range(n)) for i in range(n)))

    @classmethod
    def flow_in_the_middle(cls) -> "Topology":
        """Three transmitters in a line; the edges (0 and 2) cannot hear each other."""
        return cls(((False, True, False), (True, False, True), (False, True, False)))

    @classmethod
    def from_adjacency(cls, matrix: Sequence[Sequence[int | bool]]) -> "Topology":
        return cls(tuple(tuple(bool(v) for v in row) for row in matrix))
