"""Coupling structure of a PCO network: local adjacency and global-cue gains."""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Optional, Sequence, Union

import networkx as nx
import numpy as np

from .utils import load_document

logger = logging.getLogger(__name__)

# Coupling at or above this is outside the weak-coupling regime
WEAK_COUPLING_LIMIT = 0.1

TOPOLOGY_KEYS = {"name", "description", "n", "edges", "positions", "radius", "g", "l", "T", "delta"}


class TopologyError(ValueError):
    """Raised for malformed or inconsistent topologies."""


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class Topology:
    """Local adjacency a_ij, cue gains g_i, local strength l and cue period T.

    Arrays are copied and made read-only on construction.
    """

    adjacency: np.ndarray
    global_gains: np.ndarray
    local_strength: float
    period: float = 1.0
    natural_freq_offsets: Optional[np.ndarray] = None
    name: str = "custom"
    positions: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self) -> None:
        adjacency = np.array(self.adjacency, dtype=float)
        if adjacency.ndim != 2 or adjacency.shape[0] != adjacency.shape[1] or adjacency.shape[0] == 0:
            raise TopologyError(f"adjacency must be a non-empty square matrix, got shape {adjacency.shape}")
        n = adjacency.shape[0]
        if not np.all((adjacency == 0) | (adjacency == 1)):
            raise TopologyError("adjacency entries must be 0 or 1")
        if not np.array_equal(adjacency, adjacency.T):
            raise TopologyError("adjacency must be symmetric")
        if np.any(np.diag(adjacency) != 0):
            raise TopologyError("adjacency must have a zero diagonal")

        gains = np.array(self.global_gains, dtype=float).ravel()
        if gains.size == 1 and n > 1:
            gains = np.full(n, gains[0])
        if gains.shape != (n,):
            raise TopologyError(f"expected {n} global gains, got {gains.size}")
        if not np.all(np.isfinite(gains)) or np.any(gains < 0):
            raise TopologyError("global gains must be finite and nonnegative")

        l = float(self.local_strength)
        if not math.isfinite(l) or l < 0:
            raise TopologyError(f"local strength must be finite and nonnegative, got {l}")
        period = float(self.period)
        if not math.isfinite(period) or period <= 0:
            raise TopologyError(f"period must be positive, got {period}")

        if self.natural_freq_offsets is None:
            offsets = np.zeros(n)
        else:
            offsets = np.array(self.natural_freq_offsets, dtype=float).ravel()
            if offsets.shape != (n,) or not np.all(np.isfinite(offsets)):
                raise TopologyError(f"expected {n} finite natural frequency offsets")

        object.__setattr__(self, "adjacency", _frozen(adjacency))
        object.__setattr__(self, "global_gains", _frozen(gains))
        object.__setattr__(self, "local_strength", l)
        object.__setattr__(self, "period", period)
        object.__setattr__(self, "natural_freq_offsets", _frozen(offsets))
        if self.positions is not None:
            object.__setattr__(self, "positions", _frozen(np.array(self.positions, dtype=float)))

        if l >= WEAK_COUPLING_LIMIT or np.any(gains >= WEAK_COUPLING_LIMIT):
            logger.warning(
                f"Topology '{self.name}': coupling l={l}, max g={gains.max():.3g} is not weak "
                f"(< {WEAK_COUPLING_LIMIT}); the averaged model may be inaccurate"
            )

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @property
    def g_min(self) -> float:
        return float(self.global_gains.min())

    @property
    def attached(self) -> list[int]:
        """Indices of nodes that hear the global cue."""
        return [int(i) for i in np.flatnonzero(self.global_gains > 0)]

    def edges(self) -> list[tuple[int, int]]:
        """Undirected edges (i, j) with i < j in lexicographic order."""
        rows, cols = np.nonzero(np.triu(self.adjacency, k=1))
        return [(int(i), int(j)) for i, j in zip(rows, cols)]

    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)

    def neighbors(self, i: int) -> list[int]:
        return [int(j) for j in np.flatnonzero(self.adjacency[i])]

    def with_gains(self, gains: Union[float, Sequence[float]]) -> "Topology":
        return replace(self, global_gains=np.broadcast_to(np.asarray(gains, dtype=float), (self.n,)))

    def with_local_strength(self, l: float) -> "Topology":
        return replace(self, local_strength=l)

    def with_edge(self, i: int, j: int) -> "Topology":
        if i == j or not (0 <= i < self.n and 0 <= j < self.n):
            raise TopologyError(f"invalid edge ({i}, {j}) for {self.n} nodes")
        adjacency = self.adjacency.copy()
        adjacency[i, j] = adjacency[j, i] = 1.0
        return replace(self, adjacency=adjacency)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Topology":
        """Build a topology from a document.

        Keys: n, edges ([[i, j], ...] or [[i, j, a_ij], ...]), positions and
        radius (nodes within radius are linked), g (list or scalar), l, T,
        delta, name. Indices are 0-based.

        Raises:
            TopologyError: For unknown keys, bad indices, self-loops or
                conflicting duplicate edges
        """
        if not isinstance(data, dict):
            raise TopologyError("topology document must be a mapping")
        unknown = set(data) - TOPOLOGY_KEYS
        if unknown:
            raise TopologyError(f"Unknown topology keys: {', '.join(sorted(unknown))}")

        positions = data.get("positions")
        if positions is not None:
            positions = np.array(positions, dtype=float)
            if positions.ndim != 2 or positions.shape[1] not in (2, 3):
                raise TopologyError("positions must be a list of [x, y] or [x, y, z] points")
        n = data.get("n", None if positions is None else positions.shape[0])
        if n is None:
            raise TopologyError("topology needs 'n' or 'positions'")
        n = int(n)
        if n < 1:
            raise TopologyError(f"n must be positive, got {n}")

        adjacency = np.zeros((n, n))
        if positions is not None:
            if positions.shape[0] != n:
                raise TopologyError(f"expected {n} positions, got {positions.shape[0]}")
            if "radius" not in data:
                raise TopologyError("positions require a radio 'radius'")
            radius = float(data["radius"])
            dist = np.linalg.norm(positions[:, None, :] - positions[None, :, :], axis=-1)
            adjacency[dist <= radius + 1e-9] = 1.0
            np.fill_diagonal(adjacency, 0.0)
        elif "radius" in data:
            raise TopologyError("'radius' given without 'positions'")

        seen: dict[tuple[int, int], float] = {}
        for edge in data.get("edges", []) or []:
            if len(edge) not in (2, 3):
                raise TopologyError(f"edge must be [i, j] or [i, j, a_ij], got {edge}")
            i, j = int(edge[0]), int(edge[1])
            a = float(edge[2]) if len(edge) == 3 else 1.0
            if i == j:
                raise TopologyError(f"self-loop on node {i}")
            if not (0 <= i < n and 0 <= j < n):
                raise TopologyError(f"edge ({i}, {j}) out of range for {n} nodes")
            if a not in (0.0, 1.0):
                raise TopologyError(f"edge ({i}, {j}) weight must be 0 or 1, got {a}")
            key = (min(i, j), max(i, j))
            if key in seen and seen[key] != a:
                raise TopologyError(f"conflicting duplicate entries for edge {key}")
            seen[key] = a
            adjacency[i, j] = adjacency[j, i] = a

        return cls(
            adjacency=adjacency,
            global_gains=data.get("g", 0.0),
            local_strength=data.get("l", 0.0),
            period=data.get("T", 1.0),
            natural_freq_offsets=data.get("delta"),
            name=str(data.get("name", "custom")),
            positions=positions,
        )

    @classmethod
    def load(cls, filepath: Path) -> "Topology":
        """Load a topology from a YAML or JSON file."""
        data = load_document(filepath)
        data.setdefault("name", Path(filepath).stem)
        topo = cls.from_dict(data)
        logger.debug(f"Loaded topology '{topo.name}' with {topo.n} nodes, {len(topo.edges())} edges")
        return topo

    def to_dict(self) -> dict[str, Any]:
        """Serialize with an explicit edge list (positions are not kept)."""
        data: dict[str, Any] = {
            "name": self.name,
            "n": self.n,
            "edges": [[i, j] for i, j in self.edges()],
            "g": self.global_gains.tolist(),
            "l": self.local_strength,
            "T": self.period,
        }
        if np.any(self.natural_freq_offsets != 0):
            data["delta"] = self.natural_freq_offsets.tolist()
        return data


def incidence_matrix(topo: Topology) -> np.ndarray:
    """N x M incidence matrix with +1 at the smaller and -1 at the larger node index."""
    edges = topo.edges()
    b = np.zeros((topo.n, len(edges)))
    for k, (i, j) in enumerate(edges):
        b[i, k] = 1.0
        b[j, k] = -1.0
    return b


def laplacian(topo: Topology) -> np.ndarray:
    """Graph Laplacian D - A (equal to B B^T)."""
    return np.diag(topo.degrees()) - topo.adjacency


def is_connected(topo: Topology) -> bool:
    """Breadth-first reachability from node 0."""
    seen = {0}
    queue = deque([0])
    while queue:
        i = queue.popleft()
        for j in topo.neighbors(i):
            if j not in seen:
                seen.add(j)
                queue.append(j)
    return len(seen) == topo.n


def random_geometric(
    n: int,
    radius: float,
    seed: int,
    g: Union[float, Sequence[float]] = 0.0,
    l: float = 0.0,
    period: float = 1.0,
    max_tries: int = 1000,
) -> Topology:
    """Connected random geometric graph on the unit square.

    The seed is advanced until networkx produces a connected graph.

    Raises:
        TopologyError: If no connected graph is found within max_tries seeds
    """
    for attempt in range(max_tries):
        graph = nx.random_geometric_graph(n, radius, seed=seed + attempt)
        if nx.is_connected(graph):
            adjacency = nx.to_numpy_array(graph, nodelist=range(n))
            positions = np.array([graph.nodes[i]["pos"] for i in range(n)])
            if attempt:
                logger.debug(f"random_geometric: seed {seed} advanced by {attempt} to connect")
            return Topology(
                adjacency=adjacency,
                global_gains=g,
                local_strength=l,
                period=period,
                name=f"rgg-{n}-{seed}",
                positions=positions,
            )
    raise TopologyError(f"no connected geometric graph with n={n}, radius={radius} in {max_tries} tries")
