"""Undirected agent graphs, connected components and Laplacian spectra."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


def zero_threshold(n: int) -> float:
    """Eigenvalues at or below this value are treated as zero."""
    return 1e-9 * max(n, 1)


@dataclass(frozen=True)
class AgentDescriptor:
    ordinal: int
    identifier: int

    def __post_init__(self):
        if self.identifier < 1:
            raise ValueError(f"agent {self.ordinal}: identifier must be >= 1, got {self.identifier}")


def _edge(i: int, j: int) -> tuple[int, int]:
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class NetworkGraph:
    """Immutable undirected graph over agents indexed by ordinal."""

    agents: tuple[AgentDescriptor, ...]
    edges: frozenset[tuple[int, int]]

    def __post_init__(self):
        seen = set()
        for k, a in enumerate(self.agents):
            if a.ordinal != k:
                raise ValueError(f"agent at position {k} has ordinal {a.ordinal}")
            if a.identifier in seen:
                raise ValueError(f"duplicate identifier {a.identifier}")
            seen.add(a.identifier)
        n = len(self.agents)
        for i, j in self.edges:
            if not (0 <= i < j < n):
                raise ValueError(f"invalid edge {(i, j)} for {n} agents")

    @classmethod
    def from_identifiers(cls, identifiers: Sequence[int],
                         edges: Iterable[tuple[int, int]] = ()) -> "NetworkGraph":
        """Build a graph from identifiers (in ordinal order) and ordinal edge pairs."""
        agents = tuple(AgentDescriptor(k, int(a)) for k, a in enumerate(identifiers))
        es = set()
        for i, j in edges:
            i, j = int(i), int(j)
            if i == j:
                raise ValueError(f"self-loop on agent {i}")
            e = _edge(i, j)
            if e in es:
                raise ValueError(f"edge {e} listed twice")
            es.add(e)
        return cls(agents, frozenset(es))

    @property
    def n(self) -> int:
        return len(self.agents)

    @property
    def identifiers(self) -> np.ndarray:
        return np.array([a.identifier for a in self.agents], dtype=np.int64)

    def neighbors(self, i: int) -> list[int]:
        out = [b if a == i else a for a, b in self.edges if i in (a, b)]
        return sorted(out)

    def has_edge(self, i: int, j: int) -> bool:
        return _edge(i, j) in self.edges


@dataclass(frozen=True)
class ComponentView:
    members: tuple[int, ...]
    identifiers: tuple[int, ...]

    @property
    def local_n(self) -> int:
        return len(self.members)

    @property
    def a_max(self) -> int:
        return max(self.identifiers)

    @property
    def leader_ordinal(self) -> int:
        return self.members[self.leader_position]

    @property
    def leader_position(self) -> int:
        """Position of the leader inside ``members``."""
        return int(np.argmax(self.identifiers))

    @property
    def ids(self) -> np.ndarray:
        return np.asarray(self.identifiers, dtype=np.int64)


@dataclass(frozen=True)
class SpectralData:
    laplacian: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    R: np.ndarray
    Lambda: np.ndarray

    @property
    def lambda2(self) -> float:
        return float(self.eigenvalues[1]) if len(self.eigenvalues) > 1 else float("nan")

    @property
    def n(self) -> int:
        return self.laplacian.shape[0]


def connected_components(g: NetworkGraph) -> list[ComponentView]:
    """Split ``g`` into components, ordered by their smallest ordinal."""
    adj: list[list[int]] = [[] for _ in range(g.n)]
    for i, j in g.edges:
        adj[i].append(j)
        adj[j].append(i)
    label = [-1] * g.n
    out = []
    for root in range(g.n):
        if label[root] >= 0:
            continue
        label[root] = len(out)
        stack, members = [root], []
        while stack:
            v = stack.pop()
            members.append(v)
            for w in adj[v]:
                if label[w] < 0:
                    label[w] = label[root]
                    stack.append(w)
        members.sort()
        out.append(ComponentView(tuple(members),
                                 tuple(g.agents[m].identifier for m in members)))
    return out


def laplacian(g: NetworkGraph, c: ComponentView | None = None) -> np.ndarray:
    """Laplacian of the sub-graph induced by ``c`` (whole graph if ``c`` is None)."""
    members = list(range(g.n)) if c is None else list(c.members)
    pos = {m: k for k, m in enumerate(members)}
    L = np.zeros((len(members), len(members)))
    for i, j in g.edges:
        if i in pos and j in pos:
            a, b = pos[i], pos[j]
            L[a, b] -= 1.0
            L[b, a] -= 1.0
            L[a, a] += 1.0
            L[b, b] += 1.0
        elif (i in pos) != (j in pos):
            raise ValueError(f"edge {(i, j)} leaves the component")
    return L


def spectral(L: np.ndarray) -> SpectralData:
    """Eigendecomposition of a Laplacian plus the R, Lambda factorisation.

    ``R`` holds orthonormal eigenvectors for the eigenvalues after the first,
    so ``R.T @ L @ R == Lambda`` and ``1.T @ R == 0`` when the graph is
    connected. The basis is not unique; consumers should only rely on
    basis-invariant quantities.
    """
    L = np.asarray(L, dtype=float)
    if L.ndim != 2 or L.shape[0] != L.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {L.shape}")
    if not np.allclose(L, L.T, atol=0.0, rtol=0.0):
        raise ValueError("Laplacian must be symmetric")
    n = L.shape[0]
    try:
        w, V = np.linalg.eigh(L)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError(f"symmetric eigensolver failed on {n}x{n} matrix: {exc}") from exc
    thr = zero_threshold(n)
    if w[0] < -thr:
        raise ValueError(f"Laplacian has negative eigenvalue {w[0]:.3e}")
    if n > 0 and np.sum(w <= thr) == 1:
        # pin the null vector to +1/sqrt(n) so R is orthogonal to the ones vector
        V[:, 0] = 1.0 / np.sqrt(n)
    R = V[:, 1:].copy()
    return SpectralData(L, w, V, R, np.diag(w[1:]))


def zero_eigenvalue_count(L: np.ndarray) -> int:
    w = np.linalg.eigvalsh(np.asarray(L, dtype=float))
    return int(np.sum(w <= zero_threshold(L.shape[0])))


def add_edge(g: NetworkGraph, i: int, j: int) -> NetworkGraph:
    if i == j:
        raise ValueError(f"cannot add self-loop on agent {i}")
    if not (0 <= i < g.n and 0 <= j < g.n):
        raise ValueError(f"edge {(i, j)} references an unknown agent")
    e = _edge(i, j)
    if e in g.edges:
        raise ValueError(f"edge {e} already present")
    return NetworkGraph(g.agents, g.edges | {e})


def remove_edge(g: NetworkGraph, i: int, j: int) -> NetworkGraph:
    e = _edge(i, j)
    if e not in g.edges:
        raise ValueError(f"edge {e} not present")
    return NetworkGraph(g.agents, g.edges - {e})
