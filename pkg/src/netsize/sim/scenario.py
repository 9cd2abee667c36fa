"""Scenario description: agents, topology schedule, initial state, solver."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..graph import NetworkGraph, add_edge, remove_edge
from ..protocol import ProtocolState
from .integrators import IntegratorSettings

Edge = tuple[int, int]


@dataclass(frozen=True)
class TopologyEvent:
    time: float
    add_edges: tuple[Edge, ...] = ()
    remove_edges: tuple[Edge, ...] = ()

    def apply(self, g: NetworkGraph) -> NetworkGraph:
        for i, j in self.remove_edges:
            g = remove_edge(g, i, j)
        for i, j in self.add_edges:
            g = add_edge(g, i, j)
        return g


@dataclass(frozen=True)
class InitialState:
    """How the protocol state is set at t = 0.

    ``mode`` is ``"zeros"``, ``"seeded-random"`` (uniform on ``[low, high]``
    for every scalar, drawn from ``seed``) or ``"explicit"`` (vectors given).
    """

    mode: str = "zeros"
    seed: int = 0
    low: float = -1.0
    high: float = 1.0
    z: tuple[float, ...] | None = None
    mu: tuple[float, ...] | None = None
    x: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.mode not in ("zeros", "seeded-random", "explicit"):
            raise ValueError(f"unknown initial-state mode {self.mode!r}")
        if self.mode == "seeded-random" and not self.low <= self.high:
            raise ValueError("initial-state range needs low <= high")
        if self.mode == "explicit" and (self.z is None or self.mu is None or self.x is None):
            raise ValueError("explicit initial state needs z, mu and x")

    def build(self, n: int) -> ProtocolState:
        if self.mode == "zeros":
            return ProtocolState(np.zeros(n), np.zeros(n), np.zeros(n))
        if self.mode == "seeded-random":
            rng = np.random.default_rng(self.seed)
            v = rng.uniform(self.low, self.high, size=(3, n))
            return ProtocolState(v[0], v[1], v[2])
        st = ProtocolState(np.array(self.z), np.array(self.mu), np.array(self.x))
        if len(st) != n:
            raise ValueError(f"explicit initial state has {len(st)} entries, expected {n}")
        return st


@dataclass(frozen=True)
class Scenario:
    agents: tuple[int, ...]
    initial_edges: tuple[Edge, ...]
    gamma: float
    horizon: float
    sample_interval: float
    events: tuple[TopologyEvent, ...] = ()
    initial_state: InitialState = field(default_factory=InitialState)
    integrator: IntegratorSettings = field(default_factory=IntegratorSettings)

    def __post_init__(self):
        if len(self.agents) == 0:
            raise ValueError("scenario has no agents")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if not self.sample_interval > 0:
            raise ValueError("sample_interval must be positive")
        prev = 0.0
        for k, ev in enumerate(self.events):
            if not (prev < ev.time < self.horizon):
                raise ValueError(f"event {k} at t={ev.time} must be strictly increasing "
                                 f"and inside (0, {self.horizon})")
            prev = ev.time
        # surfaces invalid ids/edges/events immediately
        g = self.initial_graph()
        for ev in self.events:
            g = ev.apply(g)

    def initial_graph(self) -> NetworkGraph:
        return NetworkGraph.from_identifiers(self.agents, self.initial_edges)

    def windows(self) -> list[tuple[float, float, NetworkGraph]]:
        """Static-topology windows ``(t_start, t_end, graph)``."""
        out = []
        g = self.initial_graph()
        t = 0.0
        for ev in self.events:
            out.append((t, ev.time, g))
            g = ev.apply(g)
            t = ev.time
        out.append((t, self.horizon, g))
        return out

    def sample_times(self) -> np.ndarray:
        k = int(np.floor(self.horizon / self.sample_interval + 1e-9))
        return np.arange(k + 1) * self.sample_interval


def ids_to_ordinals(agents: Sequence[int], pairs) -> tuple[Edge, ...]:
    pos = {a: k for k, a in enumerate(agents)}
    out = []
    for p in pairs:
        a, b = p
        if a not in pos or b not in pos:
            raise ValueError(f"edge {tuple(p)} references an unknown identifier")
        out.append((pos[a], pos[b]))
    return tuple(out)
