"""Scenario configuration files (TOML).

Edges and events name agents by identifier; ordinals follow the order of the
``agents`` list. Unknown keys are rejected so that typos do not silently
change an experiment.

Example::

    agents = [1, 2, 3]
    edges = [[1, 2], [2, 3]]
    gamma = 10.0
    horizon = 50.0
    sample_interval = 0.5

    [initial_state]
    mode = "zeros"

    [integrator]
    rel_tol = 1e-8

    [[events]]
    time = 20.0
    add = [[1, 3]]
"""

from __future__ import annotations

import sys
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .sim.integrators import IntegratorSettings
from .sim.scenario import InitialState, Scenario, TopologyEvent, ids_to_ordinals

_TOP = {"agents", "edges", "gamma", "horizon", "sample_interval", "events",
        "initial_state", "integrator", "name"}
_INIT = {"mode", "seed", "low", "high", "z", "mu", "x"}
_INTEG = {"rel_tol", "abs_tol", "max_step", "affine_fast_path", "checks_per_interval"}
_EVENT = {"time", "add", "remove"}


class ConfigError(ValueError):
    pass


def _check_keys(d: dict, allowed: set, where: str):
    extra = sorted(set(d) - allowed)
    if extra:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(extra)}")


def _num(d: dict, key: str, where: str, default=None, kind=float):
    if key not in d:
        if default is None:
            raise ConfigError(f"{where}: missing required key '{key}'")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}.{key}: expected a number, got {v!r}")
    if kind is int and not isinstance(v, int):
        raise ConfigError(f"{where}.{key}: expected an integer, got {v!r}")
    return kind(v)


def _pairs(v, where: str) -> list[tuple[int, int]]:
    if not isinstance(v, list):
        raise ConfigError(f"{where}: expected a list of [id, id] pairs")
    out = []
    for k, p in enumerate(v):
        if (not isinstance(p, list) or len(p) != 2
                or not all(isinstance(q, int) and not isinstance(q, bool) for q in p)):
            raise ConfigError(f"{where}[{k}]: expected a pair of integer identifiers, got {p!r}")
        out.append((p[0], p[1]))
    return out


def _vector(d: dict, key: str, where: str):
    if key not in d:
        return None
    v = d[key]
    if not isinstance(v, list) or not all(isinstance(q, (int, float)) and not isinstance(q, bool)
                                          for q in v):
        raise ConfigError(f"{where}.{key}: expected a list of numbers")
    return tuple(float(q) for q in v)


def scenario_from_dict(doc: dict[str, Any]) -> Scenario:
    _check_keys(doc, _TOP, "config")
    agents = doc.get("agents")
    if not isinstance(agents, list) or not agents:
        raise ConfigError("config.agents: expected a non-empty list of identifiers")
    for k, a in enumerate(agents):
        if not isinstance(a, int) or isinstance(a, bool) or a < 1:
            raise ConfigError(f"config.agents[{k}]: identifiers must be positive integers, got {a!r}")
    if len(set(agents)) != len(agents):
        raise ConfigError("config.agents: identifiers must be unique")

    def to_ord(pairs, where):
        try:
            return ids_to_ordinals(agents, pairs)
        except ValueError as exc:
            raise ConfigError(f"{where}: {exc}") from None

    edges = to_ord(_pairs(doc.get("edges", []), "config.edges"), "config.edges")

    events = []
    raw_events = doc.get("events", [])
    if not isinstance(raw_events, list):
        raise ConfigError("config.events: expected an array of tables")
    for k, ev in enumerate(raw_events):
        where = f"config.events[{k}]"
        if not isinstance(ev, dict):
            raise ConfigError(f"{where}: expected a table")
        _check_keys(ev, _EVENT, where)
        events.append(TopologyEvent(
            _num(ev, "time", where),
            to_ord(_pairs(ev.get("add", []), f"{where}.add"), f"{where}.add"),
            to_ord(_pairs(ev.get("remove", []), f"{where}.remove"), f"{where}.remove")))

    init = doc.get("initial_state", {})
    if not isinstance(init, dict):
        raise ConfigError("config.initial_state: expected a table")
    _check_keys(init, _INIT, "config.initial_state")
    found = [k for k in ("z", "mu", "x") if k in init]
    mode = init.get("mode", "zeros")
    try:
        initial = InitialState(
            mode=mode,
            seed=_num(init, "seed", "config.initial_state", 0, int),
            low=_num(init, "low", "config.initial_state", -1.0),
            high=_num(init, "high", "config.initial_state", 1.0),
            z=_vector(init, "z", "config.initial_state"),
            mu=_vector(init, "mu", "config.initial_state"),
            x=_vector(init, "x", "config.initial_state"))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"config.initial_state: {exc}") from None
    if mode == "explicit":
        for key in found:
            if len(init[key]) != len(agents):
                raise ConfigError(f"config.initial_state.{key}: expected {len(agents)} values")

    integ = doc.get("integrator", {})
    if not isinstance(integ, dict):
        raise ConfigError("config.integrator: expected a table")
    _check_keys(integ, _INTEG, "config.integrator")
    fast = integ.get("affine_fast_path", True)
    if not isinstance(fast, bool):
        raise ConfigError("config.integrator.affine_fast_path: expected true/false")
    d = IntegratorSettings()
    try:
        settings = IntegratorSettings(
            rel_tol=_num(integ, "rel_tol", "config.integrator", d.rel_tol),
            abs_tol=_num(integ, "abs_tol", "config.integrator", d.abs_tol),
            max_step=_num(integ, "max_step", "config.integrator", d.max_step),
            affine_fast_path=fast,
            checks_per_interval=_num(integ, "checks_per_interval", "config.integrator",
                                     d.checks_per_interval, int))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"config.integrator: {exc}") from None

    try:
        return Scenario(
            agents=tuple(agents), initial_edges=edges,
            gamma=_num(doc, "gamma", "config"), horizon=_num(doc, "horizon", "config"),
            sample_interval=_num(doc, "sample_interval", "config"),
            events=tuple(events), initial_state=initial, integrator=settings)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"config: {exc}") from None


def loads(text: str) -> Scenario:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"syntax error: {exc}") from None
    return scenario_from_dict(doc)


def load(path) -> Scenario:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{p}: cannot read ({exc.strerror})") from None
    try:
        return loads(text)
    except ConfigError as exc:
        raise ConfigError(f"{p}: {exc}") from None


def bundled(name: str) -> Path:
    """Path of a scenario shipped with the package."""
    p = Path(__file__).parent / "scenarios" / name
    if not p.exists():
        raise FileNotFoundError(name)
    return p
