"""Scenario description, JSON round-trip, validation and the two built-in presets."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .controller import ControllerGains, check_controller_gains
from .graph import CommGraph, validate_graph
from .leader import LeaderTrajectory, circle_leader, fixed_leader, leader_from_dict, sigma_bounds
from .observer import ObserverGains, validate_observer_gains
from .plant import GRAVITY, QuadState

MODES = ("full", "ideal-reference")

# half-step observer grid feeds the plant RK4 stages; see simulation module notes
PRESET_OBSERVER_SUBSTEPS = 2

# square pattern, one corner per follower
PRESET_DELTAS = ((20.0, 20.0, 0.0), (-20.0, 20.0, 0.0), (-20.0, -20.0, 0.0), (20.0, -20.0, 0.0))
PRESET_INITIAL = (
    QuadState(x=-10.0, y=12.0, z=0.0, psi=math.pi / 8),
    QuadState(x=40.0, y=-12.0, z=5.0, psi=math.pi / 2),
    QuadState(x=20.0, y=10.0, z=6.0, psi=math.pi),
    QuadState(x=-20.0, y=45.0, z=7.0, psi=math.pi / 5),
)


class ScenarioError(ValueError):
    """A scenario failed validation; ``problems`` lists every violation."""

    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = problems


@dataclass(frozen=True)
class Scenario:
    graph: CommGraph
    leader: LeaderTrajectory
    deltas: tuple[tuple[float, float, float], ...]
    initial: tuple[QuadState, ...]
    controller_gains: ControllerGains = field(default_factory=ControllerGains)
    observer_gains: ObserverGains = field(default_factory=ObserverGains)
    dt: float = 0.005
    t_final: float = 200.0
    record_stride: int = 20
    mode: str = "full"
    observer_substeps: int = 1
    g: float = GRAVITY
    name: str = "custom"

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))

    def with_overrides(self, **changes) -> "Scenario":
        return replace(self, **{k: v for k, v in changes.items() if v is not None})

    def sigma(self):
        go = self.observer_gains
        return sigma_bounds(self.leader, go.g1, go.g2, go.g3, self.t_final)

    def zdd_sup(self) -> float:
        """Bound on ``|z_id''|`` that the altitude gains must respect."""
        return self.observer_gains.zdd_bound if self.mode == "full" else 0.0

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "graph": self.graph.to_dict(),
            "leader": self.leader.to_dict(),
            "deltas": [list(d) for d in self.deltas],
            "initial": [s.__dict__.copy() for s in self.initial],
            "controller_gains": self.controller_gains.to_dict(),
            "observer_gains": self.observer_gains.to_dict(),
            "dt": self.dt,
            "t_final": self.t_final,
            "record_stride": self.record_stride,
            "mode": self.mode,
            "observer_substeps": self.observer_substeps,
            "g": self.g,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        initial = []
        for entry in data["initial"]:
            if isinstance(entry, dict):
                unknown = set(entry) - set(QuadState.field_names())
                if unknown:
                    raise ValueError(f"unknown initial-state fields: {sorted(unknown)}")
                initial.append(QuadState(**{k: float(v) for k, v in entry.items()}))
            else:
                initial.append(QuadState.from_array(entry))
        return cls(
            graph=CommGraph.from_dict(data["graph"]),
            leader=leader_from_dict(data["leader"]),
            deltas=tuple(tuple(float(v) for v in d) for d in data["deltas"]),
            initial=tuple(initial),
            controller_gains=ControllerGains.from_dict(data.get("controller_gains", {})),
            observer_gains=ObserverGains.from_dict(data.get("observer_gains", {})),
            dt=float(data.get("dt", 0.005)),
            t_final=float(data.get("t_final", 200.0)),
            record_stride=int(data.get("record_stride", 20)),
            mode=str(data.get("mode", "full")),
            observer_substeps=int(data.get("observer_substeps", 1)),
            g=float(data.get("g", GRAVITY)),
            name=str(data.get("name", "custom")),
        )

    def to_json(self, path: str | Path | None = None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            Path(path).write_text(text + "\n")
        return text

    @classmethod
    def from_json(cls, source: str | Path) -> "Scenario":
        path = Path(source)
        text = path.read_text() if path.exists() else str(source)
        return cls.from_dict(json.loads(text))


def scenario_problems(sc: Scenario) -> list[str]:
    problems: list[str] = []
    if sc.mode not in MODES:
        problems.append(f"mode must be one of {MODES}, got {sc.mode!r}")
    if not sc.dt > 0:
        problems.append("dt > 0")
    if not sc.t_final >= sc.dt:
        problems.append("t_final >= dt")
    if sc.record_stride < 1:
        problems.append("record_stride >= 1")
    if sc.observer_substeps != 1 and (sc.observer_substeps < 2 or sc.observer_substeps % 2):
        problems.append("observer_substeps must be 1 or an even number >= 2")
    if len(sc.deltas) != sc.n or any(len(d) != 3 for d in sc.deltas):
        problems.append(f"need {sc.n} formation offsets of length 3")
    if len(sc.initial) != sc.n:
        problems.append(f"need {sc.n} initial states, got {len(sc.initial)}")
    for i, s in enumerate(sc.initial):
        arr = s.as_array()
        if not np.all(np.isfinite(arr)):
            problems.append(f"agent {i + 1}: non-finite initial state")
        elif abs(s.phi) >= math.pi / 2 or abs(s.theta) >= math.pi / 2:
            problems.append(f"agent {i + 1}: initial |phi|, |theta| must be < pi/2")
    z_derivs = sc.leader.derivatives(0.0)[1:, 2]
    if np.any(z_derivs != 0):
        problems.append("leader altitude must be constant")

    report = validate_graph(sc.graph)
    problems += [f"graph: {p}" for p in report.problems()]
    problems += [f"observer: {p}" for p in validate_observer_gains(sc.observer_gains, sc.sigma(), sc.g)]
    problems += [f"controller: {p}" for p in check_controller_gains(sc.controller_gains, sc.zdd_sup(), sc.g)]
    return problems


def validate_scenario(sc: Scenario) -> Scenario:
    """Raise :class:`ScenarioError` listing every violated condition."""
    problems = scenario_problems(sc)
    if problems:
        raise ScenarioError(problems)
    return sc


def preset(case: int, **overrides) -> Scenario:
    """The two four-vehicle square-formation experiments.

    Case 1 follows a leader on a 100 m circle at 100 m altitude; case 2 holds
    a fixed leader at ``[0, 0, 50]``. The communication graph is the ring
    1-2-3-4-1 with only agent 1 hearing the leader. Observers are sub-stepped
    (``observer_substeps=2``); pass ``observer_substeps=1`` for the plain
    joint RK4 step.
    """
    if case == 1:
        leader = circle_leader(100.0, 0.1, 100.0)
    elif case == 2:
        leader = fixed_leader([0.0, 0.0, 50.0])
    else:
        raise ValueError(f"preset case must be 1 or 2, got {case!r}")
    sc = Scenario(
        graph=CommGraph.ring(4, [1, 0, 0, 0]),
        leader=leader,
        deltas=PRESET_DELTAS,
        initial=PRESET_INITIAL,
        observer_substeps=PRESET_OBSERVER_SUBSTEPS,
        name=f"case{case}",
    )
    return sc.with_overrides(**overrides)
