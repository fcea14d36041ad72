"""Fixed-step integration of compiled dynamical systems.

A Scenario packages everything a run needs besides the system itself:
initial stock values, parameter bindings, time span, step size, and the
method.  `simulate` marches the state with forward Euler or classical
RK4 and returns the sampled trajectory.  Fixed steps keep runs
bit-deterministic; there is no adaptive stepping.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .core import FullStockFlow
from .errors import DiagramMismatch, NonFiniteState, ScenarioError
from .semantics import DynamicalSystem, variable_evaluator

METHODS = ("euler", "rk4")

# a remaining sliver shorter than this fraction of dt is folded into the
# final step instead of becoming a separate microscopic step
_SLIVER = 1e-9


@dataclass(frozen=True)
class Scenario:
    """One simulation setup: x(0), parameters, span, step, method."""

    initial: Mapping[str, float]
    params: Mapping[str, float] = field(default_factory=dict)
    t0: float = 0.0
    t1: float = 1.0
    dt: float = 0.01
    method: str = "rk4"
    save_every: int = 1

    def __post_init__(self):
        if self.method not in METHODS:
            raise ScenarioError(
                f"unknown method {self.method!r}, expected one of {METHODS}"
            )
        if not self.t1 > self.t0:
            raise ScenarioError(f"need t1 > t0, got t0={self.t0}, t1={self.t1}")
        if not self.dt > 0:
            raise ScenarioError(f"need dt > 0, got {self.dt}")
        if self.dt > self.t1 - self.t0:
            raise ScenarioError(
                f"step {self.dt} exceeds span {self.t1 - self.t0}"
            )
        if self.save_every < 1:
            raise ScenarioError(f"save_every must be >= 1, got {self.save_every}")


@dataclass(frozen=True)
class Trajectory:
    """Sampled solution: times[i] pairs with states[i] in stock order."""

    columns: tuple[str, ...]
    times: np.ndarray
    states: np.ndarray

    def __len__(self) -> int:
        return len(self.times)


@dataclass(frozen=True)
class Table:
    """Trajectory extended with re-evaluated variable columns."""

    columns: tuple[str, ...]
    times: np.ndarray
    values: np.ndarray


def _initial_state(system: DynamicalSystem, scenario: Scenario) -> np.ndarray:
    given = dict(scenario.initial)
    missing = [name for name in system.stocks if name not in given]
    if missing:
        raise ScenarioError(f"initial values missing for stocks: {missing}")
    extra = [name for name in given if name not in system.stocks]
    if extra:
        raise ScenarioError(f"initial values for unknown stocks: {extra}")
    return np.array([float(given[name]) for name in system.stocks])


def _check_finite(x: np.ndarray, system: DynamicalSystem, step: int) -> None:
    if np.isfinite(x).all():
        return
    bad = int(np.flatnonzero(~np.isfinite(x))[0])
    name = system.stocks[bad]
    raise NonFiniteState(
        f"non-finite value {x[bad]} in stock '{name}' at step {step}",
        step=step,
        stock=name,
    )


def simulate(system: DynamicalSystem, scenario: Scenario) -> Trajectory:
    """Integrate the system under the scenario.

    The grid starts at t0 and advances by dt; the final step is shortened
    so the last sample lands exactly on t1.  Every state is checked for
    NaN/infinity before being accepted.  With save_every=k only every
    k-th step is kept, plus the first and last.
    """
    params = dict(scenario.params)
    x = _initial_state(system, scenario)
    _check_finite(x, system, 0)

    t0, t1, dt = scenario.t0, scenario.t1, scenario.dt
    times = [t0]
    states = [x.copy()]
    t = t0
    step = 0
    # divergence is reported as NonFiniteState, not as numpy warnings
    with np.errstate(over="ignore", invalid="ignore"):
        while t < t1:
            step += 1
            t_next = t0 + step * dt
            if t_next > t1 or t1 - t_next < dt * _SLIVER:
                t_next = t1
            h = t_next - t
            if scenario.method == "euler":
                x = x + h * system(x, params)
            else:
                k1 = system(x, params)
                k2 = system(x + (h / 2.0) * k1, params)
                k3 = system(x + (h / 2.0) * k2, params)
                k4 = system(x + h * k3, params)
                x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            _check_finite(x, system, step)
            t = t_next
            if t_next == t1 or step % scenario.save_every == 0:
                times.append(t_next)
                states.append(x.copy())

    return Trajectory(
        columns=tuple(system.stocks),
        times=np.array(times),
        states=np.array(states),
    )


def observe(
    system: DynamicalSystem,
    trajectory: Trajectory,
    full_diagram: FullStockFlow | None = None,
    params: Mapping[str, float] | None = None,
) -> Table:
    """Append sum-variable and auxiliary-variable columns to a trajectory.

    Without a diagram the table simply mirrors the trajectory.  With one,
    every saved state is re-evaluated through the diagram's variable
    layers, in sum-variable order then variable order.
    """
    if trajectory.columns != tuple(system.stocks):
        raise DiagramMismatch(
            f"trajectory columns {trajectory.columns} do not match "
            f"system stocks {tuple(system.stocks)}"
        )
    if full_diagram is None:
        return Table(trajectory.columns, trajectory.times, trajectory.states.copy())

    if tuple(full_diagram.stocks) != tuple(system.stocks):
        raise DiagramMismatch(
            f"diagram stocks {tuple(full_diagram.stocks)} do not match "
            f"system stocks {tuple(system.stocks)}"
        )
    layers = variable_evaluator(full_diagram)
    rows = []
    for state in trajectory.states:
        sum_values, var_values = layers(state, params)
        rows.append(list(state) + sum_values + var_values)
    columns = (
        trajectory.columns
        + tuple(full_diagram.sum_variables)
        + tuple(full_diagram.variables)
    )
    return Table(columns, trajectory.times.copy(), np.array(rows))
