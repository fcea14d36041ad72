#!/usr/bin/env python3
"""Error-vs-step-size table for both integration methods on the
exponential-decay benchmark (exact answer known in closed form)."""

import math

from stockflow.core import build_full
from stockflow.integrate import Scenario, simulate
from stockflow.semantics import vector_field_full


def decay_system():
    d = build_full(
        stocks=["X"],
        flows=[("decay", "rate")],
        variables=[("rate", "X")],
        inflows=[("X", "decay")],
        variable_links=[("X", "rate")],
    )
    return vector_field_full(d)


def main():
    system = decay_system()
    exact = math.exp(-1.0)
    print(f"{'method':<8}{'dt':>10}{'|error(1)|':>16}{'ratio':>10}")
    for method in ("euler", "rk4"):
        previous = None
        for dt in (0.1, 0.05, 0.025, 0.0125):
            traj = simulate(
                system,
                Scenario(initial={"X": 1.0}, t1=1.0, dt=dt, method=method),
            )
            err = abs(traj.states[-1, 0] - exact)
            ratio = "" if previous is None else f"{previous / err:10.2f}"
            print(f"{method:<8}{dt:>10}{err:>16.3e}{ratio:>10}")
            previous = err


if __name__ == "__main__":
    main()
