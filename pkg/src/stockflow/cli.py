"""Command-line interface.

Exit codes: 0 success, 1 validation failure, 2 usage error (click),
3 runtime or numeric failure.  Diagnostics go to standard error.
"""

from __future__ import annotations

import functools
import sys

import click

from .compose import OpenDiagram, UWD, oapply, validate_uwd
from .core import (
    FullStockFlow,
    PrimitiveStockFlow,
    StockFlowDiagram,
    validate,
)
from .errors import (
    EvalError,
    NonFiniteState,
    SizeLimitExceeded,
    StockFlowError,
    ValidationError,
    SchemaViolation,
    VersionMismatch,
)
from .integrate import Scenario, observe, simulate
from .io import MorphismSpec, export_dot, load, save, write_csv
from .morphism import check_flow_equation, check_naturality
from .semantics import equations, vector_field, vector_field_full

_VALIDATION = (ValidationError, SchemaViolation, VersionMismatch)
_RUNTIME = (EvalError, NonFiniteState, SizeLimitExceeded)


def _reporting_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except _VALIDATION as e:
            click.echo(f"error: {e}", err=True)
            sys.exit(1)
        except _RUNTIME as e:
            click.echo(f"error: {e}", err=True)
            sys.exit(3)
        except StockFlowError as e:
            click.echo(f"error: {e}", err=True)
            sys.exit(3)

    return wrapper


def _as_diagram(obj, source: str):
    """Unwrap to something with semantics; open diagrams use their inner."""
    if isinstance(obj, OpenDiagram):
        obj = obj.inner
    if isinstance(obj, (StockFlowDiagram, FullStockFlow)):
        return obj
    raise ValidationError(
        f"{source}: expected a diagram with flow functions, got {type(obj).__name__}"
    )


def _compile(diagram):
    if isinstance(diagram, FullStockFlow):
        return vector_field_full(diagram)
    return vector_field(diagram)


@click.group()
def main():
    """Build, compose, check, and simulate stock-and-flow diagrams."""


@main.command("validate")
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@_reporting_errors
def validate_cmd(file):
    """Check a file; print OK or the violation report."""
    obj = load(file)
    if isinstance(obj, OpenDiagram):
        report = validate(obj.inner)
    elif isinstance(obj, (PrimitiveStockFlow, StockFlowDiagram, FullStockFlow)):
        report = validate(obj)
    elif isinstance(obj, UWD):
        report = validate_uwd(obj)
    else:
        report = []
    if report:
        for problem in report:
            click.echo(f"error: {problem}", err=True)
        sys.exit(1)
    click.echo("OK")


@main.command("compose")
@click.argument("pattern_file", type=click.Path(exists=True, dir_okay=False))
@click.option(
    "--box",
    "boxes",
    multiple=True,
    required=True,
    help="Bind a pattern box to an open diagram file, as name=file.",
)
@click.option("-o", "--output", required=True, type=click.Path(dir_okay=False))
@_reporting_errors
def compose_cmd(pattern_file, boxes, output):
    """Fill a wiring pattern's boxes and write the composite."""
    pattern = load(pattern_file)
    if not isinstance(pattern, UWD):
        raise ValidationError(f"{pattern_file}: expected a uwd file")
    fillers = {}
    for binding in boxes:
        name, sep, path = binding.partition("=")
        if not sep or not name or not path:
            raise click.UsageError(f"--box takes name=file, got {binding!r}")
        filler = load(path)
        if not isinstance(filler, OpenDiagram):
            raise ValidationError(f"{path}: expected an open diagram file")
        fillers[name] = filler
    composite = oapply(pattern, fillers)
    save(composite, output)
    click.echo(f"wrote {output}")


@main.command("simulate")
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@click.option(
    "--scenario", "scenario_file", required=True, type=click.Path(exists=True, dir_okay=False)
)
@click.option("-o", "--output", type=click.Path(dir_okay=False))
@click.option(
    "--observe", "observe_flag", is_flag=True, help="Append variable columns."
)
@_reporting_errors
def simulate_cmd(file, scenario_file, output, observe_flag):
    """Integrate a diagram under a scenario and emit CSV."""
    diagram = _as_diagram(load(file), file)
    scenario = load(scenario_file)
    if not isinstance(scenario, Scenario):
        raise ValidationError(f"{scenario_file}: expected a scenario file")
    system = _compile(diagram)
    trajectory = simulate(system, scenario)
    if observe_flag and isinstance(diagram, FullStockFlow):
        result = observe(system, trajectory, diagram, scenario.params)
    else:
        result = trajectory
    if output:
        with open(output, "w") as out:
            write_csv(result, out)
        click.echo(f"wrote {output}")
    else:
        write_csv(result, sys.stdout)


@main.command("equations")
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@_reporting_errors
def equations_cmd(file):
    """Print the system of equations a diagram denotes."""
    diagram = _as_diagram(load(file), file)
    click.echo(equations(diagram))


@main.command("export-dot")
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@click.option("-o", "--output", type=click.Path(dir_okay=False))
@_reporting_errors
def export_dot_cmd(file, output):
    """Render a diagram file as Graphviz DOT."""
    obj = load(file)
    if isinstance(obj, OpenDiagram):
        obj = obj.inner
    if not isinstance(obj, (PrimitiveStockFlow, StockFlowDiagram, FullStockFlow)):
        raise ValidationError(f"{file}: expected a diagram file")
    text = export_dot(obj)
    if output:
        with open(output, "w") as out:
            out.write(text)
        click.echo(f"wrote {output}")
    else:
        click.echo(text, nl=False)


@main.command("check-morphism")
@click.argument("morphism_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--from", "src_file", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--to", "dst_file", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--samples", default=100, show_default=True)
@click.option("--tol", default=1e-12, show_default=True)
@click.option("--seed", default=7, show_default=True)
@click.option(
    "--param",
    "params",
    multiple=True,
    help="Bind a parameter for rate evaluation, as name=value.",
)
@_reporting_errors
def check_morphism_cmd(morphism_file, src_file, dst_file, samples, tol, seed, params):
    """Check a morphism file: structure squares, then rate sums."""
    spec = load(morphism_file)
    if not isinstance(spec, MorphismSpec):
        raise ValidationError(f"{morphism_file}: expected a morphism file")
    src = _as_diagram(load(src_file), src_file)
    dst = _as_diagram(load(dst_file), dst_file)
    if not isinstance(src, StockFlowDiagram) or not isinstance(dst, StockFlowDiagram):
        raise ValidationError("morphism checks need stockflow diagrams on both sides")
    bindings = {}
    for entry in params:
        name, sep, value = entry.partition("=")
        if not sep:
            raise click.UsageError(f"--param takes name=value, got {entry!r}")
        try:
            bindings[name] = float(value)
        except ValueError:
            raise click.UsageError(f"--param value not a number: {entry!r}")
    alpha = spec.resolve(src, dst)
    problems = check_naturality(alpha, src, dst)
    if problems:
        for problem in problems:
            click.echo(f"error: {problem}", err=True)
        sys.exit(1)
    report = check_flow_equation(
        alpha, src, dst, sample_count=samples, seed=seed, tol=tol,
        params=bindings or None,
    )
    verdict = "PASS" if report.passed else "FAIL"
    click.echo(f"{verdict} max discrepancy {report.worst:.6g} (tol {tol:g})")
    if not report.passed:
        sys.exit(1)


if __name__ == "__main__":
    main()
