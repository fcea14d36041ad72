"""Composable stock-and-flow diagrams with ODE semantics.

Diagrams are plain frozen data: stocks, flows between them, and links
feeding stock values into flow rate expressions.  Open diagrams expose
interface feet and compose by gluing shared stocks, either pairwise or
as directed by a wiring pattern.  Compiling a diagram yields its vector
field; composing diagrams and composing the compiled systems give the
same field.  A small fixed-step integrator, JSON round trips, and a
command line round the package out.
"""

from .compose import (
    UWD,
    Box,
    FullFoot,
    Leg,
    OpenDiagram,
    SimpleFoot,
    compose_pair,
    disjoint_union,
    identity_open,
    iso_check,
    make_open,
    oapply,
    permute_legs,
    validate_uwd,
)
from .core import (
    Flow,
    FullStockFlow,
    Inflow,
    Link,
    Outflow,
    PrimitiveStockFlow,
    StockFlowDiagram,
    SumLink,
    SumVariableLink,
    VariableLink,
    build_full,
    build_primitive,
    build_stock_flow,
    validate,
)
from .errors import (
    EvalError,
    NonFiniteState,
    ScenarioError,
    SchemaViolation,
    StockFlowError,
    UnknownModel,
    ValidationError,
    VersionMismatch,
)
from .expr import (
    Binary,
    Const,
    Expression,
    LinkRef,
    Param,
    SumVarRef,
    Unary,
    eval_expression,
    expression_arity,
    expression_params,
    format_expression,
    parse_expression,
)
from .integrate import METHODS, Scenario, Table, Trajectory, observe, simulate
from .io import (
    FORMAT_VERSION,
    KINDS,
    MorphismSpec,
    dumps,
    export_dot,
    load,
    loads,
    morphism_spec,
    save,
    write_csv,
    write_csv_path,
)
from .models import MODELS, build, reference_scenario
from .morphism import (
    DiagramMorphism,
    FlowEquationReport,
    check_flow_equation,
    check_naturality,
    compose_morphisms,
    identity_morphism,
    lump,
)
from .semantics import (
    DynamicalSystem,
    OpenDynamicalSystem,
    compose_open_systems,
    equations,
    open_vector_field,
    pushforward_system,
    variable_evaluator,
    vector_field,
    vector_field_full,
)

__version__ = "0.1.0"

__all__ = [
    "Binary",
    "Box",
    "Const",
    "DiagramMorphism",
    "DynamicalSystem",
    "EvalError",
    "Expression",
    "FORMAT_VERSION",
    "Flow",
    "FlowEquationReport",
    "FullFoot",
    "FullStockFlow",
    "Inflow",
    "KINDS",
    "Leg",
    "Link",
    "LinkRef",
    "METHODS",
    "MODELS",
    "MorphismSpec",
    "NonFiniteState",
    "OpenDiagram",
    "OpenDynamicalSystem",
    "Outflow",
    "Param",
    "PrimitiveStockFlow",
    "Scenario",
    "ScenarioError",
    "SchemaViolation",
    "SimpleFoot",
    "StockFlowDiagram",
    "StockFlowError",
    "SumLink",
    "SumVarRef",
    "SumVariableLink",
    "Table",
    "Trajectory",
    "UWD",
    "Unary",
    "UnknownModel",
    "ValidationError",
    "VariableLink",
    "VersionMismatch",
    "build",
    "build_full",
    "build_primitive",
    "build_stock_flow",
    "check_flow_equation",
    "check_naturality",
    "compose_morphisms",
    "compose_open_systems",
    "compose_pair",
    "disjoint_union",
    "dumps",
    "equations",
    "eval_expression",
    "export_dot",
    "expression_arity",
    "expression_params",
    "format_expression",
    "identity_morphism",
    "identity_open",
    "iso_check",
    "load",
    "loads",
    "lump",
    "make_open",
    "morphism_spec",
    "oapply",
    "observe",
    "open_vector_field",
    "parse_expression",
    "permute_legs",
    "pushforward_system",
    "reference_scenario",
    "save",
    "simulate",
    "validate",
    "validate_uwd",
    "variable_evaluator",
    "vector_field",
    "vector_field_full",
    "write_csv",
    "write_csv_path",
]
