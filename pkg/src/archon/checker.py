"""Name resolution and conformance checking.

``resolve`` binds a syntax tree against a type table, folds inline type
definitions into a working copy, expands pipeline shorthands, and yields a
wired Architecture.  The check_* passes then report findings without ever
aborting early: every check runs and the diagnostics aggregate.

Resolution is tolerant of declaration order: type definitions are applied
first, then instances/connectors/stream declarations, then attachments, so
a file may mention a name before its declaration line.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping, Optional

from . import model
from .desugar import PipelineExpansion, desugar_pipeline
from .diagnostics import ArchonError, Diagnostic, error, has_errors
from .model import (
    Architecture,
    Connector,
    Instance,
    RoleSpec,
    TypeTable,
    STREAM_IN,
    STREAM_OUT,
)
from .syntax import (
    AttachDecl,
    ComponentTypeDef,
    ConnectorDecl,
    ConnectorTypeDef,
    InstanceDecl,
    IoDecl,
    PipelineDecl,
    PortTypeDef,
    SystemAst,
)
from .topology import TopologyReport, classify_digraph

PIPE_TYPE = "Pipe"
RPC_TYPE = "RPC"


@dataclass(frozen=True)
class ExternalIO:
    """Stream bindings supplied outside the source text (CLI flags)."""

    input: Optional[str] = None
    output: Optional[str] = None


@dataclass(frozen=True)
class ResolveResult:
    architecture: Optional[Architecture]  # None when errors were found
    table: TypeTable
    diagnostics: list[Diagnostic]


def fold_typedefs(
    table: TypeTable, declarations, origin: str = "inline"
) -> tuple[TypeTable, list[Diagnostic]]:
    """Apply type definitions to a table copy; shadowing is a hard error."""
    diags: list[Diagnostic] = []
    for decl in declarations:
        try:
            if isinstance(decl, PortTypeDef):
                table = model.define_port_type(table, decl.name, origin=origin)
            elif isinstance(decl, ComponentTypeDef):
                ports = [
                    model.PortSpec(p.name, p.port_type, model.MANY if p.many else model.ONE)
                    for p in decl.ports
                ]
                table = model.define_component_type(
                    table, decl.name, ports, origin=origin, span=decl.span
                )
            elif isinstance(decl, ConnectorTypeDef):
                roles = [
                    RoleSpec(r.name, frozenset(r.accepts), r.min_fill, r.max_fill)
                    for r in decl.roles
                ]
                table = model.define_connector_type(
                    table, decl.name, roles, origin=origin, span=decl.span
                )
        except ArchonError as exc:
            diags.append(
                exc.diagnostic
                if exc.diagnostic.span is not None
                else replace(exc.diagnostic, span=decl.span)
            )
    return table, diags


def resolve(ast: SystemAst, table: TypeTable) -> ResolveResult:
    # Pass 1: fold inline type definitions into a working table copy.
    table, diags = fold_typedefs(table, ast.declarations, origin="inline")

    arch = Architecture(name=ast.name, style=ast.style, allow_layer_skip=ast.allow_skip)
    instances: dict[str, Instance] = {}
    connectors: dict[str, Connector] = {}
    inputs: dict[str, Optional[str]] = {}
    outputs: dict[str, Optional[str]] = {}

    # Pass 2: instances, connectors, stream declarations, and the instance
    # and connector halves of pipeline expansions.
    expansions: dict[int, PipelineExpansion] = {}
    for index, decl in enumerate(ast.declarations):
        if isinstance(decl, InstanceDecl):
            if decl.name in instances or decl.name in connectors:
                diags.append(error("DuplicateName", f"name '{decl.name}' is already declared", decl.span))
                continue
            if table.component(decl.type_name) is None:
                diags.append(
                    error("UnknownType", f"unknown component type '{decl.type_name}'", decl.span)
                )
                continue
            instances[decl.name] = Instance(decl.name, decl.type_name, dict(decl.attrs), decl.span)
        elif isinstance(decl, ConnectorDecl):
            if decl.name in connectors or decl.name in instances:
                diags.append(error("DuplicateName", f"name '{decl.name}' is already declared", decl.span))
                continue
            if table.connector(decl.type_name) is None:
                diags.append(
                    error("UnknownType", f"unknown connector type '{decl.type_name}'", decl.span)
                )
                continue
            connectors[decl.name] = Connector(decl.name, decl.type_name, decl.span)
        elif isinstance(decl, IoDecl):
            # Pipelines pre-register the stream with no path; only a second
            # explicit path is a clash.
            target = inputs if decl.direction == "input" else outputs
            if target.get(decl.direction) is not None:
                diags.append(
                    error("DuplicateName", f"{decl.direction} stream is already bound", decl.span)
                )
                continue
            target[decl.direction] = decl.path
        elif isinstance(decl, PipelineDecl):
            declared = {name: inst.type_name for name, inst in instances.items()}
            expansion, pipe_diags = desugar_pipeline(decl, table, declared)
            diags.extend(pipe_diags)
            if expansion is None:
                continue
            expansions[index] = expansion
            for inst_decl in expansion.instances:
                if inst_decl.name in instances:
                    continue  # sharing stages between pipelines is the point
                if inst_decl.name in connectors:
                    diags.append(
                        error("DuplicateName", f"name '{inst_decl.name}' is already declared", decl.span)
                    )
                    continue
                instances[inst_decl.name] = Instance(
                    inst_decl.name, inst_decl.type_name, {}, decl.span
                )
            for conn_decl in expansion.connectors:
                if conn_decl.name in connectors or conn_decl.name in instances:
                    diags.append(
                        error("DuplicateName", f"name '{conn_decl.name}' is already declared", decl.span)
                    )
                    continue
                connectors[conn_decl.name] = Connector(conn_decl.name, conn_decl.type_name, decl.span)
            inputs.setdefault("input", None)
            outputs.setdefault("output", None)

    arch = replace(
        arch,
        instances=instances,
        connectors=connectors,
        inputs=inputs,
        outputs=outputs,
    )

    # Pass 3: attachments and external bindings, in source order.
    for index, decl in enumerate(ast.declarations):
        if isinstance(decl, AttachDecl):
            try:
                arch = model.attach(
                    arch, table, decl.instance, decl.port, decl.connector, decl.role, decl.span
                )
            except ArchonError as exc:
                diags.append(exc.diagnostic)
        elif isinstance(decl, PipelineDecl) and index in expansions:
            expansion = expansions[index]
            for att in expansion.attachments:
                try:
                    arch = model.attach(
                        arch, table, att.instance, att.port, att.connector, att.role, att.span
                    )
                except ArchonError as exc:
                    diags.append(exc.diagnostic)
            arch = replace(
                arch,
                externals=arch.externals + (expansion.external_in, expansion.external_out),
            )

    if has_errors(diags):
        return ResolveResult(None, table, diags)
    return ResolveResult(arch, table, diags)


# ---------------------------------------------------------------------------
# Checks
# ---------------------------------------------------------------------------


def check_types(arch: Architecture, table: TypeTable) -> list[Diagnostic]:
    """One TypeMismatch per attachment whose port type the role rejects."""
    diags: list[Diagnostic] = []
    for att in arch.attachments:
        inst = arch.instances[att.instance]
        pspec = table.component(inst.type_name).port(att.port)  # resolved earlier
        conn = arch.connectors[att.connector]
        rspec = table.connector(conn.type_name).role(att.role)
        if pspec.port_type not in rspec.accepts:
            diags.append(
                error(
                    "TypeMismatch",
                    f"port {att.instance}.{att.port} of type {pspec.port_type} "
                    f"cannot fill role {att.connector}.{att.role} "
                    f"(accepts {', '.join(sorted(rspec.accepts))})",
                    att.span,
                )
            )
    for ext in arch.externals:
        conn = arch.connectors[ext.connector]
        rspec = table.connector(conn.type_name).role(ext.role)
        virtual = STREAM_OUT if ext.direction == "input" else STREAM_IN
        if virtual not in rspec.accepts:
            diags.append(
                error(
                    "TypeMismatch",
                    f"external {ext.direction} stream cannot fill role {ext.connector}.{ext.role}",
                    None,
                )
            )
    return diags


def check_completeness(
    arch: Architecture, table: TypeTable, io: ExternalIO = ExternalIO()
) -> list[Diagnostic]:
    """Arity validation plus reachability of external streams."""
    diags = model.validate_arity(arch, table)
    for ext in arch.externals:
        if ext.direction == "input":
            bound = arch.inputs.get(ext.stream) or io.input
            if bound is None:
                diags.append(
                    error(
                        "UnboundExternalInput",
                        f"pipeline input at {ext.connector}.{ext.role} has no input binding",
                    )
                )
        else:
            bound = arch.outputs.get(ext.stream) or io.output
            if bound is None:
                diags.append(
                    error(
                        "UnboundExternalOutput",
                        f"pipeline output at {ext.connector}.{ext.role} has no output binding",
                    )
                )
    return diags


def dataflow_edges(arch: Architecture) -> list[tuple[str, str]]:
    """Directed instance-to-instance edges, one per pipe with both sides
    attached to instances."""
    edges: list[tuple[str, str]] = []
    for conn in arch.connectors.values():
        if conn.type_name != PIPE_TYPE:
            continue
        sources = arch.attachments_of_connector(conn.name, "source")
        sinks = arch.attachments_of_connector(conn.name, "sink")
        for s in sources:
            for t in sinks:
                edges.append((s.instance, t.instance))
    return edges


def _filter_shaped(ctype: model.ComponentType) -> bool:
    """Stream-only component type with the stdin/stdout convention."""
    stdin = ctype.port("stdin")
    stdout = ctype.port("stdout")
    return (
        stdin is not None
        and stdin.port_type == STREAM_IN
        and stdout is not None
        and stdout.port_type == STREAM_OUT
        and all(p.port_type in (STREAM_IN, STREAM_OUT) for p in ctype.ports)
    )


def dataflow_nodes(arch: Architecture, table: TypeTable) -> set[str]:
    """Instances that carry stream traffic: pipe-attached ones plus every
    filter node, so a stray unattached filter breaks linearity."""
    nodes: set[str] = set()
    for conn in arch.connectors.values():
        if conn.type_name != PIPE_TYPE:
            continue
        for att in arch.attachments_of_connector(conn.name):
            nodes.add(att.instance)
    for inst in arch.instances.values():
        ctype = table.component(inst.type_name)
        if ctype is not None and _filter_shaped(ctype):
            nodes.add(inst.name)
    return nodes


def classify_topology(arch: Architecture, table: TypeTable) -> TopologyReport:
    return classify_digraph(dataflow_nodes(arch, table), dataflow_edges(arch))


# ---------------------------------------------------------------------------
# Styles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StyleRule:
    """Declarative constraint vocabulary for one architectural style.

    A None constraint means "unconstrained".  An instance conforms if its
    type name is in allowed_component_types, or all of the type's ports use
    port types from component_port_types.
    """

    name: str
    allowed_component_types: Optional[frozenset[str]] = None
    component_port_types: Optional[frozenset[str]] = None
    allowed_connector_types: Optional[frozenset[str]] = None
    required_instance_attrs: frozenset[str] = frozenset()
    forbid_unseeded_cycles: bool = False
    rpc_layer_discipline: bool = False


BUILTIN_STYLES: Mapping[str, StyleRule] = {
    "pipes-and-filters": StyleRule(
        name="pipes-and-filters",
        allowed_component_types=frozenset({"Filter"}),
        component_port_types=frozenset({STREAM_IN, STREAM_OUT}),
        allowed_connector_types=frozenset({"Pipe"}),
        forbid_unseeded_cycles=True,
    ),
    "layered": StyleRule(
        name="layered",
        required_instance_attrs=frozenset({"layer"}),
        rpc_layer_discipline=True,
    ),
    "event-based": StyleRule(
        name="event-based",
        allowed_connector_types=frozenset({"Event"}),
    ),
}


def _instance_conforms(rule: StyleRule, arch: Architecture, table: TypeTable, inst: Instance) -> bool:
    if rule.allowed_component_types is not None and inst.type_name in rule.allowed_component_types:
        return True
    if rule.component_port_types is not None:
        ctype = table.component(inst.type_name)
        if ctype is not None and all(p.port_type in rule.component_port_types for p in ctype.ports):
            return True
    return rule.allowed_component_types is None and rule.component_port_types is None


def check_style(
    arch: Architecture,
    table: TypeTable,
    styles: Mapping[str, StyleRule] | None = None,
) -> list[Diagnostic]:
    """Enforce the system's declared style; empty when no style is set."""
    if arch.style is None:
        return []
    rule = (styles if styles is not None else BUILTIN_STYLES).get(arch.style)
    if rule is None:
        return [error("UnknownStyle", f"unknown style '{arch.style}'")]

    diags: list[Diagnostic] = []
    for inst in arch.instances.values():
        if not _instance_conforms(rule, arch, table, inst):
            diags.append(
                error(
                    "StyleViolation",
                    f"component type {inst.type_name} of '{inst.name}' is not allowed in style {rule.name}",
                    inst.span,
                )
            )
        for attr in sorted(rule.required_instance_attrs):
            if attr not in inst.attrs:
                diags.append(
                    error(
                        "StyleViolation",
                        f"instance '{inst.name}' is missing required attribute '{attr}' in style {rule.name}",
                        inst.span,
                    )
                )
    if rule.allowed_connector_types is not None:
        for conn in arch.connectors.values():
            if conn.type_name not in rule.allowed_connector_types:
                diags.append(
                    error(
                        "StyleViolation",
                        f"connector kind {conn.type_name} of '{conn.name}' is not allowed in style {rule.name}",
                        conn.span,
                    )
                )
    if rule.rpc_layer_discipline:
        diags.extend(_check_layer_discipline(arch))
    if rule.forbid_unseeded_cycles:
        diags.extend(_check_seeded_cycles(arch, table))
    return diags


def _check_layer_discipline(arch: Architecture) -> list[Diagnostic]:
    diags: list[Diagnostic] = []
    for conn in arch.connectors.values():
        if conn.type_name != RPC_TYPE:
            continue
        callers = arch.attachments_of_connector(conn.name, "caller")
        definers = arch.attachments_of_connector(conn.name, "definer")
        for c in callers:
            for d in definers:
                lc = arch.instances[c.instance].attrs.get("layer")
                ld = arch.instances[d.instance].attrs.get("layer")
                if not isinstance(lc, int) or not isinstance(ld, int):
                    continue  # missing layers reported by the attribute rule
                ok = lc > ld if arch.allow_layer_skip else lc == ld + 1
                if not ok:
                    diags.append(
                        error(
                            "StyleViolation",
                            f"layer skip: {c.instance} (layer {lc}) calls {d.instance} "
                            f"(layer {ld}) over '{conn.name}'",
                            conn.span,
                        )
                    )
    return diags


def _check_seeded_cycles(arch: Architecture, table: TypeTable) -> list[Diagnostic]:
    seeded = {name for name, inst in arch.instances.items() if "seed" in inst.attrs}
    nodes = dataflow_nodes(arch, table) - seeded
    edges = [(a, b) for a, b in dataflow_edges(arch) if a not in seeded and b not in seeded]
    report = classify_digraph(nodes, edges)
    diags: list[Diagnostic] = []
    for cycle in report.cycles:
        diags.append(
            error(
                "StyleViolation",
                "cycle without a seeded instance: " + " -> ".join(cycle),
            )
        )
    return diags


def check_all(
    arch: Architecture,
    table: TypeTable,
    io: ExternalIO = ExternalIO(),
    styles: Mapping[str, StyleRule] | None = None,
) -> list[Diagnostic]:
    """Every check, aggregated; the full compile-side verdict."""
    return (
        check_types(arch, table)
        + check_completeness(arch, table, io)
        + check_style(arch, table, styles)
    )
