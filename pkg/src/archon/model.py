"""Core vocabulary: typed components, typed connectors, and the wired graph.

Components expose named ports, connectors expose named roles, and a system
is a set of component instances whose ports are attached to connector
roles.  Which port may fill which role is decided by exact membership of
the port's type in the role's accepted set; there is no subtyping.

All values here are immutable.  Extending a type table or editing an
architecture returns a new value and leaves the input untouched, so
libraries of types compose without mutation-order surprises and every
value is safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Optional, Sequence

from .diagnostics import Diagnostic, Span, error, fail

# Builtin port types.  Developer-defined port types are bare names added
# alongside these; compatibility never looks inside a name.
STREAM_IN = "StreamIn"
STREAM_OUT = "StreamOut"
RPC_CALL = "RpcCall"
RPC_DEF = "RpcDef"
EVENT_EMIT = "EventEmit"
EVENT_RECV = "EventRecv"
STORE_ACCESS = "StoreAccess"
STORE_PROVIDE = "StoreProvide"

BUILTIN_PORT_TYPES = (
    STREAM_IN,
    STREAM_OUT,
    RPC_CALL,
    RPC_DEF,
    EVENT_EMIT,
    EVENT_RECV,
    STORE_ACCESS,
    STORE_PROVIDE,
)

STREAM_PORT_TYPES = frozenset({STREAM_IN, STREAM_OUT})

# Port types through which an instance initiates traffic; used to orient
# edges in exports and hub renderings.
OUTBOUND_PORT_TYPES = frozenset({STREAM_OUT, EVENT_EMIT, RPC_CALL, STORE_ACCESS})

BUILTIN_COMPONENT_TYPES = ("Filter", "Process", "DataStore")
BUILTIN_CONNECTOR_TYPES = ("Pipe", "RPC", "Event", "DataAccess")

ONE = "one"
MANY = "many"

UNBOUNDED: Optional[int] = None


@dataclass(frozen=True)
class PortSpec:
    name: str
    port_type: str
    multiplicity: str = ONE

    def __post_init__(self) -> None:
        if self.multiplicity not in (ONE, MANY):
            raise ValueError(f"bad multiplicity {self.multiplicity!r}")


@dataclass(frozen=True)
class RoleSpec:
    name: str
    accepts: frozenset[str]
    min_fill: int = 1
    max_fill: Optional[int] = 1  # None = unbounded

    def __post_init__(self) -> None:
        object.__setattr__(self, "accepts", frozenset(self.accepts))


@dataclass(frozen=True)
class ComponentType:
    name: str
    ports: tuple[PortSpec, ...]
    origin: str = "builtin"

    def port(self, name: str) -> Optional[PortSpec]:
        for p in self.ports:
            if p.name == name:
                return p
        return None


@dataclass(frozen=True)
class ConnectorType:
    name: str
    roles: tuple[RoleSpec, ...]
    origin: str = "builtin"

    def role(self, name: str) -> Optional[RoleSpec]:
        for r in self.roles:
            if r.name == name:
                return r
        return None


@dataclass(frozen=True)
class TypeTable:
    """Registry of port, component, and connector types.

    The builtin entries are always present and can never be shadowed.
    """

    port_types: Mapping[str, str]  # name -> origin
    component_types: Mapping[str, ComponentType]
    connector_types: Mapping[str, ConnectorType]

    def has_port_type(self, name: str) -> bool:
        return name in self.port_types

    def component(self, name: str) -> Optional[ComponentType]:
        return self.component_types.get(name)

    def connector(self, name: str) -> Optional[ConnectorType]:
        return self.connector_types.get(name)


def builtin_type_table() -> TypeTable:
    """The table every system starts from.

    Filter is the classic stream transformer (stdin/stdout); Process is the
    general component and carries one default port per port type except
    StoreProvide, which is DataStore's defining capability.  Refined
    component types with other port sets are declared by the developer.
    """
    filter_t = ComponentType(
        "Filter",
        (PortSpec("stdin", STREAM_IN, ONE), PortSpec("stdout", STREAM_OUT, ONE)),
    )
    process_t = ComponentType(
        "Process",
        (
            PortSpec("stdin", STREAM_IN, ONE),
            PortSpec("stdout", STREAM_OUT, ONE),
            PortSpec("call", RPC_CALL, MANY),
            PortSpec("serve", RPC_DEF, MANY),
            PortSpec("emit", EVENT_EMIT, MANY),
            PortSpec("listen", EVENT_RECV, MANY),
            PortSpec("access", STORE_ACCESS, MANY),
        ),
    )
    datastore_t = ComponentType("DataStore", (PortSpec("store", STORE_PROVIDE, ONE),))

    pipe_t = ConnectorType(
        "Pipe",
        (
            RoleSpec("source", frozenset({STREAM_OUT}), 1, 1),
            RoleSpec("sink", frozenset({STREAM_IN}), 1, 1),
        ),
    )
    rpc_t = ConnectorType(
        "RPC",
        (
            RoleSpec("caller", frozenset({RPC_CALL}), 1, 1),
            RoleSpec("definer", frozenset({RPC_DEF}), 1, 1),
        ),
    )
    event_t = ConnectorType(
        "Event",
        (
            RoleSpec("announcer", frozenset({EVENT_EMIT}), 1, UNBOUNDED),
            RoleSpec("listener", frozenset({EVENT_RECV}), 0, UNBOUNDED),
        ),
    )
    dataaccess_t = ConnectorType(
        "DataAccess",
        (
            RoleSpec("client", frozenset({STORE_ACCESS}), 1, UNBOUNDED),
            RoleSpec("store", frozenset({STORE_PROVIDE}), 1, 1),
        ),
    )

    return TypeTable(
        port_types={name: "builtin" for name in BUILTIN_PORT_TYPES},
        component_types={t.name: t for t in (filter_t, process_t, datastore_t)},
        connector_types={t.name: t for t in (pipe_t, rpc_t, event_t, dataaccess_t)},
    )


def define_port_type(table: TypeTable, name: str, origin: str = "library") -> TypeTable:
    if table.has_port_type(name):
        raise fail("DuplicateType", f"port type '{name}' is already defined")
    return replace(table, port_types={**table.port_types, name: origin})


def define_component_type(
    table: TypeTable,
    name: str,
    ports: Sequence[PortSpec],
    origin: str = "library",
    span: Optional[Span] = None,
) -> TypeTable:
    if name in table.component_types or name in table.connector_types:
        raise fail("DuplicateType", f"component type '{name}' is already defined", span)
    seen: set[str] = set()
    for p in ports:
        if p.name in seen:
            raise fail("BadPortSpec", f"port '{p.name}' declared twice in '{name}'", span)
        seen.add(p.name)
        if not table.has_port_type(p.port_type):
            raise fail(
                "BadPortSpec",
                f"port '{p.name}' of '{name}' uses unknown port type '{p.port_type}'",
                span,
            )
    ct = ComponentType(name, tuple(ports), origin)
    return replace(table, component_types={**table.component_types, name: ct})


def define_connector_type(
    table: TypeTable,
    name: str,
    roles: Sequence[RoleSpec],
    origin: str = "library",
    span: Optional[Span] = None,
) -> TypeTable:
    if name in table.connector_types or name in table.component_types:
        raise fail("DuplicateType", f"connector type '{name}' is already defined", span)
    seen: set[str] = set()
    for r in roles:
        if r.name in seen:
            raise fail("BadRoleSpec", f"role '{r.name}' declared twice in '{name}'", span)
        seen.add(r.name)
        if not r.accepts:
            raise fail("BadRoleSpec", f"role '{r.name}' of '{name}' accepts nothing", span)
        if r.min_fill < 0:
            raise fail("BadRoleSpec", f"role '{r.name}' of '{name}' has negative min fill", span)
        if r.max_fill is not None and (r.max_fill < 1 or r.min_fill > r.max_fill):
            raise fail(
                "BadRoleSpec",
                f"role '{r.name}' of '{name}' has fill range {r.min_fill}..{r.max_fill}",
                span,
            )
        for pt in r.accepts:
            if not table.has_port_type(pt):
                raise fail(
                    "BadRoleSpec",
                    f"role '{r.name}' of '{name}' accepts unknown port type '{pt}'",
                    span,
                )
    ct = ConnectorType(name, tuple(roles), origin)
    return replace(table, connector_types={**table.connector_types, name: ct})


def compatible(table: TypeTable, port_type: str, role: RoleSpec) -> bool:
    """True iff a port of this type may fill the role."""
    if not table.has_port_type(port_type):
        raise fail("UnknownPortType", f"unknown port type '{port_type}'")
    return port_type in role.accepts


# ---------------------------------------------------------------------------
# Architecture graph
# ---------------------------------------------------------------------------

EXT_INPUT = "input"
EXT_OUTPUT = "output"


@dataclass(frozen=True)
class Instance:
    name: str
    type_name: str
    attrs: Mapping[str, object] = field(default_factory=dict)
    span: Optional[Span] = field(default=None, compare=False)


@dataclass(frozen=True)
class Connector:
    name: str
    type_name: str
    span: Optional[Span] = field(default=None, compare=False)


@dataclass(frozen=True)
class Attachment:
    instance: str
    port: str
    connector: str
    role: str
    span: Optional[Span] = field(default=None, compare=False)


@dataclass(frozen=True)
class ExternalBinding:
    """A connector role fed by, or draining to, a stream outside the system.

    ``direction`` is 'input' (stream fills the role as a producer) or
    'output' (stream consumes from the role).
    """

    direction: str
    stream: str  # external stream name ('input' / 'output')
    connector: str
    role: str


@dataclass(frozen=True)
class Architecture:
    name: str
    style: Optional[str] = None
    instances: Mapping[str, Instance] = field(default_factory=dict)
    connectors: Mapping[str, Connector] = field(default_factory=dict)
    attachments: tuple[Attachment, ...] = ()
    externals: tuple[ExternalBinding, ...] = ()
    # external stream name -> file path; None means "bind at run time"
    inputs: Mapping[str, Optional[str]] = field(default_factory=dict)
    outputs: Mapping[str, Optional[str]] = field(default_factory=dict)
    allow_layer_skip: bool = False

    def attachments_of_connector(self, connector: str, role: Optional[str] = None) -> list[Attachment]:
        return [
            a
            for a in self.attachments
            if a.connector == connector and (role is None or a.role == role)
        ]

    def attachments_of_port(self, instance: str, port: str) -> list[Attachment]:
        return [a for a in self.attachments if a.instance == instance and a.port == port]

    def externals_of_connector(self, connector: str, role: Optional[str] = None) -> list[ExternalBinding]:
        return [
            e
            for e in self.externals
            if e.connector == connector and (role is None or e.role == role)
        ]


def _port_spec(table: TypeTable, inst: Instance, port: str) -> Optional[PortSpec]:
    ctype = table.component(inst.type_name)
    if ctype is None:
        return None
    return ctype.port(port)


def attach(
    arch: Architecture,
    table: TypeTable,
    instance: str,
    port: str,
    connector: str,
    role: str,
    span: Optional[Span] = None,
) -> Architecture:
    """Append one attachment, re-establishing every structural invariant."""
    inst = arch.instances.get(instance)
    if inst is None:
        raise fail("UnknownInstance", f"no instance named '{instance}'", span)
    pspec = _port_spec(table, inst, port)
    if pspec is None:
        raise fail("UnknownPort", f"instance '{instance}' has no port '{port}'", span)
    conn = arch.connectors.get(connector)
    if conn is None:
        raise fail("UnknownConnector", f"no connector named '{connector}'", span)
    ctype = table.connector(conn.type_name)
    rspec = ctype.role(role) if ctype else None
    if rspec is None:
        raise fail("UnknownRole", f"connector '{connector}' has no role '{role}'", span)
    new = Attachment(instance, port, connector, role, span)
    if any(a == new for a in arch.attachments):
        raise fail(
            "DuplicateAttachment",
            f"{instance}.{port} is already attached to {connector}.{role}",
            span,
        )
    if pspec.multiplicity == ONE and arch.attachments_of_port(instance, port):
        raise fail(
            "PortMultiplicityExceeded",
            f"port {instance}.{port} has multiplicity one and is already attached",
            span,
        )
    return replace(arch, attachments=arch.attachments + (new,))


def detach(
    arch: Architecture,
    instance: str,
    port: str,
    connector: str,
    role: str,
) -> Architecture:
    """Inverse edit of attach: remove exactly one matching attachment."""
    target = Attachment(instance, port, connector, role)
    kept = tuple(a for a in arch.attachments if a != target)
    if len(kept) == len(arch.attachments):
        raise fail(
            "UnknownAttachment",
            f"{instance}.{port} is not attached to {connector}.{role}",
        )
    return replace(arch, attachments=kept)


def role_fill_count(arch: Architecture, connector: str, role: str) -> int:
    """Attachments plus external bindings currently filling a role."""
    return len(arch.attachments_of_connector(connector, role)) + len(
        arch.externals_of_connector(connector, role)
    )


def validate_arity(arch: Architecture, table: TypeTable) -> list[Diagnostic]:
    """One diagnostic per connector role outside its declared fill range."""
    diags: list[Diagnostic] = []
    for conn in arch.connectors.values():
        ctype = table.connector(conn.type_name)
        if ctype is None:
            continue  # resolution reports unknown connector types
        for rspec in ctype.roles:
            n = role_fill_count(arch, conn.name, rspec.name)
            if n < rspec.min_fill:
                diags.append(
                    error(
                        "RoleUnderfilled",
                        f"role {conn.name}.{rspec.name} is filled {n} time(s), needs at least {rspec.min_fill}",
                        conn.span,
                    )
                )
            elif rspec.max_fill is not None and n > rspec.max_fill:
                diags.append(
                    error(
                        "RoleOverfilled",
                        f"role {conn.name}.{rspec.name} is filled {n} time(s), allows at most {rspec.max_fill}",
                        conn.span,
                    )
                )
    return diags
