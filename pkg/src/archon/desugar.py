"""Expansion of the pipeline shorthand into plain instances, pipes, and
attachments.

``pipeline P: input | A() | B() | output;`` becomes Filter instances A and
B (unless already declared), pipe connectors P_p0..P_p2, a chain of
attachments stdin/stdout-wise, and two external stream bindings: the
leading pipe's source is fed by the system input, the trailing pipe's sink
drains to the system output.  The expansion is purely structural; applying
it to a system that already contains it changes nothing.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .diagnostics import Diagnostic, error
from .model import (
    EXT_INPUT,
    EXT_OUTPUT,
    STREAM_IN,
    STREAM_OUT,
    ExternalBinding,
    TypeTable,
)
from .syntax import AttachDecl, ConnectorDecl, InstanceDecl, PipelineDecl

STDIN = "stdin"
STDOUT = "stdout"


@dataclass(frozen=True)
class PipelineExpansion:
    """Declarations produced from one pipeline statement."""

    instances: tuple[InstanceDecl, ...]
    connectors: tuple[ConnectorDecl, ...]
    attachments: tuple[AttachDecl, ...]
    external_in: ExternalBinding
    external_out: ExternalBinding


def pipe_name(pipeline: str, index: int) -> str:
    return f"{pipeline}_p{index}"


def _stage_is_filter_shaped(table: TypeTable, type_name: str) -> bool:
    ctype = table.component(type_name)
    if ctype is None:
        return False
    stdin = ctype.port(STDIN)
    stdout = ctype.port(STDOUT)
    return (
        stdin is not None
        and stdin.port_type == STREAM_IN
        and stdout is not None
        and stdout.port_type == STREAM_OUT
    )


def desugar_pipeline(
    stmt: PipelineDecl,
    table: TypeTable,
    declared: Mapping[str, str] | None = None,
) -> tuple[PipelineExpansion | None, list[Diagnostic]]:
    """Expand one pipeline statement against the instances already declared.

    ``declared`` maps instance name to component type name; stages found
    there are reused, all others become fresh Filter instances.  On any
    diagnostic the expansion is withheld.
    """
    declared = declared or {}
    diags: list[Diagnostic] = []
    if not stmt.stages:
        return None, [error("EmptyPipeline", f"pipeline '{stmt.name}' has no stages", stmt.span)]

    new_instances: list[InstanceDecl] = []
    for stage in stmt.stages:
        type_name = declared.get(stage)
        if type_name is None:
            if not any(i.name == stage for i in new_instances):
                new_instances.append(InstanceDecl(stage, "Filter", (), span=stmt.span))
            continue
        if not _stage_is_filter_shaped(table, type_name):
            diags.append(
                error(
                    "StageNotAFilter",
                    f"stage '{stage}' has type '{type_name}' without stdin/stdout stream ports",
                    stmt.span,
                )
            )
    if diags:
        return None, diags

    n = len(stmt.stages)
    connectors = tuple(
        ConnectorDecl(pipe_name(stmt.name, i), "Pipe", span=stmt.span) for i in range(n + 1)
    )
    attachments: list[AttachDecl] = []
    for i, stage in enumerate(stmt.stages):
        attachments.append(
            AttachDecl(stage, STDIN, pipe_name(stmt.name, i), "sink", span=stmt.span)
        )
        attachments.append(
            AttachDecl(stage, STDOUT, pipe_name(stmt.name, i + 1), "source", span=stmt.span)
        )
    external_in = ExternalBinding("input", EXT_INPUT, pipe_name(stmt.name, 0), "source")
    external_out = ExternalBinding("output", EXT_OUTPUT, pipe_name(stmt.name, n), "sink")
    return (
        PipelineExpansion(
            tuple(new_instances), connectors, tuple(attachments), external_in, external_out
        ),
        [],
    )
