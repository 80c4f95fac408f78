"""Resolution, type matching, completeness, topology, and style checks."""

from __future__ import annotations

import itertools
import random

import pytest
from hypothesis import given, settings, strategies as st

from archon.checker import (
    BUILTIN_STYLES,
    ExternalIO,
    check_all,
    check_completeness,
    check_style,
    check_types,
    classify_topology,
    dataflow_edges,
    resolve,
)
from archon.model import builtin_type_table
from archon.parser import parse
from archon.topology import classify_digraph


def _resolve(src: str):
    return resolve(parse(src), builtin_type_table())


def _resolved_arch(src: str):
    result = _resolve(src)
    assert result.diagnostics == [], result.diagnostics
    return result.architecture, result.table


# --- resolve ---------------------------------------------------------------


def test_unknown_type_with_span_on_typo():
    src = "system S { component A : Fitler; }"
    result = _resolve(src)
    assert result.architecture is None
    (diag,) = result.diagnostics
    assert diag.code == "UnknownType"
    assert diag.span is not None


def test_duplicate_instance_name():
    result = _resolve("system S { component A : Filter; component A : Filter; }")
    assert [d.code for d in result.diagnostics] == ["DuplicateName"]


def test_three_stage_pipeline_resolves():
    arch, _ = _resolved_arch(
        'system S { pipeline P: input | A() | B() | C() | output; input "i"; output "o"; }'
    )
    assert len(arch.instances) == 3
    assert len(arch.connectors) == 4
    assert len(arch.attachments) == 6
    assert len(arch.externals) == 2


def test_inline_typedefs_fold_into_working_table():
    arch, table = _resolved_arch(
        """
        system S {
          componenttype Fan { port stdin : StreamIn; port stdout : StreamOut many; }
          component A : Fan;
        }
        """
    )
    assert table.component("Fan") is not None
    assert builtin_type_table().component("Fan") is None
    assert arch.instances["A"].type_name == "Fan"


def test_forward_references_allowed():
    arch, _ = _resolved_arch(
        """
        system S {
          attach A.stdout to p.source;
          component A : Filter;
          connector p : Pipe;
          component B : Filter;
          attach B.stdin to p.sink;
        }
        """
    )
    assert len(arch.attachments) == 2


def test_pipelines_share_declared_stages():
    arch, _ = _resolved_arch(
        """
        system S {
          component A : Filter;
          pipeline P: input | A() | output;
        }
        """
    )
    assert set(arch.instances) == {"A"}


# --- check_types -----------------------------------------------------------


def test_stdout_to_sink_mismatch():
    arch, table = _resolved_arch(
        """
        system S {
          component A : Filter; component B : Filter;
          connector p : Pipe;
          attach A.stdout to p.sink;
          attach B.stdin to p.source;
        }
        """
    )
    codes = [d.code for d in check_types(arch, table)]
    assert codes == ["TypeMismatch", "TypeMismatch"]


def test_correct_pipe_wiring_clean():
    arch, table = _resolved_arch(
        """
        system S {
          component A : Filter; component B : Filter;
          connector p : Pipe;
          attach A.stdout to p.source;
          attach B.stdin to p.sink;
        }
        """
    )
    assert check_types(arch, table) == []


def test_rpc_call_on_event_listener_mismatch():
    arch, table = _resolved_arch(
        """
        system S {
          component A : Process;
          connector e : Event;
          attach A.call to e.listener;
        }
        """
    )
    assert [d.code for d in check_types(arch, table)] == ["TypeMismatch"]


def test_check_types_order_invariant():
    body = [
        "attach A.stdout to p.sink;",
        "attach B.stdin to p.source;",
        "attach A.call to e.listener;",
    ]
    rng = random.Random(7)
    results = set()
    for _ in range(6):
        rng.shuffle(body)
        src = (
            "system S { component A : Process; component B : Process; "
            "connector p : Pipe; connector e : Event; " + " ".join(body) + " }"
        )
        arch, table = _resolved_arch(src)
        diags = frozenset((d.code, d.message) for d in check_types(arch, table))
        results.add(diags)
    assert len(results) == 1


# --- check_completeness ----------------------------------------------------


def test_unbound_external_input_reported():
    arch, table = _resolved_arch("system S { pipeline P: input | A() | output; }")
    codes = {d.code for d in check_completeness(arch, table)}
    assert "UnboundExternalInput" in codes
    assert "UnboundExternalOutput" in codes


def test_cli_bindings_satisfy_externals():
    arch, table = _resolved_arch("system S { pipeline P: input | A() | output; }")
    io = ExternalIO(input="in.txt", output="out.txt")
    assert check_completeness(arch, table, io) == []


def test_fully_bound_pipeline_clean():
    arch, table = _resolved_arch(
        'system S { pipeline P: input | A() | output; input "i"; output "o"; }'
    )
    assert check_completeness(arch, table) == []


def test_dangling_connector_two_underfills():
    arch, table = _resolved_arch("system S { connector p : Pipe; }")
    codes = [d.code for d in check_completeness(arch, table)]
    assert codes == ["RoleUnderfilled", "RoleUnderfilled"]


def test_desugared_pipeline_fully_clean():
    arch, table = _resolved_arch(
        'system S style pipes-and-filters { pipeline P: input | A() | B() | output; input "i"; output "o"; }'
    )
    assert check_all(arch, table) == []


# --- topology --------------------------------------------------------------


def _diamond_arch():
    return _resolved_arch(
        """
        system S {
          componenttype Fan { port stdin : StreamIn; port stdout : StreamOut many; }
          componenttype Funnel { port stdin : StreamIn many; port stdout : StreamOut; }
          component A : Fan; component B : Filter; component C : Filter; component D : Funnel;
          connector p1 : Pipe; connector p2 : Pipe; connector p3 : Pipe; connector p4 : Pipe;
          attach A.stdout to p1.source; attach B.stdin to p1.sink;
          attach A.stdout to p2.source; attach C.stdin to p2.sink;
          attach B.stdout to p3.source; attach D.stdin to p3.sink;
          attach C.stdout to p4.source; attach D.stdin to p4.sink;
        }
        """
    )


def test_chain_is_linear():
    arch, table = _resolved_arch(
        'system S { pipeline P: input | A() | B() | C() | output; input "i"; output "o"; }'
    )
    report = classify_topology(arch, table)
    assert report.classification == frozenset({"linear"})


def test_diamond_forks_and_joins():
    arch, table = _diamond_arch()
    report = classify_topology(arch, table)
    assert report.classification == frozenset({"fork", "join"})
    assert report.forks == ("A",)
    assert report.joins == ("D",)


def test_two_cycle_detected():
    arch, table = _resolved_arch(
        """
        system S {
          component A : Filter; component B : Filter;
          connector p1 : Pipe; connector p2 : Pipe;
          attach A.stdout to p1.source; attach B.stdin to p1.sink;
          attach B.stdout to p2.source; attach A.stdin to p2.sink;
        }
        """
    )
    report = classify_topology(arch, table)
    assert report.classification == frozenset({"cyclic"})
    assert report.cycles == (("A", "B"),)


def _oracle_classify(nodes, edges):
    """Brute force: path enumeration for linearity, walk search for cycles."""
    nodes = sorted(set(nodes))
    forks = sorted(
        n for n in nodes if sum(1 for s, _ in edges if s == n) > 1
    )
    joins = sorted(n for n in nodes if sum(1 for _, t in edges if t == n) > 1)
    edge_set = set(edges)

    def reachable(frm):
        seen = set()
        frontier = [frm]
        while frontier:
            cur = frontier.pop()
            for s, t in edge_set:
                if s == cur and t not in seen:
                    seen.add(t)
                    frontier.append(t)
        return seen

    cyclic = any(n in reachable(n) for n in nodes)
    linear = False
    if not cyclic and not forks and not joins:
        for perm in itertools.permutations(nodes):
            if all((perm[i], perm[i + 1]) in edge_set for i in range(len(perm) - 1)) and len(
                edges
            ) == max(len(nodes) - 1, 0):
                linear = True
                break
        if not nodes:
            linear = True
    labels = set()
    if forks:
        labels.add("fork")
    if joins:
        labels.add("join")
    if cyclic:
        labels.add("cyclic")
    if linear:
        labels.add("linear")
    return labels, tuple(forks), tuple(joins)


def test_classifier_matches_oracle_on_small_graphs():
    nodes = ["a", "b", "c", "d"]
    pairs = [(s, t) for s in nodes for t in nodes]
    rng = random.Random(13)
    for _ in range(400):
        k = rng.randrange(0, 7)
        edges = rng.sample(pairs, k)
        report = classify_digraph(nodes, edges)
        labels, forks, joins = _oracle_classify(nodes, edges)
        assert report.classification == frozenset(labels), (edges, report)
        assert report.forks == forks
        assert report.joins == joins


def test_classifier_cycles_are_closed_walks():
    nodes = list("abcde")
    pairs = [(s, t) for s in nodes for t in nodes]
    rng = random.Random(99)
    for _ in range(200):
        edges = rng.sample(pairs, rng.randrange(0, 10))
        report = classify_digraph(nodes, edges)
        edge_set = set(edges)
        for cycle in report.cycles:
            for i, node in enumerate(cycle):
                nxt = cycle[(i + 1) % len(cycle)]
                assert (node, nxt) in edge_set


# --- styles ----------------------------------------------------------------


def test_pipes_and_filters_rejects_rpc_connector():
    arch, table = _resolved_arch(
        """
        system S style pipes-and-filters {
          component A : Process; component B : Process;
          connector r : RPC;
          attach A.call to r.caller; attach B.serve to r.definer;
        }
        """
    )
    diags = check_style(arch, table)
    assert any(d.code == "StyleViolation" and "connector kind" in d.message for d in diags)


def test_pipes_and_filters_accepts_stream_only_types():
    arch, table = _diamond_arch()
    styled = type(arch)(
        name=arch.name,
        style="pipes-and-filters",
        instances=arch.instances,
        connectors=arch.connectors,
        attachments=arch.attachments,
        externals=arch.externals,
        inputs=arch.inputs,
        outputs=arch.outputs,
    )
    assert check_style(styled, table) == []


def test_layered_skip_rejected_and_relaxed():
    src = """
    system S style layered %s {
      component A : Process layer 3;
      component B : Process layer 1;
      connector r : RPC;
      attach A.call to r.caller; attach B.serve to r.definer;
    }
    """
    arch, table = _resolved_arch(src % "")
    diags = check_style(arch, table)
    assert any("layer skip" in d.message for d in diags)
    arch, table = _resolved_arch(src % "allow-skip")
    assert check_style(arch, table) == []


def test_layered_requires_layer_attribute():
    arch, table = _resolved_arch(
        "system S style layered { component A : Process; }"
    )
    diags = check_style(arch, table)
    assert any("missing required attribute 'layer'" in d.message for d in diags)


def test_event_style_rejects_pipe():
    arch, table = _resolved_arch(
        """
        system S style event-based {
          component A : Filter; component B : Filter;
          connector p : Pipe;
          attach A.stdout to p.source; attach B.stdin to p.sink;
        }
        """
    )
    assert any(d.code == "StyleViolation" for d in check_style(arch, table))


def test_unknown_style_reported():
    arch, table = _resolved_arch("system S style baroque { }")
    assert [d.code for d in check_style(arch, table)] == ["UnknownStyle"]


def test_seeded_cycle_conforms_unseeded_does_not():
    src = """
    system S style pipes-and-filters {
      component A : Filter %s;
      component B : Filter;
      connector p1 : Pipe; connector p2 : Pipe;
      attach A.stdout to p1.source; attach B.stdin to p1.sink;
      attach B.stdout to p2.source; attach A.stdin to p2.sink;
    }
    """
    arch, table = _resolved_arch(src % 'seed "0\\n"')
    assert check_style(arch, table) == []
    arch, table = _resolved_arch(src % "")
    assert any("cycle without a seeded instance" in d.message for d in check_style(arch, table))


@settings(max_examples=60, deadline=None)
@given(st.permutations(["A", "B", "C", "D"]))
def test_style_conformance_alpha_invariant(new_names):
    src_template = """
    system S style pipes-and-filters {{
      component {0} : Filter; component {1} : Filter;
      connector p1 : Pipe;
      attach {0}.stdout to p1.source; attach {1}.stdin to p1.sink;
      component {2} : Process; component {3} : Process;
    }}
    """
    base_src = src_template.format("A", "B", "C", "D")
    renamed_src = src_template.format(*new_names)
    base_arch, base_table = _resolved_arch(base_src)
    renamed_arch, renamed_table = _resolved_arch(renamed_src)
    base_codes = sorted(d.code for d in check_style(base_arch, base_table))
    renamed_codes = sorted(d.code for d in check_style(renamed_arch, renamed_table))
    assert base_codes == renamed_codes
