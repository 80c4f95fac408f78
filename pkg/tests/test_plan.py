import json

import pytest

from archon.checker import ExternalIO, resolve
from archon.diagnostics import ArchonError
from archon.model import builtin_type_table
from archon.parser import parse
from archon.plan import expand_fanout, plan, serialize_plan


def _arch(src: str):
    result = resolve(parse(src), builtin_type_table())
    assert result.architecture is not None, result.diagnostics
    return result.architecture, result.table


def _plan(src: str, io: ExternalIO | None = None):
    arch, table = _arch(src)
    return plan(arch, table, io)


PIPELINE = """
system S {
  component A : Filter impl "./a";
  component B : Filter impl "./b";
  component C : Filter impl "./c";
  pipeline P: input | A() | B() | C() | output;
  input "in.txt"; output "out.txt";
}
"""

DIAMOND = """
system S {
  componenttype Fan { port stdin : StreamIn; port stdout : StreamOut many; }
  componenttype Funnel { port stdin : StreamIn many; port stdout : StreamOut; }
  component A : Fan impl "./a"; component B : Filter impl "./b";
  component C : Filter impl "./c"; component D : Funnel impl "./d";
  connector p1 : Pipe; connector p2 : Pipe; connector p3 : Pipe; connector p4 : Pipe;
  attach A.stdout to p1.source; attach B.stdin to p1.sink;
  attach A.stdout to p2.source; attach C.stdin to p2.sink;
  attach B.stdout to p3.source; attach D.stdin to p3.sink;
  attach C.stdout to p4.source; attach D.stdin to p4.sink;
}
"""


def test_three_stage_pipeline_counts():
    built = _plan(PIPELINE)
    processes = [s for s in built.stages if s.kind == "process"]
    assert len(processes) == 3
    assert len(built.channels) == 4
    kinds = sorted(c.kind for c in built.channels)
    assert kinds == ["file-in", "file-out", "pipe", "pipe"]


def test_pipeline_start_order_consumers_first():
    built = _plan(PIPELINE)
    order = [s.name for s in built.stages]
    assert order.index("C") < order.index("B") < order.index("A")


def test_final_stage_is_writer_of_output_file():
    built = _plan(PIPELINE)
    assert built.final == "C"


def test_impl_is_shell_split():
    built = _plan(
        """
        system S {
          component A : Filter impl "python3 -c 'pass'";
          pipeline P: input | A() | output;
          input "i"; output "o";
        }
        """
    )
    assert built.stage("A").argv == ("python3", "-c", "pass")


def test_missing_impl_rejected():
    with pytest.raises(ArchonError) as exc:
        _plan('system S { pipeline P: input | A() | output; input "i"; output "o"; }')
    assert exc.value.code == "MissingImplementation"


def test_unbound_input_rejected_unless_io_given():
    src = 'system S { component A : Filter impl "./a"; pipeline P: input | A() | output; }'
    with pytest.raises(ArchonError) as exc:
        _plan(src)
    assert exc.value.code == "UnboundExternalInput"
    built = _plan(src, ExternalIO(input="i", output="o"))
    assert built.input == "i" and built.output == "o"


def test_diamond_gets_one_tee_one_merge():
    built = _plan(DIAMOND)
    kinds = sorted(s.kind for s in built.stages)
    assert kinds.count("tee") == 1
    assert kinds.count("merge") == 1
    tee = next(s for s in built.stages if s.kind == "tee")
    assert tee.reads == ("A.out",)
    assert sorted(tee.writes) == ["p1", "p2"]
    merge = next(s for s in built.stages if s.kind == "merge")
    assert sorted(merge.reads) == ["p3", "p4"]
    assert merge.writes == ("D.in",)


def test_plan_serialization_is_stable():
    texts = {serialize_plan(_plan(DIAMOND)) for _ in range(5)}
    assert len(texts) == 1
    obj = json.loads(texts.pop())
    assert list(obj) == [
        "system",
        "stages",
        "channels",
        "broker",
        "rpc",
        "relays",
        "final",
        "input",
        "output",
    ]


def test_fanout_expansion_shape():
    src = PIPELINE.replace('component B : Filter impl "./b";',
                           'component B : Filter impl "./b" stateless;')
    built = _plan(src)
    expanded = expand_fanout(built, "B", 4)
    names = {s.name for s in expanded.stages}
    assert {"B.split", "B#0", "B#1", "B#2", "B#3", "B.merge"} <= names
    assert "B" not in names
    split = expanded.stage("B.split")
    assert split.reads == ("P_p1",)
    assert len(split.writes) == 4
    merge = expanded.stage("B.merge")
    assert merge.writes == ("P_p2",)
    for i in range(4):
        rep = expanded.stage(f"B#{i}")
        assert rep.replica == i
        assert rep.argv == ("./b",)


def test_fanout_identity_at_one():
    built = _plan(PIPELINE)
    assert expand_fanout(built, "B", 1) is built


def test_fanout_requires_stateless():
    src = PIPELINE.replace('component B : Filter impl "./b";',
                           'component B : Filter impl "./b" replicas 4;')
    with pytest.raises(ArchonError) as exc:
        _plan(src)
    assert exc.value.code == "NotStateless"


def test_replicas_attr_autoexpands():
    src = PIPELINE.replace('component B : Filter impl "./b";',
                           'component B : Filter impl "./b" stateless replicas 3;')
    built = _plan(src)
    assert built.stage("B") is None
    assert built.stage("B#2") is not None
    assert built.stage("B#2").stateless


def test_seeded_cycle_gets_seed_stage():
    built = _plan(
        """
        system S {
          component A : Filter impl "./a" seed "8\\n";
          component B : Filter impl "./b";
          connector p1 : Pipe; connector p2 : Pipe;
          attach A.stdout to p1.source; attach B.stdin to p1.sink;
          attach B.stdout to p2.source; attach A.stdin to p2.sink;
        }
        """
    )
    seed = next(s for s in built.stages if s.kind == "seed")
    assert seed.name == "A.seed"
    assert seed.seed == "8\n"
    assert seed.reads == ("p2",)
    assert seed.writes == ("p2.seeded",)
    assert built.stage("A").reads == ("p2.seeded",)
    order = [s.name for s in built.stages]
    assert order.index("A.seed") < order.index("A")


def test_event_connector_sets_broker_endpoint():
    built = _plan(
        """
        system S {
          component A : Process impl "./a"; component B : Process impl "./b";
          connector e : Event;
          attach A.emit to e.announcer; attach B.listen to e.listener;
        }
        """
    )
    assert built.broker == "broker.sock"


def test_rpc_connector_gets_endpoint_and_relay_on_site_split():
    built = _plan(
        """
        system S {
          component A : Process impl "./a" site "east";
          component B : Process impl "./b" site "west";
          connector r : RPC;
          attach A.call to r.caller; attach B.serve to r.definer;
        }
        """
    )
    assert built.rpc == (("r", "rpc_r.sock"),)
    assert built.relays == (("r", "east", "west"),)


def test_same_site_rpc_has_no_relay():
    built = _plan(
        """
        system S {
          component A : Process impl "./a"; component B : Process impl "./b";
          connector r : RPC;
          attach A.call to r.caller; attach B.serve to r.definer;
        }
        """
    )
    assert built.relays == ()


def test_custom_connector_type_not_lowerable():
    with pytest.raises(ArchonError) as exc:
        _plan(
            """
            system S {
              connectortype Weird { role a accepts StreamOut fill 1..1; }
              component A : Filter impl "./a";
              connector w : Weird;
              attach A.stdout to w.a;
            }
            """
        )
    assert exc.value.code == "UnrealizableConnector"
