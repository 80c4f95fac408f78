"""Lowering a checked architecture to a concrete process-and-channel plan.

A plan is a flat, serializable description of what to run:

* stages: OS processes (one per instance, or per replica after fan-out)
  plus synthetic coordinators.  ``tee`` duplicates every record to each
  of its outputs, ``merge`` interleaves inputs in arrival order,
  ``split`` deals records round-robin, ``seed`` writes its initial bytes
  and then forwards its input unchanged.  Records are newline-delimited.
* channels: the byte streams between stages.  ``pipe`` is an anonymous
  kernel pipe, ``file-in``/``file-out`` are the external bindings.
* broker / rpc endpoints: socket names, relative to a runtime directory
  that is chosen only when the plan is executed.  Keeping them symbolic
  makes the serialized plan reproducible byte for byte.

Stage order in the plan is start order: consumers before producers so
that every pipe has a reader by the time its writer starts.  A cycle
bootstrapped by a ``seed`` attribute is broken at the seeded instance.
"""

from __future__ import annotations

import heapq
import json
import shlex
from collections import defaultdict
from dataclasses import dataclass, replace
from typing import Optional

from .checker import PIPE_TYPE, RPC_TYPE, ExternalIO
from .diagnostics import fail
from .model import Architecture, TypeTable
from .topology import _strongly_connected_components

EVENT_TYPE = "Event"
ACCESS_TYPE = "DataAccess"

PROCESS = "process"
TEE = "tee"
MERGE = "merge"
SPLIT = "split"
SEED = "seed"

BROKER_ENDPOINT = "broker.sock"


@dataclass(frozen=True)
class Stage:
    name: str
    kind: str
    instance: str = ""
    replica: int = 0
    argv: tuple[str, ...] = ()
    reads: tuple[str, ...] = ()
    writes: tuple[str, ...] = ()
    seed: str = ""
    stateless: bool = False
    site: str = ""

    def to_json_obj(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "instance": self.instance,
            "replica": self.replica,
            "argv": list(self.argv),
            "reads": list(self.reads),
            "writes": list(self.writes),
            "seed": self.seed,
            "stateless": self.stateless,
            "site": self.site,
        }


@dataclass(frozen=True)
class Channel:
    name: str
    kind: str  # "pipe" | "file-in" | "file-out"
    path: str = ""

    def to_json_obj(self) -> dict:
        return {"name": self.name, "kind": self.kind, "path": self.path}


@dataclass(frozen=True)
class BuildPlan:
    system: str
    stages: tuple[Stage, ...]
    channels: tuple[Channel, ...]
    broker: str = ""
    rpc: tuple[tuple[str, str], ...] = ()
    relays: tuple[tuple[str, str, str], ...] = ()  # (connector, caller site, definer site)
    final: str = ""
    input: str = ""
    output: str = ""

    def stage(self, name: str) -> Optional[Stage]:
        for stage in self.stages:
            if stage.name == name:
                return stage
        return None

    def channel(self, name: str) -> Optional[Channel]:
        for channel in self.channels:
            if channel.name == name:
                return channel
        return None

    def to_json_obj(self) -> dict:
        return {
            "system": self.system,
            "stages": [s.to_json_obj() for s in self.stages],
            "channels": [c.to_json_obj() for c in self.channels],
            "broker": self.broker,
            "rpc": {conn: endpoint for conn, endpoint in self.rpc},
            "relays": [
                {"connector": c, "caller_site": a, "definer_site": b}
                for c, a, b in self.relays
            ],
            "final": self.final,
            "input": self.input,
            "output": self.output,
        }


def serialize_plan(built: BuildPlan) -> str:
    return json.dumps(built.to_json_obj(), indent=2) + "\n"


def plan(arch: Architecture, table: TypeTable, io: ExternalIO | None = None) -> BuildPlan:
    """Lower a checked architecture. Raises ArchonError on unmet bindings."""
    io = io or ExternalIO()

    for conn in sorted(arch.connectors.values(), key=lambda c: c.name):
        if conn.type_name not in (PIPE_TYPE, RPC_TYPE, EVENT_TYPE, ACCESS_TYPE):
            raise fail(
                "UnrealizableConnector",
                f"no runtime realization for connector type '{conn.type_name}'",
            )

    channels: dict[str, Channel] = {}
    reads: dict[str, list[str]] = {name: [] for name in arch.instances}
    writes: dict[str, list[str]] = {name: [] for name in arch.instances}
    edge_triples: list[tuple[str, str, str]] = []  # (producer, consumer, channel)

    pipe_names = sorted(
        c.name for c in arch.connectors.values() if c.type_name == PIPE_TYPE
    )
    for conn_name in pipe_names:
        sources = [
            a.instance
            for a in arch.attachments
            if a.connector == conn_name and a.role == "source"
        ]
        sinks = [
            a.instance
            for a in arch.attachments
            if a.connector == conn_name and a.role == "sink"
        ]
        externals = [e for e in arch.externals if e.connector == conn_name]
        kind, path = "pipe", ""
        for ext in externals:
            if ext.direction == "input":
                bound = arch.inputs.get(ext.stream) or io.input
                if not bound:
                    raise fail(
                        "UnboundExternalInput",
                        f"external input '{ext.stream}' has no bound path",
                    )
                kind, path = "file-in", bound
            else:
                bound = arch.outputs.get(ext.stream) or io.output
                if not bound:
                    raise fail(
                        "UnboundExternalOutput",
                        f"external output '{ext.stream}' has no bound path",
                    )
                kind, path = "file-out", bound
        channels[conn_name] = Channel(conn_name, kind, path)
        for src in sources:
            writes[src].append(conn_name)
        for snk in sinks:
            reads[snk].append(conn_name)
        if sources and sinks:
            edge_triples.append((sources[0], sinks[0], conn_name))

    synthetic: list[Stage] = []

    # Seed stages sit on one in-cycle edge per seeded instance, so the rest
    # of the loop can start up against an already-primed pipe.
    adj: dict[str, list[str]] = defaultdict(list)
    for producer, consumer, _ in edge_triples:
        adj[producer].append(consumer)
    node_names = sorted(arch.instances)
    scc_of: dict[str, int] = {}
    for idx, scc in enumerate(_strongly_connected_components(node_names, adj)):
        for member in scc:
            scc_of[member] = idx
    self_loops = {p for p, c, _ in edge_triples if p == c}
    scc_sizes = defaultdict(int)
    for member, idx in scc_of.items():
        scc_sizes[idx] += 1

    for inst_name in node_names:
        inst = arch.instances[inst_name]
        seed_bytes = inst.attrs.get("seed")
        if not isinstance(seed_bytes, str):
            continue
        in_cycle = scc_sizes[scc_of[inst_name]] > 1 or inst_name in self_loops
        if not in_cycle:
            continue
        candidates = sorted(
            ch
            for producer, consumer, ch in edge_triples
            if consumer == inst_name and scc_of[producer] == scc_of[inst_name]
        )
        if not candidates:
            continue
        broken = candidates[0]
        seeded_ch = f"{broken}.seeded"
        channels[seeded_ch] = Channel(seeded_ch, "pipe", "")
        reads[inst_name][reads[inst_name].index(broken)] = seeded_ch
        synthetic.append(
            Stage(
                name=f"{inst_name}.seed",
                kind=SEED,
                reads=(broken,),
                writes=(seeded_ch,),
                seed=seed_bytes,
            )
        )

    for inst_name in node_names:
        if len(writes[inst_name]) > 1:
            out_ch = f"{inst_name}.out"
            channels[out_ch] = Channel(out_ch, "pipe", "")
            synthetic.append(
                Stage(
                    name=f"{inst_name}.tee",
                    kind=TEE,
                    reads=(out_ch,),
                    writes=tuple(writes[inst_name]),
                )
            )
            writes[inst_name] = [out_ch]
        if len(reads[inst_name]) > 1:
            in_ch = f"{inst_name}.in"
            channels[in_ch] = Channel(in_ch, "pipe", "")
            synthetic.append(
                Stage(
                    name=f"{inst_name}.merge",
                    kind=MERGE,
                    reads=tuple(reads[inst_name]),
                    writes=(in_ch,),
                )
            )
            reads[inst_name] = [in_ch]

    stages: list[Stage] = list(synthetic)
    for inst_name in node_names:
        inst = arch.instances[inst_name]
        impl = inst.attrs.get("impl")
        if not isinstance(impl, str) or not impl.strip():
            raise fail(
                "MissingImplementation",
                f"instance '{inst_name}' has no impl attribute",
            )
        stages.append(
            Stage(
                name=inst_name,
                kind=PROCESS,
                instance=inst_name,
                replica=0,
                argv=tuple(shlex.split(impl)),
                reads=tuple(reads[inst_name]),
                writes=tuple(writes[inst_name]),
                stateless="stateless" in inst.attrs,
                site=str(inst.attrs.get("site", "")),
            )
        )

    broker = ""
    if any(c.type_name == EVENT_TYPE for c in arch.connectors.values()):
        broker = BROKER_ENDPOINT
    rpc = tuple(
        (c.name, f"rpc_{c.name}.sock")
        for c in sorted(arch.connectors.values(), key=lambda c: c.name)
        if c.type_name in (RPC_TYPE, ACCESS_TYPE)
    )

    relays: list[tuple[str, str, str]] = []
    for conn in sorted(arch.connectors.values(), key=lambda c: c.name):
        if conn.type_name != RPC_TYPE:
            continue
        def_sites = {
            str(arch.instances[a.instance].attrs.get("site", ""))
            for a in arch.attachments
            if a.connector == conn.name and a.role == "definer"
        }
        definer_site = min(def_sites) if def_sites else ""
        caller_sites = sorted(
            {
                str(arch.instances[a.instance].attrs.get("site", ""))
                for a in arch.attachments
                if a.connector == conn.name and a.role == "caller"
            }
        )
        for caller_site in caller_sites:
            if caller_site != definer_site:
                relays.append((conn.name, caller_site, definer_site))

    built = _finalize(
        arch.name,
        stages,
        channels,
        broker,
        rpc,
        tuple(relays),
        arch.inputs.get("input") or io.input or "",
        arch.outputs.get("output") or io.output or "",
    )

    for inst_name in node_names:
        n = arch.instances[inst_name].attrs.get("replicas")
        if isinstance(n, int) and n >= 2:
            built = expand_fanout(built, inst_name, n)
    return built


def expand_fanout(built: BuildPlan, stage_name: str, n: int) -> BuildPlan:
    """Replace one stateless stage by split -> n replicas -> merge."""
    target = built.stage(stage_name)
    if target is None or target.kind != PROCESS:
        raise fail("UnknownStage", f"no process stage named '{stage_name}'")
    if n == 1:
        return built
    if n < 1:
        raise fail("BadReplicaCount", f"replica count must be at least 1, got {n}")
    if not target.stateless:
        raise fail(
            "NotStateless",
            f"instance '{stage_name}' requests replicas without the stateless attribute",
        )
    if len(target.reads) != 1 or len(target.writes) != 1:
        raise fail(
            "FanoutUnsupported",
            f"stage '{stage_name}' must have exactly one input and one output to fan out",
        )

    channels = {c.name: c for c in built.channels}
    in_chs, out_chs = [], []
    for i in range(n):
        in_ch, out_ch = f"{stage_name}.in#{i}", f"{stage_name}.out#{i}"
        channels[in_ch] = Channel(in_ch, "pipe", "")
        channels[out_ch] = Channel(out_ch, "pipe", "")
        in_chs.append(in_ch)
        out_chs.append(out_ch)

    stages = [s for s in built.stages if s.name != stage_name]
    stages.append(
        Stage(
            name=f"{stage_name}.split",
            kind=SPLIT,
            reads=target.reads,
            writes=tuple(in_chs),
        )
    )
    for i in range(n):
        stages.append(
            replace(
                target,
                name=f"{stage_name}#{i}",
                replica=i,
                reads=(in_chs[i],),
                writes=(out_chs[i],),
            )
        )
    stages.append(
        Stage(
            name=f"{stage_name}.merge",
            kind=MERGE,
            reads=tuple(out_chs),
            writes=target.writes,
        )
    )
    return _finalize(
        built.system,
        stages,
        channels,
        built.broker,
        built.rpc,
        built.relays,
        built.input,
        built.output,
    )


def _finalize(
    system: str,
    stages: list[Stage],
    channels: dict[str, Channel],
    broker: str,
    rpc: tuple[tuple[str, str], ...],
    relays: tuple[tuple[str, str, str], ...],
    input_path: str,
    output_path: str,
) -> BuildPlan:
    order = _start_order(stages)
    by_name = {s.name: s for s in stages}
    ordered = tuple(by_name[name] for name in order)
    chans = tuple(sorted(channels.values(), key=lambda c: c.name))

    writer_of = {}
    for stage in stages:
        for ch in stage.writes:
            writer_of[ch] = stage.name
    final = ""
    for channel in chans:
        if channel.kind == "file-out" and channel.name in writer_of:
            final = writer_of[channel.name]
            break

    return BuildPlan(
        system=system,
        stages=ordered,
        channels=chans,
        broker=broker,
        rpc=rpc,
        relays=relays,
        final=final,
        input=input_path,
        output=output_path,
    )


def _start_order(stages: list[Stage]) -> list[str]:
    """Consumers before producers; ties and cycle interiors by name."""
    names = sorted(s.name for s in stages)
    writer: dict[str, Stage] = {}
    readers: dict[str, list[Stage]] = defaultdict(list)
    for stage in stages:
        for ch in stage.writes:
            writer[ch] = stage
        for ch in stage.reads:
            readers[ch].append(stage)

    adj: dict[str, list[str]] = {name: [] for name in names}
    for ch, w in writer.items():
        if w.kind == SEED:
            continue  # the seeded instance starts last; the seed primes its pipe
        for r in readers.get(ch, []):
            adj[r.name].append(w.name)

    sccs = _strongly_connected_components(names, adj)
    comp_of = {name: idx for idx, comp in enumerate(sccs) for name in comp}
    comp_adj: dict[int, set[int]] = defaultdict(set)
    indeg = {idx: 0 for idx in range(len(sccs))}
    for src, targets in adj.items():
        for dst in targets:
            a, b = comp_of[src], comp_of[dst]
            if a != b and b not in comp_adj[a]:
                comp_adj[a].add(b)
                indeg[b] += 1

    heap = [(min(sccs[idx]), idx) for idx in indeg if indeg[idx] == 0]
    heapq.heapify(heap)
    order: list[str] = []
    while heap:
        _, idx = heapq.heappop(heap)
        order.extend(sorted(sccs[idx]))
        for nxt in sorted(comp_adj[idx]):
            indeg[nxt] -= 1
            if indeg[nxt] == 0:
                heapq.heappush(heap, (min(sccs[nxt]), nxt))
    return order
