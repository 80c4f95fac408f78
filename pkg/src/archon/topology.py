"""Dataflow graph shape: linear chains, forks, joins, and cycles.

The graph is a multigraph: parallel edges between the same pair of nodes
are distinct streams and both count toward degree.  ``linear`` means the
whole node set lies on one directed path, and excludes every other label.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

LINEAR = "linear"
FORK = "fork"
JOIN = "join"
CYCLIC = "cyclic"


@dataclass(frozen=True)
class TopologyReport:
    classification: frozenset[str]
    forks: tuple[str, ...]
    joins: tuple[str, ...]
    cycles: tuple[tuple[str, ...], ...]

    @property
    def is_linear(self) -> bool:
        return LINEAR in self.classification

    @property
    def is_cyclic(self) -> bool:
        return CYCLIC in self.classification


def _strongly_connected_components(
    nodes: Sequence[str], adj: dict[str, list[str]]
) -> list[list[str]]:
    """Tarjan's algorithm, iterative to keep deep chains off the C stack."""
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    on_stack: set[str] = set()
    stack: list[str] = []
    sccs: list[list[str]] = []
    counter = 0

    for root in nodes:
        if root in index:
            continue
        work: list[tuple[str, int]] = [(root, 0)]
        while work:
            node, child_i = work[-1]
            if child_i == 0:
                index[node] = low[node] = counter
                counter += 1
                stack.append(node)
                on_stack.add(node)
            advanced = False
            children = adj.get(node, [])
            while child_i < len(children):
                child = children[child_i]
                child_i += 1
                if child not in index:
                    work[-1] = (node, child_i)
                    work.append((child, 0))
                    advanced = True
                    break
                if child in on_stack:
                    low[node] = min(low[node], index[child])
            if advanced:
                continue
            work.pop()
            if low[node] == index[node]:
                scc = []
                while True:
                    member = stack.pop()
                    on_stack.discard(member)
                    scc.append(member)
                    if member == node:
                        break
                sccs.append(scc)
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
    return sccs


def _representative_cycle(scc: set[str], adj: dict[str, list[str]]) -> tuple[str, ...]:
    """One closed walk inside a strongly connected set, smallest start node.

    BFS from the start node's first in-component successor back to the
    start; strong connectivity guarantees the search succeeds.
    """
    start = min(scc)
    for first in adj.get(start, []):
        if first == start:
            return (start,)
        if first not in scc:
            continue
        parent = {first: start}
        queue = deque([first])
        while queue:
            node = queue.popleft()
            for child in adj.get(node, []):
                if child == start:
                    path = [node]
                    while path[-1] != start:
                        path.append(parent[path[-1]])
                    return tuple(reversed(path))
                if child in scc and child not in parent:
                    parent[child] = node
                    queue.append(child)
    raise AssertionError(f"no closed walk found in component {sorted(scc)}")


def classify_digraph(
    nodes: Iterable[str], edges: Iterable[tuple[str, str]]
) -> TopologyReport:
    """Classify a directed multigraph by its dataflow shape."""
    node_list = sorted(set(nodes))
    edge_list = list(edges)
    out_deg = {n: 0 for n in node_list}
    in_deg = {n: 0 for n in node_list}
    adj: dict[str, list[str]] = {n: [] for n in node_list}
    for src, dst in edge_list:
        out_deg[src] += 1
        in_deg[dst] += 1
        adj[src].append(dst)
    for n in adj:
        adj[n] = sorted(adj[n])

    forks = tuple(n for n in node_list if out_deg[n] > 1)
    joins = tuple(n for n in node_list if in_deg[n] > 1)

    self_loops = {src for src, dst in edge_list if src == dst}
    cycles: list[tuple[str, ...]] = []
    for scc in _strongly_connected_components(node_list, adj):
        if len(scc) > 1 or scc[0] in self_loops:
            cycles.append(_representative_cycle(set(scc), adj))
    cycles.sort()

    labels: set[str] = set()
    if forks:
        labels.add(FORK)
    if joins:
        labels.add(JOIN)
    if cycles:
        labels.add(CYCLIC)
    if not labels and _is_single_path(node_list, edge_list, in_deg, out_deg):
        labels.add(LINEAR)
    return TopologyReport(frozenset(labels), forks, joins, tuple(cycles))


def _is_single_path(
    nodes: list[str],
    edges: list[tuple[str, str]],
    in_deg: dict[str, int],
    out_deg: dict[str, int],
) -> bool:
    """True iff the acyclic graph is one directed path covering every node."""
    if not nodes:
        return True
    if len(edges) != len(nodes) - 1:
        return False
    # All degrees <= 1 (guaranteed by the caller's fork/join screen), one
    # start, one end, and the chain reaches everything.
    starts = [n for n in nodes if in_deg[n] == 0]
    if len(starts) != 1:
        return False
    succ = dict(edges)
    seen = 1
    node = starts[0]
    while node in succ:
        node = succ[node]
        seen += 1
    return seen == len(nodes)
