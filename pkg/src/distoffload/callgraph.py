"""Call-link graph model and its fork/join decomposition into chains.

A chain is a maximal path of methods with the same offloadability that is
not interrupted by a fork (out-degree > 1) or a merge (in-degree > 1).
Chains are grouped into stages by their depth in the chain DAG; chains that
share a depth never reach one another, so a stage with several chains can be
spread over several VMs.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Union

from distoffload.errors import InvalidGraphError, ScenarioError, UnknownNodeError


@dataclass(frozen=True)
class MethodNode:
    id: str
    offloadable: bool
    mobile_time: float = 0.0
    cloud_time: float = 0.0
    upload_bytes: float = 0.0
    return_bytes: float = 0.0

    def __post_init__(self):
        if not isinstance(self.id, str) or not self.id:
            raise ValueError("method id must be a non-empty string")
        for name in ("mobile_time", "cloud_time", "upload_bytes", "return_bytes"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"{self.id}.{name} must be finite and >= 0, got {value!r}")


@dataclass(frozen=True)
class CallGraph:
    """Immutable call DAG. Nodes are kept sorted by id and edges sorted and
    de-duplicated, so two graphs built from the same content compare equal."""

    nodes: tuple[MethodNode, ...]
    edges: tuple[tuple[str, str], ...]
    root: str

    @classmethod
    def build(cls, nodes: Iterable[MethodNode], edges: Iterable[tuple[str, str]], root: str) -> "CallGraph":
        return cls(
            nodes=tuple(sorted(nodes, key=lambda n: n.id)),
            edges=tuple(sorted({(a, b) for a, b in edges})),
            root=root,
        )

    @cached_property
    def by_id(self) -> dict[str, MethodNode]:
        return {n.id: n for n in self.nodes}

    @cached_property
    def successors(self) -> dict[str, tuple[str, ...]]:
        out = defaultdict(list)
        for a, b in self.edges:
            out[a].append(b)
        return {n.id: tuple(out.get(n.id, ())) for n in self.nodes}

    @cached_property
    def predecessors(self) -> dict[str, tuple[str, ...]]:
        inc = defaultdict(list)
        for a, b in self.edges:
            inc[b].append(a)
        return {n.id: tuple(inc.get(n.id, ())) for n in self.nodes}

    def node(self, node_id: str) -> MethodNode:
        try:
            return self.by_id[node_id]
        except KeyError:
            raise UnknownNodeError(node_id) from None

    @property
    def total_upload_bytes(self) -> float:
        return sum(n.upload_bytes for n in self.nodes)

    def subgraph(self, node_ids: Iterable[str], root: str) -> "CallGraph":
        keep = set(node_ids)
        return CallGraph.build(
            (self.by_id[i] for i in keep),
            ((a, b) for a, b in self.edges if a in keep and b in keep),
            root,
        )


@dataclass(frozen=True)
class Chain:
    node_ids: tuple[str, ...]
    offloadable: bool

    @property
    def label(self) -> str:
        return self.node_ids[0]

    def __len__(self) -> int:
        return len(self.node_ids)


@dataclass(frozen=True)
class Serial:
    chain: Chain

    @property
    def chains(self) -> tuple[Chain, ...]:
        return (self.chain,)


@dataclass(frozen=True)
class Parallel:
    members: tuple[Chain, ...]

    @property
    def chains(self) -> tuple[Chain, ...]:
        return self.members


Stage = Union[Serial, Parallel]


@dataclass(frozen=True)
class ChainDecomposition:
    graph: CallGraph = field(repr=False)
    stages: tuple[Stage, ...]

    @property
    def chains(self) -> list[Chain]:
        return [c for stage in self.stages for c in stage.chains]

    @property
    def max_width(self) -> int:
        return max((len(s.chains) for s in self.stages), default=0)

    def describe(self) -> list[str]:
        lines = []
        for stage in self.stages:
            parts = ["[" + " -> ".join(c.node_ids) + ("]" if c.offloadable else "]*") for c in stage.chains]
            kind = "serial" if isinstance(stage, Serial) else "parallel"
            lines.append(f"{kind:8s} " + " | ".join(parts))
        return lines


@dataclass(frozen=True)
class Violation:
    kind: str
    detail: str

    def __str__(self) -> str:
        return f"{self.kind}: {self.detail}"


@dataclass(frozen=True)
class ValidationResult:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def _find_cycle(ids: list[str], succ: dict[str, list[str]]) -> list[str] | None:
    white, grey, black = 0, 1, 2
    color = dict.fromkeys(ids, white)
    for start in ids:
        if color[start] != white:
            continue
        stack = [(start, iter(succ[start]))]
        path = [start]
        color[start] = grey
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                color[node] = black
                stack.pop()
                path.pop()
            elif color[nxt] == grey:
                return path[path.index(nxt):] + [nxt]
            elif color[nxt] == white:
                color[nxt] = grey
                stack.append((nxt, iter(succ[nxt])))
                path.append(nxt)
    return None


def _reachable(start: str, succ) -> set[str]:
    seen = {start}
    todo = [start]
    while todo:
        for nxt in succ[todo.pop()]:
            if nxt not in seen:
                seen.add(nxt)
                todo.append(nxt)
    return seen


def validate_graph(graph: CallGraph) -> ValidationResult:
    """Check the structural invariants; never raises."""
    found = []
    ids = [n.id for n in graph.nodes]
    known = set(ids)
    dupes = sorted({i for i in ids if ids.count(i) > 1})
    for d in dupes:
        found.append(Violation("duplicate-node", f"id {d!r} declared more than once"))
    for a, b in graph.edges:
        missing = [x for x in (a, b) if x not in known]
        if missing:
            found.append(Violation("dangling-edge", f"{a} -> {b} names unknown node {missing[0]!r}"))

    succ = {i: [] for i in known}
    indeg = dict.fromkeys(known, 0)
    for a, b in graph.edges:
        if a in known and b in known:
            succ[a].append(b)
            indeg[b] += 1
    ordered = sorted(known)

    cycle = _find_cycle(ordered, succ)
    if cycle:
        found.append(Violation("cycle", " -> ".join(cycle)))

    if graph.root not in known:
        found.append(Violation("missing-root", f"root {graph.root!r} is not a node"))
        return ValidationResult(tuple(found))

    others = [i for i in ordered if indeg[i] == 0 and i != graph.root]
    if others:
        found.append(Violation("multiple-roots", f"uncalled methods besides {graph.root!r}: {', '.join(others)}"))
    reach = _reachable(graph.root, succ)
    unreachable = [i for i in ordered if i not in reach and i not in others]
    if unreachable:
        found.append(Violation("unreachable", f"not reachable from {graph.root!r}: {', '.join(unreachable)}"))
    return ValidationResult(tuple(found))


def independent(graph: CallGraph, a: str, b: str) -> bool:
    """True iff neither method can reach the other."""
    graph.node(a)
    graph.node(b)
    if a == b:
        return False
    succ = graph.successors
    return b not in _reachable(a, succ) and a not in _reachable(b, succ)


def _continues(graph: CallGraph, u: str, v: str) -> bool:
    # v extends u's chain only across a plain, homogeneous call link
    return (
        len(graph.successors[u]) == 1
        and len(graph.predecessors[v]) == 1
        and graph.by_id[u].offloadable == graph.by_id[v].offloadable
    )


def _topological(graph: CallGraph) -> list[str]:
    indeg = {i: len(p) for i, p in graph.predecessors.items()}
    ready = sorted(i for i, d in indeg.items() if d == 0)
    order = []
    while ready:
        node = ready.pop(0)
        order.append(node)
        for nxt in graph.successors[node]:
            indeg[nxt] -= 1
            if indeg[nxt] == 0:
                ready.append(nxt)
        ready.sort()
    return order


def extract_chains(graph: CallGraph) -> ChainDecomposition:
    result = validate_graph(graph)
    if not result.ok:
        raise InvalidGraphError(result.violations)

    order = _topological(graph)
    chain_of: dict[str, int] = {}
    chains: list[Chain] = []
    for node_id in order:
        if node_id in chain_of:
            continue  # already placed by the walk from its chain head
        path = [node_id]
        while len(graph.successors[path[-1]]) == 1:
            nxt = graph.successors[path[-1]][0]
            if not _continues(graph, path[-1], nxt):
                break
            path.append(nxt)
        for member in path:
            chain_of[member] = len(chains)
        chains.append(Chain(tuple(path), graph.by_id[node_id].offloadable))

    # depth of each chain = longest path in the chain DAG
    depth = [0] * len(chains)
    for node_id in order:
        here = chain_of[node_id]
        for nxt in graph.successors[node_id]:
            there = chain_of[nxt]
            if there != here:
                depth[there] = max(depth[there], depth[here] + 1)

    levels: dict[int, list[Chain]] = defaultdict(list)
    for idx, chain in enumerate(chains):
        levels[depth[idx]].append(chain)
    stages: list[Stage] = []
    for lvl in sorted(levels):
        members = sorted(levels[lvl], key=lambda c: c.node_ids[0])
        stages.append(Serial(members[0]) if len(members) == 1 else Parallel(tuple(members)))
    return ChainDecomposition(graph, tuple(stages))


def parse_edge_list(text: str, source: str = "<graph>") -> CallGraph:
    """Parse the plain-text graph dialect.

    ``node <id> <offloadable:0|1> <mobile_s> <cloud_s> <upload_B> <return_B>``
    lines, then ``edge <from> <to>`` lines. An optional ``root <id>`` line
    names the entry method; otherwise the first declared node is the root.
    """
    nodes, edges, problems = [], [], []
    root = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        where = f"{source}: line {lineno}"
        kind = parts[0]
        if kind == "node":
            if len(parts) != 7:
                problems.append(f"{where}: node needs 6 fields, got {len(parts) - 1}")
                continue
            if parts[2] not in ("0", "1"):
                problems.append(f"{where}: offloadable flag must be 0 or 1, got {parts[2]!r}")
                continue
            try:
                nums = [float(p) for p in parts[3:]]
                nodes.append(MethodNode(parts[1], parts[2] == "1", *nums))
            except ValueError as exc:
                problems.append(f"{where}: {exc}")
        elif kind == "edge":
            if len(parts) != 3:
                problems.append(f"{where}: edge needs 2 fields, got {len(parts) - 1}")
                continue
            edges.append((parts[1], parts[2]))
        elif kind == "root":
            if len(parts) != 2:
                problems.append(f"{where}: root needs 1 field")
                continue
            root = parts[1]
        else:
            problems.append(f"{where}: unknown directive {kind!r}")
    if not nodes and not problems:
        problems.append(f"{source}: no nodes declared")
    if problems:
        raise ScenarioError(problems)
    return CallGraph.build(nodes, edges, root if root is not None else nodes[0].id)


def load_edge_list(path) -> CallGraph:
    path = Path(path)
    return parse_edge_list(path.read_text(), source=str(path))


def format_edge_list(graph: CallGraph) -> str:
    lines = [f"root {graph.root}"]
    for n in graph.nodes:
        lines.append(
            f"node {n.id} {int(n.offloadable)} {n.mobile_time!r} {n.cloud_time!r} "
            f"{n.upload_bytes!r} {n.return_bytes!r}"
        )
    lines.extend(f"edge {a} {b}" for a, b in graph.edges)
    return "\n".join(lines) + "\n"
