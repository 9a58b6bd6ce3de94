"""Scenario files: a versioned JSON document describing one simulation setup.

Loading collects every problem it finds before raising, each tagged with the
JSON path (``graph.nodes[2].cloud_time``) or source line it refers to.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Optional

from distoffload.callgraph import CallGraph, MethodNode, validate_graph
from distoffload.energy import DevicePowerProfile, Host, HostPowerModel
from distoffload.engine import REFERENCE_MIPS, CrashEvent, NetworkSpec, VmSpec
from distoffload.errors import OffloadError, ScenarioError
from distoffload.partition import SYMBOLS, DecisionInputs, MethodSequence

SCHEMA_VERSION = 1
MODES = ("sequential", "distributed", "both")
BUNDLED = ("face.scenario.json", "montage.scenario.json")

DEFAULT_DEVICE = {"p_compute": 0.9, "p_idle": 0.3, "p_transmit": 1.3, "mips": 1000.0}


@dataclass(frozen=True)
class CloudletWorkload:
    """Uniform batch of independent cloudlets used by the energy comparison."""

    count: int = 10
    length_mi: float = 20000.0
    upload_bytes: float = 0.0


@dataclass(frozen=True)
class Scenario:
    name: str
    graph: CallGraph
    device: DevicePowerProfile
    device_mips: float
    network: NetworkSpec
    vm_fleet: tuple[VmSpec, ...]
    hosts: tuple[Host, ...]
    mode: str = "both"
    crash: Optional[CrashEvent] = None
    decision_inputs: Optional[DecisionInputs] = None
    method_sequence: Optional[MethodSequence] = None
    reference_mips: float = REFERENCE_MIPS
    cloudlets: CloudletWorkload = CloudletWorkload()
    description: str = ""

    @property
    def offloadable_percent(self) -> float:
        total = self.graph.total_upload_bytes
        if total == 0:
            return 0.0
        return 100.0 * sum(n.upload_bytes for n in self.graph.nodes if n.offloadable) / total


_MISSING = object()


class _Reader:
    def __init__(self):
        self.problems: list[str] = []

    def fail(self, path: str, msg: str) -> None:
        self.problems.append(f"{path}: {msg}")

    def obj(self, value, path) -> dict:
        if not isinstance(value, dict):
            self.fail(path, f"expected an object, got {type(value).__name__}")
            return {}
        return value

    def keys(self, data: dict, path: str, allowed) -> None:
        for key in sorted(set(data) - set(allowed)):
            self.fail(f"{path}.{key}" if path else key, "unknown field")

    def num(self, data: dict, key: str, path: str, default: Any = _MISSING, *, minimum=0.0, strict=False, allow_inf=False):
        where = f"{path}.{key}" if path else key
        if key not in data:
            if default is _MISSING:
                self.fail(where, "required field missing")
                return None
            return default
        value = data[key]
        if allow_inf and value == "instant":
            return math.inf
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.fail(where, f"expected a number, got {value!r}")
            return None
        value = float(value)
        if not math.isfinite(value) or value < minimum or (strict and value <= minimum):
            bound = ">" if strict else ">="
            self.fail(where, f"must be finite and {bound} {minimum:g}, got {value!r}")
            return None
        return value

    def text(self, data: dict, key: str, path: str, default: Any = _MISSING):
        where = f"{path}.{key}" if path else key
        if key not in data:
            if default is _MISSING:
                self.fail(where, "required field missing")
            return None if default is _MISSING else default
        value = data[key]
        if not isinstance(value, str) or not value:
            self.fail(where, f"expected a non-empty string, got {value!r}")
            return None
        return value


def _read_graph(r: _Reader, data: dict) -> Optional[CallGraph]:
    g = r.obj(data, "graph")
    r.keys(g, "graph", ("root", "nodes", "edges"))
    nodes = []
    raw_nodes = g.get("nodes")
    if not isinstance(raw_nodes, list) or not raw_nodes:
        r.fail("graph.nodes", "expected a non-empty list")
        raw_nodes = []
    for i, raw in enumerate(raw_nodes):
        path = f"graph.nodes[{i}]"
        item = r.obj(raw, path)
        r.keys(item, path, ("id", "offloadable", "mobile_time", "cloud_time", "upload_bytes", "return_bytes"))
        node_id = r.text(item, "id", path)
        flag = item.get("offloadable", _MISSING)
        if not isinstance(flag, bool):
            r.fail(f"{path}.offloadable", "expected true or false")
        nums = [r.num(item, k, path, 0.0) for k in ("mobile_time", "cloud_time", "upload_bytes", "return_bytes")]
        if node_id is not None and isinstance(flag, bool) and None not in nums:
            nodes.append(MethodNode(node_id, flag, *nums))

    edges = []
    raw_edges = g.get("edges", [])
    if not isinstance(raw_edges, list):
        r.fail("graph.edges", "expected a list of [caller, callee] pairs")
        raw_edges = []
    for i, pair in enumerate(raw_edges):
        if isinstance(pair, list) and len(pair) == 2 and all(isinstance(x, str) for x in pair):
            edges.append((pair[0], pair[1]))
        else:
            r.fail(f"graph.edges[{i}]", f"expected [caller, callee], got {pair!r}")
    root = r.text(g, "root", "graph")
    if root is None or len(nodes) != len(raw_nodes):
        return None
    graph = CallGraph.build(nodes, edges, root)
    for v in validate_graph(graph).violations:
        r.fail("graph", str(v))
    return graph


def parse_scenario(data: Any, source: str = "<scenario>") -> Scenario:
    r = _Reader()
    data = r.obj(data, source)
    if data and data.get("schema") != SCHEMA_VERSION:
        r.fail("schema", f"expected {SCHEMA_VERSION}, got {data.get('schema')!r}")
    r.keys(data, "", (
        "schema", "name", "description", "graph", "device", "network", "vm_fleet", "hosts", "mode",
        "crash", "decision_inputs", "method_sequence", "reference_mips", "cloudlets",
    ))
    name = r.text(data, "name", "")
    description = data.get("description", "")
    graph = _read_graph(r, data.get("graph")) if "graph" in data else r.fail("graph", "required field missing")

    dev = r.obj(data.get("device", DEFAULT_DEVICE), "device")
    r.keys(dev, "device", DEFAULT_DEVICE)
    powers = {k: r.num(dev, k, "device", DEFAULT_DEVICE[k]) for k in ("p_compute", "p_idle", "p_transmit")}
    device_mips = r.num(dev, "mips", "device", DEFAULT_DEVICE["mips"], strict=True)

    net = r.obj(data.get("network"), "network") if "network" in data else (r.fail("network", "required field missing") or {})
    r.keys(net, "network", ("bandwidth_mbps", "latency_s"))
    bandwidth = r.num(net, "bandwidth_mbps", "network", strict=True, allow_inf=True) if net else None
    latency = r.num(net, "latency_s", "network", 0.0)

    fleet = []
    raw_fleet = data.get("vm_fleet", [{"id": "vm1"}])
    if not isinstance(raw_fleet, list) or not raw_fleet:
        r.fail("vm_fleet", "expected a non-empty list")
        raw_fleet = []
    for i, raw in enumerate(raw_fleet):
        path = f"vm_fleet[{i}]"
        item = r.obj(raw, path)
        r.keys(item, path, ("id", "mips", "pe_count", "ram_mb"))
        vm_id = r.text(item, "id", path)
        mips = r.num(item, "mips", path, 10000.0, strict=True)
        pes = r.num(item, "pe_count", path, 2, minimum=1)
        ram = r.num(item, "ram_mb", path, 1024, minimum=1)
        if vm_id == "device":
            r.fail(f"{path}.id", "'device' is reserved")
        elif None not in (vm_id, mips, pes, ram):
            fleet.append(VmSpec(vm_id, mips, int(pes), int(ram)))
    vm_ids = [vm.id for vm in fleet]
    for dup in sorted({v for v in vm_ids if vm_ids.count(v) > 1}):
        r.fail("vm_fleet", f"duplicate VM id {dup!r}")

    hosts = []
    raw_hosts = data.get("hosts", [{"id": "host1", "vms": vm_ids}])
    if not isinstance(raw_hosts, list):
        r.fail("hosts", "expected a list")
        raw_hosts = []
    for i, raw in enumerate(raw_hosts):
        path = f"hosts[{i}]"
        item = r.obj(raw, path)
        r.keys(item, path, ("id", "p_static", "p_max", "capacity_mips", "vms"))
        host_id = r.text(item, "id", path)
        p_static = r.num(item, "p_static", path, 100.0)
        p_max = r.num(item, "p_max", path, 250.0)
        capacity = r.num(item, "capacity_mips", path, 20000.0, strict=True)
        vms = item.get("vms", [])
        if not isinstance(vms, list) or not all(isinstance(v, str) for v in vms):
            r.fail(f"{path}.vms", "expected a list of VM ids")
            vms = []
        for v in vms:
            if v not in vm_ids:
                r.fail(f"{path}.vms", f"unknown VM {v!r}")
        if None in (host_id, p_static, p_max, capacity):
            continue
        if p_static > p_max:
            r.fail(path, "p_static must not exceed p_max")
            continue
        hosts.append(Host(host_id, HostPowerModel(p_static, p_max, capacity), tuple(vms)))

    mode = data.get("mode", "both")
    if mode not in MODES:
        r.fail("mode", f"expected one of {', '.join(MODES)}, got {mode!r}")

    crash = None
    if data.get("crash") is not None:
        c = r.obj(data["crash"], "crash")
        r.keys(c, "crash", ("vm", "at_time", "at_fraction"))
        vm = r.text(c, "vm", "crash")
        if vm is not None and vm not in vm_ids:
            r.fail("crash.vm", f"unknown VM {vm!r}")
        at_time = r.num(c, "at_time", "crash", None)
        at_fraction = r.num(c, "at_fraction", "crash", None)
        if (at_time is None) == (at_fraction is None):
            r.fail("crash", "give exactly one of at_time / at_fraction")
        elif at_fraction is not None and at_fraction > 1:
            r.fail("crash.at_fraction", "must lie in [0, 1]")
        elif vm is not None:
            crash = CrashEvent(vm, at_time, at_fraction)

    decision = None
    if data.get("decision_inputs") is not None:
        di = r.obj(data["decision_inputs"], "decision_inputs")
        r.keys(di, "decision_inputs", SYMBOLS)
        try:
            decision = DecisionInputs.from_symbols(di)
        except (OffloadError, TypeError, ValueError) as exc:
            r.fail("decision_inputs", str(exc))

    sequence = None
    if data.get("method_sequence") is not None:
        rows = data["method_sequence"]
        ok = isinstance(rows, list) and rows and all(
            isinstance(row, list) and len(row) == 4
            and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in row)
            for row in rows
        )
        if not ok:
            r.fail("method_sequence", "expected a non-empty list of [mobile, cloud, upload, return] rows")
        else:
            try:
                sequence = MethodSequence.of(rows)
            except OffloadError as exc:
                r.fail("method_sequence", str(exc))

    reference = r.num(data, "reference_mips", "", REFERENCE_MIPS, strict=True)

    cl = r.obj(data.get("cloudlets", {}), "cloudlets")
    r.keys(cl, "cloudlets", ("count", "length_mi", "upload_bytes"))
    count = r.num(cl, "count", "cloudlets", 10, minimum=1)
    length = r.num(cl, "length_mi", "cloudlets", 20000.0, strict=True)
    cl_bytes = r.num(cl, "upload_bytes", "cloudlets", 0.0)
    if count is not None and count != int(count):
        r.fail("cloudlets.count", "must be an integer")

    if r.problems:
        raise ScenarioError([f"{source}: {p}" for p in r.problems])
    return Scenario(
        name=name,
        description=description,
        graph=graph,
        device=DevicePowerProfile(**powers),
        device_mips=device_mips,
        network=NetworkSpec(bandwidth, latency),
        vm_fleet=tuple(fleet),
        hosts=tuple(hosts),
        mode=mode,
        crash=crash,
        decision_inputs=decision,
        method_sequence=sequence,
        reference_mips=reference,
        cloudlets=CloudletWorkload(int(count), length, cl_bytes),
    )


def resolve_path(path) -> Path:
    """Return ``path`` if it exists, else the bundled scenario of that name."""
    path = Path(path)
    if path.exists() or path.name not in BUNDLED:
        return path
    return Path(str(resources.files("distoffload") / "scenarios" / path.name))


def load_scenario(path) -> Scenario:
    path = resolve_path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError([f"{path}: {exc.strerror or exc}"]) from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError([f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}"]) from None
    return parse_scenario(data, source=str(path))


def _num_out(value: float):
    if value == math.inf:
        return "instant"
    return int(value) if float(value).is_integer() else value


def scenario_to_dict(s: Scenario) -> dict:
    """Canonical, fully explicit form; ``parse_scenario`` reads it back to an
    equal Scenario."""
    g = s.graph
    out = {
        "schema": SCHEMA_VERSION,
        "name": s.name,
        "description": s.description,
        "graph": {
            "root": g.root,
            "nodes": [
                {
                    "id": n.id,
                    "offloadable": n.offloadable,
                    "mobile_time": n.mobile_time,
                    "cloud_time": n.cloud_time,
                    "upload_bytes": n.upload_bytes,
                    "return_bytes": n.return_bytes,
                }
                for n in g.nodes
            ],
            "edges": [list(e) for e in g.edges],
        },
        "device": {
            "p_compute": s.device.p_compute,
            "p_idle": s.device.p_idle,
            "p_transmit": s.device.p_transmit,
            "mips": s.device_mips,
        },
        "network": {"bandwidth_mbps": _num_out(s.network.bandwidth_mbps), "latency_s": s.network.latency_s},
        "vm_fleet": [
            {"id": vm.id, "mips": vm.mips, "pe_count": vm.pe_count, "ram_mb": vm.ram_mb} for vm in s.vm_fleet
        ],
        "hosts": [
            {
                "id": h.id,
                "p_static": h.model.p_static,
                "p_max": h.model.p_max,
                "capacity_mips": h.model.capacity_mips,
                "vms": list(h.vm_ids),
            }
            for h in s.hosts
        ],
        "mode": s.mode,
        "crash": None,
        "decision_inputs": None,
        "method_sequence": None,
        "reference_mips": s.reference_mips,
        "cloudlets": {
            "count": s.cloudlets.count,
            "length_mi": s.cloudlets.length_mi,
            "upload_bytes": s.cloudlets.upload_bytes,
        },
    }
    if s.crash is not None:
        key = "at_time" if s.crash.at_time is not None else "at_fraction"
        out["crash"] = {"vm": s.crash.vm_id, key: getattr(s.crash, key)}
    if s.decision_inputs is not None:
        out["decision_inputs"] = s.decision_inputs.to_symbols()
    if s.method_sequence is not None:
        out["method_sequence"] = s.method_sequence.rows()
    return out


def dump_scenario(s: Scenario) -> str:
    return json.dumps(scenario_to_dict(s), indent=2) + "\n"
