"""Command implementations. Each returns a ReportBundle; rendering lives in
the cli module and never recomputes anything."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

from distoffload.callgraph import CallGraph, ChainDecomposition, MethodNode, extract_chains
from distoffload.energy import CloudEnergy, Host, MobileEnergy, cloud_energy, mobile_energy
from distoffload.engine import (
    CrashEvent,
    Mode,
    SimReport,
    VmSpec,
    build_plan,
    improvement_percent,
    max_resend,
    simulate,
)
from distoffload.errors import InsufficientFleetError, MissingInputError, SplitMismatchError
from distoffload.partition import (
    SYMBOLS,
    BreakEvenConfig,
    DecisionInputs,
    MethodSequence,
    best_offload_interval,
    break_even_decision,
    energy_saved,
    energy_saved_speedup,
    fu_utilities,
)
from distoffload.scenario import Scenario

# column formats used by the table/csv emitters
SECONDS = "seconds"
PERCENT = "percent"
KWH = "kwh"
JOULES = "joules"
BYTES = "bytes"
TEXT = "text"


@dataclass
class ReportBundle:
    command: str
    scenario: str
    columns: list[tuple[str, str]]
    rows: list[list]
    simulations: dict[str, SimReport] = field(default_factory=dict)
    mobile: dict[str, MobileEnergy] = field(default_factory=dict)
    cloud: dict[str, CloudEnergy] = field(default_factory=dict)
    improvement: Optional[float] = None
    details: dict = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "scenario": self.scenario,
            "columns": [name for name, _ in self.columns],
            "rows": self.rows,
            "simulations": {k: v.to_dict() for k, v in self.simulations.items()},
            "mobile_energy": {k: v.to_dict() for k, v in self.mobile.items()},
            "cloud_energy": {k: v.to_dict() for k, v in self.cloud.items()},
            "improvement_percent": self.improvement,
            "details": self.details,
            "warnings": self.warnings,
        }


def _modes(mode: str) -> list[Mode]:
    if mode == "both":
        return [Mode.SEQUENTIAL, Mode.DISTRIBUTED]
    return [Mode(mode)]


def cmd_simulate(scenario: Scenario, mode: Optional[str] = None, crash: Optional[CrashEvent] = None) -> ReportBundle:
    mode = mode or scenario.mode
    crash = crash if crash is not None else scenario.crash
    decomposition = extract_chains(scenario.graph)
    bundle = ReportBundle(
        command="simulate",
        scenario=scenario.name,
        columns=[
            ("mode", TEXT),
            ("makespan_s", SECONDS),
            ("offloaded_bytes", BYTES),
            ("resend_bytes", BYTES),
            ("mobile_j", JOULES),
            ("cloud_kwh", KWH),
        ],
        rows=[],
        details={"stages": decomposition.describe()},
    )
    for m in _modes(mode):
        plan = build_plan(decomposition, m, scenario.vm_fleet)
        sim = simulate(plan, scenario.network, crash, scenario.reference_mips)
        mob = mobile_energy(sim, scenario.device)
        cld = cloud_energy(sim, scenario.hosts)
        bundle.simulations[m.value] = sim
        bundle.mobile[m.value] = mob
        bundle.cloud[m.value] = cld
        bundle.warnings.extend(cld.warnings)
        bundle.rows.append(
            [m.value, sim.makespan, sim.total_offloaded_bytes, sim.resend_bytes, mob.total, cld.total_kwh]
        )
    if len(bundle.simulations) == 2:
        bundle.improvement = improvement_percent(
            bundle.simulations["sequential"].makespan, bundle.simulations["distributed"].makespan
        )
    return bundle


def split_graph(application_bytes: float, splits: Sequence[float]) -> CallGraph:
    """A device-side root forking into one offloadable method per split; each
    carries ``split`` percent of the application's bytes."""
    unit = application_bytes / 100.0
    resident = 100.0 - sum(splits)
    nodes = [MethodNode("app", False, upload_bytes=max(resident, 0.0) * unit)]
    edges = []
    for i, pct in enumerate(splits, start=1):
        node_id = f"part{i:02d}"
        nodes.append(MethodNode(node_id, True, cloud_time=pct / 100.0, upload_bytes=pct * unit))
        edges.append(("app", node_id))
    return CallGraph.build(nodes, edges, "app")


def _fleet_of(scenario: Scenario, n: int) -> list[VmSpec]:
    fleet = sorted(scenario.vm_fleet, key=lambda vm: vm.id)[:n]
    taken = {vm.id for vm in fleet}
    k = 1
    while len(fleet) < n:
        name = f"vm{k}"
        if name not in taken:
            fleet.append(VmSpec(name))
            taken.add(name)
        k += 1
    return fleet


def cmd_resend_sweep(scenario: Scenario, splits: Sequence[Sequence[float]]) -> ReportBundle:
    """Worst-case single-crash resend for each way of splitting the
    offloadable share over VMs, checked against a simulated crash."""
    offloadable = scenario.offloadable_percent
    for split in splits:
        if not math.isclose(sum(split), offloadable, rel_tol=1e-9, abs_tol=1e-6):
            raise SplitMismatchError(
                f"split {tuple(split)} sums to {sum(split):g}%, scenario offloads {offloadable:g}%"
            )
    app_bytes = scenario.graph.total_upload_bytes or 100.0
    width = max(len(s) for s in splits)
    bundle = ReportBundle(
        command="resend-sweep",
        scenario=scenario.name,
        columns=[("total_offloadable_pct", PERCENT)]
        + [(f"vm{i}_pct", PERCENT) for i in range(1, width + 1)]
        + [("max_resend_pct", PERCENT), ("max_resend_bytes", BYTES), ("crash_resend_bytes", BYTES)],
        rows=[],
    )
    for split in splits:
        split = [float(x) for x in split]
        graph = split_graph(app_bytes, split)
        plan = build_plan(extract_chains(graph), Mode.DISTRIBUTED, _fleet_of(scenario, len(split)))
        worst = max_resend(plan, app_bytes)
        sim = simulate(plan, scenario.network, CrashEvent(worst.vm, at_fraction=0.5))
        padded = split + [None] * (width - len(split))
        bundle.rows.append([offloadable, *padded, worst.percent, worst.nbytes, sim.resend_bytes])
    return bundle


def cloudlet_graph(count: int, length_mi: float, reference_mips: float, groups: int, upload_bytes: float = 0.0) -> CallGraph:
    """``count`` independent cloudlets dealt round-robin into ``groups``
    chains hanging off a device-side broker."""
    nodes = [MethodNode("broker", False)]
    edges = []
    last: dict[int, str] = {}
    for i in range(count):
        node_id = f"cl{i:03d}"
        nodes.append(MethodNode(node_id, True, cloud_time=length_mi / reference_mips, upload_bytes=upload_bytes))
        g = i % groups
        edges.append((last.get(g, "broker"), node_id))
        last[g] = node_id
    return CallGraph.build(nodes, edges, "broker")


def cmd_energy_compare(scenario: Scenario, vm_counts: Sequence[int] = (1, 2)) -> ReportBundle:
    """Run the scenario's cloudlet batch on each VM count over the same hosts
    and one shared horizon (the slowest configuration's makespan)."""
    fleet = sorted(scenario.vm_fleet, key=lambda vm: vm.id)
    runs = []
    for count in vm_counts:
        if count < 1 or count > len(fleet):
            raise InsufficientFleetError(f"requested {count} VMs but the fleet has {len(fleet)}")
        graph = cloudlet_graph(
            scenario.cloudlets.count, scenario.cloudlets.length_mi, scenario.reference_mips,
            count, scenario.cloudlets.upload_bytes,
        )
        plan = build_plan(extract_chains(graph), Mode.DISTRIBUTED, fleet[:count])
        runs.append((count, simulate(plan, scenario.network, None, scenario.reference_mips)))

    horizon = max(sim.makespan for _, sim in runs)
    bundle = ReportBundle(
        command="energy-compare",
        scenario=scenario.name,
        columns=[("vm_count", TEXT), ("cloudlets", TEXT), ("makespan_s", SECONDS), ("cloud_kwh", KWH)],
        rows=[],
    )
    for count, sim in runs:
        used = set(sim.per_vm_bytes)
        hosts = [Host(h.id, h.model, tuple(v for v in h.vm_ids if v in used)) for h in scenario.hosts]
        energy = cloud_energy(sim, hosts, horizon)
        key = f"{count}vm"
        if key in bundle.cloud:
            key = f"{count}vm#{len(bundle.rows)}"
        bundle.simulations[key] = sim
        bundle.cloud[key] = energy
        bundle.warnings.extend(energy.warnings)
        bundle.rows.append([count, scenario.cloudlets.count, sim.makespan, energy.total_kwh])
    values = [row[-1] for row in bundle.rows]
    top = max(values)
    bundle.details["horizon_s"] = horizon
    bundle.details["max_relative_spread"] = (top - min(values)) / top if top > 0 else 0.0
    return bundle


def parse_sequence(text: str) -> MethodSequence:
    """``"5,1,1,1;4,1,1,1"`` -> rows of (mobile, cloud, upload, return)."""
    rows = [[float(x) for x in chunk.split(",")] for chunk in text.split(";") if chunk.strip()]
    if not rows or any(len(r) != 4 for r in rows):
        raise ValueError("sequence rows need 4 comma-separated values: mobile,cloud,upload,return")
    return MethodSequence.of(rows)


def cmd_partition(
    scenario: Optional[Scenario] = None,
    symbols: Optional[dict] = None,
    sequence: Optional[MethodSequence] = None,
    decomposition: Optional[ChainDecomposition] = None,
    break_even: Optional[BreakEvenConfig] = None,
    elapsed: Optional[float] = None,
) -> ReportBundle:
    """Offloading decision report from the energy formulas and the interval
    search. Flag values in ``symbols`` override the scenario's inputs."""
    decision = scenario.decision_inputs if scenario else None
    given = {k: v for k, v in (symbols or {}).items() if v is not None}
    if given:
        merged = decision.to_symbols() if decision else {}
        # S and F are tied through M; keep only what the caller pinned
        merged.pop("F", None)
        if "S" in given or "F" in given:
            merged.pop("S", None)
        merged.update(given)
        decision = DecisionInputs.from_symbols(merged)
    if sequence is None and scenario is not None:
        sequence = scenario.method_sequence
    if decomposition is None and scenario is not None:
        decomposition = extract_chains(scenario.graph)
    if decision is None and sequence is None and decomposition is None:
        raise MissingInputError([*SYMBOLS, "method_sequence"])

    bundle = ReportBundle(
        command="partition",
        scenario=scenario.name if scenario else "",
        columns=[("quantity", TEXT), ("value", TEXT), ("recommendation", TEXT)],
        rows=[],
    )
    if decision is not None:
        saved = energy_saved(decision)
        saved_f = energy_saved_speedup(decision)
        verdict = f"offload (saves {saved:.4g} J)" if saved > 0 else f"do not offload (costs {-saved:.4g} J)"
        bundle.rows.append(["energy_saved_j", saved, verdict])
        bundle.rows.append(["energy_saved_speedup_j", saved_f, ""])
        bundle.details["decision_inputs"] = decision.to_symbols()
        bundle.details["energy_saved_j"] = saved
        bundle.details["energy_saved_speedup_j"] = saved_f
    if sequence is not None:
        fu = fu_utilities(sequence)
        best = best_offload_interval(sequence)
        if best.offload:
            verdict = f"offload methods {best.start}..{best.end} (saves {best.saving:.4g} s)"
        else:
            verdict = "do not offload"
        for i, u in enumerate(fu.values, start=1):
            bundle.rows.append([f"U_{i}", u, f"k*={fu.best_end}" if i == 1 else ""])
        bundle.rows.append(["best_interval", f"({best.start},{best.end})", verdict])
        bundle.rows.append(["best_saving_s", best.saving, ""])
        bundle.details["fu_utilities"] = list(fu.values)
        bundle.details["fu_best_end"] = fu.best_end
        bundle.details["best_interval"] = {"start": best.start, "end": best.end, "saving_s": best.saving}
        bundle.details["offload"] = best.offload
    if break_even is not None:
        outcome = break_even_decision(elapsed or 0.0, break_even)
        bundle.rows.append(["break_even", outcome.action.value, "" if outcome.projected_total is None else f"projected {outcome.projected_total:.4g} s"])
        bundle.details["break_even"] = {"action": outcome.action.value, "projected_total_s": outcome.projected_total}
    if decomposition is not None:
        bundle.details["stages"] = decomposition.describe()
    return bundle
