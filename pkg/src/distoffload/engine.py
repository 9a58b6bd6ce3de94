"""Deterministic timeline simulation of sequential vs distributed offloading.

Every chain runs as one stream: an offloaded chain uploads its data, executes
on its VM and ships the results back; a device chain just runs locally.
Distributed mode starts all chains of a stage together and waits for the
slowest one; sequential mode runs every chain back to back on one VM.

A single VM crash may be injected. The chain that was live on the crashed VM
is restarted from scratch on an instantly provisioned replacement, which
means re-uploading all of its data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

from distoffload.callgraph import Chain, ChainDecomposition
from distoffload.errors import DomainError, InsufficientFleetError, UnknownVmError

REFERENCE_MIPS = 10000.0
DEVICE = "device"
BITS_PER_BYTE = 8


class Mode(str, Enum):
    SEQUENTIAL = "sequential"
    DISTRIBUTED = "distributed"


@dataclass(frozen=True)
class VmSpec:
    """A VM profile. ``pe_count`` and ``ram_mb`` are descriptive only; a chain
    is a single instruction stream and runs at ``mips`` regardless."""

    id: str
    mips: float = 10000.0
    pe_count: int = 2
    ram_mb: int = 1024

    def __post_init__(self):
        if not self.id or self.id == DEVICE:
            raise ValueError(f"invalid VM id {self.id!r}")
        if not (self.mips > 0 and math.isfinite(self.mips)):
            raise ValueError(f"VM {self.id}: mips must be > 0")
        if self.pe_count < 1 or self.ram_mb < 1:
            raise ValueError(f"VM {self.id}: pe_count and ram_mb must be >= 1")


@dataclass(frozen=True)
class NetworkSpec:
    bandwidth_mbps: float
    latency_s: float = 0.0

    def __post_init__(self):
        if not self.bandwidth_mbps > 0:
            raise ValueError("bandwidth must be > 0")
        if not (math.isfinite(self.latency_s) and self.latency_s >= 0):
            raise ValueError("latency must be finite and >= 0")

    def transfer_time(self, nbytes: float) -> float:
        megabits = nbytes * BITS_PER_BYTE / 1e6
        return megabits / self.bandwidth_mbps + self.latency_s


INSTANT = NetworkSpec(math.inf, 0.0)


@dataclass(frozen=True)
class OffloadPlan:
    decomposition: ChainDecomposition
    assignment: dict = field(hash=False)  # Chain -> VM id or DEVICE
    mode: Mode
    fleet: tuple[VmSpec, ...]

    @property
    def vm_ids(self) -> list[str]:
        return [vm.id for vm in self.fleet]

    def per_vm_bytes(self) -> dict[str, float]:
        graph = self.decomposition.graph
        totals = dict.fromkeys(self.vm_ids, 0.0)
        for chain, vm in self.assignment.items():
            if vm != DEVICE:
                totals[vm] += sum(graph.by_id[i].upload_bytes for i in chain.node_ids)
        return totals


def build_plan(decomposition: ChainDecomposition, mode, vm_fleet: Sequence[VmSpec]) -> OffloadPlan:
    """Assign offloadable chains to VMs.

    Chains are taken in stage order and handed to VMs round-robin in id
    order, so the chains of one stage land on distinct VMs whenever the
    fleet is at least as wide as the stage.
    """
    mode = Mode(mode)
    fleet = tuple(sorted(vm_fleet, key=lambda vm: vm.id))
    if not fleet:
        raise InsufficientFleetError("the VM fleet is empty")
    if len({vm.id for vm in fleet}) != len(fleet):
        raise ValueError("VM ids in the fleet must be unique")

    if mode is Mode.DISTRIBUTED:
        for idx, stage in enumerate(decomposition.stages):
            width = sum(c.offloadable for c in stage.chains)
            if width > len(fleet):
                heads = ", ".join(c.label for c in stage.chains if c.offloadable)
                raise InsufficientFleetError(
                    f"stage {idx} ({heads}) needs {width} VMs but the fleet has {len(fleet)}"
                )

    assignment = {}
    turn = 0
    for stage in decomposition.stages:
        for chain in stage.chains:
            if not chain.offloadable:
                assignment[chain] = DEVICE
            elif mode is Mode.SEQUENTIAL:
                assignment[chain] = fleet[0].id
            else:
                assignment[chain] = fleet[turn % len(fleet)].id
                turn += 1
    return OffloadPlan(decomposition, assignment, mode, fleet)


@dataclass(frozen=True)
class CrashEvent:
    """Crash of one VM, triggered at an absolute time or at a fraction of the
    execution work assigned to that VM."""

    vm_id: str
    at_time: Optional[float] = None
    at_fraction: Optional[float] = None

    def __post_init__(self):
        if (self.at_time is None) == (self.at_fraction is None):
            raise ValueError("a crash needs exactly one of at_time / at_fraction")
        if self.at_time is not None and not (math.isfinite(self.at_time) and self.at_time >= 0):
            raise ValueError("crash time must be finite and >= 0")
        if self.at_fraction is not None and not 0.0 <= self.at_fraction <= 1.0:
            raise ValueError("crash fraction must lie in [0, 1]")

    def describe(self) -> str:
        if self.at_time is not None:
            return f"{self.vm_id}@t={self.at_time!r}"
        return f"{self.vm_id}@{self.at_fraction!r}"


@dataclass(frozen=True)
class Interval:
    """One activity on the timeline. ``kind`` is upload, resend, exec, return
    or local; ``mips`` is the compute rate drawn while an exec runs."""

    kind: str
    subject: str
    vm: str
    start: float
    end: float
    nbytes: float = 0.0
    mips: float = 0.0
    aborted: bool = False

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class TraceEvent:
    time: float
    kind: str
    subject: str
    vm: str


@dataclass(frozen=True)
class SimReport:
    mode: Mode
    makespan: float
    per_vm_bytes: dict = field(hash=False)
    total_offloaded_bytes: float
    resend_bytes: float
    resend_time: float
    event_trace: tuple[TraceEvent, ...]
    intervals: tuple[Interval, ...]
    crash: Optional[CrashEvent] = None
    crashed_chain: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "mode": self.mode.value,
            "makespan": self.makespan,
            "per_vm_bytes": dict(self.per_vm_bytes),
            "total_offloaded_bytes": self.total_offloaded_bytes,
            "resend_bytes": self.resend_bytes,
            "resend_time": self.resend_time,
            "crash": self.crash.describe() if self.crash else None,
            "crashed_chain": self.crashed_chain,
            "event_trace": [[e.time, e.kind, e.subject, e.vm] for e in self.event_trace],
        }


@dataclass
class _Run:
    chain: Chain
    vm: str
    start: float
    exec_start: float
    exec_end: float
    end: float
    intervals: list


def _chain_costs(plan: OffloadPlan, chain: Chain):
    graph = plan.decomposition.graph
    members = [graph.by_id[i] for i in chain.node_ids]
    return (
        sum(n.upload_bytes for n in members),
        sum(n.return_bytes for n in members),
        sum(n.cloud_time for n in members),
        sum(n.mobile_time for n in members),
    )


def _run_chain(plan, network, reference_mips, chain, start, crash_at=None) -> _Run:
    vm_id = plan.assignment[chain]
    up_bytes, ret_bytes, cloud, mobile = _chain_costs(plan, chain)
    label = chain.label
    if vm_id == DEVICE:
        end = start + mobile
        return _Run(chain, vm_id, start, start, end, end, [Interval("local", label, vm_id, start, end)])

    mips = next(vm.mips for vm in plan.fleet if vm.id == vm_id)
    exec_s = cloud * (reference_mips / mips)
    up_s = network.transfer_time(up_bytes)
    ret_s = network.transfer_time(ret_bytes)

    def phases(t0, first_kind):
        t1 = t0 + up_s
        t2 = t1 + exec_s
        t3 = t2 + ret_s
        return [
            Interval(first_kind, label, vm_id, t0, t1, nbytes=up_bytes),
            Interval("exec", label, vm_id, t1, t2, mips=mips),
            Interval("return", label, vm_id, t2, t3, nbytes=ret_bytes),
        ]

    first = phases(start, "upload")
    if crash_at is None:
        return _Run(chain, vm_id, start, first[1].start, first[1].end, first[2].end, first)

    # crash-first: a phase ending exactly at the crash instant is lost too
    kept = []
    for iv in first:
        if iv.end < crash_at:
            kept.append(iv)
        elif iv.start <= crash_at:
            kept.append(Interval(iv.kind, iv.subject, iv.vm, iv.start, crash_at, iv.nbytes, iv.mips, aborted=True))
            break
    retry = phases(crash_at, "resend")
    return _Run(chain, vm_id, start, retry[1].start, retry[1].end, retry[2].end, kept + retry)


def _steps(plan: OffloadPlan) -> list[tuple[Chain, ...]]:
    if plan.mode is Mode.DISTRIBUTED:
        return [stage.chains for stage in plan.decomposition.stages]
    return [(c,) for stage in plan.decomposition.stages for c in stage.chains]


def _timeline(plan, network, reference_mips, crash_target=None):
    runs = []
    clock = 0.0
    for step in _steps(plan):
        ends = [clock]
        for chain in step:
            crash_at = crash_target[1] if crash_target and crash_target[0] == chain else None
            run = _run_chain(plan, network, reference_mips, chain, clock, crash_at)
            runs.append(run)
            ends.append(run.end)
        clock = max(ends)
    return runs, clock


def _locate(crash: CrashEvent, runs: list[_Run]):
    """Map a crash trigger onto (chain or None, crash time) using the
    crash-free timeline, which is identical up to the crash instant."""
    mine = [r for r in runs if r.vm == crash.vm_id]
    if crash.at_time is not None:
        for r in mine:
            if r.start <= crash.at_time <= r.end:
                return r.chain, crash.at_time
        return None, crash.at_time
    if not mine:
        return None, 0.0
    total = sum(r.exec_end - r.exec_start for r in mine)
    target = crash.at_fraction * total
    done = 0.0
    for r in mine:
        length = r.exec_end - r.exec_start
        if target <= done + length:
            return r.chain, r.exec_start + (target - done)
        done += length
    last = mine[-1]
    return last.chain, last.exec_end


def _trace(intervals, crash_event=None) -> tuple[TraceEvent, ...]:
    raw = []
    if crash_event is not None:
        t, vm = crash_event
        raw.append((t, 0, len(raw), TraceEvent(t, "crash", vm, vm)))
        raw.append((t, 0, len(raw), TraceEvent(t, "reprovision", vm, vm)))
    for iv in intervals:
        raw.append((iv.start, 1, len(raw), TraceEvent(iv.start, f"{iv.kind}_start", iv.subject, iv.vm)))
        tail = "abort" if iv.aborted else "end"
        raw.append((iv.end, 1, len(raw), TraceEvent(iv.end, f"{iv.kind}_{tail}", iv.subject, iv.vm)))
    raw.sort(key=lambda item: item[:3])
    return tuple(item[3] for item in raw)


def simulate(
    plan: OffloadPlan,
    network: NetworkSpec,
    crash: Optional[CrashEvent] = None,
    reference_mips: float = REFERENCE_MIPS,
) -> SimReport:
    """Run the plan and report makespan, transferred bytes and resend cost.

    ``cloud_time`` of a method is its run time on a VM of ``reference_mips``;
    faster or slower VMs scale it proportionally.
    """
    if crash is not None and crash.vm_id not in plan.vm_ids:
        raise UnknownVmError(f"crash names unknown VM {crash.vm_id!r}; fleet is {plan.vm_ids}")

    runs, makespan = _timeline(plan, network, reference_mips)
    target = None
    crash_event = None
    if crash is not None:
        chain, t_crash = _locate(crash, runs)
        crash_event = (t_crash, crash.vm_id)
        if chain is not None:
            target = (chain, t_crash)
            runs, makespan = _timeline(plan, network, reference_mips, target)

    intervals = [iv for r in runs for iv in r.intervals]
    resends = [iv for iv in intervals if iv.kind == "resend"]
    per_vm = plan.per_vm_bytes()
    return SimReport(
        mode=plan.mode,
        makespan=makespan,
        per_vm_bytes=per_vm,
        total_offloaded_bytes=sum(per_vm.values()),
        resend_bytes=sum((iv.nbytes for iv in resends), 0.0),
        resend_time=sum((iv.duration for iv in resends), 0.0),
        event_trace=_trace(intervals, crash_event),
        intervals=tuple(intervals),
        crash=crash,
        crashed_chain=target[0].label if target else None,
    )


def improvement_percent(sequential: float, distributed: float) -> float:
    if not sequential > 0:
        raise DomainError("sequential time must be > 0")
    return 100.0 * (sequential - distributed) / sequential


@dataclass(frozen=True)
class ResendSummary:
    vm: Optional[str]
    nbytes: float
    percent: float


def max_resend(plan: OffloadPlan, application_bytes: Optional[float] = None) -> ResendSummary:
    """Worst single-crash resend: the largest per-VM upload volume, also as a
    percentage of the application size (all methods' upload bytes)."""
    if application_bytes is None:
        application_bytes = plan.decomposition.graph.total_upload_bytes
    per_vm = plan.per_vm_bytes()
    vm = max(sorted(per_vm), key=lambda k: per_vm[k]) if per_vm else None
    worst = per_vm[vm] if vm else 0.0
    percent = 100.0 * worst / application_bytes if application_bytes > 0 else 0.0
    return ResendSummary(vm, worst, percent)
