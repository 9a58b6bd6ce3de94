"""Mobile and cloud energy accounting over a simulation report."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from distoffload.engine import DEVICE, SimReport
from distoffload.errors import UnhostedVmError

log = logging.getLogger(__name__)

JOULES_PER_KWH = 3.6e6
TRANSFER_KINDS = ("upload", "resend", "return")


@dataclass(frozen=True)
class DevicePowerProfile:
    p_compute: float
    p_idle: float
    p_transmit: float

    def __post_init__(self):
        for name in ("p_compute", "p_idle", "p_transmit"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ValueError(f"{name} must be finite and >= 0")
        if self.p_idle > self.p_compute:
            log.warning("idle power %.3f W exceeds compute power %.3f W", self.p_idle, self.p_compute)


@dataclass(frozen=True)
class HostPowerModel:
    """Linear host power: ``p_static`` at zero load rising to ``p_max`` at full
    load. ``capacity_mips`` is the host compute rate that defines full load."""

    p_static: float = 100.0
    p_max: float = 250.0
    capacity_mips: float = 20000.0

    def __post_init__(self):
        if not 0 <= self.p_static <= self.p_max:
            raise ValueError("need 0 <= p_static <= p_max")
        if not self.capacity_mips > 0:
            raise ValueError("capacity_mips must be > 0")

    def power(self, utilization: float) -> float:
        return self.p_static + (self.p_max - self.p_static) * utilization


@dataclass(frozen=True)
class Host:
    id: str
    model: HostPowerModel
    vm_ids: tuple[str, ...]


@dataclass(frozen=True)
class MobileEnergy:
    """Device energy in joules. ``resend`` is the part of ``transmit`` spent
    re-uploading after a crash; it is itemised, not added twice."""

    compute: float
    idle: float
    transmit: float
    resend: float

    @property
    def total(self) -> float:
        return self.compute + self.idle + self.transmit

    def to_dict(self) -> dict:
        return {
            "compute_j": self.compute,
            "idle_j": self.idle,
            "transmit_j": self.transmit,
            "resend_j": self.resend,
            "total_j": self.total,
        }


@dataclass(frozen=True)
class CloudEnergy:
    per_host_kwh: dict = field(hash=False)
    horizon: float = 0.0
    warnings: tuple[str, ...] = ()

    @property
    def total_kwh(self) -> float:
        return sum(self.per_host_kwh.values())

    def to_dict(self) -> dict:
        return {
            "per_host_kwh": dict(self.per_host_kwh),
            "total_kwh": self.total_kwh,
            "horizon_s": self.horizon,
            "warnings": list(self.warnings),
        }


def _merge(spans: Iterable[tuple[float, float]]) -> list[tuple[float, float]]:
    merged: list[list[float]] = []
    for a, b in sorted(s for s in spans if s[1] > s[0]):
        if merged and a <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], b)
        else:
            merged.append([a, b])
    return [(a, b) for a, b in merged]


def _length_outside(spans, cover) -> float:
    """Total length of ``spans`` not covered by ``cover`` (both merged)."""
    total = 0.0
    for a, b in spans:
        t = a
        for c, d in cover:
            if d <= t or c >= b:
                continue
            if c > t:
                total += c - t
            t = max(t, d)
            if t >= b:
                break
        if t < b:
            total += b - t
    return total


def mobile_energy(sim: SimReport, profile: DevicePowerProfile) -> MobileEnergy:
    """Split device energy into compute, idle, transmit and resend.

    Idle time is time the device spends waiting on an outstanding cloud chain
    while it neither runs local work nor transmits.
    """
    local = [iv for iv in sim.intervals if iv.kind == "local"]
    transfers = [iv for iv in sim.intervals if iv.kind in TRANSFER_KINDS]

    outstanding: dict[str, list[float]] = {}
    for iv in sim.intervals:
        if iv.vm == DEVICE:
            continue
        span = outstanding.setdefault(iv.subject, [iv.start, iv.end])
        span[0] = min(span[0], iv.start)
        span[1] = max(span[1], iv.end)

    busy = _merge((iv.start, iv.end) for iv in local + transfers)
    waiting = _merge(tuple(s) for s in outstanding.values())
    idle_s = _length_outside(waiting, busy)

    return MobileEnergy(
        compute=profile.p_compute * sum(iv.duration for iv in local),
        idle=profile.p_idle * idle_s,
        transmit=profile.p_transmit * sum(iv.duration for iv in transfers),
        resend=profile.p_transmit * sim.resend_time,
    )


def _utilization_integral(execs, capacity: float) -> tuple[float, bool]:
    """Integral of min(1, demand/capacity) over time, and whether demand ever
    exceeded capacity."""
    points = sorted({t for iv in execs for t in (iv.start, iv.end)})
    total = 0.0
    overloaded = False
    for a, b in zip(points, points[1:]):
        demand = sum(iv.mips for iv in execs if iv.start <= a and iv.end >= b)
        if demand > capacity:
            overloaded = True
        total += min(1.0, demand / capacity) * (b - a)
    return total, overloaded


def cloud_energy(sim: SimReport, hosts: Sequence[Host], horizon: Optional[float] = None) -> CloudEnergy:
    """Integrate host power over ``[0, horizon]`` (default: the makespan).

    Utilization is the compute rate drawn by busy resident VMs over the host
    capacity, capped at 1; the cap is reported as a warning.
    """
    if horizon is None:
        horizon = sim.makespan
    if horizon < sim.makespan:
        raise ValueError(f"horizon {horizon} is shorter than the makespan {sim.makespan}")

    placement: dict[str, str] = {}
    for host in hosts:
        for vm in host.vm_ids:
            if vm in placement:
                raise UnhostedVmError(f"VM {vm!r} is placed on both {placement[vm]!r} and {host.id!r}")
            placement[vm] = host.id
    missing = sorted(set(sim.per_vm_bytes) - set(placement))
    if missing:
        raise UnhostedVmError(f"VMs without a host: {', '.join(missing)}")

    per_host = {}
    warnings = []
    for host in sorted(hosts, key=lambda h: h.id):
        resident = set(host.vm_ids)
        execs = [iv for iv in sim.intervals if iv.kind == "exec" and iv.vm in resident]
        busy, overloaded = _utilization_integral(execs, host.model.capacity_mips)
        if overloaded:
            warnings.append(f"host {host.id} demand exceeds capacity; utilization capped at 1")
        joules = host.model.p_static * horizon + (host.model.p_max - host.model.p_static) * busy
        per_host[host.id] = joules / JOULES_PER_KWH
    return CloudEnergy(per_host, horizon, tuple(warnings))


def kwh_display(value: float) -> str:
    return f"{value:.6g}"
