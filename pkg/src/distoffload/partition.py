"""Offloading decision formulas.

* Kumar-Lu energy benefit, in direct and speedup form.
* Fu's interval utility recurrence, kept verbatim, plus an exhaustive
  interval search that the rest of the package relies on.
* A break-even timeout policy for adaptive offloading.

Units: instructions in millions (MI), speeds in MIPS, data in megabits,
bandwidth in Mbps, power in watts, so every energy term comes out in joules.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

from distoffload.errors import DomainError, MissingInputError

# symbol -> field name, in the order the formulas list them
SYMBOLS = {
    "C": "instructions",
    "M": "mobile_mips",
    "S": "server_mips",
    "F": "speedup",
    "D": "data_mb",
    "B": "bandwidth_mbps",
    "P_c": "p_compute",
    "P_i": "p_idle",
    "P_tr": "p_transmit",
}


@dataclass(frozen=True)
class DecisionInputs:
    """Inputs to the energy-benefit formulas.

    Give either ``server_mips`` or ``speedup`` (or both, if consistent);
    the missing one is derived from ``server_mips = speedup * mobile_mips``.
    """

    instructions: float
    mobile_mips: float
    data_mb: float
    bandwidth_mbps: float
    p_compute: float
    p_idle: float
    p_transmit: float
    server_mips: Optional[float] = None
    speedup: Optional[float] = None

    def __post_init__(self):
        if self.server_mips is None and self.speedup is None:
            raise MissingInputError(["S", "F"])
        for sym, name in SYMBOLS.items():
            value = getattr(self, name)
            if value is not None and (not math.isfinite(value) or value < 0):
                raise DomainError(f"{sym} must be finite and >= 0, got {value!r}")
        for sym in ("M", "B"):
            if getattr(self, SYMBOLS[sym]) <= 0:
                raise DomainError(f"{sym} must be > 0")
        if self.server_mips is None:
            object.__setattr__(self, "server_mips", self.speedup * self.mobile_mips)
        elif self.speedup is None:
            object.__setattr__(self, "speedup", self.server_mips / self.mobile_mips)
        elif not math.isclose(self.server_mips, self.speedup * self.mobile_mips, rel_tol=1e-9):
            raise DomainError(
                f"S={self.server_mips} is inconsistent with F*M={self.speedup * self.mobile_mips}"
            )
        if self.server_mips <= 0 or self.speedup <= 0:
            raise DomainError("S and F must be > 0")

    @classmethod
    def from_symbols(cls, values: dict) -> "DecisionInputs":
        """Build from a mapping keyed by formula symbols (``C``, ``M``, ...)."""
        required = [s for s in SYMBOLS if s not in ("S", "F")]
        missing = [s for s in required if values.get(s) is None]
        if values.get("S") is None and values.get("F") is None:
            missing.append("S|F")
        if missing:
            raise MissingInputError(missing)
        return cls(**{SYMBOLS[s]: float(v) for s, v in values.items() if s in SYMBOLS and v is not None})

    def to_symbols(self) -> dict:
        return {s: getattr(self, name) for s, name in SYMBOLS.items()}


def energy_saved(inputs: DecisionInputs) -> float:
    """Mobile energy saved by offloading, in joules (negative means loss)."""
    c, m, s = inputs.instructions, inputs.mobile_mips, inputs.server_mips
    if m == 0 or s == 0 or inputs.bandwidth_mbps == 0:
        raise DomainError("M, S and B must be non-zero")
    return (
        inputs.p_compute * c / m
        - inputs.p_idle * c / s
        - inputs.p_transmit * inputs.data_mb / inputs.bandwidth_mbps
    )


def energy_saved_speedup(inputs: DecisionInputs) -> float:
    """Same benefit written in terms of the server speedup factor."""
    if inputs.speedup == 0:
        raise DomainError("F must be non-zero")
    local_seconds = inputs.instructions / inputs.mobile_mips
    return local_seconds * (inputs.p_compute - inputs.p_idle / inputs.speedup) - (
        inputs.p_transmit * inputs.data_mb / inputs.bandwidth_mbps
    )


@dataclass(frozen=True)
class MethodCost:
    mobile: float
    cloud: float
    upload: float
    ret: float

    def __post_init__(self):
        for name in ("mobile", "cloud", "upload", "ret"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise DomainError(f"{name} cost must be finite and >= 0, got {value!r}")


@dataclass(frozen=True)
class MethodSequence:
    """Per-method costs in call order, in seconds."""

    entries: tuple[MethodCost, ...]

    def __post_init__(self):
        if not self.entries:
            raise DomainError("method sequence must not be empty")

    @classmethod
    def of(cls, rows: Sequence[Sequence[float]]) -> "MethodSequence":
        return cls(tuple(MethodCost(*map(float, row)) for row in rows))

    @classmethod
    def from_columns(cls, mobile, cloud, upload, ret) -> "MethodSequence":
        if not len(mobile) == len(cloud) == len(upload) == len(ret):
            raise DomainError("cost columns must have equal length")
        return cls.of(list(zip(mobile, cloud, upload, ret)))

    def __len__(self) -> int:
        return len(self.entries)

    def rows(self) -> list[list[float]]:
        return [[e.mobile, e.cloud, e.upload, e.ret] for e in self.entries]


@dataclass(frozen=True)
class FuUtilities:
    values: tuple[float, ...]
    best_end: int  # 1-based k maximising U_1


def fu_utilities(seq: MethodSequence) -> FuUtilities:
    """Evaluate U_1..U_K exactly as the recurrence is written.

    U_1 maximises over end index k; each later U_i is derived from U_{i-1}.
    The derived values agree with a direct search only while i <= best_end.
    """
    e = seq.entries
    running = 0.0
    best, best_k = -math.inf, 0
    for k, item in enumerate(e, start=1):
        running += item.mobile - item.cloud
        value = running - e[0].upload - item.ret
        if value > best:
            best, best_k = value, k
    values = [best]
    for i in range(1, len(e)):
        prev = e[i - 1]
        values.append(values[-1] - (prev.mobile - prev.cloud - prev.upload) - e[i].upload)
    return FuUtilities(tuple(values), best_k)


@dataclass(frozen=True)
class OffloadInterval:
    start: int  # 1-based, inclusive
    end: int
    saving: float

    @property
    def offload(self) -> bool:
        return self.saving > 0


def interval_saving(seq: MethodSequence, start: int, end: int) -> float:
    e = seq.entries
    gain = sum(x.mobile - x.cloud for x in e[start - 1:end])
    return gain - e[start - 1].upload - e[end - 1].ret


def best_offload_interval(seq: MethodSequence) -> OffloadInterval:
    """Exhaustive search over contiguous intervals.

    Ties go to the shorter interval, then the earlier start. A non-positive
    saving is returned as is and means "do not offload".
    """
    n = len(seq)
    best = None
    for length in range(1, n + 1):
        for start in range(1, n - length + 2):
            end = start + length - 1
            saving = interval_saving(seq, start, end)
            if best is None or saving > best.saving:
                best = OffloadInterval(start, end, saving)
    return best


def best_from(seq: MethodSequence, start: int) -> float:
    """Largest saving of any interval that begins at ``start``."""
    return max(interval_saving(seq, start, end) for end in range(start, len(seq) + 1))


@dataclass(frozen=True)
class BreakEvenConfig:
    break_even_time: float
    offload_path_time: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.break_even_time) or self.break_even_time <= 0:
            raise DomainError("break_even_time must be finite and > 0")
        if not math.isfinite(self.offload_path_time) or self.offload_path_time < 0:
            raise DomainError("offload_path_time must be finite and >= 0")


class Action(str, Enum):
    CONTINUE_LOCAL = "continue-local"
    OFFLOAD = "offload-and-restart"


@dataclass(frozen=True)
class BreakEvenDecision:
    action: Action
    projected_total: Optional[float]


def break_even_decision(local_elapsed: float, config: BreakEvenConfig) -> BreakEvenDecision:
    if local_elapsed < 0:
        raise DomainError("local_elapsed must be >= 0")
    if local_elapsed < config.break_even_time:
        return BreakEvenDecision(Action.CONTINUE_LOCAL, None)
    # the remote run starts over, so the local effort up to the timer is lost
    return BreakEvenDecision(Action.OFFLOAD, config.break_even_time + config.offload_path_time)
