"""Region partitioning, placement enumeration and the utilization/time metrics.

Resource amounts are counted in columns. Utilization of a module on a
reserved area is the ratio of the columns it needs to the columns reserved,
per resource type and in total; wastage is the complement of the total.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .errors import DprError
from .fabric import DeviceGeometry, RegionSpan, ResourceType, column_counts, column_signature
from .relocate import TARGET_OVERLAP, InterfaceMap, check_compatibility


class InfeasibleRequirement(DprError):
    pass


class NonTilable(DprError):
    pass


class DivisionByZeroReservation(DprError):
    pass


class UnknownModule(DprError):
    pass


class InvalidBusWidth(DprError):
    pass


PLANNED_TYPES = (ResourceType.CLB, ResourceType.BRAM, ResourceType.DSP)


@dataclass(frozen=True)
class ModuleRequirement:
    name: str
    w_clb: int = 0
    w_bram: int = 0
    w_dsp: int = 0

    def __post_init__(self):
        if min(self.w_clb, self.w_bram, self.w_dsp) < 0:
            raise ValueError(f"module {self.name}: negative column requirement")
        if self.total == 0:
            raise ValueError(f"module {self.name}: requires no columns")

    @property
    def counts(self) -> dict[ResourceType, int]:
        return {ResourceType.CLB: self.w_clb, ResourceType.BRAM: self.w_bram, ResourceType.DSP: self.w_dsp}

    @property
    def total(self) -> int:
        return self.w_clb + self.w_bram + self.w_dsp

    def fits(self, counts: Mapping[ResourceType, int], times: int = 1) -> bool:
        return all(times * counts.get(t, 0) >= w for t, w in self.counts.items())


@dataclass(frozen=True)
class PRRegion:
    name: str
    span: RegionSpan
    signature: tuple[ResourceType, ...]

    @classmethod
    def from_geometry(cls, name: str, geom: DeviceGeometry, span: RegionSpan) -> "PRRegion":
        return cls(name, span, column_signature(geom, span))

    @property
    def counts(self) -> dict[ResourceType, int]:
        return column_counts(self.signature)


@dataclass(frozen=True)
class Placement:
    region: str
    module: str
    first_slot: int
    n_slots: int
    span: RegionSpan
    signature: tuple[ResourceType, ...]

    @property
    def slots(self) -> tuple[int, ...]:
        return tuple(range(self.first_slot, self.first_slot + self.n_slots))

    @property
    def label(self) -> str:
        if self.n_slots == 1:
            return f"{self.region}/{self.first_slot}"
        return f"{self.region}/{self.first_slot}-{self.first_slot + self.n_slots - 1}"


@dataclass(frozen=True)
class PartitionPlan:
    region: PRRegion
    slot_columns: int
    base_slots: tuple[RegionSpan, ...]
    requirements: tuple[ModuleRequirement, ...]
    slots_needed: Mapping[str, int]
    placements: Mapping[str, tuple[Placement, ...]]

    @property
    def n_slots(self) -> int:
        return len(self.base_slots)

    @property
    def slot_signature(self) -> tuple[ResourceType, ...]:
        return self.region.signature[:self.slot_columns]

    def requirement(self, name: str) -> ModuleRequirement:
        for req in self.requirements:
            if req.name == name:
                return req
        raise UnknownModule(f"module {name!r} is not assigned to region {self.region.name}")

    def free_slots(self, name: str) -> int:
        return self.n_slots - self.slots_needed[name]


def _periodic(signature: Sequence[ResourceType], period: int) -> bool:
    return all(signature[i] is signature[i % period] for i in range(len(signature)))


def _ra_frames(reqs: Sequence[ModuleRequirement], slot_total: int, needed: Mapping[str, int]) -> Fraction:
    return Fraction(sum(r.total for r in reqs), sum(needed[r.name] * slot_total for r in reqs))


def partition_region(
    region: PRRegion,
    reqs: Iterable[ModuleRequirement],
    slot_columns: int | None = None,
) -> PartitionPlan:
    """Split ``region`` into equal base slots and size every module in slots.

    Candidate slot widths are the periods of the region's column signature
    that divide its width and whose single slot still holds the smallest
    module. Among those the width with the highest aggregate utilization
    (sum of required over sum of reserved columns) wins; ties go to the
    narrower slot. ``slot_columns`` forces a width instead.
    """
    reqs = tuple(reqs)
    if not reqs:
        raise ValueError(f"region {region.name}: no module requirements")
    capacity = region.counts
    for req in reqs:
        if not req.fits(capacity):
            raise InfeasibleRequirement(
                f"module {req.name} needs {_fmt_counts(req.counts)}, region {region.name} "
                f"offers {_fmt_counts(capacity)}"
            )

    width = len(region.signature)
    smallest = min(reqs, key=lambda r: (r.total, r.name))
    if slot_columns is not None:
        if slot_columns < 1 or width % slot_columns or not _periodic(region.signature, slot_columns):
            raise NonTilable(
                f"region {region.name} ({width} columns) cannot be tiled by identical {slot_columns}-column slots"
            )
        candidates = [slot_columns]
    else:
        candidates = [
            p for p in range(1, width + 1)
            if width % p == 0
            and _periodic(region.signature, p)
            and smallest.fits(column_counts(region.signature[:p]))
        ]

    best = None
    for p in candidates:
        slot_counts = column_counts(region.signature[:p])
        n_slots = width // p
        needed = {}
        for req in reqs:
            k = next((k for k in range(1, n_slots + 1) if req.fits(slot_counts, k)), None)
            if k is None:
                break
            needed[req.name] = k
        else:
            score = _ra_frames(reqs, p, needed)
            # max utilization, then more (smaller) slots
            if best is None or score > best[0]:
                best = (score, p, needed)
    if best is None:
        raise NonTilable(f"region {region.name} has no slot width that tiles it for these modules")

    _, p, needed = best
    span = region.span
    base_slots = tuple(
        RegionSpan(span.half, span.row, span.col_start + i * p, p) for i in range(width // p)
    )
    placements = {}
    for req in reqs:
        k = needed[req.name]
        placements[req.name] = tuple(
            Placement(
                region.name, req.name, j, k,
                RegionSpan(span.half, span.row, base_slots[j].col_start, k * p),
                region.signature[j * p:(j + k) * p],
            )
            for j in range(len(base_slots) - k + 1)
        )
    return PartitionPlan(region, p, base_slots, reqs, needed, placements)


def _fmt_counts(counts: Mapping[ResourceType, int]) -> str:
    return " + ".join(f"{n} {t.name}" for t, n in counts.items() if n) or "nothing"


def percent(ratio: Fraction) -> int:
    """Nearest-integer percentage, halves rounded up."""
    exact = Decimal(ratio.numerator * 100) / Decimal(ratio.denominator)
    return int(exact.quantize(Decimal(1), rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class MetricSet:
    ra_per_type: Mapping[ResourceType, Fraction]
    ra_total: Fraction
    wastage: Fraction
    a_req: int
    a_res: int

    def percents(self) -> dict[str, int]:
        out = {f"ra_{t.name.lower()}": percent(v) for t, v in self.ra_per_type.items()}
        out["ra_t"] = percent(self.ra_total)
        out["wa"] = percent(self.wastage)
        return out


def utilization(req: ModuleRequirement, reserved) -> MetricSet:
    """Per-type and total utilization of ``req`` on a reserved area.

    ``reserved`` is a column signature, a mapping of column counts, a
    :class:`PRRegion` or a :class:`Placement`.
    """
    if isinstance(reserved, (PRRegion, Placement)):
        counts = column_counts(reserved.signature)
    elif isinstance(reserved, Mapping):
        counts = dict(reserved)
    else:
        counts = column_counts(reserved)
    ra = {}
    for t, w in req.counts.items():
        n = counts.get(t, 0)
        if n == 0:
            if w:
                raise DivisionByZeroReservation(f"module {req.name} needs {t.name} columns but none are reserved")
            continue
        ra[t] = Fraction(w, n)
    a_res = sum(counts.get(t, 0) for t in PLANNED_TYPES)
    if a_res == 0:
        raise DivisionByZeroReservation("reserved area holds no CLB, BRAM or DSP columns")
    ra_total = Fraction(req.total, a_res)
    return MetricSet(ra, ra_total, 1 - ra_total, req.total, a_res)


def enumerate_locations(
    plans: Iterable[PartitionPlan],
    module: str,
    geom: DeviceGeometry | None = None,
    iface: InterfaceMap | None = None,
) -> list[Placement]:
    """All slot spans, over every plan, that can host ``module``.

    The first placement is the module's initial location. With ``geom``,
    placements a bitstream built there cannot be relocated to are dropped;
    overlapping the initial location is allowed since only one copy is live.
    """
    found = [p for plan in plans for p in plan.placements.get(module, ())]
    if not found:
        raise UnknownModule(f"module {module!r} is not placed in any region")
    if geom is None:
        return found
    origin = found[0].span
    return [
        p for p in found
        if not [v for v in check_compatibility(geom, origin, p.span, iface) if v.kind != TARGET_OVERLAP]
    ]


BUS_WIDTHS = (8, 16, 32)


def reconfiguration_time(size_bytes: int, clock_hz: float, bus_width_bits: int) -> float:
    """Milliseconds to push ``size_bytes`` through a configuration port."""
    return float(reconfiguration_time_exact(size_bytes, clock_hz, bus_width_bits))


def reconfiguration_time_exact(size_bytes: int, clock_hz, bus_width_bits: int) -> Fraction:
    if bus_width_bits not in BUS_WIDTHS:
        raise InvalidBusWidth(f"bus width {bus_width_bits} not in {BUS_WIDTHS}")
    clock = Fraction(clock_hz)
    if clock <= 0:
        raise ValueError("clock frequency must be positive")
    bytes_per_second = clock * bus_width_bits / 8
    return Fraction(size_bytes) / bytes_per_second * 1000


@dataclass(frozen=True)
class Footprint:
    module: str
    count: int
    total_bytes: int
    saving: Fraction


def memory_footprint(module: str, with_relocation: bool, location_count: int, per_location_size: int) -> Footprint:
    if location_count < 1:
        raise ValueError("a module needs at least one location")
    count = 1 if with_relocation else location_count
    return Footprint(module, count, count * per_location_size, 1 - Fraction(1, location_count))
