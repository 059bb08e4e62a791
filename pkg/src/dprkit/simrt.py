"""Discrete-event model of runtime reconfiguration through a single port.

Requests are served in order; each one activates a module version for a
compute interval. Switching to a different version loads its bitstream
through the configuration port:

* ``BASELINE`` loads a whole-region bitstream into the first region hosting
  the module.
* ``ADAPTIVE`` loads only the module's slot span, at the lowest-indexed
  compatible location that is free.
* ``ADAPTIVE_PRELOAD`` also loads the request's predicted successor into
  free slots while the current module computes. The preload is issued only
  when it completes inside the compute interval, so it never delays a later
  request; a correct prediction activates with zero delay.

Modules that finish stay configured but idle, and are not reused (the
modelled tasks carry no state between activations); loading over them logs
an eviction. All times are exact rationals in milliseconds.
"""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from .bitstream import SizeModel, bitstream_size
from .errors import DprError
from .fabric import DeviceGeometry, RegionSpan
from .floorplan import (
    PartitionPlan,
    UnknownModule,
    enumerate_locations,
    reconfiguration_time_exact,
    utilization,
)
from .relocate import InterfaceMap


class InfeasibleRequest(DprError):
    pass


class PredictorSlotConflict(DprError):
    pass


class ScenarioError(DprError):
    pass


class Policy(enum.Enum):
    BASELINE = "baseline"
    ADAPTIVE = "adaptive"
    ADAPTIVE_PRELOAD = "preload"

    @classmethod
    def parse(cls, text: str) -> "Policy":
        try:
            return cls(text.lower())
        except ValueError:
            raise ScenarioError(f"unknown policy {text!r}") from None


@dataclass(frozen=True)
class Port:
    clock_hz: float = 100e6
    bus_width_bits: int = 32

    def load_time(self, size_bytes: int) -> Fraction:
        return reconfiguration_time_exact(size_bytes, self.clock_hz, self.bus_width_bits)


@dataclass(frozen=True)
class Request:
    time: Fraction
    module: str
    duration: Fraction
    predict: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "time", Fraction(self.time))
        object.__setattr__(self, "duration", Fraction(self.duration))
        if self.duration < 0 or self.time < 0:
            raise ScenarioError(f"request for {self.module}: negative time or duration")


@dataclass(frozen=True)
class Scenario:
    plans: tuple[PartitionPlan, ...]
    geometry: DeviceGeometry
    size_model: SizeModel = field(default_factory=SizeModel)
    port: Port = field(default_factory=Port)
    requests: tuple[Request, ...] = ()
    interfaces: Mapping[str, InterfaceMap] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "plans", tuple(self.plans))
        object.__setattr__(self, "requests", tuple(self.requests))
        for prev, cur in zip(self.requests, self.requests[1:]):
            if cur.time < prev.time:
                raise ScenarioError("request times must be non-decreasing")


@dataclass(frozen=True)
class Event:
    time: Fraction
    kind: str
    module: str
    where: str
    detail: str = ""


@dataclass(frozen=True)
class SimulationReport:
    policy: Policy
    events: tuple[Event, ...]
    delays: tuple[Fraction, ...]
    exposed: Fraction
    masked: Fraction
    compute: Fraction
    mean_ra_total: Fraction
    per_module: Mapping[str, tuple[int, Fraction]]  # module -> (switches, exposed ms)

    @property
    def port_busy(self) -> Fraction:
        return self.exposed + self.masked

    def reconfig_intervals(self) -> list[tuple[Fraction, Fraction]]:
        starts = {}
        out = []
        for ev in self.events:
            if ev.kind in ("reconfig_start", "preload_start"):
                starts[ev.kind[:-6]] = ev.time
            elif ev.kind in ("reconfig_end", "preload_end"):
                out.append((starts.pop(ev.kind[:-4]), ev.time))
        return out

    def events_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["#schema=events.v1", self.policy.value])
        writer.writerow(["time_ms", "kind", "module", "where", "detail"])
        for ev in self.events:
            writer.writerow([_ms(ev.time), ev.kind, ev.module, ev.where, ev.detail])
        return buf.getvalue()


def _ms(value: Fraction, digits: int = 6) -> str:
    return f"{float(value):.{digits}f}".rstrip("0").rstrip(".") if value else "0"


class _Sim:
    def __init__(self, scenario: Scenario, policy: Policy):
        self.sc = scenario
        self.policy = policy
        self.events: list[tuple[Fraction, int, Event]] = []
        # (half, row, col) -> [module, state, where]; state in active/preloaded/idle
        self.resident: dict[tuple[int, int, int], list] = {}
        self._locations: dict[str, list] = {}

    def log(self, time, kind, module, where, detail=""):
        self.events.append((time, len(self.events), Event(time, kind, module, where, detail)))

    def locations(self, module: str):
        if module not in self._locations:
            try:
                self._locations[module] = enumerate_locations(
                    self.sc.plans, module, self.sc.geometry, self.sc.interfaces.get(module)
                )
            except UnknownModule:
                raise InfeasibleRequest(f"module {module!r} has no location in any region") from None
        return self._locations[module]

    def region_for(self, module: str) -> PartitionPlan:
        for plan in self.sc.plans:
            if module in plan.placements:
                return plan
        raise InfeasibleRequest(f"module {module!r} has no location in any region")

    @staticmethod
    def cells(span: RegionSpan):
        return [(span.half, span.row, c) for c in range(span.col_start, span.col_stop)]

    def is_free(self, span: RegionSpan) -> bool:
        return all(self.resident.get(c, [None, "idle"])[1] == "idle" for c in self.cells(span))

    def occupy(self, time, module, span, where, state):
        evicted = {}
        for c in self.cells(span):
            old = self.resident.get(c)
            if old is not None and old[1] == "idle":
                evicted.setdefault(old[2], old[0])
            self.resident[c] = [module, state, where]
        for old_where, old_module in evicted.items():
            self.log(time, "evict", old_module, old_where)

    def set_state(self, span, state):
        for c in self.cells(span):
            self.resident[c][1] = state

    def span_cost(self, module: str, placement) -> Fraction:
        size = bitstream_size(self.sc.size_model, placement.span, self.sc.geometry, module)
        return self.sc.port.load_time(size)

    def run(self) -> SimulationReport:
        sc, policy = self.sc, self.policy
        t_free = Fraction(0)
        active = None  # (module, span, where)
        preloaded = None  # (module, placement)
        delays = []
        exposed = masked = compute = Fraction(0)
        weighted_ra = Fraction(0)
        per_module: dict[str, list] = {}

        for req in sc.requests:
            start = max(req.time, t_free)
            self.log(req.time, "request", req.module, "")
            stats = per_module.setdefault(req.module, [0, Fraction(0)])
            if policy is Policy.BASELINE:
                plan = self.region_for(req.module)
                reserved = plan.region
            else:
                self.locations(req.module)
                reserved = None

            if active is not None and active[0] == req.module:
                delay = Fraction(0)
                span, where = active[1], active[2]
                reserved_area = active[3]
                self.log(start, "activate", req.module, where, "already active")
            else:
                if active is not None:
                    self.set_state(active[1], "idle")
                    self.log(start, "release", active[0], active[2])
                stats[0] += 1
                if preloaded is not None and preloaded[0] == req.module:
                    placement = preloaded[1]
                    span, where = placement.span, placement.label
                    reserved_area = placement
                    delay = Fraction(0)
                    self.set_state(span, "active")
                    self.log(start, "activate", req.module, where, "preloaded")
                else:
                    if preloaded is not None:
                        self.set_state(preloaded[1].span, "idle")
                    if policy is Policy.BASELINE:
                        span, where = reserved.span, reserved.name
                        size = bitstream_size(sc.size_model, span, sc.geometry, reserved.name)
                        delay = sc.port.load_time(size)
                        reserved_area = reserved
                    else:
                        placement = self.pick(req.module, exclude=None)
                        span, where = placement.span, placement.label
                        delay = self.span_cost(req.module, placement)
                        reserved_area = placement
                    self.log(start, "reconfig_start", req.module, where)
                    self.occupy(start, req.module, span, where, "active")
                    self.log(start + delay, "reconfig_end", req.module, where)
                    self.log(start + delay, "activate", req.module, where)
                preloaded = None
            active = (req.module, span, where, reserved_area)

            act = start + delay
            end = act + req.duration
            delays.append(delay)
            exposed += delay
            stats[1] += delay
            compute += req.duration
            plan_req = self._requirement(req.module)
            weighted_ra += utilization(plan_req, reserved_area).ra_total * req.duration

            if policy is Policy.ADAPTIVE_PRELOAD and req.predict and req.predict != req.module:
                target = self.pick(req.predict, exclude=span)
                cost = self.span_cost(req.predict, target)
                if cost > req.duration:
                    self.log(act, "preload_skip", req.predict, target.label, "load outlasts compute")
                else:
                    self.log(act, "preload_start", req.predict, target.label)
                    self.occupy(act, req.predict, target.span, target.label, "preloaded")
                    self.log(act + cost, "preload_end", req.predict, target.label)
                    masked += cost
                    preloaded = (req.predict, target)
            self.log(end, "compute_end", req.module, where)
            t_free = end

        events = tuple(ev for _, _, ev in sorted(self.events, key=lambda e: (e[0], e[1])))
        mean_ra = weighted_ra / compute if compute else Fraction(0)
        return SimulationReport(
            policy, events, tuple(delays), exposed, masked, compute, mean_ra,
            {m: (s[0], s[1]) for m, s in per_module.items()},
        )

    def _requirement(self, module: str):
        for plan in self.sc.plans:
            if module in plan.placements:
                return plan.requirement(module)
        raise InfeasibleRequest(f"module {module!r} has no location in any region")

    def pick(self, module: str, exclude: RegionSpan | None):
        for placement in self.locations(module):
            if exclude is not None and placement.span.overlaps(exclude):
                continue
            if self.is_free(placement.span):
                return placement
        if exclude is not None:
            raise PredictorSlotConflict(f"no free location for predicted module {module}")
        raise InfeasibleRequest(f"no free location for module {module}")


def run(scenario: Scenario, policy: Policy | str) -> SimulationReport:
    if isinstance(policy, str):
        policy = Policy.parse(policy)
    return _Sim(scenario, policy).run()


@dataclass(frozen=True)
class ComparisonRow:
    module: str
    switches: int
    baseline: Fraction
    adaptive: Fraction
    preload: Fraction

    @property
    def gain(self) -> Fraction:
        return 1 - self.adaptive / self.baseline if self.baseline else Fraction(0)

    @property
    def preload_gain(self) -> Fraction:
        return 1 - self.preload / self.baseline if self.baseline else Fraction(0)


@dataclass(frozen=True)
class PolicyComparison:
    rows: tuple[ComparisonRow, ...]
    total: ComparisonRow
    reports: Mapping[Policy, SimulationReport]


def truncated_percent(ratio: Fraction) -> int:
    """Percentage with the fractional part dropped, as gain columns are quoted."""
    return int(ratio * 100)


def compare_policies(scenario: Scenario) -> PolicyComparison:
    reports = {p: run(scenario, p) for p in Policy}
    modules = list(dict.fromkeys(r.module for r in scenario.requests))
    rows = []
    for m in modules:
        rows.append(ComparisonRow(
            m,
            reports[Policy.BASELINE].per_module[m][0],
            reports[Policy.BASELINE].per_module[m][1],
            reports[Policy.ADAPTIVE].per_module[m][1],
            reports[Policy.ADAPTIVE_PRELOAD].per_module[m][1],
        ))
    total = ComparisonRow(
        "TOTAL",
        sum(r.switches for r in rows),
        reports[Policy.BASELINE].exposed,
        reports[Policy.ADAPTIVE].exposed,
        reports[Policy.ADAPTIVE_PRELOAD].exposed,
    )
    return PolicyComparison(tuple(rows), total, reports)


def comparison_table(cmp: PolicyComparison) -> tuple[list[str], list[list[str]]]:
    header = ["module", "switches", "baseline_ms", "adaptive_ms", "preload_ms", "gain_pct", "preload_gain_pct"]
    body = []
    for r in (*cmp.rows, cmp.total):
        body.append([
            r.module, str(r.switches), f"{float(r.baseline):.2f}", f"{float(r.adaptive):.2f}",
            f"{float(r.preload):.2f}", str(truncated_percent(r.gain)), str(truncated_percent(r.preload_gain)),
        ])
    return header, body
