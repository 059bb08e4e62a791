"""Tabular reports: plans, locations, memory, utilization and reconfiguration time.

Every table is built as ``(schema, header, rows)`` with string cells so the
CSV and the aligned-text renderings show exactly the same data.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .bitstream import KILOBYTE, bitstream_size
from .config import ProjectConfig
from .fabric import ResourceType, format_columns
from .floorplan import (
    PartitionPlan,
    enumerate_locations,
    memory_footprint,
    percent,
    reconfiguration_time_exact,
    utilization,
)
from .simrt import truncated_percent


@dataclass
class Table:
    schema: str
    header: list[str]
    rows: list[list[str]]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([f"#schema={self.schema}"])
        writer.writerow(self.header)
        writer.writerows(self.rows)
        return buf.getvalue()

    def to_text(self) -> str:
        widths = [len(h) for h in self.header]
        for row in self.rows:
            widths = [max(w, len(c)) for w, c in zip(widths, row)]
        lines = ["  ".join(h.ljust(w) for h, w in zip(self.header, widths)).rstrip()]
        lines.append("  ".join("-" * w for w in widths))
        for row in self.rows:
            lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
        return "\n".join(lines) + "\n"

    def render(self, fmt: str) -> str:
        return self.to_csv() if fmt == "csv" else f"[{self.schema}]\n" + self.to_text()


def render_all(tables: Sequence[Table], fmt: str) -> str:
    return "\n".join(t.render(fmt) for t in tables)


def _kb(n_bytes: int) -> str:
    kb = Fraction(n_bytes, KILOBYTE)
    return str(kb.numerator) if kb.denominator == 1 else f"{float(kb):.3f}"


def _pct(value: Fraction) -> str:
    return str(percent(value))


def _exact_pct(value: Fraction) -> str:
    pct = value * 100
    return str(pct.numerator) if pct.denominator == 1 else f"{float(pct):.1f}"


# Values as published for the reference CSD floorplan, keyed by module name.
REFERENCE_LOCATIONS = {"CSD_8": 8, "CSD_16": 5, "CSD_32": 2}
REFERENCE_MEMORY = {  # module -> (without-relocation total KB, saving %)
    "CSD_8": (896, "87.5"),
    "CSD_16": (1120, "80"),
    "CSD_32": (672, "50"),
}
REFERENCE_UTILIZATION = {  # (region group, module) -> (without, with, free partitions)
    ("PRR1/2", "CSD_8"): ((33, 17, 30), (82, 50, 90), 2),
    ("PRR1/2", "CSD_16"): ((59, 17, 51), (89, 25, 77), 1),
    ("PRR1/2", "CSD_32"): ((100, 17, 84), (100, 17, 84), 0),
    ("PRR3", "CSD_8"): ((50, 25, 45), (82, 50, 90), 1),
    ("PRR3", "CSD_16"): ((89, 25, 77), (89, 25, 77), 0),
}
REFERENCE_TIMES = {"CSD_8": ("0.84", "0.28", 66), "CSD_16": ("0.84", "0.56", 33), "CSD_32": ("0.84", "0.84", 0)}

# The published CSD-8 adapted Ra_CLB (82%) equals 9/11, a total-column
# denominator; per-type utilization 9 CLB / 9 CLB is 100%.
KNOWN_INCONSISTENCIES = {("CSD_8", "with", "ra_clb"): "published 82% uses total columns (9/11); W_CLB/N_CLB = 9/9"}


def _region_group(name: str) -> str:
    return "PRR1/2" if name in ("PRR1", "PRR2") else name


def plan_table(cfg: ProjectConfig, plans: Sequence[PartitionPlan]) -> list[Table]:
    slots = Table("plan.slots.v1", ["region", "span", "columns", "slots", "slot_columns", "slot_signature"], [])
    modules = Table(
        "plan.modules.v1",
        ["region", "module", "w_clb", "w_bram", "w_dsp", "slots_needed", "free_slots", "placements",
         "ra_clb_full", "ra_bram_full", "ra_t_full", "ra_clb_adapted", "ra_bram_adapted", "ra_t_adapted", "wa_adapted"],
        [],
    )
    for plan in plans:
        region = plan.region
        slots.rows.append([
            region.name, str(region.span), str(len(region.signature)), str(plan.n_slots),
            str(plan.slot_columns), format_columns(plan.slot_signature),
        ])
        for req in plan.requirements:
            full = utilization(req, region)
            adapted = utilization(req, plan.placements[req.name][0])
            modules.rows.append([
                region.name, req.name, str(req.w_clb), str(req.w_bram), str(req.w_dsp),
                str(plan.slots_needed[req.name]), str(plan.free_slots(req.name)),
                str(len(plan.placements[req.name])),
                *[_metric(full, t) for t in (ResourceType.CLB, ResourceType.BRAM)], _pct(full.ra_total),
                *[_metric(adapted, t) for t in (ResourceType.CLB, ResourceType.BRAM)], _pct(adapted.ra_total),
                _pct(adapted.wastage),
            ])
    return [slots, modules]


def _metric(metrics, rtype) -> str:
    value = metrics.ra_per_type.get(rtype)
    return "-" if value is None else _pct(value)


def locations_table(cfg: ProjectConfig, plans: Sequence[PartitionPlan], module: str | None = None) -> Table:
    names = [module] if module else list(cfg.modules)
    header = ["module"] + [p.region.name for p in plans] + ["total", "locations"]
    table = Table("locations.v1", header, [])
    for name in names:
        placements = enumerate_locations(plans, name, cfg.geometry, cfg.interfaces.get(name))
        per_region = [sum(1 for p in placements if p.region == plan.region.name) for plan in plans]
        table.rows.append([name, *map(str, per_region), str(len(placements)), " ".join(p.label for p in placements)])
    return table


def module_size(cfg: ProjectConfig, plans, name: str) -> int:
    first = enumerate_locations(plans, name, cfg.geometry, cfg.interfaces.get(name))[0]
    return bitstream_size(cfg.size_model, first.span, cfg.geometry, name)


def memory_table(cfg: ProjectConfig, plans) -> Table:
    table = Table(
        "report.memory.v1",
        ["module", "locations", "size_kb", "without_count", "without_total_kb", "with_count",
         "with_total_kb", "saving_pct", "ref_without_total_kb", "ref_saving_pct", "flag"],
        [],
    )
    for name in cfg.modules:
        n_loc = len(enumerate_locations(plans, name, cfg.geometry, cfg.interfaces.get(name)))
        size = module_size(cfg, plans, name)
        without = memory_footprint(name, False, n_loc, size)
        with_ = memory_footprint(name, True, n_loc, size)
        ref = REFERENCE_MEMORY.get(name)
        saving = _exact_pct(without.saving)
        flag = ""
        if ref is not None and (_kb(without.total_bytes) != str(ref[0]) or saving != ref[1]):
            flag = "differs from published value"
        table.rows.append([
            name, str(n_loc), _kb(size), str(without.count), _kb(without.total_bytes), str(with_.count),
            _kb(with_.total_bytes), saving, *(map(str, ref) if ref else ("", "")), flag,
        ])
    return table


@dataclass(frozen=True)
class UtilizationCell:
    region: str
    module: str
    mode: str  # "without" or "with"
    metric: str  # ra_clb / ra_bram / ra_t
    value: Fraction
    reference: int | None

    @property
    def rounded(self) -> int:
        return percent(self.value)

    @property
    def flag(self) -> str:
        if self.reference is None or self.rounded == self.reference:
            return ""
        known = KNOWN_INCONSISTENCIES.get((self.module, self.mode, self.metric))
        if known:
            return f"inconsistent published value: {known}"
        if int(self.value * 100) == self.reference:
            return f"published {self.reference}% is the truncated value"
        return f"differs from published {self.reference}%"


def utilization_cells(cfg: ProjectConfig, plans) -> list[UtilizationCell]:
    cells = []
    for plan in plans:
        for req in plan.requirements:
            ref = REFERENCE_UTILIZATION.get((_region_group(plan.region.name), req.name))
            for mode, reserved, ref_vals in (
                ("without", plan.region, ref[0] if ref else None),
                ("with", plan.placements[req.name][0], ref[1] if ref else None),
            ):
                m = utilization(req, reserved)
                values = (m.ra_per_type.get(ResourceType.CLB), m.ra_per_type.get(ResourceType.BRAM), m.ra_total)
                for i, (metric, value) in enumerate(zip(("ra_clb", "ra_bram", "ra_t"), values)):
                    if value is None:
                        continue
                    cells.append(UtilizationCell(
                        plan.region.name, req.name, mode, metric, value,
                        ref_vals[i] if ref_vals else None,
                    ))
    return cells


def utilization_table(cfg: ProjectConfig, plans) -> Table:
    table = Table(
        "report.utilization.v1",
        ["region", "module", "mode", "metric", "exact", "pct", "ref_pct", "flag"],
        [],
    )
    for c in utilization_cells(cfg, plans):
        table.rows.append([
            c.region, c.module, c.mode, c.metric, f"{c.value.numerator}/{c.value.denominator}", str(c.rounded),
            "" if c.reference is None else str(c.reference), c.flag,
        ])
    return table


def free_partitions_table(cfg: ProjectConfig, plans) -> Table:
    table = Table("report.free_partitions.v1", ["region", "module", "free_partitions", "ref"], [])
    for plan in plans:
        for req in plan.requirements:
            ref = REFERENCE_UTILIZATION.get((_region_group(plan.region.name), req.name))
            table.rows.append([plan.region.name, req.name, str(plan.free_slots(req.name)), str(ref[2]) if ref else ""])
    return table


def time_table(cfg: ProjectConfig, plans) -> Table:
    table = Table(
        "report.reconfig_time.v1",
        ["module", "region", "region_kb", "module_kb", "without_ms", "with_ms", "gain_pct",
         "ref_without_ms", "ref_with_ms", "ref_gain_pct", "flag"],
        [],
    )
    for name in cfg.modules:
        plan = next(p for p in plans if name in p.placements)
        region_size = bitstream_size(cfg.size_model, plan.region.span, cfg.geometry, plan.region.name)
        size = module_size(cfg, plans, name)
        t_full = reconfiguration_time_exact(region_size, cfg.port.clock_hz, cfg.port.bus_width_bits)
        t_adapt = reconfiguration_time_exact(size, cfg.port.clock_hz, cfg.port.bus_width_bits)
        gain = truncated_percent(1 - t_adapt / t_full)
        ref = REFERENCE_TIMES.get(name)
        row = [name, plan.region.name, _kb(region_size), _kb(size), f"{float(t_full):.2f}", f"{float(t_adapt):.2f}", str(gain)]
        flag = ""
        if ref is not None and (row[4], row[5], gain) != ref:
            flag = "differs from published value"
        table.rows.append(row + ([ref[0], ref[1], str(ref[2])] if ref else ["", "", ""]) + [flag])
    return table


def report_bundle(cfg: ProjectConfig) -> list[Table]:
    plans = cfg.plans()
    return [
        locations_table(cfg, plans),
        memory_table(cfg, plans),
        utilization_table(cfg, plans),
        free_partitions_table(cfg, plans),
        time_table(cfg, plans),
    ]
