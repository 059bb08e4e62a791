"""Project configuration: one JSON file describing device, regions, modules and runs."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Mapping

from .bitstream import KILOBYTE, SizeModel
from .csd import Quantizer
from .errors import DprError
from .fabric import DeviceGeometry, GeometryError, RegionSpan, parse_half
from .floorplan import (
    ModuleRequirement,
    PartitionPlan,
    PRRegion,
    partition_region,
)
from .relocate import InterfaceMap
from .simrt import Port, Request, Scenario


class ConfigError(DprError):
    pass


def _size(entry: Mapping) -> int | None:
    if "size_bytes" in entry:
        return int(entry["size_bytes"])
    if "size_kb" in entry:
        return int(Fraction(str(entry["size_kb"])) * KILOBYTE)
    return None


@dataclass
class ProjectConfig:
    geometry: DeviceGeometry
    regions: list[PRRegion]
    assignments: dict[str, list[str]]
    modules: dict[str, ModuleRequirement]
    interfaces: dict[str, InterfaceMap] = field(default_factory=dict)
    size_model: SizeModel = field(default_factory=SizeModel)
    port: Port = field(default_factory=Port)
    slot_columns: dict[str, int] = field(default_factory=dict)
    levels: dict[str, int] = field(default_factory=dict)
    quantizer: Quantizer = field(default_factory=Quantizer)
    threshold: float | None = None
    requests: list[Request] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    source: str = "<memory>"

    @classmethod
    def load(cls, path=None) -> "ProjectConfig":
        if path is None:
            text = resources.files("dprkit").joinpath("data/reference.json").read_text()
            source = "reference"
        else:
            try:
                text = Path(path).read_text()
            except OSError as exc:
                raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
            source = str(path)
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{source}: invalid JSON: {exc}") from None
        return cls.from_dict(data, source)

    @classmethod
    def from_dict(cls, data: dict, source: str = "<memory>") -> "ProjectConfig":
        try:
            geometry = DeviceGeometry.from_dict(data["geometry"])
            modules, interfaces, levels, overrides = {}, {}, {}, {}
            for m in data.get("modules", []):
                name = m["name"]
                if name in modules:
                    raise ConfigError(f"module {name} defined twice")
                modules[name] = ModuleRequirement(name, int(m.get("clb", 0)), int(m.get("bram", 0)), int(m.get("dsp", 0)))
                interfaces[name] = InterfaceMap.from_dict(m.get("interface"))
                if "levels" in m:
                    levels[name] = int(m["levels"])
                size = _size(m)
                if size is not None:
                    overrides[name] = size

            regions, assignments, slot_columns = [], {}, {}
            for r in data.get("regions", []):
                span = RegionSpan(parse_half(r.get("half", 0)), int(r["row"]), int(r["col_start"]), int(r["col_count"]))
                regions.append(PRRegion.from_geometry(r["name"], geometry, span))
                names = list(r.get("modules", modules))
                unknown = [n for n in names if n not in modules]
                if unknown:
                    raise ConfigError(f"region {r['name']} names unknown modules: {', '.join(unknown)}")
                assignments[r["name"]] = names
                if "slot_columns" in r:
                    slot_columns[r["name"]] = int(r["slot_columns"])
                size = _size(r)
                if size is not None:
                    overrides[r["name"]] = size
            if len({r.name for r in regions}) != len(regions):
                raise ConfigError("region names must be unique")
            clash = set(modules) & {r.name for r in regions}
            if clash:
                raise ConfigError(f"names used for both a module and a region: {', '.join(sorted(clash))}")

            sm = data.get("size_model", {})
            size_model = SizeModel(
                overhead_words=sm.get("overhead_words"),
                content_words_per_bram_column=int(sm.get("content_words_per_bram_column", 0)),
                overrides=overrides,
            )
            p = data.get("port", {})
            port = Port(float(p.get("clock_hz", 100e6)), int(p.get("bus_width_bits", 32)))
            d = data.get("detect", {})
            quantizer = Quantizer(int(d.get("levels", 8)), d.get("mode", "rgb"))
            threshold = d.get("threshold")

            cfg = cls(
                geometry, regions, assignments, modules, interfaces, size_model, port,
                slot_columns, levels, quantizer, None if threshold is None else float(threshold),
                source=source,
            )
            cfg.requests = cfg.parse_requests(data.get("scenario", {}))
        except KeyError as exc:
            raise ConfigError(f"{source}: missing key {exc.args[0]!r}") from None
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{source}: {exc}") from None
        cfg.warnings = cfg._check_fit()
        return cfg

    def parse_requests(self, scenario: Mapping) -> list[Request]:
        per_frame = Fraction(str(scenario.get("per_frame_cost_ms", 0)))
        requests = []
        for r in scenario.get("requests", []):
            if r["module"] not in self.modules:
                raise ConfigError(f"scenario requests unknown module {r['module']}")
            if r.get("predict") is not None and r["predict"] not in self.modules:
                raise ConfigError(f"scenario predicts unknown module {r['predict']}")
            if "duration_ms" in r:
                duration = Fraction(str(r["duration_ms"]))
            elif "frames" in r:
                duration = per_frame * int(r["frames"])
            else:
                raise ConfigError(f"request for {r['module']} needs duration_ms or frames")
            requests.append(Request(Fraction(str(r.get("time", 0))), r["module"], duration, r.get("predict")))
        return requests

    def _check_fit(self) -> list[str]:
        out = []
        for name, req in self.modules.items():
            homes = [r for r in self.regions if name in self.assignments[r.name] and req.fits(r.counts)]
            if not homes:
                out.append(f"module {name} fits no region it is assigned to")
        return out

    def region(self, name: str) -> PRRegion:
        for r in self.regions:
            if r.name == name:
                return r
        raise ConfigError(f"unknown region {name!r}")

    def plan(self, region: PRRegion) -> PartitionPlan:
        reqs = [self.modules[n] for n in self.assignments[region.name]]
        return partition_region(region, reqs, self.slot_columns.get(region.name))

    def plans(self) -> list[PartitionPlan]:
        return [self.plan(r) for r in self.regions]

    def scenario(self, requests=None) -> Scenario:
        return Scenario(
            tuple(self.plans()), self.geometry, self.size_model, self.port,
            tuple(self.requests if requests is None else requests), dict(self.interfaces),
        )


def load_scenario_requests(cfg: ProjectConfig, path) -> list[Request]:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot load scenario {path}: {exc}") from None
    return cfg.parse_requests(data.get("scenario", data))


__all__ = ["ConfigError", "ProjectConfig", "GeometryError", "load_scenario_requests"]
