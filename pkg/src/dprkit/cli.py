"""``dprkit`` command-line entry point.

Exit status: 0 on success, 1 on a domain or I/O error (printed as
``ErrorName: message`` on stderr), 2 on a usage error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import __version__
from .bitstream import Desync, WriteCrc, WriteFar, WriteFdri, bitgen, parse, serialize
from .config import ConfigError, ProjectConfig, load_scenario_requests
from .csd import Quantizer, detect_cuts, frame_paths, read_frame
from .errors import DprError
from .fabric import RegionSpan, format_columns, parse_half
from .floorplan import enumerate_locations
from .relocate import relocate_bitstream
from .report import Table, locations_table, plan_table, render_all, report_bundle
from .simrt import Policy, compare_policies, comparison_table, run

log = logging.getLogger("dprkit")


class UsageError(Exception):
    """Bad flag values discovered after argparse accepted them."""


def _emit(args, text: str) -> None:
    if args.out and args.command not in ("bitgen", "relocate"):
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _tables(args, tables) -> None:
    _emit(args, render_all(tables, args.format))


# -- target parsing ----------------------------------------------------------


def _placement(cfg: ProjectConfig, module: str, ref: str):
    """Resolve ``REGION/SLOT`` to the placement of ``module`` starting at that slot."""
    plans = cfg.plans()
    region, _, slot = ref.partition("/")
    try:
        first = int(slot)
    except ValueError:
        raise UsageError(f"bad slot reference {ref!r}; expected REGION/SLOT") from None
    for p in enumerate_locations(plans, module):
        if p.region == region and p.first_slot == first:
            return p
    raise UsageError(f"module {module} has no placement at {ref}")


def _target_span(cfg: ProjectConfig, ref: str, width: int, module: str | None) -> RegionSpan:
    if ref.startswith("span:"):
        parts = ref.split(":")
        if len(parts) != 4:
            raise UsageError(f"bad span {ref!r}; expected span:HALF:ROW:COL")
        try:
            return RegionSpan(parse_half(parts[1]), int(parts[2]), int(parts[3]), width)
        except ValueError as exc:
            raise UsageError(f"bad span {ref!r}: {exc}") from None
    if module is not None:
        return _placement(cfg, module, ref).span
    region, _, slot = ref.partition("/")
    plan = cfg.plan(cfg.region(region))
    try:
        base = plan.base_slots[int(slot)]
    except (ValueError, IndexError):
        raise UsageError(f"bad slot reference {ref!r} for region {region} ({plan.n_slots} slots)") from None
    return RegionSpan(base.half, base.row, base.col_start, width)


# -- subcommands -------------------------------------------------------------


def cmd_device(args, cfg: ProjectConfig) -> int:
    geom = cfg.geometry
    device = Table("device.v1", ["rows_top", "rows_bottom", "columns", "layout"], [[
        str(geom.rows_top), str(geom.rows_bottom), str(geom.n_columns), format_columns(geom.columns),
    ]])
    regions = Table("device.regions.v1", ["region", "span", "columns", "signature", "modules"], [])
    for r in cfg.regions:
        regions.rows.append([r.name, str(r.span), str(len(r.signature)), format_columns(r.signature),
                             " ".join(cfg.assignments[r.name])])
    warnings = Table("device.warnings.v1", ["warning"], [[w] for w in cfg.warnings])
    _tables(args, [device, regions, warnings])
    return 0


def cmd_plan(args, cfg: ProjectConfig) -> int:
    plans = [cfg.plan(cfg.region(args.region))] if args.region else cfg.plans()
    tables = plan_table(cfg, plans)
    if not args.region:
        tables.append(locations_table(cfg, plans))
    _tables(args, tables)
    return 0


def cmd_bitgen(args, cfg: ProjectConfig) -> int:
    if args.module not in cfg.modules:
        raise UsageError(f"unknown module {args.module!r}")
    locations = enumerate_locations(cfg.plans(), args.module, cfg.geometry, cfg.interfaces.get(args.module))
    placement = _placement(cfg, args.module, args.at) if args.at else locations[0]
    bs = bitgen(cfg.geometry, placement.span, args.seed)
    data = serialize(bs)
    Path(args.out).write_bytes(data)
    log.info("wrote %d bytes for %s at %s to %s", len(data), args.module, placement.label, args.out)
    table = Table("bitgen.v1", ["module", "location", "span", "frames", "bytes", "crc"], [[
        args.module, placement.label, str(bs.span), str(bs.frame_count), str(len(data)), f"{bs.crc:#010x}",
    ]])
    sys.stdout.write(table.render(args.format))
    return 0


def cmd_parse(args, cfg) -> int:
    bs = parse(Path(args.file).read_bytes())
    summary = Table("parse.summary.v1", ["span", "columns", "frames", "crc"], [[
        str(bs.span), str(bs.span.col_count), str(bs.frame_count), f"{bs.crc:#010x}",
    ]])
    packets = Table("parse.packets.v1", ["index", "packet", "value", "block_type", "half", "row", "major", "minor", "frames"], [])
    for i, p in enumerate(bs.packets):
        if isinstance(p, WriteFar):
            fa = p.address
            packets.rows.append([str(i), "FAR", f"{p.word:#010x}", str(fa.block_type), str(fa.half),
                                 str(fa.row), str(fa.major), str(fa.minor), ""])
        elif isinstance(p, WriteFdri):
            packets.rows.append([str(i), "FDRI", str(p.word_count), "", "", "", "", "", str(p.frame_count)])
        elif isinstance(p, WriteCrc):
            packets.rows.append([str(i), "CRC", f"{p.word:#010x}", "", "", "", "", "", ""])
        elif isinstance(p, Desync):
            packets.rows.append([str(i), "CMD", "DESYNC", "", "", "", "", "", ""])
    _tables(args, [summary, packets])
    return 0


def cmd_relocate(args, cfg: ProjectConfig) -> int:
    bs = parse(Path(args.input).read_bytes())
    target = _target_span(cfg, args.to, bs.span.col_count, args.module)
    iface = cfg.interfaces.get(args.module) if args.module else None
    moved = relocate_bitstream(bs, cfg.geometry, target, iface)
    data = serialize(moved)
    Path(args.out).write_bytes(data)
    table = Table("relocate.v1", ["source", "target", "bytes", "crc"], [[
        str(bs.span), str(target), str(len(data)), f"{moved.crc:#010x}",
    ]])
    sys.stdout.write(table.render(args.format))
    return 0


def cmd_locations(args, cfg: ProjectConfig) -> int:
    if args.module and args.module not in cfg.modules:
        raise UsageError(f"unknown module {args.module!r}")
    _tables(args, [locations_table(cfg, cfg.plans(), args.module)])
    return 0


def cmd_simulate(args, cfg: ProjectConfig) -> int:
    requests = load_scenario_requests(cfg, args.scenario) if args.scenario else None
    scenario = cfg.scenario(requests)
    if args.policy == "all":
        cmp = compare_policies(scenario)
        header, rows = comparison_table(cmp)
        tables = [Table("simulate.comparison.v1", header, rows)]
        reports = list(cmp.reports.values())
    else:
        report = run(scenario, args.policy)
        rows = [[m, str(n), f"{float(t):.2f}"] for m, (n, t) in report.per_module.items()]
        rows.append(["TOTAL", str(sum(n for n, _ in report.per_module.values())), f"{float(report.exposed):.2f}"])
        tables = [Table(f"simulate.{report.policy.value}.v1", ["module", "switches", "exposed_ms"], rows)]
        reports = [report]
    text = render_all(tables, args.format)
    if args.events:
        text += "".join("\n" + r.events_csv() for r in reports)
    _emit(args, text)
    return 0


def cmd_detect(args, cfg: ProjectConfig) -> int:
    paths = frame_paths(args.directory)
    with ThreadPoolExecutor(max_workers=args.jobs) as pool:
        frames = list(pool.map(read_frame, paths))
    q = Quantizer(args.levels or cfg.quantizer.n, args.mode or cfg.quantizer.mode)
    threshold = args.threshold if args.threshold is not None else cfg.threshold
    result = detect_cuts(frames, q, threshold)
    dist = Table("detect.distances.v1", ["index", "distance", "is_cut"],
                 [[str(i), str(d), str(int(c))] for i, d, c in result.rows()])
    keys = Table("detect.key_frames.v1", ["index", "file"], [[str(k), paths[k].name] for k in result.key_frames])
    log.info("NP=%d threshold=%s cuts=%d", result.n_positions, result.threshold, len(result.cuts))
    _tables(args, [dist, keys])
    return 0


def cmd_report(args, cfg: ProjectConfig) -> int:
    _tables(args, report_bundle(cfg))
    return 0


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="project config JSON (default: bundled reference floorplan)")
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--format", choices=("csv", "text"), default="csv")

    parser = argparse.ArgumentParser(prog="dprkit", description="Partial reconfiguration floorplanning and relocation toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("device", parents=[common], help="validate the device geometry and regions")
    p.add_argument("action", choices=("check",))
    p.set_defaults(func=cmd_device)

    p = sub.add_parser("plan", parents=[common], help="partition regions into slots and report utilization")
    p.add_argument("--region")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("bitgen", parents=[common], help="write a synthetic partial bitstream")
    p.add_argument("--module", required=True)
    p.add_argument("--at", metavar="REGION/SLOT")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_bitgen, out_required=True)

    p = sub.add_parser("parse", parents=[common], help="dump the packets of a bitstream file")
    p.add_argument("file")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("relocate", parents=[common], help="retarget a bitstream to another location")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--to", required=True, metavar="REGION/SLOT|span:HALF:ROW:COL")
    p.add_argument("--module", help="module whose interface map and placement to use")
    p.set_defaults(func=cmd_relocate, out_required=True)

    p = sub.add_parser("locations", parents=[common], help="count relocation targets per module")
    p.add_argument("--module")
    p.set_defaults(func=cmd_locations)

    p = sub.add_parser("simulate", parents=[common], help="replay a request sequence under a loading policy")
    p.add_argument("--policy", choices=[pol.value for pol in Policy] + ["all"], default="all")
    p.add_argument("--scenario", help="JSON file with a request list (default: the config's scenario)")
    p.add_argument("--events", action="store_true", help="append the event log")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("detect", parents=[common], help="detect cuts over a directory of PGM/PPM frames")
    p.add_argument("directory")
    p.add_argument("--levels", type=int, choices=(8, 16, 32))
    p.add_argument("--mode", choices=("rgb", "gray"))
    p.add_argument("--threshold", type=float, help="cut threshold (default: NP)")
    p.add_argument("--jobs", type=int, default=4, help="frame decoding threads")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("report", parents=[common], help="memory, utilization and reconfiguration time tables")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("DPRKIT_LOG", "WARNING").upper(), format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "out_required", False) and not args.out:
        parser.error(f"{args.command} requires --out")
    try:
        cfg = ProjectConfig.load(args.config)
        for w in cfg.warnings:
            log.warning(w)
        return args.func(args, cfg)
    except UsageError as exc:
        parser.error(str(exc))
    except DprError as exc:
        print(f"{exc.name}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
