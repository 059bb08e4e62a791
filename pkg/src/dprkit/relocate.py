"""Relocation compatibility checks and FAR-rewriting relocation.

Interface anchors are kept relative to the origin of the span a module was
implemented in, so "same partition pins, same crossing-wire routes" at a new
location reduces to re-validating the same relative anchors against the
target span.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable

from .bitstream import (
    InvalidBitstream,
    PartialBitstream,
    WriteCrc,
    WriteFar,
    check_against,
    compute_crc,
)
from .errors import DprError
from .fabric import DeviceGeometry, RegionSpan, column_signature, pack_far, unpack_far


class AnchorOutsideSpan(DprError):
    pass


class InterfaceError(DprError):
    pass


class IncompatibleTarget(DprError):
    def __init__(self, violations):
        self.violations = tuple(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


class MalformedSource(DprError):
    pass


@dataclass(frozen=True)
class PinAnchor:
    signal: str
    rel_col: int
    bel_index: int
    direction: str = "in"

    def __post_init__(self):
        if self.direction not in ("in", "out"):
            raise InterfaceError(f"pin {self.signal}: direction must be 'in' or 'out'")
        if self.rel_col < 0 or self.bel_index < 0:
            raise InterfaceError(f"pin {self.signal}: negative offset")


@dataclass(frozen=True)
class RouteAnchor:
    signal: str
    # (dcol, drow, wire_id) relative to the span origin
    segments: tuple[tuple[int, int, int], ...]

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(tuple(int(v) for v in s) for s in self.segments))


@dataclass(frozen=True)
class AbsolutePin:
    signal: str
    col: int
    bel_index: int
    direction: str = "in"


@dataclass(frozen=True)
class AbsoluteRoute:
    signal: str
    # (col, row, wire_id) in device coordinates
    segments: tuple[tuple[int, int, int], ...]


@dataclass(frozen=True)
class InterfaceMap:
    pins: tuple[PinAnchor, ...] = ()
    routes: tuple[RouteAnchor, ...] = ()

    def __post_init__(self):
        pins = tuple(sorted(self.pins, key=lambda p: p.signal))
        routes = tuple(sorted(self.routes, key=lambda r: r.signal))
        object.__setattr__(self, "pins", pins)
        object.__setattr__(self, "routes", routes)
        names = [p.signal for p in pins]
        if len(set(names)) != len(names):
            raise InterfaceError("pin anchors must be unique per signal")
        unpinned = sorted({r.signal for r in routes} - set(names))
        if unpinned:
            raise InterfaceError(f"routed signals without a pin anchor: {', '.join(unpinned)}")

    @classmethod
    def from_dict(cls, data: dict | None) -> "InterfaceMap":
        if not data:
            return cls()
        pins = [
            PinAnchor(p["signal"], int(p["rel_col"]), int(p["bel_index"]), p.get("direction", "in"))
            for p in data.get("pins", [])
        ]
        routes = [RouteAnchor(r["signal"], r["segments"]) for r in data.get("routes", [])]
        return cls(tuple(pins), tuple(routes))

    def to_dict(self) -> dict:
        return {
            "pins": [
                {"signal": p.signal, "rel_col": p.rel_col, "bel_index": p.bel_index, "direction": p.direction}
                for p in self.pins
            ],
            "routes": [{"signal": r.signal, "segments": [list(s) for s in r.segments]} for r in self.routes],
        }


def normalize_anchors(pins: Iterable, routes: Iterable, origin: RegionSpan) -> InterfaceMap:
    """Express absolute pin and route positions relative to ``origin``.

    Pins must sit inside the span; route segments may also touch the column
    or row directly adjacent to it. Anchors that are already relative pass
    through unchanged.
    """
    rel_pins = []
    for pin in pins:
        if isinstance(pin, PinAnchor):
            rel_pins.append(pin)
            continue
        if not origin.col_start <= pin.col < origin.col_stop:
            raise AnchorOutsideSpan(
                f"pin {pin.signal} at column {pin.col} is outside columns "
                f"{origin.col_start}..{origin.col_stop - 1}"
            )
        rel_pins.append(PinAnchor(pin.signal, pin.col - origin.col_start, pin.bel_index, pin.direction))

    rel_routes = []
    for route in routes:
        if isinstance(route, RouteAnchor):
            rel_routes.append(route)
            continue
        segments = []
        for col, row, wire in route.segments:
            if not (origin.col_start - 1 <= col <= origin.col_stop and abs(row - origin.row) <= 1):
                raise AnchorOutsideSpan(
                    f"route {route.signal} segment at column {col}, row {row} is not in or next to {origin}"
                )
            segments.append((col - origin.col_start, row - origin.row, wire))
        rel_routes.append(RouteAnchor(route.signal, tuple(segments)))
    return InterfaceMap(tuple(rel_pins), tuple(rel_routes))


@dataclass(frozen=True)
class Violation:
    kind: str
    detail: str
    where: dict = field(default_factory=dict, compare=False)

    def __str__(self) -> str:
        return f"{self.kind}: {self.detail}"


SPAN_WIDTH_MISMATCH = "SpanWidthMismatch"
COLUMN_SIGNATURE_MISMATCH = "ColumnSignatureMismatch"
ROW_EXTENT_MISMATCH = "RowExtentMismatch"
MIRROR_ROW_MISMATCH = "MirrorRowMismatch"
TARGET_OVERLAP = "TargetOverlap"
ANCHOR_OUT_OF_BOUNDS = "AnchorOutOfBounds"
BEL_UNAVAILABLE = "BelUnavailable"

VIOLATION_KINDS = (
    SPAN_WIDTH_MISMATCH,
    COLUMN_SIGNATURE_MISMATCH,
    ROW_EXTENT_MISMATCH,
    MIRROR_ROW_MISMATCH,
    TARGET_OVERLAP,
    ANCHOR_OUT_OF_BOUNDS,
    BEL_UNAVAILABLE,
)


def check_compatibility(
    geom: DeviceGeometry,
    source: RegionSpan,
    target: RegionSpan,
    iface: InterfaceMap | None = None,
    row_extent: tuple[int, int] = (1, 1),
) -> list[Violation]:
    """Return every reason ``target`` cannot host a module built for ``source``.

    An empty list means the relocation is allowed. ``row_extent`` gives the
    clock-row heights of source and target; spans are single-row, so only
    callers describing taller footprints pass anything other than ``(1, 1)``.
    """
    iface = iface or InterfaceMap()
    src_sig = column_signature(geom, source)
    dst_sig = column_signature(geom, target)
    out: list[Violation] = []

    if source.col_count != target.col_count:
        out.append(Violation(
            SPAN_WIDTH_MISMATCH,
            f"source spans {source.col_count} columns, target {target.col_count}",
            {"source": source.col_count, "target": target.col_count},
        ))
    for i, (a, b) in enumerate(zip(src_sig, dst_sig)):
        if a is not b:
            out.append(Violation(
                COLUMN_SIGNATURE_MISMATCH,
                f"offset {i}: source column {source.col_start + i} is {a.name}, "
                f"target column {target.col_start + i} is {b.name}",
                {"offset": i, "source_col": source.col_start + i, "target_col": target.col_start + i},
            ))
            break
    if row_extent[0] != row_extent[1]:
        out.append(Violation(
            ROW_EXTENT_MISMATCH,
            f"source is {row_extent[0]} rows tall, target {row_extent[1]}",
            {"source": row_extent[0], "target": row_extent[1]},
        ))
    if source.half != target.half and source.row != target.row:
        out.append(Violation(
            MIRROR_ROW_MISMATCH,
            f"top/bottom move needs equal row indices (source row {source.row}, target row {target.row})",
            {"source_row": source.row, "target_row": target.row},
        ))
    if source != target and source.overlaps(target):
        out.append(Violation(
            TARGET_OVERLAP,
            f"target {target} overlaps source {source}",
            {"source": str(source), "target": str(target)},
        ))

    for pin in iface.pins:
        if pin.rel_col >= target.col_count:
            out.append(Violation(
                ANCHOR_OUT_OF_BOUNDS,
                f"pin {pin.signal} offset {pin.rel_col} falls outside the {target.col_count}-column target",
                {"signal": pin.signal, "rel_col": pin.rel_col},
            ))
            continue
        col = target.col_start + pin.rel_col
        sites = dst_sig[pin.rel_col].lut_sites
        if pin.bel_index >= sites:
            out.append(Violation(
                BEL_UNAVAILABLE,
                f"pin {pin.signal} needs LUT {pin.bel_index} in column {col} "
                f"({dst_sig[pin.rel_col].name}, {sites} LUT sites)",
                {"signal": pin.signal, "col": col, "bel_index": pin.bel_index},
            ))
    rows = geom.rows_in_half(target.half)
    for route in iface.routes:
        for dcol, drow, wire in route.segments:
            col, row = target.col_start + dcol, target.row + drow
            if not (0 <= col < geom.n_columns and 0 <= row < rows):
                out.append(Violation(
                    ANCHOR_OUT_OF_BOUNDS,
                    f"route {route.signal} wire {wire} lands at column {col}, row {row} outside the device",
                    {"signal": route.signal, "col": col, "row": row},
                ))
    return out


def relocate_bitstream(
    bs: PartialBitstream,
    geom: DeviceGeometry,
    target: RegionSpan,
    iface: InterfaceMap | None = None,
) -> PartialBitstream:
    """Rewrite every FAR of ``bs`` so it programs ``target``; payloads are untouched."""
    try:
        check_against(bs, geom)
    except InvalidBitstream as exc:
        raise MalformedSource(str(exc)) from None
    source = bs.span
    violations = check_compatibility(geom, source, target, iface)
    if violations:
        raise IncompatibleTarget(violations)
    if target == source:
        return bs

    dcol = target.col_start - source.col_start
    body = []
    for packet in bs.packets:
        if isinstance(packet, WriteFar):
            fa = unpack_far(packet.word)
            packet = WriteFar(pack_far(replace(fa, major=fa.major + dcol, row=target.row, half=target.half)))
        elif isinstance(packet, WriteCrc):
            packet = WriteCrc(compute_crc(body))
        body.append(packet)
    return PartialBitstream(target, body)
