"""Virtual device geometry and configuration-frame addressing.

The device is a grid of clock-region rows (split into a top and a bottom
half) crossed by resource columns. Every row carries the same column layout,
so a column index (the FAR *major* address) means the same resource type in
every row. Each column is configured through a fixed number of minor frames
of 41 32-bit words.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import DprError

FRAME_WORDS = 41

# FAR bit layout: (shift, width)
_FAR_FIELDS = {
    "block_type": (21, 3),
    "half": (20, 1),
    "row": (15, 5),
    "major": (7, 8),
    "minor": (0, 7),
}
_FAR_RESERVED_MASK = 0xFF000000


class FieldOverflow(DprError):
    pass


class ReservedBitsSet(DprError):
    pass


class SpanOutOfBounds(DprError):
    pass


class GeometryError(DprError):
    pass


class ResourceType(enum.Enum):
    CLB = "CLB"
    DSP = "DSP"
    BRAM = "BRAM"
    IOB = "IOB"
    GCLK = "GCLK"

    @property
    def minor_frame_count(self) -> int:
        return _MINOR_FRAMES[self]

    @property
    def lut_sites(self) -> int:
        """LUT sites per column and row; only CLB columns can host partition pins."""
        return 160 if self is ResourceType.CLB else 0

    @classmethod
    def parse(cls, text: str) -> "ResourceType":
        try:
            return cls[text.strip().upper()]
        except KeyError:
            raise GeometryError(f"unknown resource type {text!r}") from None

    def __repr__(self) -> str:
        return self.name


_MINOR_FRAMES = {
    ResourceType.CLB: 36,
    ResourceType.DSP: 26,
    ResourceType.BRAM: 30,
    ResourceType.IOB: 54,
    ResourceType.GCLK: 4,
}


@dataclass(frozen=True, order=True)
class FrameAddress:
    """Decoded frame address register fields."""

    block_type: int = 0
    half: int = 0
    row: int = 0
    major: int = 0
    minor: int = 0

    def pack(self) -> int:
        return pack_far(self)

    @classmethod
    def unpack(cls, word: int) -> "FrameAddress":
        return unpack_far(word)


def pack_far(fa: FrameAddress) -> int:
    word = 0
    for name, (shift, width) in _FAR_FIELDS.items():
        value = getattr(fa, name)
        if not 0 <= value < (1 << width):
            raise FieldOverflow(f"FAR field {name}={value} does not fit in {width} bits")
        word |= value << shift
    return word


def unpack_far(word: int) -> FrameAddress:
    if not 0 <= word <= 0xFFFFFFFF:
        raise FieldOverflow(f"FAR word {word:#x} is not a 32-bit value")
    if word & _FAR_RESERVED_MASK:
        raise ReservedBitsSet(f"FAR word {word:#010x} has bits 31..24 set")
    fields = {
        name: (word >> shift) & ((1 << width) - 1)
        for name, (shift, width) in _FAR_FIELDS.items()
    }
    return FrameAddress(**fields)


def parse_half(value) -> int:
    if isinstance(value, str):
        key = value.strip().lower()
        if key in ("top", "t", "0"):
            return 0
        if key in ("bottom", "b", "1"):
            return 1
        raise GeometryError(f"bad half {value!r}; expected top or bottom")
    if value in (0, 1):
        return int(value)
    raise GeometryError(f"bad half {value!r}; expected 0 or 1")


@dataclass(frozen=True, order=True)
class RegionSpan:
    """A rectangular footprint: contiguous columns inside one clock row."""

    half: int
    row: int
    col_start: int
    col_count: int

    @property
    def col_stop(self) -> int:
        return self.col_start + self.col_count

    def shifted(self, dcol: int) -> "RegionSpan":
        return RegionSpan(self.half, self.row, self.col_start + dcol, self.col_count)

    def overlaps(self, other: "RegionSpan") -> bool:
        return (
            self.half == other.half
            and self.row == other.row
            and self.col_start < other.col_stop
            and other.col_start < self.col_stop
        )

    def __str__(self) -> str:
        half = "top" if self.half == 0 else "bottom"
        return f"{half}:{self.row}:{self.col_start}+{self.col_count}"


def parse_columns(spec: str | Sequence) -> tuple[ResourceType, ...]:
    """Expand a run-length column list such as ``"CLB:27,BRAM:6"``.

    A list of ``[type, count]`` pairs or of bare type names is accepted too.
    """
    if isinstance(spec, str):
        items = [part for part in spec.replace(" ", "").split(",") if part]
    else:
        items = list(spec)
    columns: list[ResourceType] = []
    for item in items:
        if isinstance(item, str):
            name, _, count = item.partition(":")
            count = int(count) if count else 1
        elif isinstance(item, ResourceType):
            name, count = item.name, 1
        else:
            name, count = item
        if count < 0:
            raise GeometryError(f"negative run length in column list: {item!r}")
        columns.extend([ResourceType.parse(name)] * int(count))
    return tuple(columns)


def format_columns(columns: Iterable[ResourceType]) -> str:
    runs: list[list] = []
    for col in columns:
        if runs and runs[-1][0] is col:
            runs[-1][1] += 1
        else:
            runs.append([col, 1])
    return ",".join(f"{col.name}:{n}" for col, n in runs)


@dataclass(frozen=True)
class DeviceGeometry:
    rows_top: int
    rows_bottom: int
    columns: tuple[ResourceType, ...]

    frame_words = FRAME_WORDS

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple(self.columns))
        if not self.columns:
            raise GeometryError("device needs at least one column")
        if len(self.columns) > 256:
            raise GeometryError("major address is 8 bits wide; at most 256 columns")
        if self.rows_top < 1 or self.rows_bottom < 0:
            raise GeometryError("device needs rows_top >= 1 and rows_bottom >= 0")
        if max(self.rows_top, self.rows_bottom) > 32:
            raise GeometryError("row address is 5 bits wide; at most 32 rows per half")

    @classmethod
    def from_dict(cls, data: dict) -> "DeviceGeometry":
        try:
            return cls(
                rows_top=int(data["rows_top"]),
                rows_bottom=int(data.get("rows_bottom", 0)),
                columns=parse_columns(data["columns"]),
            )
        except KeyError as exc:
            raise GeometryError(f"geometry config lacks {exc.args[0]!r}") from None

    def to_dict(self) -> dict:
        return {
            "rows_top": self.rows_top,
            "rows_bottom": self.rows_bottom,
            "columns": format_columns(self.columns),
        }

    @property
    def n_columns(self) -> int:
        return len(self.columns)

    def rows_in_half(self, half: int) -> int:
        return self.rows_top if half == 0 else self.rows_bottom

    def check_span(self, span: RegionSpan) -> None:
        if span.half not in (0, 1):
            raise SpanOutOfBounds(f"span {span}: half must be 0 or 1")
        if not 0 <= span.row < self.rows_in_half(span.half):
            raise SpanOutOfBounds(f"span {span}: row {span.row} not in device half")
        if span.col_count < 1:
            raise SpanOutOfBounds(f"span {span}: zero-width span")
        if span.col_start < 0 or span.col_stop > self.n_columns:
            raise SpanOutOfBounds(
                f"span {span}: columns {span.col_start}..{span.col_stop - 1} "
                f"outside 0..{self.n_columns - 1}"
            )


def column_signature(geom: DeviceGeometry, span: RegionSpan) -> tuple[ResourceType, ...]:
    geom.check_span(span)
    return geom.columns[span.col_start:span.col_stop]


def column_counts(signature: Iterable[ResourceType]) -> dict[ResourceType, int]:
    counts: dict[ResourceType, int] = {}
    for col in signature:
        counts[col] = counts.get(col, 0) + 1
    return counts


def span_frame_count(geom: DeviceGeometry, span: RegionSpan) -> int:
    return sum(col.minor_frame_count for col in column_signature(geom, span))


def enumerate_frames(geom: DeviceGeometry, span: RegionSpan) -> list[FrameAddress]:
    signature = column_signature(geom, span)
    return [
        FrameAddress(0, span.half, span.row, span.col_start + i, minor)
        for i, col in enumerate(signature)
        for minor in range(col.minor_frame_count)
    ]
