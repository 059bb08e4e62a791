"""Partial bitstream format: generation, serialization, parsing and sizing.

Wire format (all words big-endian, 32 bits)::

    8 x 0xFFFFFFFF dummy words
    0xAA995566 sync word
    for every column of the span, left to right:
        type-1 write FAR,  1 word    -> FAR of the column's minor 0
        type-1 write FDRI, n words   -> all minor frames of the column
            (n > 2047: type-1 header with count 0, then a type-2 header)
    type-1 write CRC, 1 word         -> CRC-32 of every body byte before it
    type-1 write CMD, 1 word         -> DESYNC

The layout borrows Virtex-5 packet headers and register codes but is only
meant to be bit-exact with itself.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field
from typing import Mapping, Union

import numpy as np

from .errors import DprError
from .fabric import (
    FRAME_WORDS,
    DeviceGeometry,
    FrameAddress,
    RegionSpan,
    ResourceType,
    column_signature,
    pack_far,
    unpack_far,
)

DUMMY_WORD = 0xFFFFFFFF
SYNC_WORD = 0xAA995566
HEADER_WORDS = 9
DESYNC_COMMAND = 0x0000000D

REG_CRC = 0x00
REG_FAR = 0x01
REG_FDRI = 0x02
REG_CMD = 0x04
_REGISTERS = {REG_CRC: "CRC", REG_FAR: "FAR", REG_FDRI: "FDRI", REG_CMD: "CMD"}

OP_WRITE = 2
TYPE1_MAX_COUNT = 0x7FF
TYPE2_MAX_COUNT = (1 << 27) - 1

FRAME_BYTES = FRAME_WORDS * 4

# Sizes quoted in kilobytes use decimal units: 100 MHz x 32 bit = 400 KB/ms.
KILOBYTE = 1000


class InvalidBitstream(DprError):
    pass


class MissingSync(InvalidBitstream):
    pass


class TruncatedStream(InvalidBitstream):
    pass


class BadWordCount(InvalidBitstream):
    pass


class UnknownRegister(InvalidBitstream):
    pass


class CrcMismatch(InvalidBitstream):
    def __init__(self, expected: int, found: int):
        super().__init__(f"CRC mismatch: computed {expected:#010x}, stream carries {found:#010x}")
        self.expected = expected
        self.found = found


class SizeModelError(DprError):
    pass


@dataclass(frozen=True)
class WriteFar:
    word: int

    @property
    def address(self) -> FrameAddress:
        return unpack_far(self.word)


@dataclass(frozen=True)
class WriteFdri:
    """Frame data; ``data`` holds whole 41-word frames as big-endian bytes."""

    data: bytes

    def __post_init__(self):
        if len(self.data) % FRAME_BYTES:
            raise BadWordCount(f"FDRI payload of {len(self.data) // 4} words is not a multiple of {FRAME_WORDS}")

    @property
    def frame_count(self) -> int:
        return len(self.data) // FRAME_BYTES

    @property
    def word_count(self) -> int:
        return len(self.data) // 4

    def frames(self) -> np.ndarray:
        return np.frombuffer(self.data, dtype=">u4").reshape(-1, FRAME_WORDS)


@dataclass(frozen=True)
class WriteCrc:
    word: int


@dataclass(frozen=True)
class Desync:
    pass


Packet = Union[WriteFar, WriteFdri, WriteCrc, Desync]


@dataclass(frozen=True)
class PartialBitstream:
    span: RegionSpan
    packets: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "packets", tuple(self.packets))

    @property
    def far_words(self) -> list[int]:
        return [p.word for p in self.packets if isinstance(p, WriteFar)]

    @property
    def frame_count(self) -> int:
        return sum(p.frame_count for p in self.packets if isinstance(p, WriteFdri))

    @property
    def crc(self) -> int | None:
        for p in self.packets:
            if isinstance(p, WriteCrc):
                return p.word
        return None

    def column_frame_counts(self) -> list[int]:
        return [p.frame_count for p in self.packets if isinstance(p, WriteFdri)]


# -- payload generator -------------------------------------------------------

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def splitmix_frames(seed: int, far_words) -> np.ndarray:
    """Deterministic frame content keyed by ``(seed, FAR)``.

    Returns a ``(len(far_words), 41)`` uint32 array. Word ``i`` of the frame at
    address ``a`` is the upper half of splitmix64 applied to
    ``(seed << 32 | a) + (i + 1) * golden``.
    """
    fars = np.asarray(far_words, dtype=np.uint64).reshape(-1, 1)
    key = (np.uint64(seed & 0xFFFFFFFF) << np.uint64(32)) | fars
    idx = np.arange(1, FRAME_WORDS + 1, dtype=np.uint64).reshape(1, -1)
    x = key + idx * _GOLDEN
    x ^= x >> np.uint64(30)
    x *= _MIX1
    x ^= x >> np.uint64(27)
    x *= _MIX2
    x ^= x >> np.uint64(31)
    return (x >> np.uint64(32)).astype(np.uint32)


def bitgen(geom: DeviceGeometry, span: RegionSpan, payload_seed: int = 0) -> PartialBitstream:
    signature = column_signature(geom, span)
    packets: list = []
    for offset, col in enumerate(signature):
        base = FrameAddress(0, span.half, span.row, span.col_start + offset, 0)
        far0 = pack_far(base)
        frames = splitmix_frames(payload_seed, far0 + np.arange(col.minor_frame_count))
        packets.append(WriteFar(far0))
        packets.append(WriteFdri(frames.astype(">u4").tobytes()))
    packets.append(WriteCrc(compute_crc(packets)))
    packets.append(Desync())
    return PartialBitstream(span, packets)


# -- wire encoding -----------------------------------------------------------


def _type1(register: int, count: int) -> int:
    return (1 << 29) | (OP_WRITE << 27) | (register << 13) | count


def _type2(count: int) -> int:
    return (2 << 29) | (OP_WRITE << 27) | count


def _encode_packet(packet) -> bytes:
    if isinstance(packet, WriteFar):
        return struct.pack(">II", _type1(REG_FAR, 1), packet.word)
    if isinstance(packet, WriteCrc):
        return struct.pack(">II", _type1(REG_CRC, 1), packet.word)
    if isinstance(packet, Desync):
        return struct.pack(">II", _type1(REG_CMD, 1), DESYNC_COMMAND)
    if isinstance(packet, WriteFdri):
        n = packet.word_count
        if n <= TYPE1_MAX_COUNT:
            head = struct.pack(">I", _type1(REG_FDRI, n))
        else:
            head = struct.pack(">II", _type1(REG_FDRI, 0), _type2(n))
        return head + packet.data
    raise TypeError(f"not a packet: {packet!r}")


def _encode_body(packets) -> bytes:
    return b"".join(_encode_packet(p) for p in packets)


def compute_crc(packets_or_bytes) -> int:
    """CRC-32/IEEE (reflected 0x04C11DB7, init and xorout 0xFFFFFFFF)."""
    if isinstance(packets_or_bytes, (bytes, bytearray, memoryview)):
        data = bytes(packets_or_bytes)
    else:
        data = _encode_body(packets_or_bytes)
    return zlib.crc32(data) & 0xFFFFFFFF


def serialize(bs: PartialBitstream) -> bytes:
    header = struct.pack(">9I", *([DUMMY_WORD] * 8), SYNC_WORD)
    return header + _encode_body(bs.packets)


def packet_overhead_words(signature) -> int:
    """Non-payload words in the serialized bitstream of a span with this signature."""
    words = HEADER_WORDS + 2 + 2  # header, CRC packet, DESYNC packet
    for col in signature:
        n = col.minor_frame_count * FRAME_WORDS
        words += 2 + (2 if n > TYPE1_MAX_COUNT else 1)
    return words


def parse(data: bytes) -> PartialBitstream:
    if len(data) % 4:
        raise TruncatedStream(f"stream length {len(data)} is not a whole number of words")
    words = np.frombuffer(data, dtype=">u4")
    if len(words) < HEADER_WORDS:
        raise TruncatedStream("stream ends inside the header")
    if int(words[8]) != SYNC_WORD or not np.all(words[:8] == DUMMY_WORD):
        raise MissingSync(f"expected 8 dummy words then {SYNC_WORD:#010x}")

    packets: list = []
    pos = HEADER_WORDS
    crc_offset = None  # word offset of the CRC packet header
    seen_crc = False
    done = False

    def need(n: int, what: str):
        if pos + n > len(words):
            raise TruncatedStream(f"stream ends inside {what} at word {pos}")

    while pos < len(words):
        if done:
            raise InvalidBitstream(f"trailing data after DESYNC at word {pos}")
        header = int(words[pos])
        ptype, op = header >> 29, (header >> 27) & 0x3
        if ptype != 1 or op != OP_WRITE:
            raise InvalidBitstream(f"word {pos}: expected a type-1 write header, got {header:#010x}")
        register = (header >> 13) & 0x3FFF
        count = header & TYPE1_MAX_COUNT
        if register not in _REGISTERS:
            raise UnknownRegister(f"word {pos}: register address {register:#x}")
        if seen_crc and register != REG_CMD:
            raise InvalidBitstream(f"word {pos}: {_REGISTERS[register]} write after the CRC packet")
        pos += 1
        if register == REG_FDRI:
            if count == 0:
                need(1, "FDRI type-2 header")
                ext = int(words[pos])
                if ext >> 29 != 2 or (ext >> 27) & 0x3 != OP_WRITE:
                    raise BadWordCount(f"word {pos}: FDRI count 0 not followed by a type-2 header")
                count = ext & TYPE2_MAX_COUNT
                pos += 1
            if count == 0 or count % FRAME_WORDS:
                raise BadWordCount(f"FDRI word count {count} is not a positive multiple of {FRAME_WORDS}")
            need(count, "FDRI payload")
            if not packets or not isinstance(packets[-1], WriteFar):
                raise InvalidBitstream(f"word {pos}: FDRI write not preceded by a FAR write")
            packets.append(WriteFdri(data[4 * pos:4 * (pos + count)]))
            pos += count
            continue
        if count != 1:
            raise BadWordCount(f"{_REGISTERS[register]} write with word count {count}")
        need(1, f"{_REGISTERS[register]} value")
        value = int(words[pos])
        if packets and isinstance(packets[-1], WriteFar):
            raise InvalidBitstream(f"word {pos - 1}: FAR write not followed by an FDRI write")
        if register == REG_FAR:
            packets.append(WriteFar(value))
        elif register == REG_CRC:
            crc_offset = pos - 1
            packets.append(WriteCrc(value))
            seen_crc = True
        else:
            if value != DESYNC_COMMAND:
                raise InvalidBitstream(f"word {pos}: unsupported command {value:#x}")
            if not seen_crc:
                raise InvalidBitstream("DESYNC reached without a CRC packet")
            packets.append(Desync())
            done = True
        pos += 1

    if not seen_crc:
        raise InvalidBitstream("stream has no CRC packet")
    if not done:
        raise TruncatedStream("stream ends before DESYNC")
    if packets and isinstance(packets[-1], WriteFar):
        raise InvalidBitstream("FAR write not followed by an FDRI write")
    expected = compute_crc(data[4 * HEADER_WORDS:4 * crc_offset])
    found = packets[-2].word
    if expected != found:
        raise CrcMismatch(expected, found)
    return PartialBitstream(_infer_span(packets), packets)


def _infer_span(packets) -> RegionSpan:
    addresses = [unpack_far(p.word) for p in packets if isinstance(p, WriteFar)]
    if not addresses:
        raise InvalidBitstream("bitstream configures no columns")
    first = addresses[0]
    for i, fa in enumerate(addresses):
        if (fa.block_type, fa.half, fa.row, fa.minor) != (0, first.half, first.row, 0) or fa.major != first.major + i:
            raise InvalidBitstream(
                f"FAR #{i} {fa} does not continue a contiguous single-row column run"
            )
    return RegionSpan(first.half, first.row, first.major, len(addresses))


def check_against(bs: PartialBitstream, geom: DeviceGeometry) -> None:
    """Raise InvalidBitstream unless ``bs`` matches the frame layout of its span in ``geom``."""
    signature = column_signature(geom, bs.span)
    counts = bs.column_frame_counts()
    if len(counts) != len(signature):
        raise InvalidBitstream(f"{len(counts)} FDRI packets for a {len(signature)}-column span")
    for i, (col, n) in enumerate(zip(signature, counts)):
        if n != col.minor_frame_count:
            raise InvalidBitstream(
                f"column {bs.span.col_start + i} ({col.name}) carries {n} frames, expected {col.minor_frame_count}"
            )
    addresses = [unpack_far(w) for w in bs.far_words]
    for i, fa in enumerate(addresses):
        if (fa.half, fa.row, fa.major, fa.minor) != (bs.span.half, bs.span.row, bs.span.col_start + i, 0):
            raise InvalidBitstream(f"FAR #{i} {fa} does not address column {bs.span.col_start + i} of {bs.span}")


# -- size model --------------------------------------------------------------


@dataclass(frozen=True)
class SizeModel:
    """How many bytes the bitstream for a span occupies.

    ``overhead_words=None`` uses the exact packet overhead of :func:`serialize`.
    ``overrides`` maps a module or region name to a fixed size in bytes.
    """

    overhead_words: int | None = None
    content_words_per_bram_column: int = 0
    overrides: Mapping[str, int] = field(default_factory=dict)

    def __hash__(self):
        return hash((self.overhead_words, self.content_words_per_bram_column, tuple(sorted(self.overrides.items()))))


def bitstream_size(model: SizeModel, span: RegionSpan, geom: DeviceGeometry, name: str | None = None) -> int:
    signature = column_signature(geom, span)
    frame_bytes = sum(col.minor_frame_count for col in signature) * FRAME_BYTES
    if name is not None and name in model.overrides:
        size = int(model.overrides[name])
        if size < frame_bytes:
            raise SizeModelError(
                f"size override for {name} ({size} B) is below the {frame_bytes} B of frame data in {span}"
            )
        return size
    overhead = model.overhead_words
    if overhead is None:
        overhead = packet_overhead_words(signature)
    bram_cols = sum(1 for col in signature if col is ResourceType.BRAM)
    return frame_bytes + 4 * (overhead + bram_cols * model.content_words_per_bram_column)
