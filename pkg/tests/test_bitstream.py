import struct

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dprkit.bitstream import (
    FRAME_BYTES,
    BadWordCount,
    CrcMismatch,
    Desync,
    InvalidBitstream,
    MissingSync,
    PartialBitstream,
    SizeModel,
    SizeModelError,
    TruncatedStream,
    UnknownRegister,
    WriteCrc,
    WriteFar,
    WriteFdri,
    bitgen,
    bitstream_size,
    check_against,
    compute_crc,
    packet_overhead_words,
    parse,
    serialize,
)
from dprkit.fabric import DeviceGeometry, RegionSpan, ResourceType, enumerate_frames, pack_far, parse_columns
from oracles import crc32_bitwise

GEOM = DeviceGeometry(2, 2, parse_columns("IOB:1,CLB:9,BRAM:2,CLB:9,BRAM:2,DSP:1,CLB:9,BRAM:2,GCLK:1"))
SLOT = RegionSpan(0, 0, 1, 11)


def words(data: bytes) -> list[int]:
    return list(struct.unpack(f">{len(data) // 4}I", data))


def test_minimal_structure():
    bs = bitgen(GEOM, RegionSpan(0, 0, 1, 1), 0)
    kinds = [type(p) for p in bs.packets]
    assert kinds == [WriteFar, WriteFdri, WriteCrc, Desync]
    assert bs.packets[0].word == pack_far(enumerate_frames(GEOM, RegionSpan(0, 0, 1, 1))[0])
    assert bs.packets[1].frame_count == 36
    data = serialize(bs)
    assert len(data) // 4 == 36 * 41 + packet_overhead_words([ResourceType.CLB])
    assert parse(data) == bs


def test_slot_structure():
    bs = bitgen(GEOM, SLOT, 0)
    assert len(bs.far_words) == 11
    assert bs.frame_count == 384 == len(enumerate_frames(GEOM, SLOT))
    assert bs.column_frame_counts() == [36] * 9 + [30] * 2


def test_header_words():
    w = words(serialize(bitgen(GEOM, SLOT, 3)))
    assert w[:8] == [0xFFFFFFFF] * 8 and w[8] == 0xAA995566
    # FAR write header: type 1, write, register 1, one word
    assert w[9] == (1 << 29) | (2 << 27) | (1 << 13) | 1
    assert w[11] == (1 << 29) | (2 << 27) | (2 << 13) | 36 * 41
    assert w[-2:] == [(1 << 29) | (2 << 27) | (4 << 13) | 1, 0x0D]


def test_seeds_change_payload_only():
    a, b = bitgen(GEOM, SLOT, 1), bitgen(GEOM, SLOT, 2)
    assert [type(p) for p in a.packets] == [type(p) for p in b.packets]
    assert a.far_words == b.far_words
    assert a.packets[1].data != b.packets[1].data
    assert bitgen(GEOM, SLOT, 1) == a


def test_payload_is_location_tagged():
    a = bitgen(GEOM, RegionSpan(0, 0, 1, 11), 0)
    b = bitgen(GEOM, RegionSpan(0, 0, 12, 11), 0)
    assert a.packets[1].data != b.packets[1].data


def test_type2_header_for_long_columns():
    span = RegionSpan(1, 1, 0, 2)  # IOB column: 54 * 41 = 2214 words
    bs = bitgen(GEOM, span, 9)
    w = words(serialize(bs))
    assert w[11] == (1 << 29) | (2 << 27) | (2 << 13) | 0
    assert w[12] == (2 << 29) | (2 << 27) | 2214
    assert parse(serialize(bs)) == bs
    assert len(serialize(bs)) == bitstream_size(SizeModel(), span, GEOM)


def test_empty_body_rejected():
    data = serialize(PartialBitstream(SLOT, []))
    with pytest.raises(InvalidBitstream, match="no CRC"):
        parse(data)


def test_corrupted_sync():
    data = bytearray(serialize(bitgen(GEOM, SLOT)))
    data[35] ^= 0x01
    with pytest.raises(MissingSync):
        parse(bytes(data))


def test_payload_flip_detected():
    data = bytearray(serialize(bitgen(GEOM, SLOT)))
    data[4 * 13 + 7] ^= 0x20
    with pytest.raises(CrcMismatch) as info:
        parse(bytes(data))
    assert info.value.expected != info.value.found


def test_truncated_stream():
    data = serialize(bitgen(GEOM, SLOT))
    with pytest.raises(TruncatedStream):
        parse(data[:-8])
    with pytest.raises(TruncatedStream):
        parse(data[:20])
    with pytest.raises(TruncatedStream):
        parse(data[:-3])


def test_unknown_register():
    data = bytearray(serialize(bitgen(GEOM, RegionSpan(0, 0, 1, 1))))
    struct.pack_into(">I", data, 36, (1 << 29) | (2 << 27) | (7 << 13) | 1)
    with pytest.raises(UnknownRegister):
        parse(bytes(data))


def test_bad_word_count():
    with pytest.raises(BadWordCount):
        WriteFdri(b"\x00" * 4 * 40)
    data = bytearray(serialize(bitgen(GEOM, RegionSpan(0, 0, 1, 1))))
    struct.pack_into(">I", data, 44, (1 << 29) | (2 << 27) | (2 << 13) | 40)
    with pytest.raises(BadWordCount):
        parse(bytes(data))


def test_crc_check_value_and_empty():
    assert compute_crc(b"123456789") == 0xCBF43926 == crc32_bitwise(b"123456789")
    assert compute_crc(b"") == 0 == crc32_bitwise(b"")


@given(st.binary(max_size=200))
def test_crc_matches_bitwise_oracle(data):
    assert compute_crc(data) == crc32_bitwise(data)


def test_bitgen_crc_covers_body():
    bs = bitgen(GEOM, RegionSpan(0, 0, 10, 3), 5)
    data = serialize(bs)
    crc_header_offset = len(data) - 16
    assert bs.crc == crc32_bitwise(data[36:crc_header_offset])


spans = st.builds(
    lambda half, row, start, count: RegionSpan(half, row, start, min(count, GEOM.n_columns - start)),
    st.integers(0, 1), st.integers(0, 1), st.integers(0, GEOM.n_columns - 1), st.integers(1, 6),
)


@settings(max_examples=60, deadline=None)
@given(spans, st.integers(0, 2**32 - 1))
def test_round_trip(span, seed):
    bs = bitgen(GEOM, span, seed)
    data = serialize(bs)
    back = parse(data)
    assert back == bs
    assert serialize(back) == data
    check_against(back, GEOM)
    assert back.frame_count == len(enumerate_frames(GEOM, span))


def test_check_against_rejects_foreign_layout():
    bs = bitgen(GEOM, RegionSpan(0, 0, 1, 11))
    other = DeviceGeometry(2, 2, parse_columns("IOB:1,CLB:11,BRAM:30"))
    with pytest.raises(InvalidBitstream):
        check_against(bs, other)


def test_size_model_defaults_equal_serialized_length():
    for span in (SLOT, RegionSpan(0, 0, 1, 22), RegionSpan(1, 0, 0, 5)):
        assert bitstream_size(SizeModel(), span, GEOM) == len(serialize(bitgen(GEOM, span)))


def test_size_model_explicit_overhead():
    size = bitstream_size(SizeModel(overhead_words=100), SLOT, GEOM)
    assert size == 384 * 41 * 4 + 100 * 4
    with_content = bitstream_size(SizeModel(overhead_words=0, content_words_per_bram_column=10), SLOT, GEOM)
    assert with_content == 384 * FRAME_BYTES + 2 * 10 * 4


def test_size_linear_in_identical_slots():
    geom = DeviceGeometry(1, 0, parse_columns("CLB:9,BRAM:2") * 3)
    model = SizeModel(overhead_words=0)
    sizes = [bitstream_size(model, RegionSpan(0, 0, 0, 11 * k), geom) for k in (1, 2, 3)]
    assert sizes[1] == 2 * sizes[0] and sizes[2] == 3 * sizes[0]


def test_size_override():
    model = SizeModel(overrides={"CSD_8": 112_000})
    assert bitstream_size(model, SLOT, GEOM, "CSD_8") == 112_000
    assert bitstream_size(model, SLOT, GEOM, "other") == len(serialize(bitgen(GEOM, SLOT)))
    with pytest.raises(SizeModelError):
        bitstream_size(SizeModel(overrides={"tiny": 100}), SLOT, GEOM, "tiny")


def test_frames_view():
    bs = bitgen(GEOM, SLOT, 0)
    frames = bs.packets[1].frames()
    assert frames.shape == (36, 41)
    assert int(frames[0, 0]) == struct.unpack(">I", bs.packets[1].data[:4])[0]
    assert int(frames[35, 40]) == struct.unpack(">I", bs.packets[1].data[-4:])[0]
