import struct

import pytest

from dprkit.bitstream import WriteCrc, WriteFar, bitgen, parse, serialize
from dprkit.fabric import DeviceGeometry, RegionSpan, parse_columns, unpack_far
from dprkit.relocate import (
    ANCHOR_OUT_OF_BOUNDS,
    BEL_UNAVAILABLE,
    COLUMN_SIGNATURE_MISMATCH,
    MIRROR_ROW_MISMATCH,
    ROW_EXTENT_MISMATCH,
    SPAN_WIDTH_MISMATCH,
    TARGET_OVERLAP,
    AbsolutePin,
    AbsoluteRoute,
    AnchorOutsideSpan,
    IncompatibleTarget,
    InterfaceError,
    InterfaceMap,
    MalformedSource,
    PinAnchor,
    RouteAnchor,
    check_compatibility,
    normalize_anchors,
    relocate_bitstream,
)

# slots start at columns 4 and 15, each CLB:9,BRAM:2
GEOM = DeviceGeometry(2, 2, parse_columns("IOB:1,CLB:3,CLB:9,BRAM:2,CLB:9,BRAM:2,CLB:10,BRAM:1,BRAM:1,CLB:9,GCLK:1"))
A = RegionSpan(0, 0, 4, 11)
B = RegionSpan(0, 0, 15, 11)
IFACE = InterfaceMap(
    (PinAnchor("din", 0, 0), PinAnchor("dout", 1, 5, "out")),
    (RouteAnchor("din", ((-1, 0, 3), (0, 0, 3))),),
)


def kinds(violations):
    return {v.kind for v in violations}


def test_normalize_examples():
    origin = RegionSpan(0, 0, 6, 11)
    iface = normalize_anchors([AbsolutePin("x", 7, 2)], [AbsoluteRoute("x", ((6, 0, 1), (5, 0, 1)))], origin)
    assert iface.pins == (PinAnchor("x", 1, 2),)
    assert iface.routes[0].segments == ((0, 0, 1), (-1, 0, 1))
    with pytest.raises(AnchorOutsideSpan):
        normalize_anchors([AbsolutePin("y", 30, 0)], [], origin)
    with pytest.raises(AnchorOutsideSpan):
        normalize_anchors([AbsolutePin("x", 7, 0)], [AbsoluteRoute("x", ((3, 0, 1),))], origin)


def test_normalize_idempotent():
    again = normalize_anchors(IFACE.pins, IFACE.routes, B)
    assert again == IFACE


def test_interface_invariants():
    with pytest.raises(InterfaceError):
        InterfaceMap((PinAnchor("a", 0, 0), PinAnchor("a", 1, 0)))
    with pytest.raises(InterfaceError):
        InterfaceMap((), (RouteAnchor("lonely", ((0, 0, 1),)),))
    assert InterfaceMap.from_dict(IFACE.to_dict()) == IFACE


def test_compatible_slots_same_row():
    assert check_compatibility(GEOM, A, B, IFACE) == []


def test_signature_mismatch_different_counts():
    # CLB:10,BRAM:1 at column 26
    v = check_compatibility(GEOM, A, RegionSpan(0, 0, 26, 11))
    assert kinds(v) == {COLUMN_SIGNATURE_MISMATCH}


def test_signature_mismatch_permuted_order():
    geom = DeviceGeometry(1, 0, parse_columns("CLB:2,BRAM:1,BRAM:1,CLB:2"))
    v = check_compatibility(geom, RegionSpan(0, 0, 0, 3), RegionSpan(0, 0, 3, 3))
    assert [x.kind for x in v] == [COLUMN_SIGNATURE_MISMATCH]
    assert v[0].where["offset"] == 0


def test_every_violation_kind_reachable():
    seen = set()
    seen |= kinds(check_compatibility(GEOM, A, RegionSpan(0, 0, 15, 10)))
    seen |= kinds(check_compatibility(GEOM, A, RegionSpan(0, 0, 26, 11)))
    seen |= kinds(check_compatibility(GEOM, A, B, row_extent=(1, 2)))
    seen |= kinds(check_compatibility(GEOM, A, RegionSpan(1, 1, 15, 11)))
    seen |= kinds(check_compatibility(GEOM, A, RegionSpan(0, 0, 5, 11)))
    wide_pin = InterfaceMap((PinAnchor("p", 12, 0),))
    seen |= kinds(check_compatibility(GEOM, A, B, wide_pin))
    far_route = InterfaceMap((PinAnchor("p", 0, 0),), (RouteAnchor("p", ((-30, 0, 1),)),))
    seen |= kinds(check_compatibility(GEOM, A, B, far_route))
    bram_pin = InterfaceMap((PinAnchor("p", 9, 0),))
    seen |= kinds(check_compatibility(GEOM, A, B, bram_pin))
    deep_bel = InterfaceMap((PinAnchor("p", 0, 160),))
    seen |= kinds(check_compatibility(GEOM, A, B, deep_bel))
    assert seen == {
        SPAN_WIDTH_MISMATCH, COLUMN_SIGNATURE_MISMATCH, ROW_EXTENT_MISMATCH, MIRROR_ROW_MISMATCH,
        TARGET_OVERLAP, ANCHOR_OUT_OF_BOUNDS, BEL_UNAVAILABLE,
    }


def test_violations_carry_coordinates():
    v = check_compatibility(GEOM, A, RegionSpan(0, 0, 26, 11))[0]
    assert "column" in v.detail and v.where["target_col"] >= 26


def far_diff(before, after):
    return [(unpack_far(x), unpack_far(y)) for x, y in zip(before.far_words, after.far_words)]


def test_relocate_shifts_majors():
    bs = bitgen(GEOM, A, 11)
    moved = relocate_bitstream(bs, GEOM, B, IFACE)
    for old, new in far_diff(bs, moved):
        assert new.major == old.major + 11
        assert (new.minor, new.half, new.row, new.block_type) == (old.minor, old.half, old.row, old.block_type)
    assert moved.span == B
    assert [p.data for p in moved.packets if hasattr(p, "data")] == [p.data for p in bs.packets if hasattr(p, "data")]
    assert parse(serialize(moved)) == moved


def test_identity_relocation():
    bs = bitgen(GEOM, A, 2)
    assert serialize(relocate_bitstream(bs, GEOM, A)) == serialize(bs)


def test_half_flip():
    bs = bitgen(GEOM, A, 4)
    moved = relocate_bitstream(bs, GEOM, RegionSpan(1, 0, 4, 11))
    for old, new in zip(bs.far_words, moved.far_words):
        assert old ^ new == 1 << 20


def test_round_trip_back():
    bs = bitgen(GEOM, A, 8)
    there = relocate_bitstream(bs, GEOM, RegionSpan(0, 1, 15, 11), IFACE)
    back = relocate_bitstream(there, GEOM, A, IFACE)
    assert serialize(back) == serialize(bs)


def test_only_far_and_crc_words_change():
    bs = bitgen(GEOM, A, 8)
    before = serialize(bs)
    after = serialize(relocate_bitstream(bs, GEOM, RegionSpan(0, 1, 15, 11)))
    wa = struct.unpack(f">{len(before) // 4}I", before)
    wb = struct.unpack(f">{len(after) // 4}I", after)
    changed = {i for i, (x, y) in enumerate(zip(wa, wb)) if x != y}
    allowed, pos = set(), 9
    for p in bs.packets:
        if isinstance(p, (WriteFar, WriteCrc)):
            allowed.add(pos + 1)
            pos += 2
        elif hasattr(p, "data"):
            pos += 1 + len(p.data) // 4
        else:
            pos += 2
    assert changed <= allowed
    assert len(changed) == 12


def test_incompatible_target_refused():
    bs = bitgen(GEOM, A, 0)
    with pytest.raises(IncompatibleTarget) as info:
        relocate_bitstream(bs, GEOM, RegionSpan(0, 0, 26, 11))
    assert kinds(info.value.violations) == {COLUMN_SIGNATURE_MISMATCH}
    with pytest.raises(IncompatibleTarget):
        relocate_bitstream(bs, GEOM, RegionSpan(0, 0, 5, 11))


def test_malformed_source():
    bs = bitgen(GEOM, A, 0)
    other = DeviceGeometry(2, 2, parse_columns("CLB:40"))
    with pytest.raises(MalformedSource):
        relocate_bitstream(bs, other, RegionSpan(0, 0, 20, 11))
