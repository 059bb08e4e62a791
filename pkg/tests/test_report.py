from dprkit.report import (
    Table,
    locations_table,
    memory_table,
    report_bundle,
    time_table,
    utilization_cells,
)


def test_table_rendering():
    t = Table("demo.v1", ["a", "bb"], [["1", "22"], ["333", "4"]])
    assert t.to_csv().splitlines() == ["#schema=demo.v1", "a,bb", "1,22", "333,4"]
    text = t.to_text().splitlines()
    assert text[0] == "a    bb" and text[2] == "1    22"


def test_locations(ref_cfg, ref_plans):
    rows = {r[0]: r for r in locations_table(ref_cfg, ref_plans).rows}
    assert [rows[m][4] for m in ("CSD_8", "CSD_16", "CSD_32")] == ["8", "5", "2"]
    assert rows["CSD_16"][1:4] == ["2", "2", "1"]


def test_memory(ref_cfg, ref_plans):
    rows = {r[0]: r for r in memory_table(ref_cfg, ref_plans).rows}
    assert [(rows[m][4], rows[m][7], rows[m][-1]) for m in ("CSD_8", "CSD_16", "CSD_32")] == [
        ("896", "87.5", ""), ("1120", "80", ""), ("672", "50", ""),
    ]


def test_times(ref_cfg, ref_plans):
    rows = time_table(ref_cfg, ref_plans).rows
    assert [r[4:7] for r in rows] == [["0.84", "0.28", "66"], ["0.84", "0.56", "33"], ["0.84", "0.84", "0"]]
    assert all(r[-1] == "" for r in rows)


def test_utilization_flags(ref_cfg, ref_plans):
    cells = utilization_cells(ref_cfg, ref_plans)
    flagged = {(c.region, c.module, c.mode, c.metric) for c in cells if c.flag.startswith("inconsistent")}
    assert flagged == {(r, "CSD_8", "with", "ra_clb") for r in ("PRR1", "PRR2", "PRR3")}
    assert all(c.flag == "" or c.flag.startswith(("inconsistent", "published")) for c in cells)


def test_bundle_deterministic(ref_cfg):
    a = [t.to_csv() for t in report_bundle(ref_cfg)]
    assert a == [t.to_csv() for t in report_bundle(ref_cfg)]
    assert all(s.startswith("#schema=") for s in a)
