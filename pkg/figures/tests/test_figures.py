"""Unit tests for chart families, filters, sidecars, and the CLI."""

import pandas as pd
import pytest

from vmauction_figures import (
    FAMILIES,
    GROUP_ORDER,
    ChartSpec,
    EmptySelectionError,
    FigureError,
    MissingColumnsError,
    load_frame,
    provisioning_group,
    render,
    render_all,
)
from vmauction_figures.cli import main

COLUMNS = [
    "setting_id", "k", "supply_pct_1", "supply_pct_2", "rp_level", "q", "n",
    "util_1", "util_2", "util_avg", "revenue", "buyer_utility",
    "allocated_value", "cost_run", "cost_idle", "total_cost",
    "seller_utility", "ratio_mkp", "ratio_mkp_rp", "t_mech_ms", "t_mkp_ms",
    "replications", "seed",
]

# Three supply mixes (one per provisioning group) by three reserve levels,
# with utilization declining in the reserve level.
MIXES = [(50.0, 50.0), (100.0, 100.0), (125.0, 150.0)]
RP_LEVELS = [0.0, 0.3, 0.6]


def base_rows(**overrides) -> list[dict]:
    rows = []
    sid = 0
    for mi, (p1, p2) in enumerate(MIXES):
        for ri, rp in enumerate(RP_LEVELS):
            util = 0.9 - 0.2 * ri - 0.1 * mi
            row = {
                "setting_id": sid, "k": 2, "supply_pct_1": p1, "supply_pct_2": p2,
                "rp_level": rp, "q": 1.0, "n": 20, "util_1": util, "util_2": util,
                "util_avg": util, "revenue": 10.0 + mi - ri,
                "buyer_utility": 5.0 - ri, "allocated_value": 15.0 + mi - 2 * ri,
                "cost_run": 0.125, "cost_idle": 0.0625, "total_cost": 2.0,
                "seller_utility": 8.0 + mi - ri, "ratio_mkp": 0.9 - 0.05 * ri,
                "ratio_mkp_rp": 0.95 - 0.05 * ri, "t_mech_ms": 1.0 + mi,
                "t_mkp_ms": 5.0 + mi, "replications": 3, "seed": 7,
            }
            row.update(overrides)
            rows.append(row)
            sid += 1
    return rows


def write_grid_csv(path, rows, columns=COLUMNS):
    frame = pd.DataFrame(rows)[list(columns)]
    frame.to_csv(path, index=False)
    return str(path)


@pytest.fixture()
def grid_csv(tmp_path):
    return write_grid_csv(tmp_path / "grid.csv", base_rows())


class TestSpecAndGrouping:
    def test_seven_families(self):
        assert len(FAMILIES) == 7
        assert FAMILIES[0] == "utilization" and FAMILIES[-1] == "timing"

    def test_unknown_family_rejected(self):
        with pytest.raises(FigureError, match="unknown chart family"):
            ChartSpec(family="pie")

    def test_bad_rp_range_rejected(self):
        with pytest.raises(FigureError, match="rp_min"):
            ChartSpec(family="revenue", rp_min=0.5, rp_max=0.1)

    def test_provisioning_groups(self):
        assert provisioning_group((50, 75)) == "UP"
        assert provisioning_group((100, 100)) == "EP"
        assert provisioning_group((125, 150)) == "OP"
        assert provisioning_group((50, 150)) == "mixed"
        assert provisioning_group((100, 125)) == "mixed"


class TestLoadingAndErrors:
    def test_combines_matching_csvs(self, tmp_path):
        a = write_grid_csv(tmp_path / "a.csv", base_rows())
        b = write_grid_csv(tmp_path / "b.csv", base_rows(n=40))
        df = load_frame([a, b])
        assert len(df) == 2 * len(base_rows())
        assert sorted(df["n"].unique()) == [20, 40]

    def test_mismatched_columns_rejected(self, tmp_path):
        a = write_grid_csv(tmp_path / "a.csv", base_rows())
        b = write_grid_csv(tmp_path / "b.csv", base_rows(), columns=COLUMNS[:-1])
        with pytest.raises(FigureError, match="different columns"):
            load_frame([b, a])

    def test_missing_columns_are_named(self, tmp_path):
        partial = write_grid_csv(
            tmp_path / "partial.csv", base_rows(), columns=[c for c in COLUMNS if c != "util_avg"]
        )
        with pytest.raises(MissingColumnsError, match="util_avg"):
            render(partial, ChartSpec(family="utilization"), str(tmp_path))

    def test_empty_selection_is_an_error(self, tmp_path, grid_csv):
        with pytest.raises(EmptySelectionError, match="selects no rows"):
            render(grid_csv, ChartSpec(family="revenue", rp_min=0.9), str(tmp_path))

    def test_filters_narrow_rows(self, tmp_path, grid_csv):
        _, sidecar = render(
            grid_csv,
            ChartSpec(family="utilization", supply_pcts=(50.0, 50.0), rp_max=0.3),
            str(tmp_path),
        )
        table = pd.read_csv(sidecar)
        assert set(table["supply_mix"]) == {"50/50"}
        assert table["rp_level"].max() == 0.3

    def test_k_filter_can_empty_the_selection(self, tmp_path, grid_csv):
        with pytest.raises(EmptySelectionError):
            render(grid_csv, ChartSpec(family="utilization", k=3), str(tmp_path))


class TestRendering:
    def test_utilization_image_and_sidecar(self, tmp_path, grid_csv):
        image, sidecar = render(grid_csv, ChartSpec(family="utilization"), str(tmp_path))
        assert image.endswith("utilization.png") and sidecar.endswith("utilization.csv")
        assert (tmp_path / "utilization.png").stat().st_size > 1000
        table = pd.read_csv(sidecar)
        assert list(table.columns) == ["supply_mix", "rp_level", "util_avg"]
        for _, series in table.groupby("supply_mix"):
            utils = series.sort_values("rp_level")["util_avg"].tolist()
            assert all(a >= b for a, b in zip(utils, utils[1:]))

    def test_sidecars_are_deterministic(self, tmp_path, grid_csv):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        out_a.mkdir(), out_b.mkdir()
        for family in FAMILIES:
            _, side_a = render(grid_csv, ChartSpec(family=family), str(out_a))
            _, side_b = render(grid_csv, ChartSpec(family=family), str(out_b))
            assert open(side_a, "rb").read() == open(side_b, "rb").read(), family

    def test_revenue_sidecar_grouped_by_provisioning(self, tmp_path, grid_csv):
        _, sidecar = render(grid_csv, ChartSpec(family="revenue"), str(tmp_path))
        table = pd.read_csv(sidecar)
        assert list(table.columns) == ["group", "rp_level", "revenue"]
        assert list(dict.fromkeys(table["group"])) == ["UP", "EP", "OP"]
        up = table[(table["group"] == "UP") & (table["rp_level"] == 0.0)]
        assert up["revenue"].iloc[0] == pytest.approx(10.0)

    def test_cost_family_one_line_per_cost_model(self, tmp_path):
        rows = base_rows() + base_rows(cost_idle=0.125, total_cost=3.0)
        path = write_grid_csv(tmp_path / "grid.csv", rows)
        _, sidecar = render(path, ChartSpec(family="cost"), str(tmp_path))
        table = pd.read_csv(sidecar)
        assert sorted(table["cost_idle"].unique()) == [0.0625, 0.125]
        cheap = table[table["cost_idle"] == 0.0625]["total_cost"]
        dear = table[table["cost_idle"] == 0.125]["total_cost"]
        assert cheap.max() < dear.min()

    def test_welfare_ratio_needs_recorded_ratios(self, tmp_path):
        rows = base_rows(ratio_mkp=None, ratio_mkp_rp=None)
        path = write_grid_csv(tmp_path / "grid.csv", rows)
        with pytest.raises(EmptySelectionError, match="without oracles"):
            render(path, ChartSpec(family="welfare_ratio"), str(tmp_path))

    def test_timing_needs_positive_timings(self, tmp_path):
        rows = base_rows(t_mech_ms=0.0, t_mkp_ms=0.0)
        path = write_grid_csv(tmp_path / "grid.csv", rows)
        with pytest.raises(EmptySelectionError, match="timings disabled"):
            render(path, ChartSpec(family="timing"), str(tmp_path))

    def test_render_all_skips_absent_measurements(self, tmp_path, grid_csv):
        full = render_all(grid_csv, str(tmp_path))
        assert len(full) == 2 * len(FAMILIES)

        rows = base_rows(ratio_mkp=None, ratio_mkp_rp=None, t_mech_ms=0.0, t_mkp_ms=0.0)
        partial_csv = write_grid_csv(tmp_path / "partial.csv", rows)
        partial = render_all(partial_csv, str(tmp_path))
        assert len(partial) == 2 * (len(FAMILIES) - 2)

    def test_out_path_override(self, tmp_path, grid_csv):
        target = tmp_path / "custom"
        target.mkdir()
        image, sidecar = render(
            grid_csv,
            ChartSpec(family="timing", out_path=str(target / "speed.png")),
            str(tmp_path),
        )
        assert image == str(target / "speed.png")
        assert sidecar == str(target / "speed.csv")
        assert (target / "speed.png").exists() and (target / "speed.csv").exists()


class TestCli:
    def test_single_family(self, tmp_path, grid_csv, capsys):
        rc = main(["--csv", grid_csv, "--family", "utilization", "--out", str(tmp_path)])
        assert rc == 0
        printed = capsys.readouterr().out.strip().splitlines()
        assert len(printed) == 2
        assert printed[0].endswith("utilization.png")

    def test_all_families_with_partial_data(self, tmp_path, capsys):
        rows = base_rows(t_mech_ms=0.0, t_mkp_ms=0.0)
        path = write_grid_csv(tmp_path / "grid.csv", rows)
        rc = main(["--csv", path, "--out", str(tmp_path)])
        assert rc == 0
        captured = capsys.readouterr()
        assert "skipping timing" in captured.err
        assert len(captured.out.strip().splitlines()) == 2 * (len(FAMILIES) - 1)

    def test_explicit_family_with_no_data_fails(self, tmp_path, capsys):
        rows = base_rows(t_mech_ms=0.0, t_mkp_ms=0.0)
        path = write_grid_csv(tmp_path / "grid.csv", rows)
        rc = main(["--csv", path, "--family", "timing", "--out", str(tmp_path)])
        assert rc == 2
        assert "error:" in capsys.readouterr().err

    def test_schema_mismatch_fails(self, tmp_path, capsys):
        path = write_grid_csv(tmp_path / "odd.csv", base_rows(), columns=COLUMNS[:5])
        rc = main(["--csv", path, "--out", str(tmp_path)])
        assert rc == 2
        assert "missing columns" in capsys.readouterr().err

    def test_combined_csvs(self, tmp_path, grid_csv, capsys):
        other = write_grid_csv(tmp_path / "n40.csv", base_rows(n=40, t_mech_ms=2.0, t_mkp_ms=20.0))
        rc = main(
            ["--csv", grid_csv, "--csv", other, "--family", "timing", "--out", str(tmp_path)]
        )
        assert rc == 0
        table = pd.read_csv(tmp_path / "timing.csv")
        assert sorted(table["n"]) == [20, 40]
