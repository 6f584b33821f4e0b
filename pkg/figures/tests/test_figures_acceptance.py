"""Acceptance: render real grid output produced by the vmauction CLI.

These tests drive the producer as a subprocess — the only coupling between
the two packages is the documented scenario-in / CSV-out interface.
"""

import json
import subprocess
import sys

import pandas as pd
import pytest

from vmauction_figures import FAMILIES, ChartSpec, render, render_all

DESK_SCENARIO = {
    "seed": 2024,
    "replications": 5,
    "n_buyers": 16,
    "k": 2,
    "supply_pcts": [50, 75, 100, 125],
    "rp_levels": [0.0, 0.2, 0.4, 0.6, 0.8],
}


def run_grid_cli(scenario: dict, directory, name: str, *extra: str) -> str:
    scenario_path = directory / f"{name}.json"
    scenario_path.write_text(json.dumps(scenario))
    out = directory / f"{name}.csv"
    proc = subprocess.run(
        [sys.executable, "-m", "vmauction.cli", "grid", str(scenario_path), "--out", str(out)]
        + list(extra),
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    return str(out)


@pytest.fixture(scope="module")
def desk_csv(tmp_path_factory):
    return run_grid_cli(DESK_SCENARIO, tmp_path_factory.mktemp("desk"), "desk")


def test_all_seven_families_render(desk_csv, tmp_path):
    import os

    paths = render_all(desk_csv, str(tmp_path))
    assert len(paths) == 2 * len(FAMILIES)
    for path in paths:
        assert os.path.getsize(path) > 0, path
    images = [p for p in paths if p.endswith(".png")]
    assert {os.path.basename(p)[: -len(".png")] for p in images} == set(FAMILIES)


def test_utilization_sidecar_monotone_in_reserve_level(desk_csv, tmp_path):
    _, sidecar = render(desk_csv, ChartSpec(family="utilization"), str(tmp_path))
    table = pd.read_csv(sidecar)
    assert not table.empty
    for mix, series in table.groupby("supply_mix"):
        utils = series.sort_values("rp_level")["util_avg"].tolist()
        assert all(a >= b for a, b in zip(utils, utils[1:])), (mix, utils)


def test_timing_sidecar_keeps_greedy_below_oracle(tmp_path_factory, tmp_path):
    # Sizes chosen above the small-market regime where the exact solver's
    # tiny tables beat the mechanism's constant factors; from ~n=100 on the
    # gap is a stable 2-7x and keeps widening.
    directory = tmp_path_factory.mktemp("sizes")
    sizes = (100, 150, 200)
    csvs = [
        run_grid_cli(
            dict(DESK_SCENARIO, n_buyers=n, replications=3, supply_pcts=[75], rp_levels=[0.0, 0.4]),
            directory,
            f"n{n}",
        )
        for n in sizes
    ]
    _, sidecar = render(csvs, ChartSpec(family="timing"), str(tmp_path))
    table = pd.read_csv(sidecar)
    assert sorted(table["n"]) == list(sizes)
    for _, row in table.iterrows():
        assert row["t_mech_ms"] < row["t_mkp_ms"], dict(row)


def test_grid_plots_flag_renders_alongside_csv(tmp_path):
    scenario = dict(DESK_SCENARIO, replications=2, supply_pcts=[50, 100])
    csv_path = run_grid_cli(scenario, tmp_path, "plotted", "--plots")
    produced = {p.name for p in tmp_path.iterdir()}
    assert "plotted.csv" in produced
    for family in FAMILIES:
        assert f"{family}.png" in produced, family
        assert f"{family}.csv" in produced, family
