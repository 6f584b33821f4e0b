"""Chart families over the experiment-grid CSV.

Each family renders one image plus a sidecar CSV holding the exact numbers
that were plotted, so downstream checks read the sidecar instead of pixels.
Rendering is a pure function of the input CSV and the chart spec: the same
inputs always produce byte-identical sidecars.

Several CSVs may be combined into one rendering (useful for the timing
family, where each grid run records a single market size ``n``); they must
share a schema, i.e. come from grids with the same number of VM types.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

FAMILIES = (
    "utilization",
    "revenue",
    "buyer_utility",
    "cost",
    "seller_utility",
    "welfare_ratio",
    "timing",
)

#: Stable ordering for provisioning groups in legends and sidecars.
GROUP_ORDER = ("UP", "EP", "OP", "mixed")


class FigureError(Exception):
    """Anything that prevents a chart from being rendered."""


class MissingColumnsError(FigureError):
    """The CSV lacks columns this family needs (schema mismatch)."""


class EmptySelectionError(FigureError):
    """Filters (or absent measurements) leave nothing to plot."""


@dataclass(frozen=True)
class ChartSpec:
    """One chart request: a family plus row filters.

    Filters narrow the CSV before plotting: an exact ``k``, an exact supply
    combination, a reserve-level range, and exact cost parameters.  An empty
    selection is an error — no blank images.
    """

    family: str
    k: int | None = None
    supply_pcts: tuple[float, ...] | None = None
    rp_min: float | None = None
    rp_max: float | None = None
    cost_run: float | None = None
    cost_idle: float | None = None
    out_path: str | None = None

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise FigureError(
                f"unknown chart family {self.family!r}; expected one of {', '.join(FAMILIES)}"
            )
        if self.rp_min is not None and self.rp_max is not None and self.rp_min > self.rp_max:
            raise FigureError("rp_min must not exceed rp_max")


# ---------------------------------------------------------------------------
# Loading and filtering

BASE_COLUMNS = ["setting_id", "k", "rp_level", "q", "n", "replications", "seed"]

FAMILY_COLUMNS = {
    "utilization": ["util_avg"],
    "revenue": ["revenue"],
    "buyer_utility": ["buyer_utility"],
    "cost": ["total_cost", "cost_run", "cost_idle"],
    "seller_utility": ["seller_utility", "cost_run", "cost_idle"],
    "welfare_ratio": ["ratio_mkp", "ratio_mkp_rp"],
    "timing": ["t_mech_ms", "t_mkp_ms"],
}


def load_frame(csv_paths: str | Sequence[str]) -> pd.DataFrame:
    """Read one or more grid CSVs into a single frame.

    Raises:
        FigureError: if a file cannot be parsed or the files disagree on
            their column layout (e.g. grids with different numbers of types).
    """
    if isinstance(csv_paths, (str, os.PathLike)):
        csv_paths = [csv_paths]
    if not csv_paths:
        raise FigureError("at least one CSV path is required")
    frames = []
    for path in csv_paths:
        try:
            frame = pd.read_csv(path)
        except (OSError, ValueError, pd.errors.ParserError) as exc:
            raise FigureError(f"{path}: {exc}") from exc
        frames.append((path, frame))
    first_path, first = frames[0]
    for path, frame in frames[1:]:
        if list(frame.columns) != list(first.columns):
            raise FigureError(
                f"{path} and {first_path} have different columns and cannot be combined"
            )
    return pd.concat([frame for _, frame in frames], ignore_index=True)


def supply_columns(df: pd.DataFrame) -> list[str]:
    cols = [c for c in df.columns if c.startswith("supply_pct_")]
    return sorted(cols, key=lambda c: int(c.rsplit("_", 1)[1]))


def supply_mix(row: pd.Series, cols: Sequence[str]) -> str:
    return "/".join(f"{row[c]:g}" for c in cols)


def provisioning_group(pcts: Iterable[float]) -> str:
    """UP/EP/OP when supply is uniformly below/at/above demand, else mixed."""
    pcts = list(pcts)
    if all(p < 100 for p in pcts):
        return "UP"
    if all(p == 100 for p in pcts):
        return "EP"
    if all(p > 100 for p in pcts):
        return "OP"
    return "mixed"


def _require_columns(df: pd.DataFrame, spec: ChartSpec) -> None:
    needed = BASE_COLUMNS + FAMILY_COLUMNS[spec.family]
    if spec.family in ("utilization", "revenue", "buyer_utility"):
        if not supply_columns(df):
            raise MissingColumnsError(
                f"CSV is missing columns required by {spec.family}: supply_pct_1..k"
            )
    missing = [c for c in needed if c not in df.columns]
    if missing:
        raise MissingColumnsError(
            f"CSV is missing columns required by {spec.family}: {', '.join(missing)}"
        )


def apply_filters(df: pd.DataFrame, spec: ChartSpec) -> pd.DataFrame:
    """Narrow the frame to the spec's selection; empty selections are errors."""
    out = df
    if spec.k is not None:
        out = out[out["k"] == spec.k]
    if spec.supply_pcts is not None:
        cols = supply_columns(out)
        if len(cols) != len(spec.supply_pcts):
            raise FigureError(
                f"supply filter has {len(spec.supply_pcts)} entries, CSV has {len(cols)} types"
            )
        for col, pct in zip(cols, spec.supply_pcts):
            out = out[np.isclose(out[col], pct)]
    if spec.rp_min is not None:
        out = out[out["rp_level"] >= spec.rp_min - 1e-12]
    if spec.rp_max is not None:
        out = out[out["rp_level"] <= spec.rp_max + 1e-12]
    if spec.cost_run is not None:
        out = out[np.isclose(out["cost_run"], spec.cost_run)]
    if spec.cost_idle is not None:
        out = out[np.isclose(out["cost_idle"], spec.cost_idle)]
    if out.empty:
        raise EmptySelectionError(
            f"{spec.family}: the filter selects no rows from the CSV"
        )
    return out


# ---------------------------------------------------------------------------
# Family renderers.  Each returns (sidecar frame, plot callback); the sidecar
# is the single source for both the lines on the axes and the emitted CSV.


def _lines_by(
    df: pd.DataFrame, key: str, value: str, order: Sequence[str] | None = None
) -> pd.DataFrame:
    table = df.groupby([key, "rp_level"], as_index=False)[value].mean()
    if order is not None:
        table["_rank"] = table[key].map({g: i for i, g in enumerate(order)})
        table = table.sort_values(["_rank", "rp_level"]).drop(columns="_rank")
    else:
        table = table.sort_values([key, "rp_level"])
    return table.reset_index(drop=True)


def _plot_lines(ax: plt.Axes, table: pd.DataFrame, key: str, value: str, ylabel: str) -> None:
    for label, group in table.groupby(key, sort=False):
        ax.plot(group["rp_level"], group[value], marker="o", label=str(label))
    ax.set_xlabel("reserve level")
    ax.set_ylabel(ylabel)
    ax.legend(title=key, fontsize="small")
    ax.grid(True, alpha=0.3)


def _family_utilization(df: pd.DataFrame) -> tuple[pd.DataFrame, Callable]:
    cols = supply_columns(df)
    work = df.copy()
    work["supply_mix"] = work.apply(lambda r: supply_mix(r, cols), axis=1)
    table = _lines_by(work, "supply_mix", "util_avg")

    def draw(ax: plt.Axes) -> None:
        _plot_lines(ax, table, "supply_mix", "util_avg", "average utilization")
        ax.set_title("utilization by supply mix")

    return table, draw


def _grouped_family(df: pd.DataFrame, value: str, title: str) -> tuple[pd.DataFrame, Callable]:
    cols = supply_columns(df)
    work = df.copy()
    work["group"] = work[cols].apply(provisioning_group, axis=1)
    table = _lines_by(work, "group", value, order=GROUP_ORDER)

    def draw(ax: plt.Axes) -> None:
        _plot_lines(ax, table, "group", value, value.replace("_", " "))
        ax.set_title(title)

    return table, draw


def _family_revenue(df: pd.DataFrame) -> tuple[pd.DataFrame, Callable]:
    return _grouped_family(df, "revenue", "revenue by provisioning group")


def _family_buyer_utility(df: pd.DataFrame) -> tuple[pd.DataFrame, Callable]:
    return _grouped_family(df, "buyer_utility", "buyer utility by provisioning group")


def _cost_family(df: pd.DataFrame, value: str, title: str) -> tuple[pd.DataFrame, Callable]:
    table = (
        df.groupby(["cost_run", "cost_idle", "rp_level"], as_index=False)[value]
        .mean()
        .sort_values(["cost_run", "cost_idle", "rp_level"])
        .reset_index(drop=True)
    )

    def draw(ax: plt.Axes) -> None:
        for (run, idle), group in table.groupby(["cost_run", "cost_idle"], sort=False):
            label = f"run={run:g} idle={idle:g}"
            ax.plot(group["rp_level"], group[value], marker="o", label=label)
        ax.set_xlabel("reserve level")
        ax.set_ylabel(value.replace("_", " "))
        ax.legend(title="cost model", fontsize="small")
        ax.grid(True, alpha=0.3)
        ax.set_title(title)

    return table, draw


def _family_cost(df: pd.DataFrame) -> tuple[pd.DataFrame, Callable]:
    return _cost_family(df, "total_cost", "total cost by cost model")


def _family_seller_utility(df: pd.DataFrame) -> tuple[pd.DataFrame, Callable]:
    return _cost_family(df, "seller_utility", "seller utility by cost model")


def _family_welfare_ratio(df: pd.DataFrame) -> tuple[pd.DataFrame, Callable]:
    work = df.dropna(subset=["ratio_mkp", "ratio_mkp_rp"])
    if work.empty:
        raise EmptySelectionError(
            "welfare_ratio: no welfare ratios recorded (grid ran without oracles?)"
        )
    table = (
        work.groupby("rp_level", as_index=False)[["ratio_mkp", "ratio_mkp_rp"]]
        .mean()
        .sort_values("rp_level")
        .reset_index(drop=True)
    )

    def draw(ax: plt.Axes) -> None:
        ax.plot(table["rp_level"], table["ratio_mkp"], marker="o", label="vs unfiltered optimum")
        ax.plot(
            table["rp_level"],
            table["ratio_mkp_rp"],
            marker="s",
            label="vs reserve-filtered optimum",
        )
        ax.set_xlabel("reserve level")
        ax.set_ylabel("greedy welfare / exact welfare")
        ax.set_ylim(0.0, 1.05)
        ax.legend(fontsize="small")
        ax.grid(True, alpha=0.3)
        ax.set_title("welfare closeness")

    return table, draw


def _family_timing(df: pd.DataFrame) -> tuple[pd.DataFrame, Callable]:
    work = df[df["t_mech_ms"] > 0].dropna(subset=["t_mkp_ms"])
    if work.empty:
        raise EmptySelectionError(
            "timing: no positive timings recorded (grid ran with timings disabled?)"
        )
    table = (
        work.groupby("n", as_index=False)[["t_mech_ms", "t_mkp_ms"]]
        .mean()
        .sort_values("n")
        .reset_index(drop=True)
    )

    def draw(ax: plt.Axes) -> None:
        ax.plot(table["n"], table["t_mech_ms"], marker="o", label="greedy mechanism")
        ax.plot(table["n"], table["t_mkp_ms"], marker="s", label="exact oracle")
        ax.set_xlabel("market size n")
        ax.set_ylabel("milliseconds")
        ax.set_yscale("log")
        ax.legend(fontsize="small")
        ax.grid(True, alpha=0.3, which="both")
        ax.set_title("runtime by market size")

    return table, draw


_RENDERERS: dict[str, Callable[[pd.DataFrame], tuple[pd.DataFrame, Callable]]] = {
    "utilization": _family_utilization,
    "revenue": _family_revenue,
    "buyer_utility": _family_buyer_utility,
    "cost": _family_cost,
    "seller_utility": _family_seller_utility,
    "welfare_ratio": _family_welfare_ratio,
    "timing": _family_timing,
}


# ---------------------------------------------------------------------------
# Entry points


def render(
    csv_paths: str | Sequence[str], spec: ChartSpec, out_dir: str = "."
) -> tuple[str, str]:
    """Render one family: returns ``(image_path, sidecar_path)``.

    The sidecar CSV holds exactly the numbers on the axes, sorted by the
    line key and x value, floats fixed to six decimals.

    Raises:
        MissingColumnsError: the CSV does not carry this family's columns.
        EmptySelectionError: filters (or absent measurements) select nothing.
    """
    df = load_frame(csv_paths)
    _require_columns(df, spec)
    subset = apply_filters(df, spec)
    table, draw = _RENDERERS[spec.family](subset)

    if spec.out_path is not None:
        image_path = spec.out_path
    else:
        image_path = os.path.join(out_dir, f"{spec.family}.png")
    sidecar_path = os.path.splitext(image_path)[0] + ".csv"

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    try:
        draw(ax)
        fig.tight_layout()
        fig.savefig(image_path, dpi=120)
    finally:
        plt.close(fig)
    table.to_csv(sidecar_path, index=False, float_format="%.6f")
    return image_path, sidecar_path


def render_all(
    csv_paths: str | Sequence[str],
    out_dir: str,
    families: Sequence[str] = FAMILIES,
    **filters,
) -> list[str]:
    """Render every family the CSV has data for; returns the written paths.

    Families whose measurements are absent (no oracle ratios, no timings, or
    a filter selecting nothing) are skipped; a CSV that structurally lacks a
    family's columns is still an error.
    """
    written: list[str] = []
    for family in families:
        spec = ChartSpec(family=family, **filters)
        try:
            image_path, sidecar_path = render(csv_paths, spec, out_dir)
        except EmptySelectionError:
            continue
        written.extend([image_path, sidecar_path])
    return written
