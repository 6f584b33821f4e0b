"""Charts and sidecar data tables for vmauction experiment-grid CSVs."""

from .charts import (
    FAMILIES,
    GROUP_ORDER,
    ChartSpec,
    EmptySelectionError,
    FigureError,
    MissingColumnsError,
    apply_filters,
    load_frame,
    provisioning_group,
    render,
    render_all,
)

__version__ = "0.1.0"

__all__ = [
    "FAMILIES",
    "GROUP_ORDER",
    "ChartSpec",
    "FigureError",
    "MissingColumnsError",
    "EmptySelectionError",
    "load_frame",
    "apply_filters",
    "provisioning_group",
    "render",
    "render_all",
    "__version__",
]
