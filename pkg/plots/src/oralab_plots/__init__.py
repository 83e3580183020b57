"""Figure rendering for oralab experiment CSVs."""

from .figures import (
    FigureSpec,
    SchemaError,
    SummaryMismatchWarning,
    load_rows,
    preset_spec,
    render,
    verify_summaries,
)

__all__ = [
    "FigureSpec",
    "SchemaError",
    "SummaryMismatchWarning",
    "load_rows",
    "preset_spec",
    "render",
    "verify_summaries",
]
