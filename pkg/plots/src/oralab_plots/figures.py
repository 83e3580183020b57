"""Render audit-sweep figures from result CSVs.

The input format is the sweep CSV emitted by the oralab experiment runner:
one row per replicate plus ``mean``/``sem`` summary rows per sweep value,
with the columns

    experiment_id, sweep_name, sweep_value, rep, seed, v, r,
    estimation, bound, accuracy

Plots are strictly downstream of the CSV: the only computation here is
re-deriving each mean and standard error from the replicate rows to verify
the stored summary rows (a mismatch beyond 1e-9 raises a warning), and the
rendered series come from the summaries themselves.
"""

from __future__ import annotations

import csv
import dataclasses
import math
import warnings
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

REQUIRED_COLUMNS = (
    "experiment_id",
    "sweep_name",
    "sweep_value",
    "rep",
    "seed",
    "v",
    "r",
    "estimation",
    "bound",
    "accuracy",
)

NUMERIC_COLUMNS = ("v", "r", "estimation", "bound", "accuracy")

#: Tolerance for the stored-vs-recomputed summary comparison.
SUMMARY_TOL = 1e-9


class SchemaError(ValueError):
    """The CSV does not conform to the result-row schema."""


class SummaryMismatchWarning(UserWarning):
    """A stored mean/sem summary disagrees with its replicate rows."""


@dataclasses.dataclass(frozen=True)
class FigureSpec:
    """What to draw: which columns go on the axes and where to save."""

    csv_path: Path
    x_column: str
    series_columns: tuple[str, ...]
    output_path: Path
    shading_column: str = "sem"
    title: str = ""
    x_label: str = ""

    def __post_init__(self) -> None:
        for column in self.series_columns:
            if column not in NUMERIC_COLUMNS:
                raise SchemaError(f"unknown series column {column!r}")


@dataclasses.dataclass(frozen=True)
class SeriesPoint:
    x: float
    mean: float
    sem: float


def _parse_cell(value: str) -> float | None:
    if value == "":
        return None
    return float(value)


def load_rows(csv_path: Path | str) -> list[dict]:
    """Read and type a result CSV, validating the schema."""
    csv_path = Path(csv_path)
    with csv_path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for column in REQUIRED_COLUMNS:
            if column not in header:
                raise SchemaError(f"missing column {column!r} in {csv_path}")
        rows = []
        for raw in reader:
            row = dict(raw)
            for column in NUMERIC_COLUMNS + ("sweep_value",):
                row[column] = _parse_cell(raw[column])
            rows.append(row)
    if not any(row["rep"] not in ("mean", "sem") for row in rows):
        raise SchemaError(f"no replicate rows in {csv_path}")
    return rows


def _mean_sem(samples: list[float]) -> tuple[float, float]:
    # Mirrors the emitter's arithmetic so the 1e-9 comparison is meaningful.
    n = len(samples)
    mean = math.fsum(samples) / n
    if n == 1:
        return mean, 0.0
    var = math.fsum((x - mean) ** 2 for x in samples) / (n - 1)
    return mean, math.sqrt(var / n)


def _close(a: float | None, b: float | None) -> bool:
    if a is None or b is None:
        return (a is None) == (b is None)
    if math.isnan(a) or math.isnan(b):
        return math.isnan(a) and math.isnan(b)
    if math.isinf(a) or math.isinf(b):
        return a == b
    return abs(a - b) <= SUMMARY_TOL


def verify_summaries(rows: list[dict]) -> None:
    """Recompute every mean/sem from the replicate rows and compare against
    the stored summary rows; warn on any disagreement beyond tolerance."""
    groups: dict[tuple, list[dict]] = defaultdict(list)
    for row in rows:
        groups[(row["experiment_id"], row["sweep_value"])].append(row)
    for (experiment_id, sweep_value), members in groups.items():
        replicates = [r for r in members if r["rep"] not in ("mean", "sem")]
        stored = {r["rep"]: r for r in members if r["rep"] in ("mean", "sem")}
        if not replicates or set(stored) != {"mean", "sem"}:
            raise SchemaError(
                f"{experiment_id} @ {sweep_value}: expected replicate rows "
                "plus mean and sem summaries"
            )
        for column in NUMERIC_COLUMNS:
            values = [r[column] for r in replicates if r[column] is not None]
            if values:
                recomputed = _mean_sem(values)
            else:
                recomputed = (None, None)
            for idx, label in ((0, "mean"), (1, "sem")):
                if not _close(recomputed[idx], stored[label][column]):
                    warnings.warn(
                        f"{experiment_id} @ {sweep_value}: stored {label} of "
                        f"{column} is {stored[label][column]!r}, recomputed "
                        f"{recomputed[idx]!r}",
                        SummaryMismatchWarning,
                        stacklevel=2,
                    )


def extract_series(
    rows: list[dict], column: str
) -> dict[str, list[SeriesPoint]]:
    """Mean/sem series of one column per experiment id, sorted by x."""
    series: dict[str, dict[float, dict[str, float]]] = defaultdict(dict)
    for row in rows:
        if row["rep"] not in ("mean", "sem"):
            continue
        point = series[row["experiment_id"]].setdefault(row["sweep_value"], {})
        point[row["rep"]] = row[column]
    out: dict[str, list[SeriesPoint]] = {}
    for experiment_id, points in series.items():
        out[experiment_id] = [
            SeriesPoint(x=x, mean=vals["mean"], sem=vals["sem"])
            for x, vals in sorted(points.items())
        ]
    return out


def render(spec: FigureSpec) -> Path:
    """Render one figure; returns the output path.

    Missing columns raise ``SchemaError`` naming the column; the input CSV
    is never modified and re-rendering is idempotent.
    """
    rows = load_rows(spec.csv_path)
    verify_summaries(rows)
    if spec.x_column != "sweep_value":
        raise SchemaError(f"unknown x column {spec.x_column!r}")

    fig, ax = plt.subplots(figsize=(6.0, 4.0), dpi=120)
    for column in spec.series_columns:
        for experiment_id, points in sorted(extract_series(rows, column).items()):
            finite = [p for p in points if math.isfinite(p.mean)]
            xs = [p.x for p in finite]
            means = [p.mean for p in finite]
            sems = [p.sem if math.isfinite(p.sem) else 0.0 for p in finite]
            label = f"{experiment_id}: {column}"
            (line,) = ax.plot(xs, means, marker="o", label=label)
            ax.fill_between(
                xs,
                [m - s for m, s in zip(means, sems)],
                [m + s for m, s in zip(means, sems)],
                alpha=0.25,
                color=line.get_color(),
                linewidth=0,
            )
    sweep_names = {row["sweep_name"] for row in rows}
    ax.set_xlabel(spec.x_label or "/".join(sorted(sweep_names)))
    ax.set_ylabel(", ".join(spec.series_columns))
    if spec.title:
        ax.set_title(spec.title)
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    output = Path(spec.output_path)
    fig.savefig(output)
    plt.close(fig)
    return output


#: Named presets matching the shipped experiment manifests.
PRESETS = {
    "fig1": dict(
        series_columns=("bound", "estimation"),
        title="Bound and estimation vs. guess budget",
        x_label="taken guesses k",
    ),
    "fig2": dict(
        series_columns=("bound", "estimation"),
        title="Bound and estimation vs. elements per coordinate",
        x_label="elements per coordinate",
    ),
    "fig3": dict(
        series_columns=("bound",),
        title="Adaptive vs. plain single-step auditing",
        x_label="elements per coordinate",
    ),
    "cis": dict(
        series_columns=("bound",),
        title="Count-in-sets: adaptive vs. plain bounds",
        x_label="set size s",
    ),
    "laplace": dict(
        series_columns=("bound", "estimation"),
        title="Per-element Laplace noising",
        x_label="eps",
    ),
}


def preset_spec(name: str, csv_path: Path | str, output_path: Path | str) -> FigureSpec:
    if name not in PRESETS:
        raise SchemaError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    preset = PRESETS[name]
    return FigureSpec(
        csv_path=Path(csv_path),
        x_column="sweep_value",
        series_columns=preset["series_columns"],
        output_path=Path(output_path),
        title=preset["title"],
        x_label=preset["x_label"],
    )
