"""Figure rendering from golden result CSVs."""

import csv
import math
import warnings
from pathlib import Path

import pytest

from oralab_plots import (
    FigureSpec,
    SchemaError,
    SummaryMismatchWarning,
    load_rows,
    preset_spec,
    render,
    verify_summaries,
)
from oralab_plots.figures import SUMMARY_TOL, _mean_sem, extract_series

DATA = Path(__file__).parent / "data"
GOLDEN = ("fig1", "fig2", "fig3")


@pytest.mark.parametrize("name", GOLDEN)
def test_render_golden_csvs(name, tmp_path):
    out = render(preset_spec(name, DATA / f"{name}.csv", tmp_path / f"{name}.png"))
    assert out.exists() and out.stat().st_size > 0


@pytest.mark.parametrize("name", GOLDEN)
def test_render_is_idempotent_and_does_not_touch_input(name, tmp_path):
    csv_path = DATA / f"{name}.csv"
    before = csv_path.read_bytes()
    a = render(preset_spec(name, csv_path, tmp_path / "a.png"))
    b = render(preset_spec(name, csv_path, tmp_path / "b.png"))
    assert csv_path.read_bytes() == before
    assert a.read_bytes() == b.read_bytes()


@pytest.mark.parametrize("name", GOLDEN)
def test_recomputed_summaries_match_stored(name):
    rows = load_rows(DATA / f"{name}.csv")
    with warnings.catch_warnings():
        warnings.simplefilter("error", SummaryMismatchWarning)
        verify_summaries(rows)
    # Direct check of the headline column, independent of the warning path.
    by_group: dict = {}
    for row in rows:
        by_group.setdefault((row["experiment_id"], row["sweep_value"]), []).append(row)
    for members in by_group.values():
        replicates = [r["bound"] for r in members if r["rep"] not in ("mean", "sem")]
        stored_mean = next(r["bound"] for r in members if r["rep"] == "mean")
        stored_sem = next(r["bound"] for r in members if r["rep"] == "sem")
        mean, sem = _mean_sem(replicates)
        assert abs(mean - stored_mean) <= SUMMARY_TOL
        assert abs(sem - stored_sem) <= SUMMARY_TOL


def test_series_extraction_orders_by_x():
    rows = load_rows(DATA / "fig3.csv")
    series = extract_series(rows, "bound")
    assert set(series) == {"fig3-ora", "fig3-aora"}
    for points in series.values():
        xs = [p.x for p in points]
        assert xs == sorted(xs)


def test_missing_column_names_it(tmp_path):
    path = tmp_path / "bad.csv"
    with (DATA / "fig1.csv").open() as fh:
        rows = list(csv.reader(fh))
    drop = rows[0].index("bound")
    with path.open("w", newline="") as fh:
        csv.writer(fh).writerows([r[:drop] + r[drop + 1 :] for r in rows])
    with pytest.raises(SchemaError, match="bound"):
        render(preset_spec("fig1", path, tmp_path / "x.png"))


def test_empty_csv_rejected(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("")
    with pytest.raises(SchemaError):
        render(preset_spec("fig1", path, tmp_path / "x.png"))


def test_header_only_csv_rejected(tmp_path):
    path = tmp_path / "header.csv"
    with (DATA / "fig1.csv").open() as fh:
        header = fh.readline()
    path.write_text(header)
    with pytest.raises(SchemaError):
        render(preset_spec("fig1", path, tmp_path / "x.png"))


def test_tampered_summary_warns(tmp_path):
    path = tmp_path / "tampered.csv"
    with (DATA / "fig1.csv").open() as fh:
        rows = list(csv.DictReader(fh))
        fieldnames = list(rows[0].keys())
    for row in rows:
        if row["rep"] == "mean":
            row["bound"] = str(float(row["bound"]) + 0.5)
            break
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        writer.writerows(rows)
    with pytest.warns(SummaryMismatchWarning):
        render(preset_spec("fig1", path, tmp_path / "x.png"))


def test_unknown_preset_rejected(tmp_path):
    with pytest.raises(SchemaError):
        preset_spec("fig9", DATA / "fig1.csv", tmp_path / "x.png")


def test_unknown_series_column_rejected(tmp_path):
    with pytest.raises(SchemaError):
        FigureSpec(
            csv_path=DATA / "fig1.csv",
            x_column="sweep_value",
            series_columns=("spam",),
            output_path=tmp_path / "x.png",
        )


class TestCli:
    def test_preset_render(self, tmp_path, capsys):
        from oralab_plots.cli import main

        out = tmp_path / "fig2.png"
        code = main(["fig2", "--csv", str(DATA / "fig2.csv"), "--out", str(out)])
        assert code == 0 and out.exists()

    def test_custom_series(self, tmp_path):
        from oralab_plots.cli import main

        out = tmp_path / "acc.png"
        code = main(
            [
                "custom",
                "--csv",
                str(DATA / "fig1.csv"),
                "--series",
                "accuracy",
                "--out",
                str(out),
            ]
        )
        assert code == 0 and out.exists()

    def test_schema_error_exit_code(self, tmp_path, capsys):
        from oralab_plots.cli import main

        bad = tmp_path / "nope.csv"
        bad.write_text("a,b\n1,2\n")
        code = main(["fig1", "--csv", str(bad), "--out", str(tmp_path / "x.png")])
        assert code == 2
