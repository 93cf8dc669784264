"""Tests for report writers."""

import json

from pco_sync.experiments import CellSummary, ExperimentReport
from pco_sync.output import CELL_HEADER, cell_rows, config_comment, format_grid_table, write_csv, write_json


def _create_report() -> ExperimentReport:
    def cell(row, col, rv, cv, converged, t_sync=None, energy=None):
        return CellSummary(
            row=row,
            col=col,
            row_value=rv,
            col_value=cv,
            runs=4,
            converged_count=converged,
            failed_count=0,
            mean_sync_time=t_sync,
            std_sync_time=0.0 if t_sync is not None else None,
            mean_energy=energy,
            mean_rate=None,
        )

    return ExperimentReport(
        config={"name": "demo", "seed": 1},
        row_param="g",
        col_param="l",
        cells=[
            cell(0, 0, 0.01, 0.01, 4, 120.0, 0.0123),
            cell(0, 1, 0.01, 0.02, 2, 80.5, 0.009),
            cell(1, 0, 0.02, 0.01, 0),
            cell(1, 1, 0.02, 0.02, 4, 40.25, 0.004),
        ],
    )


class TestWriters:
    """Tests for CSV and JSON output."""

    def test_csv_with_config_line(self, tmp_path):
        path = write_csv(["a", "b"], [[1, None], [2.5, 3]], tmp_path / "sub" / "out.csv", config={"z": 1, "a": 2})
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines[0] == '# config: {"a": 2, "z": 1}'
        assert lines[1:] == ["a,b", "1,", "2.5,3"]

    def test_csv_without_config(self, tmp_path):
        path = write_csv(["a"], [[1]], tmp_path / "out.csv")
        assert path.read_text(encoding="utf-8") == "a\n1\n"

    def test_json(self, tmp_path):
        path = write_json({"x": [1, 2]}, tmp_path / "nested" / "out.json")
        assert json.loads(path.read_text(encoding="utf-8")) == {"x": [1, 2]}

    def test_config_comment_is_sorted(self):
        assert config_comment({"b": 1, "a": {"d": 2, "c": 3}}) == '# config: {"a": {"c": 3, "d": 2}, "b": 1}'


class TestGridTable:
    """Tests for the text grid table."""

    def test_cell_rows(self):
        rows = cell_rows(_create_report())
        assert len(rows) == 4
        assert len(rows[0]) == len(CELL_HEADER)
        assert rows[2][5] == 0.0
        assert rows[2][6] is None

    def test_table_contents(self):
        table = format_grid_table(_create_report())
        lines = table.splitlines()
        assert lines[0].startswith("g \\ l")
        assert "120.0 s / 1.230e-02 J" in lines[2]
        assert "80.5 s / 9.000e-03 J (50%)" in lines[2]
        assert "no sync" in lines[3]
        assert table.endswith("\n")

    def test_outcome_columns(self):
        report = _create_report()
        report.cells[2].stalled_count = 3
        report.cells[2].unsettled_count = 1
        row = cell_rows(report)[2]
        assert CELL_HEADER[-3:] == ["stalled_count", "unsettled_count", "guaranteed_unsynchronized"]
        assert row[-3:] == [3, 1, 0]

    def test_guaranteed_failures_are_marked(self):
        report = _create_report()
        report.cells[1].guaranteed_unsynchronized = 2
        lines = format_grid_table(report).splitlines()
        assert "80.5 s / 9.000e-03 J (50%) *" in lines[2]
        assert lines[-1] == "* guaranteed runs left unsynchronized at t_max"

    def test_no_marker_without_guaranteed_failures(self):
        assert "*" not in format_grid_table(_create_report())
