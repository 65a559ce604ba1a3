"""
Tests for CSV and JSON artifact writers.
"""
import json

import pytest

from qmask import __version__
from qmask.exceptions import DimensionLimitError
from qmask.models.schemas.reports import MessageDiagnostic
from qmask.services.export_service import (
    error_payload,
    header_line,
    read_csv,
    to_frame,
    write_csv,
    write_json,
)


class TestToFrame:
    def test_models_and_lists(self):
        frame = to_frame([{"n": 1, "labels": ["A", "B"], "extra": {"x": 0.5}}])
        assert list(frame.columns) == ["n", "labels", "extra.x"]
        assert frame.loc[0, "labels"] == "A;B"

    def test_pydantic_rows(self):
        frame = to_frame([MessageDiagnostic(label="basis 0", error=0.0, leakage=0.1)])
        assert frame.loc[0, "label"] == "basis 0"

    def test_empty_with_columns(self):
        frame = to_frame([], columns=["a", "b"])
        assert list(frame.columns) == ["a", "b"]
        assert frame.empty


class TestWriteCsv:
    """Tests for write_csv and read_csv."""

    def test_header_line(self):
        line = header_line(seed=4, samples=None, command="entropy")
        assert line == f"# qmask {__version__} command=entropy seed=4"

    def test_precision_and_header(self, tmp_path):
        frame = to_frame([{"value": 1 / 3}])
        path = write_csv(frame, tmp_path / "out" / "x.csv", {"seed": 1})
        lines = path.read_text().splitlines()
        assert lines[0].startswith("# qmask")
        assert lines[2] == "0.333333333333"
        assert read_csv(path).loc[0, "value"] == pytest.approx(1 / 3, abs=1e-12)

    def test_identical_input_identical_bytes(self, tmp_path):
        frame = to_frame([{"a": 0.1 + 0.2, "b": "x"}, {"a": 2.0, "b": "y"}])
        first = write_csv(frame, tmp_path / "1.csv", {"seed": 0}).read_bytes()
        second = write_csv(frame, tmp_path / "2.csv", {"seed": 0}).read_bytes()
        assert first == second


class TestJson:
    def test_write_model(self, tmp_path):
        diag = MessageDiagnostic(label="m", error=0.25, leakage=0.0)
        path = write_json(diag, tmp_path / "d.json")
        assert json.loads(path.read_text())["error"] == 0.25

    def test_error_payload_for_toolkit_error(self):
        payload = error_payload(DimensionLimitError(64, 16))
        assert payload["error"] == "DimensionLimitError"
        assert payload["exit_code"] == 3
        assert payload["details"] == {
            "dimension": 64,
            "cap": 16,
            "what": "tensor product",
        }

    def test_error_payload_for_other_error(self):
        payload = error_payload(ValueError("bad"))
        assert payload["exit_code"] is None
        assert payload["message"] == "bad"
