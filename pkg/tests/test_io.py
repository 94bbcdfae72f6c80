"""CSV ingestion, dummy expansion, serialization round-trips, theta files."""

import io
import logging

import numpy as np
import pytest

from catorder.errors import DataError
from catorder.io import (
    dataset_from_payload,
    dataset_to_payload,
    ingest_csv,
    read_theta_file,
    render_manifest,
    write_dataset_csv,
    write_theta_file,
)
from catorder.model import ModelSpec, Theta

TABLE4_CSV = """x1,y1,y2,y3,y4
1,22,33,10,35
2,31,40,14,15
3,23,43,22,12
4,27,49,18,6
"""


class TestIngest:
    def test_police_shape(self, police):
        assert police.m == 23
        assert police.n_categories == 4
        assert police.responses == ("o", "s", "st", "t")
        # cells of the printed table; its Total column carries a typo in one
        # row (prints 36, cells sum to 34), so the text's 12,483 is the truth
        assert police.grand_total == 12483
        assert police.covariates == (
            "armed=Other",
            "armed=Unarmed",
            "gender=Male",
            "flee=True",
            "mental=True",
        )

    def test_default_response_columns(self):
        ds = ingest_csv(io.StringIO(TABLE4_CSV))
        assert ds.m == 4
        assert ds.grand_total == 400
        assert ds.covariates == ("x1",)

    def test_named_response_columns(self):
        text = "dose,none,mild,severe\n1,5,4,3\n2,2,3,1\n"
        ds = ingest_csv(io.StringIO(text), response_columns=["none", "mild", "severe"])
        assert ds.responses == ("none", "mild", "severe")
        assert ds.m == 2

    def test_tab_delimiter_sniffed(self):
        text = TABLE4_CSV.replace(",", "\t")
        ds = ingest_csv(io.StringIO(text))
        assert ds.grand_total == 400

    def test_zero_row_dropped_with_warning(self, caplog):
        text = "x1,y1,y2,y3\n1,1,2,3\n2,0,0,0\n"
        with caplog.at_level(logging.WARNING, logger="catorder"):
            ds = ingest_csv(io.StringIO(text))
        assert ds.m == 1
        assert any("zero total" in r.message for r in caplog.records)

    def test_malformed_row_reports_line(self):
        text = "x1,y1,y2,y3\n1,1,2,3\n2,4,5\n"
        with pytest.raises(DataError, match="line 3"):
            ingest_csv(io.StringIO(text))

    def test_negative_count_reports_line(self):
        text = "x1,y1,y2,y3\n1,1,-2,3\n"
        with pytest.raises(DataError, match="line 2"):
            ingest_csv(io.StringIO(text))

    def test_non_integer_count_rejected(self):
        text = "x1,y1,y2,y3\n1,1.5,2,3\n"
        with pytest.raises(DataError, match="integers"):
            ingest_csv(io.StringIO(text))

    def test_missing_response_column(self):
        with pytest.raises(DataError, match="not in header"):
            ingest_csv(io.StringIO(TABLE4_CSV), response_columns=["nope"])

    def test_dummy_expansion_reference_is_first_observed(self):
        text = "color,y1,y2,y3\nred,1,2,3\nblue,4,5,6\nred,2,2,2\ngreen,1,1,1\n"
        ds = ingest_csv(io.StringIO(text))
        assert ds.covariates == ("color=blue", "color=green")
        # red rows aggregate (reference level, identical covariates)
        assert ds.m == 3
        total_red = ds.y[np.all(ds.x == 0.0, axis=1)][0]
        assert total_red.tolist() == [3, 4, 5]

    def test_empty_input(self):
        with pytest.raises(DataError):
            ingest_csv(io.StringIO(""))


class TestRoundTrips:
    def test_csv_round_trip_idempotent(self, police):
        buf = io.StringIO()
        write_dataset_csv(police, buf)
        again = ingest_csv(io.StringIO(buf.getvalue()), response_columns=police.responses)
        assert np.array_equal(again.y, police.y)
        assert np.allclose(again.x, police.x)
        assert again.covariates == police.covariates
        buf2 = io.StringIO()
        write_dataset_csv(again, buf2)
        assert buf2.getvalue() == buf.getvalue()

    def test_payload_round_trip(self, table4):
        back = dataset_from_payload(dataset_to_payload(table4))
        assert np.array_equal(back.y, table4.y)
        assert np.allclose(back.x, table4.x)

    def test_theta_file_round_trip(self, tmp_path):
        spec = ModelSpec.build("adjacent", "ppo", 4, 3, shared=(1,))
        rng = np.random.default_rng(0)
        theta = Theta(tuple(rng.normal(size=3) for _ in range(3)), rng.normal(size=1))
        path = tmp_path / "theta.json"
        write_theta_file(path, spec, theta)
        spec2, theta2 = read_theta_file(path)
        assert spec2 == spec
        assert np.array_equal(theta2.to_flat(), theta.to_flat())


def test_manifest_rendering():
    text = render_manifest({"seed": "7", "allocation": "iid"})
    assert text.splitlines() == ["seed       : 7", "allocation : iid"]


def test_malformed_json_reports_path(tmp_path):
    from catorder.io import read_json

    bad = tmp_path / "plan.json"
    bad.write_text("{not json")
    with pytest.raises(DataError, match="plan.json"):
        read_json(bad)
