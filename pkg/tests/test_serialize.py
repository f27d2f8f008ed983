import json

import numpy as np
import pytest

from smfpca import ParseError
from smfpca.serialize import (
    arrays_from_result,
    arrays_from_truth,
    load_json,
    read_data_csv,
    write_data_csv,
    write_json,
    write_matrix_csv,
    write_metric_rows,
)


# -- data matrices ----------------------------------------------------


def test_data_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    values = rng.standard_normal((7, 5))
    path = tmp_path / "data.csv"
    write_data_csv(path, values)
    back = read_data_csv(path)
    np.testing.assert_array_equal(back, values)


def test_data_csv_missing_cells_roundtrip(tmp_path):
    values = np.array([[1.0, np.nan], [np.nan, 4.0]])
    path = tmp_path / "data.csv"
    write_data_csv(path, values)
    text = path.read_text()
    assert "nan" not in text.lower()
    assert ",\n" in text or text.endswith(",")
    back = read_data_csv(path)
    assert np.isnan(back[0, 1]) and np.isnan(back[1, 0])
    assert back[0, 0] == 1.0 and back[1, 1] == 4.0


def test_data_csv_headerless_accepted(tmp_path):
    path = tmp_path / "bare.csv"
    path.write_text("1.5,2.5\n3.5,4.5\n")
    back = read_data_csv(path)
    np.testing.assert_array_equal(back, [[1.5, 2.5], [3.5, 4.5]])


def test_data_csv_numeric_first_row_kept(tmp_path):
    # a first row of 0,1,...,s-1 is a header; 0,2 is data
    path = tmp_path / "tricky.csv"
    path.write_text("0,2\n3,4\n")
    assert read_data_csv(path).shape == (2, 2)
    path.write_text("0,1\n3,4\n")
    assert read_data_csv(path).shape == (1, 2)


def test_data_csv_bad_cell_reports_position(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("0,1,2\n1.0,2.0,3.0\n4.0,oops,6.0\n")
    with pytest.raises(ParseError, match=r"row 3, column 2"):
        read_data_csv(path)


def test_data_csv_ragged_rows_rejected(tmp_path):
    path = tmp_path / "ragged.csv"
    path.write_text("1.0,2.0\n3.0\n")
    with pytest.raises(ParseError):
        read_data_csv(path)


def test_data_csv_empty_rejected(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("")
    with pytest.raises(ParseError):
        read_data_csv(path)


# -- json documents ---------------------------------------------------


def test_json_roundtrip_stable_bytes(tmp_path):
    doc = {"b": [1.0, 2.5], "a": {"nested": True}}
    p1 = tmp_path / "one.json"
    p2 = tmp_path / "two.json"
    write_json(p1, doc)
    write_json(p2, doc)
    assert p1.read_bytes() == p2.read_bytes()
    assert p1.read_text().endswith("\n")
    assert load_json(p1) == doc


def test_json_parse_error(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(ParseError):
        load_json(path)


# -- auxiliary tables -------------------------------------------------


def test_matrix_csv_header(tmp_path):
    path = tmp_path / "scores.csv"
    write_matrix_csv(path, np.arange(6.0).reshape(3, 2), "pc")
    lines = path.read_text().splitlines()
    assert lines[0] == "pc_1,pc_2"
    assert len(lines) == 4


def test_metric_rows_schema(tmp_path):
    path = tmp_path / "metrics.csv"
    rows = [
        (0, "smfpca", "pcFunctionMse", 1, 0.5),
        (0, "smfpca", "signalMse", None, 0.25),
    ]
    write_metric_rows(path, rows)
    lines = path.read_text().splitlines()
    assert lines[0] == "replicate,method,metric,component,value"
    assert lines[1] == "0,smfpca,pcFunctionMse,1,0.5"
    assert lines[2].split(",")[3] == ""


# -- result and truth array extraction --------------------------------


def test_arrays_from_documents_roundtrip(ops1, tmp_path):
    from smfpca import fit, generate_sphere_dataset
    from smfpca.serialize import result_to_dict, truth_to_dict

    ds = generate_sphere_dataset(ops1.mesh, ops1, 12, (4.0, 2.0), 0.0, 0)
    result = fit(
        ds.X, 2, [1e-6], ops1, selection="fixed", fixed_lambda=1e-6
    )
    doc = result_to_dict(result)
    values, scores, norms, curve = arrays_from_result(doc)
    assert values.shape == (ops1.vertex_count, 2)
    assert scores.shape == (12, 2)
    np.testing.assert_allclose(
        values[:, 0], result.components[0].f_coefficients, rtol=1e-15
    )
    assert norms[1] == result.components[1].function_norm
    assert curve == list(result.cumulative_variance)

    tdoc = truth_to_dict(ds)
    tvalues, tscores = arrays_from_truth(tdoc)
    np.testing.assert_allclose(tvalues, ds.true_components, rtol=1e-15)
    np.testing.assert_allclose(tscores, ds.true_scores, rtol=1e-15)
    # documents survive a disk trip
    write_json(tmp_path / "truth.json", tdoc)
    assert load_json(tmp_path / "truth.json") == json.loads(json.dumps(tdoc))
