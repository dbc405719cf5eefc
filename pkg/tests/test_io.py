import json

import numpy as np
import pytest
import yaml

from confband.core.errors import (
    GridMismatch, MissingColumn, NonFinite, ParseError, SchemaError, UnsupportedResult,
)
from confband.demo.synthetic import daily_flows, functional_document, linear_data
from confband.io.ingest import ingest_functional, ingest_tabular
from confband.io.output import (
    build_document, dumps, load_run_config, read_document, write_document,
)
from confband.io.plot import plot_document
from confband.methods import full, split, split_fd
from confband.models import mean_model, ols_model
from confband.types import FullConfig, FunctionalCovariates, RunConfig


# === Tabular ingestion ===

def test_csv_routes_flagged_rows_to_test_points(tmp_path):
    path = tmp_path / "trips.csv"
    path.write_text("x,start,end,is_test\n1,2,3,0\n2,3,4,0\n3,4,5,0\n4,5,6,0\n5,6,7,1\n")
    inp = ingest_tabular(path, ["start", "end"])
    assert (inp.dataset.n, inp.dataset.p, inp.dataset.q) == (4, 1, 2)
    np.testing.assert_array_equal(inp.x0, [[5.0]])
    np.testing.assert_array_equal(inp.y0, [[6.0, 7.0]])
    assert inp.feature_names == ["x"] and inp.response_names == ["start", "end"]


def test_csv_defaults_to_last_column_response(tmp_path):
    path = tmp_path / "plain.csv"
    path.write_text("a,b,y\n1,2,3\n4,5,6\n7,8,9\n")
    inp = ingest_tabular(path)
    assert inp.response_names == ["y"]
    assert inp.dataset.p == 2
    assert inp.x0.shape == (0, 2)


def test_blank_test_responses_are_unknown(tmp_path):
    path = tmp_path / "blank.csv"
    path.write_text("x,y,is_test\n1,2,0\n2,3,0\n3,,1\n")
    assert ingest_tabular(path).y0 is None


def test_missing_response_column(tmp_path):
    path = tmp_path / "trips.csv"
    path.write_text("x,start\n1,2\n2,3\n")
    with pytest.raises(MissingColumn, match="end"):
        ingest_tabular(path, ["start", "end"])


def test_non_numeric_cell_names_its_row(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("x,y\n1,2\n2,3\nabc,4\n")
    with pytest.raises(ParseError, match="row 3") as e:
        ingest_tabular(path)
    assert e.value.context == {"row": 3, "column": "x"}


def test_numeric_cells_parse_column_by_column(tmp_path):
    path = tmp_path / "sci.csv"
    path.write_text("x,y,is_test\n1e-3, 2.5,0\n-4,+3,0\n2E2,7,1\n")
    inp = ingest_tabular(path)
    np.testing.assert_allclose(inp.dataset.x[:, 0], [1e-3, -4.0])
    np.testing.assert_allclose(inp.dataset.y[:, 0], [2.5, 3.0])
    np.testing.assert_allclose(inp.x0, [[200.0]])


def test_bad_cell_in_a_test_row_names_its_row(tmp_path):
    path = tmp_path / "bad_test.csv"
    path.write_text("x,y,is_test\n1,2,0\n2,3,0\n3,4,0\n4,oops,1\n")
    with pytest.raises(ParseError) as e:
        ingest_tabular(path)
    assert e.value.context == {"row": 4, "column": "y"}


def test_literal_nan_is_a_non_finite_value(tmp_path):
    path = tmp_path / "nan.csv"
    path.write_text("x,y\n1,2\n2,nan\n3,4\n")
    with pytest.raises(NonFinite):
        ingest_tabular(path)


# === Functional ingestion ===

def _write(tmp_path, doc, name="curves.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(doc))
    return path


def test_functional_document_shapes(tmp_path):
    doc = {"schema": "confband/v1", "grids": [[0.0, 0.5, 1.0]],
           "train": [[[1.0, 2.0, 3.0]], [[2.0, 3.0, 4.0]]]}
    inp = ingest_functional(_write(tmp_path, doc))
    assert (inp.dataset.n, inp.dataset.q) == (2, 1)
    assert inp.x is None and inp.x0 is None


def test_functional_document_with_covariates_and_tests(tmp_path):
    doc = {
        "schema": "confband/v1",
        "grids": [[0.0, 1.0]],
        "train": [[[1.0, 2.0]], [[2.0, 3.0]], [[0.0, 1.0]]],
        "covariates": {"grids": [None], "train": [[0.5], [1.5], [-0.5]]},
        "test": [{"x": [1.0], "y": [[1.5, 2.5]]}],
    }
    inp = ingest_functional(_write(tmp_path, doc))
    assert inp.x.p == 1 and inp.x0.n == 1
    np.testing.assert_array_equal(inp.y0[0][0], [1.5, 2.5])


def test_evaluations_must_match_grid(tmp_path):
    doc = {"schema": "confband/v1", "grids": [[0.0, 0.5, 1.0]],
           "train": [[[1.0, 2.0, 3.0, 4.0]], [[2.0, 3.0, 4.0, 5.0]]]}
    with pytest.raises(GridMismatch):
        ingest_functional(_write(tmp_path, doc))


def test_missing_grids_is_a_schema_error(tmp_path):
    doc = {"schema": "confband/v1", "train": [[[1.0, 2.0]], [[2.0, 3.0]]]}
    with pytest.raises(SchemaError, match="grids") as e:
        ingest_functional(_write(tmp_path, doc))
    assert e.value.context["node"] == "grids"


def test_unknown_schema_version(tmp_path):
    doc = {"schema": "confband/v0", "grids": [[0.0, 1.0]],
           "train": [[[1.0, 2.0]], [[2.0, 3.0]]]}
    with pytest.raises(SchemaError):
        ingest_functional(_write(tmp_path, doc))


def test_json_documents_are_accepted(tmp_path):
    ds, x = daily_flows(n=6, grid_points=10, seed=0)
    path = tmp_path / "flows.json"
    path.write_text(json.dumps(functional_document(ds, x, n_test=2)))
    inp = ingest_functional(path)
    assert inp.dataset.n == 4 and inp.x0.n == 2 and inp.x.p == 3


# === Result documents ===

def _split_doc(seed=1):
    ds = linear_data(30, q=2, seed=seed)
    cfg = RunConfig(mode="multi", method="split", input="in.csv", model="ols", seed=seed,
                    threads=3, output="out.json")
    res = split(ds, [[0.5]], ols_model(), seed=seed)
    return cfg, build_document(cfg, res, np.array([[0.5]]), y0=np.array([[1.0, 1.0]]))


def test_document_echoes_replayable_config():
    cfg, doc = _split_doc()
    assert doc["schema"] == "confband/v1"
    assert "threads" not in doc["config"] and "output" not in doc["config"]
    replayed = load_run_config(doc)
    assert replayed.seed == cfg.seed and replayed.model == "ols"
    assert doc["results"][0]["ellipsoid"]["level"] == pytest.approx(doc["info"]["d"] ** 2)


def test_document_text_is_deterministic():
    assert dumps(_split_doc()[1]) == dumps(_split_doc()[1])


def test_infinite_bounds_survive_a_write(tmp_path):
    ds = linear_data(5, seed=0)
    cfg = RunConfig(mode="multi", method="split", input="in.csv", split=[0, 1])
    res = split(ds, [[0.5]], mean_model(), explicit=[0, 1])
    path = tmp_path / "res.json"
    write_document(build_document(cfg, res, np.array([[0.5]])), path)
    assert "Infinity" in path.read_text()
    doc = read_document(path)
    assert doc["results"][0]["up"][0] == float("inf")


def test_foreign_json_is_not_a_result(tmp_path):
    path = tmp_path / "other.json"
    path.write_text(json.dumps({"hello": 1}))
    with pytest.raises(SchemaError):
        read_document(path)


# === Plots ===

def test_full_surface_plot(tmp_path):
    ds = linear_data(10, q=2, seed=2)
    cfg = RunConfig(mode="multi", method="full", input="in.csv", num_grid_pts_dim=8)
    res = full(ds, [[0.5]], mean_model(), FullConfig(num_grid_pts_dim=8))
    path = tmp_path / "full.svg"
    plot_document(build_document(cfg, res), path)
    text = path.read_text()
    assert text.startswith("<?xml") and "<svg" in text


def test_band_plot_has_one_panel_per_component(tmp_path):
    ds, _ = daily_flows(n=24, grid_points=20, seed=1)
    cfg = RunConfig(mode="fd", method="split", input="in.yaml", seed=0)
    res = split_fd(ds, x0=FunctionalCovariates(n=1), seed=0)
    doc = build_document(cfg, res)
    first, second = tmp_path / "a.svg", tmp_path / "b.svg"
    plot_document(doc, first)
    plot_document(doc, second)
    text = first.read_text()
    assert 'id="axes_1"' in text and 'id="axes_2"' in text
    assert text == second.read_text()


def test_nothing_to_plot(tmp_path):
    with pytest.raises(UnsupportedResult):
        plot_document({"method": "split", "mode": "multi", "results": []}, tmp_path / "x.svg")


def test_three_dimensional_surface_cannot_be_drawn(tmp_path):
    doc = {"method": "full", "mode": "multi", "alpha": 0.1,
           "results": [{"index": 0, "axes": [[0.0, 1.0]] * 3, "pvalues": [1.0] * 8}]}
    with pytest.raises(UnsupportedResult):
        plot_document(doc, tmp_path / "x.svg")
