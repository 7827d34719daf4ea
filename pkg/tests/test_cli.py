import json
import os

import numpy as np
import pytest
from click.testing import CliRunner

from pathdyn import (Circle, IntegrationParams, build_cache, fit_binning, load_cache,
                     load_dataset, load_field, make_analytic, similarity_field)
from pathdyn.cli import main
from pathdyn.field import DEFAULT_GRIDS


@pytest.fixture()
def runner():
    return CliRunner()


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """Field + cache built once through the CLI, shared by the tests below."""
    root = tmp_path_factory.mktemp("cli")
    runner = CliRunner()
    r = runner.invoke(main, ["gen-field", "two_population", str(root / "tp.vf2d"),
                             "--nx", "160", "--ny", "80"])
    assert r.exit_code == 0, r.output
    r = runner.invoke(main, ["build-dynamics", str(root / "tp.vf2d"), str(root / "tp.dync"),
                             "--t0", "0", "--tau", "1", "--dt", "0.02"])
    assert r.exit_code == 0, r.output
    return root


def test_gen_field_loads_back(runner, tmp_path):
    out = tmp_path / "s.vf2d"
    r = runner.invoke(main, ["gen-field", "saddle", str(out), "--nx", "33", "--ny", "33"])
    assert r.exit_code == 0, r.output
    fld = load_dataset(out)
    assert fld.spec.nx == 33
    base = DEFAULT_GRIDS["saddle"]
    assert fld.spec.origin == base.origin


def test_gen_field_unknown_name(runner, tmp_path):
    r = runner.invoke(main, ["gen-field", "wavy", str(tmp_path / "w.vf2d")])
    assert r.exit_code != 0


def test_ingest_is_canonical(runner, workdir, tmp_path):
    first = tmp_path / "a.vf2d"
    second = tmp_path / "b.vf2d"
    r = runner.invoke(main, ["ingest", str(workdir / "tp.vf2d"), str(first)])
    assert r.exit_code == 0, r.output
    r = runner.invoke(main, ["ingest", str(first), str(second)])
    assert r.exit_code == 0
    assert first.read_bytes() == second.read_bytes()
    assert first.read_bytes() == (workdir / "tp.vf2d").read_bytes()


def test_ingest_bad_file(runner, tmp_path):
    bad = tmp_path / "bad.vf2d"
    bad.write_bytes(b"not a dataset")
    r = runner.invoke(main, ["ingest", str(bad), str(tmp_path / "out.vf2d")])
    assert r.exit_code == 1
    assert r.stderr.startswith("error: MalformedHeaderError:")


def test_similarity_matches_in_process(runner, workdir, tmp_path):
    out_field = tmp_path / "sim.sf2d"
    out_image = tmp_path / "sim.png"
    r = runner.invoke(main, ["similarity", str(workdir / "tp.dync"),
                             "--region", "circle:1.0,0.0,0.4",
                             "--out-field", str(out_field), "--out-image", str(out_image)])
    assert r.exit_code == 0, r.output
    values, meta = load_field(out_field)

    cache = load_cache(workdir / "tp.dync")
    policy = fit_binning(cache, "auto")
    want = similarity_field(cache, Circle((1.0, 0.0), 0.4), policy)
    assert values.tobytes() == want.values.astype(np.float32).tobytes()
    assert out_image.exists()
    assert meta["query"]["region"] == {"kind": "circle", "center": [1.0, 0.0], "radius": 0.4}


def test_similarity_reuses_cache_without_field(runner, workdir, tmp_path):
    # the query path must work with the velocity data gone entirely
    moved = tmp_path / "tp.vf2d.bak"
    os.rename(workdir / "tp.vf2d", moved)
    try:
        for region in ("circle:1.0,0.0,0.3", "ellipse:3.0,0.0,0.4,0.3"):
            r = runner.invoke(main, ["similarity", str(workdir / "tp.dync"),
                                     "--region", region])
            assert r.exit_code == 0, r.output
            assert "divergence" in r.output
    finally:
        os.rename(moved, workdir / "tp.vf2d")


def test_similarity_bad_region(runner, workdir):
    r = runner.invoke(main, ["similarity", str(workdir / "tp.dync"),
                             "--region", "circle:1.0"])
    assert r.exit_code == 1
    assert r.stderr.startswith("error: ValueError:")


def test_similarity_empty_region(runner, workdir):
    r = runner.invoke(main, ["similarity", str(workdir / "tp.dync"),
                             "--region", "circle:50,50,0.1"])
    assert r.exit_code == 1
    assert "EmptyRegionError" in r.stderr


def test_ftle_methods(runner, workdir, tmp_path):
    for method in ("flow_map", "localized", "strain_sum"):
        out = tmp_path / f"{method}.sf2d"
        r = runner.invoke(main, ["ftle", str(workdir / "tp.vf2d"), "--method", method,
                                 "--t0", "0", "--tau", "1", "--dt", "0.05", "--stride", "4",
                                 "--out-field", str(out)])
        assert r.exit_code == 0, r.output
        values, meta = load_field(out)
        assert meta["query"]["region"]["method"] == method
        assert np.isfinite(values).any()


def test_ftle_flow_map_vs_strain_sum_correlate(runner, workdir, tmp_path):
    outs = {}
    for method, dt in (("flow_map", "1.0"), ("strain_sum", "0.01")):
        out = tmp_path / f"{method}.sf2d"
        r = runner.invoke(main, ["ftle", str(workdir / "tp.vf2d"), "--method", method,
                                 "--t0", "0", "--tau", "1", "--dt", dt, "--stride", "2",
                                 "--out-field", str(out)])
        assert r.exit_code == 0, r.output
        outs[method], _ = load_field(out)
    a, b = outs["flow_map"].astype(float), outs["strain_sum"].astype(float)
    both = np.isfinite(a) & np.isfinite(b)
    r = np.corrcoef(a[both], b[both])[0, 1]
    assert r >= 0.8


def test_cache_dir_env_resolution(runner, workdir, tmp_path, monkeypatch):
    monkeypatch.setenv("PATHDYN_CACHE_DIR", str(workdir))
    r = runner.invoke(main, ["similarity", "tp.dync", "--region", "circle:1.0,0.0,0.3"])
    assert r.exit_code == 0, r.output


def test_schema_dump(runner, tmp_path):
    out = tmp_path / "schema.json"
    r = runner.invoke(main, ["schema", "--out", str(out)])
    assert r.exit_code == 0, r.output
    schema = json.loads(out.read_text())
    assert "region" in schema["properties"]
    assert schema["properties"]["bins"]["default"] == "auto"
