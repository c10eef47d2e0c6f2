import csv

import numpy as np
import pytest
import yaml
from hypothesis import given
from hypothesis import strategies as st

from attractorlab import io
from attractorlab.config import ConfigError, RunConfig, dump, from_dict, load
from attractorlab.evsys import Ensemble
from attractorlab.phase import PhaseSpace, PointCloud

from conftest import CONFIGS

ALL = sorted(CONFIGS.glob("*.yaml"))


@pytest.mark.parametrize("path", ALL, ids=lambda p: p.stem)
def test_shipped_configs_load_and_round_trip(path):
    cfg = load(path)
    again = from_dict(yaml.safe_load(dump(cfg)))
    assert again == cfg and again.digest() == cfg.digest()


@given(st.integers(0, 2**31), st.floats(1e-6, 1.0), st.sampled_from(["strong", "weak"]))
def test_round_trip_property(seed, tol, metric):
    cfg = from_dict({"instance": "toy-linear", "seed": seed, "metric": metric, "tolerances": {"net": tol}})
    assert from_dict(yaml.safe_load(dump(cfg))) == cfg


@pytest.mark.parametrize(
    "data,path",
    [
        ({"instance": "toy-linear"}, "seed"),
        ({"seed": 1}, "instance"),
        ({"instance": "toy-linear", "seed": 1, "colour": 3}, "colour"),
        ({"instance": "toy-linear", "seed": 1, "toy": {"nu": 1.0, "mass": 2}}, "toy.mass"),
        ({"instance": "toy-linear", "seed": 1, "toy": {"nu": "fast"}}, "toy.nu"),
        ({"instance": "toy-linear", "seed": 1.5}, "seed"),
        ({"instance": "toy-linear", "seed": 1, "tolerances": {"net": 0.0}}, "tolerances.net"),
        ({"instance": "toy-linear", "seed": 1, "tolerances": {"tracking": -1e-3}}, "tolerances.tracking"),
        ({"instance": "lorenz", "seed": 1}, "instance"),
        ({"instance": "nse2d", "seed": 1, "nse": {"integrator": "euler"}}, "nse.integrator"),
        ({"instance": "toy-linear", "seed": 1, "checks": {"eps_grid": [0.1, -1]}}, "checks.eps_grid[1]"),
        ({"instance": "toy-linear", "seed": 1, "symbol": {"kind": "tabulated"}}, "symbol.path"),
    ],
)
def test_config_errors_name_the_field(data, path):
    with pytest.raises(ConfigError) as err:
        from_dict(data)
    assert err.value.path == path
    assert str(err.value).startswith(path)


def test_invalid_yaml(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("instance: [unclosed\n")
    with pytest.raises(ConfigError):
        load(p)


def test_digest_tracks_content():
    a = from_dict({"instance": "toy-linear", "seed": 1})
    b = from_dict({"instance": "toy-linear", "seed": 2})
    assert a.digest() != b.digest()
    assert isinstance(a, RunConfig) and a.tolerances.net > 0


def test_cloud_round_trip(tmp_path):
    space = PhaseSpace("nse2d", 3.0, 2, 2, 2 * np.pi)
    pts = np.random.default_rng(0).normal(size=(7, space.coord_dim)) * 0.1
    c = PointCloud(space, pts, "weak", {"source": "test", "n": np.int64(7)})
    io.write_cloud(tmp_path / "c.csv", c)
    back = io.read_cloud(tmp_path / "c.csv")
    assert np.array_equal(back.points, pts)
    assert back.space == space and back.metric_tag == "weak" and back.provenance["n"] == 7
    with (tmp_path / "c.csv").open() as fh:
        assert next(csv.reader(fh)) == space.column_names()


def test_ensemble_round_trip(tmp_path):
    space = PhaseSpace("toy", 2.0, 3)
    rng = np.random.default_rng(1)
    ens = Ensemble(space, 0.5, 0.01, rng.normal(size=(4, 9, 3)), [f"s{i}" for i in range(4)], PointCloud(space, rng.normal(size=(2, 3)) * 0.1), 11, 0.58, {"k": 1})
    io.write_ensemble(tmp_path / "e.bin", ens, {"note": "x"})
    back = io.read_ensemble(tmp_path / "e.bin")
    assert np.array_equal(back.samples, ens.samples)
    assert (back.t0, back.dt, back.symbol_ids, back.seed, back.horizon, back.meta) == (0.5, 0.01, ens.symbol_ids, 11, 0.58, {"k": 1})
    assert np.array_equal(back.initial.points, ens.initial.points)
    raw = (tmp_path / "e.bin").read_bytes()
    assert raw[:8] == b"ATLENS01"
    # first data column is coordinate 0 of member 0 over time
    assert np.array_equal(np.frombuffer(raw[-ens.samples.size * 8 :], "<f8")[:9], ens.samples[0, :, 0])
    (tmp_path / "junk.bin").write_bytes(b"nope" * 10)
    with pytest.raises(ValueError):
        io.read_ensemble(tmp_path / "junk.bin")
