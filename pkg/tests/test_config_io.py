import json

import numpy as np
import pytest

from wfibp.config import ConfigError, RunConfig, load_config, parse_config
from wfibp.io import (
    RunManifest,
    SampleStore,
    hash_inputs,
    load_arrays,
    load_series,
    read_checkpoint,
    read_csv,
    save_arrays,
    save_series,
    write_checkpoint,
    write_csv,
)
from wfibp.rng import make_rng, split, substream


def test_defaults_are_linear_gaussian_setting():
    cfg = RunConfig().validate()
    assert (cfg.K, cfg.N, cfg.n_times, cfg.duration) == (3, 50, 40, 0.01)
    assert (cfg.lingauss.D, cfg.lingauss.sigmaX) == (30, 0.5)
    assert (cfg.iterations, cfg.burn_in) == (2000, 200)
    assert len(cfg.grid()) == 40


def test_round_trip_json():
    cfg = RunConfig(K=0, likelihood="topic", topic={"D": 50, "eta": 0.2}, xor_moves=True)
    back = parse_config(cfg.to_json())
    assert back == cfg
    assert back.mcmc().xor_moves


def test_unknown_key_line():
    text = '{\n  "alpha": 2.0,\n  "bogus": 1\n}'
    with pytest.raises(ConfigError, match=r"<config>:3: unknown key 'bogus'"):
        parse_config(text)


def test_syntax_error_line():
    with pytest.raises(ConfigError, match=r":3:"):
        parse_config('{\n  "alpha": 2.0,\n  "beta": ,\n}')


def test_invalid_value_line():
    text = '{\n  "alpha": 2.0,\n  "iterations": 10,\n  "burn_in": 50\n}'
    with pytest.raises(ConfigError, match=r":4: burn_in must be smaller"):
        parse_config(text)


def test_nested_unknown_key_line():
    text = '{\n  "likelihood": "lingauss",\n  "lingauss": {"sigmaX": 0.5, "nope": 1}\n}'
    with pytest.raises(ConfigError, match=r":3:"):
        parse_config(text)


def test_nested_invalid_value():
    text = '{\n  "likelihood": "lingauss",\n  "lingauss": {\n    "sigmaX": -1\n  }\n}'
    with pytest.raises(ConfigError, match=r":4:"):
        parse_config(text)


def test_top_level_must_be_object():
    with pytest.raises(ConfigError):
        parse_config("[1, 2]")


def test_load_config(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"K": 4, "seed": 3}))
    cfg = load_config(p)
    assert cfg.K == 4 and cfg.seed == 3
    assert cfg.truth() == (4, 4.0, 1.0)


def test_explicit_times():
    cfg = RunConfig(times=[0.0, 0.5, 0.7]).validate()
    np.testing.assert_allclose(cfg.grid().durations, [0.5, 0.2])


def test_substreams_are_order_independent():
    a1 = substream(5, "x").random(3)
    substream(5, "y").random(10)
    a2 = substream(5, "x").random(3)
    assert np.array_equal(a1, a2)
    assert not np.array_equal(substream(5, "x").random(3), substream(6, "x").random(3))
    assert not np.array_equal(substream(5, "x", 1).random(3), substream(5, "x", 2).random(3))
    g = np.random.default_rng(1)
    assert make_rng(g) is g
    assert len(split(g, 3)) == 3


def test_arrays_and_series(tmp_path):
    save_arrays(tmp_path / "a", {"x": np.arange(3), "y": np.eye(2)})
    back = load_arrays(tmp_path / "a")
    assert set(back) == {"x", "y"}
    save_series(tmp_path / "s", "Z", [np.zeros((2, 1)), np.ones((3, 1))])
    ser = load_series(load_arrays(tmp_path / "s"), "Z")
    assert [s.shape for s in ser] == [(2, 1), (3, 1)]
    with pytest.raises(FileNotFoundError):
        load_arrays(tmp_path / "missing")


def test_npy_output_is_byte_stable(tmp_path):
    save_arrays(tmp_path / "a", {"x": np.arange(5.0)})
    save_arrays(tmp_path / "b", {"x": np.arange(5.0)})
    assert (tmp_path / "a" / "x.npy").read_bytes() == (tmp_path / "b" / "x.npy").read_bytes()


def test_manifest(tmp_path):
    (tmp_path / "f.txt").write_text("hello")
    m = RunManifest({"a": 1}, 7, hash_inputs(tmp_path), command="generate")
    m.write(tmp_path, wall_clock=1.25)
    back = RunManifest.read(tmp_path)
    assert back.seed == 7 and back.inputs == m.inputs and back.config == {"a": 1}
    assert json.loads((tmp_path / "timing.json").read_text())["wall_clock_seconds"] == 1.25
    assert "f.txt" in back.inputs and "manifest.json" not in hash_inputs(tmp_path)
    with pytest.raises(FileNotFoundError):
        RunManifest.read(tmp_path / "nope")


def test_sample_store_and_checkpoint(tmp_path):
    st = SampleStore(tmp_path)
    st.write_chunk(0, [1, 2])
    st.write_chunk(1, [3])
    assert list(st) == [1, 2, 3] and len(st) == 3
    st.truncate(1)
    assert list(st) == [1, 2]
    assert read_checkpoint(tmp_path) is None
    write_checkpoint(tmp_path, {"k": 5})
    assert read_checkpoint(tmp_path) == {"k": 5}


def test_csv_full_precision(tmp_path):
    x = 0.1 + 0.2
    write_csv(tmp_path / "t.csv", ["a", "b"], [[np.int64(3), np.float64(x)]])
    header, rows = read_csv(tmp_path / "t.csv")
    assert header == ["a", "b"] and float(rows[0][1]) == x and rows[0][0] == "3"
