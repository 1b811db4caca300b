import json
import math

import numpy as np
import pytest

from grushinlab.config import (CACHE_ENV, ConfigError, RunConfig, cached_eigensolve, clean_json, csv_text,
                               json_text, parse_potential)
from grushinlab.spectral import Grid


def test_run_config_round_trip():
    cfg = RunConfig("eigs", {"N": 10, "V": "power:2"}, seed=3, tolerance=0.1)
    back = RunConfig.from_json(cfg.to_json())
    assert back == cfg and back.digest() == cfg.digest()
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"command": "x", "bogus": 1})


def test_parse_potential():
    assert parse_potential("power:2").params == (1.0, 1.0, 2.0, 2.0)
    assert parse_potential("power:4:3").params == (3.0, 3.0, 4.0, 4.0)
    assert parse_potential({"kind": "power", "c": 2, "beta": 1}).params == (2.0, 2.0, 1.0, 1.0)
    for bad in ("power", "quartic:2", "power:x", "table:/no/such/file.csv"):
        with pytest.raises(ConfigError):
            parse_potential(bad)


def test_clean_json():
    out = clean_json({"a": np.float64(1.5), "b": [math.inf, -math.inf, math.nan], "c": np.arange(2),
                      "d": np.bool_(True)})
    assert out == {"a": 1.5, "b": ["inf", "-inf", None], "c": [0, 1], "d": True}
    json.dumps(out)


def test_outputs_carry_header():
    cfg = RunConfig("x", {"p": 1})
    body = json.loads(json_text({"value": 2.0}, cfg))
    assert body["header"]["config"]["params"] == {"p": 1}
    assert body["header"]["tool"] == "grushinlab"
    text = csv_text(["a", "b"], [{"a": 0.1, "b": None}], cfg)
    first, cols, row = text.splitlines()
    assert json.loads(first[2:])["config"]["command"] == "x"
    assert cols == "a,b" and row == "0.1,"


def test_cache_round_trip(tmp_path, monkeypatch):
    monkeypatch.setenv(CACHE_ENV, str(tmp_path))
    g = Grid(1, 5.0, 50)
    V = parse_potential("power:2")
    a = cached_eigensolve("power:2", V, g, count=4)
    files = list(tmp_path.glob("*.npz"))
    assert len(files) == 1
    b = cached_eigensolve("power:2", V, g, count=4)
    np.testing.assert_array_equal(a.values, b.values)
    np.testing.assert_array_equal(a.vectors, b.vectors)
    cached_eigensolve("power:2", V, g, count=5)
    assert len(list(tmp_path.glob("*.npz"))) == 2
