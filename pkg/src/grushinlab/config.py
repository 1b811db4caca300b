"""Run configuration, output headers and the on-disk eigensolve cache."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .potential import PotentialSpec, make_power_potential, potential_from_config
from .spectral import Grid, SpectralData, discretize, eigensolve

__all__ = ["RunConfig", "ConfigError", "parse_potential", "output_header", "csv_text",
           "json_text", "clean_json", "cached_eigensolve", "CACHE_ENV"]

CACHE_ENV = "GRUSHINLAB_CACHE"


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Fully resolved parameters of one command invocation."""

    command: str
    params: dict = field(default_factory=dict)
    seed: int = 0
    tolerance: float = 0.0
    threads: Optional[int] = None
    out: Optional[str] = None

    def to_dict(self) -> dict:
        return {"command": self.command, "params": self.params, "seed": self.seed,
                "tolerance": self.tolerance, "threads": self.threads, "out": self.out}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        unknown = set(d) - {"command", "params", "seed", "tolerance", "threads", "out"}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(d.get("command", ""), dict(d.get("params", {})), int(d.get("seed", 0)),
                   float(d.get("tolerance", 0.0)), d.get("threads"), d.get("out"))

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        return cls.from_dict(json.loads(text))

    def digest(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()


def parse_potential(spec, n: int = 1) -> PotentialSpec:
    """``power:BETA``, ``power:BETA:C``, ``table:PATH`` or a config mapping."""
    if isinstance(spec, dict):
        return potential_from_config(spec, n)
    parts = str(spec).split(":")
    try:
        if parts[0] == "power" and len(parts) in (2, 3):
            c = float(parts[2]) if len(parts) == 3 else 1.0
            return make_power_potential(c, float(parts[1]), n)
        if parts[0] == "table" and len(parts) >= 2:
            return potential_from_config({"kind": "table", "file": ":".join(parts[1:])}, n)
    except (ValueError, OSError) as exc:
        raise ConfigError(f"bad potential {spec!r}: {exc}") from exc
    raise ConfigError(f"bad potential {spec!r}; expected power:BETA[:C] or table:PATH")


def output_header(cfg: RunConfig) -> dict:
    return {"tool": "grushinlab", "version": __version__, "config": cfg.to_dict()}


def clean_json(x):
    if isinstance(x, dict):
        return {k: clean_json(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [clean_json(v) for v in x]
    if isinstance(x, np.ndarray):
        return clean_json(x.tolist())
    if isinstance(x, (np.floating, float)):
        x = float(x)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def json_text(payload: dict, cfg: RunConfig) -> str:
    body = {"header": output_header(cfg)}
    body.update(clean_json(payload))
    return json.dumps(body, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def csv_text(columns, rows, cfg: RunConfig) -> str:
    """CSV with ``# ``-prefixed header lines carrying the config and version."""
    buf = io.StringIO()
    buf.write("# " + json.dumps(output_header(cfg), sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_csv_cell(row.get(c)) for c in columns])
    return buf.getvalue()


def _csv_cell(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return v


def cached_eigensolve(potential_key, potential: Optional[PotentialSpec], grid: Grid,
                      count: Optional[int] = None, cutoff: Optional[float] = None) -> SpectralData:
    """Eigensolve with memoization in ``$GRUSHINLAB_CACHE`` keyed by a content hash."""
    root = os.environ.get(CACHE_ENV)
    key_src = json.dumps({"potential": potential_key, "grid": grid.to_dict(), "count": count,
                          "cutoff": cutoff, "version": __version__}, sort_keys=True, default=str)
    key = hashlib.sha256(key_src.encode()).hexdigest()
    path = Path(root) / f"{key}.npz" if root else None
    if path is not None and path.exists():
        with np.load(path) as z:
            return SpectralData(grid, z["values"], z["vectors"], float(z["cutoff"]), z["potential"])
    S = eigensolve(discretize(potential, grid), count=count, cutoff=cutoff)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp.npz")
        np.savez(tmp, values=S.values, vectors=S.vectors, cutoff=S.cutoff, potential=S.potential_values)
        os.replace(tmp, path)
    return S
