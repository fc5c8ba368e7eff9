"""Run and benchmark configuration (YAML or JSON files, or plain dicts).

A run config is a small tree::

    method: hva
    params: {lam: 0.08, kappa: 3}
    stft: {window_length: 2048}
    solver: {n_iter: 200, mu1: 1.0, mu2: 1.0, alpha: 1.0}
    report_format: csv

Method parameters are validated against the separator class when the
config is built, so a typo fails before any audio is read.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import asdict, dataclass, field

import yaml

from .estimators import BaseSeparator, make_separator
from .mixgen import MixSpec, det2_harmonic
from .signal import StftConfig

__all__ = ["SCHEMA_VERSION", "RunConfig", "BenchConfig", "load_config", "scenario_spec", "dumps"]

SCHEMA_VERSION = 1

_SOLVER_KEYS = ("n_iter", "mu1", "mu2", "alpha")
_REPORT_FORMATS = ("csv", "json")


def load_config(path) -> dict:
    """Parse a YAML (or JSON, which is valid YAML) file into a dict."""
    with open(path) as fh:
        data = yaml.safe_load(fh)
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ValueError(f"{path}: top level must be a mapping, got {type(data).__name__}")
    return data


def _stft_from(d: dict | None) -> StftConfig:
    d = dict(d or {})
    unknown = set(d) - {"window_length", "hop", "fft_length", "window"}
    if unknown:
        raise ValueError(f"unknown stft keys {sorted(unknown)}")
    return StftConfig(**d)


def _stft_dict(cfg: StftConfig) -> dict:
    return {"window_length": cfg.window_length, "hop": cfg.hop, "fft_length": cfg.fft_length, "window": cfg.window}


@dataclass
class RunConfig:
    """Everything needed to reproduce one separation run.

    Attributes
    ----------
    method : str
        ``fdica``, ``iva``, ``model_iva``, ``hva`` or ``wiener_only``.
    params : dict
        Method parameters (``lam``, ``kappa``, ``gamma``, ``eps``, ``p``,
        ``quefrency_length``, ...).
    stft : StftConfig
    solver : dict
        ``n_iter``, ``mu1``, ``mu2``, ``alpha``.
    n_sources : int, optional
        Expected number of sources; the input must have that many channels.
    report_format : {"csv", "json"}
    """

    method: str = "hva"
    params: dict = field(default_factory=dict)
    stft: StftConfig = field(default_factory=StftConfig)
    solver: dict = field(default_factory=dict)
    n_sources: int | None = None
    report_format: str = "csv"
    input: str | None = None
    output: str | None = None

    def __post_init__(self):
        if isinstance(self.stft, dict):
            self.stft = _stft_from(self.stft)
        unknown = set(self.solver) - set(_SOLVER_KEYS)
        if unknown:
            raise ValueError(f"unknown solver keys {sorted(unknown)}")
        if self.report_format not in _REPORT_FORMATS:
            raise ValueError(f"report_format must be one of {_REPORT_FORMATS}, got {self.report_format!r}")
        self.separator()  # fails early on incompatible parameters

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        unknown = set(d) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ValueError(f"unknown run config keys {sorted(unknown)}")
        return cls(**d)

    def separator(self) -> BaseSeparator:
        return make_separator(self.method, **self.params, **self.solver)

    def to_dict(self) -> dict:
        """Fully resolved config, every default spelled out."""
        est = self.separator().get_params()
        return {
            "method": self.method,
            "params": {k: v for k, v in est.items() if k not in _SOLVER_KEYS},
            "solver": {k: est[k] for k in _SOLVER_KEYS},
            "stft": _stft_dict(self.stft),
            "n_sources": self.n_sources,
            "report_format": self.report_format,
            "input": self.input,
            "output": self.output,
        }


def scenario_spec(scenario: dict, seed: int) -> MixSpec:
    """Mixture spec for one seed of a bench scenario.

    ``{"name": "det2-harmonic", "convolutive": bool, ...overrides}`` uses the
    built-in scenario; anything else is read as a :class:`MixSpec` dict.
    """
    scenario = dict(scenario)
    name = scenario.pop("name", None)
    if name == "det2-harmonic":
        convolutive = bool(scenario.pop("convolutive", False))
        return det2_harmonic(seed, convolutive=convolutive, **scenario)
    if name is not None:
        raise ValueError(f"unknown scenario {name!r}")
    return MixSpec.from_dict({**scenario, "seed": seed})


@dataclass
class BenchConfig:
    """Grid over methods, method parameters and seeds on one scenario.

    ``methods`` is a list of ``{"method": name, "grid": {param: [values]},
    "params": {fixed params}}``; the grid is the Cartesian product.
    ``checkpoints`` are the iterations at which metrics are recorded
    (the final iteration is always included).
    """

    methods: list
    seeds: list = field(default_factory=lambda: list(range(10)))
    scenario: dict = field(default_factory=lambda: {"name": "det2-harmonic", "convolutive": True})
    stft: StftConfig = field(default_factory=StftConfig)
    solver: dict = field(default_factory=dict)
    checkpoints: list = field(default_factory=list)

    def __post_init__(self):
        if isinstance(self.stft, dict):
            self.stft = _stft_from(self.stft)
        if not self.methods:
            raise ValueError("bench config needs at least one method")
        self.seeds = [int(s) for s in self.seeds]
        self.cells()  # validate every parameter combination up front

    @classmethod
    def from_dict(cls, d: dict) -> "BenchConfig":
        d = dict(d)
        unknown = set(d) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ValueError(f"unknown bench config keys {sorted(unknown)}")
        return cls(**d)

    @property
    def n_iter(self) -> int:
        return int(self.solver.get("n_iter", 200))

    def checkpoint_list(self) -> list:
        pts = sorted({int(k) for k in self.checkpoints if 0 < int(k) <= self.n_iter} | {self.n_iter})
        return pts

    def cells(self) -> list:
        """All (method, params, seed) cells in a fixed order, as RunConfigs with ids."""
        out = []
        for entry in self.methods:
            entry = dict(entry)
            method = entry.pop("method")
            grid = dict(entry.pop("grid", {}) or {})
            fixed = dict(entry.pop("params", {}) or {})
            if entry:
                raise ValueError(f"unknown keys {sorted(entry)} in method entry {method!r}")
            keys = sorted(grid)
            for values in itertools.product(*(grid[k] for k in keys)):
                params = {**fixed, **dict(zip(keys, values))}
                run = RunConfig(method=method, params=params, stft=self.stft, solver=dict(self.solver))
                for seed in self.seeds:
                    out.append((_cell_id(method, params, seed), run, seed))
        ids = [c[0] for c in out]
        if len(set(ids)) != len(ids):
            raise ValueError("bench grid contains duplicate cells")
        return out

    def to_dict(self) -> dict:
        d = asdict(self)
        d["stft"] = _stft_dict(self.stft)
        return d


def _cell_id(method: str, params: dict, seed: int) -> str:
    parts = [method] + [f"{k}={params[k]}" for k in sorted(params)] + [f"seed={seed}"]
    return ",".join(parts)


def dumps(d: dict) -> str:
    """Stable JSON rendering used for reports and index files."""
    return json.dumps(d, indent=2, sort_keys=True, default=str) + "\n"
