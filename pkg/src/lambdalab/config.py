"""Experiment configuration: a TOML file with a fixed set of tables and keys."""
from __future__ import annotations

import copy
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import tomlkit

STEPS = ("energy", "twist", "dual", "residue", "lightcone")
FORMATS = ("json", "csv")

DEFAULT_TOLERANCES = {
    "flatness": 1e-8,
    "energy_invariance": 1e-9,
    "twist_relation": 1e-8,
    "degree_integrality": 1e-6,
    "block_identity": 1e-8,
    "dual_relation": 1e-8,
    "residue_identity": 1e-10,
    "lightcone_q": 1e-8,
    "so5_connection": 1e-5,
    "dual_connection": 1e-6,
    "willmore_algebraic": 1e-10,
    "willmore_geometric": 1e-4,
    "mean_curvature": 1e-4,
}

_SCHEMA = {
    "domain": {"kind", "resolution", "modulus", "x_range", "y_range"},
    "solution": {"target", "solver", "q", "u_init", "du_init", "seed"},
    "pipeline": {"steps"},
    "tolerances": set(DEFAULT_TOLERANCES),
    "output": {"dir", "formats"},
}
_REQUIRED = {"domain": {"kind", "resolution"}, "solution": {"target", "solver", "q"}}


class ConfigError(ValueError):
    pass


def _plain(obj):
    """tomlkit containers to builtin dicts/lists/scalars."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_plain(v) for v in obj]
    if hasattr(obj, "unwrap"):
        return obj.unwrap()
    return obj


@dataclass
class ExperimentConfig:
    domain: dict
    solution: dict
    steps: list = field(default_factory=list)
    tolerances: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        d, s = self.domain, self.solution
        if d["kind"] not in ("torus", "patch"):
            raise ConfigError(f"domain.kind must be 'torus' or 'patch', got {d['kind']!r}")
        res = d["resolution"]
        if not (isinstance(res, list) and len(res) == 2 and all(isinstance(n, int) for n in res)):
            raise ConfigError("domain.resolution must be a pair of integers")
        if s["target"] not in ("H3", "S3"):
            raise ConfigError(f"solution.target must be 'H3' or 'S3', got {s['target']!r}")
        if s["solver"] not in ("constant", "strip"):
            raise ConfigError(f"solution.solver must be 'constant' or 'strip', got {s['solver']!r}")
        if s["solver"] == "strip" and d["kind"] != "patch":
            raise ConfigError("the strip solver needs a patch domain")
        if s["solver"] == "constant" and d["kind"] != "torus":
            raise ConfigError("the constant solver is used on torus domains")
        if not (isinstance(s["q"], list) and len(s["q"]) == 2):
            raise ConfigError("solution.q must be [re, im]")
        for step in self.steps:
            if step not in STEPS:
                raise ConfigError(f"unknown pipeline step {step!r} (known: {', '.join(STEPS)})")
        for k, v in self.tolerances.items():
            if not isinstance(v, (int, float)) or v < 0:
                raise ConfigError(f"tolerance {k} must be a non-negative number")
        for f in self.output.get("formats", []):
            if f not in FORMATS:
                raise ConfigError(f"unknown report format {f!r}")

    @property
    def q(self) -> complex:
        return complex(*self.solution["q"])

    @property
    def seed(self) -> int:
        return int(self.solution.get("seed", 0))

    @property
    def formats(self):
        return list(self.output.get("formats", ["json"]))

    def tolerance(self, key):
        return float(self.tolerances.get(key, DEFAULT_TOLERANCES[key]))

    def to_dict(self):
        out = {"domain": self.domain, "solution": self.solution,
               "pipeline": {"steps": self.steps}}
        if self.tolerances:
            out["tolerances"] = self.tolerances
        if self.output:
            out["output"] = self.output
        return copy.deepcopy(out)

    def to_toml(self) -> str:
        return tomlkit.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data, name=""):
        for table, keys in data.items():
            if table not in _SCHEMA:
                raise ConfigError(f"unknown table [{table}]")
            if not isinstance(keys, dict):
                raise ConfigError(f"[{table}] must be a table")
            extra = set(keys) - _SCHEMA[table]
            if extra:
                raise ConfigError(f"unknown key(s) in [{table}]: {', '.join(sorted(extra))}")
        for table, keys in _REQUIRED.items():
            missing = keys - set(data.get(table, {}))
            if missing:
                raise ConfigError(f"missing key(s) in [{table}]: {', '.join(sorted(missing))}")
        data = copy.deepcopy(data)
        return cls(data["domain"], data["solution"], list(data.get("pipeline", {}).get("steps", [])),
                   dict(data.get("tolerances", {})), dict(data.get("output", {})), name)

    @classmethod
    def from_toml(cls, text, name=""):
        try:
            doc = tomlkit.parse(text)
        except tomlkit.exceptions.ParseError as exc:
            raise ConfigError(f"TOML parse error: {exc}") from exc
        return cls.from_dict(_plain(doc), name)


def bundled_configs():
    return sorted(p.name[:-5] for p in resources.files("lambdalab.configs").iterdir()
                  if p.name.endswith(".toml"))


def load_config(path_or_name) -> ExperimentConfig:
    """Read a config file, or a bundled config by name (e.g. ``s3_constant_twist``)."""
    p = Path(path_or_name)
    if p.is_file():
        return ExperimentConfig.from_toml(p.read_text(), name=p.stem)
    if str(path_or_name) in bundled_configs():
        text = resources.files("lambdalab.configs").joinpath(f"{path_or_name}.toml").read_text()
        return ExperimentConfig.from_toml(text, name=str(path_or_name))
    raise ConfigError(f"no config file or bundled config named {path_or_name!r}")
