"""Experiment configuration: dataclass, key=value files and manifests."""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path

from ..solver import DEFAULT_NODE_CAP, DEFAULT_SOLUTION_CAP

EXPERIMENTS = (
    "cost-peak",
    "cost-vs-ratio-controlled",
    "nsolutions",
    "search-behavior",
    "robustness-vs-ratio",
    "robustness-correlation",
    "bms-interpolation",
    "uf-bc",
)

# the m/n grid between 90% and 20% satisfiable at n=100
REFERENCE_RATIOS = (4.03, 4.11, 4.18, 4.23, 4.29, 4.35, 4.41, 4.49)
BACKBONE_FRACTIONS = (0.1, 0.5, 0.9)
MR_SCHEDULE = (0, 5, 10, 20, 40, 80)
PROCEDURES = ("preserve", "random", "reduce")

# projected flips above which a run is reported as large
WORK_WARN_FLIPS = 5 * 10**10

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    n: int = 50
    ratios: tuple[float, ...] = (4.3,)
    instances: int = 200
    runs: int = 250
    backbone_targets: tuple[float, ...] = ()
    noise: float = 0.55
    root_seed: int = 0
    workers: int = 1
    out_dir: str = "results"
    k: int = 3
    max_flips: int = 10**7
    gen_budget: int = 200_000
    node_cap: int = DEFAULT_NODE_CAP
    solution_cap: int = DEFAULT_SOLUTION_CAP
    probes: tuple[int, ...] = (5,)
    m_r: tuple[int, ...] = MR_SCHEDULE
    procedures: tuple[str, ...] = PROCEDURES
    min_trials: int = 100
    rel_se: float = 0.05
    max_trials: int = 5000
    halving: str = "floor"
    percentiles: tuple[int, ...] = (10, 20, 30, 40, 50, 60, 70, 80, 90)
    top_fraction: float = 0.1
    bootstrap_b: int = 1000
    permutations: int = 1000
    save_instances: bool = True

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}; one of {', '.join(EXPERIMENTS)}")
        if self.n < self.k or self.instances < 1 or self.runs < 1 or not self.ratios:
            raise ValueError("need n >= k, instances >= 1, runs >= 1 and a nonempty ratio grid")
        if any(not 0.0 <= f <= 1.0 for f in self.backbone_targets):
            raise ValueError("backbone targets are fractions of n in [0, 1]")
        if any(p not in PROCEDURES for p in self.procedures):
            raise ValueError(f"procedures must be drawn from {PROCEDURES}")
        if not 0.0 <= self.noise <= 1.0:
            raise ValueError("noise must lie in [0, 1]")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def targets(self) -> tuple[int | None, ...]:
        """Absolute backbone targets; ``(None,)`` when sizes are not controlled."""
        if not self.backbone_targets:
            return (None,)
        return tuple(int(round(f * self.n)) for f in self.backbone_targets)

    def cells(self) -> list[tuple[float, int | None]]:
        return [(r, t) for r in self.ratios for t in self.targets()]

    def projected_flips(self, typical_cost: float = 2000.0) -> float:
        scale = math.exp((self.n - 50) / 15.0)
        return len(self.cells()) * self.instances * self.runs * typical_cost * scale

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return {f.name: _plain(getattr(self, f.name)) for f in dataclasses.fields(self)}

    def to_text(self) -> str:
        lines = []
        for k, v in self.to_dict().items():
            if isinstance(v, list):
                v = ",".join(str(x) for x in v)
            lines.append(f"{k} = {v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name: f for f in dataclasses.fields(cls)}
        bad = set(d) - set(known)
        if bad:
            raise ValueError(f"unknown config keys: {', '.join(sorted(bad))}")
        return cls(**{k: _coerce(known[k], v) for k, v in d.items()})


def _plain(v):
    return list(v) if isinstance(v, tuple) else v


def _coerce(f: dataclasses.Field, v):
    t = str(f.type)
    if t.startswith("tuple"):
        if isinstance(v, str):
            v = [x.strip() for x in v.split(",") if x.strip()]
        inner = t[len("tuple["):].split(",")[0].strip()
        conv = {"float": float, "int": _int, "str": str}[inner]
        return tuple(conv(x) for x in v)
    if t == "int":
        return _int(v)
    if t == "float":
        return float(v)
    if t == "bool":
        if isinstance(v, str):
            if v.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(f"{f.name}: not a boolean: {v!r}")
            return v.lower() in ("true", "1", "yes")
        return bool(v)
    return str(v)


def _int(v) -> int:
    """Integers, also written as ``10**7`` or ``1e7``."""
    if isinstance(v, str):
        v = v.strip().replace("_", "")
        if "**" in v:
            base, exp = v.split("**", 1)
            return int(base) ** int(exp)
        if "e" in v.lower():
            x = float(v)
            if x != int(x):
                raise ValueError(f"not an integer: {v!r}")
            return int(x)
    return int(v)


def parse_config_text(text: str) -> dict:
    """``key = value`` lines; ``#`` starts a comment; keys may use dashes."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def load_config(path, **overrides) -> ExperimentConfig:
    d = parse_config_text(Path(path).read_text())
    d.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig.from_dict(d)


def manifest(config: ExperimentConfig, outputs: dict[str, str], extra: dict | None = None) -> str:
    from .. import __version__

    doc = {
        "schema_version": SCHEMA_VERSION,
        "package_version": __version__,
        "config": config.to_dict(),
        "outputs": outputs,
    }
    if extra:
        doc.update(extra)
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"
