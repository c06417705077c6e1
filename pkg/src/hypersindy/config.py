"""Run configuration documents and the shipped presets.

A run config is a JSON object with the sections ``system``, ``library``,
``data``, ``train`` and ``evaluation``. Parsing is strict: unknown keys and
wrongly typed values are rejected. Presets live in ``hypersindy/presets``
and can be referred to by name anywhere a config path is accepted.
"""

from __future__ import annotations

import json
from dataclasses import MISSING, dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

from hypersindy.dynamics import system_spec
from hypersindy.evaluation import DEFAULT_SAMPLES, EsindyConfig
from hypersindy.library import LibrarySpec
from hypersindy.training import TrainConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SystemSection:
    name: str = "lorenz"
    sigma: float = 0.0
    n: int = 10


@dataclass(frozen=True)
class LibrarySection:
    max_degree: int = 3
    include_constant: bool = True


@dataclass(frozen=True)
class DataSection:
    steps: int = 10000
    dt: float = 0.01


@dataclass(frozen=True)
class EvaluationSection:
    samples: int = DEFAULT_SAMPLES
    esindy: EsindyConfig = field(default_factory=EsindyConfig)


@dataclass(frozen=True)
class RunConfig:
    system: SystemSection = field(default_factory=SystemSection)
    library: LibrarySection = field(default_factory=LibrarySection)
    data: DataSection = field(default_factory=DataSection)
    train: TrainConfig = field(default_factory=TrainConfig)
    evaluation: EvaluationSection = field(default_factory=EvaluationSection)

    def system_spec(self):
        return system_spec(self.system.name, self.system.sigma, self.system.n)

    def library_spec(self) -> LibrarySpec:
        n = self.system_spec().state_dim
        return LibrarySpec(n, self.library.max_degree, self.library.include_constant)

    def train_config(self, seed: int | None = None) -> TrainConfig:
        return self.train if seed is None else replace(self.train, seed=seed)


_NESTED = {
    RunConfig: {"system": SystemSection, "library": LibrarySection, "data": DataSection,
                "train": TrainConfig, "evaluation": EvaluationSection},
    EvaluationSection: {"esindy": EsindyConfig},
}


def _check_type(where: str, name: str, value, default) -> None:
    if value is None:
        if default is not None:
            raise ConfigError(f"{where}.{name} may not be null")
        return
    if default is None and (isinstance(value, bool) or not isinstance(value, (int, float))):
        raise ConfigError(f"{where}.{name} must be a number or null, got {value!r}")
    if isinstance(default, bool) and not isinstance(value, bool):
        raise ConfigError(f"{where}.{name} must be a boolean, got {value!r}")
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}.{name} must be an integer, got {value!r}")
    if isinstance(default, float) and (isinstance(value, bool) or not isinstance(value, (int, float))):
        raise ConfigError(f"{where}.{name} must be a number, got {value!r}")
    if isinstance(default, str) and not isinstance(value, str):
        raise ConfigError(f"{where}.{name} must be a string, got {value!r}")


def _build(cls, raw, where: str):
    if not isinstance(raw, dict):
        raise ConfigError(f"{where} must be an object")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(raw) - set(known))
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")
    nested = _NESTED.get(cls, {})
    kwargs = {}
    for name, value in raw.items():
        if name in nested:
            kwargs[name] = _build(nested[name], value, f"{where}.{name}")
            continue
        f = known[name]
        default = f.default if f.default is not MISSING else None
        _check_type(where, name, value, default)
        if isinstance(default, float) and isinstance(value, int):
            value = float(value)
        kwargs[name] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def parse_config(raw: dict) -> RunConfig:
    cfg = _build(RunConfig, raw, "config")
    if cfg.train.system != cfg.system.name:
        raise ConfigError(f"train.system={cfg.train.system!r} disagrees with system.name={cfg.system.name!r}")
    try:
        cfg.library_spec()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def preset_names() -> list[str]:
    root = resources.files("hypersindy") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_config(ref: str | Path) -> RunConfig:
    """Parse a config file, or a preset when ``ref`` names one."""
    path = Path(ref)
    if path.suffix != ".json" and not path.exists():
        preset = resources.files("hypersindy") / "presets" / f"{ref}.json"
        if not preset.is_file():
            raise ConfigError(f"no config file or preset named {ref!r}; presets: {', '.join(preset_names())}")
        text = preset.read_text()
    else:
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{ref}: invalid JSON ({exc})") from exc
    return parse_config(raw)
