"""Run configuration: INI loading, canonical hashing, and run manifests.

A config file is a flat INI document with sections ``[demand]``,
``[inventory]``, ``[experiment]``, ``[grid]``, and optionally ``[model]``.
Every key has a default matching the shipped order-quantity experiment, and
defaults participate in hashing: the hash covers the *effective*
configuration, canonicalized as JSON with sorted keys and normalized
numerals, so "10" and "10.0" hash identically for float-typed keys.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import time
from dataclasses import dataclass, field

from .errors import ConfigError
from .experiments import ExperimentConfig, default_delta_grid
from .models import (
    DemandMixtureParams,
    InventoryParams,
    RewardModel,
    constant_reward,
    inventory_reward,
    quadratic_reward,
)

_SCHEMA = {
    "demand": {"m": 250.0, "mu1": 10.0, "mu2": 60.0, "p": 0.9},
    "inventory": {"r": 10.0, "c": 9.0, "s": 0.0, "q": 0.0},
    "experiment": {
        "n": 30,
        "n_datasets": 5000,
        "bootstrap_datasets": 500,
        "bootstrap_resamples": 50,
        "master_seed": 1729,
    },
    "grid": {"log10_min": -5.0, "log10_max": -1.0, "points_per_side": 81},
    "model": {"kind": "inventory", "value": 0.0},
}

_MODEL_KINDS = ("inventory", "quadratic", "constant")


@dataclass(frozen=True)
class FullConfig:
    """Effective configuration: experiment inputs plus the model selector."""

    experiment: ExperimentConfig
    model_kind: str
    model_value: float
    canonical: dict = field(repr=False)

    def build_model(self) -> RewardModel:
        if self.model_kind == "inventory":
            return inventory_reward(self.experiment.inventory)
        if self.model_kind == "quadratic":
            return quadratic_reward(1)
        return constant_reward(self.model_value)


def _coerce(section: str, key: str, raw, default):
    if isinstance(default, str):
        value = str(raw).strip().lower()
        if key == "kind" and value not in _MODEL_KINDS:
            raise ConfigError(
                f"[{section}] {key} must be one of {', '.join(_MODEL_KINDS)}"
            )
        return value
    try:
        if isinstance(default, int) and not isinstance(default, bool):
            return int(str(raw).strip())
        return float(str(raw).strip())
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}={raw!r} is not a number") from exc


def _effective_mapping(parser: configparser.ConfigParser | None) -> dict:
    mapping = {}
    seen_sections = set(parser.sections()) if parser is not None else set()
    unknown = seen_sections - set(_SCHEMA)
    if unknown:
        raise ConfigError(f"unknown config sections: {', '.join(sorted(unknown))}")
    for section, keys in _SCHEMA.items():
        mapping[section] = {}
        present = (
            dict(parser.items(section))
            if parser is not None and parser.has_section(section)
            else {}
        )
        unknown_keys = set(present) - set(keys)
        if unknown_keys:
            raise ConfigError(
                f"unknown keys in [{section}]: {', '.join(sorted(unknown_keys))}"
            )
        for key, default in keys.items():
            raw = present.get(key, default)
            mapping[section][key] = _coerce(section, key, raw, default)
    return mapping


def _config_from_mapping(mapping: dict) -> FullConfig:
    dem = DemandMixtureParams(**mapping["demand"])
    inv = InventoryParams(**mapping["inventory"])
    grid = default_delta_grid(
        mapping["grid"]["log10_min"],
        mapping["grid"]["log10_max"],
        mapping["grid"]["points_per_side"],
    )
    exp = mapping["experiment"]
    experiment = ExperimentConfig(
        demand=dem,
        inventory=inv,
        n=exp["n"],
        n_datasets=exp["n_datasets"],
        delta_grid=grid,
        bootstrap_resamples=exp["bootstrap_resamples"],
        bootstrap_datasets=exp["bootstrap_datasets"],
        master_seed=exp["master_seed"],
    )
    return FullConfig(
        experiment=experiment,
        model_kind=mapping["model"]["kind"],
        model_value=mapping["model"]["value"],
        canonical=mapping,
    )


def default_config() -> FullConfig:
    """The effective configuration when no file overrides anything."""
    return _config_from_mapping(_effective_mapping(None))


def load_config(path) -> FullConfig:
    """Load and validate an INI config; raises ConfigError on any problem."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    return _config_from_mapping(_effective_mapping(parser))


def config_hash(config: FullConfig) -> str:
    """SHA-256 of the canonical JSON rendering of the effective config."""
    blob = json.dumps(config.canonical, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("ascii")).hexdigest()


@dataclass(frozen=True)
class RunManifest:
    """Machine-readable record accompanying every CLI output."""

    config_hash: str
    tool_version: str
    master_seed: int
    subcommand: str
    output_paths: list[str]
    wall_time_seconds: float
    details: dict

    def to_dict(self) -> dict:
        return {
            "config_hash": self.config_hash,
            "tool_version": self.tool_version,
            "master_seed": self.master_seed,
            "subcommand": self.subcommand,
            "output_paths": list(self.output_paths),
            "wall_time_seconds": self.wall_time_seconds,
            "details": self.details,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())
            fh.write("\n")


class Stopwatch:
    """Tiny wall-clock helper for manifest timings."""

    def __init__(self):
        self.start = time.monotonic()

    def elapsed(self) -> float:
        return time.monotonic() - self.start
