"""Bundled parameter sets: the four arm systems, the sixteen examples and the two index-plot settings."""
from __future__ import annotations

import hashlib
import json
from functools import lru_cache
from importlib import resources

from .errors import ConfigError
from .models import ArmModel


@lru_cache(maxsize=1)
def load() -> dict:
    with resources.files(__package__).joinpath("data/presets.json").open() as fh:
        return json.load(fh)


def checksum() -> str:
    """SHA-256 of the canonical JSON encoding of the system tables."""
    blob = json.dumps(load()["systems"], sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def _get(table: str, key) -> dict:
    try:
        return load()[table][str(key)]
    except KeyError:
        known = ", ".join(load()[table])
        raise ConfigError(f"unknown {table[:-1]} {key!r} (known: {known})") from None


def system_arms(system) -> tuple[ArmModel, ...]:
    d = _get("systems", system)
    return tuple(ArmModel.of(p01, p11, B) for p01, p11, B in zip(d["p01"], d["p11"], d["B"]))


def example(eid) -> dict:
    return dict(_get("examples", eid))


def figure(fid) -> dict:
    return dict(_get("figures", fid))


def examples_for_system(system) -> list[str]:
    return [k for k, v in load()["examples"].items() if v["system"] == str(system)]
