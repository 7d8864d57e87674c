"""Merged CLI configuration: defaults < config file < command-line flags.

The config file is YAML (JSON works too) with optional sections::

    mfcc:   {alpha: 0.97, frame_len_ms: 25, n_mels: 26, ...}
    attack: {iterations: 10, step_size: 0.001, t_adv_scale: 0.05, mode: away-from-clean}
    mask:   {in_band_gain: 0.2, top_percent: 10, ...}
    stream: {profile: telephone, budget_ms: 450, chunk_ms: 200}
"""
from __future__ import annotations

from dataclasses import dataclass, field

import yaml

from .attack import AttackConfig
from .errors import InvalidConfig
from .masking import MaskParams
from .mfcc import MfccConfig
from .scheduler import LatencyProfile, get_profile

SECTIONS = ("mfcc", "attack", "mask", "stream")
STREAM_KEYS = ("profile", "budget_ms", "chunk_ms")


@dataclass
class CliConfig:
    mfcc: MfccConfig = field(default_factory=MfccConfig)
    attack: AttackConfig = field(default_factory=AttackConfig)
    mask: MaskParams = field(default_factory=MaskParams)
    profile: LatencyProfile = field(default_factory=lambda: get_profile("telephone"))


def load_file(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise InvalidConfig("--config", str(exc)) from exc
    except yaml.YAMLError as exc:
        raise InvalidConfig("--config", f"not valid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise InvalidConfig("--config", "top level must be a mapping")
    for section, body in data.items():
        if section not in SECTIONS:
            raise InvalidConfig(section, f"unknown section; expected one of {SECTIONS}")
        if not isinstance(body, dict):
            raise InvalidConfig(section, "section must be a mapping")
    return data


def _build(cls, section: str, values: dict):
    try:
        return cls.from_dict(values)
    except InvalidConfig as exc:
        raise InvalidConfig(f"{section}.{exc.key}", str(exc).split(": ", 1)[-1]) from exc
    except TypeError as exc:
        raise InvalidConfig(section, str(exc)) from exc


def merge(file_data: dict | None = None, overrides: dict | None = None) -> CliConfig:
    """Combine file values and flag overrides; ``None`` overrides are ignored.

    ``overrides`` uses the same section layout as the file.
    """
    merged = {s: dict((file_data or {}).get(s, {})) for s in SECTIONS}
    for section, values in (overrides or {}).items():
        merged[section].update({k: v for k, v in values.items() if v is not None})

    mfcc_cfg = _build(MfccConfig, "mfcc", merged["mfcc"])
    mask = _build(MaskParams, "mask", merged["mask"])
    attack_cfg = _build(AttackConfig, "attack", {**merged["attack"], "mask_params": mask})

    stream = merged["stream"]
    unknown = set(stream) - set(STREAM_KEYS)
    if unknown:
        raise InvalidConfig(f"stream.{sorted(unknown)[0]}", "unknown stream option")
    try:
        profile = get_profile(stream.get("profile", "telephone"), stream.get("budget_ms"), stream.get("chunk_ms"))
    except InvalidConfig as exc:
        raise InvalidConfig(f"stream.{exc.key}", str(exc).split(": ", 1)[-1]) from exc
    return CliConfig(mfcc_cfg, attack_cfg, mask, profile)
