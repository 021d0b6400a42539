"""TOML run configuration.

Layout (every key optional; defaults are the published hyperparameter and
training-settings tables)::

    seed = 0

    [model]      # MassConfig: d_a, d_e, heads, mlp_ratio, dropout, e, L_p, L_a, L_e, ...
    [schedule]   # ScheduleConfig: total_epochs, warmup_epochs, peak_lr, min_lr
    [weights]    # LossWeights: cosine (lambda_1), transition (lambda_2)
    [train]      # batch_size, mask_mode, r_a, r_e, transition_on, max_steps,
                 # weight_decay, beta1, beta2, checkpoint_every_epoch
"""

from __future__ import annotations

import sys
import typing
from dataclasses import fields

from .model import MassConfig
from .training import LossWeights, ScheduleConfig, TrainConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    """Bad configuration; ``key`` names the offending entry."""

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


SECTIONS = {"model": MassConfig, "schedule": ScheduleConfig, "weights": LossWeights}
TRAIN_KEYS = [f.name for f in fields(TrainConfig) if f.name not in SECTIONS]


def _field_types(cls):
    hints = typing.get_type_hints(cls)
    return {f.name: hints[f.name] for f in fields(cls)}


def _coerce(key, value, kind):
    optional = type(None) in typing.get_args(kind)
    if optional:
        if value is None:
            return None
        kind = next(a for a in typing.get_args(kind) if a is not type(None))
    if kind is bool:
        if not isinstance(value, bool):
            raise ConfigError(key, f"expected true/false, got {value!r}")
        return value
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(key, f"expected an integer, got {value!r}")
        return value
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(key, f"expected a number, got {value!r}")
        return float(value)
    if kind is str:
        if not isinstance(value, str):
            raise ConfigError(key, f"expected a string, got {value!r}")
        return value
    return value


def _section(name, cls, table):
    if not isinstance(table, dict):
        raise ConfigError(name, "expected a table")
    types = _field_types(cls)
    out = {}
    for key, value in table.items():
        path = f"{name}.{key}"
        if key not in types:
            raise ConfigError(path, "unknown key")
        out[key] = _coerce(path, value, types[key])
    try:
        return cls(**out)
    except ValueError as exc:
        raise ConfigError(name, str(exc)) from exc


def build_config(doc: dict):
    """``(TrainConfig, seed or None)`` from a parsed TOML document."""
    doc = dict(doc)
    seed = doc.pop("seed", None)
    if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int) or seed < 0):
        raise ConfigError("seed", f"expected a non-negative integer, got {seed!r}")
    parts = {name: _section(name, cls, doc.pop(name, {})) for name, cls in SECTIONS.items()}
    train = doc.pop("train", {})
    for key in doc:
        raise ConfigError(key, "unknown key")
    if not isinstance(train, dict):
        raise ConfigError("train", "expected a table")
    types = _field_types(TrainConfig)
    kw = {}
    for key, value in train.items():
        if key not in TRAIN_KEYS:
            raise ConfigError(f"train.{key}", "unknown key")
        kw[key] = _coerce(f"train.{key}", value, types[key])
    try:
        cfg = TrainConfig(**parts, **kw)
    except ValueError as exc:
        raise ConfigError("train", str(exc)) from exc
    return cfg, seed


def parse_override(text):
    """``section.key=value`` with a TOML literal (bare words are read as strings)."""
    if "=" not in text or "." not in text.split("=", 1)[0]:
        raise ConfigError(text, "override must look like section.key=value")
    path, raw = text.split("=", 1)
    section, key = path.strip().split(".", 1)
    try:
        value = tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw.strip()
    return section, key, value


def load_config(path=None, overrides=()):
    doc = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                doc = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(str(path), f"not valid TOML ({exc})") from exc
    for text in overrides:
        section, key, value = parse_override(text)
        doc.setdefault(section, {})[key] = value
    return build_config(doc)


def to_toml(cfg: TrainConfig, seed=None) -> str:
    """Resolved configuration in the same layout ``load_config`` reads."""
    d = cfg.to_dict()
    lines = [] if seed is None else [f"seed = {seed}", ""]
    for name in SECTIONS:
        lines.append(f"[{name}]")
        lines += [f"{k} = {_literal(v)}" for k, v in d[name].items()]
        lines.append("")
    lines.append("[train]")
    lines += [f"{k} = {_literal(d[k])}" for k in TRAIN_KEYS if d[k] is not None]
    return "\n".join(lines) + "\n"


def _literal(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return f'"{v}"'
    return repr(v)
