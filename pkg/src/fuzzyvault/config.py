"""Flat ``key = value`` experiment configuration.

Lines starting with ``#`` are comments.  Keys cover the system parameters,
the synthetic noise model and a few experiment settings; unknown keys are
rejected so typos cannot silently fall back to defaults.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .geometry import Ellipse
from .synth import NoiseModel
from .vault import SystemParams


class MalformedConfig(ValueError):
    pass


@dataclass
class Experiment:
    seed: int = 0
    n_users: int = 100
    per_finger_count: int = 30
    mu: float | None = None          # None -> tabulated match rate for (u, delta_v)
    tau: float = 50.0
    target_bits: float = 68.0
    log_base: float = 2.0
    recapture: int = 3


@dataclass
class Config:
    params: SystemParams = field(default_factory=SystemParams)
    noise: NoiseModel = field(default_factory=NoiseModel)
    experiment: Experiment = field(default_factory=Experiment)

    def to_text(self) -> str:
        lines = ["# system parameters"]
        for f in dataclasses.fields(self.params):
            v = getattr(self.params, f.name)
            lines.append(f"{f.name} = {v.header() if isinstance(v, Ellipse) else _fmt(v)}")
        lines.append("# noise model")
        for f in dataclasses.fields(self.noise):
            lines.append(f"{f.name} = {_fmt(getattr(self.noise, f.name))}")
        lines.append("# experiment")
        for f in dataclasses.fields(self.experiment):
            lines.append(f"{f.name} = {_fmt(getattr(self.experiment, f.name))}")
        return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, tuple):
        return ",".join(str(x) for x in v)
    return str(v)


def _parse_value(raw: str, current, key: str):
    raw = raw.strip()
    low = raw.lower()
    if low == "none":
        return None
    if isinstance(current, bool):
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise MalformedConfig(f"{key}: expected a boolean, got {raw!r}")
    if isinstance(current, Ellipse):
        return Ellipse.parse(raw)
    if isinstance(current, tuple):
        return tuple(float(x) for x in raw.split(","))
    if isinstance(current, int):
        return int(raw)
    return float(raw)


# keys whose default is None need an explicit type
_OPTIONAL = {"d": int, "q": int, "expected_correct": float, "mu": float}


def parse_config(text: str) -> Config:
    cfg = Config()
    targets = {}
    for part in (cfg.params, cfg.noise, cfg.experiment):
        for f in dataclasses.fields(part):
            targets[f.name] = part
    seen = set()
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise MalformedConfig(f"line {n}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in targets:
            raise MalformedConfig(f"line {n}: unknown key {key!r}")
        if key in seen:
            raise MalformedConfig(f"line {n}: duplicate key {key!r}")
        seen.add(key)
        obj = targets[key]
        current = getattr(obj, key)
        try:
            if current is None and raw.strip().lower() != "none":
                value = _OPTIONAL[key](raw)
            else:
                value = _parse_value(raw, current, key)
        except (ValueError, KeyError) as exc:
            raise MalformedConfig(f"line {n}: bad value for {key}: {exc}") from None
        setattr(obj, key, value)
    # re-derive defaults that depend on other keys
    p = cfg.params
    if "d" not in seen:
        p.d = None
    if "q" not in seen:
        p.q = None
    try:
        cfg.params = SystemParams(**{f.name: getattr(p, f.name) for f in dataclasses.fields(p)})
        cfg.params.validate()
        cfg.noise = NoiseModel(**dataclasses.asdict(cfg.noise))
    except ValueError as exc:
        raise MalformedConfig(str(exc)) from None
    return cfg


def load_config(path=None) -> Config:
    if path is None:
        cfg = Config()
        cfg.params.validate()
        return cfg
    return parse_config(Path(path).read_text())
