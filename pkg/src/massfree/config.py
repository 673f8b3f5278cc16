"""Run configuration: ``key = value`` files with ``#`` comments.

Recognized keys and defaults::

    scenario        (required) advection1d | rotating-gaussian
    mesh            (required) interval:N[:periodic] | rectangle:NX:NY[:periodic]
                    | disk:LEVEL[:split] | path to an ASCII mesh file
    elements        b2            p1 | b2 | p2
    scheme          jump          jump | supg
    bc              auto          auto | periodic | inflow
    time_order      3             2 | 3
    corrections     (time_order)
    cfl             0.5
    t_final         1.0           rotations for rotating-gaussian
    output          out
    snapshot_every  0             0 writes the final field only
    oracle          false         also run consistent-mass SSP-RK3
    l1_variant      faithful      faithful | mass-only
    tau_basis       geometric     geometric | native
    jump_scale      auto          auto = 0.1 / degree**3.5, or a number
    pg_mass         false
    meshes          (converge only) comma-separated mesh entries
    wave, speed                   advection1d parameters
    omega, exponent, center       rotating-gaussian parameters
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

from .mesh import Disk, Interval, Rectangle

OUTPUT_ROOT_ENV = "MASSFREE_OUTPUT_ROOT"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    scenario: str
    mesh: str
    elements: str = "b2"
    scheme: str = "jump"
    bc: str = "auto"
    time_order: int = 3
    corrections: Optional[int] = None
    cfl: float = 0.5
    t_final: float = 1.0
    output: str = "out"
    snapshot_every: int = 0
    oracle: bool = False
    l1_variant: str = "faithful"
    tau_basis: str = "geometric"
    jump_scale: Optional[float] = None  # None = degree-scaled default
    pg_mass: bool = False
    meshes: tuple = ()
    wave: str = "sine"
    speed: float = 1.0
    omega: float = 2.0 * math.pi
    exponent: float = 40.0
    center: tuple = (0.0, 0.0)
    base_dir: str = field(default=".", compare=False)

    def output_dir(self) -> Path:
        out = Path(self.output)
        root = os.environ.get(OUTPUT_ROOT_ENV)
        if not out.is_absolute() and root:
            out = Path(root) / out
        return out

    def scenario_params(self) -> dict:
        if self.scenario == "advection1d":
            return {"wave": self.wave, "speed": self.speed}
        return {"omega": self.omega, "exponent": self.exponent, "center": self.center}


_CHOICES = {
    "scenario": ("advection1d", "rotating-gaussian"),
    "elements": ("p1", "b2", "p2"),
    "scheme": ("jump", "supg"),
    "bc": ("auto", "periodic", "inflow"),
    "l1_variant": ("faithful", "mass-only"),
    "tau_basis": ("geometric", "native"),
    "wave": ("sine", "gaussian", "zero", "constant"),
}

_ALIASES = {"rotating_gaussian": "rotating-gaussian", "rotatinggaussian": "rotating-gaussian",
            "advection-1d": "advection1d", "mass_only": "mass-only"}


def _bool(text: str) -> bool:
    t = text.lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _convert(key: str, text: str):
    if key in ("time_order", "snapshot_every"):
        return int(text)
    if key == "corrections":
        return None if text.lower() in ("", "auto", "default") else int(text)
    if key in ("cfl", "t_final", "speed", "omega", "exponent"):
        return float(text)
    if key == "jump_scale":
        return None if text.lower() == "auto" else float(text)
    if key in ("oracle", "pg_mass"):
        return _bool(text)
    if key == "center":
        parts = [float(p) for p in text.replace(" ", "").split(",")]
        if len(parts) != 2:
            raise ValueError("center needs two coordinates")
        return tuple(parts)
    if key == "meshes":
        return tuple(p.strip() for p in text.split(",") if p.strip())
    value = text.strip().lower()
    value = _ALIASES.get(value, value)
    if key in _CHOICES and value not in _CHOICES[key]:
        raise ValueError(f"expected one of {', '.join(_CHOICES[key])}")
    return value if key in _CHOICES else text.strip()


_KEYS = {f.name for f in fields(RunConfig)} - {"base_dir"}


def parse_config(text: str, *, base_dir: str = ".", overrides=()) -> RunConfig:
    """Parse configuration text; ``overrides`` are extra ``key=value`` strings."""
    values: dict = {}
    lines = [(n, ln) for n, ln in enumerate(text.splitlines(), start=1)]
    lines += [(f"override {i + 1}", ov) for i, ov in enumerate(overrides)]
    for where, raw in lines:
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {where}: expected 'key = value', got {raw.strip()!r}")
        key, _, val = (s.strip() for s in line.partition("="))
        key = key.lower().replace("-", "_")
        if key not in _KEYS:
            raise ConfigError(f"line {where}: unknown key {key!r}")
        try:
            values[key] = _convert(key, val)
        except ValueError as exc:
            raise ConfigError(f"line {where}: invalid value for {key!r}: {exc}") from None
    missing = [k for k in ("scenario", "mesh") if k not in values]
    if missing:
        raise ConfigError(f"missing required key(s): {', '.join(missing)}")
    cfg = RunConfig(base_dir=str(base_dir), **values)
    validate(cfg)
    return cfg


def load_config(path, overrides=()) -> RunConfig:
    path = Path(path)
    return parse_config(path.read_text(encoding="utf-8"), base_dir=str(path.parent),
                        overrides=overrides)


def validate(cfg: RunConfig) -> None:
    if not cfg.cfl > 0:
        raise ConfigError(f"cfl must be positive, got {cfg.cfl}")
    if not cfg.t_final > 0:
        raise ConfigError(f"t_final must be positive, got {cfg.t_final}")
    if cfg.time_order not in (2, 3):
        raise ConfigError(f"time_order must be 2 or 3, got {cfg.time_order}")
    if cfg.corrections is not None and cfg.corrections < 1:
        raise ConfigError("corrections must be at least 1")
    if cfg.snapshot_every < 0:
        raise ConfigError("snapshot_every must be non-negative")
    if cfg.jump_scale is not None and not cfg.jump_scale >= 0:
        raise ConfigError("jump_scale must be non-negative")
    dim = 1 if cfg.scenario == "advection1d" else 2
    for entry in (cfg.mesh,) + tuple(cfg.meshes):
        mdim = mesh_dimension(entry)
        if mdim is not None and mdim != dim:
            raise ConfigError(f"mesh {entry!r} is {mdim}D but scenario {cfg.scenario} is {dim}D")


def with_overrides(cfg: RunConfig, **changes) -> RunConfig:
    new = replace(cfg, **changes)
    validate(new)
    return new


def parse_mesh_entry(entry: str):
    """Mesh spec object for a generator entry, or ``None`` for a file path."""
    parts = [p.strip().lower() for p in entry.split(":")]
    kind, args = parts[0], parts[1:]
    try:
        if kind == "interval":
            return Interval(int(args[0]), periodic="periodic" in args[1:])
        if kind == "rectangle":
            per = "periodic" in args[2:]
            return Rectangle(int(args[0]), int(args[1]), per, per)
        if kind == "disk":
            return Disk(int(args[0]), split=1 if "split" in args[1:] else 0)
    except (IndexError, ValueError) as exc:
        raise ConfigError(f"malformed mesh entry {entry!r}") from exc
    return None


def mesh_dimension(entry: str) -> Optional[int]:
    spec = parse_mesh_entry(entry)
    if spec is None:
        return None
    return 1 if isinstance(spec, Interval) else 2
