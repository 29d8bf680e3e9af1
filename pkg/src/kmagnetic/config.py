"""Run configuration documents (JSON or YAML)."""
from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field, replace
from pathlib import Path
from typing import Any, Mapping

import yaml

from .errors import ConfigError
from .field import FieldSpec

DEFAULT_TOLERANCES = {"corrector": 1e-10, "solution": 1e-8, "shooting": 1e-8}
KNOWN_KEYS = {
    "field", "epsilon", "loop_points", "melnikov_quad", "tolerances", "seeds",
    "output_dir", "grid_points", "cross_validate",
}


@dataclass(frozen=True)
class RunConfig:
    field: FieldSpec
    epsilon: tuple[float, ...] = (0.05,)
    loop_points: int = 256
    melnikov_quad: tuple[int, int] = (24, 64)
    tolerances: Mapping[str, float] = dc_field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    seeds: int = 32
    output_dir: Path = Path("out")
    grid_points: int = 200
    cross_validate: bool = True

    def with_overrides(self, epsilon=None, loop_points=None, output_dir=None) -> "RunConfig":
        cfg = self
        if epsilon is not None:
            cfg = replace(cfg, epsilon=_epsilons(epsilon))
        if loop_points is not None:
            cfg = replace(cfg, loop_points=_loop_points(loop_points))
        if output_dir is not None:
            cfg = replace(cfg, output_dir=Path(output_dir))
        return cfg


def _epsilons(raw) -> tuple[float, ...]:
    values = raw if isinstance(raw, (list, tuple)) else [raw]
    if not values:
        raise ConfigError("epsilon list is empty")
    out = []
    for v in values:
        try:
            e = float(v)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"epsilon must be numeric, got {v!r}") from exc
        if not 0.0 <= e <= 0.5:
            raise ConfigError(f"epsilon {e} outside [0, 0.5]")
        out.append(e)
    return tuple(out)


def _loop_points(raw) -> int:
    try:
        n = int(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"loop_points must be an integer, got {raw!r}") from exc
    if n != raw and not isinstance(raw, str):
        raise ConfigError(f"loop_points must be an integer, got {raw!r}")
    if n < 32 or n % 2:
        raise ConfigError(f"loop_points must be even and at least 32, got {n}")
    return n


def _positive_int(name, raw, minimum=1) -> int:
    if isinstance(raw, bool) or not isinstance(raw, int) or raw < minimum:
        raise ConfigError(f"{name} must be an integer >= {minimum}, got {raw!r}")
    return raw


def parse_config(doc: Any, base_dir: Path | None = None) -> RunConfig:
    if not isinstance(doc, Mapping):
        raise ConfigError("configuration must be a mapping")
    unknown = set(doc) - KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
    if "field" not in doc:
        raise ConfigError("configuration needs a 'field' entry")
    kwargs: dict[str, Any] = {"field": FieldSpec.from_document(doc["field"])}
    if "epsilon" in doc:
        kwargs["epsilon"] = _epsilons(doc["epsilon"])
    if "loop_points" in doc:
        kwargs["loop_points"] = _loop_points(doc["loop_points"])
    if "melnikov_quad" in doc:
        q = doc["melnikov_quad"]
        if not isinstance(q, (list, tuple)) or len(q) != 2:
            raise ConfigError("melnikov_quad must be a pair [m, n]")
        m, n = _positive_int("melnikov_quad[0]", q[0], 16), _positive_int("melnikov_quad[1]", q[1], 32)
        kwargs["melnikov_quad"] = (m, n)
    if "tolerances" in doc:
        tol = doc["tolerances"]
        if not isinstance(tol, Mapping) or set(tol) - set(DEFAULT_TOLERANCES):
            raise ConfigError(f"tolerances must be a mapping with keys {sorted(DEFAULT_TOLERANCES)}")
        merged = dict(DEFAULT_TOLERANCES)
        for k, v in tol.items():
            try:
                merged[k] = float(v)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"tolerance {k} must be numeric") from exc
            if not merged[k] > 0:
                raise ConfigError(f"tolerance {k} must be positive")
        kwargs["tolerances"] = merged
    if "seeds" in doc:
        kwargs["seeds"] = _positive_int("seeds", doc["seeds"])
    if "grid_points" in doc:
        kwargs["grid_points"] = _positive_int("grid_points", doc["grid_points"])
    if "cross_validate" in doc:
        if not isinstance(doc["cross_validate"], bool):
            raise ConfigError("cross_validate must be true or false")
        kwargs["cross_validate"] = doc["cross_validate"]
    if "output_dir" in doc:
        out = Path(str(doc["output_dir"]))
        if base_dir is not None and not out.is_absolute():
            out = base_dir / out
        kwargs["output_dir"] = out
    return RunConfig(**kwargs)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read configuration {path}: {exc}") from exc
    try:
        doc = json.loads(text) if path.suffix.lower() == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse configuration {path}: {exc}") from exc
    return parse_config(doc)
