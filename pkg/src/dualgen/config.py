"""Pipeline configuration: one TOML file layered over the packaged defaults."""

from __future__ import annotations

import copy
import hashlib
import json
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .dataset import RegionBounds
from .errors import ConfigError
from .geo import EarthModel
from .llm import BackendConfig, ChatParams
from .scoring import CompositeWeights

CONFIG_ENV = "DBA_CONFIG"
ROLES = ("extractor", "generator", "judge")
_TIMEOUT_KEYS = {"extractor": "extract_s", "generator": "generate_s", "judge": "judge_s"}


def default_config() -> dict:
    text = resources.files("dualgen").joinpath("assets/default.toml").read_text(encoding="utf-8")
    return tomllib.loads(text)


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _template_order(key: str) -> tuple[int, str]:
    tail = key.rsplit("_", 1)[-1]
    return (int(tail), key) if tail.isdigit() else (1 << 30, key)


@dataclass(frozen=True)
class PipelineConfig:
    raw: dict
    base_dir: Path = field(default_factory=Path.cwd)

    # -- paths -------------------------------------------------------------

    def path(self, key: str, required: bool = False) -> Path | None:
        value = self.raw.get("data", {}).get(key)
        if value is None:
            if required:
                raise ConfigError(f"data.{key} is not configured")
            return None
        p = Path(value)
        return p if p.is_absolute() else self.base_dir / p

    @property
    def viewpoints_path(self) -> Path | None:
        return self.path("viewpoints")

    @property
    def hotels_path(self) -> Path | None:
        return self.path("hotels")

    @property
    def gazetteer_path(self) -> Path | None:
        return self.path("gazetteer")

    # -- typed sections ----------------------------------------------------

    @property
    def k(self) -> int:
        return int(self.raw["bridge"]["k"])

    @property
    def earth(self) -> EarthModel:
        return EarthModel(float(self.raw["bridge"]["radius_km"]))

    @property
    def bounds(self) -> RegionBounds:
        b = self.raw["bounds"]
        return RegionBounds(b["lat_min"], b["lat_max"], b["lon_min"], b["lon_max"])

    @property
    def templates(self) -> list[str]:
        t = self.raw.get("templates", {})
        return [t[k] for k in sorted(t, key=_template_order)]

    @property
    def prompts(self) -> dict:
        return self.raw["prompts"]

    @property
    def judge_templates(self) -> dict:
        return {"fluency": self.prompts["judge_fluency"], "relevance": self.prompts["judge_relevance"]}

    @property
    def generation_params(self) -> ChatParams:
        g = self.raw.get("generation", {})
        return ChatParams(int(g.get("max_tokens", 512)), float(g.get("temperature", 0.0)))

    @property
    def weights(self) -> CompositeWeights:
        e = self.raw["eval"]
        return CompositeWeights(
            e.get("branch", "unstructured"),
            tuple(e[f"c{i}"] for i in range(1, 6)),
            tuple(e[f"d{i}"] for i in range(1, 4)),
        )

    @property
    def split(self) -> tuple[float, int]:
        s = self.raw["split"]
        return float(s["fraction"]), int(s["seed"])

    def backend(self, role: str) -> BackendConfig | None:
        if role not in ROLES:
            raise ValueError(role)
        section = self.raw.get("backends", {}).get(role)
        if section is None:
            return None
        section = dict(section)
        if "timeout_ms" not in section:
            budget = self.raw["timeouts"][_TIMEOUT_KEYS[role]]
            section["timeout_ms"] = int(budget * 1000)
        fixture = section.get("fixture_path")
        if fixture and not Path(fixture).is_absolute():
            section["fixture_path"] = str(self.base_dir / fixture)
        section.setdefault("name", f"{role}:{section.get('kind')}")
        try:
            return BackendConfig(**section)
        except TypeError as exc:
            raise ConfigError(f"backends.{role}: {exc}") from exc

    @property
    def snapshot_hash(self) -> str:
        canon = json.dumps(self.raw, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]

    def validate(self, need: tuple[str, ...] = ()) -> "PipelineConfig":
        """Check invariants; ``need`` lists data keys and backend roles that must be set."""
        if self.k < 1:
            raise ConfigError("bridge.k must be >= 1")
        for name, check in (("bridge.radius_km", lambda: self.earth),
                            ("bounds", lambda: self.bounds),
                            ("eval", lambda: self.weights)):
            try:
                check()
            except (ValueError, KeyError, TypeError) as exc:
                raise ConfigError(f"{name}: {exc}") from exc
        for key in self.raw.get("data", {}):
            p = self.path(key)
            if not p.exists():
                raise ConfigError(f"data.{key}: {p} does not exist")
        for role in ROLES:
            cfg = self.backend(role)
            if cfg is not None and cfg.fixture_path and not Path(cfg.fixture_path).exists():
                raise ConfigError(f"backends.{role}.fixture_path: {cfg.fixture_path} does not exist")
        for item in need:
            if item in ROLES:
                if self.backend(item) is None:
                    raise ConfigError(f"backends.{item} is not configured")
            else:
                self.path(item, required=True)
        return self


def load_config(path: str | os.PathLike | None = None, overrides: dict | None = None) -> PipelineConfig:
    """Load ``path`` (or ``$DBA_CONFIG``) over the packaged defaults."""
    path = path or os.environ.get(CONFIG_ENV)
    raw = default_config()
    base_dir = Path.cwd()
    if path:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file {path} does not exist")
        try:
            user = tomllib.loads(path.read_text(encoding="utf-8"))
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        raw = _merge(raw, user)
        base_dir = path.resolve().parent
    if overrides:
        raw = _merge(raw, overrides)
    return PipelineConfig(raw, base_dir)
