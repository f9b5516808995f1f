"""연구 설정 로더(Study configuration loader and reference page)."""
from __future__ import annotations

import json
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Optional

from pydantic import BaseModel, ValidationError

from common_lib.config import Settings
from common_lib.errors import ConfigError
from common_lib.logger import get_logger
from special_fn.app.models import Statistics

from .models import StudyConfig

logger = get_logger(__name__)

# TOML files may wrap the study under a [study] table
_SECTION = "study"


def _read(path: Path) -> dict[str, Any]:
    if not path.exists():
        raise ConfigError(str(path), "config file not found")
    text = path.read_text(encoding="utf-8")
    try:
        if path.suffix.lower() == ".toml":
            data = tomllib.loads(text)
        elif path.suffix.lower() == ".json":
            data = json.loads(text)
        else:
            raise ConfigError(str(path), "expected a .toml or .json file")
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(str(path), f"parse error: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(str(path), "top level must be a table")
    return data.get(_SECTION, data)


def build_config(data: dict[str, Any], source: str = "<inline>") -> StudyConfig:
    """dict -> StudyConfig; validation failures become ConfigError."""
    try:
        return StudyConfig.model_validate(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        where = ".".join(str(part) for part in first["loc"]) or "config"
        raise ConfigError(source, f"{where}: {first['msg']}") from exc


def load_config(path: Optional[str | Path], overrides: Optional[dict[str, Any]] = None) -> StudyConfig:
    """설정 로드(Load TOML/JSON, apply non-None overrides, validate).

    Without a path the defaults are used.
    """
    data: dict[str, Any] = {}
    source = "<defaults>"
    if path is not None:
        source = str(path)
        data = _read(Path(path))
    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value
    cfg = build_config(data, source)
    logger.info("연구 설정 로드(Study config loaded): %s hash=%s", source, cfg.config_hash()[:12])
    return cfg


def _field_rows(model: type[BaseModel], env_prefix: str = "") -> list[str]:
    rows = []
    for name, info in model.model_fields.items():
        default = info.get_default(call_default_factory=True)
        if isinstance(default, Statistics):
            default = default.label
        elif isinstance(default, tuple):
            default = [str(item) if isinstance(item, complex) else item for item in default]
        key = f"{env_prefix}{name.upper()}" if env_prefix else name
        rows.append(f"| `{key}` | `{default!r}` | {info.description or ''} |")
    return rows


def render_reference() -> str:
    """설정 참조 문서(Markdown page of every StudyConfig and Settings default)."""
    lines = [
        "# 설정 참조 (Configuration Reference)",
        "",
        "이 문서는 `python main.py config-doc` 으로 생성됩니다(Generated by `python main.py config-doc`).",
        "",
        "## StudyConfig (`--config` TOML/JSON, 선택적 `[study]` 테이블)",
        "",
        "| key | default | description |",
        "|---|---|---|",
        *_field_rows(StudyConfig),
        "",
        "Complex values are written as strings (`\"0.5j\"`) or `[re, im]` pairs.",
        "",
        "## Settings (환경변수 `MG_` 접두사, `.env` 지원)",
        "",
        "| variable | default | description |",
        "|---|---|---|",
        *_field_rows(Settings, env_prefix="MG_"),
        "",
    ]
    return "\n".join(lines)
