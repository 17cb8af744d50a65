"""Application configuration for the service and CLI.

Config files are JSON mirroring AppConfig; CLI flags override file values.
API keys are never stored in config or corpus files: each generation config
names the environment variable that holds its key.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields as dataclass_fields
from pathlib import Path

from .inference import GenerationConfig

DEFAULT_ENDPOINT = "http://127.0.0.1:8790"


class ConfigError(ValueError):
    pass


@dataclass
class AppConfig:
    inference: GenerationConfig = field(
        default_factory=lambda: GenerationConfig(endpoint_url=DEFAULT_ENDPOINT, model_id="mock-model")
    )
    judge: GenerationConfig = field(
        default_factory=lambda: GenerationConfig(
            endpoint_url=DEFAULT_ENDPOINT, model_id="mock-judge", api_key_env="REVIEWKIT_JUDGE_API_KEY"
        )
    )
    converter_command: str = "cat {input}"  # identity converter; replace with a real PDF tool
    templates_dir: Path = Path("templates")
    corpus_path: Path = Path("corpus.jsonl")
    results_dir: Path = Path("results")
    listen_address: str = "127.0.0.1:8787"
    max_concurrency: int = 4
    static_dir: Path | None = None

    def __post_init__(self) -> None:
        if self.max_concurrency < 1:
            raise ConfigError("max_concurrency must be >= 1")
        if "{input}" not in self.converter_command:
            raise ConfigError("converter_command must contain the {input} placeholder")

    @property
    def host(self) -> str:
        return self.listen_address.rsplit(":", 1)[0]

    @property
    def port(self) -> int:
        return int(self.listen_address.rsplit(":", 1)[1])


_GEN_FIELDS = {f.name for f in dataclass_fields(GenerationConfig)}


def _generation_config(obj: dict, defaults: GenerationConfig) -> GenerationConfig:
    unknown = set(obj) - _GEN_FIELDS
    if unknown:
        raise ConfigError(f"unknown generation config keys: {sorted(unknown)}")
    merged = {f.name: getattr(defaults, f.name) for f in dataclass_fields(GenerationConfig)}
    merged.update(obj)
    return GenerationConfig(**merged)


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> AppConfig:
    """Build an AppConfig from an optional JSON file plus override values."""
    data: dict = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text("utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid config file {path}: {exc}") from exc
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if "." in key:  # e.g. "inference.model_id"
            section, _, inner = key.partition(".")
            data.setdefault(section, {})[inner] = value
        else:
            data[key] = value

    base = AppConfig()
    known = {f.name for f in dataclass_fields(AppConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    kwargs: dict = {}
    if "inference" in data:
        kwargs["inference"] = _generation_config(data["inference"], base.inference)
    if "judge" in data:
        kwargs["judge"] = _generation_config(data["judge"], base.judge)
    for key in ("converter_command", "listen_address"):
        if key in data:
            kwargs[key] = data[key]
    for key in ("templates_dir", "corpus_path", "results_dir", "static_dir"):
        if key in data and data[key] is not None:
            kwargs[key] = Path(data[key])
    if "max_concurrency" in data:
        kwargs["max_concurrency"] = int(data["max_concurrency"])
    return AppConfig(**kwargs)
