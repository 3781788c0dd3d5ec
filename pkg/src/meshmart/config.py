"""Platform configuration: INI file + MESH_* environment overrides.

Calibration constants the source papers leave open (thresholds, budgets)
live here so operators can retune them without code changes.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field, fields

from .errors import ConfigError


@dataclass
class PlatformConfig:
    listen_host: str = "127.0.0.1"
    listen_port: int = 8423
    data_dir: str = "./meshmart_data"
    fsync: bool = True

    # variant store
    block_size: int = 4096
    retention_days: int = 7
    max_variant_depth: int = 64

    # ingestion
    staging_seal_bytes: int = 10 * 1024 * 1024
    staging_seal_age_s: float = 5.0
    post_limit_bytes: int = 1024 * 1024
    loader_interval_s: float = 1.0

    # schema inference
    infer_max_depth: int = 64

    # stability evaluation (calibration constants, not sourced values)
    stability_min_description_chars: int = 80
    stability_preview_budget_ms: float = 2000.0
    stability_sweep_interval_s: float = 3600.0

    # marketplace
    search_usage_window_days: int = 30

    # optimization advisor (calibration defaults)
    advisor_top_share_threshold: float = 0.3
    advisor_min_queries: int = 20
    advisor_cooldown_days: int = 30
    advisor_sweep_interval_s: float = 300.0

    # pii scanner (calibration defaults)
    pii_value_fraction_threshold: float = 0.3
    pii_sample_n: int = 1000
    pii_scan_interval_s: float = 3600.0
    pii_ruleset_path: str = ""

    # lineage
    lineage_query_node_cap: int = 10000

    # bootstrap API keys: raw key -> "tenant/principal"
    api_keys: dict[str, str] = field(default_factory=dict)

    def validate(self) -> "PlatformConfig":
        if self.block_size < 1:
            raise ConfigError(f"block_size must be >= 1, got {self.block_size}")
        if not (0.0 < self.advisor_top_share_threshold <= 1.0):
            raise ConfigError("advisor_top_share_threshold must be in (0, 1]")
        if not (0.0 < self.pii_value_fraction_threshold <= 1.0):
            raise ConfigError("pii_value_fraction_threshold must be in (0, 1]")
        if self.retention_days < 0 or self.advisor_cooldown_days < 0:
            raise ConfigError("retention/cooldown days must be >= 0")
        if self.post_limit_bytes < 1 or self.staging_seal_bytes < 1:
            raise ConfigError("size limits must be positive")
        if self.pii_sample_n < 1 or self.advisor_min_queries < 1:
            raise ConfigError("sample/query minimums must be positive")
        return self

    def redacted(self) -> dict:
        """Config echo for the API: keys replaced by their principal mapping only."""
        doc = {}
        for f in fields(self):
            if f.name == "api_keys":
                doc["api_keys"] = {"<redacted>": sorted(self.api_keys.values())}
            else:
                doc[f.name] = getattr(self, f.name)
        return doc


_BOOL_TRUE = {"1", "true", "yes", "on"}


def _coerce(raw: str, target_type: type):
    if target_type is bool:
        return raw.strip().lower() in _BOOL_TRUE
    if target_type is int:
        return int(raw)
    if target_type is float:
        return float(raw)
    return raw


def load_config(path: str | None = None, env: dict | None = None) -> PlatformConfig:
    """Load [platform] and [api_keys] sections, then apply MESH_* overrides."""
    env = os.environ if env is None else env
    cfg = PlatformConfig()
    simple_fields = {f.name: f.type for f in fields(PlatformConfig) if f.name != "api_keys"}
    types = {name: type(getattr(cfg, name)) for name in simple_fields}

    if path:
        parser = configparser.ConfigParser()
        read = parser.read(path)
        if not read:
            raise ConfigError(f"config file not found: {path}")
        if parser.has_section("platform"):
            for name, raw in parser.items("platform"):
                if name not in types:
                    raise ConfigError(f"unknown config key: {name}")
                try:
                    setattr(cfg, name, _coerce(raw, types[name]))
                except ValueError as exc:
                    raise ConfigError(f"bad value for {name}: {raw!r} ({exc})")
        if parser.has_section("api_keys"):
            for key, principal_ref in parser.items("api_keys"):
                cfg.api_keys[key] = principal_ref

    for name in types:
        env_name = "MESH_" + name.upper()
        if env_name in env:
            try:
                setattr(cfg, name, _coerce(env[env_name], types[name]))
            except ValueError as exc:
                raise ConfigError(f"bad value for {env_name}: {env[env_name]!r} ({exc})")
    if "MESH_ROOT_KEY" in env:
        cfg.api_keys[env["MESH_ROOT_KEY"]] = "platform/root"
    return cfg.validate()
