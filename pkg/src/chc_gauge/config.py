"""Run configuration: paths, separation policy, human speed baselines.

Plain JSON key-value file. Credentials never appear here; the adapter
section names the environment variables that hold them.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path


@dataclass(frozen=True)
class SeparationPolicy:
    """Memory-delay separation between presenting material and testing
    recall of it: a recall session needs a new session AND (min_filler
    intervening interactions OR min_delay_s of wall clock). A threshold of
    zero disables that disjunct; with both zero no separation is enforced.
    """

    min_filler: int = 20
    min_delay_s: int = 0

    def satisfied(self, filler_count: int, delay_s: float) -> bool:
        if self.min_filler <= 0 and self.min_delay_s <= 0:
            return True
        if self.min_filler > 0 and filler_count >= self.min_filler:
            return True
        return self.min_delay_s > 0 and delay_s >= self.min_delay_s

    def describe(self) -> str:
        parts = []
        if self.min_filler > 0:
            parts.append(f"min_filler={self.min_filler}")
        if self.min_delay_s > 0:
            parts.append(f"min_delay_s={self.min_delay_s}")
        return " or ".join(parts) if parts else "disabled"


@dataclass(frozen=True)
class AdapterConfig:
    id: str = "stub"
    base_url: str = ""
    endpoint_env: str = "GAUGE_MODEL_ENDPOINT"
    key_env: str = "GAUGE_MODEL_KEY"
    timeout_s: float = 60.0
    retry_transport_errors: bool = False
    stub_script: str = ""  # path to a prompt->response JSON table

    def resolve_endpoint(self) -> str:
        return os.environ.get(self.endpoint_env, "") or self.base_url

    def resolve_key(self) -> str:
        return os.environ.get(self.key_env, "")


@dataclass(frozen=True)
class GaugeConfig:
    ledger_path: str = "gauge.ledger"
    battery_dir: str = "batteries"
    taxonomy_path: str = ""  # empty -> embedded canonical document
    model_id: str = ""
    separation: SeparationPolicy = SeparationPolicy()
    bottleneck_threshold: int = 2
    parallelism: int = 4
    speed_baselines: dict = field(default_factory=dict)  # name -> number or None
    adapter: AdapterConfig = AdapterConfig()
    auth_token: str = ""  # empty -> no API auth (localhost tool)
    host: str = "127.0.0.1"
    port: int = 8321

    def baseline(self, name: str):
        """A named human baseline, or None when unset (leaves the
        requirement untested rather than guessing a norm)."""
        value = self.speed_baselines.get(name)
        return float(value) if isinstance(value, (int, float)) else None


_KEYS = {"ledger_path", "battery_dir", "taxonomy_path", "model_id", "separation",
         "bottleneck_threshold", "parallelism", "speed_baselines", "adapter",
         "auth_token", "host", "port"}
_SEPARATION_KEYS = {"min_filler", "min_delay_s"}
_ADAPTER_KEYS = {"id", "base_url", "endpoint_env", "key_env", "timeout_s",
                 "retry_transport_errors", "stub_script"}


def load_config(path: str | Path) -> GaugeConfig:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, dict):
        raise ValueError("config must be a JSON object")
    unknown = set(data) - _KEYS
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")

    sep_data = data.get("separation", {})
    unknown = set(sep_data) - _SEPARATION_KEYS
    if unknown:
        raise ValueError(f"unknown separation keys: {', '.join(sorted(unknown))}")
    separation = SeparationPolicy(
        min_filler=int(sep_data.get("min_filler", 20)),
        min_delay_s=int(sep_data.get("min_delay_s", 0)),
    )

    adapter_data = data.get("adapter", {})
    unknown = set(adapter_data) - _ADAPTER_KEYS
    if unknown:
        raise ValueError(f"unknown adapter keys: {', '.join(sorted(unknown))}")
    adapter = AdapterConfig(
        id=str(adapter_data.get("id", "stub")),
        base_url=str(adapter_data.get("base_url", "")),
        endpoint_env=str(adapter_data.get("endpoint_env", "GAUGE_MODEL_ENDPOINT")),
        key_env=str(adapter_data.get("key_env", "GAUGE_MODEL_KEY")),
        timeout_s=float(adapter_data.get("timeout_s", 60.0)),
        retry_transport_errors=bool(adapter_data.get("retry_transport_errors", False)),
        stub_script=str(adapter_data.get("stub_script", "")),
    )

    return GaugeConfig(
        ledger_path=str(data.get("ledger_path", "gauge.ledger")),
        battery_dir=str(data.get("battery_dir", "batteries")),
        taxonomy_path=str(data.get("taxonomy_path", "")),
        model_id=str(data.get("model_id", "")),
        separation=separation,
        bottleneck_threshold=int(data.get("bottleneck_threshold", 2)),
        parallelism=int(data.get("parallelism", 4)),
        speed_baselines=dict(data.get("speed_baselines", {})),
        adapter=adapter,
        auth_token=str(data.get("auth_token", "")),
        host=str(data.get("host", "127.0.0.1")),
        port=int(data.get("port", 8321)),
    )
