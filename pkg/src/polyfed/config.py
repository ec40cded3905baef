"""Flat key-value configuration with dotted keys and env overrides.

File format: one `key = value` per line, `#` comments.  Environment
variables named POLYFED_<KEY> (dots become underscores, uppercased)
override file values; POLYFED_CONFIG points at the file itself.
"""

import os
from dataclasses import dataclass, field

DEFAULTS = {
    "data_dir": "",
    "mode": "extended",
    "validator.mode": "strict",
    "llm.endpoint": "",
    "llm.model": "",
    "llm.timeout_ms": "30000",
    "nl.max_attempts": "3",
    "nl.history_capacity": "16",
    "nl.budget_chars": "8000",
    "ingest.window": "100",
    "ingest.reassign_threshold": "0.5",
    "tuner.alpha": "0.1",
    "tuner.gamma": "0.9",
    "tuner.lambda": "0.01",
    "tuner.window": "100",
    "tuner.background_interval_s": "0",
    "server.port": "8080",
    "server.plan_timeout_ms": "30000",
}

_POSITIVE_KEYS = ("llm.timeout_ms", "nl.max_attempts", "nl.history_capacity",
                  "nl.budget_chars", "ingest.window", "tuner.alpha", "tuner.gamma",
                  "tuner.window", "server.port", "server.plan_timeout_ms")


@dataclass
class Config:
    values: dict = field(default_factory=dict)

    def get(self, key: str) -> str:
        return self.values.get(key, DEFAULTS.get(key, ""))

    def get_int(self, key: str) -> int:
        return int(self.get(key))

    def get_float(self, key: str) -> float:
        return float(self.get(key))

    @property
    def llm_configured(self) -> bool:
        return bool(self.get("llm.endpoint") and self.get("llm.model"))


def parse_config_text(text: str) -> dict:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValueError(f"config line {lineno} is not key = value")
        key, _, value = stripped.partition("=")
        values[key.strip()] = value.strip()
    return values


def load_config(path: str | None = None, environ=None) -> Config:
    environ = os.environ if environ is None else environ
    values = dict(DEFAULTS)
    path = path or environ.get("POLYFED_CONFIG")
    if path and os.path.exists(path):
        with open(path, encoding="utf-8") as handle:
            values.update(parse_config_text(handle.read()))
    for key in list(values):
        env_key = "POLYFED_" + key.upper().replace(".", "_")
        if env_key in environ:
            values[key] = environ[env_key]
    config = Config(values=values)
    for key in _POSITIVE_KEYS:
        if config.get_float(key) <= 0:
            raise ValueError(f"config key {key} must be positive")
    return config
