"""Plain-text key=value configuration with layered overrides.

Precedence (highest first): explicit CLI overrides, environment variables,
config file, built-in defaults. A key like `train.alpha` maps to the
environment variable HPSHIELD_TRAIN_ALPHA. Lines starting with `#` or `//`
are comments; keys are dotted lowercase identifiers.
"""

from __future__ import annotations

import os
from typing import Dict, List, Mapping, Optional, Sequence

ENV_PREFIX = "HPSHIELD_"


class ConfigError(Exception):
    pass


def parse_config_text(text: str) -> Dict[str, str]:
    out: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith("//"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def load_config_file(path: str) -> Dict[str, str]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read())


def env_var_name(key: str) -> str:
    return ENV_PREFIX + key.replace(".", "_").replace("-", "_").upper()


class Config:
    """Layered string-valued configuration with typed accessors."""

    def __init__(
        self,
        file_values: Optional[Mapping[str, str]] = None,
        overrides: Optional[Mapping[str, str]] = None,
        environ: Optional[Mapping[str, str]] = None,
    ):
        self.file_values = dict(file_values or {})
        self.overrides = dict(overrides or {})
        self.environ = os.environ if environ is None else environ

    def raw(self, key: str, default: Optional[str] = None) -> Optional[str]:
        if key in self.overrides:
            return self.overrides[key]
        env = self.environ.get(env_var_name(key))
        if env is not None:
            return env
        if key in self.file_values:
            return self.file_values[key]
        return default

    def _typed(self, key: str, default, convert, kind: str):
        raw = self.raw(key)
        if raw is None:
            return default
        try:
            return convert(raw)
        except ValueError as exc:
            raise ConfigError(f"{key}: expected {kind}, got {raw!r}") from exc

    def get_str(self, key: str, default: Optional[str] = None) -> Optional[str]:
        return self.raw(key, default)

    def get_float(self, key: str, default: Optional[float] = None) -> Optional[float]:
        return self._typed(key, default, float, "a number")

    def get_int(self, key: str, default: Optional[int] = None) -> Optional[int]:
        return self._typed(key, default, int, "an integer")

    def get_bool(self, key: str, default: Optional[bool] = None) -> Optional[bool]:
        def conv(raw: str) -> bool:
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)

        return self._typed(key, default, conv, "a boolean")

    def get_floats(self, key: str, default: Optional[Sequence[float]] = None) -> Optional[List[float]]:
        def conv(raw: str) -> List[float]:
            return [float(p) for p in raw.split(",") if p.strip()]

        return self._typed(key, list(default) if default is not None else None, conv, "a comma list")

    def get_range(self, key: str, default: Optional[Sequence[float]] = None) -> Optional[List[float]]:
        """`lo:hi:step` inclusive grid, or a plain comma list."""

        def conv(raw: str) -> List[float]:
            if ":" in raw:
                lo_s, hi_s, step_s = raw.split(":")
                lo, hi, step = float(lo_s), float(hi_s), float(step_s)
                if step <= 0:
                    raise ValueError(raw)
                out = []
                k = 0
                while True:
                    v = lo + k * step
                    if v > hi + 1e-12:
                        break
                    out.append(v)
                    k += 1
                return out
            return [float(p) for p in raw.split(",") if p.strip()]

        return self._typed(key, list(default) if default is not None else None, conv, "a lo:hi:step range")

    def keys_with_prefix(self, prefix: str) -> List[str]:
        keys = set(k for k in self.file_values if k.startswith(prefix))
        keys |= set(k for k in self.overrides if k.startswith(prefix))
        return sorted(keys)
