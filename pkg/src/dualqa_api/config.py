"""Model and training configuration.

Configuration files use the same ``key = value`` text format as a ``.env``
file: blank lines and ``#`` comments are ignored and surrounding quotes are
stripped. ``DUALQA_<FIELD>`` environment variables override file values,
and explicit overrides (CLI flags) override both.
"""

from __future__ import annotations

import dataclasses
import logging
import os
import typing
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Mapping, Optional, Tuple, Union

logger = logging.getLogger(__name__)

ENV_PREFIX = "DUALQA_"
MODES = ("dual", "qa-only", "qg-only")


class ConfigError(ValueError):
    """Invalid or contradictory configuration."""


@dataclass
class ModelConfig:
    # dimensions
    d_word: int = 256
    d_char: int = 200
    d_embed: int = 300
    d_model: int = 300
    d_attn: Optional[int] = None
    d_prime: Optional[int] = None
    d_ff: Optional[int] = None
    d_hidden: int = 1024
    context_heads: int = 4
    sequence_heads: int = 4
    lstm_layers: int = 3
    max_word_length: int = 16
    vector_highway_bias: bool = False
    # optimisation
    kappa: float = 1.0
    clip: float = 5.0
    lr_max: float = 0.001
    warmup_steps: int = 1000
    batch_size: int = 16
    keep: float = 0.9
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    qa_weight: float = 1.0
    qg_weight: float = 1.0
    # data and decoding
    decode_cap: int = 100
    min_count: int = 5
    # structure
    mode: str = "dual"
    no_copy: bool = False
    no_context_attention: bool = False
    encoder_no_lstm: bool = False
    encoder_no_selfattn: bool = False
    unshare_qa_encoders: bool = False
    unshare_context_encoder: bool = False
    unshare_output_projection: bool = False
    share_attention: bool = False
    seed: int = 0
    log_every: int = 50

    @property
    def attn_width(self) -> int:
        return self.d_attn if self.d_attn is not None else self.d_model

    @property
    def ff_width(self) -> int:
        return self.d_ff if self.d_ff is not None else min(4 * self.d_model, 512)

    @property
    def blocks(self) -> int:
        return 3 - int(self.encoder_no_lstm) - int(self.encoder_no_selfattn)

    @property
    def d_enc(self) -> int:
        return self.blocks * self.d_model

    @property
    def prime_width(self) -> int:
        return self.d_prime if self.d_prime is not None else self.d_enc

    @property
    def tasks(self) -> Tuple[str, ...]:
        return {"dual": ("qg", "qa"), "qa-only": ("qa",), "qg-only": ("qg",)}[self.mode]

    def validate(self) -> "ModelConfig":
        extents = ("d_word", "d_char", "d_embed", "d_model", "d_hidden", "context_heads",
                   "sequence_heads", "lstm_layers", "max_word_length", "warmup_steps",
                   "batch_size", "decode_cap", "min_count", "log_every")
        for name in extents:
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("d_attn", "d_prime", "d_ff"):
            value = getattr(self, name)
            if value is not None and value <= 0:
                raise ConfigError(f"{name} must be positive, got {value}")
        if not 0.0 < self.keep <= 1.0:
            raise ConfigError(f"keep must lie in (0, 1], got {self.keep}")
        if self.kappa < 0:
            raise ConfigError(f"kappa must be non-negative, got {self.kappa}")
        if self.clip <= 0 or self.lr_max < 0:
            raise ConfigError("clip must be positive and lr_max non-negative")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.encoder_no_lstm and self.encoder_no_selfattn:
            raise ConfigError("an encoder needs at least one of the LSTM and self-attention blocks")
        if not self.encoder_no_lstm and self.d_model % 2:
            raise ConfigError("d_model must be even for the bidirectional context LSTM")
        for heads in (self.context_heads, self.sequence_heads):
            if self.d_model % heads or self.attn_width % heads:
                raise ConfigError(f"d_model and d_attn must be divisible by {heads} heads")
        if self.mode != "dual":
            for flag in ("unshare_qa_encoders", "unshare_context_encoder", "unshare_output_projection", "share_attention"):
                if getattr(self, flag):
                    logger.warning("%s has no effect in %s mode", flag, self.mode)
        return self

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            lines.append(f"{f.name} = {'' if value is None else value}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_mapping(cls, values: Mapping[str, str]) -> "ModelConfig":
        hints = typing.get_type_hints(cls)
        known = {f.name for f in dataclasses.fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            name = key.strip().lower().replace("-", "_")
            if name not in known:
                raise ConfigError(f"Unknown configuration key '{key}'.")
            kwargs[name] = _coerce(name, hints[name], raw)
        return cls(**kwargs)

    @classmethod
    def from_text(cls, text: str) -> "ModelConfig":
        return cls.from_mapping(parse_key_values(text))


def _coerce(name: str, hint, raw):
    if not isinstance(raw, str):
        return raw
    raw = raw.strip()
    optional = typing.get_origin(hint) is Union and type(None) in typing.get_args(hint)
    if optional:
        if raw in ("", "none", "None"):
            return None
        hint = next(a for a in typing.get_args(hint) if a is not type(None))
    try:
        if hint is bool:
            lowered = raw.lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if hint is int:
            return int(raw)
        if hint is float:
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"Invalid value {raw!r} for '{name}'.") from None


def parse_key_values(contents: str) -> Dict[str, str]:
    values: Dict[str, str] = {}
    for line in contents.splitlines():
        stripped = line.strip()
        if not stripped or stripped.startswith("#") or "=" not in stripped:
            continue
        key, value = stripped.split("=", 1)
        values[key.strip()] = value.strip().strip("\"'")
    return values


def load_config(
    path: Optional[Union[str, Path]] = None,
    overrides: Optional[Mapping[str, object]] = None,
    environ: Optional[Mapping[str, str]] = None,
) -> ModelConfig:
    """Merge file, environment and explicit overrides, then validate."""
    values: Dict[str, object] = {}
    if path is not None:
        try:
            values.update(parse_key_values(Path(path).read_text()))
        except OSError as exc:
            raise ConfigError(f"Cannot read config file '{path}': {exc.strerror}") from exc
    environ = os.environ if environ is None else environ
    known = {f.name for f in dataclasses.fields(ModelConfig)}
    for key, value in environ.items():
        if key.startswith(ENV_PREFIX) and key[len(ENV_PREFIX):].lower() in known:
            values[key[len(ENV_PREFIX):].lower()] = value
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    return ModelConfig.from_mapping(values).validate()
