"""Runtime configuration: retrieval weights, window sizes, backends, paths.

All tunables live here so the CLI, proxy, and SDK share one source of
defaults. A TOML file plus environment variables can override any field.
"""

from __future__ import annotations

import os
import uuid

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib  # type: ignore[no-redef]
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

DEFAULT_BANK_ROOT = "./SkillBank"
ENV_BANK_ROOT = "AUTOSKILL_BANK_ROOT"
ENV_UPSTREAM_KEY = "AUTOSKILL_UPSTREAM_KEY"
ENV_LISTEN = "AUTOSKILL_LISTEN"


@dataclass
class Bm25Params:
    k1: float = 1.2
    b: float = 0.75

    def __post_init__(self) -> None:
        if self.k1 < 0:
            raise ValueError("k1 must be >= 0")
        if not (0.0 <= self.b <= 1.0):
            raise ValueError("b must be in [0, 1]")


@dataclass
class HybridWeights:
    """Fusion and selection knobs for serving- and management-time retrieval."""

    lam: float = 0.7       # serving-time dense/lexical trade-off
    alpha: float = 0.7     # management-time trade-off
    eta: float = 0.35      # injection threshold on fused score
    k: int = 3             # serving Top-K
    m: int = 5             # management neighbor-set size

    def __post_init__(self) -> None:
        for name in ("lam", "alpha", "eta"):
            value = getattr(self, name)
            if not (0.0 <= value <= 1.0):
                raise ValueError(f"{name} must be in [0, 1], got {value}")
        if self.k < 1 or self.m < 1:
            raise ValueError("k and m must be positive")


@dataclass
class AppConfig:
    bank_root: Path = field(default_factory=lambda: Path(os.environ.get(ENV_BANK_ROOT, DEFAULT_BANK_ROOT)))
    weights: HybridWeights = field(default_factory=HybridWeights)
    bm25: Bm25Params = field(default_factory=Bm25Params)

    # Lifecycle knobs.
    window_size: int = 6           # evidence window W, user queries
    min_confidence: float = 0.6    # extraction confidence floor
    evolve_every_n_turns: int = 1
    history_window: int = 8        # H_CTX messages for rewriting/extraction framing

    # Retrieval text assembly.
    include_common_skills: bool = True
    include_prompt_in_doc_text: bool = False      # serving-time skill text
    absolute_dense_floor: float | None = None     # optional, default off

    # Proxy / upstream.
    listen: str = field(default_factory=lambda: os.environ.get(ENV_LISTEN, "127.0.0.1:8777"))
    upstream_base_url: str = "https://api.openai.com/v1"
    upstream_key_env: str = ENV_UPSTREAM_KEY
    default_user: str = "default"
    chat_model: str = "gpt-4o-mini"
    rewrite_model: str = ""   # empty -> chat_model
    extract_model: str = ""
    judge_model: str = ""
    merge_model: str = ""
    embedding_model: str = "text-embedding-3-small"
    trace_ring_size: int = 256
    ui_dist_dir: str = ""     # static Web UI bundle served at /ui when set

    # Identity minting; injectable so tests can run deterministically.
    id_factory: Callable[[], str] = field(default_factory=lambda: (lambda: str(uuid.uuid4())))

    def upstream_key(self) -> str:
        return os.environ.get(self.upstream_key_env, "")


_TOML_FIELDS = {
    "bank_root", "window_size", "min_confidence", "evolve_every_n_turns",
    "history_window", "include_common_skills", "include_prompt_in_doc_text",
    "listen", "upstream_base_url", "default_user", "chat_model",
    "rewrite_model", "extract_model", "judge_model", "merge_model",
    "embedding_model", "trace_ring_size", "ui_dist_dir",
}


def load_config(path: str | Path | None = None) -> AppConfig:
    """Build an AppConfig from defaults, an optional TOML file, then env vars."""
    cfg = AppConfig()
    if path is not None:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
        for key, value in data.items():
            if key == "weights":
                cfg.weights = HybridWeights(**value)
            elif key == "bm25":
                cfg.bm25 = Bm25Params(**value)
            elif key in _TOML_FIELDS:
                if key == "bank_root":
                    value = Path(value)
                setattr(cfg, key, value)
            else:
                raise ValueError(f"unknown config key: {key}")
    if ENV_BANK_ROOT in os.environ:
        cfg.bank_root = Path(os.environ[ENV_BANK_ROOT])
    if ENV_LISTEN in os.environ:
        cfg.listen = os.environ[ENV_LISTEN]
    return cfg
