"""Run-level configuration with paper-faithful defaults.

Every constant the source method fixes is a default here (T=1000, loss
weight 0.5, curation filter 0.9 / 0.3-0.6 / 0.1, critic 0.3-0.8 / 0.8 /
cap 20, saliency threshold 0.5, Canny 200/500); everything else is a repo
default recorded in the decisions ledger.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path

import yaml


@dataclass
class RunConfig:
    seed: int = 0
    image_side: int = 64

    # noise schedule
    T: int = 1000
    beta_start: float = 1e-4
    beta_end: float = 2e-2

    # losses / encoder
    lam: float = 0.5
    embed_dim: int = 128
    cond_dropout: float = 0.05

    # sampler
    sampler_steps: int = 16
    guidance_emotion: float = 5.0
    guidance_image: float = 1.5
    start_frac: float = 0.8

    # curation filter
    filter_min_confidence: float = 0.90
    filter_ssim_low: float = 0.3
    filter_ssim_high: float = 0.6
    filter_lpips_min: float = 0.1

    # critic loop
    critic_ssim_low: float = 0.3
    critic_ssim_high: float = 0.8
    critic_min_confidence: float = 0.8
    critic_max_iterations: int = 20

    # saliency / edges
    gradcam_threshold: float = 0.5
    canny_low: float = 200.0
    canny_high: float = 500.0

    # toy pipeline scale
    per_class: int = 100
    predictor_epochs: int = 4
    predictor_lr: float = 2e-3
    codec_steps: int = 1500
    editor_steps: int = 2500
    editor_batch: int = 8
    editor_lr: float = 2e-3
    editor_pairs: int = 64
    edit_sources: int = 32
    curation_sources: int = 48
    instructions_per_target: int = 2

    artifact_root: str = "artifacts"

    def validate(self) -> None:
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if not (0 < self.beta_start <= self.beta_end < 1):
            raise ValueError("invalid beta range")
        if not (1 <= self.sampler_steps <= self.T):
            raise ValueError("sampler_steps must lie in [1, T]")
        if not (0 < self.filter_ssim_low < self.filter_ssim_high < 1):
            raise ValueError("invalid filter SSIM band")
        if self.critic_max_iterations < 1:
            raise ValueError("critic_max_iterations must be >= 1")

    @property
    def root(self) -> Path:
        env = os.environ.get("EMOEDIT_ARTIFACT_ROOT")
        return Path(env) if env else Path(self.artifact_root)


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> RunConfig:
    """Build a RunConfig from an optional YAML file plus CLI overrides."""
    values: dict = {}
    if path is not None:
        loaded = yaml.safe_load(Path(path).read_text()) or {}
        if not isinstance(loaded, dict):
            raise ValueError(f"config file {path} must hold a mapping")
        unknown = set(loaded) - {f.name for f in dataclasses.fields(RunConfig)}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        values.update(loaded)
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})
    cfg = RunConfig(**values)
    cfg.validate()
    return cfg


def save_effective_config(cfg: RunConfig, path: str | Path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(yaml.safe_dump(dataclasses.asdict(cfg), sort_keys=True))
