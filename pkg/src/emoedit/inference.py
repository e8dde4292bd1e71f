"""Reverse-diffusion sampling and the iterative emotion critic loop.

Sampling is a deterministic DDIM walk with two-scale classifier-free
guidance over the image and emotion conditions. The critic re-edits until
structure (SSIM in [0.3, 0.8]) and emotion (predicted target with
confidence > 0.8) both hold, capped at 20 iterations with an
argmax-confidence fallback.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from emoedit.diffusion import EditorNets, NoiseSchedule, add_noise
from emoedit.images import save_image, load_image
from emoedit.metrics import ssim
from emoedit.taxonomy import emotion_index

MAX_CRITIC_ITERATIONS = 20

CRITIC_SSIM_LOW = 0.3
CRITIC_SSIM_HIGH = 0.8
CRITIC_MIN_CONFIDENCE = 0.8


@dataclass(frozen=True)
class SamplerConfig:
    steps: int = 50
    guidance_emotion: float = 5.0
    guidance_image: float = 1.5
    start_frac: float = 0.8  # re-noising strength: start timestep as a fraction of T
    seed: int = 0

    def validate(self, T: int) -> None:
        if not (1 <= self.steps <= T):
            raise ValueError(f"steps must lie in [1, {T}]")
        if self.guidance_emotion < 0 or self.guidance_image < 0:
            raise ValueError("guidance scales must be >= 0")
        if not (0 < self.start_frac <= 1):
            raise ValueError("start_frac must lie in (0, 1]")


@dataclass(frozen=True)
class CriticVerdict:
    ssim: float
    predicted: str
    confidence: float
    passed: bool

    def to_dict(self) -> dict:
        return {"ssim": self.ssim, "predicted": self.predicted, "confidence": self.confidence, "passed": self.passed}


@dataclass
class EditSession:
    source: np.ndarray
    target_emotion: str
    iterations: list[tuple[np.ndarray, CriticVerdict]] = field(default_factory=list)
    final: np.ndarray | None = None
    stop_reason: str = ""  # "criteria_met" | "iteration_cap"
    final_index: int = -1
    seeds: list[int] = field(default_factory=list)


@torch.no_grad()
def _guided_eps(nets: EditorNets, z_t: torch.Tensor, t: float, z_cond: torch.Tensor, e: torch.Tensor, cfg: SamplerConfig) -> torch.Tensor:
    """Two-scale classifier-free guidance over the image and emotion conditions."""
    null_e = nets.denoiser.null_embedding.detach()
    zeros = torch.zeros_like(z_cond)
    zb = torch.stack([z_t, z_t, z_t])
    cb = torch.stack([zeros, z_cond, z_cond])
    eb = torch.stack([null_e, null_e, e])
    tb = torch.full((3,), t, dtype=z_t.dtype)
    eps = nets.denoiser(zb, tb, cb, eb)
    eps_uncond, eps_img, eps_full = eps[0], eps[1], eps[2]
    return (
        eps_uncond
        + cfg.guidance_image * (eps_img - eps_uncond)
        + cfg.guidance_emotion * (eps_full - eps_img)
    )


def _timestep_sequence(T: int, start_t: int, steps: int) -> list[int]:
    """Descending timesteps from start_t toward 1, at most ``steps`` of them."""
    ts = np.unique(np.linspace(1, start_t, min(steps, start_t)).round().astype(int))[::-1]
    return [int(t) for t in ts]


@torch.no_grad()
def sample_edit(
    nets: EditorNets,
    schedule: NoiseSchedule,
    input_image: np.ndarray,
    condition_image: np.ndarray,
    e: torch.Tensor,
    cfg: SamplerConfig,
) -> np.ndarray:
    """One guided edit: noise the input latent, denoise with DDIM, decode.

    Deterministic given the seed: the only randomness is the initial
    re-noising draw.
    """
    cfg.validate(schedule.T)
    z_in = nets.codec.encode_image(input_image)
    z_cond = nets.codec.encode_image(condition_image)
    start_t = max(1, int(round(cfg.start_frac * schedule.T)))
    gen = torch.Generator().manual_seed(cfg.seed)
    eps0 = torch.randn(z_in.shape, generator=gen)
    z = add_noise(schedule, z_in, start_t, eps0)

    ts = _timestep_sequence(schedule.T, start_t, cfg.steps)
    for i, t in enumerate(ts):
        ab_t = schedule.alpha_bar_at(t)
        t_prev = ts[i + 1] if i + 1 < len(ts) else 0
        ab_prev = schedule.alpha_bar_at(t_prev)
        eps = _guided_eps(nets, z, float(t), z_cond, e, cfg)
        z0_pred = (z - math.sqrt(1.0 - ab_t) * eps) / math.sqrt(ab_t)
        z = math.sqrt(ab_prev) * z0_pred + math.sqrt(1.0 - ab_prev) * eps

    return nets.codec.decode_image(z)


def critic_evaluate(candidate: np.ndarray, source: np.ndarray, target: str, predictor) -> CriticVerdict:
    """Pure verdict: SSIM in [0.3, 0.8] (inclusive) and target predicted with confidence > 0.8."""
    if np.asarray(candidate).shape != np.asarray(source).shape:
        raise ValueError("candidate and source dimensions differ")
    emotion_index(target)
    s = ssim(candidate, source)
    label, conf = predictor.predict_top1(candidate)
    passed = (CRITIC_SSIM_LOW <= s <= CRITIC_SSIM_HIGH) and label == target and conf > CRITIC_MIN_CONFIDENCE
    return CriticVerdict(ssim=s, predicted=label, confidence=conf, passed=passed)


def _confidence_for_target(verdict: CriticVerdict, target: str, predictor, image: np.ndarray) -> float:
    # the fallback ranks by the predictor's probability of the *target* class
    probs = predictor.predict_distribution(image)
    return float(probs[emotion_index(target)])


def iterative_edit(
    source: np.ndarray,
    target: str,
    nets: EditorNets,
    schedule: NoiseSchedule,
    predictor,
    cfg: SamplerConfig,
    encode_target=None,
    critic=None,
    sampler=None,
    max_iterations: int = MAX_CRITIC_ITERATIONS,
) -> EditSession:
    """Critic-guided editing loop.

    Iteration 1 starts from the noised source latent; iteration k>1 starts
    from the previous output, with the source always the condition image.
    Stops on the first passing verdict or at the iteration cap, falling
    back to the image with maximum target confidence (earliest iteration
    wins ties). ``critic`` and ``sampler`` are injectable for testing.
    """
    from emoedit.diffusion import encode_emotion
    from emoedit.taxonomy import one_hot_encode

    if encode_target is None:
        e = encode_emotion(nets.emotion_encoder, one_hot_encode(target))
    else:
        e = encode_target
    if critic is None:
        critic = lambda img: critic_evaluate(img, source, target, predictor)
    if sampler is None:
        sampler = lambda inp, seed: sample_edit(
            nets, schedule, inp, source, e,
            SamplerConfig(cfg.steps, cfg.guidance_emotion, cfg.guidance_image, cfg.start_frac, seed),
        )

    session = EditSession(source=source, target_emotion=target)
    current_input = source
    for k in range(max_iterations):
        seed_k = cfg.seed + k
        session.seeds.append(seed_k)
        candidate = sampler(current_input, seed_k)
        verdict = critic(candidate)
        session.iterations.append((candidate, verdict))
        if verdict.passed:
            session.final = candidate
            session.final_index = k
            session.stop_reason = "criteria_met"
            return session
        current_input = candidate

    # cap reached: fall back to argmax confidence for the target
    best_idx, best_conf = 0, -1.0
    for i, (img, verdict) in enumerate(session.iterations):
        conf = verdict.confidence if verdict.predicted == target else _target_prob(predictor, img, target)
        if conf > best_conf:
            best_idx, best_conf = i, conf
    session.final = session.iterations[best_idx][0]
    session.final_index = best_idx
    session.stop_reason = "iteration_cap"
    return session


def _target_prob(predictor, image: np.ndarray, target: str) -> float:
    if predictor is None:
        return -1.0
    return float(predictor.predict_distribution(image)[emotion_index(target)])


# --------------------------------------------------------------------------
# Session persistence and replay
# --------------------------------------------------------------------------


def save_session(session: EditSession, out_dir: str | Path, cfg: SamplerConfig) -> None:
    """Persist all intermediates, verdicts, and the sampler config for replay."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_image(session.source, out_dir / "source.png")
    with open(out_dir / "verdicts.jsonl", "w") as fh:
        for i, (img, verdict) in enumerate(session.iterations):
            save_image(img, out_dir / f"iter_{i:02d}.png")
            fh.write(json.dumps({"iteration": i, "seed": session.seeds[i], **verdict.to_dict()}) + "\n")
    if session.final is not None:
        save_image(session.final, out_dir / "final.png")
    meta = {
        "target_emotion": session.target_emotion,
        "stop_reason": session.stop_reason,
        "final_index": session.final_index,
        "seeds": session.seeds,
        "sampler": {
            "steps": cfg.steps,
            "guidance_emotion": cfg.guidance_emotion,
            "guidance_image": cfg.guidance_image,
            "start_frac": cfg.start_frac,
            "seed": cfg.seed,
        },
    }
    (out_dir / "session.json").write_text(json.dumps(meta, indent=2))


def replay_session(session_dir: str | Path, nets: EditorNets, schedule: NoiseSchedule, predictor) -> EditSession:
    """Re-run a persisted session from its logs; reproduces the image sequence."""
    session_dir = Path(session_dir)
    meta = json.loads((session_dir / "session.json").read_text())
    source = load_image(session_dir / "source.png")
    s = meta["sampler"]
    cfg = SamplerConfig(
        steps=s["steps"],
        guidance_emotion=s["guidance_emotion"],
        guidance_image=s["guidance_image"],
        start_frac=s["start_frac"],
        seed=s["seed"],
    )
    return iterative_edit(source, meta["target_emotion"], nets, schedule, predictor, cfg)
