"""The trainable diffusion editor core.

Pieces: the noise schedule and forward process, a small frozen
convolutional autoencoder (latent codec), the learned emotion encoder, a
frozen hashing text encoder standing in for a large pretrained one, the
conditional denoiser, the two losses, and the training loop.
"""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from emoedit.images import clamp_to_image, validate_image
from emoedit.taxonomy import NUM_EMOTIONS, class_order_hash

log = logging.getLogger(__name__)

EDITOR_CHECKPOINT_VERSION = 1
CODEC_CHECKPOINT_VERSION = 1


# --------------------------------------------------------------------------
# Noise schedule and forward process
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class NoiseSchedule:
    """Per-step coefficients alpha_t and cumulative products alpha_bar_t.

    Vectors are indexed 0..T-1 for steps t=1..T; alpha_bar(0) is defined
    as 1 (no noise).
    """

    T: int
    beta: np.ndarray
    alpha: np.ndarray
    alpha_bar: np.ndarray

    def alpha_bar_at(self, t: int) -> float:
        """alpha_bar for step t in [0, T]; t=0 means the clean latent."""
        if not (0 <= t <= self.T):
            raise ValueError(f"t must be in [0, {self.T}], got {t}")
        return 1.0 if t == 0 else float(self.alpha_bar[t - 1])


def build_schedule(T: int = 1000, beta_start: float = 1e-4, beta_end: float = 2e-2) -> NoiseSchedule:
    """Linear-beta schedule; alpha_t = 1 - beta_t, alpha_bar = cumprod."""
    if T < 1:
        raise ValueError("T must be >= 1")
    if not (0 < beta_start <= beta_end < 1):
        raise ValueError(f"need 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}")
    beta = np.linspace(beta_start, beta_end, T, dtype=np.float64)
    alpha = 1.0 - beta
    alpha_bar = np.cumprod(alpha)
    return NoiseSchedule(T=T, beta=beta, alpha=alpha, alpha_bar=alpha_bar)


def add_noise(schedule: NoiseSchedule, z0: torch.Tensor, t: int, epsilon: torch.Tensor) -> torch.Tensor:
    """Closed-form forward process: z_t = sqrt(ab_t) z0 + sqrt(1 - ab_t) eps."""
    if not (1 <= t <= schedule.T):
        raise ValueError(f"t must be in [1, {schedule.T}], got {t}")
    if epsilon.shape != z0.shape:
        raise ValueError(f"epsilon shape {tuple(epsilon.shape)} != z0 shape {tuple(z0.shape)}")
    ab = schedule.alpha_bar_at(t)
    return math.sqrt(ab) * z0 + math.sqrt(1.0 - ab) * epsilon


# --------------------------------------------------------------------------
# Latent codec (frozen during editor training)
# --------------------------------------------------------------------------


class LatentCodec(nn.Module):
    """Small convolutional autoencoder: side×side×3 images <-> 4×(side/8)² latents."""

    def __init__(self, side: int = 64, latent_channels: int = 4, width: int = 32):
        super().__init__()
        w = width
        self.side = side
        self.latent_channels = latent_channels
        self.encoder = nn.Sequential(
            nn.Conv2d(3, w, 3, stride=2, padding=1),
            nn.SiLU(),
            nn.Conv2d(w, 2 * w, 3, stride=2, padding=1),
            nn.SiLU(),
            nn.Conv2d(2 * w, 2 * w, 3, stride=2, padding=1),
            nn.SiLU(),
            nn.Conv2d(2 * w, latent_channels, 3, padding=1),
        )
        self.decoder = nn.Sequential(
            nn.Conv2d(latent_channels, 2 * w, 3, padding=1),
            nn.SiLU(),
            nn.Upsample(scale_factor=2, mode="nearest"),
            nn.Conv2d(2 * w, 2 * w, 3, padding=1),
            nn.SiLU(),
            nn.Upsample(scale_factor=2, mode="nearest"),
            nn.Conv2d(2 * w, w, 3, padding=1),
            nn.SiLU(),
            nn.Upsample(scale_factor=2, mode="nearest"),
            nn.Conv2d(w, 3, 3, padding=1),
        )

    @property
    def latent_shape(self) -> tuple[int, int, int]:
        s = self.side // 8
        return (self.latent_channels, s, s)

    def encode_tensor(self, x: torch.Tensor) -> torch.Tensor:
        return self.encoder(x)

    def decode_tensor(self, z: torch.Tensor) -> torch.Tensor:
        return self.decoder(z)

    @torch.no_grad()
    def encode_image(self, image: np.ndarray) -> torch.Tensor:
        validate_image(image, side=self.side)
        x = torch.from_numpy(np.asarray(image, dtype=np.float32)).permute(2, 0, 1) / 127.5 - 1.0
        return self.encoder(x.unsqueeze(0))[0]

    @torch.no_grad()
    def decode_image(self, z: torch.Tensor) -> np.ndarray:
        x = self.decoder(z.unsqueeze(0))[0]
        arr = ((x.permute(1, 2, 0).numpy() + 1.0) * 127.5)
        return clamp_to_image(arr)


def train_codec(
    images: np.ndarray, side: int, steps: int = 1200, lr: float = 2e-3, batch_size: int = 32, seed: int = 0
) -> tuple[LatentCodec, float]:
    """Train the autoencoder on a corpus; returns (codec, mean abs pixel error 0-255)."""
    torch.manual_seed(seed)
    codec = LatentCodec(side=side)
    opt = torch.optim.Adam(codec.parameters(), lr=lr)
    x_all = torch.from_numpy(np.asarray(images, dtype=np.float32)).permute(0, 3, 1, 2) / 127.5 - 1.0
    n = len(x_all)
    gen = torch.Generator().manual_seed(seed)
    codec.train()
    for step in range(steps):
        idx = torch.randint(0, n, (batch_size,), generator=gen)
        xb = x_all[idx]
        recon = codec.decode_tensor(codec.encode_tensor(xb))
        loss = F.mse_loss(recon, xb)
        opt.zero_grad(set_to_none=True)
        loss.backward()
        opt.step()
        if step % 200 == 0:
            log.info("codec step %d: mse %.5f", step, loss.detach().item())
    codec.eval()
    with torch.no_grad():
        mae = 0.0
        for start in range(0, n, 64):
            xb = x_all[start : start + 64]
            recon = codec.decode_tensor(codec.encode_tensor(xb))
            mae += float((recon - xb).abs().mean()) * len(xb)
        mae = mae / n * 127.5
    log.info("codec reconstruction MAE: %.2f / 255", mae)
    return codec, mae


def save_codec(codec: LatentCodec, path: str | Path, recon_mae: float | None = None) -> None:
    payload = {
        "version": CODEC_CHECKPOINT_VERSION,
        "side": codec.side,
        "latent_channels": codec.latent_channels,
        "state_dict": codec.state_dict(),
        "recon_mae": recon_mae,
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    torch.save(payload, tmp)
    tmp.replace(path)


def load_codec(path: str | Path) -> LatentCodec:
    payload = torch.load(path, map_location="cpu", weights_only=True)
    codec = LatentCodec(side=payload["side"], latent_channels=payload["latent_channels"])
    codec.load_state_dict(payload["state_dict"])
    codec.eval()
    return codec


# --------------------------------------------------------------------------
# Emotion encoder and frozen text encoder
# --------------------------------------------------------------------------


class EmotionEncoder(nn.Module):
    """Stack of fully connected blocks mapping an 8-way one-hot to an embedding."""

    def __init__(self, embed_dim: int = 128, hidden: int = 128, blocks: int = 2):
        super().__init__()
        layers: list[nn.Module] = []
        d = NUM_EMOTIONS
        for _ in range(blocks):
            layers += [nn.Linear(d, hidden), nn.SiLU()]
            d = hidden
        layers.append(nn.Linear(d, embed_dim))
        self.net = nn.Sequential(*layers)
        self.embed_dim = embed_dim

    def forward(self, e_oh: torch.Tensor) -> torch.Tensor:
        return self.net(e_oh)


def encode_emotion(encoder: EmotionEncoder, e_oh: np.ndarray | torch.Tensor) -> torch.Tensor:
    """Encode a single one-hot vector; rejects anything that is not one-hot."""
    vec = torch.as_tensor(np.asarray(e_oh), dtype=torch.float32)
    if vec.shape != (NUM_EMOTIONS,):
        raise ValueError(f"expected shape ({NUM_EMOTIONS},), got {tuple(vec.shape)}")
    ones = (vec == 1).sum()
    if int(ones) != 1 or float(vec.sum()) != 1.0:
        raise ValueError("input is not a one-hot vector")
    with torch.no_grad():
        return encoder(vec.unsqueeze(0))[0]


class HashedTextEncoder:
    """Deterministic frozen text embedding: token hashing + fixed random projection.

    Stands in for a large pretrained contrastive text model behind the
    same interface: identical text always maps to the identical vector.
    """

    def __init__(self, embed_dim: int = 128, buckets: int = 512, seed: int = 1234):
        self.embed_dim = embed_dim
        self.buckets = buckets
        self.seed = seed
        rng = np.random.default_rng(seed)
        self.table = rng.standard_normal((buckets, embed_dim)) / math.sqrt(embed_dim)

    def _bucket(self, token: str) -> int:
        digest = hashlib.sha1(token.encode()).digest()
        return int.from_bytes(digest[:4], "big") % self.buckets

    def embed(self, text: str) -> np.ndarray:
        tokens = [t for t in "".join(c if c.isalnum() else " " for c in text.lower()).split() if t]
        if not tokens:
            raise ValueError("cannot embed empty instruction text")
        vec = np.mean([self.table[self._bucket(t)] for t in tokens], axis=0)
        norm = np.linalg.norm(vec)
        if norm == 0:
            raise ValueError("degenerate zero embedding")
        return (vec / norm).astype(np.float64)

    def checksum(self) -> str:
        return hashlib.sha256(self.table.tobytes()).hexdigest()


# --------------------------------------------------------------------------
# Denoiser
# --------------------------------------------------------------------------


def timestep_embedding(t: torch.Tensor, dim: int) -> torch.Tensor:
    """Sinusoidal timestep embedding."""
    half = dim // 2
    freqs = torch.exp(-math.log(10000.0) * torch.arange(half, dtype=torch.float64) / half).to(t.dtype)
    args = t[:, None].to(freqs) * freqs[None, :]
    return torch.cat([torch.cos(args), torch.sin(args)], dim=-1)


class _ResBlock(nn.Module):
    def __init__(self, c_in: int, c_out: int, t_dim: int):
        super().__init__()
        self.conv1 = nn.Conv2d(c_in, c_out, 3, padding=1)
        self.conv2 = nn.Conv2d(c_out, c_out, 3, padding=1)
        self.t_proj = nn.Linear(t_dim, c_out)
        self.skip = nn.Conv2d(c_in, c_out, 1) if c_in != c_out else nn.Identity()

    def forward(self, x: torch.Tensor, t_emb: torch.Tensor) -> torch.Tensor:
        h = F.silu(self.conv1(x))
        h = h + self.t_proj(t_emb)[:, :, None, None]
        h = F.silu(self.conv2(h))
        return h + self.skip(x)


class _CrossAttention(nn.Module):
    """Single-head cross-attention from spatial features to the condition tokens."""

    def __init__(self, channels: int, ctx_dim: int):
        super().__init__()
        self.q = nn.Conv2d(channels, channels, 1)
        self.k = nn.Linear(ctx_dim, channels)
        self.v = nn.Linear(ctx_dim, channels)
        self.proj = nn.Conv2d(channels, channels, 1)
        self.scale = channels**-0.5

    def forward(self, x: torch.Tensor, ctx: torch.Tensor) -> torch.Tensor:
        # x: B×C×H×W, ctx: B×L×D
        b, c, h, w = x.shape
        q = self.q(x).reshape(b, c, h * w).transpose(1, 2)  # B×HW×C
        k = self.k(ctx)  # B×L×C
        v = self.v(ctx)
        attn = torch.softmax(q @ k.transpose(1, 2) * self.scale, dim=-1)
        out = (attn @ v).transpose(1, 2).reshape(b, c, h, w)
        return x + self.proj(out)


class DenoiserNetwork(nn.Module):
    """U-shaped conditional noise predictor.

    The source latent is concatenated channel-wise with the noisy latent
    at the input; the emotion embedding enters via cross-attention as a
    length-1 context sequence; the timestep enters residual blocks through
    a sinusoidal embedding. The output head is zero-initialized.
    """

    def __init__(self, latent_channels: int = 4, width: int = 48, embed_dim: int = 128, t_dim: int = 64):
        super().__init__()
        w = width
        self.t_dim = t_dim
        self.t_mlp = nn.Sequential(nn.Linear(t_dim, t_dim), nn.SiLU(), nn.Linear(t_dim, t_dim))
        self.stem = nn.Conv2d(2 * latent_channels, w, 3, padding=1)
        self.down1 = _ResBlock(w, w, t_dim)
        self.attn1 = _CrossAttention(w, embed_dim)
        self.pool = nn.Conv2d(w, 2 * w, 3, stride=2, padding=1)
        self.mid1 = _ResBlock(2 * w, 2 * w, t_dim)
        self.attn_mid = _CrossAttention(2 * w, embed_dim)
        self.mid2 = _ResBlock(2 * w, 2 * w, t_dim)
        self.up = nn.Upsample(scale_factor=2, mode="nearest")
        self.up_conv = nn.Conv2d(2 * w, w, 3, padding=1)
        self.out_block = _ResBlock(2 * w, w, t_dim)
        self.head = nn.Conv2d(w, latent_channels, 3, padding=1)
        nn.init.zeros_(self.head.weight)
        nn.init.zeros_(self.head.bias)
        # learned embedding used when the emotion condition is dropped
        self.null_embedding = nn.Parameter(torch.zeros(embed_dim))

    def forward(self, z_t: torch.Tensor, t: torch.Tensor, z_cond: torch.Tensor, e: torch.Tensor) -> torch.Tensor:
        """Predict the noise in z_t given timestep t, source latent, emotion embedding.

        z_t, z_cond: B×C×h×w; t: B (float steps); e: B×D.
        """
        t_emb = self.t_mlp(timestep_embedding(t, self.t_dim).to(z_t.dtype))
        ctx = e.unsqueeze(1)
        h0 = self.stem(torch.cat([z_t, z_cond], dim=1))
        h1 = self.attn1(self.down1(h0, t_emb), ctx)
        h2 = self.pool(h1)
        h2 = self.mid1(h2, t_emb)
        h2 = self.attn_mid(h2, ctx)
        h2 = self.mid2(h2, t_emb)
        h3 = self.up_conv(self.up(h2))
        h = self.out_block(torch.cat([h3, h1], dim=1), t_emb)
        return self.head(F.silu(h))


# --------------------------------------------------------------------------
# Losses
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class LossBreakdown:
    noise_loss: float
    alignment_loss: float
    total: float
    lam: float = 0.5


def alignment_loss(e: torch.Tensor, c: torch.Tensor) -> torch.Tensor:
    """1 - cosine similarity; lies in [0, 2]. Guards against zero-norm inputs."""
    if e.shape != c.shape:
        raise ValueError(f"embedding shapes differ: {tuple(e.shape)} vs {tuple(c.shape)}")
    ne = torch.linalg.vector_norm(e, dim=-1)
    nc = torch.linalg.vector_norm(c, dim=-1)
    if bool((ne == 0).any()) or bool((nc == 0).any()):
        raise ValueError("alignment_loss requires non-zero vectors")
    cos = (e * c).sum(dim=-1) / (ne * nc)
    return (1.0 - cos).mean()


def noise_loss(eps_pred: torch.Tensor, eps_true: torch.Tensor) -> torch.Tensor:
    """Mean squared error over all latent elements."""
    if eps_pred.shape != eps_true.shape:
        raise ValueError(f"shape mismatch: {tuple(eps_pred.shape)} vs {tuple(eps_true.shape)}")
    return F.mse_loss(eps_pred, eps_true)


def compute_losses(
    denoiser: DenoiserNetwork,
    emotion_encoder: EmotionEncoder,
    schedule: NoiseSchedule,
    z0: torch.Tensor,
    z_cond: torch.Tensor,
    e_oh: torch.Tensor,
    c: torch.Tensor,
    t: torch.Tensor,
    eps: torch.Tensor,
    lam: float = 0.5,
    drop_emotion: torch.Tensor | None = None,
    drop_image: torch.Tensor | None = None,
):
    """Differentiable total loss for one batch with fixed (t, eps).

    The alignment loss always uses the real emotion embedding; condition
    dropout only affects what the denoiser sees (null embedding for e,
    zero latent for z_cond). Returns (total, noise, alignment) tensors.
    """
    ab = torch.as_tensor(
        [schedule.alpha_bar_at(int(ti)) for ti in t], dtype=z0.dtype, device=z0.device
    )
    sq = ab.sqrt()[:, None, None, None]
    sq1m = (1.0 - ab).sqrt()[:, None, None, None]
    z_t = sq * z0 + sq1m * eps

    e = emotion_encoder(e_oh)
    e_in = e
    if drop_emotion is not None and bool(drop_emotion.any()):
        null = denoiser.null_embedding.to(e.dtype).unsqueeze(0).expand_as(e)
        e_in = torch.where(drop_emotion[:, None], null, e)
    z_c_in = z_cond
    if drop_image is not None and bool(drop_image.any()):
        z_c_in = torch.where(drop_image[:, None, None, None], torch.zeros_like(z_cond), z_cond)

    eps_pred = denoiser(z_t, t.to(z0.dtype), z_c_in, e_in)
    l_noise = noise_loss(eps_pred, eps)
    l_align = alignment_loss(e, c)
    total = l_noise + lam * l_align
    return total, l_noise, l_align


# --------------------------------------------------------------------------
# Editor training
# --------------------------------------------------------------------------


@dataclass
class EditorTrainConfig:
    steps: int = 2000
    batch_size: int = 8
    lr: float = 2e-3
    lam: float = 0.5
    T: int = 1000
    beta_start: float = 1e-4
    beta_end: float = 2e-2
    embed_dim: int = 128
    cond_dropout: float = 0.05
    seed: int = 0
    checkpoint_every: int = 500


class EditorNets:
    """The trainable pair (emotion encoder, denoiser) plus frozen codec reference."""

    def __init__(self, emotion_encoder: EmotionEncoder, denoiser: DenoiserNetwork, codec: LatentCodec):
        self.emotion_encoder = emotion_encoder
        self.denoiser = denoiser
        self.codec = codec

    def trainable_parameters(self):
        yield from self.emotion_encoder.parameters()
        yield from self.denoiser.parameters()

    def eval(self):
        self.emotion_encoder.eval()
        self.denoiser.eval()
        self.codec.eval()
        return self


def module_checksum(module: nn.Module) -> str:
    """Order-stable hash of all parameter bytes; detects any weight change."""
    h = hashlib.sha256()
    for name, p in sorted(module.state_dict().items()):
        h.update(name.encode())
        h.update(p.detach().cpu().numpy().tobytes())
    return h.hexdigest()


def _save_editor_checkpoint(path: Path, nets: EditorNets, opt, gen, step, cfg: EditorTrainConfig, losses):
    payload = {
        "version": EDITOR_CHECKPOINT_VERSION,
        "step": step,
        "config": cfg.__dict__,
        "class_order_hash": class_order_hash(),
        "emotion_encoder": nets.emotion_encoder.state_dict(),
        "denoiser": nets.denoiser.state_dict(),
        "optimizer": opt.state_dict() if opt is not None else None,
        "generator_state": gen.get_state() if gen is not None else None,
        "loss_history": losses,
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    torch.save(payload, tmp)
    tmp.replace(path)


def save_editor(nets: EditorNets, cfg: EditorTrainConfig, path: str | Path, losses=None) -> None:
    _save_editor_checkpoint(Path(path), nets, None, None, cfg.steps, cfg, losses or [])


def load_editor(path: str | Path, codec: LatentCodec) -> tuple[EditorNets, EditorTrainConfig, dict]:
    payload = torch.load(path, map_location="cpu", weights_only=True)
    if payload.get("class_order_hash") != class_order_hash():
        raise ValueError("editor checkpoint was built with a different emotion category order")
    cfg = EditorTrainConfig(**payload["config"])
    enc = EmotionEncoder(embed_dim=cfg.embed_dim)
    enc.load_state_dict(payload["emotion_encoder"])
    den = DenoiserNetwork(latent_channels=codec.latent_channels, embed_dim=cfg.embed_dim)
    den.load_state_dict(payload["denoiser"])
    nets = EditorNets(enc, den, codec).eval()
    return nets, cfg, payload


def train_editor(
    pairs: list[tuple[np.ndarray, np.ndarray, np.ndarray, str]],
    codec: LatentCodec,
    text_encoder: HashedTextEncoder,
    cfg: EditorTrainConfig,
    out_dir: str | Path | None = None,
    resume_from: str | Path | None = None,
) -> tuple[EditorNets, list[float]]:
    """Jointly train the emotion encoder and denoiser on curated pairs.

    ``pairs`` holds (source_image, target_image, target_one_hot,
    instruction) tuples. Codec and text encoder stay frozen; dropout of
    each condition enables classifier-free guidance at inference. Training
    is resumable bit-for-bit: checkpoints carry optimizer and RNG state.
    """
    if not pairs:
        raise ValueError("training corpus is empty")
    schedule = build_schedule(cfg.T, cfg.beta_start, cfg.beta_end)
    codec.eval()
    for p in codec.parameters():
        p.requires_grad_(False)

    # precompute frozen latents and instruction embeddings once
    z0_all = torch.stack([codec.encode_image(tgt) for _, tgt, _, _ in pairs])
    zc_all = torch.stack([codec.encode_image(src) for src, _, _, _ in pairs])
    eoh_all = torch.stack([torch.as_tensor(oh, dtype=torch.float32) for _, _, oh, _ in pairs])
    c_all = torch.stack(
        [torch.as_tensor(text_encoder.embed(instr), dtype=torch.float32) for _, _, _, instr in pairs]
    )
    n = len(pairs)

    torch.manual_seed(cfg.seed)
    enc = EmotionEncoder(embed_dim=cfg.embed_dim)
    den = DenoiserNetwork(latent_channels=codec.latent_channels, embed_dim=cfg.embed_dim)
    opt = torch.optim.Adam(list(enc.parameters()) + list(den.parameters()), lr=cfg.lr)
    gen = torch.Generator().manual_seed(cfg.seed)
    start_step = 0
    losses: list[float] = []

    if resume_from is not None:
        payload = torch.load(resume_from, map_location="cpu", weights_only=True)
        enc.load_state_dict(payload["emotion_encoder"])
        den.load_state_dict(payload["denoiser"])
        if payload["optimizer"] is not None:
            opt.load_state_dict(payload["optimizer"])
        if payload["generator_state"] is not None:
            gen.set_state(payload["generator_state"])
        start_step = payload["step"]
        losses = list(payload["loss_history"])

    enc.train()
    den.train()
    nets = EditorNets(enc, den, codec)
    out_dir = Path(out_dir) if out_dir is not None else None

    for step in range(start_step, cfg.steps):
        idx = torch.randint(0, n, (cfg.batch_size,), generator=gen)
        t = torch.randint(1, cfg.T + 1, (cfg.batch_size,), generator=gen)
        eps = torch.randn(cfg.batch_size, *codec.latent_shape, generator=gen)
        drop_e = torch.rand(cfg.batch_size, generator=gen) < cfg.cond_dropout
        drop_z = torch.rand(cfg.batch_size, generator=gen) < cfg.cond_dropout

        total, l_noise, l_align = compute_losses(
            den, enc, schedule, z0_all[idx], zc_all[idx], eoh_all[idx], c_all[idx],
            t, eps, lam=cfg.lam, drop_emotion=drop_e, drop_image=drop_z,
        )
        if not torch.isfinite(total):
            raise RuntimeError(
                f"non-finite loss at step {step}: noise={l_noise.detach().item()} alignment={l_align.detach().item()}"
            )
        opt.zero_grad(set_to_none=True)
        total.backward()
        opt.step()
        losses.append(total.detach().item())
        if step % 200 == 0:
            log.info("editor step %d: total %.4f noise %.4f align %.4f", step, total.detach().item(), l_noise.detach().item(), l_align.detach().item())
        if out_dir is not None and (step + 1) % cfg.checkpoint_every == 0:
            _save_editor_checkpoint(out_dir / "editor_latest.pt", nets, opt, gen, step + 1, cfg, losses)

    if out_dir is not None:
        _save_editor_checkpoint(out_dir / "editor_latest.pt", nets, opt, gen, cfg.steps, cfg, losses)
    nets.eval()
    return nets, losses
