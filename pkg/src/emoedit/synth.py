"""Procedural toy corpus: 8 visually distinct classes, one per emotion.

Class k is keyed to a base hue (k/8) plus a k-specific shape motif, so the
classes are separable by construction. Everything is seeded and
deterministic; the same seed yields byte-identical corpora.
"""

from __future__ import annotations

import colorsys
from pathlib import Path

import numpy as np

from emoedit.images import clamp_to_image, save_image
from emoedit.taxonomy import EMOTIONS


def class_base_color(class_index: int) -> np.ndarray:
    """Saturated base RGB color for a class, float in [0, 255]."""
    r, g, b = colorsys.hsv_to_rgb(class_index / 8.0, 0.85, 0.9)
    return np.array([r, g, b]) * 255.0


def _motif_mask(class_index: int, side: int, cx: float, cy: float, scale: float) -> np.ndarray:
    """Boolean mask of the class motif centered near (cx, cy)."""
    yy, xx = np.mgrid[0:side, 0:side].astype(np.float64)
    dx, dy = xx - cx, yy - cy
    r = scale * side
    k = class_index
    if k == 0:  # disc
        return dx**2 + dy**2 < r**2
    if k == 1:  # ring
        d2 = dx**2 + dy**2
        return (d2 < r**2) & (d2 > (0.6 * r) ** 2)
    if k == 2:  # horizontal stripes
        return (yy // max(4, int(0.8 * r))) % 2 == 0
    if k == 3:  # vertical stripes
        return (xx // max(4, int(0.8 * r))) % 2 == 0
    if k == 4:  # square
        return (np.abs(dx) < r) & (np.abs(dy) < r)
    if k == 5:  # diagonal cross
        return (np.abs(dx - dy) < 0.5 * r) | (np.abs(dx + dy) < 0.5 * r)
    if k == 6:  # triangle
        return (dy > -r) & (dy < r) & (np.abs(dx) < (dy + r) * 0.5)
    # k == 7: dot grid
    step = max(8, int(1.4 * r))
    return ((xx % step) < 0.55 * step) & ((yy % step) < 0.55 * step) & (dx**2 + dy**2 < (2.5 * r) ** 2)


def render_class_image(class_index: int, side: int, rng: np.random.Generator) -> np.ndarray:
    """One procedural image of a class: hued background, gradient, noise, motif."""
    base = class_base_color(class_index)
    yy, xx = np.mgrid[0:side, 0:side].astype(np.float64) / side
    # per-image smooth brightness gradient
    gdir = rng.uniform(0, 2 * np.pi)
    strength = rng.uniform(0.25, 0.55)
    ramp = 1.0 - strength / 2.0 + strength * (np.cos(gdir) * xx + np.sin(gdir) * yy)
    img = base[None, None, :] * ramp[:, :, None]
    # texture noise
    img += rng.normal(0.0, 4.0, size=(side, side, 3))
    # motif in a contrasting shade
    cx = rng.uniform(0.3, 0.7) * side
    cy = rng.uniform(0.3, 0.7) * side
    scale = rng.uniform(0.16, 0.24)
    mask = _motif_mask(class_index, side, cx, cy, scale)
    motif_color = 255.0 - 0.8 * base
    img[mask] = 0.25 * img[mask] + 0.75 * motif_color[None, :]
    return clamp_to_image(img)


def synth_corpus(
    out_dir: str | Path, per_class: int = 100, side: int = 64, seed: int = 0
) -> tuple[list[Path], list[str]]:
    """Generate ``per_class`` images for each of the 8 classes under ``out_dir``.

    Returns (paths, labels); also writes a labels.tsv index. Deterministic
    given the seed.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths: list[Path] = []
    labels: list[str] = []
    rng = np.random.default_rng(seed)
    for k, emotion in enumerate(EMOTIONS):
        for i in range(per_class):
            img = render_class_image(k, side, rng)
            p = out_dir / f"{emotion}_{i:04d}.png"
            save_image(img, p)
            paths.append(p)
            labels.append(emotion)
    index = out_dir / "labels.tsv"
    index.write_text("".join(f"{p.name}\t{l}\n" for p, l in zip(paths, labels)))
    return paths, labels


def load_corpus(out_dir: str | Path) -> tuple[np.ndarray, list[str]]:
    """Load a synthesized corpus back as (N×H×W×3 uint8 array, labels)."""
    from emoedit.images import load_image

    out_dir = Path(out_dir)
    images, labels = [], []
    for line in (out_dir / "labels.tsv").read_text().splitlines():
        name, label = line.split("\t")
        images.append(load_image(out_dir / name))
        labels.append(label)
    return np.stack(images), labels
