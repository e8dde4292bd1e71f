"""Evaluation metrics: SSIM and Canny kernels plus EMR / ESR / ENRD / ESS.

EMR and ESR score how well generated images hit the target emotion; ENRD
and ESS score structural/semantic fidelity to the source. ENRD measures
mean absolute pixel deviation over emotion-neutral regions (the complement
of the binarized saliency mask); ESS is a scaled L1 distance between
Canny edge maps.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from emoedit.images import to_gray
from emoedit.taxonomy import emotion_index

# --------------------------------------------------------------------------
# SSIM
# --------------------------------------------------------------------------

_SSIM_WINDOW = 11
_SSIM_SIGMA = 1.5
_C1 = (0.01 * 255.0) ** 2
_C2 = (0.03 * 255.0) ** 2


def gaussian_window(size: int = _SSIM_WINDOW, sigma: float = _SSIM_SIGMA) -> np.ndarray:
    """Normalized 2-D Gaussian window."""
    ax = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(ax**2) / (2.0 * sigma**2))
    win = np.outer(g, g)
    return win / win.sum()


def _filter_valid(img: np.ndarray, win: np.ndarray) -> np.ndarray:
    # 'valid' windowed correlation: every output pixel sees a full window.
    full = ndimage.correlate(img, win, mode="constant", cval=0.0)
    r = win.shape[0] // 2
    return full[r:-r, r:-r]


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Single-scale SSIM on Rec. 601 grayscale, 11×11 Gaussian window σ=1.5.

    Mean over all fully-covered windows. Result is ~[0, 1] but can dip
    below 0 for anticorrelated patches; clamped to [-1, 1].
    """
    ga, gb = to_gray(a), to_gray(b)
    if ga.shape != gb.shape:
        raise ValueError(f"image shapes differ: {ga.shape} vs {gb.shape}")
    if min(ga.shape) < _SSIM_WINDOW:
        raise ValueError(f"images smaller than the {_SSIM_WINDOW}×{_SSIM_WINDOW} SSIM window")
    win = gaussian_window()
    mu_a = _filter_valid(ga, win)
    mu_b = _filter_valid(gb, win)
    mu_aa = mu_a * mu_a
    mu_bb = mu_b * mu_b
    mu_ab = mu_a * mu_b
    var_a = _filter_valid(ga * ga, win) - mu_aa
    var_b = _filter_valid(gb * gb, win) - mu_bb
    cov = _filter_valid(ga * gb, win) - mu_ab
    num = (2 * mu_ab + _C1) * (2 * cov + _C2)
    den = (mu_aa + mu_bb + _C1) * (var_a + var_b + _C2)
    return float(np.clip(np.mean(num / den), -1.0, 1.0))


# --------------------------------------------------------------------------
# Canny edges
# --------------------------------------------------------------------------

_SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64)
_SOBEL_Y = _SOBEL_X.T


def _gaussian_blur_5x5(img: np.ndarray, sigma: float = 1.4) -> np.ndarray:
    ax = np.arange(5, dtype=np.float64) - 2.0
    g = np.exp(-(ax**2) / (2.0 * sigma**2))
    k = np.outer(g, g)
    k /= k.sum()
    return ndimage.correlate(img, k, mode="nearest")


def canny_edges(img: np.ndarray, low: float = 200.0, high: float = 500.0) -> np.ndarray:
    """Binary Canny edge map.

    Grayscale -> 5×5 Gaussian blur (σ=1.4) -> 3×3 Sobel (L2 magnitude) ->
    non-maximum suppression -> hysteresis (≥high seeds, ≥low grows,
    8-connected). Thresholds apply to the raw gradient magnitude, which
    reaches ~1443 on 0-255 input.
    """
    if not (0 < low < high):
        raise ValueError(f"need 0 < low < high, got low={low} high={high}")
    gray = _gaussian_blur_5x5(to_gray(img))
    gx = ndimage.correlate(gray, _SOBEL_X, mode="nearest")
    gy = ndimage.correlate(gray, _SOBEL_Y, mode="nearest")
    mag = np.hypot(gx, gy)

    # Non-maximum suppression with the angle quantized to 4 directions.
    angle = np.rad2deg(np.arctan2(gy, gx)) % 180.0
    padded = np.pad(mag, 1, mode="constant")
    h, w = mag.shape
    nms = np.zeros_like(mag)
    # direction bins: 0°=E/W, 45°=NE/SW, 90°=N/S, 135°=NW/SE
    bins = np.zeros(mag.shape, dtype=np.int8)
    bins[(angle >= 22.5) & (angle < 67.5)] = 1
    bins[(angle >= 67.5) & (angle < 112.5)] = 2
    bins[(angle >= 112.5) & (angle < 157.5)] = 3
    offsets = {0: ((0, 1), (0, -1)), 1: ((-1, 1), (1, -1)), 2: ((-1, 0), (1, 0)), 3: ((-1, -1), (1, 1))}
    for b, ((dy1, dx1), (dy2, dx2)) in offsets.items():
        sel = bins == b
        n1 = padded[1 + dy1 : 1 + dy1 + h, 1 + dx1 : 1 + dx1 + w]
        n2 = padded[1 + dy2 : 1 + dy2 + h, 1 + dx2 : 1 + dx2 + w]
        # strict against one neighbor so a perfectly symmetric ridge keeps
        # a single-pixel line instead of two
        keep = sel & (mag > n1) & (mag >= n2)
        nms[keep] = mag[keep]

    strong = nms >= high
    weak = nms >= low
    # hysteresis: keep weak pixels 8-connected to a strong seed
    labels, n = ndimage.label(weak, structure=np.ones((3, 3), dtype=int))
    if n == 0:
        return np.zeros(mag.shape, dtype=np.uint8)
    seeded = np.unique(labels[strong])
    seeded = seeded[seeded > 0]
    return np.isin(labels, seeded).astype(np.uint8)


# --------------------------------------------------------------------------
# The four metrics
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class EvalTriple:
    """Source image, generated image, and the intended target emotion."""

    source: np.ndarray
    generated: np.ndarray
    target_emotion: str

    def __post_init__(self):
        if np.asarray(self.source).shape != np.asarray(self.generated).shape:
            raise ValueError("source and generated dimensions differ")
        emotion_index(self.target_emotion)


def emr_item(triple: EvalTriple, predictor) -> bool:
    """True when the predictor's top-1 on the generated image equals the target."""
    label, _ = predictor.predict_top1(triple.generated)
    return label == triple.target_emotion


def esr_item(triple: EvalTriple, predictor) -> bool:
    """True when the generated image moved probability mass toward the target.

    Under the one-hot-reference KL reading the criterion reduces to
    p_generated[target] > p_source[target] (strict).
    """
    idx = emotion_index(triple.target_emotion)
    e_g = predictor.predict_distribution(triple.generated)
    e_s = predictor.predict_distribution(triple.source)
    return float(e_g[idx]) > float(e_s[idx])


def neutral_region_deviation(source: np.ndarray, generated: np.ndarray, mask: np.ndarray) -> float | None:
    """Mean |source - generated| over pixels where ``mask`` is 0, 0-255 units.

    Returns None when the mask leaves no neutral pixels.
    """
    neutral = np.asarray(mask) == 0
    if not neutral.any():
        return None
    diff = np.abs(np.asarray(source, dtype=np.float64) - np.asarray(generated, dtype=np.float64))
    return float(diff[neutral].mean())


def enrd_item(triple: EvalTriple, predictor, threshold: float = 0.5) -> float | None:
    """ENRD for one triple: deviation over the complement of the binarized
    saliency map of the source image for its own top-1 class. Returns None
    when no neutral pixels exist (item excluded from batch means).
    """
    from emoedit.predictor import binarize_saliency  # local import avoids a cycle

    label, _ = predictor.predict_top1(triple.source)
    sal = predictor.grad_cam(triple.source, emotion_index(label))
    mask = binarize_saliency(sal, threshold)
    return neutral_region_deviation(triple.source, triple.generated, mask)


def ess_item(triple: EvalTriple, low: float = 200.0, high: float = 500.0) -> float:
    """100 × mean absolute difference between binary Canny edge maps."""
    ea = canny_edges(triple.source, low, high)
    eb = canny_edges(triple.generated, low, high)
    return float(100.0 * np.mean(np.abs(ea.astype(np.float64) - eb.astype(np.float64))))


@dataclass
class MetricReport:
    """Aggregate EMR/ESR/ENRD/ESS over an evaluation batch."""

    emr: float
    esr: float
    enrd: float
    ess: float
    n: int
    enrd_excluded: int = 0
    per_item: list[dict] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(
            {
                "emr": self.emr,
                "esr": self.esr,
                "enrd": self.enrd,
                "ess": self.ess,
                "n": self.n,
                "enrd_excluded": self.enrd_excluded,
                "per_item": self.per_item,
            },
            indent=2,
        )

    def summary_table(self) -> str:
        lines = [
            "Metric    Value",
            "-----------------",
            f"EMR(%)↑   {100.0 * self.emr:.2f}",
            f"ESR(%)↑   {100.0 * self.esr:.2f}",
            f"ENRD↓     {self.enrd:.2f}",
            f"ESS↓      {self.ess:.2f}",
            f"n         {self.n}",
        ]
        if self.enrd_excluded:
            lines.append(f"ENRD items excluded (no neutral pixels): {self.enrd_excluded}")
        return "\n".join(lines)


def evaluate_batch(triples: list[EvalTriple], predictor, keep_per_item: bool = True) -> MetricReport:
    """Score a batch of triples; aggregates are means/proportions of per-item values."""
    if not triples:
        raise ValueError("empty evaluation batch")
    rows = []
    enrd_vals = []
    excluded = 0
    for i, tr in enumerate(triples):
        row = {
            "index": i,
            "target_emotion": tr.target_emotion,
            "emr": bool(emr_item(tr, predictor)),
            "esr": bool(esr_item(tr, predictor)),
            "ess": ess_item(tr),
        }
        e = enrd_item(tr, predictor)
        if e is None:
            excluded += 1
            row["enrd"] = None
        else:
            enrd_vals.append(e)
            row["enrd"] = e
        rows.append(row)
    report = MetricReport(
        emr=float(np.mean([r["emr"] for r in rows])),
        esr=float(np.mean([r["esr"] for r in rows])),
        enrd=float(np.mean(enrd_vals)) if enrd_vals else 0.0,
        ess=float(np.mean([r["ess"] for r in rows])),
        n=len(triples),
        enrd_excluded=excluded,
        per_item=rows if keep_per_item else [],
    )
    return report


def write_report(report: MetricReport, path: str | Path) -> None:
    """Persist the machine-readable JSON report plus a plain-text summary."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(report.to_json())
    path.with_suffix(path.suffix + ".txt").write_text(report.summary_table() + "\n")
