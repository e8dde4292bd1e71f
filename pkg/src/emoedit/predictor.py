"""The emotion classifier: training, prediction, and Grad-CAM saliency.

The desk-scale backbone is 4 conv blocks + global average pool + linear
head; the last conv block is the designated saliency layer. The shape
contract (8-way softmax, a spatial feature layer for Grad-CAM) is what
matters, not the architecture.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from emoedit.images import validate_image
from emoedit.taxonomy import EMOTIONS, NUM_EMOTIONS, class_order_hash

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1


class _Backbone(nn.Module):
    def __init__(self, input_side: int, width: int = 32):
        super().__init__()
        w = width
        self.features = nn.Sequential(
            nn.Conv2d(3, w, 3, stride=2, padding=1),
            nn.ReLU(inplace=True),
            nn.Conv2d(w, w, 3, stride=2, padding=1),
            nn.ReLU(inplace=True),
            nn.Conv2d(w, 2 * w, 3, stride=2, padding=1),
            nn.ReLU(inplace=True),
            nn.Conv2d(2 * w, 2 * w, 3, stride=1, padding=1),
            nn.ReLU(inplace=True),
        )
        self.head = nn.Linear(2 * w, NUM_EMOTIONS)
        self.input_side = input_side
        side = input_side // 8
        if side < 2:
            raise ValueError("input side too small: saliency layer needs spatial extent >= 2x2")

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        f = self.features(x)
        pooled = f.mean(dim=(2, 3))
        return self.head(pooled)

    def forward_with_features(self, x: torch.Tensor):
        f = self.features(x)
        logits = self.head(f.mean(dim=(2, 3)))
        return logits, f


def _to_tensor(image: np.ndarray) -> torch.Tensor:
    arr = np.asarray(image, dtype=np.float32) / 255.0
    return torch.from_numpy(arr).permute(2, 0, 1)


class PredictorModel:
    """Trained 8-way emotion classifier with a saliency layer for Grad-CAM."""

    def __init__(self, net: _Backbone, input_side: int):
        self.net = net
        self.input_side = input_side
        self.net.eval()

    def _check(self, image: np.ndarray) -> torch.Tensor:
        validate_image(image, side=self.input_side)
        return _to_tensor(image).unsqueeze(0)

    @torch.no_grad()
    def predict_distribution(self, image: np.ndarray) -> np.ndarray:
        x = self._check(image)
        probs = F.softmax(self.net(x), dim=1)[0]
        return probs.double().numpy()

    def predict_top1(self, image: np.ndarray) -> tuple[str, float]:
        """Argmax label and its probability; exact ties break to the lowest index."""
        probs = self.predict_distribution(image)
        idx = int(np.argmax(probs))  # np.argmax returns the first (lowest) index on ties
        return EMOTIONS[idx], float(probs[idx])

    @torch.no_grad()
    def penultimate_features(self, image: np.ndarray) -> np.ndarray:
        """Pooled features before the linear head; used as a perceptual embedding."""
        x = self._check(image)
        f = self.net.features(x)
        return f.mean(dim=(2, 3))[0].double().numpy()

    def grad_cam(self, image: np.ndarray, class_index: int) -> np.ndarray:
        """Grad-CAM map in [0, 1], bilinearly upsampled to the image size.

        Channel weights are spatial means of the class-score gradient;
        the combined map is rectified at 0 and normalized by its max
        (all-zero maps stay all-zero).
        """
        if not (0 <= class_index < NUM_EMOTIONS):
            raise ValueError(f"class_index must be in [0, {NUM_EMOTIONS})")
        x = self._check(image)
        self.net.zero_grad(set_to_none=True)
        feats: list[torch.Tensor] = []

        f = self.net.features(x)
        f.retain_grad()
        logits = self.net.head(f.mean(dim=(2, 3)))
        logits[0, class_index].backward()
        grads = f.grad

        weights = grads.mean(dim=(2, 3), keepdim=True)
        cam = F.relu((weights * f).sum(dim=1, keepdim=True))
        cam = F.interpolate(cam, size=(self.input_side, self.input_side), mode="bilinear", align_corners=False)
        cam = cam[0, 0].detach().double().numpy()
        peak = cam.max()
        if peak > 0:
            cam = cam / peak
        self.net.zero_grad(set_to_none=True)
        return cam

    def state_payload(self) -> dict:
        return {
            "version": CHECKPOINT_VERSION,
            "input_side": self.input_side,
            "class_order_hash": class_order_hash(),
            "state_dict": self.net.state_dict(),
        }


def binarize_saliency(saliency: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    """Binary mask: 1 where saliency >= threshold (ties count as emotional)."""
    if not (0 < threshold < 1):
        raise ValueError("threshold must lie in (0, 1)")
    return (np.asarray(saliency) >= threshold).astype(np.uint8)


@dataclass
class TrainConfig:
    epochs: int = 6
    lr: float = 2e-3
    batch_size: int = 32
    seed: int = 0


def train_predictor(
    images: np.ndarray, labels: list[str], config: TrainConfig, input_side: int
) -> tuple[PredictorModel, float]:
    """Train the classifier; returns (model, training-set top-1 accuracy).

    ``images`` is N×H×W×3 uint8, ``labels`` a parallel list of category
    names. Refuses corpora missing any of the 8 classes.
    """
    present = set(labels)
    missing = [e for e in EMOTIONS if e not in present]
    if missing:
        raise ValueError(f"corpus is missing emotion classes: {', '.join(missing)}")

    torch.manual_seed(config.seed)
    net = _Backbone(input_side)
    net.train()
    opt = torch.optim.Adam(net.parameters(), lr=config.lr)

    x_all = torch.stack([_to_tensor(im) for im in images])
    y_all = torch.tensor([EMOTIONS.index(l) for l in labels], dtype=torch.long)
    n = len(y_all)
    gen = torch.Generator().manual_seed(config.seed)

    for epoch in range(config.epochs):
        perm = torch.randperm(n, generator=gen)
        total, correct, loss_sum = 0, 0, 0.0
        for start in range(0, n, config.batch_size):
            idx = perm[start : start + config.batch_size]
            xb, yb = x_all[idx], y_all[idx]
            logits = net(xb)
            loss = F.cross_entropy(logits, yb)
            opt.zero_grad(set_to_none=True)
            loss.backward()
            opt.step()
            loss_sum += loss.detach().item() * len(idx)
            correct += int((logits.argmax(dim=1) == yb).sum())
            total += len(idx)
        log.info("predictor epoch %d: loss %.4f acc %.3f", epoch, loss_sum / total, correct / total)

    model = PredictorModel(net, input_side)
    with torch.no_grad():
        net.eval()
        preds = []
        for start in range(0, n, 256):
            preds.append(net(x_all[start : start + 256]).argmax(dim=1))
        acc = float((torch.cat(preds) == y_all).float().mean())
    log.info("predictor training-set top-1 accuracy: %.3f", acc)
    return model, acc


def save_predictor(model: PredictorModel, path: str | Path, extra: dict | None = None) -> None:
    payload = model.state_payload()
    if extra:
        payload["extra"] = extra
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    torch.save(payload, tmp)
    tmp.replace(path)


def load_predictor(path: str | Path) -> PredictorModel:
    payload = torch.load(path, map_location="cpu", weights_only=True)
    if payload.get("class_order_hash") != class_order_hash():
        raise ValueError("checkpoint was built with a different emotion category order")
    net = _Backbone(payload["input_side"])
    net.load_state_dict(payload["state_dict"])
    return PredictorModel(net, payload["input_side"])
