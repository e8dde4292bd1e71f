"""The 8-category emotion taxonomy and its vector encodings.

Categories follow the Mikels set: four positive (amusement, awe,
contentment, excitement) and four negative (anger, disgust, fear,
sadness). The index order below is a repo contract: every serialized
one-hot vector, checkpoint head, and distribution depends on it.
"""

from __future__ import annotations

import enum
import hashlib

import numpy as np

# Positive block first, alphabetical within valence. Index = position.
EMOTIONS: tuple[str, ...] = (
    "amusement",
    "awe",
    "contentment",
    "excitement",
    "anger",
    "disgust",
    "fear",
    "sadness",
)

NUM_EMOTIONS = len(EMOTIONS)

_INDEX = {name: i for i, name in enumerate(EMOTIONS)}

POSITIVE_EMOTIONS = frozenset(EMOTIONS[:4])
NEGATIVE_EMOTIONS = frozenset(EMOTIONS[4:])


class Valence(enum.Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"


def emotion_index(label: str) -> int:
    """Fixed index of an emotion category. Raises ValueError on unknown names."""
    try:
        return _INDEX[label]
    except KeyError:
        raise ValueError(f"unknown emotion category: {label!r}") from None


def valence_of(label: str) -> Valence:
    idx = emotion_index(label)
    return Valence.POSITIVE if idx < 4 else Valence.NEGATIVE


def cross_valence_targets(label: str) -> tuple[str, ...]:
    """The four categories of opposite valence to ``label``."""
    if valence_of(label) is Valence.POSITIVE:
        return EMOTIONS[4:]
    return EMOTIONS[:4]


def one_hot_encode(label: str) -> np.ndarray:
    """Binary one-hot vector with a single 1 at the category's fixed index."""
    vec = np.zeros(NUM_EMOTIONS, dtype=np.float32)
    vec[emotion_index(label)] = 1.0
    return vec


def one_hot_decode(vector: np.ndarray) -> str:
    """Inverse of :func:`one_hot_encode`. Rejects anything but an exact one-hot."""
    vec = np.asarray(vector)
    if vec.shape != (NUM_EMOTIONS,):
        raise ValueError(f"expected shape ({NUM_EMOTIONS},), got {vec.shape}")
    ones = np.flatnonzero(vec == 1)
    if len(ones) != 1 or vec.sum() != 1:
        raise ValueError("not a one-hot vector")
    return EMOTIONS[int(ones[0])]


def as_distribution(probs, atol: float = 1e-6) -> np.ndarray:
    """Validate an 8-way probability vector (non-negative, sums to 1 within atol)."""
    arr = np.asarray(probs, dtype=np.float64)
    if arr.shape != (NUM_EMOTIONS,):
        raise ValueError(f"expected shape ({NUM_EMOTIONS},), got {arr.shape}")
    if np.any(arr < 0):
        raise ValueError("distribution has negative entries")
    total = float(arr.sum())
    if abs(total - 1.0) > atol:
        raise ValueError(f"distribution sums to {total}, not 1 within {atol}")
    return arr


def class_order_hash() -> str:
    """Hash of the category order, embedded in checkpoints for compatibility checks."""
    return hashlib.sha256(",".join(EMOTIONS).encode()).hexdigest()[:16]
