"""Emotion-evoked image editing toolkit.

Curate paired training data, train an emotion-conditioned latent diffusion
editor, run critic-guided iterative inference, and score results with
emotion/structure metrics.
"""

from emoedit.taxonomy import (
    EMOTIONS,
    Valence,
    valence_of,
    one_hot_encode,
    one_hot_decode,
    as_distribution,
)

__version__ = "0.1.0"

__all__ = [
    "EMOTIONS",
    "Valence",
    "valence_of",
    "one_hot_encode",
    "one_hot_decode",
    "as_distribution",
]
