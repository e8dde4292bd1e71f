import numpy as np
import pytest

from emoedit.taxonomy import (
    EMOTIONS,
    Valence,
    as_distribution,
    cross_valence_targets,
    one_hot_decode,
    one_hot_encode,
    valence_of,
)


def test_fixed_order():
    assert EMOTIONS == (
        "amusement", "awe", "contentment", "excitement",
        "anger", "disgust", "fear", "sadness",
    )


def test_one_hot_first_and_last():
    assert one_hot_encode("amusement").tolist() == [1, 0, 0, 0, 0, 0, 0, 0]
    assert one_hot_encode("sadness").tolist() == [0, 0, 0, 0, 0, 0, 0, 1]


def test_one_hot_bijection():
    seen = set()
    for e in EMOTIONS:
        vec = one_hot_encode(e)
        assert vec.sum() == 1
        assert set(np.unique(vec)) <= {0.0, 1.0}
        assert one_hot_decode(vec) == e
        seen.add(vec.tobytes())
    assert len(seen) == 8


def test_one_hot_decode_rejects_non_one_hot():
    with pytest.raises(ValueError):
        one_hot_decode(np.zeros(8))
    with pytest.raises(ValueError):
        one_hot_decode(np.ones(8))
    with pytest.raises(ValueError):
        one_hot_decode(np.full(8, 0.125))


def test_valence_split():
    assert valence_of("excitement") is Valence.POSITIVE
    assert valence_of("fear") is Valence.NEGATIVE
    for e in EMOTIONS[:4]:
        assert valence_of(e) is Valence.POSITIVE
    for e in EMOTIONS[4:]:
        assert valence_of(e) is Valence.NEGATIVE


def test_unknown_label_rejected():
    with pytest.raises(ValueError):
        valence_of("joy")


def test_cross_valence_targets():
    assert cross_valence_targets("awe") == EMOTIONS[4:]
    assert cross_valence_targets("anger") == EMOTIONS[:4]


def test_distribution_validation():
    d = as_distribution(np.full(8, 0.125))
    assert d.sum() == pytest.approx(1.0)
    with pytest.raises(ValueError):
        as_distribution(np.full(8, 0.2))
    with pytest.raises(ValueError):
        bad = np.full(8, 0.125)
        bad[0] = -0.125
        bad[1] = 0.375
        as_distribution(bad)
    # deviation just past 1e-6 rejected
    near = np.full(8, 0.125)
    near[0] += 2e-6
    with pytest.raises(ValueError):
        as_distribution(near)
