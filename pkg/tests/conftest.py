import numpy as np
import pytest
import torch

torch.set_num_threads(1)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def tiny_corpus(tmp_path_factory):
    """Small synthetic corpus shared across test modules: 12 images per class, 64×64."""
    from emoedit.synth import synth_corpus, load_corpus

    out = tmp_path_factory.mktemp("corpus")
    synth_corpus(out, per_class=12, side=64, seed=7)
    images, labels = load_corpus(out)
    return out, images, labels


@pytest.fixture(scope="session")
def tiny_predictor(tiny_corpus):
    """Predictor trained briefly on the tiny corpus."""
    from emoedit.predictor import TrainConfig, train_predictor

    _, images, labels = tiny_corpus
    model, acc = train_predictor(images, labels, TrainConfig(epochs=10, seed=1), 64)
    return model, acc


class StubPredictor:
    """Scriptable predictor with the same surface as PredictorModel."""

    def __init__(self, distribution=None, script=None, by_key=None, conf_by_key=None):
        self.distribution = distribution
        self.script = script or {}
        if by_key is not None:
            from emoedit.taxonomy import emotion_index

            conf_by_key = conf_by_key or {}
            for key, label in by_key.items():
                conf = conf_by_key.get(key, 0.99)
                dist = np.full(8, (1.0 - conf) / 7.0)
                dist[emotion_index(label)] = conf
                self.script[key] = dist

    def _dist_for(self, image):
        if self.distribution is not None:
            return np.asarray(self.distribution, dtype=np.float64)
        key = int(np.asarray(image).sum()) % (1 << 31)
        return np.asarray(self.script[key], dtype=np.float64)

    def predict_distribution(self, image):
        return self._dist_for(image)

    def predict_top1(self, image):
        from emoedit.taxonomy import EMOTIONS

        probs = self._dist_for(image)
        idx = int(np.argmax(probs))
        return EMOTIONS[idx], float(probs[idx])


@pytest.fixture
def stub_predictor():
    return StubPredictor
