import numpy as np
import pytest

from emoedit.images import to_gray
from emoedit.metrics import (
    EvalTriple,
    canny_edges,
    emr_item,
    esr_item,
    ess_item,
    evaluate_batch,
    gaussian_window,
    neutral_region_deviation,
    ssim,
)
from emoedit.taxonomy import EMOTIONS


def _img(rng, side=32):
    return rng.integers(0, 256, (side, side, 3), dtype=np.uint8)


# ---------------------------------------------------------------- SSIM


def test_ssim_identity(rng):
    for _ in range(3):
        x = _img(rng)
        assert ssim(x, x) == pytest.approx(1.0, abs=1e-9)


def test_ssim_symmetry(rng):
    a, b = _img(rng), _img(rng)
    assert ssim(a, b) == pytest.approx(ssim(b, a), abs=1e-12)


def test_ssim_dimension_mismatch(rng):
    with pytest.raises(ValueError):
        ssim(_img(rng, 32), _img(rng, 16))


def _ssim_oracle(a, b):
    """Direct per-window evaluation of the windowed SSIM formula."""
    ga, gb = to_gray(a), to_gray(b)
    win = gaussian_window()
    c1 = (0.01 * 255.0) ** 2
    c2 = (0.03 * 255.0) ** 2
    h, w = ga.shape
    vals = []
    for i in range(h - 10):
        for j in range(w - 10):
            pa = ga[i : i + 11, j : j + 11]
            pb = gb[i : i + 11, j : j + 11]
            mu_a = (win * pa).sum()
            mu_b = (win * pb).sum()
            var_a = (win * pa * pa).sum() - mu_a**2
            var_b = (win * pb * pb).sum() - mu_b**2
            cov = (win * pa * pb).sum() - mu_a * mu_b
            vals.append(
                ((2 * mu_a * mu_b + c1) * (2 * cov + c2))
                / ((mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2))
            )
    return float(np.clip(np.mean(vals), -1.0, 1.0))


def test_ssim_matches_windowed_oracle(rng):
    # 16×16 two-patch fixture: left half dark textured, right half bright
    a = np.zeros((16, 16, 3), dtype=np.uint8)
    a[:, :8] = rng.integers(0, 80, (16, 8, 3))
    a[:, 8:] = rng.integers(170, 256, (16, 8, 3))
    b = np.zeros((16, 16, 3), dtype=np.uint8)
    b[:, :8] = rng.integers(0, 80, (16, 8, 3))
    b[:, 8:] = rng.integers(170, 256, (16, 8, 3))
    assert ssim(a, b) == pytest.approx(_ssim_oracle(a, b), abs=1e-6)
    r1, r2 = _img(rng, 16), _img(rng, 16)
    assert ssim(r1, r2) == pytest.approx(_ssim_oracle(r1, r2), abs=1e-6)


def test_ssim_translation_on_tiled_fixture(rng):
    # identical whole-period translation of both images of a tiled pattern
    tile = rng.integers(0, 256, (11, 11, 3), dtype=np.uint8)
    big = np.tile(tile, (4, 4, 1))
    a = big[:33, :33]
    b = np.roll(big, 3, axis=0)[:33, :33]
    shifted_a = big[11:44, 11:44]
    shifted_b = np.roll(big, 3, axis=0)[11:44, 11:44]
    assert ssim(a, b) == pytest.approx(ssim(shifted_a, shifted_b), abs=1e-9)


# ---------------------------------------------------------------- Canny


def test_canny_constant_image():
    img = np.full((32, 32, 3), 77, dtype=np.uint8)
    assert canny_edges(img).sum() == 0


def test_canny_vertical_step():
    img = np.zeros((64, 64, 3), dtype=np.uint8)
    img[:, 32:] = 255
    edges = canny_edges(img)
    cols = set(np.where(edges)[1].tolist())
    assert cols == {32}
    assert set(np.unique(edges)) <= {0, 1}


def test_canny_binary_output(rng):
    edges = canny_edges(_img(rng, 48))
    assert set(np.unique(edges)) <= {0, 1}


def test_canny_invalid_thresholds(rng):
    with pytest.raises(ValueError):
        canny_edges(_img(rng), low=500, high=200)


# ---------------------------------------------------------------- EMR / ESR


def _dist(target_idx, p):
    d = np.full(8, (1 - p) / 7)
    d[target_idx] = p
    return d


def test_emr_with_oracle_predictor(rng, stub_predictor):
    # predictor that always scores the target class highest -> EMR 1
    triples = [EvalTriple(_img(rng), _img(rng), "fear") for _ in range(5)]
    pred = stub_predictor(distribution=_dist(EMOTIONS.index("fear"), 0.9))
    assert all(emr_item(t, pred) for t in triples)


def test_emr_counting_oracle(rng, stub_predictor):
    # script 10 triples; 7 match the target
    triples, script = [], {}
    for i in range(10):
        src, gen = _img(rng), _img(rng)
        target = "awe"
        hit = i < 7
        script[int(gen.sum()) % (1 << 31)] = _dist(EMOTIONS.index("awe" if hit else "anger"), 0.8)
        script[int(src.sum()) % (1 << 31)] = np.full(8, 0.125)
        triples.append(EvalTriple(src, gen, target))
    pred = stub_predictor(script=script)
    got = np.mean([emr_item(t, pred) for t in triples])
    assert got == pytest.approx(0.7)


def test_esr_strict_inequality(rng, stub_predictor):
    src = _img(rng)
    gen = _img(rng)
    pred = stub_predictor(distribution=np.full(8, 0.125))
    assert not esr_item(EvalTriple(src, gen, "fear"), pred)  # equal -> excluded


def test_esr_counted_when_target_mass_grows(rng, stub_predictor):
    src, gen = _img(rng), _img(rng)
    idx = EMOTIONS.index("sadness")
    script = {
        int(gen.sum()) % (1 << 31): _dist(idx, 0.6),
        int(src.sum()) % (1 << 31): _dist(idx, 0.2),
    }
    pred = stub_predictor(script=script)
    assert esr_item(EvalTriple(src, gen, "sadness"), pred)


def test_esr_random_pairs_match_comparison_oracle(rng, stub_predictor):
    hits = 0
    results = []
    for _ in range(10):
        src, gen = _img(rng), _img(rng)
        dg = rng.dirichlet(np.ones(8))
        ds = rng.dirichlet(np.ones(8))
        idx = EMOTIONS.index("disgust")
        script = {int(gen.sum()) % (1 << 31): dg, int(src.sum()) % (1 << 31): ds}
        pred = stub_predictor(script=script)
        results.append(esr_item(EvalTriple(src, gen, "disgust"), pred))
        hits += dg[idx] > ds[idx]
    assert sum(results) == hits


# ---------------------------------------------------------------- ENRD / ESS


def test_enrd_hand_set_mask_fixture():
    # 8×8, +10 offset on the neutral half -> exactly 10.0
    src = np.full((8, 8, 3), 100, dtype=np.uint8)
    gen = src.copy()
    mask = np.zeros((8, 8), dtype=np.uint8)
    mask[:, :4] = 1  # left half emotional
    gen[:, 4:] = 110  # perturb the neutral half
    assert neutral_region_deviation(src, gen, mask) == pytest.approx(10.0)


def test_enrd_ignores_masked_pixels():
    src = np.full((8, 8, 3), 100, dtype=np.uint8)
    gen = src.copy()
    mask = np.zeros((8, 8), dtype=np.uint8)
    mask[:4] = 1
    base = neutral_region_deviation(src, gen, mask)
    gen[:4] = 255  # change only masked pixels
    assert neutral_region_deviation(src, gen, mask) == base == 0.0


def test_enrd_all_masked_returns_none():
    src = np.full((8, 8, 3), 1, dtype=np.uint8)
    assert neutral_region_deviation(src, src, np.ones((8, 8))) is None


def test_ess_identity(rng):
    x = _img(rng, 48)
    assert ess_item(EvalTriple(x, x, "awe")) == 0.0


def test_ess_offset_invariance(rng):
    x = np.clip(_img(rng, 48), 0, 235)
    shifted = (x + 20).astype(np.uint8)
    t0 = EvalTriple(x, x, "awe")
    t1 = EvalTriple(x, shifted, "awe")
    # edge maps unchanged by a non-saturating constant offset
    assert ess_item(t1) == pytest.approx(ess_item(t0), abs=1e-12)


def test_ess_counting_oracle():
    # construct a pair whose edge maps differ in a known fraction of pixels
    a = np.zeros((64, 64, 3), dtype=np.uint8)
    b = np.zeros((64, 64, 3), dtype=np.uint8)
    b[:, 32:] = 255  # b has a vertical edge at column 32; a has none
    ea, eb = canny_edges(a), canny_edges(b)
    frac = np.mean(np.abs(ea.astype(float) - eb.astype(float)))
    assert ess_item(EvalTriple(a, b, "awe")) == pytest.approx(100.0 * frac)


# ---------------------------------------------------------------- batch


def test_evaluate_batch_identity(tiny_predictor, tiny_corpus):
    model, _ = tiny_predictor
    _, images, labels = tiny_corpus
    triples = [EvalTriple(images[i], images[i], labels[i]) for i in range(0, 96, 16)]
    report = evaluate_batch(triples, model)
    assert report.esr == 0.0
    assert report.enrd == 0.0
    assert report.ess == 0.0
    assert 0 <= report.emr <= 1


def test_evaluate_batch_aggregation_oracle(tiny_predictor, tiny_corpus, rng):
    model, _ = tiny_predictor
    _, images, labels = tiny_corpus
    triples = [
        EvalTriple(images[i], images[i + 1], labels[(i + 3) % len(labels)]) for i in range(0, 12, 2)
    ]
    report = evaluate_batch(triples, model)
    assert report.emr == pytest.approx(np.mean([r["emr"] for r in report.per_item]))
    assert report.esr == pytest.approx(np.mean([r["esr"] for r in report.per_item]))
    assert report.ess == pytest.approx(np.mean([r["ess"] for r in report.per_item]))
    enrds = [r["enrd"] for r in report.per_item if r["enrd"] is not None]
    assert report.enrd == pytest.approx(np.mean(enrds))


def test_evaluate_batch_rejects_empty(tiny_predictor):
    model, _ = tiny_predictor
    with pytest.raises(ValueError):
        evaluate_batch([], model)
