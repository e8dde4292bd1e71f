"""Corpus curation: pair annotation, instruction bank, candidate generation,
and the three-way quality filter (confidence / SSIM band / perceptual floor).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from emoedit.images import clamp_to_image, load_image
from emoedit.manifest import PairRecord
from emoedit.metrics import ssim
from emoedit.synth import class_base_color, _motif_mask
from emoedit.taxonomy import EMOTIONS, cross_valence_targets, emotion_index

log = logging.getLogger(__name__)


# --------------------------------------------------------------------------
# Instruction bank
# --------------------------------------------------------------------------


@dataclass
class InstructionBank:
    """Top-ranked editing instructions per target emotion."""

    instructions: dict[str, list[str]]  # emotion -> ordered instruction list
    ranks: dict[str, list[int]] = field(default_factory=dict)

    def for_emotion(self, emotion: str) -> list[str]:
        emotion_index(emotion)
        return self.instructions[emotion]


def build_instruction_bank(
    raw: dict[str, list[str]], rankings: dict[str, int], keep: int = 10
) -> InstructionBank:
    """Retain the ``keep`` best-ranked instructions per emotion (lower rank wins).

    Ties break to the lexicographically lower string. Emotions with fewer
    than ``keep`` ranked instructions keep everything, with a warning.
    """
    out: dict[str, list[str]] = {}
    ranks_out: dict[str, list[int]] = {}
    for emotion in EMOTIONS:
        candidates = raw.get(emotion, [])
        if not candidates:
            raise ValueError(f"no instructions supplied for emotion {emotion!r}")
        missing = [c for c in candidates if c not in rankings]
        if missing:
            raise ValueError(f"rankings missing for instructions: {missing[:3]}")
        ordered = sorted(candidates, key=lambda s: (rankings[s], s))
        if len(ordered) < keep:
            log.warning("emotion %r has only %d ranked instructions (< %d); keeping all", emotion, len(ordered), keep)
            out[emotion] = ordered
        else:
            out[emotion] = ordered[:keep]
        ranks_out[emotion] = [rankings[s] for s in out[emotion]]
    return InstructionBank(instructions=out, ranks=ranks_out)


def save_instruction_bank(bank: InstructionBank, path: str | Path) -> None:
    """Per-emotion sections, one 'rank<TAB>instruction' line each."""
    lines = []
    for emotion in EMOTIONS:
        lines.append(f"[{emotion}]")
        for rank, instr in zip(bank.ranks.get(emotion, range(1, len(bank.instructions[emotion]) + 1)), bank.instructions[emotion]):
            lines.append(f"{rank}\t{instr}")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text("\n".join(lines) + "\n")


def load_instruction_bank(path: str | Path) -> InstructionBank:
    instructions: dict[str, list[str]] = {}
    ranks: dict[str, list[int]] = {}
    current = None
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1]
            emotion_index(current)
            instructions[current] = []
            ranks[current] = []
        else:
            if current is None:
                raise ValueError(f"{path}: line {lineno} precedes any emotion section")
            rank_str, _, instr = line.partition("\t")
            instructions[current].append(instr)
            ranks[current].append(int(rank_str))
    return InstructionBank(instructions=instructions, ranks=ranks)


def default_instruction_bank() -> InstructionBank:
    """The shipped toy bank: 10 instructions per emotion, sharing emotion keywords.

    Stands in for the LLM-generated, human-ranked instruction pipeline.
    """
    motifs = [
        "bright playful balloons",
        "vast glowing scenery",
        "calm gentle warmth",
        "vivid sparkling lights",
        "harsh burning flames",
        "rotten grimy stains",
        "dark looming shadows",
        "gray fading rain",
    ]
    variants = [
        "make the scene evoke {e} with {m}",
        "turn this image toward {e} using {m}",
        "edit the picture to feel {e} through {m}",
        "give the scene a strong sense of {e} and {m}",
        "shift the mood to {e} by adding {m}",
        "transform the image so it radiates {e} with {m}",
        "recolor and reshape the scene toward {e} and {m}",
        "infuse the whole image with {e} via {m}",
        "let the scene express {e} carried by {m}",
        "push the atmosphere into {e} with {m}",
    ]
    instructions = {
        e: [v.format(e=e, m=motifs[i]) for v in variants] for i, e in enumerate(EMOTIONS)
    }
    ranks = {e: list(range(1, 11)) for e in EMOTIONS}
    return InstructionBank(instructions=instructions, ranks=ranks)


# --------------------------------------------------------------------------
# Annotation (EPAS)
# --------------------------------------------------------------------------


def annotate_pairs(
    pairs: list[tuple[str, str, str]], predictor, manifest_dir: str | Path
) -> list[PairRecord]:
    """Label raw (source_path, target_path, instruction) edit pairs with emotions.

    Source and target emotions come from the predictor's top-1. Unreadable
    images skip the pair with a log line rather than aborting the batch.
    """
    manifest_dir = Path(manifest_dir)
    records = []
    for source_path, target_path, instruction in pairs:
        try:
            src = load_image(manifest_dir / source_path)
            tgt = load_image(manifest_dir / target_path)
        except Exception as exc:
            log.warning("skipping unreadable pair (%s, %s): %s", source_path, target_path, exc)
            continue
        src_label, _ = predictor.predict_top1(src)
        tgt_label, _ = predictor.predict_top1(tgt)
        records.append(
            PairRecord(
                source_path=source_path,
                target_path=target_path,
                source_emotion=src_label,
                target_emotion=tgt_label,
                instruction=instruction,
                subset_tag="EPAS",
                provenance="annotated by emotion predictor",
            )
        )
    return records


# --------------------------------------------------------------------------
# Candidate generation (EPGS) and the synthetic editor
# --------------------------------------------------------------------------


class SyntheticEditor:
    """Deterministic parametric editor for desk-scale testing.

    Blends the source with a freshly rendered scene of the target
    emotion's class (hue family plus class motif); the render is seeded
    from the source content so the edit is a pure function of its inputs.
    The target emotion is parsed from the instruction text.
    """

    editor_id = "synthetic-recolor-v1"

    def __init__(self, blend: float = 0.8, seed: int = 0):
        self.blend = blend
        self.seed = seed

    def _target_from_instruction(self, instruction: str) -> str:
        words = set("".join(c if c.isalnum() else " " for c in instruction.lower()).split())
        for e in EMOTIONS:
            if e in words:
                return e
        raise ValueError(f"instruction does not name a target emotion: {instruction!r}")

    def edit(self, image: np.ndarray, instruction: str) -> np.ndarray:
        from emoedit.synth import render_class_image

        target = self._target_from_instruction(instruction)
        k = emotion_index(target)
        arr = np.asarray(image, dtype=np.float64)
        side = arr.shape[0]
        content_key = int(arr.sum()) % 100000
        rng = np.random.default_rng((self.seed, k, content_key))
        overlay = render_class_image(k, side, rng).astype(np.float64)
        out = (1.0 - self.blend) * arr + self.blend * overlay
        return clamp_to_image(out)


@dataclass(frozen=True)
class Candidate:
    source_image: np.ndarray
    candidate_image: np.ndarray
    source_emotion: str
    target_emotion: str
    instruction: str
    provenance: str


def generate_candidates(
    sources: list[tuple[np.ndarray, str]],
    bank: InstructionBank,
    editor,
    targets: str = "cross-valence",
    instructions_per_target: int = 2,
    seed: int = 0,
) -> list[Candidate]:
    """Run the editor over every (source, target emotion, sampled instruction).

    ``targets`` selects which emotions each source is pushed toward:
    "cross-valence" (default) or "all-others". Editor failures skip the
    candidate and are counted in the log.
    """
    if targets not in ("cross-valence", "all-others"):
        raise ValueError(f"unknown target policy {targets!r}")
    rng = np.random.default_rng(seed)
    cands: list[Candidate] = []
    failures = 0
    for image, source_emotion in sources:
        if targets == "cross-valence":
            target_list = cross_valence_targets(source_emotion)
        else:
            target_list = tuple(e for e in EMOTIONS if e != source_emotion)
        for target in target_list:
            pool = bank.for_emotion(target)
            count = min(instructions_per_target, len(pool))
            chosen = rng.choice(len(pool), size=count, replace=False)
            for ci in sorted(int(c) for c in chosen):
                instr = pool[ci]
                try:
                    edited = editor.edit(image, instr)
                except Exception as exc:
                    failures += 1
                    log.warning("editor failed on instruction %r: %s", instr, exc)
                    continue
                cands.append(
                    Candidate(
                        source_image=image,
                        candidate_image=edited,
                        source_emotion=source_emotion,
                        target_emotion=target,
                        instruction=instr,
                        provenance=f"editor={getattr(editor, 'editor_id', 'unknown')} instruction={instr!r}",
                    )
                )
    if failures:
        log.warning("%d candidates skipped due to editor failures", failures)
    return cands


# --------------------------------------------------------------------------
# Quality filter (EPGS)
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class FilterCriteria:
    """Acceptance thresholds; defaults follow the published filter inequalities."""

    min_confidence: float = 0.90
    ssim_low: float = 0.3
    ssim_high: float = 0.6
    lpips_min: float = 0.1

    def __post_init__(self):
        if not (0 < self.ssim_low < self.ssim_high < 1):
            raise ValueError("need 0 < ssim_low < ssim_high < 1")
        if not (0 < self.min_confidence < 1):
            raise ValueError("min_confidence must lie in (0, 1)")
        if self.lpips_min < 0:
            raise ValueError("lpips_min must be >= 0")


@dataclass
class CurationReport:
    candidates_in: int = 0
    rejected_by_confidence: int = 0
    rejected_by_ssim: int = 0
    rejected_by_lpips: int = 0
    accepted: int = 0

    def reconciles(self) -> bool:
        return (
            self.accepted
            + self.rejected_by_confidence
            + self.rejected_by_ssim
            + self.rejected_by_lpips
            == self.candidates_in
        )


def predictor_perceptual_distance(predictor):
    """Default perceptual distance: normalized penultimate-feature L2 in [0, 1].

    Symmetric and 0 on identical images; a true LPIPS backend can replace
    it behind the same (image, image) -> float interface.
    """

    def distance(a: np.ndarray, b: np.ndarray) -> float:
        fa = predictor.penultimate_features(a)
        fb = predictor.penultimate_features(b)
        na = np.linalg.norm(fa)
        nb = np.linalg.norm(fb)
        ua = fa / na if na > 0 else fa
        ub = fb / nb if nb > 0 else fb
        return float(np.linalg.norm(ua - ub) / 2.0)

    return distance


def filter_candidates(
    candidates: list[Candidate],
    predictor,
    criteria: FilterCriteria,
    perceptual,
    ssim_fn=ssim,
) -> tuple[list[Candidate], CurationReport]:
    """Keep candidates passing all three predicates; attribute rejections
    to the first failing filter in order confidence -> SSIM -> perceptual.

    Acceptance: top-1(candidate) == target with confidence > min_confidence,
    ssim_low < SSIM(source, candidate) < ssim_high (strict), and
    perceptual(source, candidate) > lpips_min (strict).
    """
    report = CurationReport(candidates_in=len(candidates))
    accepted: list[Candidate] = []
    for cand in candidates:
        label, conf = predictor.predict_top1(cand.candidate_image)
        if not (label == cand.target_emotion and conf > criteria.min_confidence):
            report.rejected_by_confidence += 1
            continue
        s = ssim_fn(cand.source_image, cand.candidate_image)
        if not (criteria.ssim_low < s < criteria.ssim_high):
            report.rejected_by_ssim += 1
            continue
        d = perceptual(cand.source_image, cand.candidate_image)
        if not (d > criteria.lpips_min):
            report.rejected_by_lpips += 1
            continue
        accepted.append(cand)
        report.accepted += 1
    assert report.reconciles()
    return accepted, report
