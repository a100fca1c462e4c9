"""Test-set construction: per-model corpora with ground truths.

Each of the five models gets 16 examples per class; classes 3 and 4 are
omitted for models whose concept definition contains an OR (ids 0, 2
and 4), since their absence semantics would be ambiguous. Examples are
rejection-sampled until they belong to exactly one class, carry at most
one concept per grid cell, and are upscaled 2x with per-example random
offsets synchronized between image and ground truth.

All randomness flows through numpy's PCG64 seeded by
SeedSequence([root_seed, model_id, class_label, index]), so a corpus is
a pure function of its root seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from xaibench import formulas, gt, patterns, rendering
from xaibench.formulas import OR, Formula
from xaibench.rendering import Placement, upscale

PER_CLASS = 16
REJECTION_BUDGET = 1000
DISTRACTOR_PROB = 0.5

# classes whose required concepts differ; class 4 needs no insertions
_REQUIRED_POSITIONS = {0: [0], 1: [3], 2: [1, 2], 4: []}


class DatasetError(RuntimeError):
    pass


@dataclass(frozen=True)
class Example:
    model_id: int
    class_label: int
    index: int
    image: np.ndarray  # (36, 36, 3)
    offsets: tuple[int, int]
    placements: tuple[Placement, ...]
    gt: gt.GroundTruth
    seed_key: tuple[int, ...]


def concept_has_or(formula: Formula) -> bool:
    return OR in (formula.a.op, formula.b.op, formula.e)


def classes_for_model(model_id: int) -> list[int]:
    concepts = formulas.builtin_concepts()
    if concept_has_or(concepts[model_id]):
        return [0, 1, 2]
    return [0, 1, 2, 3, 4]


def _concept_truths(placement: Placement, concepts) -> list[int]:
    """Which concept formulas a rendered cell actually satisfies."""
    present = set(placement.true_atoms)
    return [
        formulas.evaluate(c, {a: int(a in present) for a in c.atoms()})
        for c in concepts
    ]


def _sample_placement(rng, concepts, sats, concept_id: int, pos: int) -> Placement:
    layouts = sats[concept_id]
    return Placement(concept_id, pos, layouts[rng.integers(len(layouts))])


def _class_verdicts(placements, model_id: int, classes) -> list[int]:
    present_pos = {pl.pos for pl in placements if pl.concept_id == model_id}
    assignment = {
        formulas.ConceptAtom(model_id, pos): int(pos in present_pos)
        for pos in range(9)
    }
    return [formulas.evaluate(c, assignment) for c in classes]


def build_example(model_id: int, class_label: int, index: int,
                  root_seed: int, parts=None) -> Example:
    """One rejection-sampled example with its ground truth."""
    if parts is None:
        parts = patterns.default_concept_parts()
    concepts = formulas.builtin_concepts()
    classes = formulas.builtin_classes(model_id)
    sats = [rendering.satisfying_assignments(c) for c in concepts]
    seed_key = (root_seed, model_id, class_label, index)
    rng = np.random.default_rng(np.random.SeedSequence(seed_key))

    for _ in range(REJECTION_BUDGET):
        placements = []
        if class_label == 3:
            req = [int(rng.integers(1, 3))]
        else:
            req = list(_REQUIRED_POSITIONS[class_label])
        for pos in req:
            placements.append(_sample_placement(rng, concepts, sats, model_id, pos))
        for pos in range(9):
            if pos in req:
                continue
            if rng.random() >= DISTRACTOR_PROB:
                continue
            cid = int(rng.integers(5))
            placements.append(_sample_placement(rng, concepts, sats, cid, pos))

        # each rendered cell must satisfy exactly the intended concept
        ok = True
        for pl in placements:
            truths = _concept_truths(pl, concepts)
            if sum(truths) != 1 or truths[pl.concept_id] != 1:
                ok = False
                break
        if not ok:
            continue

        verdicts = _class_verdicts(placements, model_id, classes)
        if sum(verdicts) != 1 or verdicts[class_label] != 1:
            continue

        base = rendering.render_base_image(placements, parts)
        offsets = (int(rng.integers(2)), int(rng.integers(2)))
        image = upscale(base, *offsets)
        ground = gt.make_ground_truth(model_id, class_label, placements,
                                      base, parts, offsets)
        return Example(model_id=model_id, class_label=class_label, index=index,
                       image=image, offsets=offsets,
                       placements=tuple(placements), gt=ground,
                       seed_key=seed_key)
    raise DatasetError(
        f"rejection budget exhausted for model {model_id}, class {class_label}")


def build_test_set(model_id: int, per_class: int = PER_CLASS,
                   root_seed: int = 0, parts=None) -> list[Example]:
    if parts is None:
        parts = patterns.default_concept_parts()
    out = []
    for class_label in classes_for_model(model_id):
        for index in range(per_class):
            out.append(build_example(model_id, class_label, index,
                                     root_seed, parts))
    return out


def build_corpus(root_seed: int = 0, per_class: int = PER_CLASS,
                 parts=None) -> dict[int, list[Example]]:
    """All five models' test sets (304 examples at the default size)."""
    return {mid: build_test_set(mid, per_class, root_seed, parts)
            for mid in range(5)}
