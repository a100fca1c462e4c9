"""Concept-part pixel patterns and their exact detectors.

Each of the 12 parts is a 3x3 single-channel pattern (values 0, 1/2, 1)
with a matching detector weight grid (values -1, -1/2, 0, 1, 2) and bias
-1, built so that the detector fires at exactly 1 on its own pattern and
at or below 0 (pre-activation) on every other pattern, the empty patch
included. One of the top/bottom pattern rows is the noise row
[1/2, 1, 1/2] with weights [1, 0, -1]; one of the left/right columns
carries two zeros with weights [1, -1].

The shipped set lives in ``data/concept_parts.json``; it was produced by
the deterministic constrained search in :func:`search_concept_parts` and
is frozen so generated corpora stay reproducible.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

PART_BIAS = -1.0
PATTERN_VALUES = (0.0, 0.5, 1.0)
WEIGHT_VALUES = (-1.0, -0.5, 0.0, 1.0, 2.0)


class PatternError(ValueError):
    pass


@dataclass(frozen=True)
class ConceptPartSpec:
    part_id: int
    pattern: np.ndarray  # 3x3, values in {0, 1/2, 1}
    weights: np.ndarray  # 3x3, values in {-1, -1/2, 0, 1, 2}
    bias: float = PART_BIAS

    def validate(self, others=()):
        p, w = self.pattern, self.weights
        if p.shape != (3, 3) or w.shape != (3, 3):
            raise PatternError(f"part {self.part_id}: bad grid shape")
        if not all(v in PATTERN_VALUES for v in p.ravel()):
            raise PatternError(f"part {self.part_id}: bad pattern value")
        if not all(v in WEIGHT_VALUES for v in w.ravel()):
            raise PatternError(f"part {self.part_id}: bad weight value")
        if self.bias != PART_BIAS:
            raise PatternError(f"part {self.part_id}: bias must be {PART_BIAS}")
        if not _has_noise_row(p, w):
            raise PatternError(f"part {self.part_id}: missing noise row")
        if not _has_noise_column(p, w):
            raise PatternError(f"part {self.part_id}: missing noise column")
        if abs(float((p * w).sum()) + self.bias - 1.0) > 1e-12:
            raise PatternError(f"part {self.part_id}: detector does not fire at 1")
        for other in others:
            if other.part_id == self.part_id:
                continue
            if float((other.pattern * w).sum()) + self.bias > 1e-12:
                raise PatternError(
                    f"part {self.part_id}: detector fires on pattern {other.part_id}"
                )


def _has_noise_row(p, w) -> bool:
    for r in (0, 2):
        if np.array_equal(p[r], [0.5, 1.0, 0.5]) and np.array_equal(w[r], [1.0, 0.0, -1.0]):
            return True
    return False


def _has_noise_column(p, w) -> bool:
    for r in (0, 2):
        if not np.array_equal(p[r], [0.5, 1.0, 0.5]):
            continue
        rows = [x for x in range(3) if x != r]
        for c in (0, 2):
            if (p[rows[0], c] == 0.0 and p[rows[1], c] == 0.0
                    and w[rows[0], c] == 1.0 and w[rows[1], c] == -1.0):
                return True
    return False


def _geometry(noise_row: int, noise_col: int):
    p = np.zeros((3, 3))
    w = np.zeros((3, 3))
    p[noise_row, :] = [0.5, 1.0, 0.5]
    w[noise_row, :] = [1.0, 0.0, -1.0]
    rows = [r for r in range(3) if r != noise_row]
    w[rows[0], noise_col] = 1.0
    w[rows[1], noise_col] = -1.0
    free = [(r, c) for r in range(3) for c in range(3)
            if r != noise_row and c != noise_col]
    return p, w, free


def _candidate_pool():
    """Per-geometry candidate (pattern, weights) pairs with own-dot 2."""
    pool = []
    for nr in (0, 2):
        for nc in (0, 2):
            base_p, base_w, free = _geometry(nr, nc)
            cands = []
            # two unit cells detected with weight 1, the rest suppressed
            for sig in itertools.combinations(free, 2):
                p, w = base_p.copy(), base_w.copy()
                for cell in free:
                    if cell in sig:
                        p[cell], w[cell] = 1.0, 1.0
                    else:
                        p[cell], w[cell] = 0.0, -1.0
                cands.append((p, w))
            # one unit cell detected with weight 2
            for sig in free:
                p, w = base_p.copy(), base_w.copy()
                for cell in free:
                    if cell == sig:
                        p[cell], w[cell] = 1.0, 2.0
                    else:
                        p[cell], w[cell] = 0.0, -1.0
                cands.append((p, w))
            pool.append(cands)
    return pool


def _compatible(a, b) -> bool:
    return (float((a[0] * b[1]).sum()) <= 1.0 + 1e-12
            and float((b[0] * a[1]).sum()) <= 1.0 + 1e-12)


def search_concept_parts() -> list[ConceptPartSpec]:
    """Deterministic constrained search for 12 mutually exclusive parts.

    Round-robins over the four noise-row/noise-column geometries, taking
    the first pool candidate compatible with everything accepted so far.
    """
    pool = _candidate_pool()
    accepted: list[tuple[np.ndarray, np.ndarray]] = []
    slot = 0
    while len(accepted) < 12:
        cands = pool[slot % 4]
        for cand in cands:
            if any(np.array_equal(cand[0], a[0]) and np.array_equal(cand[1], a[1])
                   for a in accepted):
                continue
            if all(_compatible(cand, a) for a in accepted):
                accepted.append(cand)
                break
        else:
            raise PatternError(f"search stuck at {len(accepted)} parts")
        slot += 1
    parts = [ConceptPartSpec(i, p, w) for i, (p, w) in enumerate(accepted)]
    for part in parts:
        part.validate(parts)
    return parts


def _parts_from_json(payload) -> list[ConceptPartSpec]:
    parts = [
        ConceptPartSpec(
            entry["id"],
            np.asarray(entry["pattern"], dtype=np.float64),
            np.asarray(entry["weights"], dtype=np.float64),
            entry.get("bias", PART_BIAS),
        )
        for entry in payload["parts"]
    ]
    if len(parts) != 12 or [p.part_id for p in parts] != list(range(12)):
        raise PatternError("pattern file must define parts 0..11 in order")
    for part in parts:
        part.validate(parts)
    return parts


def default_concept_parts() -> list[ConceptPartSpec]:
    """The frozen, shipped 12-part set."""
    payload = json.loads(
        resources.files("xaibench").joinpath("data/concept_parts.json").read_text()
    )
    return _parts_from_json(payload)


def pattern_set_version() -> int:
    payload = json.loads(
        resources.files("xaibench").joinpath("data/concept_parts.json").read_text()
    )
    return int(payload["version"])


def save_concept_parts(parts: list[ConceptPartSpec], path) -> None:
    payload = {
        "version": 1,
        "parts": [
            {"id": p.part_id, "pattern": p.pattern.tolist(),
             "weights": p.weights.tolist(), "bias": p.bias}
            for p in parts
        ],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")
