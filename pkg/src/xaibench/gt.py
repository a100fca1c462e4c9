"""Ground-truth explanations: influence backtracking from the true-class
output through the formula structure down to pixel-channel elements,
followed by rendering, normalization and 2D projection.

Backtracking rules: the two unary operators and the AND operator feed
full influence to every non-zero-weight input; OR divides influence
equally among its activated inputs (among all inputs when none is
active, so absence-defined classes still reach their pixels). A single
negation on the path flips the contribution sign.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from xaibench import formulas, rendering
from xaibench.formulas import AND, NOT, ConceptAtom, Formula, Top


class GroundTruthError(ValueError):
    pass


@dataclass(frozen=True)
class GroundTruth:
    gt3d: np.ndarray  # (36, 36, 3), normalized, signed
    gt2d: np.ndarray  # (36, 36, 1)


def normalize(e: np.ndarray) -> np.ndarray:
    """Scales by max(|min|, |max|); all-zero input is returned unchanged."""
    scale = max(abs(float(e.min())), abs(float(e.max())))
    if scale == 0.0:
        return e.copy()
    return e / scale


def to_2d(e3: np.ndarray) -> np.ndarray:
    """Per pixel, the signed channel value furthest from 0 (ties break to
    the lowest channel index)."""
    if e3.ndim != 3 or e3.shape[2] != 3:
        raise GroundTruthError(f"expected (h, w, 3) tensor, got {e3.shape}")
    idx = np.argmax(np.abs(e3), axis=2)
    return np.take_along_axis(e3, idx[:, :, None], axis=2)


def _atom_value(atom, assignment) -> int:
    if isinstance(atom, Top):
        return 1
    return assignment.get(atom, 0)


def _pair_inputs(term) -> list:
    return [a for a in (term.left, term.right) if not isinstance(a, Top)]


def _backtrack_pair(term, op_override, influence, sign, assignment, sink):
    """Distributes influence over a pair term's non-Top atoms."""
    atoms = _pair_inputs(term)
    if not atoms:
        return  # constant term: no pixels to influence
    op = op_override if op_override is not None else term.op
    if op == AND or len(atoms) == 1:
        for atom in atoms:
            sink.append((atom, sign * influence))
        return
    active = [a for a in atoms if _atom_value(a, assignment)]
    targets = active if active else atoms
    share = influence / len(targets)
    for atom in targets:
        sink.append((atom, sign * share))


def backtrack_formula(formula: Formula, assignment, influence: float = 1.0) -> list:
    """Signed influence contributions [(atom, value), ...] of a formula's
    atoms, starting from `influence` at the formula's output."""
    sink: list = []
    halves = [(formula.c, formula.a), (formula.d, formula.b)]

    def half_value(op1, term):
        v = formulas._apply_op2(
            _atom_value(term.left, assignment), _atom_value(term.right, assignment),
            term.op)
        return 1 - v if op1 == NOT else v

    if formula.e == AND:
        shares = [influence, influence]
    else:
        active = [half_value(op1, t) for op1, t in halves]
        n_active = sum(active)
        if n_active == 0:
            shares = [influence / 2, influence / 2]
        else:
            shares = [influence / n_active if a else 0.0 for a in active]

    for (op1, term), share in zip(halves, shares):
        if share == 0.0:
            continue
        sign = -1.0 if op1 == NOT else 1.0
        # collapsed Top partner: the surviving atom gets the full share
        _backtrack_pair(term, None, share, sign, assignment, sink)
    return sink


def class_influence(class_formula: Formula, presence: dict) -> list:
    """Signed influence per concept-at-position atom for one example.

    presence: {ConceptAtom: 0/1} for the model's concept id."""
    return backtrack_formula(class_formula, presence)


def concept_influence(concept_formula: Formula, part_presence: dict,
                      influence: float) -> list:
    """Distributes a signed concept-level influence over concept-part atoms.

    part_presence: {ConceptPartAtom: 0/1}; all-absent for a concept that
    is not in the input (the canonical layout then receives the split)."""
    sign = 1.0 if influence >= 0 else -1.0
    return [(atom, sign * v) for atom, v in
            backtrack_formula(concept_formula, part_presence, abs(influence))]


def render_ground_truth(contributions, base_img18: np.ndarray, parts,
                        offsets: tuple[int, int]) -> GroundTruth:
    """Renders signed pixel-channel influence and packages the normalized
    3D and 2D ground truths.

    contributions: [(grid_pos, ConceptPartAtom, signed_influence), ...]
    offsets: the (R0, R1) used when the example was upscaled."""
    if offsets is None:
        raise GroundTruthError("upscale offsets are required to place the GT")
    expl = np.zeros((rendering.BASE_SIZE, rendering.BASE_SIZE, 3))
    for pos, atom, value in contributions:
        if value == 0.0:
            continue
        gy, gx = divmod(pos, rendering.GRID)
        qy, qx = divmod(atom.pos, 2)
        y0 = gy * rendering.PATCH + qy * rendering.QUAD
        x0 = gx * rendering.PATCH + qx * rendering.QUAD
        block = (slice(y0, y0 + rendering.QUAD), slice(x0, x0 + rendering.QUAD),
                 atom.ch)
        weights = parts[atom.part_id].weights
        pixels = base_img18[block]
        if value > 0:
            expl[block] += value * weights * pixels
        else:
            expl[block] += value * weights * (1.0 - pixels)
    gt3d = normalize(rendering.upscale(expl, *offsets))
    gt2d = to_2d(gt3d)
    return GroundTruth(gt3d=gt3d, gt2d=gt2d)


def make_ground_truth(model_id: int, class_label: int, placements,
                      base_img18: np.ndarray, parts,
                      offsets: tuple[int, int]) -> GroundTruth:
    """Full GT derivation for one example.

    placements: the example's rendering.Placement list; concept presence
    and part layouts are taken from it (canonical layouts for absent
    concepts)."""
    concepts = formulas.builtin_concepts()
    classes = formulas.builtin_classes(model_id)

    by_pos = {pl.pos: pl for pl in placements}
    presence = {}
    for pos in range(9):
        pl = by_pos.get(pos)
        presence[ConceptAtom(model_id, pos)] = int(
            pl is not None and pl.concept_id == model_id)

    verdicts = [formulas.evaluate(c, presence) for c in classes]
    if sum(verdicts) != 1 or verdicts[class_label] != 1:
        raise GroundTruthError(
            f"example is not an unambiguous member of class {class_label}: {verdicts}")

    concept_formula = concepts[model_id]

    contributions = []
    for atom, value in class_influence(classes[class_label], presence):
        pos = atom.pos
        pl = by_pos.get(pos)
        if pl is not None and pl.concept_id == model_id:
            part_presence = {a: 1 for a in pl.true_atoms}
        else:
            # absent concept: the all-absent backtracking yields the
            # canonical part layout (full for AND, split for OR)
            part_presence = {}
        for part_atom, part_value in concept_influence(
                concept_formula, part_presence, value):
            contributions.append((pos, part_atom, part_value))
    return render_ground_truth(contributions, base_img18, parts, offsets)
