import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from xaibench import formulas, gt, rendering
from xaibench.formulas import ConceptAtom, ConceptPartAtom
from xaibench.gt import (GroundTruthError, backtrack_formula, make_ground_truth,
                         normalize, to_2d)


@given(hnp.arrays(np.float64, (4, 4, 3),
                  elements=st.floats(-10, 10, allow_nan=False)))
def test_normalize_range_and_idempotence(x):
    n = normalize(x)
    assert np.all(np.abs(n) <= 1.0 + 1e-15)
    assert np.allclose(normalize(n), n, atol=1e-15)
    if x.any():
        assert np.max(np.abs(n)) == pytest.approx(1.0)


def test_normalize_keeps_zero_and_sign():
    z = np.zeros((3, 3, 3))
    assert np.array_equal(normalize(z), z)
    x = np.array([[-2.0, 1.0]])
    assert np.array_equal(normalize(x), [[-1.0, 0.5]])


def test_to_2d_picks_furthest_from_zero():
    e = np.zeros((1, 2, 3))
    e[0, 0] = [0.2, -0.9, 0.5]
    e[0, 1] = [-0.4, 0.4, 0.1]  # tie on magnitude: lowest channel wins
    out = to_2d(e)
    assert out.shape == (1, 2, 1)
    assert out[0, 0, 0] == -0.9
    assert out[0, 1, 0] == -0.4


def test_to_2d_rejects_wrong_shape():
    with pytest.raises(GroundTruthError):
        to_2d(np.zeros((4, 4, 1)))


def _assignment(formula, present):
    return {a: int(a in present) for a in formula.atoms()}


def test_backtrack_conjunction_feeds_all_atoms():
    f = formulas.builtin_concepts()[1]
    atoms = f.atoms()
    sink = backtrack_formula(f, _assignment(f, set(atoms)))
    assert dict(sink) == {a: 1.0 for a in atoms}


def test_backtrack_or_splits_among_active():
    f = formulas.builtin_concepts()[0]  # (a & b) | (c & d)
    a, b, c, d = f.atoms()
    # single active branch: it receives the full influence
    sink = backtrack_formula(f, _assignment(f, {a, b}))
    assert dict(sink) == {a: 1.0, b: 1.0}
    # both branches active: each branch gets half, conjunction copies it
    sink = backtrack_formula(f, _assignment(f, {a, b, c, d}))
    assert dict(sink) == {a: 0.5, b: 0.5, c: 0.5, d: 0.5}


def test_backtrack_or_with_nothing_active_splits_everywhere():
    cls = formulas.builtin_classes(0)[4]  # absence-defined class
    sink = backtrack_formula(cls, {ConceptAtom(0, p): 0 for p in range(9)})
    expected = {ConceptAtom(0, p): -0.5 for p in range(4)}
    assert dict(sink) == expected


def test_backtrack_xor_keeps_signed_paths_separate():
    cls = formulas.builtin_classes(0)[3]
    presence = {ConceptAtom(0, p): int(p == 1) for p in range(9)}
    sink = backtrack_formula(cls, presence)
    c1 = ConceptAtom(0, 1)
    c2 = ConceptAtom(0, 2)
    # the present concept appears on both the positive and negated path
    assert sorted(sink, key=str) == sorted(
        [(c1, 1.0), (c1, -1.0), (c2, -1.0)], key=str)


def test_concept_influence_flips_with_sign():
    f = formulas.builtin_concepts()[1]
    atoms = f.atoms()
    pos = gt.concept_influence(f, {a: 1 for a in atoms}, 1.0)
    neg = gt.concept_influence(f, {}, -1.0)
    assert dict(pos) == {a: 1.0 for a in atoms}
    assert dict(neg) == {a: -1.0 for a in atoms}


def test_render_positive_weighs_present_pixels(parts):
    """A positive contribution credits pattern pixels through the
    detector weights: the noise row [1/2, 1, 1/2] with weights
    [1, 0, -1] contributes [1/2, 0, -1/2] before normalization."""
    f = formulas.builtin_concepts()[1]
    atoms = rendering.canonical_atoms(f)
    placement = rendering.Placement(1, 0, atoms)
    base = rendering.render_base_image([placement], parts)
    contributions = [(0, a, 1.0) for a in atoms]
    ground = gt.render_ground_truth(contributions, base, parts, (0, 0))
    atom = atoms[0]
    part = parts[atom.part_id]
    rows = np.where([np.array_equal(part.pattern[r], [0.5, 1.0, 0.5])
                     for r in range(3)])[0]
    r = int(rows[0])
    qy, qx = divmod(atom.pos, 2)
    band = ground.gt3d[(qy * 3 + r) * 2, qx * 6:(qx + 1) * 6:2, atom.ch]
    # normalization rescales by the global max; only ratios are stable
    assert band[1] == 0.0
    assert band[0] > 0 > band[2]
    assert band[0] == -band[2]


def test_absent_concept_credits_empty_pixels(parts):
    """Negative contributions weigh (1 - pixel): an absent concept's
    ground truth is nonzero even though the cell is empty."""
    base = np.zeros((18, 18, 3))
    f = formulas.builtin_concepts()[1]
    contributions = [(4, a, -1.0) for a in rendering.canonical_atoms(f)]
    ground = gt.render_ground_truth(contributions, base, parts, (1, 0))
    assert ground.gt3d.min() < 0
    assert np.count_nonzero(ground.gt3d[:, :, :]) > 0
    # everything sits in the centre cell's rows/cols (scattered 2x)
    nz = np.argwhere(ground.gt3d != 0)
    assert nz[:, 0].min() >= 12 and nz[:, 0].max() < 24


def test_gt2d_nonzero_count_matches_gt3d_pixels(small_corpus):
    for examples in small_corpus.values():
        for ex in examples:
            has3 = np.any(ex.gt.gt3d != 0, axis=2)
            assert np.count_nonzero(ex.gt.gt2d[:, :, 0] != 0) == np.count_nonzero(has3)


def test_gt_is_normalized(small_corpus):
    for examples in small_corpus.values():
        for ex in examples:
            assert np.max(np.abs(ex.gt.gt3d)) == 1.0
            assert np.all(np.abs(ex.gt.gt2d) <= 1.0)


def test_ambiguous_membership_rejected(parts):
    f = formulas.builtin_concepts()[1]
    atoms = rendering.canonical_atoms(f)
    placements = [rendering.Placement(1, 0, atoms)]
    base = rendering.render_base_image(placements, parts)
    with pytest.raises(GroundTruthError, match="class 2"):
        make_ground_truth(1, 2, placements, base, parts, (0, 0))
