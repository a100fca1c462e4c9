import numpy as np
import pytest

from xaibench import compiler, formulas, rendering
from xaibench.network import Conv2D, Dense, forward


def test_layer_stack_shapes(models):
    for net in models.values():
        _, trace = forward(net, np.zeros((36, 36, 3)))
        assert [t.shape for t in trace.post] == compiler.EXPECTED_SHAPES


def test_layer_names(models):
    names = [l.name for l in models[0].layers]
    assert names == ["MaxPool_0", "Conv2D_0", "Conv2D_1", "Conv2D_2",
                     "Conv2D_3", "Flatten_0", "Dense_0", "Dense_1", "Dense_2"]


@pytest.mark.parametrize("mid", range(5))
def test_oracle_equivalence(models, mid):
    result = compiler.verify_against_oracle(models[mid], mid)
    assert result["mismatches"] == []
    assert result["agreements"] == result["cases"] == 16


def test_weight_and_bias_alphabets(models):
    """Compiled layers only use the exact detector/logic weight values,
    so every computation is exact in float64."""
    for net in models.values():
        for layer in net.layers:
            if isinstance(layer, (Conv2D, Dense)):
                assert set(np.unique(layer.weights)) <= {-1.0, -0.5, 0.0, 1.0, 2.0}
                assert set(np.unique(layer.bias)) <= {-1.0, 0.0, 1.0}


def test_empty_image_is_the_absence_class(models):
    for net in models.values():
        out, _ = forward(net, np.zeros((36, 36, 3)))
        assert np.array_equal(out, [0, 0, 0, 0, 1])


def test_outputs_are_exact_one_hot_on_rendered_examples(models, parts):
    """Canonical single-concept layouts classify with exact binary scores."""
    for mid, net in models.items():
        concept = formulas.builtin_concepts()[mid]
        atoms = rendering.canonical_atoms(concept)
        base = rendering.render_base_image(
            [rendering.Placement(mid, 0, atoms)], parts)
        for r0 in (0, 1):
            for r1 in (0, 1):
                out, _ = forward(net, rendering.upscale(base, r0, r1))
                assert np.array_equal(out, [1, 0, 0, 0, 0]), (mid, r0, r1)


def test_first_conv_detects_exactly_the_placed_parts(models, parts):
    """Conv2D_0 channel part_id*3+ch fires at 1 where that part sits."""
    mid = 1
    net = models[mid]
    concept = formulas.builtin_concepts()[mid]
    atoms = rendering.canonical_atoms(concept)
    base = rendering.render_base_image([rendering.Placement(mid, 4, atoms)], parts)
    _, trace = forward(net, rendering.upscale(base, 0, 0))
    conv0 = trace.post[1]  # (6, 6, 36)
    expected = np.zeros_like(conv0)
    for atom in atoms:
        qy, qx = divmod(atom.pos, 2)
        expected[2 + qy, 2 + qx, compiler.part_channel(atom.part_id, atom.ch)] = 1.0
    assert np.array_equal(conv0, expected)


def test_distractors_do_not_change_scores(models, parts):
    """A foreign concept elsewhere in the grid leaves the verdict alone."""
    mid = 2
    net = models[mid]
    concepts = formulas.builtin_concepts()
    placements = [
        rendering.Placement(mid, 1, rendering.canonical_atoms(concepts[mid])),
        rendering.Placement(mid, 2, rendering.canonical_atoms(concepts[mid])),
        rendering.Placement(1, 8, rendering.canonical_atoms(concepts[1])),
    ]
    base = rendering.render_base_image(placements, parts)
    out, _ = forward(net, rendering.upscale(base, 1, 1))
    assert np.array_equal(out, [0, 0, 1, 0, 0])


def test_bad_concept_id_rejected():
    with pytest.raises(Exception):
        compiler.compile_model(7)
