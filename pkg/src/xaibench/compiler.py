"""Compiles concept-part patterns and logical definitions into exact
layer weights for the fixed ten-layer architecture, and verifies the
result against the brute-force formula oracle.

Layer plan (output shapes):
    Input (36,36,3) -> MaxPool (18,18,3) -> Conv2D_0 (6,6,36)
    -> Conv2D_1 (3,3,8) -> Conv2D_2 (3,3,16) -> Conv2D_3 (3,3,5)
    -> Flatten (45,) -> Dense_0 (30,) -> Dense_1 (60,) -> Dense_2 (5,)

Conv2D_0 strides 3 (part detectors per quadrant), Conv2D_1 kernel 2x2
stride 2 (pair terms per concept cell), Conv2D_2/3 1x1 (unary ops and
the joining op). Channel/node allocation dedupes identical terms; the
remaining width is zero-weight, zero-bias padding.
"""

from __future__ import annotations

import itertools

import numpy as np

from xaibench import formulas, patterns, rendering
from xaibench.formulas import AND, NOT, NOT_NOT, OR, Formula, PairTerm, Top
from xaibench.network import Conv2D, Dense, Flatten, MaxPool, Network, forward

CONV1_CHANNELS = 8
CONV2_CHANNELS = 16
CONV3_CHANNELS = 5
DENSE0_UNITS = 30
DENSE1_UNITS = 60
DENSE2_UNITS = 5

EXPECTED_SHAPES = [
    (18, 18, 3), (6, 6, 36), (3, 3, 8), (3, 3, 16), (3, 3, 5),
    (45,), (30,), (60,), (5,),
]


class CompileError(ValueError):
    pass


def part_channel(part_id: int, ch: int) -> int:
    """Conv2D_0 output channel for a part detector (id-major)."""
    return part_id * 3 + ch


def concept_flat_index(concept_id: int, pos: int) -> int:
    """Flattened index of concept channel `concept_id` at grid pos in the
    row-major (3, 3, 5) concept map."""
    y, x = divmod(pos, 3)
    return (y * 3 + x) * 5 + concept_id


def _collapse(term: PairTerm):
    """Canonical term key: ('const', v), ('single', atom) or
    ('pair', op, left, right). Top partners collapse."""
    left_top = isinstance(term.left, Top)
    right_top = isinstance(term.right, Top)
    if left_top and right_top:
        return ("const", 1)
    if left_top or right_top:
        atom = term.right if left_top else term.left
        if term.op == AND:
            return ("single", atom)
        return ("const", 1)  # x or Top is constantly true
    return ("pair", term.op, term.left, term.right)


def _half_keys(formula: Formula):
    """((op1, term_key) for the a- and b-half)."""
    return ((formula.c, _collapse(formula.a)), (formula.d, _collapse(formula.b)))


def _op1_const(op1: str, value: int) -> int:
    return value if op1 == NOT_NOT else 1 - value


class _LayerPlan:
    """Shared allocation logic for the pair-term / unary / join layers."""

    def __init__(self):
        self.pair_slots: dict = {}  # term key -> channel
        self.unary_slots: dict = {}  # (op1, term key) -> channel

    def alloc_pairs(self, defs: list[Formula], width: int, what: str):
        for formula in defs:
            for _, key in _half_keys(formula):
                if key[0] == "const" or key in self.pair_slots:
                    continue
                if len(self.pair_slots) >= width:
                    raise CompileError(
                        f"more distinct {what} pair-terms than {width} channels"
                    )
                self.pair_slots[key] = len(self.pair_slots)

    def alloc_unaries(self, defs: list[Formula], width: int, what: str):
        for formula in defs:
            for op1, key in _half_keys(formula):
                if key[0] == "const":
                    continue
                slot_key = (op1, key)
                if slot_key in self.unary_slots:
                    continue
                if len(self.unary_slots) >= width:
                    raise CompileError(
                        f"more distinct {what} unary terms than {width} channels"
                    )
                self.unary_slots[slot_key] = len(self.unary_slots)

    def join_plan(self, formula: Formula):
        """How the e-operator combines the two halves.

        Returns ('join', op, [unary channels]), ('pass', channel) or
        ('const', value)."""
        halves = []
        consts = []
        for op1, key in _half_keys(formula):
            if key[0] == "const":
                consts.append(_op1_const(op1, key[1]))
            else:
                halves.append(self.unary_slots[(op1, key)])
        if len(halves) == 2:
            return ("join", formula.e, halves)
        if len(halves) == 1:
            const = consts[0]
            if formula.e == AND:
                return ("pass", halves[0]) if const == 1 else ("const", 0)
            return ("const", 1) if const == 1 else ("pass", halves[0])
        value = consts[0]
        for v in consts[1:]:
            value = (value and v) if formula.e == AND else (value or v)
        return ("const", value)


def _pair_label(key) -> str:
    if key[0] == "single":
        return str(key[1])
    return f"({key[2]} {key[1]} {key[3]})"


def compile_conv_submodel(parts, concepts):
    """Conv2D_0..3 plus term labels per output channel."""
    # Conv2D_0: one single-channel detector per (part id, channel)
    w0 = np.zeros((3, 3, 3, 36))
    b0 = np.full(36, patterns.PART_BIAS)
    term0 = []
    for part in parts:
        for ch in range(3):
            w0[:, :, ch, part_channel(part.part_id, ch)] = part.weights
            term0.append(f"detect cp{part.part_id} ch{ch}")
    conv0 = Conv2D(w0, b0, stride=(3, 3), name="Conv2D_0")

    plan = _LayerPlan()
    plan.alloc_pairs(concepts, CONV1_CHANNELS, "concept")

    # Conv2D_1: 2x2 window = the four quadrants of one concept cell
    w1 = np.zeros((2, 2, 36, CONV1_CHANNELS))
    b1 = np.zeros(CONV1_CHANNELS)
    term1 = ["unused"] * CONV1_CHANNELS
    for key, slot in plan.pair_slots.items():
        term1[slot] = _pair_label(key)
        if key[0] == "single":
            atoms, bias = [key[1]], 0.0
        else:
            atoms = [key[2], key[3]]
            bias = -1.0 if key[1] == AND else 0.0
        for atom in atoms:
            qy, qx = divmod(atom.pos, 2)
            w1[qy, qx, part_channel(atom.part_id, atom.ch), slot] = 1.0
        b1[slot] = bias
    conv1 = Conv2D(w1, b1, stride=(2, 2), name="Conv2D_1")

    plan.alloc_unaries(concepts, CONV2_CHANNELS, "concept")

    # Conv2D_2: unary ops, 1x1
    w2 = np.zeros((1, 1, CONV1_CHANNELS, CONV2_CHANNELS))
    b2 = np.zeros(CONV2_CHANNELS)
    term2 = ["unused"] * CONV2_CHANNELS
    for (op1, key), slot in plan.unary_slots.items():
        src = plan.pair_slots[key]
        term2[slot] = f"{op1}{_pair_label(key)}"
        w2[0, 0, src, slot] = -1.0 if op1 == NOT else 1.0
        b2[slot] = 1.0 if op1 == NOT else 0.0
    conv2 = Conv2D(w2, b2, stride=(1, 1), name="Conv2D_2")

    # Conv2D_3: joins, one channel per concept
    w3 = np.zeros((1, 1, CONV2_CHANNELS, CONV3_CHANNELS))
    b3 = np.zeros(CONV3_CHANNELS)
    term3 = []
    for cid, concept in enumerate(concepts):
        kind, *info = plan.join_plan(concept)
        term3.append(f"concept {cid}: {concept}")
        if kind == "join":
            op, halves = info
            for src in halves:
                w3[0, 0, src, cid] = 1.0
            b3[cid] = -1.0 if op == AND else 0.0
        elif kind == "pass":
            w3[0, 0, info[0], cid] = 1.0
        else:  # constant concept map
            b3[cid] = float(info[0])
    conv3 = Conv2D(w3, b3, stride=(1, 1), name="Conv2D_3")

    term_map = {"Conv2D_0": term0, "Conv2D_1": term1,
                "Conv2D_2": term2, "Conv2D_3": term3}
    return [conv0, conv1, conv2, conv3], term_map


def compile_dense_submodel(classes):
    """Dense_0..2 plus term labels per unit."""
    plan = _LayerPlan()
    plan.alloc_pairs(classes, DENSE0_UNITS, "class")

    w0 = np.zeros((45, DENSE0_UNITS))
    b0 = np.zeros(DENSE0_UNITS)
    term0 = ["unused"] * DENSE0_UNITS
    for key, slot in plan.pair_slots.items():
        term0[slot] = _pair_label(key)
        if key[0] == "single":
            atoms, bias = [key[1]], 0.0
        else:
            atoms = [key[2], key[3]]
            bias = -1.0 if key[1] == AND else 0.0
        for atom in atoms:
            w0[concept_flat_index(atom.concept_id, atom.pos), slot] = 1.0
        b0[slot] = bias
    dense0 = Dense(w0, b0, name="Dense_0")

    plan.alloc_unaries(classes, DENSE1_UNITS, "class")
    w1 = np.zeros((DENSE0_UNITS, DENSE1_UNITS))
    b1 = np.zeros(DENSE1_UNITS)
    term1 = ["unused"] * DENSE1_UNITS
    for (op1, key), slot in plan.unary_slots.items():
        src = plan.pair_slots[key]
        term1[slot] = f"{op1}{_pair_label(key)}"
        w1[src, slot] = -1.0 if op1 == NOT else 1.0
        b1[slot] = 1.0 if op1 == NOT else 0.0
    dense1 = Dense(w1, b1, name="Dense_1")

    w2 = np.zeros((DENSE1_UNITS, DENSE2_UNITS))
    b2 = np.zeros(DENSE2_UNITS)
    term2 = []
    for k, cls in enumerate(classes):
        kind, *info = plan.join_plan(cls)
        term2.append(f"class {k}: {cls}")
        if kind == "join":
            op, halves = info
            for src in halves:
                w2[src, k] = 1.0
            b2[k] = -1.0 if op == AND else 0.0
        elif kind == "pass":
            w2[info[0], k] = 1.0
        else:
            b2[k] = float(info[0])
    dense2 = Dense(w2, b2, name="Dense_2")

    term_map = {"Dense_0": term0, "Dense_1": term1, "Dense_2": term2}
    return [dense0, dense1, dense2], term_map


def compile_model(concept_id: int, parts=None) -> Network:
    """Full ten-layer model for one concept id."""
    if not 0 <= concept_id <= 4:
        raise CompileError(f"concept id out of range: {concept_id}")
    if parts is None:
        parts = patterns.default_concept_parts()
    concepts = formulas.builtin_concepts()
    classes = formulas.builtin_classes(concept_id)
    conv_layers, conv_terms = compile_conv_submodel(parts, concepts)
    dense_layers, dense_terms = compile_dense_submodel(classes)
    layers = (
        MaxPool(kernel=(2, 2), stride=(2, 2), name="MaxPool_0"),
        *conv_layers,
        Flatten(name="Flatten_0"),
        *dense_layers,
    )
    term_map = {**conv_terms, **dense_terms}
    net = Network(layers=layers, input_shape=(36, 36, 3),
                  concept_id=concept_id, term_map=term_map)
    _check_shapes(net)
    return net


def _check_shapes(net: Network) -> None:
    probe = np.zeros(net.input_shape)
    _, trace = forward(net, probe)
    shapes = [p.shape for p in trace.post]
    if shapes != EXPECTED_SHAPES:
        raise CompileError(f"layer shapes {shapes} != expected {EXPECTED_SHAPES}")


def verify_against_oracle(net: Network, concept_id: int, parts=None,
                          positions=(0, 1, 2, 3)) -> dict:
    """Exhaustively enumerates concept-presence patterns over the given
    grid positions, renders each as an image, and compares the network's
    per-class outputs (and argmax, where the oracle assigns exactly one
    class) with the formula oracle. Mismatches are report content."""
    if parts is None:
        parts = patterns.default_concept_parts()
    concepts = formulas.builtin_concepts()
    classes = formulas.builtin_classes(concept_id)
    layout = rendering.canonical_atoms(concepts[concept_id])
    cases = 0
    mismatches = []
    for bits in itertools.product((0, 1), repeat=len(positions)):
        cases += 1
        present = [pos for pos, b in zip(positions, bits) if b]
        placements = [rendering.Placement(concept_id, pos, layout) for pos in present]
        img = rendering.upscale(rendering.render_base_image(placements, parts), 0, 0)
        out, _ = forward(net, img)
        assignment = {
            formulas.ConceptAtom(concept_id, pos): (1 if pos in present else 0)
            for pos in range(9)
        }
        oracle = [formulas.evaluate(c, assignment) for c in classes]
        if [float(v) for v in out] != [float(v) for v in oracle]:
            mismatches.append({"present": present, "network": out.tolist(),
                               "oracle": oracle})
            continue
        if sum(oracle) == 1 and oracle[int(np.argmax(out))] != 1:
            mismatches.append({"present": present, "argmax": int(np.argmax(out)),
                               "oracle": oracle})
    return {"concept_id": concept_id, "cases": cases,
            "agreements": cases - len(mismatches), "mismatches": mismatches}
