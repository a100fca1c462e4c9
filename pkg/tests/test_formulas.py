import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from xaibench import formulas
from xaibench.formulas import (AND, NOT, NOT_NOT, OR, ConceptAtom,
                               ConceptPartAtom, Formula, FormulaError,
                               PairTerm, Top, evaluate, parse)


def cp_atoms():
    return st.builds(ConceptPartAtom,
                     st.integers(0, 11), st.integers(0, 3), st.integers(0, 2))


def c_atoms():
    return st.builds(ConceptAtom, st.integers(0, 4), st.integers(0, 8))


def atoms():
    return st.one_of(st.just(Top()), cp_atoms(), c_atoms())


def pair_terms():
    return st.builds(PairTerm, atoms(), atoms(), st.sampled_from([AND, OR]))


def formulas_strategy():
    op1 = st.sampled_from([NOT_NOT, NOT])
    return st.builds(Formula, pair_terms(), pair_terms(), op1, op1,
                     st.sampled_from([AND, OR]))


@given(formulas_strategy())
def test_print_parse_round_trip(formula):
    assert parse(str(formula)) == formula


@given(formulas_strategy(), st.data())
def test_evaluate_matches_python_semantics(formula, data):
    """Independent oracle: evaluate the printed formula with eval() after
    rewriting it into python boolean syntax."""
    assignment = {a: data.draw(st.integers(0, 1), label=str(a))
                  for a in formula.atoms()}

    def val(atom):
        return 1 if isinstance(atom, Top) else assignment[atom]

    def half(op1, term):
        expr = f"({val(term.left)} {'and' if term.op == AND else 'or'} {val(term.right)})"
        v = eval(expr)
        return (0 if v else 1) if op1 == NOT else (1 if v else 0)

    joined = (half(formula.c, formula.a), half(formula.d, formula.b))
    expected = int(joined[0] and joined[1]) if formula.e == AND \
        else int(joined[0] or joined[1])
    assert evaluate(formula, assignment) == expected


def test_builtin_concepts_truth_tables():
    """Exhaustive check of the five concept definitions against their
    intended boolean functions of the four quadrant atoms."""
    oracles = [
        lambda v: (v[0] and v[1]) or (v[2] and v[3]),
        lambda v: (v[0] and v[1]) and (v[2] and v[3]),
        lambda v: (v[0] or v[1]) and (v[2] and v[3]),
        lambda v: v[0] and v[1],
        lambda v: (v[0] or v[1]) and not (v[0] and v[1]),
    ]
    for concept, oracle in zip(formulas.builtin_concepts(), oracles):
        names = concept.atoms()
        for bits in itertools.product((0, 1), repeat=len(names)):
            assignment = dict(zip(names, bits))
            assert evaluate(concept, assignment) == int(bool(oracle(bits)))


def test_builtin_classes_truth_tables():
    """Class semantics over presence at positions 0..3 (positions 4..8
    never appear in the definitions)."""
    oracles = [
        lambda p: p[0],
        lambda p: p[3],
        lambda p: p[1] and p[2],
        lambda p: (p[1] or p[2]) and not (p[1] and p[2]),
        lambda p: not (p[0] or p[1]) and not (p[2] or p[3]),
    ]
    for cid in range(5):
        classes = formulas.builtin_classes(cid)
        for bits in itertools.product((0, 1), repeat=4):
            assignment = {ConceptAtom(cid, pos): 0 for pos in range(9)}
            for pos, bit in enumerate(bits):
                assignment[ConceptAtom(cid, pos)] = bit
            for label, (cls, oracle) in enumerate(zip(classes, oracles)):
                assert evaluate(cls, assignment) == int(bool(oracle(bits))), \
                    (cid, label, bits)


def test_canonical_patterns_are_unambiguous():
    """The defining presence pattern of each class satisfies that class
    and no other (general patterns may overlap; the dataset generator
    rejection-samples those away)."""
    canonical = {0: (1, 0, 0, 0), 1: (0, 0, 0, 1), 2: (0, 1, 1, 0),
                 3: (0, 1, 0, 0), 4: (0, 0, 0, 0)}
    for cid in range(5):
        classes = formulas.builtin_classes(cid)
        for label, bits in canonical.items():
            assignment = {ConceptAtom(cid, pos): 0 for pos in range(9)}
            for pos, bit in enumerate(bits):
                assignment[ConceptAtom(cid, pos)] = bit
            verdicts = [evaluate(c, assignment) for c in classes]
            assert verdicts == [int(i == label) for i in range(5)]


@pytest.mark.parametrize("bad", [
    "cp(12,0,0)", "cp(0,4,0)", "cp(0,0,3)", "c(5,0)", "c(0,9)"])
def test_out_of_range_atoms_rejected(bad):
    text = f"((!!({bad} & T)) & (!!(T & T)))"
    with pytest.raises(FormulaError):
        parse(text)


def test_parse_error_reports_position():
    with pytest.raises(FormulaError, match=r"line 2, column 10"):
        parse("((!!(T & T))\n & (!!(T % T)))")


def test_trailing_input_rejected():
    good = "((!!(T & T)) & (!!(T & T)))"
    with pytest.raises(FormulaError, match="trailing"):
        parse(good + " junk")


def test_missing_assignment_raises():
    concept = formulas.builtin_concepts()[0]
    with pytest.raises(FormulaError, match="missing atom"):
        evaluate(concept, {})


def test_atoms_deduplicated_in_order():
    f = parse("((!!(cp(8,0,1) | cp(11,1,1))) & (!(cp(8,0,1) & cp(11,1,1))))")
    assert f.atoms() == [ConceptPartAtom(8, 0, 1), ConceptPartAtom(11, 1, 1)]


def test_load_definitions_round_trip():
    text = formulas.default_definitions_text()
    concepts, classes = formulas.load_definitions(text, concept_id=2)
    assert sorted(concepts) == list(range(5))
    assert sorted(classes) == list(range(5))
    assert concepts[3] == formulas.builtin_concepts()[3]
    assert classes[4] == formulas.builtin_classes(2)[4]


def test_load_definitions_bad_lines():
    with pytest.raises(FormulaError, match="missing ':'"):
        formulas.load_definitions("concept 0 no separator")
    with pytest.raises(FormulaError, match="unknown definition kind"):
        formulas.load_definitions("species 0: ((!!(T & T)) & (!!(T & T)))")
