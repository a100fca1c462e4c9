"""Two-level logical definition language for concepts and classes.

Concepts are boolean formulas over concept-part atoms ``cp(id,pos,ch)``;
classes are formulas over concept-at-position atoms ``c(id,pos)``. Every
definition has the fixed shape

    ((OP1 (ATOM OP2 ATOM)) OP2 (OP1 (ATOM OP2 ATOM)))

with OP1 in {!!, !} and OP2 in {&, |}. ``T`` is the always-true atom.
The module is also the brute-force oracle the network compiler is
verified against.
"""

from __future__ import annotations

from dataclasses import dataclass

__all__ = [
    "Top",
    "ConceptPartAtom",
    "ConceptAtom",
    "PairTerm",
    "Formula",
    "FormulaError",
    "parse",
    "evaluate",
    "builtin_concepts",
    "builtin_classes",
    "default_definitions_text",
    "load_definitions",
]

NOT_NOT = "!!"
NOT = "!"
AND = "&"
OR = "|"


class FormulaError(ValueError):
    """Raised for syntax errors, bad indices, or incomplete assignments."""


@dataclass(frozen=True)
class Top:
    def __str__(self):
        return "T"


@dataclass(frozen=True)
class ConceptPartAtom:
    part_id: int
    pos: int
    ch: int

    def __post_init__(self):
        if not (0 <= self.part_id <= 11 and 0 <= self.pos <= 3 and 0 <= self.ch <= 2):
            raise FormulaError(
                f"concept-part indices out of range: cp({self.part_id},{self.pos},{self.ch})"
            )

    def __str__(self):
        return f"cp({self.part_id},{self.pos},{self.ch})"


@dataclass(frozen=True)
class ConceptAtom:
    concept_id: int
    pos: int

    def __post_init__(self):
        if not (0 <= self.concept_id <= 4 and 0 <= self.pos <= 8):
            raise FormulaError(
                f"concept indices out of range: c({self.concept_id},{self.pos})"
            )

    def __str__(self):
        return f"c({self.concept_id},{self.pos})"


Atom = Top | ConceptPartAtom | ConceptAtom


@dataclass(frozen=True)
class PairTerm:
    left: Atom
    right: Atom
    op: str  # & or |

    def __post_init__(self):
        if self.op not in (AND, OR):
            raise FormulaError(f"bad pair operator {self.op!r}")

    def __str__(self):
        return f"({self.left} {self.op} {self.right})"


@dataclass(frozen=True)
class Formula:
    a: PairTerm
    b: PairTerm
    c: str  # OP1 applied to a: !! or !
    d: str  # OP1 applied to b
    e: str  # OP2 joining the halves

    def __post_init__(self):
        if self.c not in (NOT_NOT, NOT) or self.d not in (NOT_NOT, NOT):
            raise FormulaError("unary operators must be !! or !")
        if self.e not in (AND, OR):
            raise FormulaError("joining operator must be & or |")

    def __str__(self):
        return f"(({self.c}{self.a}) {self.e} ({self.d}{self.b}))"

    def atoms(self) -> list[Atom]:
        """Non-Top atoms in syntactic order, duplicates removed."""
        out = []
        for atom in (self.a.left, self.a.right, self.b.left, self.b.right):
            if not isinstance(atom, Top) and atom not in out:
                out.append(atom)
        return out


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def error(self, msg: str):
        line = self.text.count("\n", 0, self.pos) + 1
        col = self.pos - (self.text.rfind("\n", 0, self.pos) + 1) + 1
        raise FormulaError(f"{msg} at line {line}, column {col}")

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos] in " \t\n":
            self.pos += 1

    def expect(self, token: str):
        self.skip_ws()
        if not self.text.startswith(token, self.pos):
            self.error(f"expected {token!r}")
        self.pos += len(token)

    def peek(self, token: str) -> bool:
        self.skip_ws()
        return self.text.startswith(token, self.pos)

    def integer(self) -> int:
        self.skip_ws()
        start = self.pos
        while self.pos < len(self.text) and self.text[self.pos].isdigit():
            self.pos += 1
        if self.pos == start:
            self.error("expected integer")
        return int(self.text[start : self.pos])

    def atom(self) -> Atom:
        self.skip_ws()
        if self.peek("cp("):
            self.expect("cp(")
            part_id = self.integer()
            self.expect(",")
            p = self.integer()
            self.expect(",")
            ch = self.integer()
            self.expect(")")
            try:
                return ConceptPartAtom(part_id, p, ch)
            except FormulaError as exc:
                self.error(str(exc))
        if self.peek("c("):
            self.expect("c(")
            cid = self.integer()
            self.expect(",")
            p = self.integer()
            self.expect(")")
            try:
                return ConceptAtom(cid, p)
            except FormulaError as exc:
                self.error(str(exc))
        if self.peek("T"):
            self.expect("T")
            return Top()
        self.error("expected atom (cp(...), c(...) or T)")

    def op2(self) -> str:
        self.skip_ws()
        if self.peek(AND):
            self.expect(AND)
            return AND
        if self.peek(OR):
            self.expect(OR)
            return OR
        self.error("expected & or |")

    def op1(self) -> str:
        # try !! before !
        if self.peek(NOT_NOT):
            self.expect(NOT_NOT)
            return NOT_NOT
        if self.peek(NOT):
            self.expect(NOT)
            return NOT
        self.error("expected !! or !")

    def pair(self) -> PairTerm:
        self.expect("(")
        left = self.atom()
        op = self.op2()
        right = self.atom()
        self.expect(")")
        return PairTerm(left, right, op)

    def half(self) -> tuple[str, PairTerm]:
        self.expect("(")
        op1 = self.op1()
        term = self.pair()
        self.expect(")")
        return op1, term

    def formula(self) -> Formula:
        self.expect("(")
        c, a = self.half()
        e = self.op2()
        d, b = self.half()
        self.expect(")")
        return Formula(a=a, b=b, c=c, d=d, e=e)


def parse(text: str) -> Formula:
    """Parse a fully parenthesized canonical definition string."""
    parser = _Parser(text)
    formula = parser.formula()
    parser.skip_ws()
    if parser.pos != len(parser.text):
        parser.error("trailing input")
    return formula


def _eval_atom(atom: Atom, assignment) -> int:
    if isinstance(atom, Top):
        return 1
    try:
        value = assignment[atom]
    except KeyError:
        raise FormulaError(f"assignment missing atom {atom}") from None
    if value not in (0, 1):
        raise FormulaError(f"non-boolean value {value!r} for {atom}")
    return value


def _apply_op2(x: int, y: int, op: str) -> int:
    return (x and y) if op == AND else (x or y)


def evaluate(formula: Formula, assignment) -> int:
    """Standard boolean semantics; Top is 1 and !! is the identity."""
    va = _apply_op2(
        _eval_atom(formula.a.left, assignment),
        _eval_atom(formula.a.right, assignment),
        formula.a.op,
    )
    vb = _apply_op2(
        _eval_atom(formula.b.left, assignment),
        _eval_atom(formula.b.right, assignment),
        formula.b.op,
    )
    if formula.c == NOT:
        va = 1 - va
    if formula.d == NOT:
        vb = 1 - vb
    return _apply_op2(va, vb, formula.e)


_CONCEPT_DEFS = [
    "((!!(cp(7,0,0) & cp(10,1,0))) | (!!(cp(4,2,0) & cp(1,3,0))))",
    "((!!(cp(6,0,0) & cp(9,1,0))) & (!!(cp(3,2,0) & cp(0,3,0))))",
    "((!!(cp(7,0,1) | cp(10,1,1))) & (!!(cp(4,2,2) & cp(1,3,2))))",
    "((!!(cp(8,0,1) & cp(11,1,1))) & (!!(T & T)))",
    "((!!(cp(8,0,1) | cp(11,1,1))) & (!(cp(8,0,1) & cp(11,1,1))))",
]

# class definitions with {id} substituted by the model's concept id
_CLASS_DEFS = [
    "((!!(c({id},0) & T)) & (!!(T & T)))",
    "((!!(c({id},3) & T)) & (!!(T & T)))",
    "((!!(c({id},1) & c({id},2))) & (!!(T & T)))",
    "((!!(c({id},1) | c({id},2))) & (!(c({id},1) & c({id},2))))",
    "((!(c({id},0) | c({id},1))) & (!(c({id},2) | c({id},3))))",
]


def builtin_concepts() -> list[Formula]:
    """The five concept definitions over concept-part atoms."""
    return [parse(text) for text in _CONCEPT_DEFS]


def builtin_classes(concept_id: int) -> list[Formula]:
    """The five class definitions, instantiated for one concept id."""
    if not 0 <= concept_id <= 4:
        raise FormulaError(f"concept id out of range: {concept_id}")
    return [parse(text.format(id=concept_id)) for text in _CLASS_DEFS]


def default_definitions_text() -> str:
    """Shipped defaults in the definition-file format (one per line)."""
    lines = [f"concept {i}: {text}" for i, text in enumerate(_CONCEPT_DEFS)]
    lines += [f"class {i}: {text}" for i, text in enumerate(_CLASS_DEFS)]
    return "\n".join(lines) + "\n"


def load_definitions(text: str, concept_id: int = 0):
    """Parse a definition file; class lines may use the ``{id}`` placeholder.

    Returns (concepts, classes) as dicts keyed by the declared number.
    """
    concepts: dict[int, Formula] = {}
    classes: dict[int, Formula] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        head, sep, body = line.partition(":")
        if not sep:
            raise FormulaError(f"line {lineno}: missing ':' separator")
        kind, _, number = head.strip().partition(" ")
        try:
            index = int(number)
        except ValueError:
            raise FormulaError(f"line {lineno}: bad definition number {number!r}") from None
        body = body.strip().format(id=concept_id)
        if kind == "concept":
            concepts[index] = parse(body)
        elif kind == "class":
            classes[index] = parse(body)
        else:
            raise FormulaError(f"line {lineno}: unknown definition kind {kind!r}")
    return concepts, classes
