"""Boolean type-definition DSL: parsing, pattern matching, and evaluation.

A type-definition file maps target taxonomy types to Boolean formulas over
primitive type paths, one rule per line:

    /PER := /PEOPLE/PERSON
    /ART := /ART || /WRITTEN_WORK
    /ORGANIZATION/COMPANY := (/A || /B) && !(/C || /D)

Operators are "!" (highest), "&&", "||" (lowest); "&&"/"||" associate left.
Atoms are slash-paths that may contain "*" wildcards; "*" matches any
character sequence, including "/". Matching is case-insensitive: target
paths canonicalize to uppercase, atoms and primitive types to lowercase.

The reserved atom ALL_TYPES_EXLUCDING_OTHER (spelling as shipped in the
conformance fixtures, optionally followed by "*") expands to "any primitive
type matched, as a prefix, by an atom occurring positively in a rule whose
target lies outside the /OTHER subtree". It makes an /OTHER rule of the form
"!ALL_TYPES_EXLUCDING_OTHER* || /OTHER*" behave as a catch-all.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Union

MACRO_NAME = "ALL_TYPES_EXLUCDING_OTHER"

_ATOM_BREAK = set(" \t()!&|")


class TypeDefSyntaxError(ValueError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"line {line}, col {col}: {message}")
        self.line = line
        self.col = col


class TypeDefWarning(UserWarning):
    """Recoverable oddity in a type-definition file."""


# --- expression tree ---------------------------------------------------------


@dataclass(frozen=True)
class Atom:
    pattern: str  # lowercased path, may contain "*"


@dataclass(frozen=True)
class Macro:
    """The ALL_TYPES_EXLUCDING_OTHER atom."""

    starred: bool = True


@dataclass(frozen=True)
class Not:
    operand: "Formula"


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"


Formula = Union[Atom, Macro, Not, And, Or]


def target_depth(target: str) -> int:
    return len(target.strip("/").split("/"))


@dataclass
class TypeDefinition:
    """Parsed rule set: ordered target -> formula, plus derived views."""

    rules: dict[str, Formula]
    coarse_set: frozenset[str] = field(init=False)
    fine_set: frozenset[str] = field(init=False)
    all_non_other: tuple[str, ...] = field(init=False)

    def __post_init__(self) -> None:
        self.coarse_set = frozenset(t for t in self.rules if target_depth(t) == 1)
        self.fine_set = frozenset(t for t in self.rules if target_depth(t) >= 2)
        prefixes: set[str] = set()
        for target, formula in self.rules.items():
            if target == "/OTHER" or target.startswith("/OTHER/"):
                continue
            for pattern in _positive_atoms(formula):
                prefixes.add(pattern if pattern.endswith("*") else pattern + "*")
        self.all_non_other = tuple(sorted(prefixes))

    def targets(self) -> list[str]:
        return list(self.rules)


def _positive_atoms(formula: Formula, negated: bool = False) -> Iterator[str]:
    """Atom patterns not under an odd number of negations."""
    if isinstance(formula, Atom):
        if not negated:
            yield formula.pattern
    elif isinstance(formula, Not):
        yield from _positive_atoms(formula.operand, not negated)
    elif isinstance(formula, (And, Or)):
        yield from _positive_atoms(formula.left, negated)
        yield from _positive_atoms(formula.right, negated)


# --- pattern matching --------------------------------------------------------


def match_pattern(pattern: str, type_path: str) -> bool:
    """Case-insensitive glob match; "*" spans any characters, "/" included."""
    pat = pattern.casefold()
    text = type_path.casefold()
    if "*" not in pat:
        return pat == text
    # two-pointer glob with single-star backtracking
    p = t = 0
    star = -1
    mark = 0
    while t < len(text):
        if p < len(pat) and pat[p] == "*":
            star = p
            mark = t
            p += 1
        elif p < len(pat) and pat[p] == text[t]:
            p += 1
            t += 1
        elif star >= 0:
            mark += 1
            t = mark
            p = star + 1
        else:
            return False
    while p < len(pat) and pat[p] == "*":
        p += 1
    return p == len(pat)


def eval_formula(formula: Formula, primitive_types: Iterable[str], defs: TypeDefinition) -> bool:
    """Evaluate a formula against a concept's primitive type set."""
    types = primitive_types if isinstance(primitive_types, (set, frozenset)) else set(primitive_types)
    return _eval(formula, types, defs)


def _eval(formula: Formula, types: set[str] | frozenset[str], defs: TypeDefinition) -> bool:
    if isinstance(formula, Atom):
        return any(match_pattern(formula.pattern, t) for t in types)
    if isinstance(formula, Macro):
        return any(
            match_pattern(prefix, t) for prefix in defs.all_non_other for t in types
        )
    if isinstance(formula, Not):
        return not _eval(formula.operand, types, defs)
    if isinstance(formula, And):
        return _eval(formula.left, types, defs) and _eval(formula.right, types, defs)
    if isinstance(formula, Or):
        return _eval(formula.left, types, defs) or _eval(formula.right, types, defs)
    raise TypeError(f"not a formula node: {formula!r}")


def apply_type_map(primitive_types: Iterable[str], defs: TypeDefinition) -> frozenset[str]:
    """Target types whose rules are satisfied by the primitive type set."""
    types = frozenset(t.lower() for t in primitive_types)
    return frozenset(
        target for target, formula in defs.rules.items() if _eval(formula, types, defs)
    )


def split_coarse_fine(targets: Iterable[str], defs: TypeDefinition) -> tuple[frozenset[str], frozenset[str]]:
    """Partition target types into (depth-1, depth>=2) subsets."""
    coarse: set[str] = set()
    fine: set[str] = set()
    for t in targets:
        (coarse if target_depth(t) == 1 else fine).add(t)
    return frozenset(coarse), frozenset(fine)


def is_compatible(fine: str, coarse: str) -> bool:
    """True iff the fine type's first segment equals the coarse type."""
    return fine.startswith(coarse + "/")


# --- lexer / parser ----------------------------------------------------------


@dataclass(frozen=True)
class _Token:
    kind: str  # LPAREN RPAREN NOT AND OR ATOM MACRO
    text: str
    col: int


def _lex_expr(text: str, line_no: int, col_offset: int) -> list[_Token]:
    tokens: list[_Token] = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        col = col_offset + i + 1
        if ch in " \t":
            i += 1
        elif ch == "(":
            tokens.append(_Token("LPAREN", "(", col))
            i += 1
        elif ch == ")":
            tokens.append(_Token("RPAREN", ")", col))
            i += 1
        elif ch == "!":
            tokens.append(_Token("NOT", "!", col))
            i += 1
        elif ch == "&":
            if text[i : i + 2] != "&&":
                raise TypeDefSyntaxError("single '&' (use '&&')", line_no, col)
            tokens.append(_Token("AND", "&&", col))
            i += 2
        elif ch == "|":
            if text[i : i + 2] != "||":
                raise TypeDefSyntaxError("single '|' (use '||')", line_no, col)
            tokens.append(_Token("OR", "||", col))
            i += 2
        else:
            j = i
            while j < n and text[j] not in _ATOM_BREAK:
                j += 1
            word = text[i:j]
            if word.rstrip("*") == MACRO_NAME:
                tokens.append(_Token("MACRO", word, col))
            elif word.startswith("/"):
                tokens.append(_Token("ATOM", word, col))
            else:
                raise TypeDefSyntaxError(
                    f"bad atom {word!r} (paths start with '/')", line_no, col
                )
            i = j
    return tokens


class _ExprParser:
    """Recursive descent over the token list: OR < AND < NOT < atom."""

    def __init__(self, tokens: list[_Token], line_no: int, end_col: int):
        self.tokens = tokens
        self.pos = 0
        self.line_no = line_no
        self.end_col = end_col

    def _peek(self) -> _Token | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def _next(self) -> _Token:
        tok = self._peek()
        if tok is None:
            raise TypeDefSyntaxError("unexpected end of expression", self.line_no, self.end_col)
        self.pos += 1
        return tok

    def parse(self) -> Formula:
        if not self.tokens:
            raise TypeDefSyntaxError("empty right-hand side", self.line_no, self.end_col)
        formula = self._or()
        trailing = self._peek()
        if trailing is not None:
            raise TypeDefSyntaxError(
                f"unexpected {trailing.text!r}", self.line_no, trailing.col
            )
        return formula

    def _or(self) -> Formula:
        left = self._and()
        while (tok := self._peek()) is not None and tok.kind == "OR":
            self._next()
            left = Or(left, self._and())
        return left

    def _and(self) -> Formula:
        left = self._unary()
        while (tok := self._peek()) is not None and tok.kind == "AND":
            self._next()
            left = And(left, self._unary())
        return left

    def _unary(self) -> Formula:
        tok = self._next()
        if tok.kind == "NOT":
            return Not(self._unary())
        if tok.kind == "LPAREN":
            inner = self._or()
            closing = self._peek()
            if closing is None or closing.kind != "RPAREN":
                raise TypeDefSyntaxError("unbalanced '('", self.line_no, tok.col)
            self._next()
            return inner
        if tok.kind == "ATOM":
            return Atom(tok.text.lower())
        if tok.kind == "MACRO":
            return Macro(starred=tok.text.endswith("*"))
        raise TypeDefSyntaxError(f"unexpected {tok.text!r}", self.line_no, tok.col)


def parse_expression(text: str, line_no: int = 1, col_offset: int = 0) -> Formula:
    tokens = _lex_expr(text, line_no, col_offset)
    return _ExprParser(tokens, line_no, col_offset + len(text) + 1).parse()


def _validate_target(target: str, line_no: int) -> str:
    if not target.startswith("/") or target.endswith("/"):
        raise TypeDefSyntaxError(f"bad target path {target!r}", line_no, 1)
    if "*" in target or any(c.isspace() for c in target):
        raise TypeDefSyntaxError(f"bad target path {target!r}", line_no, 1)
    if any(not seg for seg in target[1:].split("/")):
        raise TypeDefSyntaxError(f"bad target path {target!r}", line_no, 1)
    return target.upper()


def parse_typedefs(source: str, source_name: str = "<string>") -> TypeDefinition:
    """Parse type-definition text into a TypeDefinition.

    Later rules for an already-defined target replace the earlier rule with
    a warning. A line with no ":=" but two path fields is accepted as a rule
    (a known fixture typo) with a warning.
    """
    rules: dict[str, Formula] = {}
    for line_no, raw in enumerate(source.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        if ":=" in line:
            lhs, rhs = line.split(":=", 1)
            target = _validate_target(lhs.strip(), line_no)
            col_offset = len(lhs) + 2
        else:
            parts = line.split(None, 1)
            if len(parts) == 2 and parts[0].startswith("/") and parts[1].startswith(("/", "!", "(")):
                warnings.warn(
                    f"{source_name}:{line_no}: rule without ':=' parsed as "
                    f"'{parts[0]} := {parts[1].strip()}'",
                    TypeDefWarning,
                    stacklevel=2,
                )
                target = _validate_target(parts[0], line_no)
                rhs = parts[1]
                col_offset = len(line) - len(rhs)
            else:
                raise TypeDefSyntaxError("expected 'TARGET := EXPR'", line_no, 1)
        formula = parse_expression(rhs.rstrip(), line_no, col_offset)
        if target in rules:
            warnings.warn(
                f"{source_name}:{line_no}: duplicate rule for {target} replaces the earlier one",
                TypeDefWarning,
                stacklevel=2,
            )
        rules[target] = formula

    defs = TypeDefinition(rules)
    for fine in sorted(defs.fine_set):
        prefix = "/" + fine.strip("/").split("/")[0]
        if prefix not in defs.coarse_set:
            warnings.warn(
                f"{source_name}: fine target {fine} has no defined coarse target {prefix}",
                TypeDefWarning,
                stacklevel=2,
            )
    return defs


def parse_typedef_file(path: str | Path) -> TypeDefinition:
    text = Path(path).read_text(encoding="utf-8")
    return parse_typedefs(text, source_name=str(path))


# --- pretty printer ----------------------------------------------------------

_PRECEDENCE = {Or: 1, And: 2, Not: 3, Atom: 4, Macro: 4}


def format_formula(formula: Formula) -> str:
    return _fmt(formula, parent_prec=0, right_side=False)


def _fmt(formula: Formula, parent_prec: int, right_side: bool) -> str:
    prec = _PRECEDENCE[type(formula)]
    if isinstance(formula, Atom):
        text = formula.pattern.upper()
    elif isinstance(formula, Macro):
        text = MACRO_NAME + ("*" if formula.starred else "")
    elif isinstance(formula, Not):
        text = "!" + _fmt(formula.operand, prec, right_side=False)
    else:
        op = "&&" if isinstance(formula, And) else "||"
        text = (
            f"{_fmt(formula.left, prec, right_side=False)} {op} "
            f"{_fmt(formula.right, prec, right_side=True)}"
        )
    # parenthesize when binding looser than the parent, or equally on the
    # right of a left-associative operator (preserves tree shape exactly)
    if prec < parent_prec or (right_side and prec == parent_prec and prec in (1, 2)):
        return f"({text})"
    return text


def format_typedefs(defs: TypeDefinition) -> str:
    return "\n".join(
        f"{target} := {format_formula(formula)}" for target, formula in defs.rules.items()
    ) + "\n"
