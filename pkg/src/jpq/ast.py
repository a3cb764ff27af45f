"""Abstract syntax for queries: extraction patterns, conditions, construction
patterns, and the derivation of a pattern's matching term.

The concrete grammar lives in parser.py; this module owns the node types,
their unparser (the printer round-trips through the parser), and the
structural mt() derivation.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Optional, Union

from .errors import ReboundVariableError, UnboundVariableError
from .model import Atom
from .terms import (
    ArrayT,
    DistinctT,
    OptionT,
    Term,
    TupleT,
    UNIT,
    Var,
    is_unit,
    option_of,
    render,
    tuple_of,
)

# ---------------------------------------------------------------------------
# predicates


@dataclass(frozen=True)
class StringPredicate:
    """A string test where `?` matches any (possibly empty) character run;
    everything else is literal.  Anchored at both ends, case-sensitive."""

    pattern: str

    def matches(self, s: str) -> bool:
        return self._regex().fullmatch(s) is not None

    def _regex(self) -> re.Pattern:
        parts = self.pattern.split("?")
        return re.compile(".*".join(re.escape(p) for p in parts), re.DOTALL)

    @property
    def definitive(self) -> bool:
        """True when the predicate is an exact string (no wildcard)."""
        return "?" not in self.pattern


@dataclass(frozen=True)
class ComparePredicate:
    """Comparison against a literal atom: =, !=, <, <=, >, >=."""

    op: str
    literal: Atom


ValuePredicate = Union[StringPredicate, ComparePredicate]


# ---------------------------------------------------------------------------
# extraction patterns


class ValuePattern:
    __slots__ = ()


class KeyValuePattern:
    __slots__ = ()


@dataclass(frozen=True)
class PVar(ValuePattern):
    name: str


@dataclass(frozen=True)
class PPred(ValuePattern):
    pred: ValuePredicate


@dataclass(frozen=True)
class PWild(ValuePattern):
    pass


@dataclass(frozen=True)
class PObject(ValuePattern):
    members: tuple[KeyValuePattern, ...]


@dataclass(frozen=True)
class PArray(ValuePattern):
    elem: ValuePattern


@dataclass(frozen=True)
class PConj(ValuePattern):
    items: tuple[ValuePattern, ...]


@dataclass(frozen=True)
class POption(ValuePattern):
    branches: tuple[ValuePattern, ...]


@dataclass(frozen=True)
class PChildren(ValuePattern):
    member: KeyValuePattern


@dataclass(frozen=True)
class PDescend(ValuePattern):
    pattern: ValuePattern


@dataclass(frozen=True)
class KVPattern(KeyValuePattern):
    var: Optional[str]
    key: Optional[StringPredicate]  # both None: wildcard key `*`
    value: ValuePattern


@dataclass(frozen=True)
class KVOption(KeyValuePattern):
    branches: tuple[KeyValuePattern, ...]


# ---------------------------------------------------------------------------
# conditions


class CondExpr:
    __slots__ = ()


@dataclass(frozen=True)
class EVar(CondExpr):
    name: str


@dataclass(frozen=True)
class EField(CondExpr):
    var: str
    keys: tuple[str, ...]


@dataclass(frozen=True)
class ELit(CondExpr):
    value: Atom


@dataclass(frozen=True)
class ECount(CondExpr):
    """count[$v]: the length of the array the variable ranges over."""

    var: str


class Condition:
    __slots__ = ()


@dataclass(frozen=True)
class CCompare(Condition):
    op: str
    lhs: CondExpr
    rhs: CondExpr


@dataclass(frozen=True)
class CCall(Condition):
    name: str
    args: tuple[CondExpr, ...]


@dataclass(frozen=True)
class CQuant(Condition):
    kind: str  # "foreach" | "forsome"
    var: str
    body: Condition


@dataclass(frozen=True)
class CBool(Condition):
    op: str  # "and" | "or" | "not"
    subs: tuple[Condition, ...]


@dataclass(frozen=True)
class CCompound(Condition):
    op: str  # "par" | "with"
    left: Condition
    right: Condition


# ---------------------------------------------------------------------------
# construction patterns


class ConstructionPattern:
    __slots__ = ()


@dataclass(frozen=True)
class CLit(ConstructionPattern):
    value: Atom


@dataclass(frozen=True)
class CVarRef(ConstructionPattern):
    name: str


@dataclass(frozen=True)
class CObject(ConstructionPattern):
    members: tuple[tuple[str, ConstructionPattern], ...]


@dataclass(frozen=True)
class CArray(ConstructionPattern):
    elem: ConstructionPattern
    groupby: Optional[Term] = None
    order: Optional[str] = None  # "asc" | "desc"


@dataclass(frozen=True)
class CFlatArray(ConstructionPattern):
    elem: ConstructionPattern


@dataclass(frozen=True)
class COption(ConstructionPattern):
    branches: tuple[ConstructionPattern, ...]


@dataclass(frozen=True)
class CFun(ConstructionPattern):
    name: str
    args: tuple[ConstructionPattern, ...]


@dataclass(frozen=True)
class CDistinctRef(ConstructionPattern):
    """Reference to a folded array's grouping key, written e.g. `^[$id]%`."""

    term: Term


@dataclass(frozen=True)
class QueryAst:
    sources: tuple[tuple[str, ValuePattern], ...]  # (doc name, pattern)
    construct: ConstructionPattern
    where: Optional[Condition]


# ---------------------------------------------------------------------------
# variable inventory


def pattern_vars(p: Union[ValuePattern, KeyValuePattern]) -> list[str]:
    """All variable bindings, in textual order, duplicates included."""
    out: list[str] = []
    _pvars(p, out)
    return out


def _pvars(p, out: list[str]) -> None:
    if isinstance(p, PVar):
        out.append(p.name)
    elif isinstance(p, PObject):
        for m in p.members:
            _pvars(m, out)
    elif isinstance(p, (PArray, PDescend)):
        _pvars(p.elem if isinstance(p, PArray) else p.pattern, out)
    elif isinstance(p, PConj):
        for s in p.items:
            _pvars(s, out)
    elif isinstance(p, POption):
        for b in p.branches:
            _pvars(b, out)
    elif isinstance(p, PChildren):
        _pvars(p.member, out)
    elif isinstance(p, KVPattern):
        if p.var:
            out.append(p.var)
        _pvars(p.value, out)
    elif isinstance(p, KVOption):
        for b in p.branches:
            _pvars(b, out)


def check_single_binding(p: Union[ValuePattern, KeyValuePattern]) -> None:
    """Every variable name occurs at most once in one whole extraction
    pattern; rebinding is ill-formed, including across option branches."""
    seen: set[str] = set()
    for name in pattern_vars(p):
        if name in seen:
            raise ReboundVariableError(name)
        seen.add(name)


def cond_vars(c: Condition) -> list[str]:
    out: list[str] = []
    _cvars(c, out)
    return out


def _cvars(c, out: list[str]) -> None:
    if isinstance(c, CCompare):
        _evars(c.lhs, out)
        _evars(c.rhs, out)
    elif isinstance(c, CCall):
        for a in c.args:
            _evars(a, out)
    elif isinstance(c, CQuant):
        out.append(c.var)
        _cvars(c.body, out)
    elif isinstance(c, CBool):
        for s in c.subs:
            _cvars(s, out)
    elif isinstance(c, CCompound):
        _cvars(c.left, out)
        _cvars(c.right, out)


def _evars(e: CondExpr, out: list[str]) -> None:
    if isinstance(e, EVar):
        out.append(e.name)
    elif isinstance(e, EField):
        out.append(e.var)
    elif isinstance(e, ECount):
        out.append(e.var)


def construction_vars(cp: ConstructionPattern) -> list[str]:
    out: list[str] = []
    _cpvars(cp, out)
    return out


def _cpvars(cp, out: list[str]) -> None:
    if isinstance(cp, CVarRef):
        out.append(cp.name)
    elif isinstance(cp, CObject):
        for _, sub in cp.members:
            _cpvars(sub, out)
    elif isinstance(cp, (CArray, CFlatArray)):
        _cpvars(cp.elem, out)
        if isinstance(cp, CArray) and cp.groupby is not None:
            from .terms import var_set

            out.extend(sorted(var_set(cp.groupby)))
    elif isinstance(cp, COption):
        for b in cp.branches:
            _cpvars(b, out)
    elif isinstance(cp, CFun):
        for a in cp.args:
            _cpvars(a, out)
    elif isinstance(cp, CDistinctRef):
        from .terms import var_set

        out.extend(sorted(var_set(cp.term)))


# ---------------------------------------------------------------------------
# matching-term derivation


def derive_matching_term(p: Union[ValuePattern, KeyValuePattern]) -> Term:
    """The abstract shape of p's match results.

    Variables become variable terms; object, conjunctive, and definitive
    key-value patterns become tuples (textual order, variable-free slots
    dropped); array and enumeration patterns become self-indexed arrays;
    options become option terms.  A pattern binding nothing is the unit tuple.
    """
    if isinstance(p, PVar):
        return Var(p.name)
    if isinstance(p, (PPred, PWild)):
        return UNIT
    if isinstance(p, PObject):
        return tuple_of([derive_matching_term(m) for m in p.members])
    if isinstance(p, PConj):
        return tuple_of([derive_matching_term(s) for s in p.items])
    if isinstance(p, PArray):
        elem = derive_matching_term(p.elem)
        return UNIT if is_unit(elem) else ArrayT(elem, elem)
    if isinstance(p, POption):
        return option_of([derive_matching_term(b) for b in p.branches])
    if isinstance(p, PChildren):
        elem = derive_matching_term(p.member)
        return UNIT if is_unit(elem) else ArrayT(elem, elem)
    if isinstance(p, PDescend):
        elem = derive_matching_term(p.pattern)
        return UNIT if is_unit(elem) else ArrayT(elem, elem)
    if isinstance(p, KVPattern):
        key_part = Var(p.var) if p.var else UNIT
        return tuple_of([key_part, derive_matching_term(p.value)])
    if isinstance(p, KVOption):
        return option_of([derive_matching_term(b) for b in p.branches])
    raise TypeError(f"not a pattern: {p!r}")


def query_matching_term(q: QueryAst) -> Term:
    """Multiple sources combine their terms as one tuple in source order."""
    return tuple_of([derive_matching_term(p) for _, p in q.sources])


def validate_query(q: QueryAst) -> None:
    bound: set[str] = set()
    for _, p in q.sources:
        for name in pattern_vars(p):
            if name in bound:
                raise ReboundVariableError(name)
            bound.add(name)
    for name in construction_vars(q.construct):
        if name not in bound:
            raise UnboundVariableError(name)
    if q.where is not None:
        for name in cond_vars(q.where):
            if name not in bound:
                raise UnboundVariableError(name)


# ---------------------------------------------------------------------------
# unparsing


def _str(s: str) -> str:
    return json.dumps(s)


def _atom_src(a: Atom) -> str:
    from .model import _atom_text

    return _atom_text(a.value)


def unparse_pattern(p: Union[ValuePattern, KeyValuePattern]) -> str:
    if isinstance(p, PVar):
        return f"${p.name}"
    if isinstance(p, PWild):
        return "*"
    if isinstance(p, PPred):
        pred = p.pred
        if isinstance(pred, StringPredicate):
            return _str(pred.pattern)
        if pred.op == "=":
            return _atom_src(pred.literal)
        return f"({pred.op} {_atom_src(pred.literal)})"
    if isinstance(p, PObject):
        return "{" + ", ".join(unparse_pattern(m) for m in p.members) + "}"
    if isinstance(p, PArray):
        return "[" + unparse_pattern(p.elem) + "]"
    if isinstance(p, PConj):
        return "<" + ", ".join(unparse_pattern(s) for s in p.items) + ">"
    if isinstance(p, POption):
        return "(" + "|".join(unparse_pattern(b) for b in p.branches) + ")"
    if isinstance(p, PChildren):
        return "/" + unparse_pattern(p.member)
    if isinstance(p, PDescend):
        return "//" + unparse_pattern(p.pattern)
    if isinstance(p, KVPattern):
        if p.var and p.key:
            head = f"${p.var}{_str(p.key.pattern)}"
        elif p.var:
            head = f"${p.var}"
        elif p.key:
            head = _str(p.key.pattern)
        else:
            head = "*"
        return head + ":" + unparse_pattern(p.value)
    if isinstance(p, KVOption):
        return "|".join(unparse_pattern(b) for b in p.branches)
    raise TypeError(f"not a pattern: {p!r}")


def unparse_expr(e: CondExpr) -> str:
    if isinstance(e, EVar):
        return f"${e.name}"
    if isinstance(e, EField):
        return f"${e.var}" + "".join(f".{_str(k)}" for k in e.keys)
    if isinstance(e, ELit):
        return _atom_src(e.value)
    if isinstance(e, ECount):
        return f"count[${e.var}]"
    raise TypeError(f"not an expression: {e!r}")


def unparse_condition(c: Condition) -> str:
    if isinstance(c, CCompare):
        return f"{unparse_expr(c.lhs)} {c.op} {unparse_expr(c.rhs)}"
    if isinstance(c, CCall):
        return f"{c.name}(" + ", ".join(unparse_expr(a) for a in c.args) + ")"
    if isinstance(c, CQuant):
        return f"({c.kind} ${c.var}; {unparse_condition(c.body)})"
    if isinstance(c, CBool):
        if c.op == "not":
            return f"not({unparse_condition(c.subs[0])})"
        return "(" + f" {c.op} ".join(unparse_condition(s) for s in c.subs) + ")"
    if isinstance(c, CCompound):
        return f"({unparse_condition(c.left)} {c.op} {unparse_condition(c.right)})"
    raise TypeError(f"not a condition: {c!r}")


def unparse_term_expr(t: Term) -> str:
    """Printer for the small term-expression sublanguage usable after
    `groupby` and in distinct references (no index subscripts)."""
    if isinstance(t, Var):
        return f"${t.name}"
    if isinstance(t, TupleT):
        return "(" + ",".join(unparse_term_expr(s) for s in t.items) + ")"
    if isinstance(t, ArrayT):
        return ("^[" if t.flat else "[") + unparse_term_expr(t.elem) + "]"
    if isinstance(t, DistinctT):
        return unparse_term_expr(t.inner) + "%"
    if isinstance(t, OptionT):
        return "(" + "|".join(unparse_term_expr(b) for b in t.branches) + ")"
    raise TypeError(f"not a term expression: {render(t)}")


def unparse_construction(cp: ConstructionPattern) -> str:
    if isinstance(cp, CLit):
        return _atom_src(cp.value)
    if isinstance(cp, CVarRef):
        return f"${cp.name}"
    if isinstance(cp, CObject):
        return "{" + ", ".join(f"{_str(k)}:{unparse_construction(v)}" for k, v in cp.members) + "}"
    if isinstance(cp, CArray):
        body = "[" + unparse_construction(cp.elem) + "]"
        if cp.groupby is not None:
            body += f" groupby {unparse_term_expr(cp.groupby)}"
        if cp.order is not None:
            body += f" {cp.order}"
        return body
    if isinstance(cp, CFlatArray):
        return "^[" + unparse_construction(cp.elem) + "]"
    if isinstance(cp, COption):
        return "(" + "|".join(unparse_construction(b) for b in cp.branches) + ")"
    if isinstance(cp, CFun):
        return f"{cp.name}(" + ", ".join(unparse_construction(a) for a in cp.args) + ")"
    if isinstance(cp, CDistinctRef):
        return unparse_term_expr(cp.term)
    raise TypeError(f"not a construction pattern: {cp!r}")


def unparse_query(q: QueryAst) -> str:
    sources = ", ".join(f'doc({_str(name)}) {unparse_pattern(p)}' for name, p in q.sources)
    text = f"from {sources} construct {unparse_construction(q.construct)}"
    if q.where is not None:
        text += f" where {unparse_condition(q.where)}"
    return text
