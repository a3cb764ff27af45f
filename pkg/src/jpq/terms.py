"""The matching-term algebra: the abstract shape of pattern-match results.

A term is a variable, a tuple, an option, an (optionally flattened or folded)
array with an index term, or a distinct term.  The unit tuple `()` stands for
"matched, nothing bound".  Terms are immutable and hashable; route search
memoizes on them directly.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

Path = tuple[int, ...]


class Term:
    __slots__ = ()


@dataclass(frozen=True)
class Var(Term):
    name: str


@dataclass(frozen=True)
class TupleT(Term):
    items: tuple[Term, ...]


@dataclass(frozen=True)
class OptionT(Term):
    branches: tuple[Term, ...]


@dataclass(frozen=True)
class ArrayT(Term):
    elem: Term
    index: Optional[Term]  # None only in construction backbones: "infer me"
    flat: bool = False
    folded: bool = False


@dataclass(frozen=True)
class DistinctT(Term):
    inner: Term


UNIT = TupleT(())


def is_unit(t: Term) -> bool:
    return isinstance(t, TupleT) and not t.items


def tuple_of(items: list[Term]) -> Term:
    """Tuple constructor for derivation: drops unit slots, splices nested
    tuples (conjunctive association is flat), collapses singletons."""
    kept: list[Term] = []
    for t in items:
        if is_unit(t):
            continue
        if isinstance(t, TupleT):
            kept.extend(t.items)
        else:
            kept.append(t)
    if not kept:
        return UNIT
    if len(kept) == 1:
        return kept[0]
    return TupleT(tuple(kept))


def option_of(branches: list[Term]) -> Term:
    """Option constructor; positions are preserved, an all-unit option is unit."""
    if all(is_unit(b) for b in branches):
        return UNIT
    if len(branches) == 1:
        return branches[0]
    return OptionT(tuple(branches))


def var_counts(t: Term) -> Counter:
    c: Counter = Counter()
    _count(t, c)
    return c


def _count(t: Term, c: Counter) -> None:
    if isinstance(t, Var):
        c[t.name] += 1
    elif isinstance(t, TupleT):
        for s in t.items:
            _count(s, c)
    elif isinstance(t, OptionT):
        for s in t.branches:
            _count(s, c)
    elif isinstance(t, ArrayT):
        _count(t.elem, c)
    elif isinstance(t, DistinctT):
        _count(t.inner, c)


def var_set(t: Term) -> set[str]:
    return set(var_counts(t))


def children(t: Term) -> tuple[Term, ...]:
    if isinstance(t, TupleT):
        return t.items
    if isinstance(t, OptionT):
        return t.branches
    if isinstance(t, ArrayT):
        return (t.elem,)
    if isinstance(t, DistinctT):
        return (t.inner,)
    return ()


def with_children(t: Term, kids: tuple[Term, ...]) -> Term:
    if isinstance(t, TupleT):
        return TupleT(kids)
    if isinstance(t, OptionT):
        return OptionT(kids)
    if isinstance(t, ArrayT):
        return ArrayT(kids[0], t.index, t.flat, t.folded)
    if isinstance(t, DistinctT):
        return DistinctT(kids[0])
    raise ValueError(f"term {t!r} has no children")


def subterm(t: Term, path: Path) -> Term:
    for step in path:
        kids = children(t)
        if step >= len(kids):
            raise IndexError(f"path step {step} out of range in {render(t)}")
        t = kids[step]
    return t


def replace(t: Term, path: Path, new: Term) -> Term:
    if not path:
        return new
    kids = list(children(t))
    kids[path[0]] = replace(kids[path[0]], path[1:], new)
    return with_children(t, tuple(kids))


def positions(t: Term) -> list[Path]:
    """All node paths, preorder."""
    out: list[Path] = [()]
    for i, kid in enumerate(children(t)):
        out.extend(((i,) + p) for p in positions(kid))
    return out


def render(t: Term) -> str:
    """Human notation: ($a,$b), $a|$b, [t]_i, ^[t]_i, t%."""
    if isinstance(t, Var):
        return f"${t.name}"
    if isinstance(t, TupleT):
        return "(" + ",".join(render(s) for s in t.items) + ")"
    if isinstance(t, OptionT):
        return "(" + "|".join(render(s) for s in t.branches) + ")"
    if isinstance(t, ArrayT):
        head = "^[" if t.flat else "["
        body = head + render(t.elem) + "]"
        if t.index is None:
            return body
        if t.index == t.elem:
            return body  # self-indexed; subscript adds nothing
        return body + "_" + render(t.index)
    if isinstance(t, DistinctT):
        return render(t.inner) + "%"
    raise ValueError(f"not a term: {t!r}")


def project(t: Term, keep: set[str]) -> Term:
    """Drop subterms binding none of `keep`; tuples collapse, arrays with a
    variable-free element disappear.  Used to align an extraction term with a
    construction backbone that does not mention every extracted variable."""
    if isinstance(t, Var):
        return t if t.name in keep else UNIT
    if isinstance(t, TupleT):
        return tuple_of([project(s, keep) for s in t.items])
    if isinstance(t, OptionT):
        projected = [project(b, keep) for b in t.branches]
        if all(is_unit(b) for b in projected):
            return UNIT
        return OptionT(tuple(projected))
    if isinstance(t, ArrayT):
        elem = project(t.elem, keep)
        if is_unit(elem):
            return UNIT
        index = t.index if t.index is None else project(t.index, keep)
        if index is not None and is_unit(index):
            index = elem
        return ArrayT(elem, index, t.flat, t.folded)
    if isinstance(t, DistinctT):
        inner = project(t.inner, keep)
        return UNIT if is_unit(inner) else DistinctT(inner)
    raise ValueError(f"not a term: {t!r}")


def strip_component(t: Term, component: Term) -> Term:
    """Remove direct occurrences of `component` from a tuple term (collapsing).
    Used to compare folded-class member terms against construction backbones
    that hide the grouping key inside the classes."""
    if t == component:
        return UNIT
    if isinstance(t, TupleT):
        return tuple_of([s for s in t.items if s != component])
    return t


def terms_match(state: Term, target: Term) -> bool:
    """Equality modulo target-side conveniences: a None index in the target
    matches any index, and a folded class in the target may omit the grouping
    key from its member term."""
    if isinstance(target, ArrayT):
        if not isinstance(state, ArrayT):
            return False
        if state.flat != target.flat or state.folded != target.folded:
            return False
        if target.index is not None and not terms_match(state.index, target.index):
            return False
        if state.folded:
            return _folded_elems_match(state.elem, target.elem)
        return terms_match(state.elem, target.elem)
    if isinstance(target, TupleT):
        return (
            isinstance(state, TupleT)
            and len(state.items) == len(target.items)
            and all(terms_match(s, g) for s, g in zip(state.items, target.items))
        )
    if isinstance(target, OptionT):
        return (
            isinstance(state, OptionT)
            and len(state.branches) == len(target.branches)
            and all(terms_match(s, g) for s, g in zip(state.branches, target.branches))
        )
    if isinstance(target, DistinctT):
        return isinstance(state, DistinctT) and terms_match(state.inner, target.inner)
    return state == target


def _folded_elems_match(state_elem: Term, target_elem: Term) -> bool:
    # both should be (class-array, key%)
    if not (
        isinstance(state_elem, TupleT)
        and len(state_elem.items) == 2
        and isinstance(target_elem, TupleT)
        and len(target_elem.items) == 2
    ):
        return terms_match(state_elem, target_elem)
    s_arr, s_key = state_elem.items
    g_arr, g_key = target_elem.items
    if not terms_match(s_key, g_key):
        return False
    if not (isinstance(s_arr, ArrayT) and isinstance(g_arr, ArrayT)):
        return False
    if g_arr.index is not None and not terms_match(s_arr.index, g_arr.index):
        return False
    if terms_match(s_arr.elem, g_arr.elem):
        return True
    # target may hide the key term inside the class members
    key_inner = s_key.inner if isinstance(s_key, DistinctT) else s_key
    return terms_match(strip_component(s_arr.elem, key_inner), g_arr.elem)
