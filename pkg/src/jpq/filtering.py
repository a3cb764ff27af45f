"""Where-clause evaluation over match results.

The semantics is support-tuple based: conceptually the result is distributed
over every array and option enclosing the condition's argument variables,
giving flat assignments; the condition is evaluated once per assignment.  An
array element survives when at least one satisfied assignment involves it; an
option branch the condition covers is emptied when no satisfied assignment
selects it.  The satisfied footprints are also recorded as constraints so a
later array distribution only couples combinations some support tuple allows
(joins across sibling arrays).

`par` evaluates its sub-conditions independently against the same result and
merges survivors branchwise; `with` applies its left condition first and the
right one on the already-filtered result.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import Decimal
from typing import Optional, Union

from . import ast as A
from .errors import InvalidCompositionError, TypeError_
from .matching import (
    MArray,
    MatchResult,
    MBind,
    MFailed,
    MOption,
    MTuple,
    MUnit,
    branch_token,
    compare_atoms,
    succeeded,
)
from .model import Atom, EMPTY, Object, Value, get_field
from .rewrite import Constraint
from .terms import (
    ArrayT,
    DistinctT,
    OptionT,
    Path,
    Term,
    TupleT,
    Var,
    children,
    render,
    subterm,
    tuple_of,
    var_set,
)

_MISSING = object()


# ---------------------------------------------------------------------------
# argument terms and composition validation


def _var_paths(t: Term, path: Path = ()) -> dict[str, Path]:
    out: dict[str, Path] = {}
    if isinstance(t, Var):
        out[t.name] = path
    else:
        for i, kid in enumerate(children(t)):
            out.update(_var_paths(kid, path + (i,)))
    return out


def _anchor_path(source: Term, paths: dict[str, Path], var: str) -> Path:
    """Path of the innermost array on the way to `var`: the array a count or
    quantifier over that variable ranges over."""
    if var not in paths:
        raise TypeError_(f"${var} is not bound by the extraction pattern")
    p = paths[var]
    anchor = None
    for cut in range(len(p)):
        if isinstance(subterm(source, p[:cut]), ArrayT):
            anchor = p[:cut]
    if anchor is None:
        raise TypeError_(f"count/quantifier over ${var} needs an array, got a scalar binding")
    return anchor


def _range_vars(c: A.Condition) -> set[str]:
    out: set[str] = set()
    if isinstance(c, A.CQuant):
        out.add(c.var)
        out |= _range_vars(c.body)
    elif isinstance(c, A.CBool):
        for s in c.subs:
            out |= _range_vars(s)
    elif isinstance(c, A.CCompound):
        out |= _range_vars(c.left) | _range_vars(c.right)
    elif isinstance(c, A.CCompare):
        for e in (c.lhs, c.rhs):
            if isinstance(e, A.ECount):
                out.add(e.var)
    elif isinstance(c, A.CCall):
        for e in c.args:
            if isinstance(e, A.ECount):
                out.add(e.var)
    return out


def _check_colocation(c: A.Condition, source: Term) -> None:
    """and/or/not (and single leaves) need all argument variables reachable in
    one support tuple: no two of them may live in different branches of the
    same option."""
    paths = _var_paths(source)
    ranges = _range_vars(c)
    spots: list[tuple[str, Path]] = []
    for v in dict.fromkeys(A.cond_vars(c)):
        if v not in paths:
            raise TypeError_(f"${v} is not bound by the extraction pattern")
        spots.append((v, _anchor_path(source, paths, v) if v in ranges else paths[v]))
    for i in range(len(spots)):
        for j in range(i + 1, len(spots)):
            (u, pu), (w, pw) = spots[i], spots[j]
            k = 0
            while k < len(pu) and k < len(pw) and pu[k] == pw[k]:
                k += 1
            if k < len(pu) and k < len(pw) and isinstance(subterm(source, pu[:k]), OptionT):
                raise InvalidCompositionError(
                    f"${u} and ${w} live in different option branches and never "
                    f"occur in one support tuple; combine the conditions with "
                    f"'par' instead"
                )


def condition_argument_term(c: A.Condition, source: Term) -> Term:
    """The matching term a condition is a predicate over: a tuple of its
    argument variables, with count/quantifier ranges contributing the array
    term itself; par/with keep their two sub-arguments as a pair."""
    if isinstance(c, A.CCompound):
        return TupleT(
            (
                condition_argument_term(c.left, source),
                condition_argument_term(c.right, source),
            )
        )
    _check_colocation(c, source)
    paths = _var_paths(source)
    ranges = _range_vars(c)
    parts: list[Term] = []
    for v in dict.fromkeys(A.cond_vars(c)):
        if v in ranges:
            part: Term = subterm(source, _anchor_path(source, paths, v))
        else:
            part = Var(v)
        if part not in parts:
            parts.append(part)
    return tuple_of(parts)


# ---------------------------------------------------------------------------
# assignment enumeration


@dataclass
class _Assignment:
    env: dict
    tokens: frozenset


@dataclass
class Outcome:
    """Everything one condition's evaluation says about the result."""

    footprints: list[frozenset] = field(default_factory=list)
    groups: list[frozenset] = field(default_factory=list)
    options: list[tuple[frozenset, frozenset]] = field(default_factory=list)

    def constraint(self) -> Constraint:
        return Constraint(
            tuple(self.footprints), tuple(self.groups), tuple(self.options)
        )


class _Enumerator:
    def __init__(self, needed: set[str], anchors: dict[Path, list[str]], collect: Optional[Outcome]):
        self.needed = needed
        self.anchors = anchors
        self.collect = collect
        self.relevant_vars = needed | {v for vs in anchors.values() for v in vs}

    def _relevant(self, t: Term) -> bool:
        return bool(var_set(t) & self.relevant_vars)

    def run(self, t: Term, r: MatchResult, path: Path) -> list[_Assignment]:
        if isinstance(r, MFailed):
            return []
        if isinstance(t, Var):
            if t.name in self.needed:
                if not isinstance(r, MBind):
                    return []
                return [_Assignment({t.name: r.value}, frozenset())]
            return [_Assignment({}, frozenset())]
        if isinstance(t, TupleT):
            assert isinstance(r, MTuple) and len(r.items) == len(t.items)
            combos = [_Assignment({}, frozenset())]
            for i, (st, sr) in enumerate(zip(t.items, r.items)):
                if not self._relevant(st):
                    continue
                subs = self.run(st, sr, path + (i,))
                combos = [
                    _Assignment({**a.env, **b.env}, a.tokens | b.tokens)
                    for a in combos
                    for b in subs
                ]
            return combos
        if isinstance(t, OptionT):
            assert isinstance(r, MOption)
            covered = set()
            out: list[_Assignment] = []
            any_relevant = False
            for i, (bt, br) in enumerate(zip(t.branches, r.branches)):
                if not self._relevant(bt):
                    continue
                any_relevant = True
                tok = branch_token(r, i)
                covered.add(tok)
                if not succeeded(br):
                    continue
                if r.selected is not None and r.selected != i:
                    continue
                for a in self.run(bt, br, path + (i,)):
                    out.append(_Assignment(a.env, a.tokens | {tok}))
            if not any_relevant:
                return [_Assignment({}, frozenset())]
            if self.collect is not None:
                all_toks = frozenset(branch_token(r, i) for i in range(len(r.branches)))
                self.collect.options.append((frozenset(covered), all_toks))
            return out
        if isinstance(t, ArrayT):
            assert isinstance(r, MArray)
            if path in self.anchors:
                env = {("range", v): (t.elem, list(r.items)) for v in self.anchors[path]}
                if self.needed & var_set(t.elem):
                    raise InvalidCompositionError(
                        "an array cannot be both a count/quantifier range and "
                        "an elementwise condition argument in one condition"
                    )
                return [_Assignment(env, frozenset())]
            if not self._relevant(t.elem):
                return [_Assignment({}, frozenset())]
            group = frozenset(item.elem_id for item in r.items)
            if self.collect is not None:
                self.collect.groups.append(group)
            out = []
            for item in r.items:
                for a in self.run(t.elem, item, path + (0,)):
                    out.append(_Assignment(a.env, a.tokens | {item.elem_id}))
            return out
        if isinstance(t, DistinctT):
            return self.run(t.inner, r, path + (0,))
        return [_Assignment({}, frozenset())]


# ---------------------------------------------------------------------------
# condition evaluation over one assignment


def eval_builtin(name: str, args: list) -> bool:
    if name == "notnull":
        (x,) = args
        return x is not _MISSING and not (isinstance(x, Atom) and x == EMPTY)
    if name in ("endWith", "startWith", "contains"):
        a, b = args
        if any(x is _MISSING for x in (a, b)):
            return False
        if not (isinstance(a, Atom) and isinstance(a.value, str)):
            return False
        if not (isinstance(b, Atom) and isinstance(b.value, str)):
            return False
        if name == "endWith":
            return a.value.endswith(b.value)
        if name == "startWith":
            return a.value.startswith(b.value)
        return b.value in a.value
    raise TypeError_(f"unknown function {name!r}")


class _Evaluator:
    def __init__(self, source: Term, paths: dict[str, Path]):
        self.source = source
        self.paths = paths

    def expr(self, e: A.CondExpr, env: dict):
        if isinstance(e, A.ELit):
            return e.value
        if isinstance(e, A.EVar):
            return env.get(e.name, _MISSING)
        if isinstance(e, A.EField):
            v = env.get(e.var, _MISSING)
            for key in e.keys:
                if v is _MISSING or not isinstance(v, Object):
                    return _MISSING
                v = get_field(v, key)
                if v is None:
                    return _MISSING
            return v
        if isinstance(e, A.ECount):
            rng = env.get(("range", e.var), _MISSING)
            if rng is _MISSING:
                raise TypeError_(f"count[${e.var}] applies to arrays only")
            return Atom(Decimal(len(rng[1])))
        raise TypeError_(f"not a condition expression: {e!r}")

    def holds(self, c: A.Condition, env: dict) -> bool:
        if isinstance(c, A.CCompare):
            lhs, rhs = self.expr(c.lhs, env), self.expr(c.rhs, env)
            if lhs is _MISSING or rhs is _MISSING:
                return False
            if isinstance(lhs, Atom) and isinstance(rhs, Atom):
                return compare_atoms(c.op, lhs, rhs)
            if c.op == "=":
                return lhs == rhs
            if c.op == "!=":
                return not (lhs == rhs)
            return False
        if isinstance(c, A.CCall):
            return eval_builtin(c.name, [self.expr(a, env) for a in c.args])
        if isinstance(c, A.CBool):
            if c.op == "and":
                return all(self.holds(s, env) for s in c.subs)
            if c.op == "or":
                return any(self.holds(s, env) for s in c.subs)
            return not self.holds(c.subs[0], env)
        if isinstance(c, A.CQuant):
            rng = env.get(("range", c.var), _MISSING)
            if rng is _MISSING:
                raise TypeError_(
                    f"{c.kind} ${c.var} needs an array binding for ${c.var}"
                )
            elem_t, items = rng
            body_vars = set(A.cond_vars(c.body)) & var_set(elem_t)
            walker = _Enumerator(body_vars, {}, None)
            judged = []
            for item in items:
                subs = walker.run(elem_t, item, ())
                judged.append(
                    any(self.holds(c.body, {**env, **a.env}) for a in subs)
                )
            if c.kind == "foreach":
                return all(judged)
            return any(judged)
        raise TypeError_(f"not a condition: {c!r}")


# ---------------------------------------------------------------------------
# the filter itself


def _flatten_par(c: A.Condition) -> list[A.Condition]:
    if isinstance(c, A.CCompound) and c.op == "par":
        return _flatten_par(c.left) + _flatten_par(c.right)
    if isinstance(c, A.CCompound):
        raise InvalidCompositionError("'with' cannot be nested under 'par'")
    return [c]


def _outcome(r: MatchResult, source: Term, c: A.Condition) -> Outcome:
    _check_colocation(c, source)
    paths = _var_paths(source)
    ranges = _range_vars(c)
    anchors: dict[Path, list[str]] = {}
    for v in ranges:
        anchors.setdefault(_anchor_path(source, paths, v), []).append(v)
    under_anchor = set()
    for v, p in paths.items():
        if any(p[: len(a)] == a and len(p) > len(a) for a in anchors):
            under_anchor.add(v)
    needed = (set(A.cond_vars(c)) - ranges - under_anchor) & set(paths)
    outcome = Outcome()
    walker = _Enumerator(needed, anchors, outcome)
    evaluator = _Evaluator(source, paths)
    for a in walker.run(source, r, ()):
        if evaluator.holds(c, a.env):
            outcome.footprints.append(a.tokens)
    return outcome


def _sweep(r: MatchResult, removed: set, emptied: set) -> MatchResult:
    if isinstance(r, (MBind, MUnit, MFailed)):
        return r
    if isinstance(r, MTuple):
        items = [_sweep(s, removed, emptied) for s in r.items]
        if any(isinstance(s, MFailed) or not succeeded(s) for s in items):
            return MFailed()
        out = MTuple(items)
        out.elem_id = r.elem_id
        return out
    if isinstance(r, MArray):
        items = []
        for item in r.items:
            if item.elem_id in removed:
                continue
            swept = _sweep(item, removed, emptied)
            if not succeeded(swept):
                continue
            swept.elem_id = item.elem_id
            items.append(swept)
        out = MArray(items, r.folded)
        out.elem_id = r.elem_id
        return out
    if isinstance(r, MOption):
        branches = []
        for i, b in enumerate(r.branches):
            if branch_token(r, i) in emptied or not succeeded(b):
                branches.append(MFailed())
            else:
                branches.append(_sweep(b, removed, emptied))
        out = MOption(branches, r.option_id, r.selected, list(r.branch_ids))
        out.elem_id = r.elem_id
        if not succeeded(out):
            return MFailed()
        return out
    raise TypeError_(f"not a result: {r!r}")


def _apply_outcomes(
    r: MatchResult, outcomes: list[Outcome], constraints: list[Constraint]
) -> MatchResult:
    satisfied: set = set()
    grouped: set = set()
    covered: set = set()
    for o in outcomes:
        for fp in o.footprints:
            satisfied |= fp
        for g in o.groups:
            grouped |= g
        for cov, _all in o.options:
            covered |= cov
        constraints.append(o.constraint())
        if not o.footprints and not o.groups and not o.options:
            return MFailed()
    removed = grouped - satisfied
    emptied = covered - satisfied
    return _sweep(r, removed, emptied)


def filter_result(
    r: MatchResult,
    source: Term,
    c: A.Condition,
    constraints: Optional[list[Constraint]] = None,
) -> MatchResult:
    """Filter a match result by a condition, recording join constraints into
    `constraints` for the transform stage."""
    if constraints is None:
        constraints = []
    if not succeeded(r):
        return MFailed()
    if isinstance(c, A.CCompound) and c.op == "with":
        left = filter_result(r, source, c.left, constraints)
        if not succeeded(left):
            return MFailed()
        return filter_result(left, source, c.right, constraints)
    if isinstance(c, A.CCompound) and c.op == "par":
        outcomes = [_outcome(r, source, sub) for sub in _flatten_par(c)]
        return _apply_outcomes(r, outcomes, constraints)
    return _apply_outcomes(r, [_outcome(r, source, c)], constraints)


# ---------------------------------------------------------------------------
# option resolution


def resolve_options(r: MatchResult) -> MatchResult:
    """Collapse every option to its first surviving branch, keeping the
    selected-branch marker; options with no surviving branch fail and
    propagate (array elements drop, tuples fail)."""
    if isinstance(r, (MBind, MUnit, MFailed)):
        return r
    if isinstance(r, MTuple):
        items = [resolve_options(s) for s in r.items]
        if any(not succeeded(s) for s in items):
            return MFailed()
        out = MTuple(items)
        out.elem_id = r.elem_id
        return out
    if isinstance(r, MArray):
        items = []
        for item in r.items:
            res = resolve_options(item)
            if succeeded(res):
                res.elem_id = item.elem_id
                items.append(res)
        out = MArray(items, r.folded)
        out.elem_id = r.elem_id
        return out
    if isinstance(r, MOption):
        branches: list[MatchResult] = []
        selected = None
        for b in r.branches:
            if selected is None and succeeded(b):
                res = resolve_options(b)
                if succeeded(res):
                    selected = len(branches)
                    branches.append(res)
                    continue
            branches.append(MFailed())
        if selected is None:
            return MFailed()
        out = MOption(branches, r.option_id, selected, list(r.branch_ids))
        out.elem_id = r.elem_id
        return out
    raise TypeError_(f"not a result: {r!r}")
