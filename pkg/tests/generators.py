"""Seeded random generators for documents, patterns, terms and results.

Everything takes an explicit `random.Random` so test runs are reproducible;
property suites iterate with numbered seeds.
"""

from __future__ import annotations

import random
import string
from decimal import Decimal

from jpq import ast as A
from jpq.matching import MArray, MBind, MFailed, MOption, MTuple, MUnit
from jpq.model import Array, Atom, Object
from jpq.terms import ArrayT, TupleT, Var

KEYS = ["id", "name", "tags", "meta", "size", "note", "kind", "data"]
WORDS = ["alpha", "beta", "gamma", "delta", "x", "", "edu", "a b", 'q"t', "\\n"]


def gen_atom(rng: random.Random) -> Atom:
    pick = rng.randrange(5)
    if pick == 0:
        return Atom(rng.choice(WORDS))
    if pick == 1:
        return Atom(Decimal(rng.randint(-1000, 1000)))
    if pick == 2:
        return Atom(Decimal(rng.randint(-9999, 9999)) / Decimal(100))
    if pick == 3:
        return Atom(rng.choice([True, False]))
    return Atom(None)


def gen_value(rng: random.Random, depth: int = 3):
    if depth <= 0 or rng.random() < 0.4:
        return gen_atom(rng)
    if rng.random() < 0.5:
        return Array([gen_value(rng, depth - 1) for _ in range(rng.randrange(4))])
    keys = rng.sample(KEYS, rng.randrange(1, 4))
    return Object([(k, gen_value(rng, depth - 1)) for k in keys])


def gen_document(rng: random.Random):
    """A root object, as parse_document requires."""
    keys = rng.sample(KEYS, rng.randrange(1, 5))
    return Object([(k, gen_value(rng, 3)) for k in keys])


# -- patterns guaranteed to match a given value -------------------------------


class _Vars:
    def __init__(self):
        self.n = 0

    def fresh(self) -> str:
        self.n += 1
        return f"v{self.n}"


def gen_matching_pattern(rng: random.Random, value, vars_: _Vars | None = None, depth: int = 3):
    """A value pattern that is certain to match `value`, binding at least
    whatever variables it introduces."""
    vars_ = vars_ or _Vars()
    pick = rng.random()
    if depth <= 0 or pick < 0.3:
        return A.PVar(vars_.fresh())
    if pick < 0.4:
        return A.PWild()
    if isinstance(value, Object) and value.pairs and pick < 0.8:
        chosen = rng.sample(value.pairs, rng.randrange(1, min(2, len(value.pairs)) + 1))
        members = []
        for key, sub in chosen:
            var = vars_.fresh() if rng.random() < 0.3 else None
            members.append(
                A.KVPattern(
                    var,
                    A.StringPredicate(key),
                    gen_matching_pattern(rng, sub, vars_, depth - 1),
                )
            )
        return A.PObject(tuple(members))
    if isinstance(value, Array) and pick < 0.8:
        # element pattern built from the first element still matches a subset
        elem = value.items[0] if value.items else None
        if elem is None:
            return A.PArray(A.PVar(vars_.fresh()))
        return A.PArray(gen_matching_pattern(rng, elem, vars_, depth - 1))
    if isinstance(value, Atom) and isinstance(value.value, str) and pick < 0.7:
        if "?" not in value.value:
            return A.PPred(A.StringPredicate(value.value))
        return A.PVar(vars_.fresh())
    if pick < 0.9:
        # matching branch first; the second is a fresh binder and also matches
        return A.POption(
            (
                gen_matching_pattern(rng, value, vars_, depth - 1),
                A.PVar(vars_.fresh()),
            )
        )
    return A.PConj(
        (
            gen_matching_pattern(rng, value, vars_, depth - 1),
            gen_matching_pattern(rng, value, vars_, depth - 1),
        )
    )


# -- terms and conforming results --------------------------------------------


def gen_term(rng: random.Random, names: list[str], depth: int = 3):
    """A matching term over fresh picks from `names`; arrays self-indexed."""
    if depth <= 0 or (rng.random() < 0.35 and names):
        return Var(rng.choice(names))
    pick = rng.randrange(3)
    if pick == 0:
        return TupleT((gen_term(rng, names, depth - 1), gen_term(rng, names, depth - 1)))
    if pick == 1:
        elem = gen_term(rng, names, depth - 1)
        return ArrayT(elem, elem)
    from jpq.terms import OptionT

    return OptionT((gen_term(rng, names, depth - 1), gen_term(rng, names, depth - 1)))


class ResultBuilder:
    """Builds a random MatchResult conforming to a term."""

    def __init__(self, rng: random.Random):
        self.rng = rng
        self._next = iter(range(1, 10**9))

    def fresh_id(self):
        return next(self._next)

    def build(self, t, max_items: int = 3):
        from jpq.terms import DistinctT, OptionT

        if isinstance(t, Var):
            return MBind(t.name, gen_atom(self.rng))
        if isinstance(t, TupleT):
            if not t.items:
                return MUnit()
            return MTuple([self.build(s, max_items) for s in t.items])
        if isinstance(t, OptionT):
            take = self.rng.randrange(len(t.branches))
            branches = [
                self.build(b, max_items) if i == take else MFailed()
                for i, b in enumerate(t.branches)
            ]
            return MOption(branches, self.fresh_id())
        if isinstance(t, ArrayT):
            items = []
            for _ in range(self.rng.randrange(max_items + 1)):
                item = self.build(t.elem, max_items)
                item.elem_id = self.fresh_id()
                items.append(item)
            return MArray(items, t.folded)
        if isinstance(t, DistinctT):
            return self.build(t.inner, max_items)
        raise TypeError(f"no result builder for {t!r}")


def gen_name(rng: random.Random, n: int = 6) -> str:
    return "".join(rng.choice(string.ascii_lowercase) for _ in range(n))
