import random
from decimal import Decimal

from jpq import ast as A
from jpq.ast import derive_matching_term
from jpq.matching import (
    MArray,
    MBind,
    MFailed,
    MOption,
    MTuple,
    MUnit,
    Matcher,
    compare_atoms,
    footprint,
    instantiates,
    match_value,
    render_result,
    succeeded,
)
from jpq.model import Atom, Object, parse_document, preorder
from jpq.parser import parse_pattern
from jpq.terms import ArrayT, TupleT, Var

from .generators import _Vars, gen_document, gen_matching_pattern


def bind_values(r):
    """All bound (name, value) pairs, document order, skipping failed branches."""
    out = []

    def walk(x):
        if isinstance(x, MBind):
            out.append((x.name, x.value))
        elif isinstance(x, MTuple):
            for s in x.items:
                walk(s)
        elif isinstance(x, MArray):
            for s in x.items:
                walk(s)
        elif isinstance(x, MOption):
            for b in x.branches:
                if succeeded(b):
                    walk(b)

    walk(r)
    return out


def test_variable_binds_whole_value(univ):
    r = match_value(parse_pattern("$x"), univ)
    assert isinstance(r, MBind) and r.value is univ


def test_object_member_takes_first_matching_pair(univ):
    r = match_value(parse_pattern('{"president":{"ID":$i}}'), univ)
    assert bind_values(r) == [("i", Atom("0001"))]


def test_missing_required_key_fails(univ):
    assert not succeeded(match_value(parse_pattern('{"provost":$x}'), univ))


def test_key_predicate_substring(univ):
    r = match_value(parse_pattern('{$k "?vice?": *}'), univ)
    assert bind_values(r) == [("k", Atom("executive-vice-president"))]


def test_enumeration_collects_in_document_order(univ):
    r = match_value(parse_pattern('/$r "?president?": *'), univ)
    assert isinstance(r, MArray)
    assert [v.value for _, v in bind_values(r)] == [
        "president",
        "executive-vice-president",
        "vice-presidents",
    ]


def test_enumeration_skips_non_matching_pairs(univ):
    r = match_value(parse_pattern('/$r "schools": *'), univ)
    assert [v.value for _, v in bind_values(r)] == ["schools"]


def test_array_pattern_keeps_matching_elements_only(univ):
    r = match_value(parse_pattern('{"schools":[{"name":$n,"dean":{"ID":"0011"}}]}'), univ)
    assert bind_values(r) == [("n", Atom("Computer School"))]


def test_option_records_each_branch(univ):
    p = parse_pattern('{"president": ({"ID":$a} | [$b])}')
    r = match_value(p, univ)
    assert isinstance(r, MOption)
    assert succeeded(r.branches[0]) and not succeeded(r.branches[1])


def test_conjunction_requires_all_parts(univ):
    assert succeeded(match_value(parse_pattern('<$x, {"president":*}>'), univ))
    assert not succeeded(match_value(parse_pattern('<$x, {"provost":*}>'), univ))


def test_comparison_predicates_on_numbers():
    v = parse_document('{"sizes":[1,5,12]}')
    r = match_value(parse_pattern('{"sizes":[<$x, (> 4)>]}'), v)
    assert [b.value for _, b in bind_values(r)] == [Decimal(5), Decimal(12)]


def test_compare_atoms_orders_numbers_and_strings():
    assert compare_atoms("<", Atom(Decimal(2)), Atom(Decimal(10)))
    assert compare_atoms("<", Atom("abc"), Atom("abd"))
    assert compare_atoms("!=", Atom(True), Atom(False))
    assert not compare_atoms("=", Atom("1"), Atom(Decimal(1)))


def test_descendant_matching_follows_preorder():
    for seed in range(100):
        rng = random.Random(seed)
        doc = gen_document(rng)
        r = match_value(A.PDescend(A.PVar("x")), doc)
        got = [v for _, v in bind_values(r)]
        assert got == list(preorder(doc))


def test_descendant_ids_found_everywhere(univ):
    r = match_value(parse_pattern('//{"ID":$i, "email":*}'), univ)
    ids = [b.value for _, b in bind_values(r)]
    assert ids[0] == "0001" and "0014" in ids


def test_match_result_instantiates_derived_term(univ):
    p = parse_pattern('{"schools":[{"name":$n,"faculty":[{"ID":$id}]}]}')
    t = derive_matching_term(p)
    inner = ArrayT(Var("id"), Var("id"))
    assert t == ArrayT(TupleT((Var("n"), inner)), TupleT((Var("n"), inner)))
    assert instantiates(match_value(p, univ), t)


def test_generated_matches_instantiate_their_terms():
    for seed in range(300):
        rng = random.Random(seed)
        doc = gen_document(rng)
        p = gen_matching_pattern(rng, doc, _Vars())
        r = match_value(p, doc)
        assert succeeded(r)
        assert instantiates(r, derive_matching_term(p))


def test_footprint_collects_element_and_branch_tokens():
    item = MBind("x", Atom("v"))
    item.elem_id = 7
    opt = MOption([MUnit(), MFailed()], option_id=3, selected=0)
    tokens = footprint(MTuple([MArray([item]), opt]))
    assert 7 in tokens
    assert ("b", (3, 0)) in tokens


def test_render_result_uses_worked_notation():
    r = MTuple([MBind("r", Atom("president")), MArray([MBind("p", Atom("x"))])])
    assert render_result(r) == '($r -> "president", [$p -> "x"])'


def test_matcher_assigns_distinct_element_ids():
    v = parse_document('{"xs":[1,2,3]}')
    r = Matcher().match_value(parse_pattern('{"xs":[$x]}'), v)
    ids = [item.elem_id for item in r.items]
    assert len(set(ids)) == 3 and None not in ids
