import random

import pytest

from jpq.ast import derive_matching_term
from jpq.errors import InvalidCompositionError, TypeError_
from jpq.filtering import (
    condition_argument_term,
    eval_builtin,
    filter_result,
    resolve_options,
)
from jpq.matching import (
    MArray,
    MBind,
    MOption,
    MTuple,
    match_value,
    succeeded,
)
from jpq.model import Atom, get_field, parse_document, serialize
from jpq.parser import parse_condition, parse_pattern
from jpq.terms import render

SCHOOLS = '{"schools":[{"name":$n,"faculty":[{"ID":$id}]}]}'


def filtered(pattern, cond, doc, constraints=None):
    p = parse_pattern(pattern)
    source = derive_matching_term(p)
    r = match_value(p, doc)
    return filter_result(r, source, parse_condition(cond), constraints)


def binds(r):
    out = []

    def walk(x):
        if isinstance(x, MBind):
            out.append((x.name, x.value))
        elif isinstance(x, (MTuple, MArray)):
            for s in x.items:
                walk(s)
        elif isinstance(x, MOption):
            for b in x.branches:
                if succeeded(b):
                    walk(b)

    walk(r)
    return out


def school_view(r):
    """[(name, [ids])] as plain strings, one entry per surviving school."""
    out = []
    for school in r.items:
        name, faculty = school.items
        out.append((name.value.value, [m.value.value for m in faculty.items]))
    return out


def test_equality_prunes_members_and_their_schools(univ):
    r = filtered(SCHOOLS, '$id = "0003"', univ)
    assert school_view(r) == [("Math School", ["0003"])]


def test_inequality_keeps_every_school(univ):
    r = filtered(SCHOOLS, '$id != "0001"', univ)
    assert school_view(r) == [
        ("Computer School", ["0012", "0013"]),
        ("Math School", ["0003", "0014"]),
    ]


def test_condition_on_outer_variable_keeps_members_intact(univ):
    r = filtered(SCHOOLS, '$n = "Math School"', univ)
    assert school_view(r) == [("Math School", ["0001", "0003", "0014"])]


def test_field_access_reaches_into_bound_objects(univ):
    p = '{"schools":[{"name":$n,"faculty":[$f]}]}'
    r = filtered(p, 'notnull($f."email")', univ)
    names = [school.items[0].value.value for school in r.items]
    sizes = [len(school.items[1].items) for school in r.items]
    assert names == ["Computer School", "Math School"]
    assert sizes == [2, 3]  # the member without an email drops out


def test_string_builtins():
    a, b = Atom("xxli@123.edu"), Atom("123.edu")
    assert eval_builtin("endWith", [a, b])
    assert not eval_builtin("startWith", [a, b])
    assert eval_builtin("contains", [a, Atom("@")])
    assert eval_builtin("notnull", [a])
    assert not eval_builtin("notnull", [Atom(None)])
    with pytest.raises(TypeError_):
        eval_builtin("frobnicate", [a])


def test_builtin_condition_filters_elements(univ):
    p = '{"schools":[{"faculty":[{"email":$e}]}]}'
    r = filtered(p, 'endWith($e, "math.123.edu")', univ)
    emails = [b.value for _, b in binds(r)]
    assert emails == ["xxli@math.123.edu", "cbzhou@math.123.edu", "zhao@math.123.edu"]


def test_count_ranges_over_the_innermost_array(univ):
    p = '{"schools":[{"name":$n,"faculty":[{"ID":$id,"email":*}]}]}'
    r = filtered(p, "count[$id] > 2", univ)
    # only Math School has more than two members with an email
    assert school_view(r) == [("Math School", ["0001", "0003", "0014"])]


def test_count_over_outer_array_counts_schools(univ):
    r = filtered(SCHOOLS, "count[$n] = 2", univ)
    assert len(r.items) == 2
    assert not succeeded(filtered(SCHOOLS, "count[$n] > 2", univ))


def test_count_of_scalar_binding_is_an_error(univ):
    with pytest.raises(TypeError_):
        filtered('{"president":{"ID":$i}}', "count[$i] > 0", univ)


def test_unbound_condition_variable_is_an_error(univ):
    with pytest.raises(TypeError_):
        filtered(SCHOOLS, '$ghost = "x"', univ)


def test_foreach_is_vacuously_true_on_empty_ranges():
    doc = parse_document('{"xs":[{"k":"a","ys":[]},{"k":"b","ys":[1,2]}]}')
    p = '{"xs":[{"k":$k,"ys":[$y]}]}'
    r = filtered(p, "foreach $y; $y > 1", doc)
    # "a" has no elements (holds vacuously); "b" has y=1 (fails)
    assert [b.value for n, b in binds(r) if n == "k"] == ["a"]


def test_forsome_needs_a_witness():
    doc = parse_document('{"xs":[{"k":"a","ys":[]},{"k":"b","ys":[1,2]}]}')
    p = '{"xs":[{"k":$k,"ys":[$y]}]}'
    r = filtered(p, "forsome $y; $y > 1", doc)
    assert [b.value for n, b in binds(r) if n == "k"] == ["b"]


def test_quantifier_range_annotation_must_repeat_the_variable(univ):
    r = filtered(SCHOOLS, 'forsome $id in [$id]; $id = "0012"', univ)
    assert school_view(r) == [("Computer School", ["0001", "0012", "0013"])]


def test_par_merges_independent_survivor_sets(univ):
    left, right = '$id = "0012"', '$id = "0014"'
    both = filtered(SCHOOLS, f"{left} par {right}", univ)
    # oracle: each side filtered alone, survivors merged branchwise
    alone_l = {repr(b) for b in binds(filtered(SCHOOLS, left, univ))}
    alone_r = {repr(b) for b in binds(filtered(SCHOOLS, right, univ))}
    assert {repr(b) for b in binds(both)} == alone_l | alone_r
    assert school_view(both) == [
        ("Computer School", ["0012"]),
        ("Math School", ["0014"]),
    ]


def test_par_sides_filter_only_the_arrays_they_mention(univ):
    # the right side never mentions $id, so it rescues the school element but
    # does not endorse any of its members
    both = filtered(SCHOOLS, '$id = "0012" par $n = "Math School"', univ)
    assert school_view(both) == [
        ("Computer School", ["0012"]),
        ("Math School", []),
    ]


def test_par_side_with_no_matches_contributes_nothing(univ):
    r = filtered(SCHOOLS, '$id = "0012" par $id = "9999"', univ)
    assert school_view(r) == [("Computer School", ["0012"])]


def test_failing_scalar_condition_fails_the_whole_result(univ):
    r = filtered('{"president":{"ID":$i}}', '$i = "9999"', univ)
    assert not succeeded(r)


def test_with_applies_conditions_in_order(univ):
    first_then_count = filtered(SCHOOLS, '$id != "0001" with count[$id] > 2', univ)
    count_then_first = filtered(SCHOOLS, 'count[$id] > 2 with $id != "0001"', univ)
    assert school_view(first_then_count) == []
    assert school_view(count_then_first) == [
        ("Computer School", ["0012", "0013"]),
        ("Math School", ["0003", "0014"]),
    ]


def test_or_across_option_branches_suggests_par(univ):
    p = '{"president":({"ID":$a}|{"email":$b})}'
    with pytest.raises(InvalidCompositionError) as e:
        filtered(p, '$a = "0001" or $b = "none"', univ)
    assert "par" in str(e.value)


def test_or_within_one_branch_is_fine(univ):
    r = filtered(SCHOOLS, '$id = "0012" or $id = "0013"', univ)
    assert school_view(r) == [("Computer School", ["0012", "0013"])]


def test_condition_argument_term_pairs_compound_sides(univ):
    p = parse_pattern(SCHOOLS)
    source = derive_matching_term(p)
    t = condition_argument_term(parse_condition('count[$id] > 1 par $n = "x"'), source)
    assert render(t) == "([$id],$n)"  # the self-indexed member array, then $n
    t2 = condition_argument_term(parse_condition('$id = "0012" par $n = "x"'), source)
    assert render(t2) == "($id,$n)"


def test_filter_empties_unsatisfied_option_branch(univ):
    p = '{"president":({"email":$a}|{"ID":$b})}'
    r = filtered(p, '$a = "nope"', univ)
    assert succeeded(r)  # the $b branch is untouched
    resolved = resolve_options(r)
    assert resolved.selected == 1
    assert binds(resolved) == [("b", Atom("0001"))]


def test_resolve_options_prefers_the_first_surviving_branch(univ):
    p = '{"president":({"email":$a}|{"ID":$b})}'
    r = resolve_options(match_value(parse_pattern(p), univ))
    assert r.selected == 0
    assert binds(r) == [("a", Atom("xxli@123.edu"))]


# -- oracle: nested-loop evaluation over flat assignments ---------------------


def gen_nested_doc(rng):
    letters = "abc"
    xs = []
    for _ in range(rng.randint(0, 4)):
        k = rng.choice(letters)
        ys = [rng.choice(letters) for _ in range(rng.randint(0, 4))]
        xs.append({"k": k, "ys": ys})
    import json

    return parse_document(json.dumps({"xs": xs}))


def oracle_filter(doc, holds):
    """Nested-loop reference: keep each x with some satisfying y, and within
    it each satisfying y."""
    out = []
    for x in get_field(doc, "xs").items:
        k = get_field(x, "k").value
        ys = [y.value for y in get_field(x, "ys").items if holds(k, y.value)]
        if ys:
            out.append((k, ys))
    return out


@pytest.mark.parametrize(
    "cond,holds",
    [
        ('$k = $y', lambda k, y: k == y),
        ('$k != $y', lambda k, y: k != y),
        ('$y = "a" or $k = "c"', lambda k, y: y == "a" or k == "c"),
        ('$y = "a" and not $k = "a"', lambda k, y: y == "a" and k != "a"),
    ],
)
def test_filtering_agrees_with_nested_loop_oracle(cond, holds):
    p = '{"xs":[{"k":$k,"ys":[$y]}]}'
    c = parse_condition(cond)
    pattern = parse_pattern(p)
    source = derive_matching_term(pattern)
    for seed in range(150):
        rng = random.Random(seed)
        doc = gen_nested_doc(rng)
        r = filter_result(match_value(pattern, doc), source, c)
        expected = oracle_filter(doc, holds)
        if not expected:
            assert not succeeded(r) or not r.items
            continue
        got = [
            (x.items[0].value.value, [y.value.value for y in x.items[1].items])
            for x in r.items
        ]
        assert got == expected, serialize(doc)
