import pytest

from jpq import Engine, DocRegistry, parse_document, parse_query, serialize
from jpq.errors import InvalidCompositionError, UnknownDocumentError

EX1 = (
    'from doc("univ") /$r"?president?":(<$po,{"ID":*}>|[$pa]) '
    'construct {"presidents":[{"role":$r,"info":$po}|^[{"role":$r,"info":$pa}]]}'
)
EX2 = (
    'from doc("univ") {"schools":[{"name":$n,"faculty":[{"ID":$id}]}]} '
    'construct {"faculty":[{"ID":^[$id]%,"schools":[{"name":$n}]}] groupby ^[$id]% asc}'
)
EX3 = (
    'from doc("univ") {"schools":<[{"name":$n1,"faculty":[{"ID":$id1}]}],'
    '[{"name":$n2,"faculty":[{"ID":$id2}]}]>} '
    'construct {"result":[(^[{"school1":$n1,"school2":$n2}])]} '
    "where not ($n1 = $n2) and $id1 = $id2"
)
EX4 = (
    'from doc("univ") {"schools":[<$s,{"faculty":[$f]}>]} '
    'construct "result":[$s] '
    'where count[$f] > 100 or (foreach $f; notnull($f."email"))'
)
EX5 = (
    'from doc("univ") </"?president?":(<$p1,{"ID":$id1}>|[<$p2,{"ID":$id2}>]), '
    '{"schools":[{"name":$n,"faculty":[{"ID":$id3}]}]}> '
    'construct {"results":[^[{"president":$p1,"school":$n}]|'
    '^[^[{"president":$p2,"school":$n}]]]} '
    "where $id1 = $id3 par $id2 = $id3"
)
EX6 = (
    'from doc("univ") {"schools":[{"name":$n,"faculty":[{"email":$m}]}]} '
    'construct {"result":[{"school":$n}]} '
    'where endWith($m, "edu") with count([{$m}]) >= 3'
)


def run(engine, text):
    return serialize(engine.run(parse_query(text)))


def test_roles_merge_objects_and_array_members_into_one_array(engine):
    assert run(engine, EX1) == (
        '{"presidents":['
        '{"role":"president","info":{"ID":"0001","last name":"Li",'
        '"first name":"XH","email":"xxli@123.edu"}},'
        '{"role":"executive-vice-president","info":{"ID":"0002","last name":"Feng",'
        '"firstname":"YM","email":"xxfeng@123.edu"}},'
        '{"role":"vice-presidents","info":{"ID":"0003","surname":"Zhou",'
        '"givenname":"CB","email":"cbzhou@123.edu"}}]}'
    )


def test_grouping_faculty_by_id_ascending(engine):
    assert run(engine, EX2) == (
        '{"faculty":['
        '{"ID":"0001","schools":[{"name":"Computer School"},{"name":"Math School"}]},'
        '{"ID":"0003","schools":[{"name":"Math School"}]},'
        '{"ID":"0012","schools":[{"name":"Computer School"}]},'
        '{"ID":"0013","schools":[{"name":"Computer School"}]},'
        '{"ID":"0014","schools":[{"name":"Math School"}]}]}'
    )


def test_self_join_finds_school_pairs_sharing_a_member(engine):
    assert run(engine, EX3) == (
        '{"result":['
        '{"school1":"Computer School","school2":"Math School"},'
        '{"school1":"Math School","school2":"Computer School"}]}'
    )


def test_quantified_disjunction_keeps_fully_emailed_school(engine):
    out = run(engine, EX4)
    assert out.startswith('{"result":[{"name":"Math School"')
    assert "Computer School" not in out


def test_parallel_branch_conditions_join_presidents_with_schools(engine):
    assert run(engine, EX5) == (
        '{"results":['
        '{"president":{"ID":"0001","last name":"Li","first name":"XH",'
        '"email":"xxli@123.edu"},"school":"Computer School"},'
        '{"president":{"ID":"0001","last name":"Li","first name":"XH",'
        '"email":"xxli@123.edu"},"school":"Math School"},'
        '{"president":{"ID":"0003","surname":"Zhou","givenname":"CB",'
        '"email":"cbzhou@123.edu"},"school":"Math School"}]}'
    )


def test_or_across_option_branches_is_rejected_with_par_hint(engine):
    bad = EX5.replace("par $id2", "or $id2")
    with pytest.raises(InvalidCompositionError) as e:
        engine.run(parse_query(bad))
    assert "par" in str(e.value)


def test_sequential_filtering_counts_only_surviving_members(engine):
    assert run(engine, EX6) == '{"result":[{"school":"Math School"}]}'


def test_filtered_out_everything_builds_the_empty_shape(engine):
    q = parse_query(
        'from doc("univ") {"schools":[{"name":$n}]} '
        'construct {"result":[{"school":$n}],"tag":"x"} where $n = "nope"'
    )
    assert serialize(engine.run(q)) == '{"result":[],"tag":"x"}'


def test_unmatched_pattern_builds_the_empty_shape(engine):
    q = parse_query('from doc("univ") {"provost":$p} construct {"who":$p}')
    assert serialize(engine.run(q)) == '{"who":null}'


def test_multi_document_join():
    reg = DocRegistry()
    reg.register("people", parse_document('{"ps":[{"id":"1","name":"A"},{"id":"2","name":"B"}]}'))
    reg.register("jobs", parse_document('{"js":[{"pid":"2","title":"dean"}]}'))
    e = Engine(reg)
    q = parse_query(
        'from doc("people") {"ps":[{"id":$i,"name":$n}]}, '
        'doc("jobs") {"js":[{"pid":$p,"title":$t}]} '
        'construct {"staff":[(^[{"name":$n,"title":$t}])]} where $i = $p'
    )
    assert serialize(e.run(q)) == '{"staff":[{"name":"B","title":"dean"}]}'


def test_unknown_document_is_reported(engine):
    q = parse_query('from doc("nosuch") $x construct $x')
    with pytest.raises(UnknownDocumentError):
        engine.run(q)


def test_explain_shows_term_backbone_and_route(engine):
    text = engine.explain(parse_query(EX2))
    assert "matching term: [($n,[$id])]" in text
    assert "backbone:" in text
    assert "array-flattening @ 0/1" in text
    assert "array-tpl-folding @ root #1" in text


def test_explain_without_restructuring(engine):
    text = engine.explain(parse_query('from doc("univ") {"president":$p} construct {"p":$p}'))
    assert "(no restructuring needed)" in text
