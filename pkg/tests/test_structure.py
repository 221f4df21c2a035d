import pytest

from wreathlin.perm import InvalidDegreeError, enumerate_group
from wreathlin.structure import (
    Cycle,
    Prod,
    Set,
    StructureParseError,
    Trivial,
    Wreath,
    degree,
    format_structure,
    group_of,
    is_transitive,
    param_count,
    parse_structure,
    reassociate_wreaths,
)


def test_parse_primitives():
    assert parse_structure("S(4)") == Set(4)
    assert parse_structure("C(3)") == Cycle(3)
    assert parse_structure("trivial(2)") == Trivial(2)


def test_parse_composites_and_argument_order():
    assert parse_structure("prod(C(4),C(3))") == Prod(outer=Cycle(4), inner=Cycle(3))
    assert parse_structure("wr(S(4),S(3))") == Wreath(inner=Set(4), outer=Set(3))
    nested = parse_structure("wr(wr(S(2),C(2)),C(2))")
    assert nested == Wreath(inner=Wreath(inner=Set(2), outer=Cycle(2)), outer=Cycle(2))


def test_parse_is_whitespace_insensitive():
    assert parse_structure(" wr( S(4) , S(3) ) ") == parse_structure("wr(S(4),S(3))")


@pytest.mark.parametrize(
    "text",
    ["", "garbage(3)", "S()", "S(2", "S(2))", "prod(S(2))", "wr(S(2),S(2),S(2))", "S(x)"],
)
def test_parse_rejects_malformed_input(text):
    with pytest.raises(StructureParseError):
        parse_structure(text)


def test_sizes_must_be_positive():
    with pytest.raises(InvalidDegreeError):
        parse_structure("S(0)")
    with pytest.raises(InvalidDegreeError):
        Cycle(0)


def test_format_round_trips():
    for text in [
        "S(4)",
        "C(6)",
        "trivial(2)",
        "prod(C(4),S(3))",
        "wr(S(4),S(3))",
        "wr(prod(C(2),C(2)),prod(S(2),S(2)))",
        "wr(wr(S(2),C(2)),C(2))",
    ]:
        expr = parse_structure(text)
        assert format_structure(expr) == text
        assert parse_structure(format_structure(expr)) == expr


def test_degree_is_product_of_leaf_sizes():
    assert degree(parse_structure("wr(S(4),S(3))")) == 12
    assert degree(parse_structure("prod(S(3),S(4))")) == 12
    assert degree(parse_structure("wr(wr(S(2),C(2)),C(2))")) == 8
    assert degree(Trivial(5)) == 5


def test_param_count_closed_forms():
    assert param_count(Set(4)) == 2
    assert param_count(Set(1)) == 1
    assert param_count(Cycle(5)) == 5
    assert param_count(Trivial(3)) == 9
    assert param_count(Wreath(inner=Set(4), outer=Set(3))) == 3
    assert param_count(Prod(outer=Set(3), inner=Set(4))) == 4
    assert param_count(Wreath(inner=Wreath(inner=Set(2), outer=Cycle(2)), outer=Cycle(2))) == 4
    assert param_count(parse_structure("wr(prod(C(2),C(2)),prod(S(2),S(2)))")) == 7


def test_group_of_primitives_and_composites():
    assert len(enumerate_group(group_of(Set(3)), limit=100)) == 6
    assert len(enumerate_group(group_of(Wreath(inner=Set(2), outer=Set(3))), limit=100)) == 48
    assert len(enumerate_group(group_of(Prod(outer=Cycle(2), inner=Cycle(2))), limit=100)) == 4


def test_is_transitive():
    assert is_transitive(Set(3))
    assert is_transitive(Cycle(4))
    assert is_transitive(Trivial(1))
    assert not is_transitive(Trivial(2))
    assert is_transitive(parse_structure("wr(S(2),C(3))"))
    assert not is_transitive(Prod(outer=Trivial(2), inner=Set(2)))


def test_reassociate_wreaths_right_normalizes():
    left = parse_structure("wr(wr(S(2),C(2)),C(3))")
    assert reassociate_wreaths(left) == parse_structure("wr(S(2),wr(C(2),C(3)))")
    # already right-associated input is a fixed point
    right = parse_structure("wr(S(2),wr(C(2),C(3)))")
    assert reassociate_wreaths(right) == right
    # rewrites apply inside other constructors too
    mixed = parse_structure("prod(wr(wr(S(2),S(2)),S(2)),C(2))")
    assert reassociate_wreaths(mixed) == parse_structure("prod(wr(S(2),wr(S(2),S(2))),C(2))")


def test_reassociate_preserves_degree_and_count():
    for text in ["wr(wr(S(2),C(2)),C(2))", "wr(wr(C(2),S(3)),S(2))"]:
        expr = parse_structure(text)
        flat = reassociate_wreaths(expr)
        assert degree(flat) == degree(expr)
        assert param_count(flat) == param_count(expr)
