"""Tests for the `.db` dialect: parsing, invariants, validation and signatures."""
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from src.errors import InvariantSyntaxError, SchemaSyntaxError
from src.schema import Catalog, SqlType, load_db_file, output_signature, parse_db_file, parse_invariant, serialize, validate_schema
from src.schema.invariant import All, And, ColumnRef, Constant, Is, Or, Pred, Uid, default_invariant, to_text
from src.schema.validator import foreign_key_cycles

from tests.conftest import BUNDLE

FRIENDS_DB = """
TABLE posts (
    id KEY,
    owner OWNER,
    body TEXT
);

TABLE friends (
    id KEY,
    owner OWNER,
    friend VARCHAR(20)
);

OUTPUT TABLE wall = SELECT id AS key, owner, body FROM posts
    INVARIANT is(owner, @uid) OR friends(owner, @uid);
"""


def messages(diagnostics):
    return " | ".join(d.message for d in diagnostics)


def test_demo_schemas_parse_and_validate():
    catalog = Catalog()
    for name in ("Groups", "Messaging", "LiveSearch"):
        decl = load_db_file(BUNDLE / name / f"{name}.db")
        assert decl.funit == name
        assert validate_schema(decl, catalog) == []
        catalog.add(decl)

    groups = catalog.get("Groups")
    assert [t.name for t in groups.locals] == ["groups", "memberships"]
    assert groups.local("memberships").foreign_keys[0].parent_table == "groups"
    assert groups.output("all_groups").invariant == All()
    live = catalog.get("LiveSearch")
    assert live.input("data").key_column == "key"
    assert live.local("bookmarks").foreign_keys[0].parent_table == "data"


def test_output_without_invariant_gets_the_owner_default():
    decl = parse_db_file("TABLE t (id KEY, owner OWNER)\nOUTPUT TABLE o = SELECT id AS key, owner FROM t", "A")
    assert decl.output("o").invariant == default_invariant()


def test_parenthesized_output_syntax():
    decl = parse_db_file("TABLE t (id KEY, owner OWNER);\nOUTPUT TABLE o (SELECT id AS key, owner FROM t INVARIANT ALL);", "A")
    assert decl.output("o").query == "SELECT id AS key, owner FROM t"
    assert decl.output("o").invariant == All()


def test_column_types():
    decl = parse_db_file(FRIENDS_DB, "Wall")
    friends = decl.local("friends")
    assert friends.column("friend").type == SqlType("VARCHAR", 20)
    assert friends.key_column == "id" and friends.owner_column == "owner"
    assert [c.name for c in friends.data_columns] == ["owner", "friend"]


@pytest.mark.parametrize("text, fragment", [
    ("TABLE t (id KEY, owner OWNER, x FLOAT)", "unknown column type 'FLOAT'"),
    ("TABLE t (id KEY, owner OWNER, x VARCHAR)", "VARCHAR needs a length"),
    ("TABLE t (id KEY, owner OWNER, x INT(3))", "takes no length"),
    ("TABLE t (owner OWNER, x INT)", "exactly one KEY column, found 0"),
    ("TABLE t (id KEY, a OWNER, b OWNER)", "exactly one OWNER column, found 2"),
    ("TABLE t (id KEY, owner OWNER, x INT, X TEXT)", "duplicate column"),
    ("TABLE t (id KEY, owner OWNER)\nTABLE T (id KEY, owner OWNER)", "duplicate table"),
    ("INPUT TABLE t (key KEY, owner OWNER, FOREIGN KEY (owner) REFERENCES u(id))", "cannot declare foreign keys"),
])
def test_declaration_errors(text, fragment):
    with pytest.raises(SchemaSyntaxError) as info:
        parse_db_file(text, "A")
    assert fragment in str(info.value)


def test_syntax_errors_carry_a_position():
    with pytest.raises(SchemaSyntaxError) as info:
        parse_db_file("TABLE t (\n    id KEY,\n    owner OWNER ?\n);", "A")
    assert info.value.line == 3
    assert info.value.column > 0


def test_invariant_precedence():
    parsed = parse_invariant("is(owner, @uid) OR friends(owner, @uid) AND !ignores(@uid, owner)")
    assert parsed == Or(
        Is(ColumnRef("owner"), Uid()),
        And(
            Pred("friends", (ColumnRef("owner"), Uid())),
            Pred("ignores", (Uid(), ColumnRef("owner")), negated=True),
        ),
    )


def test_invariant_constants_and_lowercase_connectives():
    parsed = parse_invariant("is(type, 'it''s') and (is(n, -3) or ALL)")
    assert parsed == And(Is(ColumnRef("type"), Constant("it's")), Or(Is(ColumnRef("n"), Constant(-3)), All()))


@pytest.mark.parametrize("text", ["!is(owner, @uid)", "is(owner)", "is(owner, @uid) OR", "friends(owner"])
def test_invalid_invariants(text):
    with pytest.raises(InvariantSyntaxError):
        parse_invariant(text)


args = st.one_of(
    st.just(Uid()),
    st.sampled_from(["owner", "to", "peer"]).map(ColumnRef),
    st.integers(min_value=-50, max_value=50).map(Constant),
    st.text(alphabet="ab '", max_size=4).map(Constant),
)
leaves = st.one_of(
    st.just(All()),
    st.builds(Is, args, args),
    st.builds(Pred, st.sampled_from(["friends", "ignores"]), st.lists(args, max_size=3).map(tuple), st.booleans()),
)
invariants = st.recursive(leaves, lambda inner: st.one_of(st.builds(And, inner, inner), st.builds(Or, inner, inner)),
                          max_leaves=8)


@settings(max_examples=200)
@given(invariants)
def test_invariant_text_parses_back(inv):
    assert parse_invariant(to_text(inv)) == inv


def test_serialized_declaration_parses_back():
    decl = parse_db_file(FRIENDS_DB, "Wall")
    assert parse_db_file(serialize(decl), "Wall") == decl


def test_boundary_violation_is_reported():
    catalog = Catalog([load_db_file(BUNDLE / "Groups" / "Groups.db")])
    spy = parse_db_file("TABLE t (id KEY, owner OWNER)\nOUTPUT TABLE leak = SELECT gid AS key, owner FROM groups", "Spy")
    diagnostics = validate_schema(spy, catalog)
    assert "references 'groups' outside Spy (declared by Groups)" in messages(diagnostics)
    assert all(d.line == 2 for d in diagnostics)


@pytest.mark.parametrize("text, fragment", [
    ("TABLE t (id KEY, owner OWNER)\nOUTPUT TABLE o = SELECT id, owner FROM t", "must project a column aliased 'key'"),
    ("TABLE t (id KEY, owner OWNER)\nOUTPUT TABLE o = SELECT id AS key, owner FROM t INVARIANT is(to, @uid)",
     "unresolved column 'to'"),
    ("TABLE t (id KEY, owner OWNER)\nOUTPUT TABLE o = SELECT * FROM t", "projection must name its columns"),
    ("TABLE t (id KEY, owner OWNER)\nOUTPUT TABLE o = SELECT id AS key, owner FROM t INVARIANT t(owner, owner, owner)",
     "takes 1 arguments, got 3"),
    ("TABLE t (id KEY, owner OWNER)\nOUTPUT TABLE o = SELECT id AS key, owner FROM t INVARIANT nope(owner)",
     "unknown predicate table 'nope'"),
    ("TABLE t (id KEY, owner OWNER, src TEXT)", "reserved"),
    ("TABLE t (id KEY, owner OWNER)\nOUTPUT TABLE o = SELECT id AS key, owner FROM t\n"
     "OUTPUT TABLE p = SELECT owner AS key, owner FROM o", "reads output table 'o'"),
    ("TABLE a (id KEY, owner OWNER, b INT, FOREIGN KEY (b) REFERENCES b(id))\n"
     "TABLE b (id KEY, owner OWNER, a INT, FOREIGN KEY (a) REFERENCES a(id))", "foreign keys form a cycle"),
    ("TABLE a (id KEY, owner OWNER, x INT, FOREIGN KEY (x) REFERENCES b(id))", "unknown table 'b'"),
])
def test_validation_diagnostics(text, fragment):
    assert fragment in messages(validate_schema(parse_db_file(text, "A"), Catalog()))


def test_self_reference_is_a_cycle():
    decl = parse_db_file("TABLE a (id KEY, owner OWNER, up INT, FOREIGN KEY (up) REFERENCES a(id))", "A")
    assert foreign_key_cycles(decl)


def test_output_signature_keeps_markers_and_aliases():
    decl = load_db_file(BUNDLE / "Messaging" / "Messaging.db")
    catalog = Catalog([decl])
    signature = output_signature(decl.output("private_msgs"), catalog, "Messaging")
    assert signature == [
        ("key", SqlType("KEY")),
        ("msg", SqlType("TEXT")),
        ("owner", SqlType("OWNER")),
        ("to", SqlType("VARCHAR", 64)),
    ]


GROUPS_LISTING = """
TABLE groups (
    gid     KEY
    owner   OWNER
    name    VARCHAR(64)
    public  INT )

OUTPUT TABLE all_groups =
  SELECT gid AS key, owner, name
  FROM   groups
  WHERE  public=1

INPUT TABLE stats (
  key    KEY
  owner  OWNER
  type   TINYTEXT )
"""


def test_side_by_side_listing_without_commas_or_semicolons():
    decl = parse_db_file(GROUPS_LISTING, "Groups")
    assert validate_schema(decl, Catalog()) == []

    stats = decl.input("stats")
    assert [(c.name, str(c.type)) for c in stats.columns] == [("key", "KEY"), ("owner", "OWNER"), ("type", "TINYTEXT")]
    assert decl.local("groups").column("public").type == SqlType("INT")

    output = decl.output("all_groups")
    assert output.query.split() == ["SELECT", "gid", "AS", "key,", "owner,", "name", "FROM", "groups", "WHERE", "public=1"]
    assert output.invariant == default_invariant()
    signature = output_signature(output, Catalog([decl]), "Groups")
    assert signature == [("key", SqlType("KEY")), ("owner", SqlType("OWNER")), ("name", SqlType("VARCHAR", 64))]


def test_friendship_listing():
    decl = parse_db_file(
        "TABLE friends (\n    fid KEY\n    uid1 OWNER\n    uid2 VARCHAR(20) )\n\n"
        "OUTPUT TABLE friends_o (\n"
        "  SELECT    CONCAT(uid1,uid2) AS key,  uid1 AS owner,  uid2 AS friend\n"
        "  FROM      friends\n"
        "  INVARIANT is(@uid,owner) OR is(@uid,friend) )",
        "Social",
    )
    assert validate_schema(decl, Catalog()) == []
    output = decl.output("friends_o")
    assert output.query.split()[-2:] == ["FROM", "friends"]
    assert output.invariant == Or(Is(Uid(), ColumnRef("owner")), Is(Uid(), ColumnRef("friend")))
    assert [name for name, _ in output_signature(output, Catalog([decl]), "Social")] == ["key", "owner", "friend"]
