"""Tests for wiring files, wiring checks, input views and invariant enforcement."""
import random

import pytest

from src.errors import SchemaSyntaxError, WiringError
from src.sandbox.monitor import ReferenceMonitor
from src.schema.catalog import Catalog
from src.schema.parser import parse_db_file
from src.wiring.checker import check_wiring
from src.wiring.spec import ConstantValue, SourceColumn, parse_activations, parse_wirings
from src.wiring.views import ViewCompiler, key_namespaces

from tests.conftest import BUNDLE

FEED_DB = """
INPUT TABLE feed (
    key KEY,
    owner OWNER,
    body TEXT
);
"""

WALL_DB = """
TABLE posts (id KEY, owner OWNER, body TEXT);
TABLE friends (id KEY, owner OWNER, friend VARCHAR(20));
TABLE ignores (id KEY, owner OWNER, who VARCHAR(20));

OUTPUT TABLE wall = SELECT id AS key, owner, body FROM posts
    INVARIANT is(owner, @uid) OR friends(owner, @uid) AND !ignores(@uid, owner);
"""

WALL_TO_READER = """
WIRE Wall.wall -> Reader.feed
  key   <- key
  owner <- owner
  body  <- body
"""

FRIENDS_DB = """
TABLE friends (
    fid KEY
    uid1 OWNER
    uid2 VARCHAR(20)
)

OUTPUT TABLE friends_o (
    SELECT    CONCAT(uid1,uid2) AS key,  uid1 AS owner,  uid2 AS friend
    FROM      friends
    INVARIANT is(@uid,owner) OR is(@uid,friend) )
"""

FRIEND_LIST_DB = """
INPUT TABLE contacts (key KEY, owner OWNER, friend VARCHAR(20))
"""

FRIENDS_TO_CONTACTS = """
WIRE Social.friends_o -> Contacts.contacts
  key    <- key
  owner  <- owner
  friend <- friend
"""


def messages(diagnostics):
    return " | ".join(d.message for d in diagnostics)


def test_parse_demo_wirings():
    specs = parse_wirings((BUNDLE / "LiveSearch" / "wirings.cfg").read_text())
    assert [s.name for s in specs] == [
        "Groups.all_groups -> LiveSearch.data",
        "Messaging.private_msgs -> LiveSearch.data",
    ]
    assert specs[0].source_for("text") == SourceColumn("name")
    assert specs[0].source_for("TYPE") == ConstantValue("Group")
    assert parse_wirings(specs[1].to_text()) == [specs[1]]


def test_parse_activations():
    edges = parse_activations((BUNDLE / "activations.cfg").read_text())
    assert ("LiveSearch", "LiveSearchResults") in edges
    assert len(edges) == 4


def test_wiring_syntax_error_has_a_line():
    with pytest.raises(SchemaSyntaxError) as info:
        parse_wirings("WIRE A.x -> B.y\n  key <- key\n  owner <=\n")
    assert info.value.line == 3


def test_key_namespaces():
    specs = parse_wirings("WIRE A.x -> C.t\nWIRE B.x -> C.t\nWIRE A.y -> C.t\n")
    assert key_namespaces(specs) == ["A:", "B:", "A#2:"]


@pytest.mark.parametrize("text, fragment", [
    ("WIRE Groups.all_groups -> LiveSearch.data\n key <- key\n owner <- owner\n text <- name",
     "column 'type' is not mapped"),
    ("WIRE Groups.all_groups -> LiveSearch.data\n key <- name\n owner <- owner\n text <- name\n type <- 'G'",
     "KEY column 'key' must map to the source column 'key'"),
    ("WIRE Groups.all_groups -> LiveSearch.data\n key <- key\n owner <- owner\n text <- title\n type <- 'G'",
     "all_groups has no column 'title'"),
    ("WIRE Groups.all_groups -> LiveSearch.data\n key <- key\n owner <- owner\n text <- name\n type <- 'G'\n"
     " extra <- name", "'extra' is not a column of data"),
    ("WIRE Groups.groups -> LiveSearch.data\n key <- key", "Groups has no output table 'groups'"),
    ("WIRE Groups.all_groups -> Messaging.conversations\n key <- key", "Messaging has no input table 'conversations'"),
    ("WIRE Nowhere.out -> LiveSearch.data\n key <- key", "unknown source f-unit 'Nowhere'"),
])
def test_wiring_diagnostics(demo, text, fragment):
    (spec,) = parse_wirings(text)
    assert fragment in messages(check_wiring(spec, demo.catalog, demo.graph))


def test_numeric_columns_need_numeric_sources(monitor, integrate):
    integrate(monitor, "Groups", (BUNDLE / "Groups" / "Groups.db").read_text())
    integrate(monitor, "Stats", "INPUT TABLE counts (key KEY, owner OWNER, n INT)")
    (spec,) = parse_wirings("WIRE Groups.all_groups -> Stats.counts\n key <- key\n owner <- owner\n n <- name")
    assert "is not compatible with 'n'" in messages(check_wiring(spec, monitor.catalog, monitor.graph))
    (spec,) = parse_wirings("WIRE Groups.all_groups -> Stats.counts\n key <- key\n owner <- owner\n n <- 'many'")
    assert "is not a valid INT" in messages(check_wiring(spec, monitor.catalog, monitor.graph))


def test_wirings_keep_the_graph_acyclic(monitor, integrate):
    pipe = "TABLE items (id KEY, owner OWNER, body TEXT)\nINPUT TABLE inbox (key KEY, owner OWNER, body TEXT)\n" \
           "OUTPUT TABLE out = SELECT id AS key, owner, body FROM items"
    integrate(monitor, "A", pipe)
    integrate(monitor, "B", pipe, "WIRE A.out -> B.inbox\n key <- key\n owner <- owner\n body <- body")
    with pytest.raises(WiringError) as info:
        integrate(monitor, "C", "TABLE x (id KEY, owner OWNER)",
                  "WIRE B.out -> A.inbox\n key <- key\n owner <- owner\n body <- body")
    assert "would close a cycle" in str(info.value)
    assert "C" not in monitor.catalog
    assert len(monitor.wirings) == 1
    assert monitor.graph.sh_edges == {("A", "B")}


def test_input_view_contents(demo, run):
    rows = run(demo, "LiveSearch", "alice", "SELECT text, type FROM data").rows
    assert sorted(rows) == [
        ("Chess", "Group"),
        ("Chess tonight?", "Message"),
        ("Hiking", "Group"),
        ("Sure, 8pm", "Message"),
    ]
    carol = run(demo, "LiveSearch", "carol", "SELECT text, type FROM data").rows
    assert sorted(carol) == [("Chess", "Group"), ("Hiking", "Group")]
    dave = run(demo, "LiveSearch", "dave", "SELECT text FROM data WHERE type = 'Message'").rows
    assert dave == [("Trail report",)]


def test_input_view_keys_and_sources(demo):
    columns, rows = demo.input_rows("LiveSearch", "data", "bob")
    assert columns == ["text", "type", "key", "owner", "src"]
    assert sorted(rows) == [
        ("Chess", "Group", "Groups:1", "alice", "Groups"),
        ("Chess tonight?", "Message", "Messaging:1", "alice", "Messaging"),
        ("Hiking", "Group", "Groups:2", "bob", "Groups"),
        ("Sure, 8pm", "Message", "Messaging:2", "bob", "Messaging"),
        ("Trail report", "Message", "Messaging:3", "bob", "Messaging"),
    ]
    _, unrestricted = demo.input_rows("LiveSearch", "data", "carol", restricted=False)
    assert len(unrestricted) == 5


def test_input_without_wirings_is_empty(monitor, integrate, run):
    integrate(monitor, "Reader", FEED_DB)
    result = run(monitor, "Reader", "alice", "SELECT body, owner FROM feed")
    assert result.columns == ["body", "owner"]
    assert result.rows == []


def test_same_source_wired_twice(monitor, integrate, run):
    integrate(monitor, "Groups", (BUNDLE / "Groups" / "Groups.db").read_text())
    integrate(monitor, "Reader", FEED_DB, "\n".join(
        f"WIRE Groups.all_groups -> Reader.feed\n key <- key\n owner <- owner\n body <- '{label}'"
        for label in ("first", "second")
    ))
    run(monitor, "Groups", "alice", "INSERT INTO groups (name, owner, public) VALUES ('Chess', 'alice', 1)")
    _, rows = monitor.input_rows("Reader", "feed", "alice")
    assert sorted((key, body) for key, _, body, _ in rows) == [("Groups#2:1", "second"), ("Groups:1", "first")]


def test_invariant_matches_brute_force(run, integrate):
    """Random posts, friendships and ignores: the compiled view equals the invariant evaluated in Python."""
    for seed in range(15):
        rng = random.Random(seed)
        users = [f"u{i}" for i in range(4)]
        monitor = ReferenceMonitor.open(":memory:", secret_key=f"k{seed}")
        try:
            integrate(monitor, "Wall", WALL_DB)
            integrate(monitor, "Reader", FEED_DB, WALL_TO_READER)
            posts, friends, ignores = [], set(), set()
            for n in range(rng.randint(0, 12)):
                owner = rng.choice(users)
                run(monitor, "Wall", owner, f"INSERT INTO posts (owner, body) VALUES ('{owner}', 'p{n}')")
                posts.append((str(n + 1), owner))
            for _ in range(rng.randint(0, 6)):
                owner, other = rng.choice(users), rng.choice(users)
                run(monitor, "Wall", owner, f"INSERT INTO friends (owner, friend) VALUES ('{owner}', '{other}')")
                friends.add((owner, other))
            for _ in range(rng.randint(0, 4)):
                owner, other = rng.choice(users), rng.choice(users)
                run(monitor, "Wall", owner, f"INSERT INTO ignores (owner, who) VALUES ('{owner}', '{other}')")
                ignores.add((owner, other))

            for uid in users:
                expected = {
                    key for key, owner in posts
                    if owner == uid or ((owner, uid) in friends and (uid, owner) not in ignores)
                }
                _, rows = monitor.output_rows("Wall", "wall", uid)
                assert {row[0] for row in rows} == expected, (seed, uid)
                _, feed = monitor.input_rows("Reader", "feed", uid)
                assert {row[0] for row in feed} == {f"Wall:{key}" for key in expected}, (seed, uid)
        finally:
            monitor.close()


def test_predicate_arity_is_checked_when_compiling():
    decl = parse_db_file(
        "TABLE posts (id KEY, owner OWNER)\nOUTPUT TABLE wall = SELECT id AS key, owner FROM posts INVARIANT posts(owner, owner)",
        "Wall",
    )
    with pytest.raises(WiringError):
        ViewCompiler(Catalog([decl]), []).restricted_view("Wall", decl.output("wall"))


def test_friendship_visibility_matches_brute_force(run, integrate):
    """Each friendship row is visible to exactly its two parties, checked over every (row, uid) pair."""
    users = [f"u{i}" for i in range(4)]
    for seed in range(10):
        rng = random.Random(seed)
        monitor = ReferenceMonitor.open(":memory:", secret_key=f"k{seed}")
        try:
            integrate(monitor, "Social", FRIENDS_DB)
            integrate(monitor, "Contacts", FRIEND_LIST_DB, FRIENDS_TO_CONTACTS)
            stored = []
            for _ in range(rng.randint(1, 12)):
                owner, friend = rng.choice(users), rng.choice(users + [None])
                value = "NULL" if friend is None else f"'{friend}'"
                run(monitor, "Social", owner, f"INSERT INTO friends (uid1, uid2) VALUES ('{owner}', {value})")
                stored.append((owner, friend))

            _, everything = monitor.output_rows("Social", "friends_o", users[0], restricted=False)
            assert sorted(everything, key=repr) == sorted(
                ((None if f is None else o + f, o, f) for o, f in stored), key=repr
            )
            for uid in users + ["carol"]:
                expected = sorted(((o, f) for o, f in stored if uid == o or uid == f), key=repr)
                columns, rows = monitor.output_rows("Social", "friends_o", uid)
                assert columns == ["key", "owner", "friend"]
                assert sorted(((owner, friend) for _, owner, friend in rows), key=repr) == expected, (seed, uid)
                _, contacts = monitor.input_rows("Contacts", "contacts", uid)
                assert sorted(((owner, friend) for _, owner, friend, _ in contacts), key=repr) == expected, (seed, uid)
        finally:
            monitor.close()


def test_friendship_key_is_null_without_a_friend(monitor, integrate, run):
    integrate(monitor, "Social", FRIENDS_DB)
    run(monitor, "Social", "alice", "INSERT INTO friends (uid1, uid2) VALUES ('alice', 'bob')")
    run(monitor, "Social", "alice", "INSERT INTO friends (uid1, uid2) VALUES ('alice', NULL)")
    _, rows = monitor.output_rows("Social", "friends_o", "alice")
    assert sorted(rows, key=repr) == [("alicebob", "alice", "bob"), (None, "alice", None)]
    _, rows = monitor.output_rows("Social", "friends_o", "bob")
    assert rows == [("alicebob", "alice", "bob")]
