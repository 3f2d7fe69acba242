"""End-to-end tests of the reference monitor on the demo ecosystem."""
from concurrent.futures import ThreadPoolExecutor, wait

import pytest

from src.errors import IntegrationError, OwnerViolation, PermissionDenied, QuerySyntaxError
from src.host.bundle import load_bundle
from src.host.integrator import integrate_bundle
from src.model.oracle import req_valid, sb
from src.model.universe import Op
from src.sandbox.monitor import ReferenceMonitor
from src.schema.parser import load_db_file

from tests.conftest import BUNDLE, SECRET_KEY


def group_names(monitor):
    _, rows = monitor.local_rows("Groups", "groups")
    return sorted(row[1] for row in rows)


def test_seeded_state(demo):
    assert group_names(demo) == ["Chess", "Hiking"]
    columns, rows = demo.local_rows("Messaging", "conversations")
    assert columns == ["msg_id", "uid_from", "uid_recipient", "msg"]
    assert [row[0] for row in rows] == ["1", "2", "3"]
    assert demo.users() == {"alice", "bob"}


def test_own_rows_can_be_modified(demo, run):
    result = run(demo, "Groups", "alice", "UPDATE groups SET name = 'Chess club' WHERE owner = 'alice'")
    assert result.op is Op.UPD
    assert result.rowcount == 1
    assert result.rebuild_order == ["Groups", "LiveSearch", "LiveSearchResults"]
    assert group_names(demo) == ["Chess club", "Hiking"]

    inserted = run(demo, "Groups", "carol", "INSERT INTO groups (gid, name, owner, public) VALUES (77, 'Go', 'carol', 0)")
    assert inserted.sub_requests[0].keys == ("77",)


def test_statements_without_effect_need_no_rebuild(demo, run):
    result = run(demo, "Groups", "alice", "DELETE FROM groups WHERE name = 'Nothing'")
    assert result.rowcount == 0
    assert result.rebuild_order == []


@pytest.mark.parametrize("sql", [
    "INSERT INTO groups (name, owner, public) VALUES ('Fake', 'bob', 1)",
    "INSERT INTO groups (name, public) VALUES ('Ownerless', 1)",
    "INSERT INTO groups (name, owner, public) VALUES ('Mine', 'alice', 1), ('Theirs', 'bob', 1)",
    "UPDATE groups SET name = 'Mine now' WHERE owner = 'bob'",
    "UPDATE groups SET owner = 'bob' WHERE owner = 'alice'",
    "UPDATE groups SET name = 'Everything'",
    "DELETE FROM groups WHERE owner = 'bob'",
    "DELETE FROM groups",
])
def test_owner_violations_leave_the_store_unchanged(demo, run, sql):
    before = demo.store.dump()
    with pytest.raises(OwnerViolation) as info:
        run(demo, "Groups", "alice", sql)
    assert info.value.code == "E_OWNER"
    assert demo.store.dump() == before


def test_key_column_is_immutable(demo, run):
    with pytest.raises(PermissionDenied):
        run(demo, "Groups", "alice", "UPDATE groups SET gid = 5 WHERE owner = 'alice'")


def test_unknown_column(demo, run):
    with pytest.raises(QuerySyntaxError):
        run(demo, "Groups", "alice", "INSERT INTO groups (name, colour, owner) VALUES ('x', 'red', 'alice')")


def test_reintegration_needs_force(demo):
    decl = load_db_file(BUNDLE / "Groups" / "Groups.db")
    source = (BUNDLE / "Groups" / "Groups.db").read_text()
    with pytest.raises(IntegrationError):
        demo.integrate(decl, source)

    demo.integrate(decl, source, force=True)
    assert group_names(demo) == []
    assert [w.source_component for w in demo.wirings] == ["Messaging"]
    assert ("Groups", "LiveSearch") not in demo.graph.sh_edges


def test_failed_integration_changes_nothing(demo):
    before = demo.store.dump()
    with pytest.raises(IntegrationError):
        integrate_bundle(demo, load_bundle(BUNDLE))
    assert demo.store.dump() == before
    assert len(demo.wirings) == 2


def test_remove_funit(demo, run):
    run(demo, "LiveSearch", "bob", "INSERT INTO bookmarks (owner, item) VALUES ('bob', 'Groups:2')")
    demo.remove("Groups")
    assert "Groups" not in demo.catalog
    assert "Groups" not in demo.graph.nodes
    assert demo.local_rows("LiveSearch", "bookmarks")[1] == []


def test_state_survives_reopening(tmp_path):
    path = tmp_path / "crm.sqlite3"
    monitor = ReferenceMonitor.open(path, secret_key=SECRET_KEY)
    integrate_bundle(monitor, load_bundle(BUNDLE))
    exported = monitor.graph.export()
    monitor.close()

    reopened = ReferenceMonitor.open(path)
    try:
        assert reopened.store.secret_key == SECRET_KEY
        assert reopened.catalog.components == ["Groups", "LiveSearch", "Messaging"]
        assert reopened.graph.export() == exported
        assert len(reopened.wirings) == 2
        session = reopened.open_session("LiveSearch", "carol")
        assert len(reopened.execute(session, "SELECT text FROM data").rows) == 2
    finally:
        reopened.close()


def test_signatures(demo):
    signatures = demo.signatures()
    assert list(signatures["LiveSearch"]) == ["INPUT data"]
    assert [name for name, _ in signatures["Messaging"]["OUTPUT private_msgs"]] == ["key", "msg", "owner", "to"]


def test_snapshot_universe(demo):
    u = demo.snapshot_universe(["carol"])
    assert u.users == {"alice", "bob", "carol"}
    assert {"SocialApp", "LiveSearchResults"} <= u.components
    assert {d.id for d in u.items("Groups.groups")} == {"Groups.groups/1", "Groups.groups/2"}
    carol = u.items("LiveSearch.data@carol")
    assert {d.src for d in carol} == {"Groups"}
    assert ("Messaging", "LiveSearch") in u.wirings


STATEMENTS = [
    ("LiveSearch", "alice", "SELECT text, type FROM data"),
    ("LiveSearch", "alice", "INSERT INTO bookmarks (owner, item) VALUES ('alice', 'Groups:2')"),
    ("LiveSearch", "alice", "DELETE FROM bookmarks WHERE item IN (SELECT text FROM data WHERE type = 'Group')"),
    ("Groups", "bob", "UPDATE groups SET public = 0 WHERE owner = 'bob'"),
    ("Messaging", "bob", "DELETE FROM conversations WHERE uid_recipient = 'dave'"),
    ("Groups", "alice", "SELECT g.name, m.owner FROM groups g JOIN memberships m ON m.grp = g.gid"),
]


@pytest.mark.parametrize("funit, uid, sql", STATEMENTS)
def test_accepted_statements_are_valid_in_the_model(demo, funit, uid, sql):
    before = demo.snapshot_universe([uid])
    session = demo.open_session(funit, uid)
    result = demo.execute(session, sql)
    requests = demo.to_requests(session, result)
    assert requests
    for request in requests:
        assert sb(before, request), request.describe()
        assert req_valid(before, request), request.describe()


def test_modifications_with_sub_selects_are_split(demo, run):
    result = run(demo, "LiveSearch", "alice",
                 "DELETE FROM bookmarks WHERE item IN (SELECT text FROM data WHERE type = 'Group')")
    assert [str(sub) for sub in result.sub_requests] == ["DEL[bookmarks]", "SEL[data]"]


def test_reads_wait_for_an_open_transaction(demo, run):
    with ThreadPoolExecutor(max_workers=1) as pool:
        with pytest.raises(RuntimeError):
            with demo.store.transaction():
                run(demo, "Groups", "alice", "INSERT INTO groups (name, owner, public) VALUES ('Go', 'alice', 1)")
                future = pool.submit(run, demo, "Groups", "bob", "SELECT name FROM groups")
                _, pending = wait([future], timeout=0.2)
                assert future in pending
                raise RuntimeError("roll back")
        assert sorted(future.result(timeout=5).rows) == [("Chess",), ("Hiking",)]
