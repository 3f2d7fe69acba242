"""Tests for bundles, integration, the CLI, the socket service and soundness runs."""
import asyncio
import json

import pytest

from main import main
from src.errors import BudgetExceeded, IntegrationError, ProtocolError
from src.host.bundle import load_bundle
from src.host.integrator import integrate_bundle, seed_statements
from src.host.service import MonitorService, start
from src.host.soundness import run_soundness

from tests.conftest import BUNDLE


@pytest.fixture(autouse=True)
def log_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("CRM_LOG_DIR", str(tmp_path / "log"))


@pytest.fixture
def store(tmp_path):
    return str(tmp_path / "crm.sqlite3")


def cli(*argv):
    return asyncio.run(main(list(argv)))


def test_bundle_layout():
    bundle = load_bundle(BUNDLE)
    assert [f.name for f in bundle.funits] == ["Groups", "LiveSearch", "Messaging"]
    assert bundle.funit("LiveSearch").wirings_file.name == "wirings.cfg"
    assert bundle.funit("Groups").wirings_file is None
    assert bundle.activations_file is not None
    with pytest.raises(IntegrationError):
        bundle.funit("SocialApp")


def test_missing_bundle(tmp_path):
    with pytest.raises(IntegrationError):
        load_bundle(tmp_path / "nowhere")
    with pytest.raises(IntegrationError):
        load_bundle(tmp_path)


def test_seed_statements():
    text = "-- comment\n-- as alice\nINSERT INTO t (a)\n  VALUES (1);\n-- as bob\nDELETE FROM t;\n"
    assert seed_statements(text) == [("alice", "INSERT INTO t (a) VALUES (1)"), ("bob", "DELETE FROM t")]
    with pytest.raises(IntegrationError):
        seed_statements("DELETE FROM t;\n")
    with pytest.raises(IntegrationError):
        seed_statements("-- as alice\nDELETE FROM t\n")


def test_integration_report(monitor):
    report = integrate_bundle(monitor, load_bundle(BUNDLE))
    assert report.funits == ["Groups", "LiveSearch", "Messaging"]
    assert len(report.wirings) == 2
    assert report.skipped_wirings == []
    assert report.seeded == 6
    assert ("LiveSearch", "LiveSearchResults") in report.activations


def test_partial_integration_skips_dangling_wirings(monitor):
    report = integrate_bundle(monitor, load_bundle(BUNDLE), only="LiveSearch")
    assert report.funits == ["LiveSearch"]
    assert len(report.skipped_wirings) == 2
    assert monitor.wirings == []
    assert {"SocialApp", "LiveSearchResults", "LiveSearch"} <= monitor.graph.nodes


def test_cli_session(store, capsys):
    assert cli("--store", store, "integrate", str(BUNDLE)) == 0
    assert "3 f-units integrated" in capsys.readouterr().out

    assert cli("--store", store, "query", "--funit", "LiveSearch", "--user", "alice", "SELECT text, type FROM data") == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "text\ttype"
    assert sorted(lines[1:]) == ["Chess\tGroup", "Chess tonight?\tMessage", "Hiking\tGroup", "Sure, 8pm\tMessage"]

    assert cli("--store", store, "query", "--funit", "Groups", "--user", "alice",
               "UPDATE groups SET name = 'Chess club' WHERE owner = 'alice'") == 0
    assert capsys.readouterr().out.strip() == "1"

    assert cli("--store", store, "query", "--funit", "LiveSearch", "--user", "alice", "SELECT name FROM groups") == 3
    assert "E_UNKNOWN_TABLE" in capsys.readouterr().out

    assert cli("--store", store, "query", "--funit", "Groups", "--user", "alice",
               "DELETE FROM groups WHERE owner = 'bob'") == 4
    assert "E_OWNER" in capsys.readouterr().out

    assert cli("--store", store, "simulate-change", "--funit", "Groups") == 0
    assert capsys.readouterr().out.strip() == "Groups, LiveSearch, LiveSearchResults"

    assert cli("--store", store, "graph") == 0
    assert "Groups -> LiveSearch [sh]" in capsys.readouterr().out.splitlines()

    assert cli("--store", store, "signatures") == 0
    assert "private_msgs" in capsys.readouterr().out

    assert cli("--store", store, "integrate", str(BUNDLE)) == 1
    assert "E_INTEGRATION" in capsys.readouterr().out


def test_cli_wire_requires_integrated_endpoints(store, tmp_path, capsys):
    wirings = tmp_path / "extra.cfg"
    wirings.write_text("WIRE Groups.all_groups -> Nowhere.data\n  key <- key\n")
    assert cli("--store", store, "wire", str(wirings)) == 1
    assert "E_INTEGRATION" in capsys.readouterr().out


def test_cli_soundness_is_deterministic(capsys):
    argv = ("soundness", "--trials", "20", "--seed", "3", "--replay-every", "5", "--no-progress")
    assert cli(*argv) == 0
    first = capsys.readouterr().out
    assert first.splitlines()[-1] == "0 violations / 20 trials"
    assert cli(*argv) == 0
    assert capsys.readouterr().out == first


def test_cli_soundness_detects_injected_faults(capsys):
    assert cli("soundness", "--trials", "20", "--seed", "1", "--replay-every", "0", "--inject-fault", "--no-progress") == 1
    summary = capsys.readouterr().out.splitlines()[-1]
    assert not summary.startswith("0 violations")


def test_cli_rejects_negative_trials(capsys):
    with pytest.raises(SystemExit):
        cli("soundness", "--trials", "-1")


def test_soundness_run():
    run = run_soundness(30, seed=11, replay_every=10, progress=False)
    assert run.violations == []
    assert run.replays == 3
    assert run.statements == 36
    assert 0 < run.accepted < run.statements
    assert run.details() == run_soundness(30, seed=11, replay_every=10, progress=False).details()


def test_soundness_budget():
    with pytest.raises(BudgetExceeded):
        run_soundness(5, seed=0, budget=1, replay_every=0, progress=False)


def test_service_messages(demo):
    service = MonitorService(demo)

    async def conversation():
        opened = await service.handle({"open": "LiveSearch", "uid": "carol"})
        token = opened["token"]
        assert len(token) == 32
        rows = await service.handle({"query": token, "sql": "SELECT text FROM data WHERE type = 'Group'"})
        assert rows["columns"] == ["text"]
        assert sorted(rows["rows"]) == [["Chess"], ["Hiking"]]
        denied = await service.handle({"query": token, "sql": "SELECT name FROM groups"})
        assert denied["error"] == "E_UNKNOWN_TABLE"
        assert await service.handle({"close": token}) == {"closed": token}
        gone = await service.handle({"query": token, "sql": "SELECT text FROM data"})
        assert gone["error"] == "E_IDENTITY"
        assert (await service.handle({"open": "LiveSearch", "uid": ""}))["error"] == "E_IDENTITY"
        with pytest.raises(ProtocolError):
            await service.handle(["not", "an", "object"])
        with pytest.raises(ProtocolError):
            await service.handle({"open": "LiveSearch", "uid": 7})
        with pytest.raises(ProtocolError):
            await service.handle({"hello": "there"})

    asyncio.run(conversation())


def test_service_over_tcp(demo):
    async def conversation():
        server = await start(demo, "127.0.0.1:0")
        port = server.sockets[0].getsockname()[1]
        try:
            reader, writer = await asyncio.open_connection("127.0.0.1", port)

            async def send(message):
                writer.write((message if isinstance(message, str) else json.dumps(message)).encode() + b"\n")
                await writer.drain()
                return json.loads(await reader.readline())

            token = (await send({"open": "Groups", "uid": "bob"}))["token"]
            changed = await send({"query": token, "sql": "UPDATE groups SET public = 0 WHERE owner = 'bob'"})
            assert changed == {"rowcount": 1, "rebuild": ["Groups", "LiveSearch", "LiveSearchResults"], "cascaded": []}
            assert (await send("{not json"))["error"] == "E_PROTOCOL"
            assert await reader.readline() == b""
            writer.close()
            await writer.wait_closed()
        finally:
            server.close()
            await server.wait_closed()

    asyncio.run(conversation())
