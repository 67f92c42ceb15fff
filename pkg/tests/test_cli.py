from __future__ import annotations

import json

import pytest

from tlsgate.cli import main
from tlsgate.whitelist import load_store


@pytest.fixture
def store_env(tmp_path, monkeypatch):
    path = tmp_path / "store.json"
    monkeypatch.setenv("TLSGATE_STORE", str(path))
    monkeypatch.delenv("TLSGATE_CATALOG", raising=False)
    return path


class TestWhitelistCommands:
    def test_add_then_ls(self, store_env, capsys):
        assert main(["add", "bank.example", "--handling", "blocking"]) == 0
        assert main(["ls"]) == 0
        out = capsys.readouterr().out
        assert "bank.example" in out
        assert "handling=blocking" in out
        assert "level=strict" in out

    def test_duplicate_add_fails_with_domain_error(self, store_env, capsys):
        assert main(["add", "bank.example"]) == 0
        assert main(["add", "bank.example"]) == 1
        assert "already whitelisted" in capsys.readouterr().err

    def test_invalid_domain_is_domain_error(self, store_env, capsys):
        assert main(["add", "localhost"]) == 1

    def test_relax_and_rm(self, store_env, capsys):
        main(["add", "bank.example"])
        assert main(["relax", "bank.example"]) == 0
        assert "level=default" in capsys.readouterr().out
        assert main(["rm", "bank.example"]) == 0
        assert main(["rm", "bank.example"]) == 1

    def test_ls_json_is_store_document(self, store_env, capsys):
        main(["add", "bank.example"])
        capsys.readouterr()
        assert main(["ls", "--json"]) == 0
        document = json.loads(capsys.readouterr().out)
        assert document["schema_version"] == 1
        assert document["entries"][0]["domain"] == "bank.example"

    def test_store_flag_overrides_env(self, tmp_path, store_env, capsys):
        other = tmp_path / "other.json"
        assert main(["--store", str(other), "add", "bank.example"]) == 0
        assert other.exists()
        assert not store_env.exists()


class TestSimulateCommand:
    def test_fig2_strict_prevented(self, store_env, capsys):
        assert main(["simulate", "--scenario", "fig2", "--policy", "strict"]) == 1
        out = capsys.readouterr().out
        lines = [line for line in out.splitlines() if line]
        assert lines[0].startswith("hello_sent")
        assert lines[-1].startswith("client_aborted")
        assert "established" not in out

    def test_fig2_default_falls_back_silently(self, store_env, capsys):
        assert main(["simulate", "--scenario", "fig2", "--policy", "default"]) == 0
        out = capsys.readouterr().out
        assert "established version=1.0" in out

    def test_dance_json_records(self, store_env, capsys):
        assert main(["simulate", "--scenario", "dance", "--policy", "default", "--json"]) == 0
        records = [json.loads(line) for line in capsys.readouterr().out.splitlines()]
        retries = [r for r in records if r["event"] == "retry_started"]
        assert [r["new_max_version"] for r in retries] == ["1.2", "1.1", "1.0"]
        assert records[-1]["event"] == "established"

    def test_attacker_override(self, store_env, capsys):
        assert main(["simulate", "--scenario", "modern", "--policy", "strict", "--attacker", "tamper:1.0"]) == 1

    def test_unknown_scenario_is_usage_error(self, store_env, capsys):
        assert main(["simulate", "--scenario", "bogus"]) == 2


class TestFetchCommand:
    def test_success(self, store_env, capsys):
        assert main(["fetch", "https://modern.example/"]) == 0
        assert "success" in capsys.readouterr().out

    def test_blocked(self, store_env, capsys):
        main(["add", "victim.example", "--handling", "blocking"])
        assert main(["fetch", "https://victim.example/login"]) == 1
        assert "SSL_ERROR_UNSUPPORTED_VERSION" in capsys.readouterr().out

    def test_warned_prints_token_hint(self, store_env, capsys):
        main(["add", "victim.example"])
        assert main(["fetch", "https://victim.example/login"]) == 1
        out = capsys.readouterr().out
        assert "warning" in out
        assert "tlsgate relax" in out

    def test_subscription_persists(self, store_env, capsys):
        assert main(["fetch", "https://secure.example/"]) == 0
        store = load_store(store_env)
        assert store.get("secure.example") is not None


class TestExportImport:
    def test_round_trip(self, store_env, tmp_path, capsys):
        main(["add", "a.example"])
        main(["add", "b.example", "--handling", "blocking"])
        dump = tmp_path / "dump.json"
        assert main(["export", str(dump)]) == 0
        original = load_store(store_env)
        store_env.unlink()
        assert main(["import", str(dump)]) == 0
        assert load_store(store_env) == original

    def test_export_stdout(self, store_env, capsys):
        main(["add", "a.example"])
        capsys.readouterr()
        assert main(["export", "-"]) == 0
        document = json.loads(capsys.readouterr().out)
        assert document["entries"][0]["domain"] == "a.example"


class TestUsage:
    def test_no_command_exits_2(self, store_env):
        with pytest.raises(SystemExit) as excinfo:
            main([])
        assert excinfo.value.code == 2

    def test_version_flag(self, store_env, capsys):
        with pytest.raises(SystemExit) as excinfo:
            main(["--version"])
        assert excinfo.value.code == 0
