"""Basic tests for meshplan.

These tests verify the package imports correctly and the entry points are
wired to the CLI.
"""

import runpy
import sys

import pytest


class TestImports:
    """Test that all modules can be imported."""

    def test_import_main_module(self):
        """Test that main module imports successfully."""
        import meshplan

        assert meshplan is not None

    def test_version_defined(self):
        """Test that version is defined."""
        from meshplan import __version__

        assert isinstance(__version__, str)
        assert __version__ == "1.0.0"

    @pytest.mark.parametrize(
        "module",
        [
            "netmodel",
            "topogen",
            "selection",
            "routing",
            "tsgen",
            "scheduler",
            "pipeline",
            "metrics",
            "experiment",
            "store",
            "fixtures",
            "oracles",
            "logger",
            "cli",
        ],
    )
    def test_import_submodule(self, module):
        """Test every submodule imports."""
        import importlib

        assert importlib.import_module(f"meshplan.{module}") is not None

    def test_public_api(self):
        """Test the top-level re-exports."""
        import meshplan

        for name in (
            "Topology",
            "generate_topology",
            "select_active_links",
            "compute_mdst",
            "build_transmission_sets",
            "optimize_schedule",
            "run_pipeline",
            "STRATEGIES",
        ):
            assert hasattr(meshplan, name)

    def test_module_entrypoint_propagates_exit_code(self, monkeypatch):
        """Test python -m meshplan exits with the CLI return code."""
        import meshplan.cli as cli

        monkeypatch.setattr(cli, "main", lambda: 42)
        monkeypatch.delitem(sys.modules, "meshplan.__main__", raising=False)

        with pytest.raises(SystemExit) as exc:
            runpy.run_module("meshplan", run_name="__main__")

        assert exc.value.code == 42


class TestEnvironment:
    """Test environment-driven settings."""

    def test_python_version(self):
        """Test Python version requirement."""
        assert sys.version_info >= (3, 9)

    def test_thread_count_from_env(self, monkeypatch):
        from meshplan.utils import THREADS_ENV, get_thread_count

        monkeypatch.setenv(THREADS_ENV, "3")
        assert get_thread_count() == 3

    @pytest.mark.parametrize("value", ["0", "-2", "many"])
    def test_thread_count_rejects_bad_values(self, monkeypatch, value):
        from meshplan.utils import THREADS_ENV, MeshPlanError, get_thread_count

        monkeypatch.setenv(THREADS_ENV, value)
        with pytest.raises(MeshPlanError):
            get_thread_count()

    def test_thread_count_defaults_to_cpus(self, monkeypatch):
        from meshplan.utils import THREADS_ENV, get_thread_count

        monkeypatch.delenv(THREADS_ENV, raising=False)
        assert get_thread_count() >= 1


class TestUtils:
    """Test helpers shared by every module."""

    @pytest.mark.parametrize(
        "text,expected",
        [
            ("0-3", [0, 1, 2, 3]),
            ("1,4,9-11", [1, 4, 9, 10, 11]),
            ("7", [7]),
        ],
    )
    def test_parse_seed_list(self, text, expected):
        from meshplan.utils import parse_seed_list

        assert parse_seed_list(text) == expected

    @pytest.mark.parametrize("text", ["", "3-1", "a-b", "-1"])
    def test_parse_seed_list_rejects(self, text):
        from meshplan.utils import MeshPlanError, parse_seed_list

        with pytest.raises(MeshPlanError):
            parse_seed_list(text)

    def test_make_run_id(self):
        from meshplan.utils import make_run_id

        assert make_run_id(3, "BA") == "seed0003-BA"

    def test_write_json_is_stable(self, tmp_path):
        from meshplan.utils import read_json, write_json

        path = tmp_path / "out" / "doc.json"
        write_json(str(path), {"b": 1, "a": [1, 2]})
        first = path.read_bytes()
        write_json(str(path), {"a": [1, 2], "b": 1})

        assert path.read_bytes() == first
        assert read_json(str(path)) == {"a": [1, 2], "b": 1}
        assert [p.name for p in path.parent.iterdir()] == ["doc.json"]

    def test_read_json_errors(self, tmp_path):
        from meshplan.utils import MeshPlanError, read_json

        with pytest.raises(MeshPlanError, match="not found"):
            read_json(str(tmp_path / "missing.json"))

        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        with pytest.raises(MeshPlanError, match="Invalid JSON"):
            read_json(str(bad))
