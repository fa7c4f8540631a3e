"""Tests for the run log file."""

import os

from meshplan.logger import RunLogger, read_logs, strip_timestamp


class TestRunLogger:
    def test_lines_are_timestamped(self, tmp_path):
        with RunLogger(str(tmp_path)) as log:
            log.write("first\nsecond")
        lines = list(read_logs(str(tmp_path)))
        assert len(lines) == 2
        assert lines[0].endswith(" first")
        assert list(read_logs(str(tmp_path), timestamps=False)) == ["first", "second"]

    def test_plain_write(self, tmp_path):
        with RunLogger(str(tmp_path)) as log:
            log.write("raw", timestamp=False)
        assert list(read_logs(str(tmp_path))) == ["raw"]

    def test_tail(self, tmp_path):
        with RunLogger(str(tmp_path)) as log:
            for i in range(5):
                log.write(f"line {i}")
        lines = read_logs(str(tmp_path), tail=2, timestamps=False)
        assert list(lines) == ["line 3", "line 4"]

    def test_rotation(self, tmp_path):
        log = RunLogger(str(tmp_path), max_size_mb=0)
        log.write("one")
        log.write("two")
        log.close()
        assert os.path.exists(tmp_path / "run.log.1")
        assert list(read_logs(str(tmp_path), timestamps=False)) == ["two"]

    def test_write_after_close_is_ignored(self, tmp_path):
        log = RunLogger(str(tmp_path))
        log.close()
        log.write("late")
        assert list(read_logs(str(tmp_path))) == []

    def test_missing_log(self, tmp_path):
        assert list(read_logs(str(tmp_path / "nowhere"))) == []

    def test_rotation_replaces_backup(self, tmp_path):
        with RunLogger(str(tmp_path), max_size_mb=0) as log:
            for word in ("one", "two", "three"):
                log.write(word, timestamp=False)
        assert (tmp_path / "run.log.1").read_text() == "two\n"
        assert list(read_logs(str(tmp_path))) == ["three"]
        assert not (tmp_path / "run.log.2").exists()

    def test_strip_timestamp(self):
        assert strip_timestamp("2026-01-02T03:04:05.678 hello") == "hello"
        assert strip_timestamp("no prefix") == "no prefix"
