import logging

import pytest

from core.exceptions import BeatFormatError, NumericError
from core.logging import setup_logging
from core.persistence import PersistenceManager, atomic_write_bytes


class TestPersistence:
    def test_construction_creates_no_directories(self, tmp_path, monkeypatch):
        monkeypatch.setattr("pathlib.Path.home", lambda: tmp_path)
        manager = PersistenceManager()
        assert manager.base_dir.is_relative_to(tmp_path)
        assert not manager.base_dir.exists()

    def test_log_file_creates_its_directory(self, tmp_path):
        path = PersistenceManager().get_log_file(str(tmp_path / "a" / "logs"))
        assert (tmp_path / "a" / "logs").is_dir()
        assert path.endswith("ecg-prune.log")

    def test_atomic_write_leaves_no_temp_file(self, tmp_path):
        target = atomic_write_bytes(tmp_path / "sub" / "x.json", b"{}")
        assert target.read_bytes() == b"{}"
        assert not (tmp_path / "sub" / "x.json.tmp").exists()


class TestLogging:
    def test_file_logging_goes_to_configured_directory(self, isolated_settings, monkeypatch):
        monkeypatch.setattr(isolated_settings, "log_to_file", True)
        setup_logging("INFO")
        try:
            logging.getLogger("ecg.test").info("written to the log file")
            for handler in logging.getLogger().handlers:
                handler.flush()
            log_file = PersistenceManager().get_log_file(isolated_settings.logs_dir)
            with open(log_file, encoding="utf-8") as f:
                assert "written to the log file" in f.read()
        finally:
            monkeypatch.setattr(isolated_settings, "log_to_file", False)
            setup_logging("INFO")


class TestExceptions:
    def test_exit_codes_and_fields(self):
        err = BeatFormatError("bad row", 4, "beats.csv")
        assert err.exit_code == 3
        assert err.line_no == 4
        assert "beats.csv:4" in err.message
        numeric = NumericError("nan", epoch=2, batch=1)
        assert numeric.exit_code == 4
        assert (numeric.epoch, numeric.batch) == (2, 1)
        with pytest.raises(BeatFormatError):
            raise err
