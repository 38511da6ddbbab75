import logging
import os

from utils import (
    atrp_home,
    configure_run_logging,
    format_number_with_commas,
    resolve_log_level,
    setup_run_directories,
)


def test_setup_run_directories_under_home(atrp_home):
    run_dirs = setup_run_directories()
    assert os.path.isdir(run_dirs["log_dir"])
    assert run_dirs["log_dir"].startswith(os.path.join(str(atrp_home), "logs"))
    assert run_dirs["run_log_path"] == os.path.join(run_dirs["log_dir"], "run.txt")


def test_home_defaults_to_user_directory(monkeypatch):
    monkeypatch.delenv("ATRP_HOME")
    assert atrp_home() == os.path.expanduser("~/.atrp")


def test_configure_run_logging_writes_file(tmp_path):
    log_path = tmp_path / "run.txt"
    configure_run_logging(str(log_path))
    logging.info("solver started")
    for handler in logging.getLogger().handlers:
        handler.flush()
    assert "solver started" in log_path.read_text(encoding="utf-8")
    logging.basicConfig(level=logging.INFO, force=True)


def test_resolve_log_level(monkeypatch):
    monkeypatch.delenv("ATRP_LOG", raising=False)
    assert resolve_log_level() == logging.INFO
    assert resolve_log_level(debug=True) == logging.DEBUG
    monkeypatch.setenv("ATRP_LOG", " warning ")
    assert resolve_log_level() == logging.WARNING
    monkeypatch.setenv("ATRP_LOG", "chatty")
    assert resolve_log_level() == logging.INFO


def test_format_number_with_commas():
    assert format_number_with_commas(1234567) == "1,234,567"
    assert format_number_with_commas(12) == "12"
