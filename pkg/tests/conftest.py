"""Gemensamma fixtures: loggen hamnar i tmp_path och verbose är av."""
from __future__ import annotations

import pytest

from filaments import run_logger
from filaments.domain_grid import DomainSpec, build_grid


@pytest.fixture(autouse=True)
def isolated_run_log(tmp_path, monkeypatch):
    log_path = tmp_path / "logs" / "lab_runs.jsonl"
    monkeypatch.setenv("FILAMENT_RUN_LOG_PATH", str(log_path))
    for key in ("FILAMENT_SEED", "FILAMENT_OUTPUT_DIR"):
        monkeypatch.delenv(key, raising=False)
    run_logger.set_verbose(False)
    return log_path


@pytest.fixture
def unit_disk():
    return DomainSpec.disk(1.0)


@pytest.fixture
def disk_grid(unit_disk):
    return build_grid(unit_disk, 1.0 / 64)
