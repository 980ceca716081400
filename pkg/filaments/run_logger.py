"""Run logging för labbet - trådsäker JSONL-logging."""
from __future__ import annotations

import json
import math
import os
import threading
from dataclasses import asdict, dataclass, field, is_dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Optional


# Standardloggfil, kan override: FILAMENT_RUN_LOG_PATH=/path/to/log.jsonl
DEFAULT_LOG_PATH = Path("logs/lab_runs.jsonl")

# Global lock för trådsäker skrivning
_write_lock = threading.Lock()

_verbose = os.getenv("FILAMENT_VERBOSE", "").strip() == "1"


@dataclass
class SolverStats:
    method: Optional[str] = None       # t.ex. "newton", "descent", "splu"
    iterations: Optional[int] = None
    residual: Optional[float] = None
    energy: Optional[float] = None


@dataclass
class RunLogRecord:
    timestamp: str
    run_id: Optional[str]
    command: str
    level: str = "info"
    seed: Optional[int] = None
    threads: Optional[int] = None

    latency_ms: Optional[float] = None

    success: bool = True
    error_type: Optional[str] = None
    error_message: Optional[str] = None

    solver: Optional[SolverStats] = None

    meta: Dict[str, Any] = field(default_factory=dict)


def set_verbose(flag: bool) -> None:
    global _verbose
    _verbose = bool(flag)


def diag(module: str, message: str) -> None:
    """Skriv en diagnostikrad med modulprefix om verbose är på."""
    if _verbose:
        print(f"[{module}] {message}", flush=True)


def _get_log_path() -> Path:
    """Returnera sökvägen till loggfilen (env override stöds)."""
    env_path = os.getenv("FILAMENT_RUN_LOG_PATH")
    if env_path:
        return Path(env_path)
    return DEFAULT_LOG_PATH


def _ensure_log_dir_exists(path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)


def _utc_timestamp() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%f")[:-3] + "Z"


def _append(record: RunLogRecord) -> None:
    log_path = _get_log_path()
    line = json.dumps(_to_primitive(record), ensure_ascii=False, separators=(",", ":"))
    try:
        _ensure_log_dir_exists(log_path)
        with _write_lock:
            with log_path.open("a", encoding="utf-8") as f:
                f.write(line + "\n")
    except Exception as log_exc:
        # Loggern får aldrig krascha en körning
        print(f"[run_logger] Failed to write log: {log_exc}", flush=True)


def log_run(
    *,
    command: str,
    run_id: Optional[str] = None,
    seed: Optional[int] = None,
    threads: Optional[int] = None,
    latency_ms: Optional[float] = None,
    success: bool = True,
    error: Optional[BaseException] = None,
    solver_stats: Optional[Dict[str, Any]] = None,
    meta: Optional[Dict[str, Any]] = None,
) -> None:
    """
    Logga en CLI-körning till JSONL.

    Anropas av lab_cli efter varje kommando, oavsett om det gick bra eller fel.
    """
    solver_obj: Optional[SolverStats] = None
    if solver_stats:
        solver_obj = SolverStats(
            method=solver_stats.get("method"),
            iterations=solver_stats.get("iterations"),
            residual=solver_stats.get("residual"),
            energy=solver_stats.get("energy"),
        )

    record = RunLogRecord(
        timestamp=_utc_timestamp(),
        run_id=run_id,
        command=command,
        seed=seed,
        threads=threads,
        latency_ms=latency_ms,
        success=success,
        error_type=error.__class__.__name__ if error is not None else None,
        error_message=str(error) if error is not None else None,
        solver=solver_obj,
        meta=meta or {},
    )
    _append(record)


def log_warning(module: str, message: str, **meta: Any) -> None:
    """Varningar skrivs alltid ut och loggas som level=warning."""
    print(f"[{module}] WARNING: {message}", flush=True)
    _append(
        RunLogRecord(
            timestamp=_utc_timestamp(),
            run_id=None,
            command=module,
            level="warning",
            meta={"message": message, **meta},
        )
    )


def _to_primitive(value: Any) -> Any:
    """
    Konvertera dataclasses och numpy-värden till något json.dumps klarar.
    Icke-ändliga flyttal blir strängar ("inf", "nan").
    """
    if is_dataclass(value) and not isinstance(value, type):
        return _to_primitive(asdict(value))
    if isinstance(value, dict):
        return {str(k): _to_primitive(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_to_primitive(v) for v in value]
    if hasattr(value, "tolist"):
        return _to_primitive(value.tolist())
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    return value
