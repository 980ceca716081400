"""Centralized error handling for solvers, field construction and file I/O."""
from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass
from typing import Any, Callable, Dict, Optional


# ---- Base errors for the lab -----------------------------------------------


class LabError(Exception):
    """Base class for controlled lab errors."""

    error_code: str = "LAB_ERROR"
    exit_code: int = 1

    def __init__(self, message: str, *, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}


class ValidationError(LabError):
    error_code = "VALIDATION_ERROR"
    exit_code = 1


class ConfigurationError(LabError):
    error_code = "CONFIG_ERROR"
    exit_code = 1


class GeometryError(LabError):
    """Point outside the domain or too close to its boundary."""

    error_code = "GEOMETRY_ERROR"
    exit_code = 1


class ConvergenceError(LabError):
    """Iterative solver stopped without meeting its tolerance."""

    error_code = "SOLVER_ERROR"
    exit_code = 2

    def __init__(
        self,
        message: str,
        *,
        last_iterate: Any = None,
        details: Optional[Dict[str, Any]] = None,
    ):
        super().__init__(message, details=details)
        self.last_iterate = last_iterate


class CollisionError(LabError):
    error_code = "COLLISION"
    exit_code = 2

    def __init__(
        self,
        message: str,
        *,
        height: Optional[float] = None,
        details: Optional[Dict[str, Any]] = None,
    ):
        super().__init__(message, details=details)
        self.height = height
        if height is not None:
            self.details.setdefault("height", height)


class SamplingError(LabError):
    error_code = "SAMPLING_ERROR"
    exit_code = 2


class ResolutionError(LabError):
    error_code = "RESOLUTION_ERROR"
    exit_code = 3


class TrendError(LabError):
    error_code = "TREND_ERROR"
    exit_code = 4


class FieldIOError(LabError):
    error_code = "IO_ERROR"
    exit_code = 5


# ---- Payload & normalization -----------------------------------------------


@dataclass
class ErrorPayload:
    error: bool
    type: str
    code: str
    message: str
    run_id: Optional[str] = None
    details: Optional[Dict[str, Any]] = None

    def to_dict(self) -> Dict[str, Any]:
        # filter out None values
        return {k: v for k, v in asdict(self).items() if v is not None}


def _build_payload_from_lab_error(
    exc: LabError,
    *,
    run_id: Optional[str] = None,
) -> ErrorPayload:
    return ErrorPayload(
        error=True,
        type=exc.__class__.__name__,
        code=exc.error_code,
        message=exc.message,
        run_id=run_id,
        details=_jsonable(exc.details or {}),
    )


def _build_payload_from_unexpected_error(
    exc: Exception,
    *,
    run_id: Optional[str] = None,
) -> ErrorPayload:
    # Generic message; the traceback belongs in the run log, not the payload
    return ErrorPayload(
        error=True,
        type="UnexpectedError",
        code="INTERNAL_ERROR",
        message="An internal error occurred.",
        run_id=run_id,
        details=None,
    )


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if hasattr(value, "tolist"):
        return value.tolist()
    if isinstance(value, (str, int, float, bool)) or value is None:
        return value
    return str(value)


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, LabError):
        return exc.exit_code
    return 1


def build_error_payload(exc: BaseException, *, run_id: Optional[str] = None) -> ErrorPayload:
    if isinstance(exc, LabError):
        return _build_payload_from_lab_error(exc, run_id=run_id)
    return _build_payload_from_unexpected_error(exc, run_id=run_id)  # type: ignore[arg-type]


# ---- CLI integration ---------------------------------------------------------


def run_cli_command(
    fn: Callable[[], int],
    *,
    run_id: Optional[str] = None,
    out_dir: Optional[str] = None,
    on_error: Optional[Callable[[BaseException], None]] = None,
) -> int:
    """
    Run a command body and translate lab errors into stable exit codes.

    Usage:
        return run_cli_command(lambda: _cmd_minimize(exp, cfg), run_id=rid, out_dir=exp.output_dir)
    """
    try:
        return fn()
    except Exception as exc:
        payload = build_error_payload(exc, run_id=run_id)
        code = exit_code_for(exc)
        print(f"[lab_cli] {payload.type}: {exc} (exit {code})", flush=True)
        if out_dir:
            try:
                os.makedirs(out_dir, exist_ok=True)
                with open(os.path.join(out_dir, "error.json"), "w", encoding="utf-8") as f:
                    json.dump(payload.to_dict(), f, indent=2, sort_keys=True)
            except OSError as write_exc:
                print(f"[lab_cli] Failed to write error.json: {write_exc}", flush=True)
        if on_error is not None:
            on_error(exc)
        return code
