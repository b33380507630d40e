from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Any, Optional


class ValueErrorsException(Exception):
    """Every problem found in one set of inputs, raised together."""

    def __init__(self, errors: list[str]):
        if not isinstance(errors, list) or len(errors) == 0:
            raise ValueError("[Validation.ValueErrorsException] errors must be a non-empty list of messages")
        self.errors = errors
        super().__init__("\n".join(errors))

    def __str__(self) -> str:
        plural = "" if len(self.errors) == 1 else "s"
        return f"Invalid value{plural}:\n" + "\n".join(self.errors)


class LiftConditionError(Exception):
    """Raised when a lift fails one or more of the lifting conditions.

    :param report: mapping from condition name to its :class:`CheckResult`
    """

    def __init__(self, report: dict[str, CheckResult]):
        self.report = report
        failed = [name for name, result in report.items() if not result.passed]
        super().__init__(f"Lifting condition(s) failed: {', '.join(failed)}")

    def toDict(self) -> dict:
        return {name: result.toDict() for name, result in self.report.items()}


@dataclass(frozen=True)
class CheckResult:
    """Outcome of a numerical predicate together with the quantity it was decided on."""

    passed: bool
    residual: float
    details: dict[str, Any] = field(default_factory=dict)

    def __bool__(self) -> bool:
        return self.passed

    def toDict(self) -> dict:
        return {"passed": bool(self.passed), "residual": float(self.residual), **_jsonable(self.details)}


def _jsonable(values: dict[str, Any]) -> dict[str, Any]:
    out = {}
    for key, value in values.items():
        if isinstance(value, complex):
            out[key] = [value.real, value.imag]
        elif hasattr(value, "tolist"):
            out[key] = value.tolist()
        else:
            out[key] = value
    return out


def positiveErrors(**values: Any) -> list[str]:
    """
    Lists the named values that are not finite numbers > 0.

    :param values: values to check, keyed by the name used in the messages
    :return: one message per offending value, empty when all pass
    """
    errors = []
    for name, value in values.items():
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value) or value <= 0:
            errors.append(f"Input '{name}' must be > 0, got {value!r}")
    return errors


def pathErrors(**paths: Optional[str]) -> list[str]:
    """
    Lists the named paths that do not exist. Paths left as None are skipped.

    :return: one message per missing path
    """
    return [
        f"Input path '{name}' ({path}) does not exist"
        for name, path in paths.items()
        if path is not None and not os.path.exists(path)
    ]
