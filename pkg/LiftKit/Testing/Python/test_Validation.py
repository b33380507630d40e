import math

import pytest

from LiftKitLib.Validation import CheckResult, LiftConditionError, ValueErrorsException, pathErrors, positiveErrors


def test_value_errors_exception_message():
    assert str(ValueErrorsException(["a is wrong"])) == "Invalid value:\na is wrong"
    assert str(ValueErrorsException(["a", "b"])) == "Invalid values:\na\nb"


@pytest.mark.parametrize("errors", [[], "not a list"])
def test_value_errors_exception_needs_messages(errors):
    with pytest.raises(ValueError, match="non-empty list"):
        ValueErrorsException(errors)


def test_positive_errors():
    errors = positiveErrors(a=1.0, b=0, c=-2.5, d=math.inf, e=True, f="1")
    assert errors == [
        "Input 'b' must be > 0, got 0",
        "Input 'c' must be > 0, got -2.5",
        "Input 'd' must be > 0, got inf",
        "Input 'e' must be > 0, got True",
        "Input 'f' must be > 0, got '1'",
    ]


def test_path_errors(tmp_path):
    existing = tmp_path / "here.json"
    existing.write_text("{}")
    missing = str(tmp_path / "gone.json")
    assert pathErrors(a=str(existing), b=None, c=missing) == [f"Input path 'c' ({missing}) does not exist"]


def test_check_result_payload():
    result = CheckResult(False, 0.25, {"eigenvalues": [1j], "value": 1 + 2j})
    assert not result
    assert result.toDict() == {"passed": False, "residual": 0.25, "eigenvalues": [1j], "value": [1.0, 2.0]}


def test_lift_condition_error_lists_failures():
    report = {"A": CheckResult(True, 0.0), "C": CheckResult(False, 1.0)}
    error = LiftConditionError(report)
    assert "C" in str(error)
    assert "A" not in str(error).split(":")[-1]
    assert error.toDict()["C"]["passed"] is False
