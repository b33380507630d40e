"""
JSON and CSV formats of the command-line front end.

Operators are stored as ``{"dim": d, "re": [[...]], "im": [[...]]}`` and
superoperators use the same layout for their ``d^2 x d^2`` column-stacking
matrix. CSV tables are comma separated, LF terminated, with floats written to
17 significant digits and a ``#``-prefixed footer that carries the schema version.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
from typing import Any, Optional

import numpy as np

from LiftKitLib.Constructions import ChainSpec, JumpFamily
from LiftKitLib.Lifting import LiftedGenerator
from LiftKitLib.Lindblad import GKSLSpec
from LiftKitLib.OperatorAlgebra import DensityState, Superoperator
from LiftKitLib.Validation import ValueErrorsException

SCHEMA_VERSION = 1


def formatFloat(x: float) -> str:
    return f"{x:.17g}"


def operatorToDict(X) -> dict:
    X = np.asarray(X, dtype=complex)
    return {"dim": int(X.shape[0]), "re": X.real.tolist(), "im": X.imag.tolist()}


def operatorFromDict(payload: Any, name: str, dim: Optional[int] = None) -> np.ndarray:
    """
    Decodes an operator payload; ``im`` may be omitted for real operators.

    :param dim: expected number of rows, when the payload describes a superoperator this is ``d^2``
    :raises ValueErrorsException: listing every problem found in the payload
    """
    errors = []
    if not isinstance(payload, dict):
        raise ValueErrorsException([f"{name}: expected an object with 'dim', 're' and 'im'"])
    for key in ("dim", "re"):
        if key not in payload:
            errors.append(f"{name}: missing key '{key}'")
    if errors:
        raise ValueErrorsException(errors)
    try:
        re = np.asarray(payload["re"], dtype=float)
        im = np.asarray(payload.get("im", np.zeros_like(re)), dtype=float)
    except (TypeError, ValueError) as e:
        raise ValueErrorsException([f"{name}: entries must be numbers ({e})"]) from e
    expected = dim if dim is not None else payload["dim"]
    if re.shape != im.shape:
        errors.append(f"{name}: 're' has shape {re.shape} but 'im' has shape {im.shape}")
    if re.ndim != 2 or re.shape[0] != re.shape[1]:
        errors.append(f"{name}: expected a square matrix, got shape {re.shape}")
    elif re.shape[0] != expected:
        errors.append(f"{name}: matrix has {re.shape[0]} rows, expected {expected}")
    if errors:
        raise ValueErrorsException(errors)
    return re + 1j * im


def superoperatorToDict(phi: Superoperator) -> dict:
    return {"dim": phi.dim, "re": phi.mat.real.tolist(), "im": phi.mat.imag.tolist()}


def superoperatorFromDict(payload: Any, name: str) -> Superoperator:
    if not isinstance(payload, dict) or "dim" not in payload:
        raise ValueErrorsException([f"{name}: expected an object with 'dim', 're' and 'im'"])
    dim = int(payload["dim"])
    return Superoperator(operatorFromDict(payload, name, dim * dim))


def _toJSON(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _toJSON(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_toJSON(v) for v in value]
    if isinstance(value, np.ndarray):
        return _toJSON(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        return float(value) if math.isfinite(value) else None
    if isinstance(value, (complex, np.complexfloating)):
        return [_toJSON(value.real), _toJSON(value.imag)]
    return value


def readJSON(path: str) -> dict:
    """
    Reads a JSON object.

    :raises ValueErrorsException: with ``path:line:col`` diagnostics on malformed input
    """
    if not os.path.exists(path):
        raise ValueErrorsException([f"Input path '{path}' does not exist"])
    with open(path, encoding="utf-8") as f:
        text = f.read()
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as e:
        raise ValueErrorsException([f"{path}:{e.lineno}:{e.colno}: {e.msg}"]) from e
    if not isinstance(payload, dict):
        raise ValueErrorsException([f"{path}:1:1: top-level value must be an object"])
    return payload


def writeReport(path: str, payload: dict) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(_toJSON(payload), f, indent=2, sort_keys=True, allow_nan=False)
        f.write("\n")
    logging.info(f"Wrote {path}")


def writeCSV(path: str, header: list[str], rows: list[list[Any]], footer: Optional[list[str]] = None) -> None:
    """
    Writes a versioned CSV table.

    Float cells use 17 significant digits. Footer lines are written as ``# <line>``
    after the rows, followed by ``# schema_version=<n>``.
    """
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([formatFloat(v) if isinstance(v, (float, np.floating)) else v for v in row])
        for line in footer or []:
            f.write(f"# {line}\n")
        f.write(f"# schema_version={SCHEMA_VERSION}\n")
    logging.info(f"Wrote {path} ({len(rows)} rows)")


def readGKSLSpec(path: str) -> GKSLSpec:
    """Reads ``{"H": op, "jumps": [op, ...]}``."""
    payload = readJSON(path)
    if "H" not in payload:
        raise ValueErrorsException([f"{path}: missing key 'H'"])
    H = operatorFromDict(payload["H"], f"{path}: H")
    jumps = [operatorFromDict(op, f"{path}: jumps[{k}]", H.shape[0]) for k, op in enumerate(payload.get("jumps", []))]
    try:
        return GKSLSpec(H, jumps)
    except ValueError as e:
        raise ValueErrorsException([f"{path}: {e}"]) from e


def readState(path: str, key: str = "sigma") -> DensityState:
    payload = readJSON(path)
    op = operatorFromDict(payload.get(key, payload), f"{path}: {key}")
    try:
        return DensityState(op)
    except ValueError as e:
        raise ValueErrorsException([f"{path}: {e}"]) from e


def readChainSpec(path: str) -> ChainSpec:
    """Reads ``{"n": n, "Q": [[...]], "kappa": [...]}``; ``kappa`` is optional."""
    payload = readJSON(path)
    errors = [f"{path}: missing key '{key}'" for key in ("n", "Q") if key not in payload]
    if errors:
        raise ValueErrorsException(errors)
    try:
        return ChainSpec(int(payload["n"]), np.asarray(payload["Q"], dtype=float), payload.get("kappa", []))
    except (TypeError, ValueError) as e:
        raise ValueErrorsException([f"{path}: {e}"]) from e


def jumpFamilyToDict(family: JumpFamily) -> dict:
    return {
        "jumps": [operatorToDict(V) for V in family.jumps],
        "bohr": family.bohr,
        "conj": family.conj,
    }


def readJumpFamily(path: str) -> JumpFamily:
    payload = readJSON(path)
    errors = [f"{path}: missing key '{key}'" for key in ("jumps", "bohr", "conj") if key not in payload]
    if errors:
        raise ValueErrorsException(errors)
    jumps = [operatorFromDict(op, f"{path}: jumps[{k}]") for k, op in enumerate(payload["jumps"])]
    try:
        return JumpFamily(jumps, payload["bohr"], payload["conj"])
    except ValueError as e:
        raise ValueErrorsException([f"{path}: {e}"]) from e


def liftToDict(lift: LiftedGenerator) -> dict:
    return {
        "L_A": superoperatorToDict(lift.LA),
        "L_S": superoperatorToDict(lift.LS),
        "gamma": lift.gamma,
        "sigma": operatorToDict(lift.sigma.op),
        "fs_basis": [operatorToDict(X) for X in lift.fsBasis],
        "metadata": lift.metadata,
    }


def writeLift(path: str, lift: LiftedGenerator) -> None:
    writeReport(path, liftToDict(lift))


def readLift(path: str) -> LiftedGenerator:
    """
    Reads a lift bundle ``{"L_A", "L_S", "gamma", "sigma", "fs_basis"?, "metadata"?}``.
    """
    payload = readJSON(path)
    errors = [f"{path}: missing key '{key}'" for key in ("L_A", "L_S", "sigma") if key not in payload]
    if errors:
        raise ValueErrorsException(errors)
    LA = superoperatorFromDict(payload["L_A"], f"{path}: L_A")
    LS = superoperatorFromDict(payload["L_S"], f"{path}: L_S")
    sigmaOp = operatorFromDict(payload["sigma"], f"{path}: sigma", LA.dim)
    fsBasis = payload.get("fs_basis")
    if fsBasis is not None:
        fsBasis = [operatorFromDict(op, f"{path}: fs_basis[{k}]", LA.dim) for k, op in enumerate(fsBasis)]
    try:
        return LiftedGenerator(
            LA,
            LS,
            float(payload.get("gamma", 1.0)),
            DensityState(sigmaOp),
            fsBasis=fsBasis,
            metadata=payload.get("metadata"),
        )
    except ValueError as e:
        raise ValueErrorsException([f"{path}: {e}"]) from e
