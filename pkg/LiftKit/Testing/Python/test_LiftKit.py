import dataclasses
import json
import time

import numpy as np
import pytest

import LiftKit
from LiftKitLib import IO, Lifting
from LiftKitLib.Constructions import ChainSpec, chainLift, depolarizingGenerator, gnsLift, jumpFamilyFromGKSL, reflectingWalk
from LiftKitLib.Lifting import AnalyzeOptions, LiftedGenerator, analyze
from LiftKitLib.Lindblad import GKSLSpec, buildGKSL
from LiftKitLib.OperatorAlgebra import DensityState, tensor
from LiftKitLib.Validation import CheckResult, ValueErrorsException


def dataRows(path):
    return [line for line in path.read_text().splitlines()[1:] if not line.startswith("#")]


def footer(path):
    return [line[2:] for line in path.read_text().splitlines() if line.startswith("# ")]


def test_validate_config_collects_every_error(tmp_path):
    config = LiftKit.RunConfig(
        command="bogus",
        tol=-1.0,
        gamma="fast",
        n=[1],
        lift=str(tmp_path / "missing.json"),
    )
    with pytest.raises(ValueErrorsException) as excinfo:
        LiftKit.validateConfig(config)
    assert len(excinfo.value.errors) == 5


def test_validate_config_lift_qms_needs_one_input():
    with pytest.raises(ValueErrorsException, match="requires exactly one of --generator and --jumps"):
        LiftKit.validateConfig(LiftKit.RunConfig(command="lift-qms"))


def test_validate_config_jumps_need_sigma(tmp_path):
    path = tmp_path / "family.json"
    path.write_text("{}")
    with pytest.raises(ValueErrorsException, match="--jumps requires --sigma"):
        LiftKit.validateConfig(LiftKit.RunConfig(command="lift-qms", jumps=str(path)))


def test_load_config_flags_override_file(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"tol": 1e-8, "n": [5], "gamma": "2.5"}))
    args = LiftKit.buildParser().parse_args(["certificate", "--config", str(path), "--n", "6,7"])
    config = LiftKit.loadConfig(args)
    assert config.command == "certificate"
    assert config.tol == 1e-8
    assert config.n == [6, 7]
    assert config.gamma == 2.5


def test_load_config_rejects_unknown_keys(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"tolerance": 1e-8}))
    args = LiftKit.buildParser().parse_args(["verify", "--config", str(path)])
    with pytest.raises(ValueErrorsException, match="unknown key 'tolerance'"):
        LiftKit.loadConfig(args)


def test_malformed_config_is_an_input_error(tmp_path):
    path = tmp_path / "config.json"
    path.write_text("{not json")
    assert LiftKit.main(["verify", "--config", str(path), "-o", str(tmp_path / "out")]) == LiftKit.EXIT_INPUT_ERROR


def test_invalid_flag_value_is_an_input_error(tmp_path):
    assert LiftKit.main(["verify", "--tol", "-1", "-o", str(tmp_path)]) == LiftKit.EXIT_INPUT_ERROR


def test_certificate_command(tmp_path):
    out = tmp_path / "out"
    assert LiftKit.main(["certificate", "--n", "5,8", "--c2", "0,0.5", "-o", str(out)]) == LiftKit.EXIT_OK
    rows = dataRows(out / "certificate.csv")
    assert [row.split(",")[0] for row in rows] == ["5", "8"]
    assert all(row.endswith(",1") for row in rows)
    assert len(dataRows(out / "frontier.csv")) == 4
    report = json.loads((out / "report.json").read_text())
    assert report["command"] == "certificate"
    assert report["certificates"][0]["pass_3_2"]


def test_certificate_is_deterministic(tmp_path):
    for name in ("first", "second"):
        assert LiftKit.main(["certificate", "--n", "16", "-o", str(tmp_path / name)]) == LiftKit.EXIT_OK
    for artifact in ("certificate.csv", "report.json"):
        assert (tmp_path / "first" / artifact).read_bytes() == (tmp_path / "second" / artifact).read_bytes()


def test_verify_chain(tmp_path):
    assert LiftKit.main(["verify", "--n", "4", "-o", str(tmp_path)]) == LiftKit.EXIT_OK
    conditions = json.loads((tmp_path / "report.json").read_text())["conditions"]
    assert sorted(conditions) == ["A", "B", "C", "D"]
    assert all(result["passed"] for result in conditions.values())


def test_lift_chain_command(tmp_path):
    assert LiftKit.main(["lift-chain", "--n", "5", "--gamma", "auto", "-o", str(tmp_path)]) == LiftKit.EXIT_OK
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["certificate"]["pass_3_2"]
    assert report["lower"]["gamma_max"] > 0
    assert report["upper"]["nu_upper"] >= report["lower"]["nu_max"]
    assert report["metadata"]["gamma"] == pytest.approx(report["lower"]["gamma_max"])
    sweep = tmp_path / "gamma_sweep.csv"
    assert len(dataRows(sweep)) == 25
    assert [line.split("=")[0] for line in footer(sweep)] == ["gamma_max", "nu_max", "nu_upper", "schema_version"]
    assert IO.readLift(str(tmp_path / "lift.json")).dim == 5
    assert len(dataRows(tmp_path / "decay.csv")) == 200


def test_overdamped_command(tmp_path):
    assert LiftKit.main(["overdamped", "--n", "4", "--gamma", "1", "-o", str(tmp_path)]) == LiftKit.EXIT_OK
    table = tmp_path / "eps_error.csv"
    assert len(dataRows(table)) == 4
    slope = [line for line in footer(table) if line.startswith("slope=")]
    assert len(slope) == 1
    assert 0.8 <= float(slope[0].split("=")[1]) <= 1.2


def test_analyze_reports_condition_failure(tmp_path):
    sigmaB = DensityState.maximallyMixed(2)
    lift, artifacts = gnsLift(jumpFamilyFromGKSL(depolarizingGenerator(sigmaB), sigmaB), sigmaB, 1.0)
    extra = buildGKSL(GKSLSpec(tensor(np.eye(artifacts.dimA), np.diag([1.0, -1.0]))))
    leaky = LiftedGenerator(lift.LA + extra, lift.LS, 1.0, lift.sigma, fsBasis=lift.fsBasis)
    path = str(tmp_path / "lift.json")
    IO.writeLift(path, leaky)
    out = tmp_path / "out"
    assert LiftKit.main(["analyze", "--lift", path, "--gamma", "1", "-o", str(out)]) == LiftKit.EXIT_CONDITION_FAILURE
    conditions = json.loads((out / "report.json").read_text())["conditions"]
    assert not conditions["C"]["passed"]


def test_lift_qms_command(tmp_path):
    generator = {"H": IO.operatorToDict(np.zeros((2, 2))), "jumps": [IO.operatorToDict(np.diag([1.0, -1.0]))]}
    path = tmp_path / "generator.json"
    path.write_text(json.dumps(generator))
    out = tmp_path / "out"
    code = LiftKit.main(["lift-qms", "--generator", str(path), "--gamma-points", "3", "-o", str(out)])
    assert code == LiftKit.EXIT_OK
    report = json.loads((out / "report.json").read_text())
    assert report["recovery_error"] <= 1e-10
    assert all(result["passed"] for result in report["bipartite_conditions"].values())


def test_emit_plotdata_without_sweep(tmp_path):
    report = analyze(chainLift(ChainSpec.fromQ(reflectingWalk(3)), 1.0), AnalyzeOptions(empirical=False))
    path = LiftKit.emitPlotdata(dataclasses.replace(report, sweep=[]), str(tmp_path))
    lines = open(path).read().splitlines()
    assert lines[0] == "gamma,nu_lower,nu_emp,C_emp"
    assert dataRows(tmp_path / "gamma_sweep.csv") == []
    assert lines[-1] == "# schema_version=1"


def test_scaling_command(tmp_path):
    code = LiftKit.main(["scaling", "--n", "4,8", "--gamma-points", "7", "-o", str(tmp_path)])
    assert code == LiftKit.EXIT_OK
    table = tmp_path / "scaling.csv"
    assert [row.split(",")[0] for row in dataRows(table)] == ["4", "8"]
    values = dict(line.split("=") for line in footer(table))
    assert float(values["ratio_band"]) <= 4.0
    assert float(values["spearman"]) == pytest.approx(1.0)
    runs = json.loads((tmp_path / "report.json").read_text())["runs"]
    assert [run["n"] for run in runs] == [4, 8]


def test_emit_decay_curve(tmp_path):
    lift = chainLift(ChainSpec.fromQ(reflectingWalk(3)), 1.0)
    path = LiftKit.emitDecay(lift, AnalyzeOptions(tPoints=20), str(tmp_path))
    rows = [[float(value) for value in row.split(",")] for row in dataRows(tmp_path / "decay.csv")]
    assert len(rows) == 20
    assert rows[0][0] == 0.0
    distances = [row[1] for row in rows]
    assert distances[-1] < 1e-6 * distances[0]
    assert footer(tmp_path / "decay.csv")[0] == "gamma=1"
    assert path.endswith("decay.csv")


@pytest.mark.parametrize("command", ["verify", "analyze", "sweep-gamma"])
def test_failed_condition_d_is_a_condition_failure(tmp_path, monkeypatch, command):
    def failing(model, tol=1e-10):
        return CheckResult(False, 1.0)

    monkeypatch.setattr(Lifting, "verifyConditionD", failing)
    monkeypatch.setattr(LiftKit, "verifyConditionD", failing)
    code = LiftKit.main([command, "--n", "3", "--gamma", "1", "--gamma-points", "3", "-o", str(tmp_path)])
    assert code == LiftKit.EXIT_CONDITION_FAILURE
    if command != "sweep-gamma":
        conditions = json.loads((tmp_path / "report.json").read_text())["conditions"]
        assert conditions["A"]["passed"]
        assert not conditions["D"]["passed"]


def test_scaling_command_up_to_thirty_two_sites(tmp_path):
    start = time.perf_counter()
    code = LiftKit.main(["scaling", "--n", "4,8,16,32", "--gamma-points", "9", "-o", str(tmp_path)])
    assert time.perf_counter() - start < 180.0
    assert code == LiftKit.EXIT_OK
    table = tmp_path / "scaling.csv"
    assert [row.split(",")[0] for row in dataRows(table)] == ["4", "8", "16", "32"]
    values = dict(line.split("=") for line in footer(table))
    assert float(values["spearman"]) == pytest.approx(1.0)
    for run in json.loads((tmp_path / "report.json").read_text())["runs"]:
        rates = [row["nu_emp"] for row in run["report"]["sweep"]]
        assert 0 < int(np.argmax(rates)) < len(rates) - 1
        assert run["report"]["gaps"] is None


def test_lift_qms_from_jump_family(tmp_path):
    sigmaB = DensityState.maximallyMixed(2)
    family = jumpFamilyFromGKSL(depolarizingGenerator(sigmaB), sigmaB)
    jumps, sigma = tmp_path / "jumps.json", tmp_path / "sigma.json"
    IO.writeReport(str(jumps), IO.jumpFamilyToDict(family))
    sigma.write_text(json.dumps({"sigma": IO.operatorToDict(sigmaB.op)}))
    out = tmp_path / "out"
    code = LiftKit.main(["lift-qms", "--jumps", str(jumps), "--sigma", str(sigma), "--gamma-points", "3", "-o", str(out)])
    assert code == LiftKit.EXIT_OK
    report = json.loads((out / "report.json").read_text())
    assert report["recovery_error"] <= 1e-10
    assert all(result["passed"] for result in report["bipartite_conditions"].values())
    written = IO.readJumpFamily(str(out / "family.json"))
    assert written.bohr == family.bohr
    assert written.conj == family.conj


def test_lift_qms_rejects_inconsistent_jump_family(tmp_path):
    jumps, sigma = tmp_path / "jumps.json", tmp_path / "sigma.json"
    family = {"jumps": [IO.operatorToDict(np.eye(2))], "bohr": [0.0], "conj": [0]}
    jumps.write_text(json.dumps(family))
    sigma.write_text(json.dumps({"sigma": IO.operatorToDict(np.eye(2) / 2)}))
    code = LiftKit.main(["lift-qms", "--jumps", str(jumps), "--sigma", str(sigma), "-o", str(tmp_path / "out")])
    assert code == LiftKit.EXIT_INPUT_ERROR
