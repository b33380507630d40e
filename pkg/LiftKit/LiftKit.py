"""
Command-line front end: ``liftkit <command> [--config file.json] [flags]``.

Exit codes: 0 when every predicate passes, 1 on input errors, 2 when a lifting
condition or the chain certificate fails.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Any, Optional, Union

import numpy as np
import scipy.stats

from LiftKitLib import IO
from LiftKitLib.Constructions import (
    ChainSpec,
    certificateFrontier,
    chainCertificate,
    chainLift,
    gnsGenerator,
    gnsLift,
    jumpFamilyFromGKSL,
    reflectingWalk,
    verifyBipartiteConditions,
)
from LiftKitLib.Lifting import (
    AnalyzeOptions,
    LiftedGenerator,
    RateReport,
    analyze,
    empiricalSweep,
    lowerBoundRate,
    meanZeroObservable,
    overdampedConvergenceTest,
    overdampedGenerator,
    verifyConditionA,
    verifyConditionB,
    verifyConditionC,
    verifyConditionD,
)
from LiftKitLib.Lindblad import buildGKSL, distanceCurve, invariantState
from LiftKitLib.Spectra import spectralGap
from LiftKitLib.Validation import LiftConditionError, ValueErrorsException, pathErrors, positiveErrors

COMMANDS = ("verify", "overdamped", "analyze", "lift-chain", "lift-qms", "sweep-gamma", "scaling", "certificate")
FAMILIES = ("chain",)

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_CONDITION_FAILURE = 2

SWEEP_EXTENSIONS = 2


@dataclass
class RunConfig:
    command: str
    lift: Optional[str] = None
    generator: Optional[str] = None
    sigma: Optional[str] = None
    chain: Optional[str] = None
    jumps: Optional[str] = None
    output: str = "liftkit-output"
    tol: float = 1e-10
    kernelTol: float = 1e-10
    gamma: Union[str, float] = "auto"
    gammaPoints: int = 25
    gammaSpan: float = 10.0
    T: Optional[float] = None
    n: list[int] = field(default_factory=lambda: [8])
    kappa: Optional[list[float]] = None
    epsilons: list[float] = field(default_factory=lambda: [0.2, 0.1, 0.05, 0.025])
    t: float = 1.0
    c2: list[float] = field(default_factory=list)
    family: str = "chain"
    seed: int = 0
    threads: Optional[int] = None
    verbose: bool = False


def _isPositive(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value) and value > 0


def validateConfig(config: RunConfig) -> None:
    """
    Collects every problem with ``config``.

    :raises ValueErrorsException: listing all problems at once
    """
    errors = []
    if config.command not in COMMANDS:
        errors.append(f"Unknown command '{config.command}', expected one of {', '.join(COMMANDS)}")
    errors += positiveErrors(tol=config.tol, kernelTol=config.kernelTol, gammaSpan=config.gammaSpan, t=config.t)
    if config.T is not None:
        errors += positiveErrors(T=config.T)
    if not (isinstance(config.gammaPoints, int) and config.gammaPoints >= 1):
        errors.append(f"Input 'gammaPoints' must be a positive integer, got {config.gammaPoints!r}")
    if config.gamma != "auto" and not _isPositive(config.gamma):
        errors.append(f"Input 'gamma' must be 'auto' or a number > 0, got {config.gamma!r}")
    if not config.n or not all(isinstance(n, int) and n >= 2 for n in config.n):
        errors.append(f"Input 'n' must be a list of integers >= 2, got {config.n!r}")
    if not config.epsilons or not all(_isPositive(eps) for eps in config.epsilons):
        errors.append(f"Input 'epsilons' must be a list of numbers > 0, got {config.epsilons!r}")
    if config.family not in FAMILIES:
        errors.append(f"Unknown family '{config.family}', expected one of {', '.join(FAMILIES)}")
    if config.threads is not None and not (isinstance(config.threads, int) and config.threads >= 1):
        errors.append(f"Input 'threads' must be a positive integer, got {config.threads!r}")
    errors += pathErrors(
        lift=config.lift, generator=config.generator, sigma=config.sigma, chain=config.chain, jumps=config.jumps
    )
    if config.command == "lift-qms":
        if (config.generator is None) == (config.jumps is None):
            errors.append("Command 'lift-qms' requires exactly one of --generator and --jumps")
        if config.jumps is not None and config.sigma is None:
            errors.append("Input --jumps requires --sigma, the state the jumps are modular eigenvectors of")
    if len(errors) > 0:
        raise ValueErrorsException(errors)


def _parseList(text: str, kind: type) -> list:
    return [kind(item) for item in text.split(",") if item.strip()]


def loadConfig(args: argparse.Namespace) -> RunConfig:
    """Builds the run configuration: defaults, then the JSON config file, then explicit flags."""
    values: dict[str, Any] = {}
    if args.config is not None:
        payload = IO.readJSON(args.config)
        known = {f.name for f in dataclasses.fields(RunConfig)}
        unknown = sorted(set(payload) - known)
        if unknown:
            raise ValueErrorsException([f"{args.config}: unknown key '{key}'" for key in unknown])
        values.update(payload)
    for name, value in vars(args).items():
        if name != "config" and value is not None:
            values[name] = value
    if isinstance(values.get("gamma"), str) and values["gamma"] != "auto":
        try:
            values["gamma"] = float(values["gamma"])
        except ValueError:
            pass
    return RunConfig(**values)


def _chainSpec(config: RunConfig, n: Optional[int] = None) -> ChainSpec:
    if config.chain is not None and n is None:
        return IO.readChainSpec(config.chain)
    return ChainSpec.fromQ(reflectingWalk(n or config.n[0]), config.kappa)


def _autoGamma(lift: LiftedGenerator) -> LiftedGenerator:
    try:
        consts = lift.constants
    except ValueError as e:
        logging.warning(f"Cannot place gamma at gamma_max, keeping gamma = {lift.gamma:g}: {e}")
        return lift
    return lift.withGamma(lowerBoundRate(consts, 1.0).gammaMax)


def emitPlotdata(report: RateReport, path: str) -> str:
    """
    Writes the gamma sweep of ``report`` to ``<path>/gamma_sweep.csv``.

    :return: the written file
    """
    filename = os.path.join(path, "gamma_sweep.csv")
    rows = [[row["gamma"], row["nu_lower"], row.get("nu_emp", math.nan), row.get("C_emp", math.nan)] for row in report.sweep]
    footer = [
        f"gamma_max={IO.formatFloat(report.gammaMax)}",
        f"nu_max={IO.formatFloat(report.nuMax)}",
        f"nu_upper={IO.formatFloat(report.nuUpper)}",
    ]
    IO.writeCSV(filename, ["gamma", "nu_lower", "nu_emp", "C_emp"], rows, footer)
    return filename


def emitDecay(lift: LiftedGenerator, options: AnalyzeOptions, path: str) -> Optional[str]:
    """
    Writes ``t, ||X_t - E_F X_0||_{2,sigma}`` for a seeded mean-zero observable to ``<path>/decay.csv``.

    :return: the written file, or None when the generator has no decay to sample
    """
    try:
        gap = spectralGap(lift.generator, lift.sigma, options.tol)
    except ValueError as e:
        logging.warning(f"Skipping the decay curve: {e}")
        return None
    if gap <= 0:
        logging.warning("Generator has a vanishing spectral gap, skipping the decay curve")
        return None
    tGrid = np.linspace(0.0, options.tHorizon / gap, options.tPoints)
    distances = distanceCurve(lift.generator, lift.sigma, meanZeroObservable(lift, options.seed), tGrid, options.tol)
    filename = os.path.join(path, "decay.csv")
    IO.writeCSV(filename, ["t", "distance"], list(zip(tGrid, distances)), [f"gamma={IO.formatFloat(lift.gamma)}"])
    return filename


def extendToInteriorMaximum(lift: LiftedGenerator, report: RateReport, options: AnalyzeOptions) -> list[dict]:
    """
    Extends the gamma sweep of ``report`` past whichever edge holds the largest
    empirical rate, keeping the log spacing of the grid.

    At most ``SWEEP_EXTENSIONS`` blocks of ``max(gammaPoints // 4, 2)`` points are added.

    :return: the sweep rows in increasing gamma
    """
    sweep = list(report.sweep)
    step = options.gammaSpan ** (2 / max(options.gammaPoints - 1, 1))
    count = max(options.gammaPoints // 4, 2)
    for _ in range(SWEEP_EXTENSIONS):
        best = int(np.argmax([row["nu_emp"] for row in sweep]))
        if 0 < best < len(sweep) - 1:
            break
        if best == 0:
            grid = sweep[0]["gamma"] * step ** -np.arange(count, 0, -1, dtype=float)
            sweep = empiricalSweep(lift, grid, report.constants, options) + sweep
        else:
            grid = sweep[-1]["gamma"] * step ** np.arange(1, count + 1, dtype=float)
            sweep = sweep + empiricalSweep(lift, grid, report.constants, options)
        logging.info(
            f"Empirical rate peaks at a sweep edge, extended the sweep to "
            f"[{sweep[0]['gamma']:.4g}, {sweep[-1]['gamma']:.4g}]"
        )
    return sweep


class LiftKitLogic:
    """Runs one command of the pipeline and writes its artifacts into ``config.output``."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.output = config.output

    def options(self) -> AnalyzeOptions:
        return AnalyzeOptions(
            tol=self.config.tol,
            T=self.config.T,
            gammaPoints=self.config.gammaPoints,
            gammaSpan=self.config.gammaSpan,
            seed=self.config.seed,
            threads=self.config.threads,
        )

    def loadLift(self) -> LiftedGenerator:
        if self.config.lift is not None:
            lift = IO.readLift(self.config.lift)
        else:
            gamma = 1.0 if self.config.gamma == "auto" else float(self.config.gamma)
            lift = chainLift(_chainSpec(self.config), gamma)
        if self.config.gamma == "auto":
            lift = _autoGamma(lift)
        elif self.config.lift is not None:
            lift = lift.withGamma(float(self.config.gamma))
        logging.info(f"Loaded {lift}")
        return lift

    def run(self) -> int:
        handler = {
            "verify": self.verify,
            "overdamped": self.overdamped,
            "analyze": self.analyze,
            "lift-chain": self.liftChain,
            "lift-qms": self.liftQms,
            "sweep-gamma": self.sweepGamma,
            "scaling": self.scaling,
            "certificate": self.certificate,
        }[self.config.command]
        return handler()

    def _writeReport(self, payload: dict, name: str = "report.json") -> None:
        IO.writeReport(os.path.join(self.output, name), {"command": self.config.command, **payload})

    @staticmethod
    def _failedConditions(report: RateReport) -> list[str]:
        failed = [name for name, result in report.conditions.items() if not result.passed]
        if failed:
            logging.error(f"Lift fails condition(s) {', '.join(failed)}")
        return failed

    def _analyze(self, lift: LiftedGenerator, extra: Optional[dict] = None, exitCode: int = EXIT_OK) -> int:
        try:
            report = analyze(lift, self.options())
        except LiftConditionError as e:
            logging.error(str(e))
            self._writeReport({"conditions": e.toDict(), **(extra or {})})
            return EXIT_CONDITION_FAILURE
        self._writeReport({**report.toDict(), **(extra or {})})
        emitPlotdata(report, self.output)
        emitDecay(lift, self.options(), self.output)
        if self._failedConditions(report):
            return EXIT_CONDITION_FAILURE
        return exitCode

    def verify(self) -> int:
        lift = self.loadLift()
        tol = self.config.tol
        conditions = {
            "A": verifyConditionA(lift.LS, lift.LA, lift.sigma, tol),
            "B": verifyConditionB(lift),
            "C": verifyConditionC(lift, tol),
        }
        if all(result.passed for result in conditions.values()):
            conditions["D"] = verifyConditionD(lift.model, tol)
        for name, result in conditions.items():
            logging.info(f"Condition {name}: {'pass' if result.passed else 'FAIL'} (residual {result.residual:.3e})")
        self._writeReport({"conditions": {name: result.toDict() for name, result in conditions.items()}})
        passed = len(conditions) == 4 and all(result.passed for result in conditions.values())
        return EXIT_OK if passed else EXIT_CONDITION_FAILURE

    def overdamped(self) -> int:
        lift = self.loadLift()
        model = overdampedGenerator(lift)
        rng = np.random.default_rng(self.config.seed)
        X0 = sum(c * X for c, X in zip(rng.standard_normal(len(model.frame)), model.frame))
        X0 = model.ES.apply((X0 + X0.conj().T) / 2)
        result = overdampedConvergenceTest(lift, X0, self.config.t, self.config.epsilons, model)
        footer = [f"t={IO.formatFloat(self.config.t)}"]
        footer.append(f"slope={IO.formatFloat(result.slope)}" if result.slope is not None else "slope=none")
        IO.writeCSV(
            os.path.join(self.output, "eps_error.csv"),
            ["eps", "error"],
            [[eps, err] for eps, err in zip(result.epsilons, result.errors)],
            footer,
        )
        self._writeReport({"overdamped": model.toDict(), "convergence": result.toDict(), "metadata": lift.metadata})
        return EXIT_OK

    def analyze(self) -> int:
        return self._analyze(self.loadLift())

    def sweepGamma(self) -> int:
        lift = self.loadLift()
        options = self.options()
        if self.config.gamma != "auto":
            options.gammaCenter = float(self.config.gamma)
        try:
            report = analyze(lift, options)
        except LiftConditionError as e:
            logging.error(str(e))
            self._writeReport({"conditions": e.toDict()})
            return EXIT_CONDITION_FAILURE
        emitPlotdata(report, self.output)
        return EXIT_CONDITION_FAILURE if self._failedConditions(report) else EXIT_OK

    def liftChain(self) -> int:
        spec = _chainSpec(self.config)
        gamma = 1.0 if self.config.gamma == "auto" else float(self.config.gamma)
        lift = chainLift(spec, gamma)
        if self.config.gamma == "auto":
            lift = _autoGamma(lift)
        certificate = chainCertificate(spec)
        logging.info(f"Chain certificate: C1_min = {certificate.C1Min:.6f}, M <= 3/2 Q^2: {certificate.pass32}")
        IO.writeLift(os.path.join(self.output, "lift.json"), lift)
        exitCode = EXIT_OK if certificate.pass32 else EXIT_CONDITION_FAILURE
        return self._analyze(lift, {"certificate": certificate.toDict(), "chain": spec.toDict()}, exitCode)

    def liftQms(self) -> int:
        if self.config.jumps is not None:
            family = IO.readJumpFamily(self.config.jumps)
            sigmaB = IO.readState(self.config.sigma)
            family.validate(sigmaB)
            LO = gnsGenerator(family, sigmaB)
        else:
            LO = buildGKSL(IO.readGKSLSpec(self.config.generator))
            sigmaB = IO.readState(self.config.sigma) if self.config.sigma is not None else invariantState(LO)
            family = jumpFamilyFromGKSL(LO, sigmaB)
        IO.writeReport(os.path.join(self.output, "family.json"), IO.jumpFamilyToDict(family))
        gamma = 1.0 if self.config.gamma == "auto" else float(self.config.gamma)
        lift, artifacts = gnsLift(family, sigmaB, gamma)
        if self.config.gamma == "auto":
            lift = _autoGamma(lift)
        conditions = verifyBipartiteConditions(lift, artifacts, self.config.tol)
        reduced = artifacts.reducedGenerator(lift.model)
        recovery = float(np.linalg.norm(reduced.mat - LO.mat) / max(np.linalg.norm(LO.mat), 1e-300))
        logging.info(f"Overdamped generator recovers the input with relative error {recovery:.3e}")
        IO.writeLift(os.path.join(self.output, "lift.json"), lift)
        extra = {
            "bipartite_conditions": {name: result.toDict() for name, result in conditions.items()},
            "recovery_error": recovery,
            "family": artifacts.family.toDict(),
        }
        exitCode = EXIT_OK if all(result.passed for result in conditions.values()) else EXIT_CONDITION_FAILURE
        return self._analyze(lift, extra, exitCode)

    def scaling(self) -> int:
        rows, payload, failed = [], [], []
        options = dataclasses.replace(self.options(), gaps=False)
        for n in self.config.n:
            spec = _chainSpec(self.config, n)
            lift = chainLift(spec, 1.0)
            report = analyze(lift, options)
            if self._failedConditions(report):
                failed.append(n)
            atMax = report.sweep[len(report.sweep) // 2]["nu_emp"]
            report.sweep = extendToInteriorMaximum(lift, report, options)
            lambdaQ = float(np.sort(np.linalg.eigvalsh(-spec.Q))[1])
            empirical = [row["nu_emp"] for row in report.sweep]
            best = int(np.argmax(empirical))
            ratio = empirical[best] / math.sqrt(lambdaQ)
            logging.info(f"n = {n}: lambda_Q = {lambdaQ:.4e}, nu_emp(best) = {empirical[best]:.4e}, ratio = {ratio:.4f}")
            rows.append([n, lambdaQ, atMax, report.sweep[best]["gamma"], empirical[best], ratio])
            payload.append({"n": n, "lambda_Q": lambdaQ, "report": report.toDict()})

        footer = []
        if len(rows) >= 2:
            ratios = np.array([row[5] for row in rows])
            correlation, _ = scipy.stats.spearmanr(
                np.log([row[4] for row in rows]), np.log(np.sqrt([row[1] for row in rows]))
            )
            footer = [f"ratio_band={IO.formatFloat(float(ratios.max() / ratios.min()))}"]
            footer.append(f"spearman={IO.formatFloat(float(correlation))}")
        IO.writeCSV(
            os.path.join(self.output, "scaling.csv"),
            ["n", "lambda_Q", "nu_emp_gamma_max", "gamma_best", "nu_emp_best", "ratio"],
            rows,
            footer,
        )
        self._writeReport({"family": self.config.family, "runs": payload})
        return EXIT_CONDITION_FAILURE if failed else EXIT_OK

    def certificate(self) -> int:
        specs = [IO.readChainSpec(self.config.chain)] if self.config.chain else [_chainSpec(self.config, n) for n in self.config.n]
        rows, frontier, results = [], [], []
        for spec in specs:
            result = chainCertificate(spec)
            logging.info(f"n = {spec.n}: C1_min = {result.C1Min:.6f}, pass_3_2 = {result.pass32}")
            rows.append([spec.n, result.C1Min, result.minEig32, int(result.pass32)])
            results.append({"n": spec.n, **result.toDict()})
            if self.config.c2:
                frontier.extend([spec.n, C2, C1] for C2, C1 in zip(self.config.c2, certificateFrontier(spec, self.config.c2)))
        IO.writeCSV(os.path.join(self.output, "certificate.csv"), ["n", "C1_min", "min_eig_3_2", "pass_3_2"], rows)
        if self.config.c2:
            IO.writeCSV(os.path.join(self.output, "frontier.csv"), ["n", "C2", "C1"], frontier)
        self._writeReport({"certificates": results})
        return EXIT_OK if all(row[3] for row in rows) else EXIT_CONDITION_FAILURE


def run(config: RunConfig) -> int:
    """
    Validates ``config`` and runs its command.

    :return: process exit code
    """
    try:
        validateConfig(config)
        return LiftKitLogic(config).run()
    except ValueErrorsException as e:
        logging.error(str(e))
        return EXIT_INPUT_ERROR
    except ValueError as e:
        logging.error(f"Invalid input: {e}")
        return EXIT_INPUT_ERROR


def buildParser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="liftkit", description="Second-order lifts of quantum Markov semigroups")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="JSON file with default settings; flags take precedence")
    parser.add_argument("--lift", help="lift bundle JSON")
    parser.add_argument("--generator", help="GKSL generator JSON {'H': op, 'jumps': [op, ...]}")
    parser.add_argument("--sigma", help="state JSON for lift-qms")
    parser.add_argument("--chain", help="chain JSON {'n', 'Q', 'kappa'}")
    parser.add_argument("--jumps", help="jump family JSON {'jumps': [op, ...], 'bohr', 'conj'} for lift-qms")
    parser.add_argument("--output", "-o", help="output directory")
    parser.add_argument("--tol", type=float)
    parser.add_argument("--kernel-tol", dest="kernelTol", type=float)
    parser.add_argument("--gamma", help="'auto' or a positive number")
    parser.add_argument("--gamma-points", dest="gammaPoints", type=int)
    parser.add_argument("--gamma-span", dest="gammaSpan", type=float)
    parser.add_argument("--T", dest="T", type=float, help="observation period, default lambda_O^(-1/2)")
    parser.add_argument("--n", type=lambda text: _parseList(text, int), help="comma-separated chain sizes")
    parser.add_argument("--kappa", type=lambda text: _parseList(text, float), help="comma-separated dephasing spectrum")
    parser.add_argument("--epsilons", type=lambda text: _parseList(text, float))
    parser.add_argument("--t", dest="t", type=float, help="comparison time of the overdamped test")
    parser.add_argument("--c2", type=lambda text: _parseList(text, float), help="C2 values of the certificate frontier")
    parser.add_argument("--family", choices=FAMILIES)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--threads", type=int)
    parser.add_argument("--verbose", "-v", action="store_true", default=None)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = buildParser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s: %(message)s")
    try:
        config = loadConfig(args)
    except ValueErrorsException as e:
        logging.error(str(e))
        return EXIT_INPUT_ERROR
    except TypeError as e:
        logging.error(f"Invalid configuration: {e}")
        return EXIT_INPUT_ERROR
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
