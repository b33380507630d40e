"""
Second-order lifts ``L_gamma = L_A + gamma L_S`` and their overdamped limits.

A lift is checked against Conditions A to D, reduced to its overdamped
generator ``L_O`` on the fixed-point algebra ``F(L_S)``, and bracketed by an
upper bound (from the singular gap) and a lower bound (from the flow Poincare
inequality) on its convergence rate.
"""

from __future__ import annotations

import concurrent.futures
import logging
import math
import os
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np
import scipy.integrate
import scipy.linalg

from LiftKitLib.Lindblad import (
    KERNEL_TOL,
    Propagator,
    conditionalExpectation,
    ergodicityCheck,
    evolve,
    isConditionallyCP,
    kernelBasis,
)
from LiftKitLib.OperatorAlgebra import (
    DensityState,
    Superoperator,
    asOperator,
    hermitianFrame,
    kmsAdjoint,
    kmsNorm,
    kmsOperatorNorm,
    kmsOrthonormalize,
    realForm,
    sConjugate,
    sDeconjugate,
    unvec,
    vec,
    weightingMap,
)
from LiftKitLib.Spectra import (
    dirichlet,
    empiricalRate,
    gapReport,
    singularGap,
    singularGapObservable,
    spectralGap,
)
from LiftKitLib.Validation import CheckResult, LiftConditionError

PINV_TOL = 1e-10
OPTIMAL_LIFT_THRESHOLD = 0.02


class LiftedGenerator:
    """
    Generator ``L_gamma = L_A + gamma L_S`` together with its invariant state.

    The fixed-point quantities, the overdamped model and the rate bounds depend only
    on ``L_A``, ``L_S`` and ``sigma``; they are computed on first use and shared with
    the copies made by :meth:`withGamma`.

    :param LA: KMS-antisymmetric part
    :param LS: KMS-symmetric part
    :param gamma: coupling strength, > 0
    :param sigma: full-rank invariant state
    :param fsBasis: explicit basis of ``F(L_S)``; the numerical kernel of ``L_S`` is used when omitted
    :param metadata: construction parameters, carried into reports
    """

    def __init__(
        self,
        LA: Superoperator,
        LS: Superoperator,
        gamma: float,
        sigma: DensityState,
        fsBasis: Optional[list[np.ndarray]] = None,
        metadata: Optional[dict] = None,
        kernelTol: float = KERNEL_TOL,
    ):
        if LA.dim != LS.dim or LA.dim != sigma.dim:
            raise ValueError(
                f"[Lifting.LiftedGenerator] dimension mismatch: L_A {LA.dim}, L_S {LS.dim}, state {sigma.dim}"
            )
        if not (math.isfinite(gamma) and gamma > 0):
            raise ValueError(f"[Lifting.LiftedGenerator] gamma must be finite and > 0, got {gamma}")
        self.LA = LA
        self.LS = LS
        self.gamma = float(gamma)
        self.sigma = sigma
        self.metadata = dict(metadata or {})
        self.kernelTol = kernelTol
        if fsBasis is not None:
            self.__dict__["fsBasis"] = [asOperator(X, "fsBasis") for X in fsBasis]

    @property
    def dim(self) -> int:
        return self.LA.dim

    @property
    def generator(self) -> Superoperator:
        return self.LA + self.gamma * self.LS

    @cached_property
    def fsBasis(self) -> list[np.ndarray]:
        return kernelBasis(self.LS, self.kernelTol)

    @cached_property
    def frame(self) -> list[np.ndarray]:
        """KMS-orthonormal basis of ``F(L_S)``."""
        return kmsOrthonormalize(self.fsBasis, self.sigma)

    @cached_property
    def ES(self) -> Superoperator:
        return conditionalExpectation(self.fsBasis, self.sigma)

    @cached_property
    def fBasis(self) -> list[np.ndarray]:
        return kernelBasis(self.generator, self.kernelTol)

    @cached_property
    def EF(self) -> Superoperator:
        return conditionalExpectation(self.fBasis, self.sigma)

    @cached_property
    def model(self) -> OverdampedModel:
        return overdampedGenerator(self)

    @cached_property
    def upper(self) -> UpperBound:
        return upperBoundRate(self, self.model)

    @cached_property
    def constants(self) -> BoundConstants:
        """Bound constants at the default observation period ``T = lambda_O^(-1/2)``."""
        return boundConstants(self, self.model, upper=self.upper)

    def jointKernelBasis(self) -> list[np.ndarray]:
        """Basis of ``ker L_A`` intersected with ``ker L_S``, computed from the stacked matrices."""
        stacked = np.vstack([self.LA.mat, self.LS.mat])
        null = scipy.linalg.null_space(stacked, rcond=self.kernelTol)
        return [unvec(null[:, k], self.dim) for k in range(null.shape[1])]

    def withGamma(self, gamma: float) -> LiftedGenerator:
        lift = LiftedGenerator(self.LA, self.LS, gamma, self.sigma, metadata=self.metadata, kernelTol=self.kernelTol)
        for name in ("fsBasis", "frame", "ES", "fBasis", "EF", "model", "upper", "constants"):
            if name in self.__dict__:
                lift.__dict__[name] = self.__dict__[name]
        return lift

    def __repr__(self):
        return f"LiftedGenerator(dim={self.dim}, gamma={self.gamma:.4g}, metadata={self.metadata})"


def _frameMatrix(frame: list[np.ndarray]) -> np.ndarray:
    return np.column_stack([vec(X) for X in frame])


def _reducedState(fsBasis: list[np.ndarray], sigma: DensityState) -> DensityState:
    # Hilbert-Schmidt projection of sigma onto span F(L_S): the trace-preserving conditional expectation of sigma
    Q = scipy.linalg.orth(np.column_stack([vec(X) for X in fsBasis]))
    reduced = unvec(Q @ (Q.conj().T @ vec(sigma.op)), sigma.dim)
    return DensityState((reduced + reduced.conj().T) / 2, tol=1e-9)


def _nonzeroMin(values: np.ndarray, tol: float = PINV_TOL) -> float:
    scale = float(np.max(np.abs(values))) if values.size else 0.0
    nonzero = values[values > tol * scale] if scale > 0 else values[:0]
    return float(np.min(nonzero)) if nonzero.size else 0.0


def negativeSymmetricPower(LS: Superoperator, sigma: DensityState, p: float, tol: float = PINV_TOL) -> Superoperator:
    """
    ``(-L_S)^p`` on ``F(L_S)^perp`` extended by zero on ``F(L_S)``.

    Eigenvalues of the KMS-conjugated symmetric form at or below ``tol * lambda_max``
    count as kernel. ``p = -1`` is the pseudoinverse used for the overdamped limit.
    """
    conj = -sConjugate(LS, sigma)
    conj = (conj + conj.conj().T) / 2
    eigenvalues, eigenvectors = np.linalg.eigh(conj)
    keep = eigenvalues > tol * max(float(eigenvalues[-1]), 0.0)
    values = np.zeros_like(eigenvalues)
    values[keep] = eigenvalues[keep] ** p
    return sDeconjugate((eigenvectors * values) @ eigenvectors.conj().T, sigma)


def symmetricGap(LS: Superoperator, sigma: DensityState, tol: float = PINV_TOL) -> float:
    """Spectral gap ``lambda_S`` of a KMS-symmetric generator, its kernel excluded."""
    conj = -sConjugate(LS, sigma)
    return _nonzeroMin(np.linalg.eigvalsh((conj + conj.conj().T) / 2), tol)


@dataclass(frozen=True)
class OverdampedModel:
    """
    Overdamped generator ``L_O`` of a lift.

    ``LO`` acts on the full algebra and vanishes on ``F(L_S)^perp``; ``matrix`` is
    its representation in the KMS-orthonormal ``frame`` of ``F(L_S)``.
    """

    LO: Superoperator
    frame: list[np.ndarray] = field(repr=False)
    matrix: np.ndarray = field(repr=False)
    sigma: DensityState
    sigmaO: DensityState
    lambdaO: float
    ES: Superoperator = field(repr=False)
    unitalityResidual: float = 0.0
    symmetryResidual: float = 0.0

    @classmethod
    def fromGenerator(cls, LO: Superoperator, lift: LiftedGenerator) -> OverdampedModel:
        frame = lift.frame
        F = _frameMatrix(frame)
        matrix = F.conj().T @ weightingMap(lift.sigma).mat @ LO.mat @ F
        unitality = float(np.linalg.norm(LO.apply(np.eye(lift.dim))))
        symmetry = float(np.linalg.norm(sConjugate(LO - kmsAdjoint(LO, lift.sigma), lift.sigma), 2))
        scale = max(1.0, LO.norm())
        if unitality > 1e-9 * scale or symmetry > 1e-9 * scale:
            logging.warning(
                f"Overdamped generator is not a unital KMS-symmetric map: L_O(1) residual {unitality:.3e}, "
                f"symmetry residual {symmetry:.3e}"
            )
        hermitian = -(matrix + matrix.conj().T) / 2
        lambdaO = _nonzeroMin(np.linalg.eigvalsh(hermitian))
        return cls(
            LO=LO,
            frame=frame,
            matrix=matrix,
            sigma=lift.sigma,
            sigmaO=_reducedState(lift.fsBasis, lift.sigma),
            lambdaO=lambdaO,
            ES=lift.ES,
            unitalityResidual=unitality,
            symmetryResidual=symmetry,
        )

    def toDict(self) -> dict:
        return {
            "lambda_O": self.lambdaO,
            "frame_dim": len(self.frame),
            "unitality_residual": self.unitalityResidual,
            "symmetry_residual": self.symmetryResidual,
        }


def verifyConditionA(LS: Superoperator, LA: Superoperator, sigma: DensityState, tol: float = KERNEL_TOL) -> CheckResult:
    """
    Condition A: ``L_S`` is KMS-symmetric, ``L_A`` KMS-antisymmetric, and both leave ``sigma`` invariant.
    """
    symmetric = float(np.linalg.norm(sConjugate(LS - kmsAdjoint(LS, sigma), sigma), 2))
    antisymmetric = float(np.linalg.norm(sConjugate(LA + kmsAdjoint(LA, sigma), sigma), 2))
    invariantS = float(np.linalg.norm(LS.hsAdjoint().apply(sigma.op)))
    invariantA = float(np.linalg.norm(LA.hsAdjoint().apply(sigma.op)))
    scale = max(1.0, LS.norm(), LA.norm())
    residual = max(symmetric, antisymmetric, invariantS, invariantA)
    return CheckResult(
        residual <= tol * scale,
        residual,
        {
            "symmetric_residual": symmetric,
            "antisymmetric_residual": antisymmetric,
            "invariance_residual_S": invariantS,
            "invariance_residual_A": invariantA,
        },
    )


def verifyConditionB(lift: LiftedGenerator) -> CheckResult:
    """Condition B: ``dim F(L_S) > dim F(L_gamma)``."""
    dimFS, dimF = len(lift.fsBasis), len(lift.fBasis)
    return CheckResult(dimFS > dimF, float(dimFS - dimF), {"dim_FS": dimFS, "dim_F": dimF})


def verifyConditionC(lift: LiftedGenerator, tol: float = KERNEL_TOL) -> CheckResult:
    """Condition C: ``E_S L_A E_S = 0`` in KMS operator norm."""
    residual = kmsOperatorNorm(lift.ES @ lift.LA @ lift.ES, lift.sigma)
    return CheckResult(residual <= tol * max(1.0, lift.LA.norm()), residual)


def firstOrderGenerator(lift: LiftedGenerator) -> np.ndarray:
    """Frame matrix of ``E_S L_A E_S`` on ``F(L_S)``; it vanishes when Condition C holds."""
    F = _frameMatrix(lift.frame)
    return F.conj().T @ weightingMap(lift.sigma).mat @ (lift.ES @ lift.LA @ lift.ES).mat @ F


def overdampedGeneratorGeneral(lift: LiftedGenerator, S: Superoperator, tol: float = PINV_TOL) -> OverdampedModel:
    """
    Overdamped generator ``L_O = -(L_A E_S)* S (L_A E_S)`` for a positive weight ``S``.

    :param S: superoperator that must be strictly positive on ``F(L_S)^perp`` in the KMS geometry
    :raises ValueError: if ``S`` is not positive there
    """
    sigma = lift.sigma
    complement = sConjugate(Superoperator.identity(lift.dim) - lift.ES, sigma)
    eigenvalues, eigenvectors = np.linalg.eigh((complement + complement.conj().T) / 2)
    U = eigenvectors[:, eigenvalues > 0.5]
    if U.shape[1]:
        weight = sConjugate(S, sigma)
        weightEigenvalues = np.linalg.eigvalsh(U.conj().T @ ((weight + weight.conj().T) / 2) @ U)
        if weightEigenvalues[0] <= tol * max(float(weightEigenvalues[-1]), 1e-300):
            raise ValueError(
                f"[Lifting.overdampedGeneratorGeneral] S is not positive on F(L_S)^perp "
                f"(min eigenvalue {weightEigenvalues[0]:.3e})"
            )
    B = lift.LA @ lift.ES
    LO = -1.0 * (kmsAdjoint(B, sigma) @ S @ B)
    return OverdampedModel.fromGenerator(LO, lift)


def overdampedGenerator(lift: LiftedGenerator, tol: float = 1e-8) -> OverdampedModel:
    """
    Overdamped generator ``L_O = -(L_A E_S)* (-L_S)^-1 (L_A E_S)``.

    :raises ValueError: if ``L_A E_S`` leaves ``ran(L_S)``, meaning Condition C fails
    """
    defect = kmsOperatorNorm(lift.ES @ lift.LA @ lift.ES, lift.sigma)
    if defect > tol * max(1.0, lift.LA.norm()):
        raise ValueError(
            f"[Lifting.overdampedGenerator] L_A E_S is not in ran(L_S) (defect {defect:.3e}); Condition C fails"
        )
    return overdampedGeneratorGeneral(lift, negativeSymmetricPower(lift.LS, lift.sigma, -1.0))


def verifyConditionD(model: OverdampedModel, tol: float = KERNEL_TOL) -> CheckResult:
    """
    Condition D: ``L_O`` generates a QMS on ``F(L_S)`` that is KMS-symmetric for
    ``sigma_o`` and compatible with ``sigma``.

    Complete positivity is tested relative to ``E_S``, i.e. on the subalgebra
    ``F(L_S)`` rather than on the full matrix algebra.
    """
    scale = max(1.0, model.LO.norm())
    cp = isConditionallyCP(model.LO, tol, reference=model.ES)

    F = _frameMatrix(model.frame)
    reducedGram = F.conj().T @ weightingMap(model.sigmaO).mat @ F
    reducedGram = (reducedGram + reducedGram.conj().T) / 2
    eigenvalues, eigenvectors = np.linalg.eigh(reducedGram)
    if eigenvalues[0] <= 0:
        raise ValueError("[Lifting.verifyConditionD] reduced state does not induce an inner product on F(L_S)")
    root = (eigenvectors * np.sqrt(eigenvalues)) @ eigenvectors.conj().T
    rootInverse = (eigenvectors / np.sqrt(eigenvalues)) @ eigenvectors.conj().T
    conjugated = root @ model.matrix @ rootInverse
    kmsResidual = float(np.linalg.norm(conjugated - conjugated.conj().T, 2))
    compatibility = float(np.linalg.norm(model.matrix - reducedGram @ model.matrix, 2))

    passed = cp.passed and kmsResidual <= tol * scale and compatibility <= tol * scale
    residual = max(max(0.0, -cp.residual), kmsResidual, compatibility)
    return CheckResult(
        passed,
        residual,
        {
            "cp_min_eig": cp.residual,
            "cp_precondition": cp.details.get("precondition"),
            "kms_residual": kmsResidual,
            "compatibility_residual": compatibility,
        },
    )


@dataclass(frozen=True)
class OverdampedConvergence:
    epsilons: list[float]
    errors: list[float]
    slope: Optional[float]

    def toDict(self) -> dict:
        return {"epsilons": self.epsilons, "errors": self.errors, "slope": self.slope}


def overdampedConvergenceTest(
    lift: LiftedGenerator,
    X0,
    t: float,
    epsilons,
    model: Optional[OverdampedModel] = None,
) -> OverdampedConvergence:
    """
    Compares ``exp(t (L_A / eps + L_S / eps^2)) X0`` with ``exp(t L_O) X0``.

    :param X0: initial observable in ``F(L_S)``
    :param t: comparison time
    :param epsilons: scale parameters
    :return: KMS errors per ``eps`` and the log-log slope of error against ``eps``; the slope is ``None`` when
        every error is below ``1e-10``
    """
    X0 = asOperator(X0)
    model = model or overdampedGenerator(lift)
    reference = evolve(model.LO, X0, t)
    errors = []
    for eps in epsilons:
        scaled = (1.0 / eps) * lift.LA + (1.0 / eps**2) * lift.LS
        errors.append(kmsNorm(evolve(scaled, X0, t) - reference, lift.sigma))
        logging.info(f"Overdamped comparison at eps = {eps:g}: error {errors[-1]:.4e}")
    errors = np.asarray(errors)
    slope = None
    if np.max(errors) > 1e-10:
        keep = errors > 0
        slope = float(np.polyfit(np.log(np.asarray(epsilons)[keep]), np.log(errors[keep]), 1)[0])
    return OverdampedConvergence([float(e) for e in epsilons], errors.tolist(), slope)


@dataclass(frozen=True)
class UpperBound:
    nu: float
    sTildeM: float
    lambdaO: float
    tRelLower: float

    def toDict(self) -> dict:
        return {"nu_upper": self.nu, "s_tilde_m": self.sTildeM, "lambda_O": self.lambdaO, "t_rel_lower": self.tRelLower}


def _rangeBasis(mat: np.ndarray, tol: float = PINV_TOL) -> np.ndarray:
    # orthonormal range basis; Hermiticity-preserving maps are decomposed in real coordinates
    try:
        real = realForm(Superoperator(mat))
    except ValueError:
        U, singular, _ = np.linalg.svd(mat)
    else:
        U, singular, _ = np.linalg.svd(real)
        U = hermitianFrame(math.isqrt(mat.shape[0])) @ U
    if singular.size == 0 or singular[0] == 0:
        return U[:, :0]
    return U[:, : int(np.sum(singular > tol * singular[0]))]


def upperBoundRate(lift: LiftedGenerator, model: OverdampedModel, tol: float = PINV_TOL) -> UpperBound:
    """
    Upper bound ``sqrt(lambda_O / s~_m)`` on the convergence rate of every ``L_gamma``.

    ``s~_m`` is the smallest nonzero eigenvalue of ``Pi_1 (-L_S)^-1 Pi_1`` where ``Pi_1``
    is the KMS-orthogonal projection onto ``ran(L_A E_S)``. The same quantity gives
    the relaxation-time lower bound ``1 / (2 nu)``.

    :raises ValueError: if ``s~_m`` vanishes
    """
    sigma = lift.sigma
    U = _rangeBasis(sConjugate(lift.LA @ lift.ES, sigma), tol)
    if U.shape[1] == 0:
        raise ValueError("[Lifting.upperBoundRate] L_A E_S vanishes; s~_m is undefined")
    pinv = sConjugate(negativeSymmetricPower(lift.LS, sigma, -1.0, tol), sigma)
    compressed = U.conj().T @ ((pinv + pinv.conj().T) / 2) @ U
    sTildeM = float(np.linalg.eigvalsh(compressed)[0])
    if sTildeM <= tol:
        raise ValueError(f"[Lifting.upperBoundRate] s~_m = {sTildeM:.3e} is not positive")
    nu = math.sqrt(model.lambdaO / sTildeM)
    return UpperBound(nu=nu, sTildeM=sTildeM, lambdaO=model.lambdaO, tRelLower=0.5 / nu if nu > 0 else math.inf)


def divergenceConstants(T: float, lambdaO: float) -> tuple[float, float, float, float]:
    """
    Constants ``(c1, c2, c3, c4)`` of the divergence-equation estimate.

    Each constant is the maximum over the five boundary cases of the estimate.
    """
    if not (T > 0 and lambdaO > 0):
        raise ValueError(f"[Lifting.divergenceConstants] T and lambda_O must be > 0, got T={T}, lambda_O={lambdaO}")
    root = math.sqrt(lambdaO)
    c1 = 1.0 + math.e / math.sqrt(2.0)
    c2 = math.e
    c3 = max(max(1.0 / root, T / math.pi), (1.0 + math.e / math.sqrt(2.0)) / root, 0.5 * T * (1.0 + 1.0 / math.sqrt(3.0)))
    c4 = max(8.0, 5.0 + math.sqrt(2.0), (math.sqrt(2.0) * math.pi * math.e + 2.0) / (root * T))
    return c1, c2, c3, c4


@dataclass(frozen=True)
class BoundConstants:
    K0: float
    K1: float
    K2: float
    K3: float
    c1: float
    c2: float
    c3: float
    c4: float
    sM: float
    sTildeM: float
    lambdaS: float
    lambdaO: float
    T: float
    K2Crude: float = 0.0
    K2Restricted: float = 0.0

    def toDict(self) -> dict:
        return {
            "K0": self.K0,
            "K1": self.K1,
            "K2": self.K2,
            "K3": self.K3,
            "K2_crude": self.K2Crude,
            "K2_restricted": self.K2Restricted,
            "c1": self.c1,
            "c2": self.c2,
            "c3": self.c3,
            "c4": self.c4,
            "s_M": self.sM,
            "s_tilde_m": self.sTildeM,
            "lambda_S": self.lambdaS,
            "lambda_O": self.lambdaO,
            "T": self.T,
        }


def boundConstants(
    lift: LiftedGenerator,
    model: OverdampedModel,
    T: Optional[float] = None,
    upper: Optional[UpperBound] = None,
) -> BoundConstants:
    """
    Collects the constants of the flow Poincare lower bound.

    ``K2`` is the KMS operator norm of ``(id - E_S) L_A* (-L_S)^(-1/2)``. Its
    restriction to ``ran((-L_S)^(-1/2) L_A E_S)`` is reported as ``K2Restricted``.
    Lifts built by :func:`Constructions.gnsLift` over a uniform ``sigma_B`` carry
    ``J0`` and ``kappa`` in their metadata and use ``K1 = sqrt(J0)``,
    ``K2 = sqrt(J0 max(0, -kappa))`` instead.

    :param T: observation period, ``lambda_O^(-1/2)`` by default
    """
    sigma = lift.sigma
    if model.lambdaO <= 0:
        raise ValueError("[Lifting.boundConstants] lambda_O is zero; the overdamped generator has no gap")
    T = T if T is not None else model.lambdaO**-0.5
    upper = upper or upperBoundRate(lift, model)
    lambdaS = symmetricGap(lift.LS, sigma)
    if lambdaS <= 0:
        raise ValueError("[Lifting.boundConstants] L_S has no spectral gap")

    inverseRoot = negativeSymmetricPower(lift.LS, sigma, -0.5)
    complement = Superoperator.identity(lift.dim) - lift.ES
    operator = sConjugate(complement @ kmsAdjoint(lift.LA, sigma) @ inverseRoot, sigma)
    K2Crude = float(np.linalg.norm(operator, 2))
    U = _rangeBasis(sConjugate(inverseRoot @ lift.LA @ lift.ES, sigma))
    K2Restricted = float(np.linalg.norm(operator @ U, 2)) if U.shape[1] else 0.0

    K1, K2 = 0.0, K2Crude
    if lift.metadata.get("construction") == "gns" and lift.metadata.get("kappa") is not None:
        J0 = int(lift.metadata["J0"])
        kappa = float(lift.metadata["kappa"])
        K1, K2 = math.sqrt(J0), math.sqrt(J0 * max(0.0, -kappa))

    c1, c2, c3, c4 = divergenceConstants(T, model.lambdaO)
    return BoundConstants(
        K0=1.0,
        K1=K1,
        K2=K2,
        K3=1.0,
        c1=c1,
        c2=c2,
        c3=c3,
        c4=c4,
        sM=1.0 / lambdaS,
        sTildeM=upper.sTildeM,
        lambdaS=lambdaS,
        lambdaO=model.lambdaO,
        T=T,
        K2Crude=K2Crude,
        K2Restricted=K2Restricted,
    )


@dataclass(frozen=True)
class LowerBound:
    nu: float
    C0: float
    C1: float
    gammaMax: float
    nuMax: float

    def toDict(self) -> dict:
        return {"nu_lower": self.nu, "C0": self.C0, "C1": self.C1, "gamma_max": self.gammaMax, "nu_max": self.nuMax}


def lowerBoundRate(consts: BoundConstants, gamma: float) -> LowerBound:
    """
    Lower bound ``nu = gamma / (gamma^2 C0 + C1)`` and its optimum over ``gamma``.
    """
    if not gamma > 0:
        raise ValueError(f"[Lifting.lowerBoundRate] gamma must be > 0, got {gamma}")
    rootLambdaS = math.sqrt(consts.lambdaS)
    C0 = 2.0 * consts.c3**2 * consts.K0**2
    inner = (
        math.sqrt(consts.sM) / rootLambdaS * consts.c4
        + consts.K3 * consts.c2
        + (consts.K1 * consts.c1 + consts.K2 * consts.c3) / rootLambdaS
    )
    C1 = 2.0 * inner**2 + 1.0 / consts.lambdaS
    return LowerBound(
        nu=gamma / (gamma**2 * C0 + C1),
        C0=C0,
        C1=C1,
        gammaMax=math.sqrt(C1 / C0),
        nuMax=1.0 / (2.0 * math.sqrt(C0 * C1)),
    )


@dataclass(frozen=True)
class FlowPoincareResult:
    lhs: float
    rhs: float
    passed: bool
    nQuad: int

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs if self.rhs > 0 else 0.0

    def toDict(self) -> dict:
        return {"lhs": self.lhs, "rhs": self.rhs, "passed": self.passed, "ratio": self.ratio, "n_quad": self.nQuad}


def flowPoincareCheck(
    lift: LiftedGenerator,
    X0,
    T: float,
    nQuad: int = 64,
    consts: Optional[BoundConstants] = None,
    rtol: float = 1e-6,
    maxDoublings: int = 8,
) -> FlowPoincareResult:
    """
    Checks ``alpha_T (1/T) int ||x_t||^2 dt <= (1/T) int E_{L_S}(x_t) dt`` along ``x_t = exp(t L_gamma) X0``.

    ``alpha_T = 1 / (gamma^2 C0 + C1)``. Both integrals use composite Simpson
    quadrature, doubling ``nQuad`` until they are stable to ``rtol``.

    :param X0: initial observable with ``E_F(X0) = 0``
    :param nQuad: initial number of quadrature intervals, >= 16
    :param consts: bound constants; computed from the lift when omitted
    :raises ValueError: if the quadrature does not stabilize
    """
    if nQuad < 16:
        raise ValueError(f"[Lifting.flowPoincareCheck] nQuad must be >= 16, got {nQuad}")
    if not T > 0:
        raise ValueError(f"[Lifting.flowPoincareCheck] T must be > 0, got {T}")
    X0 = asOperator(X0)
    if consts is None:
        consts = boundConstants(lift, overdampedGenerator(lift), T)
    lower = lowerBoundRate(consts, lift.gamma)
    alpha = 1.0 / (lift.gamma**2 * lower.C0 + lower.C1)
    propagator = Propagator(lift.generator)

    def integrals(n: int) -> tuple[float, float]:
        t = np.linspace(0.0, T, n + 1)
        states = propagator.evolveMany(X0, t)
        norms = np.array([kmsNorm(X, lift.sigma) ** 2 for X in states])
        energies = np.array([dirichlet(lift.LS, lift.sigma, X) for X in states])
        return (
            alpha * scipy.integrate.simpson(norms, x=t) / T,
            scipy.integrate.simpson(energies, x=t) / T,
        )

    n = nQuad
    lhs, rhs = integrals(n)
    for _ in range(maxDoublings):
        n *= 2
        newLhs, newRhs = integrals(n)
        stable = all(abs(new - old) <= rtol * max(abs(new), 1e-300) for new, old in ((newLhs, lhs), (newRhs, rhs)))
        lhs, rhs = newLhs, newRhs
        if stable:
            logging.debug(f"Flow Poincare quadrature stable at {n} intervals")
            return FlowPoincareResult(lhs, rhs, lhs <= rhs * (1.0 + 1e-6), n)
    raise ValueError(f"[Lifting.flowPoincareCheck] quadrature did not stabilize to {rtol:g} after {n} intervals")


@dataclass
class AnalyzeOptions:
    tol: float = KERNEL_TOL
    T: Optional[float] = None
    gammaPoints: int = 25
    gammaSpan: float = 10.0
    gammaCenter: Optional[float] = None
    tPoints: int = 200
    tHorizon: float = 30.0
    seed: int = 0
    threads: Optional[int] = None
    empirical: bool = True
    gaps: bool = True
    optimalThreshold: float = OPTIMAL_LIFT_THRESHOLD


@dataclass
class RateReport:
    conditions: dict[str, CheckResult]
    model: OverdampedModel
    upper: UpperBound
    constants: BoundConstants
    lower: LowerBound
    sweep: list[dict] = field(default_factory=list)
    nuPriorEstimate: float = 0.0
    optimalLiftCandidate: bool = False
    gaps: Optional[dict] = None
    metadata: dict = field(default_factory=dict)

    @property
    def nuUpper(self) -> float:
        return self.upper.nu

    @property
    def gammaMax(self) -> float:
        return self.lower.gammaMax

    @property
    def nuMax(self) -> float:
        return self.lower.nuMax

    def toDict(self) -> dict:
        return {
            "conditions": {name: result.toDict() for name, result in self.conditions.items()},
            "overdamped": self.model.toDict(),
            "upper": self.upper.toDict(),
            "constants": self.constants.toDict(),
            "lower": self.lower.toDict(),
            "gamma_sweep": self.sweep,
            "nu_prior_estimate": self.nuPriorEstimate,
            "optimal_lift_candidate": self.optimalLiftCandidate,
            "gaps": self.gaps,
            "metadata": self.metadata,
        }


def threadCount(requested: Optional[int] = None) -> int:
    """Worker count: ``requested`` if given, capped by ``LIFTKIT_THREADS`` when that is set."""
    count = requested or os.cpu_count() or 1
    cap = os.environ.get("LIFTKIT_THREADS")
    if cap:
        try:
            count = min(count, max(1, int(cap)))
        except ValueError:
            logging.warning(f"Ignoring non-integer LIFTKIT_THREADS={cap!r}")
    return count


def meanZeroObservable(lift: LiftedGenerator, seed: int = 0) -> np.ndarray:
    """Seeded random Hermitian observable with its fixed-point component removed."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((lift.dim, lift.dim)) + 1j * rng.standard_normal((lift.dim, lift.dim))
    X = (X + X.conj().T) / 2
    return X - lift.EF.apply(X)


def _empiricalRow(
    lift: LiftedGenerator, gamma: float, X0: np.ndarray, options: AnalyzeOptions, nuLower: float, projection: Superoperator
) -> dict:
    generator = lift.withGamma(gamma).generator
    gap = spectralGap(generator, lift.sigma, options.tol)
    if gap <= 0:
        raise ValueError(f"[Lifting.empiricalSweep] L_gamma has no spectral gap at gamma = {gamma:g}")
    tGrid = np.linspace(0.0, options.tHorizon / gap, options.tPoints)
    fit = empiricalRate(generator, lift.sigma, X0, tGrid, projection=projection)
    logging.info(f"gamma = {gamma:.4g}: nu_lower = {nuLower:.4e}, nu_emp = {fit.nu:.4e}, C_emp = {fit.C:.4f}")
    return {"gamma": float(gamma), "nu_lower": nuLower, "nu_emp": fit.nu, "C_emp": fit.C}


def empiricalSweep(
    lift: LiftedGenerator,
    grid,
    constants: BoundConstants,
    options: Optional[AnalyzeOptions] = None,
    X0: Optional[np.ndarray] = None,
) -> list[dict]:
    """
    Lower bound and empirical decay fit of ``L_gamma`` for every ``gamma`` in ``grid``.

    Each fit samples ``tPoints`` times up to ``tHorizon`` over the spectral gap of
    ``L_gamma``. The fits run in a thread pool and are returned in grid order.

    :param X0: initial observable, the singular-gap observable of ``lift`` by default
    """
    options = options or AnalyzeOptions()
    if X0 is None:
        X0 = singularGapObservable(lift.generator, lift.sigma, options.tol)
    projection = lift.EF
    nuLower = [lowerBoundRate(constants, gamma).nu for gamma in grid]
    with concurrent.futures.ThreadPoolExecutor(max_workers=threadCount(options.threads)) as executor:
        return list(
            executor.map(lambda args: _empiricalRow(lift, args[0], X0, options, args[1], projection), zip(grid, nuLower))
        )


def nuPriorEstimate(lift: LiftedGenerator, lambdaS: float) -> float:
    """
    Order-level rate estimate ``sqrt(lambda_S) s_A^2 / ((s_A + ||(id - E_S) L_A*||) sqrt(||L_S||))``.

    ``s_A`` is the KMS singular gap of ``L_A E_S``.
    """
    sigma = lift.sigma
    sA = singularGap(lift.LA @ lift.ES, sigma)
    if sA == 0:
        return 0.0
    leak = kmsOperatorNorm((Superoperator.identity(lift.dim) - lift.ES) @ kmsAdjoint(lift.LA, sigma), sigma)
    return math.sqrt(lambdaS) * sA**2 / ((sA + leak) * math.sqrt(kmsOperatorNorm(lift.LS, sigma)))


def analyze(lift: LiftedGenerator, options: Optional[AnalyzeOptions] = None) -> RateReport:
    """
    Runs the full rate analysis of a lift.

    Conditions A to C must hold, otherwise :class:`LiftConditionError` is raised
    with the condition report. Condition D is recorded. A lift is an optimal-lift
    candidate when D holds and the prior estimate ``nuPriorEstimate / sqrt(lambda_O)``
    reaches ``optimalThreshold``; the certified ratio ``nu_max / sqrt(lambda_O)``
    is reported next to it. The gamma sweep spans
    ``[center / span, center * span]`` log-uniformly around ``gamma_max`` unless
    ``gammaCenter`` is given.
    """
    options = options or AnalyzeOptions()
    conditions = {
        "A": verifyConditionA(lift.LS, lift.LA, lift.sigma, options.tol),
        "B": verifyConditionB(lift),
        "C": verifyConditionC(lift, options.tol),
    }
    for name, result in conditions.items():
        logging.info(f"Condition {name}: {'pass' if result.passed else 'FAIL'} (residual {result.residual:.3e})")
    if not all(result.passed for result in conditions.values()):
        raise LiftConditionError(conditions)

    model = lift.model
    conditions["D"] = verifyConditionD(model, options.tol)
    logging.info(f"Condition D: {'pass' if conditions['D'].passed else 'FAIL'}")
    upper = lift.upper
    constants = lift.constants if options.T is None else boundConstants(lift, model, options.T, upper)
    lower = lowerBoundRate(constants, lowerBoundRate(constants, 1.0).gammaMax)
    logging.info(
        f"nu_upper = {upper.nu:.4e}, gamma_max = {lower.gammaMax:.4e}, nu_max = {lower.nuMax:.4e}, "
        f"lambda_O = {model.lambdaO:.4e}"
    )

    center = options.gammaCenter or lower.gammaMax
    grid = np.geomspace(center / options.gammaSpan, center * options.gammaSpan, options.gammaPoints)
    if options.empirical:
        sweep = empiricalSweep(lift, grid, constants, options)
    else:
        sweep = [{"gamma": float(gamma), "nu_lower": lowerBoundRate(constants, gamma).nu} for gamma in grid]

    gaps = None
    if options.gaps and ergodicityCheck(lift.generator, options.tol).passed:
        gaps = gapReport(lift.generator, lift.sigma, options.tol).toDict()

    prior = nuPriorEstimate(lift, constants.lambdaS)
    certifiedRatio = lower.nuMax / math.sqrt(model.lambdaO)
    priorRatio = prior / math.sqrt(model.lambdaO)
    candidate = bool(conditions["D"].passed and priorRatio >= options.optimalThreshold)
    logging.info(f"nu_prior / sqrt(lambda_O) = {priorRatio:.4f}, optimal-lift candidate: {candidate}")
    return RateReport(
        conditions=conditions,
        model=model,
        upper=upper,
        constants=constants,
        lower=lower,
        sweep=sweep,
        nuPriorEstimate=prior,
        optimalLiftCandidate=candidate,
        gaps=gaps,
        metadata={
            **lift.metadata,
            "gamma": lift.gamma,
            "nu_lower_over_sqrt_lambda_O": certifiedRatio,
            "nu_prior_over_sqrt_lambda_O": priorRatio,
        },
    )
