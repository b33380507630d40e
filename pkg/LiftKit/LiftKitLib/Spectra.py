"""
Spectral quantities of quantum Markov semigroup generators in the KMS geometry.

Gaps are computed on the ``Gamma^(1/2)``-conjugated matrix of a generator, so
plain Euclidean eigenvalue and singular value routines return KMS quantities.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.optimize

from LiftKitLib.Lindblad import (
    KERNEL_TOL,
    Propagator,
    ergodicityCheck,
    evolveUniform,
    fixedPointProjection,
    kernelBasis,
    spectrum,
)
from LiftKitLib.OperatorAlgebra import (
    DensityState,
    Superoperator,
    asOperator,
    hermitianFrame,
    kmsAdjoint,
    kmsInner,
    kmsNorm,
    realForm,
    sAdjoint,
    sConjugate,
    unvec,
    vec,
    weightingMap,
)
from LiftKitLib.Validation import CheckResult

UNDERFLOW_FLOOR = 1e-14


@dataclass(frozen=True)
class GapReport:
    spectralGap: float
    singularGap: float
    kernelDim: int
    hypocoercive: bool

    def toDict(self) -> dict:
        return {
            "spectral_gap": self.spectralGap,
            "singular_gap": self.singularGap,
            "kernel_dim": self.kernelDim,
            "hypocoercive": self.hypocoercive,
        }


@dataclass(frozen=True)
class EmpiricalRate:
    """Least-squares exponential fit of a KMS-norm decay curve."""

    nu: float
    C: float
    t: np.ndarray = field(repr=False)
    norms: np.ndarray = field(repr=False)
    fitted: np.ndarray = field(repr=False)

    def toDict(self) -> dict:
        return {"nu_emp": self.nu, "C_emp": self.C}


def _checkDims(L: Superoperator, sigma: DensityState, where: str) -> None:
    if L.dim != sigma.dim:
        raise ValueError(f"[Spectra.{where}] dimension mismatch: generator {L.dim}, state {sigma.dim}")


def _requireErgodic(L: Superoperator, where: str, tol: float, eigenvalues: Optional[np.ndarray] = None) -> None:
    result = ergodicityCheck(L, tol, eigenvalues)
    if not result.passed:
        raise ValueError(f"[Spectra.{where}] generator is not ergodic, offending eigenvalues {result.details['violations']}")


def isDetailedBalanced(L: Superoperator, sigma: DensityState, s: float = 0.5, tol: float = 1e-10) -> CheckResult:
    """
    Self-adjointness of ``L`` for the ``s``-inner product of ``sigma``.

    ``s = 1/2`` tests KMS and ``s = 1`` tests GNS detailed balance. The residual is
    ``||L - L^(*s)||`` in operator norm on the weighted space.
    """
    _checkDims(L, sigma, "isDetailedBalanced")
    difference = L - sAdjoint(L, sigma, s)
    residual = float(np.linalg.norm(sConjugate(difference, sigma, s), 2))
    return CheckResult(residual <= tol, residual)


def decompose(L: Superoperator, sigma: DensityState) -> tuple[Superoperator, Superoperator]:
    """Splits ``L`` into its KMS-symmetric and KMS-antisymmetric parts."""
    _checkDims(L, sigma, "decompose")
    star = kmsAdjoint(L, sigma)
    return 0.5 * (L + star), 0.5 * (L - star)


def spectralGap(L: Superoperator, sigma: DensityState, tol: float = KERNEL_TOL) -> float:
    """
    Smallest real part in the spectrum of ``-L`` once the kernel is removed.

    :raises ValueError: if ``L`` has purely imaginary eigenvalues
    """
    _checkDims(L, sigma, "spectralGap")
    eigenvalues = spectrum(L)
    _requireErgodic(L, "spectralGap", tol, eigenvalues)
    scale = float(np.max(np.abs(eigenvalues)))
    nonzero = eigenvalues[np.abs(eigenvalues) > tol * scale] if scale > 0 else eigenvalues[:0]
    if nonzero.size == 0:
        return 0.0
    return float(max(np.min(-nonzero.real), 0.0))


def _kmsSingularSystem(L: Superoperator, sigma: DensityState, vectors: bool):
    # singular values (and left singular vectors as KMS-orthonormal vec columns) of the KMS-conjugated L
    conjugated = Superoperator(sConjugate(L, sigma))
    try:
        mat, frame = realForm(conjugated), hermitianFrame(L.dim)
    except ValueError:
        mat, frame = conjugated.mat, None
    if not vectors:
        return np.linalg.svd(mat, compute_uv=False), None
    U, singular, _ = np.linalg.svd(mat)
    U = U if frame is None else frame @ U
    return singular, weightingMap(sigma, -0.5).mat @ U


def singularGap(L: Superoperator, sigma: DensityState, tol: float = KERNEL_TOL) -> float:
    """Smallest nonzero singular value of ``L`` in the KMS geometry."""
    _checkDims(L, sigma, "singularGap")
    singular, _ = _kmsSingularSystem(L, sigma, vectors=False)
    if singular[0] == 0:
        return 0.0
    nonzero = singular[singular > tol * singular[0]]
    return float(nonzero[-1])


def singularGapObservable(L: Superoperator, sigma: DensityState, tol: float = KERNEL_TOL) -> np.ndarray:
    """
    Unit KMS-norm observable ``X`` in ``ran(L)`` whose preimage is largest: ``||L^+ X|| = 1 / s(L)``.

    Since ``int_0^inf ||P_t X|| dt >= 1 / s(L)`` for this ``X``, every envelope
    ``||P_t X|| <= C exp(-nu t)`` of a KMS-contractive semigroup satisfies
    ``nu <= (1 + log C) s(L)``. The observable is Hermitian whenever ``L``
    preserves Hermiticity.

    :raises ValueError: if ``L`` vanishes
    """
    _checkDims(L, sigma, "singularGapObservable")
    singular, vectors = _kmsSingularSystem(L, sigma, vectors=True)
    if singular[0] == 0:
        raise ValueError("[Spectra.singularGapObservable] generator vanishes")
    rank = int(np.sum(singular > tol * singular[0]))
    return unvec(vectors[:, rank - 1], L.dim)


def gapReport(L: Superoperator, sigma: DensityState, tol: float = KERNEL_TOL) -> GapReport:
    return GapReport(
        spectralGap=spectralGap(L, sigma, tol),
        singularGap=singularGap(L, sigma, tol),
        kernelDim=len(kernelBasis(L, tol)),
        hypocoercive=hypocoercivityCheck(L, sigma, tol).passed,
    )


def dirichletForm(L: Superoperator, sigma: DensityState, X, Y) -> complex:
    """Sesquilinear Dirichlet form ``-<X, L(Y)>_{sigma,1/2}``."""
    return -kmsInner(X, L.apply(Y), sigma)


def dirichlet(LS: Superoperator, sigma: DensityState, X, tol: float = 1e-12) -> float:
    """
    Dirichlet energy ``-<X, L_S(X)>_{sigma,1/2}`` of a KMS-symmetric negative generator.

    Values in ``[-tol * scale, 0)`` are clipped to zero; anything more negative
    means ``L_S`` is not negative and raises.
    """
    _checkDims(LS, sigma, "dirichlet")
    X = asOperator(X)
    value = dirichletForm(LS, sigma, X, X).real
    scale = max(1.0, LS.norm() * kmsNorm(X, sigma) ** 2)
    if value < -tol * scale:
        raise ValueError(f"[Spectra.dirichlet] Dirichlet form is negative ({value:.3e}); generator is not dissipative")
    return max(value, 0.0)


def empiricalRate(
    L: Superoperator,
    sigma: DensityState,
    X0,
    tGrid,
    floor: float = UNDERFLOW_FLOOR,
    projection: Optional[Superoperator] = None,
) -> EmpiricalRate:
    """
    Fits ``||P_t X0||_{2,sigma} <= C ||X0||_{2,sigma} exp(-nu t)`` to a sampled decay curve.

    ``nu`` is minus the least-squares slope of ``log ||P_t X0||`` over the tail half
    of ``tGrid``. ``C`` is the smallest prefactor for which the envelope holds at every
    retained sample, so ``C >= 1`` whenever ``tGrid`` starts at 0. Uniform grids are
    propagated with one matrix exponential.

    :param X0: initial observable, expected to have ``E_F(X0) = 0``
    :param tGrid: increasing sample times
    :param floor: norms at or below this value are dropped and the grid is truncated there
    :param projection: ``E_F`` of ``L`` when already known
    :return: fitted rate ``nu`` and prefactor ``C``
    """
    _checkDims(L, sigma, "empiricalRate")
    t = np.asarray(tGrid, dtype=float)
    if t.ndim != 1 or t.size < 2 or np.any(np.diff(t) <= 0) or t[0] < 0:
        raise ValueError("[Spectra.empiricalRate] tGrid must be a non-negative strictly increasing sequence of length >= 2")
    X0 = asOperator(X0)
    initial = kmsNorm(X0, sigma)
    if initial <= floor:
        raise ValueError(f"[Spectra.empiricalRate] initial norm {initial:.3e} is below the underflow floor")
    projection = projection or fixedPointProjection(L, sigma)
    residue = kmsNorm(projection.apply(X0), sigma)
    if residue > 1e-8 * initial:
        logging.warning(f"Initial observable has a fixed-point component of norm {residue:.3e}")

    steps = np.diff(t)
    if t[0] == 0 and np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
        states = evolveUniform(L, X0, float(steps[0]), t.size)
    else:
        states = Propagator(L).evolveMany(X0, t)
    norms = np.array([kmsNorm(X, sigma) for X in states])
    below = np.flatnonzero(norms <= floor)
    if below.size:
        logging.warning(f"Decay curve underflows at t = {t[below[0]]:.4g}; grid truncated to {below[0]} points")
        t, norms = t[: below[0]], norms[: below[0]]
    tail = slice(t.size // 2, t.size)
    if t[tail].size < 2:
        raise ValueError(f"[Spectra.empiricalRate] only {t.size} points remain above the underflow floor")
    slope, intercept = np.polyfit(t[tail], np.log(norms[tail]), 1)
    nu = float(-slope)
    C = float(np.max(norms * np.exp(nu * t)) / initial)
    return EmpiricalRate(nu=nu, C=C, t=t, norms=norms, fitted=initial * C * np.exp(-nu * t))


def timeBounds(relax: float, sigmaMin: float) -> float:
    """
    Upper bound ``(2 + log(sigma_min^(-1/2))) t_rel`` on the trace-norm mixing time.

    :param relax: relaxation time, > 0
    :param sigmaMin: smallest eigenvalue of the invariant state, in ``(0, 1]``
    """
    if not relax > 0:
        raise ValueError(f"[Spectra.timeBounds] relax must be > 0, got {relax}")
    if not 0 < sigmaMin <= 1:
        raise ValueError(f"[Spectra.timeBounds] sigmaMin must lie in (0, 1], got {sigmaMin}")
    return (2.0 + math.log(sigmaMin**-0.5)) * relax


def hypocoercivityCheck(L: Superoperator, sigma: DensityState, tol: float = KERNEL_TOL) -> CheckResult:
    """
    ``L`` is hypocoercive iff ``ker(L)`` is a strict subspace of ``ker(L + L*)``.

    :raises ValueError: if ``L`` is not ergodic
    """
    _checkDims(L, sigma, "hypocoercivityCheck")
    _requireErgodic(L, "hypocoercivityCheck", tol)
    kernelDim = len(kernelBasis(L, tol))
    symmetricKernelDim = len(kernelBasis(L + kmsAdjoint(L, sigma), tol))
    return CheckResult(
        symmetricKernelDim > kernelDim,
        float(symmetricKernelDim - kernelDim),
        {"kernel_dim_symmetric": symmetricKernelDim, "kernel_dim": kernelDim},
    )


def _crossingTime(norm, target: float, start: float, rtol: float = 1e-6) -> float:
    """
    Time at which a non-increasing decay curve ``norm`` crosses ``target``.

    The root is bracketed by doubling ``start`` and refined with ``scipy.optimize.brentq``.
    """
    if norm(0.0) <= target:
        return 0.0
    lo, hi = 0.0, start
    while norm(hi) > target:
        lo, hi = hi, 2.0 * hi
        if hi > 1e12:
            raise ValueError("[Spectra] no time found where the decay reaches the target")
    root, result = scipy.optimize.brentq(lambda t: norm(t) - target, lo, hi, rtol=rtol, full_output=True, disp=False)
    if not result.converged:
        raise ValueError(f"[Spectra] root search stopped after {result.iterations} iterations: {result.flag}")
    logging.debug(f"Decay reaches {target:.4g} at t = {root:.6g} after {result.iterations} iterations")
    return float(root)


def relaxationTime(L: Superoperator, sigma: DensityState, tol: float = KERNEL_TOL) -> float:
    """
    Exact relaxation time: the first ``t`` with ``||P_t (id - E_F)||_{KMS} <= 1/e``.

    The KMS operator norm of ``P_t (id - E_F)`` is the worst case over all
    observables, and it is non-increasing in ``t``.
    """
    _checkDims(L, sigma, "relaxationTime")
    propagator = Propagator(L)
    complement = np.eye(L.dim**2) - fixedPointProjection(L, sigma, tol).mat

    def norm(t: float) -> float:
        return float(np.linalg.norm(sConjugate(Superoperator(propagator.matrix(t) @ complement), sigma), 2))

    gap = spectralGap(L, sigma, tol)
    return _crossingTime(norm, math.exp(-1.0), 1.0 / gap if gap > 0 else 1.0)


def mixingTimeProxy(
    L: Superoperator,
    sigma: DensityState,
    samples: int = 32,
    seed: int = 0,
    tol: float = KERNEL_TOL,
) -> float:
    """
    Trace-norm mixing time over sampled pure states.

    Uses the computational basis states and ``samples`` seeded random pure states;
    the returned time is the first ``t`` at which every sample satisfies
    ``||P_t^dag(rho) - E_F^dag(rho)||_1 <= 1/e``. It is a lower estimate of the
    mixing time over all states.
    """
    _checkDims(L, sigma, "mixingTimeProxy")
    d = L.dim
    rng = np.random.default_rng(seed)
    vectors = list(np.eye(d, dtype=complex))
    for _ in range(samples):
        psi = rng.standard_normal(d) + 1j * rng.standard_normal(d)
        vectors.append(psi / np.linalg.norm(psi))
    states = np.column_stack([vec(np.outer(psi, psi.conj())) for psi in vectors])

    schrodinger = Propagator(L.hsAdjoint())
    limits = fixedPointProjection(L, sigma, tol).mat.conj().T @ states

    def norm(t: float) -> float:
        deviations = schrodinger.matrix(t) @ states - limits
        return max(
            float(np.sum(np.linalg.svd(deviations[:, k].reshape((d, d), order="F"), compute_uv=False)))
            for k in range(deviations.shape[1])
        )

    gap = spectralGap(L, sigma, tol)
    return _crossingTime(norm, math.exp(-1.0), 1.0 / gap if gap > 0 else 1.0)
