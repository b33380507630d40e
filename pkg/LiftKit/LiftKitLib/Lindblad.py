from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.optimize

from LiftKitLib.OperatorAlgebra import (
    DensityState,
    Superoperator,
    asOperator,
    choi,
    hermitianFrame,
    kmsNorm,
    kmsOrthonormalize,
    realForm,
    unvec,
    vec,
    weightingMap,
)
from LiftKitLib.Validation import CheckResult

KERNEL_TOL = 1e-10
EIG_CONDITION_LIMIT = 1e8


@dataclass(frozen=True)
class GKSLSpec:
    """Hamiltonian and jump operators of a generator in GKSL form."""

    H: np.ndarray
    jumps: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        H = asOperator(self.H, "H")
        if np.linalg.norm(H - H.conj().T) > 1e-12 * max(1.0, float(np.linalg.norm(H))):
            raise ValueError("[Lindblad.GKSLSpec] H is not Hermitian")
        jumps = [asOperator(L, f"jumps[{k}]") for k, L in enumerate(self.jumps)]
        for k, L in enumerate(jumps):
            if L.shape != H.shape:
                raise ValueError(f"[Lindblad.GKSLSpec] jumps[{k}] has shape {L.shape}, expected {H.shape}")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "jumps", jumps)

    @property
    def dim(self) -> int:
        return self.H.shape[0]


@dataclass(frozen=True)
class SemigroupSnapshot:
    t: float
    state: np.ndarray


def buildGKSL(spec: GKSLSpec) -> Superoperator:
    """
    Heisenberg-picture generator ``L(X) = i[H, X] + sum_j (L_j^dag X L_j - 1/2 {L_j^dag L_j, X})``.

    :param spec: Hamiltonian and jumps
    :return: the generator; it annihilates the identity
    """
    d = spec.dim
    identity = np.eye(d)
    mat = 1j * (np.kron(identity, spec.H) - np.kron(spec.H.T, identity))
    for L in spec.jumps:
        LdL = L.conj().T @ L
        mat += np.kron(L.T, L.conj().T) - 0.5 * (np.kron(identity, LdL) + np.kron(LdL.T, identity))
    return Superoperator(mat)


class Propagator:
    """
    Evaluates ``exp(t L)`` for many times from one decomposition.

    The eigendecomposition route is used when the eigenvector matrix has
    1-norm condition number below ``conditionLimit``; otherwise every evaluation goes
    through scaling-and-squaring Pade (``scipy.linalg.expm``). The chosen route
    is exposed as ``method`` and the eigenvalues as ``eigenvalues``.
    """

    def __init__(self, L: Superoperator, conditionLimit: float = EIG_CONDITION_LIMIT):
        self.generator = L
        self.dim = L.dim
        eigenvalues, eigenvectors = scipy.linalg.eig(L.mat)
        self.eigenvalues = eigenvalues
        try:
            inverse = scipy.linalg.inv(eigenvectors)
            condition = float(np.linalg.norm(eigenvectors, 1) * np.linalg.norm(inverse, 1))
        except (scipy.linalg.LinAlgError, ValueError):
            inverse, condition = None, math.inf
        if np.isfinite(condition) and condition < conditionLimit:
            self.method = "eig"
            self._eigenvalues = eigenvalues
            self._eigenvectors = eigenvectors
            self._inverse = inverse
        else:
            logging.debug(f"Propagator falls back to Pade, eigenvector condition number {condition:.3e}")
            self.method = "pade"
        self.condition = float(condition)

    def matrix(self, t: float) -> np.ndarray:
        if t < 0:
            raise ValueError(f"[Lindblad.Propagator] t must be >= 0, got {t}")
        if self.method == "eig":
            return (self._eigenvectors * np.exp(t * self._eigenvalues)) @ self._inverse
        return scipy.linalg.expm(t * self.generator.mat)

    def evolve(self, X0, t: float) -> np.ndarray:
        X0 = asOperator(X0)
        if t == 0:
            return X0.copy()
        return unvec(self.matrix(t) @ vec(X0), self.dim)

    def evolveMany(self, X0, tGrid) -> list[np.ndarray]:
        X0 = asOperator(X0)
        if self.method == "eig":
            coefficients = self._inverse @ vec(X0)
            return [
                X0.copy() if t == 0 else unvec(self._eigenvectors @ (np.exp(t * self._eigenvalues) * coefficients), self.dim)
                for t in tGrid
            ]
        return [self.evolve(X0, t) for t in tGrid]


def evolve(L: Superoperator, X0, t: float) -> np.ndarray:
    """Returns ``exp(t L)(X0)``."""
    if t < 0:
        raise ValueError(f"[Lindblad.evolve] t must be >= 0, got {t}")
    if t == 0:
        return asOperator(X0).copy()
    return Propagator(L).evolve(X0, t)


def evolveUniform(L: Superoperator, X0, dt: float, steps: int) -> list[np.ndarray]:
    """
    Returns ``exp(k dt L) X0`` for ``k = 0, ..., steps - 1`` from a single matrix exponential.

    A Hermitian ``X0`` under a Hermiticity-preserving ``L`` is propagated in the
    real coordinates of :func:`OperatorAlgebra.realForm`.
    """
    if not (dt > 0 and steps >= 1):
        raise ValueError(f"[Lindblad.evolveUniform] need dt > 0 and steps >= 1, got dt={dt}, steps={steps}")
    X0 = asOperator(X0)
    frame = None
    if np.allclose(X0, X0.conj().T, rtol=0.0, atol=1e-12 * max(1.0, float(np.linalg.norm(X0)))):
        try:
            step = scipy.linalg.expm(dt * realForm(L))
            frame = hermitianFrame(L.dim)
        except ValueError:
            logging.debug("Generator is not Hermiticity-preserving, stepping in complex coordinates")
    if frame is None:
        step = scipy.linalg.expm(dt * L.mat)
        state = vec(X0)
    else:
        state = (frame.conj().T @ vec((X0 + X0.conj().T) / 2)).real
    states = []
    for _ in range(steps):
        states.append(unvec(state if frame is None else frame @ state, L.dim))
        state = step @ state
    return states


def spectrum(L: Superoperator) -> np.ndarray:
    """Eigenvalues of ``L``; Hermiticity-preserving generators are diagonalized in real coordinates."""
    try:
        return np.linalg.eigvals(realForm(L))
    except ValueError:
        return np.linalg.eigvals(L.mat)


def trajectory(L: Superoperator, X0, tGrid) -> list[SemigroupSnapshot]:
    propagator = Propagator(L)
    return [SemigroupSnapshot(float(t), X) for t, X in zip(tGrid, propagator.evolveMany(X0, tGrid))]


def kernelBasis(L: Superoperator, tol: float = KERNEL_TOL) -> list[np.ndarray]:
    """
    Hilbert-Schmidt orthonormal basis of the numerical kernel of ``L``.

    Singular values at or below ``tol * s_max`` count as zero.
    """
    if tol <= 0:
        raise ValueError(f"[Lindblad.kernelBasis] tol must be > 0, got {tol}")
    _, singular, vh = np.linalg.svd(L.mat)
    if singular[0] == 0:
        return [unvec(row, L.dim) for row in np.eye(L.dim * L.dim, dtype=complex)]
    rank = int(np.sum(singular > tol * singular[0]))
    return [unvec(row.conj(), L.dim) for row in vh[rank:]]


def _hermitianSpan(basis: list[np.ndarray]) -> list[np.ndarray]:
    parts = []
    for K in basis:
        parts.append((K + K.conj().T) / 2)
        parts.append((K - K.conj().T) / 2j)
    realRep = np.array([np.concatenate([P.real.ravel(), P.imag.ravel()]) for P in parts])
    _, singular, vh = np.linalg.svd(realRep, full_matrices=False)
    rank = int(np.sum(singular > 1e-9 * singular[0])) if singular.size and singular[0] > 0 else 0
    d = basis[0].shape[0]
    out = []
    for row in vh[:rank]:
        H = (row[: d * d] + 1j * row[d * d :]).reshape(d, d)
        out.append((H + H.conj().T) / 2)
    return out


def _normalizedMinEig(coefficients: np.ndarray, hermitian: list[np.ndarray]) -> float:
    rho = sum(c * H for c, H in zip(coefficients, hermitian))
    trace = np.trace(rho).real
    if trace <= 1e-12:
        return -np.inf
    return float(np.linalg.eigvalsh(rho / trace)[0])


def invariantState(L: Superoperator, tol: float = KERNEL_TOL, samples: int = 64, seed: int = 0) -> DensityState:
    """
    Finds a trace-one PSD element of the Schrodinger-picture kernel ``ker(L^dag)``.

    With a multi-dimensional kernel the most interior candidate is returned:
    the projection of the identity onto the Hermitian kernel is compared with
    ``samples`` seeded random combinations, and the best one is refined by a
    Nelder-Mead search over the trace-one slice.

    :raises ValueError: if no PSD trace-one kernel element is found
    """
    kernel = kernelBasis(L.hsAdjoint(), tol)
    if len(kernel) == 0:
        raise ValueError("[Lindblad.invariantState] Schrodinger-picture kernel is trivial")
    hermitian = _hermitianSpan(kernel)
    traces = np.array([np.trace(H).real for H in hermitian])

    rng = np.random.default_rng(seed)
    candidates = [traces] + [rng.standard_normal(len(hermitian)) for _ in range(samples)]
    scores = [_normalizedMinEig(c, hermitian) for c in candidates]
    best = int(np.argmax(scores))
    coefficients, score = candidates[best], scores[best]

    if len(hermitian) > 1 and np.isfinite(score):
        result = scipy.optimize.minimize(
            lambda c: -_normalizedMinEig(c, hermitian),
            coefficients,
            method="Nelder-Mead",
            options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 2000},
        )
        if -result.fun > score:
            coefficients, score = result.x, -result.fun

    if not np.isfinite(score) or score < -1e-10:
        raise ValueError(
            f"[Lindblad.invariantState] no PSD trace-one element in a kernel of dimension {len(kernel)} "
            f"(best min eigenvalue {score:.3e})"
        )
    rho = sum(c * H for c, H in zip(coefficients, hermitian))
    rho = rho / np.trace(rho).real
    eigenvalues, eigenvectors = np.linalg.eigh((rho + rho.conj().T) / 2)
    eigenvalues = np.clip(eigenvalues, 0.0, None)
    rho = (eigenvectors * (eigenvalues / eigenvalues.sum())) @ eigenvectors.conj().T
    logging.debug(f"Invariant state found in a kernel of dimension {len(kernel)}, min eigenvalue {score:.3e}")
    return DensityState(rho)


def conditionalExpectation(kernelBasis: list[np.ndarray], sigma: DensityState) -> Superoperator:
    """
    KMS-orthogonal projection onto the span of ``kernelBasis``.

    When the basis spans a unital, adjoint-closed subspace the projection is the
    conditional expectation that preserves ``sigma``. A warning is logged if the
    identity is not in the span; the projection is returned regardless.
    """
    frame = kmsOrthonormalize(kernelBasis, sigma)
    F = np.column_stack([vec(X) for X in frame])
    projection = F @ F.conj().T @ weightingMap(sigma).mat
    identity = vec(np.eye(sigma.dim, dtype=complex))
    defect = float(np.linalg.norm(projection @ identity - identity))
    if defect > 1e-8:
        logging.warning(f"Identity is not in the span of the basis (defect {defect:.3e}); projection is not unital")
    return Superoperator(projection)


def fixedPointProjection(L: Superoperator, sigma: DensityState, tol: float = KERNEL_TOL) -> Superoperator:
    """Conditional expectation ``E_F`` onto the fixed-point space of ``L``."""
    return conditionalExpectation(kernelBasis(L, tol), sigma)


def ergodicityCheck(L: Superoperator, tol: float = KERNEL_TOL, eigenvalues: np.ndarray | None = None) -> CheckResult:
    """
    Checks that ``L`` has no purely imaginary (or growing) eigenvalue.

    The tolerance is relative to the spectral radius of ``L``.

    :param eigenvalues: spectrum of ``L`` when already known
    :return: violations are the eigenvalues with ``|Re| <= tol`` and ``|Im| > tol`` or ``Re > tol``
    """
    eigenvalues = spectrum(L) if eigenvalues is None else np.asarray(eigenvalues)
    threshold = tol * (float(np.max(np.abs(eigenvalues))) or 1.0)
    mask = ((np.abs(eigenvalues.real) <= threshold) & (np.abs(eigenvalues.imag) > threshold)) | (
        eigenvalues.real > threshold
    )
    violations = eigenvalues[mask]
    residual = float(np.max(np.abs(violations.imag))) if violations.size else 0.0
    return CheckResult(violations.size == 0, residual, {"violations": [complex(v) for v in violations]})


def _rangeProjector(C: np.ndarray) -> np.ndarray:
    C = (C + C.conj().T) / 2
    eigenvalues, eigenvectors = np.linalg.eigh(C)
    keep = eigenvalues > 1e-10 * max(float(np.max(np.abs(eigenvalues))), 1e-300)
    U = eigenvectors[:, keep]
    return U @ U.conj().T


def isConditionallyCP(L: Superoperator, tol: float = KERNEL_TOL, reference: Superoperator | None = None) -> CheckResult:
    """
    Conditional complete positivity of a generator.

    Without ``reference`` this is the standard Lindblad criterion
    ``(1 - P_Omega) C(L) (1 - P_Omega) >= -tol``. With a conditional
    expectation ``reference = E`` onto a subalgebra, ``L o E`` is compressed on
    the complement of the range of ``C(E)``, which tests ``L`` as a generator on
    that subalgebra.

    :return: passed flag and the minimal eigenvalue of the compressed Choi matrix
    """
    d = L.dim
    scale = max(1.0, L.norm())
    identity = np.eye(d, dtype=complex)
    unitality = float(np.linalg.norm(L.apply(identity)))
    target = L if reference is None else L @ reference
    C = choi(target)
    hermiticity = float(np.linalg.norm(C - C.conj().T))
    if unitality > tol * scale:
        return CheckResult(False, unitality, {"precondition": f"L(1) != 0 (residual {unitality:.3e})"})
    if hermiticity > tol * scale:
        return CheckResult(False, hermiticity, {"precondition": f"L is not Hermiticity-preserving ({hermiticity:.3e})"})

    if reference is None:
        omega = identity.reshape(-1) / np.sqrt(d)
        P = np.outer(omega, omega.conj())
    else:
        P = _rangeProjector(choi(reference))
    complement = np.eye(d * d) - P
    compressed = complement @ ((C + C.conj().T) / 2) @ complement
    minEig = float(np.linalg.eigvalsh((compressed + compressed.conj().T) / 2)[0])
    return CheckResult(minEig >= -tol * scale, minEig)


def distanceCurve(L: Superoperator, sigma: DensityState, X0, tGrid, tol: float = KERNEL_TOL) -> np.ndarray:
    """Returns ``||P_t X0 - E_F X0||_{2,sigma}`` on ``tGrid``."""
    limit = fixedPointProjection(L, sigma, tol).apply(X0)
    states = Propagator(L).evolveMany(X0, tGrid)
    return np.array([kmsNorm(X - limit, sigma) for X in states])
