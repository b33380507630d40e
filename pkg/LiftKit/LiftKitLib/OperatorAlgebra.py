"""
Dense operator and superoperator algebra on a single matrix algebra B(H).

Superoperators act on column-stacked vectorizations: ``vec(X)`` stacks the
columns of ``X``, so that ``vec(A X B) = (B^T kron A) vec(X)``. Every matrix in
this package that represents a superoperator follows that convention.
"""

from __future__ import annotations

import math
from typing import Callable, Literal

import numpy as np
import scipy.linalg

from LiftKitLib.Validation import CheckResult

SINGULAR_FLOOR = 1e-14


def asOperator(X, name: str = "X") -> np.ndarray:
    """Returns ``X`` as a complex square matrix, rejecting non-square or non-finite input."""
    op = np.asarray(X, dtype=complex)
    if op.ndim != 2 or op.shape[0] != op.shape[1] or op.shape[0] < 1:
        raise ValueError(f"[OperatorAlgebra.asOperator] {name} must be a non-empty square matrix, got shape {op.shape}")
    if not np.all(np.isfinite(op)):
        raise ValueError(f"[OperatorAlgebra.asOperator] {name} has non-finite entries")
    return op


def vec(X: np.ndarray) -> np.ndarray:
    return np.asarray(X).reshape(-1, order="F")


def unvec(v: np.ndarray, dim: int) -> np.ndarray:
    return np.asarray(v).reshape((dim, dim), order="F")


def matrixUnit(i: int, j: int, dim: int) -> np.ndarray:
    unit = np.zeros((dim, dim), dtype=complex)
    unit[i, j] = 1.0
    return unit


def _hermitianPower(eigenvalues: np.ndarray, eigenvectors: np.ndarray, p: float) -> np.ndarray:
    return (eigenvectors * eigenvalues**p) @ eigenvectors.conj().T


class DensityState:
    """
    Hermitian, positive semidefinite, unit-trace operator.

    The Hermitian eigendecomposition is computed once and reused for every
    fractional power. Negative and fractional powers require a full-rank state.

    :param op: the density matrix
    :param tol: tolerance of the Hermiticity, positivity and trace checks
    """

    def __init__(self, op, tol: float = 1e-12):
        op = asOperator(op, "state")
        dim = op.shape[0]
        scale = max(1.0, float(np.linalg.norm(op)))
        if np.linalg.norm(op - op.conj().T) > tol * dim * scale:
            raise ValueError("[OperatorAlgebra.DensityState] state is not Hermitian")
        op = (op + op.conj().T) / 2
        eigenvalues, eigenvectors = np.linalg.eigh(op)
        if eigenvalues[0] < -tol:
            raise ValueError(f"[OperatorAlgebra.DensityState] state is not PSD, min eigenvalue {eigenvalues[0]:.3e}")
        if abs(np.trace(op).real - 1.0) > tol * dim:
            raise ValueError(f"[OperatorAlgebra.DensityState] state trace is {np.trace(op).real!r}, expected 1")
        op.setflags(write=False)
        self.op = op
        self.dim = dim
        self.eigenvalues = np.clip(eigenvalues, 0.0, None)
        self.eigenvectors = eigenvectors
        self.minEig = float(max(eigenvalues[0], 0.0))

    @classmethod
    def maximallyMixed(cls, dim: int) -> DensityState:
        return cls(np.eye(dim) / dim)

    @property
    def isFullRank(self) -> bool:
        return self.minEig > SINGULAR_FLOOR * float(self.eigenvalues[-1])

    def power(self, p: float) -> np.ndarray:
        """
        Returns ``sigma^p`` through the cached eigendecomposition.

        :param p: real exponent
        :raises ValueError: if the state is singular below the relative floor
        """
        if not self.isFullRank:
            raise ValueError(
                f"[OperatorAlgebra.DensityState.power] singular state: min eigenvalue {self.minEig:.3e} is below "
                f"{SINGULAR_FLOOR:g} * max eigenvalue"
            )
        if p == 0:
            return np.eye(self.dim, dtype=complex)
        return _hermitianPower(self.eigenvalues, self.eigenvectors, p)

    def __repr__(self):
        return f"DensityState(dim={self.dim}, minEig={self.minEig:.3e})"


class Superoperator:
    """
    Linear map on ``dim x dim`` matrices stored as its ``dim^2 x dim^2`` matrix.

    Instances are immutable: the matrix is copied on construction and flagged read-only.
    """

    def __init__(self, mat):
        mat = np.array(mat, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError(f"[OperatorAlgebra.Superoperator] matrix must be square, got shape {mat.shape}")
        dim = math.isqrt(mat.shape[0])
        if dim < 1 or dim * dim != mat.shape[0]:
            raise ValueError(f"[OperatorAlgebra.Superoperator] matrix size {mat.shape[0]} is not a square number")
        if not np.all(np.isfinite(mat)):
            raise ValueError("[OperatorAlgebra.Superoperator] matrix has non-finite entries")
        mat.setflags(write=False)
        self.mat = mat
        self.dim = dim
        self._norm = None

    @classmethod
    def identity(cls, dim: int) -> Superoperator:
        return cls(np.eye(dim * dim))

    @classmethod
    def zero(cls, dim: int) -> Superoperator:
        return cls(np.zeros((dim * dim, dim * dim)))

    @classmethod
    def fromLeftRight(cls, A: np.ndarray, B: np.ndarray) -> Superoperator:
        """Superoperator of ``X -> A X B``."""
        return cls(np.kron(np.asarray(B).T, np.asarray(A)))

    @classmethod
    def fromMap(cls, func: Callable[[np.ndarray], np.ndarray], dim: int) -> Superoperator:
        """Tabulates a linear callable on the matrix units."""
        columns = [vec(func(matrixUnit(i, j, dim))) for j in range(dim) for i in range(dim)]
        return cls(np.column_stack(columns))

    def apply(self, X) -> np.ndarray:
        X = asOperator(X)
        if X.shape[0] != self.dim:
            raise ValueError(f"[OperatorAlgebra.Superoperator.apply] dimension mismatch: {X.shape[0]} != {self.dim}")
        return unvec(self.mat @ vec(X), self.dim)

    def hsAdjoint(self) -> Superoperator:
        return Superoperator(self.mat.conj().T)

    def norm(self) -> float:
        if self._norm is None:
            self._norm = float(np.linalg.norm(self.mat, 2))
        return self._norm

    def _checkDim(self, other: Superoperator) -> None:
        if self.dim != other.dim:
            raise ValueError(f"[OperatorAlgebra.Superoperator] dimension mismatch: {self.dim} != {other.dim}")

    def __matmul__(self, other: Superoperator) -> Superoperator:
        self._checkDim(other)
        return Superoperator(self.mat @ other.mat)

    def __add__(self, other: Superoperator) -> Superoperator:
        self._checkDim(other)
        return Superoperator(self.mat + other.mat)

    def __sub__(self, other: Superoperator) -> Superoperator:
        self._checkDim(other)
        return Superoperator(self.mat - other.mat)

    def __neg__(self) -> Superoperator:
        return Superoperator(-self.mat)

    def __mul__(self, scalar: complex) -> Superoperator:
        return Superoperator(scalar * self.mat)

    __rmul__ = __mul__

    def __repr__(self):
        return f"Superoperator(dim={self.dim}, norm={self.norm():.3e})"


def hsInner(X, Y) -> complex:
    """
    Hilbert-Schmidt inner product ``tr(X^dag Y)``, conjugate-linear in ``X``.
    """
    X = asOperator(X, "X")
    Y = asOperator(Y, "Y")
    if X.shape != Y.shape:
        raise ValueError(f"[OperatorAlgebra.hsInner] dimension mismatch: {X.shape} != {Y.shape}")
    return complex(np.vdot(X, Y))


def _checkS(s: float, where: str) -> None:
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"[OperatorAlgebra.{where}] s must lie in [0, 1], got {s}")


def sInner(X, Y, sigma: DensityState, s: float) -> complex:
    """
    Sigma-weighted inner product ``tr(sigma^s X^dag sigma^(1-s) Y)``.

    ``s = 1/2`` gives the KMS inner product and ``s = 1`` the GNS inner product.

    :param X: left argument (conjugated)
    :param Y: right argument
    :param sigma: full-rank reference state
    :param s: weight exponent in ``[0, 1]``
    :return: the complex inner product
    """
    _checkS(s, "sInner")
    X = asOperator(X, "X")
    Y = asOperator(Y, "Y")
    if X.shape != Y.shape or X.shape[0] != sigma.dim:
        raise ValueError(f"[OperatorAlgebra.sInner] dimension mismatch: {X.shape}, {Y.shape}, state {sigma.dim}")
    return complex(np.trace(sigma.power(s) @ X.conj().T @ sigma.power(1.0 - s) @ Y))


def kmsInner(X, Y, sigma: DensityState) -> complex:
    return sInner(X, Y, sigma, 0.5)


def kmsNorm(X, sigma: DensityState) -> float:
    return math.sqrt(max(kmsInner(X, X, sigma).real, 0.0))


def modularMap(sigma: DensityState) -> Superoperator:
    """Modular operator ``X -> sigma X sigma^-1``."""
    return Superoperator.fromLeftRight(sigma.power(1.0), sigma.power(-1.0))


def weightingMap(sigma: DensityState, power: float = 1.0) -> Superoperator:
    """
    Power of the weighting operator ``Gamma(X) = sigma^(1/2) X sigma^(1/2)``.

    :param power: exponent ``p``; the result is ``X -> sigma^(p/2) X sigma^(p/2)``
    """
    half = sigma.power(power / 2.0)
    return Superoperator.fromLeftRight(half, half)


def _sWeight(sigma: DensityState, s: float, p: float = 1.0) -> np.ndarray:
    # matrix of Y -> sigma^((1-s)p) Y sigma^(sp), the Gram operator of the s-inner product raised to p
    return np.kron(sigma.power(s * p).T, sigma.power((1.0 - s) * p))


def sAdjoint(phi: Superoperator, sigma: DensityState, s: float) -> Superoperator:
    """Adjoint of ``phi`` for the ``s``-inner product of ``sigma``."""
    _checkS(s, "sAdjoint")
    return Superoperator(_sWeight(sigma, s, -1.0) @ phi.mat.conj().T @ _sWeight(sigma, s))


def kmsAdjoint(phi: Superoperator, sigma: DensityState) -> Superoperator:
    """
    KMS adjoint ``Gamma^-1 o phi^dag o Gamma`` where ``phi^dag`` is the Hilbert-Schmidt adjoint.
    """
    return sAdjoint(phi, sigma, 0.5)


def sConjugate(phi: Superoperator, sigma: DensityState, s: float = 0.5) -> np.ndarray:
    """
    Returns ``W^(1/2) phi W^(-1/2)`` for the Gram operator ``W`` of the ``s``-inner product.

    Euclidean norms, singular values and eigenvalues of the result are the
    corresponding quantities of ``phi`` in the sigma-weighted geometry.
    """
    return _sWeight(sigma, s, 0.5) @ phi.mat @ _sWeight(sigma, s, -0.5)


def sDeconjugate(mat: np.ndarray, sigma: DensityState, s: float = 0.5) -> Superoperator:
    return Superoperator(_sWeight(sigma, s, -0.5) @ mat @ _sWeight(sigma, s, 0.5))


def kmsOperatorNorm(phi: Superoperator, sigma: DensityState) -> float:
    return float(np.linalg.norm(sConjugate(phi, sigma), 2))


def kmsOrthonormalize(basis: list[np.ndarray], sigma: DensityState) -> list[np.ndarray]:
    """
    Orthonormalizes a linearly independent list of operators in the KMS inner product.

    A list that is already KMS-orthonormal is returned unchanged up to round-off.
    """
    if len(basis) == 0:
        return []
    B = np.column_stack([vec(asOperator(X)) for X in basis])
    gram = B.conj().T @ weightingMap(sigma).mat @ B
    gram = (gram + gram.conj().T) / 2
    try:
        lower = scipy.linalg.cholesky(gram, lower=True)
    except scipy.linalg.LinAlgError as e:
        raise ValueError("[OperatorAlgebra.kmsOrthonormalize] basis is linearly dependent") from e
    frame = scipy.linalg.solve_triangular(lower, B.conj().T, lower=True).conj().T
    return [unvec(frame[:, k], sigma.dim) for k in range(frame.shape[1])]


def hermitianFrame(dim: int) -> np.ndarray:
    """
    Columns ``vec(B_k)`` of the Hilbert-Schmidt orthonormal Hermitian basis ``E_ii``,
    ``(E_ij + E_ji) / sqrt(2)`` and ``i (E_ij - E_ji) / sqrt(2)`` for ``i < j``.
    """
    frame = np.zeros((dim * dim, dim * dim), dtype=complex)
    root = 1.0 / math.sqrt(2.0)
    for i in range(dim):
        frame[i + i * dim, i] = 1.0
    k = dim
    for i in range(dim):
        for j in range(i + 1, dim):
            frame[i + j * dim, k], frame[j + i * dim, k] = root, root
            frame[i + j * dim, k + 1], frame[j + i * dim, k + 1] = 1j * root, -1j * root
            k += 2
    return frame


def realForm(phi: Superoperator, tol: float = 1e-10) -> np.ndarray:
    """
    Real matrix of a Hermiticity-preserving ``phi`` in the coordinates of :func:`hermitianFrame`.

    It has the spectrum and singular values of ``phi.mat``.

    :raises ValueError: if ``phi`` does not map Hermitian matrices to Hermitian matrices
    """
    frame = hermitianFrame(phi.dim)
    mat = frame.conj().T @ phi.mat @ frame
    residual = float(np.linalg.norm(mat.imag))
    if residual > tol * max(1.0, float(np.linalg.norm(mat))):
        raise ValueError(f"[OperatorAlgebra.realForm] map is not Hermiticity-preserving (imaginary residual {residual:.3e})")
    return mat.real


def commutatorMap(A) -> Superoperator:
    """Superoperator of ``X -> [A, X]``."""
    A = asOperator(A, "A")
    identity = np.eye(A.shape[0])
    return Superoperator(np.kron(identity, A) - np.kron(A.T, identity))


def tensor(X, Y) -> np.ndarray:
    """Kronecker product with the A-factor ``X`` on the left."""
    return np.kron(asOperator(X, "X"), asOperator(Y, "Y"))


def partialTrace(X, dimA: int, dimB: int, keep: Literal["A", "B"]) -> np.ndarray:
    """
    Partial trace of an operator on ``H_A (x) H_B``.

    :param keep: the factor that survives, ``"A"`` (returns ``tr_B X``) or ``"B"`` (returns ``tr_A X``)
    """
    X = asOperator(X)
    if X.shape[0] != dimA * dimB:
        raise ValueError(f"[OperatorAlgebra.partialTrace] incompatible dims: {X.shape[0]} != {dimA} * {dimB}")
    blocks = X.reshape(dimA, dimB, dimA, dimB)
    if keep == "A":
        return np.einsum("ijkj->ik", blocks)
    if keep == "B":
        return np.einsum("ijil->jl", blocks)
    raise ValueError(f"[OperatorAlgebra.partialTrace] keep must be 'A' or 'B', got {keep!r}")


def tensorSuperoperator(phiA: Superoperator, phiB: Superoperator) -> Superoperator:
    """Superoperator of ``phiA (x) phiB`` acting on ``B(H_A (x) H_B)``."""
    dA, dB = phiA.dim, phiB.dim
    imagesA = {(a, b): phiA.apply(matrixUnit(a, b, dA)) for a in range(dA) for b in range(dA)}
    imagesB = {(a, b): phiB.apply(matrixUnit(a, b, dB)) for a in range(dB) for b in range(dB)}
    dim = dA * dB
    columns = []
    for col in range(dim):
        for row in range(dim):
            (a, i), (b, j) = divmod(row, dB), divmod(col, dB)
            columns.append(vec(np.kron(imagesA[(a, b)], imagesB[(i, j)])))
    return Superoperator(np.column_stack(columns))


def choi(phi: Superoperator) -> np.ndarray:
    """
    Choi matrix ``sum_ij E_ij (x) phi(E_ij)``; ``phi`` is completely positive iff it is PSD.
    """
    d = phi.dim
    # images[a, b, i, j] = phi(E_ij)[a, b]
    images = phi.mat.reshape((d, d, d, d), order="F")
    return images.transpose(2, 0, 3, 1).reshape(d * d, d * d)


def isCP(phi: Superoperator, tol: float = 1e-10) -> CheckResult:
    """
    Complete positivity test on the Hermitized Choi matrix.

    :return: passed iff the minimal eigenvalue is ``>= -tol``; the residual is that eigenvalue
    """
    if tol <= 0:
        raise ValueError(f"[OperatorAlgebra.isCP] tol must be > 0, got {tol}")
    C = choi(phi)
    minEig = float(np.linalg.eigvalsh((C + C.conj().T) / 2)[0])
    return CheckResult(minEig >= -tol, minEig)
