"""
Concrete lifts: classical chains lifted through a dephasing generator, and
bipartite lifts of GNS-symmetric generators through a depolarizing ancilla.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.sparse.csgraph

from LiftKitLib.Lifting import LiftedGenerator, OverdampedModel, verifyConditionD
from LiftKitLib.Lindblad import GKSLSpec, buildGKSL
from LiftKitLib.OperatorAlgebra import (
    DensityState,
    Superoperator,
    asOperator,
    choi,
    commutatorMap,
    kmsAdjoint,
    matrixUnit,
    partialTrace,
    sConjugate,
    tensor,
    tensorSuperoperator,
    vec,
)
from LiftKitLib.Spectra import isDetailedBalanced
from LiftKitLib.Validation import CheckResult

RANK_TOL = 1e-9
FAMILY_MISMATCH_TOL = 1e-8


def reflectingWalk(n: int) -> np.ndarray:
    """Q-matrix of the nearest-neighbour walk on ``{1, ..., n}`` with reflecting ends and rate 1/2 per edge."""
    if n < 2:
        raise ValueError(f"[Constructions.reflectingWalk] n must be >= 2, got {n}")
    Q = np.zeros((n, n))
    for i in range(n - 1):
        Q[i, i + 1] = Q[i + 1, i] = 0.5
    Q -= np.diag(Q.sum(axis=1))
    return Q


@dataclass(frozen=True)
class ChainSpec:
    """
    Symmetric irreducible Q-matrix together with the dephasing spectrum ``kappa``.

    ``kappa`` defaults to ``0, 1, ..., n-1``.
    """

    n: int
    Q: np.ndarray
    kappa: list[float] = field(default_factory=list)

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        n = int(self.n)
        if n < 2 or Q.shape != (n, n):
            raise ValueError(f"[Constructions.ChainSpec] Q must be {n} x {n} with n >= 2, got shape {Q.shape}")
        kappa = [float(k) for k in self.kappa] if len(self.kappa) else [float(i) for i in range(n)]
        if len(kappa) != n:
            raise ValueError(f"[Constructions.ChainSpec] kappa has {len(kappa)} entries, expected {n}")
        if np.max(np.abs(Q - Q.T)) > 1e-12:
            raise ValueError("[Constructions.ChainSpec] Q is not symmetric")
        offDiagonal = Q - np.diag(np.diag(Q))
        if np.min(offDiagonal) < 0:
            raise ValueError("[Constructions.ChainSpec] Q has negative off-diagonal entries")
        if np.max(np.abs(Q.sum(axis=1))) > 1e-12:
            raise ValueError("[Constructions.ChainSpec] rows of Q do not sum to zero")
        components, _ = scipy.sparse.csgraph.connected_components(offDiagonal > 0, directed=False)
        if components != 1:
            raise ValueError(f"[Constructions.ChainSpec] Q is reducible ({components} communicating classes)")
        _dephasingSpectrum(kappa)
        Q.setflags(write=False)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "kappa", kappa)

    @classmethod
    def fromQ(cls, Q, kappa=None) -> ChainSpec:
        Q = np.asarray(Q, dtype=float)
        return cls(Q.shape[0], Q, list(kappa) if kappa is not None else [])

    @property
    def hamiltonian(self) -> np.ndarray:
        """``h_ij = sqrt(Q_ij / 2)`` off the diagonal, zero on it."""
        H = np.sqrt(np.clip(self.Q, 0.0, None) / 2.0)
        np.fill_diagonal(H, 0.0)
        return H

    def toDict(self) -> dict:
        return {"n": self.n, "Q": self.Q.tolist(), "kappa": list(self.kappa)}


def _dephasingSpectrum(kappa) -> np.ndarray:
    values = np.asarray(kappa, dtype=float)
    if values.ndim != 1 or values.size < 1:
        raise ValueError("[Constructions.dephasingGenerator] kappa must be a non-empty list")
    gaps = np.abs(values[:, None] - values[None, :]) + np.eye(values.size)
    if np.min(gaps) <= 1e-12:
        raise ValueError(f"[Constructions.dephasingGenerator] kappa has repeated values: {values.tolist()}")
    return values


def dephasingGenerator(kappa) -> Superoperator:
    """``L_S(X) = -[A, [A, X]]`` with ``A = diag(kappa)``; ``kappa`` must be pairwise distinct."""
    D = commutatorMap(np.diag(_dephasingSpectrum(kappa)))
    return -1.0 * (D @ D)


def classicalGenerator(Q) -> Superoperator:
    """Q-matrix acting on the diagonal algebra, ``X -> diag(Q diag(X))``, and zero off the diagonal."""
    Q = np.asarray(Q)
    n = Q.shape[0]
    return Superoperator.fromMap(lambda X: np.diag(Q @ np.diag(X)), n)


def chainLift(spec: ChainSpec, gamma: float) -> LiftedGenerator:
    """
    Lifts a symmetric chain to ``L_gamma = i[H, .] + gamma L_S`` on ``n x n`` matrices.

    ``L_S`` dephases in the eigenbasis of ``diag(kappa)``, so ``F(L_S)`` is the
    diagonal algebra with frame ``sqrt(n) E_ii``, and ``sigma = I / n``.
    """
    n = spec.n
    LA = buildGKSL(GKSLSpec(spec.hamiltonian))
    LS = dephasingGenerator(spec.kappa)
    fsBasis = [math.sqrt(n) * matrixUnit(i, i, n) for i in range(n)]
    return LiftedGenerator(
        LA,
        LS,
        gamma,
        DensityState.maximallyMixed(n),
        fsBasis=fsBasis,
        metadata={"construction": "chain", "n": n},
    )


@dataclass(frozen=True)
class ChainCertificate:
    M: np.ndarray
    C1Min: float
    pass32: bool
    minEig32: float

    def toDict(self) -> dict:
        return {"C1_min_at_C2_0": self.C1Min, "pass_3_2": self.pass32, "min_eig_3_2": self.minEig32}


def _certificateMatrix(spec: ChainSpec) -> np.ndarray:
    H = spec.hamiltonian
    H2 = H @ H
    H3 = H2 @ H
    H4 = H2 @ H2
    return 2.0 * np.diag(np.diag(H4)) - 8.0 * H3 * H + 6.0 * H2**2


def _minimalC1(M: np.ndarray, Q: np.ndarray, C2: float = 0.0) -> float:
    # smallest C1 with M + C2 Q <= C1 Q^2, on the complement of ker Q
    Q2 = Q @ Q
    eigenvalues, eigenvectors = np.linalg.eigh(Q2)
    U = eigenvectors[:, eigenvalues > 1e-10 * eigenvalues[-1]]
    return float(scipy.linalg.eigh(U.T @ (M + C2 * Q) @ U, U.T @ Q2 @ U, eigvals_only=True)[-1])


def chainCertificate(spec: ChainSpec) -> ChainCertificate:
    """
    Matrix ``M`` of the chain lift and its comparison ``M <= C1 Q^2 - C2 Q``.

    ``M_ij = 2 (H^4)_ii delta_ij - 8 (H^3)_ij h_ij + 6 (H^2)_ij^2``. The minimal ``C1``
    at ``C2 = 0`` is the largest generalized eigenvalue of ``(M, Q^2)`` off ``ker Q``,
    and ``pass32`` records whether ``M <= (3/2) Q^2``.
    """
    M = _certificateMatrix(spec)
    minEig = float(np.linalg.eigvalsh(1.5 * spec.Q @ spec.Q - M)[0])
    return ChainCertificate(M=M, C1Min=_minimalC1(M, spec.Q), pass32=minEig >= -1e-10, minEig32=minEig)


def certificateFrontier(spec: ChainSpec, c2Values) -> np.ndarray:
    """Minimal ``C1`` for each ``C2`` in ``c2Values``."""
    M = _certificateMatrix(spec)
    return np.array([_minimalC1(M, spec.Q, float(C2)) for C2 in c2Values])


def depolarizingGenerator(sigmaA: DensityState) -> Superoperator:
    """``L(X) = -X + tr(sigma_A X) 1``."""
    if not sigmaA.isFullRank:
        raise ValueError("[Constructions.depolarizingGenerator] singular state")
    d = sigmaA.dim
    return Superoperator(-np.eye(d * d) + np.outer(vec(np.eye(d)), vec(sigmaA.op).conj()))


@dataclass(frozen=True)
class JumpFamily:
    """
    Modular jump operators ``V_j`` with Bohr frequencies ``omega_j``.

    ``conj[j]`` is the index ``j'`` with ``V_j' = V_j^dag``. Families are ordered
    with the ``omega = 0`` jumps first, then positive frequencies, then their conjugates.
    """

    jumps: list[np.ndarray]
    bohr: list[float]
    conj: list[int]

    def __post_init__(self):
        if not (len(self.jumps) == len(self.bohr) == len(self.conj)):
            raise ValueError("[Constructions.JumpFamily] jumps, bohr and conj must have equal length")
        object.__setattr__(self, "jumps", [asOperator(V, f"jumps[{j}]") for j, V in enumerate(self.jumps)])
        object.__setattr__(self, "bohr", [float(w) for w in self.bohr])
        object.__setattr__(self, "conj", [int(j) for j in self.conj])

    @property
    def J0(self) -> int:
        return sum(1 for w in self.bohr if w == 0)

    @property
    def Jplus(self) -> int:
        return sum(1 for w in self.bohr if w > 0)

    def validate(self, sigmaB: DensityState, tol: float = 1e-10) -> None:
        """
        :raises ValueError: if a jump is not a traceless modular eigenvector or the conjugation is inconsistent
        """
        errors = []
        modular = sigmaB.power(1.0), sigmaB.power(-1.0)
        for j, (V, w, jc) in enumerate(zip(self.jumps, self.bohr, self.conj)):
            scale = max(1.0, float(np.linalg.norm(V)))
            if abs(np.trace(V)) > tol * scale:
                errors.append(f"V_{j} is not traceless")
            if np.linalg.norm(modular[0] @ V @ modular[1] - math.exp(-w) * V) > tol * scale * max(1.0, math.exp(-w)):
                errors.append(f"V_{j} is not a modular eigenvector with omega = {w}")
            if not 0 <= jc < len(self.jumps):
                errors.append(f"conj[{j}] = {jc} is out of range")
                continue
            if np.linalg.norm(self.jumps[jc] - V.conj().T) > tol * scale or abs(self.bohr[jc] + w) > tol:
                errors.append(f"V_{jc} is not the adjoint of V_{j} with opposite frequency")
        if errors:
            raise ValueError("[Constructions.JumpFamily] " + "; ".join(errors))

    def toDict(self) -> dict:
        return {"bohr": self.bohr, "conj": self.conj, "J0": self.J0, "Jplus": self.Jplus}


def gnsGenerator(family: JumpFamily, sigmaB: DensityState) -> Superoperator:
    """
    ``L(X) = sum_j (e^(-w_j/2) V_j^dag [X, V_j] + e^(w_j/2) [V_j, X] V_j^dag)``.

    The result is GNS-symmetric for ``sigma_B`` when the family is consistent with it.
    """
    d = sigmaB.dim
    identity = np.eye(d)
    mat = np.zeros((d * d, d * d), dtype=complex)
    for V, w in zip(family.jumps, family.bohr):
        Vd = V.conj().T
        # V^dag X V - V^dag V X
        mat += math.exp(-w / 2) * (np.kron(V.T, Vd) - np.kron(identity, Vd @ V))
        # V X V^dag - X V V^dag
        mat += math.exp(w / 2) * (np.kron(Vd.T, V) - np.kron((V @ Vd).T, identity))
    return Superoperator(mat)


def randomSymmetricGenerator(d: int, nJumps: int = 2, seed: int = 0) -> tuple[Superoperator, JumpFamily]:
    """
    Seeded ``-sum_k [V_k, [V_k, .]]`` with random Hermitian traceless unit-norm ``V_k``.

    It is KMS- and GNS-symmetric for the maximally mixed state.
    """
    rng = np.random.default_rng(seed)
    jumps = []
    for _ in range(nJumps):
        V = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        V = (V + V.conj().T) / 2
        V -= np.trace(V) / d * np.eye(d)
        jumps.append(V / np.linalg.norm(V))
    family = JumpFamily(jumps, [0.0] * nJumps, list(range(nJumps)))
    return gnsGenerator(family, DensityState.maximallyMixed(d)), family


def _groupFrequencies(values: np.ndarray, tol: float = 1e-9) -> list[float]:
    groups: list[float] = []
    for w in np.sort(values):
        if not groups or abs(w - groups[-1]) > tol * max(1.0, abs(w)):
            groups.append(float(w))
    return groups


def _hermitianBlockBasis(pairs: list[tuple[int, int]], U: np.ndarray) -> list[np.ndarray]:
    basis = []
    for a, b in pairs:
        Eab = np.outer(U[:, a], U[:, b].conj())
        if a == b:
            basis.append(Eab)
        elif a < b:
            Eba = Eab.conj().T
            basis.append((Eab + Eba) / math.sqrt(2))
            basis.append(1j * (Eab - Eba) / math.sqrt(2))
    return basis


def _choiVector(B: np.ndarray) -> np.ndarray:
    # w(B) = sum_i |i> (x) B^dag |i>, so that choi(X -> B_p^dag X B_q) = w(B_p) w(B_q)^dag
    return B.conj().reshape(-1)


def jumpFamilyFromGKSL(LO: Superoperator, sigmaB: DensityState, tol: float = 1e-8) -> JumpFamily:
    """
    Extracts a jump family with ``gnsGenerator(family, sigmaB) == LO``.

    The Choi matrix of ``LO``, compressed off the maximally entangled vector, is
    expanded in the modular eigenbasis ``u_a u_b^dag`` of ``sigma_B``. Its
    coefficient matrix is block diagonal in the Bohr frequency
    ``omega = log(mu_b / mu_a)``. Each block is diagonalized (in a Hermitian basis
    for ``omega = 0``) and components below ``1e-9`` of the largest are dropped.

    :raises ValueError: if ``LO`` is not GNS-symmetric or the form is not positive and block diagonal
    """
    d = sigmaB.dim
    scale = max(1.0, LO.norm())
    balance = isDetailedBalanced(LO, sigmaB, 1.0, tol * scale)
    if not balance.passed:
        raise ValueError(
            f"[Constructions.jumpFamilyFromGKSL] generator is not GNS detailed balanced (residual {balance.residual:.3e})"
        )

    mu, U = sigmaB.eigenvalues, sigmaB.eigenvectors
    omega = np.log(mu[None, :] / mu[:, None])
    frequencies = _groupFrequencies(omega.ravel())
    blocks = []
    for w in frequencies:
        pairs = [(a, b) for a in range(d) for b in range(d) if abs(omega[a, b] - w) <= 1e-9 * max(1.0, abs(w))]
        if abs(w) <= 1e-9:
            basis = _hermitianBlockBasis(pairs, U)
        else:
            basis = [np.outer(U[:, a], U[:, b].conj()) for a, b in pairs]
        blocks.append((0.0 if abs(w) <= 1e-9 else w, basis))

    omegaVec = np.eye(d).reshape(-1) / math.sqrt(d)
    complement = np.eye(d * d) - np.outer(omegaVec, omegaVec)
    compressed = complement @ choi(LO) @ complement
    W = np.column_stack([_choiVector(B) for _, basis in blocks for B in basis])
    chi = W.conj().T @ compressed @ W

    sizes = [len(basis) for _, basis in blocks]
    offsets = np.cumsum([0] + sizes)
    offBlock = chi.copy()
    for start, stop in zip(offsets[:-1], offsets[1:]):
        offBlock[start:stop, start:stop] = 0
    chiNorm = max(float(np.linalg.norm(chi)), 1e-300)
    if np.linalg.norm(offBlock) > tol * chiNorm:
        raise ValueError(
            f"[Constructions.jumpFamilyFromGKSL] coefficient form couples different Bohr frequencies "
            f"(residual {np.linalg.norm(offBlock):.3e})"
        )

    components = []
    for (w, basis), start, stop in zip(blocks, offsets[:-1], offsets[1:]):
        block = chi[start:stop, start:stop]
        block = block.real if w == 0 else (block + block.conj().T) / 2
        eigenvalues, eigenvectors = np.linalg.eigh(block)
        for lam, c in zip(eigenvalues, eigenvectors.T):
            components.append((w, lam, sum(np.conj(ck) * B for ck, B in zip(c, basis))))
    largest = max((abs(lam) for _, lam, _ in components), default=0.0)
    if largest == 0:
        return JumpFamily([], [], [])
    negative = [lam for _, lam, _ in components if lam < -RANK_TOL * largest]
    if negative:
        raise ValueError(f"[Constructions.jumpFamilyFromGKSL] coefficient form is not positive: {min(negative):.3e}")

    zero, positive = [], []
    for w, lam, A in components:
        if lam <= RANK_TOL * largest or w < 0:
            continue
        V = math.sqrt(lam * math.exp(w / 2) / 2) * A
        if w == 0:
            V = (V + V.conj().T) / 2
            zero.append(V)
        else:
            positive.append((w, V))
    jumps = zero + [V for _, V in positive] + [V.conj().T for _, V in positive]
    bohr = [0.0] * len(zero) + [w for w, _ in positive] + [-w for w, _ in positive]
    J0, Jplus = len(zero), len(positive)
    conj = list(range(J0)) + [J0 + Jplus + k for k in range(Jplus)] + [J0 + k for k in range(Jplus)]
    family = JumpFamily(jumps, bohr, conj)
    logging.debug(f"Extracted jump family with J0 = {J0}, J+ = {Jplus}")
    return family


@dataclass(frozen=True)
class GnsLiftArtifacts:
    dimA: int
    sigmaA: DensityState
    Z: list[np.ndarray] = field(repr=False)
    H: np.ndarray = field(repr=False)
    J0: int
    Jplus: int
    sigmaB: DensityState
    family: JumpFamily = field(repr=False)

    @property
    def dimB(self) -> int:
        return self.sigmaB.dim

    def reducedGenerator(self, model: OverdampedModel) -> Superoperator:
        """Overdamped generator pulled back to ``M_B``: ``X -> tr_A((sigma_A (x) 1) L_O(1 (x) X))``."""
        weight = tensor(self.sigmaA.op, np.eye(self.dimB))
        identityA = np.eye(self.dimA)
        return Superoperator.fromMap(
            lambda X: partialTrace(weight @ model.LO.apply(tensor(identityA, X)), self.dimA, self.dimB, "B"),
            self.dimB,
        )

    def interactionCoefficients(self) -> list[np.ndarray]:
        """``G_j = tr_A((sigma_A^(1/2) Z_j^dag sigma_A^(1/2) (x) 1) H)``."""
        root = self.sigmaA.power(0.5)
        identityB = np.eye(self.dimB)
        return [
            partialTrace(tensor(root @ Z.conj().T @ root, identityB) @ self.H, self.dimA, self.dimB, "B")
            for Z in self.Z
        ]


def gnsLift(
    family: JumpFamily,
    sigmaB: DensityState,
    gamma: float,
    kappa: Optional[float] = None,
) -> tuple[LiftedGenerator, GnsLiftArtifacts]:
    """
    Bipartite second-order lift of ``gnsGenerator(family, sigmaB)``.

    The ancilla has one two-level block per self-conjugate jump and per conjugate
    pair, ``dim_A = 2 (J0 + J+)``, and carries a diagonal state ``sigma_A`` with equal
    block masses. ``H = sum_j Z_j (x) V_j`` couples ancilla modular eigenvectors
    ``Z_j`` to the jumps, ``L_S`` depolarizes the ancilla towards ``sigma_A`` and the
    lift is invariant for ``sigma_A (x) sigma_B``.

    :param kappa: intertwining constant; computed from the family when omitted
    :raises ValueError: if the family is inconsistent with ``sigma_B`` or a frequency-zero jump is not Hermitian
    """
    family.validate(sigmaB)
    J0, Jplus = family.J0, family.Jplus
    if len(family.jumps) != J0 + 2 * Jplus:
        raise ValueError("[Constructions.gnsLift] positive and negative frequencies are not paired")
    for j in range(J0):
        if family.conj[j] != j:
            raise ValueError(f"[Constructions.gnsLift] frequency-zero jump V_{j} must be Hermitian")
    pairs = J0 + Jplus
    if pairs == 0:
        raise ValueError("[Constructions.gnsLift] empty jump family")
    dimA, dimB = 2 * pairs, sigmaB.dim
    mass = 1.0 / pairs

    mu = np.zeros(dimA)
    Z: list[Optional[np.ndarray]] = [None] * len(family.jumps)
    positives = [j for j, w in enumerate(family.bohr) if w > 0]
    for p, j in enumerate(list(range(J0)) + positives):
        lo, hi = 2 * p, 2 * p + 1
        w = family.bohr[j]
        if w == 0:
            mu[lo] = mu[hi] = mass / 2
            Z[j] = (matrixUnit(hi, hi, dimA) - matrixUnit(lo, lo, dimA)) / math.sqrt(mu[lo] + mu[hi])
        else:
            mu[lo] = mass * math.exp(w) / (1.0 + math.exp(w))
            mu[hi] = mass / (1.0 + math.exp(w))
            Zj = (mu[lo] * mu[hi]) ** -0.25 * matrixUnit(lo, hi, dimA)
            Z[j] = Zj
            Z[family.conj[j]] = Zj.conj().T
    sigmaA = DensityState(np.diag(mu))

    H = sum(tensor(Zj, V) for Zj, V in zip(Z, family.jumps))
    H = (H + H.conj().T) / 2
    LA = buildGKSL(GKSLSpec(H))
    LS = tensorSuperoperator(depolarizingGenerator(sigmaA), Superoperator.identity(dimB))
    sigma = DensityState(tensor(sigmaA.op, sigmaB.op))

    quarter = sigmaB.power(-0.25)
    fsBasis = [
        tensor(np.eye(dimA), quarter @ matrixUnit(a, b, dimB) @ quarter) for b in range(dimB) for a in range(dimB)
    ]
    uniform = bool(np.allclose(sigmaB.op, np.eye(dimB) / dimB, atol=1e-12))
    if kappa is None and uniform:
        kappa, _ = intertwiningKappa(gnsGenerator(family, sigmaB), family, sigmaB)
    metadata = {
        "construction": "gns",
        "J0": J0,
        "Jplus": Jplus,
        "kappa": kappa if uniform else None,
    }
    lift = LiftedGenerator(LA, LS, gamma, sigma, fsBasis=fsBasis, metadata=metadata)
    artifacts = GnsLiftArtifacts(
        dimA=dimA, sigmaA=sigmaA, Z=Z, H=H, J0=J0, Jplus=Jplus, sigmaB=sigmaB, family=family
    )
    logging.info(f"Built GNS lift: dim_A = {dimA}, dim_B = {dimB}, J0 = {J0}, J+ = {Jplus}, kappa = {kappa}")
    return lift, artifacts


def verifyBipartiteConditions(
    lift: LiftedGenerator,
    artifacts: GnsLiftArtifacts,
    tol: float = 1e-10,
) -> dict[str, CheckResult]:
    """
    Bipartite forms of the lifting conditions.

    A': ``[H, sigma] = 0`` and ``L^A (x) id`` is KMS-symmetric. B': some interaction
    coefficient ``G_j`` is non-zero. C': the ``sigma_A``-weighted partial trace of ``H``
    is a multiple of the identity. D': Condition D for the overdamped generator.
    """
    sigma = lift.sigma
    scale = max(1.0, float(np.linalg.norm(artifacts.H)))
    commutator = float(np.linalg.norm(artifacts.H @ sigma.op - sigma.op @ artifacts.H))
    symmetry = float(np.linalg.norm(sConjugate(lift.LS - kmsAdjoint(lift.LS, sigma), sigma), 2))
    residualA = max(commutator, symmetry)

    couplings = [float(np.linalg.norm(G)) for G in artifacts.interactionCoefficients()]
    strongest = max(couplings, default=0.0)

    K = partialTrace(tensor(artifacts.sigmaA.op, np.eye(artifacts.dimB)) @ artifacts.H, artifacts.dimA, artifacts.dimB, "B")
    residualC = float(np.linalg.norm(K - np.trace(K) / artifacts.dimB * np.eye(artifacts.dimB)))

    return {
        "A'": CheckResult(
            residualA <= tol * scale, residualA, {"commutator_residual": commutator, "symmetry_residual": symmetry}
        ),
        "B'": CheckResult(strongest > tol * scale, strongest, {"coupling_norms": couplings}),
        "C'": CheckResult(residualC <= tol * scale, residualC),
        "D'": verifyConditionD(lift.model, tol),
    }


def intertwiningKappa(
    L: Superoperator,
    family: JumpFamily,
    sigma: DensityState,
    tol: float = 1e-10,
) -> tuple[Optional[float], float]:
    """
    Least-squares ``kappa`` in ``d_j L = L d_j - kappa d_j`` for ``d_j = [V_j, .]``.

    :return: ``(kappa, residual)``; ``kappa`` is ``None`` when the residual exceeds ``tol * ||L||``
    :raises ValueError: if ``gnsGenerator(family, sigma)`` differs from ``L``
    """
    rebuilt = gnsGenerator(family, sigma)
    mismatch = float(np.linalg.norm(rebuilt.mat - L.mat))
    if mismatch > FAMILY_MISMATCH_TOL * max(1.0, L.norm()):
        raise ValueError(
            f"[Constructions.intertwiningKappa] jump family does not reproduce the generator (residual {mismatch:.3e})"
        )
    derivations = [commutatorMap(V).mat for V in family.jumps]
    if not derivations:
        return 0.0, 0.0
    defects = [D @ L.mat - L.mat @ D for D in derivations]
    numerator = sum(np.vdot(D, E).real for D, E in zip(derivations, defects))
    denominator = sum(np.vdot(D, D).real for D in derivations)
    kappa = -numerator / denominator if denominator > 0 else 0.0
    residual = math.sqrt(sum(np.linalg.norm(E + kappa * D) ** 2 for D, E in zip(derivations, defects)))
    if residual > tol * max(L.norm(), 1e-300):
        return None, residual
    return float(kappa), residual


def schurGenerator(points) -> tuple[Superoperator, JumpFamily]:
    """
    Schur multiplier ``L(E_ij) = -||a(i) - a(j)||^2 E_ij`` for points ``a(i)`` in ``R^m``.

    The jumps are the centred coordinate matrices ``V_k = diag(a_k(j)) - mean``, so
    that ``L = -sum_k [V_k, [V_k, .]]``.
    """
    a = np.asarray(points, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2 or a.shape[0] < 1:
        raise ValueError(f"[Constructions.schurGenerator] points must be an n x m array, got shape {a.shape}")
    n = a.shape[0]
    coefficients = -np.sum((a[:, None, :] - a[None, :, :]) ** 2, axis=2)
    L = Superoperator(np.diag(coefficients.reshape(-1, order="F")))
    jumps = [np.diag(a[:, k] - a[:, k].mean()).astype(complex) for k in range(a.shape[1])]
    family = JumpFamily(jumps, [0.0] * len(jumps), list(range(len(jumps))))
    logging.debug(f"Schur generator on {n} points in R^{a.shape[1]}")
    return L, family
