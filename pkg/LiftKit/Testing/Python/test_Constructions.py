import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from LiftKitLib.Constructions import (
    ChainSpec,
    JumpFamily,
    certificateFrontier,
    chainCertificate,
    chainLift,
    dephasingGenerator,
    depolarizingGenerator,
    gnsGenerator,
    gnsLift,
    intertwiningKappa,
    jumpFamilyFromGKSL,
    randomSymmetricGenerator,
    reflectingWalk,
    schurGenerator,
    verifyBipartiteConditions,
)
from LiftKitLib.Lifting import overdampedConvergenceTest, overdampedGenerator, verifyConditionB
from LiftKitLib.Lindblad import ergodicityCheck, invariantState
from LiftKitLib.OperatorAlgebra import DensityState, kmsInner, matrixUnit, tensor
from LiftKitLib.Spectra import dirichlet, hypocoercivityCheck, isDetailedBalanced


def nonUniformFamily(p=0.3):
    # sigma_B = diag(p, 1 - p), V = |0><1| lowers the modular weight by (1 - p) / p
    sigmaB = DensityState(np.diag([p, 1 - p]))
    V = matrixUnit(0, 1, 2)
    omega = math.log((1 - p) / p)
    return JumpFamily([V, V.conj().T], [omega, -omega], [1, 0]), sigmaB


def test_reflecting_walk():
    assert_allclose(reflectingWalk(2), [[-0.5, 0.5], [0.5, -0.5]])
    Q = reflectingWalk(5)
    assert_allclose(Q.sum(axis=1), 0, atol=1e-15)
    assert Q[0, 0] == -0.5
    assert Q[2, 2] == -1.0
    with pytest.raises(ValueError, match="n must be >= 2"):
        reflectingWalk(1)


@pytest.mark.parametrize(
    ("Q", "kappa", "match"),
    [
        (np.array([[-1.0, 1.0, 0.0], [1.0, -1.0, 0.0], [0.0, 0.0, 0.0]]), None, "reducible"),
        (np.array([[-1.0, 1.0], [0.5, -0.5]]), None, "not symmetric"),
        (np.array([[1.0, -1.0], [-1.0, 1.0]]), None, "negative off-diagonal"),
        (reflectingWalk(3), [0.0, 1.0, 1.0], "repeated values"),
        (reflectingWalk(3), [0.0, 1.0], "kappa has 2 entries"),
    ],
)
def test_chain_spec_validation(Q, kappa, match):
    with pytest.raises(ValueError, match=match):
        ChainSpec.fromQ(Q, kappa)


def test_chain_spec_defaults():
    spec = ChainSpec.fromQ(reflectingWalk(4))
    assert spec.kappa == [0.0, 1.0, 2.0, 3.0]
    assert_allclose(spec.hamiltonian[0, 1], 0.5)
    assert_allclose(np.diag(spec.hamiltonian), 0)
    assert spec.toDict()["n"] == 4


def test_dephasing_generator_spectrum():
    LS = dephasingGenerator([0.0, 1.0, 2.0])
    assert_allclose(LS.apply(matrixUnit(0, 2, 3)), -4.0 * matrixUnit(0, 2, 3), atol=1e-14)
    assert_allclose(LS.apply(matrixUnit(1, 1, 3)), 0, atol=1e-14)
    assert LS.norm() == pytest.approx(4.0)
    assert_allclose(np.sort(np.linalg.eigvals(LS.mat).real), [-4, -4, -1, -1, -1, -1, 0, 0, 0], atol=1e-12)


def test_chain_lift_of_two_sites():
    lift = chainLift(ChainSpec.fromQ(reflectingWalk(2)), 1.0)
    H = ChainSpec.fromQ(reflectingWalk(2)).hamiltonian
    assert_allclose(H, [[0.0, 0.5], [0.5, 0.0]])
    assert lift.metadata == {"construction": "chain", "n": 2}


def test_chain_lift_invariant_state_and_ergodicity():
    lift = chainLift(ChainSpec.fromQ(reflectingWalk(8)), 1.0)
    assert_allclose(invariantState(lift.generator).op, np.eye(8) / 8, atol=1e-8)
    assert ergodicityCheck(lift.generator).passed
    assert hypocoercivityCheck(lift.generator, lift.sigma).passed


@pytest.mark.parametrize("n", [5, 8, 16, 32])
def test_chain_certificate_corners(n):
    spec = ChainSpec.fromQ(reflectingWalk(n))
    certificate = chainCertificate(spec)
    M = certificate.M
    assert M[0, 0] == pytest.approx(5 / 8)
    assert M[0, 1] == pytest.approx(-1.0)
    assert M[0, 2] == pytest.approx(3 / 8)
    assert (spec.Q @ spec.Q)[0, 0] == pytest.approx(0.5)
    assert_allclose(M, M.T, atol=1e-14)
    assert np.linalg.eigvalsh(M)[0] >= -1e-10
    assert certificate.pass32
    assert certificate.C1Min <= 1.5 + 1e-9


def test_chain_certificate_of_two_sites():
    spec = ChainSpec.fromQ(reflectingWalk(2))
    certificate = chainCertificate(spec)
    assert_allclose(certificate.M, spec.Q @ spec.Q, atol=1e-14)
    assert certificate.C1Min == pytest.approx(1.0)
    assert certificate.minEig32 >= -1e-12
    assert certificate.toDict()["pass_3_2"]


def test_certificate_frontier_is_non_increasing():
    spec = ChainSpec.fromQ(reflectingWalk(8))
    frontier = certificateFrontier(spec, [0.0, 0.5, 1.0, 2.0])
    assert frontier[0] == pytest.approx(chainCertificate(spec).C1Min)
    assert np.all(np.diff(frontier) <= 1e-12)


def test_depolarizing_generator():
    sigma = DensityState(np.diag([0.2, 0.8]))
    L = depolarizingGenerator(sigma)
    assert_allclose(L.apply(np.eye(2)), 0, atol=1e-15)
    X = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert_allclose(L.apply(X), -X + (0.2 + 3.2) * np.eye(2), atol=1e-14)
    with pytest.raises(ValueError, match="singular state"):
        depolarizingGenerator(DensityState(np.diag([1.0, 0.0])))


def test_jump_family_validation():
    V = matrixUnit(0, 1, 2)
    family = JumpFamily([V, V.conj().T], [0.5, -0.5], [1, 0])
    with pytest.raises(ValueError, match="not a modular eigenvector"):
        family.validate(DensityState.maximallyMixed(2))
    with pytest.raises(ValueError, match="equal length"):
        JumpFamily([V], [0.0, 0.0], [0])


def test_random_symmetric_generator_is_symmetric():
    L, family = randomSymmetricGenerator(3, seed=4)
    sigma = DensityState.maximallyMixed(3)
    assert isDetailedBalanced(L, sigma, 1.0).passed
    assert isDetailedBalanced(L, sigma, 0.5).passed
    assert family.J0 == 2


def test_extract_depolarizing_family():
    sigma = DensityState.maximallyMixed(2)
    L = depolarizingGenerator(sigma)
    family = jumpFamilyFromGKSL(L, sigma)
    assert family.J0 == 3
    assert family.Jplus == 0
    for V in family.jumps:
        assert_allclose(V, V.conj().T, atol=1e-12)
        assert abs(np.trace(V)) <= 1e-12
    assert_allclose(gnsGenerator(family, sigma).mat, L.mat, atol=1e-10)


@pytest.mark.parametrize("d", [2, 3])
def test_extraction_round_trip(d):
    L, _ = randomSymmetricGenerator(d, seed=d)
    sigma = DensityState.maximallyMixed(d)
    rebuilt = gnsGenerator(jumpFamilyFromGKSL(L, sigma), sigma)
    assert_allclose(rebuilt.mat, L.mat, atol=1e-10)
    rng = np.random.default_rng(0)
    for _ in range(50):
        X = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        assert dirichlet(rebuilt, sigma, X) == pytest.approx(dirichlet(L, sigma, X), rel=1e-9, abs=1e-12)


def test_extraction_with_nonzero_bohr_frequency():
    family, sigmaB = nonUniformFamily()
    L = gnsGenerator(family, sigmaB)
    assert isDetailedBalanced(L, sigmaB, 1.0).passed
    extracted = jumpFamilyFromGKSL(L, sigmaB)
    assert (extracted.J0, extracted.Jplus) == (0, 1)
    assert extracted.bohr[0] == pytest.approx(math.log(7 / 3))
    assert abs(extracted.jumps[0][0, 1]) == pytest.approx(1.0)
    assert_allclose(gnsGenerator(extracted, sigmaB).mat, L.mat, atol=1e-10)


def test_extraction_rejects_non_symmetric_generator():
    L = depolarizingGenerator(DensityState(np.diag([0.4, 0.6])))
    with pytest.raises(ValueError, match="not GNS detailed balanced"):
        jumpFamilyFromGKSL(L, DensityState.maximallyMixed(2))


def test_gns_lift_of_depolarizing():
    sigmaB = DensityState.maximallyMixed(2)
    L = depolarizingGenerator(sigmaB)
    lift, artifacts = gnsLift(jumpFamilyFromGKSL(L, sigmaB), sigmaB, 1.0)
    assert artifacts.dimA == 6
    assert lift.dim == 12
    assert lift.metadata["J0"] == 3
    assert lift.metadata["kappa"] == pytest.approx(0.0, abs=1e-10)
    conditions = verifyBipartiteConditions(lift, artifacts)
    assert all(result.passed for result in conditions.values()), {k: v.residual for k, v in conditions.items()}
    model = overdampedGenerator(lift)
    reduced = artifacts.reducedGenerator(model)
    assert np.linalg.norm(reduced.mat - L.mat) <= 1e-10 * np.linalg.norm(L.mat)


def test_gns_lift_overdamped_convergence():
    sigmaB = DensityState.maximallyMixed(2)
    lift, _ = gnsLift(jumpFamilyFromGKSL(depolarizingGenerator(sigmaB), sigmaB), sigmaB, 1.0)
    X0 = tensor(np.eye(6), np.diag([1.0, -1.0]))
    result = overdampedConvergenceTest(lift, X0, 1.0, [0.2, 0.1, 0.05, 0.025])
    assert 0.8 <= result.slope <= 1.2


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("d", [2, 3])
def test_gns_lift_recovers_random_generator(d, seed):
    L, _ = randomSymmetricGenerator(d, seed=100 * d + seed)
    sigmaB = DensityState.maximallyMixed(d)
    lift, artifacts = gnsLift(jumpFamilyFromGKSL(L, sigmaB), sigmaB, 1.0)
    conditions = verifyBipartiteConditions(lift, artifacts)
    assert all(result.passed for result in conditions.values()), {k: v.residual for k, v in conditions.items()}
    reduced = artifacts.reducedGenerator(lift.model)
    assert np.linalg.norm(reduced.mat - L.mat) <= 1e-10 * np.linalg.norm(L.mat)


def test_gns_lift_ancilla_operators():
    family, sigmaB = nonUniformFamily()
    lift, artifacts = gnsLift(family, sigmaB, 1.0)
    sigmaA = artifacts.sigmaA
    assert lift.metadata["kappa"] is None
    gram = np.array([[kmsInner(X, Y, sigmaA) for Y in artifacts.Z] for X in artifacts.Z])
    assert_allclose(np.abs(np.diag(gram)), 1.0, atol=1e-12)
    for j, Z in enumerate(artifacts.Z):
        assert abs(np.trace(sigmaA.op @ Z)) <= 1e-12
        modular = sigmaA.power(1.0) @ Z @ sigmaA.power(-1.0)
        assert_allclose(modular, math.exp(family.bohr[j]) * Z, atol=1e-12)
        assert_allclose(artifacts.Z[family.conj[j]], Z.conj().T, atol=1e-14)
    assert_allclose(artifacts.H @ lift.sigma.op, lift.sigma.op @ artifacts.H, atol=1e-12)
    reduced = artifacts.reducedGenerator(overdampedGenerator(lift))
    L = gnsGenerator(family, sigmaB)
    assert np.linalg.norm(reduced.mat - L.mat) <= 1e-10 * np.linalg.norm(L.mat)


def test_gns_lift_rejects_non_hermitian_zero_frequency_jump():
    V = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
    family = JumpFamily([V, V.conj().T], [0.0, 0.0], [1, 0])
    with pytest.raises(ValueError, match="must be Hermitian"):
        gnsLift(family, DensityState.maximallyMixed(2), 1.0)


def test_gns_lift_without_coupling_fails_condition_b():
    family = JumpFamily([np.zeros((2, 2))], [0.0], [0])
    lift, artifacts = gnsLift(family, DensityState.maximallyMixed(2), 1.0)
    assert not verifyConditionB(lift).passed
    assert not verifyBipartiteConditions(lift, artifacts)["B'"].passed


def test_intertwining_kappa_of_depolarizing():
    sigma = DensityState.maximallyMixed(2)
    L = depolarizingGenerator(sigma)
    kappa, residual = intertwiningKappa(L, jumpFamilyFromGKSL(L, sigma), sigma)
    assert kappa == pytest.approx(0.0, abs=1e-10)
    assert residual <= 1e-10


def test_intertwining_kappa_rejects_foreign_family():
    sigma = DensityState.maximallyMixed(2)
    L = depolarizingGenerator(sigma)
    family = jumpFamilyFromGKSL(L, sigma)
    with pytest.raises(ValueError, match="does not reproduce the generator"):
        intertwiningKappa(L + 0.3 * dephasingGenerator([0.0, 1.0]), family, sigma)


def test_intertwining_kappa_absent_for_amplitude_damping():
    family, sigmaB = nonUniformFamily()
    L = gnsGenerator(family, sigmaB)
    kappa, residual = intertwiningKappa(L, family, sigmaB)
    assert kappa is None
    assert residual > 1e-10 * L.norm()


def test_schur_generator_of_collinear_points():
    L, family = schurGenerator([0.0, 1.0, 2.0])
    assert_allclose(L.mat, dephasingGenerator([0.0, 1.0, 2.0]).mat, atol=1e-14)
    for i in range(3):
        assert_allclose(L.apply(matrixUnit(i, i, 3)), 0, atol=1e-15)
    assert_allclose(gnsGenerator(family, DensityState.maximallyMixed(3)).mat, L.mat, atol=1e-12)


def test_schur_generator_intertwining():
    L, family = schurGenerator(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]]))
    sigma = DensityState.maximallyMixed(3)
    assert_allclose(gnsGenerator(family, sigma).mat, L.mat, atol=1e-12)
    kappa, _ = intertwiningKappa(L, family, sigma)
    assert kappa == pytest.approx(0.0, abs=1e-10)
