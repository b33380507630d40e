import numpy as np
import pytest
from numpy.testing import assert_allclose

from LiftKitLib.Constructions import dephasingGenerator, depolarizingGenerator
from LiftKitLib.Lindblad import (
    GKSLSpec,
    Propagator,
    buildGKSL,
    conditionalExpectation,
    distanceCurve,
    ergodicityCheck,
    evolve,
    evolveUniform,
    fixedPointProjection,
    invariantState,
    isConditionallyCP,
    kernelBasis,
    spectrum,
    trajectory,
)
from LiftKitLib.OperatorAlgebra import (
    DensityState,
    Superoperator,
    isCP,
    kmsAdjoint,
    matrixUnit,
    partialTrace,
    tensor,
    tensorSuperoperator,
)

TRIALS = 200


def randomMatrix(rng, d):
    return rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))


def randomHermitian(rng, d):
    X = randomMatrix(rng, d)
    return (X + X.conj().T) / 2


def randomSpec(rng, d, nJumps=2):
    return GKSLSpec(randomHermitian(rng, d), [randomMatrix(rng, d) for _ in range(nJumps)])


def test_gksl_spec_rejects_non_hermitian_hamiltonian():
    with pytest.raises(ValueError, match="not Hermitian"):
        GKSLSpec(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_gksl_spec_rejects_jump_shape():
    with pytest.raises(ValueError, match="jumps\\[0\\] has shape"):
        GKSLSpec(np.eye(2), [np.eye(3)])


def test_build_gksl_is_unital_and_hermiticity_preserving():
    rng = np.random.default_rng(0)
    L = buildGKSL(randomSpec(rng, 3))
    assert_allclose(L.apply(np.eye(3)), 0, atol=1e-12)
    X = randomHermitian(rng, 3)
    Y = L.apply(X)
    assert_allclose(Y, Y.conj().T, atol=1e-12)
    assert isConditionallyCP(L).passed


def test_build_gksl_amplitude_damping():
    lowering = matrixUnit(0, 1, 2)
    L = buildGKSL(GKSLSpec(np.zeros((2, 2)), [lowering]))
    assert_allclose(L.apply(matrixUnit(0, 0, 2)), matrixUnit(1, 1, 2), atol=1e-14)
    assert_allclose(L.apply(matrixUnit(1, 1, 2)), -matrixUnit(1, 1, 2), atol=1e-14)


def test_depolarizing_from_jumps():
    sigma = DensityState(np.diag([0.2, 0.3, 0.5]))
    mu = np.diag(sigma.op).real
    jumps = [np.sqrt(mu[a]) * matrixUnit(a, b, 3) for a in range(3) for b in range(3)]
    L = buildGKSL(GKSLSpec(np.zeros((3, 3)), jumps))
    assert_allclose(L.mat, depolarizingGenerator(sigma).mat, atol=1e-12)


def test_evolve_at_time_zero_returns_the_input():
    rng = np.random.default_rng(1)
    X0 = randomMatrix(rng, 2)
    L = buildGKSL(randomSpec(rng, 2))
    assert_allclose(evolve(L, X0, 0.0), X0)
    with pytest.raises(ValueError, match="t must be >= 0"):
        evolve(L, X0, -1.0)


def test_depolarizing_decay_of_traceless_observable():
    L = depolarizingGenerator(DensityState.maximallyMixed(2))
    X0 = np.diag([1.0, -1.0])
    assert_allclose(evolve(L, X0, 0.7), np.exp(-0.7) * X0, atol=1e-12)


def test_semigroup_property():
    rng = np.random.default_rng(2)
    L = buildGKSL(randomSpec(rng, 3))
    X0 = randomMatrix(rng, 3)
    propagator = Propagator(L)
    assert_allclose(propagator.evolve(propagator.evolve(X0, 0.4), 0.6), propagator.evolve(X0, 1.0), atol=1e-9)


def test_propagator_pade_fallback_agrees_with_eigendecomposition():
    rng = np.random.default_rng(3)
    L = buildGKSL(randomSpec(rng, 2))
    X0 = randomMatrix(rng, 2)
    fast, slow = Propagator(L), Propagator(L, conditionLimit=0.0)
    assert fast.method == "eig"
    assert slow.method == "pade"
    for t in (0.1, 1.0, 5.0):
        assert_allclose(slow.evolve(X0, t), fast.evolve(X0, t), atol=1e-9)


def test_trajectory_times():
    L = depolarizingGenerator(DensityState.maximallyMixed(2))
    snapshots = trajectory(L, np.eye(2), [0.0, 0.5, 1.0])
    assert [s.t for s in snapshots] == [0.0, 0.5, 1.0]
    for s in snapshots:
        assert_allclose(s.state, np.eye(2), atol=1e-12)


def test_kernel_basis_of_zero_generator_is_everything():
    assert len(kernelBasis(Superoperator.zero(2))) == 4


def test_kernel_basis_of_dephasing_is_diagonal():
    basis = kernelBasis(dephasingGenerator([0.0, 1.0, 2.0]))
    assert len(basis) == 3
    for K in basis:
        assert_allclose(K - np.diag(np.diag(K)), 0, atol=1e-10)


def test_kernel_basis_rejects_non_positive_tolerance():
    with pytest.raises(ValueError, match="tol must be > 0"):
        kernelBasis(Superoperator.zero(2), 0.0)


def test_invariant_state_of_depolarizing():
    sigma = DensityState(np.diag([0.1, 0.3, 0.6]))
    assert_allclose(invariantState(depolarizingGenerator(sigma)).op, sigma.op, atol=1e-9)


def test_invariant_state_of_hamiltonian_generator_commutes():
    rng = np.random.default_rng(4)
    H = randomHermitian(rng, 3)
    rho = invariantState(buildGKSL(GKSLSpec(H))).op
    assert np.trace(rho).real == pytest.approx(1.0)
    assert np.linalg.eigvalsh(rho)[0] >= -1e-10
    assert_allclose(H @ rho - rho @ H, 0, atol=1e-8)


def test_conditional_expectation_laws():
    sigma = DensityState.maximallyMixed(3)
    E = conditionalExpectation(kernelBasis(dephasingGenerator([0.0, 1.0, 2.0])), sigma)
    assert_allclose((E @ E).mat, E.mat, atol=1e-12)
    assert_allclose(E.apply(np.eye(3)), np.eye(3), atol=1e-12)
    assert isCP(E).passed
    X = np.arange(9.0).reshape(3, 3)
    assert_allclose(E.apply(X), np.diag(np.diag(X)), atol=1e-12)


def test_conditional_expectation_of_ancilla_depolarizing():
    rng = np.random.default_rng(5)
    sigmaA = DensityState(np.diag([0.25, 0.75]))
    sigma = DensityState(tensor(sigmaA.op, np.eye(2) / 2))
    L = tensorSuperoperator(depolarizingGenerator(sigmaA), Superoperator.identity(2))
    E = fixedPointProjection(L, sigma)
    X = randomMatrix(rng, 4)
    expected = tensor(np.eye(2), partialTrace(tensor(sigmaA.op, np.eye(2)) @ X, 2, 2, "B"))
    assert_allclose(E.apply(X), expected, atol=1e-10)


def test_ergodicity_check():
    assert ergodicityCheck(depolarizingGenerator(DensityState.maximallyMixed(2))).passed
    rotation = buildGKSL(GKSLSpec(np.diag([0.0, 1.0])))
    result = ergodicityCheck(rotation)
    assert not result.passed
    assert len(result.details["violations"]) == 2


def test_conditional_cp_of_negated_generator_fails():
    rng = np.random.default_rng(6)
    L = buildGKSL(randomSpec(rng, 2))
    assert isConditionallyCP(L).passed
    assert not isConditionallyCP(-L).passed


def test_conditional_cp_reports_non_unital_precondition():
    result = isConditionallyCP(Superoperator.identity(2))
    assert not result.passed
    assert "L(1) != 0" in result.details["precondition"]


def test_distance_curve_is_non_increasing():
    sigma = DensityState(np.diag([0.4, 0.6]))
    L = depolarizingGenerator(sigma)
    curve = distanceCurve(L, sigma, np.diag([1.0, 0.0]), np.linspace(0.0, 5.0, 21))
    assert np.all(np.diff(curve) <= 1e-12)
    assert curve[-1] == pytest.approx(curve[0] * np.exp(-5.0), rel=1e-8)


@pytest.mark.parametrize("hermitian", [True, False])
def test_uniform_evolution_agrees_with_propagator(hermitian):
    rng = np.random.default_rng(30)
    L = buildGKSL(randomSpec(rng, 3))
    X0 = randomHermitian(rng, 3) if hermitian else randomMatrix(rng, 3)
    states = evolveUniform(L, X0, 0.25, 9)
    expected = Propagator(L).evolveMany(X0, 0.25 * np.arange(9))
    assert len(states) == 9
    for X, Y in zip(states, expected):
        assert_allclose(X, Y, atol=1e-9)


def test_uniform_evolution_rejects_bad_step():
    L = depolarizingGenerator(DensityState.maximallyMixed(2))
    with pytest.raises(ValueError, match="need dt > 0"):
        evolveUniform(L, np.eye(2), 0.0, 3)


def test_spectrum_matches_complex_eigenvalues():
    rng = np.random.default_rng(31)
    L = buildGKSL(randomSpec(rng, 3))
    values, expected = spectrum(L), np.linalg.eigvals(L.mat)
    assert values.size == 9
    assert np.max(np.min(np.abs(values[:, None] - expected[None, :]), axis=1)) <= 1e-8 * L.norm()
    assert_allclose(np.sort(spectrum(Superoperator(np.diag([0.0, 1j, 2.0, -1j])))), np.sort([0.0, 1j, 2.0, -1j]))


def test_evolution_preserves_hermiticity():
    rng = np.random.default_rng(32)
    for _ in range(TRIALS):
        d = int(rng.integers(2, 4))
        L = buildGKSL(randomSpec(rng, d))
        X = evolve(L, randomHermitian(rng, d), float(rng.uniform(0.1, 3.0)))
        assert_allclose(X, X.conj().T, atol=1e-9 * max(1.0, np.linalg.norm(X)))


def test_conditional_expectation_preserves_state_and_is_kms_symmetric():
    rng = np.random.default_rng(33)
    for _ in range(TRIALS):
        p, q = rng.uniform(0.05, 0.95, 2)
        sigmaA = DensityState(np.diag([p, 1 - p]))
        sigma = DensityState(tensor(sigmaA.op, np.diag([q, 1 - q])))
        L = tensorSuperoperator(depolarizingGenerator(sigmaA), Superoperator.identity(2))
        E = fixedPointProjection(L, sigma)
        X = randomMatrix(rng, 4)
        assert np.trace(sigma.op @ E.apply(X)) == pytest.approx(np.trace(sigma.op @ X), abs=1e-10 * np.linalg.norm(X))
        assert_allclose(kmsAdjoint(E, sigma).mat, E.mat, atol=1e-9)
