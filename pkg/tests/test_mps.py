import itertools

import numpy as np
import pytest

from mpsh import channel, linalg, models, mps
from mpsh.errors import CapExceededError, ConsistencyError, DegenerateChainError, DimensionError, NotErgodicError
from mpsh.linalg import SIGMA_X, SIGMA_Z
from mpsh.mps import LocalObservable, MPSChain

from conftest import random_hermitian, random_matrix


def amplitudes_by_loop(chain: MPSChain, n: int) -> np.ndarray:
    """Index-loop oracle: one explicit matrix product per multi-index."""
    out = []
    for idx in itertools.product(range(chain.physical_dim), repeat=n):
        m = np.eye(chain.bond_dim, dtype=complex)
        for site, i in enumerate(idx, start=1):
            m = m @ chain.family(site)[i]
        out.append(np.trace(m))
    return np.array(out)


def brute_phi(chain: MPSChain, x: LocalObservable, n: int) -> complex:
    """⟨ψ|I ⊗ X ⊗ I|ψ⟩/⟨ψ|ψ⟩ with the operator built explicitly."""
    psi = amplitudes_by_loop(chain, n + 1)
    d = chain.physical_dim
    op = linalg.embed(x.matrix, d ** (x.first - 1), d ** (n + 1 - x.last))
    return complex(psi.conj() @ op @ psi / (psi.conj() @ psi))


def test_ghz_state_vector():
    psi = mps.state_vector(models.ghz_chain(), 3)
    expected = np.zeros(8)
    expected[0] = expected[7] = 1
    np.testing.assert_allclose(psi, expected)


def test_identity_family_amplitudes():
    chain = MPSChain.uniform([np.eye(3)])
    np.testing.assert_allclose(mps.state_vector(chain, 4), [3])


def test_state_vector_matches_index_loop():
    chain = models.random_gauge_chain(2, 2, n_sites=4, seed=5)
    np.testing.assert_allclose(mps.state_vector(chain, 4), amplitudes_by_loop(chain, 4), atol=1e-13)


def test_state_vector_cap():
    with pytest.raises(CapExceededError):
        mps.state_vector(models.depolarizing_chain(0.2), 9)
    with pytest.raises(CapExceededError):
        mps.state_vector(models.ghz_chain(), 5, cap=16)


def test_normalization_values():
    assert mps.normalization(models.depolarizing_chain(0.3), 2) == pytest.approx(2.08, abs=1e-12)
    for n in range(1, 7):
        assert mps.normalization(models.ghz_chain(), n) == pytest.approx(2)
        assert mps.normalization(models.ghz_chain(), n, "brute_force") == pytest.approx(2)


@pytest.mark.parametrize("seed", range(8))
def test_normalization_paths_agree(seed):
    rng = np.random.default_rng(seed)
    d, D = rng.integers(1, 4), rng.integers(1, 4)
    chain = models.random_gauge_chain(int(d), int(D), n_sites=5, seed=seed)
    for n in range(1, 6):
        assert mps.normalization(chain, n, "transfer") == pytest.approx(mps.normalization(chain, n, "brute_force"), abs=1e-10)


def test_normalization_degenerate():
    chain = MPSChain.uniform([np.array([[0, 1], [0, 0]])])
    with pytest.raises(DegenerateChainError):
        mps.normalization(chain, 1)


def test_transfer_channel_ghz_and_depolarizing(rng):
    m = random_matrix(rng, 2)
    np.testing.assert_allclose(mps.transfer_channel(models.ghz_chain(), 1)(m), np.diag(np.diag(m)))
    p = 0.3
    np.testing.assert_allclose(mps.transfer_channel(models.depolarizing_chain(p), 4)(m), models.depolarizing_action(m, p), atol=1e-12)


def test_transfer_channel_unital_under_gauge_for_hermitian_families():
    for chain in (models.ghz_chain(), models.depolarizing_chain(0.4)):
        np.testing.assert_allclose(mps.transfer_channel(chain, 1)(np.eye(2)), np.eye(2), atol=1e-12)


def test_transfer_channel_trace_preserving_under_gauge(rng):
    chain = models.random_gauge_chain(3, 3, seed=2)
    m = random_matrix(rng, 3)
    assert np.trace(mps.transfer_channel(chain, 1)(m)) == pytest.approx(np.trace(m), abs=1e-12)


def test_lift_identity_is_composed_transfer():
    chain = models.random_gauge_chain(2, 3, n_sites=4, seed=1)
    lifted = mps.lift_observable(chain, LocalObservable.identity(2, 2, 4))
    expected = channel.compose_all([mps.transfer_channel(chain, k) for k in (4, 3, 2)])
    np.testing.assert_allclose(lifted.matrix, expected.matrix, atol=1e-12)


def test_lift_of_tensor_product_on_disjoint_windows(rng):
    chain = models.random_gauge_chain(2, 2, n_sites=3, seed=7)
    x = LocalObservable(random_matrix(rng, 2), 1, 1)
    y = LocalObservable(random_matrix(rng, 4), 2, 3)
    xy = LocalObservable(np.kron(x.matrix, y.matrix), 1, 3)
    # X acts on the earlier window, so its lift is applied first
    composed = channel.compose(mps.lift_observable(chain, y), mps.lift_observable(chain, x))
    np.testing.assert_allclose(composed.matrix, mps.lift_observable(chain, xy).matrix, atol=1e-12)


def test_lift_gives_brute_force_expectation(rng):
    chain = models.random_gauge_chain(2, 2, seed=3)
    x = LocalObservable(random_hermitian(rng, 4), 1, 2)
    # ⟨ψ₃|X⊗I|ψ₃⟩ = Tr(Φ_3 ∘ X̂)
    via_lift = channel.superop_trace(mps.transfer_channel(chain, 3) @ mps.lift_observable(chain, x))
    psi = amplitudes_by_loop(chain, 3)
    assert via_lift == pytest.approx(psi.conj() @ np.kron(x.matrix, np.eye(2)) @ psi, abs=1e-10)


def test_lift_cap():
    with pytest.raises(CapExceededError):
        mps.lift_observable(models.ghz_chain(), LocalObservable.identity(2, 1, 3), cap=16)


def test_observable_dimension_checked():
    with pytest.raises(DimensionError):
        mps.finite_expectation(models.depolarizing_chain(0.1), LocalObservable(np.eye(2), 1, 1), 2)


def test_finite_expectation_depolarizing_phi1():
    x = LocalObservable(linalg.matrix_unit(4, 0, 0), 1, 1)
    assert mps.finite_expectation(models.depolarizing_chain(0.3), x, 1) == pytest.approx(0.49 / 0.52, abs=1e-12)


@pytest.mark.parametrize("seed", range(6))
def test_finite_expectation_identity_is_one(seed):
    chain = models.random_gauge_chain(3, 2, n_sites=6, seed=seed)
    for n in range(2, 5):
        assert mps.finite_expectation(chain, LocalObservable.identity(3, 1, 2), n) == pytest.approx(1, abs=1e-12)


def test_ghz_sigma_z_vanishes():
    z = LocalObservable(SIGMA_Z, 1, 1)
    for n in range(1, 6):
        assert mps.finite_expectation(models.ghz_chain(), z, n) == pytest.approx(0, abs=1e-14)
        assert brute_phi(models.ghz_chain(), z, n) == pytest.approx(0, abs=1e-14)


@pytest.mark.parametrize("seed", range(10))
def test_oracle_equivalence(seed):
    rng = np.random.default_rng(100 + seed)
    d, D = int(rng.integers(1, 5)), int(rng.integers(1, 5))
    n = int(rng.integers(1, 5))
    chain = models.random_gauge_chain(d, D, n_sites=n + 1, seed=seed)
    first = int(rng.integers(1, n + 1))
    last = int(rng.integers(first, n + 1))
    x = LocalObservable(random_hermitian(rng, d ** (last - first + 1)), first, last)
    detail = mps.expectation_detail(chain, x, n, method="both")
    assert detail.residual <= 1e-10
    assert detail.value == pytest.approx(brute_phi(chain, x, n), abs=1e-10)


def test_non_hermitian_observable_returns_complex():
    chain = models.random_gauge_chain(2, 2, seed=4)
    v = mps.finite_expectation(chain, LocalObservable(linalg.matrix_unit(2, 0, 1), 1, 1), 3)
    assert isinstance(v, complex)


def test_positivity(rng):
    chain = models.random_gauge_chain(2, 3, seed=9)
    for _ in range(10):
        b = random_matrix(rng, 4)
        assert mps.finite_expectation(chain, LocalObservable(b.conj().T @ b, 1, 2), 3) >= -1e-10


def test_transfer_route_beyond_cap():
    chain = models.depolarizing_chain(0.3)
    x = LocalObservable(linalg.matrix_unit(4, 0, 0), 1, 1)
    detail = mps.expectation_detail(chain, x, 20)
    assert detail.method == "transfer" and detail.brute_force is None


def test_gauge_check():
    assert max(mps.gauge_check(models.ghz_chain())) == 0
    assert max(mps.gauge_check(models.depolarizing_chain(0.37))) < 1e-15
    assert mps.gauge_check(MPSChain.uniform([np.eye(2), np.eye(2)])) == [1.0]


def test_consistency_check():
    assert max(mps.projective_consistency_check(models.ghz_chain(), 3)) == 0
    assert max(mps.projective_consistency_check(models.depolarizing_chain(0.3), 1)) > 0.1
    for seed in range(5):
        chain = models.projector_chain(3, 5, seed)
        assert max(mps.projective_consistency_check(chain, 1)) < 1e-14


def test_projective_limit_ghz():
    g = models.ghz_chain()
    zz = LocalObservable.product([SIGMA_Z, SIGMA_Z])
    assert mps.projective_limit(g, zz) == pytest.approx(1)
    assert mps.projective_limit(g, LocalObservable.identity(2, 1, 3)) == pytest.approx(1)
    assert mps.projective_limit(g, LocalObservable(SIGMA_X, 1, 1)) == pytest.approx(0)


def test_projective_limit_refuses_inconsistent_chain():
    with pytest.raises(ConsistencyError):
        mps.projective_limit(models.depolarizing_chain(0.3), LocalObservable(np.eye(4), 1, 1))


def test_projective_invariance_in_n(rng):
    for chain in [models.ghz_chain()] + [models.projector_chain(2, 3, s) for s in range(3)]:
        x = LocalObservable(random_hermitian(rng, 4), 1, 2)
        vals = [mps.finite_expectation(chain, x, 2 + k) for k in range(5)]
        np.testing.assert_allclose(vals, vals[0], atol=1e-10)
        assert mps.projective_limit(chain, x) == pytest.approx(vals[0], abs=1e-10)


def test_ergodic_limit_depolarizing():
    chain = models.depolarizing_chain(0.3)
    assert mps.ergodic_limit(chain, LocalObservable(linalg.matrix_unit(4, 0, 0), 1, 1)) == pytest.approx(0.7, abs=1e-12)
    assert mps.ergodic_limit(chain, LocalObservable.identity(4, 1, 2)) == pytest.approx(1, abs=1e-12)


def test_ergodic_limit_equals_trace_against_limit_channel(rng):
    chain = models.random_gauge_chain(3, 2, seed=11)
    x = LocalObservable(random_hermitian(rng, 9), 1, 2)
    phi_star = channel.limit_channel(mps.transfer_channel(chain, 1))
    expected = channel.superop_trace(phi_star @ mps.lift_observable(chain, x))
    assert mps.ergodic_limit(chain, x) == pytest.approx(expected.real, abs=1e-12)


def test_ergodic_limit_is_limit_of_finite_states(rng):
    checked = 0
    for seed in range(40):
        chain = models.random_gauge_chain(8, 2, seed=seed)
        rep = channel.spectral_classification(mps.transfer_channel(chain, 1))
        if 1 - rep.spectral_gap > 0.3:
            continue
        x = LocalObservable(random_hermitian(rng, 8), 1, 1)
        assert mps.ergodic_limit(chain, x) == pytest.approx(mps.finite_expectation(chain, x, 1 + 12), abs=1e-6)
        checked += 1
    assert checked >= 3


def test_ergodic_limit_rejects_non_mixing():
    with pytest.raises(NotErgodicError):
        mps.ergodic_limit(models.ghz_chain(), LocalObservable(SIGMA_Z, 1, 1))
    with pytest.raises(NotErgodicError):
        mps.ergodic_limit(models.depolarizing_chain(0.0), LocalObservable(np.eye(4), 1, 1))


def test_ergodic_limit_needs_translation_invariance():
    with pytest.raises(ValueError):
        mps.ergodic_limit(models.random_gauge_chain(2, 2, n_sites=3), LocalObservable(np.eye(2), 1, 1))


def test_trace_identity_ghz_all_equal():
    res = mps.trace_product_identity_check(models.ghz_chain(), 2, 2, (1, 1, 1, 1), (1, 1))
    assert res.passed and res.lhs == pytest.approx(1) and res.rhs == pytest.approx(1)


def test_trace_identity_random():
    chain = models.random_gauge_chain(3, 3, n_sites=4, seed=8)
    rng = np.random.default_rng(0)
    for _ in range(30):
        i = tuple(rng.integers(0, 3, 4))
        j = tuple(rng.integers(0, 3, 2)) + i[2:]
        res = mps.trace_product_identity_check(chain, 2, 2, i, j)
        assert res.residual < 1e-12


def test_trace_identity_k_zero():
    chain = models.random_gauge_chain(2, 2, n_sites=3, seed=2)
    i, j = (0, 1, 1), (1, 0, 1)
    res = mps.trace_product_identity_check(chain, 3, 0, i, j)
    wi = chain.family(1)[0] @ chain.family(2)[1] @ chain.family(3)[1]
    wj = chain.family(1)[1] @ chain.family(2)[0] @ chain.family(3)[1]
    assert res.rhs == pytest.approx(np.conj(np.trace(wi)) * np.trace(wj), abs=1e-14)
    assert res.passed


def test_trace_identity_rejects_unshared_tail():
    with pytest.raises(ValueError):
        mps.trace_product_identity_check(models.ghz_chain(), 1, 1, (0, 0), (0, 1))


def test_probe_ghz_projective():
    rep = mps.projectivity_probe(models.ghz_chain(), range(1, 6))
    assert rep.verdict == "projective"
    assert max(rep.max_violation) <= 1e-12


def test_probe_depolarizing_non_projective():
    x = LocalObservable(linalg.matrix_unit(4, 0, 0), 1, 1)
    rep = mps.projectivity_probe(models.depolarizing_chain(0.3), range(1, 4), [x])
    assert rep.verdict == "non_projective"
    assert all(v > 1e-3 for v in rep.max_violation)
    assert rep.limit_method == "ergodic_limit"
    assert rep.limit_gaps[0] == pytest.approx(0.49 / 0.52 - 0.7, abs=1e-12)


def test_probe_identity_only():
    rep = mps.projectivity_probe(models.depolarizing_chain(0.3), range(1, 4), [LocalObservable(np.eye(4), 1, 1)])
    assert rep.verdict == "projective" and max(rep.max_violation) < 1e-12


def test_chain_validation():
    with pytest.raises(DimensionError):
        MPSChain.per_site([[np.eye(2)], [np.eye(3)]])
    with pytest.raises(IndexError):
        models.random_gauge_chain(2, 2, n_sites=2).family(3)
