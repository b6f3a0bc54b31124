import itertools

import numpy as np
import pytest

from mpsh import channel, linalg, models, mps
from mpsh.linalg import SIGMA_X, SIGMA_Z
from mpsh.mps import LocalObservable

from conftest import random_hermitian


def test_ghz_product_closed_form():
    assert models.ghz_product_closed_form([SIGMA_Z, SIGMA_Z]) == pytest.approx(1)
    assert models.ghz_product_closed_form([SIGMA_X]) == pytest.approx(0)
    assert models.ghz_product_closed_form([np.diag([1, 0])]) == pytest.approx(0.5)


def test_ghz_dense_closed_form_extends_product_form(rng):
    factors = [random_hermitian(rng, 2) for _ in range(3)]
    assert models.ghz_closed_form(linalg.kron(*factors)) == pytest.approx(models.ghz_product_closed_form(factors))


def test_ghz_closed_form_matches_projective_limit_on_random_diagonal(rng):
    chain = models.ghz_chain()
    for _ in range(50):
        n = int(rng.integers(1, 4))
        factors = [np.diag(rng.standard_normal(2)) for _ in range(n)]
        x = LocalObservable.product(factors)
        assert mps.projective_limit(chain, x) == pytest.approx(models.ghz_product_closed_form(factors).real, abs=1e-12)


def test_ghz_closed_form_on_two_site_matrix_units():
    chain = models.ghz_chain()
    for a, b in itertools.product(range(4), repeat=2):
        x = LocalObservable(linalg.matrix_unit(4, a, b), 1, 2)
        assert complex(mps.projective_limit(chain, x)) == pytest.approx(models.ghz_closed_form(x), abs=1e-12)


def test_ghz_model_bundle():
    b = models.ghz_model()
    assert b.chain.physical_dim == 2 and b.chain.bond_dim == 2


def test_depolarizing_kraus_layout():
    ops = models.depolarizing_kraus(0.3)
    np.testing.assert_allclose(ops[0], np.sqrt(0.7) * np.eye(2))
    np.testing.assert_allclose(ops[3], np.sqrt(0.1) * SIGMA_Z)
    with pytest.raises(ValueError):
        models.depolarizing_kraus(-0.1)
    with pytest.raises(ValueError):
        models.depolarizing_model(1.5)


def test_depolarizing_p_zero_degenerate():
    chain = models.depolarizing_chain(0.0)
    assert channel.md_constant_depolarizing(0.0).kappa_trace == 0
    assert not channel.spectral_classification(mps.transfer_channel(chain, 1)).ergodic


def test_depolarizing_stationary_at_three_quarters(rng):
    b = models.depolarizing_model(0.75)
    for _ in range(5):
        rho = random_hermitian(rng, 2)
        np.testing.assert_allclose(b.closed_forms["action"](rho), np.trace(rho) * np.eye(2) / 2, atol=1e-12)


def test_depolarizing_closed_form_values():
    p = 0.3
    b = models.depolarizing_model(p)
    assert b.closed_forms["norm2"]() == pytest.approx(2.08)
    assert b.closed_forms["phi1_ground"]() == pytest.approx(0.49 / 0.52)
    assert b.closed_forms["phi_ground"]() == pytest.approx(0.7)
    e00 = linalg.matrix_unit(4, 0, 0)
    assert models.depolarizing_closed_form(e00, p) == pytest.approx(0.7)
    assert models.depolarizing_closed_form(np.eye(16), p) == pytest.approx(1)
    assert models.depolarizing_closed_form(np.kron(e00, e00), p) == pytest.approx(0.49)


@pytest.mark.parametrize("p", [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7])
def test_depolarizing_closed_form_matches_ergodic_limit(p):
    rng = np.random.default_rng(int(p * 10))
    chain = models.depolarizing_chain(p)
    for k in range(20):
        n = 1 + k % 2
        x = LocalObservable(random_hermitian(rng, 4**n), 1, n)
        assert mps.ergodic_limit(chain, x) == pytest.approx(models.depolarizing_closed_form(x, p).real, abs=1e-10)


def test_random_gauge_chain_gauge_and_determinism():
    for d, D in [(1, 3), (2, 2), (3, 4), (4, 1)]:
        chain = models.random_gauge_chain(d, D, n_sites=3, seed=42)
        assert max(mps.gauge_check(chain)) < 1e-12
        again = models.random_gauge_chain(d, D, n_sites=3, seed=42)
        for s, t in zip(chain.sites, again.sites):
            for a, b in zip(s.operators, t.operators):
                assert np.array_equal(a, b)


def test_random_gauge_chain_d1_is_unitary():
    a = models.random_gauge_chain(1, 4, seed=3).family(1)[0]
    np.testing.assert_allclose(a @ a.conj().T, np.eye(4), atol=1e-12)


def test_projector_chain():
    chain = models.projector_chain(3, 4, seed=1)
    ops = chain.family(1).operators
    np.testing.assert_allclose(sum(ops), np.eye(4), atol=1e-12)
    for i, a in enumerate(ops):
        for j, b in enumerate(ops):
            np.testing.assert_allclose(a @ b, a if i == j else 0, atol=1e-12)
    with pytest.raises(ValueError):
        models.projector_chain(5, 3)


def test_model_by_name():
    assert models.model_by_name("ghz").physical_dim == 2
    assert models.model_by_name("depolarizing", p=0.2).physical_dim == 4
    assert models.model_by_name("random", d=3, dim=2).physical_dim == 3
    with pytest.raises(ValueError):
        models.model_by_name("aklt")
