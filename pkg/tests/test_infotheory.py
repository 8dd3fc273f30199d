import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from uncloneable import ensembles as ens
from uncloneable import games as gm
from uncloneable import infotheory as it
from uncloneable.core import phi_plus_vector, proj, ptrace, random_density


def test_canonical_entropies():
    assert it.hmin_sdp(proj(phi_plus_vector(2)), 2, 2).value == pytest.approx(-1, abs=1e-8)
    assert it.hmin_sdp(np.kron(np.eye(4) / 4, random_density(2, np.random.default_rng(0))), 4, 2).value == \
        pytest.approx(2, abs=1e-8)
    cl = np.diag([0.5, 0, 0, 0.5])
    assert it.hmin_sdp(cl, 2, 2).value == pytest.approx(0, abs=1e-8)


@settings(max_examples=8, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_hmin_properties(seed):
    rng = np.random.default_rng(seed)
    rho = random_density(6, rng)
    h = it.hmin_sdp(rho, 2, 3)
    assert h.lower <= h.upper and h.gap < 1e-8
    assert -1 - 1e-9 <= h.value <= 1 + 1e-9  # |H_min| <= log |A|
    assert h.value <= it.conditional_entropy(rho, 2, 3) + 1e-9
    # local unitaries on B leave H_min unchanged
    u = np.kron(np.eye(2), ens.sample_haar(3, rng))
    assert it.hmin_sdp(u @ rho @ u.conj().T, 2, 3).value == pytest.approx(h.value, abs=1e-7)


def test_hmin_matches_cvxpy():
    pytest.importorskip("cvxpy")
    rho = random_density(8, np.random.default_rng(9))
    assert it.hmin_sdp(rho, 2, 4).value == pytest.approx(oracles.hmin_cvxpy(rho, 2, 4), abs=1e-5)


def test_krs_agrees_with_sdp(rng):
    for _ in range(3):
        rho = random_density(4, rng)
        assert it.hmin_krs(rho, 2, 2, rng=rng).value == pytest.approx(it.hmin_sdp(rho, 2, 2).value, abs=1e-3)


def test_fingerprint_stable(rng):
    rho = random_density(4, rng)
    assert it.fingerprint(rho) == it.fingerprint(rho.copy())
    assert it.fingerprint(rho) != it.fingerprint(random_density(4, rng))


def test_decoupling_rhs_formula():
    # rho_AE = omega_A (x) |0><0|, |A| = 16: H_min = 4, |A2| = 8, |A1| = 2
    assert it.decoupling_rhs(4, 16) == pytest.approx(2 ** (-2 - 1 - 1))
    assert it.decoupling_rhs(-4, 16) >= 1


def test_decoupling_product_state_is_exact(rng):
    rho = np.kron(np.eye(8) / 8, random_density(2, rng))
    r = it.decoupling_check(rho, 8, 2, samples=200, rng=rng)
    assert r.lhs_mc < 1e-12 and r.holds and not r.vacuous


def test_decoupling_maximally_entangled_is_vacuous(rng):
    r = it.decoupling_check(proj(phi_plus_vector(4)), 4, 4, samples=200, rng=rng)
    assert r.vacuous and r.holds


def test_decoupling_clifford_matches_haar(rng):
    rho = random_density(8, rng)
    a = it.decoupling_check(rho, 4, 2, samples=3000, rng=rng)
    b = it.decoupling_check(rho, 4, 2, ensemble=ens.clifford_group(2), samples=3000, rng=rng)
    assert a.holds and b.holds


def test_decoupling_errors(rng):
    with pytest.raises(ValueError):
        it.decoupling_check(random_density(6, rng), 3, 2)
    with pytest.raises(ValueError):
        it.decoupling_check(random_density(8, rng), 4, 2, ensemble=ens.haar(2))


def test_remark_delta_identity():
    for d in (16, 256, 2 ** 16):
        assert it.near_eigenstate_rhs(it.remark_delta(d), d) == pytest.approx(1 - 4 / math.log2(d), abs=1e-12)


@pytest.mark.parametrize("rotate", [False, True])
def test_probe_marginal(rotate, rng):
    d, dC = 4, 2
    phi = it.make_probe(d, dC, rng, rotate).reshape(d, d * dC, dC)
    s = np.einsum("abc,ebf->acef", phi, phi.conj()).reshape(d * dC, d * dC)
    assert np.allclose(s, np.kron(np.eye(d) / d, ptrace(s, [d, dC], 0)), atol=1e-12)


def test_chain_small(rng):
    r = it.chain_suite(4, probes=3, rng=rng)
    assert r.epsilon > 0 and not r.violations and not r.skipped
    kinds = {rec.check for rec in r.records}
    assert kinds == {"near-eigenstate", "inner-product", "entropy-bound", "proof-step"}


def test_chain_rejects_bad_probe(rng):
    game = gm.MoeGame(ens.clifford_group(1))
    bob, charlie = gm.random_povms(24, 4, rng), gm.random_povms(24, 2, rng)
    phi = np.zeros(16, dtype=complex)
    phi[0] = 1
    with pytest.raises(ValueError):
        it.chain_check(game, bob, charlie, [phi])


def test_bounds():
    assert it.game_bound(2 ** 20) == pytest.approx(0.5 + 3 * math.log2(20) / 40, abs=1e-12)
    assert it.security_delta(16) == pytest.approx(0.375, abs=1e-12)
    with pytest.raises(ValueError):
        it.game_bound(8)
    with pytest.raises(ValueError):
        it.game_bound(15)
    with pytest.raises(ValueError):
        it.security_delta(2)
    rows = it.bound_table([16, 2 ** 20], [8, 16])
    assert [r.vacuous for r in rows] == [True, False, True, False]
