import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from uncloneable import ensembles as ens
from uncloneable.core import dagger, random_hermitian


@settings(max_examples=20, deadline=None)
@given(d=st.integers(1, 6), seed=st.integers(0, 2**32 - 1))
def test_haar_samples_are_unitary(d, seed):
    u = ens.sample_haar(d, np.random.default_rng(seed), size=3)
    assert u.shape == (3, d, d)
    assert np.allclose(dagger(u) @ u, np.eye(d), atol=1e-12)


def test_haar_first_moment(rng):
    # E |U_00|^2 = 1/d, E U_00 = 0
    u = ens.sample_haar(3, rng, size=20000)
    assert abs(np.mean(np.abs(u[:, 0, 0]) ** 2) - 1 / 3) < 0.01
    assert abs(np.mean(u[:, 0, 0])) < 0.02


def test_ensemble_validation():
    with pytest.raises(ValueError):
        ens.UnitaryEnsemble(2, np.array([[[1, 1], [0, 1]]]))
    with pytest.raises(ValueError):
        ens.haar(3).size
    with pytest.raises(ValueError):
        ens.half_projectors(3)


@pytest.mark.parametrize("n", [1, 2])
def test_clifford_group_order(n):
    g = ens.clifford_group(n)
    assert g.size == oracles.clifford_group_size(n)
    keys = {ens.matrix_key(ens.canonical_phase(u)) for u in g.unitaries}
    assert len(keys) == g.size


def test_small_ensembles():
    assert ens.pauli_group(1).size == 4
    b = ens.bb84()
    assert b.size == 2 and np.allclose(b.unitaries[1], oracles.HADAMARD)
    orbit = ens.clifford_orbit(3)
    assert orbit.size == 2 * (64 - 1)
    assert orbit.conjugation_closed


@pytest.mark.parametrize("n", [1, 2, 3])
def test_clifford_orbit_matches_projector_moments(n):
    assert ens.projector_moment_deviation(ens.clifford_orbit(n)) < 1e-10


def test_orbit_covers_pauli_eigenprojectors():
    d = 4
    orbit = ens.clifford_orbit(2)
    assert orbit.size == 2 * (d * d - 1)  # one key per signed Pauli projector
    p0 = ens.keyed_projectors(orbit.unitaries)
    assert np.allclose(p0.sum(1), np.eye(d))


def test_moment_closed_forms_match_weingarten():
    for d in (2, 4, 8):
        for n in (1, 2):
            assert np.allclose(ens.moment_T_exact(n, d), oracles.haar_T_moments(n, d), atol=1e-15)
    assert ens.moment_T_exact(2, 2)[1] == pytest.approx(1 / 12, abs=1e-15)


def test_moment_errors():
    with pytest.raises(ValueError):
        ens.moment_T_exact(0, 2)
    with pytest.raises(ValueError):
        ens.moment_T_exact(1, 3)


def test_variance_bound_dominates():
    for n in (1, 2, 3):
        for d in (2, 4, 8):
            m, s = ens.moment_T_exact(n, d)
            assert np.sqrt(max(s - m * m, 0)) <= ens.variance_bound(n, d) + 1e-15


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_twirl_closed_form_against_clifford(seed):
    # the two-qubit Clifford group is an exact 2-design, so averaging over it is the Haar twirl
    d = 2
    t = random_hermitian(d * d, np.random.default_rng(seed))
    us = ens.clifford_group(1).unitaries
    w = np.einsum("nij,nkl->nikjl", us, us.conj()).reshape(len(us), d * d, d * d)
    exact = (w @ t @ dagger(w)).mean(0)
    assert np.allclose(ens.twirl_second_order(t, d), exact, atol=1e-12)


def test_twirl_mc_agrees(rng):
    t = random_hermitian(9, rng)
    mean, se = ens.twirl_mc(t, ens.haar(3), 4000, rng)
    exact = ens.twirl_second_order(t, 3)
    assert np.all(np.abs(mean - exact) <= 5 * se + 1e-12)


def test_frame_potentials():
    c1 = ens.clifford_group(1)
    assert ens.frame_potential(c1, 2) == pytest.approx(2.0, abs=1e-10)
    assert ens.frame_potential(c1, 2) == pytest.approx(oracles.frame_potential_loops(c1.unitaries, 2))
    assert ens.frame_potential(ens.pauli_group(1), 2) == pytest.approx(4.0, abs=1e-10)
    assert ens.frame_potential(ens.pauli_group(1), 1) == pytest.approx(1.0, abs=1e-10)
    assert ens.haar_frame_potential(4, 2) == oracles.haar_frame_potential(4, 2)


def test_design_verdicts():
    assert ens.is_t_design(ens.clifford_group(1), 2)[0]
    assert ens.is_t_design(ens.pauli_group(1), 1)[0]
    ok, dev = ens.is_t_design(ens.pauli_group(1), 2)
    assert not ok and dev > 0.1
    assert not ens.is_t_design(ens.bb84(), 1)[0]


def test_exp_bound_terms(rng):
    t = rng.random((50, 3))
    s = rng.dirichlet(np.ones(3), size=50)
    lhs, rhs = ens.exp_bound_terms(t, s, 0.5)
    assert lhs <= rhs + 1e-12
    with pytest.raises(ValueError):
        ens.exp_bound_terms(t, s * 2, 0.5)


def test_moment_mc_deterministic():
    e = ens.haar(4)
    a = ens.moment_T_mc(2, 4, None, e, 5000, np.random.default_rng(3))
    b = ens.moment_T_mc(2, 4, None, e, 5000, np.random.default_rng(3))
    assert a == b and a.agrees()
