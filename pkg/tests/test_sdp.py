import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from uncloneable.core import HermitianOperator, RegisterLayout, phi_plus_vector, proj, random_density, random_hermitian
from uncloneable.sdp import MAX_DIM, _to_sr, dominance_sdp, verify_certificates


@settings(max_examples=20, deadline=None)
@given(s=st.integers(1, 3), r=st.integers(1, 3), seed=st.integers(0, 2**32 - 1))
def test_certificates_are_valid(s, r, seed):
    m = random_hermitian(s * r, np.random.default_rng(seed))
    cert = dominance_sdp(m, [s, r], on=0)
    assert cert.converged and cert.gap <= 1e-8 * max(1, abs(cert.upper))
    assert verify_certificates(m, cert, s, r)


def test_register_order(rng):
    m = random_hermitian(6, rng)
    a = dominance_sdp(m, [2, 3], on=1)
    ms, s, r = _to_sr(m, [2, 3], 1)
    assert (s, r) == (3, 2)
    assert verify_certificates(ms, a, s, r)


def test_known_values():
    # min Tr Y with 1 (x) Y >= |phi+><phi+| is d, i.e. H_min = -log d
    cert = dominance_sdp(proj(phi_plus_vector(3)), [3, 3], on=1)
    assert cert.value == pytest.approx(3.0, abs=1e-8)
    # a product state on S with identity on R: Y = rho_S
    rho = random_density(2, np.random.default_rng(0))
    cert = dominance_sdp(np.kron(rho, np.eye(3) / 3), [2, 3], on=0)
    assert cert.value == pytest.approx(1 / 3, abs=1e-8)


def test_agrees_with_cvxpy():
    pytest.importorskip("cvxpy")
    rng = np.random.default_rng(3)
    for _ in range(3):
        rho = random_density(6, rng)
        cert = dominance_sdp(rho, [3, 2], on=1)
        assert -np.log2(cert.value) == pytest.approx(oracles.hmin_cvxpy(rho, 3, 2), abs=1e-5)


def test_low_rank_and_hard_instances(rng):
    rho = random_density(16, rng, rank=1)
    cert = dominance_sdp(rho, [4, 4], on=1)
    assert cert.gap < 1e-8 and verify_certificates(_to_sr(rho, [4, 4], 1)[0], cert, 4, 4)


def test_operator_input_and_errors(rng):
    op = HermitianOperator(random_density(4, rng), RegisterLayout([("A", 2), ("B", 2)]))
    assert dominance_sdp(op, on="B").converged
    with pytest.raises(ValueError):
        dominance_sdp(np.eye(4))
    with pytest.raises(ValueError):
        dominance_sdp(np.eye(4), [3, 2])
    with pytest.raises(ValueError):
        dominance_sdp(np.eye(MAX_DIM + 2), [2, (MAX_DIM + 2) // 2])
