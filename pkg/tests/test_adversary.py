import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from uncloneable import adversary as adv
from uncloneable import ensembles as ens
from uncloneable import games as gm
from uncloneable import schemes as sc
from uncloneable.core import ptrace, random_density


@pytest.fixture(scope="module")
def bb84():
    return sc.Qecm(ens.bb84())


def test_choi_validation(bb84, rng):
    k = 2
    povms = gm.random_povms(k, 2, rng)
    with pytest.raises(ValueError):
        adv.CloningAttack(2, 2, 2, random_density(8, rng), povms, povms)  # not trace preserving
    with pytest.raises(ValueError):
        adv.CloningAttack(2, 2, 2, -adv.random_isometry_choi(2, 4, rng), povms, povms)


@settings(max_examples=15, deadline=None)
@given(dA=st.integers(1, 4), dout=st.integers(1, 6), seed=st.integers(0, 2**32 - 1))
def test_random_choi_is_channel(dA, dout, seed):
    j = adv.random_isometry_choi(dA, dout, np.random.default_rng(seed))
    assert np.allclose(ptrace(j, [dA, dout], 1), np.eye(dA) / dA, atol=1e-12)
    assert np.linalg.eigvalsh(j)[0] > -1e-12


def test_apply_preserves_trace(bb84, rng):
    j = adv.random_isometry_choi(2, 4, rng)
    a = adv.CloningAttack(2, 2, 2, j, gm.random_povms(2, 2, rng), gm.random_povms(2, 2, rng))
    out = a.apply(random_density(2, rng))
    assert out.shape == (4, 4) and np.trace(out).real == pytest.approx(1.0)
    assert np.linalg.eigvalsh(out)[0] > -1e-12


def test_baseline_attacks(bb84, rng):
    assert adv.attack_value(bb84, adv.coordinated_guess_attack(bb84)) == pytest.approx(0.5, abs=1e-15)
    assert adv.attack_value(bb84, adv.broadcast_measure_attack(bb84)) == pytest.approx(oracles.COS2_PI_8, abs=1e-9)
    assert adv.attack_value(bb84, adv.identity_to_bob_attack(bb84)) == pytest.approx(0.5, abs=1e-12)
    est = adv.attack_value_mc(bb84, adv.broadcast_measure_attack(bb84), 4000, rng)
    assert abs(est.value - oracles.COS2_PI_8) <= 4 * est.stderr + 1e-12


def test_measure_prepare_choi_is_entanglement_breaking():
    j = adv.measure_prepare_choi(np.eye(2))
    assert np.allclose(ptrace(j, [2, 4], 1), np.eye(2) / 2)
    # classical correlations only: the partial transpose stays positive
    pt = j.reshape(2, 4, 2, 4).transpose(2, 1, 0, 3).reshape(8, 8)
    assert np.linalg.eigvalsh(pt)[0] > -1e-12


def test_best_response_is_optimal(rng):
    eff = rng.normal(size=(3, 2, 4, 4)) + 1j * rng.normal(size=(3, 2, 4, 4))
    eff = eff + eff.conj().transpose(0, 1, 3, 2)
    best = adv.best_response(eff)
    score = lambda p: np.einsum("kxij,kxji->", eff, p).real
    for _ in range(20):
        assert score(best) >= score(gm.random_povms(3, 4, rng)) - 1e-12


def test_channel_step_is_optimal_for_fixed_measurements(bb84, rng):
    alice = gm.MoeGame(bb84.ensemble).alice()
    bob, charlie = adv.random_pvms(2, 2, rng), adv.random_pvms(2, 2, rng)
    kop = adv.channel_operator(alice.conj(), bob, charlie)
    j, cert = adv.channel_step(kop, 2, 4)
    assert cert.converged and cert.gap < 1e-8
    val = np.trace(kop @ j).real
    for _ in range(10):
        other = adv.random_isometry_choi(2, 4, rng)
        assert np.trace(kop @ other).real <= val + 1e-9


def test_seesaw_bb84(bb84):
    tr = adv.seesaw_attack(bb84, 2, 2, restarts=10, iters=200, rng=np.random.default_rng(7))
    assert oracles.COS2_PI_8 - 1e-4 <= tr.best_value <= oracles.COS2_PI_8 + 1e-6
    assert tr.max_decrease() <= 1e-9
    assert adv.attack_value(bb84, tr.best_attack) == pytest.approx(tr.best_value, abs=1e-9)
    assert len(tr.finals) == 10


def test_seesaw_deterministic():
    q = sc.Qecm(ens.clifford_group(1))
    a = adv.seesaw_attack(q, 2, 2, restarts=2, iters=20, rng=np.random.default_rng(1))
    b = adv.seesaw_attack(q, 2, 2, restarts=2, iters=20, rng=np.random.default_rng(1))
    assert a.rows == b.rows


def test_seesaw_trivial_dimensions():
    q = sc.Qecm(ens.bb84())
    tr = adv.seesaw_attack(q, 1, 1, restarts=2, iters=5, rng=np.random.default_rng(0))
    assert tr.best_value == pytest.approx(0.5, abs=1e-9)


@pytest.mark.parametrize("e", [ens.bb84(), ens.clifford_group(1), ens.clifford_orbit(2)],
                         ids=lambda e: f"{e.name}-{e.d}")
def test_identity_to_bob_value_and_mapping(e):
    # Bob always decodes; Charlie's fixed guess is right half the time
    q = sc.Qecm(e)
    a = adv.identity_to_bob_attack(q)
    m = gm.attack_to_strategy(q, a)
    assert adv.attack_value(q, a) == pytest.approx(0.5, abs=1e-12)
    assert gm.winning_probability(m.game, m.strategy) == pytest.approx(0.5, abs=1e-12)
