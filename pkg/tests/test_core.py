import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import ptrace_loops
from uncloneable.core import (
    DensityMatrix, HermitianOperator, LayoutError, Povm, RegisterLayout, dagger, fidelity,
    kron_all, maximally_entangled, maximally_mixed, partial_trace, permute, permute_registers,
    phi_plus_vector, proj, ptrace, purify, random_density, tensor, trace_distance,
    von_neumann_entropy,
)

dims_st = st.lists(st.integers(1, 3), min_size=1, max_size=3)


@settings(max_examples=40, deadline=None)
@given(dims=dims_st, seed=st.integers(0, 2**32 - 1), data=st.data())
def test_ptrace_matches_loops(dims, seed, data):
    out = data.draw(st.integers(0, len(dims) - 1))
    m = random_density(int(np.prod(dims)), np.random.default_rng(seed))
    assert np.allclose(ptrace(m, dims, out), ptrace_loops(m, dims, out), atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_ptrace_of_product(seed):
    rng = np.random.default_rng(seed)
    a, b = random_density(2, rng), random_density(3, rng)
    ab = np.kron(a, b)
    assert np.allclose(ptrace(ab, [2, 3], 1), a)
    assert np.allclose(ptrace(ab, [2, 3], 0), b)


def test_permute_swaps_kron_factors(rng):
    a, b, c = random_density(2, rng), random_density(3, rng), random_density(2, rng)
    m = kron_all([a, b, c])
    assert np.allclose(permute(m, [2, 3, 2], [2, 0, 1]), kron_all([c, a, b]))


def test_layout_rejects_duplicates_and_unknown():
    with pytest.raises(LayoutError):
        RegisterLayout([("A", 2), ("A", 2)])
    lay = RegisterLayout([("A", 2), ("B", 3)])
    with pytest.raises(LayoutError):
        lay.index("C")
    assert lay.split("B", [("B1", 3)]).names == ("A", "B1")
    with pytest.raises(LayoutError):
        lay.split("A", [("x", 3)])
    assert lay.without("A").dims == (3,)


def test_operator_validation():
    with pytest.raises(ValueError):
        HermitianOperator(np.array([[0, 1], [0, 0]]))
    with pytest.raises(LayoutError):
        HermitianOperator(np.eye(4), RegisterLayout([("A", 3)]))
    with pytest.raises(ValueError):
        DensityMatrix(np.eye(2))
    with pytest.raises(ValueError):
        DensityMatrix(np.diag([1.5, -0.5]))
    with pytest.raises(ValueError):
        HermitianOperator(np.array([[np.nan]]))
    with pytest.raises(ValueError):
        Povm([np.eye(2) / 2, np.eye(2) / 3])
    p = Povm([proj([1, 0]), proj([0, 1])])
    assert len(p) == 2 and p.dim == 2


def test_named_operations(rng):
    a = DensityMatrix(random_density(2, rng), RegisterLayout.single("A", 2))
    b = DensityMatrix(random_density(3, rng), RegisterLayout.single("B", 3))
    ab = tensor([a, b])
    assert ab.layout.names == ("A", "B")
    assert np.allclose(partial_trace(ab, "A").matrix, b.matrix)
    ba = permute_registers(ab, ["B", "A"])
    assert np.allclose(ba.matrix, np.kron(b.matrix, a.matrix))
    with pytest.raises(LayoutError):
        tensor([a, a])


def test_entangled_and_mixed():
    phi = maximally_entangled(3)
    assert np.allclose(phi.matrix, proj(phi_plus_vector(3)))
    assert np.allclose(partial_trace(phi, "A'").matrix, maximally_mixed(3).matrix)
    assert von_neumann_entropy(maximally_mixed(4).matrix) == pytest.approx(2.0)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_purification_marginal(seed):
    rho = DensityMatrix(random_density(3, np.random.default_rng(seed)))
    psi = purify(rho)
    w = np.linalg.eigvalsh(psi.matrix)
    assert w[-1] == pytest.approx(1.0) and abs(w[:-1]).max() < 1e-10
    assert np.allclose(partial_trace(psi, psi.layout.names[1]).matrix, rho.matrix, atol=1e-10)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_distance_measures(seed):
    rng = np.random.default_rng(seed)
    r, s = random_density(3, rng), random_density(3, rng)
    td, f = trace_distance(r, s), fidelity(r, s)
    assert 0 <= td <= 1 and 0 <= f <= 1 + 1e-9
    assert trace_distance(r, r) < 1e-12 and fidelity(r, r) == pytest.approx(1.0)
    # Fuchs-van de Graaf, root-fidelity form
    assert 1 - f <= td + 1e-9
    assert td <= np.sqrt(1 - f * f) + 1e-9


def test_fidelity_examples():
    assert fidelity(proj([1, 0]), proj([0, 1])) == pytest.approx(0, abs=1e-12)
    assert fidelity(np.eye(2) / 2, proj([1, 0])) == pytest.approx(1 / np.sqrt(2))


def test_random_density_rank(rng):
    r = random_density(5, rng, rank=2)
    w = np.linalg.eigvalsh(r)
    assert np.sum(w > 1e-10) == 2 and np.trace(r).real == pytest.approx(1.0)
    assert np.allclose(r, dagger(r))
