"""Unitary ensembles: Haar sampling, second-order twirls, Clifford designs.

Also home to the projector-product moments used to bound how far a random
product of half-rank projections strays from its mean, and to the scalar
and operator diagnostics for the t-design property (t <= 2).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .core import dagger, phi_plus_vector
from .streams import map_chunks

UNITARY_TOL = 1e-10


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def sample_haar(d: int, rng: np.random.Generator, size=None) -> np.ndarray:
    """Haar-random unitary (or a stack of them with leading shape ``size``).

    Ginibre matrix followed by QR, with the phases of ``R``'s diagonal moved
    into ``Q`` so the result is exactly Haar distributed.
    """
    if d < 1:
        raise ValueError("dimension must be >= 1")
    shape = () if size is None else ((size,) if np.isscalar(size) else tuple(size))
    z = (rng.standard_normal(shape + (d, d)) + 1j * rng.standard_normal(shape + (d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r, axis1=-2, axis2=-1)
    ph = diag / np.abs(diag)
    return q * ph[..., None, :]


def canonical_phase(u: np.ndarray) -> np.ndarray:
    """Multiply by the global phase that makes the first nonzero entry real positive."""
    flat = u.ravel()
    i = int(np.argmax(np.abs(flat) > 1e-9))
    return u * (abs(flat[i]) / flat[i])


def matrix_key(u: np.ndarray, decimals: int = 8) -> bytes:
    return (np.round(u, decimals) + (0.0 + 0.0j)).tobytes()


# ---------------------------------------------------------------------------
# the ensemble type
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UnitaryEnsemble:
    """A key distribution over ``U(d)``.

    Either an exact finite list of unitaries with uniform weights
    (``unitaries`` set) or a Haar sampler (``unitaries is None``).
    ``conjugation_closed`` records whether the set of Alice measurements
    ``{U Pi_x U^dag}`` is closed under complex conjugation.
    """

    d: int
    unitaries: np.ndarray | None = None
    conjugation_closed: bool = True
    name: str = "haar"
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.unitaries is not None:
            us = np.asarray(self.unitaries, dtype=complex)
            if us.ndim != 3 or us.shape[0] == 0 or us.shape[1:] != (self.d, self.d):
                raise ValueError(f"expected a nonempty stack of {self.d}x{self.d} unitaries")
            eye = np.eye(self.d)
            err = np.max(np.abs(dagger(us) @ us - eye))
            if err > UNITARY_TOL:
                raise ValueError(f"ensemble element is not unitary (residual {err:.2e})")
            us = us.copy()
            us.setflags(write=False)
            object.__setattr__(self, "unitaries", us)

    @property
    def is_exact(self) -> bool:
        return self.unitaries is not None

    @property
    def size(self) -> int:
        if not self.is_exact:
            raise ValueError("Haar ensemble has no finite size")
        return self.unitaries.shape[0]

    @property
    def weights(self) -> np.ndarray:
        return np.full(self.size, 1.0 / self.size)

    def sample(self, rng: np.random.Generator, size=None) -> np.ndarray:
        if self.is_exact:
            idx = rng.integers(self.size, size=size)
            return self.unitaries[idx]
        return sample_haar(self.d, rng, size)

    def conjugate(self) -> "UnitaryEnsemble":
        us = None if self.unitaries is None else self.unitaries.conj()
        return UnitaryEnsemble(self.d, us, self.conjugation_closed, self.name + "*", dict(self.params))

    def describe(self) -> dict:
        return {"kind": self.name, "d": self.d, **self.params}


def haar(d: int) -> UnitaryEnsemble:
    return UnitaryEnsemble(d, None, True, "haar")


def finite(unitaries, name: str = "file", conjugation_closed: bool | None = None) -> UnitaryEnsemble:
    us = np.asarray(unitaries, dtype=complex)
    if conjugation_closed is None:
        conjugation_closed = _projectors_conj_closed(us)
    return UnitaryEnsemble(us.shape[1], us, conjugation_closed, name)


# ---------------------------------------------------------------------------
# Clifford and friends
# ---------------------------------------------------------------------------

_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_S = np.diag([1, 1j])
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]])
_Z = np.diag([1.0 + 0j, -1])
PAULIS = (np.eye(2, dtype=complex), _X, _Y, _Z)


def _on_qubit(gate: np.ndarray, q: int, n: int) -> np.ndarray:
    out = np.eye(1, dtype=complex)
    for k in range(n):
        out = np.kron(out, gate if k == q else np.eye(2))
    return out


def _cnot(control: int, target: int, n: int) -> np.ndarray:
    d = 2 ** n
    m = np.zeros((d, d), dtype=complex)
    for b in range(d):
        bits = [(b >> (n - 1 - k)) & 1 for k in range(n)]
        if bits[control]:
            bits[target] ^= 1
        b2 = sum(bit << (n - 1 - k) for k, bit in enumerate(bits))
        m[b2, b] = 1
    return m


def clifford_generators(n_qubits: int) -> list[np.ndarray]:
    gens = []
    for q in range(n_qubits):
        gens.append(_on_qubit(_H, q, n_qubits))
        gens.append(_on_qubit(_S, q, n_qubits))
    for q in range(n_qubits - 1):
        gens.append(_cnot(q, q + 1, n_qubits))
    return gens


@lru_cache(maxsize=None)
def _clifford_elements(n_qubits: int) -> np.ndarray:
    gens = clifford_generators(n_qubits)
    d = 2 ** n_qubits
    start = np.eye(d, dtype=complex)
    seen = {matrix_key(start)}
    elements = [start]
    frontier = [start]
    while frontier:
        nxt = []
        for u in frontier:
            for g in gens:
                v = canonical_phase(g @ u)
                k = matrix_key(v)
                if k not in seen:
                    seen.add(k)
                    elements.append(v)
                    nxt.append(v)
        frontier = nxt
    out = np.array(elements)
    out.setflags(write=False)
    return out


def clifford_group(n_qubits: int) -> UnitaryEnsemble:
    """All Clifford unitaries on ``n_qubits <= 2`` modulo global phase (24 and 11520)."""
    if n_qubits < 1:
        raise ValueError("n_qubits must be >= 1")
    if n_qubits > 2:
        raise ValueError("exhaustive Clifford enumeration is limited to n_qubits <= 2; "
                         "use sample_clifford or clifford_orbit")
    return UnitaryEnsemble(2 ** n_qubits, _clifford_elements(n_qubits), True,
                           "clifford", {"n_qubits": n_qubits})


def sample_clifford(n_qubits: int, rng: np.random.Generator) -> np.ndarray:
    """Random Clifford unitary.

    Uniform for ``n_qubits <= 2``.  Larger registers use a random generator
    word of length ``40 n^2``, which is close to uniform but not exact.
    """
    if n_qubits < 1:
        raise ValueError("n_qubits must be >= 1")
    if n_qubits <= 2:
        els = _clifford_elements(n_qubits)
        return els[rng.integers(len(els))].copy()
    gens = clifford_generators(n_qubits)
    u = np.eye(2 ** n_qubits, dtype=complex)
    for g in rng.integers(len(gens), size=40 * n_qubits ** 2):
        u = gens[g] @ u
    return canonical_phase(u)


def pauli_strings(n_qubits: int) -> np.ndarray:
    out = [np.eye(1, dtype=complex)]
    for _ in range(n_qubits):
        out = [np.kron(p, q) for p in out for q in PAULIS]
    return np.array(out)


def pauli_group(n_qubits: int = 1) -> UnitaryEnsemble:
    """Pauli strings modulo phase: a 1-design that is not a 2-design."""
    return UnitaryEnsemble(2 ** n_qubits, pauli_strings(n_qubits), True,
                           "pauli", {"n_qubits": n_qubits})


def bb84() -> UnitaryEnsemble:
    """The two conjugate-coding bases: ``{1, H}`` on one qubit."""
    return UnitaryEnsemble(2, np.array([np.eye(2, dtype=complex), _H]), True, "bb84")


@lru_cache(maxsize=None)
def _orbit_unitaries(n_qubits: int) -> np.ndarray:
    d = 2 ** n_qubits
    us = []
    for p in pauli_strings(n_qubits)[1:]:
        for sign in (1, -1):
            w, v = np.linalg.eigh(sign * p)
            # ascending eigenvalues: the -1 block first; the A1=0 block must hold +1
            us.append(np.ascontiguousarray(v[:, ::-1]))
    out = np.array(us)
    assert out.shape == (2 * (d * d - 1), d, d)
    out.setflags(write=False)
    return out


def clifford_orbit(n_qubits: int) -> UnitaryEnsemble:
    """One representative unitary per point of the Clifford orbit of ``Pi_0``.

    Clifford conjugation sends ``Pi_0 = (1 + Z_1)/2`` uniformly onto the
    ``2(d^2 - 1)`` projectors ``(1 +/- P)/2`` over non-identity Pauli strings
    ``P``.  Every quantity that depends on a key only through its measurement
    ``{U Pi_x U^dag}`` therefore has the same distribution here as under the
    full Clifford group, with far fewer keys.  The representatives are
    eigenbases of ``+/-P`` and need not themselves be Clifford.
    """
    if n_qubits < 1:
        raise ValueError("n_qubits must be >= 1")
    return UnitaryEnsemble(2 ** n_qubits, _orbit_unitaries(n_qubits), True,
                           "clifford-orbit", {"n_qubits": n_qubits})


def half_projectors(d: int) -> np.ndarray:
    """``Pi_0 = |0><0| (x) 1`` and ``Pi_1 = |1><1| (x) 1`` on ``A = A1 A2``, ``|A1| = 2``."""
    if d % 2:
        raise ValueError(f"dimension must be even, got {d}")
    p = np.zeros((2, d, d))
    h = d // 2
    p[0, :h, :h] = np.eye(h)
    p[1, h:, h:] = np.eye(h)
    return p


def keyed_projectors(us: np.ndarray, projectors: np.ndarray | None = None) -> np.ndarray:
    """``U Pi_x U^dag`` for a stack of keys; shape ``(K, 2, d, d)``."""
    us = np.asarray(us)
    d = us.shape[-1]
    if projectors is None:
        h = d // 2
        blocks = [us[..., :, :h], us[..., :, h:]]
        return np.stack([b @ dagger(b) for b in blocks], axis=-3)
    return np.stack([us @ p @ dagger(us) for p in projectors], axis=-3)


def _projectors_conj_closed(us: np.ndarray) -> bool:
    if us.shape[-1] % 2:
        return False
    p0 = keyed_projectors(us)[:, 0]
    keys = {matrix_key(p) for p in p0}
    return all(matrix_key(p.conj()) in keys for p in p0)


# ---------------------------------------------------------------------------
# twirls and moments
# ---------------------------------------------------------------------------

def twirl_second_order(t: np.ndarray, d: int) -> np.ndarray:
    """Haar average of ``(U (x) conj U) T (U (x) conj U)^dag`` on ``C^d (x) C^d``.

    Closed form: ``Tr(Pi T)/(d^2-1) Pi + <phi+|T|phi+> |phi+><phi+|`` with
    ``Pi = 1 - |phi+><phi+|``.
    """
    t = np.asarray(t, dtype=complex)
    if t.shape != (d * d, d * d):
        raise ValueError(f"operator must be {d * d}x{d * d}, got {t.shape}")
    if d < 2:
        return t.copy()
    phi = phi_plus_vector(d)
    pp = np.outer(phi, phi.conj())
    pi = np.eye(d * d) - pp
    return np.trace(pi @ t) / (d * d - 1) * pi + (phi.conj() @ t @ phi) * pp


def twirl_mc(t: np.ndarray, ensemble: UnitaryEnsemble, samples: int,
             rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Monte Carlo twirl: entrywise mean and standard error."""
    d = ensemble.d

    def chunk(size, r):
        us = ensemble.sample(r, size)
        w = np.einsum("nij,nkl->nikjl", us, us.conj()).reshape(size, d * d, d * d)
        vals = w @ t @ dagger(w)
        return vals.sum(0), (np.abs(vals) ** 2).sum(0)

    parts = map_chunks(chunk, samples, rng)
    s1 = sum(p[0] for p in parts) / samples
    s2 = sum(p[1] for p in parts) / samples
    var = np.maximum(s2 - np.abs(s1) ** 2, 0.0)
    return s1, np.sqrt(var / max(samples - 1, 1))


def moment_T_exact(n: int, d: int) -> tuple[float, float]:
    """Exact ``E T`` and ``E|T|^2`` for ``T = Tr(prod_i U_i Pi_{x_i} U_i^dag)/d`` under Haar."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if d < 2 or d % 2:
        raise ValueError(f"d must be even and >= 2, got {d}")
    mean = 2.0 ** -n
    a = 0.25 - 1.0 / (4 * (d * d - 1))
    second = a ** n * (d * d - 1) / (d * d) + 1.0 / (2 ** n * d * d)
    return mean, second


def variance_bound(n: int, d: int) -> float:
    """Upper bound on the standard deviation of ``T``: ``1/(2^(n/2) d)``."""
    return 1.0 / (2 ** (n / 2) * d)


@dataclass(frozen=True)
class MomentReport:
    n: int
    d: int
    outcomes: tuple[int, ...]
    mean_exact: float
    second_moment_exact: float
    mean_mc: float
    mean_stderr: float
    second_moment_mc: float
    second_moment_stderr: float
    samples: int
    method: str

    def agrees(self, k: float = 4.0, atol: float = 1e-12) -> bool:
        return (abs(self.mean_mc - self.mean_exact) <= k * self.mean_stderr + atol
                and abs(self.second_moment_mc - self.second_moment_exact)
                <= k * self.second_moment_stderr + atol)

    def as_row(self) -> dict:
        return {"n": self.n, "d": self.d, "outcomes": "".join(map(str, self.outcomes)),
                "method": self.method, "samples": self.samples,
                "mean_exact": self.mean_exact, "mean_mc": self.mean_mc,
                "mean_stderr": self.mean_stderr,
                "second_moment_exact": self.second_moment_exact,
                "second_moment_mc": self.second_moment_mc,
                "second_moment_stderr": self.second_moment_stderr}


def t_values(us: np.ndarray, outcomes: Sequence[int]) -> np.ndarray:
    """``T`` for each row of a ``(samples, n, d, d)`` key stack."""
    d = us.shape[-1]
    p = keyed_projectors(us)
    prod = p[:, 0, outcomes[0]]
    for i in range(1, len(outcomes)):
        prod = prod @ p[:, i, outcomes[i]]
    return np.trace(prod, axis1=-2, axis2=-1) / d


def _default_outcomes(n: int) -> tuple[int, ...]:
    return tuple(i % 2 for i in range(n))


def moment_T_mc(n: int, d: int, outcomes: Sequence[int] | None, ensemble: UnitaryEnsemble,
                samples: int, rng: np.random.Generator | None = None,
                exhaustive: bool = False) -> MomentReport:
    """Estimate ``E T`` and ``E|T|^2`` over ``ensemble``.

    With ``exhaustive=True`` (finite ensembles only) the averages are exact:
    an explicit sum over all ``|V|^n`` key tuples when that is at most 10^6
    terms, otherwise the factorized form over independent keys,
    ``E T = Tr(prod_i E U Pi U^dag)/d`` and
    ``E|T|^2 = Tr(prod_i E (U (x) conj U)(Pi (x) Pi)(U (x) conj U)^dag)/d^2``.
    """
    outcomes = tuple(_default_outcomes(n) if outcomes is None else outcomes)
    if len(outcomes) != n or any(x not in (0, 1) for x in outcomes):
        raise ValueError("outcomes must be n bits")
    if ensemble.d != d:
        raise ValueError(f"ensemble dimension {ensemble.d} != {d}")
    mean_exact, second_exact = moment_T_exact(n, d)

    if exhaustive:
        if not ensemble.is_exact:
            raise ValueError("exhaustive moments need a finite ensemble")
        k = ensemble.size
        if k ** n <= 10 ** 6:
            idx = np.stack(np.meshgrid(*[np.arange(k)] * n, indexing="ij"), -1).reshape(-1, n)
            tv = t_values(ensemble.unitaries[idx], outcomes)
            mean, second, count = tv.real.mean(), (np.abs(tv) ** 2).mean(), k ** n
            method = "enumeration"
        else:
            p = keyed_projectors(ensemble.unitaries)
            first = [p[:, 0].mean(0), p[:, 1].mean(0)]
            pair = []
            for x in (0, 1):
                px = p[:, x]
                pair.append(np.einsum("kij,klm->iljm", px, px.conj()).reshape(d * d, d * d) / k)
            m1 = np.eye(d, dtype=complex)
            m2 = np.eye(d * d, dtype=complex)
            for x in outcomes:
                m1 = m1 @ first[x]
                m2 = m2 @ pair[x]
            mean = float(np.trace(m1).real / d)
            second = float(np.trace(m2).real / d ** 2)
            count = k ** n
            method = "factorized"
        return MomentReport(n, d, outcomes, mean_exact, second_exact, float(mean), 0.0,
                            float(second), 0.0, int(count), method)

    if samples < 1:
        raise ValueError("samples must be >= 1")

    def chunk(size, r):
        tv = t_values(ensemble.sample(r, (size, n)), outcomes)
        a = np.abs(tv) ** 2
        return tv.real.sum(), (tv.real ** 2).sum(), a.sum(), (a ** 2).sum()

    parts = np.array(map_chunks(chunk, samples, rng))
    s = parts.sum(0) / samples
    denom = max(samples - 1, 1)
    se_mean = np.sqrt(max(s[1] - s[0] ** 2, 0.0) / denom)
    se_second = np.sqrt(max(s[3] - s[2] ** 2, 0.0) / denom)
    return MomentReport(n, d, outcomes, mean_exact, second_exact, float(s[0]), float(se_mean),
                        float(s[2]), float(se_second), samples, "monte-carlo")


def exp_bound_terms(t: np.ndarray, s: np.ndarray, mu: float) -> tuple[float, float]:
    """Both sides of ``|E sum_i T_i S_i - mu| <= N sigma`` on an empirical distribution.

    ``t`` and ``s`` have shape ``(samples, N)``; each row of ``s`` must sum to
    one with entries of modulus at most one.  ``sigma^2`` is the largest
    ``E|T_i - mu|^2``, so the inequality holds exactly for the samples given.
    """
    t = np.asarray(t)
    s = np.asarray(s)
    if np.max(np.abs(s.sum(1) - 1)) > 1e-9 or np.max(np.abs(s)) > 1 + 1e-9:
        raise ValueError("each row of S must sum to 1 with |S_i| <= 1")
    lhs = abs(np.mean(np.sum(t * s, axis=1)) - mu)
    sigma = np.sqrt(np.max(np.mean(np.abs(t - mu) ** 2, axis=0)))
    return float(lhs), float(t.shape[1] * sigma)


# ---------------------------------------------------------------------------
# design diagnostics
# ---------------------------------------------------------------------------

def frame_potential(ensemble: UnitaryEnsemble, t: int) -> float:
    """``F_t = |V|^-2 sum_{U,V} |Tr(U^dag V)|^(2t)``; the Haar value is 2 for t=2, d>=2."""
    if not ensemble.is_exact:
        raise ValueError("frame potential needs an exact finite ensemble; "
                         "compare moments for Haar samplers instead")
    if t not in (1, 2):
        raise ValueError("t must be 1 or 2")
    flat = ensemble.unitaries.reshape(ensemble.size, -1)
    total = 0.0
    step = max(1, 2 ** 22 // ensemble.size)
    for i in range(0, ensemble.size, step):
        g = flat[i:i + step].conj() @ flat.T
        total += float(np.sum(np.abs(g) ** (2 * t)))
    return total / ensemble.size ** 2


def haar_frame_potential(d: int, t: int) -> float:
    if t == 1:
        return 1.0
    if t == 2:
        return 2.0 if d >= 2 else 1.0
    raise ValueError("t must be 1 or 2")


def haar_moment_operator(d: int, t: int) -> np.ndarray:
    """Haar average of the moment operator in the superoperator convention.

    t=1: ``E U (x) conj U`` (``d^2 x d^2``).  t=2: the matrix of the twirl
    ``T -> E (U (x) conj U) T (U (x) conj U)^dag`` acting on row-major
    vectorized ``d^2 x d^2`` operators, assembled by twirling every matrix
    unit; this is a tensor-factor reordering of ``E U^(x)2 (x) conj U^(x)2``.
    """
    if t == 1:
        phi = phi_plus_vector(d)
        return np.outer(phi, phi.conj())
    if t != 2:
        raise ValueError("t must be 1 or 2")
    n = d * d
    sup = np.zeros((n * n, n * n), dtype=complex)
    for j in range(n):
        for l in range(n):
            e = np.zeros((n, n), dtype=complex)
            e[j, l] = 1
            sup[:, j * n + l] = twirl_second_order(e, d).ravel()
    return sup


def ensemble_moment_operator(ensemble: UnitaryEnsemble, t: int) -> np.ndarray:
    us = ensemble.unitaries
    k, d = us.shape[0], ensemble.d
    w = np.einsum("kij,klm->kiljm", us, us.conj()).reshape(k, d * d, d * d)
    if t == 1:
        return w.mean(0)
    n = d * d
    flat = w.reshape(k, n * n)
    # sum_k W[i,j] conj(W[a,b]) arranged as sup[(i,a),(j,b)]
    acc = (flat.T @ flat.conj()) / k
    return acc.reshape(n, n, n, n).transpose(0, 2, 1, 3).reshape(n * n, n * n)


def is_t_design(ensemble: UnitaryEnsemble, t: int, tol: float = 1e-10) -> tuple[bool, float]:
    """Compare the ensemble's moment operator to Haar; returns (verdict, operator-norm gap)."""
    if t > 2 or t < 1:
        raise ValueError("only t in {1, 2} is supported")
    if not ensemble.is_exact:
        raise ValueError("design check needs an exact finite ensemble")
    gap = ensemble_moment_operator(ensemble, t) - haar_moment_operator(ensemble.d, t)
    dev = float(np.linalg.norm(gap, 2))
    return dev <= tol, dev


def projector_moment_deviation(ensemble: UnitaryEnsemble) -> float:
    """Operator-norm gap between ``E (U Pi_0 U^dag) (x) conj(U Pi_0 U^dag)`` and Haar.

    Zero exactly when every second-order quantity of the keyed measurements
    matches the Haar value, which is all the scheme ever uses.
    """
    d = ensemble.d
    p = keyed_projectors(ensemble.unitaries)[:, 0]
    avg = np.einsum("kij,klm->iljm", p, p.conj()).reshape(d * d, d * d) / ensemble.size
    p0 = half_projectors(d)[0]
    ref = twirl_second_order(np.kron(p0, p0), d)
    return float(np.linalg.norm(avg - ref, 2))
