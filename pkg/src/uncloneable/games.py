"""Monogamy-of-entanglement games built on a unitary ensemble.

Alice's measurement for question ``U`` is ``{U Pi_x U^dag}``.  For finite
ensembles, Bob's and Charlie's measurements are stored as arrays of shape
``(K, 2, dim, dim)`` indexed like the ensemble; for Haar games they are
callables mapping a unitary to a ``(2, dim, dim)`` array.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
import scipy.sparse.linalg as spla

from . import ensembles as ens
from .core import dagger, proj
from .ensembles import UnitaryEnsemble
from .streams import map_chunks

DENSE_LIMIT = 4096
POVM_TOL = 1e-10


class Estimate(NamedTuple):
    value: float
    stderr: float
    samples: int


@dataclass(frozen=True)
class MoeGame:
    ensemble: UnitaryEnsemble
    name: str = ""

    def __post_init__(self):
        if self.ensemble.d % 2:
            raise ValueError("Alice's register must have even dimension")

    @property
    def d(self) -> int:
        return self.ensemble.d

    def alice(self) -> np.ndarray:
        """``U Pi_x U^dag`` for every question, shape ``(K, 2, d, d)``."""
        if not self.ensemble.is_exact:
            raise ValueError("a Haar game has no finite question list")
        return ens.keyed_projectors(self.ensemble.unitaries)


def haar_game(d: int) -> MoeGame:
    return MoeGame(ens.haar(d), f"haar-{d}")


def _check_povms(povms: np.ndarray, name: str, tol: float = POVM_TOL) -> np.ndarray:
    p = np.asarray(povms, dtype=complex)
    if p.ndim != 4 or p.shape[1] != 2 or p.shape[2] != p.shape[3]:
        raise ValueError(f"{name} POVMs must have shape (K, 2, dim, dim)")
    dim = p.shape[2]
    if np.max(np.abs(p - dagger(p))) > tol:
        raise ValueError(f"{name} POVM elements are not Hermitian")
    if np.max(np.abs(p.sum(1) - np.eye(dim))) > tol:
        raise ValueError(f"{name} POVM elements do not sum to the identity")
    if np.linalg.eigvalsh((p + dagger(p)) / 2).min() < -tol:
        raise ValueError(f"{name} POVM elements are not positive")
    return p


@dataclass(frozen=True)
class Strategy:
    """Bob/Charlie measurements per question plus a shared state on ``A B C``."""

    dB: int
    dC: int
    bob: np.ndarray | Callable
    charlie: np.ndarray | Callable
    rho: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=complex)
        if rho.ndim == 1:
            rho = proj(rho)
        n = rho.shape[0]
        if n % (self.dB * self.dC):
            raise ValueError("state dimension is not a multiple of dB * dC")
        if abs(np.trace(rho).real - 1) > 1e-10 or np.linalg.eigvalsh((rho + dagger(rho)) / 2)[0] < -1e-10:
            raise ValueError("shared state is not a density matrix")
        object.__setattr__(self, "rho", rho)
        if not callable(self.bob):
            object.__setattr__(self, "bob", _check_povms(self.bob, "Bob"))
        if not callable(self.charlie):
            object.__setattr__(self, "charlie", _check_povms(self.charlie, "Charlie"))

    @property
    def dA(self) -> int:
        return self.rho.shape[0] // (self.dB * self.dC)


def _value_terms(alice, bob, charlie, rho, d, dB, dC) -> np.ndarray:
    """``sum_x Tr[(A_x (x) B_x (x) C_x) rho]`` for a stack of questions."""
    r6 = rho.reshape(d, dB, dC, d, dB, dC)
    return np.einsum("kxai,kxbj,kxcl,ijlabc->k", alice, bob, charlie, r6, optimize=True).real


def winning_probability(game: MoeGame, s: Strategy) -> float:
    """Exact winning probability for a finite question set."""
    if not game.ensemble.is_exact:
        raise ValueError("use winning_probability_mc for Haar games")
    if s.dA != game.d:
        raise ValueError(f"strategy acts on A of dim {s.dA}, game on {game.d}")
    bob, charlie = _tabulate(s.bob, game.ensemble), _tabulate(s.charlie, game.ensemble)
    vals = _value_terms(game.alice(), bob, charlie, s.rho, game.d, s.dB, s.dC)
    return float(vals.mean())


def winning_probability_mc(game: MoeGame, s: Strategy, samples: int,
                           rng: np.random.Generator) -> Estimate:
    if samples < 1:
        raise ValueError("samples must be >= 1")

    def chunk(size, r):
        us, bob, charlie = sample_questions(game.ensemble, r, size, s.bob, s.charlie)
        alice = ens.keyed_projectors(us)
        v = _value_terms(alice, bob, charlie, s.rho, game.d, s.dB, s.dC)
        return v.sum(), (v ** 2).sum()

    parts = np.array(map_chunks(chunk, samples, rng))
    m, m2 = parts.sum(0) / samples
    return Estimate(float(m), float(np.sqrt(max(m2 - m * m, 0) / max(samples - 1, 1))), samples)


def sample_questions(ensemble: UnitaryEnsemble, rng: np.random.Generator, size: int, *povms):
    """Draw ``size`` questions and the matching measurements (callable or tabulated)."""
    if ensemble.is_exact:
        idx = rng.integers(ensemble.size, size=size)
        us = ensemble.unitaries[idx]
        return (us, *[np.array([p(u) for u in us]) if callable(p) else _tabulate(p, ensemble)[idx]
                      for p in povms])
    us = ensemble.sample(rng, size)
    return (us, *[_povms_for(p, us) for p in povms])


def _povms_for(povm, us: np.ndarray) -> np.ndarray:
    if callable(povm):
        return np.array([povm(u) for u in us])
    raise ValueError("tabulated POVMs cannot be evaluated on sampled Haar questions")


def _tabulate(povm, ensemble: UnitaryEnsemble) -> np.ndarray:
    if callable(povm):
        return np.array([povm(u) for u in ensemble.unitaries])
    if povm.shape[0] != ensemble.size:
        raise ValueError(f"{povm.shape[0]} POVMs for {ensemble.size} questions")
    return povm


# ---------------------------------------------------------------------------
# game operators
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GameOperator:
    """Question-averaged operator with its spectrum.

    ``operator`` is ``None`` when the operator was only applied matrix-free.
    """

    operator: np.ndarray | None
    dims: tuple[int, ...]
    norm: float
    top_vector: np.ndarray
    eigenvalues: np.ndarray | None = None
    eigenvectors: np.ndarray | None = None


def _averaged(alice: np.ndarray, others: list[np.ndarray]) -> np.ndarray:
    k, _, d, _ = alice.shape
    rest = others[0]
    for o in others[1:]:
        rest = np.einsum("kxij,kxab->kxiajb", rest, o).reshape(
            k, 2, rest.shape[2] * o.shape[2], rest.shape[2] * o.shape[2])
    m = rest.shape[2]
    a = alice.reshape(k * 2, d * d)
    b = rest.reshape(k * 2, m * m)
    acc = (a.T @ b) / k
    return acc.reshape(d, d, m, m).transpose(0, 2, 1, 3).reshape(d * m, d * m)


def _spectral(op: np.ndarray, dims) -> GameOperator:
    op = (op + dagger(op)) / 2
    w, v = np.linalg.eigh(op)
    w, v = w[::-1], v[:, ::-1]
    return GameOperator(op, tuple(dims), float(w[0]), v[:, 0].copy(), w.copy(), v.copy())


def game_operator_P(game: MoeGame, bob, charlie, dense: bool | None = None) -> GameOperator:
    """``P = E_U sum_x U Pi_x U^dag (x) B^U_x (x) C^U_x`` on ``A B C``."""
    if not game.ensemble.is_exact:
        raise ValueError("game operators need an exact finite ensemble")
    bob = _check_povms(_tabulate(bob, game.ensemble), "Bob")
    charlie = _check_povms(_tabulate(charlie, game.ensemble), "Charlie")
    dims = (game.d, bob.shape[2], charlie.shape[2])
    total = int(np.prod(dims))
    if dense is None:
        dense = total <= DENSE_LIMIT
    if dense:
        return _spectral(_averaged(game.alice(), [bob, charlie]), dims)
    return _top_matrix_free(game.alice(), bob, charlie, dims)


def game_operator_Q(game: MoeGame, charlie) -> GameOperator:
    """``Q = E_U sum_x U Pi_x U^dag (x) C^U_x`` on ``A C``; on ``A B C`` it acts as ``Q (x) 1_B``."""
    if not game.ensemble.is_exact:
        raise ValueError("game operators need an exact finite ensemble")
    charlie = _check_povms(_tabulate(charlie, game.ensemble), "Charlie")
    return _spectral(_averaged(game.alice(), [charlie]), (game.d, charlie.shape[2]))


def _top_matrix_free(alice, bob, charlie, dims) -> GameOperator:
    k = alice.shape[0]
    n = int(np.prod(dims))

    def matvec(v):
        t = v.reshape(dims)
        out = np.einsum("kxai,kxbj,kxcl,ijl->abc", alice, bob, charlie, t, optimize=True)
        return out.ravel() / k

    op = spla.LinearOperator((n, n), matvec=matvec, dtype=complex)
    w, v = spla.eigsh(op, k=1, which="LA", tol=1e-12)
    return GameOperator(None, tuple(dims), float(w[0]), v[:, 0])


def expand_Q(q: GameOperator, dB: int) -> np.ndarray:
    """``Q`` as an operator on ``A B C`` (identity on ``B``)."""
    d, dC = q.dims
    full = np.kron(q.operator, np.eye(dB)).reshape(d, dC, dB, d, dC, dB)
    return full.transpose(0, 2, 1, 3, 5, 4).reshape(d * dB * dC, d * dB * dC)


def optimal_state_strategy(game: MoeGame, bob, charlie) -> tuple[Strategy, GameOperator]:
    """Pair the given measurements with the top eigenvector of ``P``."""
    p = game_operator_P(game, bob, charlie)
    bob = _tabulate(bob, game.ensemble)
    charlie = _tabulate(charlie, game.ensemble)
    s = Strategy(p.dims[1], p.dims[2], bob, charlie, proj(p.top_vector))
    return s, p


# ---------------------------------------------------------------------------
# reference strategies
# ---------------------------------------------------------------------------

def constant_povms(k: int, dim: int, guess: int) -> np.ndarray:
    p = np.zeros((k, 2, dim, dim), dtype=complex)
    p[:, guess] = np.eye(dim)
    return p


def computational_povms(k: int, flip: bool = False) -> np.ndarray:
    """Measure a qubit in the computational basis, optionally reporting the flipped bit."""
    p = np.zeros((k, 2, 2, 2), dtype=complex)
    p[:, 0, 0, 0] = p[:, 1, 1, 1] = 1
    return p[:, ::-1] if flip else p


def coordinated_guess(game: MoeGame) -> Strategy:
    """Bob and Charlie read one shared uniform bit and both announce it."""
    d = game.d
    shared = (proj([1, 0, 0, 0]) + proj([0, 0, 0, 1])) / 2
    rho = np.kron(np.eye(d) / d, shared)
    k = game.ensemble.size if game.ensemble.is_exact else None
    if k is None:
        one = computational_povms(1)[0]
        return Strategy(2, 2, lambda u: one, lambda u: one, rho, {"name": "coordinated-guess"})
    povm = computational_povms(k)
    return Strategy(2, 2, povm, povm, rho, {"name": "coordinated-guess"})


def anti_coordinated_guess(game: MoeGame) -> Strategy:
    """Shared bit ``b``; Bob announces ``b`` and Charlie ``1 - b``."""
    d = game.d
    shared = (proj([1, 0, 0, 0]) + proj([0, 0, 0, 1])) / 2
    rho = np.kron(np.eye(d) / d, shared)
    k = game.ensemble.size
    return Strategy(2, 2, computational_povms(k), computational_povms(k, flip=True), rho,
                    {"name": "anti-coordinated-guess"})


def breidbart_vector() -> np.ndarray:
    return np.array([np.cos(np.pi / 8), np.sin(np.pi / 8)], dtype=complex)


def breidbart_strategy(game: MoeGame) -> Strategy:
    """Unentangled strategy for the two-basis qubit game: Alice holds the Breidbart state, both guess 0."""
    if game.d != 2:
        raise ValueError("the Breidbart strategy is defined for a qubit")
    k = game.ensemble.size
    rho = proj(breidbart_vector())
    return Strategy(1, 1, constant_povms(k, 1, 0), constant_povms(k, 1, 0), rho,
                    {"name": "breidbart"})


# ---------------------------------------------------------------------------
# attack -> strategy
# ---------------------------------------------------------------------------

def conjugation_map(ensemble: UnitaryEnsemble) -> tuple[np.ndarray, np.ndarray] | None:
    """For each key ``k``, a question ``j`` whose measurement equals ``conj(U_k Pi_x U_k^dag)``.

    Returns ``(target, swapped)`` arrays, with ``swapped[k]`` set when the
    labels of the two outcomes are exchanged, or ``None`` if the measurement
    set is not closed under conjugation.  The assignment is a bijection.
    """
    p = ens.keyed_projectors(ensemble.unitaries)
    buckets: dict[bytes, list[tuple[int, bool]]] = {}
    for j in range(len(p)):
        buckets.setdefault(ens.matrix_key(p[j, 0]), []).append((j, False))
        buckets.setdefault(ens.matrix_key(p[j, 1]), []).append((j, True))
    used = np.zeros(len(p), dtype=bool)
    target = np.empty(len(p), dtype=int)
    swapped = np.zeros(len(p), dtype=bool)
    for k in range(len(p)):
        options = buckets.get(ens.matrix_key(p[k, 0].conj()), [])
        for j, sw in options:
            if not used[j]:
                used[j] = True
                target[k], swapped[k] = j, sw
                break
        else:
            return None
    return target, swapped


@dataclass(frozen=True)
class MappedStrategy:
    strategy: Strategy
    game: MoeGame
    conjugated_game: bool


def attack_to_strategy(q, attack) -> MappedStrategy:
    """Turn a cloning attack into a game strategy with the same value.

    The shared state is the attack's trace-one Choi state on ``A B C``.
    Feeding half of ``|phi+>`` through the channel and letting Alice measure
    ``conj(U Pi_x U^dag)`` reproduces each term of the attack value, so the
    strategy is scored against the conjugated question set.  When the
    ensemble's measurements are closed under conjugation the questions are
    re-indexed into the original game instead.
    """
    ensemble = q.ensemble
    rho = attack.choi
    if not ensemble.is_exact:
        bob = (lambda f: (lambda u: f(u.conj())))(attack.bob)
        charlie = (lambda f: (lambda u: f(u.conj())))(attack.charlie)
        s = Strategy(attack.dB, attack.dC, bob, charlie, rho, {"source": "attack"})
        return MappedStrategy(s, MoeGame(ensemble), False)
    bob = _tabulate(attack.bob, ensemble)
    charlie = _tabulate(attack.charlie, ensemble)
    mapping = conjugation_map(ensemble) if ensemble.conjugation_closed else None
    if mapping is None:
        s = Strategy(attack.dB, attack.dC, bob, charlie, rho, {"source": "attack", "conjugated": True})
        return MappedStrategy(s, MoeGame(ensemble.conjugate()), True)
    target, swapped = mapping
    nb, nc = np.empty_like(bob), np.empty_like(charlie)
    for k in range(len(target)):
        j = target[k]
        nb[j] = bob[k, ::-1] if swapped[k] else bob[k]
        nc[j] = charlie[k, ::-1] if swapped[k] else charlie[k]
    s = Strategy(attack.dB, attack.dC, nb, nc, rho, {"source": "attack", "conjugated": False})
    return MappedStrategy(s, MoeGame(ensemble), False)


def random_povms(k: int, dim: int, rng: np.random.Generator, projective: bool = False) -> np.ndarray:
    """Random two-outcome POVMs: ``B_0 = S^-1/2 G_0 S^-1/2`` from Wishart draws, or random PVMs."""
    out = np.empty((k, 2, dim, dim), dtype=complex)
    for i in range(k):
        if projective:
            u = ens.sample_haar(dim, rng)
            r = rng.integers(0, dim + 1)
            p0 = u[:, :r] @ dagger(u[:, :r])
        else:
            g = [rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim)) for _ in range(2)]
            w = [x @ dagger(x) for x in g]
            tot = w[0] + w[1]
            ev, vec = np.linalg.eigh(tot)
            isq = (vec / np.sqrt(ev)) @ dagger(vec)
            p0 = isq @ w[0] @ isq
        p0 = (p0 + dagger(p0)) / 2
        out[i, 0] = p0
        out[i, 1] = np.eye(dim) - p0
    return out


def tensor_povm(*parts: np.ndarray) -> np.ndarray:
    """Element-wise tensor product of ``(K, 2, d_i, d_i)`` stacks: same question, same answer."""
    out = parts[0]
    for p in parts[1:]:
        k, n, a, b = out.shape[0], out.shape[1], out.shape[2], p.shape[2]
        out = np.einsum("kxij,kxab->kxiajb", out, p).reshape(k, n, a * b, a * b)
    return out


def improved_povms(game: MoeGame, dB: int, dC: int, rng: np.random.Generator,
                   rounds: int = 3) -> tuple[np.ndarray, np.ndarray, GameOperator]:
    """Random projective measurements refined by a few best-response rounds on the top eigenvector of ``P``.

    Each round can only raise ``||P||``; the result is a strategy with a
    nontrivial advantage, which exercises more of the inequality chain than
    random measurements do.
    """
    k = game.ensemble.size
    bob = random_povms(k, dB, rng, projective=True)
    charlie = random_povms(k, dC, rng, projective=True)
    alice = game.alice()
    p = game_operator_P(game, bob, charlie)
    for _ in range(rounds):
        psi = p.top_vector.reshape(game.d, dB, dC)
        r6 = np.einsum("abc,ijl->abcijl", psi, psi.conj())
        eff_b = np.einsum("kxai,kxcl,ijlabc->kxjb", alice, charlie, r6, optimize=True)
        bob = _best_response(eff_b)
        eff_c = np.einsum("kxai,kxbj,ijlabc->kxlc", alice, bob, r6, optimize=True)
        charlie = _best_response(eff_c)
        p = game_operator_P(game, bob, charlie)
    return bob, charlie, p


def _best_response(eff: np.ndarray) -> np.ndarray:
    diff = eff[:, 0] - eff[:, 1]
    diff = (diff + dagger(diff)) / 2
    w, v = np.linalg.eigh(diff)
    p0 = np.einsum("kim,km,kjm->kij", v, (w >= 0).astype(float), v.conj())
    return np.stack([p0, np.eye(diff.shape[1]) - p0], axis=1)
