"""Cloning attacks, reference attacks and see-saw optimization."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import ensembles as ens
from . import games as gm
from .core import dagger, phi_plus_vector, proj, ptrace
from .sdp import CertifiedInterval, dominance_sdp
from .streams import as_rng, map_chunks, pmap

CPTP_TOL = 1e-9
MAX_DIM = 4096


@dataclass(frozen=True)
class CloningAttack:
    """Cloning channel ``A -> B C`` given by its trace-one Choi state, plus per-key POVMs."""

    dA: int
    dB: int
    dC: int
    choi: np.ndarray
    bob: np.ndarray | Callable
    charlie: np.ndarray | Callable
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        j = np.asarray(self.choi, dtype=complex)
        n = self.dA * self.dB * self.dC
        if j.shape != (n, n):
            raise ValueError(f"Choi state must be {n}x{n}")
        j = (j + dagger(j)) / 2
        if np.linalg.eigvalsh(j)[0] < -CPTP_TOL:
            raise ValueError("Choi state is not positive semidefinite")
        marg = ptrace(j, [self.dA, self.dB * self.dC], 1)
        if np.max(np.abs(marg - np.eye(self.dA) / self.dA)) > CPTP_TOL:
            raise ValueError("channel is not trace preserving: Tr_BC J != 1/d")
        object.__setattr__(self, "choi", j)
        if not callable(self.bob):
            object.__setattr__(self, "bob", gm._check_povms(self.bob, "Bob"))
        if not callable(self.charlie):
            object.__setattr__(self, "charlie", gm._check_povms(self.charlie, "Charlie"))

    def apply(self, rho: np.ndarray) -> np.ndarray:
        """``Phi(rho) = d Tr_A[J (rho^T (x) 1)]`` on ``B C``."""
        m = self.dB * self.dC
        j = self.choi.reshape(self.dA, m, self.dA, m)
        return self.dA * np.einsum("ai,amin->mn", rho, j)


def _alice_conj(ensemble) -> np.ndarray:
    return ens.keyed_projectors(ensemble.unitaries).conj()


def attack_value(q, a: CloningAttack) -> float:
    """``E_k 1/2 sum_x Tr[(B_x (x) C_x) Phi(sigma_x)]`` for a finite key set."""
    if not q.ensemble.is_exact:
        raise ValueError("use attack_value_mc for Haar keys")
    _check_dims(q, a)
    bob, charlie = gm._tabulate(a.bob, q.ensemble), gm._tabulate(a.charlie, q.ensemble)
    alice = _scaled_alice(q, _alice_conj(q.ensemble))
    vals = gm._value_terms(alice, bob, charlie, a.choi, q.d, a.dB, a.dC)
    return float(vals.mean())


def _scaled_alice(q, alice_conj: np.ndarray) -> np.ndarray:
    # d * Tr[J (sigma_x^T (x) ...)] / 2 with sigma_x = U Pi_x U^dag / Tr(Pi_x); equals conj(U Pi_x U^dag) for rank d/2
    rank = np.trace(q.projectors, axis1=1, axis2=2).real
    return alice_conj * (q.d / (2 * rank))[None, :, None, None]


def attack_value_mc(q, a: CloningAttack, samples: int, rng) -> gm.Estimate:
    if samples < 1:
        raise ValueError("samples must be >= 1")
    _check_dims(q, a)
    rng = as_rng(rng)

    def chunk(size, r):
        us, bob, charlie = gm.sample_questions(q.ensemble, r, size, a.bob, a.charlie)
        keyed = np.einsum("kij,xjl,kml->kxim", us, q.projectors, us.conj())
        alice = _scaled_alice(q, keyed.conj())
        v = gm._value_terms(alice, bob, charlie, a.choi, q.d, a.dB, a.dC)
        return v.sum(), (v ** 2).sum()

    parts = np.array(map_chunks(chunk, samples, rng))
    m, m2 = parts.sum(0) / samples
    return gm.Estimate(float(m), float(np.sqrt(max(m2 - m * m, 0) / max(samples - 1, 1))), samples)


def _check_dims(q, a: CloningAttack) -> None:
    if a.dA != q.d:
        raise ValueError(f"attack acts on A of dim {a.dA}, scheme on {q.d}")


# ---------------------------------------------------------------------------
# reference attacks
# ---------------------------------------------------------------------------

def measure_prepare_choi(basis: np.ndarray) -> np.ndarray:
    """Choi state of ``rho -> sum_m <e_m|rho|e_m> |mm><mm|`` (columns of ``basis`` are ``e_m``)."""
    d = basis.shape[0]
    j = np.zeros((d ** 3, d ** 3), dtype=complex)
    for m in range(d):
        mm = np.zeros(d * d)
        mm[m * d + m] = 1
        j += np.kron(proj(basis[:, m].conj()), proj(mm))
    return j / d


def _guess_povms(q, basis: np.ndarray) -> np.ndarray:
    """Per key, guess the bit most likely to produce each measured basis vector (ties go to 0)."""
    p = ens.keyed_projectors(q.ensemble.unitaries)
    like = np.einsum("im,kxij,jm->kxm", basis.conj(), p, basis).real
    guess = (like[:, 1] > like[:, 0] + 1e-12).astype(int)
    d = q.d
    out = np.zeros((len(p), 2, d, d), dtype=complex)
    for m in range(d):
        out[np.arange(len(p)), guess[:, m], m, m] = 1
    return out


def broadcast_measure_attack(q, basis: np.ndarray | None = None) -> CloningAttack:
    """Measure in ``basis``, hand the outcome to both parties, who then guess the likelier bit."""
    d = q.d
    if basis is None:
        basis = breidbart_basis() if d == 2 else np.eye(d, dtype=complex)
    povm = _guess_povms(q, basis)
    return CloningAttack(d, d, d, measure_prepare_choi(basis), povm, povm.copy(),
                         {"name": "broadcast-measure"})


def breidbart_basis() -> np.ndarray:
    v = gm.breidbart_vector()
    return np.stack([v, np.array([-v[1], v[0]])], axis=1)


def coordinated_guess_attack(q) -> CloningAttack:
    """Discard the ciphertext and give both parties one shared uniform bit."""
    d = q.d
    shared = (proj([1, 0, 0, 0]) + proj([0, 0, 0, 1])) / 2
    choi = np.kron(np.eye(d) / d, shared)
    k = q.ensemble.size if q.ensemble.is_exact else None
    if k is None:
        one = gm.computational_povms(1)[0]
        return CloningAttack(d, 2, 2, choi, lambda u: one, lambda u: one, {"name": "coordinated-guess"})
    povm = gm.computational_povms(k)
    return CloningAttack(d, 2, 2, choi, povm, povm.copy(), {"name": "coordinated-guess"})


def identity_to_bob_attack(q) -> CloningAttack:
    """Bob receives the ciphertext untouched and decrypts; Charlie always answers 0."""
    d = q.d
    choi = proj(phi_plus_vector(d))
    if q.ensemble.is_exact:
        bob = ens.keyed_projectors(q.ensemble.unitaries)
        charlie = gm.constant_povms(q.ensemble.size, 1, 0)
    else:
        pi = q.projectors
        bob = lambda u: u[None] @ pi @ dagger(u)[None]
        zero = gm.constant_povms(1, 1, 0)[0]
        charlie = lambda u: zero
    return CloningAttack(d, d, 1, choi, bob, charlie, {"name": "identity-to-bob"})


# ---------------------------------------------------------------------------
# see-saw
# ---------------------------------------------------------------------------

@dataclass
class SeesawTrace:
    """Per-iteration values of every restart plus the best attack found."""

    rows: list[tuple[int, int, str, float]]
    restarts: int
    best_value: float
    best_attack: CloningAttack
    best_restart: int
    channel_gap: float
    finals: list[float]

    def values(self, restart: int) -> np.ndarray:
        return np.array([r[3] for r in self.rows if r[0] == restart])

    def max_decrease(self) -> float:
        worst = 0.0
        for r in range(self.restarts):
            v = self.values(r)
            if len(v) > 1:
                worst = max(worst, float(np.max(v[:-1] - v[1:])))
        return worst

    def csv_rows(self) -> list[list]:
        return [[r, i, s, v] for r, i, s, v in self.rows]


def random_isometry_choi(dA: int, dout: int, rng) -> np.ndarray:
    """Choi state of ``rho -> V rho V^dag`` for a Haar-random isometry ``V: A -> out``."""
    v = ens.sample_haar(dout, rng)[:, :dA] if dout >= dA else None
    if v is None:
        # not enough room for an isometry: use a random channel with a small environment
        env = -(-dA // dout)
        w = ens.sample_haar(dout * env, rng)[:, :dA].reshape(dout, env, dA)
        kraus = w.transpose(1, 0, 2)
        vec = [np.einsum("oa,ab->bo", k, np.eye(dA)).ravel() for k in kraus]
        return sum(proj(x) for x in vec) / dA
    vec = v.T.ravel() / np.sqrt(dA)  # sum_a |a> (x) V|a>
    return proj(vec)


def random_pvms(k: int, dim: int, rng) -> np.ndarray:
    return gm.random_povms(k, dim, rng, projective=True)


def _effective_bob(alice, charlie, j6) -> np.ndarray:
    # M_x[b', b] with value = sum_x Tr(M_x B_x)
    return np.einsum("kxai,kxcl,ijlabc->kxjb", alice, charlie, j6, optimize=True)


def _effective_charlie(alice, bob, j6) -> np.ndarray:
    return np.einsum("kxai,kxbj,ijlabc->kxlc", alice, bob, j6, optimize=True)


def best_response(eff: np.ndarray) -> np.ndarray:
    """Projector onto the nonnegative eigenspace of ``M_0 - M_1`` (kernel goes to outcome 0)."""
    return gm._best_response(eff)


def channel_operator(alice, bob, charlie) -> np.ndarray:
    """``K = E_k sum_x alice_x (x) B_x (x) C_x`` on ``A B C``."""
    return gm._averaged(alice, [bob, charlie])


def channel_step(k_op: np.ndarray, dA: int, drest: int) -> tuple[np.ndarray, CertifiedInterval]:
    """Best Choi state for fixed measurements, read off the dual certificate ``X``: ``J = X / dA``."""
    cert = dominance_sdp(k_op, [dA, drest], on=0)
    return cert.dual / dA, cert


def _value(alice, bob, charlie, j, d, dB, dC) -> float:
    return float(gm._value_terms(alice, bob, charlie, j, d, dB, dC).mean())


def _one_restart(q, alice, dB, dC, iters, tol, rng):
    d, k = q.d, alice.shape[0]
    j = random_isometry_choi(d, dB * dC, rng)
    bob, charlie = random_pvms(k, dB, rng), random_pvms(k, dC, rng)
    rows = []
    val = _value(alice, bob, charlie, j, d, dB, dC)
    rows.append((0, "init", val))
    gap = 0.0
    for it in range(1, iters + 1):
        start = val
        j6 = j.reshape(d, dB, dC, d, dB, dC)
        bob = best_response(_effective_bob(alice, charlie, j6))
        val = _value(alice, bob, charlie, j, d, dB, dC)
        rows.append((it, "bob", val))
        charlie = best_response(_effective_charlie(alice, bob, j6))
        val = _value(alice, bob, charlie, j, d, dB, dC)
        rows.append((it, "charlie", val))
        j_new, cert = channel_step(channel_operator(alice, bob, charlie), d, dB * dC)
        gap = max(gap, cert.gap / d)
        v_new = _value(alice, bob, charlie, j_new, d, dB, dC)
        if v_new > val:
            j = _tp_project(j_new, d, dB * dC)
            val = _value(alice, bob, charlie, j, d, dB, dC)
        rows.append((it, "channel", val))
        if val - start < tol:
            break
    return rows, val, j, bob, charlie, gap


def _tp_project(j: np.ndarray, dA: int, drest: int) -> np.ndarray:
    """Remove round-off from ``Tr_rest J = 1/dA`` by a congruence on ``A``."""
    z = ptrace(j, [dA, drest], 1) * dA
    w, v = np.linalg.eigh((z + dagger(z)) / 2)
    zi = (v / np.sqrt(w)) @ dagger(v)
    kk = np.kron(zi, np.eye(drest))
    out = kk @ j @ kk
    return (out + dagger(out)) / 2


def seesaw_attack(q, dB: int, dC: int, restarts: int = 10, iters: int = 200,
                  rng=None, tol: float = 1e-8) -> SeesawTrace:
    """Multistart alternating optimization of the attack value.

    Each restart begins from a random isometric channel and random projective
    measurements, then cycles Bob step, Charlie step and channel step until a
    full cycle gains less than ``tol``.
    """
    if not q.ensemble.is_exact:
        raise ValueError("the see-saw needs a finite key set")
    if q.d * dB * dC > MAX_DIM:
        raise ValueError(f"|A||B||C| = {q.d * dB * dC} exceeds {MAX_DIM}")
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    rng = as_rng(rng)
    alice = _scaled_alice(q, _alice_conj(q.ensemble))
    results = pmap(lambda r: _one_restart(q, alice, dB, dC, iters, tol, r), rng.spawn(restarts))
    rows, finals = [], []
    for r, (rr, val, *_rest) in enumerate(results):
        rows.extend((r, it, step, v) for it, step, v in rr)
        finals.append(val)
    best = int(np.argmax(finals))
    _, _, j, bob, charlie, _ = results[best]
    attack = CloningAttack(q.d, dB, dC, j, bob, charlie, {"name": "seesaw", "restart": best})
    gap = max(res[5] for res in results)
    return SeesawTrace(rows, restarts, attack_value(q, attack), attack, best, gap, finals)
