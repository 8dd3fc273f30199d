"""Conditional min-entropy, decoupling and the inequality chain behind the game bound.

All entropies are in bits.  Where a certified interval feeds an inequality
check, the end that makes the check harder is used, so a pass never rests on
solver slack.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from . import ensembles as ens
from . import games as gm
from .core import dagger, proj, ptrace, random_density, von_neumann_entropy
from .sdp import CertifiedInterval, dominance_sdp
from .streams import as_rng, map_chunks, pmap

MAX_REGISTER = 64


def fingerprint(rho: np.ndarray) -> str:
    data = np.round(np.asarray(rho, dtype=complex), 10).tobytes()
    return hashlib.sha256(data).hexdigest()[:16]


@dataclass(frozen=True)
class EntropyResult:
    lower: float
    upper: float
    method: str
    fingerprint: str
    certificate: object = field(default=None, compare=False, repr=False)

    @property
    def value(self) -> float:
        return 0.5 * (self.lower + self.upper)

    @property
    def gap(self) -> float:
        return self.upper - self.lower


def _dims_ab(rho: np.ndarray, dA: int, dB: int | None) -> tuple[np.ndarray, int, int]:
    rho = np.asarray(rho.matrix if hasattr(rho, "matrix") else rho, dtype=complex)
    if dB is None:
        dB = rho.shape[0] // dA
    if dA * dB != rho.shape[0]:
        raise ValueError(f"state of dimension {rho.shape[0]} does not split as {dA} x {dB}")
    return (rho + dagger(rho)) / 2, dA, dB


def hmin_sdp(rho, dA: int, dB: int | None = None) -> EntropyResult:
    """``H_min(A|B) = -log2 min{Tr sigma_B : 1_A (x) sigma_B >= rho_AB}`` with a certified interval."""
    rho, dA, dB = _dims_ab(rho, dA, dB)
    if max(dA, dB) > MAX_REGISTER:
        raise ValueError(f"registers are capped at {MAX_REGISTER}")
    cert = dominance_sdp(rho, [dA, dB], on=1)
    lo_opt = max(cert.lower, 1e-300)
    lower, upper = -math.log2(cert.upper), -math.log2(lo_opt)
    lower, upper = max(lower, -math.log2(dA)), min(upper, math.log2(dA))
    return EntropyResult(min(lower, upper), upper, "sdp", fingerprint(rho), cert)


def _krs_objective(v: np.ndarray, r4: np.ndarray, dA: int, dE: int) -> tuple[float, np.ndarray]:
    """Fidelity-squared with ``phi+`` after the channel with isometry ``v`` and its ascent direction."""
    dB = v.shape[1]
    k = v.reshape(dA, dE, dB)                   # Kraus K_e[i, b] = k[i, e, b]
    g = np.einsum("jeb,jbic->iec", k, r4) / dA  # gradient w.r.t. conj(k)
    f = float(np.einsum("iec,iec->", k.conj(), g).real)
    return f, g.reshape(dA * dE, dB)


def _polar(g: np.ndarray) -> np.ndarray:
    u, _, vh = np.linalg.svd(g, full_matrices=False)
    return u @ vh


def hmin_krs(rho, dA: int, dB: int | None = None, restarts: int = 8, rng=None,
             iters: int = 5000, tol: float = 1e-13) -> EntropyResult:
    """Upper bound on ``H_min(A|B)`` from the best channel ``B -> A'`` found by isometry ascent.

    The fidelity with ``phi+`` is a convex quadratic in the Stinespring
    isometry, so replacing the isometry by the polar part of the gradient
    never decreases it.
    """
    rho, dA, dB = _dims_ab(rho, dA, dB)
    if max(dA, dB) > 16:
        raise ValueError("hmin_krs is capped at 16 per register")
    rng = as_rng(rng)
    dE = dA * dB
    r4 = rho.reshape(dA, dB, dA, dB)

    def run(r):
        v = ens.sample_haar(dA * dE, r)[:, :dB]
        f, g = _krs_objective(v, r4, dA, dE)
        for _ in range(iters):
            v = _polar(g)
            f_new, g = _krs_objective(v, r4, dA, dE)
            if f_new - f < tol:
                f = max(f, f_new)
                break
            f = f_new
        return f, v

    results = pmap(run, rng.spawn(restarts))
    best = int(np.argmax([r[0] for r in results]))
    f, v = results[best]
    h = -math.log2(dA * f)
    return EntropyResult(h, h, "guessing-ascent", fingerprint(rho), v)


def conditional_entropy(rho, dA: int, dB: int | None = None) -> float:
    """``H(A|B) = S(AB) - S(B)``."""
    rho, dA, dB = _dims_ab(rho, dA, dB)
    return von_neumann_entropy(rho) - von_neumann_entropy(ptrace(rho, [dA, dB], 0))


# ---------------------------------------------------------------------------
# decoupling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DecouplingReport:
    name: str
    dA: int
    dE: int
    a1: int
    a2: int
    samples: int
    lhs_mc: float
    stderr: float
    hmin: float
    hmin_gap: float
    rhs: float

    @property
    def holds(self) -> bool:
        return self.lhs_mc - 3 * self.stderr <= self.rhs

    @property
    def vacuous(self) -> bool:
        # maximal entanglement gives rhs = 1 exactly; allow for solver slack
        return self.rhs >= 1 - 1e-9


def decoupling_rhs(hmin_ae: float, dA: int, a1: int = 2) -> float:
    a2 = dA // a1
    return 2.0 ** (-0.5 * hmin_ae - 0.5 * (math.log2(a2) - math.log2(a1)) - 1)


def _batched_trace_distance(x: np.ndarray) -> np.ndarray:
    return 0.5 * np.abs(np.linalg.eigvalsh(x)).sum(-1)


def decoupling_check(rho_ae, dA: int, dE: int, ensemble=None, samples: int = 10_000,
                     rng=None, name: str = "") -> DecouplingReport:
    """Average trace distance of ``Tr_A2[(U (x) 1) rho (U (x) 1)^dag]`` from ``omega_A1 (x) rho_E``."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if dA % 2:
        raise ValueError("A must split as A1 A2 with |A1| = 2")
    rho, _, _ = _dims_ab(rho_ae, dA, dE)
    ensemble = ens.haar(dA) if ensemble is None else ensemble
    if ensemble.d != dA:
        raise ValueError("ensemble dimension does not match A")
    rng = as_rng(rng)
    a1, a2 = 2, dA // 2
    target = np.kron(np.eye(a1) / a1, ptrace(rho, [dA, dE], 0))

    def chunk(size, r):
        us = ensemble.sample(r, size)
        left = (us @ rho.reshape(dA, -1)).reshape(size, dA * dE, dA, dE)
        rot = us.conj()[:, None] @ left  # (U (x) 1) rho (U (x) 1)^dag, indices [k, (i e), j, f]
        rot = rot.reshape(size, a1, a2, dE, a1, a2, dE)
        red = np.einsum("kxaeyaf->kxeyf", rot).reshape(size, a1 * dE, a1 * dE)
        dist = _batched_trace_distance(red - target)
        return dist.sum(), (dist ** 2).sum()

    parts = np.array(map_chunks(chunk, samples, rng))
    m, m2 = parts.sum(0) / samples
    se = math.sqrt(max(m2 - m * m, 0) / max(samples - 1, 1))
    h = hmin_sdp(rho, dA, dE)
    # a larger H_min shrinks the bound, so its upper end is the demanding choice
    rhs = decoupling_rhs(h.upper, dA, a1)
    return DecouplingReport(name, dA, dE, a1, a2, samples, float(m), se, h.upper, h.gap, rhs)


def decoupling_family(rng=None) -> list[tuple[str, np.ndarray, int, int]]:
    """Built-in instances ``(name, rho_AE, |A|, |E|)``."""
    rng = as_rng(rng)
    out = []
    out.append(("mixed-x-random-E", np.kron(np.eye(4) / 4, random_density(3, rng)), 4, 3))
    out.append(("phi+-8", proj(np.eye(8).ravel() / np.sqrt(8)), 8, 8))
    zero = np.zeros((2, 2))
    zero[0, 0] = 1
    out.append(("mixed16-x-zero", np.kron(np.eye(16) / 16, zero), 16, 2))
    out.append(("random-8x2", random_density(16, rng), 8, 2))
    out.append(("random-16x1", random_density(16, rng), 16, 1))
    out.append(("random-16x2-rank4", random_density(32, rng, rank=4), 16, 2))
    return out


# ---------------------------------------------------------------------------
# inequality chain
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChainRecord:
    check: str
    probe: int
    param: float
    lhs: float
    rhs: float
    holds: bool
    vacuous: bool


@dataclass
class ChainReport:
    d: int
    dB: int
    dC: int
    epsilon: float
    records: list[ChainRecord]
    skipped: list[str]
    hmin_gap: float

    @property
    def violations(self) -> list[ChainRecord]:
        return [r for r in self.records if not r.holds]


def near_eigenstate_rhs(delta: float, d: int) -> float:
    return 1 - 4 * 2.0 ** (-(4 / 3) * delta * math.log2(d))


def inner_product_rhs(eps: float, d: int) -> float:
    return 8 * 2.0 ** (-(4 / 3) * eps * math.log2(d))


def entropy_bound_rhs(eps: float, d: int) -> float:
    return -(1 - (4 / 3) * eps) * math.log2(d) - 3


def proof_step_rhs(hmin_ab: float, d: int) -> float:
    return 0.5 + 2.0 ** (-0.5 * hmin_ab - 0.5 * math.log2(d))


def remark_delta(d: int) -> float:
    """``delta = 3 log log d / (4 log d)``, which turns the near-eigenstate bound into ``1 - 4 / log d``."""
    ld = math.log2(d)
    return 3 * math.log2(ld) / (4 * ld)


def make_probe(d: int, dC: int, rng, rotate: bool = True) -> np.ndarray:
    """Pure ``phi_ABC`` with ``phi_AC = omega_A (x) sigma_C``, ``|B| = d |C|``."""
    sigma = random_density(dC, rng)
    w, v = np.linalg.eigh(sigma)
    w = np.clip(w, 0, None)
    dB = d * dC
    phi = np.zeros((d, dB, dC), dtype=complex)
    for a in range(d):
        for c in range(dC):
            phi[a, a * dC + c, :] = math.sqrt(w[c] / d) * v[:, c]
    if rotate:
        phi = np.einsum("ib,abc->aic", ens.sample_haar(dB, rng), phi)
    return phi.ravel()


def _spectral_projector(w, v, mask):
    sel = v[:, mask]
    return sel @ dagger(sel)


def chain_check(game: gm.MoeGame, bob, charlie, probes: list[np.ndarray],
                deltas=(0.05, 0.1, 0.2), tol: float = 1e-9) -> ChainReport:
    """Evaluate the near-eigenstate, inner-product, entropy and proof-step inequalities."""
    p = gm.game_operator_P(game, bob, charlie)
    q = gm.game_operator_Q(game, charlie)
    d, dB, dC = p.dims
    eps = p.norm - 0.5
    records, skipped = [], []

    top_mask = p.eigenvalues >= p.norm - 1e-9
    top = p.eigenvectors[:, top_mask]

    qw, qv = q.eigenvalues, q.eigenvectors
    grid = sorted(set(float(x) for x in deltas if 0 < x <= 0.5)
                  | ({remark_delta(d)} if d >= 4 else set())
                  | ({0.9 * eps, 0.99 * eps} if eps > 0 else set()))
    for i, phi in enumerate(probes):
        phi = np.asarray(phi, dtype=complex)
        if phi.shape != (d * dB * dC,) or abs(np.vdot(phi, phi) - 1) > 1e-9:
            raise ValueError(f"probe {i} is not a unit vector on A B C")
        t = phi.reshape(d, dB, dC)
        sigma_ac = np.einsum("abc,ebf->acef", t, t.conj()).reshape(d * dC, d * dC)
        if np.max(np.abs(sigma_ac - np.kron(np.eye(d) / d, ptrace(sigma_ac, [d, dC], 0)))) > 1e-9:
            raise ValueError(f"probe {i} does not have sigma_AC = omega_A (x) sigma_C")
        for delta in grid:
            # eigenvalues on the boundary are dropped, which can only lower the lhs
            mask = np.abs(qw - 0.5) < delta - 1e-12
            lhs = float(np.trace(_spectral_projector(qw, qv, mask) @ sigma_ac).real)
            rhs = near_eigenstate_rhs(delta, d)
            records.append(ChainRecord("near-eigenstate", i, delta, lhs, rhs,
                                       lhs >= rhs - tol, rhs <= 0))
        if eps > 0:
            # the largest overlap over a degenerate top eigenspace
            lhs = float(np.sum(np.abs(dagger(top) @ phi) ** 2))
            rhs = inner_product_rhs(eps, d)
            records.append(ChainRecord("inner-product", i, eps, lhs, rhs, lhs <= rhs + tol, rhs >= 1))

    psi = p.top_vector.reshape(d, dB, dC)
    rho_ab = np.einsum("abc,ejc->abej", psi, psi.conj()).reshape(d * dB, d * dB)
    h = hmin_sdp(rho_ab, d, dB)
    if eps > 0:
        rhs = entropy_bound_rhs(eps, d)
        records.append(ChainRecord("entropy-bound", -1, eps, h.lower, rhs,
                                   h.lower >= rhs - tol, rhs <= -math.log2(d)))
    else:
        skipped.append("inner-product and entropy-bound need epsilon > 0")
    rhs = proof_step_rhs(h.upper, d)
    records.append(ChainRecord("proof-step", -1, eps, p.norm, rhs, p.norm <= rhs + tol, rhs >= 1))
    return ChainReport(d, dB, dC, eps, records, skipped, h.gap)


def chain_suite(d: int, ensemble=None, dC: int = 2, probes: int = 5, deltas=(0.05, 0.1, 0.2),
                rng=None, rounds: int = 3) -> ChainReport:
    """Measurements from a short best-response refinement plus random probes on a finite 2-design.

    ``rounds = 0`` keeps the random projective measurements.
    """
    rng = as_rng(rng)
    if ensemble is None:
        n = int(round(math.log2(d)))
        ensemble = ens.clifford_group(n) if n <= 2 else ens.clifford_orbit(n)
    game = gm.MoeGame(ensemble)
    bob, charlie, _ = gm.improved_povms(game, d * dC, dC, rng, rounds)
    phis = [make_probe(d, dC, rng) for _ in range(probes)]
    return chain_check(game, bob, charlie, phis, deltas)


# ---------------------------------------------------------------------------
# bound tables
# ---------------------------------------------------------------------------

def game_bound(d: float) -> float:
    """``1/2 + 3 log log d / (2 log d)``; requires even ``d >= 14``."""
    if d < 14:
        raise ValueError(f"the game bound needs d >= 14, got {d}")
    if d == int(d) and int(d) % 2:
        raise ValueError(f"the game bound needs even d, got {d}")
    ld = math.log2(d)
    return 0.5 + 3 * math.log2(ld) / (2 * ld)


def security_delta(lam: float) -> float:
    """``3 log lambda / (2 lambda)``; requires ``lambda >= 4``."""
    if lam < 4:
        raise ValueError(f"the security parameter must be >= 4, got {lam}")
    return 3 * math.log2(lam) / (2 * lam)


@dataclass(frozen=True)
class BoundRow:
    kind: str
    x: float
    value: float
    bound: float
    vacuous: bool


def bound_table(ds=(), lambdas=()) -> list[BoundRow]:
    rows = []
    for d in ds:
        b = game_bound(d)
        rows.append(BoundRow("d", d, b, b, b >= 1))
    for lam in lambdas:
        delta = security_delta(lam)
        rows.append(BoundRow("lambda", lam, delta, 0.5 + delta, 0.5 + delta >= 1))
    return rows
