"""Encryption of a bit with a keyed half-rank projection.

A key is a unitary ``U`` on ``A = A1 A2`` (``|A1| = 2``); the bit ``x`` is
encrypted as the normalized projector ``(2/d) U Pi_x U^dag`` and decrypted by
measuring ``{U Pi_0 U^dag, U Pi_1 U^dag}``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import ensembles as ens
from .core import DensityMatrix, RegisterLayout, dagger
from .ensembles import UnitaryEnsemble
from .streams import as_rng


def layout_for(d: int) -> RegisterLayout:
    if d == 2:
        return RegisterLayout([("A1", 2)])
    return RegisterLayout([("A1", 2), ("A2", d // 2)])


@dataclass(frozen=True)
class Qecm:
    """Keyed bit encryption over ``ensemble``.

    ``projectors`` defaults to ``Pi_0 = |0><0| (x) 1`` and ``Pi_1 = |1><1| (x) 1``;
    overriding it is meant for negative controls, so the structural
    invariants are reported by :meth:`check` rather than enforced here.
    """

    ensemble: UnitaryEnsemble
    projectors: np.ndarray = field(default=None)
    seed: int | None = None

    def __post_init__(self):
        d = self.ensemble.d
        if d % 2:
            raise ValueError(f"the encrypted register must have even dimension, got {d}")
        p = ens.half_projectors(d) if self.projectors is None else np.asarray(self.projectors, dtype=complex)
        if p.shape != (2, d, d):
            raise ValueError(f"projectors must have shape (2, {d}, {d})")
        object.__setattr__(self, "projectors", p)

    @property
    def d(self) -> int:
        return self.ensemble.d

    @property
    def layout(self) -> RegisterLayout:
        return layout_for(self.d)

    def check(self, tol: float = 1e-10) -> list[str]:
        problems = []
        p = self.projectors
        if np.max(np.abs(p[0] + p[1] - np.eye(self.d))) > tol:
            problems.append("Pi_0 + Pi_1 != 1")
        for x in (0, 1):
            if np.max(np.abs(p[x] @ p[x] - p[x])) > tol:
                problems.append(f"Pi_{x} is not a projector")
            if abs(np.trace(p[x]).real - self.d / 2) > tol:
                problems.append(f"Pi_{x} does not have rank d/2")
        return problems

    def key(self, index: int) -> np.ndarray:
        return self.ensemble.unitaries[index]

    def sample_keys(self, count: int, rng=None) -> np.ndarray:
        rng = as_rng(self.seed if rng is None else rng)
        return self.ensemble.sample(rng, count)

    def to_config(self) -> dict:
        return {"ensemble": self.ensemble.describe(), "seed": self.seed}

    def to_json(self) -> str:
        return json.dumps(self.to_config(), sort_keys=True)


def ensemble_from_config(cfg: dict) -> UnitaryEnsemble:
    """Rebuild an ensemble from ``{"kind": ..., "d": ...}`` as written by ``describe``."""
    kind = cfg["kind"]
    d = int(cfg.get("d", 2))
    n_qubits = int(cfg.get("n_qubits", max(1, int(np.log2(d)))))
    if kind == "haar":
        return ens.haar(d)
    if kind == "clifford":
        return ens.clifford_group(n_qubits)
    if kind == "clifford-orbit":
        return ens.clifford_orbit(n_qubits)
    if kind == "pauli":
        return ens.pauli_group(n_qubits)
    if kind == "bb84":
        return ens.bb84()
    if kind == "file":
        from .serialize import load_ensemble
        return load_ensemble(cfg["path"])
    raise ValueError(f"unknown ensemble kind {kind!r}")


def qecm_from_config(cfg: dict | str) -> Qecm:
    if isinstance(cfg, str):
        cfg = json.loads(cfg)
    return Qecm(ensemble_from_config(cfg["ensemble"]), seed=cfg.get("seed"))


def haar_qecm(d: int, seed: int | None = None) -> Qecm:
    return Qecm(ens.haar(d), seed=seed)


def _check_key(key: np.ndarray, d: int) -> np.ndarray:
    key = np.asarray(key, dtype=complex)
    if key.shape != (d, d):
        raise ValueError(f"key must be {d}x{d}")
    if np.max(np.abs(dagger(key) @ key - np.eye(d))) > ens.UNITARY_TOL:
        raise ValueError("key is not unitary")
    return key


def encrypt(q: Qecm, key: np.ndarray, bit: int) -> DensityMatrix:
    """Ciphertext ``U Pi_bit U^dag / Tr(Pi_bit)``."""
    if bit not in (0, 1):
        raise ValueError("bit must be 0 or 1")
    key = _check_key(key, q.d)
    p = q.projectors[bit]
    return DensityMatrix(key @ p @ dagger(key) / np.trace(p).real, q.layout)


@dataclass(frozen=True)
class DecryptionOutcome:
    p0: float
    p1: float

    def __post_init__(self):
        if abs(self.p0 + self.p1 - 1) > 1e-10 or min(self.p0, self.p1) < -1e-10:
            raise ValueError(f"invalid outcome distribution ({self.p0}, {self.p1})")

    def __getitem__(self, bit: int) -> float:
        return (self.p0, self.p1)[bit]


def decrypt(q: Qecm, key: np.ndarray, state) -> DecryptionOutcome:
    key = _check_key(key, q.d)
    rho = state.matrix if hasattr(state, "matrix") else np.asarray(state)
    if rho.shape != (q.d, q.d):
        raise ValueError(f"state must act on dimension {q.d}")
    probs = [float(np.trace(key @ p @ dagger(key) @ rho).real) for p in q.projectors]
    return DecryptionOutcome(*probs)


@dataclass
class CorrectnessReport:
    keys: int
    max_overlap: float
    min_roundtrip: float
    violations: list[dict]
    structural: list[str]

    @property
    def correct(self) -> bool:
        return not self.violations and not self.structural


def verify_correctness(q: Qecm, keys: np.ndarray | None = None, tol: float = 1e-10) -> CorrectnessReport:
    """Orthogonality ``Tr(sigma_0 sigma_1) <= tol`` and round-trip ``p_x >= 1 - tol`` per key.

    ``keys`` defaults to the whole ensemble for finite ensembles.
    """
    if keys is None:
        if not q.ensemble.is_exact:
            raise ValueError("pass sampled keys for a Haar ensemble")
        keys = q.ensemble.unitaries
    keys = np.asarray(keys, dtype=complex)
    p = q.projectors
    norm = np.trace(p, axis1=1, axis2=2).real
    norm = np.where(norm > tol, norm, 1.0)  # a rank-0 projector is flagged by check()
    sig = [keys @ p[x] @ dagger(keys) / norm[x] for x in (0, 1)]
    meas = [keys @ p[x] @ dagger(keys) for x in (0, 1)]
    overlap = np.einsum("kij,kji->k", sig[0], sig[1]).real
    rt = np.stack([np.einsum("kij,kji->k", meas[x], sig[x]).real for x in (0, 1)], 1)
    violations = []
    for k in np.flatnonzero((overlap > tol) | (rt.min(1) < 1 - tol)):
        violations.append({"key": int(k), "overlap": float(overlap[k]),
                           "roundtrip": float(rt[k].min())})
    return CorrectnessReport(len(keys), float(overlap.max()), float(rt.min()), violations, q.check(tol))


def average_ciphertext(q: Qecm, bit: int, keys: np.ndarray | None = None) -> np.ndarray:
    keys = q.ensemble.unitaries if keys is None else keys
    p = q.projectors[bit]
    return (keys @ p @ dagger(keys)).mean(0) / np.trace(p).real
