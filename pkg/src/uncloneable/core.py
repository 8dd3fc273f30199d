"""Dense linear algebra and quantum-state substrate.

Operators are stored as dense complex numpy arrays together with a
:class:`RegisterLayout` naming each tensor factor.  Register order is always
significant: nothing here reorders registers implicitly, use
:func:`permute_registers` for that.

Most of the package works directly on arrays for speed; the array-level
helpers (``ptrace``, ``proj``, ``random_density`` ...) are exported for that
purpose, while the typed wrappers enforce the structural invariants at API
boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

HERM_TOL = 1e-12
STATE_TOL = 1e-10
CLIP_TOL = 1e-10


class LayoutError(ValueError):
    """Raised on register-name collisions or unknown register names."""


@dataclass(frozen=True)
class RegisterLayout:
    """Ordered tensor-factor names and dimensions, e.g. ``[("A1", 2), ("A2", 4)]``."""

    registers: tuple[tuple[str, int], ...]

    def __init__(self, registers: Sequence[tuple[str, int]]):
        regs = tuple((str(n), int(d)) for n, d in registers)
        if not regs:
            raise LayoutError("layout needs at least one register")
        names = [n for n, _ in regs]
        if len(set(names)) != len(names):
            raise LayoutError(f"duplicate register names in {names}")
        if any(d < 1 for _, d in regs):
            raise LayoutError(f"register dimensions must be >= 1, got {regs}")
        object.__setattr__(self, "registers", regs)

    @classmethod
    def single(cls, name: str, dim: int) -> "RegisterLayout":
        return cls([(name, dim)])

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.registers)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(d for _, d in self.registers)

    @property
    def total(self) -> int:
        return int(np.prod(self.dims))

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise LayoutError(f"unknown register {name!r}; layout has {self.names}") from None

    def dim(self, name: str) -> int:
        return self.dims[self.index(name)]

    def concat(self, other: "RegisterLayout") -> "RegisterLayout":
        return RegisterLayout(self.registers + other.registers)

    def without(self, name: str) -> "RegisterLayout":
        i = self.index(name)
        return RegisterLayout(self.registers[:i] + self.registers[i + 1:])

    def split(self, name: str, parts: Sequence[tuple[str, int]]) -> "RegisterLayout":
        """Replace register ``name`` by ``parts`` whose dimensions multiply to its own."""
        i = self.index(name)
        if int(np.prod([d for _, d in parts])) != self.registers[i][1]:
            raise LayoutError(f"cannot split {name} of dim {self.registers[i][1]} into {parts}")
        return RegisterLayout(self.registers[:i] + tuple(parts) + self.registers[i + 1:])


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class HermitianOperator:
    """Hermitian matrix on a named register layout.

    The input is symmetrized after the Hermiticity check so that downstream
    eigensolvers see an exactly Hermitian array.
    """

    matrix: np.ndarray
    layout: RegisterLayout = field(default=None)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
            raise ValueError(f"expected a nonempty square matrix, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("matrix has non-finite entries")
        layout = self.layout
        if layout is None:
            layout = RegisterLayout.single("A", m.shape[0])
        if layout.total != m.shape[0]:
            raise LayoutError(f"layout {layout.registers} does not match dimension {m.shape[0]}")
        scale = max(float(np.max(np.abs(m))), 1.0)
        if np.max(np.abs(m - m.conj().T)) > HERM_TOL * scale * max(1, m.shape[0]):
            raise ValueError("matrix is not Hermitian")
        object.__setattr__(self, "matrix", _readonly((m + m.conj().T) / 2))
        object.__setattr__(self, "layout", layout)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)


class DensityMatrix(HermitianOperator):
    """Positive semidefinite, unit-trace :class:`HermitianOperator`."""

    def __post_init__(self):
        super().__post_init__()
        if abs(self.trace() - 1.0) > STATE_TOL:
            raise ValueError(f"density matrix trace is {self.trace()!r}, not 1")
        if np.linalg.eigvalsh(self.matrix)[0] < -STATE_TOL:
            raise ValueError("density matrix is not positive semidefinite")

    @classmethod
    def from_operator(cls, op: HermitianOperator) -> "DensityMatrix":
        return cls(op.matrix, op.layout)

    @classmethod
    def pure(cls, vec, layout: RegisterLayout | None = None) -> "DensityMatrix":
        v = np.asarray(vec, dtype=complex).ravel()
        v = v / np.linalg.norm(v)
        return cls(np.outer(v, v.conj()), layout)


@dataclass(frozen=True)
class Povm:
    """Outcome-indexed POVM elements acting on one register."""

    elements: tuple[np.ndarray, ...]

    def __init__(self, elements: Sequence[np.ndarray], tol: float = STATE_TOL):
        els = tuple(_readonly(e) for e in elements)
        if not els:
            raise ValueError("POVM needs at least one element")
        d = els[0].shape[0]
        if any(e.shape != (d, d) for e in els):
            raise ValueError("POVM elements must share one square shape")
        for e in els:
            if np.max(np.abs(e - e.conj().T), initial=0.0) > tol:
                raise ValueError("POVM element is not Hermitian")
            if np.linalg.eigvalsh((e + e.conj().T) / 2)[0] < -tol:
                raise ValueError("POVM element is not positive semidefinite")
        if np.max(np.abs(sum(els) - np.eye(d))) > tol:
            raise ValueError("POVM elements do not sum to the identity")
        object.__setattr__(self, "elements", els)

    def __len__(self) -> int:
        return len(self.elements)

    def __getitem__(self, i: int) -> np.ndarray:
        return self.elements[i]

    @property
    def dim(self) -> int:
        return self.elements[0].shape[0]


# ---------------------------------------------------------------------------
# array-level helpers
# ---------------------------------------------------------------------------

def ket(index: int, dim: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def proj(vec) -> np.ndarray:
    v = np.asarray(vec, dtype=complex).ravel()
    return np.outer(v, v.conj())


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(m, -1, -2))


def kron_all(mats: Sequence[np.ndarray]) -> np.ndarray:
    out = np.asarray(mats[0], dtype=complex)
    for m in mats[1:]:
        out = np.kron(out, m)
    return out


def ptrace(mat: np.ndarray, dims: Sequence[int], out: int | Sequence[int]) -> np.ndarray:
    """Trace out the factor(s) ``out`` of ``mat`` acting on ``prod(dims)``."""
    dims = list(dims)
    outs = sorted({out} if isinstance(out, (int, np.integer)) else set(out), reverse=True)
    t = np.asarray(mat).reshape(dims + dims)
    n = len(dims)
    for k in outs:
        t = np.trace(t, axis1=k, axis2=k + n)
        dims.pop(k)
        n -= 1
    d = int(np.prod(dims)) if dims else 1
    return t.reshape(d, d)


def permute(mat: np.ndarray, dims: Sequence[int], order: Sequence[int]) -> np.ndarray:
    """Reorder tensor factors: factor ``order[i]`` of the input becomes factor ``i``."""
    dims = list(dims)
    n = len(dims)
    t = np.asarray(mat).reshape(dims + dims)
    t = t.transpose(list(order) + [n + i for i in order])
    d = int(np.prod(dims))
    return t.reshape(d, d)


def psd_sqrt(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh((m + dagger(m)) / 2)
    w = np.where(w < 0, 0.0, w)
    return (v * np.sqrt(w)) @ dagger(v)


def clip_eigs(w: np.ndarray, tol: float = CLIP_TOL) -> np.ndarray:
    """Zero out round-off negatives; larger negative values are kept as an error signal."""
    return np.where((w < 0) & (w >= -tol), 0.0, w)


def random_pure(dim: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def random_density(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Hilbert-Schmidt random state: partial trace of a random pure state on dim x rank."""
    rank = dim if rank is None else rank
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    rho = g @ dagger(g)
    return rho / np.trace(rho).real


def random_hermitian(dim: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return (g + dagger(g)) / 2


def phi_plus_vector(dim: int) -> np.ndarray:
    return np.eye(dim, dtype=complex).ravel() / np.sqrt(dim)


def von_neumann_entropy(rho: np.ndarray) -> float:
    w = np.linalg.eigvalsh((rho + dagger(rho)) / 2)
    w = w[w > 1e-15]
    return float(-np.sum(w * np.log2(w)))


# ---------------------------------------------------------------------------
# typed operations
# ---------------------------------------------------------------------------

def _as_op(op) -> HermitianOperator:
    return op if isinstance(op, HermitianOperator) else HermitianOperator(op)


def tensor(ops: Sequence[HermitianOperator]) -> HermitianOperator:
    """Kronecker product with concatenated layouts; names must not collide."""
    if not ops:
        raise ValueError("tensor needs at least one operator")
    ops = [_as_op(o) for o in ops]
    regs: list[tuple[str, int]] = []
    for o in ops:
        regs.extend(o.layout.registers)
    layout = RegisterLayout(regs)
    mat = kron_all([o.matrix for o in ops])
    if all(isinstance(o, DensityMatrix) for o in ops):
        return DensityMatrix(mat, layout)
    return HermitianOperator(mat, layout)


def partial_trace(op: HermitianOperator, out: str) -> HermitianOperator:
    """Trace out register ``out``; the result keeps the remaining register order."""
    op = _as_op(op)
    i = op.layout.index(out)
    if len(op.layout.registers) == 1:
        raise LayoutError("cannot trace out the only register")
    mat = ptrace(op.matrix, op.layout.dims, i)
    cls = DensityMatrix if isinstance(op, DensityMatrix) else HermitianOperator
    return cls(mat, op.layout.without(out))


def permute_registers(op: HermitianOperator, names: Sequence[str]) -> HermitianOperator:
    op = _as_op(op)
    if sorted(names) != sorted(op.layout.names):
        raise LayoutError(f"{list(names)} is not a permutation of {op.layout.names}")
    order = [op.layout.index(n) for n in names]
    mat = permute(op.matrix, op.layout.dims, order)
    layout = RegisterLayout([op.layout.registers[i] for i in order])
    cls = DensityMatrix if isinstance(op, DensityMatrix) else HermitianOperator
    return cls(mat, layout)


def herm_eig(op) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues in descending order and the matching orthonormal eigenvector columns."""
    m = _as_op(op).matrix
    w, v = np.linalg.eigh(m)
    return w[::-1].copy(), v[:, ::-1].copy()


def _check_same(a: HermitianOperator, b: HermitianOperator):
    if a.layout != b.layout:
        raise LayoutError(f"layout mismatch: {a.layout.registers} vs {b.layout.registers}")


def trace_distance(rho, sigma) -> float:
    """Normalized trace norm ``0.5 * ||rho - sigma||_1``."""
    rho, sigma = _as_op(rho), _as_op(sigma)
    _check_same(rho, sigma)
    w = np.linalg.eigvalsh(rho.matrix - sigma.matrix)
    return float(0.5 * np.sum(np.abs(w)))


def fidelity(rho, sigma) -> float:
    """Root fidelity ``||sqrt(rho) sqrt(sigma)||_1``."""
    rho, sigma = _as_op(rho), _as_op(sigma)
    _check_same(rho, sigma)
    s = np.linalg.svd(psd_sqrt(rho.matrix) @ psd_sqrt(sigma.matrix), compute_uv=False)
    return float(min(np.sum(s), 1.0))


def maximally_mixed(dim: int, name: str = "A") -> DensityMatrix:
    return DensityMatrix(np.eye(dim) / dim, RegisterLayout.single(name, dim))


def maximally_entangled(dim: int, names: tuple[str, str] = ("A", "A'")) -> DensityMatrix:
    layout = RegisterLayout([(names[0], dim), (names[1], dim)])
    return DensityMatrix.pure(phi_plus_vector(dim), layout)


def purify(rho: DensityMatrix, name: str | None = None) -> DensityMatrix:
    """Spectral purification ``sum_i sqrt(p_i) |v_i>|v_i>`` onto a doubled register."""
    rho = _as_op(rho)
    w, v = np.linalg.eigh(rho.matrix)
    w = clip_eigs(w)
    if w.min() < 0:
        raise ValueError("cannot purify a non-PSD operator")
    d = rho.dim
    psi = np.zeros(d * d, dtype=complex)
    for i in range(d):
        psi += np.sqrt(w[i]) * np.kron(v[:, i], v[:, i].conj())
    purifier = name or "+".join(rho.layout.names) + "'"
    layout = rho.layout.concat(RegisterLayout.single(purifier, d))
    return DensityMatrix.pure(psi, layout)
