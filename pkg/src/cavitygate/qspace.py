"""Composite Hilbert space and sparse operator algebra.

Two four-level atoms (levels g, a, b, r) share a single cavity mode whose
photon number is truncated to a band [fock_min, fock_max].  The flat basis
index is frozen as ``((level1*4 + level2)*n_fock + (n - fock_min))`` so that
test vectors and stored results stay stable across versions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

LEVELS = ("g", "a", "b", "r")
LEVEL_INDEX = {name: i for i, name in enumerate(LEVELS)}

HERMITICITY_TOL = 1e-12
PURE_NORM_TOL = 1e-8
TRACE_TOL = 1e-8
MATRIX_HERM_TOL = 1e-10
POSITIVITY_TOL = 1e-8


def _level_index(level) -> int:
    """Accept either a level label ('g','a','b','r') or its frozen index."""
    if isinstance(level, str):
        try:
            return LEVEL_INDEX[level]
        except KeyError:
            raise ValueError(f"unknown atomic level {level!r}; expected one of {LEVELS}")
    idx = int(level)
    if not 0 <= idx < 4:
        raise ValueError(f"atomic level index {idx} out of range [0, 4)")
    return idx


@dataclass(frozen=True)
class CompositeSpace:
    """Index bookkeeping for (atom1 level, atom2 level, photon number)."""

    fock_min: int
    fock_max: int

    def __post_init__(self):
        if self.fock_min < 0:
            raise ValueError(f"fock_min must be >= 0, got {self.fock_min}")
        if self.fock_min > self.fock_max:
            raise ValueError(
                f"invalid Fock range: fock_min={self.fock_min} > fock_max={self.fock_max}"
            )

    @property
    def n_fock(self) -> int:
        return self.fock_max - self.fock_min + 1

    @property
    def dim(self) -> int:
        return 16 * self.n_fock

    def contains_photon(self, n: int) -> bool:
        return self.fock_min <= n <= self.fock_max

    def encode(self, level1, level2, n: int) -> int:
        """Flat index of the basis state |level1, level2, n>."""
        l1 = _level_index(level1)
        l2 = _level_index(level2)
        if not self.contains_photon(n):
            raise ValueError(
                f"photon number {n} outside band [{self.fock_min}, {self.fock_max}]"
            )
        return (l1 * 4 + l2) * self.n_fock + (n - self.fock_min)

    def decode(self, index: int) -> tuple[str, str, int]:
        """Inverse of :meth:`encode`; returns (level1, level2, n)."""
        if not 0 <= index < self.dim:
            raise ValueError(f"basis index {index} out of range [0, {self.dim})")
        atom_part, offset = divmod(index, self.n_fock)
        l1, l2 = divmod(atom_part, 4)
        return LEVELS[l1], LEVELS[l2], self.fock_min + offset

    def basis_state(self, level1, level2, n: int) -> np.ndarray:
        """Unit vector for |level1, level2, n>."""
        vec = np.zeros(self.dim, dtype=complex)
        vec[self.encode(level1, level2, n)] = 1.0
        return vec

    def photon_numbers(self) -> np.ndarray:
        """Photon number of every flat basis index (length dim)."""
        return np.tile(np.arange(self.fock_min, self.fock_max + 1), 16)


def build_space(fock_min: int, fock_max: int) -> CompositeSpace:
    """Build the composite space for the photon band [fock_min, fock_max]."""
    return CompositeSpace(int(fock_min), int(fock_max))


class Operator:
    """Sparse complex operator on a :class:`CompositeSpace`.

    Entries are stored in canonical CSR form (row-major, column-sorted) so
    floating-point sums are reproducible run to run.  A declared hermiticity
    claim is verified at construction time.
    """

    def __init__(self, space: CompositeSpace, matrix, hermitian: bool = False):
        mat = sp.csr_matrix(matrix, shape=(space.dim, space.dim), dtype=complex)
        mat.sum_duplicates()
        mat.sort_indices()
        self.space = space
        self.matrix = mat
        self.hermitian = bool(hermitian)
        if self.hermitian:
            err = self.hermiticity_defect()
            if err >= HERMITICITY_TOL:
                raise ValueError(
                    f"operator claimed hermitian but max|A - A^dag| = {err:.3e}"
                )

    @classmethod
    def from_entries(cls, space, rows, cols, values, hermitian=False) -> "Operator":
        rows = np.asarray(rows, dtype=int)
        cols = np.asarray(cols, dtype=int)
        if len(rows) and (rows.min() < 0 or rows.max() >= space.dim):
            raise ValueError("row index out of range")
        if len(cols) and (cols.min() < 0 or cols.max() >= space.dim):
            raise ValueError("column index out of range")
        mat = sp.coo_matrix(
            (np.asarray(values, dtype=complex), (rows, cols)),
            shape=(space.dim, space.dim),
        )
        return cls(space, mat, hermitian=hermitian)

    @property
    def entries(self) -> list[tuple[int, int, complex]]:
        """Nonzero entries as (row, col, value), row-major and column-sorted."""
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        return [
            (int(coo.row[k]), int(coo.col[k]), complex(coo.data[k])) for k in order
        ]

    def hermiticity_defect(self) -> float:
        diff = self.matrix - self.matrix.getH()
        return 0.0 if diff.nnz == 0 else float(np.abs(diff.data).max())

    def dagger(self) -> "Operator":
        return Operator(self.space, self.matrix.getH(), hermitian=self.hermitian)

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def apply(self, vec: np.ndarray) -> np.ndarray:
        return self.matrix @ vec

    def _check_same_space(self, other: "Operator"):
        if other.space is not self.space and other.space != self.space:
            raise ValueError("operators live on different spaces")

    def __add__(self, other: "Operator") -> "Operator":
        self._check_same_space(other)
        return Operator(
            self.space,
            self.matrix + other.matrix,
            hermitian=self.hermitian and other.hermitian,
        )

    def __sub__(self, other: "Operator") -> "Operator":
        self._check_same_space(other)
        return Operator(
            self.space,
            self.matrix - other.matrix,
            hermitian=self.hermitian and other.hermitian,
        )

    def __mul__(self, scalar) -> "Operator":
        herm = self.hermitian and np.imag(complex(scalar)) == 0.0
        return Operator(self.space, self.matrix * complex(scalar), hermitian=herm)

    __rmul__ = __mul__

    def __matmul__(self, other: "Operator") -> "Operator":
        self._check_same_space(other)
        return Operator(self.space, self.matrix @ other.matrix, hermitian=False)

    def __repr__(self) -> str:
        return (
            f"Operator(dim={self.space.dim}, nnz={self.matrix.nnz}, "
            f"hermitian={self.hermitian})"
        )


def identity(space: CompositeSpace) -> Operator:
    return Operator(space, sp.identity(space.dim, dtype=complex, format="csr"),
                    hermitian=True)


def fock_lowering(space: CompositeSpace) -> Operator:
    """Photon annihilation with hard band truncation.

    <..., n-1| c |..., n> = sqrt(n) for n > fock_min; the matrix element out
    of |..., fock_min> is dropped (it would leave the band), so truncation
    error shows up as missing amplitude rather than spurious wrap-around.
    """
    rows, cols, vals = [], [], []
    n_fock = space.n_fock
    for atom_block in range(16):
        base = atom_block * n_fock
        for n in range(space.fock_min + 1, space.fock_max + 1):
            offset = n - space.fock_min
            rows.append(base + offset - 1)
            cols.append(base + offset)
            vals.append(np.sqrt(n))
    return Operator.from_entries(space, rows, cols, vals)


def fock_raising(space: CompositeSpace) -> Operator:
    return fock_lowering(space).dagger()


def fock_number(space: CompositeSpace) -> Operator:
    """Diagonal photon-number operator n (absolute photon number)."""
    diag = space.photon_numbers().astype(complex)
    return Operator(space, sp.diags(diag, format="csr"), hermitian=True)


def atomic_transition(space: CompositeSpace, atom: int, from_level, to_level) -> Operator:
    """|to><from| on the given atom, identity on the other atom and the mode."""
    if atom not in (1, 2):
        raise ValueError(f"atom must be 1 or 2, got {atom}")
    src = _level_index(from_level)
    dst = _level_index(to_level)
    n_fock = space.n_fock
    rows, cols = [], []
    for other in range(4):
        if atom == 1:
            row_block, col_block = dst * 4 + other, src * 4 + other
        else:
            row_block, col_block = other * 4 + dst, other * 4 + src
        for offset in range(n_fock):
            rows.append(row_block * n_fock + offset)
            cols.append(col_block * n_fock + offset)
    vals = np.ones(len(rows))
    hermitian = src == dst
    return Operator.from_entries(space, rows, cols, vals, hermitian=hermitian)


def atomic_projector(space: CompositeSpace, atom: int, level) -> Operator:
    return atomic_transition(space, atom, level, level)


@dataclass
class QuantumState:
    """Pure state vector or density matrix on a composite space."""

    space: CompositeSpace
    kind: str  # "pure" | "mixed"
    amplitudes: np.ndarray | None = None
    matrix: np.ndarray | None = None

    @classmethod
    def pure(cls, space: CompositeSpace, amplitudes) -> "QuantumState":
        vec = np.asarray(amplitudes, dtype=complex)
        if vec.shape != (space.dim,):
            raise ValueError(f"expected vector of length {space.dim}, got {vec.shape}")
        return cls(space=space, kind="pure", amplitudes=vec)

    @classmethod
    def mixed(cls, space: CompositeSpace, matrix) -> "QuantumState":
        mat = np.asarray(matrix, dtype=complex)
        if mat.shape != (space.dim, space.dim):
            raise ValueError(
                f"expected {space.dim}x{space.dim} matrix, got {mat.shape}"
            )
        return cls(space=space, kind="mixed", matrix=mat)

    @classmethod
    def basis(cls, space: CompositeSpace, level1, level2, n: int) -> "QuantumState":
        return cls.pure(space, space.basis_state(level1, level2, n))

    def density_matrix(self) -> np.ndarray:
        if self.kind == "pure":
            return np.outer(self.amplitudes, self.amplitudes.conj())
        return self.matrix

    def validate(self):
        """Raise ValueError when a norm/trace/positivity invariant is broken."""
        if self.kind == "pure":
            norm_sq = float(np.vdot(self.amplitudes, self.amplitudes).real)
            if abs(norm_sq - 1.0) >= PURE_NORM_TOL:
                raise ValueError(f"pure-state norm^2 deviates: |{norm_sq} - 1| >= 1e-8")
        else:
            tr = complex(np.trace(self.matrix))
            if abs(tr - 1.0) >= TRACE_TOL:
                raise ValueError(f"density-matrix trace deviates: |{tr} - 1| >= 1e-8")
            herm = float(np.abs(self.matrix - self.matrix.conj().T).max())
            if herm >= MATRIX_HERM_TOL:
                raise ValueError(f"density matrix not hermitian: defect {herm:.3e}")
            min_eig = float(np.linalg.eigvalsh(self.matrix).min())
            if min_eig < -POSITIVITY_TOL:
                raise ValueError(f"density matrix not positive: min eigenvalue {min_eig:.3e}")
        return self
