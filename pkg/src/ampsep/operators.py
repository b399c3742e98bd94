"""Instantaneous mixing model and its block (Kronecker) expansion.

Vectors on the expanded problem are laid out source-major then time:
``x[j*T + t]`` is coefficient ``t`` of source ``j``.  The expanded operator is
``A kron I_T`` and is never formed unless explicitly materialized.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation, RefusalError

DENSE_CAP = 10_000_000


@dataclass(frozen=True)
class MixingModel:
    A: np.ndarray
    gamma_w: float = 1.0

    def __post_init__(self):
        A = np.array(self.A, dtype=float, copy=True)
        if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
            raise ContractViolation(f"mixing matrix must be 2-D and non-empty, got shape {A.shape}")
        if not np.all(np.isfinite(A)):
            raise ContractViolation("mixing matrix has non-finite entries")
        if not self.gamma_w > 0:
            raise ContractViolation(f"gamma_w must be positive, got {self.gamma_w}")
        A.setflags(write=False)
        object.__setattr__(self, "A", A)

    @property
    def M(self) -> int:
        return self.A.shape[0]

    @property
    def N(self) -> int:
        return self.A.shape[1]


@dataclass(frozen=True)
class SvdFactors:
    """Economy SVD of ``A kron I_T`` held through the small factors.

    ``U0``/``V0`` are the rank-truncated factors of the base matrix; the
    expanded factors are ``U0 kron I_T`` and ``V0 kron I_T`` with columns
    ordered ``r*T + t`` so that ``s`` stays nonincreasing.
    """

    U0: np.ndarray
    s0: np.ndarray
    V0: np.ndarray
    T: int

    @property
    def R(self) -> int:
        return self.s0.size * self.T

    @property
    def s(self) -> np.ndarray:
        return np.repeat(self.s0, self.T)

    def U_dense(self) -> np.ndarray:
        return np.kron(self.U0, np.eye(self.T))

    def V_dense(self) -> np.ndarray:
        return np.kron(self.V0, np.eye(self.T))

    def _check(self, v, rows):
        v = np.asarray(v, dtype=float)
        if v.shape != (rows * self.T,):
            raise ContractViolation(f"expected vector of length {rows * self.T}, got shape {v.shape}")
        return v.reshape(rows, self.T)

    def Ut(self, y):
        """``U^T y`` for ``y`` of length M*T; result has length R."""
        return (self.U0.T @ self._check(y, self.U0.shape[0])).ravel()

    def Vt(self, x):
        """``V^T x`` for ``x`` of length N*T; result has length R."""
        return (self.V0.T @ self._check(x, self.V0.shape[0])).ravel()

    def V(self, z):
        """``V z`` for ``z`` of length R; result has length N*T."""
        return (self.V0 @ self._check(z, self.s0.size)).ravel()

    def U(self, z):
        return (self.U0 @ self._check(z, self.s0.size)).ravel()


@dataclass(frozen=True)
class BlockOperator:
    base: MixingModel
    T: int = 1
    _svd: list = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        if int(self.T) != self.T or self.T < 1:
            raise ContractViolation(f"block size must be a positive integer, got {self.T}")

    @property
    def A(self) -> np.ndarray:
        return self.base.A

    @property
    def shape(self) -> tuple[int, int]:
        return self.base.M * self.T, self.base.N * self.T

    @classmethod
    def from_matrix(cls, A, T=1, gamma_w=1.0) -> "BlockOperator":
        return cls(MixingModel(np.asarray(A, dtype=float), gamma_w), T)

    def fro_norm2(self) -> float:
        """Squared Frobenius norm of the expanded operator."""
        return float(np.sum(self.A**2) * self.T)

    def forward(self, x) -> np.ndarray:
        return apply_forward(self, x)

    def adjoint(self, s) -> np.ndarray:
        return apply_adjoint(self, s)

    def svd(self) -> SvdFactors:
        # cached; the operator is otherwise immutable
        if not self._svd:
            self._svd.append(economy_svd(self))
        return self._svd[0]


def _as_blocks(v, rows, T, what):
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size != rows * T:
        raise ContractViolation(f"{what}: expected length {rows * T}, got shape {v.shape}")
    return v.reshape(rows, T)


def apply_forward(op: BlockOperator, x) -> np.ndarray:
    X = _as_blocks(x, op.base.N, op.T, "apply_forward")
    return (op.A @ X).ravel()


def apply_adjoint(op: BlockOperator, s) -> np.ndarray:
    S = _as_blocks(s, op.base.M, op.T, "apply_adjoint")
    return (op.A.T @ S).ravel()


def economy_svd(op: BlockOperator) -> SvdFactors:
    A = op.A
    U0, s0, V0t = np.linalg.svd(A, full_matrices=False)
    if s0.size and s0[0] > 0:
        tol = max(A.shape) * np.finfo(float).eps * s0[0]
        R0 = int(np.sum(s0 > tol))
    else:
        R0 = 0
    return SvdFactors(U0[:, :R0].copy(), s0[:R0].copy(), V0t[:R0].T.copy(), op.T)


def materialize_dense(op: BlockOperator, cap: int = DENSE_CAP) -> np.ndarray:
    Mh, Nh = op.shape
    if Mh * Nh > cap:
        raise RefusalError(f"dense operator would have {Mh * Nh} entries, cap is {cap}")
    return np.kron(op.A, np.eye(op.T))


def read_matrix_csv(path) -> np.ndarray:
    """Row-major CSV, one matrix row per line, comma separated."""
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                rows.append([float(v) for v in line.split(",")])
            except ValueError as exc:
                raise ContractViolation(f"{path}:{lineno}: not a numeric CSV row ({exc})") from None
    if not rows:
        raise ContractViolation(f"{path}: empty matrix file")
    if len({len(r) for r in rows}) != 1:
        raise ContractViolation(f"{path}: rows have differing lengths")
    A = np.array(rows)
    if not np.all(np.isfinite(A)):
        raise ContractViolation(f"{path}: non-finite entries")
    return A


def write_matrix_csv(path, A) -> None:
    with open(path, "w") as fh:
        for row in np.atleast_2d(A):
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
