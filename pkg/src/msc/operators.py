"""Linear operators for the observation model ``y = H x + w``.

Two concrete operators are provided: an explicit dense matrix and the
causal ARMA convolution ``H = A^{-1} B`` realised by recursive filtering
with zero initial conditions (so ``M == N``).
"""

import json

import numpy as np
from scipy import linalg, signal

DENSE_LIMIT = 2000


class DimensionError(ValueError):
    pass


class LinearOperator:
    """Base class; subclasses provide ``shape``, ``matvec`` and ``rmatvec``."""

    shape = (0, 0)

    def matvec(self, x):
        raise NotImplementedError

    def rmatvec(self, y):
        raise NotImplementedError

    def _check_in(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.shape[1],):
            raise DimensionError(f"expected vector of length {self.shape[1]}, got {x.shape}")
        return x

    def _check_out(self, y):
        y = np.asarray(y, dtype=float)
        if y.shape != (self.shape[0],):
            raise DimensionError(f"expected vector of length {self.shape[0]}, got {y.shape}")
        return y

    def column(self, n):
        e = np.zeros(self.shape[1])
        e[n] = 1.0
        return self.matvec(e)

    def column_norms(self):
        return np.array([np.linalg.norm(self.column(n)) for n in range(self.shape[1])])

    def subcolumns(self, indices):
        """Dense operator holding the columns listed in ``indices``."""
        idx = _check_indices(indices, self.shape[1])
        cols = [self.column(n) for n in idx]
        mat = np.column_stack(cols) if cols else np.zeros((self.shape[0], 0))
        return DenseOperator(mat)

    def to_dense(self):
        return self.subcolumns(range(self.shape[1])).matrix


class DenseOperator(LinearOperator):
    def __init__(self, matrix):
        matrix = np.asarray(matrix, dtype=float)
        if matrix.ndim != 2:
            raise DimensionError("dense operator needs a 2-D matrix")
        self.matrix = matrix
        self.shape = matrix.shape

    def matvec(self, x):
        return self.matrix @ self._check_in(x)

    def rmatvec(self, y):
        return self.matrix.T @ self._check_out(y)

    def column(self, n):
        return self.matrix[:, n].copy()

    def column_norms(self):
        return np.linalg.norm(self.matrix, axis=0)

    def subcolumns(self, indices):
        idx = _check_indices(indices, self.shape[1])
        return DenseOperator(self.matrix[:, idx])

    def to_dense(self):
        return self.matrix.copy()

    def to_json(self):
        return {"type": "dense", "matrix": self.matrix.tolist()}


class ArmaOperator(LinearOperator):
    """Causal IIR convolution y(n) = sum b(k) x(n-k) - sum_{k>=1} a(k) y(n-k).

    ``a[0]`` must be 1 and all poles must lie strictly inside the unit circle.
    """

    def __init__(self, b, a, n):
        b = np.atleast_1d(np.asarray(b, dtype=float))
        a = np.atleast_1d(np.asarray(a, dtype=float))
        if a.size == 0 or a[0] != 1.0:
            raise ValueError("a-coefficients must be monic (a[0] == 1)")
        if b.size == 0:
            raise ValueError("b-coefficients must be non-empty")
        if a.size > 1:
            poles = np.roots(a)
            if np.any(np.abs(poles) >= 1.0):
                raise ValueError(f"unstable system: pole magnitudes {np.abs(poles)}")
        n = int(n)
        if n < 1:
            raise ValueError("signal length must be positive")
        self.b, self.a, self.n = b, a, n
        self.shape = (n, n)
        self._h = None

    @property
    def impulse_response(self):
        if self._h is None:
            e = np.zeros(self.n)
            e[0] = 1.0
            self._h = signal.lfilter(self.b, self.a, e)
        return self._h

    def matvec(self, x):
        return signal.lfilter(self.b, self.a, self._check_in(x))

    def rmatvec(self, y):
        # H is lower-triangular Toeplitz; its transpose is anticausal filtering
        return signal.lfilter(self.b, self.a, self._check_out(y)[::-1])[::-1]

    def column(self, n):
        col = np.zeros(self.n)
        col[n:] = self.impulse_response[: self.n - n]
        return col

    def column_norms(self):
        # column n holds h[0:N-n]
        e = np.cumsum(self.impulse_response**2)
        return np.sqrt(e[::-1])

    def subcolumns(self, indices):
        idx = _check_indices(indices, self.n)
        mat = np.zeros((self.n, idx.size))
        h = self.impulse_response
        for j, k in enumerate(idx):
            mat[k:, j] = h[: self.n - k]
        return DenseOperator(mat)

    def to_json(self):
        return {"type": "arma", "b": self.b.tolist(), "a": self.a.tolist(), "n": self.n}


def _check_indices(indices, n):
    idx = np.asarray(list(indices), dtype=int).reshape(-1)
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise IndexError(f"column index out of range [0, {n})")
    if np.unique(idx).size != idx.size:
        raise ValueError("column indices must be distinct")
    return idx


def gram(op, limit=DENSE_LIMIT):
    """G = H^T H for an operator with at most ``limit`` columns."""
    if op.shape[1] > limit:
        raise ValueError(f"gram matrix of size {op.shape[1]} exceeds limit {limit}")
    mat = op.matrix if isinstance(op, DenseOperator) else op.to_dense()
    G = mat.T @ mat
    return 0.5 * (G + G.T)


def min_eigenvalue(G):
    G = np.asarray(G, dtype=float)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise ValueError("expected a square matrix")
    if G.size == 0:
        return np.inf
    scale = max(1.0, np.abs(G).max())
    if not np.allclose(G, G.T, rtol=0, atol=1e-12 * scale):
        raise ValueError("matrix is not symmetric")
    return float(linalg.eigvalsh(G, subset_by_index=[0, 0])[0])


def operator_from_json(obj):
    """Build an operator from ``{"type": "arma", "b", "a", "n"}`` or a dense spec."""
    if isinstance(obj, (str, bytes)):
        obj = json.loads(obj)
    kind = obj.get("type", "arma" if "b" in obj else "dense")
    if kind == "arma":
        return ArmaOperator(obj["b"], obj["a"], obj["n"])
    if kind == "identity":
        return DenseOperator(np.eye(int(obj["n"])))
    if kind == "dense":
        return DenseOperator(np.asarray(obj["matrix"], dtype=float))
    raise ValueError(f"unknown operator type {kind!r}")
