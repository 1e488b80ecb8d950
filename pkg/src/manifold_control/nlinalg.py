"""Small dense linear algebra: generalized cross product, det, solves, FD Jacobians.

Sizes here are tiny (n <= 12), so the elimination loops run on plain Python
lists; numpy arrays are accepted and returned at the boundaries.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import DimensionError, SingularMatrixError

SINGULAR_RTOL = 1e-12
MAX_DET_SIZE = 12


def _rows(m) -> list[list[float]]:
    return [[float(v) for v in row] for row in m]


def _lu_det(a: list[list[float]]) -> float:
    n = len(a)
    d = 1.0
    for c in range(n):
        p = c
        best = abs(a[c][c])
        for r in range(c + 1, n):
            if abs(a[r][c]) > best:
                p, best = r, abs(a[r][c])
        if best == 0.0:
            return 0.0
        if p != c:
            a[c], a[p] = a[p], a[c]
            d = -d
        pivot_row = a[c]
        piv = pivot_row[c]
        d *= piv
        for r in range(c + 1, n):
            row = a[r]
            f = row[c] / piv
            if f != 0.0:
                for k in range(c + 1, n):
                    row[k] -= f * pivot_row[k]
    return d


def det(m) -> float:
    """Determinant by LU with partial pivoting; singular input gives 0."""
    a = _rows(m)
    n = len(a)
    if any(len(row) != n for row in a):
        raise DimensionError(f"det needs a square matrix, got {n}x{len(a[0]) if a else 0}")
    if n > MAX_DET_SIZE:
        raise DimensionError(f"matrix too large for det: {n} > {MAX_DET_SIZE}")
    return _lu_det(a)


def cross_nd(rows) -> np.ndarray:
    """Vector orthogonal to the n-1 given rows of length n.

    Component i is the cofactor of the basis entry e_i when the rows sit under
    a symbolic basis row: ``(-1)**i * det(rows without column i)`` (0-based i).
    """
    a = _rows(rows)
    if not a:
        raise DimensionError("cross_nd needs at least one row")
    n = len(a[0])
    if n < 2 or len(a) != n - 1 or any(len(row) != n for row in a):
        raise DimensionError(f"cross_nd needs {max(n - 1, 1)} rows of length n >= 2, got {len(a)}x{n}")
    return np.array(cross_lists(a))


def cross_lists(a: list[list[float]]) -> list[float]:
    """cross_nd on plain lists, without validation."""
    n = len(a[0])
    if n == 2:
        return [a[0][1], -a[0][0]]
    if n == 3:
        (a0, a1, a2), (b0, b1, b2) = a
        return [a1 * b2 - a2 * b1, -(a0 * b2 - a2 * b0), a0 * b1 - a1 * b0]
    out = []
    for i in range(n):
        minor = [row[:i] + row[i + 1 :] for row in a]
        d = _lu_det(minor)
        out.append(-d if i % 2 else d)
    return out


def solve_linear(m, rhs) -> np.ndarray:
    """Solve ``m @ x = rhs`` with partial pivoting.

    Raises SingularMatrixError when a pivot falls below 1e-12 * ||m||_inf.
    """
    a = _rows(m)
    b = [float(v) for v in rhs]
    n = len(a)
    if any(len(row) != n for row in a) or len(b) != n:
        raise DimensionError(f"solve_linear needs n x n matrix and length-n rhs, got {n} rows, rhs {len(b)}")
    if n == 0:
        return np.zeros(0)
    norm = max(sum(abs(v) for v in row) for row in a)
    tiny = SINGULAR_RTOL * norm
    for c in range(n):
        p = max(range(c, n), key=lambda r: abs(a[r][c]))
        if abs(a[p][c]) <= tiny or norm == 0.0:
            raise SingularMatrixError(f"matrix is singular to working precision (pivot {a[p][c]!r} in column {c})")
        if p != c:
            a[c], a[p] = a[p], a[c]
            b[c], b[p] = b[p], b[c]
        pivot_row = a[c]
        piv = pivot_row[c]
        for r in range(c + 1, n):
            row = a[r]
            f = row[c] / piv
            if f != 0.0:
                for k in range(c + 1, n):
                    row[k] -= f * pivot_row[k]
                b[r] -= f * b[c]
    x = [0.0] * n
    for i in range(n - 1, -1, -1):
        s = b[i]
        row = a[i]
        for k in range(i + 1, n):
            s -= row[k] * x[k]
        x[i] = s / row[i]
    return np.array(x)


def fd_step(xi: float) -> float:
    return max(1e-6, 1e-6 * abs(xi))


def jacobian_fd(f: Callable[[np.ndarray], Sequence[float]], point: Sequence[float]) -> np.ndarray:
    """Central-difference Jacobian, entry (i, j) ~ d f_i / d x_j."""
    x = np.array(point, dtype=float)
    cols = []
    for j in range(x.size):
        h = fd_step(x[j])
        xp = x.copy()
        xm = x.copy()
        xp[j] += h
        xm[j] -= h
        fp = np.asarray(f(xp), dtype=float).ravel()
        fm = np.asarray(f(xm), dtype=float).ravel()
        cols.append((fp - fm) / (xp[j] - xm[j]))
    if not cols:
        return np.zeros((np.asarray(f(x)).size, 0))
    return np.column_stack(cols)
