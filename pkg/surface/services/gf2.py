"""Linear algebra over GF(2) on numpy uint8 arrays."""

import numpy as np


def as_binary(matrix):
    return np.atleast_2d(np.asarray(matrix, dtype=np.uint8) % 2)


def row_reduce(matrix):
    """
    Reduced row echelon form.

    Returns:
        (rref, pivots): the nonzero rows of the reduced matrix and the pivot
        column of each of them
    """
    m = as_binary(matrix).copy()
    n_rows, n_cols = m.shape
    pivots = []
    r = 0
    for c in range(n_cols):
        if r == n_rows:
            break
        hits = np.flatnonzero(m[r:, c])
        if hits.size == 0:
            continue
        p = r + hits[0]
        if p != r:
            m[[r, p]] = m[[p, r]]
        mask = m[:, c].astype(bool)
        mask[r] = False
        m[mask] ^= m[r]
        pivots.append(c)
        r += 1
    return m[:r], pivots


def rank(matrix):
    if np.size(matrix) == 0:
        return 0
    return len(row_reduce(matrix)[1])


def solve(matrix, target):
    """
    One solution x of matrix @ x = target (mod 2), free variables set to 0.

    Returns None when the system is inconsistent.
    """
    a = as_binary(matrix)
    b = np.asarray(target, dtype=np.uint8).reshape(-1, 1) % 2
    rref, pivots = row_reduce(np.hstack([a, b]))
    n_cols = a.shape[1]
    if n_cols in pivots:
        return None
    x = np.zeros(n_cols, dtype=np.uint8)
    for row, col in zip(rref, pivots):
        x[col] = row[-1]
    return x


def in_rowspace(rows, vector):
    """Whether vector is a GF(2) combination of rows."""
    rows = as_binary(rows)
    if rows.shape[0] == 0 or rows.shape[1] == 0:
        return not np.any(np.asarray(vector) % 2)
    return solve(rows.T, vector) is not None
