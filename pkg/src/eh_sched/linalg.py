"""Row-vector dense solves, ``x @ A = b``, via LU with partial pivoting."""

import warnings

import numpy as np
import scipy.linalg

PIVOT_TOL = 1e-12


class SingularMatrixError(np.linalg.LinAlgError):
    def __init__(self, column: int, pivot: float, context: str = ""):
        self.column = column
        self.pivot = pivot
        msg = f"singular matrix: pivot {pivot:.3e} in column {column}"
        if context:
            msg = f"{msg} ({context})"
        super().__init__(msg)


def solve_dense_linear(A, b, context: str = "") -> np.ndarray:
    """Return ``x`` with ``x @ A == b``.

    ``A`` is factored as ``P L U`` (LAPACK getrf); a pivot with magnitude
    below ``PIVOT_TOL`` raises :class:`SingularMatrixError` naming the column.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"A must be square, got shape {A.shape}")
    if b.shape != (A.shape[0],):
        raise ValueError(f"b must have shape ({A.shape[0]},), got {b.shape}")
    with warnings.catch_warnings():
        # singularity is reported below with the offending column
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(A, check_finite=True)
    diag = np.abs(np.diag(lu))
    bad = np.flatnonzero(diag < PIVOT_TOL)
    if bad.size:
        k = int(bad[0])
        raise SingularMatrixError(k, float(diag[k]), context)
    # trans=1 solves A^T y = b, i.e. y^T A = b^T
    return scipy.linalg.lu_solve((lu, piv), b, trans=1)
