"""Dense matrix/vector helpers shared by the filter, design and LP code.

Matrices and vectors are plain ``numpy`` float arrays (2-D and 1-D).  The
helpers here add the validation and the few primitives whose behaviour we
want pinned down exactly (pivoting inverse, norms).
"""

import numpy as np

from .errors import DimensionError, SingularMatrixError

PIVOT_TOL = 1e-12


def as_mat(a, name="matrix"):
    m = np.array(a, dtype=float, ndmin=2)
    if m.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} has non-finite entries")
    return m


def as_vec(v, name="vector"):
    x = np.array(v, dtype=float).reshape(-1)
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} has non-finite entries")
    return x


def mat_mul(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape[-1] != b.shape[0]:
        raise DimensionError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def mat_inv(a):
    """Invert a square matrix by Gauss-Jordan elimination with partial pivoting.

    Raises:
        DimensionError: ``a`` is not square.
        SingularMatrixError: a pivot falls below ``PIVOT_TOL`` in magnitude.
    """
    a = as_mat(a)
    n, cols = a.shape
    if n != cols:
        raise DimensionError(f"cannot invert non-square {a.shape}")
    aug = np.hstack([a, np.eye(n)])
    for col in range(n):
        piv = col + int(np.argmax(np.abs(aug[col:, col])))
        if abs(aug[piv, col]) < PIVOT_TOL:
            raise SingularMatrixError(f"pivot {aug[piv, col]:.3e} in column {col}")
        if piv != col:
            aug[[col, piv]] = aug[[piv, col]]
        aug[col] /= aug[col, col]
        for r in range(n):
            if r != col and aug[r, col] != 0.0:
                aug[r] -= aug[r, col] * aug[col]
    return aug[:, n:]


def l1_norm(v):
    return float(np.sum(np.abs(v)))


def l2_norm_sq(v):
    v = np.asarray(v, dtype=float)
    return float(np.dot(v.reshape(-1), v.reshape(-1)))


def lp_norm(v, p):
    """``||v||_p`` for p in {1, 2}."""
    if p == 1:
        return l1_norm(v)
    if p == 2:
        return float(np.sqrt(l2_norm_sq(v)))
    raise ValueError(f"unsupported norm p={p}")


def symmetrize(a):
    return 0.5 * (a + a.T)


def is_diagonal(a, tol=0.0):
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        return False
    off = a - np.diag(np.diag(a))
    return bool(np.all(np.abs(off) <= tol))


def min_eig_2x2(a):
    """Smallest eigenvalue of a symmetric 2x2 matrix, closed form."""
    p, q, r = a[0, 0], a[0, 1], a[1, 1]
    mid = 0.5 * (p + r)
    rad = np.hypot(0.5 * (p - r), q)
    return float(mid - rad)


def psd_factor(cov):
    """Return ``L`` with ``L @ L.T == cov`` for a symmetric PSD ``cov``.

    Uses an eigen-decomposition so singular (including all-zero) covariances
    are accepted; tiny negative eigenvalues from round-off are clipped.
    """
    cov = symmetrize(as_mat(cov))
    w, v = np.linalg.eigh(cov)
    if w.min() < -1e-10 * max(1.0, abs(w).max()):
        raise ValueError("covariance is not positive semidefinite")
    return v * np.sqrt(np.clip(w, 0.0, None))
