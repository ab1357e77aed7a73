"""Small numerical helpers shared by every module.

Everything here works on plain complex ndarrays.  Conventions:

* matrices are square unless stated otherwise,
* stacks of matrices have shape (k, n, n),
* vec() is row-major (C order), matching the JSON wire format.
"""

import numpy as np

from .errors import NumericalInconsistencyError

DEFAULT_TOL = 1e-9


def dagger(x):
    """Conjugate transpose, batched over leading axes."""
    return np.conj(np.swapaxes(x, -1, -2))


def vec(x):
    """Row-major flattening of a matrix (or a stack of matrices)."""
    if x.ndim == 2:
        return x.reshape(-1)
    return x.reshape(x.shape[0], -1)


def unvec(v, n, m=None):
    """Inverse of vec for an n-by-m matrix (m defaults to n)."""
    if m is None:
        m = n
    return np.asarray(v).reshape(n, m)


def herm(x):
    """Hermitian part, used to scrub rounding noise off matrices that
    are Hermitian in exact arithmetic."""
    return 0.5 * (x + dagger(x))


def mgs(vectors, inner=None, tol=1e-11, out_coeffs=False):
    """Modified Gram-Schmidt with one re-orthogonalization pass.

    vectors: iterable of 1d arrays (all the same length), or a 2d array
    whose rows are the vectors.  inner(a, b) defaults to the standard
    complex dot; it must be conjugate-linear in the first slot.

    Returns the orthonormal rows as a 2d array (possibly empty).  With
    out_coeffs=True also returns, for each kept row, the index of the
    input vector that produced it.
    """
    vecs = np.asarray(vectors, dtype=complex)
    if vecs.ndim == 1:
        vecs = vecs[None, :]
    if inner is None:
        inner = lambda a, b: np.vdot(a, b)
    basis = []
    kept = []
    scale = 0.0
    for idx in range(vecs.shape[0]):
        v = vecs[idx].copy()
        nrm0 = np.sqrt(abs(inner(v, v).real)) if basis or True else 0.0
        scale = max(scale, nrm0)
        for _ in range(2):  # re-orthogonalize: plain MGS loses digits
            for b in basis:
                v = v - inner(b, v) * b
        nrm = np.sqrt(abs(inner(v, v).real))
        if nrm > tol * max(scale, 1.0):
            basis.append(v / nrm)
            kept.append(idx)
    if not basis:
        empty = np.zeros((0, vecs.shape[1]), dtype=complex)
        return (empty, []) if out_coeffs else empty
    out = np.array(basis)
    return (out, kept) if out_coeffs else out


def null_space(a, tol=None):
    """Orthonormal basis (columns) of the null space of a, via SVD."""
    a = np.atleast_2d(np.asarray(a, dtype=complex))
    if a.shape[0] == 0:
        return np.eye(a.shape[1], dtype=complex)
    u, s, vh = np.linalg.svd(a, full_matrices=True)
    if tol is None:
        tol = max(a.shape) * np.finfo(float).eps * (s[0] if s.size else 1.0)
        tol = max(tol, 1e-10)
    rank = int(np.sum(s > tol))
    return vh[rank:].conj().T


def solve_min_norm(a, b, rcond=1e-10):
    """Least-squares solution of a x = b with minimal norm.

    Returns (x, residual) where residual = ||a x - b|| / max(1, ||b||).
    """
    x, *_ = np.linalg.lstsq(a, b, rcond=rcond)
    res = np.linalg.norm(a @ x - b) / max(1.0, np.linalg.norm(b))
    return x, res


def positive_function(x, f, tol=DEFAULT_TOL, min_eig=None):
    """Apply a real function to a positive semidefinite matrix via its
    spectral decomposition.

    Raises if x is visibly non-Hermitian or has an eigenvalue below
    -tol (relative to the largest).  min_eig, when given, additionally
    requires all eigenvalues to exceed min_eig * max_eigenvalue; use it
    for functions like 1/sqrt that blow up at zero.
    """
    x = np.asarray(x, dtype=complex)
    skew = np.linalg.norm(x - dagger(x))
    if skew > tol * max(1.0, np.linalg.norm(x)):
        raise NumericalInconsistencyError(
            "positive_function: matrix is not Hermitian (defect %.3e)" % skew)
    w, u = np.linalg.eigh(herm(x))
    top = max(w[-1], 0.0)
    if w[0] < -tol * max(top, 1.0):
        raise NumericalInconsistencyError(
            "positive_function: negative eigenvalue %.3e" % w[0])
    if min_eig is not None and top > 0 and w[0] < min_eig * top:
        raise NumericalInconsistencyError(
            "positive_function: eigenvalue %.3e below cutoff %.3e"
            % (w[0], min_eig * top))
    w = np.clip(w, 0.0, None)
    return (u * f(w)) @ dagger(u)


def psd_sqrt(x, tol=DEFAULT_TOL):
    return positive_function(x, np.sqrt, tol=tol)


def psd_inv_sqrt(x, tol=DEFAULT_TOL, min_eig=1e-12):
    return positive_function(x, lambda w: 1.0 / np.sqrt(w), tol=tol,
                             min_eig=min_eig)


def psd_inv(x, tol=DEFAULT_TOL, min_eig=1e-12):
    return positive_function(x, lambda w: 1.0 / w, tol=tol, min_eig=min_eig)


def relnorm(x, ref=1.0):
    """Frobenius norm of x scaled by max(1, ||ref||)."""
    r = ref if np.isscalar(ref) else np.linalg.norm(ref)
    return np.linalg.norm(x) / max(1.0, r)
