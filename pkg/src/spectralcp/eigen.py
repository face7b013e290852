"""Dense symmetric eigendecomposition via cyclic Jacobi rotations.

Hand-rolled rather than delegated to LAPACK so the output is bitwise
reproducible across platforms and the sign convention is under our control.
Accurate and fast enough for the target sizes (n <= ~1000); test oracles
compare against numpy.linalg.eigh independently.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NumericError
from .validation import frozen


@dataclass(frozen=True)
class SpectralBasis:
    """Eigenpairs of a symmetric matrix, eigenvalues ascending.

    Column i of ``eigenvectors`` pairs with ``eigenvalues[i]``. Each
    eigenvector is normalized so its first entry larger than 1e-12 in
    magnitude is positive, which makes golden-file tests stable.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def n_nodes(self):
        return self.eigenvalues.shape[0]

    @property
    def lambda_max(self):
        return float(self.eigenvalues[-1])


def jacobi_eigh(matrix, max_sweeps=100, rel_tol=1e-12):
    """Eigendecompose a dense symmetric matrix with cyclic Jacobi sweeps.

    Sweeps rotate every off-diagonal pair (p, q) in row-major order until
    the off-diagonal Frobenius norm falls below ``rel_tol`` times the
    Frobenius norm of the input.

    Returns
    -------
    (eigenvalues, eigenvectors)
        Ascending eigenvalues and the matching orthonormal columns.

    Raises
    ------
    NumericError
        If the off-diagonal norm is still above threshold after
        ``max_sweeps`` sweeps.
    """
    a = np.array(matrix, dtype=float)
    n = a.shape[0]
    if a.ndim != 2 or a.shape[1] != n:
        raise ValueError(f"matrix must be square, got shape {a.shape}")
    if not np.allclose(a, a.T, atol=1e-10):
        raise ValueError("matrix must be symmetric")
    a = 0.5 * (a + a.T)
    v = np.eye(n)
    if n == 1:
        return a[0, 0].reshape(1), v

    fro = np.linalg.norm(a)
    threshold = rel_tol * max(fro, 1.0)

    def offdiag_norm(m):
        off = m - np.diag(np.diag(m))
        return np.linalg.norm(off)

    converged = offdiag_norm(a) <= threshold
    for _ in range(max_sweeps):
        if converged:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.hypot(1.0, theta)) if theta != 0 else 1.0
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                a[p, q] = 0.0
                a[q, p] = 0.0
                vec_p = v[:, p].copy()
                vec_q = v[:, q].copy()
                v[:, p] = c * vec_p - s * vec_q
                v[:, q] = s * vec_p + c * vec_q
        converged = offdiag_norm(a) <= threshold
    if not converged:
        raise NumericError(
            f"Jacobi eigensolver did not converge in {max_sweeps} sweeps; "
            f"off-diagonal norm {offdiag_norm(a):.3e} (threshold {threshold:.3e})"
        )

    eigenvalues = np.diag(a).copy()
    order = np.argsort(eigenvalues, kind="stable")
    eigenvalues = eigenvalues[order]
    vectors = v[:, order]
    return eigenvalues, _fix_signs(vectors)


def _fix_signs(vectors, tol=1e-12):
    vectors = vectors.copy()
    for col in range(vectors.shape[1]):
        column = vectors[:, col]
        nonzero = np.nonzero(np.abs(column) > tol)[0]
        if nonzero.size and column[nonzero[0]] < 0:
            vectors[:, col] = -column
    return vectors


def eigendecompose(laplacian, max_sweeps=100):
    """Spectral basis of a normalized Laplacian."""
    eigenvalues, eigenvectors = jacobi_eigh(laplacian.matrix, max_sweeps=max_sweeps)
    return SpectralBasis(eigenvalues=frozen(eigenvalues), eigenvectors=frozen(eigenvectors))
