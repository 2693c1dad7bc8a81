"""Small dense linear-algebra helpers shared by the filter, smoother, and
samplers.

Covariance-sized matrices here are tiny (the hidden dimension is typically
1-4), so eigendecomposition-based routines are cheap and preferred over
anything clever.
"""

import numpy as np
from scipy.linalg import solve_triangular

from .errors import NotPsd, SingularObservationGramian

#: Absolute eigenvalue tolerance for PSD checks on O(1)-scale matrices.
TOL_PSD = 1e-10

#: Strict positive-definiteness floor for filter covariances in backward passes.
TOL_PD_STRICT = 1e-12


def symmetrize(m):
    """Return 0.5 * (m + m^T), transposing the last two axes (stack-safe)."""
    return 0.5 * (m + np.swapaxes(m, -1, -2))


def min_eig(m):
    """Smallest eigenvalue of a symmetric matrix."""
    return float(np.linalg.eigvalsh(symmetrize(m))[0])


def clamp_psd(m, tol=TOL_PSD):
    """Symmetrize ``m`` and clamp negative eigenvalues at zero.

    Eigenvalues below ``-tol`` are considered a numerical breakdown upstream;
    callers that want an error instead should check :func:`min_eig` first.
    Round-off negatives within the tolerance are silently clamped.
    """
    ms = symmetrize(m)
    w, v = np.linalg.eigh(ms)
    if w[0] >= 0.0:
        return ms
    w = np.clip(w, 0.0, None)
    return symmetrize((v * w) @ v.T)


def psd_sqrt(m, tol=TOL_PSD, name="matrix"):
    """Symmetric square root of a PSD matrix via eigendecomposition.

    Eigenvalues are clamped at zero before rooting, so exactly singular
    matrices (rank-deficient noise) are handled. Raises :class:`NotPsd` if the
    smallest eigenvalue is below ``-tol``.
    """
    ms = symmetrize(np.asarray(m, dtype=float))
    w, v = np.linalg.eigh(ms)
    if w[0] < -tol:
        raise NotPsd(name, w[0])
    w = np.clip(w, 0.0, None)
    return symmetrize((v * np.sqrt(w)) @ v.T)


def spd_cholesky(m, t=None):
    """Lower Cholesky factor of an SPD matrix.

    Raises :class:`SingularObservationGramian` tagged with the time ``t`` on
    failure; this is the runtime guard for the invertibility of the
    observational noise Gramian.
    """
    try:
        return np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        raise SingularObservationGramian(t) from None


def chol_solve(chol_lower, b):
    """Solve ``A x = b`` given the lower Cholesky factor of SPD ``A``.

    Never forms the explicit inverse; two triangular solves.
    """
    y = solve_triangular(chol_lower, b, lower=True, check_finite=False)
    return solve_triangular(chol_lower.T, y, lower=False, check_finite=False)


def solve_spd(a, b, t=None):
    """Solve ``a x = b`` for SPD ``a`` by Cholesky factorization."""
    return chol_solve(spd_cholesky(a, t=t), b)
