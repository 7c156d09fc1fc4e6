"""Dense structured linear algebra used throughout the package.

Kronecker products, orthogonal projections, Moore-Penrose pseudo-inverses and
SPD functional calculus.  All functions are pure; symmetric inputs are
re-symmetrized before any eigendecomposition so round-off asymmetry cannot
accumulate over long sampling runs.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

# Relative tolerance for accepting a matrix as symmetric.
SYM_RTOL = 1e-8
# Eigenvalues of a nominally PSD matrix above -EIG_CLAMP_RTOL * gmax are
# clamped to zero; float eigensolvers routinely return tiny negatives.
EIG_CLAMP_RTOL = 1e-10
# Relative threshold on gmin/gmax of a Gram matrix for "full column rank".
RANK_RTOL = 1e-10


class NotSpdError(ValueError):
    """Raised when a matrix required to be symmetric positive definite is not."""


class NotSymmetricError(ValueError):
    """Raised when a matrix required to be symmetric is not."""


def symmetrize(m):
    """Return (m + m.T) / 2."""
    m = np.asarray(m, dtype=float)
    return (m + m.T) / 2.0


def require_symmetric(m, name="matrix"):
    """Validate symmetry to relative tolerance and return the symmetrized copy."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NotSymmetricError(f"{name} must be square, got shape {m.shape}")
    scale = np.linalg.norm(m)
    if np.linalg.norm(m - m.T) > SYM_RTOL * max(scale, 1e-300):
        raise NotSymmetricError(f"{name} is not symmetric to tolerance")
    return symmetrize(m)


def as_spd(m, name="matrix"):
    """Validate that ``m`` is symmetric positive definite.

    Positive definiteness is decided by a Cholesky factorization of the
    symmetrized matrix.  Returns the symmetrized array.
    """
    m = require_symmetric(m, name)
    if not np.all(np.isfinite(m)):
        raise NotSpdError(f"{name} has non-finite entries")
    try:
        scipy.linalg.cholesky(m, lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise NotSpdError(f"{name} is not positive definite") from exc
    return m


def as_spsd(m, name="matrix"):
    """Validate that ``m`` is symmetric positive semi-definite.

    Eigenvalues in [-EIG_CLAMP_RTOL * gmax, 0) are clamped to zero and the
    matrix reconstructed; anything more negative raises ``NotSpdError``.
    """
    m = require_symmetric(m, name)
    if not np.all(np.isfinite(m)):
        raise NotSpdError(f"{name} has non-finite entries")
    w, v = np.linalg.eigh(m)
    gmax = max(w[-1], 0.0)
    if w[0] < -EIG_CLAMP_RTOL * max(gmax, 1e-300):
        raise NotSpdError(f"{name} has negative eigenvalue {w[0]:.3e}")
    if w[0] < 0.0:
        w = np.clip(w, 0.0, None)
        m = symmetrize((v * w) @ v.T)
    return m


def kron(a, b):
    """Kronecker product with block (i, j) equal to a[i, j] * b."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError("kron expects 2-D arrays")
    return np.kron(a, b)


def pinv(m):
    """Moore-Penrose pseudo-inverse via SVD.

    Singular values below ``max(rows, cols) * eps * sigma_max`` are treated
    as zero, the standard rank decision.
    """
    m = np.asarray(m, dtype=float)
    rcond = max(m.shape) * np.finfo(float).eps
    return np.linalg.pinv(m, rcond=rcond)


def proj(m):
    """Orthogonal projections onto the column space of ``m`` and its complement.

    Parameters
    ----------
    m : ndarray, shape (n, k)
        Any real matrix; rank deficiency is handled by a rank-revealing SVD.
        ``k = 0`` is allowed and yields (0, I).

    Returns
    -------
    (P, Q) : pair of (n, n) ndarrays
        ``P`` projects onto span(m), ``Q = I - P`` onto its orthogonal
        complement.  Both are symmetric and idempotent.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2:
        raise ValueError("proj expects a 2-D array")
    n = m.shape[0]
    if m.shape[1] == 0:
        return np.zeros((n, n)), np.eye(n)
    u, s, _ = np.linalg.svd(m, full_matrices=False)
    cutoff = max(m.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    rank = int(np.sum(s > cutoff))
    ur = u[:, :rank]
    p = symmetrize(ur @ ur.T)
    q = symmetrize(np.eye(n) - p)
    return p, q


def residualize(m, basis):
    """Apply the projection off span(basis) to ``m`` without forming Q densely.

    Equivalent to ``proj(basis)[1] @ m`` but O(n k^2); used on the long-data
    paths where an n-by-n projector would be wasteful.
    """
    m = np.asarray(m, dtype=float)
    if basis is None:
        return m
    basis = np.asarray(basis, dtype=float)
    if basis.ndim != 2 or basis.shape[1] == 0:
        return m
    coef, *_ = np.linalg.lstsq(basis, m, rcond=None)
    return m - basis @ coef


def spd_power(g, t):
    """Real power of an SPD matrix via its spectral decomposition."""
    g = require_symmetric(g, "spd_power argument")
    w, v = np.linalg.eigh(g)
    if w[0] <= 0.0:
        raise NotSpdError(f"spd_power requires SPD input, gmin={w[0]:.3e}")
    return symmetrize((v * w**t) @ v.T)


def extreme_eigs(g):
    """Smallest and largest eigenvalues of a symmetric matrix."""
    g = require_symmetric(g, "extreme_eigs argument")
    w = np.linalg.eigvalsh(g)
    return float(w[0]), float(w[-1])


def spectral_norm(m):
    """Largest singular value, computed from the Gram matrix of the smaller side."""
    m = np.asarray(m, dtype=float)
    if m.size == 0:
        return 0.0
    gram = m @ m.T if m.shape[0] <= m.shape[1] else m.T @ m
    w = np.linalg.eigvalsh(symmetrize(gram))
    return float(np.sqrt(max(w[-1], 0.0)))


def has_full_column_rank(m):
    """Decide full column rank by gmin/gmax of the Gram matrix against RANK_RTOL."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2:
        raise ValueError("expected a 2-D array")
    if m.shape[1] == 0:
        return True
    if m.shape[0] < m.shape[1]:
        return False
    gmin, gmax = extreme_eigs(m.T @ m)
    if gmax <= 0.0:
        return False
    return gmin / gmax > RANK_RTOL


def solve_spd(a, b):
    """Solve a x = b for SPD ``a`` by Cholesky; raises NotSpdError on failure."""
    a = symmetrize(a)
    try:
        cho = scipy.linalg.cho_factor(a, lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise NotSpdError("matrix in solve_spd is not positive definite") from exc
    return scipy.linalg.cho_solve(cho, np.asarray(b, dtype=float))


def inv_spd(a):
    """Inverse of an SPD matrix via Cholesky."""
    a = np.asarray(a, dtype=float)
    return symmetrize(solve_spd(a, np.eye(a.shape[0])))


def logdet_spd(a):
    """log |a| for SPD ``a`` via Cholesky; raises NotSpdError otherwise."""
    a = symmetrize(a)
    try:
        l = scipy.linalg.cholesky(a, lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise NotSpdError("matrix in logdet_spd is not positive definite") from exc
    return 2.0 * float(np.sum(np.log(np.diag(l))))
