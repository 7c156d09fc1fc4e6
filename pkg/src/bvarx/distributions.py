"""Samplers and log-densities for the three conditional families of the
collapsed Gibbs sweep: inverse Wishart, matrix normal, and a Gaussian given
by natural parameters (precision matrix and shift vector).

Random state
------------
All draws go through :class:`RngStream`, a thin wrapper around numpy's PCG64
generator keyed by ``(seed, stream path)`` via ``SeedSequence``.  Identical
``(seed, stream)`` produce bit-identical draw sequences; ``child(i)`` derives
an independent stream, so per-chain and per-component streams never collide.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.special import multigammaln

from .linalg import as_spd, symmetrize


@dataclass
class RngStream:
    """Seedable, splittable random stream (PCG64 under a SeedSequence key).

    Parameters
    ----------
    seed : int
        Base entropy, any 64-bit integer.
    path : int or tuple of int
        Stream identifier; an integer k (or ``(k,)``) selects stream k and
        children extend the tuple.  Distinct paths give streams independent
        by construction.
    """

    seed: int
    path: tuple = (0,)
    _gen: np.random.Generator = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if isinstance(self.path, int):
            self.path = (self.path,)
        self.path = tuple(int(v) for v in self.path)
        if self._gen is None:
            ss = np.random.SeedSequence(self.seed, spawn_key=self.path)
            self._gen = np.random.Generator(np.random.PCG64(ss))

    @property
    def generator(self):
        return self._gen

    def child(self, i):
        """Independent derived stream; deterministic in (seed, path, i)."""
        return RngStream(self.seed, tuple(self.path) + (int(i),))


@dataclass(frozen=True)
class InvWishart:
    """Inverse Wishart with density proportional to
    ``|x|^{-(dof + r + 1)/2} etr(-scale x^{-1} / 2)``.

    The normalizer is ``|scale|^{dof/2} / (2^{dof r / 2} Gamma_r(dof / 2))``,
    so ``dof > r - 1`` is required for a proper density and the mean is
    ``scale / (dof - r - 1)`` when ``dof > r + 1``.
    """

    scale: np.ndarray
    dof: float

    def __post_init__(self):
        object.__setattr__(self, "scale", as_spd(self.scale, "inverse Wishart scale"))
        r = self.scale.shape[0]
        if not self.dof > r - 1:
            raise ValueError(f"improper inverse Wishart: dof={self.dof} <= r-1={r - 1}")

    @property
    def dim(self):
        return self.scale.shape[0]

    def mean(self):
        r = self.dim
        if not self.dof > r + 1:
            raise ValueError("mean requires dof > r + 1")
        return self.scale / (self.dof - r - 1)


@dataclass(frozen=True)
class MatrixNormal:
    """Matrix normal: vec of a draw is N(vec(mean), col_scale kron row_scale)."""

    mean: np.ndarray
    row_scale: np.ndarray
    col_scale: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "row_scale", as_spd(self.row_scale, "row scale"))
        object.__setattr__(self, "col_scale", as_spd(self.col_scale, "col scale"))
        a, b = mean.shape
        if self.row_scale.shape[0] != a or self.col_scale.shape[0] != b:
            raise ValueError(
                f"scale dims {self.row_scale.shape[0]}x{self.col_scale.shape[0]} "
                f"do not match mean shape {mean.shape}"
            )


@dataclass(frozen=True)
class PrecisionGaussian:
    """Gaussian in natural parameters: N(precision^{-1} shift, precision^{-1}).

    The Cholesky factor of the precision is computed once at construction;
    a failed factorization signals a non-SPD precision.  Neither the mean
    nor the covariance is ever formed by dense inversion.
    """

    precision: np.ndarray
    shift: np.ndarray
    _chol: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        precision = symmetrize(self.precision)
        shift = np.asarray(self.shift, dtype=float).ravel()
        if precision.shape[0] != shift.shape[0]:
            raise ValueError("precision/shift dimension mismatch")
        try:
            chol = scipy.linalg.cholesky(precision, lower=True)
        except scipy.linalg.LinAlgError as exc:
            from .linalg import NotSpdError

            raise NotSpdError("precision matrix is not positive definite") from exc
        object.__setattr__(self, "precision", precision)
        object.__setattr__(self, "shift", shift)
        object.__setattr__(self, "_chol", chol)

    def mean(self):
        """Solve precision * u = shift through the cached Cholesky factor."""
        l = self._chol
        y = scipy.linalg.solve_triangular(l, self.shift, lower=True)
        return scipy.linalg.solve_triangular(l.T, y, lower=False)


def draw_inv_wishart(d: InvWishart, rng: RngStream):
    """One inverse Wishart draw via the Bartlett decomposition.

    A Wishart(scale^{-1}, dof) variate is built as (L A)(L A)^T with L the
    Cholesky factor of scale^{-1} and A lower triangular with chi entries on
    the diagonal; the draw is its inverse, obtained by triangular solves.
    The construction is scale-equivariant draw by draw: multiplying the
    scale by k multiplies the draw by k under the same stream.
    """
    r = d.dim
    gen = rng.generator
    # Fixed consumption order: r chi-square values, then r(r-1)/2 normals.
    diag = np.sqrt(gen.chisquare(d.dof - np.arange(r)))
    a = np.zeros((r, r))
    a[np.diag_indices(r)] = diag
    if r > 1:
        a[np.tril_indices(r, k=-1)] = gen.standard_normal(r * (r - 1) // 2)

    l_scale = scipy.linalg.cholesky(d.scale, lower=True)
    # (L^{-T} A)(L^{-T} A)^T is Wishart(scale^{-1}, dof); the draw is its
    # inverse, assembled from triangular solves as (A^{-1} L^T)^T (A^{-1} L^T).
    half = scipy.linalg.solve_triangular(a, l_scale.T, lower=True)
    return symmetrize(half.T @ half)


def draw_matrix_normal(d: MatrixNormal, rng: RngStream):
    """One matrix normal draw: mean + chol(row) G chol(col)^T, G iid N(0,1)."""
    a, b = d.mean.shape
    g = rng.generator.standard_normal((a, b))
    lu = scipy.linalg.cholesky(d.row_scale, lower=True)
    lv = scipy.linalg.cholesky(d.col_scale, lower=True)
    return d.mean + lu @ g @ lv.T


def draw_precision_gaussian(d: PrecisionGaussian, rng: RngStream):
    """One draw u + L^{-T} z with precision = L L^T and z standard normal."""
    z = rng.generator.standard_normal(d.shift.shape[0])
    u = d.mean()
    return u + scipy.linalg.solve_triangular(d._chol.T, z, lower=False)


def logpdf_inv_wishart(d: InvWishart, x):
    """Exact log density of ``x`` under ``d``, including the normalizer."""
    x = as_spd(x, "inverse Wishart argument")
    r = d.dim
    if x.shape[0] != r:
        raise ValueError("dimension mismatch")
    lx = scipy.linalg.cholesky(x, lower=True)
    ls = scipy.linalg.cholesky(d.scale, lower=True)
    logdet_x = 2.0 * float(np.sum(np.log(np.diag(lx))))
    logdet_scale = 2.0 * float(np.sum(np.log(np.diag(ls))))
    # tr(x^{-1} scale) through triangular solves only.
    half = scipy.linalg.solve_triangular(lx, ls, lower=True)
    trace_term = float(np.sum(half * half))
    c = d.dof
    return (
        0.5 * c * logdet_scale
        - 0.5 * c * r * np.log(2.0)
        - multigammaln(0.5 * c, r)
        - 0.5 * (c + r + 1) * logdet_x
        - 0.5 * trace_term
    )
