"""VARX data model, priors, design construction and posterior density.

The observation model is, for t = 1..n,

    Y_t = A_1' Y_{t-1} + ... + A_q' Y_{t-q} + B' X_t + U_t,   U_t ~ N(0, Sigma),

with Y_t an r-vector, X_t a p-vector of strongly exogenous predictors, and a
known presample Y_0, ..., Y_{-q+1}.  Stacking rows gives Y (n x r),
X (n x p), the lag design Z (n x qr) with row t equal to
[Y_{t-1}', ..., Y_{t-q}'], the coefficient block A (qr x r) and
alpha = vec(A).

Priors: alpha has a Gaussian kernel with mean m and precision C (possibly
singular, C = 0 giving a flat prior); B is flat; Sigma has density
proportional to |Sigma|^{-a/2} etr(-D Sigma^{-1} / 2).  When p = 0 the
predictor projection Q_X is the identity throughout.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .distributions import RngStream
from .linalg import (
    NotSpdError,
    as_spsd,
    has_full_column_rank,
    logdet_spd,
    residualize,
    symmetrize,
)


class NumericDataError(ValueError):
    """Raised when observed data contain non-finite values."""


@dataclass(frozen=True)
class VarxDims:
    """Problem dimensions: sample size n, process dimension r, predictor
    count p (0 allowed), lag order q.  Requires n > p."""

    n: int
    r: int
    p: int
    q: int

    def __post_init__(self):
        if self.n < 1 or self.r < 1 or self.q < 1 or self.p < 0:
            raise ValueError(f"invalid dimensions {self}")
        if not self.n > self.p:
            raise ValueError(f"need n > p, got n={self.n}, p={self.p}")

    @property
    def qr(self):
        return self.q * self.r

    @property
    def alpha_dim(self):
        return self.q * self.r * self.r


@dataclass(frozen=True)
class Hyperparams:
    """Prior quantities (m, C, D, a) with cached definiteness flags.

    ``c`` is the qr^2 x qr^2 prior precision of alpha (SPSD; SPD makes the
    alpha prior proper), ``d`` the r x r prior scale for Sigma (SPSD), and
    ``a >= 0`` the prior exponent on |Sigma|.
    """

    m: np.ndarray
    c: np.ndarray
    d: np.ndarray
    a: float
    c_spd: bool = field(init=False)
    d_spd: bool = field(init=False)

    def __post_init__(self):
        m = np.asarray(self.m, dtype=float).ravel()
        c = as_spsd(self.c, "prior precision C")
        d = as_spsd(self.d, "prior scale D")
        if self.a < 0:
            raise ValueError("hyperparameter a must be >= 0")
        if c.shape[0] != m.shape[0]:
            raise ValueError("C and m dimension mismatch")
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "c_spd", _is_spd(c))
        object.__setattr__(self, "d_spd", _is_spd(d))

    @classmethod
    def standard_normal_alpha(cls, dims: VarxDims, c_scale=1.0, d_scale=0.0, a=0.0):
        """Gaussian alpha prior centered at zero with precision c_scale * I,
        and |Sigma|^{-a/2} etr(-d_scale I Sigma^{-1} / 2) on Sigma."""
        k = dims.alpha_dim
        return cls(
            m=np.zeros(k),
            c=c_scale * np.eye(k),
            d=d_scale * np.eye(dims.r),
            a=float(a),
        )

    @classmethod
    def flat(cls, dims: VarxDims, d_scale=0.0, a=0.0):
        """Flat (improper) alpha prior, C = 0; the conjugate direct-sampling
        regime when the design has full column rank."""
        k = dims.alpha_dim
        return cls(m=np.zeros(k), c=np.zeros((k, k)), d=d_scale * np.eye(dims.r), a=float(a))


def _is_spd(m):
    if m.size == 0:
        return False
    try:
        linalg.as_spd(m)
        return True
    except (NotSpdError, linalg.NotSymmetricError):
        return False


@dataclass(frozen=True)
class Dataset:
    """Observed data plus the derived lag design.

    ``presample`` holds the q known pre-period rows in chronological order
    (oldest first, so its last row is Y_0).  ``z_design`` row t is
    [Y_{t-1}', ..., Y_{t-q}'] exactly.
    """

    presample: np.ndarray
    y_obs: np.ndarray
    x_obs: np.ndarray
    z_design: np.ndarray

    @property
    def dims(self):
        return VarxDims(
            n=self.y_obs.shape[0],
            r=self.y_obs.shape[1],
            p=self.x_obs.shape[1],
            q=self.presample.shape[0],
        )

    def prefix(self, n):
        """Dataset using only the n first observations (same presample)."""
        if not 1 <= n <= self.y_obs.shape[0]:
            raise ValueError(f"prefix length {n} out of range")
        return Dataset(
            presample=self.presample,
            y_obs=self.y_obs[:n],
            x_obs=self.x_obs[:n],
            z_design=self.z_design[:n],
        )


@dataclass(frozen=True)
class LeastSquares:
    """Least-squares quantities of the predictor-adjusted regression.

    ``a_hat`` solves the normal equations (Z'Q_X Z) a_hat = Z'Q_X Y via the
    minimum-norm solution; ``resid_gram`` is Y'Q_{[Z,X]}Y and ``qxz_gram``
    is Z'Q_X Z.
    """

    a_hat: np.ndarray
    alpha_hat: np.ndarray
    resid_gram: np.ndarray
    qxz_gram: np.ndarray


@dataclass(frozen=True)
class TrueParams:
    """Generating parameters returned alongside simulated data."""

    a_mat: np.ndarray
    b_mat: np.ndarray
    sigma: np.ndarray


@dataclass(frozen=True)
class ProprietyVerdict:
    """Outcome of the two posterior-propriety condition sets.

    Set 1: D SPD, X full column rank, n + a > 2r + p, proper alpha prior
    (C SPD).  Set 2: [Y, Z, X] full column rank, n + a > (2+q)r + p,
    bounded alpha prior (always true for the Gaussian kernel).
    """

    condition_set_1: bool
    condition_set_2: bool
    details: dict

    @property
    def proper(self):
        return self.condition_set_1 or self.condition_set_2

    def failing_clauses(self):
        return sorted(k for k, v in self.details.items() if not v)


def vec(m):
    """Column-stacking vectorization."""
    return np.asarray(m, dtype=float).ravel(order="F")


def unvec(v, rows, cols):
    return np.asarray(v, dtype=float).reshape((rows, cols), order="F")


def build_design(presample, y_obs, x_obs=None, dims=None):
    """Assemble the lag design Z from the presample and observed series.

    Parameters
    ----------
    presample : ndarray, shape (q, r)
        Known pre-period rows in chronological order (last row is Y_0).
    y_obs : ndarray, shape (n, r)
    x_obs : ndarray, shape (n, p) or None
        None or zero columns means no predictors (Q_X = identity).
    dims : VarxDims, optional
        If given, shapes are validated against it.

    Returns
    -------
    Dataset
    """
    presample = np.atleast_2d(np.asarray(presample, dtype=float))
    y_obs = np.atleast_2d(np.asarray(y_obs, dtype=float))
    n, r = y_obs.shape
    if x_obs is None:
        x_obs = np.zeros((n, 0))
    x_obs = np.asarray(x_obs, dtype=float)
    if x_obs.ndim == 1:
        x_obs = x_obs[:, None]
    q = presample.shape[0]
    if presample.shape[1] != r:
        raise ValueError(
            f"presample width {presample.shape[1]} does not match r={r}"
        )
    if x_obs.shape[0] != n:
        raise ValueError("x_obs and y_obs row counts differ")
    if dims is not None:
        got = (n, r, x_obs.shape[1], q)
        want = (dims.n, dims.r, dims.p, dims.q)
        if got != want:
            raise ValueError(f"data shapes {got} do not match dims {want}")
    for name, arr in (("presample", presample), ("y_obs", y_obs), ("x_obs", x_obs)):
        if not np.all(np.isfinite(arr)):
            raise NumericDataError(f"{name} contains non-finite values")

    full = np.vstack([presample, y_obs])  # row i is Y_{i - q + 1}
    z = np.empty((n, q * r))
    for j in range(1, q + 1):
        # Lag-j block of Z_t is Y_{t-j} = full row (t - 1) + (q - j).
        z[:, (j - 1) * r : j * r] = full[q - j : q - j + n]
    return Dataset(presample=presample, y_obs=y_obs, x_obs=x_obs, z_design=z)


def least_squares(ds: Dataset) -> LeastSquares:
    """Predictor-adjusted least squares and the Gram matrices used downstream.

    a_hat is computed as the minimum-norm least-squares fit of Q_X Y on
    Q_X Z, which coincides with pinv(Z'Q_X Z) Z'Q_X Y; rank deficiency is
    therefore handled without special cases.
    """
    qx_y = residualize(ds.y_obs, ds.x_obs if ds.dims.p else None)
    qx_z = residualize(ds.z_design, ds.x_obs if ds.dims.p else None)
    a_hat, *_ = np.linalg.lstsq(qx_z, qx_y, rcond=None)
    zx = np.hstack([ds.z_design, ds.x_obs])
    resid = residualize(ds.y_obs, zx)
    return LeastSquares(
        a_hat=a_hat,
        alpha_hat=vec(a_hat),
        resid_gram=symmetrize(resid.T @ resid),
        qxz_gram=symmetrize(qx_z.T @ qx_z),
    )


def check_propriety(dims: VarxDims, hyper: Hyperparams, ds: Dataset) -> ProprietyVerdict:
    """Evaluate both posterior-propriety condition sets clause by clause."""
    n, r, p, q = dims.n, dims.r, dims.p, dims.q
    x_rank = has_full_column_rank(ds.x_obs) if p else True
    yzx = np.hstack([ds.y_obs, ds.z_design, ds.x_obs])
    details = {
        "set1_d_spd": hyper.d_spd,
        "set1_x_full_rank": x_rank,
        "set1_sample_inequality": n + hyper.a > 2 * r + p,
        "set1_alpha_prior_proper": hyper.c_spd,
        "set2_yzx_full_rank": has_full_column_rank(yzx),
        "set2_sample_inequality": n + hyper.a > (2 + q) * r + p,
        "set2_alpha_prior_bounded": True,  # Gaussian kernel, C SPSD
    }
    set1 = (
        details["set1_d_spd"]
        and details["set1_x_full_rank"]
        and details["set1_sample_inequality"]
        and details["set1_alpha_prior_proper"]
    )
    set2 = (
        details["set2_yzx_full_rank"]
        and details["set2_sample_inequality"]
        and details["set2_alpha_prior_bounded"]
    )
    return ProprietyVerdict(condition_set_1=set1, condition_set_2=set2, details=details)


def residual_scatter(alpha, b_coef, ds: Dataset):
    """(Y - Z A - X B)'(Y - Z A - X B), the n-scaled posterior scatter."""
    dims = ds.dims
    a_mat = unvec(alpha, dims.qr, dims.r)
    e = ds.y_obs - ds.z_design @ a_mat
    if dims.p:
        e = e - ds.x_obs @ np.asarray(b_coef, dtype=float)
    return symmetrize(e.T @ e)


def log_posterior_unnorm(state, ds: Dataset, hyper: Hyperparams):
    """Unnormalized log posterior density at a chain state.

    Equal to -((n+a)/2) log|Sigma| - tr(Sigma^{-1}[D + nS])/2
    - (alpha - m)'C(alpha - m)/2 with S the mean residual scatter.
    """
    dims = ds.dims
    sigma = state.sigma
    ns = residual_scatter(state.alpha, state.b_coef, ds)
    logdet = logdet_spd(sigma)  # raises NotSpdError for non-SPD sigma
    trace_term = float(np.trace(linalg.solve_spd(sigma, hyper.d + ns)))
    dm = state.alpha - hyper.m
    quad = float(dm @ hyper.c @ dm)
    return -0.5 * (dims.n + hyper.a) * logdet - 0.5 * trace_term - 0.5 * quad


def log_likelihood(state, ds: Dataset):
    """Gaussian log likelihood of Y given X (includes all constants)."""
    dims = ds.dims
    sigma = state.sigma
    ns = residual_scatter(state.alpha, state.b_coef, ds)
    logdet = logdet_spd(sigma)
    trace_term = float(np.trace(linalg.solve_spd(sigma, ns)))
    n, r = dims.n, dims.r
    return -0.5 * n * r * np.log(2 * np.pi) - 0.5 * n * logdet - 0.5 * trace_term


def companion_matrix(a_mat, r, q):
    """Companion form of the lag polynomial; stability means spectral radius < 1."""
    top = np.hstack([np.asarray(a_mat[i * r : (i + 1) * r]).T for i in range(q)])
    comp = np.zeros((q * r, q * r))
    comp[:r, :] = top
    if q > 1:
        comp[r:, : (q - 1) * r] = np.eye((q - 1) * r)
    return comp


def spectral_radius(m):
    return float(np.max(np.abs(np.linalg.eigvals(m))))


def generate_stable_varx(dims: VarxDims, sigma2, rng: RngStream, presample=None):
    """Simulate a stable VARX path and return it with the true parameters.

    Each lag block is built as (U + U' + I) / (||U + U' + I|| + 0.1) with U
    entries iid uniform on [-1/2, 1/2], which has spectral norm below one;
    for q > 1 the blocks are divided by q so the companion matrix stays
    stable, and the spectral radius is checked.  B is all ones, Sigma is
    sigma2 * I, the first predictor column is an intercept and any further
    columns are iid standard normal.  The presample defaults to zeros.
    """
    r, p, q, n = dims.r, dims.p, dims.q, dims.n
    gen = rng.generator

    blocks = []
    for _ in range(q):
        u = gen.uniform(-0.5, 0.5, size=(r, r))
        sym = u + u.T + np.eye(r)
        blocks.append(sym / ((linalg.spectral_norm(sym) + 0.1) * q))
    a_mat = np.vstack(blocks)
    if spectral_radius(companion_matrix(a_mat, r, q)) >= 1.0:
        raise RuntimeError("stable construction produced an unstable companion matrix")

    b_mat = np.ones((p, r))
    sigma = sigma2 * np.eye(r)

    if p == 0:
        x_obs = np.zeros((n, 0))
    else:
        x_obs = np.ones((n, p))
        if p > 1:
            x_obs[:, 1:] = gen.standard_normal((n, p - 1))

    if presample is None:
        presample = np.zeros((q, r))
    presample = np.atleast_2d(np.asarray(presample, dtype=float))

    innovations = np.sqrt(sigma2) * gen.standard_normal((n, r))
    full = np.vstack([presample, np.zeros((n, r))])
    for t in range(n):
        z_t = np.concatenate([full[q + t - j] for j in range(1, q + 1)])
        mean_t = a_mat.T @ z_t
        if p:
            mean_t = mean_t + b_mat.T @ x_obs[t]
        full[q + t] = mean_t + innovations[t]

    ds = build_design(presample, full[q:], x_obs if p else None, dims=dims)
    return ds, TrueParams(a_mat=a_mat, b_mat=b_mat, sigma=sigma)


def _fmt(x):
    """Locale-independent 17-significant-digit formatting."""
    return format(float(x), ".17g")


def write_dataset_csv(ds: Dataset, path):
    """Serialize a dataset; presample rows carry t <= 0 and empty x cells."""
    dims = ds.dims
    header = ["t"] + [f"y_{j + 1}" for j in range(dims.r)] + [
        f"x_{j + 1}" for j in range(dims.p)
    ]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for i in range(dims.q):
        t = i - dims.q + 1
        w.writerow([str(t)] + [_fmt(v) for v in ds.presample[i]] + [""] * dims.p)
    for i in range(dims.n):
        w.writerow(
            [str(i + 1)]
            + [_fmt(v) for v in ds.y_obs[i]]
            + [_fmt(v) for v in ds.x_obs[i]]
        )
    with open(path, "w", newline="") as fh:
        fh.write(buf.getvalue())


def read_dataset_csv(path):
    """Load a dataset written by :func:`write_dataset_csv`."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise NumericDataError(f"empty data file {path}")
    header = rows[0]
    r = sum(1 for h in header if h.startswith("y_"))
    p = sum(1 for h in header if h.startswith("x_"))
    pre, ys, xs = [], [], []
    try:
        for row in rows[1:]:
            t = int(row[0])
            yvals = [float(v) for v in row[1 : 1 + r]]
            if t <= 0:
                pre.append(yvals)
            else:
                ys.append(yvals)
                xs.append([float(v) for v in row[1 + r : 1 + r + p]])
            if len(row) != 1 + r + p:
                raise NumericDataError(f"row width {len(row)} in {path}")
    except (ValueError, IndexError) as exc:
        if isinstance(exc, NumericDataError):
            raise
        raise NumericDataError(f"malformed data file {path}: {exc}") from exc
    presample = np.asarray(pre, dtype=float).reshape(len(pre), r)
    y_obs = np.asarray(ys, dtype=float).reshape(len(ys), r)
    x_obs = np.asarray(xs, dtype=float).reshape(len(xs), p)
    return build_design(presample, y_obs, x_obs if p else None)
