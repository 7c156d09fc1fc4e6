"""Explicit convergence-rate certificates for the marginal alpha chain.

Two drift/minorization routes are implemented for the alpha kernel:

* the fixed-sample ("small_n") route, with drift function V(alpha) =
  ||alpha||^2, drift coefficient lambda = 0 and constant

      L = (||C^{-1}|| ||C m|| + ||C^{-1/2}|| ||C^{1/2} alpha_hat||)^2
          + tr(C^{-1}),

  and minorization probability

      eps = ( |D + Y'Q_{[Z,X]}Y| /
              |D + I_r (||Q_X Y|| + ||Q_X Z|| sqrt(T))^2| )^{c/2},
      c = n + a - p - r - 1;

* the growing-sample ("large_n") route, with the centered drift function
  V(alpha) = ||(I_r kron Q_X Z)(alpha - alpha_hat)||^2,

      lambda = (qr + (||C||^{1/2} ||A_hat||_F
                      + ||C^{-1}||^{1/2} ||C m||)^2) / (n + a - 2r - p - 2),
      L = lambda tr(D) + lambda ||Q_{[Z,X]} Y||_F^2,

  and minorization probability

      eps = ( |G| / |G + I_r T| )^{(n + a - p - r - 1)/2},
      G = D + Y'Q_{[Z,X]}Y.

Given admissible (lambda, L, eps, T) with T above the small-set threshold
2L/(1 - lambda), the one-step rate is bounded by

    rho_bar = min over c in (0,1) of
        max( (1 - eps)^c,
             ((1 + 2L + lambda T)/(1 + T))^{1-c} (1 + 2L + 2 lambda T)^c ),

and for a chain started at a point with drift value V0 the total-variation
distance after h steps is at most (2 + L/(1 - lambda) + V0) rho_bar^h.

Everything that can underflow (eps, rho_bar near one) is carried in log
space; ``epsilon`` may round to zero and ``log(rho_bar)`` to -0.0 at extreme
problem sizes, which is documented, expected behavior.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from . import linalg
from .distributions import RngStream, draw_inv_wishart, draw_precision_gaussian
from .linalg import NotSpdError, residualize, spectral_norm, symmetrize
from .model import Dataset, Hyperparams, TrueParams, VarxDims, least_squares, unvec
from .sampler import _Workspace

SMALL_N = "small_n"
LARGE_N = "large_n"
DEFAULT_T_DELTA = 1e-6


class InadmissibleBound(ValueError):
    """A hypothesis of the rate-bound theorem fails.

    ``hypothesis`` names the failing one: "lambda" (drift coefficient not
    below one), "epsilon" (no minorization mass) or "T" (small set not above
    the 2L/(1-lambda) threshold).
    """

    def __init__(self, hypothesis, message):
        super().__init__(message)
        self.hypothesis = hypothesis


@dataclass(frozen=True)
class DriftParams:
    """Drift inequality coefficients: E[V(next) | alpha'] <= lam V(alpha') + big_l."""

    lam: float
    big_l: float
    regime: str

    def __post_init__(self):
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "big_l", float(self.big_l))
        if self.lam < 0 or not math.isfinite(self.big_l):
            raise ValueError("drift parameters must satisfy lam >= 0, L finite")
        if self.regime not in (SMALL_N, LARGE_N):
            raise ValueError(f"unknown regime {self.regime!r}")


@dataclass(frozen=True)
class MinorizationParams:
    """Minorization mass on the sublevel set {V <= big_t}.

    ``epsilon = exp(log_epsilon)`` may underflow to zero; log_epsilon is the
    authoritative value.
    """

    epsilon: float
    log_epsilon: float
    big_t: float

    def __post_init__(self):
        object.__setattr__(self, "epsilon", float(self.epsilon))
        object.__setattr__(self, "log_epsilon", float(self.log_epsilon))
        object.__setattr__(self, "big_t", float(self.big_t))


@dataclass(frozen=True)
class BoundReport:
    """Rate certificate: minimizing c, rate bound (and its log), and the
    coefficient of the total-variation bound for a start with drift value
    v_at_start."""

    drift: DriftParams
    minor: MinorizationParams
    c_star: float
    rho_bar: float
    log_rho_bar: float
    tv_coefficient: float
    v_at_start: float


@dataclass(frozen=True)
class DriftCheck:
    """Monte Carlo comparison of one-step expected drift against its bound."""

    lhs_estimate: float
    rhs_bound: float
    mc_se: float
    passed: bool


@dataclass(frozen=True)
class InadequacyReport:
    """Why the fixed-sample certificate degrades as the sample grows.

    ``l_lower``/``l_upper`` sandwich the small_n drift constant by data-free
    multiples of the squared least-squares coefficient norm;
    ``divergence_stat`` = n ||Q_X Z||^2 / ||Q_{[Z,X]} Y||^2 growing without
    bound forces the small_n minorization mass to vanish; ``log_zeta`` tracks
    zeta = eps^{2n/c}, the normalized trend of that decay.
    """

    l_value: float
    l_lower: float
    l_upper: float
    divergence_stat: float
    log_zeta: float
    zeta: float
    big_t: float


@dataclass(frozen=True)
class ReferenceLimits:
    """Plug-in reference values for the stable simulation study (dashed
    lines in the summary plots): the drift pair with the generating
    parameters substituted for their estimates, the implied small-set bound
    2 * l_tilde, and the limiting log minorization mass."""

    lambda_tilde: float
    l_tilde: float
    t_tilde: float
    log_epsilon_tilde: float


def _c_eigs(hyper: Hyperparams):
    w = np.linalg.eigvalsh(symmetrize(hyper.c))
    if w[0] <= 0.0:
        raise NotSpdError("prior precision C must be SPD for this diagnostic")
    return w


def drift_function(alpha, regime, ds: Dataset, ls=None):
    """Evaluate the regime's drift function at one alpha."""
    alpha = np.asarray(alpha, dtype=float).ravel()
    if regime == SMALL_N:
        return float(alpha @ alpha)
    if ls is None:
        ls = least_squares(ds)
    dims = ds.dims
    qx_z = residualize(ds.z_design, ds.x_obs if dims.p else None)
    diff = unvec(alpha - ls.alpha_hat, dims.qr, dims.r)
    return float(np.sum((qx_z @ diff) ** 2))


def small_n_drift(ds: Dataset, hyper: Hyperparams) -> DriftParams:
    """Fixed-sample drift constants: lam = 0 and the explicit L above."""
    w = _c_eigs(hyper)
    ls = least_squares(ds)
    c_inv_norm = 1.0 / w[0]
    tr_c_inv = float(np.sum(1.0 / w))
    cm_norm = float(np.linalg.norm(hyper.c @ hyper.m))
    c_half_alpha = math.sqrt(float(ls.alpha_hat @ hyper.c @ ls.alpha_hat))
    big_l = (c_inv_norm * cm_norm + math.sqrt(c_inv_norm) * c_half_alpha) ** 2 + tr_c_inv
    return DriftParams(lam=0.0, big_l=big_l, regime=SMALL_N)


def large_n_drift(ds: Dataset, hyper: Hyperparams) -> DriftParams:
    """Growing-sample drift constants for the centered drift function."""
    dims = ds.dims
    zx = np.hstack([ds.z_design, ds.x_obs])
    if not linalg.has_full_column_rank(zx):
        raise NotSpdError("[Z, X] must have full column rank for the centered drift")
    denom = dims.n + hyper.a - 2 * dims.r - dims.p - 2
    if denom <= 0:
        raise ValueError(f"need n + a - 2r - p - 2 > 0, got {denom}")
    w = _c_eigs(hyper)
    ls = least_squares(ds)
    a_hat_f = float(np.linalg.norm(ls.alpha_hat))
    cm_norm = float(np.linalg.norm(hyper.c @ hyper.m))
    lam = (dims.qr + (math.sqrt(w[-1]) * a_hat_f + math.sqrt(1.0 / w[0]) * cm_norm) ** 2) / denom
    big_l = lam * float(np.trace(hyper.d)) + lam * float(np.trace(ls.resid_gram))
    return DriftParams(lam=lam, big_l=big_l, regime=LARGE_N)


def _resid_gram_logdet(ds: Dataset, hyper: Hyperparams, ls=None):
    if ls is None:
        ls = least_squares(ds)
    g = symmetrize(hyper.d + ls.resid_gram)
    return ls, g, linalg.logdet_spd(g)  # raises NotSpdError when not SPD


def small_n_minorization(ds: Dataset, hyper: Hyperparams, big_t) -> MinorizationParams:
    """Fixed-sample minorization mass on {||alpha||^2 <= big_t}, in log space."""
    if big_t <= 0:
        raise ValueError("big_t must be positive")
    dims = ds.dims
    ls, _, log_num = _resid_gram_logdet(ds, hyper)
    x = ds.x_obs if dims.p else None
    qx_y_norm = spectral_norm(residualize(ds.y_obs, x))
    qx_z_norm = spectral_norm(residualize(ds.z_design, x))
    c1 = (qx_y_norm + qx_z_norm * math.sqrt(big_t)) ** 2
    d_eigs = np.linalg.eigvalsh(symmetrize(hyper.d))
    log_den = float(np.sum(np.log(d_eigs + c1)))
    c = dims.n + hyper.a - dims.p - dims.r - 1
    log_eps = 0.5 * c * (log_num - log_den)
    return MinorizationParams(epsilon=math.exp(log_eps), log_epsilon=log_eps, big_t=float(big_t))


def large_n_minorization(ds: Dataset, hyper: Hyperparams, big_t) -> MinorizationParams:
    """Growing-sample minorization mass on the centered sublevel set."""
    if big_t <= 0:
        raise ValueError("big_t must be positive")
    dims = ds.dims
    _, g, log_num = _resid_gram_logdet(ds, hyper)
    log_den = linalg.logdet_spd(g + big_t * np.eye(dims.r))
    c = dims.n + hyper.a - dims.p - dims.r - 1
    log_eps = 0.5 * c * (log_num - log_den)
    return MinorizationParams(epsilon=math.exp(log_eps), log_epsilon=log_eps, big_t=float(big_t))


def large_n_log_eps_eigenform(ds: Dataset, hyper: Hyperparams, big_t):
    """Equivalent eigenvalue form of the growing-sample log mass.

    With tau_j the eigenvalues of (D + Y'Q_{[Z,X]}Y)/n, returns
    -(c/2) * sum_j log((tau_j + T/n)/tau_j); cross-checks the determinant
    route to rounding error.
    """
    dims = ds.dims
    ls = least_squares(ds)
    tau = np.linalg.eigvalsh(symmetrize(hyper.d + ls.resid_gram)) / dims.n
    if np.any(tau <= 0):
        raise NotSpdError("minorization scale matrix is not positive definite")
    c = dims.n + hyper.a - dims.p - dims.r - 1
    return float(-0.5 * c * np.sum(np.log((tau + big_t / dims.n) / tau)))


def select_big_t(drift: DriftParams, rule="theorem", delta=DEFAULT_T_DELTA):
    """Small-set bound T for a drift pair.

    "theorem" uses the admissible threshold 2L/(1 - lambda) + delta.
    "caption" reproduces the simulation-figure settings: 2L(1 - lambda) +
    delta for the growing-sample route and L + delta for the fixed-sample
    route; these are generally below the admissible threshold, so they are
    for minorization plots only, not rate certificates.
    """
    lam, big_l = drift.lam, drift.big_l
    if rule == "theorem":
        if lam >= 1:
            raise InadmissibleBound("lambda", f"drift coefficient {lam} >= 1")
        return 2.0 * big_l / (1.0 - lam) + delta
    if rule == "caption":
        if drift.regime == LARGE_N:
            return 2.0 * big_l * (1.0 - lam) + delta
        return big_l + delta
    raise ValueError(f"unknown T rule {rule!r}")


def _log1m_eps(log_epsilon):
    """log(1 - eps) from log(eps), accurate for tiny and moderate eps."""
    eps = math.exp(log_epsilon)
    if eps >= 1.0:
        return -math.inf
    if eps > 1e-8:
        return math.log1p(-eps)
    # relative error O(eps) < 1e-8; exp may underflow to zero, giving -0.0
    return -eps


def rosenthal_bound(drift: DriftParams, minor: MinorizationParams,
                    c_grid_size=10000, v_start=0.0) -> BoundReport:
    """Minimize the two-branch rate bound over the interior grid of c.

    The two branches are log-linear in c: the minorization branch
    c log(1 - eps) decreases, the drift branch
    (1-c) log g1 + c log g2 increases (g1 < 1 by admissibility), so the
    minimum sits at their crossing; a uniform grid plus golden-section
    refinement around the grid argmin plus the closed-form crossing are all
    evaluated and the best kept.  All arithmetic is in log space.
    """
    lam, big_l, big_t = drift.lam, drift.big_l, minor.big_t
    if not 0.0 <= lam < 1.0:
        raise InadmissibleBound("lambda", f"drift coefficient {lam} not in [0, 1)")
    if not minor.log_epsilon > -math.inf:
        raise InadmissibleBound("epsilon", "minorization mass is zero")
    if minor.log_epsilon > 0.0:
        raise InadmissibleBound("epsilon", "minorization mass exceeds one")
    threshold = 2.0 * big_l / (1.0 - lam)
    if not big_t > threshold:
        raise InadmissibleBound(
            "T", f"small set bound {big_t} not above threshold {threshold}"
        )

    # gap = T(1 - lam) - 2L > 0; log g1 = log1p(-gap / (1 + T)) avoids the
    # cancellation in log(1 + 2L + lam T) - log(1 + T).
    gap = big_t * (1.0 - lam) - 2.0 * big_l
    lg1 = math.log1p(-gap / (1.0 + big_t))
    lg2 = math.log1p(2.0 * big_l + 2.0 * lam * big_t)
    l1me = _log1m_eps(minor.log_epsilon)

    def value(c):
        return np.maximum(c * l1me, (1.0 - c) * lg1 + c * lg2)

    grid = np.arange(1, c_grid_size + 1) / (c_grid_size + 1.0)
    vals = value(grid)
    i = int(np.argmin(vals))
    best_c, best_v = float(grid[i]), float(vals[i])

    lo = grid[i - 1] if i > 0 else 1e-300
    hi = grid[i + 1] if i < c_grid_size - 1 else 1.0 - 1e-16
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = float(lo), float(hi)
    c1 = b - invphi * (b - a)
    c2 = a + invphi * (b - a)
    f1, f2 = float(value(c1)), float(value(c2))
    for _ in range(200):
        if f1 <= f2:
            b, c2, f2 = c2, c1, f1
            c1 = b - invphi * (b - a)
            f1 = float(value(c1))
        else:
            a, c1, f1 = c1, c2, f2
            c2 = a + invphi * (b - a)
            f2 = float(value(c2))
        if b - a < 1e-16 * max(1.0, b):
            break
    for c, v in ((c1, f1), (c2, f2)):
        if v < best_v:
            best_c, best_v = float(c), float(v)

    denom = l1me - lg2 + lg1
    if denom < 0.0 and l1me > -math.inf:
        crossing = lg1 / denom
        if 0.0 < crossing < 1.0:
            v = float(value(crossing))
            if v < best_v:
                best_c, best_v = float(crossing), v

    tv = 2.0 + big_l / (1.0 - lam) + float(v_start)
    return BoundReport(
        drift=drift,
        minor=minor,
        c_star=best_c,
        rho_bar=math.exp(best_v),
        log_rho_bar=best_v,
        tv_coefficient=tv,
        v_at_start=float(v_start),
    )


def small_n_report(ds: Dataset, hyper: Hyperparams, t_rule="theorem",
                   delta=DEFAULT_T_DELTA, c_grid_size=10000, v_start=None) -> BoundReport:
    """Full fixed-sample certificate with the configured T rule."""
    drift = small_n_drift(ds, hyper)
    big_t = select_big_t(drift, rule=t_rule, delta=delta)
    minor = small_n_minorization(ds, hyper, big_t)
    if v_start is None:
        v_start = drift_function(least_squares(ds).alpha_hat, SMALL_N, ds)
    return rosenthal_bound(drift, minor, c_grid_size=c_grid_size, v_start=v_start)


def large_n_report(ds: Dataset, hyper: Hyperparams, t_rule="theorem",
                   delta=DEFAULT_T_DELTA, c_grid_size=10000, v_start=0.0) -> BoundReport:
    """Full growing-sample certificate with the configured T rule.

    The default start alpha_hat is the center of the drift function, so
    v_start defaults to zero.
    """
    drift = large_n_drift(ds, hyper)
    big_t = select_big_t(drift, rule=t_rule, delta=delta)
    minor = large_n_minorization(ds, hyper, big_t)
    return rosenthal_bound(drift, minor, c_grid_size=c_grid_size, v_start=v_start)


def mc_verify_drift(alpha_prime, ds: Dataset, hyper: Hyperparams, regime,
                    n_mc, rng: RngStream) -> DriftCheck:
    """Monte Carlo check of the drift inequality at one starting point.

    Estimates the one-step expected drift by n_mc two-stage draws (Sigma
    given alpha', then alpha given Sigma) and compares against
    lam V(alpha') + L plus three standard errors.
    """
    alpha_prime = np.asarray(alpha_prime, dtype=float).ravel()
    if regime == SMALL_N:
        drift = small_n_drift(ds, hyper)
    elif regime == LARGE_N:
        drift = large_n_drift(ds, hyper)
    else:
        raise ValueError(f"unknown regime {regime!r}")

    ws = _Workspace(ds, hyper)
    ls = least_squares(ds)
    dims = ds.dims
    qx_z = ws.qx_z
    sig_dist = ws.sigma_conditional(alpha_prime)
    values = np.empty(n_mc)
    for k in range(n_mc):
        sigma = draw_inv_wishart(sig_dist, rng)
        alpha = draw_precision_gaussian(ws.alpha_conditional(sigma), rng)
        if regime == SMALL_N:
            values[k] = alpha @ alpha
        else:
            diff = unvec(alpha - ls.alpha_hat, dims.qr, dims.r)
            values[k] = np.sum((qx_z @ diff) ** 2)
    lhs = float(values.mean())
    se = float(values.std(ddof=1) / math.sqrt(n_mc))
    v_prime = drift_function(alpha_prime, regime, ds, ls=ls)
    rhs = drift.lam * v_prime + drift.big_l
    return DriftCheck(lhs_estimate=lhs, rhs_bound=rhs, mc_se=se,
                      passed=lhs <= rhs + 3.0 * se)


def inadequacy_report(ds: Dataset, hyper: Hyperparams, big_t=None,
                      delta=DEFAULT_T_DELTA) -> InadequacyReport:
    """Quantities explaining the decay of the fixed-sample certificate."""
    dims = ds.dims
    drift = small_n_drift(ds, hyper)
    if big_t is None:
        big_t = drift.big_l + delta
    w = _c_eigs(hyper)
    ls = least_squares(ds)
    c_inv_norm = 1.0 / w[0]
    cm_norm = float(np.linalg.norm(hyper.c @ hyper.m))
    c_half_alpha_sq = float(ls.alpha_hat @ hyper.c @ ls.alpha_hat)
    l_lower = c_inv_norm * c_half_alpha_sq
    l_upper = (
        2.0 * c_inv_norm**2 * cm_norm**2
        + 2.0 * c_inv_norm * c_half_alpha_sq
        + float(np.sum(1.0 / w))
    )
    x = ds.x_obs if dims.p else None
    qxz_norm = spectral_norm(residualize(ds.z_design, x))
    qzxy_norm = spectral_norm(residualize(ds.y_obs, np.hstack([ds.z_design, ds.x_obs])))
    divergence = dims.n * qxz_norm**2 / qzxy_norm**2
    minor = small_n_minorization(ds, hyper, big_t)
    c = dims.n + hyper.a - dims.p - dims.r - 1
    log_zeta = 2.0 * dims.n / c * minor.log_epsilon
    return InadequacyReport(
        l_value=drift.big_l,
        l_lower=l_lower,
        l_upper=l_upper,
        divergence_stat=divergence,
        log_zeta=log_zeta,
        zeta=math.exp(log_zeta),
        big_t=float(big_t),
    )


def reference_limits(true_params: TrueParams, dims: VarxDims, sigma2) -> ReferenceLimits:
    """Plug-in reference values for the lag-one stable simulation setup
    (intercept predictor, unit prior precision, m = 0, D = 0, a = 0)."""
    if dims.q != 1:
        raise ValueError("reference limits are defined for the lag-one setup")
    r, n = dims.r, dims.n
    a_f2 = float(np.sum(true_params.a_mat**2))
    denom = n - 2 * r - 3
    lambda_tilde = (r + a_f2) / denom if denom > 0 else math.inf
    l_tilde = r * sigma2 * (r + a_f2)
    return ReferenceLimits(
        lambda_tilde=lambda_tilde,
        l_tilde=l_tilde,
        t_tilde=2.0 * l_tilde,
        log_epsilon_tilde=-(r**2) * (r + a_f2),
    )


BOUNDS_CSV_HEADER = [
    "n", "regime", "lambda", "L", "T", "log_epsilon", "c_star", "rho_bar", "tv_coeff",
]


def bounds_csv_row(n, regime, report):
    """One serialized bound row; ``report`` may be None for a failed n."""

    def fmt(x):
        return format(float(x), ".17g")

    if report is None:
        return [str(n), regime] + ["NA"] * (len(BOUNDS_CSV_HEADER) - 2)
    return [
        str(n),
        report.drift.regime,
        fmt(report.drift.lam),
        fmt(report.drift.big_l),
        fmt(report.minor.big_t),
        fmt(report.minor.log_epsilon),
        fmt(report.c_star),
        fmt(report.rho_bar),
        fmt(report.tv_coefficient),
    ]


def write_bounds_csv(rows, path):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BOUNDS_CSV_HEADER)
    for row in rows:
        w.writerow(row)
    with open(path, "w", newline="") as fh:
        fh.write(buf.getvalue())
