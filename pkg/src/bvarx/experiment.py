"""Experiment orchestration: configuration, the growing-sample sweep, and
file emission (CSV tables and SVG panels).

Configuration format
--------------------
A flat key = value text file; blank lines and lines starting with ``#`` are
ignored.  Keys (defaults in parentheses):

    r (3)            process dimension
    p (1)            predictor count; the first predictor is an intercept
    q (1)            lag order
    sigma2 (1.0)     innovation variance of the simulated path
    seed (20240)     base seed for all streams
    n_grid (200,400,800,1600,3200)  strictly increasing sample sizes
    sample_n ()      sample size for the chain commands; default max(n_grid)
    iters (2000)     Gibbs sweeps per chain
    burn (0)         discarded initial sweeps
    thin (1)         keep every thin-th sweep
    chains (2)       number of chains (disjoint streams)
    t_rule (theorem) small-set rule: "theorem" (admissible) or "caption"
                     (figure-replication; certificates may be inadmissible)
    c_rule (identity)  alpha prior precision: "identity" (c_scale * I) or
                       "zero" (flat prior, conjugate regime)
    c_scale (1.0)
    m_rule (zero)    prior mean of alpha (only "zero")
    d_rule (zero)    prior scale for Sigma: "zero" or "identity" (d_scale * I)
    d_scale (1.0)
    a (0.0)          prior exponent on |Sigma|
    out_dir (out)    output directory

Every key can be overridden by an environment variable with the ``BVARX_``
prefix (e.g. ``BVARX_SEED=7``), and programmatically via CLI flags.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import diagnostics, svgplot
from .diagnostics import (
    LARGE_N,
    SMALL_N,
    InadmissibleBound,
    bounds_csv_row,
    reference_limits,
    rosenthal_bound,
    select_big_t,
    write_bounds_csv,
)
from .distributions import RngStream
from .linalg import NotSpdError
from .model import (
    Dataset,
    Hyperparams,
    TrueParams,
    VarxDims,
    check_propriety,
    read_dataset_csv,
    write_dataset_csv,
)
from .sampler import batch_means_se, gelman_rubin, run_chain

ENV_PREFIX = "BVARX_"


class ConfigError(ValueError):
    """Invalid configuration file, key or value."""


class ProprietyError(RuntimeError):
    """The posterior is improper for the requested data and prior."""

    def __init__(self, message, clauses):
        super().__init__(message)
        self.clauses = clauses


@dataclass(frozen=True)
class ExperimentConfig:
    r: int = 3
    p: int = 1
    q: int = 1
    sigma2: float = 1.0
    seed: int = 20240
    n_grid: tuple = (200, 400, 800, 1600, 3200)
    sample_n: int = 0  # 0 means max(n_grid)
    iters: int = 2000
    burn: int = 0
    thin: int = 1
    chains: int = 2
    t_rule: str = "theorem"
    c_rule: str = "identity"
    c_scale: float = 1.0
    m_rule: str = "zero"
    d_rule: str = "zero"
    d_scale: float = 1.0
    a: float = 0.0
    out_dir: str = "out"

    def __post_init__(self):
        grid = tuple(int(v) for v in self.n_grid)
        if not grid or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError("n_grid must be non-empty and strictly increasing")
        object.__setattr__(self, "n_grid", grid)
        if self.r < 1 or self.q < 1 or self.p < 0:
            raise ConfigError("need r >= 1, q >= 1, p >= 0")
        if self.t_rule not in ("theorem", "caption"):
            raise ConfigError(f"unknown t_rule {self.t_rule!r}")
        if self.c_rule not in ("identity", "zero"):
            raise ConfigError(f"unknown c_rule {self.c_rule!r}")
        if self.m_rule != "zero":
            raise ConfigError(f"unknown m_rule {self.m_rule!r}")
        if self.d_rule not in ("identity", "zero"):
            raise ConfigError(f"unknown d_rule {self.d_rule!r}")
        if self.iters < 0 or self.burn < 0 or self.thin < 1 or self.chains < 1:
            raise ConfigError("invalid chain settings")
        if self.sigma2 <= 0:
            raise ConfigError("sigma2 must be positive")
        if self.a < 0:
            raise ConfigError("a must be >= 0")

    @property
    def max_n(self):
        return max(self.n_grid)

    @property
    def chain_n(self):
        return self.sample_n if self.sample_n else self.max_n

    def dims(self, n):
        return VarxDims(n=n, r=self.r, p=self.p, q=self.q)

    def hyperparams(self, n):
        dims = self.dims(n)
        d_scale = self.d_scale if self.d_rule == "identity" else 0.0
        if self.c_rule == "zero":
            return Hyperparams.flat(dims, d_scale=d_scale, a=self.a)
        return Hyperparams.standard_normal_alpha(
            dims, c_scale=self.c_scale, d_scale=d_scale, a=self.a
        )


_INT_KEYS = {"r", "p", "q", "seed", "sample_n", "iters", "burn", "thin", "chains"}
_FLOAT_KEYS = {"sigma2", "c_scale", "d_scale", "a"}
_STR_KEYS = {"t_rule", "c_rule", "m_rule", "d_rule", "out_dir"}


def _parse_value(key, raw):
    raw = raw.strip()
    try:
        if key == "n_grid":
            return tuple(int(v) for v in raw.replace(" ", "").split(",") if v)
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
        if key in _STR_KEYS:
            return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    raise ConfigError(f"unknown configuration key {key!r}")


def load_config(path=None, overrides=None, environ=None) -> ExperimentConfig:
    """Build a configuration from file, environment and explicit overrides.

    Precedence, lowest to highest: defaults, file, BVARX_* environment
    variables, ``overrides``.
    """
    values = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, raw = line.split("=", 1)
            values[key.strip()] = _parse_value(key.strip(), raw)
    environ = os.environ if environ is None else environ
    for key in list(_INT_KEYS | _FLOAT_KEYS | _STR_KEYS | {"n_grid"}):
        env_key = ENV_PREFIX + key.upper()
        if env_key in environ:
            values[key] = _parse_value(key, environ[env_key])
    for key, val in (overrides or {}).items():
        if val is not None:
            values[key] = val
    try:
        return ExperimentConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


# ---------------------------------------------------------------------------
# workflows (shared by the CLI and the HTTP service)


def simulate_path(cfg: ExperimentConfig):
    """One stable VARX sample path of length max(n_grid); the n-grid reuses
    prefixes of this single path."""
    from .model import generate_stable_varx

    dims = cfg.dims(cfg.max_n)
    rng = RngStream(cfg.seed, (0,))
    return generate_stable_varx(dims, cfg.sigma2, rng)


def simulate_workflow(cfg: ExperimentConfig):
    """Simulate and write data.csv plus the generating parameters."""
    ds, truth = simulate_path(cfg)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    data_path = out / "data.csv"
    write_dataset_csv(ds, data_path)
    truth_path = out / "truth.json"
    truth_path.write_text(
        json.dumps(
            {
                "a_mat": truth.a_mat.tolist(),
                "b_mat": truth.b_mat.tolist(),
                "sigma": truth.sigma.tolist(),
                "sigma2": cfg.sigma2,
                "seed": cfg.seed,
            },
            indent=1,
            sort_keys=True,
        )
        + "\n"
    )
    return {"data": str(data_path), "truth": str(truth_path)}


def load_path(cfg: ExperimentConfig):
    """Load the simulated path and truth from cfg.out_dir."""
    out = Path(cfg.out_dir)
    data_path = out / "data.csv"
    if not data_path.exists():
        raise ConfigError(f"no data file at {data_path}; run simulate first")
    ds = read_dataset_csv(data_path)
    truth = None
    truth_path = out / "truth.json"
    if truth_path.exists():
        blob = json.loads(truth_path.read_text())
        truth = TrueParams(
            a_mat=np.asarray(blob["a_mat"], dtype=float),
            b_mat=np.asarray(blob["b_mat"], dtype=float),
            sigma=np.asarray(blob["sigma"], dtype=float),
        )
    return ds, truth


def _require_length(ds: Dataset, n):
    if n > ds.y_obs.shape[0]:
        raise ConfigError(
            f"requested sample size {n} exceeds the {ds.y_obs.shape[0]} "
            "available observations; re-run simulate with a matching n_grid"
        )


def check_verdicts(cfg: ExperimentConfig, ds: Dataset):
    """Propriety verdicts for every n in the grid."""
    _require_length(ds, cfg.max_n)
    rows = []
    for n in cfg.n_grid:
        sub = ds.prefix(n)
        rows.append((n, check_propriety(sub.dims, cfg.hyperparams(n), sub)))
    return rows


def run_sampling(cfg: ExperimentConfig, ds: Dataset):
    """Run the configured chains on the chain_n prefix and summarize.

    Returns (traces, summary) where summary holds per-coordinate posterior
    means pooled over chains, the first chain's batch-means standard error
    (conservative for the pooled mean), and split R-hat across chains (NaN
    for a single chain).
    """
    n = cfg.chain_n
    _require_length(ds, n)
    retained = (cfg.iters - cfg.burn) // cfg.thin
    if retained < 4:
        raise ConfigError(
            "chain summaries need at least 4 retained sweeps; got "
            f"(iters - burn) / thin = {retained}"
        )
    sub = ds.prefix(n)
    hyper = cfg.hyperparams(n)
    verdict = check_propriety(sub.dims, hyper, sub)
    if not verdict.proper:
        raise ProprietyError(
            f"posterior improper at n={n}; failing clauses: "
            f"{verdict.failing_clauses()}",
            verdict.details,
        )
    traces = []
    for k in range(cfg.chains):
        rng = RngStream(cfg.seed, (1, k))
        traces.append(
            run_chain(None, cfg.iters, sub, hyper, rng, thin=cfg.thin, burn=cfg.burn)
        )
    alpha_dim = sub.dims.alpha_dim
    names = [f"alpha_{i + 1}" for i in range(alpha_dim)]
    stacks = [t.alpha_matrix() for t in traces]
    summary = []
    for i, name in enumerate(names):
        per_chain = np.stack([s[:, i] for s in stacks])
        pooled = per_chain.ravel()
        row = {
            "coordinate": name,
            "mean": float(pooled.mean()),
            "mcse": batch_means_se(stacks[0][:, i]),
            "rhat": gelman_rubin(per_chain) if cfg.chains > 1 else float("nan"),
        }
        summary.append(row)
    return traces, summary


def sample_workflow(cfg: ExperimentConfig):
    ds, _ = load_path(cfg)
    traces, summary = run_sampling(cfg, ds)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for k, tr in enumerate(traces):
        p = out / f"trace_chain{k}.csv"
        tr.to_csv(p)
        paths.append(str(p))
    spath = out / "summary.csv"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["coordinate", "mean", "mcse", "rhat"])
    for row in summary:
        cells = [
            "NA" if math.isnan(row[k]) else format(row[k], ".17g")
            for k in ("mean", "mcse", "rhat")
        ]
        w.writerow([row["coordinate"]] + cells)
    spath.write_text(buf.getvalue())
    return {"traces": paths, "summary": str(spath), "rows": summary}


EXPERIMENT_CSV_HEADER = [
    "n",
    "lambda_small", "l_small", "t_small", "log_eps_small", "rho_bar_small", "log_rho_small",
    "lambda_large", "l_large", "t_large", "log_eps_large", "rho_bar_large", "log_rho_large",
    "lambda_tilde", "l_tilde", "t_tilde", "log_eps_tilde",
]


def _regime_cells(ds, hyper, regime, t_rule):
    """(lambda, L, T, log_eps, rho_bar, log_rho) for one regime, NA-safe."""
    if regime == SMALL_N:
        drift = diagnostics.small_n_drift(ds, hyper)
        minorize = diagnostics.small_n_minorization
    else:
        drift = diagnostics.large_n_drift(ds, hyper)
        minorize = diagnostics.large_n_minorization
    big_t = select_big_t(drift, rule=t_rule)
    minor = minorize(ds, hyper, big_t)
    report = None
    try:
        report = rosenthal_bound(drift, minor)
    except InadmissibleBound:
        pass  # caption-rule T may sit below the admissible threshold
    cells = {
        "lambda": drift.lam,
        "l": drift.big_l,
        "t": big_t,
        "log_eps": minor.log_epsilon,
        "rho_bar": report.rho_bar if report else math.nan,
        "log_rho": report.log_rho_bar if report else math.nan,
    }
    return cells, report


def diagnose_rows(cfg: ExperimentConfig, ds: Dataset, truth=None):
    """Evaluate both certificate routes on every n in the grid.

    Per-n failures are recorded as NA cells and the sweep continues.
    Returns (rows, bound_rows, crossover_n) where crossover_n is the
    smallest n in the grid with a growing-sample drift coefficient below
    one (None if there is none).
    """
    _require_length(ds, cfg.max_n)
    rows, bound_rows = [], []
    crossover = None
    for n in cfg.n_grid:
        sub = ds.prefix(n)
        hyper = cfg.hyperparams(n)
        row = {"n": n}
        na = {
            "lambda": math.nan, "l": math.nan, "t": math.nan,
            "log_eps": math.nan, "rho_bar": math.nan, "log_rho": math.nan,
        }
        verdict = check_propriety(sub.dims, hyper, sub)
        for regime, tag in ((SMALL_N, "small"), (LARGE_N, "large")):
            cells, report = na, None
            if verdict.proper:
                try:
                    cells, report = _regime_cells(sub, hyper, regime, cfg.t_rule)
                except (NotSpdError, ValueError):
                    cells, report = na, None
            for key, val in cells.items():
                row[f"{key}_{tag}"] = val
            bound_rows.append(bounds_csv_row(n, regime, report))
        if truth is not None and cfg.q == 1:
            ref = reference_limits(truth, sub.dims, cfg.sigma2)
            row.update(
                lambda_tilde=ref.lambda_tilde,
                l_tilde=ref.l_tilde,
                t_tilde=ref.t_tilde,
                log_eps_tilde=ref.log_epsilon_tilde,
            )
        else:
            row.update(lambda_tilde=math.nan, l_tilde=math.nan,
                       t_tilde=math.nan, log_eps_tilde=math.nan)
        if crossover is None and math.isfinite(row["lambda_large"]) and row["lambda_large"] < 1:
            crossover = n
        rows.append(row)
    return rows, bound_rows, crossover


def _experiment_csv(rows, path):
    def cell(v):
        return "NA" if (isinstance(v, float) and math.isnan(v)) else format(float(v), ".17g")

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(EXPERIMENT_CSV_HEADER)
    for row in rows:
        w.writerow(
            [str(row["n"])]
            + [cell(row[k]) for k in (
                "lambda_small", "l_small", "t_small", "log_eps_small",
                "rho_bar_small", "log_rho_small",
                "lambda_large", "l_large", "t_large", "log_eps_large",
                "rho_bar_large", "log_rho_large",
                "lambda_tilde", "l_tilde", "t_tilde", "log_eps_tilde",
            )]
        )
    Path(path).write_text(buf.getvalue())


def _diagnose_svgs(rows, out_dir):
    ns = [row["n"] for row in rows]

    def series(key):
        return [row[key] for row in rows]

    drift_panels = [
        svgplot.Panel(
            title="drift coefficient vs n",
            xlabel="n",
            ylabel="lambda",
            series=[
                svgplot.Series(ns, series("lambda_large"), "observed (centered)", "circles"),
                svgplot.Series(ns, series("lambda_tilde"), "plug-in reference", "dashed", "#a33"),
            ],
        ),
        svgplot.Panel(
            title="drift constant vs n",
            xlabel="n",
            ylabel="L",
            series=[
                svgplot.Series(ns, series("l_large"), "observed (centered)", "circles"),
                svgplot.Series(ns, series("l_tilde"), "plug-in reference", "dashed", "#a33"),
                svgplot.Series(ns, series("l_small"), "non-centered", "dotted", "#2a7"),
            ],
        ),
    ]
    svgplot.render_panels(drift_panels, Path(out_dir) / "drift_params.svg")

    minor_panels = [
        svgplot.Panel(
            title="log minorization mass (centered)",
            xlabel="n",
            ylabel="log eps",
            series=[
                svgplot.Series(ns, series("log_eps_large"), "observed", "circles"),
                svgplot.Series(ns, series("log_eps_tilde"), "plug-in reference", "dashed", "#a33"),
            ],
        ),
        svgplot.Panel(
            title="log minorization mass (non-centered)",
            xlabel="n",
            ylabel="log eps",
            series=[svgplot.Series(ns, series("log_eps_small"), "observed", "circles")],
        ),
    ]
    svgplot.render_panels(minor_panels, Path(out_dir) / "minorization.svg")


def diagnose_workflow(cfg: ExperimentConfig):
    ds, truth = load_path(cfg)
    rows, bound_rows, crossover = diagnose_rows(cfg, ds, truth)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _experiment_csv(rows, out / "experiment.csv")
    write_bounds_csv(bound_rows, out / "bounds.csv")
    _diagnose_svgs(rows, out)
    return {
        "rows": rows,
        "crossover_n": crossover,
        "experiment": str(out / "experiment.csv"),
        "bounds": str(out / "bounds.csv"),
        "plots": [str(out / "drift_params.svg"), str(out / "minorization.svg")],
    }


def config_with(cfg: ExperimentConfig, **kwargs) -> ExperimentConfig:
    return replace(cfg, **{k: v for k, v in kwargs.items() if v is not None})
