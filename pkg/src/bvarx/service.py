"""HTTP service exposing the simulation, sampling and certificate workflows.

Stateless compute endpoints: every request carries the full experiment
configuration and responses return results inline, so concurrent clients
never share mutable state.  The CLI covers the same workflows for file-based
use; this service exists for long sweeps driven from elsewhere.
"""

from __future__ import annotations

import math
from typing import Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import diagnostics
from .diagnostics import DriftParams, InadmissibleBound, MinorizationParams
from .experiment import (
    ConfigError,
    ExperimentConfig,
    ProprietyError,
    check_verdicts,
    diagnose_rows,
    run_sampling,
    simulate_path,
)
from .linalg import NotSpdError

app = FastAPI(
    title="bvarx",
    description=(
        "Collapsed Gibbs sampling for Bayesian VARX models and explicit "
        "drift/minorization convergence-rate certificates."
    ),
)


class ConfigRequest(BaseModel):
    """Experiment configuration; fields mirror the config-file keys."""

    r: int = 3
    p: int = 1
    q: int = 1
    sigma2: float = 1.0
    seed: int = 20240
    n_grid: list[int] = Field(default=[200, 400, 800, 1600, 3200])
    sample_n: int = 0
    iters: int = 2000
    burn: int = 0
    thin: int = 1
    chains: int = 2
    t_rule: str = "theorem"
    c_rule: str = "identity"
    c_scale: float = 1.0
    d_rule: str = "zero"
    d_scale: float = 1.0
    a: float = 0.0

    def to_config(self) -> ExperimentConfig:
        try:
            return ExperimentConfig(
                r=self.r, p=self.p, q=self.q, sigma2=self.sigma2, seed=self.seed,
                n_grid=tuple(self.n_grid), sample_n=self.sample_n, iters=self.iters,
                burn=self.burn, thin=self.thin, chains=self.chains,
                t_rule=self.t_rule, c_rule=self.c_rule, c_scale=self.c_scale,
                d_rule=self.d_rule, d_scale=self.d_scale, a=self.a,
            )
        except ConfigError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc


class SimulateResponse(BaseModel):
    presample: list[list[float]]
    y: list[list[float]]
    x: list[list[float]]
    a_mat: list[list[float]]
    b_mat: list[list[float]]
    sigma: list[list[float]]


class VerdictModel(BaseModel):
    n: int
    proper: bool
    condition_set_1: bool
    condition_set_2: bool
    details: dict[str, bool]


class CheckResponse(BaseModel):
    verdicts: list[VerdictModel]
    all_proper: bool


class SummaryRow(BaseModel):
    coordinate: str
    mean: float
    mcse: float
    rhat: Optional[float]


class SampleResponse(BaseModel):
    n: int
    iters: int
    chains: int
    summary: list[SummaryRow]


class DiagnoseRow(BaseModel):
    n: int
    lambda_small: Optional[float]
    l_small: Optional[float]
    t_small: Optional[float]
    log_eps_small: Optional[float]
    rho_bar_small: Optional[float]
    log_rho_small: Optional[float]
    lambda_large: Optional[float]
    l_large: Optional[float]
    t_large: Optional[float]
    log_eps_large: Optional[float]
    rho_bar_large: Optional[float]
    log_rho_large: Optional[float]
    lambda_tilde: Optional[float]
    l_tilde: Optional[float]
    t_tilde: Optional[float]
    log_eps_tilde: Optional[float]


class DiagnoseResponse(BaseModel):
    rows: list[DiagnoseRow]
    crossover_n: Optional[int]


class RosenthalRequest(BaseModel):
    """Direct rate-bound evaluation from drift/minorization constants.

    Provide either epsilon or log_epsilon (log wins when both are given);
    regime only labels the report.
    """

    lam: float = Field(ge=0)
    big_l: float = Field(ge=0)
    big_t: float = Field(gt=0)
    epsilon: Optional[float] = None
    log_epsilon: Optional[float] = None
    v_start: float = 0.0
    c_grid_size: int = 10000
    regime: str = "small_n"


class RosenthalResponse(BaseModel):
    c_star: float
    rho_bar: float
    log_rho_bar: float
    tv_coefficient: float


def _none_if_nan(v):
    return None if (isinstance(v, float) and math.isnan(v)) else v


@app.get("/health")
def health():
    return {"status": "ok"}


@app.post("/simulate", response_model=SimulateResponse)
def simulate(req: ConfigRequest):
    cfg = req.to_config()
    ds, truth = simulate_path(cfg)
    return SimulateResponse(
        presample=ds.presample.tolist(),
        y=ds.y_obs.tolist(),
        x=ds.x_obs.tolist(),
        a_mat=truth.a_mat.tolist(),
        b_mat=truth.b_mat.tolist(),
        sigma=truth.sigma.tolist(),
    )


@app.post("/check", response_model=CheckResponse)
def check(req: ConfigRequest):
    cfg = req.to_config()
    ds, _ = simulate_path(cfg)
    verdicts = [
        VerdictModel(
            n=n,
            proper=v.proper,
            condition_set_1=v.condition_set_1,
            condition_set_2=v.condition_set_2,
            details=v.details,
        )
        for n, v in check_verdicts(cfg, ds)
    ]
    return CheckResponse(verdicts=verdicts, all_proper=all(v.proper for v in verdicts))


@app.post("/sample", response_model=SampleResponse)
def sample(req: ConfigRequest):
    cfg = req.to_config()
    ds, _ = simulate_path(cfg)
    try:
        _, summary = run_sampling(cfg, ds)
    except ProprietyError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    rows = [
        SummaryRow(
            coordinate=row["coordinate"],
            mean=row["mean"],
            mcse=row["mcse"],
            rhat=_none_if_nan(row["rhat"]),
        )
        for row in summary
    ]
    return SampleResponse(n=cfg.chain_n, iters=cfg.iters, chains=cfg.chains, summary=rows)


@app.post("/diagnose", response_model=DiagnoseResponse)
def diagnose(req: ConfigRequest):
    cfg = req.to_config()
    ds, truth = simulate_path(cfg)
    rows, _, crossover = diagnose_rows(cfg, ds, truth)
    out = [
        DiagnoseRow(n=row["n"], **{k: _none_if_nan(v) for k, v in row.items() if k != "n"})
        for row in rows
    ]
    return DiagnoseResponse(rows=out, crossover_n=crossover)


@app.post("/rosenthal", response_model=RosenthalResponse)
def rosenthal(req: RosenthalRequest):
    if req.log_epsilon is not None:
        log_eps = req.log_epsilon
        eps = math.exp(min(log_eps, 0.0))
    elif req.epsilon is not None:
        if req.epsilon <= 0:
            raise HTTPException(status_code=400, detail="epsilon must be positive")
        eps, log_eps = req.epsilon, math.log(req.epsilon)
    else:
        raise HTTPException(status_code=400, detail="provide epsilon or log_epsilon")
    if req.regime not in (diagnostics.SMALL_N, diagnostics.LARGE_N):
        raise HTTPException(status_code=400, detail=f"unknown regime {req.regime!r}")
    try:
        drift = DriftParams(lam=req.lam, big_l=req.big_l, regime=req.regime)
        minor = MinorizationParams(epsilon=eps, log_epsilon=log_eps, big_t=req.big_t)
        report = diagnostics.rosenthal_bound(
            drift, minor, c_grid_size=req.c_grid_size, v_start=req.v_start
        )
    except InadmissibleBound as exc:
        raise HTTPException(
            status_code=400,
            detail={"error": str(exc), "failed_hypothesis": exc.hypothesis},
        ) from exc
    except (NotSpdError, ValueError) as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    return RosenthalResponse(
        c_star=report.c_star,
        rho_bar=report.rho_bar,
        log_rho_bar=report.log_rho_bar,
        tv_coefficient=report.tv_coefficient,
    )
