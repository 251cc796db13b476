"""FastAPI service wrapping the library.

Endpoints cover the one-shot computations (signatures, expected-signature
estimation on posted data, pricing, hedging) and the config-driven
experiment runner.  The CLI talks to this app either over the network or
through an in-process ASGI transport; both see the same surface.
"""

from __future__ import annotations

from typing import Dict, List, Literal, Optional

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, ConfigDict, Field

from . import __version__
from .config import ExperimentConfig
from .estimators import corrected_expected_signature, expected_signature, with_hac
from .paths import Partition, PiecewiseLinearPath, add_time, lead_lag, qv_augment
from .pricing import hedge as solve_hedge
from .pricing import pnl_backtest
from .runners import NumericFailure, run_experiment
from .signatures import signature_dict
from .tensor import Functional, TensorSeries
from .words import parse_word


class PathPayload(BaseModel):
    model_config = ConfigDict(extra="forbid")

    times: List[float]
    samples: List[List[float]]

    def to_path(self) -> PiecewiseLinearPath:
        try:
            return PiecewiseLinearPath(Partition(np.asarray(self.times)), np.asarray(self.samples))
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc


class SignatureRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    path: PathPayload
    truncation: int = 4
    transform: Literal["none", "add_time", "lead_lag", "qv"] = "none"


class SignatureResponse(BaseModel):
    dimension: int
    truncation: int
    coefficients: Dict[str, float]


class ExpectedSignatureRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    paths: List[PathPayload]
    words: List[str]
    correction: Literal["none", "c1", "c2"] = "none"
    hac_upsilon: Optional[float] = None


class ExpectedSignatureResponse(BaseModel):
    words: List[str]
    phi_hat: List[float]
    standard_error: List[float]
    c_used: Optional[List[float]] = None
    variance_ratio: Optional[List[float]] = None
    fallback_words: List[str] = Field(default_factory=list)
    hac: Optional[List[List[float]]] = None
    n: int


class HedgeRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    payoff: Dict[str, float]
    p0: float = 0.0
    phi: Dict[str, float]
    phi_truncation: int
    truncation: int = 2
    ridge: float = 1e-8


class HedgeResponse(BaseModel):
    ell: Dict[str, float]
    residual_objective: float


class BacktestRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    ell: Dict[str, float]
    paths: List[PathPayload]


class BacktestResponse(BaseModel):
    pnl: List[float]


class ExperimentResponse(BaseModel):
    kind: str
    summary: Dict[str, object]
    samples_csv: str
    plot_svg: Optional[str] = None


def create_app() -> FastAPI:
    app = FastAPI(
        title="expsig",
        version=__version__,
        description="Expected-signature estimation service",
    )

    @app.get("/health")
    def health() -> Dict[str, str]:
        return {"status": "ok", "version": __version__}

    @app.post("/signature", response_model=SignatureResponse)
    def compute_signature(req: SignatureRequest) -> SignatureResponse:
        path = req.path.to_path()
        try:
            if req.transform == "add_time":
                path = add_time(path)
            elif req.transform == "lead_lag":
                path = lead_lag(path)
            elif req.transform == "qv":
                path = qv_augment(path)
            coeffs = signature_dict(path, req.truncation)
        except (ValueError, OverflowError) as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return SignatureResponse(
            dimension=path.d, truncation=req.truncation, coefficients=coeffs
        )

    @app.post("/expected-signature", response_model=ExpectedSignatureResponse)
    def estimate(req: ExpectedSignatureRequest) -> ExpectedSignatureResponse:
        if not req.paths:
            raise HTTPException(status_code=422, detail="empty path list")
        paths = [p.to_path() for p in req.paths]
        d = paths[0].d
        try:
            words = [parse_word(w, d) for w in req.words]
            if req.correction == "none":
                report = expected_signature(paths, words)
            else:
                report = corrected_expected_signature(paths, words, c_mode=req.correction)
            if req.hac_upsilon is not None:
                report = with_hac(report, upsilon=req.hac_upsilon)
        except (ValueError, OverflowError) as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return ExpectedSignatureResponse(
            words=report.words,
            phi_hat=[float(v) for v in report.phi_hat],
            standard_error=[float(v) for v in report.standard_errors()],
            c_used=None if report.c_used is None else [float(v) for v in report.c_used],
            variance_ratio=None
            if report.variance_ratio is None
            else [float(v) for v in report.variance_ratio],
            fallback_words=report.fallback_words,
            hac=None if report.hac is None else [[float(v) for v in r] for r in report.hac],
            n=report.n,
        )

    @app.post("/hedge", response_model=HedgeResponse)
    def run_hedge_endpoint(req: HedgeRequest) -> HedgeResponse:
        try:
            f = Functional.from_strings(4, max(req.truncation, 1), req.payoff)
            f = Functional(4, max((len(w) for w in f.coeffs), default=1), f.coeffs)
            phi_words = {parse_word(k, 4): v for k, v in req.phi.items()}
            phi = TensorSeries.zero(4, req.phi_truncation)
            for w, v in phi_words.items():
                flat = phi.levels[len(w)]
                rank = 0
                for x in w.letters:
                    rank = rank * 4 + (x - 1)
                flat[rank] = v
            result = solve_hedge(f, req.p0, phi, req.truncation, ridge=req.ridge)
        except (ValueError, RuntimeError) as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return HedgeResponse(
            ell=result.ell.to_strings(), residual_objective=result.residual_objective
        )

    @app.post("/backtest", response_model=BacktestResponse)
    def run_backtest(req: BacktestRequest) -> BacktestResponse:
        try:
            paths = [p.to_path() for p in req.paths]
            K = max((len(parse_word(w, 2)) for w in req.ell), default=0)
            ell = Functional.from_strings(2, max(K, 0), req.ell)
            pnl = pnl_backtest(ell, paths)
        except (ValueError, RuntimeError) as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return BacktestResponse(pnl=[float(v) for v in pnl])

    @app.post("/experiments/run", response_model=ExperimentResponse)
    def experiments_run(config: ExperimentConfig) -> ExperimentResponse:
        try:
            result = run_experiment(config)
        except NumericFailure as exc:
            raise HTTPException(status_code=500, detail=str(exc)) from exc
        except (ValueError, OverflowError) as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return ExperimentResponse(
            kind=result.kind,
            summary=result.summary,
            samples_csv=result.samples_csv,
            plot_svg=result.plot_svg,
        )

    return app


app = create_app()
