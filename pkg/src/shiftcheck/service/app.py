"""FastAPI service exposing fitting, estimation, evaluation and synthesis.

The service operates on bundle directories on its local filesystem; requests
carry paths, not tensors. Validation failures map to HTTP 400, I/O failures
to HTTP 404/500 with a machine-readable ``kind`` so clients can translate
them into exit codes.
"""

from __future__ import annotations

import dataclasses
import datetime
import json

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from ..bundle import BundleError, load_bundle, save_bundle
from ..pipeline import METHODS, run_estimate, run_evaluate, save_fitted, load_fitted
from ..synthetic import PRESETS, generate, scenario_from_dict
from .schemas import (
    ErrorResponse,
    EstimateRequest,
    EstimateResponse,
    EvaluateRequest,
    EvaluateResponse,
    FitRequest,
    FitResponse,
    ReportModel,
    SignificanceModel,
    SynthRequest,
    SynthResponse,
)

app = FastAPI(
    title="shiftcheck",
    description="Label-free accuracy estimation under covariate shift.",
    version="0.1.0",
)


def _now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


@app.exception_handler(BundleError)
@app.exception_handler(ValueError)
async def _validation_handler(request: Request, exc: Exception) -> JSONResponse:
    return JSONResponse(
        status_code=400, content=ErrorResponse(error=str(exc), kind="validation").model_dump()
    )


@app.exception_handler(FileNotFoundError)
async def _missing_handler(request: Request, exc: FileNotFoundError) -> JSONResponse:
    return JSONResponse(
        status_code=404, content=ErrorResponse(error=str(exc), kind="io").model_dump()
    )


@app.exception_handler(OSError)
async def _io_handler(request: Request, exc: OSError) -> JSONResponse:
    return JSONResponse(
        status_code=500, content=ErrorResponse(error=str(exc), kind="io").model_dump()
    )


@app.get("/health")
def health() -> dict:
    return {"status": "ok"}


@app.get("/methods")
def methods() -> dict:
    return {"methods": list(METHODS)}


@app.post("/synth", response_model=SynthResponse)
def synth(req: SynthRequest) -> SynthResponse:
    if (req.preset is None) == (req.scenario is None):
        raise ValueError("give exactly one of preset or scenario")
    if req.preset is not None:
        if req.preset not in PRESETS:
            raise ValueError(f"unknown preset {req.preset!r}; valid: {sorted(PRESETS)}")
        scenario = PRESETS[req.preset]
    else:
        scenario = scenario_from_dict(req.scenario)
    if req.seed is not None:
        scenario = dataclasses.replace(scenario, seed=req.seed)
    bundle = generate(scenario)
    save_bundle(bundle, req.out_dir)
    return SynthResponse(
        out_dir=req.out_dir,
        name=scenario.name,
        seed=scenario.seed,
        n_train=len(bundle.train_features),
        n_val=len(bundle.val_features),
        n_test=len(bundle.test_features),
    )


@app.post("/fit", response_model=FitResponse)
def fit(req: FitRequest) -> FitResponse:
    bundle = load_bundle(req.bundle)
    artifacts = save_fitted(bundle, req.config.to_config(), req.out_dir)
    return FitResponse(out_dir=req.out_dir, artifacts=artifacts)


@app.post("/estimate", response_model=EstimateResponse)
def estimate(req: EstimateRequest) -> EstimateResponse:
    bundle = load_bundle(req.bundle)
    bundle_b = load_bundle(req.bundle_b) if req.bundle_b is not None else None
    fitted_checker = None
    if req.fitted_dir is not None:
        fitted_checker, _ = load_fitted(req.fitted_dir)
    reports = run_estimate(
        bundle,
        req.methods,
        req.config.to_config(),
        bundle_b=bundle_b,
        fitted_checker=fitted_checker,
    )
    return EstimateResponse(
        bundle=req.bundle,
        reports=[ReportModel(**r.to_dict()) for r in reports],
        timestamp=_now(),
    )


@app.post("/evaluate", response_model=EvaluateResponse)
def evaluate(req: EvaluateRequest) -> EvaluateResponse:
    records, comparison, files = run_evaluate(
        req.bundles,
        req.methods,
        req.config.to_config(),
        bundle_b_paths=req.bundles_b,
        out_dir=req.out_dir,
        dataset_family=req.dataset_family,
    )
    mae_by_method: dict = {}
    significance = []
    best = None
    equivalent: list = []
    if comparison is not None:
        mae_by_method = comparison.mae_by_method
        best = comparison.best_method
        equivalent = comparison.best_equivalent
        significance = [
            SignificanceModel(**dataclasses.asdict(res)) for res in comparison.results
        ]
    else:
        method = req.methods[0]
        errs = [r.absolute_error for r in records if r.method == method]
        mae_by_method = {method: float(sum(errs) / len(errs))} if errs else {}
    return EvaluateResponse(
        n_records=len(records),
        mae_by_method=mae_by_method,
        best_method=best,
        best_equivalent=equivalent,
        significance=significance,
        files=files,
        timestamp=_now(),
    )
