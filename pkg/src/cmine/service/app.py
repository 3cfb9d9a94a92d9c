"""HTTP face of the pipeline: one endpoint per stage, mirroring the CLI."""

from __future__ import annotations

import logging

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..config import RunConfig, load_config
from ..errors import CmineError, ConfigError, StageError
from ..pipeline import (
    ANALYSIS_TARGETS,
    FIXTURE_K_STAGE1,
    FIXTURE_K_STAGE2,
    FIXTURE_SPEC,
    generate_fixture,
    run_analysis,
    run_pipeline,
    run_synthesis,
    stage_embed,
    stage_prune,
    stage_sample,
    stage_stage1,
    stage_stage2,
    sweep_theta,
)
from ..synthetic import SyntheticSpec
from .schemas import (
    AnalyzeRequest,
    FixtureRequest,
    HealthResponse,
    ReportResponse,
    ResultResponse,
    RunRequest,
    SweepRequest,
)

log = logging.getLogger(__name__)


def _http_error(exc: CmineError) -> HTTPException:
    detail: dict = {"error": {"type": type(exc).__name__, "message": str(exc)}}
    status = 400
    if isinstance(exc, StageError):
        status = 500
        detail["error"]["stage"] = exc.stage
        if exc.report is not None:
            detail["error"]["report"] = exc.report
    return HTTPException(status_code=status, detail=detail)


def _load(req: RunRequest) -> RunConfig:
    overrides: dict = {}
    if req.seed is not None:
        overrides["seed"] = req.seed
    if req.out is not None:
        overrides["output_dir"] = req.out
    if req.workers is not None:
        overrides["workers"] = req.workers
    return load_config(req.config, overrides=overrides)


def create_app() -> FastAPI:
    app = FastAPI(title="cmine", version=__version__)

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/fixture", response_model=ResultResponse)
    def fixture(req: FixtureRequest) -> ResultResponse:
        spec = FIXTURE_SPEC
        patch = {
            k: v
            for k, v in {
                "languages": tuple(req.languages) if req.languages else None,
                "n_universal": req.n_universal,
                "n_islands_per_lang": req.n_islands_per_lang,
                "entries_per_lang": req.entries_per_lang,
                "dim": req.dim,
                "sigma_in": req.sigma_in,
                "delta": req.delta,
            }.items()
            if v is not None
        }
        try:
            if patch:
                spec = SyntheticSpec(**{**spec.__dict__, **patch})
            manifest = generate_fixture(
                req.out,
                seed=req.seed,
                spec=spec,
                contaminate=req.contaminate,
                k_stage1=req.k_stage1 or FIXTURE_K_STAGE1,
                k_stage2=req.k_stage2 or FIXTURE_K_STAGE2,
            )
        except CmineError as exc:
            raise _http_error(exc) from exc
        return ResultResponse(result=manifest)

    def _stage_result(req: RunRequest, runner) -> ResultResponse:
        try:
            cfg = _load(req)
            return ResultResponse(result=runner(cfg))
        except CmineError as exc:
            raise _http_error(exc) from exc

    @app.post("/run/sample", response_model=ResultResponse)
    def run_sample(req: RunRequest) -> ResultResponse:
        def runner(cfg: RunConfig) -> dict:
            dset, loaded, warnings = stage_sample(cfg)
            return {
                "loaded": loaded,
                "sampled": len(dset),
                "per_language": dset.lang_counts,
                "warnings": warnings,
            }

        return _stage_result(req, runner)

    @app.post("/run/prune", response_model=ResultResponse)
    def run_prune(req: RunRequest) -> ResultResponse:
        def runner(cfg: RunConfig) -> dict:
            pruned = stage_prune(cfg)
            return {"pruned": len(pruned), "per_language": pruned.lang_counts}

        return _stage_result(req, runner)

    @app.post("/run/embed", response_model=ResultResponse)
    def run_embed(req: RunRequest) -> ResultResponse:
        def runner(cfg: RunConfig) -> dict:
            seq, units = stage_embed(cfg)
            return {
                "sequences": len(seq),
                "units": 0 if units is None else len(units),
                "dim": seq.dim,
            }

        return _stage_result(req, runner)

    @app.post("/run/stage1", response_model=ResultResponse)
    def run_s1(req: RunRequest) -> ResultResponse:
        def runner(cfg: RunConfig) -> dict:
            candidates = stage_stage1(cfg)
            return {
                "candidates": len(candidates),
                "per_language": candidates.per_language,
                "warnings": list(candidates.warnings),
            }

        return _stage_result(req, runner)

    @app.post("/run/stage2", response_model=ResultResponse)
    def run_s2(req: RunRequest) -> ResultResponse:
        def runner(cfg: RunConfig) -> dict:
            cps, clusters = stage_stage2(cfg)
            return {
                "selected_clusters": len(clusters["selected"]),
                "cp_count": len(cps),
            }

        return _stage_result(req, runner)

    @app.post("/run/mine", response_model=ReportResponse)
    def run_mine(req: RunRequest) -> ReportResponse:
        try:
            cfg = _load(req)
            _, report = run_pipeline(cfg)
        except CmineError as exc:
            raise _http_error(exc) from exc
        return ReportResponse(report=report.to_json_dict())

    @app.post("/run/sweep-theta", response_model=ResultResponse)
    def run_sweep(req: SweepRequest) -> ResultResponse:
        def runner(cfg: RunConfig) -> dict:
            return {"sweeps": sweep_theta(cfg, req.thetas)}

        return _stage_result(req, runner)

    @app.post("/run/analyze", response_model=ResultResponse)
    def run_analyze(req: AnalyzeRequest) -> ResultResponse:
        def runner(cfg: RunConfig) -> dict:
            try:
                return run_analysis(
                    cfg, targets=req.targets or list(ANALYSIS_TARGETS), per_lang=req.per_lang
                )
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc

        return _stage_result(req, runner)

    @app.post("/run/synth", response_model=ResultResponse)
    def run_synth(req: RunRequest) -> ResultResponse:
        return _stage_result(req, run_synthesis)

    return app
