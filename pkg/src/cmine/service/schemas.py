"""Request and response bodies for the HTTP service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str
    version: str


class FixtureRequest(BaseModel):
    out: str
    seed: int = 0
    contaminate: bool = False
    languages: list[str] | None = None
    n_universal: int | None = None
    n_islands_per_lang: int | None = None
    entries_per_lang: int | None = None
    dim: int | None = None
    sigma_in: float | None = None
    delta: float | None = None
    k_stage1: int | None = None
    k_stage2: int | None = None


class RunRequest(BaseModel):
    """Points at a run config on the server; optional field overrides."""

    config: str
    seed: int | None = None
    out: str | None = None
    workers: int | None = None


class SweepRequest(RunRequest):
    thetas: list[float] = Field(min_length=1)


class AnalyzeRequest(RunRequest):
    targets: list[str] | None = None
    per_lang: int = 300


class ResultResponse(BaseModel):
    result: dict


class ReportResponse(BaseModel):
    report: dict
