"""Declarative run configuration: TOML file plus CMINE_* environment overrides."""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .corpus import DEFAULT_BLOCKLIST
from .errors import ConfigError
from .mining import MiningConfig

_SECTIONS = ("corpus", "sample", "prune", "vectors", "mining", "synth", "analysis")
_METRICS = ("cosine", "euclidean")


@dataclass(frozen=True)
class RunConfig:
    corpus_files: dict[str, str]  # language -> JSONL path
    output_dir: str
    seed: int = 0
    workers: int = 1
    quotas: dict[str, int] | None = None
    blocklist: tuple[str, ...] = tuple(sorted(DEFAULT_BLOCKLIST))
    provider_url: str | None = None
    vector_file: str | None = None
    units_file: str | None = None
    dim: int | None = None
    cache_dir: str | None = None
    mining: MiningConfig = field(default_factory=MiningConfig)
    synth_multiplicity: int = 1
    synth_top_n: int = 10
    synth_client: str = "stub"
    analysis_metric: str = "cosine"
    pairs_file: str | None = None
    baseline_pairs_file: str | None = None

    def __post_init__(self) -> None:
        if not self.corpus_files:
            raise ConfigError("at least one corpus file required")
        if (self.provider_url is None) == (self.vector_file is None):
            raise ConfigError("exactly one of provider_url and vector_file must be set")
        if self.provider_url is not None and self.dim is None:
            raise ConfigError("dim is required when embedding through a provider")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.analysis_metric not in _METRICS:
            raise ConfigError(f"analysis metric must be one of {_METRICS}")
        if self.synth_multiplicity < 1 or self.synth_top_n < 1:
            raise ConfigError("synth multiplicity and top_n must be >= 1")
        if self.quotas is not None and any(q < 0 for q in self.quotas.values()):
            raise ConfigError("quotas must be non-negative")

    def to_dict(self) -> dict[str, Any]:
        """Effective config with defaults materialized, for the report echo."""
        return {
            "seed": self.seed,
            "output_dir": self.output_dir,
            "workers": self.workers,
            "corpus": {"files": dict(sorted(self.corpus_files.items()))},
            "sample": {"quotas": dict(sorted(self.quotas.items())) if self.quotas else None},
            "prune": {"blocklist": sorted(self.blocklist)},
            "vectors": {
                "provider_url": self.provider_url,
                "file": self.vector_file,
                "units_file": self.units_file,
                "dim": self.dim,
                "cache_dir": self.cache_dir,
            },
            "mining": {
                "k_stage1": self.mining.k_stage1,
                "k_stage2": self.mining.k_stage2,
                "k_nn": self.mining.k_nn,
                "tau": self.mining.tau,
                "theta": self.mining.theta,
                "entropy_keep_fraction": self.mining.entropy_keep_fraction,
                "top_n_central": self.mining.top_n_central,
                "seed": self.mining.seed,
            },
            "synth": {
                "multiplicity": self.synth_multiplicity,
                "top_n": self.synth_top_n,
                "client": self.synth_client,
            },
            "analysis": {
                "metric": self.analysis_metric,
                "pairs_file": self.pairs_file,
                "baseline_pairs_file": self.baseline_pairs_file,
            },
        }


def _parse_env_value(raw: str) -> Any:
    try:
        return tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        return raw


def _apply_env(data: dict[str, Any], env: Mapping[str, str]) -> None:
    """Overlay CMINE_<SECTION>_<KEY> / CMINE_<KEY> variables onto parsed TOML."""
    for name in sorted(env):
        if not name.startswith("CMINE_"):
            continue
        rest = name[len("CMINE_") :].lower()
        head, _, tail = rest.partition("_")
        value = _parse_env_value(env[name])
        if head in _SECTIONS and tail:
            data.setdefault(head, {})[tail] = value
        else:
            data[rest] = value


def load_config(
    path: str | Path,
    env: Mapping[str, str] | None = None,
    overrides: Mapping[str, Any] | None = None,
) -> RunConfig:
    """Load and validate a run config; overrides win over env, env over file.

    ``overrides`` takes top-level keys (seed, output_dir, workers) plus the
    per-section dicts, matching the file layout.
    """
    path = Path(path)
    try:
        with path.open("rb") as fh:
            data: dict[str, Any] = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: invalid TOML: {exc}") from exc

    _apply_env(data, os.environ if env is None else env)
    for key, value in (overrides or {}).items():
        if isinstance(value, Mapping):
            section = data.setdefault(key, {})
            section.update(value)
        elif value is not None:
            data[key] = value

    corpus = data.get("corpus", {})
    files = corpus.get("files")
    if not isinstance(files, dict) or not files:
        raise ConfigError("config needs a [corpus] files table mapping language to path")

    base = path.parent

    def resolve(p: Any) -> str:
        return str((base / str(p)).resolve()) if not os.path.isabs(str(p)) else str(p)

    vectors = data.get("vectors", {})
    sample = data.get("sample", {})
    prune = data.get("prune", {})
    synth = data.get("synth", {})
    analysis = data.get("analysis", {})

    mining_raw = dict(data.get("mining", {}))
    mining_raw.setdefault("seed", data.get("seed", 0))
    try:
        mining = MiningConfig(**mining_raw)
    except TypeError as exc:
        raise ConfigError(f"bad [mining] key: {exc}") from exc

    quotas = sample.get("quotas")
    if quotas is not None:
        quotas = {str(k): int(v) for k, v in quotas.items()}

    blocklist = prune.get("blocklist")
    if blocklist is None:
        blocklist = tuple(sorted(DEFAULT_BLOCKLIST))
    else:
        blocklist = tuple(str(t) for t in blocklist)

    cfg = RunConfig(
        corpus_files={str(k): resolve(v) for k, v in files.items()},
        output_dir=resolve(data.get("output_dir", "out")),
        seed=int(data.get("seed", 0)),
        workers=int(data.get("workers", 1)),
        quotas=quotas,
        blocklist=blocklist,
        provider_url=vectors.get("provider_url"),
        vector_file=resolve(vectors["file"]) if "file" in vectors else None,
        units_file=resolve(vectors["units_file"]) if "units_file" in vectors else None,
        dim=int(vectors["dim"]) if "dim" in vectors else None,
        cache_dir=resolve(vectors["cache_dir"]) if "cache_dir" in vectors else None,
        mining=mining,
        synth_multiplicity=int(synth.get("multiplicity", 1)),
        synth_top_n=int(synth.get("top_n", 10)),
        synth_client=str(synth.get("client", "stub")),
        analysis_metric=str(analysis.get("metric", "cosine")),
        pairs_file=resolve(analysis["pairs_file"]) if "pairs_file" in analysis else None,
        baseline_pairs_file=(
            resolve(analysis["baseline_pairs_file"])
            if "baseline_pairs_file" in analysis
            else None
        ),
    )

    missing = [p for p in cfg.corpus_files.values() if not Path(p).exists()]
    if cfg.vector_file is not None and not Path(cfg.vector_file).exists():
        missing.append(cfg.vector_file)
    if missing:
        raise ConfigError(f"config references missing paths: {', '.join(missing)}")
    return cfg


def override_theta(cfg: RunConfig, theta: float) -> RunConfig:
    return replace(cfg, mining=cfg.mining.with_theta(theta))
