"""Command-line front end.

Every data-path subcommand is a thin client of the HTTP service: by default
the app runs in-process, with --server the same request goes to a remote
instance instead. Success prints the response JSON on stdout; failures print
a machine-readable error JSON on stderr and exit 1; usage errors exit 2.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

_LOG_LEVELS = ("debug", "info", "warning", "error")


def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--server", help="base URL of a running service (default: in-process)")
    common.add_argument("--log-level", default="warning", choices=_LOG_LEVELS)
    return common


def _add_run_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--config", required=True, help="run config TOML")
    sp.add_argument("--seed", type=int, help="override the config seed")
    sp.add_argument("--out", help="override the config output directory")
    sp.add_argument("--workers", type=int, help="worker pool size")


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags()
    parser = argparse.ArgumentParser(
        prog="cmine", description="culture-point mining pipeline"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    stage_help = {
        "sample": "load corpora and apply per-language quotas",
        "prune": "drop documents with blocklisted category tags",
        "embed": "embed sequences (and units) or load pre-computed vectors",
        "stage1": "per-language density and entropy refinement",
        "stage2": "global clustering, dominance selection, extraction",
        "mine": "run every stage end to end",
        "synth": "build and validate instruction records from mined clusters",
    }
    for name, help_text in stage_help.items():
        sp = sub.add_parser(name, help=help_text, parents=[common])
        _add_run_flags(sp)

    sp = sub.add_parser(
        "sweep-theta", help="re-select at several dominance thresholds", parents=[common]
    )
    _add_run_flags(sp)
    sp.add_argument("--thetas", required=True, help="comma-separated thresholds, e.g. 0.4,0.6,0.8,1.0")

    sp = sub.add_parser("analyze", help="emit plot-ready validation exports", parents=[common])
    _add_run_flags(sp)
    sp.add_argument("--targets", help="comma-separated subset of radar,projection,distribution,mixing")
    sp.add_argument("--per-lang", type=int, default=300, help="sample size per language and group")

    sp = sub.add_parser("gen-fixture", help="write a planted-cluster fixture", parents=[common])
    sp.add_argument("--out", required=True, help="fixture directory")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--contaminate", action="store_true", help="add one cross-lingual entry per island")
    sp.add_argument("--languages", help="comma-separated language codes")
    sp.add_argument("--universal", type=int, help="universal concept count")
    sp.add_argument("--islands", type=int, help="island concepts per language")
    sp.add_argument("--entries", type=int, help="entries per language")
    sp.add_argument("--dim", type=int, help="embedding dimension")
    sp.add_argument("--sigma", type=float, help="within-cluster stddev")
    sp.add_argument("--delta", type=float, help="between-center separation")
    sp.add_argument("--k-stage1", type=int, help="stage-1 cluster count in the emitted config")
    sp.add_argument("--k-stage2", type=int, help="stage-2 cluster count in the emitted config")

    sp = sub.add_parser("serve", help="run the HTTP service", parents=[common])
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=8000)

    return parser


def _csv_floats(raw: str) -> list[float]:
    return [float(x) for x in raw.split(",") if x.strip()]


def _build_request(args: argparse.Namespace) -> tuple[str, dict]:
    if args.command == "gen-fixture":
        payload: dict = {
            "out": os.path.abspath(args.out),
            "seed": args.seed,
            "contaminate": args.contaminate,
        }
        optional = {
            "languages": args.languages.split(",") if args.languages else None,
            "n_universal": args.universal,
            "n_islands_per_lang": args.islands,
            "entries_per_lang": args.entries,
            "dim": args.dim,
            "sigma_in": args.sigma,
            "delta": args.delta,
            "k_stage1": args.k_stage1,
            "k_stage2": args.k_stage2,
        }
        payload.update({k: v for k, v in optional.items() if v is not None})
        return "/fixture", payload

    payload = {"config": os.path.abspath(args.config)}
    for key in ("seed", "out", "workers"):
        value = getattr(args, key, None)
        if value is not None:
            payload[key] = value
    if args.command == "sweep-theta":
        payload["thetas"] = _csv_floats(args.thetas)
        return "/run/sweep-theta", payload
    if args.command == "analyze":
        if args.targets:
            payload["targets"] = [t.strip() for t in args.targets.split(",") if t.strip()]
        payload["per_lang"] = args.per_lang
        return "/run/analyze", payload
    return f"/run/{args.command}", payload


def _post(server: str | None, path: str, payload: dict) -> tuple[int, dict]:
    if server:
        import httpx

        resp = httpx.post(server.rstrip("/") + path, json=payload, timeout=600.0)
        try:
            return resp.status_code, resp.json()
        except ValueError:
            return resp.status_code, {"detail": resp.text}

    import warnings

    with warnings.catch_warnings():
        # the bundled starlette build warns at import time; keep stderr JSON-only
        warnings.simplefilter("ignore")
        from fastapi.testclient import TestClient

    from .service import create_app

    with TestClient(create_app(), raise_server_exceptions=False) as client:
        resp = client.post(path, json=payload)
        try:
            return resp.status_code, resp.json()
        except ValueError:
            return resp.status_code, {"detail": resp.text}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")

    if args.command == "serve":
        import uvicorn

        from .service import create_app

        uvicorn.run(create_app(), host=args.host, port=args.port)
        return 0

    path, payload = _build_request(args)
    status, body = _post(args.server, path, payload)
    if 200 <= status < 300:
        print(json.dumps(body, indent=2, ensure_ascii=False))
        return 0
    error = body.get("detail", body)
    print(json.dumps(error, indent=2, ensure_ascii=False), file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
