"""Run the probe service from the command line."""

from __future__ import annotations

import argparse

import uvicorn

from .app import ServeConfig, TASKS, create_app
from .backends import STUB_MODEL


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="model-probe",
        description="HTTP probe service over pretrained or stub models.",
    )
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8080)
    parser.add_argument(
        "--models",
        action="append",
        default=[],
        metavar="TASK=MODEL",
        help="model id per task (nli, fill_mask, qa); repeatable, comma-separated pairs allowed",
    )
    parser.add_argument("--k-cap", type=int, default=50)
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--timeout", type=float, default=30.0, help="per-request seconds")
    return parser


def build_config(argv: list[str] | None = None) -> ServeConfig:
    parser = _parser()
    args = parser.parse_args(argv)
    models = {task: STUB_MODEL for task in TASKS}
    for spec in args.models:
        for part in filter(None, (piece.strip() for piece in spec.split(","))):
            task, sep, model = part.partition("=")
            if not sep or task not in TASKS or not model:
                parser.error(
                    f"--models expects task=model with task one of {', '.join(TASKS)}, got {part!r}"
                )
            models[task] = model
    try:
        return ServeConfig(
            models=models,
            host=args.host,
            port=args.port,
            k_cap=args.k_cap,
            device=args.device,
            timeout=args.timeout,
        )
    except ValueError as err:
        parser.error(str(err))


def main(argv: list[str] | None = None) -> None:
    cfg = build_config(argv)
    uvicorn.run(create_app(cfg), host=cfg.host, port=cfg.port)


if __name__ == "__main__":
    main()
