"""HTTP probe service.

Exposes the wire protocol the evaluation harness's remote provider
speaks: three POST endpoints returning probability shapes, plus a health
endpoint. The backend loads on a side thread after startup; until it is
ready every inference route answers 503. Inference itself runs on a
single worker thread, so requests are handled concurrently but the model
is never invoked reentrantly and no request mutates shared state.
"""

from __future__ import annotations

import asyncio
import threading
from concurrent.futures import ThreadPoolExecutor
from contextlib import asynccontextmanager
from dataclasses import dataclass, field
from typing import Callable

from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .backends import Backend, STUB_MODEL, make_backend

TASKS = ("nli", "fill_mask", "qa")


@dataclass
class ServeConfig:
    models: dict[str, str] = field(
        default_factory=lambda: {task: STUB_MODEL for task in TASKS}
    )
    host: str = "127.0.0.1"
    port: int = 8080
    k_cap: int = 50
    device: str = "cpu"
    timeout: float = 30.0

    def __post_init__(self):
        unknown = set(self.models) - set(TASKS)
        if unknown:
            raise ValueError(f"unknown tasks in models: {sorted(unknown)}")
        for task in TASKS:
            self.models.setdefault(task, STUB_MODEL)
        if self.k_cap < 2:
            raise ValueError(f"k cap must be at least 2, got {self.k_cap}")
        if self.timeout <= 0:
            raise ValueError(f"timeout must be positive, got {self.timeout}")


class NliIn(BaseModel):
    premise: str = Field(min_length=1)
    hypothesis: str = Field(min_length=1)


class FillMaskIn(BaseModel):
    text: str = Field(min_length=1)
    k: int = Field(default=5, ge=1)


class QaIn(BaseModel):
    question: str = Field(min_length=1)
    context: str = Field(min_length=1)


def _normalized(weights: dict[str, float]) -> dict[str, float]:
    total = sum(weights.values())
    if total <= 0.0:
        raise HTTPException(status_code=500, detail="backend produced no probability mass")
    return {label: weight / total for label, weight in weights.items()}


def create_app(
    cfg: ServeConfig, backend_factory: Callable[[], Backend] | None = None
) -> FastAPI:
    factory = backend_factory or (lambda: make_backend(cfg.models, device=cfg.device))

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        app.state.ready = threading.Event()
        app.state.pool = ThreadPoolExecutor(max_workers=1)

        def load() -> None:
            app.state.backend = factory()
            app.state.ready.set()

        threading.Thread(target=load, daemon=True).start()
        try:
            yield
        finally:
            app.state.pool.shutdown(wait=False, cancel_futures=True)

    app = FastAPI(title="model-probe", lifespan=lifespan)

    @app.exception_handler(RequestValidationError)
    async def malformed(request: Request, exc: RequestValidationError) -> JSONResponse:
        # the harness's provider treats any non-503 error as final; keep
        # the classic code for bad payloads rather than 422
        detail = [
            {"loc": list(err["loc"]), "msg": err["msg"], "type": err["type"]}
            for err in exc.errors()
        ]
        return JSONResponse(status_code=400, content={"detail": detail})

    async def run_inference(request: Request, task: str, *args):
        app_state = request.app.state
        if not app_state.ready.is_set():
            raise HTTPException(status_code=503, detail="model loading")
        loop = asyncio.get_running_loop()
        bound = getattr(app_state.backend, task)
        try:
            return await asyncio.wait_for(
                loop.run_in_executor(app_state.pool, bound, *args), timeout=cfg.timeout
            )
        except asyncio.TimeoutError:
            raise HTTPException(status_code=504, detail="inference timed out") from None

    @app.post("/v1/nli")
    async def nli(body: NliIn, request: Request):
        weights = await run_inference(request, "nli", body.premise, body.hypothesis)
        return {"model": cfg.models["nli"], "probs": _normalized(weights)}

    @app.post("/v1/fill_mask")
    async def fill_mask(body: FillMaskIn, request: Request):
        k = min(body.k, cfg.k_cap)
        candidates = await run_inference(request, "fill_mask", body.text, k)
        return {
            "model": cfg.models["fill_mask"],
            "candidates": [{"token": t, "prob": p} for t, p in candidates[:k]],
        }

    @app.post("/v1/qa")
    async def qa(body: QaIn, request: Request):
        yes, no = await run_inference(request, "qa", body.question, body.context)
        return {"model": cfg.models["qa"], "probs": _normalized({"yes": yes, "no": no})}

    @app.get("/healthz")
    async def healthz(request: Request):
        if not request.app.state.ready.is_set():
            return JSONResponse(status_code=503, content={"status": "loading"})
        return {"status": "ok", "models": cfg.models}

    return app
