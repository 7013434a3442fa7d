"""HTTP execution service backing the playground.

    POST /v1/execute    run a program against inline relations
    GET  /v1/examples   bundled, self-contained example programs
    GET  /v1/functions  the library-function catalog

Every request evaluates in a fresh session against its own database; nothing
is shared between requests. A deadline aborts the fixpoint between
iterations, so a hostile non-terminating program costs at most the timeout
plus one iteration.
"""
from __future__ import annotations

import os
import time
from dataclasses import dataclass
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from ..engine import Limits, run_program
from ..errors import EvalTimeoutError, LlibError
from ..library import Catalog
from ..relation import ColumnType, Relation, Schema
from .examples import bundled_examples
from .models import (
    ColumnSpec,
    ErrorPayload,
    ExecuteRequest,
    ExecuteResponse,
    FunctionPayload,
    ParamPayload,
    SlotPayload,
    StatsPayload,
)


@dataclass
class ServiceConfig:
    max_input_rows: int = 10_000
    max_rows: int = 1_000_000
    timeout_ms: int = 10_000
    max_iterations: int = 10_000
    cors: bool = False
    ui_dir: Optional[str] = None

    @classmethod
    def from_env(cls, **overrides) -> "ServiceConfig":
        config = cls(**overrides)
        if "LLIB_TIMEOUT_MS" in os.environ:
            config.timeout_ms = int(os.environ["LLIB_TIMEOUT_MS"])
        if "LLIB_MAX_ROWS" in os.environ:
            config.max_rows = int(os.environ["LLIB_MAX_ROWS"])
        return config


def _payload_relation(payload) -> Relation:
    schema = Schema((c.name, ColumnType.from_name(c.type))
                    for c in payload.schema_)
    return Relation.from_rows(schema, (tuple(row) for row in payload.rows))


def _error_response(exc: LlibError, status: int) -> JSONResponse:
    body = ExecuteResponse(
        status="error",
        error=ErrorPayload(kind=exc.kind, message=str(exc),
                           line=exc.line, column=exc.column))
    return JSONResponse(status_code=status, content=body.model_dump())


def create_app(config: Optional[ServiceConfig] = None) -> FastAPI:
    config = config or ServiceConfig.from_env()
    app = FastAPI(title="llib playground service", version="0.1.0")

    if config.cors:
        from fastapi.middleware.cors import CORSMiddleware
        app.add_middleware(CORSMiddleware, allow_origins=["*"],
                           allow_methods=["*"], allow_headers=["*"])

    @app.exception_handler(RequestValidationError)
    async def malformed(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={
            "status": "error",
            "error": {"kind": "Malformed", "message": str(exc.errors()[:3])},
        })

    @app.post("/v1/execute", response_model=ExecuteResponse)
    def execute(request: ExecuteRequest) -> JSONResponse:
        input_rows = sum(len(r.rows) for r in request.relations)
        if input_rows > config.max_input_rows:
            return _error_response(
                LlibError(f"request carries {input_rows} rows, cap is "
                          f"{config.max_input_rows}"), 413)

        limits = Limits(max_iterations=config.max_iterations,
                        max_rows=config.max_rows)
        timeout_ms = config.timeout_ms
        if request.limits is not None:
            if request.limits.max_iterations is not None:
                limits.max_iterations = min(limits.max_iterations,
                                            request.limits.max_iterations)
            if request.limits.max_rows is not None:
                limits.max_rows = min(limits.max_rows, request.limits.max_rows)
            if request.limits.timeout_ms is not None:
                timeout_ms = min(timeout_ms, request.limits.timeout_ms)
        limits.deadline = time.monotonic() + timeout_ms / 1000.0

        try:
            db = {}
            for payload in request.relations:
                db[payload.name] = _payload_relation(payload)
            result = run_program(request.program, db, limits)
            declared = result.program.declared
            for name in db:
                if name not in declared:
                    raise LlibError(
                        f"relation {name!r} is not declared by the program")
            if result.result is None:
                raise LlibError("program has no query directive")
        except EvalTimeoutError as exc:
            return _error_response(exc, 408)
        except LlibError as exc:
            return _error_response(exc, 422)

        rel = result.result
        body = ExecuteResponse(
            status="ok",
            columns=list(rel.schema.names),
            rows=[list(row) for row in rel.sorted_rows()],
            stats=StatsPayload(
                iterations=result.stats.total_iterations,
                rows_produced=len(rel),
                elapsed_ms=result.stats.elapsed_s * 1000.0))
        return JSONResponse(status_code=200, content=body.model_dump())

    @app.get("/v1/examples")
    def examples():
        return [e.model_dump(by_alias=True) for e in bundled_examples()]

    @app.get("/v1/functions")
    def functions():
        catalog = Catalog()
        out = []
        for name in catalog.names():
            spec = catalog.get(name)
            out.append(FunctionPayload(
                name=spec.name,
                doc=spec.doc,
                slots=[SlotPayload(
                    name=slot.name,
                    attrs=[ColumnSpec(name=a, type=t.value)
                           for a, t in slot.attrs])
                    for slot in spec.slots],
                params=[ParamPayload(
                    name=p.name, type=p.ctype.value, default=p.default,
                    required=p.required, doc=p.doc) for p in spec.params],
                template=spec.template).model_dump())
        return out

    if config.ui_dir is not None:
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=config.ui_dir, html=True),
                  name="playground")

    return app


app = create_app()
