"""Request/response models for the execution service."""
from __future__ import annotations

from typing import Literal, Optional, Union

from pydantic import BaseModel, Field

JsonValue = Union[int, float, str]


class ColumnSpec(BaseModel):
    name: str
    type: Literal["integer", "double", "string"]


class RelationPayload(BaseModel):
    name: str
    schema_: list[ColumnSpec] = Field(alias="schema")
    rows: list[list[JsonValue]] = Field(default_factory=list)

    model_config = {"populate_by_name": True}


class LimitsPayload(BaseModel):
    max_iterations: Optional[int] = Field(default=None, ge=1)
    max_rows: Optional[int] = Field(default=None, ge=1)
    timeout_ms: Optional[int] = Field(default=None, ge=1)


class ExecuteRequest(BaseModel):
    program: str
    relations: list[RelationPayload] = Field(default_factory=list)
    limits: Optional[LimitsPayload] = None


class StatsPayload(BaseModel):
    iterations: int
    rows_produced: int
    elapsed_ms: float


class ErrorPayload(BaseModel):
    kind: str
    message: str
    line: Optional[int] = None
    column: Optional[int] = None


class ExecuteResponse(BaseModel):
    status: Literal["ok", "error"]
    columns: Optional[list[str]] = None
    rows: Optional[list[list[JsonValue]]] = None
    stats: Optional[StatsPayload] = None
    error: Optional[ErrorPayload] = None


class ExamplePayload(BaseModel):
    id: str
    title: str
    program: str
    relations: list[RelationPayload] = Field(default_factory=list)


class SlotPayload(BaseModel):
    name: str
    attrs: list[ColumnSpec]


class ParamPayload(BaseModel):
    name: str
    type: Literal["integer", "double", "string"]
    default: Optional[JsonValue] = None
    required: bool
    doc: str = ""


class FunctionPayload(BaseModel):
    name: str
    doc: str
    slots: list[SlotPayload]
    params: list[ParamPayload]
    template: str
