"""Pydantic request/response models for the annotation service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class WorkerCreated(BaseModel):
    worker_id: str


class NextTaskRequest(BaseModel):
    worker_id: str


class Rect(BaseModel):
    x: int
    y: int
    width: int
    height: int


class PaletteClass(BaseModel):
    id: int
    name: str


class TaskDescriptor(BaseModel):
    task_id: str
    image_id: str
    image_url: str
    image_width: int
    image_height: int
    kind: str
    # Highlight rect is the block shrunk by 1 px so the outline drawn on it
    # stays clear of the pixels being annotated; block_rect is authoritative.
    block_rect: Rect | None
    highlight_rect: Rect | None
    palette: list[PaletteClass]
    min_seconds: float


class SubmissionPolygon(BaseModel):
    class_id: int = Field(ge=0, le=254)
    vertices: list[tuple[float, float]] = Field(min_length=3)


class ApiSubmissionPayload(BaseModel):
    task_id: str
    polygons: list[SubmissionPolygon]
    active_seconds: float = Field(ge=0)


class PayoutOut(BaseModel):
    base: float
    bonus: float
    total: float


class VerdictResponse(BaseModel):
    verdict: str  # "accepted" | "rejected"
    reason: str | None = None
    payout: PayoutOut | None = None


class StatusResponse(BaseModel):
    open: int
    assigned: int
    submitted: int
    accepted: int
    rejected: int
    total: int
    workers: int
    total_payout: float
