"""HTTP service delivering annotation tasks to browser clients.

One task at a time per worker: the descriptor carries the image URL, the
block rectangle, the palette, and the minimum active seconds enforced by
QC. Submissions come back as polygon lists; verdicts and payouts are
computed synchronously. All mutations funnel through the serialized task
store, so handlers are free to run concurrently.
"""

from __future__ import annotations

import mimetypes
import os
from pathlib import Path

from fastapi import FastAPI, Response
from fastapi.responses import JSONResponse

from ..datasets import Workspace, split_image_key
from ..errors import BlockforgeError, StateError, UnknownIdError
from ..raster import PolygonAnnotation
from ..workflow import Submission
from .schemas import (
    ApiSubmissionPayload,
    NextTaskRequest,
    PaletteClass,
    PayoutOut,
    Rect,
    StatusResponse,
    TaskDescriptor,
    VerdictResponse,
    WorkerCreated,
)

VERTEX_SLACK_PX = 1.0


def _shrink(rect: tuple[int, int, int, int], margin: int = 1) -> Rect:
    x0, y0, x1, y1 = rect
    return Rect(
        x=x0 + margin,
        y=y0 + margin,
        width=max(0, (x1 - x0) - 2 * margin),
        height=max(0, (y1 - y0) - 2 * margin),
    )


def create_app(data_root: str | Path | None = None, *, clock=None, seed: int = 0) -> FastAPI:
    root = Path(data_root or os.environ.get("BLOCKFORGE_DATA", "./blockforge-data"))
    ws = Workspace(root, clock=clock, seed=seed)
    app = FastAPI(title="blockforge", version="0.1.0")
    app.state.workspace = ws

    @app.exception_handler(UnknownIdError)
    async def _unknown(request, exc):
        return JSONResponse(status_code=404, content={"detail": str(exc)})

    @app.exception_handler(StateError)
    async def _conflict(request, exc):
        return JSONResponse(status_code=409, content={"detail": str(exc)})

    @app.exception_handler(BlockforgeError)
    async def _invalid(request, exc):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.post("/workers", response_model=WorkerCreated)
    def register_worker():
        return WorkerCreated(worker_id=ws.store.register_worker())

    @app.post("/tasks/next", response_model=TaskDescriptor, responses={204: {"description": "queue empty"}})
    def next_task(req: NextTaskRequest):
        task = ws.store.assign_next(req.worker_id)
        if task is None:
            return Response(status_code=204)
        dataset_id, image_id = split_image_key(task.image_id)
        rec = ws.dataset(dataset_id)
        info = rec.images[image_id]
        rect = task.block_rect()
        return TaskDescriptor(
            task_id=task.task_id,
            image_id=task.image_id,
            image_url=f"/images/{task.image_id}",
            image_width=info["width"],
            image_height=info["height"],
            kind=task.kind.value,
            block_rect=(
                Rect(x=rect[0], y=rect[1], width=rect[2] - rect[0], height=rect[3] - rect[1])
                if rect
                else None
            ),
            highlight_rect=_shrink(rect) if rect else None,
            palette=[PaletteClass(id=c, name=n) for c, n in rec.palette.classes],
            min_seconds=ws.store.qc.min_seconds(task.kind),
        )

    @app.post("/tasks/{task_id}/submission", response_model=VerdictResponse)
    def submit(task_id: str, payload: ApiSubmissionPayload):
        if payload.task_id != task_id:
            return JSONResponse(
                status_code=422, content={"detail": "payload task_id does not match URL"}
            )
        task = ws.store.get_task(task_id)
        dataset_id, image_id = split_image_key(task.image_id)
        rec = ws.dataset(dataset_id)
        info = rec.images[image_id]

        for poly in payload.polygons:
            for x, y in poly.vertices:
                if not (
                    -VERTEX_SLACK_PX <= x <= info["width"] + VERTEX_SLACK_PX
                    and -VERTEX_SLACK_PX <= y <= info["height"] + VERTEX_SLACK_PX
                ):
                    return JSONResponse(
                        status_code=422,
                        content={"detail": f"vertex ({x}, {y}) outside image bounds"},
                    )
            if poly.class_id >= rec.palette.k:
                return JSONResponse(
                    status_code=422,
                    content={"detail": f"class id {poly.class_id} outside palette"},
                )

        if task.worker_id is None or task.assigned_at is None:
            raise StateError(f"task {task_id} is not assigned")
        wall = max(0.0, ws.store.clock() - task.assigned_at)
        submission = Submission(
            task_id=task_id,
            polygons=tuple(
                PolygonAnnotation(vertices=tuple(p.vertices), class_id=p.class_id, z_order=i)
                for i, p in enumerate(payload.polygons)
            ),
            active_seconds=payload.active_seconds,
            worker_id=task.worker_id,
        )
        verdict, payout = ws.store.submit(
            submission,
            palette=rec.palette,
            image_size=(info["width"], info["height"]),
            wall_seconds=wall,
        )
        return VerdictResponse(
            verdict="accepted" if verdict.accepted else "rejected",
            reason=verdict.reason,
            payout=(
                PayoutOut(base=payout[0], bonus=payout[1], total=payout[0] + payout[1])
                if payout
                else None
            ),
        )

    @app.get("/images/{key}")
    def get_image(key: str):
        dataset_id, image_id = split_image_key(key)
        path = ws.image_path(dataset_id, image_id)
        media = mimetypes.guess_type(path.name)[0] or "application/octet-stream"
        return Response(content=path.read_bytes(), media_type=media)

    @app.get("/export/{dataset_id}")
    def export(dataset_id: str):
        data = ws.export_zip(dataset_id)
        return Response(
            content=data,
            media_type="application/zip",
            headers={"Content-Disposition": f'attachment; filename="{dataset_id}-labels.zip"'},
        )

    @app.get("/status", response_model=StatusResponse)
    def status():
        counts = ws.store.counts()
        return StatusResponse(
            open=counts["open"],
            assigned=counts["assigned"],
            submitted=counts["submitted"],
            accepted=counts["accepted"],
            rejected=counts["rejected"],
            total=counts["total"],
            workers=len(ws.store.workers),
            total_payout=ws.store.total_payout(),
        )

    return app
