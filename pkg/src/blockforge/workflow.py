"""Crowd annotation workflow: tasks, assignment, QC, payouts, merging.

Tasks move along open -> assigned -> submitted -> accepted | rejected.
A rejected task respawns as a fresh open task (new id, same block) so the
rejected record stays immutable; an assigned task whose lease expires
drops back to open. The task store is the single point of mutation: every
mutating call runs under one lock and appends to an append-only JSONL
event log, and replaying that log reproduces the store state bit-exactly.
"""

from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionError, StateError, UnknownIdError
from .raster import (
    VOID,
    BlockGrid,
    BlockRef,
    LabelMap,
    Palette,
    PolygonAnnotation,
    rasterize,
    connected_components,
)
from .selection import SelectionPlan

DEFAULT_LEASE_SECONDS = 30 * 60.0
_TIME_OVERHEAD = 0.022  # block annotation costs up to 2.2x full-image time over 100 blocks


class TaskState(str, Enum):
    OPEN = "open"
    ASSIGNED = "assigned"
    SUBMITTED = "submitted"
    ACCEPTED = "accepted"
    REJECTED = "rejected"


class TaskKind(str, Enum):
    BLOCK = "block"
    FULL = "full"


@dataclass
class AnnotationTask:
    task_id: str
    image_id: str
    block: BlockRef | None
    kind: TaskKind
    state: TaskState = TaskState.OPEN
    worker_id: str | None = None
    assigned_at: float | None = None
    submitted_at: float | None = None
    gt_segment_count: int | None = None

    def block_rect(self) -> tuple[int, int, int, int] | None:
        return self.block.rect() if self.block is not None else None


@dataclass(frozen=True)
class Submission:
    task_id: str
    polygons: tuple[PolygonAnnotation, ...]
    active_seconds: float
    worker_id: str

    def __post_init__(self):
        if self.active_seconds < 0:
            raise ValueError("active_seconds must be nonnegative")


@dataclass(frozen=True)
class QcPolicy:
    """Quality-control thresholds: minimum active time per task kind and
    the minimum segment-count ratio against known ground truth (strictly
    greater than passes)."""

    min_segment_ratio: float = 0.25
    min_seconds_block: float = 10.0
    min_seconds_full: float = 180.0

    def min_seconds(self, kind: TaskKind) -> float:
        return self.min_seconds_block if kind == TaskKind.BLOCK else self.min_seconds_full


@dataclass(frozen=True)
class PayoutPolicy:
    """Base pay plus a wage-topping bonus, clamped by an absolute cap
    and/or a total-pay multiplier cap."""

    base_pay: float
    target_wage: float
    bonus_cap: float | None = None
    bonus_multiplier_cap: float | None = None

    def __post_init__(self):
        for name in ("base_pay", "target_wage", "bonus_cap", "bonus_multiplier_cap"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ValueError(f"{name} must be nonnegative")

    @classmethod
    def suncg_block(cls) -> "PayoutPolicy":
        return cls(base_pay=0.06, target_wage=4.0, bonus_multiplier_cap=1.5)

    @classmethod
    def suncg_full(cls) -> "PayoutPolicy":
        return cls(base_pay=0.96, target_wage=4.0, bonus_multiplier_cap=1.5)

    @classmethod
    def cityscapes_block(cls) -> "PayoutPolicy":
        return cls(base_pay=0.06, target_wage=5.0, bonus_cap=0.24)


@dataclass(frozen=True)
class Verdict:
    accepted: bool
    reason: str | None = None

    @classmethod
    def accept(cls) -> "Verdict":
        return cls(True)

    @classmethod
    def reject(cls, reason: str) -> "Verdict":
        return cls(False, reason)


def compute_payout(
    policy: PayoutPolicy, active_seconds: float, base_pay: float | None = None
) -> tuple[float, float]:
    """Base pay plus the bonus that tops active time up to the target
    hourly wage, clamped to zero and the configured caps."""
    if active_seconds < 0:
        raise ValueError("active_seconds must be nonnegative")
    base = policy.base_pay if base_pay is None else base_pay
    bonus = policy.target_wage * active_seconds / 3600.0 - base
    bonus = max(bonus, 0.0)
    if policy.bonus_cap is not None:
        bonus = min(bonus, policy.bonus_cap)
    if policy.bonus_multiplier_cap is not None:
        bonus = min(bonus, (policy.bonus_multiplier_cap - 1.0) * base)
    return base, bonus


def count_submission_segments(
    submission: Submission,
    task: AnnotationTask,
    palette: Palette,
    image_size: tuple[int, int],
) -> int:
    """Segments in the submission after clipping to the task's block."""
    w, h = image_size
    raster = rasterize(submission.polygons, w, h, palette)
    rect = task.block_rect()
    if rect is None:
        return connected_components(raster)[1]
    x0, y0, x1, y1 = rect
    clipped = np.full((h, w), VOID, dtype=np.uint8)
    clipped[y0:y1, x0:x1] = raster.labels[y0:y1, x0:x1]
    return connected_components(LabelMap(clipped))[1]


def validate_submission(
    task: AnnotationTask,
    submission: Submission,
    gt_segment_count: int | None,
    qc: QcPolicy,
    *,
    palette: Palette | None = None,
    image_size: tuple[int, int] | None = None,
    segment_count: int | None = None,
) -> Verdict:
    """Apply the QC rules to a submission for an assigned task.

    Too-fast submissions are rejected first; then, when the ground-truth
    segment count is known, the submission must contain strictly more than
    min_segment_ratio * gt segments. The segment count can be supplied
    precomputed, otherwise it is derived by rasterizing the polygons
    (palette and image_size required).
    """
    if task.state != TaskState.ASSIGNED:
        raise StateError(f"task {task.task_id} is {task.state.value}, not assigned")
    if submission.active_seconds < qc.min_seconds(task.kind):
        return Verdict.reject("too_fast")
    if gt_segment_count is not None:
        if segment_count is None:
            if palette is None or image_size is None:
                raise ValueError("palette and image_size needed to count segments")
            segment_count = count_submission_segments(submission, task, palette, image_size)
        if not segment_count > qc.min_segment_ratio * gt_segment_count:
            return Verdict.reject("too_few_segments")
    return Verdict.accept()


@dataclass(frozen=True)
class MergeEntry:
    """One accepted submission ready for fusion: its polygons, the pixel
    rect they are clipped to (None = whole image), the submission
    timestamp, and a stable id used to break timestamp ties."""

    polygons: tuple[PolygonAnnotation, ...]
    clip_rect: tuple[int, int, int, int] | None
    submitted_at: float
    entry_id: str


def merge_blocks(
    entries: Sequence[MergeEntry], width: int, height: int, palette: Palette
) -> LabelMap:
    """Fuse accepted submissions into one label map.

    Each entry is rasterized and clipped to its block; where several
    entries cover a pixel the non-void labels vote per pixel, with ties
    going to the label first written by the earliest submission. Pixels no
    entry covers stay void. The result is invariant under reordering of
    the input list (ordering comes from timestamps, not list position).
    """
    order = sorted(entries, key=lambda e: (e.submitted_at, e.entry_id))
    rasters = []
    present: set[int] = set()
    for e in order:
        lm = rasterize(e.polygons, width, height, palette)
        labels = lm.labels
        if e.clip_rect is not None:
            x0, y0, x1, y1 = e.clip_rect
            clipped = np.full_like(labels, VOID)
            clipped[y0:y1, x0:x1] = labels[y0:y1, x0:x1]
            labels = clipped
        rasters.append(labels)
        present.update(np.unique(labels[labels != VOID]).tolist())

    if not present:
        return LabelMap(np.full((height, width), VOID, dtype=np.uint8))

    class_ids = sorted(present)
    slot = {cid: i for i, cid in enumerate(class_ids)}
    n = len(order)
    votes = np.zeros((len(class_ids), height, width), dtype=np.int32)
    first_rank = np.full((len(class_ids), height, width), n, dtype=np.int32)
    for rank, labels in enumerate(rasters):
        for cid in np.unique(labels[labels != VOID]):
            i = slot[int(cid)]
            m = labels == cid
            votes[i][m] += 1
            first_rank[i][m & (first_rank[i] == n)] = rank

    # Majority with earliest-rank tie-break: score = votes * (n+1) + recency bonus.
    score = votes.astype(np.int64) * (n + 1) + (n - first_rank)
    winner = score.argmax(axis=0)
    covered = votes.sum(axis=0) > 0
    out = np.full((height, width), VOID, dtype=np.uint8)
    ids = np.asarray(class_ids, dtype=np.uint8)
    out[covered] = ids[winner[covered]]
    return LabelMap(out)


def time_to_blocks(annotation_time: float, full_image_time: float, grid: BlockGrid) -> int:
    """Convert an annotation-time budget into a number of 10x10-grid blocks:
    round(T / (0.022 F)), clamped to [0, 100]."""
    if annotation_time <= 0 or full_image_time <= 0:
        raise ValueError("annotation times must be positive")
    if (grid.rows, grid.cols) != (10, 10):
        raise DimensionError("time conversion constant presumes a 10x10 grid")
    n = int(math.floor(annotation_time / (_TIME_OVERHEAD * full_image_time) + 0.5))
    return max(0, min(n, grid.block_count))


def _poly_to_jsonable(p: PolygonAnnotation) -> dict:
    return {"vertices": [[x, y] for x, y in p.vertices], "class_id": p.class_id, "z_order": p.z_order}


def _poly_from_jsonable(d: dict) -> PolygonAnnotation:
    return PolygonAnnotation(
        vertices=tuple((float(x), float(y)) for x, y in d["vertices"]),
        class_id=int(d["class_id"]),
        z_order=int(d.get("z_order", 0)),
    )


class TaskStore:
    """Serialized, event-sourced store of annotation tasks.

    All mutations happen under one lock and append one or more events to
    the JSONL log before touching in-memory state, so a replayed log
    always lands on the same state. Reads return copies.
    """

    def __init__(
        self,
        log_path: Path | str | None = None,
        *,
        qc: QcPolicy | None = None,
        payout_block: PayoutPolicy | None = None,
        payout_full: PayoutPolicy | None = None,
        lease_seconds: float = DEFAULT_LEASE_SECONDS,
        seed: int = 0,
        clock=None,
    ):
        import time as _time

        self.qc = qc or QcPolicy()
        self.payout_block = payout_block or PayoutPolicy.cityscapes_block()
        self.payout_full = payout_full or PayoutPolicy.suncg_full()
        self.lease_seconds = lease_seconds
        self.clock = clock or _time.time
        self._rng = np.random.default_rng(seed)
        self._lock = threading.Lock()
        self._log_path = Path(log_path) if log_path is not None else None
        self._log_handle = None

        self.tasks: dict[str, AnnotationTask] = {}
        self.workers: list[str] = []
        self.submissions: dict[str, Submission] = {}
        self.payouts: dict[str, tuple[float, float]] = {}
        self.verdicts: dict[str, Verdict] = {}
        self._next_task = 1
        self._next_worker = 1

        if self._log_path is not None and self._log_path.exists():
            with open(self._log_path, "r", encoding="utf-8") as f:
                for line in f:
                    line = line.strip()
                    if line:
                        self._apply(json.loads(line))

    # -- event plumbing ----------------------------------------------------

    def _append(self, event: dict) -> None:
        if self._log_path is not None:
            if self._log_handle is None:
                self._log_path.parent.mkdir(parents=True, exist_ok=True)
                self._log_handle = open(self._log_path, "a", encoding="utf-8")
            self._log_handle.write(json.dumps(event, sort_keys=True) + "\n")
            self._log_handle.flush()
        self._apply(event)

    def _apply(self, ev: dict) -> None:
        kind = ev["event"]
        if kind == "worker_registered":
            self.workers.append(ev["worker_id"])
            self._next_worker += 1
        elif kind == "task_created":
            block = None
            if ev["block"] is not None:
                grid = BlockGrid.from_dict(ev["grid"])
                block = BlockRef(grid=grid, row=ev["block"][0], col=ev["block"][1])
            self.tasks[ev["task_id"]] = AnnotationTask(
                task_id=ev["task_id"],
                image_id=ev["image_id"],
                block=block,
                kind=TaskKind(ev["kind"]),
                gt_segment_count=ev.get("gt_segment_count"),
            )
            self._next_task += 1
        elif kind == "assigned":
            t = self.tasks[ev["task_id"]]
            t.state = TaskState.ASSIGNED
            t.worker_id = ev["worker_id"]
            t.assigned_at = ev["ts"]
        elif kind == "lease_expired":
            t = self.tasks[ev["task_id"]]
            t.state = TaskState.OPEN
            t.worker_id = None
            t.assigned_at = None
        elif kind == "submitted":
            t = self.tasks[ev["task_id"]]
            t.state = TaskState.SUBMITTED
            t.submitted_at = ev["ts"]
            self.submissions[ev["task_id"]] = Submission(
                task_id=ev["task_id"],
                polygons=tuple(_poly_from_jsonable(p) for p in ev["polygons"]),
                active_seconds=ev["active_seconds"],
                worker_id=ev["worker_id"],
            )
        elif kind == "verdict":
            t = self.tasks[ev["task_id"]]
            t.state = TaskState.ACCEPTED if ev["accepted"] else TaskState.REJECTED
            self.verdicts[ev["task_id"]] = Verdict(ev["accepted"], ev.get("reason"))
        elif kind == "payout":
            self.payouts[ev["task_id"]] = (ev["base"], ev["bonus"])
        else:
            raise ValueError(f"unknown event {kind!r}")

    # -- commands ----------------------------------------------------------

    def register_worker(self) -> str:
        with self._lock:
            worker_id = f"w{self._next_worker:05d}"
            self._append({"event": "worker_registered", "worker_id": worker_id})
            return worker_id

    def _create_task_events(
        self,
        image_id: str,
        block: tuple[int, int] | None,
        grid: BlockGrid | None,
        kind: TaskKind,
        gt_segment_count: int | None,
    ) -> str:
        task_id = f"t{self._next_task:06d}"
        self._append(
            {
                "event": "task_created",
                "task_id": task_id,
                "image_id": image_id,
                "block": list(block) if block is not None else None,
                "grid": grid.to_dict() if grid is not None else None,
                "kind": kind.value,
                "gt_segment_count": gt_segment_count,
            }
        )
        return task_id

    def create_tasks(
        self,
        plans: dict[str, SelectionPlan],
        known_image_ids: Iterable[str] | None = None,
        gt_segment_counts: dict[str, dict[tuple[int, int], int]] | None = None,
    ) -> list[str]:
        """One open task per selected block of each image's plan. Plans on
        a 1x1 grid produce full-image tasks."""
        if known_image_ids is not None:
            known = set(known_image_ids)
            unknown = [i for i in plans if i not in known]
            if unknown:
                raise UnknownIdError(f"unknown image ids: {unknown}")
        created = []
        with self._lock:
            for image_id in sorted(plans):
                plan = plans[image_id]
                counts = (gt_segment_counts or {}).get(image_id, {})
                full = plan.grid.block_count == 1
                for r, c in sorted(plan.selected):
                    created.append(
                        self._create_task_events(
                            image_id,
                            (r, c),
                            plan.grid,
                            TaskKind.FULL if full else TaskKind.BLOCK,
                            counts.get((r, c)),
                        )
                    )
        return created

    def _sweep_leases(self) -> None:
        now = self.clock()
        for t in self.tasks.values():
            if (
                t.state == TaskState.ASSIGNED
                and t.assigned_at is not None
                and now - t.assigned_at > self.lease_seconds
            ):
                self._append({"event": "lease_expired", "task_id": t.task_id})

    def assign_next(self, worker_id: str) -> AnnotationTask | None:
        """Atomically hand the worker one open task (random order), or the
        task they already hold (idempotent), or None when the queue is
        empty."""
        with self._lock:
            if worker_id not in self.workers:
                raise UnknownIdError(f"unknown worker {worker_id!r}")
            self._sweep_leases()
            for t in self.tasks.values():
                if t.state == TaskState.ASSIGNED and t.worker_id == worker_id:
                    return replace(t)
            open_ids = sorted(t.task_id for t in self.tasks.values() if t.state == TaskState.OPEN)
            if not open_ids:
                return None
            task_id = open_ids[int(self._rng.integers(len(open_ids)))]
            self._append(
                {"event": "assigned", "task_id": task_id, "worker_id": worker_id, "ts": self.clock()}
            )
            return replace(self.tasks[task_id])

    def submit(
        self,
        submission: Submission,
        *,
        palette: Palette | None = None,
        image_size: tuple[int, int] | None = None,
        wall_seconds: float | None = None,
    ) -> tuple[Verdict, tuple[float, float] | None]:
        """Record a submission, judge it, pay out if accepted, and respawn
        the block as a fresh open task if rejected.

        When wall_seconds is given (time since assignment measured by the
        server), QC uses min(wall, client-reported active seconds) since
        client clocks are untrusted.
        """
        with self._lock:
            task = self.tasks.get(submission.task_id)
            if task is None:
                raise UnknownIdError(f"unknown task {submission.task_id!r}")
            if task.state != TaskState.ASSIGNED:
                raise StateError(f"task {task.task_id} is {task.state.value}, not assigned")
            if task.worker_id != submission.worker_id:
                raise StateError(f"task {task.task_id} is assigned to a different worker")

            qc_seconds = submission.active_seconds
            if wall_seconds is not None:
                qc_seconds = min(qc_seconds, wall_seconds)

            # Judge before logging anything so a malformed submission
            # (bad class id, degenerate polygon) leaves the store untouched.
            verdict = validate_submission(
                task,
                replace(submission, active_seconds=qc_seconds),
                task.gt_segment_count,
                self.qc,
                palette=palette,
                image_size=image_size,
            )

            self._append(
                {
                    "event": "submitted",
                    "task_id": task.task_id,
                    "worker_id": submission.worker_id,
                    "active_seconds": submission.active_seconds,
                    "polygons": [_poly_to_jsonable(p) for p in submission.polygons],
                    "ts": self.clock(),
                }
            )
            self._append(
                {
                    "event": "verdict",
                    "task_id": task.task_id,
                    "accepted": verdict.accepted,
                    "reason": verdict.reason,
                }
            )

            payout = None
            if verdict.accepted:
                policy = self.payout_block if task.kind == TaskKind.BLOCK else self.payout_full
                base, bonus = compute_payout(policy, qc_seconds)
                payout = (base, bonus)
                self._append(
                    {"event": "payout", "task_id": task.task_id, "base": base, "bonus": bonus}
                )
            else:
                self._create_task_events(
                    task.image_id,
                    (task.block.row, task.block.col) if task.block else None,
                    task.block.grid if task.block else None,
                    task.kind,
                    task.gt_segment_count,
                )
            return verdict, payout

    # -- queries -----------------------------------------------------------
    # Reads that iterate store collections take the lock too: handlers run
    # concurrently and a respawn mid-iteration would blow up a status poll.

    def get_task(self, task_id: str) -> AnnotationTask:
        with self._lock:
            t = self.tasks.get(task_id)
            if t is None:
                raise UnknownIdError(f"unknown task {task_id!r}")
            return replace(t)

    def counts(self) -> dict[str, int]:
        with self._lock:
            out = {s.value: 0 for s in TaskState}
            for t in self.tasks.values():
                out[t.state.value] += 1
            out["total"] = len(self.tasks)
            return out

    def accepted_entries(self, image_id: str) -> list[MergeEntry]:
        with self._lock:
            entries = []
            for t in self.tasks.values():
                if t.image_id == image_id and t.state == TaskState.ACCEPTED:
                    sub = self.submissions[t.task_id]
                    entries.append(
                        MergeEntry(
                            polygons=sub.polygons,
                            clip_rect=t.block_rect(),
                            submitted_at=t.submitted_at or 0.0,
                            entry_id=t.task_id,
                        )
                    )
            return entries

    def total_payout(self) -> float:
        with self._lock:
            return sum(b + x for b, x in self.payouts.values())

    def snapshot(self) -> dict:
        """Canonical JSON-able view of the full store state."""
        with self._lock:
            return self._snapshot_locked()

    def _snapshot_locked(self) -> dict:
        return {
            "workers": list(self.workers),
            "tasks": {
                tid: {
                    "image_id": t.image_id,
                    "block": [t.block.row, t.block.col] if t.block else None,
                    "grid": t.block.grid.to_dict() if t.block else None,
                    "kind": t.kind.value,
                    "state": t.state.value,
                    "worker_id": t.worker_id,
                    "assigned_at": t.assigned_at,
                    "submitted_at": t.submitted_at,
                    "gt_segment_count": t.gt_segment_count,
                }
                for tid, t in sorted(self.tasks.items())
            },
            "verdicts": {
                tid: {"accepted": v.accepted, "reason": v.reason}
                for tid, v in sorted(self.verdicts.items())
            },
            "payouts": {tid: list(p) for tid, p in sorted(self.payouts.items())},
        }

    def snapshot_bytes(self) -> bytes:
        return json.dumps(self.snapshot(), sort_keys=True).encode("utf-8")

    def close(self) -> None:
        if self._log_handle is not None:
            self._log_handle.close()
            self._log_handle = None
