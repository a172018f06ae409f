"""HTTP labeling service: the bridge between the experiment loop and a
human in a browser.

The loop talks to a LabelingSession through the same collect_answers
interface the synthetic teacher implements; the web side talks JSON over
four endpoints. Tickets persist until answered. All dataset mutation stays
on the loop thread (single writer); the session only queues tickets,
validates and counts answers, and mirrors stats for the UI.
"""

from __future__ import annotations

import threading
import time
from collections import OrderedDict
from typing import Optional

from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse, Response
from pydantic import BaseModel, ConfigDict, Field

from .harness import ExperimentConfig, run_experiment
from .queries import QueryTicket, TeacherAnswer


class LabelingSession:
    """Thread-safe ticket queue plus UI-facing counters."""

    def __init__(self, n_classes: int, modality: str, budget: int):
        self.n_classes = int(n_classes)
        self.modality = modality
        self._lock = threading.Lock()
        self._answered = threading.Condition(self._lock)
        self._pending: "OrderedDict[int, dict]" = OrderedDict()
        self._answers: dict[int, TeacherAnswer] = {}
        self._delivered: set[int] = set()
        self.labels_total = 0
        self.class_counts = [0] * (self.n_classes if modality == "rating" else 2)
        self.budget_remaining = int(budget)
        self.curve_rows: list[dict] = []
        self.finished = False

    # -- loop side ----------------------------------------------------------

    def offer(self, tickets: list[QueryTicket], frames_by_ticket: dict) -> None:
        with self._lock:
            for ticket in tickets:
                self._pending[ticket.ticket_id] = {
                    "ticket": ticket,
                    "frames": frames_by_ticket.get(ticket.ticket_id),
                }

    def wait_for_answers(self, ticket_ids: list[int], timeout_s: float) -> list[TeacherAnswer]:
        """Block until every listed ticket is answered or the timeout runs
        out; returns whatever arrived (and hands over any undelivered
        answers to older tickets too)."""
        deadline = time.monotonic() + timeout_s
        with self._answered:
            while True:
                missing = [t for t in ticket_ids if t not in self._answers]
                if not missing:
                    break
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    break
                self._answered.wait(timeout=min(remaining, 0.25))
            ready = [
                tid for tid in self._answers
                if tid not in self._delivered
            ]
            self._delivered.update(ready)
            return [self._answers[tid] for tid in ready]

    def update_dataset_stats(self, stats: dict) -> None:
        with self._lock:
            self.labels_total = stats["labels_total"]
            self.class_counts = list(stats["class_counts"])
            self.budget_remaining = stats["budget_remaining"]

    def push_curve(self, row: dict) -> None:
        with self._lock:
            self.curve_rows.append(dict(row))

    def mark_finished(self) -> None:
        with self._lock:
            self.finished = True

    # -- http side ----------------------------------------------------------

    def peek_ticket(self) -> Optional[dict]:
        with self._lock:
            for ticket_id, payload in self._pending.items():
                if ticket_id not in self._answers:
                    ticket: QueryTicket = payload["ticket"]
                    body = {
                        "ticket_id": ticket.ticket_id,
                        "kind": ticket.kind,
                        "n": self.n_classes,
                        "budget_remaining": self.budget_remaining,
                    }
                    if ticket.kind == "rating":
                        body["frames"] = payload["frames"][0]
                    else:
                        body["frame_pairs"] = payload["frames"]
                    return body
            return None

    def submit_answer(self, ticket_id: int, rating: int | None, preferred: str | None) -> None:
        """Validates and records one answer; raises HTTPException on the
        409 (duplicate) and 422 (validation) paths."""
        with self._answered:
            payload = self._pending.get(ticket_id)
            if payload is None:
                raise HTTPException(status_code=422, detail=f"unknown ticket {ticket_id}")
            if ticket_id in self._answers:
                raise HTTPException(status_code=409, detail=f"ticket {ticket_id} already answered")
            ticket: QueryTicket = payload["ticket"]
            if ticket.kind == "rating":
                if rating is None:
                    raise HTTPException(status_code=422, detail="rating ticket needs a class")
                if not 0 <= rating < self.n_classes:
                    raise HTTPException(
                        status_code=422,
                        detail=f"class {rating} out of range for {self.n_classes} classes",
                    )
                answer = TeacherAnswer(ticket_id, rating=rating, source="human")
                self.class_counts[rating] += 1
            else:
                if preferred not in ("first", "second"):
                    raise HTTPException(status_code=422, detail="preference ticket needs preferred=first|second")
                answer = TeacherAnswer(ticket_id, preferred=preferred, source="human")
                self.class_counts[0 if preferred == "first" else 1] += 1
            self._answers[ticket_id] = answer
            self.labels_total += 1
            self.budget_remaining -= 1
            self._answered.notify_all()

    def stats(self) -> dict:
        with self._lock:
            return {
                "labels_total": self.labels_total,
                "class_counts": list(self.class_counts),
                "budget_remaining": self.budget_remaining,
            }


class QueueTeacher:
    """Human teacher adapter: offers tickets to the session and waits."""

    wants_frames = True

    def __init__(self, session: LabelingSession):
        self.session = session

    def collect_answers(self, tickets, segments_by_id, frames_by_ticket=None,
                        timeout_s: float = 30.0) -> list[TeacherAnswer]:
        if tickets:
            self.session.offer(tickets, frames_by_ticket or {})
        return self.session.wait_for_answers([t.ticket_id for t in tickets], timeout_s)


class AnswerBody(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    ticket_id: int
    rating: int | None = Field(default=None, alias="class")
    preferred: str | None = None


def create_app(session: LabelingSession, static_dir=None) -> FastAPI:
    app = FastAPI(title="ratecraft labeling service")

    @app.get("/api/ticket")
    def get_ticket():
        payload = session.peek_ticket()
        if payload is None:
            return Response(status_code=204)
        return JSONResponse(payload)

    @app.post("/api/answer")
    def post_answer(body: AnswerBody):
        session.submit_answer(body.ticket_id, body.rating, body.preferred)
        return {"ok": True, "ticket_id": body.ticket_id}

    @app.get("/api/stats")
    def get_stats():
        return session.stats()

    @app.get("/api/curve")
    def get_curve():
        with session._lock:
            return {"rows": list(session.curve_rows)}

    if static_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")
    return app


def serve_labeling(config: ExperimentConfig, bind: str = "127.0.0.1:8000",
                   static_dir=None) -> None:
    """Run the labeling service and the experiment loop it feeds."""
    import uvicorn

    session = LabelingSession(config.n_classes, config.modality, config.query_budget)
    teacher = QueueTeacher(session)

    def loop():
        try:
            run_experiment(config, label_queue=teacher, stats_sink=session)
        finally:
            session.mark_finished()

    worker = threading.Thread(target=loop, name="experiment-loop", daemon=True)
    worker.start()
    host, _, port = bind.rpartition(":")
    uvicorn.run(create_app(session, static_dir=static_dir), host=host or "127.0.0.1", port=int(port))
