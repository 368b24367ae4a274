import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

import numpy as np

from mataformer.consts import DEFAULT_CATEGORIES
from mataformer.errors import DataError

Metric = tuple[str, str]


@dataclass(frozen=True)
class EventRecord:
    """EventRecord is one timestamped clinical event"""

    #: patient the event belongs to
    patient_id: str = field(kw_only=True)
    #: integer seconds since the cohort epoch
    t: int = field(kw_only=True)
    #: event-type name from the configured category set
    category: str = field(kw_only=True)
    #: free text for unstructured events
    text: str = field(kw_only=True, default="")
    #: (key, value) pairs for structured events, None for unstructured ones
    metrics: Optional[tuple[Metric, ...]] = field(kw_only=True, default=None)

    @property
    def structured(self) -> bool:
        return self.metrics is not None

    def validate(self, categories: Sequence[str] = DEFAULT_CATEGORIES) -> None:
        if self.t < 0:
            raise DataError(f"negative timestamp {self.t}")
        if not self.category:
            raise DataError("empty category")
        if self.category not in categories:
            raise DataError(
                f"unknown category {self.category!r}, allowed: {sorted(categories)}"
            )
        if self.structured:
            if len(self.metrics or ()) == 0:
                raise DataError("structured event without metrics")
        elif not self.text:
            raise DataError("unstructured event without text")

    def to_json(self) -> dict[str, Any]:
        d: dict[str, Any] = {
            "patient_id": self.patient_id,
            "t": self.t,
            "category": self.category,
            "text": self.text,
        }
        if self.metrics is not None:
            d["metrics"] = [list(m) for m in self.metrics]
        return d


@dataclass
class Trajectory:
    """Trajectory is one patient's events ordered by time, optionally with unit embeddings"""

    patient_id: str = field(kw_only=True)
    events: list[EventRecord] = field(kw_only=True)
    #: [len(events), dim] array of unit vectors aligned to events
    embeddings: Optional[np.ndarray] = field(kw_only=True, default=None)

    def __post_init__(self):
        if len(self.events) == 0:
            raise DataError(f"trajectory {self.patient_id} has no events")
        times = self.times()
        if (np.diff(times) < 0).any():
            raise DataError(f"trajectory {self.patient_id} timestamps decrease")
        if self.embeddings is not None:
            self.attach(self.embeddings)

    def __len__(self) -> int:
        return len(self.events)

    def times(self) -> np.ndarray:
        return np.array([e.t for e in self.events], dtype=np.int64)

    def texts(self, separator: str = "") -> list[str]:
        return [textualize(e, separator) for e in self.events]

    def attach(self, embeddings: np.ndarray) -> None:
        emb = np.asarray(embeddings, dtype=np.float64)
        if emb.ndim != 2 or emb.shape[0] != len(self.events):
            raise DataError(
                f"trajectory {self.patient_id}: {emb.shape} embeddings for {len(self.events)} events"
            )
        norms = np.linalg.norm(emb, axis=1)
        if (np.abs(norms - 1.0) > 1e-6).any():
            raise DataError(f"trajectory {self.patient_id}: embeddings are not unit norm")
        self.embeddings = emb


def textualize(event: EventRecord, separator: str = "") -> str:
    """textualize renders an event as the text the embedder sees

    Unstructured events are passed through verbatim. Structured events become
    ``[category]key:value`` per metric, joined by ``separator`` (empty by default).
    """
    if not event.structured:
        return event.text
    if len(event.metrics or ()) == 0:
        raise DataError(f"structured {event.category} event without metrics")
    return separator.join(
        f"[{event.category}]{key}:{value}" for key, value in event.metrics or ()
    )


def _parse_event(raw: Any, categories: Sequence[str]) -> EventRecord:
    if not isinstance(raw, dict):
        raise DataError("expected a JSON object")
    for key, kind in (("patient_id", str), ("category", str)):
        if not isinstance(raw.get(key), kind):
            raise DataError(f"missing or non-string `{key}`")
    t = raw.get("t")
    if not isinstance(t, int) or isinstance(t, bool):
        raise DataError("missing or non-integer `t`")
    text = raw.get("text", "")
    if not isinstance(text, str):
        raise DataError("non-string `text`")

    metrics: Optional[tuple[Metric, ...]] = None
    if "metrics" in raw and raw["metrics"] is not None:
        pairs = raw["metrics"]
        if not isinstance(pairs, list) or not all(
            isinstance(p, list) and len(p) == 2 and all(isinstance(s, str) for s in p)
            for p in pairs
        ):
            raise DataError("`metrics` must be a list of [string, string] pairs")
        metrics = tuple((k, v) for k, v in pairs)

    event = EventRecord(
        patient_id=raw["patient_id"],
        t=t,
        category=raw["category"],
        text=text,
        metrics=metrics,
    )
    event.validate(categories)
    return event


def group_events(events: Iterable[EventRecord]) -> list[Trajectory]:
    """group_events builds one trajectory per patient, in first-seen order, stable-sorted by t"""
    grouped: dict[str, list[EventRecord]] = {}
    for e in events:
        grouped.setdefault(e.patient_id, []).append(e)
    return [
        Trajectory(patient_id=pid, events=sorted(evs, key=lambda e: e.t))
        for pid, evs in grouped.items()
    ]


def load_trajectories(
    path: str | Path, categories: Sequence[str] = DEFAULT_CATEGORIES
) -> list[Trajectory]:
    """load_trajectories reads event JSONL into per-patient trajectories

    Errors carry the 1-based line number of the offending record.
    """
    events: list[EventRecord] = []
    with open(path, "rb") as f:
        for line_no, raw in enumerate(f, start=1):
            if not raw.strip():
                continue
            try:
                events.append(_parse_event(json.loads(raw.decode("utf-8")), categories))
            except UnicodeDecodeError as e:
                raise DataError(f"invalid UTF-8: {e.reason}", str(path), line_no)
            except json.JSONDecodeError as e:
                raise DataError(f"malformed JSON: {e.msg}", str(path), line_no)
            except DataError as e:
                raise DataError(e.reason, str(path), line_no)
    return group_events(events)


def dump_trajectories(trajectories: Iterable[Trajectory], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for traj in trajectories:
            for e in traj.events:
                f.write(json.dumps(e.to_json(), ensure_ascii=False) + "\n")
