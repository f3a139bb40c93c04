"""Trace scoring, ranking, prefix scoring and root-cause decomposition.

A trace's score is the geometric mean of its event probabilities (the n-th
root of the joint probability), so length does not penalize a trace.  Low
scores mean anomalous; ranking is ascending.  Scoring is read-only on the
model and safe to run concurrently across traces.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

from .event_log import Event, EventLog, Trace
from .model import EDBNModel, EventScore, event_scores


@dataclass(frozen=True)
class TraceScore:
    trace_id: str
    score: float
    event_count: int
    decomposition: tuple[EventScore, ...]
    log_score: float

    @property
    def zero_factor_count(self) -> int:
        return sum(1 for ev in self.decomposition for f in ev.factors if f.value == 0.0)


@dataclass(frozen=True)
class Ranking:
    entries: tuple[TraceScore, ...]

    def __iter__(self):
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def trace_ids(self) -> list[str]:
        return [e.trace_id for e in self.entries]


def _score_events(model: EDBNModel, trace_id: str, events: Sequence[Event]) -> TraceScore:
    if not events:
        raise ValueError("cannot score an empty trace")
    per_event = event_scores(model, events)
    log_mean = math.fsum(s.log_probability for s in per_event) / len(events)
    score = math.exp(log_mean) if log_mean > -math.inf else 0.0
    return TraceScore(trace_id, score, len(events), tuple(per_event), log_mean)


def score_trace(model: EDBNModel, trace: Trace) -> TraceScore:
    """Geometric-mean score of a complete trace, with per-factor decomposition."""
    return _score_events(model, trace.trace_id, trace.events)


def score_prefix(
    model: EDBNModel, events: Union[Trace, Sequence[Event]], trace_id: str = ""
) -> TraceScore:
    """Score an ongoing trace from the events seen so far (n = prefix length)."""
    if isinstance(events, Trace):
        return _score_events(model, events.trace_id, events.events)
    return _score_events(model, trace_id, tuple(events))


def rank_traces(model: EDBNModel, log: EventLog) -> Ranking:
    """All traces sorted ascending by score; the head is the most anomalous.

    Zero scores sort below positives; among them, more zero-valued factors
    rank first, then trace_id; positive ties also break by trace_id.
    """
    if log.schema.names != model.schema.names:
        raise ValueError("log attributes do not match the model schema")
    scored = [score_trace(model, t) for t in log.traces]
    scored.sort(key=lambda s: (s.score, -s.zero_factor_count, s.trace_id))
    return Ranking(tuple(scored))


def explain(score: TraceScore, top_n: int) -> list[tuple[str, str, str, str | None, float]]:
    """The top_n smallest factors of a trace, ascending.

    Entries are (event id, attribute, factor kind, FD source column or None,
    contribution); ties keep decomposition order (event, then attribute).
    """
    if top_n < 1:
        raise ValueError("top_n must be >= 1")
    flat = [
        (ev.event_id, f.attribute, f.kind, f.source.column_name if f.source else None, f.value)
        for ev in score.decomposition
        for f in ev.factors
    ]
    flat.sort(key=lambda entry: entry[4])
    return flat[:top_n]
