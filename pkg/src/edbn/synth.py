"""Synthetic business-process logs: seeded generation and anomaly injection.

A ProcessModel is a weighted activity graph plus one generation rule per
attribute (constant, pool choice, fixed derivation from another attribute, or
a choice conditioned on the current activity).  Generation walks the graph
per trace with a Mersenne-Twister generator seeded as seed * 2**32 + trace
index, so traces are reproducible and independently derivable in parallel.
"""
from __future__ import annotations

import csv
import io
import json
import math
import random
from dataclasses import dataclass
from importlib import resources
from typing import Mapping, Sequence

from .event_log import PADDING, AttributeSchema, Event, EventLog, Trace

NORMAL = "normal"
ANOMALOUS = "anomalous"

MUTATION_KINDS = ("swap_adjacent", "delete_event", "duplicate_event", "replace_value", "fresh_value")

_WALK_LIMIT = 10_000


class ProcessModelError(ValueError):
    """Raised for invalid process-model configuration or impossible generation."""


@dataclass(frozen=True)
class Rule:
    kind: str  # constant | pool | derived | activity_choice
    value: str | None = None
    values: tuple[str, ...] = ()
    scope: str = "event"  # pool only: event | trace
    source: str | None = None
    mapping: Mapping[str, str] | None = None
    pools: Mapping[str, tuple[str, ...]] | None = None


@dataclass(frozen=True)
class ProcessModel:
    name: str
    trace_id_column: str
    attributes: tuple[str, ...]
    activity_attribute: str
    start_activity: str
    end_activities: frozenset[str]
    transitions: Mapping[str, Mapping[str, float]]
    rules: Mapping[str, Rule]

    def __post_init__(self) -> None:
        _validate_model(self)

    @property
    def activities(self) -> set[str]:
        acts = {self.start_activity} | set(self.end_activities) | set(self.transitions)
        for targets in self.transitions.values():
            acts |= set(targets)
        return acts

    def schema(self) -> AttributeSchema:
        return AttributeSchema(names=self.attributes, trace_id_column=self.trace_id_column)


def _possible_values(model: ProcessModel) -> dict[str, set[str]]:
    """Value closure per attribute; validates derivation coverage and acyclicity."""
    possible: dict[str, set[str]] = {model.activity_attribute: model.activities}
    remaining = [a for a in model.attributes if a != model.activity_attribute]
    progress = True
    while remaining and progress:
        progress = False
        for attr in list(remaining):
            rule = model.rules[attr]
            if rule.kind == "constant":
                possible[attr] = {rule.value}
            elif rule.kind == "pool":
                possible[attr] = set(rule.values)
            elif rule.kind == "activity_choice":
                missing = model.activities - set(rule.pools)
                if missing:
                    raise ProcessModelError(
                        f"{attr!r}: no pool for activities {sorted(missing)}"
                    )
                possible[attr] = {v for pool in rule.pools.values() for v in pool}
            elif rule.kind == "derived":
                if rule.source not in possible:
                    continue  # source not resolved yet
                missing = possible[rule.source] - set(rule.mapping)
                if missing:
                    raise ProcessModelError(
                        f"{attr!r}: derivation from {rule.source!r} misses {sorted(missing)}"
                    )
                possible[attr] = {rule.mapping[v] for v in possible[rule.source]}
            else:
                raise ProcessModelError(f"{attr!r}: unknown rule kind {rule.kind!r}")
            remaining.remove(attr)
            progress = True
    if remaining:
        raise ProcessModelError(f"cyclic or dangling derivations: {sorted(remaining)}")
    return possible


def _validate_model(model: ProcessModel) -> None:
    if len(set(model.attributes)) != len(model.attributes):
        raise ProcessModelError("attribute names must be unique")
    if model.activity_attribute not in model.attributes:
        raise ProcessModelError("activity_attribute must be one of the attributes")
    for attr in model.attributes:
        if attr != model.activity_attribute and attr not in model.rules:
            raise ProcessModelError(f"attribute {attr!r} has no rule")
    for act, targets in model.transitions.items():
        for nxt, weight in targets.items():
            if weight <= 0:
                raise ProcessModelError(f"transition {act!r}->{nxt!r} has nonpositive weight")
    # The walk terminates on any end activity, so at least one must be reachable.
    seen = {model.start_activity}
    frontier = [model.start_activity]
    while frontier:
        act = frontier.pop()
        for nxt in model.transitions.get(act, ()):
            if nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
    if not (set(model.end_activities) & seen):
        raise ProcessModelError("no end activity is reachable from the start activity")
    values = _possible_values(model)
    for attr, vals in values.items():
        if PADDING in vals:
            raise ProcessModelError(f"{attr!r} can produce the reserved token {PADDING!r}")


def _evaluation_order(model: ProcessModel) -> list[str]:
    """Attributes in schema order, with derivations after their sources."""
    order: list[str] = [model.activity_attribute]
    pending = [a for a in model.attributes if a != model.activity_attribute]
    while pending:
        for attr in pending:
            rule = model.rules[attr]
            if rule.kind != "derived" or rule.source in order:
                order.append(attr)
                pending.remove(attr)
                break
        else:  # pragma: no cover - ruled out by _possible_values
            raise ProcessModelError(f"cyclic derivations: {sorted(pending)}")
    return order


def _walk(model: ProcessModel, rng: random.Random) -> list[str]:
    path = [model.start_activity]
    while path[-1] not in model.end_activities:
        targets = model.transitions.get(path[-1])
        if not targets:
            raise ProcessModelError(f"dead-end activity {path[-1]!r}")
        names = list(targets)
        step = rng.choices(names, weights=[targets[t] for t in names])[0]
        path.append(step)
        if len(path) > _WALK_LIMIT:
            raise ProcessModelError("random walk failed to reach an end activity")
    return path


def generate(model: ProcessModel, n_traces: int, seed: int) -> EventLog:
    """n_traces random start-to-end walks with attributes filled per the rules."""
    if n_traces < 1:
        raise ValueError("n_traces must be >= 1")
    order = _evaluation_order(model)
    width = max(4, len(str(n_traces)))
    traces = []
    event_counter = 0
    for i in range(n_traces):
        rng = random.Random(seed * 2**32 + i)
        trace_values: dict[str, str] = {}
        for attr in order:
            rule = model.rules.get(attr)
            if rule is not None and rule.kind == "pool" and rule.scope == "trace":
                trace_values[attr] = rng.choice(rule.values)
        events = []
        for activity in _walk(model, rng):
            row: dict[str, str] = {}
            for attr in order:
                if attr == model.activity_attribute:
                    row[attr] = activity
                    continue
                rule = model.rules[attr]
                if rule.kind == "constant":
                    row[attr] = rule.value
                elif rule.kind == "pool":
                    row[attr] = trace_values[attr] if rule.scope == "trace" else rng.choice(rule.values)
                elif rule.kind == "derived":
                    row[attr] = rule.mapping[row[rule.source]]
                else:  # activity_choice
                    row[attr] = rng.choice(rule.pools[activity])
            events.append(Event(str(event_counter), tuple(row[a] for a in model.attributes)))
            event_counter += 1
        traces.append(Trace(f"t{i:0{width}d}", tuple(events)))
    return EventLog(model.schema(), tuple(traces))


# --- anomaly injection ------------------------------------------------------


@dataclass(frozen=True)
class Mutation:
    kind: str
    position: int
    attribute: str | None = None
    new_value: str | None = None
    insert_at: int | None = None

    def describe(self) -> str:
        parts = [f"{self.kind}@{self.position}"]
        if self.insert_at is not None:
            parts.append(f"->{self.insert_at}")
        if self.attribute is not None:
            parts.append(f":{self.attribute}={self.new_value}")
        return "".join(parts)


@dataclass(frozen=True)
class LabeledLog:
    log: EventLog
    labels: dict[str, str]
    anomaly_details: dict[str, tuple[Mutation, ...]]

    def __post_init__(self) -> None:
        for trace in self.log.traces:
            if trace.trace_id not in self.labels:
                raise ValueError(f"trace {trace.trace_id!r} has no label")


def _applicable_kinds(events: Sequence[Event], replace_attrs: Sequence[str]) -> list[str]:
    kinds = ["duplicate_event", "fresh_value"]
    if len(events) >= 2:
        kinds += ["swap_adjacent", "delete_event"]
    if replace_attrs:
        kinds.append("replace_value")
    return sorted(kinds)


def inject_anomalies(log: EventLog, fraction: float, seed: int) -> LabeledLog:
    """Mutate a uniformly chosen ceil(fraction * n) subset of traces.

    Each chosen trace receives 1-3 mutations drawn from: swap two adjacent
    events, delete an event, duplicate an event at a random position, replace
    an attribute value with another active-domain value, or replace one with
    a fresh unseen value.  Unchosen traces are returned untouched.
    """
    if not 0 <= fraction <= 1:
        raise ValueError("fraction must be in [0, 1]")
    if fraction > 0 and not log.traces:
        raise ValueError("cannot inject anomalies into an empty log")
    n_mutate = math.ceil(fraction * len(log.traces))
    rng = random.Random(seed)
    chosen = sorted(rng.sample(range(len(log.traces)), n_mutate))

    domains = {
        a: sorted({e.values[i] for _, e in log.iter_events()})
        for i, a in enumerate(log.schema.names)
    }
    multi_valued = [a for a in log.schema.names if len(domains[a]) >= 2]
    used_ids = {e.id for _, e in log.iter_events()}
    fresh_counter = 0

    traces = list(log.traces)
    labels = {t.trace_id: NORMAL for t in log.traces}
    details: dict[str, tuple[Mutation, ...]] = {}

    for index in chosen:
        trace = traces[index]
        events = list(trace.events)
        mutations: list[Mutation] = []
        for _ in range(rng.randint(1, 3)):
            kind = rng.choice(_applicable_kinds(events, multi_valued))
            if kind == "swap_adjacent":
                pos = rng.randrange(len(events) - 1)
                events[pos], events[pos + 1] = events[pos + 1], events[pos]
                mutations.append(Mutation(kind, pos))
            elif kind == "delete_event":
                pos = rng.randrange(len(events))
                del events[pos]
                mutations.append(Mutation(kind, pos))
            elif kind == "duplicate_event":
                pos = rng.randrange(len(events))
                insert_at = rng.randrange(len(events) + 1)
                copy_id = f"{events[pos].id}+dup"
                while copy_id in used_ids:
                    copy_id += "+"
                used_ids.add(copy_id)
                events.insert(insert_at, Event(copy_id, events[pos].values))
                mutations.append(Mutation(kind, pos, insert_at=insert_at))
            else:
                if kind == "replace_value":
                    attr = rng.choice(multi_valued)
                    pos = rng.randrange(len(events))
                    current = events[pos].values[log.schema.index_of(attr)]
                    value = rng.choice([v for v in domains[attr] if v != current])
                else:  # fresh_value
                    attr = rng.choice(list(log.schema.names))
                    pos = rng.randrange(len(events))
                    while True:
                        fresh_counter += 1
                        value = f"unseen-{attr}-{fresh_counter}"
                        if value not in domains[attr]:
                            break
                i = log.schema.index_of(attr)
                values = list(events[pos].values)
                values[i] = value
                events[pos] = Event(events[pos].id, tuple(values))
                mutations.append(Mutation(kind, pos, attribute=attr, new_value=value))
        traces[index] = Trace(trace.trace_id, tuple(events))
        labels[trace.trace_id] = ANOMALOUS
        details[trace.trace_id] = tuple(mutations)

    return LabeledLog(EventLog(log.schema, tuple(traces)), labels, details)


# --- process-model and label files -----------------------------------------


def _rule_from_json(attr: str, raw: dict) -> Rule:
    kind = raw.get("kind")
    if kind == "constant":
        return Rule(kind="constant", value=str(raw["value"]))
    if kind == "pool":
        return Rule(kind="pool", values=tuple(raw["values"]), scope=raw.get("scope", "event"))
    if kind == "derived":
        return Rule(kind="derived", source=raw["source"], mapping=dict(raw["mapping"]))
    if kind == "activity_choice":
        return Rule(kind="activity_choice", pools={a: tuple(p) for a, p in raw["pools"].items()})
    raise ProcessModelError(f"{attr!r}: unknown rule kind {kind!r}")


def parse_process_model(text: str) -> ProcessModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProcessModelError(f"not a valid process model: {exc}") from None
    try:
        return ProcessModel(
            name=doc.get("name", "unnamed"),
            trace_id_column=doc["trace_id_column"],
            attributes=tuple(doc["attributes"]),
            activity_attribute=doc["activity_attribute"],
            start_activity=doc["start_activity"],
            end_activities=frozenset(doc["end_activities"]),
            transitions={a: dict(t) for a, t in doc["transitions"].items()},
            rules={a: _rule_from_json(a, r) for a, r in doc["rules"].items()},
        )
    except KeyError as exc:
        raise ProcessModelError(f"process model misses field {exc.args[0]!r}") from None


def load_process_model(path) -> ProcessModel:
    with open(path, encoding="utf-8") as fh:
        return parse_process_model(fh.read())


def default_shipping_model() -> ProcessModel:
    """The bundled shipping-goods process: 13 attributes, insurance branch."""
    text = resources.files("edbn.data").joinpath("shipping.json").read_text(encoding="utf-8")
    return parse_process_model(text)


def serialize_labels(labeled: LabeledLog) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["trace_id", "label", "details"])
    for trace in labeled.log.traces:
        tid = trace.trace_id
        detail = ";".join(m.describe() for m in labeled.anomaly_details.get(tid, ()))
        writer.writerow([tid, labeled.labels[tid], detail])
    return out.getvalue()


def write_labels(labeled: LabeledLog, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(serialize_labels(labeled))


def read_labels(path) -> dict[str, str]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        labels = {}
        for row in reader:
            if row["label"] not in (NORMAL, ANOMALOUS):
                raise ValueError(f"unknown label {row['label']!r} for trace {row['trace_id']!r}")
            labels[row["trace_id"]] = row["label"]
    if not labels:
        raise ValueError("labels file is empty")
    return labels
