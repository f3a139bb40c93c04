"""The learned model: graph, FD mappings, CPTs, novelty rates, and event scoring.

A trained model combines a dependency DAG over time-sliced attributes, one CPT
per attribute, majority-vote FD mappings with violation rates, and per-attribute
new_value / new_relation rates.  Every rate and CPT cell is an exact rational
over training counts, so scores are bit-identical across platforms and across a
save/load round trip.  Models are immutable; scoring is read-only and safe to
call from many threads.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence, Union

from .event_log import (
    AttributeSchema,
    Event,
    EventLog,
    KContextRow,
    Trace,
    Variable,
    active_domain,
    build_k_context,
    context_row_for,
)
from .fd import FDEdge, FDMapping, build_mapping, discover_fds, fdm_probability
from .structure import CPT, DAG, Edge, fit_cpts, learn_structure, make_constraints

MODEL_FORMAT_VERSION = 1

VALUE = "value"
RELATION = "relation"
FD_CHECK = "fd"


class ModelFormatError(ValueError):
    """Raised when a serialized model cannot be loaded."""


@dataclass(frozen=True)
class Factor:
    """One multiplicative contribution to an event's probability."""

    attribute: str
    kind: str  # VALUE, RELATION or FD_CHECK
    source: Variable | None
    value: float

    @property
    def log_value(self) -> float:
        return math.log(self.value) if self.value > 0.0 else -math.inf


@dataclass(frozen=True)
class EventScore:
    event_id: str
    factors: tuple[Factor, ...]

    @property
    def log_probability(self) -> float:
        return math.fsum(f.log_value for f in self.factors)

    @property
    def probability(self) -> float:
        return math.exp(self.log_probability) if self.log_probability > -math.inf else 0.0


@dataclass(frozen=True)
class EDBNModel:
    k: int
    schema: AttributeSchema
    dag: DAG
    fd_mappings: tuple[FDMapping, ...]
    cpts: dict[str, CPT]
    new_value: dict[str, Fraction]
    new_relation: dict[str, Fraction]
    active_domains: dict[str, frozenset[str]]
    training_event_count: int

    def __post_init__(self) -> None:
        for attr in self.schema.names:
            if attr not in self.cpts or attr not in self.new_value:
                raise ValueError(f"attribute {attr!r} is missing a CPT or new_value rate")
            for rate in (self.new_value[attr], self.new_relation[attr]):
                if not 0 <= rate <= 1:
                    raise ValueError(f"rate for {attr!r} outside [0, 1]")

    @cached_property
    def variables(self) -> tuple[Variable, ...]:
        return tuple(
            Variable(attr, lag) for lag in range(self.k, -1, -1) for attr in self.schema.names
        )

    @cached_property
    def _var_positions(self) -> dict[Variable, int]:
        return {v: i for i, v in enumerate(self.variables)}

    @cached_property
    def _mappings_by_target(self) -> dict[str, tuple[FDMapping, ...]]:
        grouped: dict[str, list[FDMapping]] = {a: [] for a in self.schema.names}
        for m in self.fd_mappings:
            grouped[m.edge.target.attr].append(m)
        return {a: tuple(ms) for a, ms in grouped.items()}

    def mappings_into(self, attr: str) -> tuple[FDMapping, ...]:
        return self._mappings_by_target[attr]

    def fd_edges(self) -> frozenset[Edge]:
        return frozenset((m.edge.source, m.edge.target) for m in self.fd_mappings)


def learn_edbn(
    log: EventLog,
    k: int,
    fd_threshold: float = 0.99,
    *,
    structure: Iterable[Edge] | None = None,
) -> EDBNModel:
    """Full learning pipeline: k-context, FD discovery, structure search, CPTs, rates.

    When ``structure`` is given those conditional edges are imposed verbatim
    (FD edges are still added to the graph) and the greedy search is skipped.
    """
    if not log.traces:
        raise ValueError("training log is empty")
    ctx = build_k_context(log, k)
    fds = discover_fds(ctx, fd_threshold)
    fd_pairs = frozenset((fd.source, fd.target) for fd in fds)
    if structure is None:
        constraints = make_constraints(ctx.variables, fds)
        dag = learn_structure(ctx, constraints)
    else:
        dag = DAG(tuple(ctx.variables), frozenset(structure) | fd_pairs)
    cpts = fit_cpts(ctx, dag, fds)
    mappings = tuple(build_mapping(ctx, fd) for fd in fds)

    n = log.event_count
    new_value = {a: Fraction(len(active_domain(log, a)), n) for a in log.schema.names}
    new_relation = {}
    for attr in log.schema.names:
        cpt = cpts[attr]
        new_relation[attr] = Fraction(len(cpt.rows), n) if cpt.parents else Fraction(0)
    domains = {a: frozenset(active_domain(log, a)) for a in log.schema.names}
    return EDBNModel(
        k=k,
        schema=log.schema,
        dag=dag,
        fd_mappings=mappings,
        cpts=cpts,
        new_value=new_value,
        new_relation=new_relation,
        active_domains=domains,
        training_event_count=n,
    )


def value_probability(model: EDBNModel, attr: str, x: str) -> float:
    """1 - new_value(attr) for a training-seen value, new_value(attr) otherwise."""
    rate = model.new_value[attr]
    if x in model.active_domains[attr]:
        return float(1 - rate)
    return float(rate)


def relation_probability(model: EDBNModel, attr: str, x: str, parent_values: tuple) -> float:
    """Conditional-dependency factor for one attribute value given its parent tuple.

    Parentless attributes contribute 1.  An unseen parent combination yields
    new_relation(attr); a seen one yields (1 - new_relation(attr)) * CPT.
    """
    cpt = model.cpts[attr]
    if not cpt.parents:
        return 1.0
    if len(parent_values) != len(cpt.parents):
        raise ValueError(f"{attr!r} expects {len(cpt.parents)} parent values")
    rate = model.new_relation[attr]
    if parent_values not in cpt.rows:
        return float(rate)
    return float(1 - rate) * cpt.probability(x, parent_values)


def event_probability(model: EDBNModel, ctx_row: KContextRow) -> EventScore:
    """Per-attribute product of value, relation and FD factors, with breakdown.

    The returned EventScore's probability is the product of its factors;
    accumulate via log_probability where exact zeros matter.
    """
    if len(ctx_row.values) != len(model.variables):
        raise ValueError("context row does not match the model's k and schema")
    pos = model._var_positions
    factors: list[Factor] = []
    for attr in model.schema.names:
        x = ctx_row.values[pos[Variable(attr, 0)]]
        factors.append(Factor(attr, VALUE, None, value_probability(model, attr, x)))
        cpt = model.cpts[attr]
        if cpt.parents:
            cfg = tuple(ctx_row.values[pos[p]] for p in cpt.parents)
            factors.append(Factor(attr, RELATION, None, relation_probability(model, attr, x, cfg)))
        for mapping in model.mappings_into(attr):
            src_value = ctx_row.values[pos[mapping.edge.source]]
            factors.append(
                Factor(attr, FD_CHECK, mapping.edge.source, fdm_probability(mapping, src_value, x))
            )
    return EventScore(ctx_row.event_id, tuple(factors))


def event_scores(model: EDBNModel, events: Sequence[Event]) -> list[EventScore]:
    """EventScore per event of an ordered (possibly partial) trace."""
    return [
        event_probability(model, context_row_for(model.schema, events, i, model.k))
        for i in range(len(events))
    ]


def trace_log_probability(model: EDBNModel, trace: Union[Trace, Sequence[Event]]) -> float:
    events = trace.events if isinstance(trace, Trace) else tuple(trace)
    if not events:
        raise ValueError("trace is empty")
    return math.fsum(s.log_probability for s in event_scores(model, events))


def trace_probability(model: EDBNModel, trace: Union[Trace, Sequence[Event]]) -> float:
    """Joint probability of a trace: product of its event probabilities.

    History comes from the trace itself, padded at the head.  Computed in log
    space; exactly 0.0 only when some factor is exactly zero.
    """
    logp = trace_log_probability(model, trace)
    return math.exp(logp) if logp > -math.inf else 0.0


# --- serialization ---------------------------------------------------------


def _frac(f: Fraction) -> list[int]:
    return [f.numerator, f.denominator]


def _var(v: Variable) -> list:
    return [v.attr, v.lag]


def save_model(model: EDBNModel) -> str:
    """Serialize to a versioned JSON text document with exact rational rates."""
    doc = {
        "format": "edbn-model",
        "format_version": MODEL_FORMAT_VERSION,
        "k": model.k,
        "schema": {
            "attributes": list(model.schema.names),
            "trace_id_column": model.schema.trace_id_column,
            "event_order_column": model.schema.event_order_column,
            "event_id_column": model.schema.event_id_column,
        },
        "training_event_count": model.training_event_count,
        "dag_edges": sorted([_var(s), _var(t)] for s, t in model.dag.edges),
        "fd_mappings": [
            {
                "source": _var(m.edge.source),
                "target": _var(m.edge.target),
                "strength": m.edge.strength,
                "map": {k: v for k, v in sorted(m.map.items())},
                "violation": _frac(m.violation_rate),
            }
            for m in model.fd_mappings
        ],
        "cpts": [
            {
                "attribute": attr,
                "parents": [_var(p) for p in cpt.parents],
                "rows": [
                    {
                        "parents": list(cfg),
                        "total": cpt.row_totals[cfg],
                        "counts": {k: v for k, v in sorted(cpt.rows[cfg].items())},
                    }
                    for cfg in sorted(cpt.rows)
                ],
            }
            for attr, cpt in sorted(model.cpts.items())
        ],
        "new_value": {a: _frac(r) for a, r in sorted(model.new_value.items())},
        "new_relation": {a: _frac(r) for a, r in sorted(model.new_relation.items())},
        "active_domains": {a: sorted(d) for a, d in sorted(model.active_domains.items())},
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def write_model(model: EDBNModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(save_model(model))


_TOP_KEYS = {
    "format",
    "format_version",
    "k",
    "schema",
    "training_event_count",
    "dag_edges",
    "fd_mappings",
    "cpts",
    "new_value",
    "new_relation",
    "active_domains",
}


def _check_keys(obj: dict, expected: set, where: str) -> None:
    got = set(obj)
    if got - expected:
        raise ModelFormatError(f"unknown field(s) in {where}: {sorted(got - expected)}")
    if expected - got:
        raise ModelFormatError(f"missing field(s) in {where}: {sorted(expected - got)}")


def _load_var(pair, where: str) -> Variable:
    if not (isinstance(pair, list) and len(pair) == 2 and isinstance(pair[0], str)):
        raise ModelFormatError(f"malformed variable in {where}: {pair!r}")
    return Variable(pair[0], int(pair[1]))


def _load_frac(pair, where: str) -> Fraction:
    if not (isinstance(pair, list) and len(pair) == 2):
        raise ModelFormatError(f"malformed rational in {where}: {pair!r}")
    return Fraction(int(pair[0]), int(pair[1]))


def load_model(text: str) -> EDBNModel:
    """Parse a model document; rejects unknown versions, unknown or missing fields."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"not a valid model document: {exc}") from None
    if not isinstance(doc, dict):
        raise ModelFormatError("model document must be a JSON object")
    _check_keys(doc, _TOP_KEYS, "model")
    if doc["format"] != "edbn-model" or doc["format_version"] != MODEL_FORMAT_VERSION:
        raise ModelFormatError(
            f"unsupported format {doc.get('format')!r} version {doc.get('format_version')!r}"
        )
    _check_keys(
        doc["schema"],
        {"attributes", "trace_id_column", "event_order_column", "event_id_column"},
        "schema",
    )
    schema = AttributeSchema(
        names=tuple(doc["schema"]["attributes"]),
        trace_id_column=doc["schema"]["trace_id_column"],
        event_order_column=doc["schema"]["event_order_column"],
        event_id_column=doc["schema"]["event_id_column"],
    )
    k = int(doc["k"])
    variables = tuple(Variable(a, lag) for lag in range(k, -1, -1) for a in schema.names)
    edges = frozenset(
        (_load_var(e[0], "dag_edges"), _load_var(e[1], "dag_edges")) for e in doc["dag_edges"]
    )
    dag = DAG(variables, edges)

    mappings = []
    for entry in doc["fd_mappings"]:
        _check_keys(entry, {"source", "target", "strength", "map", "violation"}, "fd_mappings")
        edge = FDEdge(
            _load_var(entry["source"], "fd_mappings"),
            _load_var(entry["target"], "fd_mappings"),
            float(entry["strength"]),
        )
        mappings.append(FDMapping(edge, dict(entry["map"]), _load_frac(entry["violation"], "fd_mappings")))

    cpts: dict[str, CPT] = {}
    for entry in doc["cpts"]:
        _check_keys(entry, {"attribute", "parents", "rows"}, "cpts")
        parents = tuple(_load_var(p, "cpts") for p in entry["parents"])
        rows: dict = {}
        totals: dict = {}
        for row in entry["rows"]:
            _check_keys(row, {"parents", "total", "counts"}, "cpt row")
            cfg = tuple(row["parents"])
            if len(cfg) != len(parents):
                raise ModelFormatError(f"CPT row arity mismatch for {entry['attribute']!r}")
            rows[cfg] = {k2: int(v) for k2, v in row["counts"].items()}
            totals[cfg] = int(row["total"])
        attr = entry["attribute"]
        cpts[attr] = CPT(Variable(attr, 0), parents, rows, totals)

    new_value = {a: _load_frac(v, "new_value") for a, v in doc["new_value"].items()}
    new_relation = {a: _load_frac(v, "new_relation") for a, v in doc["new_relation"].items()}
    domains = {a: frozenset(vals) for a, vals in doc["active_domains"].items()}
    try:
        return EDBNModel(
            k=k,
            schema=schema,
            dag=dag,
            fd_mappings=tuple(mappings),
            cpts=cpts,
            new_value=new_value,
            new_relation=new_relation,
            active_domains=domains,
            training_event_count=int(doc["training_event_count"]),
        )
    except ValueError as exc:
        raise ModelFormatError(str(exc)) from None


def read_model(path) -> EDBNModel:
    with open(path, encoding="utf-8") as fh:
        return load_model(fh.read())
