"""Conditional-dependency structure learning and CPT fitting.

Greedy first-improvement hill climbing on an AIC score over the k-context
columns: score(G) = LL(G) - #params(G), maximized, where LL is the multinomial
log-likelihood of each slice-0 attribute given its conditional parents and
#params charges (|a_dom(child)|-1) * prod |a_dom(parent)| per family.
Whitelisted FD edges are pinned into the graph but are not conditional
parents, so they contribute neither likelihood nor parameters; acyclicity is
required of the conditional edge set only.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .event_log import KContextLog, Variable
from .fd import FDEdge

Edge = tuple[Variable, Variable]

# Minimum score gain for a hill-climbing move to be accepted.
SCORE_EPS = 1e-9


@dataclass(frozen=True)
class StructureConstraints:
    blacklist: frozenset[Edge]
    whitelist: frozenset[Edge]

    def __post_init__(self) -> None:
        overlap = self.blacklist & self.whitelist
        if overlap:
            raise ValueError(f"edges both blacklisted and whitelisted: {sorted(overlap)}")


@dataclass(frozen=True)
class DAG:
    """Dependency graph over time-sliced variables; every edge ends in slice 0."""

    vertices: tuple[Variable, ...]
    edges: frozenset[Edge]

    def __post_init__(self) -> None:
        vertex_set = set(self.vertices)
        for src, tgt in self.edges:
            if src not in vertex_set or tgt not in vertex_set:
                raise ValueError(f"edge {src}->{tgt} uses unknown vertices")
            if tgt.lag != 0:
                raise ValueError(f"edge {src}->{tgt} ends in a history slice")

    def parents_of(self, var: Variable, exclude: frozenset[Edge] = frozenset()) -> tuple[Variable, ...]:
        return tuple(src for src, tgt in sorted(self.edges) if tgt == var and (src, tgt) not in exclude)


@dataclass(frozen=True)
class CPT:
    """Empirical conditional distribution of a slice-0 attribute given its parents.

    Rows are keyed by parent-value tuples and hold raw counts, so every
    probability is an exact m/n from the training rows.
    """

    child: Variable
    parents: tuple[Variable, ...]
    rows: dict
    row_totals: dict

    def __post_init__(self) -> None:
        for cfg, counts in self.rows.items():
            if sum(counts.values()) != self.row_totals[cfg]:
                raise ValueError(f"CPT row {cfg} counts do not sum to its total")

    def probability(self, value, cfg) -> float:
        return self.rows[cfg].get(value, 0) / self.row_totals[cfg]

    def row_distribution(self, cfg) -> dict:
        total = self.row_totals[cfg]
        return {v: c / total for v, c in self.rows[cfg].items()}


def make_constraints(variables: Sequence[Variable], fds: Iterable[FDEdge]) -> StructureConstraints:
    """Blacklist every edge into a history slice; whitelist the FD edges."""
    blacklist = frozenset(
        (src, tgt) for tgt in variables if tgt.lag > 0 for src in variables if src != tgt
    )
    whitelist = frozenset((fd.source, fd.target) for fd in fds)
    return StructureConstraints(blacklist, whitelist)


class _CodedContext:
    """Integer-coded k-context columns with memoized family scores."""

    def __init__(self, ctx: KContextLog):
        self.variables = ctx.variables
        self.n = len(ctx.rows)
        self.codes: dict[Variable, np.ndarray] = {}
        self.cards: dict[Variable, int] = {}
        for var in ctx.variables:
            codes, card = _encode(ctx.column(var))
            self.codes[var] = codes
            self.cards[var] = card
        self._family_cache: dict[tuple[Variable, frozenset[Variable]], float] = {}

    def family_score(self, child: Variable, parents: frozenset[Variable]) -> float:
        key = (child, parents)
        cached = self._family_cache.get(key)
        if cached is not None:
            return cached
        params = (self.cards[child] - 1)
        for p in parents:
            params *= self.cards[p]
        # Any family the climber can hold scores above -n*(2*ln card + 1), so a
        # family whose parameter count alone is below that can never be chosen;
        # skip counting it (also keeps the int64 config keys small).
        limit = self.n * (2.0 * np.log(max(self.cards[child], 2)) + 1.0) + 1.0
        if params > limit:
            score = -float(params)
        else:
            score = self._log_likelihood(child, parents) - params
        self._family_cache[key] = score
        return score

    def _log_likelihood(self, child: Variable, parents: frozenset[Variable]) -> float:
        cfg_key = np.zeros(self.n, dtype=np.int64)
        for p in sorted(parents):
            cfg_key = cfg_key * self.cards[p] + self.codes[p]
        joint_key = cfg_key * self.cards[child] + self.codes[child]
        return _sum_n_log_n(joint_key) - _sum_n_log_n(cfg_key)


def _encode(column: Sequence[str]) -> tuple[np.ndarray, int]:
    uniq, inverse = np.unique(np.asarray(column), return_inverse=True)
    return inverse.astype(np.int64), len(uniq)


def _sum_n_log_n(keys: np.ndarray) -> float:
    _, counts = np.unique(keys, return_counts=True)
    return float((counts * np.log(counts)).sum())


def _conditional_reaches(edges: set[Edge], start: Variable, goal: Variable) -> bool:
    """Whether goal is reachable from start along the given directed edges."""
    stack, seen = [start], {start}
    children: dict[Variable, list[Variable]] = {}
    for src, tgt in edges:
        children.setdefault(src, []).append(tgt)
    while stack:
        node = stack.pop()
        if node == goal:
            return True
        for nxt in children.get(node, ()):
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return False


def _assert_acyclic(edges: set[Edge]) -> None:
    # Kahn's algorithm restricted to edge-touching vertices.
    nodes = {v for e in edges for v in e}
    indeg = {v: 0 for v in nodes}
    for _, tgt in edges:
        indeg[tgt] += 1
    frontier = [v for v in nodes if indeg[v] == 0]
    visited = 0
    while frontier:
        node = frontier.pop()
        visited += 1
        for src, tgt in edges:
            if src == node:
                indeg[tgt] -= 1
                if indeg[tgt] == 0:
                    frontier.append(tgt)
    if visited != len(nodes):
        raise AssertionError("conditional edge set contains a cycle")


def _candidate_order(variables: Sequence[Variable]) -> list[Edge]:
    sources = sorted(variables, key=lambda v: (v.lag, v.attr))
    targets = sorted((v for v in variables if v.lag == 0), key=lambda v: v.attr)
    return [(s, t) for s in sources for t in targets if s != t]


def learn_structure(ctx: KContextLog, constraints: StructureConstraints) -> DAG:
    """Greedy AIC hill climbing over single-edge additions and deletions.

    Deterministic: candidates are scanned in lexicographic (source slice,
    source attribute, target attribute) order and the first move improving
    the score by more than SCORE_EPS is applied, restarting the scan.
    """
    if not ctx.rows:
        raise ValueError("context log is empty")
    coded = _CodedContext(ctx)
    candidates = _candidate_order(ctx.variables)
    edges: set[Edge] = set(constraints.whitelist)
    conditional: set[Edge] = set()
    parents: dict[Variable, frozenset[Variable]] = {
        v: frozenset() for v in ctx.variables if v.lag == 0
    }

    improved = True
    while improved:
        improved = False
        for src, tgt in candidates:
            if (src, tgt) in constraints.blacklist:
                continue
            if (src, tgt) in constraints.whitelist:
                continue  # pinned; neither addable nor deletable
            current = coded.family_score(tgt, parents[tgt])
            if (src, tgt) in edges:
                trial = parents[tgt] - {src}
            else:
                # No new cycle through conditional or whitelisted edges; in
                # particular the reverse of an FD edge is never re-modeled.
                if _conditional_reaches(edges, tgt, src):
                    continue
                trial = parents[tgt] | {src}
            gain = coded.family_score(tgt, trial) - current
            if gain > SCORE_EPS:
                if (src, tgt) in edges:
                    edges.discard((src, tgt))
                    conditional.discard((src, tgt))
                else:
                    edges.add((src, tgt))
                    conditional.add((src, tgt))
                parents[tgt] = trial
                _assert_acyclic(conditional)
                improved = True
                break
    return DAG(tuple(ctx.variables), frozenset(edges))


def aic_score(ctx: KContextLog, dag: DAG, whitelist: frozenset[Edge] = frozenset()) -> float:
    """AIC score of a DAG on a k-context (parents exclude whitelisted edges)."""
    coded = _CodedContext(ctx)
    total = 0.0
    for child in ctx.current_variables():
        parents = frozenset(dag.parents_of(child, exclude=whitelist))
        total += coded.family_score(child, parents)
    return total


def fit_cpts(ctx: KContextLog, dag: DAG, fds: Iterable[FDEdge]) -> dict[str, CPT]:
    """Empirical-frequency CPTs, one per slice-0 attribute.

    Parent sets are the DAG parents minus FD edges, ordered as in the
    k-context variable list (slice k first).
    """
    fd_edges = frozenset((fd.source, fd.target) for fd in fds)
    var_pos = {v: i for i, v in enumerate(ctx.variables)}
    cpts: dict[str, CPT] = {}
    for child in ctx.current_variables():
        parents = tuple(
            sorted(dag.parents_of(child, exclude=fd_edges), key=var_pos.__getitem__)
        )
        child_i = ctx.index_of(child)
        parent_i = [ctx.index_of(p) for p in parents]
        rows: dict = {}
        totals: dict = {}
        for row in ctx.rows:
            cfg = tuple(row.values[i] for i in parent_i)
            value = row.values[child_i]
            counts = rows.setdefault(cfg, {})
            counts[value] = counts.get(value, 0) + 1
            totals[cfg] = totals.get(cfg, 0) + 1
        cpts[child.attr] = CPT(child, parents, rows, totals)
    return cpts
