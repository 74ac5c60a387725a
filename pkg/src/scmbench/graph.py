"""Two-layer causal graph over simulator variables.

The graph has an *initial* layer (parents of each variable in the first
time step) and a *transition* layer split into same-time parents and
previous-time parents.  Unrolling the transition layer ``T - 1`` times
yields an ordinary DAG over ``(variable, t)`` nodes, which is what
backdoor adjustment and d-separation operate on.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Literal, Mapping

import pandas as pd

from .errors import ConfigError

__all__ = [
    "ScmGraph",
    "build_graph",
    "topological_order",
    "unrolled_parents",
    "descendants",
    "d_separated",
    "adjustment_set",
    "export_edges",
]

Node = tuple[str, int]


@dataclass(frozen=True)
class ScmGraph:
    """Validated two-layer graph. ``variables`` preserves declaration order."""

    variables: tuple[str, ...]
    initial_parents: dict[str, tuple[str, ...]]
    trans_parents_curr: dict[str, tuple[str, ...]]
    trans_parents_prev: dict[str, tuple[str, ...]]


def _find_cycle(variables: Iterable[str], parents: Mapping[str, tuple[str, ...]]) -> list[str] | None:
    """Return one directed cycle (as a node list, first == last) or None."""
    WHITE, GREY, BLACK = 0, 1, 2
    color = {v: WHITE for v in variables}
    stack: list[str] = []

    def visit(v: str) -> list[str] | None:
        color[v] = GREY
        stack.append(v)
        for child in (c for c in color if v in parents[c]):
            if color[child] == GREY:
                return stack[stack.index(child):] + [child]
            if color[child] == WHITE:
                cycle = visit(child)
                if cycle is not None:
                    return cycle
        stack.pop()
        color[v] = BLACK
        return None

    for v in color:
        if color[v] == WHITE:
            cycle = visit(v)
            if cycle is not None:
                return cycle
    return None


def build_graph(spec: Mapping[str, Mapping]) -> ScmGraph:
    """Build and validate a graph from per-variable parent declarations.

    ``spec`` maps variable name to a mapping with ``parents``,
    ``seq_parents_curr`` and ``seq_parents_prev`` entries (extra keys are
    ignored, so a full config ``variables`` block can be passed directly).

    Raises:
        ConfigError: on parents that name unknown variables, on duplicate
            parents, or on cycles within the initial or same-time layer
            (the message includes one offending cycle).
    """
    variables = tuple(spec)
    known = set(variables)
    initial: dict[str, tuple[str, ...]] = {}
    curr: dict[str, tuple[str, ...]] = {}
    prev: dict[str, tuple[str, ...]] = {}

    for var, block in spec.items():
        for key, target in (
            ("parents", initial),
            ("seq_parents_curr", curr),
            ("seq_parents_prev", prev),
        ):
            names = tuple(block.get(key) or ())
            unknown = [p for p in names if p not in known]
            if unknown:
                raise ConfigError(
                    f"variable {var!r}: {key} names unknown variable {unknown[0]!r}"
                )
            if len(set(names)) != len(names):
                raise ConfigError(f"variable {var!r}: duplicate entries in {key}")
            target[var] = names
        if var in curr[var]:
            raise ConfigError(
                f"variable {var!r}: cannot be its own same-time parent "
                f"(cycle: {var} -> {var})"
            )
        if var in initial[var]:
            raise ConfigError(
                f"variable {var!r}: cannot be its own initial parent "
                f"(cycle: {var} -> {var})"
            )

    for layer_name, layer in (("initial", initial), ("same-time transition", curr)):
        cycle = _find_cycle(variables, layer)
        if cycle is not None:
            raise ConfigError(
                f"cycle in {layer_name} layer: {' -> '.join(cycle)}"
            )
    return ScmGraph(variables, initial, curr, prev)


def topological_order(
    graph: ScmGraph, layer: Literal["initial", "transition"]
) -> list[str]:
    """Deterministic topological order of one layer.

    Only same-time edges constrain the transition layer (previous-time
    parents are already fixed when a step is sampled).  Ties are broken
    by declaration order, so the result is unique for a given graph.
    """
    parents = graph.initial_parents if layer == "initial" else graph.trans_parents_curr
    remaining = list(graph.variables)
    placed: set[str] = set()
    order: list[str] = []
    while remaining:
        ready = next(
            (v for v in remaining if all(p in placed for p in parents[v])), None
        )
        if ready is None:  # unreachable on a validated graph
            raise ConfigError(f"no valid topological order for {layer} layer")
        remaining.remove(ready)
        placed.add(ready)
        order.append(ready)
    return order


def _check_node(graph: ScmGraph, node: Node, horizon: int, role: str) -> None:
    var, t = node
    if var not in graph.variables:
        raise ConfigError(f"{role} names unknown variable {var!r}")
    if not 1 <= t <= horizon:
        raise ConfigError(
            f"{role} time {t} outside the unrolled horizon [1, {horizon}]"
        )


def unrolled_parents(graph: ScmGraph, horizon: int) -> dict[Node, tuple[Node, ...]]:
    """Parent map of the DAG unrolled over ``t = 1 .. horizon``."""
    out: dict[Node, tuple[Node, ...]] = {}
    for var in graph.variables:
        out[(var, 1)] = tuple((p, 1) for p in graph.initial_parents[var])
    for t in range(2, horizon + 1):
        for var in graph.variables:
            out[(var, t)] = tuple(
                (p, t) for p in graph.trans_parents_curr[var]
            ) + tuple((p, t - 1) for p in graph.trans_parents_prev[var])
    return out


def _children_map(parents: Mapping[Node, tuple[Node, ...]]) -> dict[Node, list[Node]]:
    children: dict[Node, list[Node]] = {node: [] for node in parents}
    for node, pars in parents.items():
        for p in pars:
            children[p].append(node)
    return children


def descendants(parents: Mapping[Node, tuple[Node, ...]], node: Node) -> set[Node]:
    """All strict descendants of ``node`` in the unrolled DAG."""
    children = _children_map(parents)
    seen: set[Node] = set()
    frontier = list(children[node])
    while frontier:
        n = frontier.pop()
        if n not in seen:
            seen.add(n)
            frontier.extend(children[n])
    return seen


def d_separated(
    parents: Mapping[Node, tuple[Node, ...]],
    x: Node,
    y: Node,
    given: frozenset[Node] | set[Node],
) -> bool:
    """Bayes-ball d-separation test between two nodes of the unrolled DAG."""
    given = frozenset(given)
    children = _children_map(parents)
    # Ancestors of the conditioning set decide whether a collider is open.
    anc_of_given: set[Node] = set(given)
    frontier = list(given)
    while frontier:
        n = frontier.pop()
        for p in parents[n]:
            if p not in anc_of_given:
                anc_of_given.add(p)
                frontier.append(p)

    # Walk (node, direction): "up" = arrived from a child, "down" = from a parent.
    visited: set[tuple[Node, str]] = set()
    stack: list[tuple[Node, str]] = [(x, "up")]
    while stack:
        node, direction = stack.pop()
        if (node, direction) in visited:
            continue
        visited.add((node, direction))
        if node == y and node not in given:
            return False
        if direction == "up" and node not in given:
            for p in parents[node]:
                stack.append((p, "up"))
            for c in children[node]:
                stack.append((c, "down"))
        elif direction == "down":
            if node not in given:
                for c in children[node]:
                    stack.append((c, "down"))
            if node in anc_of_given:
                for p in parents[node]:
                    stack.append((p, "up"))
    return True


def _backdoor_valid(
    parents: Mapping[Node, tuple[Node, ...]],
    treatment: Node,
    outcome: Node,
    adjustment: frozenset[Node],
) -> bool:
    """Backdoor criterion: no member descends from the treatment, and the
    set d-separates treatment from outcome once the treatment's outgoing
    edges are removed."""
    if adjustment & (descendants(parents, treatment) | {treatment}):
        return False
    pruned = {
        node: tuple(p for p in pars if p != treatment)
        for node, pars in parents.items()
    }
    pruned[treatment] = parents[treatment]
    return d_separated(pruned, treatment, outcome, adjustment)


def adjustment_set(
    graph: ScmGraph,
    treatment: Node,
    outcome: Node,
    mode: Literal["minimal", "full_pretreatment"] = "minimal",
) -> frozenset[Node]:
    """Backdoor adjustment set for ``treatment -> outcome``.

    ``minimal`` returns the direct causes of the treatment node;
    ``full_pretreatment`` returns every node at an earlier time step plus
    the same-time nodes that are not the treatment or its descendants.
    Both are verified against the backdoor criterion before returning.

    Raises:
        ConfigError: on unknown variables, times outside ``[1, outcome
            time]``, or a treatment not strictly before the outcome.
    """
    horizon = outcome[1]
    _check_node(graph, treatment, horizon, "treatment")
    _check_node(graph, outcome, horizon, "outcome")
    if treatment[1] >= outcome[1]:
        raise ConfigError(
            f"treatment time {treatment[1]} must precede outcome time {outcome[1]}"
        )
    parents = unrolled_parents(graph, horizon)
    if mode == "minimal":
        result = frozenset(parents[treatment])
    elif mode == "full_pretreatment":
        t0 = treatment[1]
        blocked = descendants(parents, treatment) | {treatment}
        result = frozenset(
            node
            for node in parents
            if node[1] < t0 or (node[1] == t0 and node not in blocked)
        )
    else:
        raise ConfigError(f"unknown adjustment mode {mode!r}")
    if not _backdoor_valid(parents, treatment, outcome, result):
        raise ConfigError(
            f"{mode} adjustment set for {treatment} -> {outcome} fails the "
            "backdoor criterion on the declared graph"
        )
    return result


def export_edges(graph: ScmGraph) -> pd.DataFrame:
    """Edge list with columns (child, parent, layer, lag) for CSV export."""
    rows = []
    for var in graph.variables:
        for p in graph.initial_parents[var]:
            rows.append((var, p, "initial", 0))
        for p in graph.trans_parents_curr[var]:
            rows.append((var, p, "transition", 0))
        for p in graph.trans_parents_prev[var]:
            rows.append((var, p, "transition", 1))
    return pd.DataFrame(rows, columns=["child", "parent", "layer", "lag"])
