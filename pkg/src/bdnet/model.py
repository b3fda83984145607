"""Discrete variables, DAGs, CPTs and the factored joint distribution.

Everything here is immutable after construction and safe to share between
threads. Probability products run in natural-log space so that networks with
dozens of variables do not underflow; an exact zero probability is carried as
the ``-inf`` sentinel.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from heapq import heapify, heappop, heappush
from typing import Iterable, Mapping, Sequence

import numpy as np

ROLES = ("chance", "decision", "utility")

ROW_SUM_TOL = 1e-9


class InvalidAssignmentError(KeyError):
    """An assignment references an unknown variable or state."""


class CyclicGraphError(ValueError):
    """The edge set admits no topological order."""


@dataclass(frozen=True)
class Variable:
    """A named discrete variable with an ordered list of state labels.

    State labels are kept verbatim; discretized columns use their interval
    string (e.g. ``"[70.2,85.6]"``) as the label.
    """

    name: str
    states: tuple[str, ...]
    role: str = "chance"

    def __post_init__(self) -> None:
        object.__setattr__(self, "states", tuple(self.states))
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r} for variable {self.name!r}")
        if len(set(self.states)) != len(self.states):
            raise ValueError(f"duplicate state labels in variable {self.name!r}")
        if self.role in ("chance", "decision") and len(self.states) < 2:
            raise ValueError(f"variable {self.name!r} needs >= 2 states, got {len(self.states)}")

    @property
    def cardinality(self) -> int:
        return len(self.states)

    def state_index(self, state: str) -> int:
        try:
            return self.states.index(state)
        except ValueError:
            raise InvalidAssignmentError(f"variable {self.name!r} has no state {state!r}") from None

    def with_role(self, role: str) -> "Variable":
        return Variable(self.name, self.states, role)


@dataclass(frozen=True)
class Dag:
    """A directed acyclic graph over named nodes.

    Nodes are stored sorted and edges deduplicated; construction fails on
    self-loops, dangling endpoints and cycles.
    """

    nodes: tuple[str, ...]
    edges: tuple[tuple[str, str], ...]
    _parents: dict[str, tuple[str, ...]] = field(repr=False, compare=False, default_factory=dict)
    _order: tuple[str, ...] = field(repr=False, compare=False, default=())

    def __init__(self, nodes: Iterable[str], edges: Iterable[tuple[str, str]] = ()) -> None:
        node_tuple = tuple(sorted(set(nodes)))
        edge_tuple = tuple(sorted(set((str(u), str(v)) for u, v in edges)))
        object.__setattr__(self, "nodes", node_tuple)
        object.__setattr__(self, "edges", edge_tuple)
        node_set = set(node_tuple)
        parents: dict[str, list[str]] = {v: [] for v in node_tuple}
        for u, v in edge_tuple:
            if u == v:
                raise ValueError(f"self-loop {u!r} -> {v!r}")
            if u not in node_set or v not in node_set:
                raise ValueError(f"edge ({u!r}, {v!r}) references unknown node")
            parents[v].append(u)
        object.__setattr__(self, "_parents", {v: tuple(sorted(ps)) for v, ps in parents.items()})
        object.__setattr__(self, "_order", _kahn_order(node_tuple, edge_tuple))

    def parents(self, node: str) -> tuple[str, ...]:
        try:
            return self._parents[node]
        except KeyError:
            raise KeyError(f"unknown node {node!r}") from None

    def children(self, node: str) -> tuple[str, ...]:
        if node not in self._parents:
            raise KeyError(f"unknown node {node!r}")
        return tuple(sorted(v for u, v in self.edges if u == node))

    def topological_order(self) -> tuple[str, ...]:
        return self._order

    def has_edge(self, u: str, v: str) -> bool:
        return (u, v) in set(self.edges)


def _kahn_order(nodes: Sequence[str], edges: Sequence[tuple[str, str]]) -> tuple[str, ...]:
    """Kahn's algorithm with a heap so ties break lexicographically."""
    indeg = {v: 0 for v in nodes}
    children: dict[str, list[str]] = {v: [] for v in nodes}
    for u, v in edges:
        indeg[v] += 1
        children[u].append(v)
    ready = [v for v in nodes if indeg[v] == 0]
    heapify(ready)
    order: list[str] = []
    while ready:
        v = heappop(ready)
        order.append(v)
        for c in children[v]:
            indeg[c] -= 1
            if indeg[c] == 0:
                heappush(ready, c)
    if len(order) < len(nodes):
        cycle = _find_cycle({v for v in nodes if indeg[v] > 0}, edges)
        raise CyclicGraphError(f"graph contains a cycle: {' -> '.join(cycle)}")
    return tuple(order)


def _find_cycle(remaining: set[str], edges: Sequence[tuple[str, str]]) -> list[str]:
    # every node Kahn left behind has a parent among the leftovers, so walking
    # parents must revisit a node; children may dead-end below the cycle
    parents: dict[str, list[str]] = {v: [] for v in remaining}
    for u, v in edges:
        if u in remaining and v in remaining:
            parents[v].append(u)
    seen: list[str] = []
    node = min(remaining)
    while node not in seen:
        seen.append(node)
        node = min(parents[node])
    back_walk = seen[seen.index(node):] + [node]
    return back_walk[::-1]


def topological_order(dag: Dag) -> tuple[str, ...]:
    """Parents-before-children node order, ties broken by node name."""
    return dag.topological_order()


@dataclass(frozen=True, eq=False)
class Cpt:
    """Conditional probability table for one child variable.

    ``table`` has one row per joint parent-state configuration and one column
    per child state. Rows are ordered row-major over the parent tuple: the
    first parent is the most significant digit, the last varies fastest
    (``itertools.product`` order over the parents' state indices).
    """

    child: str
    parents: tuple[str, ...]
    table: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "parents", tuple(self.parents))
        arr = np.asarray(self.table, dtype=float)
        if arr.ndim != 2:
            raise ValueError(f"CPT for {self.child!r} must be 2-D, got shape {arr.shape}")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "table", arr)

    @property
    def n_rows(self) -> int:
        return self.table.shape[0]

    @property
    def n_states(self) -> int:
        return self.table.shape[1]

    def row_index(self, parent_state_indices: Sequence[int], parent_cards: Sequence[int]) -> int:
        idx = 0
        for s, card in zip(parent_state_indices, parent_cards):
            idx = idx * card + s
        return idx


class DiscreteNetwork:
    """A DAG plus one CPT per node; the triple defining the joint distribution."""

    def __init__(
        self,
        variables: Iterable[Variable],
        dag: Dag,
        cpts: Iterable[Cpt],
        validate: bool = True,
    ) -> None:
        self.variables: dict[str, Variable] = {v.name: v for v in variables}
        self.dag = dag
        self.cpts: dict[str, Cpt] = {c.child: c for c in cpts}
        if validate:
            problems = validate_network(self)
            if problems:
                raise ValueError("invalid network: " + "; ".join(problems))

    def variable(self, name: str) -> Variable:
        try:
            return self.variables[name]
        except KeyError:
            raise InvalidAssignmentError(f"unknown variable {name!r}") from None

    def cardinality(self, name: str) -> int:
        return self.variable(name).cardinality

    def log_probability(self, assignment: Mapping[str, str]) -> float:
        """Natural log of the joint probability of a complete assignment."""
        for name in self.variables:
            if name not in assignment:
                raise InvalidAssignmentError(f"assignment is missing variable {name!r}")
        for name in assignment:
            if name not in self.variables:
                raise InvalidAssignmentError(f"unknown variable {name!r}")
        total = 0.0
        for name, var in self.variables.items():
            cpt = self.cpts[name]
            child_idx = var.state_index(assignment[name])
            cards = [self.cardinality(p) for p in cpt.parents]
            pidx = [self.variable(p).state_index(assignment[p]) for p in cpt.parents]
            p = float(cpt.table[cpt.row_index(pidx, cards), child_idx])
            if p == 0.0:
                return float("-inf")
            total += math.log(p)
        return total

    def to_json(self) -> str:
        doc = {
            "variables": [
                {"name": v.name, "states": list(v.states), "role": v.role}
                for v in self.variables.values()
            ],
            "edges": [list(e) for e in self.dag.edges],
            "cpts": [
                {
                    "child": c.child,
                    "parents": list(c.parents),
                    "table": [list(map(float, row)) for row in c.table],
                }
                for c in self.cpts.values()
            ],
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "DiscreteNetwork":
        doc = json.loads(text)
        variables = [
            Variable(v["name"], tuple(v["states"]), v.get("role", "chance"))
            for v in doc["variables"]
        ]
        dag = Dag([v.name for v in variables], [tuple(e) for e in doc["edges"]])
        cpts = [
            Cpt(c["child"], tuple(c["parents"]), np.array(c["table"], dtype=float))
            for c in doc["cpts"]
        ]
        return cls(variables, dag, cpts)


def joint_probability(net: DiscreteNetwork, assignment: Mapping[str, str]) -> float:
    """Probability of a complete assignment: the product of each node's CPT entry.

    Computed as ``exp(sum(log ...))``; an exact zero anywhere short-circuits
    to 0.0.
    """
    lp = net.log_probability(assignment)
    return 0.0 if lp == float("-inf") else math.exp(lp)


def validate_network(net: DiscreteNetwork) -> list[str]:
    """Diagnostic pass: acyclicity, CPT shape, and row normalization.

    Returns human-readable violation strings; an empty list means valid.
    The DAG itself is acyclic by construction, so the checks here cover the
    CPT layer.
    """
    problems: list[str] = []
    for name in net.dag.nodes:
        if name not in net.variables:
            problems.append(f"node {name!r} has no variable definition")
    for name in net.dag.nodes:
        if name not in net.cpts:
            problems.append(f"node {name!r} has no CPT")
    for child, cpt in net.cpts.items():
        if child not in net.variables:
            problems.append(f"CPT child {child!r} is not a declared variable")
            continue
        if child not in set(net.dag.nodes):
            problems.append(f"CPT child {child!r} is not a DAG node")
            continue
        expected_parents = set(net.dag.parents(child))
        if set(cpt.parents) != expected_parents:
            problems.append(
                f"CPT for {child!r} lists parents {sorted(cpt.parents)} "
                f"but the DAG has {sorted(expected_parents)}"
            )
            continue
        unknown = [p for p in cpt.parents if p not in net.variables]
        if unknown:
            problems.append(f"CPT for {child!r} references unknown parents {unknown}")
            continue
        n_rows = 1
        for p in cpt.parents:
            n_rows *= net.cardinality(p)
        expected_shape = (n_rows, net.cardinality(child))
        if cpt.table.shape != expected_shape:
            problems.append(
                f"CPT for {child!r} has shape {cpt.table.shape}, expected {expected_shape}"
            )
            continue
        if np.any(cpt.table < 0):
            problems.append(f"CPT for {child!r} has negative entries")
        sums = cpt.table.sum(axis=1)
        for i, s in enumerate(sums):
            if abs(s - 1.0) > ROW_SUM_TOL:
                problems.append(f"CPT for {child!r} row {i} sums to {s!r}, expected 1")
    return problems
