"""Score-based structure learning: BIC, hill climbing, bootstrap ensembles.

The search is plain steepest-ascent hill climbing over single-edge moves
(add / remove / reverse), scored with the natural-log BIC. Local optima are
handled the way the source method does it: by learning many structures on
bootstrap resamples and majority-voting the edges.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
import pandas as pd

from .model import Cpt, CyclicGraphError, Dag, DiscreteNetwork, Variable

IMPROVEMENT_EPS = 1e-10


class ConstraintError(ValueError):
    """A structure violates the edge blacklist/whitelist."""


class CategoricalData:
    """Integer-coded categorical table used by the scorers and samplers.

    Column codes are stored contiguously (one row per column) because family
    counting slices whole columns in the hill-climbing hot loop.
    """

    def __init__(
        self,
        columns: Sequence[str],
        states: Mapping[str, Sequence[str]],
        codes: np.ndarray,
    ):
        self.columns = tuple(columns)
        self.states = {c: tuple(states[c]) for c in self.columns}
        self.codes = np.ascontiguousarray(codes, dtype=np.int32)
        if self.codes.shape[0] != len(self.columns):
            raise ValueError("codes must have one row per column")
        self._index = {c: i for i, c in enumerate(self.columns)}

    @classmethod
    def from_frame(
        cls,
        df: pd.DataFrame,
        state_orders: Mapping[str, Sequence[str]] | None = None,
    ) -> "CategoricalData":
        """Code a DataFrame of categorical columns.

        State order comes from ``state_orders`` when given (discretized
        columns keep their bin order); otherwise the sorted unique values.
        """
        state_orders = state_orders or {}
        columns = list(df.columns)
        states = {}
        rows = []
        for col in columns:
            values = df[col].astype(str)
            if df[col].isna().any():
                raise ValueError(f"column {col!r} has missing values; impute first")
            order = state_orders.get(col)
            if order is None:
                order = sorted(values.unique())
            cat = pd.Categorical(values, categories=list(order))
            if cat.isna().any():
                bad = sorted(set(values) - set(order))
                raise ValueError(f"column {col!r} has values outside its state list: {bad}")
            states[col] = tuple(order)
            rows.append(cat.codes.astype(np.int32))
        return cls(columns, states, np.vstack(rows) if rows else np.zeros((0, len(df)), np.int32))

    @property
    def n_rows(self) -> int:
        return self.codes.shape[1]

    def cardinality(self, column: str) -> int:
        return len(self.states[column])

    def column_codes(self, column: str) -> np.ndarray:
        return self.codes[self._index[column]]

    def take(self, row_idx: np.ndarray) -> "CategoricalData":
        return CategoricalData(self.columns, self.states, self.codes[:, row_idx])

    def counts(self, child: str, parents: Sequence[str]) -> np.ndarray:
        """Joint counts N_jk: one row per parent configuration, one column per child state."""
        r = self.cardinality(child)
        idx = np.zeros(self.n_rows, dtype=np.int64)
        q = 1
        for p in parents:
            card = self.cardinality(p)
            idx = idx * card + self.column_codes(p)
            q *= card
        flat = idx * r + self.column_codes(child)
        return np.bincount(flat, minlength=q * r).reshape(q, r)


def as_categorical_data(
    data: "CategoricalData | pd.DataFrame",
    state_orders: Mapping[str, Sequence[str]] | None = None,
) -> CategoricalData:
    if isinstance(data, CategoricalData):
        return data
    return CategoricalData.from_frame(data, state_orders)


@dataclass(frozen=True)
class EdgeConstraints:
    """Forbidden and required directed edges.

    A blacklist entry ``("*", v)`` forbids every incoming edge of ``v`` (the
    protocol used for root-cause nodes like State/County/CBSA). Whitelist
    edges are forced into every learned structure and never removed or
    reversed.
    """

    blacklist: frozenset[tuple[str, str]] = frozenset()
    whitelist: frozenset[tuple[str, str]] = frozenset()

    def __post_init__(self) -> None:
        object.__setattr__(self, "blacklist", frozenset(tuple(e) for e in self.blacklist))
        object.__setattr__(self, "whitelist", frozenset(tuple(e) for e in self.whitelist))
        for u, v in sorted(self.whitelist):
            if self.forbids(u, v):
                raise ConstraintError(f"whitelisted edge ({u!r}, {v!r}) is also blacklisted")
        nodes = {n for e in self.whitelist for n in e}
        try:
            Dag(nodes, self.whitelist)
        except CyclicGraphError as exc:
            raise ConstraintError(f"whitelist contains a cycle: {exc}") from None

    def forbids(self, u: str, v: str) -> bool:
        return (u, v) in self.blacklist or ("*", v) in self.blacklist

    def node_names(self) -> set[str]:
        return {n for e in (self.blacklist | self.whitelist) for n in e if n != "*"}

    @classmethod
    def from_json(cls, doc: str | Mapping | Sequence) -> "EdgeConstraints":
        """Accept {"blacklist": [...], "whitelist": [...]} or a bare blacklist."""
        if isinstance(doc, str):
            doc = json.loads(doc)
        if isinstance(doc, Mapping):
            bl = doc.get("blacklist", [])
            wl = doc.get("whitelist", [])
        else:
            bl, wl = doc, []
        return cls(
            blacklist=frozenset(tuple(e) for e in bl),
            whitelist=frozenset(tuple(e) for e in wl),
        )

    def to_dict(self) -> dict:
        return {
            "blacklist": sorted(list(e) for e in self.blacklist),
            "whitelist": sorted(list(e) for e in self.whitelist),
        }


@dataclass(frozen=True)
class ScoredDag:
    """A DAG with its total BIC and the per-node family decomposition."""

    dag: Dag
    score: float
    per_family: dict[str, float]


def bic_family_score(child: str, parents: Sequence[str], data: CategoricalData) -> float:
    """BIC contribution of one family: log-likelihood minus q(r-1)ln(N)/2."""
    if child not in data.states:
        raise KeyError(f"unknown column {child!r}")
    for p in parents:
        if p not in data.states:
            raise KeyError(f"unknown column {p!r}")
    counts = data.counts(child, parents)
    n_j = counts.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(counts > 0, counts / np.maximum(n_j, 1), 1.0)
        loglik = float(np.sum(np.where(counts > 0, counts * np.log(ratio), 0.0)))
    q = counts.shape[0]
    r = counts.shape[1]
    penalty = q * (r - 1) * np.log(data.n_rows) / 2.0
    return loglik - float(penalty)


def bic_score(
    dag: Dag,
    data: "CategoricalData | pd.DataFrame",
    cache: dict | None = None,
) -> ScoredDag:
    """Total BIC of a DAG: the sum of its family scores (decomposable)."""
    data = as_categorical_data(data)
    missing = [n for n in dag.nodes if n not in data.states]
    if missing:
        raise KeyError(f"DAG nodes {missing} are not data columns")
    cache = cache if cache is not None else {}
    per_family: dict[str, float] = {}
    for node in dag.nodes:
        parents = dag.parents(node)
        key = (node, frozenset(parents))
        if key not in cache:
            cache[key] = bic_family_score(node, parents, data)
        per_family[node] = cache[key]
    return ScoredDag(dag, float(sum(per_family.values())), per_family)


class _Search:
    """Mutable adjacency + score state for one hill-climbing run."""

    def __init__(self, nodes: Sequence[str], data: CategoricalData, cache: dict):
        self.nodes = tuple(sorted(nodes))
        self.data = data
        self.cache = cache
        self.parents: dict[str, set[str]] = {v: set() for v in self.nodes}
        self.children: dict[str, set[str]] = {v: set() for v in self.nodes}

    def family_score(self, child: str, parents: Iterable[str]) -> float:
        key = (child, frozenset(parents))
        if key not in self.cache:
            self.cache[key] = bic_family_score(child, sorted(key[1]), self.data)
        return self.cache[key]

    def has_edge(self, u: str, v: str) -> bool:
        return u in self.parents[v]

    def add_edge(self, u: str, v: str) -> None:
        self.parents[v].add(u)
        self.children[u].add(v)

    def remove_edge(self, u: str, v: str) -> None:
        self.parents[v].discard(u)
        self.children[u].discard(v)

    def reaches(self, src: str, dst: str, skip_edge: tuple[str, str] | None = None) -> bool:
        """Directed reachability src -> dst, optionally ignoring one edge."""
        if src == dst:
            return True
        stack = [src]
        seen = {src}
        while stack:
            node = stack.pop()
            for c in self.children[node]:
                if skip_edge is not None and (node, c) == skip_edge:
                    continue
                if c == dst:
                    return True
                if c not in seen:
                    seen.add(c)
                    stack.append(c)
        return False

    def to_dag(self) -> Dag:
        edges = [(u, v) for v, ps in self.parents.items() for u in ps]
        return Dag(self.nodes, edges)


def hill_climb(
    data: "CategoricalData | pd.DataFrame",
    constraints: EdgeConstraints | None = None,
    init: Dag | None = None,
    max_iters: int = 1000,
    score_cache: dict | None = None,
    trace: list | None = None,
) -> ScoredDag:
    """Steepest-ascent search over add/remove/reverse single-edge moves.

    Each iteration scores every acyclic, constraint-satisfying neighbor and
    takes the strictly best one (ties broken lexicographically on
    (operation, parent, child)); it stops when no move improves the score.
    ``trace``, if given, collects the total score after the initial state and
    each accepted move.
    """
    data = as_categorical_data(data)
    constraints = constraints or EdgeConstraints()
    unknown = sorted(constraints.node_names() - set(data.columns))
    if unknown:
        raise ConstraintError(f"constraints reference unknown variables: {unknown}")
    cache = score_cache if score_cache is not None else {}
    search = _Search(data.columns, data, cache)

    if init is None:
        init_edges: Iterable[tuple[str, str]] = constraints.whitelist
    else:
        init_edges = init.edges
        for u, v in constraints.whitelist:
            if not init.has_edge(u, v):
                raise ConstraintError(f"init is missing whitelisted edge ({u!r}, {v!r})")
    for u, v in sorted(init_edges):
        if constraints.forbids(u, v):
            raise ConstraintError(f"init contains blacklisted edge ({u!r}, {v!r})")
        if search.reaches(v, u):
            raise CyclicGraphError(f"init edge ({u!r}, {v!r}) closes a cycle")
        search.add_edge(u, v)

    family = {v: search.family_score(v, search.parents[v]) for v in search.nodes}
    total = sum(family.values())
    if trace is not None:
        trace.append(total)

    for _ in range(max_iters):
        best_delta = 0.0
        best_key: tuple[str, str, str] | None = None

        def consider(delta: float, key: tuple[str, str, str]) -> None:
            nonlocal best_delta, best_key
            if delta <= IMPROVEMENT_EPS:
                return
            if best_key is None or delta > best_delta + IMPROVEMENT_EPS:
                best_delta, best_key = delta, key
            elif delta >= best_delta - IMPROVEMENT_EPS and key < best_key:
                best_delta, best_key = delta, key

        for u in search.nodes:
            for v in search.nodes:
                if u == v:
                    continue
                if not search.has_edge(u, v):
                    if search.has_edge(v, u) or constraints.forbids(u, v):
                        continue
                    if search.reaches(v, u):
                        continue
                    consider(
                        search.family_score(v, search.parents[v] | {u}) - family[v],
                        ("add", u, v),
                    )
                else:
                    if (u, v) in constraints.whitelist:
                        continue
                    removal_delta = (
                        search.family_score(v, search.parents[v] - {u}) - family[v]
                    )
                    consider(removal_delta, ("remove", u, v))
                    if constraints.forbids(v, u):
                        continue
                    if search.reaches(u, v, skip_edge=(u, v)):
                        continue
                    consider(
                        removal_delta
                        + search.family_score(u, search.parents[u] | {v})
                        - family[u],
                        ("reverse", u, v),
                    )
        if best_key is None:
            break
        op, u, v = best_key
        if op == "add":
            search.add_edge(u, v)
        elif op == "remove":
            search.remove_edge(u, v)
        else:
            search.remove_edge(u, v)
            search.add_edge(v, u)
        family[v] = search.family_score(v, search.parents[v])
        family[u] = search.family_score(u, search.parents[u])
        total = sum(family.values())
        if trace is not None:
            trace.append(total)

    dag = search.to_dag()
    return ScoredDag(dag, float(total), dict(family))


@dataclass(frozen=True)
class EnsembleResult:
    """Edge votes from bootstrap structure learning plus the consensus DAG."""

    edge_strength: dict[tuple[str, str], float]
    direction_strength: dict[tuple[str, str], float]
    consensus: Dag
    n_bootstraps: int
    vote_threshold: float
    seed: int
    cycle_repairs: tuple[tuple[str, str], ...] = ()

    def undirected_strength(self, u: str, v: str) -> float:
        return self.edge_strength.get((u, v), 0.0) + self.edge_strength.get((v, u), 0.0)

    def to_dict(self) -> dict:
        return {
            "edge_strength": [
                {"from": u, "to": v, "strength": s}
                for (u, v), s in sorted(self.edge_strength.items())
            ],
            "direction_strength": [
                {"from": u, "to": v, "fraction": s}
                for (u, v), s in sorted(self.direction_strength.items())
            ],
            "consensus_nodes": list(self.consensus.nodes),
            "consensus_edges": [list(e) for e in self.consensus.edges],
            "n_bootstraps": self.n_bootstraps,
            "vote_threshold": self.vote_threshold,
            "seed": self.seed,
            "cycle_repairs": [list(e) for e in self.cycle_repairs],
            "vote_rule": "undirected strength > threshold, majority direction",
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "EnsembleResult":
        return cls(
            edge_strength={
                (e["from"], e["to"]): e["strength"] for e in doc["edge_strength"]
            },
            direction_strength={
                (e["from"], e["to"]): e["fraction"] for e in doc["direction_strength"]
            },
            consensus=Dag(doc["consensus_nodes"], [tuple(e) for e in doc["consensus_edges"]]),
            n_bootstraps=doc["n_bootstraps"],
            vote_threshold=doc["vote_threshold"],
            seed=doc["seed"],
            cycle_repairs=tuple(tuple(e) for e in doc["cycle_repairs"]),
        )


def majority_vote(
    edge_counts: Mapping[tuple[str, str], int],
    nodes: Sequence[str],
    n_structures: int,
    vote_threshold: float = 0.5,
) -> tuple[Dag, dict[tuple[str, str], float], dict[tuple[str, str], float], list[tuple[str, str]]]:
    """Combine directed edge votes into a consensus DAG.

    An undirected pair enters the consensus when its combined strength
    exceeds the threshold; the majority direction wins (exact ties fall back
    to the lexicographically smaller orientation). If the voted edges close
    a cycle, the weakest edge of each cycle is dropped until the graph is
    acyclic; the removals are returned so callers can surface them.
    """
    strength = {e: c / n_structures for e, c in edge_counts.items()}
    direction: dict[tuple[str, str], float] = {}
    chosen: list[tuple[str, str]] = []
    pairs = {tuple(sorted(e)) for e in edge_counts}
    for a, b in sorted(pairs):
        c_ab = edge_counts.get((a, b), 0)
        c_ba = edge_counts.get((b, a), 0)
        direction[(a, b)] = c_ab / (c_ab + c_ba)
        if (c_ab + c_ba) / n_structures > vote_threshold:
            chosen.append((a, b) if c_ab >= c_ba else (b, a))

    repairs: list[tuple[str, str]] = []
    edges = sorted(chosen)
    while True:
        try:
            consensus = Dag(nodes, edges)
            break
        except CyclicGraphError:
            cycle_edges = _cycle_edges(nodes, edges)
            victim = min(
                cycle_edges,
                key=lambda e: (strength.get(e, 0.0) + strength.get((e[1], e[0]), 0.0), e),
            )
            edges.remove(victim)
            repairs.append(victim)
    return consensus, strength, direction, repairs


def _cycle_edges(nodes: Sequence[str], edges: Sequence[tuple[str, str]]) -> list[tuple[str, str]]:
    """Edges of one directed cycle, found by DFS."""
    children: dict[str, list[str]] = {v: [] for v in nodes}
    for u, v in edges:
        children[u].append(v)
    color = {v: 0 for v in nodes}
    stack_path: list[str] = []

    def dfs(v: str) -> list[str] | None:
        color[v] = 1
        stack_path.append(v)
        for c in sorted(children[v]):
            if color[c] == 1:
                return stack_path[stack_path.index(c):] + [c]
            if color[c] == 0:
                found = dfs(c)
                if found:
                    return found
        stack_path.pop()
        color[v] = 2
        return None

    for v in sorted(nodes):
        if color[v] == 0:
            cycle = dfs(v)
            if cycle:
                return [(cycle[i], cycle[i + 1]) for i in range(len(cycle) - 1)]
    raise AssertionError("no cycle found in a graph that failed acyclicity")


def _bootstrap_replicate(args: tuple) -> tuple[tuple[str, str], ...]:
    columns, states, codes, constraints, seed, r = args
    data = CategoricalData(columns, states, codes)
    rng = np.random.default_rng(seed + r)
    resampled = data.take(rng.integers(0, data.n_rows, size=data.n_rows))
    result = hill_climb(resampled, constraints)
    return result.dag.edges


def bootstrap_ensemble(
    data: "CategoricalData | pd.DataFrame",
    constraints: EdgeConstraints | None = None,
    n_bootstraps: int = 1001,
    vote_threshold: float = 0.5,
    seed: int = 0,
    n_jobs: int = 1,
    on_progress: Callable[[int, int], None] | None = None,
) -> EnsembleResult:
    """Learn one structure per bootstrap resample and majority-vote the edges.

    Replicate r resamples with generator seed ``seed + r``, so results are
    identical for any worker count and any execution order.
    """
    if n_bootstraps < 1:
        raise ValueError("n_bootstraps must be >= 1")
    data = as_categorical_data(data)
    if data.n_rows == 0:
        raise ValueError("data is empty")
    constraints = constraints or EdgeConstraints()

    arg_list = [
        (data.columns, data.states, data.codes, constraints, seed, r)
        for r in range(n_bootstraps)
    ]
    results: list[tuple[tuple[str, str], ...]] = [()] * n_bootstraps
    if n_jobs > 1:
        chunk = max(1, n_bootstraps // (n_jobs * 4))
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            for r, edges in enumerate(pool.map(_bootstrap_replicate, arg_list, chunksize=chunk)):
                results[r] = edges
                if on_progress:
                    on_progress(r + 1, n_bootstraps)
    else:
        for r, args in enumerate(arg_list):
            results[r] = _bootstrap_replicate(args)
            if on_progress:
                on_progress(r + 1, n_bootstraps)

    edge_counts: dict[tuple[str, str], int] = {}
    for edges in results:
        for e in edges:
            edge_counts[e] = edge_counts.get(e, 0) + 1
    consensus, strength, direction, repairs = majority_vote(
        edge_counts, data.columns, n_bootstraps, vote_threshold
    )
    return EnsembleResult(
        edge_strength=strength,
        direction_strength=direction,
        consensus=consensus,
        n_bootstraps=n_bootstraps,
        vote_threshold=vote_threshold,
        seed=seed,
        cycle_repairs=tuple(repairs),
    )


def fit_cpts(
    dag: Dag,
    data: "CategoricalData | pd.DataFrame",
    alpha: float = 1.0,
    state_orders: Mapping[str, Sequence[str]] | None = None,
) -> DiscreteNetwork:
    """Laplace-smoothed maximum-likelihood CPTs: (N_jk + a) / (N_j + a*r).

    Unobserved parent configurations get the uniform row. alpha=0 gives the
    raw empirical frequencies (only safe when every configuration occurs).
    """
    data = as_categorical_data(data, state_orders)
    variables = []
    cpts = []
    for node in dag.nodes:
        if node not in data.states:
            raise KeyError(f"DAG node {node!r} is not a data column")
        variables.append(Variable(node, data.states[node]))
    for node in dag.nodes:
        parents = dag.parents(node)
        counts = data.counts(node, parents).astype(float)
        r = data.cardinality(node)
        n_j = counts.sum(axis=1, keepdims=True)
        denom = n_j + alpha * r
        if alpha == 0.0 and np.any(n_j == 0):
            raise ValueError(
                f"alpha=0 but some parent configurations of {node!r} are unobserved"
            )
        table = (counts + alpha) / denom
        cpts.append(Cpt(node, parents, table))
    return DiscreteNetwork(variables, dag, cpts)
