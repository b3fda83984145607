"""Exact clique-tree inference and approximate rejection sampling.

The exact path compiles a network once into a clique tree (moralize,
min-fill triangulation, maximum-spanning tree over separator sizes) and then
answers any number of queries by two-pass sum-product calibration. Evidence
enters as indicator factors multiplied into clique potentials, never by
filtering samples. Messages are normalized per hop with the log-normalizer
accumulated separately, so the probability of the evidence is recoverable
and a true zero is distinguishable from underflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
import pandas as pd

from .model import Dag, DiscreteNetwork, InvalidAssignmentError, Variable

DEFAULT_CLIQUE_LIMIT = 25


class TreewidthLimitError(RuntimeError):
    """Compilation produced a clique too wide for exact inference."""


class ImpossibleEvidenceError(ValueError):
    """The evidence has probability zero under the network."""


class AcceptanceFailureError(RuntimeError):
    """Rejection sampling accepted no samples in any repeat."""


@dataclass(frozen=True)
class EvidenceSet:
    """A partial assignment: observed states for a subset of variables."""

    items: tuple[tuple[str, str], ...]

    def __init__(self, mapping: Mapping[str, str] | Iterable[tuple[str, str]] = ()):
        pairs = list(mapping.items()) if isinstance(mapping, Mapping) else list(mapping)
        seen = set()
        for var, _ in pairs:
            if var in seen:
                raise ValueError(f"variable {var!r} appears twice in the evidence")
            seen.add(var)
        object.__setattr__(self, "items", tuple(sorted(pairs)))

    def as_dict(self) -> dict[str, str]:
        return dict(self.items)

    def validate(self, net: DiscreteNetwork) -> None:
        for var, state in self.items:
            net.variable(var).state_index(state)

    def __len__(self) -> int:
        return len(self.items)


def _as_evidence(evidence: "EvidenceSet | Mapping[str, str] | None") -> EvidenceSet:
    if evidence is None:
        return EvidenceSet()
    if isinstance(evidence, EvidenceSet):
        return evidence
    return EvidenceSet(evidence)


@dataclass(frozen=True, eq=False)
class Distribution:
    """A (posterior) distribution over one variable's states."""

    variable: str
    states: tuple[str, ...]
    probabilities: np.ndarray
    method: str
    std_error: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        probs = np.asarray(self.probabilities, dtype=float)
        object.__setattr__(self, "probabilities", probs)
        tol = 1e-9 if self.method == "exact" else 1e-6
        if abs(float(probs.sum()) - 1.0) > tol:
            raise ValueError(
                f"distribution over {self.variable!r} sums to {probs.sum()!r}, expected 1"
            )

    def probability(self, state: str) -> float:
        return float(self.probabilities[self.states.index(state)])

    def as_dict(self) -> dict:
        doc: dict = {
            "variable": self.variable,
            "probabilities": {s: float(p) for s, p in zip(self.states, self.probabilities)},
            "method": self.method,
            "meta": dict(self.meta),
        }
        if self.std_error is not None:
            doc["std_error"] = {s: float(e) for s, e in zip(self.states, self.std_error)}
        return doc


class Factor:
    """A nonnegative table over a sorted tuple of variables."""

    __slots__ = ("vars", "table")

    def __init__(self, vars_: tuple[str, ...], table: np.ndarray):
        self.vars = vars_
        self.table = table

    def copy(self) -> "Factor":
        return Factor(self.vars, self.table.copy())


def _align(factor: Factor, union_vars: tuple[str, ...]) -> np.ndarray:
    """View of the factor's table broadcastable over the union variable order."""
    idx: list = []
    i = 0
    for v in union_vars:
        if i < len(factor.vars) and factor.vars[i] == v:
            idx.append(slice(None))
            i += 1
        else:
            idx.append(None)
    return factor.table[tuple(idx)]


def _multiply(a: Factor, b: Factor) -> Factor:
    if a.vars == b.vars:
        return Factor(a.vars, a.table * b.table)
    union = tuple(sorted(set(a.vars) | set(b.vars)))
    return Factor(union, _align(a, union) * _align(b, union))


def _marginalize(f: Factor, keep: Iterable[str]) -> Factor:
    keep_set = set(keep)
    axes = tuple(i for i, v in enumerate(f.vars) if v not in keep_set)
    kept = tuple(v for v in f.vars if v in keep_set)
    return Factor(kept, f.table.sum(axis=axes)) if axes else Factor(kept, f.table)


def _cpt_factor(net: DiscreteNetwork, node: str) -> Factor:
    cpt = net.cpts[node]
    cards = [net.cardinality(p) for p in cpt.parents] + [net.cardinality(node)]
    table = np.asarray(cpt.table, dtype=float).reshape(cards)
    order = list(cpt.parents) + [node]
    sorted_vars = tuple(sorted(order))
    perm = [order.index(v) for v in sorted_vars]
    return Factor(sorted_vars, np.ascontiguousarray(table.transpose(perm)))


def _indicator(var: Variable, state: str) -> Factor:
    table = np.zeros(var.cardinality)
    table[var.state_index(state)] = 1.0
    return Factor((var.name,), table)


class CliqueTree:
    """A calibrated-on-demand junction tree for one network.

    The tree itself is immutable; calibrations are separate objects, so a
    compiled tree can be shared across threads and queries.
    """

    def __init__(
        self,
        net: DiscreteNetwork,
        cliques: list[frozenset[str]],
        tree_edges: list[tuple[int, int]],
        potentials: list[Factor],
    ):
        self.net = net
        self.cliques = cliques
        self.tree_edges = tree_edges
        self.potentials = potentials
        self.calibration_count = 0
        self._neighbors: dict[int, list[int]] = {i: [] for i in range(len(cliques))}
        for i, j in tree_edges:
            self._neighbors[i].append(j)
            self._neighbors[j].append(i)
        for nbrs in self._neighbors.values():
            nbrs.sort()
        self._empty_calibration: "Calibration" | None = None

    def separator(self, i: int, j: int) -> frozenset[str]:
        return self.cliques[i] & self.cliques[j]

    def containing_clique(self, variable: str) -> int:
        """Index of the smallest clique containing the variable."""
        candidates = [
            (len(c), tuple(sorted(c)), i) for i, c in enumerate(self.cliques) if variable in c
        ]
        if not candidates:
            raise InvalidAssignmentError(f"unknown variable {variable!r}")
        return min(candidates)[2]

    def calibrate(self, evidence: "EvidenceSet | Mapping[str, str] | None" = None) -> "Calibration":
        evidence = _as_evidence(evidence)
        if len(evidence) == 0 and self._empty_calibration is not None:
            return self._empty_calibration
        evidence.validate(self.net)
        calibration = _run_calibration(self, evidence)
        self.calibration_count += 1
        if len(evidence) == 0:
            self._empty_calibration = calibration
        return calibration


@dataclass
class Calibration:
    """Per-clique beliefs after sum-product message passing."""

    tree: CliqueTree
    evidence: EvidenceSet
    beliefs: list[Factor]
    log_p_evidence: float

    def marginal(self, variable: str) -> np.ndarray:
        idx = self.tree.containing_clique(variable)
        marg = _marginalize(self.beliefs[idx], [variable]).table
        total = marg.sum()
        return marg / total

    def separator_marginals(self, i: int, j: int) -> tuple[np.ndarray, np.ndarray]:
        sep = sorted(self.tree.separator(i, j))
        a = _marginalize(self.beliefs[i], sep).table
        b = _marginalize(self.beliefs[j], sep).table
        return a, b


def _moral_neighbors(dag: Dag) -> dict[str, set[str]]:
    nbrs: dict[str, set[str]] = {v: set() for v in dag.nodes}
    for u, v in dag.edges:
        nbrs[u].add(v)
        nbrs[v].add(u)
    for v in dag.nodes:
        ps = dag.parents(v)
        for i in range(len(ps)):
            for j in range(i + 1, len(ps)):
                nbrs[ps[i]].add(ps[j])
                nbrs[ps[j]].add(ps[i])
    return nbrs


def _min_fill_cliques(nbrs: dict[str, set[str]], limit: int) -> list[frozenset[str]]:
    """Eliminate by minimum fill-in (ties lexicographic), recording cliques."""
    work = {v: set(ns) for v, ns in nbrs.items()}
    cliques: list[frozenset[str]] = []
    while work:
        best = None
        for v in sorted(work):
            ns = work[v]
            fill = 0
            ns_list = sorted(ns)
            for i in range(len(ns_list)):
                for j in range(i + 1, len(ns_list)):
                    if ns_list[j] not in work[ns_list[i]]:
                        fill += 1
            if best is None or fill < best[0]:
                best = (fill, v)
        v = best[1]
        clique = frozenset(work[v] | {v})
        if len(clique) > limit:
            raise TreewidthLimitError(
                f"clique over {sorted(clique)} has {len(clique)} variables "
                f"(limit {limit}); use approximate inference"
            )
        cliques.append(clique)
        for a in work[v]:
            for b in work[v]:
                if a != b:
                    work[a].add(b)
        for a in work[v]:
            work[a].discard(v)
        del work[v]
    maximal: list[frozenset[str]] = []
    for c in cliques:
        if not any(c < other for other in cliques) and c not in maximal:
            maximal.append(c)
    return maximal


def _spanning_tree(cliques: list[frozenset[str]]) -> list[tuple[int, int]]:
    """Maximum spanning tree over separator sizes (deterministic Kruskal)."""
    n = len(cliques)
    candidates = []
    for i in range(n):
        for j in range(i + 1, n):
            candidates.append((-len(cliques[i] & cliques[j]), i, j))
    candidates.sort()
    parent = list(range(n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    edges = []
    for _, i, j in candidates:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj
            edges.append((i, j))
            if len(edges) == n - 1:
                break
    return edges


def compile_clique_tree(net: DiscreteNetwork, max_clique_size: int = DEFAULT_CLIQUE_LIMIT) -> CliqueTree:
    """Compile a network for exact inference.

    Moralize, triangulate by min-fill, keep the maximal cliques, join them by
    a maximum-spanning tree over separator sizes, and fold each CPT into the
    smallest clique containing its family.
    """
    nbrs = _moral_neighbors(net.dag)
    cliques = _min_fill_cliques(nbrs, max_clique_size)
    cliques.sort(key=lambda c: tuple(sorted(c)))
    tree_edges = _spanning_tree(cliques)

    potentials: list[Factor] = []
    for c in cliques:
        vars_ = tuple(sorted(c))
        shape = tuple(net.cardinality(v) for v in vars_)
        potentials.append(Factor(vars_, np.ones(shape)))
    for node in net.dag.nodes:
        family = frozenset(net.dag.parents(node)) | {node}
        home = min(
            (len(c), tuple(sorted(c)), i) for i, c in enumerate(cliques) if family <= c
        )[2]
        potentials[home] = _multiply(potentials[home], _cpt_factor(net, node))
    return CliqueTree(net, cliques, tree_edges, potentials)


# Spec-facing alias; the operation is simply called "compile" at the API level.
compile = compile_clique_tree


def _run_calibration(tree: CliqueTree, evidence: EvidenceSet) -> Calibration:
    # factor ops never mutate, so only evidence-touched slots get new factors
    potentials = list(tree.potentials)
    for var, state in evidence.items:
        idx = tree.containing_clique(var)
        potentials[idx] = _multiply(potentials[idx], _indicator(tree.net.variable(var), state))

    n = len(tree.cliques)
    root = 0
    order: list[int] = []
    parent_of: dict[int, int] = {root: -1}
    stack = [root]
    while stack:
        c = stack.pop()
        order.append(c)
        for nb in tree._neighbors[c]:
            if nb not in parent_of:
                parent_of[nb] = c
                stack.append(nb)

    messages: dict[tuple[int, int], Factor] = {}
    log_norms: dict[tuple[int, int], float] = {}
    impossible = False

    for c in reversed(order):  # children before parents
        p = parent_of[c]
        if p == -1:
            continue
        f = potentials[c]
        acc = 0.0
        for nb in tree._neighbors[c]:
            if nb != p:
                f = _multiply(f, messages[(nb, c)])
                acc += log_norms[(nb, c)]
        m = _marginalize(f, tree.separator(c, p))
        s = float(m.table.sum())
        if s == 0.0:
            impossible = True
            m = Factor(m.vars, np.zeros_like(m.table))
            log_norms[(c, p)] = float("-inf")
        else:
            m = Factor(m.vars, m.table / s)
            log_norms[(c, p)] = math.log(s) + acc
        messages[(c, p)] = m

    root_belief = potentials[root]
    root_acc = 0.0
    for nb in tree._neighbors[root]:
        root_belief = _multiply(root_belief, messages[(nb, root)])
        root_acc += log_norms[(nb, root)]
    z = float(root_belief.table.sum())
    if z == 0.0 or impossible or root_acc == float("-inf"):
        log_pe = float("-inf")
    else:
        log_pe = math.log(z) + root_acc

    for c in order:  # parents before children, so (nb -> p) always exists here
        p = parent_of[c]
        if p == -1:
            continue
        f = potentials[p]
        for nb in tree._neighbors[p]:
            if nb != c:
                f = _multiply(f, messages[(nb, p)])
        m = _marginalize(f, tree.separator(p, c))
        s = float(m.table.sum())
        messages[(p, c)] = Factor(m.vars, m.table / s if s > 0 else np.zeros_like(m.table))

    beliefs: list[Factor] = []
    for c in range(n):
        b = potentials[c]
        for nb in tree._neighbors[c]:
            b = _multiply(b, messages[(nb, c)])
        s = float(b.table.sum())
        beliefs.append(Factor(b.vars, b.table / s if s > 0 else b.table))
    return Calibration(tree, evidence, beliefs, log_pe)


def prior_marginal(tree: CliqueTree, variable: str) -> Distribution:
    """Marginal of one variable with no evidence set."""
    var = tree.net.variable(variable)
    calibration = tree.calibrate()
    probs = calibration.marginal(variable)
    return Distribution(variable, var.states, probs, "exact", meta={"log_p_evidence": 0.0})


def posterior(
    tree: CliqueTree,
    variable: str,
    evidence: "EvidenceSet | Mapping[str, str] | None" = None,
) -> Distribution:
    """Exact posterior of one variable given evidence.

    Raises ImpossibleEvidenceError when the evidence has probability zero,
    which the normalized message passing detects exactly (it is not an
    underflow artifact).
    """
    evidence = _as_evidence(evidence)
    var = tree.net.variable(variable)
    calibration = tree.calibrate(evidence)
    if calibration.log_p_evidence == float("-inf"):
        raise ImpossibleEvidenceError(
            f"evidence {evidence.as_dict()} has probability 0 under this network"
        )
    probs = calibration.marginal(variable)
    meta = {"log_p_evidence": calibration.log_p_evidence}
    return Distribution(variable, var.states, probs, "exact", meta=meta)


def query_batch(
    tree: CliqueTree,
    queries: Sequence[tuple[str, "EvidenceSet | Mapping[str, str] | None"]],
) -> list["Distribution | Exception"]:
    """Answer many (variable, evidence) queries, sharing calibrations.

    Queries with identical evidence reuse one calibration pass. Failing
    queries yield their exception in place of a Distribution instead of
    aborting the batch.
    """
    canonical: list[tuple[str, EvidenceSet]] = []
    for variable, evidence in queries:
        canonical.append((variable, _as_evidence(evidence)))
    calibrations: dict[tuple, Calibration | Exception] = {}
    results: list[Distribution | Exception] = []
    for variable, evidence in canonical:
        key = evidence.items
        if key not in calibrations:
            try:
                calibrations[key] = tree.calibrate(evidence)
            except Exception as exc:  # noqa: BLE001 - reported per query
                calibrations[key] = exc
        cal = calibrations[key]
        if isinstance(cal, Exception):
            results.append(cal)
            continue
        try:
            if cal.log_p_evidence == float("-inf"):
                raise ImpossibleEvidenceError(
                    f"evidence {evidence.as_dict()} has probability 0 under this network"
                )
            var = tree.net.variable(variable)
            probs = cal.marginal(variable)
            results.append(
                Distribution(
                    variable, var.states, probs, "exact",
                    meta={"log_p_evidence": cal.log_p_evidence},
                )
            )
        except Exception as exc:  # noqa: BLE001 - reported per query
            results.append(exc)
    return results


def forward_sample(
    net: DiscreteNetwork,
    n: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, tuple[str, ...]]:
    """Draw n complete assignments ancestrally, vectorized per node.

    Returns integer state codes with one column per node in topological
    order, plus that node order.
    """
    order = net.dag.topological_order()
    col_of = {v: i for i, v in enumerate(order)}
    codes = np.zeros((n, len(order)), dtype=np.int64)
    for v in order:
        cpt = net.cpts[v]
        cards = [net.cardinality(p) for p in cpt.parents]
        rows = np.zeros(n, dtype=np.int64)
        for p, card in zip(cpt.parents, cards):
            rows = rows * card + codes[:, col_of[p]]
        cdf = np.cumsum(cpt.table, axis=1)
        u = rng.random(n)
        codes[:, col_of[v]] = np.minimum(
            (u[:, None] >= cdf[rows]).sum(axis=1), net.cardinality(v) - 1
        )
    return codes, order


def sample_frame(net: DiscreteNetwork, n: int, seed: int = 0) -> pd.DataFrame:
    """Forward-sample a DataFrame of state labels (columns in name order)."""
    codes, order = forward_sample(net, n, np.random.default_rng(seed))
    data = {}
    for i, v in enumerate(order):
        states = net.variable(v).states
        data[v] = [states[c] for c in codes[:, i]]
    return pd.DataFrame(data)[sorted(order)]


def rejection_sample(
    net: DiscreteNetwork,
    variable: str,
    evidence: "EvidenceSet | Mapping[str, str] | None" = None,
    n_samples: int = 10_000,
    repeats: int = 25,
    seed: int = 0,
) -> Distribution:
    """Posterior estimate by forward sampling and rejecting evidence mismatches.

    Each repeat draws ``n_samples`` complete assignments and keeps those that
    agree with the evidence; the reported probabilities are the mean of the
    per-repeat estimates and ``std_error`` is their standard deviation, the
    repeat-based confidence recipe (default 25 repeats). Repeat r uses an
    independent generator seeded with (seed, r), so results are reproducible
    and independent of scheduling.
    """
    if n_samples < 1 or repeats < 1:
        raise ValueError("n_samples and repeats must be >= 1")
    evidence = _as_evidence(evidence)
    evidence.validate(net)
    var = net.variable(variable)
    r = var.cardinality

    per_repeat = np.full((repeats, r), np.nan)
    accepted_total = 0
    for rep in range(repeats):
        rng = np.random.default_rng([seed, rep])
        codes, order = forward_sample(net, n_samples, rng)
        col_of = {v: i for i, v in enumerate(order)}
        mask = np.ones(n_samples, dtype=bool)
        for e_var, e_state in evidence.items:
            e_idx = net.variable(e_var).state_index(e_state)
            mask &= codes[:, col_of[e_var]] == e_idx
        accepted = int(mask.sum())
        accepted_total += accepted
        if accepted == 0:
            continue
        counts = np.bincount(codes[mask, col_of[variable]], minlength=r)
        per_repeat[rep] = counts / accepted

    valid = ~np.isnan(per_repeat[:, 0])
    n_valid = int(valid.sum())
    if n_valid == 0:
        raise AcceptanceFailureError(
            f"no samples agreed with evidence {evidence.as_dict()} in any of "
            f"{repeats} repeats of {n_samples} draws; use exact inference"
        )
    probs = per_repeat[valid].mean(axis=0)
    probs = probs / probs.sum()
    std_error = None
    if repeats > 1 and n_valid > 1:
        std_error = per_repeat[valid].std(axis=0, ddof=1)
    meta = {
        "n_samples": n_samples,
        "repeats": repeats,
        "valid_repeats": n_valid,
        "proposed": n_samples * repeats,
        "accepted": accepted_total,
        "acceptance_rate": accepted_total / (n_samples * repeats),
        "seed": seed,
    }
    return Distribution(variable, var.states, probs, "approximate", std_error, meta)
