"""Decision networks: expected utility, argmax policies and policy tables.

A decision network wraps a learned discrete network with (a) chance nodes
re-rolled as decision nodes and (b) utility leaves that attach a preference
value in [-1, +1] to each state of a hypothesis variable. Choosing an action
is implemented as conditioning on the decision nodes' states over the
learned joint, which is the observational construction this engine follows;
it is not do-calculus surgery, and results should be read accordingly.

Policies come from exact enumeration of the decision space or, when that is
too large, from a Gibbs sampler over decision assignments whose stationary
distribution is a softmax in the expected utility.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .inference import (
    CliqueTree,
    EvidenceSet,
    ImpossibleEvidenceError,
    compile_clique_tree,
)
from .model import DiscreteNetwork, InvalidAssignmentError

ENUMERATION_LIMIT = 10**6
PAYOFF_TIE_TOL = 1e-12


class UtilityStructureError(ValueError):
    """A utility node would not be a leaf, or overlaps the chance graph."""


class DecisionSpaceError(RuntimeError):
    """The decision space is too large for exact enumeration."""


class ImpossibleActionError(ValueError):
    """The action (with the evidence) has probability zero."""


@dataclass(frozen=True)
class UtilitySpec:
    """Preferences in [-1, +1] over the states of one hypothesis variable."""

    hypothesis: str
    preferences: tuple[tuple[str, float], ...]
    target: str = ""

    def __init__(self, hypothesis: str, preferences: Mapping[str, float], target: str = ""):
        object.__setattr__(self, "hypothesis", hypothesis)
        object.__setattr__(self, "preferences", tuple(sorted(preferences.items())))
        object.__setattr__(self, "target", target or f"utility_{hypothesis}")
        for state, value in self.preferences:
            if not -1.0 <= value <= 1.0:
                raise ValueError(
                    f"preference for {hypothesis!r}={state!r} is {value}, outside [-1, 1]"
                )

    def preference_map(self) -> dict[str, float]:
        return dict(self.preferences)


class DecisionNetwork:
    """A discrete network plus decision roles and utility specs."""

    def __init__(
        self,
        base: DiscreteNetwork,
        decision_nodes: Sequence[str],
        utilities: Sequence[UtilitySpec],
    ):
        self.base = base
        self.decision_nodes = tuple(sorted(decision_nodes))
        self.utilities = tuple(utilities)
        self._tree: CliqueTree | None = None

        seen = set()
        for d in self.decision_nodes:
            if d in seen:
                raise ValueError(f"decision node {d!r} listed twice")
            seen.add(d)
            base.variable(d)  # raises InvalidAssignmentError when unknown
        for spec in self.utilities:
            if spec.target in base.variables:
                raise UtilityStructureError(
                    f"utility node {spec.target!r} collides with an existing variable; "
                    "utility nodes are leaves outside the chance graph"
                )
            hyp = base.variable(spec.hypothesis)
            if spec.hypothesis in self.decision_nodes:
                raise UtilityStructureError(
                    f"utility hypothesis {spec.hypothesis!r} must be a chance node"
                )
            got = {s for s, _ in spec.preferences}
            missing = set(hyp.states) - got
            unknown = got - set(hyp.states)
            if unknown:
                raise InvalidAssignmentError(
                    f"utility on {spec.hypothesis!r} names unknown states {sorted(unknown)}"
                )
            if missing:
                raise InvalidAssignmentError(
                    f"utility on {spec.hypothesis!r} is missing states {sorted(missing)}"
                )

    def role(self, name: str) -> str:
        if name in self.decision_nodes:
            return "decision"
        self.base.variable(name)
        return "chance"

    @property
    def tree(self) -> CliqueTree:
        if self._tree is None:
            self._tree = compile_clique_tree(self.base)
        return self._tree

    def decision_space_size(self) -> int:
        size = 1
        for d in self.decision_nodes:
            size *= self.base.cardinality(d)
        return size


def extend(
    net: DiscreteNetwork,
    decision_vars: Sequence[str],
    utilities: Sequence[UtilitySpec],
) -> DecisionNetwork:
    """Re-roll chance nodes as decisions and attach utility leaves."""
    return DecisionNetwork(net, decision_vars, utilities)


def _validate_action(bdn: DecisionNetwork, action: Mapping[str, str]) -> dict[str, str]:
    missing = [d for d in bdn.decision_nodes if d not in action]
    if missing:
        raise InvalidAssignmentError(f"action is missing decision nodes {missing}")
    extra = [d for d in action if d not in bdn.decision_nodes]
    if extra:
        raise InvalidAssignmentError(f"action assigns non-decision nodes {extra}")
    for d, s in action.items():
        bdn.base.variable(d).state_index(s)
    return dict(action)


def _validate_evidence(bdn: DecisionNetwork, evidence) -> EvidenceSet:
    ev = evidence if isinstance(evidence, EvidenceSet) else EvidenceSet(evidence or {})
    ev.validate(bdn.base)
    overlap = [v for v, _ in ev.items if v in bdn.decision_nodes]
    if overlap:
        raise ValueError(f"evidence overlaps decision nodes {overlap}")
    return ev


def expected_utility(
    bdn: DecisionNetwork,
    action: Mapping[str, str],
    evidence: "EvidenceSet | Mapping[str, str] | None" = None,
) -> float:
    """Preference-weighted posterior over each hypothesis, summed across utilities.

    The action enters as evidence on the decision nodes; the exact posterior
    of each hypothesis given action and evidence weights its preferences.
    """
    action = _validate_action(bdn, action)
    ev = _validate_evidence(bdn, evidence)
    combined = EvidenceSet({**ev.as_dict(), **action})
    try:
        calibration = bdn.tree.calibrate(combined)
    except ImpossibleEvidenceError as exc:  # pragma: no cover - calibrate defers this
        raise ImpossibleActionError(str(exc)) from None
    if calibration.log_p_evidence == float("-inf"):
        raise ImpossibleActionError(
            f"action {action} with evidence {ev.as_dict()} has probability 0"
        )
    total = 0.0
    for spec in bdn.utilities:
        hyp = bdn.base.variable(spec.hypothesis)
        marg = calibration.marginal(spec.hypothesis)
        prefs = spec.preference_map()
        total += float(sum(prefs[s] * marg[i] for i, s in enumerate(hyp.states)))
    return total


@dataclass(frozen=True)
class PolicyRow:
    assignment: tuple[tuple[str, str], ...]
    payoff: float
    visits: int | None = None

    def as_dict(self) -> dict:
        doc: dict = dict(self.assignment)
        doc["payoff"] = self.payoff
        if self.visits is not None:
            doc["visits"] = self.visits
        return doc


@dataclass(frozen=True)
class PolicyDecision:
    assignment: dict[str, str]
    payoff: float
    tie: bool


@dataclass(frozen=True)
class PolicyTable:
    """Decision combinations ranked by expected payoff, best first."""

    decision_nodes: tuple[str, ...]
    rows: tuple[PolicyRow, ...]
    method: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        payoffs = [r.payoff for r in self.rows]
        if any(b > a + PAYOFF_TIE_TOL for a, b in zip(payoffs, payoffs[1:])):
            raise ValueError("policy rows must be sorted by descending payoff")

    @property
    def tie(self) -> bool:
        return bool(self.meta.get("tie", False))

    def best(self) -> PolicyDecision:
        top = self.rows[0]
        return PolicyDecision(dict(top.assignment), top.payoff, self.tie)

    def to_dict(self) -> dict:
        return {
            "decision_nodes": list(self.decision_nodes),
            "rows": [r.as_dict() for r in self.rows],
            "method": self.method,
            "meta": dict(self.meta),
        }


def _sort_rows(rows: list[PolicyRow]) -> list[PolicyRow]:
    """Descending payoff; assignments tie-break within PAYOFF_TIE_TOL groups.

    Grouping near-ties before the lexicographic tie-break keeps the ordering
    stable under affine utility rescaling: analytically equal payoffs differ
    only by float noise, which must not outrank the deterministic rule.
    """
    rows = sorted(rows, key=lambda r: -r.payoff)
    ordered: list[PolicyRow] = []
    i = 0
    while i < len(rows):
        j = i + 1
        while j < len(rows) and rows[i].payoff - rows[j].payoff <= PAYOFF_TIE_TOL:
            j += 1
        ordered.extend(sorted(rows[i:j], key=lambda r: r.assignment))
        i = j
    return ordered


def _decision_assignments(bdn: DecisionNetwork):
    """All decision-space assignments, lexicographic over sorted node names."""
    names = bdn.decision_nodes
    state_lists = [bdn.base.variable(d).states for d in names]

    def rec(i: int, prefix: tuple):
        if i == len(names):
            yield prefix
            return
        for s in state_lists[i]:
            yield from rec(i + 1, prefix + ((names[i], s),))

    yield from rec(0, ())


def policy_table(
    bdn: DecisionNetwork,
    evidence: "EvidenceSet | Mapping[str, str] | None" = None,
    mode: str = "exact",
    top_k: int | None = None,
    iterations: int = 1000,
    burn_in: int | None = None,
    beta: float = 5.0,
    seed: int = 0,
) -> PolicyTable:
    """Rank decision combinations by payoff.

    Exact mode scores every combination (bounded by the enumeration limit);
    gibbs mode delegates to the sampler and ranks the visited combinations.
    """
    if mode == "gibbs":
        return gibbs_policy(
            bdn, evidence, iterations=iterations, burn_in=burn_in, beta=beta,
            seed=seed, top_k=top_k,
        )
    if mode != "exact":
        raise ValueError(f"unknown policy mode {mode!r}")
    ev = _validate_evidence(bdn, evidence)
    size = bdn.decision_space_size()
    if size > ENUMERATION_LIMIT:
        raise DecisionSpaceError(
            f"decision space has {size} combinations (> {ENUMERATION_LIMIT}); "
            "use gibbs_policy"
        )
    scored: list[PolicyRow] = []
    impossible: list[dict] = []
    for assignment in _decision_assignments(bdn):
        try:
            payoff = expected_utility(bdn, dict(assignment), ev)
        except ImpossibleActionError:
            impossible.append(dict(assignment))
            continue
        scored.append(PolicyRow(assignment, payoff))
    if not scored:
        raise ImpossibleActionError("every decision combination is impossible")
    scored = _sort_rows(scored)
    tie = len(scored) > 1 and scored[0].payoff - scored[1].payoff <= PAYOFF_TIE_TOL
    rows = tuple(scored[:top_k] if top_k else scored)
    meta = {"tie": tie, "evidence": ev.as_dict(), "n_combinations": size}
    if impossible:
        meta["impossible_actions"] = impossible
    return PolicyTable(bdn.decision_nodes, rows, "exact", meta)


def optimal_policy(
    bdn: DecisionNetwork,
    evidence: "EvidenceSet | Mapping[str, str] | None" = None,
) -> PolicyDecision:
    """Exhaustive argmax over the decision space (ties -> lexicographic, flagged)."""
    return policy_table(bdn, evidence, mode="exact").best()


def gibbs_policy(
    bdn: DecisionNetwork,
    evidence: "EvidenceSet | Mapping[str, str] | None" = None,
    iterations: int = 1000,
    burn_in: int | None = None,
    beta: float = 5.0,
    seed: int = 0,
    top_k: int | None = None,
) -> PolicyTable:
    """Gibbs sampling over decision assignments, weighted by exp(beta * EU).

    Each step resamples one decision node (cycling through them) from the
    softmax over that node's states with every other decision held fixed.
    Expected utilities are exact and cached per assignment, so the table's
    payoffs are not themselves Monte Carlo estimates; the sampler only
    decides which assignments get visited. Impossible assignments get zero
    proposal weight and are logged. beta=0 degenerates to uniform exploration.
    """
    ev = _validate_evidence(bdn, evidence)
    if burn_in is None:
        burn_in = iterations // 10
    if not iterations > burn_in >= 0:
        raise ValueError(f"need iterations > burn_in >= 0, got {iterations}, {burn_in}")
    if not bdn.decision_nodes:
        raise ValueError("no decision nodes declared")

    rng = np.random.default_rng(seed)
    names = bdn.decision_nodes
    state_lists = {d: bdn.base.variable(d).states for d in names}

    eu_cache: dict[tuple, float] = {}
    skipped: set[tuple] = set()

    def eu_of(assignment: tuple) -> float:
        if assignment in eu_cache:
            return eu_cache[assignment]
        try:
            value = expected_utility(bdn, dict(assignment), ev)
        except ImpossibleActionError:
            value = float("-inf")
            skipped.add(assignment)
        eu_cache[assignment] = value
        return value

    current = tuple(
        (d, state_lists[d][rng.integers(0, len(state_lists[d]))]) for d in names
    )
    visits: dict[tuple, int] = {}
    for it in range(iterations):
        pos = it % len(names)
        d = names[pos]
        candidates = [
            current[:pos] + ((d, s),) + current[pos + 1:] for s in state_lists[d]
        ]
        eus = np.array([eu_of(c) for c in candidates])
        finite = np.isfinite(eus)
        if finite.any():
            logits = np.where(finite, beta * eus, -np.inf)
            logits = logits - logits[finite].max()
            weights = np.exp(logits)
            cdf = np.cumsum(weights / weights.sum())
            choice = int(np.searchsorted(cdf, rng.random(), side="right"))
            current = candidates[min(choice, len(candidates) - 1)]
        # else: nowhere feasible to go; keep the current assignment
        if it >= burn_in:
            visits[current] = visits.get(current, 0) + 1

    rows = [
        PolicyRow(a, eu_cache[a], visits[a])
        for a in visits
        if math.isfinite(eu_cache[a])
    ]
    if not rows:
        raise ImpossibleActionError("the sampler never reached a feasible assignment")
    rows = _sort_rows(rows)
    tie = len(rows) > 1 and rows[0].payoff - rows[1].payoff <= PAYOFF_TIE_TOL
    meta = {
        "tie": tie,
        "evidence": ev.as_dict(),
        "iterations": iterations,
        "burn_in": burn_in,
        "beta": beta,
        "seed": seed,
        "distinct_visited": len(rows),
        "skipped_impossible": [dict(a) for a in sorted(skipped)],
    }
    table_rows = tuple(rows[:top_k] if top_k else rows)
    return PolicyTable(names, table_rows, "gibbs", meta)
