import itertools

import numpy as np
import pytest

from bdnet.decision import (
    DecisionSpaceError,
    ImpossibleActionError,
    PAYOFF_TIE_TOL,
    UtilitySpec,
    UtilityStructureError,
    expected_utility,
    extend,
    gibbs_policy,
    optimal_policy,
    policy_table,
)
from bdnet.model import Cpt, Dag, DiscreteNetwork, InvalidAssignmentError, Variable

from netgen import random_network
from oracles import oracle_expected_utility


def independent_dh():
    """D and H independent; P(H=h1) = 0.7."""
    variables = [Variable("D", ("d0", "d1")), Variable("H", ("h0", "h1"))]
    cpts = [
        Cpt("D", (), np.array([[0.5, 0.5]])),
        Cpt("H", (), np.array([[0.3, 0.7]])),
    ]
    return DiscreteNetwork(variables, Dag(["D", "H"]), cpts)


def influence_dh():
    """D influences H: P(h1 | d0) = 0.6, P(h1 | d1) = 0.7."""
    variables = [Variable("D", ("d0", "d1")), Variable("H", ("h0", "h1"))]
    cpts = [
        Cpt("D", (), np.array([[0.5, 0.5]])),
        Cpt("H", ("D",), np.array([[0.4, 0.6], [0.3, 0.7]])),
    ]
    return DiscreteNetwork(variables, Dag(["D", "H"], [("D", "H")]), cpts)


def prefs_up() -> dict[str, float]:
    return {"h0": -1.0, "h1": 1.0}


class TestUtilitySpec:
    def test_preferences_must_be_in_range(self):
        with pytest.raises(ValueError, match="outside"):
            UtilitySpec("H", {"h0": -1.5, "h1": 1.0})

    def test_boundary_values_allowed(self):
        UtilitySpec("H", {"h0": -1.0, "h1": 1.0})

    def test_default_target_name(self):
        assert UtilitySpec("H", prefs_up()).target == "utility_H"


class TestExtend:
    def test_valid_bdn(self):
        bdn = extend(independent_dh(), ["D"], [UtilitySpec("H", prefs_up())])
        assert bdn.decision_nodes == ("D",)
        assert bdn.role("D") == "decision"
        assert bdn.role("H") == "chance"

    def test_unknown_decision_variable(self):
        with pytest.raises(InvalidAssignmentError):
            extend(independent_dh(), ["NOPE"], [UtilitySpec("H", prefs_up())])

    def test_unknown_preference_state(self):
        with pytest.raises(InvalidAssignmentError, match="unknown states"):
            extend(independent_dh(), ["D"], [UtilitySpec("H", {"h0": 0.0, "zzz": 1.0, "h1": 0.5})])

    def test_missing_preference_state(self):
        with pytest.raises(InvalidAssignmentError, match="missing states"):
            extend(independent_dh(), ["D"], [UtilitySpec("H", {"h1": 1.0})])

    def test_utility_colliding_with_variable(self):
        with pytest.raises(UtilityStructureError, match="collides"):
            extend(independent_dh(), ["D"], [UtilitySpec("H", prefs_up(), target="D")])

    def test_hypothesis_cannot_be_decision(self):
        with pytest.raises(UtilityStructureError, match="chance node"):
            extend(independent_dh(), ["H", "D"], [UtilitySpec("H", prefs_up())])

    def test_two_utilities_add(self):
        net = influence_dh()
        one = extend(net, ["D"], [UtilitySpec("H", prefs_up())])
        two = extend(net, ["D"], [UtilitySpec("H", prefs_up()),
                                  UtilitySpec("H", {"h0": 0.5, "h1": 0.5})])
        eu_one = expected_utility(one, {"D": "d1"})
        eu_two = expected_utility(two, {"D": "d1"})
        assert eu_two == pytest.approx(eu_one + 0.5, abs=1e-12)


class TestExpectedUtility:
    def test_two_term_sum(self):
        bdn = extend(independent_dh(), ["D"], [UtilitySpec("H", prefs_up())])
        # P(h1) = 0.7 regardless of action: EU = 0.7*1 + 0.3*(-1) = 0.4
        assert expected_utility(bdn, {"D": "d0"}) == pytest.approx(0.4, abs=1e-12)
        assert expected_utility(bdn, {"D": "d1"}) == pytest.approx(0.4, abs=1e-12)

    def test_constant_preferences_give_constant_eu(self):
        bdn = extend(influence_dh(), ["D"], [UtilitySpec("H", {"h0": 0.25, "h1": 0.25})])
        assert expected_utility(bdn, {"D": "d0"}) == pytest.approx(0.25, abs=1e-12)
        assert expected_utility(bdn, {"D": "d1"}) == pytest.approx(0.25, abs=1e-12)

    def test_five_node_bdn_matches_oracle(self):
        rng = np.random.default_rng(17)
        for _ in range(5):
            net = random_network(rng, 5, edge_prob=0.5)
            nodes = list(net.dag.nodes)
            decision, hypothesis = nodes[0], nodes[-1]
            if decision == hypothesis:
                continue
            prefs = {
                s: float(v) for s, v in zip(
                    net.variables[hypothesis].states,
                    np.linspace(-1, 1, net.cardinality(hypothesis)),
                )
            }
            bdn = extend(net, [decision], [UtilitySpec(hypothesis, prefs)])
            action = {decision: net.variables[decision].states[0]}
            expected = oracle_expected_utility(net, action, {}, hypothesis, prefs)
            assert expected_utility(bdn, action) == pytest.approx(expected, abs=1e-9)

    def test_eu_bounds(self):
        bdn = extend(influence_dh(), ["D"], [UtilitySpec("H", {"h0": -0.8, "h1": 0.3})])
        for d in ("d0", "d1"):
            eu = expected_utility(bdn, {"D": d})
            assert -0.8 <= eu <= 0.3

    def test_action_must_cover_decisions(self):
        bdn = extend(independent_dh(), ["D"], [UtilitySpec("H", prefs_up())])
        with pytest.raises(InvalidAssignmentError, match="missing"):
            expected_utility(bdn, {})

    def test_evidence_disjoint_from_decisions(self):
        bdn = extend(independent_dh(), ["D"], [UtilitySpec("H", prefs_up())])
        with pytest.raises(ValueError, match="overlaps"):
            expected_utility(bdn, {"D": "d1"}, {"D": "d0"})

    def test_impossible_action(self):
        variables = [Variable("D", ("d0", "d1")), Variable("H", ("h0", "h1"))]
        cpts = [
            Cpt("D", (), np.array([[1.0, 0.0]])),  # d1 never happens
            Cpt("H", ("D",), np.array([[0.4, 0.6], [0.3, 0.7]])),
        ]
        net = DiscreteNetwork(variables, Dag(["D", "H"], [("D", "H")]), cpts)
        bdn = extend(net, ["D"], [UtilitySpec("H", prefs_up())])
        with pytest.raises(ImpossibleActionError):
            expected_utility(bdn, {"D": "d1"})


class TestOptimalPolicy:
    def test_single_binary_decision(self):
        bdn = extend(influence_dh(), ["D"], [UtilitySpec("H", prefs_up())])
        best = optimal_policy(bdn)
        assert best.assignment == {"D": "d1"}
        assert best.payoff == pytest.approx(0.4, abs=1e-12)
        assert not best.tie

    def test_d_separated_decision_reports_tie(self):
        bdn = extend(independent_dh(), ["D"], [UtilitySpec("H", prefs_up())])
        best = optimal_policy(bdn)
        assert best.tie
        assert best.assignment == {"D": "d0"}  # lexicographic smallest

    def test_27_combos_match_exhaustive(self):
        rng = np.random.default_rng(23)
        net = random_network(rng, 5, edge_prob=0.5, min_states=3, max_states=3)
        nodes = list(net.dag.nodes)
        decisions, hypothesis = nodes[:3], nodes[-1]
        assert hypothesis not in decisions
        prefs = {s: v for s, v in zip(net.variables[hypothesis].states, (-1.0, 0.0, 1.0))}
        bdn = extend(net, decisions, [UtilitySpec(hypothesis, prefs)])
        best = optimal_policy(bdn)

        combos = itertools.product(*[net.variables[d].states for d in sorted(decisions)])
        oracle_best, oracle_payoff = None, -np.inf
        for combo in combos:
            action = dict(zip(sorted(decisions), combo))
            eu = oracle_expected_utility(net, action, {}, hypothesis, prefs)
            if eu is not None and eu > oracle_payoff + 1e-15:
                oracle_best, oracle_payoff = action, eu
        assert best.assignment == oracle_best
        assert best.payoff == pytest.approx(oracle_payoff, abs=1e-9)


class TestPolicyTable:
    def test_two_binary_decisions_four_rows_descending(self):
        rng = np.random.default_rng(6)
        net = random_network(rng, 4, edge_prob=0.6, min_states=2, max_states=2)
        nodes = list(net.dag.nodes)
        prefs = {s: v for s, v in zip(net.variables[nodes[-1]].states, (-1.0, 1.0))}
        bdn = extend(net, nodes[:2], [UtilitySpec(nodes[-1], prefs)])
        table = policy_table(bdn, mode="exact")
        assert len(table.rows) == 4
        payoffs = [r.payoff for r in table.rows]
        assert payoffs == sorted(payoffs, reverse=True)

    def test_top1_equals_optimal_policy(self):
        bdn = extend(influence_dh(), ["D"], [UtilitySpec("H", prefs_up())])
        table = policy_table(bdn, mode="exact")
        assert table.best() == optimal_policy(bdn)

    def test_top_k_truncation(self):
        bdn = extend(influence_dh(), ["D"], [UtilitySpec("H", prefs_up())])
        table = policy_table(bdn, mode="exact", top_k=1)
        assert len(table.rows) == 1

    def test_enumeration_limit(self, monkeypatch):
        import bdnet.decision as decision_mod

        monkeypatch.setattr(decision_mod, "ENUMERATION_LIMIT", 1)
        bdn = extend(influence_dh(), ["D"], [UtilitySpec("H", prefs_up())])
        with pytest.raises(DecisionSpaceError, match="gibbs"):
            policy_table(bdn, mode="exact")

    def test_declaration_order_invariance(self):
        rng = np.random.default_rng(31)
        net = random_network(rng, 4, edge_prob=0.6, min_states=2, max_states=2)
        nodes = list(net.dag.nodes)
        prefs = {s: v for s, v in zip(net.variables[nodes[-1]].states, (-0.5, 0.5))}
        fwd = extend(net, [nodes[0], nodes[1]], [UtilitySpec(nodes[-1], prefs)])
        rev = extend(net, [nodes[1], nodes[0]], [UtilitySpec(nodes[-1], prefs)])
        t1 = policy_table(fwd, mode="exact")
        t2 = policy_table(rev, mode="exact")
        assert [r.as_dict() for r in t1.rows] == [r.as_dict() for r in t2.rows]

    def test_affine_rescaling_preserves_ranking(self):
        rng = np.random.default_rng(40)
        net = random_network(rng, 5, edge_prob=0.5)
        nodes = list(net.dag.nodes)
        decisions, hypothesis = nodes[:2], nodes[-1]
        states = net.variables[hypothesis].states
        base = {s: float(v) for s, v in zip(states, np.linspace(-0.9, 0.9, len(states)))}
        scaled = {s: 0.5 * v + 0.05 for s, v in base.items()}  # c1=0.5, c2=0.05
        t_base = policy_table(extend(net, decisions, [UtilitySpec(hypothesis, base)]), mode="exact")
        t_scaled = policy_table(extend(net, decisions, [UtilitySpec(hypothesis, scaled)]), mode="exact")
        order_base = [r.assignment for r in t_base.rows]
        order_scaled = [r.assignment for r in t_scaled.rows]
        assert order_base == order_scaled


class TestGibbsPolicy:
    def test_high_beta_concentrates_on_argmax(self):
        bdn = extend(influence_dh(), ["D"], [UtilitySpec("H", prefs_up())])
        exact_best = optimal_policy(bdn).assignment
        hits = 0
        for seed in range(20):
            table = gibbs_policy(bdn, iterations=2000, beta=50.0, seed=seed)
            if table.best().assignment == exact_best:
                hits += 1
        assert hits == 20

    def test_beta_zero_uniform_visits(self):
        bdn = extend(influence_dh(), ["D"], [UtilitySpec("H", prefs_up())])
        table = gibbs_policy(bdn, iterations=4000, burn_in=0, beta=0.0, seed=3)
        visits = {dict(r.assignment)["D"]: r.visits for r in table.rows}
        n = 4000
        p = 0.5
        sigma = (n * p * (1 - p)) ** 0.5
        assert abs(visits["d0"] - n * p) <= 3 * sigma

    def test_reproducible_under_seed(self):
        bdn = extend(influence_dh(), ["D"], [UtilitySpec("H", prefs_up())])
        a = gibbs_policy(bdn, iterations=500, seed=11)
        b = gibbs_policy(bdn, iterations=500, seed=11)
        assert a.to_dict() == b.to_dict()

    def test_iterations_must_exceed_burn_in(self):
        bdn = extend(influence_dh(), ["D"], [UtilitySpec("H", prefs_up())])
        with pytest.raises(ValueError, match="burn_in"):
            gibbs_policy(bdn, iterations=10, burn_in=10)

    def test_rows_sorted_with_visits(self):
        rng = np.random.default_rng(7)
        net = random_network(rng, 4, edge_prob=0.5, min_states=2, max_states=2)
        nodes = list(net.dag.nodes)
        prefs = {s: v for s, v in zip(net.variables[nodes[-1]].states, (-1.0, 1.0))}
        bdn = extend(net, nodes[:2], [UtilitySpec(nodes[-1], prefs)])
        table = gibbs_policy(bdn, iterations=3000, seed=5)
        payoffs = [r.payoff for r in table.rows]
        assert payoffs == sorted(payoffs, reverse=True)
        assert all(r.visits and r.visits > 0 for r in table.rows)

    def test_payoff_within_tie_tol_of_exact(self):
        # gibbs payoffs are exact EU values, so top-1 payoff matches exact
        bdn = extend(influence_dh(), ["D"], [UtilitySpec("H", prefs_up())])
        table = gibbs_policy(bdn, iterations=1000, beta=20.0, seed=2)
        exact = optimal_policy(bdn)
        top = table.best()
        if top.assignment == exact.assignment:
            assert top.payoff == pytest.approx(exact.payoff, abs=PAYOFF_TIE_TOL)
