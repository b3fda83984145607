import numpy as np
import pytest

from bdnet.inference import (
    AcceptanceFailureError,
    EvidenceSet,
    ImpossibleEvidenceError,
    TreewidthLimitError,
    compile_clique_tree,
    forward_sample,
    posterior,
    prior_marginal,
    query_batch,
    rejection_sample,
    sample_frame,
)
from bdnet.model import Cpt, Dag, DiscreteNetwork, InvalidAssignmentError, Variable

from netgen import random_network, sprinkler_network
from oracles import dense_joint, enumeration_joint_slow, oracle_posterior


def chain_abc():
    variables = [Variable(v, ("f", "t")) for v in "ABC"]
    dag = Dag(["A", "B", "C"], [("A", "B"), ("B", "C")])
    cpts = [
        Cpt("A", (), np.array([[0.4, 0.6]])),
        Cpt("B", ("A",), np.array([[0.7, 0.3], [0.2, 0.8]])),
        Cpt("C", ("B",), np.array([[0.9, 0.1], [0.3, 0.7]])),
    ]
    return DiscreteNetwork(variables, dag, cpts)


def copy_pair():
    variables = [Variable("P", ("f", "t")), Variable("Q", ("f", "t"))]
    dag = Dag(["P", "Q"], [("P", "Q")])
    cpts = [
        Cpt("P", (), np.array([[0.35, 0.65]])),
        Cpt("Q", ("P",), np.array([[1.0, 0.0], [0.0, 1.0]])),  # Q copies P
    ]
    return DiscreteNetwork(variables, dag, cpts)


class TestOracleSelfCheck:
    def test_dense_joint_matches_itertools_enumeration(self):
        rng = np.random.default_rng(1)
        net = random_network(rng, 5, edge_prob=0.5)
        names, joint = dense_joint(net)
        slow = enumeration_joint_slow(net)
        for combo, p in slow.items():
            idx = tuple(
                net.variables[v].state_index(s) for v, s in zip(names, combo)
            )
            assert joint[idx] == pytest.approx(p, rel=1e-12)


class TestCompile:
    def test_chain_cliques(self):
        tree = compile_clique_tree(chain_abc())
        assert sorted(tuple(sorted(c)) for c in tree.cliques) == [("A", "B"), ("B", "C")]
        (i, j), = tree.tree_edges
        assert tree.separator(i, j) == {"B"}

    def test_collider_single_clique(self):
        variables = [Variable(v, ("f", "t")) for v in "ABC"]
        dag = Dag(["A", "B", "C"], [("A", "C"), ("B", "C")])
        cpts = [
            Cpt("A", (), np.array([[0.5, 0.5]])),
            Cpt("B", (), np.array([[0.5, 0.5]])),
            Cpt("C", ("A", "B"), np.tile([0.5, 0.5], (4, 1))),
        ]
        tree = compile_clique_tree(DiscreteNetwork(variables, dag, cpts))
        assert len(tree.cliques) == 1
        assert tree.cliques[0] == {"A", "B", "C"}

    def test_family_coverage_and_running_intersection(self):
        for seed in range(8):
            net = random_network(np.random.default_rng(seed), 8, edge_prob=0.4)
            tree = compile_clique_tree(net)
            # every CPT family inside at least one clique
            for v in net.dag.nodes:
                family = set(net.dag.parents(v)) | {v}
                assert any(family <= c for c in tree.cliques)
            # running intersection: cliques holding any node form a subtree
            for v in net.dag.nodes:
                holding = {i for i, c in enumerate(tree.cliques) if v in c}
                if len(holding) <= 1:
                    continue
                adj = {i: set() for i in holding}
                for i, j in tree.tree_edges:
                    if i in holding and j in holding and v in tree.separator(i, j):
                        adj[i].add(j)
                        adj[j].add(i)
                start = next(iter(holding))
                seen = {start}
                stack = [start]
                while stack:
                    for nb in adj[stack.pop()]:
                        if nb not in seen:
                            seen.add(nb)
                            stack.append(nb)
                assert seen == holding

    def test_treewidth_limit(self):
        net = random_network(np.random.default_rng(0), 6, edge_prob=0.9)
        with pytest.raises(TreewidthLimitError, match="approximate"):
            compile_clique_tree(net, max_clique_size=2)

    def test_disconnected_network(self):
        variables = [Variable("A", ("f", "t")), Variable("B", ("f", "t"))]
        net = DiscreteNetwork(
            variables,
            Dag(["A", "B"]),
            [Cpt("A", (), np.array([[0.3, 0.7]])), Cpt("B", (), np.array([[0.9, 0.1]]))],
        )
        tree = compile_clique_tree(net)
        assert prior_marginal(tree, "A").probabilities == pytest.approx([0.3, 0.7])
        assert prior_marginal(tree, "B").probabilities == pytest.approx([0.9, 0.1])


class TestExactQueries:
    def test_root_prior_is_cpt(self):
        tree = compile_clique_tree(chain_abc())
        dist = prior_marginal(tree, "A")
        np.testing.assert_allclose(dist.probabilities, [0.4, 0.6], atol=1e-12)

    def test_deterministic_copy_matches_parent(self):
        tree = compile_clique_tree(copy_pair())
        p = prior_marginal(tree, "P").probabilities
        q = prior_marginal(tree, "Q").probabilities
        np.testing.assert_allclose(p, q, atol=1e-12)

    def test_prior_matches_enumeration_on_random_networks(self):
        for seed in range(6):
            net = random_network(np.random.default_rng(seed + 100), 7, edge_prob=0.45)
            tree = compile_clique_tree(net)
            for v in net.dag.nodes:
                expected = oracle_posterior(net, v, {})
                got = prior_marginal(tree, v).probabilities
                np.testing.assert_allclose(got, expected, atol=1e-9)

    def test_evidence_on_query_variable_is_point_mass(self):
        tree = compile_clique_tree(chain_abc())
        dist = posterior(tree, "B", {"B": "t"})
        np.testing.assert_allclose(dist.probabilities, [0.0, 1.0], atol=1e-12)

    def test_sprinkler_leaf_evidence_vs_oracle(self):
        net = sprinkler_network()
        tree = compile_clique_tree(net)
        for var in ("cloudy", "sprinkler", "rain"):
            expected = oracle_posterior(net, var, {"wet": "wet"})
            got = posterior(tree, var, {"wet": "wet"}).probabilities
            np.testing.assert_allclose(got, expected, atol=1e-9)

    def test_contradictory_evidence_impossible(self):
        tree = compile_clique_tree(copy_pair())
        with pytest.raises(ImpossibleEvidenceError):
            posterior(tree, "P", {"P": "t", "Q": "f"})

    def test_empty_evidence_equals_prior(self):
        net = random_network(np.random.default_rng(55), 6)
        tree = compile_clique_tree(net)
        for v in list(net.dag.nodes)[:3]:
            a = prior_marginal(tree, v).probabilities
            b = posterior(tree, v, {}).probabilities
            np.testing.assert_allclose(a, b, atol=1e-12)

    def test_unknown_variable(self):
        tree = compile_clique_tree(chain_abc())
        with pytest.raises(InvalidAssignmentError):
            prior_marginal(tree, "Z")
        with pytest.raises(InvalidAssignmentError):
            posterior(tree, "A", {"Z": "t"})

    def test_log_p_evidence_reported(self):
        net = sprinkler_network()
        tree = compile_clique_tree(net)
        dist = posterior(tree, "cloudy", {"wet": "wet"})
        names, joint = dense_joint(net)
        p_wet = joint[:, :, :, 1].sum()  # wet axis is last alphabetically? compute robustly
        idx = [slice(None)] * 4
        idx[names.index("wet")] = net.variables["wet"].state_index("wet")
        p_wet = joint[tuple(idx)].sum()
        assert dist.meta["log_p_evidence"] == pytest.approx(np.log(p_wet), abs=1e-9)


class TestCalibration:
    def test_separator_agreement(self):
        for seed in (3, 4, 5):
            net = random_network(np.random.default_rng(seed), 8, edge_prob=0.4)
            tree = compile_clique_tree(net)
            cal = tree.calibrate({})
            for i, j in tree.tree_edges:
                a, b = cal.separator_marginals(i, j)
                np.testing.assert_allclose(a, b, atol=1e-9)

    def test_recalibration_identical(self):
        net = sprinkler_network()
        tree = compile_clique_tree(net)
        first = tree.calibrate({"wet": "wet"})
        second = tree.calibrate({"wet": "wet"})
        for fa, fb in zip(first.beliefs, second.beliefs):
            np.testing.assert_allclose(fa.table, fb.table, atol=1e-12)

    def test_empty_calibration_cached(self):
        tree = compile_clique_tree(chain_abc())
        tree.calibrate({})
        count = tree.calibration_count
        tree.calibrate({})
        assert tree.calibration_count == count


class TestQueryBatch:
    def test_shared_calibration(self):
        tree = compile_clique_tree(chain_abc())
        before = tree.calibration_count
        results = query_batch(tree, [("A", {"C": "t"}), ("B", {"C": "t"})])
        assert tree.calibration_count == before + 1
        assert all(hasattr(r, "probabilities") for r in results)

    def test_batch_of_one_matches_posterior(self):
        tree = compile_clique_tree(chain_abc())
        (batch,) = query_batch(tree, [("A", {"B": "t"})])
        single = posterior(tree, "A", {"B": "t"})
        np.testing.assert_allclose(batch.probabilities, single.probabilities, atol=1e-12)

    def test_error_entry_leaves_others_intact(self):
        tree = compile_clique_tree(chain_abc())
        results = query_batch(tree, [("A", {}), ("NOPE", {}), ("C", {})])
        assert hasattr(results[0], "probabilities")
        assert isinstance(results[1], InvalidAssignmentError)
        assert hasattr(results[2], "probabilities")

    def test_order_preserved(self):
        tree = compile_clique_tree(chain_abc())
        results = query_batch(tree, [("C", {}), ("A", {})])
        assert results[0].variable == "C"
        assert results[1].variable == "A"


class TestForwardSampling:
    def test_sample_frame_frequencies(self):
        net = chain_abc()
        df = sample_frame(net, 50_000, seed=4)
        p_a_t = (df["A"] == "t").mean()
        assert p_a_t == pytest.approx(0.6, abs=0.01)

    def test_reproducible(self):
        net = sprinkler_network()
        a = sample_frame(net, 100, seed=9)
        b = sample_frame(net, 100, seed=9)
        assert a.equals(b)


class TestRejectionSampling:
    def test_root_marginal_large_sample(self):
        variables = [Variable("R", ("f", "t"))]
        net = DiscreteNetwork(variables, Dag(["R"]), [Cpt("R", (), np.array([[0.4, 0.6]]))])
        dist = rejection_sample(net, "R", {}, n_samples=100_000, repeats=1, seed=0)
        np.testing.assert_allclose(dist.probabilities, [0.4, 0.6], atol=0.01)

    def test_matches_exact_on_six_nodes(self):
        net = random_network(np.random.default_rng(42), 6, edge_prob=0.4)
        tree = compile_clique_tree(net)
        query_var = net.dag.topological_order()[-1]
        ev_var = net.dag.topological_order()[0]
        evidence = {ev_var: net.variables[ev_var].states[0]}
        exact = posterior(tree, query_var, evidence).probabilities
        approx = rejection_sample(net, query_var, evidence,
                                  n_samples=40_000, repeats=25, seed=7)
        assert approx.meta["accepted"] >= 100_000
        l1 = np.abs(approx.probabilities - exact).sum()
        assert l1 < 0.02

    def test_std_error_present_with_repeats(self):
        net = chain_abc()
        dist = rejection_sample(net, "C", {"A": "t"}, n_samples=2000, repeats=25, seed=1)
        assert dist.std_error is not None
        assert dist.std_error.shape == dist.probabilities.shape
        assert dist.meta["repeats"] == 25

    def test_no_std_error_single_repeat(self):
        net = chain_abc()
        dist = rejection_sample(net, "C", {}, n_samples=1000, repeats=1, seed=1)
        assert dist.std_error is None

    def test_acceptance_failure(self):
        # three independent rare events: acceptance probability 1e-6
        variables = [Variable(v, ("common", "rare")) for v in ("X", "Y", "Z")]
        cpts = [Cpt(v, (), np.array([[0.99, 0.01]])) for v in ("X", "Y", "Z")]
        net = DiscreteNetwork(variables, Dag(["X", "Y", "Z"]), cpts)
        with pytest.raises(AcceptanceFailureError, match="exact"):
            rejection_sample(
                net, "X",
                {"X": "rare", "Y": "rare", "Z": "rare"},
                n_samples=100, repeats=3, seed=5,
            )

    def test_bit_reproducible(self):
        net = sprinkler_network()
        a = rejection_sample(net, "rain", {"wet": "wet"}, n_samples=5_000, repeats=5, seed=3)
        b = rejection_sample(net, "rain", {"wet": "wet"}, n_samples=5_000, repeats=5, seed=3)
        np.testing.assert_array_equal(a.probabilities, b.probabilities)
        np.testing.assert_array_equal(a.std_error, b.std_error)

    def test_error_halves_when_accepted_quadruples(self):
        net = sprinkler_network()
        tree = compile_clique_tree(net)
        evidence = {"wet": "wet"}
        exact = posterior(tree, "cloudy", evidence).probabilities

        def mean_l1(n, seeds=24):
            total = 0.0
            for s in range(seeds):
                d = rejection_sample(net, "cloudy", evidence,
                                     n_samples=n, repeats=1, seed=1000 + s)
                total += np.abs(d.probabilities - exact).sum()
            return total / seeds

        ratio = mean_l1(8_000) / mean_l1(2_000)
        assert 0.35 <= ratio <= 0.65  # 1/sqrt(4) = 0.5, +/-30%

    def test_invalid_evidence_state(self):
        net = chain_abc()
        with pytest.raises(InvalidAssignmentError):
            rejection_sample(net, "A", {"B": "banana"}, n_samples=10, repeats=1)


class TestEvidenceSet:
    def test_duplicate_variable_rejected(self):
        with pytest.raises(ValueError, match="twice"):
            EvidenceSet([("A", "t"), ("A", "f")])

    def test_sorted_items(self):
        ev = EvidenceSet({"B": "x", "A": "y"})
        assert ev.items == (("A", "y"), ("B", "x"))

    def test_validate_against_network(self):
        ev = EvidenceSet({"A": "banana"})
        with pytest.raises(InvalidAssignmentError):
            ev.validate(chain_abc())
