import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from formsched import (AgentAssignment, FormationError, agent_graph,
                       assign_agents, build_formation, centrality,
                       identity_assignment, is_rigid, make_formation,
                       rigidity_rank, spec_from_dict, spec_from_json)
from formsched.seeding import episode_rng

# frozen from an independent brute-force pass over the canonical geometry
ASYM_CENTRALITIES = [
    0.17265478493071942, 0.1661424607763862, 0.1661424607763862,
    0.1583581983313905, 0.1661424607763862, 0.1583581983313905,
    0.1583581983313905, 0.23094010767585027,
]
SYM_CENTRALITY = 0.15599422006078045


class TestBuildFormation:
    def test_symmetric_edge_set(self, sym_spec):
        assert len(sym_spec.edges) == 20
        assert sym_spec.has_edge(1, 2)
        assert not sym_spec.has_edge(2, 7)

    def test_asymmetric_edge_set(self, asym_spec):
        assert len(asym_spec.edges) == 22
        assert asym_spec.has_edge(2, 7)

    def test_space_diagonal_distance(self, sym_spec):
        assert sym_spec.distance(1, 8) == pytest.approx(5 * math.sqrt(3), rel=1e-12)

    def test_slot_geometry_convention(self, sym_spec, asym_spec):
        assert sym_spec.slot_positions[0] == pytest.approx([0, 0, 0])
        assert sym_spec.slot_positions[1] == pytest.approx([5, 0, 0])
        assert sym_spec.slot_positions[2] == pytest.approx([0, 5, 0])
        assert sym_spec.slot_positions[7] == pytest.approx([5, 5, 5])
        assert asym_spec.slot_positions[7] == pytest.approx([2.5, 2.5, 2.5])

    def test_distances_match_geometry(self, sym_spec):
        for i, j in sym_spec.edges:
            expected = np.linalg.norm(sym_spec.slot_positions[i - 1]
                                      - sym_spec.slot_positions[j - 1])
            assert sym_spec.distance(i, j) == pytest.approx(expected, rel=1e-14)

    def test_unknown_kind(self):
        with pytest.raises(FormationError):
            build_formation("pyramid", 5.0)

    def test_bad_d0(self):
        with pytest.raises(FormationError):
            build_formation("symmetric", 0.0)


class TestWeights:
    @pytest.mark.parametrize("kind", ["symmetric", "asymmetric"])
    def test_edge_weight_consistency(self, kind):
        spec = build_formation(kind, 5.0)
        for i, j in spec.edges:
            aij = spec.edge_weight(i, j)
            assert aij > 0
            assert aij ** 2 == pytest.approx(
                spec.node_weights[i - 1] * spec.node_weights[j - 1], rel=1e-14)

    @pytest.mark.parametrize("kind", ["symmetric", "asymmetric"])
    def test_node_weights_sum_to_one(self, kind):
        spec = build_formation(kind, 5.0)
        assert abs(spec.node_weights.sum() - 1.0) < 1e-12
        assert (spec.node_weights > 0).all()


class TestCentrality:
    def test_hand_computed_slot1(self, sym_spec):
        # from a cube vertex: three sides, three face diagonals, one space
        # diagonal to the other vertices
        total = 3 * 5.0 + 3 * 5.0 * np.sqrt(2) + 5.0 * np.sqrt(3)
        assert centrality(sym_spec, 1) == pytest.approx(7.0 / total, rel=1e-14)

    def test_symmetric_cube_values_are_all_equal(self, sym_spec):
        # congruent vertices share the same distance multiset, and sorted
        # summation keeps the float values bitwise identical
        assert (sym_spec.centralities == sym_spec.centralities[0]).all()
        assert sym_spec.centralities[0] == pytest.approx(SYM_CENTRALITY,
                                                         rel=1e-12)

    def test_asymmetric_center_ranks_highest(self, asym_spec):
        assert np.argmax(asym_spec.centralities) == 7
        assert asym_spec.neighbors(8) == (1, 2, 3, 4, 5, 6, 7)

    @pytest.mark.parametrize("kind", ["symmetric", "asymmetric"])
    def test_positive_and_consistent(self, kind):
        spec = build_formation(kind, 5.0)
        for i in range(1, spec.n + 1):
            z = centrality(spec, i)
            assert z > 0
            assert z == pytest.approx(spec.centralities[i - 1], rel=1e-14)

    def test_asymmetric_golden_values(self, asym_spec):
        assert asym_spec.centralities == pytest.approx(ASYM_CENTRALITIES, rel=1e-12)

    def test_index_out_of_range(self, sym_spec):
        with pytest.raises(IndexError):
            centrality(sym_spec, 0)
        with pytest.raises(IndexError):
            centrality(sym_spec, 9)

    @settings(max_examples=30, deadline=None)
    @given(st.randoms(use_true_random=False))
    def test_relabeling_preserves_centrality_multiset(self, pyrandom):
        spec = build_formation("symmetric", 5.0)
        perm = list(range(1, 9))
        pyrandom.shuffle(perm)   # perm[old_slot - 1] = new_slot
        new_pos = np.empty_like(spec.slot_positions)
        for old in range(1, 9):
            new_pos[perm[old - 1] - 1] = spec.slot_positions[old - 1]
        new_edges = [(perm[i - 1], perm[j - 1]) for i, j in spec.edges]
        relabeled = make_formation("relabeled", new_pos, new_edges)
        assert np.sort(relabeled.centralities) == pytest.approx(
            np.sort(spec.centralities), rel=1e-12)


class TestRigidity:
    def test_builtin_ranks(self, sym_spec, asym_spec):
        assert rigidity_rank(sym_spec) == 18
        assert rigidity_rank(asym_spec) == 18
        assert is_rigid(sym_spec) and is_rigid(asym_spec)

    def test_collinear_chain_is_not_rigid(self):
        spec = make_formation("chain", [[0, 0, 0], [1, 0, 0], [2, 0, 0]],
                              [(1, 2), (2, 3)])
        assert rigidity_rank(spec) == 2
        assert not is_rigid(spec)


class TestValidation:
    def test_duplicate_edge(self):
        with pytest.raises(FormationError, match="edges"):
            make_formation("bad", [[0, 0], [1, 0]], [(1, 2), (2, 1)])

    def test_self_loop(self):
        with pytest.raises(FormationError, match="self-loop"):
            make_formation("bad", [[0, 0], [1, 0]], [(1, 1), (1, 2)])

    def test_out_of_range_edge(self):
        with pytest.raises(FormationError, match=r"edges\[1\]"):
            make_formation("bad", [[0, 0], [1, 0]], [(1, 2), (2, 3)])

    def test_disconnected(self):
        with pytest.raises(FormationError, match="connected"):
            make_formation("bad",
                           [[0, 0], [1, 0], [0, 1], [1, 1]],
                           [(1, 2), (3, 4)])

    def test_coincident_slots(self):
        with pytest.raises(FormationError, match="coincide"):
            make_formation("bad", [[0, 0], [0, 0]], [(1, 2)])

    def test_positions_read_only(self, sym_spec):
        with pytest.raises(ValueError):
            sym_spec.slot_positions[0, 0] = 1.0


class TestJson:
    def test_round_trip(self, asym_spec):
        data = json.loads(asym_spec.to_json())
        again = spec_from_dict(data)
        assert again.edges == asym_spec.edges
        assert again.centralities == pytest.approx(asym_spec.centralities)
        assert again.slot_positions == pytest.approx(asym_spec.slot_positions)

    def test_missing_field_names_path(self):
        with pytest.raises(FormationError, match="edges"):
            spec_from_dict({"slot_positions_m": [[0, 0], [1, 0]]})

    def test_inconsistent_derived_field_names_path(self, sym_spec):
        data = sym_spec.as_dict()
        data["centralities"][0] *= 2
        with pytest.raises(FormationError, match="centralities"):
            spec_from_dict(data)

    def test_invalid_json_text(self):
        with pytest.raises(FormationError, match="invalid JSON"):
            spec_from_json("{not json")


class TestAssignment:
    def test_deterministic_for_equal_seed(self, sym_spec):
        a = assign_agents(sym_spec, np.random.default_rng(5))
        b = assign_agents(sym_spec, np.random.default_rng(5))
        assert a.slot_of_agent == b.slot_of_agent

    def test_bijection(self, sym_spec, rng):
        a = assign_agents(sym_spec, rng)
        assert sorted(a.slot_of_agent) == list(range(1, 9))
        for agent in range(1, 9):
            assert a.agent(a.slot(agent)) == agent

    def test_rejects_non_permutation(self):
        with pytest.raises(FormationError):
            AgentAssignment((1, 1, 3))

    def test_episode_streams_give_distinct_permutations(self, sym_spec):
        perms = {assign_agents(sym_spec, episode_rng(123, e)).slot_of_agent
                 for e in range(200)}
        # collisions among 200 draws from 8! = 40320 permutations are rare
        assert len(perms) >= 195


class TestAgentGraph:
    def test_identity_matches_spec(self, sym_spec, sym_graph):
        assert sym_graph.n == 8
        for k, (a, b) in enumerate(sym_graph.edges):
            assert sym_spec.has_edge(a + 1, b + 1)
            assert sym_graph.dist_sq[k] == pytest.approx(
                sym_spec.distance(a + 1, b + 1) ** 2)
        assert sym_graph.node_w == pytest.approx(sym_spec.node_weights)
        assert sym_graph.zeta == pytest.approx(sym_spec.centralities)

    def test_remap_preserves_slot_quantities(self, sym_spec, rng):
        assignment = assign_agents(sym_spec, rng)
        g = agent_graph(sym_spec, assignment)
        for agent in range(1, 9):
            slot = assignment.slot(agent)
            assert g.node_w[agent - 1] == pytest.approx(
                sym_spec.node_weights[slot - 1])
            assert g.zeta[agent - 1] == pytest.approx(
                sym_spec.centralities[slot - 1])
        for k, (a, b) in enumerate(g.edges):
            si, sj = assignment.slot(a + 1), assignment.slot(b + 1)
            assert sym_spec.has_edge(si, sj)
            assert g.dist_sq[k] == pytest.approx(sym_spec.distance(si, sj) ** 2)

    def test_edge_values_shared_across_assignments(self, sym_spec):
        # edge_w and dist_sq follow the formation edge order, so they must
        # not depend on which agents occupy the slots
        base = agent_graph(sym_spec, identity_assignment(8))
        for seed in range(5):
            g = agent_graph(sym_spec, assign_agents(
                sym_spec, np.random.default_rng(seed)))
            assert (g.edge_w == base.edge_w).all()
            assert (g.dist_sq == base.dist_sq).all()
            for k, (a, b) in enumerate(g.edges):
                assert g.weights[a, b] == base.edge_w[k]

    def test_weighted_degree_and_incidence(self, sym_graph):
        assert sym_graph.weighted_degree == pytest.approx(
            sym_graph.weights.sum(axis=1))
        # each incidence column has one +1 and one -1
        assert (np.abs(sym_graph.incidence).sum(axis=0) == 2).all()
        assert (sym_graph.incidence.sum(axis=0) == 0).all()
