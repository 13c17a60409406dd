"""Scene graph construction against hand-computed oracles."""
import math

import numpy as np
import pytest

from ssglearn.errors import EmptyScene
from ssglearn.graph import (
    DEFAULT_HORIZON,
    EDGE_WIDTH,
    RelationType,
    build_scene_graph,
    classify_pair,
    graph_from_dict,
    graph_level_features,
    graph_to_dict,
)
from ssglearn.projection import ProjectionIdentity, candidate_identities
from ssglearn.scene import (
    Lane,
    LaneMap,
    LaneRelation,
    LaneRelationKind,
    ObjectClass,
    TrafficParticipant,
    TrafficScene,
    Vec2,
)

from micro_scenes import all_micro_scenes, five_vehicle_six_identities, two_car_following


def ident(lane_id, s, pid="p", d=0.0, certainty=1.0):
    return ProjectionIdentity(pid, lane_id, s, d, certainty)


def assert_matches_table(micro, cert_tol=1e-12, dist_tol=1e-9):
    graph = build_scene_graph(micro.scene, micro.lane_map)
    np.testing.assert_allclose(
        graph.node_features, np.array(micro.expected_nodes, dtype=float), atol=1e-12
    )
    got = {
        (graph.node_ids[o], graph.node_ids[t]): feats
        for (o, t), feats in zip(graph.edges, graph.edge_features)
    }
    assert set(got) == set(micro.expected_edges), micro.name
    for key, expected in micro.expected_edges.items():
        expected = np.asarray(expected, dtype=float)
        np.testing.assert_allclose(
            got[key][:3], expected[:3], atol=cert_tol, err_msg=f"{micro.name} {key} certainties"
        )
        np.testing.assert_allclose(
            got[key][3:], expected[3:], atol=dist_tol, err_msg=f"{micro.name} {key} distances"
        )


@pytest.mark.parametrize("micro", all_micro_scenes(), ids=lambda m: m.name)
def test_micro_scene_matches_hand_table(micro):
    assert_matches_table(micro)


class TestClassifyPair:
    def setup_method(self):
        lanes = (
            Lane("L", (Vec2(0, 0), Vec2(100, 0)), 3.5),
            Lane("P", (Vec2(0, 3.5), Vec2(100, 3.5)), 3.5),
            Lane("X", (Vec2(20, -50), Vec2(20, 50)), 3.5),
        )
        rels = (
            LaneRelation(LaneRelationKind.PARALLEL, "L", "P"),
            LaneRelation(LaneRelationKind.INTERSECTING, "L", "X", 20.0, 50.0),
        )
        self.m = LaneMap(lanes, rels)

    def test_same_lane_is_longitudinal(self):
        assert classify_pair(ident("L", 5.0), ident("L", 17.0), self.m) == (
            RelationType.LONGITUDINAL,
            12.0,
        )

    def test_parallel_is_lateral(self):
        assert classify_pair(ident("L", 5.0), ident("P", 9.0), self.m) == (
            RelationType.LATERAL,
            4.0,
        )

    def test_crossing_distance_is_to_conflict_point(self):
        assert classify_pair(ident("L", 5.0), ident("X", 10.0), self.m) == (
            RelationType.INTERSECTING,
            15.0,
        )

    def test_unrelated_lanes_none(self):
        assert classify_pair(ident("P", 5.0), ident("X", 5.0), self.m) is None

    def test_longitudinal_horizon_cutoff(self):
        assert classify_pair(ident("L", 0.0), ident("L", 60.0), self.m) is None
        assert classify_pair(ident("L", 0.0), ident("L", 60.0), self.m, horizon=70.0) == (
            RelationType.LONGITUDINAL,
            60.0,
        )

    def test_successor_chain_distance(self):
        lanes = (
            Lane("A", (Vec2(0, 0), Vec2(30, 0)), 3.5),
            Lane("B", (Vec2(30, 0), Vec2(40, 0)), 3.5),
            Lane("C", (Vec2(40, 0), Vec2(90, 0)), 3.5),
        )
        rels = (
            LaneRelation(LaneRelationKind.SUCCESSOR, "A", "B"),
            LaneRelation(LaneRelationKind.SUCCESSOR, "B", "C"),
        )
        m = LaneMap(lanes, rels)
        # (30-20) remaining on A + 10 through B + 5 into C = 25
        assert classify_pair(ident("A", 20.0), ident("C", 5.0), m) == (
            RelationType.LONGITUDINAL,
            25.0,
        )
        # and the reverse direction negates
        assert classify_pair(ident("C", 5.0), ident("A", 20.0), m) == (
            RelationType.LONGITUDINAL,
            -25.0,
        )


class TestBuildSceneGraph:
    def test_no_self_edges_and_both_directions(self):
        g = build_scene_graph(*_scene_and_map())
        assert np.all(g.edges[:, 0] != g.edges[:, 1])
        pairs = {tuple(e) for e in g.edges.tolist()}
        assert all((t, o) in pairs for o, t in pairs)

    def test_gated_features_zero_at_zero_certainty(self):
        for micro in all_micro_scenes():
            g = build_scene_graph(micro.scene, micro.lane_map)
            for feats in g.edge_features:
                if feats[0] == 0.0 and feats[1] == 0.0:
                    assert feats[3] == 0.0 and feats[5] == 0.0 and feats[6] == 0.0
                if feats[2] == 0.0:
                    assert feats[4] == 0.0 and feats[7] == 0.0 and feats[8] == 0.0

    def test_certainties_lie_in_unit_interval(self):
        for micro in all_micro_scenes():
            g = build_scene_graph(micro.scene, micro.lane_map)
            if g.n_edges:
                assert g.edge_features[:, :3].min() >= 0.0
                assert g.edge_features[:, :3].max() <= 1.0

    def test_longitudinal_antisymmetry(self):
        micro = two_car_following()
        g = build_scene_graph(micro.scene, micro.lane_map)
        by_pair = {tuple(e): f for e, f in zip(g.edges.tolist(), g.edge_features)}
        assert by_pair[(0, 1)][3] == -by_pair[(1, 0)][3]

    def test_gate_width_factor_widens_identity_sets(self):
        # second lane 6 m away: outside the default 5.25 m gate, inside 7 m
        lanes = (
            Lane("a", (Vec2(0, 0), Vec2(50, 0)), 3.5),
            Lane("b", (Vec2(0, 6), Vec2(50, 6)), 3.5),
        )
        m = LaneMap(lanes, (LaneRelation(LaneRelationKind.PARALLEL, "a", "b"),))
        p = TrafficParticipant("p", Vec2(10, 0), 5.0, 0.0, ObjectClass.CAR)
        assert len(candidate_identities(p, m)) == 1
        assert len(candidate_identities(p, m, gate_width_factor=2.0)) == 2

    def test_empty_scene_rejected_at_construction(self):
        with pytest.raises(ValueError):
            TrafficScene("s", "loc", (), "m")
        with pytest.raises(EmptyScene):
            micro = two_car_following()
            object.__setattr__(micro.scene, "participants", ())
            build_scene_graph(micro.scene, micro.lane_map)

    def test_deterministic_rebuild(self):
        micro = five_vehicle_six_identities()
        a = build_scene_graph(micro.scene, micro.lane_map)
        b = build_scene_graph(micro.scene, micro.lane_map)
        np.testing.assert_array_equal(a.edges, b.edges)
        np.testing.assert_array_equal(a.edge_features, b.edge_features)

    def test_permutation_gives_isomorphic_graph(self):
        micro = five_vehicle_six_identities()
        g = build_scene_graph(micro.scene, micro.lane_map)
        reversed_scene = TrafficScene(
            micro.scene.scene_id,
            micro.scene.location_label,
            tuple(reversed(micro.scene.participants)),
            micro.scene.map_ref,
        )
        h = build_scene_graph(reversed_scene, micro.lane_map)
        assert sorted(map(tuple, g.node_features.tolist())) == sorted(
            map(tuple, h.node_features.tolist())
        )
        g_edges = {
            (g.node_ids[o], g.node_ids[t]): tuple(f)
            for (o, t), f in zip(g.edges, g.edge_features)
        }
        h_edges = {
            (h.node_ids[o], h.node_ids[t]): tuple(f)
            for (o, t), f in zip(h.edges, h.edge_features)
        }
        assert g_edges == h_edges


class TestSerialization:
    def test_round_trip_preserves_features(self):
        for micro in all_micro_scenes():
            g = build_scene_graph(micro.scene, micro.lane_map)
            h = graph_from_dict(graph_to_dict(g))
            assert h.scene_id == g.scene_id
            assert h.location_label == g.location_label
            np.testing.assert_array_equal(h.node_features, g.node_features)
            np.testing.assert_array_equal(h.edges, g.edges)
            np.testing.assert_array_equal(h.edge_features, g.edge_features)

    def test_empty_edge_list_round_trips(self):
        from micro_scenes import single_car

        micro = single_car()
        g = build_scene_graph(micro.scene, micro.lane_map)
        h = graph_from_dict(graph_to_dict(g))
        assert h.n_edges == 0 and h.edge_features.shape == (0, EDGE_WIDTH)


class TestGraphLevelFeatures:
    def test_single_stationary_car(self):
        lane_map = LaneMap((Lane("L", (Vec2(0, 0), Vec2(50, 0)), 3.5),))
        scene = TrafficScene(
            "s", "loc", (TrafficParticipant("c", Vec2(5, 0), 0.0, 0.0, ObjectClass.CAR),), "m"
        )
        f = graph_level_features(build_scene_graph(scene, lane_map))
        assert (f.n_edges, f.n_cars, f.mean_speed_cars) == (0, 1, 0.0)
        assert (f.e_lon, f.e_lat, f.e_int) == (0.0, 0.0, 0.0)

    def test_two_car_following_features(self):
        micro = two_car_following()
        f = graph_level_features(build_scene_graph(micro.scene, micro.lane_map))
        assert f.n_cars == 2 and f.n_edges == 2
        assert f.mean_speed_cars == pytest.approx(6.0)
        assert f.e_lon == pytest.approx(1.0)  # (1 + 1) / 2 cars

    def test_no_car_normalization_uses_one(self):
        from micro_scenes import truck_and_bike

        micro = truck_and_bike()
        f = graph_level_features(build_scene_graph(micro.scene, micro.lane_map))
        assert f.n_cars == 0
        assert f.e_lon == pytest.approx(2.0)
        assert f.mean_speed_cars == 0.0


def _scene_and_map():
    micro = five_vehicle_six_identities()
    return micro.scene, micro.lane_map
