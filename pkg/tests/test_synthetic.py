"""Scenario templates: canonical maps, sampled scenes, template separability."""
import numpy as np
import pytest

from ssglearn.graph import build_scene_graph, graph_level_features
from ssglearn.scene import ObjectClass, point_along
from ssglearn.synthetic import (
    DEFAULT_TEMPLATE_PARAMS,
    ScenarioTemplate,
    TemplateParams,
    generate_dataset,
    generate_map,
    generate_scene,
    map_id_for,
)

T = ScenarioTemplate


class TestMaps:
    def test_straight_map(self):
        m = generate_map(T.STRAIGHT_FOLLOWING)
        assert [lane.id for lane in m.lanes] == ["main"]
        assert abs(m.lanes[0].length - 200.0) < 1e-12
        assert m.relations == ()

    def test_queue_map(self):
        m = generate_map(T.QUEUE_JAM)
        assert [lane.id for lane in m.lanes] == ["queue"]
        assert abs(m.lanes[0].length - 150.0) < 1e-12

    def test_merge_map_relations(self):
        m = generate_map(T.MERGE_LANE)
        assert set(m.lanes_by_id) == {"main", "ramp"}
        assert frozenset(("main", "ramp")) in m.parallel_pairs
        assert m.successors.get("ramp") == ("main",)

    def test_intersection_map_crossings(self):
        m = generate_map(T.FOUR_WAY_INTERSECTION)
        assert set(m.lanes_by_id) == {"ew", "we", "ns", "sn"}
        crossing_pairs = {frozenset(k) for k in m.intersections}
        assert crossing_pairs == {
            frozenset(p)
            for p in (("ew", "ns"), ("we", "sn"), ("ns", "we"), ("sn", "ew"))
        }
        # arclengths are real crossings of the stored centerlines
        for (a, b), points in m.intersections.items():
            for sa, sb in points:
                pa, _ = point_along(m.lanes_by_id[a], sa)
                pb, _ = point_along(m.lanes_by_id[b], sb)
                assert abs(pa.x - pb.x) < 1e-9 and abs(pa.y - pb.y) < 1e-9

    def test_mixed_map_extends_intersection(self):
        m = generate_map(T.MIXED)
        assert set(m.lanes_by_id) == {"ew", "we", "ns", "sn", "ew2", "ramp"}
        assert frozenset(("ew", "ew2")) in m.parallel_pairs
        assert m.successors.get("ramp") == ("ew2",)

    def test_map_ids(self):
        for t in T:
            assert map_id_for(t) == f"map-{t.value}"


class TestSceneSampling:
    def test_deterministic(self):
        a = generate_scene(T.MERGE_LANE, generate_map(T.MERGE_LANE), seed=9)
        b = generate_scene(T.MERGE_LANE, generate_map(T.MERGE_LANE), seed=9)
        assert a == b
        c = generate_scene(T.MERGE_LANE, generate_map(T.MERGE_LANE), seed=10)
        assert a != c

    @pytest.mark.parametrize(
        "template,count",
        [
            (T.STRAIGHT_FOLLOWING, 5),
            (T.MERGE_LANE, 10),
            (T.FOUR_WAY_INTERSECTION, 9),
            (T.QUEUE_JAM, 13),
        ],
    )
    def test_fixed_participant_counts(self, template, count):
        lane_map = generate_map(template)
        for seed in range(10):
            assert len(generate_scene(template, lane_map, seed).participants) == count

    def test_mixed_count_range(self):
        lane_map = generate_map(T.MIXED)
        counts = {
            len(generate_scene(T.MIXED, lane_map, seed).participants) for seed in range(40)
        }
        assert counts <= set(range(3, 9))
        assert len(counts) > 1

    @pytest.mark.parametrize("template", list(T))
    def test_speed_ranges(self, template):
        p = DEFAULT_TEMPLATE_PARAMS[template]
        lane_map = generate_map(template)
        for seed in range(8):
            scene = generate_scene(template, lane_map, seed)
            for part in scene.participants:
                if template is T.MIXED and part.object_class is not ObjectClass.CAR:
                    continue  # bikes and pedestrians use their own bands
                assert p.speed_min <= part.speed <= p.speed_max

    def test_chain_gaps(self):
        for template, lo, hi in ((T.STRAIGHT_FOLLOWING, 10.0, 14.0), (T.QUEUE_JAM, 2.0, 4.0)):
            lane_map = generate_map(template)
            for seed in range(5):
                xs = sorted(p.position.x for p in generate_scene(template, lane_map, seed).participants)
                gaps = np.diff(xs)
                assert gaps.min() >= lo - 1e-9 and gaps.max() <= hi + 1e-9

    def test_scene_ids_and_labels(self):
        scenes, maps = generate_dataset({t: 2 for t in T}, seed=0)
        assert len(scenes) == 10
        assert set(maps) == {map_id_for(t) for t in T}
        for scene in scenes:
            template = T(scene.location_label)
            assert scene.map_ref == map_id_for(template)
            assert scene.scene_id.startswith(scene.location_label + "-")

    def test_dataset_minimum_size(self):
        with pytest.raises(ValueError):
            generate_dataset({T.MIXED: 9}, seed=0)


class TestSceneStructure:
    def test_queue_graphs_are_slow_and_chained(self):
        lane_map = generate_map(T.QUEUE_JAM)
        for seed in range(5):
            scene = generate_scene(T.QUEUE_JAM, lane_map, seed)
            feats = graph_level_features(build_scene_graph(scene, lane_map))
            assert feats.mean_speed_cars < 1.5
            assert feats.e_lon > 0.0
            assert feats.e_int == 0.0

    def test_intersection_single_car_per_arm_yields_crossing_edges_only(self):
        lane_map = generate_map(T.FOUR_WAY_INTERSECTION)
        scene = generate_scene(
            T.FOUR_WAY_INTERSECTION, lane_map, seed=2, params=TemplateParams(4, 4, 2.0, 8.0)
        )
        graph = build_scene_graph(scene, lane_map)
        assert graph.n_nodes == 4
        assert graph.n_edges == 8  # four crossing lane pairs, both directions
        for f in graph.edge_features:
            assert f[0] == 0.0 and f[1] == 0.0
            assert abs(f[2] - 1.0) < 1e-12
            assert f[3] == 0.0 and f[4] > 0.0
            # cars sit exactly on their centerlines
            assert np.abs(f[5:]).max() < 1e-9

    def test_mixed_pedestrians_are_isolated(self):
        lane_map = generate_map(T.MIXED)
        found = 0
        for seed in range(30):
            scene = generate_scene(T.MIXED, lane_map, seed)
            graph = build_scene_graph(scene, lane_map)
            ped = [
                i
                for i, p in enumerate(scene.participants)
                if p.object_class is ObjectClass.PEDESTRIAN
            ]
            for i in ped:
                found += 1
                assert not np.any(graph.edges == i)
        assert found > 0

    def test_mixed_covers_all_classes(self):
        lane_map = generate_map(T.MIXED)
        seen = set()
        for seed in range(60):
            for p in generate_scene(T.MIXED, lane_map, seed).participants:
                seen.add(p.object_class)
        assert seen == set(ObjectClass)

    def test_every_scene_builds_a_nonempty_graph(self):
        scenes, maps = generate_dataset({t: 4 for t in T}, seed=1)
        for scene in scenes:
            graph = build_scene_graph(scene, maps[scene.map_ref])
            assert graph.n_nodes == len(scene.participants) > 0


class TestTemplateSeparability:
    def test_templates_recoverable_from_graph_features(self):
        # nearest class centroid on z-scored graph-level features; the
        # planted templates should be recoverable well above chance
        scenes, maps = generate_dataset({t: 30 for t in T if t is not T.MIXED}, seed=21)
        labels = np.array([s.location_label for s in scenes])
        def as_row(f):
            return [f.e_lon, f.e_lat, f.e_int, f.n_edges, f.n_cars, f.mean_speed_cars]

        rows = np.array(
            [
                as_row(graph_level_features(build_scene_graph(s, maps[s.map_ref])))
                for s in scenes
            ],
            dtype=np.float64,
        )
        mu, sd = rows.mean(axis=0), rows.std(axis=0)
        z = (rows - mu) / np.where(sd > 0, sd, 1.0)
        rng = np.random.default_rng(3)
        order = rng.permutation(len(z))
        half = len(z) // 2
        tr, te = order[:half], order[half:]
        names = sorted(set(labels))
        centroids = {n: z[tr][labels[tr] == n].mean(axis=0) for n in names}
        hits = 0
        for i in te:
            best = min(names, key=lambda n: float(np.linalg.norm(z[i] - centroids[n])))
            hits += best == labels[i]
        assert hits / len(te) >= 0.7
