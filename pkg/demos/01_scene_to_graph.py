# Walkthrough: from a hand-built traffic scene to its semantic scene graph.
#
# We lay out a tiny road: a main lane, a parallel lane next to it, and a
# crossing lane, then drop four participants on them and watch the graph
# builder resolve lane assignments and emit typed edges.

import numpy as np

from ssglearn import (
    Lane,
    LaneMap,
    LaneRelation,
    LaneRelationKind,
    ObjectClass,
    TrafficParticipant,
    TrafficScene,
    Vec2,
    build_scene_graph,
    candidate_identities,
    graph_level_features,
)

# Step 1: the map. Two parallel straight lanes running east, plus one lane
# running north that crosses them both. Crossing arclengths locate the
# conflict point along each lane's centerline.
main = Lane("main", (Vec2(0.0, 0.0), Vec2(100.0, 0.0)), width=3.5)
side = Lane("side", (Vec2(0.0, 3.5), Vec2(100.0, 3.5)), width=3.5)
cross = Lane("cross", (Vec2(60.0, -20.0), Vec2(60.0, 30.0)), width=3.5)

lane_map = LaneMap(
    lanes=frozenset({main, side, cross}),
    relations=frozenset(
        {
            LaneRelation(LaneRelationKind.PARALLEL, "main", "side"),
            LaneRelation(LaneRelationKind.INTERSECTING, "main", "cross", 60.0, 20.0),
            LaneRelation(LaneRelationKind.INTERSECTING, "side", "cross", 60.0, 23.5),
        }
    ),
)

# Step 2: the participants. Two cars on the main lane (a following pair),
# a truck on the side lane, and a bike approaching on the crossing lane.
# One car sits slightly off-center so its lane assignment is ambiguous.
participants = [
    TrafficParticipant("car-lead", Vec2(40.0, 0.0), 12.0, 0.0, ObjectClass.CAR),
    TrafficParticipant("car-follow", Vec2(25.0, 0.9), 11.0, 0.0, ObjectClass.CAR),
    TrafficParticipant("truck", Vec2(30.0, 3.5), 9.0, 0.0, ObjectClass.TRUCK),
    TrafficParticipant("bike", Vec2(60.0, -8.0), 4.0, np.pi / 2, ObjectClass.BIKE),
]
scene = TrafficScene("demo-0001", "demo-site", participants, map_ref="demo")

# Step 3: projection identities. Each participant is projected onto every
# lane whose lateral gate it falls inside; certainties over the surviving
# candidates sum to one.
print("projection identities")
for p in participants:
    for ident in candidate_identities(p, lane_map):
        print(
            f"  {p.id:11s} -> {ident.lane_id:5s}"
            f"  s={ident.s:6.2f} m  d={ident.d:+5.2f} m"
            f"  certainty={ident.certainty:.3f}"
        )

# 'car-follow' sits 0.9 m off the main centerline, so it also picks up a
# weak identity on the side lane. The graph builder keeps both hypotheses
# and weights edges by the product of the endpoint certainties.

# Step 4: the graph itself.
graph = build_scene_graph(scene, lane_map)
print()
print(f"graph for {graph.scene_id}: {graph.n_nodes} nodes, {graph.n_edges} edges")

print()
print("node features [speed, car, truck, pedestrian, bike]")
for node_id, row in zip(graph.node_ids, graph.node_features):
    print(f"  {node_id:11s} {np.array2string(row, precision=2, suppress_small=True)}")

# Edge features pack all three relation kinds into one vector:
#   [0:3]  certainty mass per kind (longitudinal, lateral, intersecting)
#   [3]    signed along-lane distance origin -> target (lon/lat part)
#   [4]    origin's distance to the conflict point (intersecting part)
#   [5:7]  origin/target offset from the lane centerline (lon/lat part)
#   [7:9]  origin/target offset from the centerline (intersecting part)
print()
print("edges (origin -> target)")
for (o, t), feat in zip(graph.edges, graph.edge_features):
    kinds = []
    if feat[0] > 0:
        kinds.append(f"lon {feat[0]:.2f}")
    if feat[1] > 0:
        kinds.append(f"lat {feat[1]:.2f}")
    if feat[2] > 0:
        kinds.append(f"int {feat[2]:.2f}")
    print(
        f"  {graph.node_ids[o]:11s} -> {graph.node_ids[t]:11s}"
        f"  [{', '.join(kinds)}]  path={feat[3]:+7.2f} m  conflict={feat[4]:6.2f} m"
    )

# The two cars share a longitudinal edge (same lane), car/truck pairs get
# lateral edges (parallel lanes), and everyone near the crossing gets an
# intersecting edge against the bike. Parallel relations between the same
# pair are consolidated: one edge carries all kinds at once.

# Step 5: per-graph summary statistics, the same ones the regression
# probes later try to recover from the learned embeddings.
print()
print("graph-level features")
for name, value in graph_level_features(graph).as_dict().items():
    print(f"  {name:16s} {value:.3f}" if isinstance(value, float) else f"  {name:16s} {value}")
