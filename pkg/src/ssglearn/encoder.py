"""Graph encoder: two message-passing layers, sum readout, projection head.

Layer k updates node i via

    v_i^k = update(v_i^{k-1}, sum_{j -> i} message(v_i^{k-1}, v_j^{k-1}, e_ji))

where the sum runs over incoming edges and is the zero vector for nodes
without any. The first layer consumes raw node and edge features; the
second operates on hidden states only. Summing the final states over all
nodes makes the readout permutation invariant; a three-layer head maps it
to the embedding. Dropout regularizes the two message-passing layers but
not the head.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyGraph, ShapeMismatch
from .graph import EDGE_WIDTH, NODE_WIDTH, SceneGraph
from .nn import (
    Mlp,
    MlpSpec,
    MlpTape,
    init_mlp,
    mlp_backward,
    mlp_forward,
    mlp_grad_arrays,
    mlp_param_arrays,
)

__all__ = [
    "GnnLayerParams",
    "EncoderParams",
    "EncodeTape",
    "init_encoder",
    "message_pass",
    "encode",
    "encode_with_tape",
    "encode_backward",
    "encode_batch",
    "encoder_param_arrays",
    "assign_encoder_params",
    "zero_encoder_grads",
    "HIDDEN_WIDTH",
    "EMBEDDING_DIM",
]

HIDDEN_WIDTH = 60
EMBEDDING_DIM = 12


@dataclass
class GnnLayerParams:
    message: Mlp
    update: Mlp


@dataclass
class EncoderParams:
    layer1: GnnLayerParams
    layer2: GnnLayerParams
    head: Mlp

    @property
    def node_width(self) -> int:
        return self.layer1.update.spec.widths[0] - self.layer1.message.spec.widths[-1]

    @property
    def hidden_width(self) -> int:
        return self.layer1.message.spec.widths[-1]

    @property
    def embedding_dim(self) -> int:
        return self.head.spec.widths[-1]


def init_encoder(
    rng: np.random.Generator,
    node_width: int = NODE_WIDTH,
    edge_width: int = EDGE_WIDTH,
    hidden_width: int = HIDDEN_WIDTH,
    embedding_dim: int = EMBEDDING_DIM,
    slope: float = 0.01,
    dropout: float = 0.1,
) -> EncoderParams:
    """Fresh Glorot-initialized encoder.

    Message and update nets are two-layer MLPs; the projection head is a
    three-layer MLP without dropout.
    """
    gnn = dict(slope=slope, dropout=dropout)
    layer1 = GnnLayerParams(
        message=init_mlp(MlpSpec((2 * node_width + edge_width, hidden_width, hidden_width), **gnn), rng),
        update=init_mlp(MlpSpec((node_width + hidden_width, hidden_width, hidden_width), **gnn), rng),
    )
    layer2 = GnnLayerParams(
        message=init_mlp(MlpSpec((2 * hidden_width, hidden_width, hidden_width), **gnn), rng),
        update=init_mlp(MlpSpec((2 * hidden_width, hidden_width, hidden_width), **gnn), rng),
    )
    head = init_mlp(
        MlpSpec((hidden_width, hidden_width, hidden_width, embedding_dim), slope=slope, dropout=0.0),
        rng,
    )
    return EncoderParams(layer1, layer2, head)


@dataclass
class _LayerTape:
    message_tape: MlpTape | None
    update_tape: MlpTape
    states_in: np.ndarray


@dataclass
class EncodeTape:
    graph: SceneGraph
    origins: np.ndarray
    targets: np.ndarray
    layer1: _LayerTape
    layer2: _LayerTape
    readout: np.ndarray  # pre-head sum over node states
    head_tape: MlpTape


def _message_inputs(
    states: np.ndarray,
    origins: np.ndarray,
    targets: np.ndarray,
    edge_features: np.ndarray | None,
) -> np.ndarray:
    # argument order per message(v_i, v_j, e_ji): receiving node first
    cols = [states[targets], states[origins]]
    if edge_features is not None:
        cols.append(edge_features)
    return np.concatenate(cols, axis=1)


def _layer_forward(
    layer: GnnLayerParams,
    states: np.ndarray,
    origins: np.ndarray,
    targets: np.ndarray,
    edge_features: np.ndarray | None,
    training: bool,
    rng: np.random.Generator | None,
) -> tuple[np.ndarray, _LayerTape]:
    n, width = states.shape
    agg_width = layer.message.spec.widths[-1]
    aggregate = np.zeros((n, agg_width), dtype=np.float64)
    message_tape = None
    if origins.size:
        msg_in = _message_inputs(states, origins, targets, edge_features)
        messages, message_tape = mlp_forward(layer.message, msg_in, training, rng)
        np.add.at(aggregate, targets, messages)
    new_states, update_tape = mlp_forward(
        layer.update, np.concatenate([states, aggregate], axis=1), training, rng
    )
    return new_states, _LayerTape(message_tape, update_tape, states)


def _layer_backward(
    layer: GnnLayerParams,
    tape: _LayerTape,
    origins: np.ndarray,
    targets: np.ndarray,
    d_new_states: np.ndarray,
) -> tuple[list[np.ndarray], list[np.ndarray], np.ndarray]:
    """Gradients of (message params, update params, input states)."""
    upd_grads, d_upd_in = mlp_backward(layer.update, tape.update_tape, d_new_states)
    width = tape.states_in.shape[1]
    d_states = d_upd_in[:, :width].copy()
    d_aggregate = d_upd_in[:, width:]
    if tape.message_tape is not None:
        d_messages = d_aggregate[targets]
        msg_grads, d_msg_in = mlp_backward(layer.message, tape.message_tape, d_messages)
        np.add.at(d_states, targets, d_msg_in[:, :width])
        np.add.at(d_states, origins, d_msg_in[:, width : 2 * width])
        # gradient wrt edge features is discarded: they are inputs
        msg_arrays = mlp_grad_arrays(msg_grads)
    else:
        msg_arrays = [np.zeros_like(a) for a in mlp_param_arrays(layer.message)]
    return msg_arrays, mlp_grad_arrays(upd_grads), d_states


def message_pass(
    layer: GnnLayerParams,
    graph: SceneGraph,
    states: np.ndarray,
    use_edge_features: bool = True,
    training: bool = False,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """One message-passing layer over the graph; returns new node states."""
    states = np.asarray(states, dtype=np.float64)
    if states.shape[0] != graph.n_nodes:
        raise ShapeMismatch(
            f"states rows {states.shape[0]} != node count {graph.n_nodes}"
        )
    origins = graph.edges[:, 0]
    targets = graph.edges[:, 1]
    edge_features = graph.edge_features if use_edge_features else None
    new_states, _ = _layer_forward(layer, states, origins, targets, edge_features, training, rng)
    return new_states


def encode_with_tape(
    params: EncoderParams,
    graph: SceneGraph,
    training: bool = False,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, EncodeTape]:
    if graph.n_nodes == 0:
        raise EmptyGraph(f"graph {graph.scene_id} has no nodes")
    origins = graph.edges[:, 0]
    targets = graph.edges[:, 1]
    states1, tape1 = _layer_forward(
        params.layer1, graph.node_features, origins, targets, graph.edge_features, training, rng
    )
    states2, tape2 = _layer_forward(params.layer2, states1, origins, targets, None, training, rng)
    readout = states2.sum(axis=0, keepdims=True)
    embedding, head_tape = mlp_forward(params.head, readout, training, rng)
    return embedding[0], EncodeTape(graph, origins, targets, tape1, tape2, readout[0], head_tape)


def encode(
    params: EncoderParams,
    graph: SceneGraph,
    training: bool = False,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Embedding of one scene graph; evaluation mode is deterministic."""
    embedding, _ = encode_with_tape(params, graph, training, rng)
    return embedding


def encode_backward(
    params: EncoderParams, tape: EncodeTape, d_embedding: np.ndarray
) -> list[np.ndarray]:
    """Parameter gradients of the recorded encode, flat in the order of
    encoder_param_arrays."""
    d_embedding = np.asarray(d_embedding, dtype=np.float64).reshape(1, -1)
    head_grads, d_readout = mlp_backward(params.head, tape.head_tape, d_embedding)
    n = tape.graph.n_nodes
    d_states2 = np.repeat(d_readout, n, axis=0)  # readout is a plain sum
    msg2, upd2, d_states1 = _layer_backward(
        params.layer2, tape.layer2, tape.origins, tape.targets, d_states2
    )
    msg1, upd1, _ = _layer_backward(
        params.layer1, tape.layer1, tape.origins, tape.targets, d_states1
    )
    return msg1 + upd1 + msg2 + upd2 + mlp_grad_arrays(head_grads)


def encode_batch(params: EncoderParams, graphs: list[SceneGraph]) -> np.ndarray:
    """Evaluation-mode embeddings, one row per graph."""
    out = np.zeros((len(graphs), params.embedding_dim), dtype=np.float64)
    for i, graph in enumerate(graphs):
        try:
            out[i] = encode(params, graph)
        except EmptyGraph as err:
            raise EmptyGraph(f"graph {i}: {err}") from err
    return out


def encoder_param_arrays(params: EncoderParams) -> list[np.ndarray]:
    """All parameter tensors in a fixed traversal order."""
    return (
        mlp_param_arrays(params.layer1.message)
        + mlp_param_arrays(params.layer1.update)
        + mlp_param_arrays(params.layer2.message)
        + mlp_param_arrays(params.layer2.update)
        + mlp_param_arrays(params.head)
    )


def assign_encoder_params(params: EncoderParams, arrays: list[np.ndarray]) -> None:
    """Write a flat array list (encoder_param_arrays order) back into the
    parameter structure."""
    expected = encoder_param_arrays(params)
    if len(arrays) != len(expected):
        raise ShapeMismatch(f"expected {len(expected)} arrays, got {len(arrays)}")
    idx = 0
    for mlp in (
        params.layer1.message,
        params.layer1.update,
        params.layer2.message,
        params.layer2.update,
        params.head,
    ):
        for layer in range(mlp.spec.n_layers):
            w, b = arrays[idx], arrays[idx + 1]
            if w.shape != mlp.weights[layer].shape or b.shape != mlp.biases[layer].shape:
                raise ShapeMismatch(f"array {idx} shape mismatch")
            mlp.weights[layer] = w
            mlp.biases[layer] = b
            idx += 2


def zero_encoder_grads(params: EncoderParams) -> list[np.ndarray]:
    return [np.zeros_like(a) for a in encoder_param_arrays(params)]
