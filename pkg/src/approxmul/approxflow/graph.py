"""DAG model of a quantized network and its executor.

Graph file (JSON)::

    {"format": "approxflow-graph-1",
     "archive": "<tensor archive manifest, relative to this file>",
     "input": {"id": "input", "shape": [C, H, W], "qparams": {"scale": s, "zero_point": z}},
     "nodes": [{"id": str, "kind": "Conv2D"|"Dense"|"ReLU"|"MaxPool2x2"|"Flatten"|"ArgMax",
                "inputs": [node id], "attrs": {"stride": 1, "padding": 0},
                "weight": name, "bias": name,
                "weight_qparams": {...}, "output_qparams": {...}}, ...],
     "output": node id}

Weights are uint8 (Conv2D: O x C x kh x kw, Dense: O x K), biases int32 in
units of ``s_in * s_w`` with zero point 0.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .archive import ArchiveError, load_archive, save_archive
from .layers import (
    Flags,
    MulBackend,
    Recorder,
    conv2d_q,
    dense_q,
    flatten_q,
    maxpool2x2_q,
    relu_q,
    requantize_acc,
)
from .quant import QParams, QTensor

FORMAT = "approxflow-graph-1"
KINDS = ("Conv2D", "Dense", "ReLU", "MaxPool2x2", "Flatten", "ArgMax")


class GraphError(ValueError):
    pass


@dataclass(frozen=True)
class LayerNode:
    id: str
    kind: str
    inputs: tuple[str, ...]
    attrs: dict = field(default_factory=dict)
    weight: str | None = None
    bias: str | None = None
    weight_qparams: QParams | None = None
    output_qparams: QParams | None = None

    def to_dict(self) -> dict:
        d = {"id": self.id, "kind": self.kind, "inputs": list(self.inputs)}
        if self.attrs:
            d["attrs"] = dict(self.attrs)
        if self.weight is not None:
            d["weight"] = self.weight
        if self.bias is not None:
            d["bias"] = self.bias
        if self.weight_qparams is not None:
            d["weight_qparams"] = self.weight_qparams.to_dict()
        if self.output_qparams is not None:
            d["output_qparams"] = self.output_qparams.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LayerNode":
        if d["kind"] not in KINDS:
            raise GraphError(f"node {d['id']!r}: unknown kind {d['kind']!r}")
        wq, oq = d.get("weight_qparams"), d.get("output_qparams")
        return cls(
            id=d["id"],
            kind=d["kind"],
            inputs=tuple(d["inputs"]),
            attrs=dict(d.get("attrs", {})),
            weight=d.get("weight"),
            bias=d.get("bias"),
            weight_qparams=None if wq is None else QParams.from_dict(wq),
            output_qparams=None if oq is None else QParams.from_dict(oq),
        )


@dataclass
class GraphModel:
    nodes: dict[str, LayerNode]
    input_id: str
    input_shape: tuple[int, ...]
    input_qparams: QParams
    output_id: str
    tensors: dict[str, np.ndarray]

    def __post_init__(self):
        ids = set(self.nodes) | {self.input_id}
        for node in self.nodes.values():
            for src in node.inputs:
                if src not in ids:
                    raise GraphError(f"node {node.id!r} reads unknown node {src!r}")
            for ref in (node.weight, node.bias):
                if ref is not None and ref not in self.tensors:
                    raise GraphError(f"node {node.id!r}: unresolved tensor {ref!r}")
            if node.kind in ("Conv2D", "Dense") and (node.weight is None or node.weight_qparams is None or node.output_qparams is None):
                raise GraphError(f"node {node.id!r}: {node.kind} needs weight, weight_qparams and output_qparams")
        if self.output_id not in ids:
            raise GraphError(f"output {self.output_id!r} is not a node")
        self.topological_order()

    def topological_order(self) -> list[str]:
        """Nodes the output depends on, dependencies first; raises on cycles."""
        order: list[str] = []
        state: dict[str, int] = {}  # 1 = on stack, 2 = done

        def visit(nid: str):
            if nid == self.input_id or state.get(nid) == 2:
                return
            if state.get(nid) == 1:
                raise GraphError(f"cycle through node {nid!r}")
            state[nid] = 1
            for src in self.nodes[nid].inputs:
                visit(src)
            state[nid] = 2
            order.append(nid)

        visit(self.output_id)
        return order

    def multiplications_per_sample(self) -> dict[str, int]:
        """Backend multiplications per input sample, by layer."""
        shapes = {self.input_id: tuple(self.input_shape)}
        counts = {}
        for nid in self.topological_order():
            node = self.nodes[nid]
            s = shapes[node.inputs[0]]
            if node.kind == "Conv2D":
                w = self.tensors[node.weight].shape
                st, pad = node.attrs.get("stride", 1), node.attrs.get("padding", 0)
                oh = (s[1] + 2 * pad - w[2]) // st + 1
                ow = (s[2] + 2 * pad - w[3]) // st + 1
                shapes[nid] = (w[0], oh, ow)
                counts[nid] = oh * ow * int(np.prod(w))
            elif node.kind == "Dense":
                w = self.tensors[node.weight].shape
                shapes[nid] = (w[0],)
                counts[nid] = int(np.prod(w))
            elif node.kind == "MaxPool2x2":
                shapes[nid] = (s[0], s[1] // 2, s[2] // 2)
            elif node.kind == "Flatten":
                shapes[nid] = (int(np.prod(s)),)
            elif node.kind == "ArgMax":
                shapes[nid] = ()
            else:
                shapes[nid] = s
        return counts


@dataclass
class ExecutionStats:
    node_runs: dict[str, int] = field(default_factory=dict)
    flags: Flags = field(default_factory=Flags)


def execute(model: GraphModel, x: QTensor, backend: MulBackend | None = None,
            record: Recorder | None = None, stats: ExecutionStats | None = None):
    """Run the graph on a batch ``x`` of shape (B, *input_shape).

    Dependencies are pulled in on demand and every node runs once per call.
    Returns a QTensor, or an int64 label array when the output is ArgMax.
    """
    backend = backend or MulBackend()
    stats = stats if stats is not None else ExecutionStats()
    if tuple(x.shape[1:]) != tuple(model.input_shape):
        raise GraphError(f"input shape {x.shape[1:]} does not match model input {tuple(model.input_shape)}")
    if x.qparams != model.input_qparams:
        raise GraphError("input qparams do not match the model")
    memo: dict[str, object] = {model.input_id: x}

    def run(nid: str):
        if nid in memo:
            return memo[nid]
        node = model.nodes[nid]
        args = [run(src) for src in node.inputs]
        memo[nid] = _run_node(model, node, args, backend, record, stats.flags)
        stats.node_runs[nid] = stats.node_runs.get(nid, 0) + 1
        return memo[nid]

    model.topological_order()
    return run(model.output_id)


def _run_node(model: GraphModel, node: LayerNode, args, backend, record, flags):
    a = args[0]
    if node.kind in ("Conv2D", "Dense"):
        w = QTensor(model.tensors[node.weight], node.weight_qparams)
        bias = None if node.bias is None else model.tensors[node.bias]
        if node.kind == "Conv2D":
            acc = conv2d_q(a, w, bias, node.attrs.get("stride", 1), node.attrs.get("padding", 0),
                           backend, record, node.id, flags)
        else:
            if a.data.ndim != 2 or a.shape[1] != w.shape[1]:
                raise GraphError(f"node {node.id!r}: input of shape {a.shape[1:]} for weights {w.shape}")
            acc = dense_q(a, w, bias, backend, record, node.id, flags)
        return requantize_acc(acc, a.qparams, w.qparams, node.output_qparams)
    if node.kind == "ReLU":
        return relu_q(a)
    if node.kind == "MaxPool2x2":
        return maxpool2x2_q(a)
    if node.kind == "Flatten":
        return flatten_q(a)
    if node.kind == "ArgMax":
        return np.argmax(a.data.reshape(a.shape[0], -1), axis=1).astype(np.int64)
    raise GraphError(f"unknown node kind {node.kind!r}")


def accuracy_eval(model: GraphModel, images: QTensor, labels, backend: MulBackend | None = None,
                  batch_size: int = 256, record: Recorder | None = None) -> float:
    labels = np.asarray(labels)
    hits = 0
    for s in range(0, len(labels), batch_size):
        batch = QTensor(images.data[s : s + batch_size], images.qparams)
        pred = execute(model, batch, backend, record)
        hits += int(np.sum(pred == labels[s : s + batch_size]))
    return hits / len(labels)


def model_to_dict(model: GraphModel, archive_name: str) -> dict:
    return {
        "format": FORMAT,
        "archive": archive_name,
        "input": {"id": model.input_id, "shape": list(model.input_shape), "qparams": model.input_qparams.to_dict()},
        "nodes": [n.to_dict() for n in model.nodes.values()],
        "output": model.output_id,
    }


def save_model(model: GraphModel, path) -> None:
    path = Path(path)
    archive = path.name.replace(".graph.json", "") + ".tensors.json"
    save_archive(model.tensors, path.parent / archive)
    path.write_text(json.dumps(model_to_dict(model, archive), indent=1, sort_keys=True) + "\n")


def load_model(path) -> GraphModel:
    path = Path(path)
    try:
        d = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise GraphError(f"{path}: not valid JSON") from exc
    if not isinstance(d, dict) or d.get("format") != FORMAT:
        raise GraphError(f"{path}: not a {FORMAT} file")
    try:
        tensors = load_archive(path.parent / d["archive"])
        nodes = [LayerNode.from_dict(n) for n in d["nodes"]]
        inp = d["input"]
        return GraphModel(
            nodes={n.id: n for n in nodes},
            input_id=inp.get("id", "input"),
            input_shape=tuple(inp["shape"]),
            input_qparams=QParams.from_dict(inp["qparams"]),
            output_id=d["output"],
            tensors=tensors,
        )
    except (KeyError, TypeError) as exc:
        raise GraphError(f"{path}: malformed graph ({exc})") from exc


@dataclass
class Dataset:
    images: QTensor
    labels: np.ndarray

    def __len__(self) -> int:
        return len(self.labels)


def save_dataset(ds: Dataset, manifest_path) -> None:
    qp = ds.images.qparams
    save_archive(
        {
            "images": ds.images.data,
            "labels": ds.labels.astype(np.int64),
            "input_scale": np.array([qp.scale], dtype=np.float64),
            "input_zero_point": np.array([qp.zero_point], dtype=np.int32),
        },
        manifest_path,
    )


def load_dataset(manifest_path) -> Dataset:
    t = load_archive(manifest_path)
    try:
        qp = QParams(float(t["input_scale"][0]), int(t["input_zero_point"][0]))
        images, labels = t["images"], t["labels"]
    except KeyError as exc:
        raise ArchiveError(f"{manifest_path}: dataset archive lacks {exc}") from exc
    if images.dtype != np.uint8 or len(images) != len(labels):
        raise ArchiveError(f"{manifest_path}: images must be uint8 and match the label count")
    return Dataset(QTensor(images, qp), labels)
