"""Regenerate the shipped fixture model and dataset.

Trains a small LeNet-style CNN on scikit-learn's 8x8 digits with torch,
quantizes it post-training to uint8 (per-tensor, min/max calibration) and
writes the graph, tensor archive and held-out test set into
``src/approxmul/data``.  Needs the ``fixtures`` extra (torch, scikit-learn).

    python tools/make_fixtures.py
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
from sklearn.datasets import load_digits
from torch import nn

from approxmul.approxflow.graph import Dataset, GraphModel, LayerNode, save_dataset, save_model
from approxmul.approxflow.quant import QParams, quantize, round_half_away

OUT = Path(__file__).resolve().parents[1] / "src" / "approxmul" / "data"
N_TEST = 600


class Net(nn.Module):
    def __init__(self):
        super().__init__()
        self.conv1 = nn.Conv2d(1, 8, 3, padding=1)
        self.conv2 = nn.Conv2d(8, 16, 3, padding=1)
        self.fc1 = nn.Linear(64, 32)
        self.fc2 = nn.Linear(32, 10)

    def forward(self, x, taps=None):
        h1 = torch.relu(self.conv1(x))
        p1 = nn.functional.max_pool2d(h1, 2)
        h2 = torch.relu(self.conv2(p1))
        p2 = nn.functional.max_pool2d(h2, 2).flatten(1)
        h3 = torch.relu(self.fc1(p2))
        out = self.fc2(h3)
        if taps is not None:
            taps.update(conv1=h1, conv2=h2, fc1=h3, fc2=out)
        return out


def main():
    torch.manual_seed(0)
    digits = load_digits()
    images = digits.images.astype(np.float32) / 16.0
    labels = digits.target.astype(np.int64)
    perm = np.random.default_rng(0).permutation(len(labels))
    test_idx, train_idx = perm[:N_TEST], perm[N_TEST:]

    xtr = torch.tensor(images[train_idx, None])
    ytr = torch.tensor(labels[train_idx])
    net = Net()
    opt = torch.optim.Adam(net.parameters(), lr=3e-3)
    for epoch in range(60):
        order = torch.randperm(len(ytr))
        for s in range(0, len(ytr), 64):
            idx = order[s : s + 64]
            opt.zero_grad()
            loss = nn.functional.cross_entropy(net(xtr[idx]), ytr[idx])
            loss.backward()
            opt.step()
    net.eval()
    with torch.no_grad():
        xte = torch.tensor(images[test_idx, None])
        acc = (net(xte).argmax(1).numpy() == labels[test_idx]).mean()
        taps = {}
        net(xtr, taps)
    print(f"float test accuracy {acc:.4f}")

    in_qp = QParams(1.0 / 255.0, 0)
    tensors, nodes = {}, []
    prev_qp = in_qp

    def add_layer(name, kind, module, inputs, attrs=None, relu=True):
        nonlocal prev_qp
        w = module.weight.detach().numpy().astype(np.float64)
        b = module.bias.detach().numpy().astype(np.float64)
        wmax = float(np.abs(w).max())
        wq = QParams.from_range(-wmax, wmax)  # zero point lands on 128
        t = taps[name].numpy()
        oq = QParams.from_range(0.0 if relu else float(t.min()), float(t.max()))
        tensors[f"{name}.weight"] = quantize(w, wq).data
        tensors[f"{name}.bias"] = round_half_away(b / (prev_qp.scale * wq.scale)).astype(np.int32)
        nodes.append(LayerNode(name, kind, (inputs,), attrs or {}, f"{name}.weight", f"{name}.bias", wq, oq))
        prev_qp = oq

    add_layer("conv1", "Conv2D", net.conv1, "input", {"stride": 1, "padding": 1})
    nodes.append(LayerNode("relu1", "ReLU", ("conv1",)))
    nodes.append(LayerNode("pool1", "MaxPool2x2", ("relu1",)))
    add_layer("conv2", "Conv2D", net.conv2, "pool1", {"stride": 1, "padding": 1})
    nodes.append(LayerNode("relu2", "ReLU", ("conv2",)))
    nodes.append(LayerNode("pool2", "MaxPool2x2", ("relu2",)))
    nodes.append(LayerNode("flatten", "Flatten", ("pool2",)))
    add_layer("fc1", "Dense", net.fc1, "flatten")
    nodes.append(LayerNode("relu3", "ReLU", ("fc1",)))
    add_layer("fc2", "Dense", net.fc2, "relu3", relu=False)
    nodes.append(LayerNode("argmax", "ArgMax", ("fc2",)))

    model = GraphModel({n.id: n for n in nodes}, "input", (1, 8, 8), in_qp, "argmax", tensors)
    OUT.mkdir(parents=True, exist_ok=True)
    save_model(model, OUT / "lenet_digits.graph.json")
    test = Dataset(quantize(images[test_idx, None], in_qp), labels[test_idx])
    save_dataset(test, OUT / "digits_test.json")


if __name__ == "__main__":
    main()
