"""Self-describing text serialization for trained models.

Format (UTF-8, line-oriented, diffable):

    adml-model 1
    kind: <linear|svm-dual|logreg|forest>
    <key>: <value>            # scalar header fields, kind-specific
    array <name> <length>
    <one value per line, %.17g>
    ...

Arrays follow the header in a fixed per-kind order. Forests flatten each
tree into parallel arrays (feature, threshold, left, right, votes_neg,
votes_pos) where child indices of -1 mark leaves.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .classifiers import ForestModel, LinearModel, LogRegModel, SvmDualModel
from .classifiers.forest import TreeNode
from .errors import IoFailure

MAGIC = "adml-model 1"


def _fmt(x):
    return format(float(x), ".17g")


def _emit_array(lines, name, values):
    values = np.asarray(values).ravel()
    lines.append(f"array {name} {values.size}")
    lines.extend(_fmt(v) for v in values)


def _flatten_tree(root: TreeNode):
    # breadth-first flatten with explicit child indices
    feature, threshold, left, right, vneg, vpos = [], [], [], [], [], []
    queue = [root]
    order = []
    while queue:
        node = queue.pop(0)
        order.append(node)
        if not node.is_leaf:
            queue.append(node.left)
            queue.append(node.right)
    index = {id(n): i for i, n in enumerate(order)}
    for n in order:
        feature.append(n.feature)
        threshold.append(n.threshold)
        left.append(index[id(n.left)] if n.left else -1)
        right.append(index[id(n.right)] if n.right else -1)
        vneg.append(n.votes_neg)
        vpos.append(n.votes_pos)
    return feature, threshold, left, right, vneg, vpos


def _rebuild_tree(feature, threshold, left, right, vneg, vpos):
    nodes = [TreeNode(feature=int(f), threshold=t,
                      votes_neg=int(n), votes_pos=int(p))
             for f, t, n, p in zip(feature, threshold, vneg, vpos)]
    for node, l, r in zip(nodes, left, right):
        if int(l) >= 0:
            node.left = nodes[int(l)]
            node.right = nodes[int(r)]
    return nodes[0]


def save_model(model, path):
    lines = [MAGIC]
    if isinstance(model, LinearModel):
        lines.append("kind: linear")
        lines.append(f"bias: {_fmt(model.bias)}")
        _emit_array(lines, "weights", model.weights)
    elif isinstance(model, SvmDualModel):
        lines.append("kind: svm-dual")
        lines.append(f"bias: {_fmt(model.bias)}")
        lines.append(f"C: {_fmt(model.C)}")
        _emit_array(lines, "alpha", model.alpha)
        _emit_array(lines, "train_labels", model.train_labels)
    elif isinstance(model, LogRegModel):
        lines.append("kind: logreg")
        lines.append(f"bias: {_fmt(model.bias)}")
        lines.append(f"C: {_fmt(model.C)}")
        _emit_array(lines, "weights", model.weights)
    elif isinstance(model, ForestModel):
        lines.append("kind: forest")
        lines.append(f"n_trees: {model.n_trees}")
        lines.append(f"n_features: {model.n_features}")
        lines.append(f"max_features: {model.max_features}")
        lines.append(f"seed: {model.seed}")
        for t, tree in enumerate(model.trees):
            for name, arr in zip(("feature", "threshold", "left", "right",
                                  "votes_neg", "votes_pos"),
                                 _flatten_tree(tree)):
                _emit_array(lines, f"tree{t}_{name}", arr)
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    try:
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as e:
        raise IoFailure(f"cannot write model {path}: {e}") from e


def load_model(path):
    text = Path(path).read_text(encoding="utf-8").splitlines()
    if not text or text[0] != MAGIC:
        raise IoFailure(f"{path}: not an adml model file")
    header = {}
    arrays = {}
    i = 1
    while i < len(text):
        line = text[i]
        if line.startswith("array "):
            _, name, length = line.split()
            length = int(length)
            vals = np.array([float(v) for v in text[i + 1:i + 1 + length]])
            arrays[name] = vals
            i += 1 + length
        else:
            key, _, value = line.partition(": ")
            header[key] = value
            i += 1
    kind = header["kind"]
    if kind == "linear":
        return LinearModel(arrays["weights"], float(header["bias"]))
    if kind == "svm-dual":
        return SvmDualModel(arrays["alpha"],
                            arrays["train_labels"].astype(np.int64),
                            float(header["bias"]), float(header["C"]))
    if kind == "logreg":
        return LogRegModel(arrays["weights"], float(header["bias"]),
                           float(header["C"]))
    if kind == "forest":
        n_trees = int(header["n_trees"])
        trees = []
        for t in range(n_trees):
            trees.append(_rebuild_tree(arrays[f"tree{t}_feature"],
                                       arrays[f"tree{t}_threshold"],
                                       arrays[f"tree{t}_left"],
                                       arrays[f"tree{t}_right"],
                                       arrays[f"tree{t}_votes_neg"],
                                       arrays[f"tree{t}_votes_pos"]))
        return ForestModel(trees, int(header["n_features"]), n_trees,
                           int(header["max_features"]), int(header["seed"]))
    raise IoFailure(f"{path}: unknown model kind {kind!r}")
