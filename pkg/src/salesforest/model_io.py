"""Versioned text serialization for fitted forests.

Format (documented in docs/model_format.md; version lives on line 1):

    salesforest-forest 1
    params <json object>
    features <json array of column names>
    trees <count>
    tree <index> seed <tree seed> depth <depth> nodes <count>
    n <feature> <threshold> <left> <right> <value> <reduction> <n_samples>
    ...
    end

Floats are written with ``repr`` (shortest round-trip form), so a loaded
model predicts bit-identically to the saved one.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import ArtifactError, VersionError
from .forest import ForestModel, ForestParams, RegressionTree

MAGIC = "salesforest-forest"
FORMAT_VERSION = 1


def save_model(model: ForestModel, path) -> None:
    lines = [f"{MAGIC} {FORMAT_VERSION}"]
    lines.append("params " + json.dumps(model.params.to_dict(), sort_keys=True))
    lines.append("features " + json.dumps(list(model.feature_names)))
    lines.append(f"trees {len(model.trees)}")
    for t, tree in enumerate(model.trees):
        lines.append(f"tree {t} seed {tree.seed} depth {tree.depth} "
                     f"nodes {tree.n_nodes}")
        for i in range(tree.n_nodes):
            lines.append(
                f"n {int(tree.feature[i])} {repr(float(tree.threshold[i]))} "
                f"{int(tree.left[i])} {int(tree.right[i])} "
                f"{repr(float(tree.value[i]))} {repr(float(tree.reduction[i]))} "
                f"{int(tree.n_samples[i])}")
    lines.append("end")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


class _Reader:
    def __init__(self, path):
        try:
            with open(path, encoding="utf-8") as fh:
                self.lines = fh.read().splitlines()
        except OSError as exc:
            raise ArtifactError(f"cannot open model file {path}: {exc}") from None
        self.pos = 0
        self.path = path

    def next(self, what: str) -> str:
        if self.pos >= len(self.lines):
            raise ArtifactError(
                f"{self.path}: truncated model file (expected {what})")
        line = self.lines[self.pos]
        self.pos += 1
        return line


def load_model(path) -> ForestModel:
    r = _Reader(path)
    head = r.next("header").split()
    if len(head) != 2 or head[0] != MAGIC:
        raise ArtifactError(f"{path}: not a {MAGIC} file")
    if head[1] != str(FORMAT_VERSION):
        raise VersionError(head[1], str(FORMAT_VERSION))

    def tagged(tag: str) -> str:
        line = r.next(tag)
        if not line.startswith(tag + " "):
            raise ArtifactError(f"{path}: expected {tag!r} line, got {line!r}")
        return line[len(tag) + 1:]

    try:
        params = ForestParams.from_dict(json.loads(tagged("params")))
        feature_names = json.loads(tagged("features"))
        n_trees = int(tagged("trees"))
    except (json.JSONDecodeError, TypeError, ValueError) as exc:
        raise ArtifactError(f"{path}: malformed model header: {exc}") from None

    trees = []
    for t in range(n_trees):
        head = r.next(f"tree {t}").split()
        if (len(head) != 8 or head[0] != "tree" or head[2] != "seed"
                or head[4] != "depth" or head[6] != "nodes"):
            raise ArtifactError(f"{path}: malformed tree header at tree {t}")
        seed, depth, n_nodes = int(head[3]), int(head[5]), int(head[7])
        feature = np.empty(n_nodes, dtype=np.int32)
        threshold = np.empty(n_nodes, dtype=np.float64)
        left = np.empty(n_nodes, dtype=np.int32)
        right = np.empty(n_nodes, dtype=np.int32)
        value = np.empty(n_nodes, dtype=np.float64)
        reduction = np.empty(n_nodes, dtype=np.float64)
        n_samples = np.empty(n_nodes, dtype=np.int64)
        for i in range(n_nodes):
            parts = r.next(f"node {i} of tree {t}").split()
            if len(parts) != 8 or parts[0] != "n":
                raise ArtifactError(f"{path}: malformed node line in tree {t}")
            try:
                feature[i] = int(parts[1])
                threshold[i] = float(parts[2])
                left[i] = int(parts[3])
                right[i] = int(parts[4])
                value[i] = float(parts[5])
                reduction[i] = float(parts[6])
                n_samples[i] = int(parts[7])
            except ValueError as exc:
                raise ArtifactError(
                    f"{path}: malformed node value in tree {t}: {exc}") from None
        trees.append(RegressionTree(
            feature=feature, threshold=threshold, left=left, right=right,
            value=value, reduction=reduction, n_samples=n_samples,
            depth=depth, seed=seed))
    if r.next("end") != "end":
        raise ArtifactError(f"{path}: missing end marker")
    return ForestModel(trees=trees, params=params, feature_names=feature_names)


# ---------------------------------------------------------------------------
# ensemble / stack manifests (JSON next to the member model files)

def save_mean_ensemble(members, member_seeds, out_dir, name="ensemble") -> str:
    out_dir = Path(out_dir)
    files = []
    for i, model in enumerate(members):
        fname = f"{name}_member_{i}.sfm"
        save_model(model, out_dir / fname)
        files.append(fname)
    manifest = {
        "format_version": FORMAT_VERSION,
        "kind": "mean_ensemble",
        "k": len(members),
        "member_seeds": list(member_seeds),
        "members": files,
        "params": members[0].params.to_dict(),
    }
    path = out_dir / f"{name}.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return str(path)


def save_stacked(stacked, out_dir, name="stack") -> str:
    out_dir = Path(out_dir)
    files = []
    for i, model in enumerate(stacked.models):
        fname = f"{name}_base_{i}.sfm"
        save_model(model, out_dir / fname)
        files.append(fname)
    manifest = {
        "format_version": FORMAT_VERSION,
        "kind": "stacked",
        "folds": stacked.folds,
        "weights": [float(w) for w in stacked.weights],
        "intercept": float(stacked.intercept),
        "bases": files,
        "fold_months": [[int(m) for m in block] for block in stacked.fold_months],
    }
    path = out_dir / f"{name}.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return str(path)


def _load_manifest(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            manifest = json.load(fh)
    except OSError as exc:
        raise ArtifactError(f"cannot open manifest {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ArtifactError(f"{path}: invalid JSON: {exc}") from None
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise VersionError(version, FORMAT_VERSION)
    return manifest


def load_predictor(path):
    """Load whatever `train` or `stack` wrote: a single forest (.sfm), a
    mean-ensemble manifest, or a stacked-model manifest.  The result has a
    ``predict(frame) -> array`` method."""
    path = Path(path)
    if path.suffix != ".json":
        return load_model(path)
    manifest = _load_manifest(path)
    kind = manifest.get("kind")
    if kind == "mean_ensemble":
        from .ensemble import MeanEnsemble
        members = [load_model(path.parent / f) for f in manifest["members"]]
        return MeanEnsemble(members=members,
                            member_seeds=list(manifest["member_seeds"]))
    if kind == "stacked":
        from .ensemble import StackedModel
        models = [load_model(path.parent / f) for f in manifest["bases"]]
        return StackedModel(
            base_params=[m.params for m in models],
            folds=int(manifest["folds"]),
            weights=np.array(manifest["weights"], dtype=np.float64),
            intercept=float(manifest["intercept"]),
            models=models,
            fold_months=manifest.get("fold_months", []),
        )
    raise ArtifactError(f"{path}: unknown artifact kind {kind!r}")
