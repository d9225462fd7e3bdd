"""Dataset directory format, planted-fraud synthetic generator, and
checkpoint serialization.

Dataset layout: manifest.json with metadata and sha256 checksums,
features.bin (16-byte header: magic "SGIB", u32 num_nodes, u32 feature_dim,
u32 reserved; float32 row-major payload), labels.txt (0 / 1 / ? per line),
edges_<relation>.txt ("u v" per line), optional split.txt
(train / val / test per line). Missing splits are generated stratified
40/20/40 from the manifest seed.
"""
from __future__ import annotations

import hashlib
import json
import struct
import zipfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .autodiff import ParamStore
from .graph import (
    LABEL_UNKNOWN,
    SPLIT_NAMES,
    EdgeList,
    GraphError,
    MultiRelationGraph,
    stratified_split,
)
from .trainer import TrainConfig

FEATURES_MAGIC = b"SGIB"
FORMAT_VERSION = 1
CHECKPOINT_MAGIC = "sgnnib-checkpoint"
CHECKPOINT_VERSION = 1

SPLIT_TOKENS = {0: "train", 1: "val", 2: "test"}


class DatasetError(ValueError):
    """Raised for malformed or inconsistent dataset files."""


class CheckpointError(ValueError):
    """Raised for unreadable or mismatched checkpoints."""


@dataclass
class DatasetManifest:
    """Dataset metadata mirrored from the payload files."""

    version: int
    num_nodes: int
    feature_dim: int
    relations: list[str]
    fraud_fraction: float
    seed: int = 0
    checksums: dict[str, str] = field(default_factory=dict)
    realized_homophily: dict[str, float] = field(default_factory=dict)

    def validate(self):
        if self.version != FORMAT_VERSION:
            raise DatasetError(
                f"manifest version {self.version} unsupported "
                f"(expected {FORMAT_VERSION})")
        if self.num_nodes < 1 or self.feature_dim < 1:
            raise DatasetError("num_nodes and feature_dim must be positive")
        if not self.relations:
            raise DatasetError("manifest lists no relations")
        if len(set(self.relations)) != len(self.relations):
            raise DatasetError("duplicate relation names in manifest")
        if not 0.0 <= self.fraud_fraction <= 1.0:
            raise DatasetError(
                f"fraud_fraction must be in [0, 1], got {self.fraud_fraction}")

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "num_nodes": self.num_nodes,
            "feature_dim": self.feature_dim,
            "relations": list(self.relations),
            "fraud_fraction": self.fraud_fraction,
            "seed": self.seed,
            "checksums": dict(self.checksums),
            "realized_homophily": dict(self.realized_homophily),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetManifest":
        try:
            return cls(
                version=int(d["version"]),
                num_nodes=int(d["num_nodes"]),
                feature_dim=int(d["feature_dim"]),
                relations=list(d["relations"]),
                fraud_fraction=float(d["fraud_fraction"]),
                seed=int(d.get("seed", 0)),
                checksums=dict(d.get("checksums", {})),
                realized_homophily=dict(d.get("realized_homophily", {})),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DatasetError(f"manifest.json is malformed: {exc}") from exc


@dataclass(frozen=True)
class RelationSpec:
    """Wiring rates for one synthetic relation."""

    benign_homophily: float
    fraud_heterophily: float
    mean_degree: int

    def __post_init__(self):
        for name in ("benign_homophily", "fraud_heterophily"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise DatasetError(f"{name} must be in [0, 1], got {v}")
        if self.mean_degree < 1:
            raise DatasetError(f"mean_degree must be >= 1, got {self.mean_degree}")


@dataclass
class SyntheticSpec:
    """Planted-fraud generator configuration.

    class_mean_separation is the per-dimension offset between the benign and
    fraud feature means, in units of the within-class standard deviation.
    Per relation, a node's edges connect same-class with probability
    benign_homophily (benign nodes) or 1 - fraud_heterophily (fraud nodes).
    """

    n_nodes: int = 2000
    fraud_fraction: float = 0.05
    feature_dim: int = 12
    class_mean_separation: float = 1.0
    relations: list[RelationSpec] = field(default_factory=lambda: [
        RelationSpec(0.9, 0.8, 10), RelationSpec(0.9, 0.8, 10)])
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.fraud_fraction < 1.0:
            raise DatasetError(
                f"fraud_fraction must be in (0, 1), got {self.fraud_fraction}")
        if self.n_nodes < 4:
            raise DatasetError("n_nodes must be at least 4")
        if self.feature_dim < 1:
            raise DatasetError("feature_dim must be positive")
        if not self.relations:
            raise DatasetError("at least one relation is required")
        self.relations = [r if isinstance(r, RelationSpec) else RelationSpec(**r)
                          for r in self.relations]

    def to_dict(self) -> dict:
        return {
            "n_nodes": self.n_nodes,
            "fraud_fraction": self.fraud_fraction,
            "feature_dim": self.feature_dim,
            "class_mean_separation": self.class_mean_separation,
            "relations": [
                {"benign_homophily": r.benign_homophily,
                 "fraud_heterophily": r.fraud_heterophily,
                 "mean_degree": r.mean_degree} for r in self.relations],
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticSpec":
        try:
            return cls(**d)
        except TypeError as exc:
            raise DatasetError(f"invalid synthetic spec: {exc}") from exc


def generate_synthetic(spec: SyntheticSpec
                       ) -> tuple[MultiRelationGraph, DatasetManifest]:
    """Two-Gaussian features with planted class-dependent wiring.

    Fraud count is exactly round(n_nodes * fraud_fraction). The manifest
    records the realized homophilic-edge fraction per relation.
    """
    rng = np.random.default_rng(spec.seed)
    n = spec.n_nodes
    n_fraud = int(round(n * spec.fraud_fraction))
    if n_fraud == 0 or n_fraud == n:
        raise DatasetError(
            f"fraud_fraction {spec.fraud_fraction} leaves a single class "
            f"for n_nodes {n}")
    labels = np.zeros(n, dtype=np.int8)
    labels[rng.choice(n, size=n_fraud, replace=False)] = 1
    benign_pool = np.flatnonzero(labels == 0)
    fraud_pool = np.flatnonzero(labels == 1)

    features = rng.normal(size=(n, spec.feature_dim))
    features[labels == 1] += spec.class_mean_separation

    relations = []
    realized = {}
    for k, rel in enumerate(spec.relations):
        if rel.mean_degree > min(benign_pool.size, fraud_pool.size):
            raise DatasetError(
                f"relation {k}: mean_degree {rel.mean_degree} exceeds the "
                f"smaller class size {min(benign_pool.size, fraud_pool.size)}")
        stubs = max(1, rel.mean_degree // 2)
        pairs = []
        for u in range(n):
            p_same = rel.benign_homophily if labels[u] == 0 \
                else 1.0 - rel.fraud_heterophily
            same_pool = benign_pool if labels[u] == 0 else fraud_pool
            cross_pool = fraud_pool if labels[u] == 0 else benign_pool
            for _ in range(stubs):
                pool = same_pool if rng.random() < p_same else cross_pool
                v = int(pool[rng.integers(pool.size)])
                if v != u:
                    pairs.append((u, v))
        name = f"rel{k}"
        el = EdgeList.from_pairs(np.array(pairs, dtype=np.int64))
        relations.append((name, el))
        agree = labels[el.pairs[:, 0]] == labels[el.pairs[:, 1]]
        realized[name] = float(agree.mean()) if len(el) else 0.0

    split = stratified_split(labels, seed=spec.seed)
    graph = MultiRelationGraph(
        num_nodes=n, feature_dim=spec.feature_dim, features=features,
        labels=labels, relations=relations, split=split)
    manifest = DatasetManifest(
        version=FORMAT_VERSION, num_nodes=n, feature_dim=spec.feature_dim,
        relations=[name for name, _ in relations],
        fraud_fraction=n_fraud / n, seed=spec.seed,
        realized_homophily=realized)
    return graph, manifest


def _sha256(payload: bytes) -> str:
    return hashlib.sha256(payload).hexdigest()


def _features_bytes(graph: MultiRelationGraph) -> bytes:
    header = FEATURES_MAGIC + struct.pack(
        "<III", graph.num_nodes, graph.feature_dim, 0)
    return header + graph.features.astype("<f4").tobytes(order="C")


def _parse_features(payload: bytes, path: str) -> np.ndarray:
    if len(payload) < 16 or payload[:4] != FEATURES_MAGIC:
        raise DatasetError(f"{path}: bad features header (magic mismatch)")
    n, d, _reserved = struct.unpack("<III", payload[4:16])
    expected = 16 + 4 * n * d
    if len(payload) != expected:
        raise DatasetError(
            f"{path}: payload is {len(payload)} bytes, expected {expected} "
            f"for {n}x{d} float32")
    return np.frombuffer(payload[16:], dtype="<f4").reshape(n, d).astype(np.float64)


def save_dataset(graph: MultiRelationGraph, manifest: DatasetManifest,
                 out_dir: str | Path) -> Path:
    """Write the dataset directory; checksums cover every payload file."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files: dict[str, bytes] = {"features.bin": _features_bytes(graph)}

    label_lines = ["?" if v == LABEL_UNKNOWN else str(int(v))
                   for v in graph.labels]
    files["labels.txt"] = ("\n".join(label_lines) + "\n").encode()

    for name, el in graph.relations:
        lines = [f"{u} {v}" for u, v in el.pairs]
        files[f"edges_{name}.txt"] = ("\n".join(lines) + "\n").encode()

    if graph.split is not None:
        split_lines = [SPLIT_TOKENS[int(s)] for s in graph.split]
        files["split.txt"] = ("\n".join(split_lines) + "\n").encode()

    manifest.checksums = {name: _sha256(payload)
                          for name, payload in sorted(files.items())}
    manifest.num_nodes = graph.num_nodes
    manifest.feature_dim = graph.feature_dim
    manifest.relations = graph.relation_names
    manifest.validate()

    for name, payload in files.items():
        (out / name).write_bytes(payload)
    (out / "manifest.json").write_text(
        json.dumps(manifest.to_dict(), indent=2, sort_keys=True) + "\n")
    return out


def _read_lines(path: Path) -> list[str]:
    return path.read_text().splitlines()


def load_dataset(dataset_dir: str | Path) -> tuple[MultiRelationGraph, DatasetManifest]:
    """Load and validate a dataset directory; errors name file and line."""
    root = Path(dataset_dir)
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise DatasetError(f"{manifest_path}: not found")
    try:
        manifest = DatasetManifest.from_dict(json.loads(manifest_path.read_text()))
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{manifest_path}: invalid JSON: {exc}") from exc
    manifest.validate()

    for name, want in manifest.checksums.items():
        path = root / name
        if not path.exists():
            raise DatasetError(f"{path}: listed in manifest but missing")
        got = _sha256(path.read_bytes())
        if got != want:
            raise DatasetError(
                f"{path}: checksum mismatch (manifest {want[:12]}..., "
                f"file {got[:12]}...)")

    features = _parse_features((root / "features.bin").read_bytes(),
                               str(root / "features.bin"))
    if features.shape != (manifest.num_nodes, manifest.feature_dim):
        raise DatasetError(
            f"{root / 'features.bin'}: shape {features.shape} does not match "
            f"manifest ({manifest.num_nodes}, {manifest.feature_dim})")

    labels_path = root / "labels.txt"
    labels = np.empty(manifest.num_nodes, dtype=np.int8)
    lines = _read_lines(labels_path)
    if len(lines) != manifest.num_nodes:
        raise DatasetError(
            f"{labels_path}: {len(lines)} lines, expected {manifest.num_nodes}")
    for i, line in enumerate(lines):
        tok = line.strip()
        if tok == "?":
            labels[i] = LABEL_UNKNOWN
        elif tok in ("0", "1"):
            labels[i] = int(tok)
        else:
            raise DatasetError(f"{labels_path}:{i + 1}: bad label {tok!r}")

    relations = []
    for name in manifest.relations:
        path = root / f"edges_{name}.txt"
        if not path.exists():
            raise DatasetError(f"{path}: relation file missing")
        pairs = []
        for i, line in enumerate(_read_lines(path)):
            tok = line.split()
            if not tok:
                continue
            if len(tok) != 2:
                raise DatasetError(f"{path}:{i + 1}: expected 'u v', got {line!r}")
            try:
                u, v = int(tok[0]), int(tok[1])
            except ValueError:
                raise DatasetError(f"{path}:{i + 1}: non-integer endpoint") from None
            if not (0 <= u < manifest.num_nodes and 0 <= v < manifest.num_nodes):
                raise DatasetError(
                    f"{path}:{i + 1}: edge ({u}, {v}) endpoint out of range")
            pairs.append((u, v))
        relations.append((name, EdgeList.from_pairs(np.array(pairs, dtype=np.int64)
                                                    if pairs else [])))

    split_path = root / "split.txt"
    if split_path.exists():
        lines = _read_lines(split_path)
        if len(lines) != manifest.num_nodes:
            raise DatasetError(
                f"{split_path}: {len(lines)} lines, expected {manifest.num_nodes}")
        split = np.empty(manifest.num_nodes, dtype=np.int8)
        for i, line in enumerate(lines):
            tok = line.strip()
            if tok not in SPLIT_NAMES:
                raise DatasetError(f"{split_path}:{i + 1}: bad split {tok!r}")
            split[i] = SPLIT_NAMES[tok]
    else:
        split = stratified_split(labels, seed=manifest.seed)

    try:
        graph = MultiRelationGraph(
            num_nodes=manifest.num_nodes, feature_dim=manifest.feature_dim,
            features=features, labels=labels, relations=relations, split=split)
    except GraphError as exc:
        raise DatasetError(f"{root}: {exc}") from exc
    return graph, manifest


def save_checkpoint(store: ParamStore, cfg: TrainConfig, path: str | Path) -> Path:
    """Versioned archive of parameter arrays (float64, bitwise) and config."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arrays = {f"param/{name}": t.data for name, t in store.items()}
    meta = {
        "magic": CHECKPOINT_MAGIC,
        "version": CHECKPOINT_VERSION,
        "config": cfg.to_dict(),
        "param_names": store.names(),
    }
    with open(path, "wb") as fh:
        np.savez(fh, __meta__=np.frombuffer(
            json.dumps(meta).encode(), dtype=np.uint8), **arrays)
    return path


def load_checkpoint(path: str | Path) -> tuple[dict[str, np.ndarray], TrainConfig]:
    """Restore parameter values and config; fails on version mismatch or
    truncation."""
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"{path}: not found")
    try:
        with np.load(path) as archive:
            if "__meta__" not in archive:
                raise CheckpointError(f"{path}: missing checkpoint metadata")
            meta = json.loads(archive["__meta__"].tobytes().decode())
            if meta.get("magic") != CHECKPOINT_MAGIC:
                raise CheckpointError(f"{path}: not a checkpoint file")
            if meta.get("version") != CHECKPOINT_VERSION:
                raise CheckpointError(
                    f"{path}: checkpoint version {meta.get('version')} "
                    f"unsupported (expected {CHECKPOINT_VERSION})")
            values = {}
            for name in meta["param_names"]:
                key = f"param/{name}"
                if key not in archive:
                    raise CheckpointError(f"{path}: missing parameter {name!r}")
                values[name] = archive[key]
            cfg = TrainConfig.from_dict(meta["config"])
    except (zipfile.BadZipFile, OSError, ValueError, KeyError) as exc:
        if isinstance(exc, CheckpointError):
            raise
        raise CheckpointError(f"{path}: unreadable checkpoint: {exc}") from exc
    return values, cfg
