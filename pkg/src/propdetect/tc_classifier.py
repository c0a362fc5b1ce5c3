"""Technique classification for propaganda fragments.

A fragment is turned into a fixed-size representation, either the last
hidden state of an LSTM run over its word vectors or a sentence vector
from an embedding provider, and then classified over the 14 techniques
by a softmax layer (after a ReLU dense layer with dropout) or by a
gradient-boosted tree ensemble fitted on the frozen representation.
"""

from __future__ import annotations

import csv
import json
import pickle
from collections.abc import Mapping, Sequence
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np
import torch
from torch import nn

from . import _torch
from .corpus import Article, PropagandaSpan, TechniqueLabel, TechniqueSpan
from .embeddings import DEFAULT_SENTENCE_DIM
from .tokenization import tokenize

__all__ = [
    "ClassifierConfig",
    "ClassifierModel",
    "FragmentInstance",
    "SklearnTreeHead",
    "build_instances",
    "classify",
    "classify_many",
    "predict_tc_file",
    "softmax",
    "train_classifier",
]

N_CLASSES = len(TechniqueLabel)
BUNDLE_VERSION = 1
REPRESENTATIONS = ("recurrent_last_hidden", "provider_sentence_vector")
WORD_SOURCES = ("table", "provider")
HEADS = ("softmax", "boosted_trees")


@dataclass
class ClassifierConfig:
    representation: str = "provider_sentence_vector"
    # Word vectors for the recurrent path: a word-vector table or the
    # provider's per-token vectors.
    word_source: str = "provider"
    input_dim: int = DEFAULT_SENTENCE_DIM
    hidden_units: int = 50
    dense_units: int = 32
    dropout_rate: float = 0.2
    bidirectional: bool = False
    head: str = "softmax"
    learning_rate: float = 0.01
    epochs: int = 40
    batch_size: int = 16
    max_sequence_length: int = 128
    class_weighted: bool = False
    lowercase: bool = True
    tree_max_iter: int = 100
    tree_learning_rate: float = 0.1
    tree_min_samples_leaf: int = 5
    seed: int = 7
    n_classes: int = N_CLASSES

    def __post_init__(self):
        if self.representation not in REPRESENTATIONS:
            raise ValueError(f"representation must be one of {REPRESENTATIONS}")
        if self.word_source not in WORD_SOURCES:
            raise ValueError(f"word_source must be one of {WORD_SOURCES}")
        if self.head not in HEADS:
            raise ValueError(f"head must be one of {HEADS}")
        if self.n_classes != N_CLASSES:
            raise ValueError(f"n_classes must be {N_CLASSES}")
        if self.input_dim < 1 or self.hidden_units < 1 or self.dense_units < 1:
            raise ValueError("input_dim, hidden_units and dense_units must be >= 1")
        if not 0 <= self.dropout_rate < 1:
            raise ValueError("dropout_rate must be in [0, 1)")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 0 or self.batch_size < 1 or self.max_sequence_length < 1:
            raise ValueError("epochs >= 0, batch_size >= 1, max_sequence_length >= 1 required")

    @property
    def recurrent(self) -> bool:
        return self.representation == "recurrent_last_hidden"

    @classmethod
    def from_dict(cls, data: dict) -> ClassifierConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown classifier config keys: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class FragmentInstance:
    article_id: str
    span: PropagandaSpan
    text: str
    gold: TechniqueLabel | None = None

    def __post_init__(self):
        if len(self.text) != self.span.end - self.span.begin:
            raise ValueError("fragment text length does not match span")


def build_instances(articles: Mapping[str, Article],
                    spans: Sequence[PropagandaSpan | TechniqueSpan]
                    ) -> list[FragmentInstance]:
    """One instance per record; duplicates and order are preserved."""
    out = []
    for n, rec in enumerate(spans, start=1):
        if isinstance(rec, TechniqueSpan):
            span, gold = rec.span, rec.technique
        else:
            span, gold = rec, None
        art = articles.get(span.article_id)
        if art is None:
            raise ValueError(f"record {n}: unknown article id {span.article_id}")
        if span.end > len(art.text):
            raise ValueError(
                f"record {n}: span [{span.begin}, {span.end}) beyond length "
                f"{len(art.text)} of article {span.article_id}")
        out.append(FragmentInstance(span.article_id, span,
                                    art.text[span.begin:span.end], gold))
    return out


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - np.max(logits, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


class _ClassifierNet(nn.Module):
    def __init__(self, cfg: ClassifierConfig):
        super().__init__()
        if cfg.recurrent:
            self.lstm = nn.LSTM(cfg.input_dim, cfg.hidden_units, batch_first=True,
                                bidirectional=cfg.bidirectional)
            width = cfg.hidden_units * (2 if cfg.bidirectional else 1)
        else:
            self.lstm = None
            width = cfg.input_dim
        self.dense = nn.Linear(width, cfg.dense_units)
        self.dropout = nn.Dropout(cfg.dropout_rate)
        self.out = nn.Linear(cfg.dense_units, cfg.n_classes)

    def represent(self, x, lengths=None):
        if self.lstm is None:
            return x
        _, last = _torch.run_lstm(self.lstm, x, lengths)
        return last

    def head(self, rep):
        return self.out(self.dropout(torch.relu(self.dense(rep))))

    def forward(self, x, lengths=None):
        return self.head(self.represent(x, lengths))


class SklearnTreeHead:
    """Gradient-boosted trees over frozen fragment representations.

    Any object with ``fit(X, y)`` and ``predict_proba(X) -> (n, 14)`` can
    stand in for this class.
    """

    def __init__(self, max_iter: int = 100, learning_rate: float = 0.1,
                 min_samples_leaf: int = 5, seed: int = 0):
        from sklearn.ensemble import HistGradientBoostingClassifier

        self.model = HistGradientBoostingClassifier(
            max_iter=max_iter, learning_rate=learning_rate,
            min_samples_leaf=min_samples_leaf, early_stopping=False,
            random_state=seed)
        self.classes_: np.ndarray | None = None

    def fit(self, X: np.ndarray, y: np.ndarray) -> SklearnTreeHead:
        self.classes_ = np.unique(y)
        if len(self.classes_) == 1:
            return self
        self.model.fit(X, y)
        return self

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        out = np.zeros((len(X), N_CLASSES))
        if len(self.classes_) == 1:
            out[:, self.classes_[0]] = 1.0
            return out
        out[:, self.model.classes_] = self.model.predict_proba(X)
        return out


class ClassifierModel:
    def __init__(self, config: ClassifierConfig, net: _ClassifierNet,
                 tree_head=None, history: list[dict] | None = None,
                 vectors=None, provider=None):
        self.config = config
        self.net = net.eval()
        self.tree_head = tree_head
        self.history = history or []
        self.vectors = vectors
        self.provider = provider
        self.labels = tuple(TechniqueLabel)

    def attach(self, vectors=None, provider=None) -> ClassifierModel:
        self.vectors, self.provider = vectors, provider
        return self

    # -- features -------------------------------------------------------
    def _word_source(self):
        src = self.vectors if self.config.word_source == "table" else self.provider
        if src is None:
            raise ValueError(
                f"recurrent representation needs a {self.config.word_source} resource")
        return src

    def _inputs(self, texts: Sequence[str]):
        cfg = self.config
        if cfg.recurrent:
            src = self._word_source()
            mats = []
            for text in texts:
                toks = tokenize(text)[:cfg.max_sequence_length]
                m = src.token_vectors(toks, cfg.lowercase) if toks else np.zeros((1, cfg.input_dim))
                mats.append(_torch.to_tensor(m))
            return mats
        if self.provider is None:
            raise ValueError("sentence-vector representation needs an embedding provider")
        return _torch.to_tensor(self.provider.embed_many(texts))

    def _rows(self, inputs, idx):
        if self.config.recurrent:
            return _torch.pad([inputs[i] for i in idx])
        return inputs[idx], None

    def representations(self, texts: Sequence[str]) -> np.ndarray:
        """Frozen fragment representations (the features a tree head sees)."""
        inputs = self._inputs(texts)
        reps = []
        with torch.no_grad():
            for idx in _torch.batches(len(texts), 256, None):
                x, lengths = self._rows(inputs, idx)
                reps.append(self.net.represent(x, lengths).double().numpy())
        return np.concatenate(reps) if reps else np.empty((0, 0))

    def logits(self, texts: Sequence[str]) -> np.ndarray:
        inputs = self._inputs(texts)
        out = []
        with torch.no_grad():
            for idx in _torch.batches(len(texts), 256, None):
                x, lengths = self._rows(inputs, idx)
                out.append(self.net(x, lengths).double().numpy())
        return np.concatenate(out) if out else np.empty((0, N_CLASSES))

    def predict_proba(self, texts: Sequence[str]) -> np.ndarray:
        if not texts:
            return np.empty((0, N_CLASSES))
        if self.tree_head is not None:
            return self.tree_head.predict_proba(self.representations(texts))
        return softmax(self.logits(texts))

    # -- persistence ----------------------------------------------------
    def save(self, directory: str | Path, extra: dict | None = None) -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        torch.save(self.net.state_dict(), directory / "weights.pt")
        if self.tree_head is not None:
            with open(directory / "tree_head.pkl", "wb") as f:
                pickle.dump(self.tree_head, f)
        (directory / "config.json").write_text(
            json.dumps(asdict(self.config), indent=2) + "\n")
        (directory / "labels.json").write_text(
            json.dumps([str(lab) for lab in self.labels], indent=2) + "\n")
        with open(directory / "history.csv", "w", newline="") as f:
            w = csv.DictWriter(f, fieldnames=["epoch", "loss", "dev_f1"], extrasaction="ignore")
            w.writeheader()
            for row in self.history:
                w.writerow({k: ("" if row.get(k) is None else row[k])
                            for k in ("epoch", "loss", "dev_f1")})
        manifest = {"format_version": BUNDLE_VERSION, "kind": "tc-classifier",
                    **(extra or {})}
        (directory / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
        return directory

    @classmethod
    def load(cls, directory: str | Path, vectors=None, provider=None) -> ClassifierModel:
        directory = Path(directory)
        manifest = json.loads((directory / "manifest.json").read_text())
        if manifest.get("kind") != "tc-classifier":
            raise ValueError(f"{directory} is not a TC classifier bundle")
        if manifest.get("format_version") != BUNDLE_VERSION:
            raise ValueError(f"unsupported bundle version {manifest.get('format_version')}")
        labels = json.loads((directory / "labels.json").read_text())
        if labels != [str(lab) for lab in TechniqueLabel]:
            raise ValueError("bundle label mapping differs from the taxonomy")
        config = ClassifierConfig.from_dict(json.loads((directory / "config.json").read_text()))
        net = _ClassifierNet(config)
        net.load_state_dict(torch.load(directory / "weights.pt", weights_only=True))
        tree_head = None
        if (directory / "tree_head.pkl").exists():
            with open(directory / "tree_head.pkl", "rb") as f:
                tree_head = pickle.load(f)
        history = []
        with open(directory / "history.csv", newline="") as f:
            for r in csv.DictReader(f):
                history.append({"epoch": int(r["epoch"]), "loss": float(r["loss"]),
                                "dev_f1": float(r["dev_f1"]) if r["dev_f1"] else None})
        return cls(config, net, tree_head, history, vectors, provider)


def _check_resources(cfg: ClassifierConfig, vectors, provider) -> None:
    if cfg.recurrent and cfg.word_source == "table":
        if vectors is None:
            raise ValueError("recurrent/table representation needs a word-vector table")
        dim = vectors.dim
    else:
        if provider is None:
            raise ValueError(f"{cfg.representation} representation needs an embedding provider")
        if cfg.recurrent and not provider.supports_token_vectors():
            raise ValueError("provider does not supply per-token vectors")
        dim = provider.dim
    if dim != cfg.input_dim:
        raise ValueError(f"dimension mismatch: config.input_dim={cfg.input_dim}, resource dim={dim}")


def _needs_network_training(cfg: ClassifierConfig) -> bool:
    # A tree head on provider vectors uses them as-is.
    return cfg.head == "softmax" or cfg.recurrent


def train_classifier(instances: Sequence[FragmentInstance], config: ClassifierConfig,
                     vectors=None, provider=None,
                     dev: Sequence[FragmentInstance] | None = None) -> ClassifierModel:
    """Fit the fragment classifier.

    The network is trained with Adam and categorical cross-entropy. For
    ``head="boosted_trees"`` the trained representation is frozen and the
    trees are fitted on it; with provider sentence vectors the trees are
    fitted on the vectors directly.
    """
    cfg = config
    if not instances:
        raise ValueError("empty training set")
    for n, inst in enumerate(instances, start=1):
        if inst.gold is None:
            raise ValueError(f"instance {n} has no gold label")
        if not isinstance(inst.gold, TechniqueLabel):
            raise ValueError(f"instance {n}: gold label {inst.gold!r} not in taxonomy")
    _check_resources(cfg, vectors, provider)

    with _torch.seeded(cfg.seed):
        net = _ClassifierNet(cfg)
    model = ClassifierModel(cfg, net, vectors=vectors, provider=provider)
    texts = [inst.text for inst in instances]
    y = np.array([inst.gold.index for inst in instances])

    if _needs_network_training(cfg) and cfg.epochs > 0:
        _fit_network(model, texts, y, dev)

    if cfg.head == "boosted_trees":
        head = SklearnTreeHead(cfg.tree_max_iter, cfg.tree_learning_rate,
                               cfg.tree_min_samples_leaf, cfg.seed)
        model.tree_head = head.fit(model.representations(texts), y)
    model.net.eval()
    return model


def _fit_network(model: ClassifierModel, texts, y, dev) -> None:
    cfg = model.config
    net = model.net
    inputs = model._inputs(texts)
    targets = torch.as_tensor(y, dtype=torch.long)
    weight = None
    if cfg.class_weighted:
        counts = np.bincount(y, minlength=N_CLASSES).astype(np.float64)
        w = np.where(counts > 0, len(y) / (np.maximum(counts, 1) * np.count_nonzero(counts)), 0.0)
        weight = torch.as_tensor(w, dtype=torch.float32)
    loss_fn = nn.CrossEntropyLoss(weight=weight)
    rng = np.random.default_rng(cfg.seed)
    dev_texts = [d.text for d in dev] if dev else None
    dev_y = np.array([d.gold.index for d in dev]) if dev else None

    with _torch.seeded(cfg.seed):
        opt = torch.optim.Adam(net.parameters(), lr=cfg.learning_rate)
        for epoch in range(1, cfg.epochs + 1):
            net.train()
            total = 0.0
            for idx in _torch.batches(len(texts), cfg.batch_size, rng):
                x, lengths = model._rows(inputs, idx)
                loss = loss_fn(net(x, lengths), targets[idx])
                opt.zero_grad()
                loss.backward()
                opt.step()
                total += loss.item() * len(idx)
            net.eval()
            row = {"epoch": epoch, "loss": total / len(texts), "dev_f1": None}
            if dev_texts:
                # Single-label multiclass: micro-F1 equals accuracy.
                pred = np.argmax(model.logits(dev_texts), axis=1)
                row["dev_f1"] = float(np.mean(pred == dev_y))
            model.history.append(row)


def classify_many(model: ClassifierModel, instances: Sequence[FragmentInstance]):
    probs = model.predict_proba([inst.text for inst in instances])
    # np.argmax returns the first maximum, i.e. the lowest class index on ties.
    return [(TechniqueLabel.from_index(int(np.argmax(p))), p) for p in probs]


def classify(model: ClassifierModel, instance: FragmentInstance):
    """Return ``(label, probabilities)`` for one fragment."""
    return classify_many(model, [instance])[0]


def predict_tc_file(model: ClassifierModel, articles: Mapping[str, Article],
                    si_spans: Sequence[PropagandaSpan]) -> list[TechniqueSpan]:
    instances = build_instances(articles, si_spans)
    results = classify_many(model, instances)
    return [TechniqueSpan(inst.span, label) for inst, (label, _) in zip(instances, results)]
