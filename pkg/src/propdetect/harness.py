"""Experiment harness: data splits, model comparison tables, learning-rate sweeps."""

from __future__ import annotations

import csv
import dataclasses
import json
from collections import Counter
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

from .config import ExperimentConfig
from .corpus import Article, PropagandaSpan, TechniqueSpan, load_articles, read_si_file, read_tc_file
from .fixtures import SI_LABELS, TC_LABELS
from .metrics import score_si, score_tc
from .si_tagger import TaggerConfig, predict_spans, train_tagger
from .tc_classifier import ClassifierConfig, build_instances, predict_tc_file, train_classifier
from .tokenization import TaggedSequence, tagged_sequences

__all__ = [
    "CompareRow",
    "SI_VARIANTS",
    "Split",
    "SweepResult",
    "TC_VARIANTS",
    "compare",
    "format_table",
    "load_split",
    "lr_sweep",
    "plot_sweep",
    "run_si",
    "run_tc",
    "write_comparison",
    "write_sweep",
]

# name -> (word source, bidirectional)
SI_VARIANTS = {
    "GloVe+LSTM": ("glove", False),
    "GloVe+BiLSTM": ("glove", True),
    "provider+LSTM": ("provider", False),
    "provider+BiLSTM": ("provider", True),
}

TC_VARIANTS = {
    "provider+LSTM": dict(representation="recurrent_last_hidden", word_source="provider",
                          bidirectional=False, head="softmax"),
    "provider+BiLSTM": dict(representation="recurrent_last_hidden", word_source="provider",
                            bidirectional=True, head="softmax"),
    "provider-direct": dict(representation="provider_sentence_vector", head="softmax"),
    "provider+boosted-trees": dict(representation="provider_sentence_vector",
                                   head="boosted_trees"),
}


@dataclass
class Split:
    articles: dict[str, Article]
    si: list[PropagandaSpan]
    tc: list[TechniqueSpan]

    def sequences(self) -> list[TaggedSequence]:
        out = []
        for art in self.articles.values():
            out += tagged_sequences(art, self.si)
        return out


def load_split(directory: str | Path, si_labels: str | Path | None = None,
               tc_labels: str | Path | None = None) -> Split:
    """Load articles plus whichever label files exist.

    Label paths default to ``labels-SI.tsv`` / ``labels-TC.tsv`` inside the
    article directory.
    """
    directory = Path(directory)
    articles = load_articles(directory)
    si_path = Path(si_labels) if si_labels else directory / SI_LABELS
    tc_path = Path(tc_labels) if tc_labels else directory / TC_LABELS
    si = read_si_file(si_path, articles) if si_path.exists() else []
    tc = read_tc_file(tc_path, articles) if tc_path.exists() else []
    if si_labels and not si_path.exists():
        raise FileNotFoundError(si_path)
    if tc_labels and not tc_path.exists():
        raise FileNotFoundError(tc_path)
    return Split(articles, si, tc)


def _source(name, vectors, provider):
    if name == "glove":
        if vectors is None:
            raise ValueError("GloVe variants need a word-vector table")
        return vectors
    if provider is None:
        raise ValueError("provider variants need an embedding provider")
    if not provider.supports_token_vectors():
        raise ValueError("provider does not supply per-token vectors")
    return provider


def run_si(train: Split, dev: Split, config: TaggerConfig, source):
    """Train on ``train``, tag ``dev`` articles and score against dev gold."""
    config = dataclasses.replace(config, embedding_dim=source.dim)
    model = train_tagger(train.sequences(), source, config, dev=dev.sequences())
    pred = []
    for art in dev.articles.values():
        pred += predict_spans(model, art, source)
    return model, score_si(dev.si, pred)


def run_tc(train: Split, dev: Split, config: ClassifierConfig, vectors=None, provider=None):
    if config.representation == "recurrent_last_hidden" and config.word_source == "table":
        dim = vectors.dim
    else:
        dim = provider.dim
    config = dataclasses.replace(config, input_dim=dim)
    dev_inst = build_instances(dev.articles, dev.tc)
    model = train_classifier(build_instances(train.articles, train.tc), config,
                             vectors=vectors, provider=provider, dev=dev_inst)
    pred = predict_tc_file(model, dev.articles, [s.span for s in dev.tc])
    return model, score_tc(dev.tc, pred)


@dataclass
class CompareRow:
    variant: str
    seed: int
    f1: float
    precision: float
    recall: float


def _canonical(name: str, table: dict) -> str:
    for key in table:
        if key.lower() == name.lower():
            return key
    raise ValueError(f"unknown variant {name!r}; choose from {list(table)}")


def compare(subtask: str, variants: Sequence[str] | None, train: Split, dev: Split,
            config: ExperimentConfig, vectors=None, provider=None) -> list[CompareRow]:
    """Train and score each requested variant; repeats get successive seeds."""
    subtask = subtask.upper()
    table = {"SI": SI_VARIANTS, "TC": TC_VARIANTS}.get(subtask)
    if table is None:
        raise ValueError(f"subtask must be SI or TC, got {subtask!r}")
    names = [_canonical(v, table) for v in (variants or list(table))]
    seen: Counter = Counter()
    rows = []
    for name in names:
        if subtask == "SI":
            src_name, bidir = table[name]
            seed = config.si.seed + seen[name]
            cfg = dataclasses.replace(config.si, bidirectional=bidir, seed=seed)
            _, report = run_si(train, dev, cfg, _source(src_name, vectors, provider))
        else:
            seed = config.tc.seed + seen[name]
            cfg = dataclasses.replace(config.tc, seed=seed, **table[name])
            _, report = run_tc(train, dev, cfg, vectors, provider)
        seen[name] += 1
        rows.append(CompareRow(name, seed, report.f1, report.precision, report.recall))
    return rows


def format_table(rows: Sequence[CompareRow]) -> str:
    width = max([len("System")] + [len(r.variant) for r in rows])
    lines = [f"{'System':<{width}}  {'seed':>4}  {'F1':>6}  {'P':>6}  {'R':>6}"]
    lines.append("-" * len(lines[0]))
    for r in rows:
        lines.append(f"{r.variant:<{width}}  {r.seed:>4}  {r.f1:6.3f}  "
                     f"{r.precision:6.3f}  {r.recall:6.3f}")
    return "\n".join(lines) + "\n"


def write_comparison(rows: Sequence[CompareRow], out_dir: str | Path,
                     stem: str = "compare") -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{stem}.csv"
    with open(csv_path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["variant", "seed", "f1", "precision", "recall"])
        for r in rows:
            w.writerow([r.variant, r.seed, f"{r.f1:.6f}", f"{r.precision:.6f}",
                        f"{r.recall:.6f}"])
    txt_path = out_dir / f"{stem}.txt"
    txt_path.write_text(format_table(rows))
    return csv_path, txt_path


@dataclass
class SweepResult:
    subtask: str
    rates: list[float]
    # (rate, epoch, dev_f1)
    rows: list[tuple[float, int, float]]
    best_rate: float

    def curve(self, rate: float) -> list[float]:
        return [f1 for r, _, f1 in self.rows if r == rate]


def lr_sweep(subtask: str, rates: Sequence[float], train: Split, dev: Split,
             config: ExperimentConfig, vectors=None, provider=None) -> SweepResult:
    """Train one model per learning rate on identical data and seed.

    The best rate is the one with the highest final-epoch dev F1; ties go
    to the rate listed first.
    """
    rates = [float(r) for r in rates]
    if len(rates) < 2:
        raise ValueError("a sweep needs at least two learning rates")
    if any(r <= 0 for r in rates):
        raise ValueError("learning rates must be positive")
    subtask = subtask.upper()
    rows = []
    finals = []
    for rate in rates:
        if subtask == "SI":
            cfg = dataclasses.replace(config.si, learning_rate=rate)
            model, _ = run_si(train, dev, cfg, _source(config.si_source, vectors, provider))
        elif subtask == "TC":
            cfg = dataclasses.replace(config.tc, learning_rate=rate)
            model, _ = run_tc(train, dev, cfg, vectors, provider)
        else:
            raise ValueError(f"subtask must be SI or TC, got {subtask!r}")
        curve = [h["dev_f1"] for h in model.history]
        rows += [(rate, epoch, f1) for epoch, f1 in enumerate(curve, start=1)]
        finals.append(curve[-1] if curve else 0.0)
    best = rates[max(range(len(rates)), key=lambda i: (finals[i], -i))]
    return SweepResult(subtask, rates, rows, best)


def plot_sweep(result: SweepResult, path: str | Path) -> Path:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for rate in result.rates:
        curve = result.curve(rate)
        best = rate == result.best_rate
        label = f"lr={rate:g}" + (" (best)" if best else "")
        ax.plot(range(1, len(curve) + 1), curve, label=label,
                linewidth=2.5 if best else 1.2)
        if best and curve:
            ax.plot(len(curve), curve[-1], marker="*", markersize=14, color="black")
    ax.set_xlabel("epoch")
    ax.set_ylabel("dev F1")
    ax.set_ylim(-0.02, 1.02)
    ax.set_title(f"{result.subtask} learning-rate sweep")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return Path(path)


def write_sweep(result: SweepResult, out_dir: str | Path) -> dict[str, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "lr_sweep.csv"
    with open(csv_path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["rate", "epoch", "dev_f1", "best"])
        for rate, epoch, f1 in result.rows:
            w.writerow([f"{rate:g}", epoch, f"{f1:.6f}", int(rate == result.best_rate)])
    summary = out_dir / "lr_sweep.json"
    summary.write_text(json.dumps({
        "subtask": result.subtask,
        "rates": result.rates,
        "best_rate": result.best_rate,
        "final_dev_f1": {f"{r:g}": (result.curve(r) or [0.0])[-1] for r in result.rates},
    }, indent=2) + "\n")
    plot = plot_sweep(result, out_dir / "lr_sweep.png")
    return {"csv": csv_path, "summary": summary, "plot": plot}
