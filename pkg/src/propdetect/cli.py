"""Command-line entry point: ``propdetect <command> ...``.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from . import __version__
from .config import ConfigError, ExperimentConfig, load_config
from .corpus import LabelFormatError, load_articles, read_si_file, read_tc_file, write_predictions
from .embeddings import ENDPOINT_ENV, HashEmbeddingProvider, HttpEmbeddingProvider, load_word_vectors
from .fixtures import generate_fixture
from .harness import compare, load_split, lr_sweep, write_comparison, write_sweep
from .metrics import score_si, score_tc
from .si_tagger import TaggerModel, predict_spans, train_tagger
from .tc_classifier import ClassifierModel, build_instances, predict_tc_file, train_classifier

log = logging.getLogger("propdetect")


class UsageError(Exception):
    """Bad arguments, missing inputs or an invalid config (exit 2)."""


# -- resources ----------------------------------------------------------

def _vectors(cfg: ExperimentConfig, override: str | None):
    path = Path(override) if override else cfg.word_vectors_path()
    if path is None:
        raise UsageError("no word vectors: pass --vectors or set embeddings.word_vectors")
    if not path.exists():
        raise UsageError(f"word-vector file not found: {path}")
    return load_word_vectors(path), path.resolve()


def _provider(cfg: ExperimentConfig, mock: bool):
    import os

    emb = cfg.embeddings
    if mock:
        return HashEmbeddingProvider(emb.sentence_dim)
    return HttpEmbeddingProvider(emb.host, emb.port, emb.sentence_dim, emb.timeout,
                                 url=os.environ.get(ENDPOINT_ENV))


def _provider_meta(provider) -> dict:
    if isinstance(provider, HashEmbeddingProvider):
        return {"provider": "hash", "sentence_dim": provider.dim}
    return {"provider": "http", "sentence_dim": provider.dim, "url": provider.url}


def _split(directory, labels=None, kind="SI"):
    directory = Path(directory)
    if not directory.is_dir():
        raise UsageError(f"data directory not found: {directory}")
    if labels and not Path(labels).exists():
        raise UsageError(f"label file not found: {labels}")
    split = load_split(directory, si_labels=labels if kind == "SI" else None,
                       tc_labels=labels if kind == "TC" else None)
    if not split.articles:
        raise UsageError(f"no article*.txt files in {directory}")
    return split


def _config(path):
    if path is not None and not Path(path).exists():
        raise UsageError(f"config file not found: {path}")
    return load_config(path)


# -- commands -------------------------------------------------------------

def cmd_gen_fixture(args):
    splits = generate_fixture(args.out, seed=args.seed, train_articles=args.train_articles,
                              dev_articles=args.dev_articles,
                              sentences_per_article=args.sentences, dim=args.dim)
    for name, split in splits.items():
        print(f"{name}: {len(split.articles)} articles, {len(split.si)} spans")
    print(f"wrote fixture to {args.out}")


def cmd_train_si(args):
    cfg = _config(args.config)
    train = _split(args.train_dir, args.labels, "SI")
    dev = _split(args.dev_dir) if args.dev_dir else None
    extra = {"source": cfg.si_source}
    if cfg.si_source == "glove":
        source, path = _vectors(cfg, args.vectors)
        extra["word_vectors"] = str(path)
    else:
        source = _provider(cfg, args.mock_embeddings)
        extra.update(_provider_meta(source))
    tagger_cfg = cfg.si
    if args.epochs is not None:
        tagger_cfg = dataclasses.replace(tagger_cfg, epochs=args.epochs)
    model = train_tagger(train.sequences(), source, tagger_cfg,
                         dev=dev.sequences() if dev else None)
    model.save(args.out, extra)
    last = model.history[-1] if model.history else {}
    print(f"saved SI model to {args.out} (epochs={len(model.history)}, "
          f"loss={last.get('loss', float('nan')):.4f})")


def _si_source_for(model_dir: Path, args):
    import json

    manifest = json.loads((model_dir / "manifest.json").read_text())
    if manifest.get("source") == "provider":
        cfg = ExperimentConfig()
        cfg.embeddings.sentence_dim = manifest.get("sentence_dim", cfg.embeddings.sentence_dim)
        return _provider(cfg, args.mock_embeddings or manifest.get("provider") == "hash")
    path = args.vectors or manifest.get("word_vectors")
    if not path or not Path(path).exists():
        raise UsageError(f"word-vector file not found: {path}")
    return load_word_vectors(path)


def cmd_predict_si(args):
    model_dir = Path(args.model)
    if not (model_dir / "manifest.json").exists():
        raise UsageError(f"not a model bundle: {model_dir}")
    model = TaggerModel.load(model_dir)
    source = _si_source_for(model_dir, args)
    articles = _split(args.articles).articles
    spans = []
    for art in articles.values():
        spans += predict_spans(model, art, source)
    Path(args.out).write_text(write_predictions(spans, "SI"), encoding="utf-8")
    print(f"wrote {len(spans)} spans to {args.out}")


def _need_file(path):
    if not Path(path).exists():
        raise UsageError(f"file not found: {path}")


def cmd_score_si(args):
    _need_file(args.gold)
    _need_file(args.pred)
    report = score_si(read_si_file(args.gold), read_si_file(args.pred))
    print(f"P {report.precision:.3f}  R {report.recall:.3f}  F1 {report.f1:.3f}")


def _tc_resources(cfg: ExperimentConfig, tc_cfg, args, manifest=None):
    vectors = provider = None
    manifest = manifest or {}
    if tc_cfg.representation == "recurrent_last_hidden" and tc_cfg.word_source == "table":
        path = args.vectors or manifest.get("word_vectors")
        if path:
            if not Path(path).exists():
                raise UsageError(f"word-vector file not found: {path}")
            vectors = load_word_vectors(path)
        else:
            vectors, _ = _vectors(cfg, None)
    else:
        provider = _provider(cfg, args.mock_embeddings or manifest.get("provider") == "hash")
    return vectors, provider


def cmd_train_tc(args):
    cfg = _config(args.config)
    train = _split(args.train_dir, args.labels, "TC")
    if not train.tc:
        raise UsageError(f"no TC labels found for {args.train_dir}")
    dev = _split(args.dev_dir) if args.dev_dir else None
    tc_cfg = cfg.tc
    if args.epochs is not None:
        tc_cfg = dataclasses.replace(tc_cfg, epochs=args.epochs)
    vectors, provider = _tc_resources(cfg, tc_cfg, args)
    extra = {}
    if vectors is not None:
        extra["word_vectors"] = str(Path(args.vectors).resolve() if args.vectors
                                    else cfg.word_vectors_path())
    if provider is not None:
        extra.update(_provider_meta(provider))
    dev_inst = build_instances(dev.articles, dev.tc) if dev and dev.tc else None
    model = train_classifier(build_instances(train.articles, train.tc), tc_cfg,
                             vectors=vectors, provider=provider, dev=dev_inst)
    model.save(args.out, extra)
    print(f"saved TC model to {args.out} ({len(train.tc)} training fragments)")


def cmd_predict_tc(args):
    import json

    model_dir = Path(args.model)
    if not (model_dir / "manifest.json").exists():
        raise UsageError(f"not a model bundle: {model_dir}")
    _need_file(args.spans)
    manifest = json.loads((model_dir / "manifest.json").read_text())
    model = ClassifierModel.load(model_dir)
    cfg = ExperimentConfig()
    cfg.embeddings.sentence_dim = manifest.get("sentence_dim", model.config.input_dim)
    vectors, provider = _tc_resources(cfg, model.config, args, manifest)
    model.attach(vectors, provider)
    articles = _split(args.articles).articles
    spans = read_si_file(args.spans, articles)
    out = predict_tc_file(model, articles, spans)
    Path(args.out).write_text(write_predictions(out, "TC"), encoding="utf-8")
    print(f"wrote {len(out)} labelled spans to {args.out}")


def cmd_score_tc(args):
    _need_file(args.gold)
    _need_file(args.pred)
    report = score_tc(read_tc_file(args.gold), read_tc_file(args.pred))
    print(f"micro P {report.precision:.3f}  R {report.recall:.3f}  F1 {report.f1:.3f}  "
          f"accuracy {report.accuracy:.3f}  macro-F1 {report.macro_f1:.3f}")


def _experiment_inputs(args):
    data = Path(args.data)
    cfg = _config(args.config or (data / "config.json" if (data / "config.json").exists() else None))
    train = _split(data / "train")
    dev = _split(data / "dev")
    vectors = None
    path = args.vectors or cfg.word_vectors_path()
    if path is None and (data / "vectors.txt").exists():
        path = data / "vectors.txt"
    if path is not None:
        if not Path(path).exists():
            raise UsageError(f"word-vector file not found: {path}")
        vectors = load_word_vectors(path)
    provider = _provider(cfg, args.mock_embeddings)
    if args.epochs is not None:
        cfg.si = dataclasses.replace(cfg.si, epochs=args.epochs)
        cfg.tc = dataclasses.replace(cfg.tc, epochs=args.epochs)
    return cfg, train, dev, vectors, provider


def cmd_compare(args):
    cfg, train, dev, vectors, provider = _experiment_inputs(args)
    try:
        rows = compare(args.subtask, args.variants, train, dev, cfg, vectors, provider)
    except ValueError as exc:
        if "unknown variant" in str(exc):
            raise UsageError(str(exc)) from exc
        raise
    csv_path, txt_path = write_comparison(rows, args.out, f"compare_{args.subtask.upper()}")
    print(txt_path.read_text(), end="")
    print(f"wrote {csv_path} and {txt_path}")


def cmd_lr_sweep(args):
    if len(args.rates) < 2:
        raise UsageError("lr-sweep needs at least two --rates")
    if any(r <= 0 for r in args.rates):
        raise UsageError("learning rates must be positive")
    cfg, train, dev, vectors, provider = _experiment_inputs(args)
    result = lr_sweep(args.subtask, args.rates, train, dev, cfg, vectors, provider)
    paths = write_sweep(result, args.out)
    for rate in result.rates:
        mark = "  <- best" if rate == result.best_rate else ""
        print(f"lr={rate:g}  final dev F1 {result.curve(rate)[-1]:.3f}{mark}")
    print(f"wrote {paths['csv']} and {paths['plot']}")


# -- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="propdetect",
                                description="Propaganda span identification and technique classification.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_)
        sp.set_defaults(func=func)
        return sp

    def embeddings_opts(sp):
        sp.add_argument("--vectors", help="word-vector file (overrides config)")
        sp.add_argument("--mock-embeddings", action="store_true",
                        help="use the deterministic hash provider instead of the service")

    sp = add("gen-fixture", cmd_gen_fixture, "write a synthetic train/dev corpus")
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int, default=13)
    sp.add_argument("--train-articles", type=int, default=6)
    sp.add_argument("--dev-articles", type=int, default=3)
    sp.add_argument("--sentences", type=int, default=5, help="sentences per article")
    sp.add_argument("--dim", type=int, default=100, help="word-vector dimension")

    for task, train_fn in (("si", cmd_train_si), ("tc", cmd_train_tc)):
        sp = add(f"train-{task}", train_fn, f"train a {task.upper()} model")
        sp.add_argument("--config")
        sp.add_argument("--train-dir", required=True)
        sp.add_argument("--labels", help=f"label file (default: labels-{task.upper()}.tsv in train dir)")
        sp.add_argument("--dev-dir")
        sp.add_argument("--out", required=True)
        sp.add_argument("--epochs", type=int)
        embeddings_opts(sp)

    sp = add("predict-si", cmd_predict_si, "tag articles with propaganda spans")
    sp.add_argument("--model", required=True)
    sp.add_argument("--articles", required=True)
    sp.add_argument("--out", required=True)
    embeddings_opts(sp)

    sp = add("predict-tc", cmd_predict_tc, "classify spans into techniques")
    sp.add_argument("--model", required=True)
    sp.add_argument("--articles", required=True)
    sp.add_argument("--spans", required=True, help="SI-format span file")
    sp.add_argument("--out", required=True)
    embeddings_opts(sp)

    for task, fn in (("si", cmd_score_si), ("tc", cmd_score_tc)):
        sp = add(f"score-{task}", fn, f"score {task.upper()} predictions")
        sp.add_argument("--gold", required=True)
        sp.add_argument("--pred", required=True)

    def experiment_opts(sp):
        sp.add_argument("--subtask", required=True, type=str.upper, choices=["SI", "TC"])
        sp.add_argument("--data", required=True, help="fixture root with train/ and dev/")
        sp.add_argument("--config")
        sp.add_argument("--out", required=True)
        sp.add_argument("--epochs", type=int)
        embeddings_opts(sp)

    sp = add("compare", cmd_compare, "train and score several model variants")
    experiment_opts(sp)
    sp.add_argument("--variants", nargs="+", help="variant names (default: all)")

    sp = add("lr-sweep", cmd_lr_sweep, "learning-rate sweep with dev-F1 curves")
    experiment_opts(sp)
    sp.add_argument("--rates", nargs="+", type=float, default=[0.1, 0.01, 0.001])
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (UsageError, ConfigError, LabelFormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        log.debug("command failed", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
