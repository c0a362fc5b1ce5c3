import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from propdetect.corpus import Article, PropagandaSpan
from propdetect.metrics import score_si
from propdetect.si_tagger import (
    TaggerConfig,
    TaggerModel,
    predict_probabilities,
    predict_spans,
    spans_from_probabilities,
    token_scores,
    train_tagger,
)
from propdetect.tokenization import Token, tokenize


@pytest.fixture(scope="module")
def trained(train_split, vectors):
    return train_tagger(train_split.sequences(), vectors, TaggerConfig(seed=7))


def test_reference_defaults():
    cfg = TaggerConfig()
    assert (cfg.hidden_units, cfg.dense_units, cfg.dropout_rate) == (150, 8, 0.2)
    assert (cfg.optimizer, cfg.learning_rate) == ("adam", 0.01)
    assert cfg.decision_threshold == 0.5 and not cfg.bidirectional


@pytest.mark.parametrize("kw", [dict(hidden_units=0), dict(dropout_rate=1.0),
                                dict(decision_threshold=1.0), dict(learning_rate=0),
                                dict(optimizer="sgd")])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        TaggerConfig(**kw)


def test_dimension_mismatch(train_split, vectors):
    with pytest.raises(ValueError, match="dimension mismatch"):
        train_tagger(train_split.sequences(), vectors, TaggerConfig(embedding_dim=50))


def test_empty_training_set(vectors):
    with pytest.raises(ValueError, match="empty"):
        train_tagger([], vectors, TaggerConfig())


def test_zero_epochs(train_split, vectors):
    model = train_tagger(train_split.sequences(), vectors, TaggerConfig(epochs=0))
    assert model.history == []
    probs = predict_probabilities(model, tokenize("the council met"), vectors)
    assert len(probs) == 3 and all(0 <= p <= 1 for p in probs)


def test_overfit(trained, train_split, vectors):
    assert token_scores(trained, train_split.sequences(), vectors).f1 >= 0.95
    assert len(trained.history) == 50
    assert trained.history[-1]["loss"] < trained.history[0]["loss"]
    seq = train_split.sequences()[0]
    probs = predict_probabilities(trained, seq.tokens, vectors)
    for p, gold in zip(probs, seq.labels):
        assert (p > 0.5) == bool(gold)


def test_inference_deterministic(trained, vectors):
    toks = tokenize("Shocking thugs met on tuesday, allegedly.")
    runs = [predict_probabilities(trained, toks, vectors) for _ in range(10)]
    assert all(r == runs[0] for r in runs)
    assert predict_probabilities(trained, [], vectors) == []


def test_truncated_tokens_score_zero(train_split, vectors):
    cfg = TaggerConfig(epochs=1, max_sequence_length=3)
    model = train_tagger(train_split.sequences(), vectors, cfg)
    probs = predict_probabilities(model, tokenize("a b c d e"), vectors)
    assert probs[3:] == [0.0, 0.0]


def test_predict_spans_hand_traces():
    toks = [Token("aaa", 0, 3), Token("bbbb", 4, 8), Token("ccc", 9, 12)]
    assert spans_from_probabilities(toks[:2], [0.9, 0.8], 0.5, "1") == [PropagandaSpan("1", 0, 8)]
    assert spans_from_probabilities(toks, [0.9, 0.1, 0.95], 0.5, "1") == [
        PropagandaSpan("1", 0, 3), PropagandaSpan("1", 9, 12)]
    assert spans_from_probabilities(toks, [0.1, 0.2, 0.3], 0.5, "1") == []


@settings(max_examples=100)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=12),
       st.floats(0.01, 0.98), st.floats(0.001, 0.5))
def test_threshold_monotonicity(probs, low, delta):
    toks = [Token("x", 2 * i, 2 * i + 1) for i in range(len(probs))]
    high = min(low + delta, 0.99)
    covered = lambda spans: sum(s.end - s.begin for s in spans)  # noqa: E731
    assert covered(spans_from_probabilities(toks, probs, high)) <= \
        covered(spans_from_probabilities(toks, probs, low))


def test_predict_spans_article(trained, dev_split, vectors):
    pred = []
    for art in dev_split.articles.values():
        spans = predict_spans(trained, art, vectors)
        assert spans == sorted(spans, key=lambda s: (s.begin, s.end))
        for s in spans:
            assert "\n" not in art.text[s.begin:s.end]
        pred += spans
    assert score_si(dev_split.si, pred).f1 > 0.5


def test_predict_spans_empty_article(trained, vectors):
    assert predict_spans(trained, Article("9", ""), vectors) == []


def test_probability_range_random_inputs(trained, vectors):
    rng = np.random.default_rng(0)
    words = list(vectors.vectors) + ["unseen", "ZZZ"]
    for _ in range(20):
        text = " ".join(rng.choice(words, size=rng.integers(1, 30)))
        probs = predict_probabilities(trained, tokenize(text), vectors)
        assert all(0.0 <= p <= 1.0 for p in probs)


def test_seed_determinism(train_split, dev_split, vectors):
    cfg = TaggerConfig(epochs=5, seed=3)
    a = train_tagger(train_split.sequences(), vectors, cfg)
    b = train_tagger(train_split.sequences(), vectors, cfg)
    toks = dev_split.sequences()[0].tokens
    assert predict_probabilities(a, toks, vectors) == predict_probabilities(b, toks, vectors)
    assert a.history == b.history


def test_bidirectional_same_shapes(train_split, vectors):
    cfg = TaggerConfig(epochs=2, bidirectional=True)
    model = train_tagger(train_split.sequences(), vectors, cfg)
    toks = tokenize("vile thugs met at town hall")
    assert len(predict_probabilities(model, toks, vectors)) == len(toks)


def test_dev_history_and_best_checkpoint(train_split, dev_split, vectors):
    cfg = TaggerConfig(epochs=8, select_best_on_dev=True)
    model = train_tagger(train_split.sequences(), vectors, cfg, dev=dev_split.sequences())
    f1s = [h["dev_f1"] for h in model.history]
    assert all(0 <= f <= 1 for f in f1s)
    pred = [s for a in dev_split.articles.values() for s in predict_spans(model, a, vectors)]
    # Selected weights reproduce the best epoch.
    assert score_si(dev_split.si, pred).f1 == pytest.approx(max(f1s))


def test_provider_token_vectors(train_split, provider):
    cfg = TaggerConfig(embedding_dim=768, epochs=3)
    model = train_tagger(train_split.sequences(), provider, cfg)
    assert len(predict_probabilities(model, tokenize("vile thugs"), provider)) == 2


def test_save_load_round_trip(tmp_path, trained, vectors):
    trained.save(tmp_path / "m", {"source": "glove"})
    loaded = TaggerModel.load(tmp_path / "m")
    assert loaded.config == trained.config
    assert len(loaded.history) == 50
    toks = tokenize("Outrageous clowns met on tuesday.")
    assert predict_probabilities(loaded, toks, vectors) == predict_probabilities(trained, toks, vectors)
    assert (tmp_path / "m" / "history.csv").read_text().startswith("epoch,loss,dev_f1")


def test_load_rejects_other_bundles(tmp_path):
    (tmp_path / "manifest.json").write_text('{"kind": "tc-classifier", "format_version": 1}')
    with pytest.raises(ValueError):
        TaggerModel.load(tmp_path)
