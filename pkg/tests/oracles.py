"""Brute-force reference computations used by the tests.

Each works character by character or from a full confusion matrix, with
exact fractions, independent of the interval arithmetic in the package.
"""

from fractions import Fraction

from propdetect.corpus import PropagandaSpan, TechniqueLabel


def prf(tp, fp, fn):
    p = Fraction(tp, tp + fp) if tp + fp else Fraction(0)
    r = Fraction(tp, tp + fn) if tp + fn else Fraction(0)
    f = 2 * p * r / (p + r) if p + r else Fraction(0)
    return float(p), float(r), float(f)


def project(tokens, spans, n):
    marked = [False] * n
    for s in spans:
        for c in range(s.begin, s.end):
            marked[c] = True
    return [int(any(marked[t.start:t.end])) for t in tokens]


def decode(tokens, labels, n, article_id="1"):
    fill = [False] * n
    for i, (t, lab) in enumerate(zip(tokens, labels)):
        if lab:
            for c in range(t.start, t.end):
                fill[c] = True
            if i + 1 < len(tokens) and labels[i + 1]:
                for c in range(t.end, tokens[i + 1].start):
                    fill[c] = True
    out, start = [], None
    for c in range(n + 1):
        on = c < n and fill[c]
        if on and start is None:
            start = c
        elif not on and start is not None:
            out.append(PropagandaSpan(article_id, start, c))
            start = None
    return out


def score_si(gold, pred):
    gc = {(s.article_id, c) for s in gold for c in range(s.begin, s.end)}
    pc = {(s.article_id, c) for s in pred for c in range(s.begin, s.end)}
    return prf(len(gc & pc), len(pc - gc), len(gc - pc))


def score_tc(gold_labels, pred_labels):
    """Accuracy, micro (P, R, F1), macro-F1 over gold classes, per-class counts."""
    labels = list(TechniqueLabel)
    matrix = {(g, p): 0 for g in labels for p in labels}
    for g, p in zip(gold_labels, pred_labels):
        matrix[(g, p)] += 1
    per = {}
    for c in labels:
        tp = matrix[(c, c)]
        fp = sum(matrix[(g, c)] for g in labels if g != c)
        fn = sum(matrix[(c, p)] for p in labels if p != c)
        per[c] = (tp, fp, fn)
    tps = sum(v[0] for v in per.values())
    acc = tps / len(gold_labels) if gold_labels else 0.0
    present = [c for c in labels if per[c][0] + per[c][2] > 0]
    macro = (sum(prf(*per[c])[2] for c in present) / len(present)) if present else 0.0
    micro = prf(tps, sum(v[1] for v in per.values()), sum(v[2] for v in per.values()))
    return acc, micro, macro, per
