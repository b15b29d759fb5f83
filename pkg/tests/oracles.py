"""Slow reference implementations used as test oracles."""

import itertools
import math


def co_brute(states, y):
    """All minimum-residual assignments and the preferred one under the tie-break."""
    best, cands = math.inf, []
    for combo in itertools.product(*[range(len(s)) for s in states]):
        total = sum(s[i] for s, i in zip(states, combo))
        r = abs(y - total)
        if r < best:
            best, cands = r, [(total, combo)]
        elif r == best:
            cands.append((total, combo))
    low = min(t for t, _ in cands)
    chosen = max(c for t, c in cands if t == low)
    return best, chosen, cands


def confusion_loop(pred, truth):
    tp = fp = tn = fn = 0
    for p, t in zip(pred, truth):
        if p < 0 or t < 0:
            continue
        if p == 1 and t == 1:
            tp += 1
        elif p == 1:
            fp += 1
        elif t == 1:
            fn += 1
        else:
            tn += 1
    return tp, fp, tn, fn


def f1_loop(pred, truth):
    tp, fp, tn, fn = confusion_loop(pred, truth)
    if tp + fp == 0 or tp + fn == 0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def accuracy_loop(pred, truth):
    tp, fp, tn, fn = confusion_loop(pred, truth)
    return (tp + tn) / (tp + fp + tn + fn)


def _pairs(pred, truth):
    return [(p, t) for p, t in zip(pred, truth) if not (math.isnan(p) or math.isnan(t))]


def mae_loop(pred, truth):
    pairs = _pairs(pred, truth)
    return sum(abs(p - t) for p, t in pairs) / len(pairs)


def rmse_loop(pred, truth):
    pairs = _pairs(pred, truth)
    return math.sqrt(sum((p - t) ** 2 for p, t in pairs) / len(pairs))


def nep_loop(pred, truth):
    pairs = _pairs(pred, truth)
    return sum(abs(p - t) for p, t in pairs) / sum(t for _, t in pairs)


def nde_loop(pred, truth):
    pairs = _pairs(pred, truth)
    return math.sqrt(sum((p - t) ** 2 for p, t in pairs) / sum(t * t for _, t in pairs))
