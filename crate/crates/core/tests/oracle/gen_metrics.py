#!/usr/bin/env python3
"""Reference classification metrics from scikit-learn.

Random label/prediction vectors with their accuracy, macro-F1 and per-class
precision/recall/F1 (zero division counted as 0), in percent.

    python3 gen_metrics.py > ../data/metrics_cases.json
"""
import json
import random

from sklearn.metrics import accuracy_score, f1_score, precision_recall_fscore_support


def main():
    rng = random.Random(7)
    cases = []
    for i in range(40):
        k = 2 + i % 5
        n = rng.randint(1, 60)
        labels = [rng.randrange(k) for _ in range(n)]
        # some cases never predict a class, some predict mostly right
        skew = i % 3
        preds = []
        for y in labels:
            if skew == 0:
                preds.append(rng.randrange(k))
            elif skew == 1:
                preds.append(y if rng.random() < 0.7 else rng.randrange(k))
            else:
                preds.append(rng.randrange(max(1, k - 1)))
        classes = list(range(k))
        p, r, f, s = precision_recall_fscore_support(
            labels, preds, labels=classes, zero_division=0
        )
        cases.append({
            "n_classes": k,
            "labels": labels,
            "predicted": preds,
            "accuracy": 100 * accuracy_score(labels, preds),
            "macro_f1": 100 * f1_score(labels, preds, labels=classes, average="macro", zero_division=0),
            "precision": [100 * v for v in p.tolist()],
            "recall": [100 * v for v in r.tolist()],
            "f1": [100 * v for v in f.tolist()],
            "support": [int(v) for v in s.tolist()],
        })
    print(json.dumps(cases, indent=1))


if __name__ == "__main__":
    main()
