#!/usr/bin/env python3
"""Writes the localization replay fixture: qa.jsonl and predictions.jsonl.

Each record is (gold size, predicted size, overlap, first-hit). Gold is
{1..g}; a prediction takes `overlap` gold strokes plus extras counted up
from g+1, with a gold stroke first exactly when `hit` is set.
"""
import json
import sys
from pathlib import Path

EXACT_SIZES = [1, 2, 3, 4, 5]

HIT = [
    ((1, 3, 1), 1), ((1, 4, 1), 2), ((1, 5, 1), 2),
    ((2, 3, 2), 2), ((2, 4, 2), 3), ((2, 5, 2), 7),
    ((3, 1, 1), 8), ((3, 2, 2), 5), ((3, 4, 3), 2), ((3, 5, 3), 1),
    ((4, 2, 2), 5), ((4, 3, 2), 1), ((4, 5, 4), 3),
    ((5, 2, 2), 13), ((5, 3, 3), 3), ((5, 4, 3), 1), ((5, 4, 4), 31), ((5, 5, 1), 10),
]
MISS = [((4, 5, 1), 1), ((5, 2, 1), 1), ((5, 3, 1), 13), ((5, 5, 1), 65)]
EXACT = 427
NEG_EMPTY = 56
NEG_NONEMPTY = 5


def report(strokes):
    return "[" + ", ".join(f"stroke {i}" for i in strokes) + "]"


def main(out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records = []  # (gold, pred)
    for k in range(EXACT):
        g = EXACT_SIZES[k % len(EXACT_SIZES)]
        records.append((list(range(1, g + 1)), list(range(1, g + 1))))
    for table, hit in ((HIT, True), (MISS, False)):
        for (g, p, o), n in table:
            gold = list(range(1, g + 1))
            inside = gold[:o]
            extras = list(range(g + 1, g + 1 + p - o))
            pred = inside + extras if hit else extras + inside
            records.extend([(gold, pred)] * n)
    records.extend([([], [])] * NEG_EMPTY)
    records.extend([([], [1])] * NEG_NONEMPTY)

    with open(out / "qa.jsonl", "w") as qa, open(out / "predictions.jsonl", "w") as pr:
        for i, (gold, pred) in enumerate(records):
            qid = f"loc-{i:04d}"
            qa.write(json.dumps({
                "query_id": qid,
                "text": "When does the target stroke occur in this rally?",
                "category": "TemporalLocalization",
                "gold_answer": None,
                "gold_strokes": gold,
                "rally_ref": None,
            }) + "\n")
            pr.write(json.dumps({"query_id": qid, "prediction_text": report(pred)}) + "\n")
    print(f"{len(records)} records written to {out}")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "fixtures/localization_replay")
