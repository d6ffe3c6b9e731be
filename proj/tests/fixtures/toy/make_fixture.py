#!/usr/bin/env python3
"""Generates the 200-item sentiment replay fixture (dataset.jsonl, replay.jsonl).

Run from this directory. Output is deterministic."""
import json
import random

rng = random.Random(20240101)

LABELS = ["positive", "negative", "neutral"]
PRIOR = [0.5, 0.3, 0.2]
SUBJECTS = ["earrings", "headlights", "dog bed", "kettle", "hotel room", "watch strap",
            "cat food", "toaster", "fog lamp", "handbag"]
OPENERS = {
    "positive": ["I love the {s} I bought", "Great {s}, arrived fast", "Really happy with this {s}"],
    "negative": ["The {s} broke after a week", "Terrible {s}, asked for a refund", "Never again, the {s} was awful"],
    "neutral": ["The {s} is okay I guess", "Got the {s}, nothing special", "Average {s} for the price"],
}

# Surface forms an LLM might produce for each label.
FORMS = {
    "positive": ["positive", "Positive.", "The sentiment is positive", "\"positive\"", "POSITIVE"],
    "negative": ["negative", "Negative", "The sentiment of this review is negative.", "'negative'"],
    "neutral": ["neutral", "Neutral.", "I would say neutral", "neutral!"],
}
OOL = ["I cannot tell", "mixed", "", "The review is about a product.", "positively surprising?"]

ANNOTATORS = [("model_a", 0.85, 0.04), ("model_b", 0.72, 0.06),
              ("model_c", 0.55, 0.12), ("model_d", 0.40, 0.20)]
MISSING = {"model_d": {"17", "58", "123", "199"}}


def main():
    items = []
    for i in range(200):
        gold = rng.choices(LABELS, PRIOR)[0]
        text = rng.choice(OPENERS[gold]).format(s=rng.choice(SUBJECTS))
        items.append({"id": str(i), "text": text, "gold": gold})
    with open("dataset.jsonl", "w") as f:
        for it in items:
            f.write(json.dumps(it) + "\n")

    with open("replay.jsonl", "w") as f:
        for name, acc, ool in ANNOTATORS:
            for it in items:
                if it["id"] in MISSING.get(name, ()):
                    continue
                if rng.random() < ool:
                    resp = rng.choice(OOL)
                else:
                    label = it["gold"] if rng.random() < acc else rng.choice(LABELS)
                    resp = rng.choice(FORMS[label])
                f.write(json.dumps({"annotator_id": name, "item_id": it["id"], "response": resp}) + "\n")


if __name__ == "__main__":
    main()
