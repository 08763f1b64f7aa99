#!/usr/bin/env python3
"""Freezes LocalHash reference vectors and pair scores for the unit tests."""
import json
import os
import sys

sys.path.insert(0, os.path.dirname(__file__))
import local_hash_oracle as lh  # noqa: E402

TEXTS = [
    "abc",
    "Password reset email is never sent",
    "Reset password email never arrives",
    "Add dark mode toggle to settings page",
    "  Hello,   WORLD!!  ",
    "Crème brûlée ÀÉÎ costs 5€",
    "naïve café déjà vu",
    "ÆØÅ×ÞÐ straße",
    "日本語のテキスト",
    "emoji 🚀 launch 🚀 day",
    "tab\tnew\nline\r\nmix",
    "a-b_c.d/e",
    "x y　z wide spaces",
]
GIBBERISH = [
    "qzxv wplk mrtb",
    "ghoj fnae ykdu",
    "blorp snizzle quaxx",
    "vwyt xkcq jjzh",
    "ploof tarnish gwibble",
]
SUGGESTION_GIBBERISH = "Zorblax quintessence wobbulator frimframs"
FNV = ["", "a", "abc", "foobar", "ü", "日本"]


def main(out_path):
    vectors = []
    for t in TEXTS:
        v = lh.embed(t)
        vectors.append({
            "text": t,
            "normalized": lh.normalize(t),
            "buckets": {str(i): repr(x) for i, x in enumerate(v) if x != 0.0},
        })
    pairs = []
    for i in range(len(TEXTS)):
        for j in range(i + 1, len(TEXTS)):
            pairs.append({"i": i, "j": j, "score": repr(lh.cosine(lh.embed(TEXTS[i]), lh.embed(TEXTS[j])))})
    fnv = [{"text": t, "hash": str(lh.fnv1a64(t.encode("utf-8")))} for t in FNV]
    gib = [lh.embed(t) for t in GIBBERISH]
    gib_max = max(lh.cosine(gib[i], gib[j]) for i in range(len(gib)) for j in range(i + 1, len(gib)))
    with open(os.path.join(os.path.dirname(__file__), "..", "..", "fixtures", "backlog51.json"), encoding="utf-8") as f:
        backlog = json.load(f)["issues"]
    sug = lh.embed(SUGGESTION_GIBBERISH)
    sug_max = max(lh.cosine(sug, lh.embed(lh.issue_text(i["summary"], i["description"]))) for i in backlog)
    doc = {
        "dim": 256,
        "vectors": vectors,
        "pairs": pairs,
        "fnv1a64": fnv,
        "gibberish": {"texts": GIBBERISH, "max_pairwise": repr(gib_max)},
        "gibberish_suggestion": {"text": SUGGESTION_GIBBERISH, "max_against_backlog51": repr(sug_max)},
    }
    with open(out_path, "w", encoding="utf-8") as f:
        json.dump(doc, f, ensure_ascii=False, indent=1)
        f.write("\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else os.path.join(os.path.dirname(__file__), "..", "data", "local_hash_golden.json"))
