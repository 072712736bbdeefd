"""Writes the deterministic English-like fixture corpus used by the tests."""

import random
import sys

STEMS = [
    "corrupt", "disrupt", "erupt", "interrupt", "abrupt", "construct", "instruct",
    "destruct", "obstruct", "connect", "protect", "detect", "direct", "collect",
    "select", "inspect", "respect", "reflect", "project", "inform", "perform",
    "transform", "reform", "conform", "govern", "establish", "develop", "employ",
    "measure", "treasure", "nation", "relation", "station", "motion", "emotion",
    "educate", "create", "relate", "operate", "generate", "calculate", "regulate",
    "celebrate", "compute", "compile", "decide", "divide", "provide", "include",
    "exclude", "produce", "reduce", "introduce", "predict", "restrict", "convict",
    "happy", "kind", "dark", "bright", "quick", "slow", "strong", "weak", "soft",
]
SUFFIXES = ["", "s", "ed", "ing", "ion", "ions", "ive", "ively", "or", "ors",
            "ness", "ly", "er", "est", "able", "ment", "ments"]
PREFIXES = ["", "", "", "", "re", "un", "pre", "non", "over", "under"]
FUNCTION = ["the", "a", "of", "to", "and", "in", "is", "was", "for", "on", "that",
            "with", "as", "by", "it", "at", "from", "this", "be", "are", "an", "or"]
PUNCT = [".", ",", ".", ";", "!", "?"]


def word(rng):
    if rng.random() < 0.45:
        return rng.choice(FUNCTION)
    stem = rng.choice(STEMS)
    if stem.endswith("e") and rng.random() < 0.5:
        stem = stem[:-1]
    # skewed suffix choice so that some forms dominate
    suffix = SUFFIXES[min(int(rng.expovariate(0.35)), len(SUFFIXES) - 1)]
    return rng.choice(PREFIXES) + stem + suffix


def sentence(rng):
    words = [word(rng) for _ in range(rng.randint(4, 14))]
    words[0] = words[0].capitalize()
    text = " ".join(words) + rng.choice(PUNCT)
    if rng.random() < 0.1:
        text += " " + str(rng.randint(1, 2025))
    return text


def main():
    out = sys.argv[1] if len(sys.argv) > 1 else "crates/core/tests/fixtures/corpus.txt"
    docs = int(sys.argv[2]) if len(sys.argv) > 2 else 2000
    rng = random.Random(20240901)
    with open(out, "w", encoding="ascii", newline="\n") as f:
        for _ in range(docs):
            f.write(" ".join(sentence(rng) for _ in range(rng.randint(1, 4))) + "\n")


if __name__ == "__main__":
    main()
