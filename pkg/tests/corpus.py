"""Deterministic random-model corpus for invariant and acceptance tests.

Models are generated from counter-derived seeds so every run sees the same
corpus.  All probabilities are rational strings "num/den" with a shared row
denominator, so the exact-mode twin of each document is bit-exact and the
float twin is the same document parsed with floats.  Tree models always have
depth >= 4 so every (n, k) pair with k <= 4 is computable; product and
Markov models have unbounded horizons.  A slice of the corpus has identical
kernels (q = p), and three-symbol models carry occasional matched zeros.
"""

from __future__ import annotations

import numpy as np

from measurepair import parse_model

CORPUS_SEED = 20240913
CORPUS_SIZE = 200


def _rng(index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=CORPUS_SEED, spawn_key=(index,)))


def _rational_vector(rng, size: int, zero_at=None) -> list[str]:
    nums = [int(rng.integers(1, 21)) for _ in range(size)]
    if zero_at is not None:
        nums[zero_at] = 0
    total = sum(nums)
    return [f"{n}/{total}" for n in nums]


def _maybe_zero(rng, size: int):
    if size >= 3 and rng.random() < 0.25:
        return int(rng.integers(0, size))
    return None


def random_tree_doc(rng, alphabet: int, depth: int, identical: bool) -> dict:
    kernels = {}

    def fill(prefix: tuple):
        if len(prefix) >= depth:
            return
        zero_at = _maybe_zero(rng, alphabet)
        p = _rational_vector(rng, alphabet, zero_at)
        q = list(p) if identical else _rational_vector(rng, alphabet, zero_at)
        key = ",".join(str(s) for s in prefix)
        kernels[key] = {"p": p, "q": q}
        for a in range(alphabet):
            if not p[a].startswith("0/"):
                fill(prefix + (a,))

    fill(())
    return {"type": "tree", "tree": {"alphabet": alphabet, "depth": depth, "kernels": kernels}}


def random_product_doc(rng, alphabet: int, coords: int, identical: bool) -> dict:
    coordinates = []
    for _ in range(coords):
        zero_at = _maybe_zero(rng, alphabet)
        p = _rational_vector(rng, alphabet, zero_at)
        q = list(p) if identical else _rational_vector(rng, alphabet, zero_at)
        coordinates.append({"p": p, "q": q})
    return {"type": "product", "product": {"coordinates": coordinates}}


def random_markov_doc(rng, states: int, identical: bool) -> dict:
    rows_p = []
    rows_q = []
    for _ in range(states):
        zero_at = _maybe_zero(rng, states)
        p = _rational_vector(rng, states, zero_at)
        q = list(p) if identical else _rational_vector(rng, states, zero_at)
        rows_p.append(p)
        rows_q.append(q)
    init_p = _rational_vector(rng, states)
    init_q = list(init_p) if identical else _rational_vector(rng, states)
    return {
        "type": "markov",
        "markov": {"states": states, "P": rows_p, "Q": rows_q, "init_p": init_p, "init_q": init_q},
    }


def corpus_doc(index: int) -> dict:
    rng = _rng(index)
    identical = index % 8 == 0
    alphabet = 2 + index % 2
    kind = index % 5
    if kind == 0:
        return random_markov_doc(rng, alphabet, identical)
    if kind == 1:
        return random_product_doc(rng, alphabet, 4 + index % 3, identical)
    depth = 4 + index % 2
    return random_tree_doc(rng, alphabet, depth, identical)


def corpus_models(count: int = CORPUS_SIZE, start: int = 0):
    """Yield (index, doc, exact model, float model) for the corpus slice."""
    for index in range(start, start + count):
        doc = corpus_doc(index)
        yield index, doc, parse_model(doc), parse_model(doc, exact=False)
