"""Exact event probabilities by enumerating every state of the edges an event reads."""

from fractions import Fraction

import numpy as np

MAX_EDGES = 24


def _popcount(x):
    x = x.astype(np.uint64)
    count = np.zeros(x.shape, dtype=np.int64)
    while np.any(x):
        count += (x & np.uint64(1)).astype(np.int64)
        x >>= np.uint64(1)
    return count


def success_counts(event, chunk=1 << 16):
    """``c[j]`` = number of configurations with j open edges in which the event occurs."""
    E = len(event.needed)
    if E > MAX_EDGES:
        raise ValueError(f"event reads {E} edges; enumeration is limited to {MAX_EDGES}")
    counts = np.zeros(E + 1, dtype=np.int64)
    bits = np.uint64(1) << np.arange(E, dtype=np.uint64)
    total = 1 << E
    for start in range(0, total, chunk):
        codes = np.arange(start, min(total, start + chunk), dtype=np.uint64)
        states = (codes[:, None] & bits[None, :]) != 0
        hit = event.evaluate(states)
        np.add.at(counts, _popcount(codes[hit]), 1)
    return counts


def probability(counts, p):
    """Evaluate ``sum_j c_j p^j (1-p)^(E-j)``; exact when ``p`` is a Fraction."""
    E = len(counts) - 1
    if isinstance(p, Fraction):
        return sum((Fraction(int(c)) * p ** j * (1 - p) ** (E - j) for j, c in enumerate(counts)), Fraction(0))
    p = float(p)
    j = np.arange(E + 1)
    return float(np.sum(counts * p ** j * (1 - p) ** (E - j)))


def exact_probability(event, p):
    return probability(success_counts(event), p)
