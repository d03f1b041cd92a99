"""Shared generators and independent oracles for the test suite.

Oracles here deliberately avoid the library's own algorithms: brute-force
subset scans, set algebra on plain Python sets, and reimplemented reception
rules, so they can catch bugs in the optimized paths.
"""

from __future__ import annotations

import random

import pytest
from hypothesis import strategies as st

from idncsim.model import StateFeedbackMatrix


def random_sfm(rng: random.Random, max_m: int = 6, max_n: int = 8,
               max_r: int = 2) -> StateFeedbackMatrix:
    m = rng.randint(1, max_m)
    n = rng.randint(1, max_n)
    r = rng.randint(0, max_r)
    frame = (1 << n) - 1
    has, wants = [], []
    for _ in range(m):
        h = rng.getrandbits(n)
        w = rng.getrandbits(n) & ~h & frame
        has.append(h)
        wants.append(w)
    for _ in range(r):
        has.append(rng.getrandbits(n))
        wants.append(0)
    return StateFeedbackMatrix(m, n, r, has, wants)


@st.composite
def sfm_strategy(draw, max_m: int = 5, max_n: int = 7, max_r: int = 2):
    m = draw(st.integers(1, max_m))
    n = draw(st.integers(1, max_n))
    r = draw(st.integers(0, max_r))
    frame = (1 << n) - 1
    has, wants = [], []
    for _ in range(m):
        h = draw(st.integers(0, frame))
        w = draw(st.integers(0, frame)) & ~h & frame
        has.append(h)
        wants.append(w)
    for _ in range(r):
        has.append(draw(st.integers(0, frame)))
        wants.append(0)
    return StateFeedbackMatrix(m, n, r, has, wants)


def sfm_from_sets(n: int, terminals: list[tuple[set, set]],
                  relays: list[set] = ()) -> StateFeedbackMatrix:
    """Build an SFM from (Has set, Wants set) pairs; relays give Has sets."""
    has, wants = [], []
    for h, w in terminals:
        has.append(sum(1 << j for j in h))
        wants.append(sum(1 << j for j in w))
    for h in relays:
        has.append(sum(1 << j for j in h))
        wants.append(0)
    return StateFeedbackMatrix(len(terminals), n, len(relays), has, wants)


def brute_force_best_clique_weight(n_vertices: int, edges: set[tuple[int, int]],
                                   weights: list[float]) -> float:
    """Max clique weight by scanning every vertex subset."""
    adj = [set() for _ in range(n_vertices)]
    for a, b in edges:
        adj[a].add(b)
        adj[b].add(a)
    best = 0.0
    for subset in range(1, 1 << n_vertices):
        members = [v for v in range(n_vertices) if subset >> v & 1]
        ok = all(b in adj[a] for i, a in enumerate(members) for b in members[i + 1:])
        if ok:
            best = max(best, sum(weights[v] for v in members))
    return best


@pytest.fixture
def rng():
    return random.Random(0xC0FFEE)
