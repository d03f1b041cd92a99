"""Fast built-in invariant checks behind the ``selftest`` CLI command."""

from __future__ import annotations

import itertools
import random

from .bitset import iter_bits
from .cliques import WeightedGraph, Weighting, mvs_greedy, mwc_exact
from .graph import GENERALIZED, STRICT, build_graph
from .harness import ExperimentConfig, format_csv, run_sweep
from .model import DemandProfile, ErasureMatrix, StateFeedbackMatrix, generate_initial_state
from .protocol import NetworkState, ProtocolConfig, run_to_completion


def _random_sfm(rng: random.Random) -> StateFeedbackMatrix:
    m = rng.randint(1, 6)
    n = rng.randint(2, 8)
    r = rng.randint(0, 2)
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


def _check_lemma_subset(rng: random.Random) -> bool:
    saw_strict_gap = False
    for _ in range(200):
        sfm = _random_sfm(rng)
        g = build_graph(sfm, GENERALIZED, include_relays=True)
        s = build_graph(sfm, STRICT, include_relays=True)
        ge, se = g.edge_set(), s.edge_set()
        if not se <= ge:
            return False
        if se < ge:
            saw_strict_gap = True
    return saw_strict_gap


def _brute_best_weight(wg: WeightedGraph) -> float:
    g = wg.graph
    best = 0.0
    idx = range(len(g))
    for k in range(1, len(g) + 1):
        for combo in itertools.combinations(idx, k):
            if all(g.is_edge(a, b) for a, b in itertools.combinations(combo, 2)):
                best = max(best, sum(wg.weights[i] for i in combo))
    return best


def _check_solver_parity(rng: random.Random) -> bool:
    for _ in range(30):
        sfm = _random_sfm(rng)
        g = build_graph(sfm, GENERALIZED, include_relays=False)
        if len(g) > 12 or len(g) == 0:
            continue
        wg = WeightedGraph(g, [rng.uniform(0.1, 5.0) for _ in range(len(g))])
        exact = mwc_exact(wg)
        exact_w = sum(wg.weights[g.index_of(v)] for v in exact.vertices)
        if abs(exact_w - _brute_best_weight(wg)) > 1e-9:
            return False
        greedy = mvs_greedy(wg)
        greedy_w = sum(wg.weights[g.index_of(v)] for v in greedy.vertices)
        if greedy_w > exact_w + 1e-9:
            return False
    return True


def _check_zero_erasure_completion(rng: random.Random) -> bool:
    for seed in range(5):
        run_rng = random.Random(seed)
        m, n, r = 4, 6, 1
        demand = DemandProfile.sample(m, n, 0.8, run_rng)
        erasures = ErasureMatrix([0.4] * m, [0.1] * r, [[0.0] * m for _ in range(r)])
        sfm = generate_initial_state(m, n, r, demand, erasures, run_rng)
        state = NetworkState(sfm, erasures)
        cfg = ProtocolConfig(topology="one-rn", flavor=GENERALIZED,
                             strategy=Weighting(), solver="mwc")
        delay, log = run_to_completion(state, cfg, run_rng)
        if not state.sfm.all_wants_empty() or delay != len(log):
            return False
    return True


def _check_determinism(rng: random.Random) -> bool:
    cfg = ExperimentConfig(N=6, M_sweep=(3,), R=2, iterations=5, base_seed=7,
                           topology="multi-rn")
    a = format_csv(run_sweep(cfg))
    b = format_csv(run_sweep(cfg))
    return a == b


CHECKS = [
    ("strict graph is a subgraph of the generalized graph", _check_lemma_subset),
    ("clique solver parity against brute force", _check_solver_parity),
    ("zero-erasure runs complete cleanly", _check_zero_erasure_completion),
    ("sweep determinism", _check_determinism),
]


def run(rng: random.Random | None = None) -> int:
    rng = rng or random.Random(0)
    failures = 0
    for name, check in CHECKS:
        ok = check(rng)
        print(f"[{'PASS' if ok else 'FAIL'}] {name}")
        failures += 0 if ok else 1
    return 1 if failures else 0
