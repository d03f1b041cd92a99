"""End-to-end acceptance checks.

Each test prints a single pass/fail line naming its criterion.  The paired
completion-delay sweeps (criteria 5 and 6) run at N = 10 with
M in {4, 10, 20}: a one-third scale of the full experiment so the exact
clique solver stays tractable, with the erasure ranges, demand fraction and
iteration count unchanged.  The strategy comparison (criterion 7) runs at
full scale (N = 30, M up to 60) with the greedy solver.
"""

import itertools
import random
import time

import pytest

from conftest import brute_force_best_clique_weight, random_sfm, sfm_from_sets
from idncsim.bitset import iter_bits
from idncsim.cliques import Weighting, WeightedGraph, assign_weights, \
    greedy_clique_mask, max_weight_clique_mask
from idncsim.graph import GENERALIZED, STRICT, build_graph
from idncsim.harness import (ExperimentConfig, compare_strategies, format_csv,
                             run_iteration_detailed, run_sweep)
from idncsim.model import ErasureMatrix
from idncsim.protocol import (MULTI_RN, ONE_RN, STEP1, STEP2, NetworkState,
                              ProtocolConfig, run_step2_one_rn,
                              run_to_completion)


def report(criterion: int, ok: bool, detail: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}")
    assert ok, detail


SWEEP_KW = dict(N=10, M_sweep=(4, 10, 20), demand_fraction=0.8,
                bs_tn_range=(0.3, 0.5), bs_rn_range=(0.1, 0.2),
                rn_tn_range=(0.05, 0.15), iterations=500, base_seed=1,
                strategy="worlt", worlt_n=16)


@pytest.fixture(scope="module")
def paired_sweeps():
    """Mean delays per (topology, solver, flavor) cell under shared seeds."""
    out = {}
    for topology, solver, flavor in itertools.product(
            (ONE_RN, MULTI_RN), ("mwc", "mvs"), (GENERALIZED, STRICT)):
        cfg = ExperimentConfig(R=1 if topology == ONE_RN else 3,
                               topology=topology, solver=solver,
                               flavor=flavor, **SWEEP_KW)
        out[topology, solver, flavor] = run_sweep(cfg)
    return out


@pytest.fixture(scope="module")
def strategy_rows():
    """Full-scale three-relay strategy comparison with paired seeds."""
    cfg = ExperimentConfig(N=30, M_sweep=(10, 30, 60), R=3,
                           demand_fraction=0.8, bs_tn_range=(0.3, 0.5),
                           bs_rn_range=(0.1, 0.2), rn_tn_range=(0.05, 0.15),
                           iterations=500, base_seed=1, solver="mvs",
                           topology=MULTI_RN)
    rows = compare_strategies(cfg, ["worlt", "unit", "delivery", "popularity"])
    return {(r.strategy, r.M): r.mean_cd for r in rows}


def test_criterion_1_strict_graph_contained_in_generalized():
    rng = random.Random(101)
    start = time.monotonic()
    separations = 0
    for _ in range(1000):
        sfm = random_sfm(rng, max_m=10, max_n=12, max_r=3)
        g = build_graph(sfm, GENERALIZED, include_relays=True)
        s = build_graph(sfm, STRICT, include_relays=True)
        assert list(s.vertices) == list(g.vertices)
        assert s.edge_set() <= g.edge_set()
        if s.edge_set() < g.edge_set():
            separations += 1
    elapsed = time.monotonic() - start
    report(1, separations >= 1 and elapsed < 10.0,
           f"1000 graphs contained, {separations} strict separations, "
           f"{elapsed:.1f}s")


def test_criterion_2_exact_solver_matches_brute_force():
    rng = random.Random(202)
    start = time.monotonic()
    checked = 0
    while checked < 200:
        if checked % 2 == 0:
            nv = rng.randint(1, 15)
            edges = {(a, b) for a in range(nv) for b in range(a + 1, nv)
                     if rng.random() < rng.choice([0.2, 0.5, 0.8])}
            weights = [rng.uniform(0.1, 10.0) for _ in range(nv)]
            adj = [0] * nv
            for a, b in edges:
                adj[a] |= 1 << b
                adj[b] |= 1 << a
        else:
            sfm = random_sfm(rng, max_m=5, max_n=5, max_r=0)
            g = build_graph(sfm, GENERALIZED)
            nv = len(g)
            if nv == 0 or nv > 15:
                continue
            edges = {(g.index_of(a), g.index_of(b)) for a, b in g.edge_set()}
            wg_src = assign_weights(g, Weighting("worlt", 4), sfm,
                                    [0.2 + 0.05 * i for i in range(sfm.m)])
            weights = wg_src.weights
            adj = g.adj
        from idncsim.graph import IdncGraph, Vertex
        graph = IdncGraph(GENERALIZED, nv, 0, [Vertex(i, 0) for i in range(nv)],
                          list(adj), (1 << nv) - 1, 0)
        wg = WeightedGraph(graph, list(weights))
        full = (1 << nv) - 1
        oracle = brute_force_best_clique_weight(
            nv, {(a, b) for a, b in edges}, list(weights))
        exact = wg.clique_score(max_weight_clique_mask(wg, full))[0]
        greedy = wg.clique_score(greedy_clique_mask(wg, full))[0]
        assert exact == pytest.approx(oracle)
        assert greedy <= exact + 1e-9
        checked += 1
    elapsed = time.monotonic() - start
    report(2, elapsed < 30.0,
           f"{checked} graphs: exact = exhaustive, greedy <= exact, "
           f"{elapsed:.1f}s")


def test_criterion_3_lossless_runs_decode_instantly():
    rng = random.Random(303)
    runs = 0
    while runs < 100:
        sfm = random_sfm(rng, max_m=6, max_n=8, max_r=2)
        if sfm.r == 0 or not sfm.wants_union_mask():
            continue
        replay = sfm.copy()
        state = NetworkState(sfm, ErasureMatrix(
            [0.0] * sfm.m, [0.0] * sfm.r, [[0.0] * sfm.m] * sfm.r))
        run_to_completion(state, ProtocolConfig(topology=MULTI_RN),
                          random.Random(rng.getrandbits(32)))
        for rec in state.log:
            payload = rec.payload_mask()
            for row in iter_bits(rec.receptions):
                unknown = payload & ~replay.has_mask(row)
                wanted_before = replay.wants_mask(row)
                replay.receive(row, payload)
                if unknown.bit_count() == 1:
                    assert replay.has_mask(row) & unknown
                else:
                    # zero or several unknowns: state must not change
                    assert replay.wants_mask(row) == wanted_before
            for row in rec.targeted_primary:
                # a targeted terminal with a clear channel decodes one packet
                assert rec.receptions >> row & 1
        assert replay == state.sfm
        assert state.sfm.all_wants_empty()
        runs += 1
    report(3, True, f"{runs} lossless runs, every reception decoded at most "
                    "one packet and all targets were served")


def test_criterion_4_geometric_mean_delay():
    delays = []
    for seed in range(10_000):
        sfm = sfm_from_sets(1, [(set(), {0})], relays=[{0}])
        state = NetworkState(sfm, ErasureMatrix([0.0], [0.0], [[0.5]]))
        state.phase = STEP2
        run_step2_one_rn(state, ProtocolConfig(topology=ONE_RN),
                         random.Random(seed))
        delays.append(len(state.log))
    mean = sum(delays) / len(delays)
    report(4, 1.9 <= mean <= 2.1,
           f"half-erasure single-packet relay: mean delay {mean:.4f} "
           "(expected 2.0 +/- 5%)")


def test_criterion_5_generalized_beats_strict(paired_sweeps):
    worst_gap = None
    max_m_gap = None
    for topology, solver in itertools.product((ONE_RN, MULTI_RN),
                                              ("mwc", "mvs")):
        g_rows = paired_sweeps[topology, solver, GENERALIZED]
        s_rows = paired_sweeps[topology, solver, STRICT]
        for gr, sr in zip(g_rows, s_rows):
            gap = sr.mean_cd - gr.mean_cd
            assert gr.mean_cd <= sr.mean_cd, \
                f"{topology}/{solver}/M={gr.M}: {gr.mean_cd} > {sr.mean_cd}"
            if worst_gap is None or gap < worst_gap:
                worst_gap = gap
            if gr.M == max(SWEEP_KW["M_sweep"]):
                max_m_gap = gap if max_m_gap is None else min(max_m_gap, gap)
    report(5, max_m_gap > 0.0,
           f"generalized <= strict in all 12 cells (500 paired seeds each); "
           f"min gap at M=20: {max_m_gap:.3f}")


def test_criterion_6_three_relays_beat_one(paired_sweeps):
    one = paired_sweeps[ONE_RN, "mwc", GENERALIZED]
    three = paired_sweeps[MULTI_RN, "mwc", GENERALIZED]
    gaps = []
    for r1, r3 in zip(one, three):
        assert r3.mean_cd <= r1.mean_cd, \
            f"M={r1.M}: three relays {r3.mean_cd} > one relay {r1.mean_cd}"
        gaps.append(r1.mean_cd - r3.mean_cd)
    report(6, True, "three relays never slower than one at any M; gaps "
           + ", ".join(f"{g:.3f}" for g in gaps))


def test_criterion_7_worlt_beats_simpler_weightings(strategy_rows):
    details = []
    ok = True
    for m in (10, 30, 60):
        w = strategy_rows["worlt", m]
        for other in ("unit", "delivery", "popularity"):
            o = strategy_rows[other, m]
            if w > o:
                ok = False
            details.append(f"M={m} worlt {w:.2f} vs {other} {o:.2f}")
    report(7, ok, "; ".join(details))


def test_criterion_8_results_independent_of_workers():
    cfg = ExperimentConfig(N=6, M_sweep=(2, 4), R=2, iterations=40,
                           base_seed=11, solver="mvs")
    texts = [format_csv(run_sweep(cfg, workers=w)) for w in (1, 2, 4)]
    ok = texts[0] == texts[1] == texts[2]
    report(8, ok, "CSV byte-identical at 1, 2 and 4 workers")


def test_criterion_9_protocol_invariants_hold():
    cfg = ExperimentConfig(N=10, M_sweep=(10,), R=3, iterations=1,
                           base_seed=5, solver="mvs", topology=MULTI_RN)
    checked = 0
    for k in range(50):
        delay, log, initial, final = run_iteration_detailed(cfg, 10, k)
        assert delay < cfg.max_transmissions
        replay = initial.copy()
        prev_phase = STEP1
        for rec in log:
            if rec.phase == STEP2:
                if prev_phase == STEP1:
                    # handover condition: relays jointly cover all wants
                    wanted = replay.wants_union_mask()
                    assert wanted & ~replay.relay_has_union_mask() == 0
                h = rec.sender.index
                assert rec.payload_mask() & ~replay.has_mask(replay.m + h) == 0
            prev_phase = rec.phase
            for row in iter_bits(rec.receptions):
                replay.receive(row, rec.payload_mask())
        assert replay == final.sfm
        assert final.sfm.all_wants_empty()
        checked += 1
    report(9, True, f"{checked} replayed runs: cap never hit, relay payloads "
                    "within relay holdings, handover coverage held")
