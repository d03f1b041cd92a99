"""Vertex weighting strategies and clique solvers.

Clique weight is the sum of linear-domain terminal vertex weights.  Relay
vertices sit in a strictly lower tier: a clique score is the pair
(terminal weight sum, relay vertex count), compared lexicographically, so
relay service never displaces terminal service but breaks ties in favor of
feeding the relays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bitset import iter_bits
from .graph import (Clique, CodedPacket, IdncGraph, NodeId, build_graph,
                    clique_to_coded_packet, secondary_candidates_mask)
from .model import ConfigurationError, StateFeedbackMatrix

WORLT = "worlt"
UNIT = "unit"
DELIVERY = "delivery"
POPULARITY = "popularity"
STRATEGIES = (WORLT, UNIT, DELIVERY, POPULARITY)

MWC = "mwc"
MVS = "mvs"
SOLVERS = (MWC, MVS)

# Cap for overflowing large-exponent weights; sums of capped weights stay
# finite well below float max at desk scale.
WEIGHT_CAP = 1e300

DEFAULT_MWC_BUDGET = 1_000_000


class BudgetExceeded(RuntimeError):
    """The exact solver ran out of search nodes; fall back to the greedy."""


@dataclass(frozen=True)
class Weighting:
    """Vertex weighting rule; ``worlt_n`` is the targeting sharpness exponent."""

    kind: str = WORLT
    worlt_n: int = 16

    def __post_init__(self) -> None:
        if self.kind not in STRATEGIES:
            raise ConfigurationError(f"unknown strategy {self.kind!r}")
        if self.worlt_n < 1:
            raise ConfigurationError("worlt_n must be >= 1")


@dataclass
class WeightedGraph:
    """A graph plus one nonnegative terminal-tier weight per vertex.

    Relay vertices carry weight 0 here; their priority is expressed by the
    relay-count component of the clique score.
    """

    graph: IdncGraph
    weights: list[float]

    def weight_of(self, i: int) -> float:
        return self.weights[i]

    def clique_score(self, mask: int) -> tuple[float, int]:
        t = 0.0
        for i in iter_bits(mask & ~self.graph.relay_mask):
            t += self.weights[i]
        return (t, (mask & self.graph.relay_mask).bit_count())


def _worlt_weight(wants_count: int, p: float, n: int) -> float:
    if wants_count == 0:
        return 0.0
    base = wants_count / (1.0 - p)
    try:
        w = base ** n
    except OverflowError:
        return WEIGHT_CAP
    return min(w, WEIGHT_CAP)


def assign_weights(
    g: IdncGraph,
    strategy: Weighting,
    sfm: StateFeedbackMatrix,
    sender_erasures: list[float],
) -> WeightedGraph:
    """Weight every vertex of ``g`` for the current sender.

    ``sender_erasures[i]`` is the sender -> terminal i erasure probability.
    Relay vertices always get the low-priority tier regardless of strategy.
    """
    popularity = None
    if strategy.kind == POPULARITY:
        popularity = [0] * sfm.n
        for i in range(sfm.m):
            for j in iter_bits(sfm.wants_mask(i)):
                popularity[j] += 1

    weights = []
    for idx, v in enumerate(g.vertices):
        if (g.relay_mask >> idx) & 1:
            weights.append(0.0)
            continue
        p = sender_erasures[v.row]
        if not (0.0 <= p < 1.0):
            raise ConfigurationError(
                f"sender erasure for terminal {v.row} must be in [0, 1), got {p}")
        if strategy.kind == WORLT:
            w = _worlt_weight(sfm.wants_mask(v.row).bit_count(), p, strategy.worlt_n)
        elif strategy.kind == UNIT:
            w = 1.0
        elif strategy.kind == DELIVERY:
            w = 1.0 - p
        else:  # POPULARITY
            w = float(popularity[v.packet])
        weights.append(w)
    return WeightedGraph(g, weights)


def max_weight_clique_mask(wg: WeightedGraph, cand_mask: int,
                           budget: int = DEFAULT_MWC_BUDGET) -> int:
    """Exact branch and bound over ``cand_mask``; returns the best clique mask.

    Uses a greedy-coloring upper bound on the terminal weight sum and a
    color-class count bound on the relay tier.  Raises BudgetExceeded when
    more than ``budget`` search nodes are expanded.
    """
    adj = wg.graph.adj
    w = wg.weights
    relay_mask = wg.graph.relay_mask

    best_mask = 0
    best_score = (0.0, 0)
    nodes = 0

    def expand(cand: int, cur_mask: int, cur_t: float, cur_r: int) -> None:
        nonlocal best_mask, best_score, nodes
        nodes += 1
        if nodes > budget:
            raise BudgetExceeded(f"exceeded {budget} search nodes")
        if not cand:
            return

        # Greedy coloring in descending-weight order; a clique takes at most
        # one vertex per color class.
        order = sorted(iter_bits(cand), key=lambda i: (-w[i], i))
        class_masks: list[int] = []
        class_max: list[float] = []
        class_relay: list[bool] = []
        color_of = {}
        for v in order:
            vb = 1 << v
            for c, cm in enumerate(class_masks):
                if not (adj[v] & cm):
                    class_masks[c] |= vb
                    class_relay[c] = class_relay[c] or bool(relay_mask & vb)
                    color_of[v] = c
                    break
            else:
                color_of[v] = len(class_masks)
                class_masks.append(vb)
                class_max.append(w[v])
                class_relay.append(bool(relay_mask & vb))

        # Process class-major so each vertex's prefix bound is the cumulative
        # sum of class maxima up to its class.
        seq: list[int] = []
        bound_t: list[float] = []
        bound_r: list[int] = []
        ct = 0.0
        cr = 0
        for c, cm in enumerate(class_masks):
            ct += class_max[c]
            cr += 1 if class_relay[c] else 0
            for v in iter_bits(cm):
                seq.append(v)
                bound_t.append(ct)
                bound_r.append(cr)

        remaining = cand
        for i in range(len(seq) - 1, -1, -1):
            if (cur_t + bound_t[i], cur_r + bound_r[i]) <= best_score:
                return
            v = seq[i]
            vb = 1 << v
            remaining &= ~vb
            new_mask = cur_mask | vb
            new_t = cur_t + (w[v] if not (relay_mask & vb) else 0.0)
            new_r = cur_r + (1 if relay_mask & vb else 0)
            if (new_t, new_r) > best_score:
                best_score = (new_t, new_r)
                best_mask = new_mask
            expand(remaining & adj[v], new_mask, new_t, new_r)

    expand(cand_mask, 0, 0.0, 0)
    return best_mask


# Candidate-set size above which the greedy search switches to numpy.
_NUMPY_GREEDY_THRESHOLD = 64


def _greedy_numpy(wg: WeightedGraph, cand_mask: int) -> int:
    from .graph import _unpack_mask

    g = wg.graph
    nv = len(g)
    adjb = g.bool_adjacency()
    w = np.asarray(wg.weights)
    relay = _unpack_mask(g.relay_mask, nv)
    cand = _unpack_mask(cand_mask, nv)
    idx = np.arange(nv)

    clique = 0
    while cand.any():
        wc = np.where(cand, w, 0.0)
        score = w * (adjb @ wc + w)
        score = np.where(cand, score, -1.0)
        # primary key: score desc; then terminal before relay; then identity
        v = int(np.lexsort((idx, relay, -score))[0])
        clique |= 1 << v
        cand &= adjb[v]
    return clique


def greedy_clique_mask(wg: WeightedGraph, cand_mask: int) -> int:
    """Greedy maximum vertex search.

    Repeatedly picks the candidate maximizing own weight times the weight of
    its closed neighborhood within the surviving candidates, then restricts
    to that vertex's neighbors.  Relay vertices rank below all terminals;
    remaining ties go to the smallest vertex identity.
    """
    if cand_mask.bit_count() >= _NUMPY_GREEDY_THRESHOLD:
        return _greedy_numpy(wg, cand_mask)

    adj = wg.graph.adj
    w = wg.weights
    relay_mask = wg.graph.relay_mask

    clique = 0
    cand = cand_mask
    while cand:
        best_v = -1
        best_key = None
        for v in iter_bits(cand):
            nb_sum = w[v]
            for u in iter_bits(adj[v] & cand):
                nb_sum += w[u]
            key = (w[v] * nb_sum, 0 if (relay_mask >> v) & 1 else 1)
            if best_key is None or key > best_key:
                best_key = key
                best_v = v
        clique |= 1 << best_v
        cand &= adj[best_v]
    return clique


def solve_clique_mask(wg: WeightedGraph, cand_mask: int, solver: str,
                      budget: int = DEFAULT_MWC_BUDGET) -> int:
    """Run the configured solver; the exact one falls back to greedy on budget."""
    if solver == MWC:
        try:
            return max_weight_clique_mask(wg, cand_mask, budget)
        except BudgetExceeded:
            return greedy_clique_mask(wg, cand_mask)
    if solver == MVS:
        return greedy_clique_mask(wg, cand_mask)
    raise ConfigurationError(f"unknown solver {solver!r}")


def _mask_to_clique(g: IdncGraph, mask: int) -> Clique:
    return Clique.of(g.vertices[i] for i in iter_bits(mask))


def mwc_exact(wg: WeightedGraph, budget: int = DEFAULT_MWC_BUDGET) -> Clique:
    """Exact maximum weight clique over the whole graph."""
    full = (1 << len(wg.graph)) - 1
    return _mask_to_clique(wg.graph, max_weight_clique_mask(wg, full, budget))


def mvs_greedy(wg: WeightedGraph) -> Clique:
    """Greedy maximum vertex search over the whole graph."""
    full = (1 << len(wg.graph)) - 1
    return _mask_to_clique(wg.graph, greedy_clique_mask(wg, full))


def select_transmission_masks(
    sfm: StateFeedbackMatrix,
    flavor: str,
    strategy: Weighting,
    include_relays: bool,
    sender_has: int | None,
    sender_erasures: list[float],
    solver: str = MWC,
    budget: int = DEFAULT_MWC_BUDGET,
) -> tuple[IdncGraph, WeightedGraph, int, int] | None:
    """Two-layer clique selection; returns (graph, weighted, rho, sigma) masks.

    None means the primary layer is empty and there is nothing to send.
    """
    g = build_graph(sfm, flavor, include_relays=include_relays, sender_has=sender_has)
    if not g.primary_mask:
        return None
    wg = assign_weights(g, strategy, sfm, sender_erasures)
    rho = solve_clique_mask(wg, g.primary_mask, solver, budget)
    sigma = solve_clique_mask(wg, secondary_candidates_mask(g, rho), solver, budget)
    return g, wg, rho, sigma


def select_transmission_clique(
    sfm: StateFeedbackMatrix,
    flavor: str,
    strategy: Weighting,
    sender: NodeId,
    include_relays: bool,
    sender_has: int | None,
    sender_erasures: list[float],
    solver: str = MWC,
    budget: int = DEFAULT_MWC_BUDGET,
) -> tuple[Clique, Clique, CodedPacket] | None:
    """Select the primary clique, its secondary companion, and the payload."""
    picked = select_transmission_masks(
        sfm, flavor, strategy, include_relays, sender_has, sender_erasures,
        solver, budget)
    if picked is None:
        return None
    g, _, rho, sigma = picked
    rho_clique = _mask_to_clique(g, rho)
    sigma_clique = _mask_to_clique(g, sigma)
    combined = _mask_to_clique(g, rho | sigma)
    return rho_clique, sigma_clique, clique_to_coded_packet(combined, sender)
