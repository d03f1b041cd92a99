"""One-relay and multi-relay recovery protocols over erasure channels.

Step 1: the base station retransmits coded packets; terminals and relays
listen.  Once every still-wanted packet is held by the relay side, Step 2
hands transmission to the relays (one fixed relay, or a per-transmission
choice among several); only terminals listen.  The run ends when every
terminal's Wants set is empty; completion delay counts these recovery
transmissions only.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .bitset import iter_bits
from .cliques import (DEFAULT_MWC_BUDGET, MWC, Weighting, select_transmission_masks)
from .model import ConfigurationError, ErasureMatrix, NodeId, StateFeedbackMatrix

STEP1 = "step1"
STEP2 = "step2"
COMPLETE = "complete"

ONE_RN = "one-rn"
MULTI_RN = "multi-rn"
TOPOLOGIES = (ONE_RN, MULTI_RN)

RN_BY_CLIQUE_WEIGHT = "clique-weight"
RN_BY_DELIVERY = "delivery"
RN_SELECTIONS = (RN_BY_CLIQUE_WEIGHT, RN_BY_DELIVERY)


class ProtocolError(RuntimeError):
    """An operation was invoked in the wrong phase."""


class ProtocolInvariantError(RuntimeError):
    """A protocol safety property was violated (indicates a bug)."""


class RunawaySimulationError(RuntimeError):
    """A run exceeded the transmission cap; should never fire for p < 1."""


@dataclass(frozen=True)
class ProtocolConfig:
    topology: str = MULTI_RN
    flavor: str = "gidnc"
    strategy: Weighting = field(default_factory=Weighting)
    solver: str = MWC
    rn_selection: str = RN_BY_CLIQUE_WEIGHT
    max_transmissions: int = 100_000
    mwc_budget: int = DEFAULT_MWC_BUDGET

    def __post_init__(self) -> None:
        if self.topology not in TOPOLOGIES:
            raise ConfigurationError(f"unknown topology {self.topology!r}")
        if self.rn_selection not in RN_SELECTIONS:
            raise ConfigurationError(f"unknown rn_selection {self.rn_selection!r}")


@dataclass
class TransmissionRecord:
    """One recovery transmission: who sent what, who got it."""

    t: int                      # 1-based recovery transmission index
    phase: str                  # step1 | step2
    sender: NodeId
    payload: tuple[int, ...]    # sorted packet ids
    targeted_primary: tuple[int, ...]  # terminal rows served by the primary clique
    listeners: int              # bitmask over SFM rows that drew an erasure
    receptions: int             # bitmask over SFM rows that received

    def payload_mask(self) -> int:
        m = 0
        for j in self.payload:
            m |= 1 << j
        return m

    def csv_row(self, run_id) -> list[str]:
        return [
            str(run_id),
            str(self.t),
            self.phase,
            str(self.sender),
            "+".join(str(j) for j in self.payload),
            "+".join(str(i) for i in self.targeted_primary),
            str(self.receptions),
        ]


CSV_LOG_HEADER = ["run_id", "t", "phase", "sender", "payload", "targets", "receptions"]


def export_log_csv(path, run_id, log: list[TransmissionRecord]) -> None:
    import csv

    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(CSV_LOG_HEADER)
        for rec in log:
            writer.writerow(rec.csv_row(run_id))


@dataclass
class NetworkState:
    sfm: StateFeedbackMatrix
    erasures: ErasureMatrix
    phase: str = STEP1
    log: list[TransmissionRecord] = field(default_factory=list)


def check_step1_termination(state: NetworkState, topology: str) -> str:
    """Next phase after a Step-1 transmission.

    Complete when nothing is wanted; Step 2 when the relay side already
    holds every still-wanted packet (the single relay alone for one-rn, the
    union of relay Has sets for multi-rn); otherwise stay in Step 1.
    """
    sfm = state.sfm
    if sfm.all_wants_empty():
        return COMPLETE
    wanted = sfm.wants_union_mask()
    if topology == ONE_RN:
        if sfm.r < 1:
            return STEP1
        relay_side = sfm.has_mask(sfm.m)
    else:
        relay_side = sfm.relay_has_union_mask()
    if wanted & ~relay_side == 0:
        return STEP2
    return STEP1


def _broadcast(state: NetworkState, sender: NodeId, payload_mask: int,
               targets: tuple[int, ...], phase: str,
               listener_probs: list[tuple[int, float]],
               rng: random.Random) -> TransmissionRecord:
    """One transmission: draw erasures in listener order, update the SFM."""
    sfm = state.sfm
    listeners = 0
    receptions = 0
    for row, p in listener_probs:
        listeners |= 1 << row
        if rng.random() < 1.0 - p:
            receptions |= 1 << row
            sfm.receive(row, payload_mask)
    rec = TransmissionRecord(
        t=len(state.log) + 1,
        phase=phase,
        sender=sender,
        payload=tuple(iter_bits(payload_mask)),
        targeted_primary=targets,
        listeners=listeners,
        receptions=receptions,
    )
    state.log.append(rec)
    return rec


def run_step1_transmission(state: NetworkState, cfg: ProtocolConfig,
                           rng: random.Random) -> TransmissionRecord:
    """One BS recovery transmission; everyone listens; phase is re-checked."""
    if state.phase != STEP1:
        raise ProtocolError(f"cannot run Step 1 in phase {state.phase!r}")
    sfm = state.sfm
    picked = select_transmission_masks(
        sfm, cfg.flavor, cfg.strategy, include_relays=True, sender_has=None,
        sender_erasures=state.erasures.p_bs_tn, solver=cfg.solver,
        budget=cfg.mwc_budget)
    if picked is None:
        raise ProtocolInvariantError("Step 1 with no primary vertices")
    g, _, rho, sigma = picked
    payload_mask = 0
    for i in iter_bits(rho | sigma):
        payload_mask |= 1 << g.vertices[i].packet
    targets = tuple(sorted(g.vertices[i].row for i in iter_bits(rho)))
    listener_probs = [(i, state.erasures.p_bs_tn[i]) for i in range(sfm.m)]
    listener_probs += [(sfm.m + h, state.erasures.p_bs_rn[h]) for h in range(sfm.r)]
    rec = _broadcast(state, NodeId.bs(), payload_mask, targets, STEP1,
                     listener_probs, rng)
    state.phase = check_step1_termination(state, cfg.topology)
    return rec


def _relay_pick(state: NetworkState, cfg: ProtocolConfig, h: int):
    """Relay h's candidate transmission, or None if it can serve nobody.

    Returns (payload_mask, targets, clique_score, delivery_score).
    """
    sfm = state.sfm
    probs = state.erasures.p_rn_tn[h]
    picked = select_transmission_masks(
        sfm, cfg.flavor, cfg.strategy, include_relays=False,
        sender_has=sfm.has_mask(sfm.m + h), sender_erasures=probs,
        solver=cfg.solver, budget=cfg.mwc_budget)
    if picked is None:
        return None
    g, wg, rho, sigma = picked
    combined = rho | sigma
    payload_mask = 0
    delivery = 0.0
    for i in iter_bits(combined):
        v = g.vertices[i]
        payload_mask |= 1 << v.packet
        delivery += 1.0 - probs[v.row]
    targets = tuple(sorted(g.vertices[i].row for i in iter_bits(rho)))
    return payload_mask, targets, wg.clique_score(combined), delivery


def _relay_transmit(state: NetworkState, cfg: ProtocolConfig, h: int,
                    payload_mask: int, targets: tuple[int, ...],
                    rng: random.Random) -> TransmissionRecord:
    sfm = state.sfm
    if payload_mask & ~sfm.has_mask(sfm.m + h):
        raise ProtocolInvariantError(f"relay {h} transmitting packets it lacks")
    if sfm.wants_union_mask() & ~sfm.relay_has_union_mask():
        raise ProtocolInvariantError("Step 2 entered with uncovered wanted packets")
    listener_probs = [(i, state.erasures.p_rn_tn[h][i]) for i in range(sfm.m)]
    rec = _broadcast(state, NodeId.relay(h), payload_mask, targets, STEP2,
                     listener_probs, rng)
    if sfm.all_wants_empty():
        state.phase = COMPLETE
    return rec


def _check_cap(state: NetworkState, cfg: ProtocolConfig) -> None:
    if len(state.log) >= cfg.max_transmissions:
        raise RunawaySimulationError(
            f"exceeded {cfg.max_transmissions} recovery transmissions")


def run_step2_one_rn(state: NetworkState, cfg: ProtocolConfig,
                     rng: random.Random) -> None:
    """The single relay transmits until every terminal is satisfied."""
    if state.phase != STEP2:
        raise ProtocolError(f"cannot run Step 2 in phase {state.phase!r}")
    if state.sfm.r != 1:
        raise ConfigurationError("one-rn Step 2 requires exactly one relay")
    while state.phase == STEP2:
        _check_cap(state, cfg)
        pick = _relay_pick(state, cfg, 0)
        if pick is None:
            raise ProtocolInvariantError("relay cannot serve any wanted packet")
        payload_mask, targets, _, _ = pick
        _relay_transmit(state, cfg, 0, payload_mask, targets, rng)


def run_step2_multi_rn(state: NetworkState, cfg: ProtocolConfig,
                       rng: random.Random) -> None:
    """Joint clique and relay selection each transmission until completion."""
    if state.phase != STEP2:
        raise ProtocolError(f"cannot run Step 2 in phase {state.phase!r}")
    sfm = state.sfm
    if sfm.r < 1:
        raise ConfigurationError("multi-rn Step 2 requires at least one relay")
    while state.phase == STEP2:
        _check_cap(state, cfg)
        best = None
        best_key = None
        for h in range(sfm.r):
            pick = _relay_pick(state, cfg, h)
            if pick is None:
                continue
            payload_mask, targets, score, delivery = pick
            key = score if cfg.rn_selection == RN_BY_CLIQUE_WEIGHT else delivery
            if best_key is None or key > best_key:  # ties: lowest relay index
                best_key = key
                best = (h, payload_mask, targets)
        if best is None:
            raise ProtocolInvariantError("no relay can serve any wanted packet")
        h, payload_mask, targets = best
        _relay_transmit(state, cfg, h, payload_mask, targets, rng)


def run_to_completion(state: NetworkState, cfg: ProtocolConfig,
                      rng: random.Random) -> tuple[int, list[TransmissionRecord]]:
    """Execute Step 1 then Step 2; returns (completion delay, log).

    The initial phase is not part of this function; completion delay counts
    recovery transmissions only.
    """
    if cfg.topology == ONE_RN and state.sfm.r != 1:
        raise ConfigurationError("one-rn topology requires R = 1")
    state.phase = check_step1_termination(state, cfg.topology)
    while state.phase == STEP1:
        _check_cap(state, cfg)
        run_step1_transmission(state, cfg, rng)
    if state.phase == STEP2:
        if cfg.topology == ONE_RN:
            run_step2_one_rn(state, cfg, rng)
        else:
            run_step2_multi_rn(state, cfg, rng)
    return len(state.log), state.log
