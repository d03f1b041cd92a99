"""Network population, packet demand, feedback state and erasure channels.

A network is one base station (BS), M terminal nodes (TNs) and R
decode-and-forward relay nodes (RNs).  A frame of N source packets is
broadcast once in the initial phase; the feedback state after that phase
drives everything else.

All packet sets are stored as int bitmasks (bit j = packet j).
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .bitset import iter_bits, to_set


class ConfigurationError(ValueError):
    """Raised for invalid probabilities, counts or demand settings."""


@dataclass(frozen=True)
class NodeId:
    """Identity of a network node: the BS, a relay, or a terminal."""

    role: str  # "bs" | "relay" | "terminal"
    index: int = 0

    def __str__(self) -> str:
        if self.role == "bs":
            return "BS"
        if self.role == "relay":
            return f"RN{self.index}"
        return f"TN{self.index}"

    @staticmethod
    def bs() -> "NodeId":
        return NodeId("bs", 0)

    @staticmethod
    def relay(h: int) -> "NodeId":
        return NodeId("relay", h)

    @staticmethod
    def terminal(i: int) -> "NodeId":
        return NodeId("terminal", i)


def _check_prob(p: float, what: str) -> float:
    if not (0.0 <= p < 1.0):
        raise ConfigurationError(f"{what} must be in [0, 1), got {p}")
    return p


@dataclass
class ErasureMatrix:
    """Per-directed-link Bernoulli erasure probabilities.

    ``p_bs_tn[i]`` is BS -> terminal i, ``p_bs_rn[h]`` is BS -> relay h and
    ``p_rn_tn[h][i]`` is relay h -> terminal i.  All values must be < 1 or
    completion may never occur.
    """

    p_bs_tn: list[float]
    p_bs_rn: list[float]
    p_rn_tn: list[list[float]]

    def __post_init__(self) -> None:
        for i, p in enumerate(self.p_bs_tn):
            _check_prob(p, f"p_bs_tn[{i}]")
        for h, p in enumerate(self.p_bs_rn):
            _check_prob(p, f"p_bs_rn[{h}]")
        if len(self.p_rn_tn) != len(self.p_bs_rn):
            raise ConfigurationError("p_rn_tn must have one row per relay")
        for h, row in enumerate(self.p_rn_tn):
            if len(row) != len(self.p_bs_tn):
                raise ConfigurationError("p_rn_tn rows must have one entry per terminal")
            for i, p in enumerate(row):
                _check_prob(p, f"p_rn_tn[{h}][{i}]")


@dataclass
class DemandProfile:
    """Which packets each terminal actually wants.

    ``wanted[i]`` is a bitmask over the frame.  ``demand_fraction`` is kept
    for reporting; the sets themselves are the contract.
    """

    demand_fraction: float
    wanted: list[int]  # per-terminal bitmask

    def __post_init__(self) -> None:
        if not (0.0 < self.demand_fraction <= 1.0):
            raise ConfigurationError(
                f"demand_fraction must be in (0, 1], got {self.demand_fraction}"
            )

    @staticmethod
    def sample(m: int, n: int, fraction: float, rng: random.Random) -> "DemandProfile":
        """Independent Bernoulli(fraction) membership per (terminal, packet)."""
        if not (0.0 < fraction <= 1.0):
            raise ConfigurationError(f"demand_fraction must be in (0, 1], got {fraction}")
        wanted = []
        for _ in range(m):
            w = 0
            for j in range(n):
                if rng.random() < fraction:
                    w |= 1 << j
            wanted.append(w)
        return DemandProfile(fraction, wanted)


class StateFeedbackMatrix:
    """Per receiving node packet status: Has / Wants / Lacks-unwanted.

    Rows 0..M-1 are terminals, rows M..M+R-1 are relays.  Relay rows never
    contain Wants cells.  For every row, Has and Lacks partition the frame
    and Wants is a subset of Lacks.
    """

    __slots__ = ("m", "n", "r", "has", "wants")

    def __init__(self, m: int, n: int, r: int, has: list[int], wants: list[int]):
        self.m = m
        self.n = n
        self.r = r
        self.has = list(has)
        self.wants = list(wants)
        self._validate()

    def _validate(self) -> None:
        if len(self.has) != self.m + self.r or len(self.wants) != self.m + self.r:
            raise ValueError("SFM needs M + R rows")
        frame = self.frame_mask
        for row in range(self.m + self.r):
            if self.has[row] & ~frame or self.wants[row] & ~frame:
                raise ValueError(f"row {row} references packets outside the frame")
            if self.has[row] & self.wants[row]:
                raise ValueError(f"row {row} marks a packet both Has and Wants")
            if row >= self.m and self.wants[row]:
                raise ValueError(f"relay row {row} must have an empty Wants set")

    @property
    def frame_mask(self) -> int:
        return (1 << self.n) - 1

    @property
    def rows(self) -> int:
        return self.m + self.r

    def is_relay_row(self, row: int) -> bool:
        return row >= self.m

    def has_mask(self, row: int) -> int:
        return self.has[row]

    def lacks_mask(self, row: int) -> int:
        return self.frame_mask & ~self.has[row]

    def wants_mask(self, row: int) -> int:
        return self.wants[row]

    def has_set(self, row: int) -> set[int]:
        return to_set(self.has[row])

    def lacks_set(self, row: int) -> set[int]:
        return to_set(self.lacks_mask(row))

    def wants_set(self, row: int) -> set[int]:
        return to_set(self.wants[row])

    def cell(self, row: int, j: int) -> str:
        bit = 1 << j
        if self.has[row] & bit:
            return "has"
        if self.wants[row] & bit:
            return "wants"
        return "lacks"

    def all_wants_empty(self) -> bool:
        return not any(self.wants[:self.m])

    def wants_union_mask(self) -> int:
        u = 0
        for i in range(self.m):
            u |= self.wants[i]
        return u

    def relay_has_union_mask(self) -> int:
        u = 0
        for row in range(self.m, self.m + self.r):
            u |= self.has[row]
        return u

    def receive(self, row: int, payload_mask: int) -> int | None:
        """Apply one received coded packet to ``row``.

        Returns the decoded packet index, or None if the payload was useless
        (nothing new) or undecodable (two or more unknown packets).
        """
        unknown = payload_mask & self.lacks_mask(row)
        if unknown == 0 or unknown & (unknown - 1):
            return None
        self.has[row] |= unknown
        self.wants[row] &= ~unknown
        return unknown.bit_length() - 1

    def copy(self) -> "StateFeedbackMatrix":
        return StateFeedbackMatrix(self.m, self.n, self.r, self.has, self.wants)

    def __eq__(self, other) -> bool:
        if not isinstance(other, StateFeedbackMatrix):
            return NotImplemented
        return (self.m, self.n, self.r, self.has, self.wants) == (
            other.m, other.n, other.r, other.has, other.wants)

    def fingerprint(self) -> tuple:
        return (self.m, self.n, self.r, tuple(self.has), tuple(self.wants))


def generate_initial_state(
    m: int,
    n: int,
    r: int,
    demand: DemandProfile,
    erasures: ErasureMatrix,
    rng: random.Random,
    relay_rng: random.Random | None = None,
) -> StateFeedbackMatrix:
    """Simulate the initial phase: every packet is broadcast exactly once.

    Terminal i receives packet j with probability 1 - p_bs_tn[i]; relay h
    with probability 1 - p_bs_rn[h].  Draw order is fixed for replayability:
    all terminal draws first (row-major), then all relay draws.  Passing a
    separate ``relay_rng`` keeps terminal realizations identical across
    experiments that differ only in relay count.
    """
    if m < 1 or n < 1 or r < 0:
        raise ConfigurationError("need M >= 1, N >= 1, R >= 0")
    if len(demand.wanted) != m:
        raise ConfigurationError("demand profile must cover every terminal")
    if len(erasures.p_bs_tn) != m or len(erasures.p_bs_rn) != r:
        raise ConfigurationError("erasure matrix does not match the population")
    frame = (1 << n) - 1
    for w in demand.wanted:
        if w & ~frame:
            raise ConfigurationError("demand references packets outside the frame")
    if relay_rng is None:
        relay_rng = rng

    has = []
    wants = []
    for i in range(m):
        got = 0
        for j in range(n):
            if rng.random() < 1.0 - erasures.p_bs_tn[i]:
                got |= 1 << j
        has.append(got)
        wants.append(demand.wanted[i] & ~got)
    for h in range(r):
        got = 0
        for j in range(n):
            if relay_rng.random() < 1.0 - erasures.p_bs_rn[h]:
                got |= 1 << j
        has.append(got)
        wants.append(0)
    return StateFeedbackMatrix(m, n, r, has, wants)


def wants_union(sfm: StateFeedbackMatrix) -> set[int]:
    """Union of all terminal Wants sets."""
    return to_set(sfm.wants_union_mask())
