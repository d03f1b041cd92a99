"""Coding graph built from a feedback matrix, and clique -> coded packet.

One vertex per (receiving node, lacked packet).  Two vertices are adjacent
when the corresponding losses can be served by a single XOR transmission:
either both miss the same packet, or each node already holds the other's
packet.  The strict flavor additionally forbids combining two packets that
some node in the population misses both of, which makes the coded packet
decodable everywhere, not just at the clique.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bitset import iter_bits
from .model import NodeId, StateFeedbackMatrix

# Above this vertex count adjacency is built with numpy; identical output.
_NUMPY_BUILD_THRESHOLD = 64

GENERALIZED = "gidnc"
STRICT = "sidnc"
FLAVORS = (GENERALIZED, STRICT)

PRIMARY = "primary"
SECONDARY = "secondary"


@dataclass(frozen=True, order=True)
class Vertex:
    """A (node row, packet) loss; identity order is (row, packet)."""

    row: int
    packet: int


class IdncGraph:
    """Undirected loss graph with primary/secondary layers.

    Vertices are stored in (row, packet) order; adjacency is a bitmask per
    vertex over vertex indices (irreflexive, symmetric).
    """

    __slots__ = ("flavor", "m", "r", "vertices", "adj", "primary_mask",
                 "secondary_mask", "relay_mask", "_index", "adj_matrix")

    def __init__(self, flavor: str, m: int, r: int, vertices: list[Vertex],
                 adj: list[int], primary_mask: int, relay_mask: int,
                 adj_matrix: np.ndarray | None = None):
        self.flavor = flavor
        self.m = m
        self.r = r
        self.vertices = vertices
        self.adj = adj
        self.primary_mask = primary_mask
        self.relay_mask = relay_mask
        self.secondary_mask = ((1 << len(vertices)) - 1) & ~primary_mask
        self._index = {v: i for i, v in enumerate(vertices)}
        self.adj_matrix = adj_matrix  # optional bool matrix cache

    def bool_adjacency(self) -> np.ndarray:
        if self.adj_matrix is None:
            nv = len(self.vertices)
            mat = np.zeros((nv, nv), dtype=bool)
            for i in range(nv):
                mat[i] = _unpack_mask(self.adj[i], nv)
            self.adj_matrix = mat
        return self.adj_matrix

    def __len__(self) -> int:
        return len(self.vertices)

    def index_of(self, v: Vertex) -> int:
        return self._index[v]

    def layer(self, i: int) -> str:
        return PRIMARY if (self.primary_mask >> i) & 1 else SECONDARY

    def is_edge(self, i: int, j: int) -> bool:
        return bool((self.adj[i] >> j) & 1)

    def edge_set(self) -> set[tuple[Vertex, Vertex]]:
        edges = set()
        for i in range(len(self.vertices)):
            for j in iter_bits(self.adj[i]):
                if j > i:
                    edges.add((self.vertices[i], self.vertices[j]))
        return edges

    def is_clique_mask(self, mask: int) -> bool:
        for i in iter_bits(mask):
            rest = mask & ~(1 << i)
            if rest & ~self.adj[i]:
                return False
        return True

    def induced(self, keep_mask: int) -> "IdncGraph":
        """Subgraph over the vertices whose index bit is set in keep_mask."""
        keep = list(iter_bits(keep_mask))
        remap = {old: new for new, old in enumerate(keep)}
        vertices = [self.vertices[i] for i in keep]
        adj = []
        primary = 0
        relay = 0
        for new, old in enumerate(keep):
            row = 0
            for nb in iter_bits(self.adj[old] & keep_mask):
                row |= 1 << remap[nb]
            adj.append(row)
            if (self.primary_mask >> old) & 1:
                primary |= 1 << new
            if (self.relay_mask >> old) & 1:
                relay |= 1 << new
        return IdncGraph(self.flavor, self.m, self.r, vertices, adj, primary, relay)


@dataclass(frozen=True)
class Clique:
    """Mutually adjacent vertices; at most one vertex per node."""

    vertices: tuple[Vertex, ...]

    @staticmethod
    def of(verts) -> "Clique":
        return Clique(tuple(sorted(verts)))

    def __len__(self) -> int:
        return len(self.vertices)

    def packets(self) -> frozenset[int]:
        return frozenset(v.packet for v in self.vertices)

    def rows(self) -> frozenset[int]:
        return frozenset(v.row for v in self.vertices)


@dataclass(frozen=True)
class CodedPacket:
    """XOR combination of the distinct packets of a clique."""

    payload: frozenset[int]
    sender: NodeId

    def payload_mask(self) -> int:
        m = 0
        for j in self.payload:
            m |= 1 << j
        return m


def build_graph(
    sfm: StateFeedbackMatrix,
    flavor: str,
    include_relays: bool = False,
    sender_has: int | None = None,
) -> IdncGraph:
    """Build the coding graph for a sender holding ``sender_has``.

    ``sender_has`` is a packet bitmask (None means the full frame); vertices
    exist only for lacked packets the sender can actually encode.  Relay
    rows contribute secondary vertices when ``include_relays`` is set.  The
    strict flavor restricts XOR edges to packet pairs whose lacker sets
    (within the included population) are disjoint.
    """
    if flavor not in FLAVORS:
        raise ValueError(f"unknown flavor {flavor!r}")
    frame = sfm.frame_mask
    if sender_has is None:
        sender_has = frame
    elif sender_has & ~frame:
        raise ValueError("sender_has references packets outside the frame")

    rows = list(range(sfm.m)) + (list(range(sfm.m, sfm.m + sfm.r)) if include_relays else [])

    vertices: list[Vertex] = []
    primary = 0
    relay = 0
    for row in rows:
        for j in iter_bits(sfm.lacks_mask(row) & sender_has):
            idx = len(vertices)
            vertices.append(Vertex(row, j))
            if (sfm.wants_mask(row) >> j) & 1:
                primary |= 1 << idx
            if row >= sfm.m:
                relay |= 1 << idx

    # lackers[j]: rows of the included population that lack packet j
    lackers = [0] * sfm.n
    for row in rows:
        for j in iter_bits(sfm.lacks_mask(row)):
            lackers[j] |= 1 << row

    if len(vertices) >= _NUMPY_BUILD_THRESHOLD:
        adj, matrix = _adjacency_numpy(sfm, flavor, rows, vertices, lackers)
    else:
        adj, matrix = _adjacency_python(sfm, flavor, vertices, lackers), None
    return IdncGraph(flavor, sfm.m, sfm.r, vertices, adj, primary, relay, matrix)


def _adjacency_python(sfm: StateFeedbackMatrix, flavor: str,
                      vertices: list[Vertex], lackers: list[int]) -> list[int]:
    nv = len(vertices)
    adj = [0] * nv
    for a in range(nv):
        va = vertices[a]
        for b in range(a + 1, nv):
            vb = vertices[b]
            if va.row == vb.row:
                continue
            if va.packet == vb.packet:
                edge = True  # C1: same lost packet, plain retransmission
            else:
                edge = (
                    (sfm.has_mask(vb.row) >> va.packet) & 1
                    and (sfm.has_mask(va.row) >> vb.packet) & 1
                )
                if edge and flavor == STRICT:
                    edge = not (lackers[va.packet] & lackers[vb.packet])
            if edge:
                adj[a] |= 1 << b
                adj[b] |= 1 << a
    return adj


def _unpack_mask(mask: int, n: int) -> np.ndarray:
    raw = np.frombuffer(mask.to_bytes((n + 7) // 8, "little"), dtype=np.uint8)
    return np.unpackbits(raw, bitorder="little")[:n].astype(bool)


def _adjacency_numpy(sfm: StateFeedbackMatrix, flavor: str, rows: list[int],
                     vertices: list[Vertex], lackers: list[int]) -> list[int]:
    nv = len(vertices)
    vrow = np.fromiter((v.row for v in vertices), dtype=np.int64, count=nv)
    vpkt = np.fromiter((v.packet for v in vertices), dtype=np.int64, count=nv)

    has = np.zeros((sfm.rows, sfm.n), dtype=bool)
    for row in rows:
        has[row] = _unpack_mask(sfm.has_mask(row), sfm.n)

    # holds[a, b]: vertex a's node already has vertex b's packet
    holds = has[vrow][:, vpkt]
    c2 = holds & holds.T
    if flavor == STRICT:
        disjoint = np.ones((sfm.n, sfm.n), dtype=bool)
        for j in range(sfm.n):
            for l in range(j + 1, sfm.n):
                if lackers[j] & lackers[l]:
                    disjoint[j, l] = disjoint[l, j] = False
        c2 &= disjoint[vpkt[:, None], vpkt[None, :]]
    edges = (vpkt[:, None] == vpkt[None, :]) | c2
    edges &= vrow[:, None] != vrow[None, :]

    packed = np.packbits(edges, axis=1, bitorder="little")
    adj = [int.from_bytes(packed[i].tobytes(), "little") for i in range(nv)]
    return adj, edges


def secondary_candidates_mask(g: IdncGraph, primary_clique_mask: int) -> int:
    """Secondary vertices adjacent to every vertex of the primary clique."""
    cand = g.secondary_mask
    for i in iter_bits(primary_clique_mask):
        cand &= g.adj[i]
    return cand


def induced_secondary_subgraph(g: IdncGraph, primary_clique: Clique) -> IdncGraph:
    """Subgraph of secondary vertices adjacent to all of ``primary_clique``."""
    mask = 0
    for v in primary_clique.vertices:
        mask |= 1 << g.index_of(v)
    if not g.is_clique_mask(mask):
        raise ValueError("primary_clique is not a clique of this graph")
    if mask & ~g.primary_mask:
        raise ValueError("primary_clique contains non-primary vertices")
    return g.induced(secondary_candidates_mask(g, mask))


def clique_to_coded_packet(c: Clique, sender: NodeId) -> CodedPacket:
    """The XOR payload induced by a clique."""
    if len(c) == 0:
        raise ValueError("empty clique defines no transmission")
    return CodedPacket(c.packets(), sender)


def apply_reception(sfm: StateFeedbackMatrix, row: int, pkt: CodedPacket) -> int | None:
    """Update one receiver with a received coded packet.

    Decodes instantly when exactly one payload packet is unknown to the
    receiver; combinations with two or more unknown packets are discarded.
    Mutates ``sfm``; returns the decoded packet index or None.
    """
    return sfm.receive(row, pkt.payload_mask())
