"""Second-order biased random walks with O(1) alias-table sampling.

The bias rule for the step after (prev -> curr): a neighbor x of curr gets
unnormalized weight w(curr,x)/p when x == prev, w(curr,x) when x is also a
neighbor of prev, and w(curr,x)/q otherwise; the first step of a walk is
plain weight-proportional. Setting p = q = 1 recovers first-order walks.

Determinism: every walk owns a PRNG substream derived by hashing
(seed, start node, walk index) with SHA-256 and feeding the first 8 bytes
to ``random.Random`` (Mersenne Twister). Corpora are therefore bit-identical
across runs and across worker counts.
"""

from __future__ import annotations

import functools
import hashlib
import logging
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

from .errors import IsolatedNodeError
from .graph import NodeId, PropertyGraph

logger = logging.getLogger(__name__)

# Above this many precomputed table entries (sum of squared degrees) the
# sampler falls back to computing step distributions on the fly.
DEFAULT_MAX_ALIAS_ENTRIES = 2_000_000


@dataclass(frozen=True)
class WalkConfig:
    p: float = 1.0
    q: float = 1.0
    walk_length: int = 80
    walks_per_node: int = 10
    seed: int = 0

    def __post_init__(self):
        if not (self.p > 0 and self.q > 0):
            raise ValueError("p and q must be positive")
        if self.walk_length < 1:
            raise ValueError("walk_length must be >= 1")
        if self.walks_per_node < 1:
            raise ValueError("walks_per_node must be >= 1")


# ---------------------------------------------------------------------------
# Alias tables
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AliasTable:
    """Vose alias table over k outcomes; drawing costs two uniforms."""

    prob: tuple[float, ...]
    alias: tuple[int, ...]

    @classmethod
    def build(cls, probabilities: Sequence[float]) -> "AliasTable":
        k = len(probabilities)
        if k == 0:
            raise ValueError("cannot build an alias table over zero outcomes")
        total = float(sum(probabilities))
        if total <= 0:
            raise ValueError("probabilities must sum to a positive value")
        scaled = [p * k / total for p in probabilities]
        prob = [0.0] * k
        alias = list(range(k))
        small = [i for i, s in enumerate(scaled) if s < 1.0]
        large = [i for i, s in enumerate(scaled) if s >= 1.0]
        while small and large:
            s = small.pop()
            l = large.pop()
            prob[s] = scaled[s]
            alias[s] = l
            scaled[l] = scaled[l] - (1.0 - scaled[s])
            if scaled[l] < 1.0:
                small.append(l)
            else:
                large.append(l)
        for leftover in large + small:
            prob[leftover] = 1.0
        return cls(tuple(prob), tuple(alias))

    def __len__(self) -> int:
        return len(self.prob)

    def draw(self, rng) -> int:
        """One outcome index; ``rng`` needs only a ``random()`` method."""
        k = len(self.prob)
        slot = int(rng.random() * k)
        if slot >= k:  # guard against rng.random() returning 1.0-epsilon edge
            slot = k - 1
        return slot if rng.random() < self.prob[slot] else self.alias[slot]

    @functools.cached_property
    def _arrays(self):
        import numpy as np

        return np.asarray(self.prob), np.asarray(self.alias)

    def sample_many(self, rng, count: int):
        """Vectorized draws; ``rng`` must be a numpy Generator."""
        import numpy as np

        prob, alias = self._arrays
        slots = rng.integers(0, len(self.prob), size=count)
        keep = rng.random(count) < prob[slots]
        return np.where(keep, slots, alias[slots])

    def outcome_probabilities(self) -> list[float]:
        """Reconstruct the distribution the table encodes (oracle hook)."""
        k = len(self.prob)
        out = [0.0] * k
        for i in range(k):
            out[i] += self.prob[i] / k
            out[self.alias[i]] += (1.0 - self.prob[i]) / k
        return out


# ---------------------------------------------------------------------------
# Transition distributions
# ---------------------------------------------------------------------------

def transition_distribution(
    graph: PropertyGraph,
    prev: NodeId | None,
    curr: NodeId,
    p: float,
    q: float,
) -> list[tuple[NodeId, float]]:
    """Next-step distribution from ``curr`` given the walk came from ``prev``
    (``None`` marks a first step). Neighbors in ascending id order;
    probabilities sum to 1 within 1e-12."""
    weights = graph.neighbor_weights(curr)
    if not weights:
        raise IsolatedNodeError(f"node {curr!r} has no neighbors")
    neighbors = sorted(weights)
    if prev is None:
        unnormalized = [weights[x] for x in neighbors]
    else:
        unnormalized = []
        for x in neighbors:
            w = weights[x]
            if x == prev:
                unnormalized.append(w / p)
            elif graph.has_edge(x, prev):
                unnormalized.append(w)
            else:
                unnormalized.append(w / q)
    total = sum(unnormalized)
    return [(x, u / total) for x, u in zip(neighbors, unnormalized)]


class WalkSampler:
    """Sampling state for one (graph, p, q) triple.

    Precomputes a first-step table per node and, memory permitting, one
    table per directed (prev, curr) incidence. When the total table size
    (sum of squared degrees) exceeds ``max_alias_entries`` the per-incidence
    tables are skipped and steps fall back to an on-the-fly cumulative scan
    over the exact distribution.
    """

    def __init__(
        self,
        graph: PropertyGraph,
        p: float,
        q: float,
        max_alias_entries: int = DEFAULT_MAX_ALIAS_ENTRIES,
        precompute_edges: bool | None = None,
    ):
        if len(graph) == 0:
            raise ValueError("graph is empty")
        self.graph = graph
        self.p = float(p)
        self.q = float(q)
        self.node_tables: dict[NodeId, tuple[tuple[NodeId, ...], AliasTable]] = {}
        degrees: dict[NodeId, int] = {}
        for node_id in graph.node_ids():
            weights = graph.neighbor_weights(node_id)
            degrees[node_id] = len(weights)
            if not weights:
                continue
            neighbors = tuple(sorted(weights))
            table = AliasTable.build([weights[x] for x in neighbors])
            self.node_tables[node_id] = (neighbors, table)

        entries = sum(d * d for d in degrees.values())
        if precompute_edges is None:
            precompute_edges = entries <= max_alias_entries
        self.precomputed = precompute_edges
        self.edge_tables: dict[
            tuple[NodeId, NodeId], tuple[tuple[NodeId, ...], AliasTable]
        ] = {}
        if precompute_edges:
            for curr in graph.node_ids():
                for prev in graph.neighbors(curr):
                    dist = transition_distribution(graph, prev, curr, p, q)
                    neighbors = tuple(x for x, _ in dist)
                    table = AliasTable.build([pr for _, pr in dist])
                    self.edge_tables[(prev, curr)] = (neighbors, table)
        else:
            logger.info(
                "alias precomputation skipped (%d entries > cap %d); "
                "sampling on the fly", entries, max_alias_entries,
            )

    def has_neighbors(self, node_id: NodeId) -> bool:
        return node_id in self.node_tables

    def first_step(self, curr: NodeId, rng) -> NodeId:
        neighbors, table = self.node_tables[curr]
        return neighbors[table.draw(rng)]

    def step(self, prev: NodeId, curr: NodeId, rng) -> NodeId:
        if self.precomputed:
            neighbors, table = self.edge_tables[(prev, curr)]
            return neighbors[table.draw(rng)]
        dist = transition_distribution(self.graph, prev, curr, self.p, self.q)
        u = rng.random()
        cumulative = 0.0
        for node_id, probability in dist:
            cumulative += probability
            if u < cumulative:
                return node_id
        return dist[-1][0]


def precompute_aliases(
    graph: PropertyGraph,
    p: float,
    q: float,
    max_alias_entries: int = DEFAULT_MAX_ALIAS_ENTRIES,
) -> WalkSampler:
    """Build the edge-indexed alias table collection for (graph, p, q)."""
    return WalkSampler(graph, p, q, max_alias_entries=max_alias_entries)


# ---------------------------------------------------------------------------
# Walk generation
# ---------------------------------------------------------------------------

@dataclass
class WalkCorpus:
    walks: list[list[NodeId]]
    vocabulary: dict[NodeId, int] = field(default_factory=dict)
    counts: dict[NodeId, int] = field(default_factory=dict)

    @classmethod
    def from_walks(cls, walks: list[list[NodeId]]) -> "WalkCorpus":
        counts: dict[NodeId, int] = {}
        for walk in walks:
            for node_id in walk:
                counts[node_id] = counts.get(node_id, 0) + 1
        vocabulary = {nid: i for i, nid in enumerate(sorted(counts))}
        return cls(walks, vocabulary, counts)

    def count_vector(self) -> list[int]:
        """Occurrence totals aligned with the dense vocabulary index."""
        ordered = sorted(self.vocabulary, key=self.vocabulary.get)
        return [self.counts[nid] for nid in ordered]

    def to_text(self) -> str:
        return "\n".join(" ".join(walk) for walk in self.walks) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "WalkCorpus":
        walks = [line.split() for line in text.splitlines() if line.strip()]
        return cls.from_walks(walks)


def _substream_seed(seed: int, start: NodeId, walk_index: int) -> int:
    digest = hashlib.sha256(f"{seed}|{start}|{walk_index}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def generate_walks(
    graph: PropertyGraph,
    cfg: WalkConfig,
    workers: int = 1,
    sampler: WalkSampler | None = None,
) -> WalkCorpus:
    """``walks_per_node`` walks from every node, each ``walk_length`` nodes
    long unless truncated at an isolated node.

    The corpus is bit-identical for any ``workers`` value because walks are
    generated on independent substreams and assembled in a fixed order.
    """
    if sampler is None:
        sampler = WalkSampler(graph, cfg.p, cfg.q)
    tasks = [
        (start, index)
        for start in graph.node_ids()
        for index in range(cfg.walks_per_node)
    ]

    def one_walk(task: tuple[NodeId, int]) -> list[NodeId]:
        start, index = task
        rng = random.Random(_substream_seed(cfg.seed, start, index))
        walk = [start]
        while len(walk) < cfg.walk_length:
            curr = walk[-1]
            if not sampler.has_neighbors(curr):
                break
            if len(walk) == 1:
                walk.append(sampler.first_step(curr, rng))
            else:
                walk.append(sampler.step(walk[-2], curr, rng))
        return walk

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            walks = list(pool.map(one_walk, tasks))
    else:
        walks = [one_walk(task) for task in tasks]
    return WalkCorpus.from_walks(walks)
