"""
Edge knowledge stores and cloud-to-edge chunk distribution.

Each edge keeps a FIFO store of keyword-tagged chunks. Queries arriving at an
edge are buffered; every ``threshold`` queries the cloud ranks its
communities by how often their keywords appear in the buffer and pushes
chunks from the top-k communities (round-robin, capped at ``push_limit``).
Keyword similarity is modelled by a synonym partition: two keywords match
iff they share a class.
"""

from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

__all__ = [
    "Chunk",
    "Community",
    "EdgeStore",
    "KnowledgeLayer",
    "SynonymMap",
    "best_edge",
    "build_catalog",
    "insert_chunks",
    "overlap_ratio",
    "record_query_and_maybe_update",
    "select_communities",
    "take_round_robin",
]


@dataclass(frozen=True)
class Chunk:
    id: int
    keywords: frozenset
    community_id: int
    inserted_at_step: int = 0

    def __post_init__(self):
        if not self.keywords:
            raise ValueError(f"chunk {self.id} has no keywords")


@dataclass(frozen=True)
class Community:
    id: int
    keywords: frozenset
    chunks: tuple[Chunk, ...] = ()

    def __post_init__(self):
        bad = [c.id for c in self.chunks if c.community_id != self.id]
        if bad:
            raise ValueError(f"chunks {bad} do not belong to community {self.id}")


class SynonymMap:
    """Partition of keyword ids into equivalence classes.

    Keywords not listed in any class form singleton classes, so the default
    (no classes) is the identity partition.
    """

    def __init__(self, classes: Iterable[Iterable[int]] = ()):
        self.classes = tuple(frozenset(c) for c in classes)
        self._rep: dict[int, int] = {}
        for cls in self.classes:
            if not cls:
                raise ValueError("synonym classes must be nonempty")
            rep = min(cls)
            for k in cls:
                if k in self._rep:
                    raise ValueError(f"keyword {k} appears in more than one synonym class")
                self._rep[k] = rep

    def class_of(self, keyword: int) -> int:
        """Canonical representative of the keyword's class."""
        return self._rep.get(keyword, keyword)

    def classes_of(self, keywords: Iterable[int]) -> set[int]:
        rep = self._rep
        return {rep.get(k, k) for k in keywords}


class EdgeStore:
    """FIFO chunk store of one edge node with a keyword occurrence index."""

    def __init__(self, edge_id: int, capacity: int = 1000, base_delay_s: float = 0.0):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.edge_id = edge_id
        self.capacity = capacity
        self.base_delay_s = base_delay_s
        self.queue: deque[Chunk] = deque()
        self.keyword_index: Counter = Counter()
        self.pending_qa = 0
        self.recent_keywords: list[int] = []

    def __len__(self):
        return len(self.queue)

    def keywords(self) -> set[int]:
        return set(self.keyword_index)

    def rebuild_index(self) -> Counter:
        """Keyword counts recomputed from the queue (reference for the incremental index)."""
        index = Counter()
        for chunk in self.queue:
            index.update(chunk.keywords)
        return index


def insert_chunks(store: EdgeStore, chunks: Iterable[Chunk]) -> list[Chunk]:
    """Append chunks in order, evicting the oldest while over capacity.

    Returns the evicted chunks, oldest first.
    """
    evicted = []
    index = store.keyword_index
    for chunk in chunks:
        store.queue.append(chunk)
        index.update(chunk.keywords)
        if len(store.queue) > store.capacity:
            old = store.queue.popleft()
            index.subtract(old.keywords)
            for k in old.keywords:
                if index[k] <= 0:
                    del index[k]
            evicted.append(old)
    return evicted


def overlap_ratio(query_keywords: Iterable[int], store: EdgeStore, syn: SynonymMap) -> float:
    """Fraction of query keywords whose synonym class is represented in the store."""
    query = set(query_keywords)
    if not query:
        raise ValueError("query_keywords must be nonempty")
    held = syn.classes_of(store.keyword_index)
    hits = sum(1 for k in query if syn.class_of(k) in held)
    return hits / len(query)


def best_edge(query_keywords: Iterable[int], stores: Sequence[EdgeStore], syn: SynonymMap) -> tuple[int, float]:
    """Edge with the highest overlap ratio; ties go to the lowest edge id."""
    if not stores:
        raise ValueError("at least one edge store is required")
    query = set(query_keywords)
    best = None
    for store in stores:
        r = overlap_ratio(query, store, syn)
        key = (-r, store.edge_id)
        if best is None or key < best[0]:
            best = (key, store.edge_id, r)
    return best[1], best[2]


def select_communities(
    recent_keywords: Iterable[int], cloud: Sequence[Community], k: int, syn: SynonymMap
) -> list[Community]:
    """Top-k communities by number of buffered keyword occurrences they match.

    Communities matching nothing are never selected; ties go to the lowest id.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    demand = Counter(syn.class_of(kw) for kw in recent_keywords)
    scored = []
    for comm in cloud:
        score = sum(demand[c] for c in syn.classes_of(comm.keywords))
        if score > 0:
            scored.append((-score, comm.id, comm))
    scored.sort(key=lambda t: (t[0], t[1]))
    return [comm for _, _, comm in scored[:k]]


def take_round_robin(communities: Sequence[Community], limit: int) -> list[Chunk]:
    """Interleave chunks across communities in rank order, up to `limit` chunks."""
    if limit < 1:
        raise ValueError("push limit must be >= 1")
    out = []
    longest = max((len(c.chunks) for c in communities), default=0)
    for r in range(longest):
        for comm in communities:
            if r < len(comm.chunks):
                out.append(comm.chunks[r])
                if len(out) == limit:
                    return out
    return out


def distribute(
    store: EdgeStore, cloud: Sequence[Community], k: int, push_limit: int, syn: SynonymMap, step: int
) -> list[Chunk]:
    """Push top-k community chunks matching the store's buffer, then reset the buffer."""
    selected = select_communities(store.recent_keywords, cloud, k, syn)
    pushed = [
        Chunk(c.id, c.keywords, c.community_id, step)
        for c in take_round_robin(selected, push_limit)
    ] if selected else []
    insert_chunks(store, pushed)
    store.pending_qa = 0
    store.recent_keywords = []
    return pushed


def record_query_and_maybe_update(
    store: EdgeStore,
    query_keywords: Iterable[int],
    cloud: Sequence[Community],
    k: int,
    push_limit: int,
    syn: SynonymMap,
    step: int,
    threshold: int = 20,
) -> list[Chunk]:
    """Count one answered query at this edge; distribute when `threshold` is reached.

    Returns the chunks pushed to the store (empty unless this query triggered).
    """
    if k < 1 or push_limit < 1 or threshold < 1:
        raise ValueError("k, push_limit and threshold must be >= 1")
    store.pending_qa += 1
    store.recent_keywords.extend(sorted(query_keywords))
    if store.pending_qa < threshold:
        return []
    return distribute(store, cloud, k, push_limit, syn, step)


def build_catalog(
    n_topics: int, keywords_per_topic: int, chunks_per_community: int, keywords_per_chunk: int
) -> list[Community]:
    """Synthetic cloud catalog: one community per topic.

    Topic t owns keyword ids ``t*K .. t*K + K - 1``. Chunk j of community t
    carries ``keywords_per_chunk`` consecutive keywords starting at offset
    ``j mod K`` (wrapping), so a community's chunks jointly cover its topic.
    """
    K = keywords_per_topic
    if not 1 <= keywords_per_chunk <= K:
        raise ValueError("keywords_per_chunk must lie in [1, keywords_per_topic]")
    out = []
    for t in range(n_topics):
        kws = [t * K + i for i in range(K)]
        chunks = tuple(
            Chunk(
                id=t * chunks_per_community + j,
                keywords=frozenset(kws[(j + i) % K] for i in range(keywords_per_chunk)),
                community_id=t,
            )
            for j in range(chunks_per_community)
        )
        out.append(Community(t, frozenset(kws), chunks))
    return out


@dataclass
class KnowledgeLayer:
    """All edge stores plus the cloud catalog, with per-edge or global update triggers."""

    stores: list[EdgeStore]
    cloud: list[Community]
    syn: SynonymMap = field(default_factory=SynonymMap)
    threshold: int = 20
    top_k: int = 3
    push_limit: int = 500
    trigger_scope: str = "edge"
    _global_pending: int = 0

    def __post_init__(self):
        if self.trigger_scope not in ("edge", "global"):
            raise ValueError("trigger_scope must be 'edge' or 'global'")

    def preload(self, popularity) -> None:
        """Fill each store with its most popular communities' chunks, in rank order."""
        by_id = {c.id: c for c in self.cloud}
        for store, weights in zip(self.stores, popularity):
            ranked = sorted(range(len(weights)), key=lambda t: (-weights[t], t))
            for t in ranked:
                room = store.capacity - len(store)
                if room <= 0:
                    break
                insert_chunks(store, by_id[t].chunks[:room])

    def best_edge(self, query_keywords) -> tuple[int, float]:
        return best_edge(query_keywords, self.stores, self.syn)

    def record(self, edge_id: int, query_keywords, step: int) -> int:
        """Record a query answered at `edge_id`; returns the number of chunks pushed."""
        store = self.stores[edge_id]
        if self.trigger_scope == "edge":
            pushed = record_query_and_maybe_update(
                store, query_keywords, self.cloud, self.top_k, self.push_limit,
                self.syn, step, self.threshold,
            )
            return len(pushed)
        store.recent_keywords.extend(sorted(query_keywords))
        self._global_pending += 1
        if self._global_pending < self.threshold:
            return 0
        self._global_pending = 0
        return sum(
            len(distribute(s, self.cloud, self.top_k, self.push_limit, self.syn, step))
            for s in self.stores if s.recent_keywords
        )
