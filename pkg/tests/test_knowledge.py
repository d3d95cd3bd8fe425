import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ragate.knowledge import (
    Chunk,
    Community,
    EdgeStore,
    KnowledgeLayer,
    SynonymMap,
    best_edge,
    build_catalog,
    insert_chunks,
    overlap_ratio,
    record_query_and_maybe_update,
    select_communities,
    take_round_robin,
)


def chunk(i, kws, comm=0, step=0):
    return Chunk(i, frozenset(kws), comm, step)


def store_with(keywords, edge_id=0):
    s = EdgeStore(edge_id, capacity=100)
    insert_chunks(s, [chunk(i, [k]) for i, k in enumerate(keywords)])
    return s


# --- reference model -------------------------------------------------------

class RefStore:
    """Plain-list model of one edge store and its update cycle."""

    def __init__(self, capacity):
        self.capacity = capacity
        self.queue = []
        self.pending = 0
        self.buffer = []

    def insert(self, chunks):
        self.queue = (self.queue + list(chunks))[-self.capacity:] if chunks else self.queue

    def index(self):
        out = {}
        for c in self.queue:
            for k in c.keywords:
                out[k] = out.get(k, 0) + 1
        return out

    def record(self, kws, cloud, k, limit, rep, threshold, step):
        self.pending += 1
        self.buffer += list(kws)
        if self.pending < threshold:
            return []
        scores = []
        for comm in cloud:
            classes = {rep(x) for x in comm.keywords}
            score = sum(1 for x in self.buffer if rep(x) in classes)
            if score:
                scores.append((score, comm))
        scores.sort(key=lambda t: (-t[0], t[1].id))
        chosen = [c for _, c in scores[:k]]
        # round-robin as (position within community, community rank) ordering
        order = sorted(
            ((pos, rank, ch) for rank, c in enumerate(chosen) for pos, ch in enumerate(c.chunks)),
            key=lambda t: (t[0], t[1]),
        )
        pushed = [Chunk(ch.id, ch.keywords, ch.community_id, step) for _, _, ch in order[:limit]]
        self.insert(pushed)
        self.pending = 0
        self.buffer = []
        return pushed


def random_cloud(rng, n_kw):
    comms, next_id = [], 0
    for cid in range(int(rng.integers(1, 5))):
        kws = set(rng.choice(n_kw, size=int(rng.integers(1, min(n_kw, 3) + 1)), replace=False).tolist())
        chunks = []
        for _ in range(int(rng.integers(0, 5))):
            sub = rng.choice(sorted(kws), size=int(rng.integers(1, len(kws) + 1)), replace=False)
            chunks.append(Chunk(next_id, frozenset(sub.tolist()), cid))
            next_id += 1
        comms.append(Community(cid, frozenset(kws), tuple(chunks)))
    return comms


def test_matches_reference_model_on_random_sequences():
    rng = np.random.default_rng(0)
    for _ in range(10_000):
        n_kw = int(rng.integers(2, 9))
        cap = int(rng.integers(1, 8))
        k = int(rng.integers(1, 4))
        limit = int(rng.integers(1, 7))
        threshold = int(rng.integers(1, 5))
        cloud = random_cloud(rng, n_kw)
        classes = []
        if rng.random() < 0.5:
            perm = rng.permutation(n_kw).tolist()
            classes = [perm[:2], perm[2:4]] if n_kw >= 4 else [perm[:2]]
        syn = SynonymMap(classes)
        rep_map = {x: min(c) for c in classes for x in c}

        def rep(x):
            return rep_map.get(x, x)

        store, ref = EdgeStore(0, capacity=cap), RefStore(cap)
        for step in range(int(rng.integers(1, 12))):
            if rng.random() < 0.3:
                new = [chunk(1000 + step * 10 + j, rng.choice(n_kw, size=1).tolist()) for j in range(int(rng.integers(0, 4)))]
                evicted = insert_chunks(store, new)
                before = list(ref.queue)
                ref.insert(new)
                assert evicted == (before + new)[: max(0, len(before) + len(new) - cap)]
            else:
                q = set(rng.choice(n_kw, size=int(rng.integers(1, 3)), replace=False).tolist())
                got = record_query_and_maybe_update(store, q, cloud, k, limit, syn, step, threshold)
                want = ref.record(sorted(q), cloud, k, limit, rep, threshold, step)
                assert got == want
            assert list(store.queue) == ref.queue
            assert len(store.queue) <= cap
            assert dict(store.keyword_index) == ref.index()
            assert store.keyword_index == store.rebuild_index()
            assert store.pending_qa == ref.pending < threshold


# --- worked examples ---------------------------------------------------------

def test_overlap_examples():
    syn = SynonymMap()
    assert overlap_ratio({1, 2, 3}, store_with([1, 2]), syn) == pytest.approx(2 / 3)
    assert overlap_ratio({1, 2}, store_with([1, 2, 5]), syn) == 1.0
    assert overlap_ratio({1}, store_with([9]), SynonymMap([[1, 9]])) == 1.0
    with pytest.raises(ValueError):
        overlap_ratio(set(), store_with([1]), syn)


def test_best_edge_examples():
    syn = SynonymMap()
    q = set(range(10))
    stores = [store_with(list(range(2)), 1), store_with(list(range(9)), 2), store_with(list(range(5)), 3)]
    assert best_edge(q, stores, syn) == (2, 0.9)
    tied = [store_with([0], 4), store_with([0], 2), store_with([0], 3)]
    assert best_edge({0, 1}, tied, syn) == (2, 0.5)
    assert best_edge({7}, [store_with([0], 5)], syn) == (5, 0.0)


def test_fifo_capacity_example():
    s = EdgeStore(0, capacity=3)
    cs = [chunk(i, [i]) for i in range(1, 5)]
    assert insert_chunks(s, cs[:2]) == []
    assert insert_chunks(s, cs[2:]) == [cs[0]]
    assert [c.id for c in s.queue] == [2, 3, 4]


def test_trigger_fires_on_twentieth_query():
    cloud = build_catalog(3, 4, 10, 2)
    s = EdgeStore(0, capacity=1000)
    for i in range(19):
        assert record_query_and_maybe_update(s, {0, 1}, cloud, 3, 500, SynonymMap(), i) == []
        assert len(s) == 0
    pushed = record_query_and_maybe_update(s, {0, 1}, cloud, 3, 500, SynonymMap(), 19)
    assert len(pushed) == 10 and all(c.inserted_at_step == 19 for c in pushed)
    assert s.pending_qa == 0 and s.recent_keywords == []


def test_top_k_by_score():
    cloud = [Community(i, frozenset({10 * i, 10 * i + 1})) for i in range(3)]
    recent = [0] * 5 + [10] * 3 + [20]  # scores 5, 3, 1
    assert [c.id for c in select_communities(recent, cloud, 2, SynonymMap())] == [0, 1]
    assert select_communities([99], cloud, 2, SynonymMap()) == []


def test_push_limit_truncates():
    cloud = build_catalog(2, 4, 400, 2)
    out = take_round_robin(cloud, 500)
    assert len(out) == 500
    assert [c.community_id for c in out[:4]] == [0, 1, 0, 1]


def test_global_trigger_scope():
    cloud = build_catalog(4, 3, 5, 1)
    stores = [EdgeStore(e, capacity=50) for e in range(2)]
    layer = KnowledgeLayer(stores, cloud, threshold=4, top_k=1, push_limit=5, trigger_scope="global")
    pushed = [layer.record(i % 2, {3 * (i % 2)}, i) for i in range(4)]
    assert pushed == [0, 0, 0, 10]
    assert {c.community_id for c in stores[0].queue} == {0}
    assert {c.community_id for c in stores[1].queue} == {1}


def test_preload_fills_by_popularity():
    cloud = build_catalog(4, 2, 3, 1)
    stores = [EdgeStore(0, capacity=5)]
    KnowledgeLayer(stores, cloud).preload([[0.1, 0.6, 0.1, 0.2]])
    assert [c.community_id for c in stores[0].queue] == [1, 1, 1, 3, 3]


def test_validation():
    with pytest.raises(ValueError):
        SynonymMap([[1, 2], [2, 3]])
    with pytest.raises(ValueError):
        Chunk(0, frozenset(), 0)
    with pytest.raises(ValueError):
        Community(0, frozenset({1}), (chunk(0, [1], comm=1),))
    with pytest.raises(ValueError):
        EdgeStore(0, capacity=0)
    with pytest.raises(ValueError):
        KnowledgeLayer([], [], trigger_scope="cloud")


@settings(max_examples=200, deadline=None)
@given(st.sets(st.integers(0, 20), min_size=1), st.lists(st.integers(0, 20), max_size=30))
def test_overlap_in_unit_interval_and_one_iff_covered(q, held):
    s = store_with(held)
    r = overlap_ratio(q, s, SynonymMap())
    assert 0.0 <= r <= 1.0
    assert (r == 1.0) == q.issubset(set(held))
