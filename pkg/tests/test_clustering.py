"""Clustering and stratification tests.

The UPGMA oracle recomputes every inter-cluster distance from scratch as
the mean over all cross pairs of original points, so it shares no code
with the incremental production update.
"""

import numpy as np
import pytest

from xfertune import (
    ClusterError,
    DatasetMeta,
    Dendrogram,
    Merge,
    NetworkMeta,
    ParamConfig,
    StratifyConfig,
    Stratum,
    TransferLogEntry,
    UnknownRouteError,
    assign_stratum,
    cut_dendrogram,
    stratify,
    upgma_cluster,
)
from xfertune.clustering import (
    FeatureSpec,
    _cluster_by_vectors,
    tier2_vector,
)
from xfertune.simulator import DATASET_CLASSES


def brute_force_upgma(points):
    """Average-linkage merges, O(n^3), distances recomputed each round."""
    pts = np.atleast_2d(np.asarray(points, dtype=float).T).T
    if pts.shape[0] == 1:
        pts = pts.T
    n = len(pts)
    d0 = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2))
    clusters = {i: [i] for i in range(n)}
    merges = []
    next_id = n
    while len(clusters) > 1:
        ids = sorted(clusters)
        best = None
        for ai, a in enumerate(ids):
            for b in ids[ai + 1:]:
                d = float(np.mean([d0[i, j] for i in clusters[a] for j in clusters[b]]))
                if best is None or d < best[0]:
                    best = (d, a, b)
        d, a, b = best
        clusters[next_id] = clusters.pop(a) + clusters.pop(b)
        merges.append((a, b, d, next_id))
        next_id += 1
    return merges


def random_points(rng):
    n = int(rng.integers(2, 13))
    dim = int(rng.integers(1, 4))
    pts = rng.uniform(0.0, 1.0, size=(n, dim))
    if n >= 4 and rng.uniform() < 0.3:
        pts[1] = pts[0]   # exercise zero-distance ties
    return pts


def test_matches_brute_force_oracle():
    rng = np.random.default_rng(12)
    for _ in range(60):
        pts = random_points(rng)
        dend = upgma_cluster(pts)
        want = brute_force_upgma(pts)
        assert len(dend.merges) == len(want)
        for got, (a, b, d, new_id) in zip(dend.merges, want):
            assert (got.a, got.b, got.new_id) == (a, b, new_id)
            assert abs(got.distance - d) <= 1e-10 * max(1.0, d)


def test_linkage_distances_are_monotone():
    rng = np.random.default_rng(13)
    for _ in range(30):
        dend = upgma_cluster(random_points(rng))
        d = [m.distance for m in dend.merges]
        assert all(b >= a - 1e-12 for a, b in zip(d, d[1:]))


def test_hand_worked_three_point_merge_order():
    dend = upgma_cluster([0.0, 0.1, 1.0])
    assert dend.merges[0] == Merge(a=0, b=1, distance=pytest.approx(0.1), new_id=3)
    m = dend.merges[1]
    assert (m.a, m.b, m.new_id) == (2, 3, 4)
    # average of |1-0| and |1-0.1|
    assert m.distance == pytest.approx(0.95)


def test_single_point_dendrogram():
    dend = upgma_cluster([[0.5, 0.5]])
    assert dend.leaf_count == 1 and dend.merges == ()
    assert cut_dendrogram(dend, 1.0) == [{0}]


def test_dendrogram_rejects_decreasing_merges():
    merges = (Merge(0, 1, 0.5, 3), Merge(2, 3, 0.3, 4))
    with pytest.raises(ClusterError):
        Dendrogram(3, merges)


def test_cut_thresholds():
    dend = upgma_cluster([0.0, 0.1, 1.0])
    assert cut_dendrogram(dend, 0.05) == [{0}, {1}, {2}]
    assert cut_dendrogram(dend, 0.1) == [{0, 1}, {2}]
    assert cut_dendrogram(dend, 1.0) == [{0, 1, 2}]
    with pytest.raises(ClusterError):
        cut_dendrogram(dend, -0.1)


def test_duplicates_merge_at_zero():
    dend = upgma_cluster([5.0, 5.0, 1.0])
    assert dend.merges[0].distance == 0.0
    assert cut_dendrogram(dend, 0.0) == [{0, 1}, {2}]


def test_weighted_dedupe_equals_multiset_clustering():
    # clustering unique vectors with multiplicities must give the same flat
    # clusters as clustering the full multiset
    rng = np.random.default_rng(14)
    for _ in range(20):
        base = rng.uniform(0.0, 1.0, size=(int(rng.integers(2, 6)), 2))
        reps = rng.integers(1, 4, size=len(base))
        vectors = [tuple(base[i]) for i in range(len(base)) for _ in range(reps[i])]
        n = len(vectors)
        cut = float(rng.uniform(0.05, 0.6))
        got = {frozenset(g) for g in _cluster_by_vectors(vectors, list(range(n)), cut)}

        merges = brute_force_upgma(np.array(vectors))
        parent = list(range(n + len(merges)))

        def find(x):
            while parent[x] != x:
                x = parent[x]
            return x

        for a, b, d, new_id in merges:
            if d <= cut:
                parent[find(a)] = new_id
                parent[find(b)] = new_id
        want = {}
        for leaf in range(n):
            want.setdefault(find(leaf), set()).add(leaf)
        assert got == {frozenset(v) for v in want.values()}


def test_feature_normalization():
    lin = FeatureSpec("x", 0.0, 10.0)
    assert lin.normalize(2.5) == pytest.approx(0.25)
    assert lin.normalize(-1.0) == 0.0
    assert lin.normalize(11.0) == 1.0
    log = FeatureSpec("y", 1.0, 1e4, log_scale=True)
    assert log.normalize(100.0) == pytest.approx(0.5)
    assert log.normalize(0.5) == 0.0   # clamped at the low edge before log


# -- stratification -----------------------------------------------------------


def random_corpus(rng, n_routes: int = 2):
    routes = [(f"src{r}", f"dst{r}") for r in range(n_routes)]
    bw = [1000.0, 10000.0, 500.0]
    rtt = [10.0, 40.0, 120.0]
    entries = []
    for i in range(int(rng.integers(20, 60))):
        r = int(rng.integers(0, n_routes))
        nf = int(rng.integers(1, 5000))
        avg = float(rng.uniform(1e4, 1e8))
        power = float(rng.uniform(1.0, 100.0))
        duration = float(rng.uniform(1.0, 100.0))
        entries.append(TransferLogEntry(
            params=ParamConfig(1, 1200, 1, 1, 0),
            dataset=DatasetMeta(num_files=nf, total_size_bytes=avg * nf,
                                avg_file_size_bytes=avg,
                                file_size_stddev_bytes=float(rng.uniform(0, avg / 3))),
            network=NetworkMeta(routes[r][0], routes[r][1], bw[r], rtt[r],
                                float(rng.uniform(0.0, 1.0))),
            throughput_mbps=float(rng.uniform(1.0, bw[r])),
            energy_joules=power * duration, avg_power_watts=power,
            duration_s=duration, timestamp_s=float(i)))
    return entries


def canonical_partition(entries, strata):
    out = []
    for s in strata:
        fingerprints = tuple(sorted(repr(entries[i].as_dict()) for i in s.members))
        out.append((fingerprints, s.route, s.ext_load_interval))
    return sorted(out)


def assert_is_partition(n_entries, strata):
    seen = []
    for s in strata:
        seen.extend(s.members)
    assert sorted(seen) == list(range(n_entries))


def test_partition_and_permutation_invariance():
    rng = np.random.default_rng(15)
    for _ in range(25):
        entries = random_corpus(rng)
        strata = stratify(entries)
        assert_is_partition(len(entries), strata)
        perm = rng.permutation(len(entries))
        shuffled = [entries[i] for i in perm]
        again = stratify(shuffled)
        assert_is_partition(len(shuffled), again)
        assert canonical_partition(entries, strata) == canonical_partition(shuffled, again)


def test_default_corpus_has_nine_strata(corpus, strata):
    assert len(strata) == 9
    assert [s.id for s in strata] == [f"s{i:03d}" for i in range(9)]
    assert_is_partition(len(corpus), strata)


def test_dataset_classes_separate_into_three_tier2_strata(corpus, strata):
    by_tier2 = {}
    for s in strata:
        classes = {corpus[i].dataset.num_files for i in s.members}
        assert len(classes) == 1   # no stratum mixes file classes
        by_tier2.setdefault(s.tier2_key, set()).update(classes)
    assert len(by_tier2) == 3
    num_files = {cls.num_files for cls in DATASET_CLASSES.values()}
    assert set().union(*by_tier2.values()) == num_files
    for members in by_tier2.values():
        assert len(members) == 1


def test_load_band_boundaries_on_default_corpus(strata):
    # training loads {0.2, 0.35, 0.5}: mean 0.35, population sigma of the
    # per-entry loads gives the band edges
    intervals = sorted({s.ext_load_interval for s in strata})
    assert len(intervals) == 3
    assert intervals[0][0] == 0.0
    assert intervals[0][1] == pytest.approx(0.22752551286084113, abs=1e-12)
    assert intervals[1][1] == pytest.approx(0.47247448713915896, abs=1e-12)
    assert intervals[2][1] == 1.0


def test_every_entry_assigns_back_to_its_stratum(corpus, strata, stratify_config):
    owner = {}
    for s in strata:
        for i in s.members:
            owner[i] = s.id
    step = 7   # sampling keeps this quick; coverage still spans all strata
    for i in range(0, len(corpus), step):
        e = corpus[i]
        got = assign_stratum(e.dataset, e.network, strata, stratify_config)
        assert got.id == owner[i]


def test_assign_unknown_route_raises(strata, stratify_config):
    ds = DATASET_CLASSES["small"]
    net = NetworkMeta("nowhere", "elsewhere", 1e4, 32.0, 0.2)
    with pytest.raises(UnknownRouteError, match="nowhere->elsewhere"):
        assign_stratum(ds, net, strata, stratify_config)


def make_stratum(sid, interval):
    return Stratum(
        id=sid, tier1_key="net0", tier2_key="data0", tier3_key="a->b/link0",
        route=("a", "b"), ext_load_interval=interval, members=(0,),
        centroids={"tier1": (0.5, 0.5), "tier2": (0.5, 0.5, 0.5, 0.5),
                   "tier3": (0.5, 0.5)})


def probe_net(load):
    return NetworkMeta("a", "b", 1e4, 30.0, load)


def probe_ds():
    return DatasetMeta(num_files=10, total_size_bytes=1e6,
                       avg_file_size_bytes=1e5, file_size_stddev_bytes=0.0)


def test_gap_probe_picks_nearest_interval_midpoint():
    strata = [make_stratum("a", (0.0, 0.3)), make_stratum("b", (0.5, 0.8))]
    got = assign_stratum(probe_ds(), probe_net(0.45), strata)
    assert got.id == "b"   # |0.45-0.65| = 0.20 beats |0.45-0.15| = 0.30


def test_gap_probe_tie_prefers_lower_interval():
    # dyadic bounds make both midpoint distances exactly 0.375
    strata = [make_stratum("a", (0.0, 0.25)), make_stratum("b", (0.75, 1.0))]
    got = assign_stratum(probe_ds(), probe_net(0.5), strata)
    assert got.id == "a"


def test_top_interval_contains_full_load():
    s = make_stratum("top", (0.6, 1.0))
    assert s.contains_load(1.0)
    assert s.contains_load(0.6)
    assert not s.contains_load(0.5)
    mid = make_stratum("mid", (0.2, 0.6))
    assert not mid.contains_load(0.6)   # half-open below the top band


def test_stratum_roundtrip_and_sibling_key():
    s = make_stratum("x", (0.0, 0.5))
    back = Stratum.from_dict(s.as_dict())
    assert back == s
    assert s.sibling_key == ("net0", "data0", "a->b/link0")


def test_stratify_rejects_empty_input():
    with pytest.raises(ClusterError):
        stratify([])


def test_tier2_vector_uses_configured_features(stratify_config):
    ds = DATASET_CLASSES["small"]
    vec = tier2_vector(ds, stratify_config)
    assert len(vec) == 4
    assert all(0.0 <= v <= 1.0 for v in vec)
