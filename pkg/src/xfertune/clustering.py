"""Hierarchical clustering and three-tier stratification of transfer logs.

Strata group historical transfers that behaved alike: tier 1 clusters on
external network conditions (load, bandwidth), tier 2 on dataset shape, then
each tier-2 group is split into external-load intervals around the mean, and
tier 3 pins the exact route and clusters residual link characteristics.
Clustering is agglomerative with unweighted average linkage (UPGMA) and
deterministic lexicographic tie-breaking.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .logs import DatasetMeta, NetworkMeta, TransferLogEntry


class ClusterError(ValueError):
    pass


class UnknownRouteError(ClusterError):
    """Probe route has no stratum with a matching (source_id, dest_id)."""


@dataclass(frozen=True)
class FeatureSpec:
    """One feature axis with its normalization range and scale."""

    name: str
    lo: float
    hi: float
    log_scale: bool = False

    def normalize(self, value: float) -> float:
        if self.log_scale:
            v = math.log10(max(value, self.lo))
            lo, hi = math.log10(self.lo), math.log10(self.hi)
        else:
            v, lo, hi = value, self.lo, self.hi
        x = (v - lo) / (hi - lo)
        return min(max(x, 0.0), 1.0)

    def as_dict(self) -> dict:
        return {"name": self.name, "lo": self.lo, "hi": self.hi, "log_scale": self.log_scale}


@dataclass(frozen=True)
class Merge:
    a: int          # smaller cluster id
    b: int          # larger cluster id
    distance: float
    new_id: int


@dataclass(frozen=True)
class Dendrogram:
    """Merge history of an agglomerative clustering run.

    Leaves are numbered 0..leaf_count-1 in input order; each merge creates the
    next integer id. Linkage distances are non-decreasing.
    """

    leaf_count: int
    merges: tuple[Merge, ...]

    def __post_init__(self):
        if len(self.merges) != max(self.leaf_count - 1, 0):
            raise ClusterError("dendrogram must contain leaf_count - 1 merges")
        last = -math.inf
        for m in self.merges:
            if m.distance < last - 1e-12:
                raise ClusterError("linkage distances must be non-decreasing")
            last = max(last, m.distance)


def _pairwise_distances(points: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - points[None, :, :]
    return np.sqrt((diff * diff).sum(axis=2))


def _upgma(points: np.ndarray, weights: np.ndarray) -> Dendrogram:
    n = len(points)
    if n == 1:
        return Dendrogram(1, ())
    dist = _pairwise_distances(points)
    ids = list(range(n))
    sizes = list(float(w) for w in weights)
    merges = []
    next_id = n
    while len(ids) > 1:
        m = len(ids)
        iu = np.triu_indices(m, 1)
        vals = dist[iu]
        # first occurrence in row-major upper-triangle order is the
        # lexicographically smallest (id_a, id_b) pair, since ids ascend
        k = int(np.argmin(vals))
        i, j = int(iu[0][k]), int(iu[1][k])
        d = float(vals[k])
        si, sj = sizes[i], sizes[j]
        # average linkage: size-weighted mean of distances to the two parts
        row = (si * dist[i, :] + sj * dist[j, :]) / (si + sj)
        keep = [t for t in range(m) if t not in (i, j)]
        merges.append(Merge(ids[i], ids[j], d, next_id))
        new_row = row[keep]
        dist = dist[np.ix_(keep, keep)]
        dist = np.pad(dist, ((0, 1), (0, 1)))
        dist[-1, :-1] = new_row
        dist[:-1, -1] = new_row
        dist[-1, -1] = 0.0
        ids = [ids[t] for t in keep] + [next_id]
        sizes = [sizes[t] for t in keep] + [si + sj]
        next_id += 1
    return Dendrogram(n, tuple(merges))


def upgma_cluster(points) -> Dendrogram:
    """Cluster points (sequence of equal-length feature rows) by UPGMA.

    Ties in the minimum linkage distance break toward the smallest
    (id_a, id_b) pair.
    """
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.size == 0:
        raise ClusterError("need at least one point")
    if not np.all(np.isfinite(arr)):
        raise ClusterError("points must be finite")
    return _upgma(arr, np.ones(len(arr)))


def cut_dendrogram(dend: Dendrogram, threshold: float) -> list[set[int]]:
    """Flat clusters after removing merges above threshold.

    Returns leaf-index sets ordered by smallest member.
    """
    if threshold < 0:
        raise ClusterError("threshold must be >= 0")
    total = dend.leaf_count + len(dend.merges)
    parent = list(range(total))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for m in dend.merges:
        if m.distance <= threshold:
            ra, rb, rn = find(m.a), find(m.b), find(m.new_id)
            parent[ra] = rn
            parent[rb] = rn
    groups: dict[int, set[int]] = {}
    for leaf in range(dend.leaf_count):
        groups.setdefault(find(leaf), set()).add(leaf)
    return sorted(groups.values(), key=min)


TIER1_DEFAULT = (
    FeatureSpec("ext_load", 0.0, 1.0),
    FeatureSpec("bandwidth_mbps", 1.0, 1e5, log_scale=True),
)
TIER2_DEFAULT = (
    FeatureSpec("num_files", 1.0, 1e5, log_scale=True),
    FeatureSpec("total_size_bytes", 1e4, 1e12, log_scale=True),
    FeatureSpec("avg_file_size_bytes", 1e3, 1e9, log_scale=True),
    FeatureSpec("file_size_stddev_bytes", 1e3, 1e9, log_scale=True),
)
TIER3_DEFAULT = (
    FeatureSpec("bandwidth_mbps", 1.0, 1e5, log_scale=True),
    FeatureSpec("rtt_ms", 0.1, 1e3, log_scale=True),
)


@dataclass(frozen=True)
class StratifyConfig:
    tier1_features: tuple[FeatureSpec, ...] = TIER1_DEFAULT
    tier2_features: tuple[FeatureSpec, ...] = TIER2_DEFAULT
    tier3_features: tuple[FeatureSpec, ...] = TIER3_DEFAULT
    tier1_cut: float = 0.25
    tier2_cut: float = 0.25
    tier3_cut: float = 0.25
    load_band_k: float = 1.0   # interval boundaries at mean +- k * stddev

    def as_dict(self) -> dict:
        return {
            "tier1_features": [f.as_dict() for f in self.tier1_features],
            "tier2_features": [f.as_dict() for f in self.tier2_features],
            "tier3_features": [f.as_dict() for f in self.tier3_features],
            "tier1_cut": self.tier1_cut,
            "tier2_cut": self.tier2_cut,
            "tier3_cut": self.tier3_cut,
            "load_band_k": self.load_band_k,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "StratifyConfig":
        def specs(key):
            return tuple(FeatureSpec(**d) for d in obj[key])
        return cls(
            tier1_features=specs("tier1_features"),
            tier2_features=specs("tier2_features"),
            tier3_features=specs("tier3_features"),
            tier1_cut=obj["tier1_cut"],
            tier2_cut=obj["tier2_cut"],
            tier3_cut=obj["tier3_cut"],
            load_band_k=obj["load_band_k"],
        )


def tier1_vector(net: NetworkMeta, config: StratifyConfig) -> tuple[float, ...]:
    src = {"ext_load": net.ext_load, "bandwidth_mbps": net.bandwidth_mbps}
    return tuple(f.normalize(src[f.name]) for f in config.tier1_features)


def tier2_vector(ds: DatasetMeta, config: StratifyConfig) -> tuple[float, ...]:
    src = ds.as_dict()
    return tuple(f.normalize(src[f.name]) for f in config.tier2_features)


def tier3_vector(net: NetworkMeta, config: StratifyConfig) -> tuple[float, ...]:
    src = {"bandwidth_mbps": net.bandwidth_mbps, "rtt_ms": net.rtt_ms}
    return tuple(f.normalize(src[f.name]) for f in config.tier3_features)


@dataclass(frozen=True)
class Stratum:
    """One leaf of the stratification: a homogeneous group of log entries."""

    id: str
    tier1_key: str
    tier2_key: str
    tier3_key: str
    route: tuple[str, str]
    ext_load_interval: tuple[float, float]
    members: tuple[int, ...]
    centroids: dict = field(hash=False, compare=False, default_factory=dict)

    def contains_load(self, x: float) -> bool:
        lo, hi = self.ext_load_interval
        return (lo <= x < hi) or (x == hi == 1.0)

    @property
    def sibling_key(self) -> tuple[str, str, str]:
        return (self.tier1_key, self.tier2_key, self.tier3_key)

    def as_dict(self) -> dict:
        return {
            "id": self.id,
            "tier1_key": self.tier1_key,
            "tier2_key": self.tier2_key,
            "tier3_key": self.tier3_key,
            "route": list(self.route),
            "ext_load_interval": list(self.ext_load_interval),
            "members": list(self.members),
            "centroids": {k: list(v) for k, v in self.centroids.items()},
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "Stratum":
        return cls(
            id=obj["id"],
            tier1_key=obj["tier1_key"],
            tier2_key=obj["tier2_key"],
            tier3_key=obj["tier3_key"],
            route=tuple(obj["route"]),
            ext_load_interval=tuple(obj["ext_load_interval"]),
            members=tuple(obj["members"]),
            centroids={k: tuple(v) for k, v in obj["centroids"].items()},
        )


def _cluster_by_vectors(vectors: list[tuple[float, ...]], indices: list[int], cut: float):
    """Cluster entries by their feature vectors, deduplicating exact repeats.

    Identical vectors would merge pairwise at distance zero first, after which
    average linkage over the multiset equals multiplicity-weighted linkage
    over the unique vectors, so clustering uniques with counts is exact.
    Returns lists of entry indices ordered by smallest member vector.
    """
    by_vec: dict[tuple[float, ...], list[int]] = {}
    for vec, idx in zip(vectors, indices):
        by_vec.setdefault(vec, []).append(idx)
    uniq = sorted(by_vec)
    if len(uniq) == 1:
        return [sorted(by_vec[uniq[0]])]
    pts = np.array(uniq, dtype=float)
    weights = np.array([len(by_vec[u]) for u in uniq], dtype=float)
    dend = _upgma(pts, weights)
    clusters = cut_dendrogram(dend, cut)
    out = []
    for cl in clusters:   # already ordered by smallest unique index = smallest vector
        members: list[int] = []
        for u in sorted(cl):
            members.extend(by_vec[uniq[u]])
        out.append(sorted(members))
    return out


def _clamp01(x: float) -> float:
    return min(max(x, 0.0), 1.0)


def stratify(entries: list[TransferLogEntry], config: StratifyConfig | None = None) -> list[Stratum]:
    """Partition log entries into strata.

    Every entry lands in exactly one stratum; the result is independent of
    input order up to renumbering of entry indices.
    """
    if not entries:
        raise ClusterError("no entries to stratify")
    config = config or StratifyConfig()
    all_idx = list(range(len(entries)))
    t1 = [tier1_vector(entries[i].network, config) for i in all_idx]
    pending: list[tuple] = []

    groups1 = _cluster_by_vectors(t1, all_idx, config.tier1_cut)
    for i1, g1 in enumerate(groups1):
        key1 = f"net{i1}"
        t2 = [tier2_vector(entries[i].dataset, config) for i in g1]
        groups2 = _cluster_by_vectors(t2, g1, config.tier2_cut)
        for i2, g2 in enumerate(groups2):
            key2 = f"data{i2}"
            # sorted so the band edges do not depend on entry order
            loads = np.sort([entries[i].network.ext_load for i in g2])
            mean, std = float(loads.mean()), float(loads.std())
            b1 = _clamp01(mean - config.load_band_k * std)
            b2 = _clamp01(mean + config.load_band_k * std)
            bounds = [(0.0, b1), (b1, b2), (b2, 1.0)]
            buckets: list[list[int]] = [[], [], []]
            for i in g2:
                x = entries[i].network.ext_load
                b = 0 if x < b1 else (1 if x < b2 else 2)
                buckets[b].append(i)
            for b, members in enumerate(buckets):
                if not members:
                    continue
                interval = bounds[b]
                by_route: dict[tuple[str, str], list[int]] = {}
                for i in members:
                    by_route.setdefault(entries[i].network.route, []).append(i)
                for route in sorted(by_route):
                    g3 = by_route[route]
                    t3 = [tier3_vector(entries[i].network, config) for i in g3]
                    groups3 = _cluster_by_vectors(t3, g3, config.tier3_cut)
                    for i3, members3 in enumerate(groups3):
                        key3 = f"{route[0]}->{route[1]}/link{i3}"
                        pending.append((key1, key2, key3, route, interval, members3))
    strata = []
    for n, (key1, key2, key3, route, interval, members) in enumerate(pending):
        c1 = np.mean(sorted(tier1_vector(entries[i].network, config) for i in members), axis=0)
        c2 = np.mean(sorted(tier2_vector(entries[i].dataset, config) for i in members), axis=0)
        c3 = np.mean(sorted(tier3_vector(entries[i].network, config) for i in members), axis=0)
        strata.append(Stratum(
            id=f"s{n:03d}", tier1_key=key1, tier2_key=key2, tier3_key=key3,
            route=route, ext_load_interval=interval, members=tuple(members),
            centroids={"tier1": tuple(c1), "tier2": tuple(c2), "tier3": tuple(c3)},
        ))
    return strata


def _nearest_key(probe: tuple[float, ...], options: dict[str, tuple[float, ...]]) -> str:
    best_key, best_d = None, math.inf
    for key in sorted(options):
        c = options[key]
        d = math.dist(probe, c)
        if d < best_d:
            best_key, best_d = key, d
    return best_key


def assign_stratum(dataset: DatasetMeta, network: NetworkMeta,
                   strata: list[Stratum], config: StratifyConfig | None = None) -> Stratum:
    """Classify a probe transfer into the best-matching stratum.

    Filters to the probe's exact route, walks tiers by nearest centroid, then
    picks the load interval containing network.ext_load (nearest interval
    midpoint when none contains it, ties toward the lower interval).
    """
    if not strata:
        raise ClusterError("no strata")
    config = config or StratifyConfig()
    pool = [s for s in strata if s.route == network.route]
    if not pool:
        raise UnknownRouteError(
            f"no stratum for route {network.route[0]}->{network.route[1]}")

    for tier, vec in (("tier1", tier1_vector(network, config)),
                      ("tier2", tier2_vector(dataset, config)),
                      ("tier3", tier3_vector(network, config))):
        key_attr = f"{tier}_key"
        options = {}
        for s in pool:
            options.setdefault(getattr(s, key_attr), s.centroids[tier])
        key = _nearest_key(vec, options)
        pool = [s for s in pool if getattr(s, key_attr) == key]

    x = network.ext_load
    pool = sorted(pool, key=lambda s: s.ext_load_interval)
    containing = [s for s in pool if s.contains_load(x)]
    if containing:
        return containing[0]
    return min(pool, key=lambda s: (abs(x - (s.ext_load_interval[0] + s.ext_load_interval[1]) / 2),
                                    s.ext_load_interval[0]))
