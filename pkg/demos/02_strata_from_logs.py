"""From a raw transfer log to strata.

Historical transfers are grouped three times over: first by network
similarity (external load level, bandwidth), then by dataset shape (file
count and sizes), then by route and path characteristics. Each resulting
stratum also carries an external-load interval, the handle the online
tuner uses to find its lighter/heavier-load siblings.
"""

from xfertune import assign_stratum, generate_training_logs, stratify
from xfertune.clustering import StratifyConfig


def main():
    entries = generate_training_logs(seed=0)
    print(f"synthesized corpus: {len(entries)} log entries, "
          f"{len({e.network.route for e in entries})} route(s)")

    config = StratifyConfig()
    strata = stratify(entries, config)
    print(f"stratified into {len(strata)} strata:\n")
    print(f"{'id':<6} {'entries':>7} {'route':<12} {'files':>6} "
          f"{'load interval':<22}")
    for s in strata:
        sample = entries[s.members[0]]
        lo, hi = s.ext_load_interval
        print(f"{s.id:<6} {len(s.members):>7} "
              f"{'->'.join(s.route):<12} {sample.dataset.num_files:>6} "
              f"[{lo:.3f}, {hi:.3f})")

    # every dataset class lands in its own family of load-banded siblings
    print("\nsiblings share everything but the load band; the tuner walks")
    print("between them when the measured external load shifts:")
    fam = {}
    for s in strata:
        fam.setdefault(s.sibling_key, []).append(s.id)
    for key, ids in sorted(fam.items()):
        print(f"  {' <-> '.join(sorted(ids))}")

    # new transfers are assigned to the nearest stratum, no refit needed
    probe = entries[100]
    s = assign_stratum(probe.dataset, probe.network, strata, config)
    print(f"\nprobe entry (load {probe.network.ext_load}, "
          f"{probe.dataset.num_files} files) -> stratum {s.id}")


if __name__ == "__main__":
    main()
