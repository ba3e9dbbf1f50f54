"""Every policy over the same workload, side by side.

fixed-baseline runs the endpoint's default configuration. The two tuned
policies start from the parameter table and adapt online. static-optimal
is the hindsight bound: the single best lattice configuration for each
objective, found by exhaustive search with exact segment arithmetic.
"""

from xfertune import SLA, compare_policies, fit_all_strata, generate_training_logs, optimize_all, stratify
from xfertune.clustering import StratifyConfig
from xfertune.simulator import ENDPOINTS, LoadScenario


def main():
    entries = generate_training_logs(seed=0)
    config = StratifyConfig()
    strata = stratify(entries, config)
    models, _ = fit_all_strata(entries, strata, with_holdout=False)
    table = optimize_all(models, [SLA.max_throughput(), SLA.min_energy()])

    spec = ENDPOINTS["chameleon"]
    doc = compare_policies(spec, LoadScenario.constant(0.2), config, strata,
                           models, table)

    print("constant external load 0.2, all three file classes:\n")
    print(f"{'policy':<16} {'class':<8} {'Mbps':>9} {'joules':>10} "
          f"{'seconds':>9} {'switches':>9}")
    for r in doc["rows"]:
        print(f"{r['policy']:<16} {r['class']:<8} "
              f"{r['throughput_mbps']:>9.1f} {r['energy_joules']:>10.1f} "
              f"{r['duration_s']:>9.1f} {r['switch_count']:>9}")

    base = {r["class"]: r for r in doc["rows"] if r["policy"] == "fixed-baseline"}
    fast = {r["class"]: r for r in doc["rows"] if r["policy"] == "hla-max-tput"}
    lean = {r["class"]: r for r in doc["rows"] if r["policy"] == "hla-min-energy"}
    print("\nper class, tuned vs fixed default:")
    for c in base:
        gain = fast[c]["throughput_mbps"] / base[c]["throughput_mbps"]
        save = 1.0 - lean[c]["energy_joules"] / base[c]["energy_joules"]
        print(f"  {c:<8} {gain:5.1f}x throughput, {100 * save:5.1f}% energy saved")

    t = doc["totals"]
    print(f"\nwhole-workload totals: baseline "
          f"{t['fixed-baseline']['energy_joules']:.0f} J vs min-energy "
          f"{t['hla-min-energy']['energy_joules']:.0f} J")


if __name__ == "__main__":
    main()
