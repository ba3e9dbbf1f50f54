"""Online tuning through a load spike.

A transfer of large files starts under light external load; ten seconds in,
a competing flow takes 60% of the link. The tuner notices the throughput
trend break, attributes it to the measured load shift, and switches to the
parameter surface trained for the heavier-load regime. A fixed
configuration just rides out the slowdown.
"""

from xfertune import SLA, assign_stratum, fit_all_strata, generate_training_logs, \
    optimize_all, stratify
from xfertune.clustering import StratifyConfig
from xfertune.logs import NetworkMeta
from xfertune.pipeline import run_tuned_transfer, _analytic_fixed_run
from xfertune.simulator import (DATASET_CLASSES, ENDPOINTS, LoadScenario,
                                baseline_config, synth_file_sizes)
from xfertune.tuner import dataset_meta_for


def main():
    entries = generate_training_logs(seed=0)
    config = StratifyConfig()
    strata = stratify(entries, config)
    models, _ = fit_all_strata(entries, strata, with_holdout=False)
    table = optimize_all(models, [SLA.max_throughput(), SLA.min_energy()])

    spec = ENDPOINTS["chameleon"]
    scenario = LoadScenario.step(0.2, 0.6, 10.0)
    print(f"endpoint {spec.name}: {spec.bandwidth_mbps:.0f} Mbps, "
          f"rtt {spec.rtt_ms:.0f} ms")
    print("scenario: external load 0.2, stepping to 0.6 at t=10s\n")

    # the tuner probes at zero external load, so classes start on the
    # lightest-load surface; replicate that probe to name the start stratum
    meta = dataset_meta_for(synth_file_sizes(DATASET_CLASSES["large"]))
    probe = NetworkMeta(source_id=spec.source_id, dest_id=spec.dest_id,
                        bandwidth_mbps=spec.bandwidth_mbps,
                        rtt_ms=spec.rtt_ms, ext_load=0.0)
    start = assign_stratum(meta, probe, strata, config)

    report = run_tuned_transfer(spec, scenario, config, strata, models, table,
                                SLA.max_throughput(), classes=("large",))
    print("tuned transfer (maximize throughput):")
    row = report.classes[0]
    print(f"  start surface {start.id}, params {row['initial_params']}")
    for ev in report.events:
        print(f"  t={ev['t_s']:6.1f}s  {ev['event']:<12} -> surface "
              f"{ev['stratum_id']}, params {ev['params']}")
    print(f"  ended on surface {row['stratum_id']}: {report.duration_s:.1f}s, "
          f"{report.avg_throughput_mbps:.0f} Mbps, "
          f"{report.energy_joules:.0f} J, {report.switch_count} switch(es)")

    # same files, same scenario, fixed default configuration
    duration, energy = _analytic_fixed_run(
        spec, baseline_config(spec), scenario,
        meta.avg_file_size_bytes, meta.total_size_bytes)
    tput = meta.total_size_bytes * 8.0 / 1e6 / duration
    print("\nfixed default configuration on the same scenario:")
    print(f"  done in {duration:.1f}s, {tput:.0f} Mbps, {energy:.0f} J")

    print(f"\ntuning gain: {report.avg_throughput_mbps / tput:.1f}x throughput,"
          f" {energy / report.energy_joules:.1f}x less energy")


if __name__ == "__main__":
    main()
