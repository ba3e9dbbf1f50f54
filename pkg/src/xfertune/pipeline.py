"""End-to-end orchestration and JSON artifact formats.

The offline chain is ingest -> stratify -> fit -> optimize, each stage
reading the previous stage's artifact. Artifacts are schema-tagged JSON
written with sorted keys and fixed indentation so equal inputs give
byte-identical files. The online side wires the tuner to a simulated
endpoint and compares policies per file class.
"""
from __future__ import annotations

import itertools
import json
import math
from pathlib import Path

from .clustering import StratifyConfig, Stratum, stratify
from .logs import ParamConfig
from .optimizer import SLA, ParamTable, build_param_table
from .simulator import (DATASET_CLASSES, EndpointSpec, LoadScenario,
                        SimEndpoint, baseline_config, synth_file_sizes,
                        throughput_mbps, power_above_base_watts)
from .surfaces import StratumModels, fit_stratum_models, rmse_holdout
from .tuner import (FILE_CLASSES, FixedController, OnlineTuner, TransferReport,
                    dataset_meta_for, run_transfer)

SCHEMAS = {
    "strata": "xfertune/strata-v1",
    "models": "xfertune/models-v1",
    "table": "xfertune/table-v1",
    "transfer": "xfertune/transfer-v1",
    "compare": "xfertune/compare-v1",
}

COMPARE_POLICIES = ("fixed-baseline", "hla-max-tput", "hla-min-energy",
                    "static-optimal")


class PipelineError(ValueError):
    pass


def _to_jsonable(obj):
    if isinstance(obj, float) and math.isinf(obj):
        return "inf"
    if isinstance(obj, dict):
        return {k: _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    return obj


def write_json_artifact(path: str | Path, obj: dict) -> None:
    text = json.dumps(_to_jsonable(obj), sort_keys=True, indent=2)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
        fh.write("\n")


def read_json_artifact(path: str | Path, schema_key: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise PipelineError(f"{path}: malformed JSON: {exc.msg}") from exc
    want = SCHEMAS[schema_key]
    got = obj.get("schema") if isinstance(obj, dict) else None
    if got != want:
        raise PipelineError(f"{path}: expected schema {want}, found {got!r}")
    return obj


# -- strata ------------------------------------------------------------------

def strata_doc(config: StratifyConfig, strata) -> dict:
    return {"schema": SCHEMAS["strata"],
            "config": config.as_dict(),
            "strata": [s.as_dict() for s in strata]}


def load_strata(doc: dict):
    config = StratifyConfig.from_dict(doc["config"])
    return config, [Stratum.from_dict(d) for d in doc["strata"]]


def stratify_entries(entries, config: StratifyConfig | None = None):
    config = config or StratifyConfig()
    return config, stratify(entries, config)


# -- models ------------------------------------------------------------------

def fit_all_strata(entries, strata, holdout_seed: int = 0,
                   with_holdout: bool = True):
    """Fit per-stratum models; optionally attach holdout RMSE reports."""
    models: dict[str, StratumModels] = {}
    holdout: dict[str, dict] = {}
    for s in strata:
        members = [entries[i] for i in s.members]
        models[s.id] = fit_stratum_models(members, s.id)
        if with_holdout:
            holdout[s.id] = rmse_holdout(members, s.id, seed=holdout_seed).as_dict()
    return models, holdout


def models_doc(models: dict, holdout: dict | None = None) -> dict:
    doc = {"schema": SCHEMAS["models"],
           "strata": {sid: m.as_dict() for sid, m in models.items()}}
    if holdout:
        doc["holdout"] = holdout
    return doc


def load_models(doc: dict) -> dict:
    return {sid: StratumModels.from_dict(d) for sid, d in doc["strata"].items()}


# -- table -------------------------------------------------------------------

def table_doc(table: ParamTable) -> dict:
    return {"schema": SCHEMAS["table"], "table": table.as_dict()}


def load_table(doc: dict) -> ParamTable:
    return ParamTable.from_dict(doc["table"])


def optimize_all(models: dict, slas) -> ParamTable:
    return build_param_table(models, list(slas))


# -- online runs ---------------------------------------------------------------

def _class_sizes(classes) -> list:
    for c in classes:
        if c not in DATASET_CLASSES:
            raise PipelineError(f"unknown file class {c!r}")
    ordered = [c for c in FILE_CLASSES if c in classes]
    return [s for c in ordered for s in synth_file_sizes(DATASET_CLASSES[c])]


def run_tuned_transfer(spec: EndpointSpec, scenario: LoadScenario, config,
                       strata, models: dict, table: ParamTable, sla: SLA,
                       classes=FILE_CLASSES, interval_s: float = 1.0,
                       fail_at_s: float | None = None) -> TransferReport:
    endpoint = SimEndpoint(spec, scenario, interval_s=interval_s,
                           fail_at_s=fail_at_s)
    tuner = OnlineTuner(strata, table, models, sla, config=config)
    return run_transfer(endpoint, _class_sizes(classes), tuner)


def transfer_doc(spec, scenario, sla, report: TransferReport) -> dict:
    return {"schema": SCHEMAS["transfer"], "endpoint": spec.as_dict(),
            "scenario": scenario.as_dict(), "sla": sla.as_dict(),
            "report": report.as_dict()}


def _analytic_fixed_run(spec: EndpointSpec, cfg: ParamConfig,
                        scenario: LoadScenario, avg_file_size: float,
                        total_bytes: float):
    """Exact duration and energy of a fixed configuration over a piecewise
    constant load trace, no stepping."""
    remaining_mbit = total_bytes * 8.0 / 1e6
    t = 0.0
    energy = 0.0
    segments = list(scenario.segments)
    for k, (start, load) in enumerate(segments):
        end = segments[k + 1][0] if k + 1 < len(segments) else math.inf
        if t >= end:
            continue
        tput = throughput_mbps(spec, cfg, load, avg_file_size)
        power = power_above_base_watts(spec, cfg, tput)
        if tput <= 0.0:
            if math.isinf(end):
                return math.inf, math.inf
            energy += power * (end - t)
            t = end
            continue
        need = remaining_mbit / tput
        if t + need <= end:
            return t + need, energy + power * need
        energy += power * (end - t)
        remaining_mbit -= tput * (end - t)
        t = end
    return math.inf, math.inf


def _static_optimal_row(spec, scenario, lattice_axes: dict, cname: str) -> dict:
    meta = dataset_meta_for(synth_file_sizes(DATASET_CLASSES[cname]))
    best_t = None
    best_e = None
    names = list(lattice_axes)
    for combo in itertools.product(*(lattice_axes[n] for n in names)):
        cfg = ParamConfig(**dict(zip(names, combo)))
        duration, energy = _analytic_fixed_run(
            spec, cfg, scenario, meta.avg_file_size_bytes, meta.total_size_bytes)
        if math.isinf(duration):
            continue
        tput = meta.total_size_bytes * 8.0 / 1e6 / duration
        if best_t is None or tput > best_t[0]:
            best_t = (tput, cfg, duration)
        if best_e is None or energy < best_e[0]:
            best_e = (energy, cfg, duration)
    if best_t is None:
        raise PipelineError(f"no lattice configuration completes class {cname}")
    return {
        "policy": "static-optimal", "class": cname,
        "throughput_mbps": best_t[0], "energy_joules": best_e[0],
        "duration_s": best_t[2], "stratum_id": "",
        "params": {"max_tput": best_t[1].as_dict(),
                   "min_energy": best_e[1].as_dict()},
        "switch_count": 0,
    }


def compare_policies(spec: EndpointSpec, scenario: LoadScenario, config,
                     strata, models: dict, table: ParamTable,
                     classes=FILE_CLASSES, interval_s: float = 1.0) -> dict:
    """Run every policy over the same file set and report per-class rows.

    static-optimal is an oracle row: the best achievable throughput and the
    lowest achievable energy over the whole parameter lattice, generally two
    different configurations.
    """
    ordered_classes = [c for c in FILE_CLASSES if c in classes]
    sizes = _class_sizes(ordered_classes)
    rows = []
    totals = {}
    for policy in COMPARE_POLICIES:
        if policy == "static-optimal":
            continue
        endpoint = SimEndpoint(spec, scenario, interval_s=interval_s)
        if policy == "fixed-baseline":
            controller = FixedController(baseline_config(spec))
        else:
            sla = SLA.max_throughput() if policy == "hla-max-tput" else SLA.min_energy()
            controller = OnlineTuner(strata, table, models, sla, config=config)
        report = run_transfer(endpoint, sizes, controller)
        for crow in report.classes:
            rows.append({
                "policy": policy, "class": crow["class"],
                "throughput_mbps": crow["avg_throughput_mbps"],
                "energy_joules": crow["energy_joules"],
                "duration_s": crow["duration_s"],
                "stratum_id": crow["stratum_id"],
                "params": crow["final_params"],
                "switch_count": report.switch_count,
            })
        totals[policy] = {
            "duration_s": report.duration_s,
            "energy_joules": report.energy_joules,
            "avg_throughput_mbps": report.avg_throughput_mbps,
            "switch_count": report.switch_count,
            "warnings": list(report.warnings),
        }
    axes = models[sorted(models)[0]].lattice_axes()
    for cname in ordered_classes:
        rows.append(_static_optimal_row(spec, scenario, axes, cname))
    return {"schema": SCHEMAS["compare"], "endpoint": spec.as_dict(),
            "scenario": scenario.as_dict(), "interval_s": interval_s,
            "rows": rows, "totals": totals}
