"""Deterministic transfer simulator and training-log generator.

The throughput law is the smallest of three caps: the share of the link left
over by external load, the aggregate window limit of all TCP streams, and
what the allotted cores can push at their clock. Small files then pay a
per-file startup cost that pipelining amortizes, so concurrency and
pipelining help small-file sets while stream parallelism helps large files
on long fat links. Power above the idle baseline is a frequency power law on
the active cores plus a per-Mbps network term; logged energies are above
baseline.

Nothing here reads a clock or other ambient state: equal seeds and inputs
give byte-identical outputs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .logs import (DatasetMeta, NetworkMeta, ParamConfig, ParamLattice,
                   TransferLogEntry, validate_params)
from .tuner import EndpointFailure, FixedController, MonitorSample, run_transfer


class SimulationError(ValueError):
    pass


@dataclass(frozen=True)
class EndpointSpec:
    """A source/destination pair and the knobs of its energy model."""

    name: str
    source_id: str
    dest_id: str
    bandwidth_mbps: float
    rtt_ms: float
    bdp_bytes: float
    cpu_cores: int
    freq_ladder_mhz: tuple[int, ...]
    core_power_watts: float = 6.0        # per active core at top frequency
    power_exponent: float = 2.2          # frequency scaling of core power
    net_power_watts_per_mbps: float = 0.003
    base_power_watts: float = 35.0       # idle draw, excluded from logs
    file_overhead_s: float = 0.005       # per-file startup cost
    window_bytes: float = 4e6            # per-stream TCP window
    core_mbps: float = 2500.0            # copy bandwidth per core at top freq

    def __post_init__(self):
        expect = self.bandwidth_mbps * self.rtt_ms * 125.0
        if abs(self.bdp_bytes - expect) > 0.01 * expect:
            raise SimulationError(
                f"{self.name}: bdp_bytes inconsistent with bandwidth * rtt")
        if list(self.freq_ladder_mhz) != sorted(set(self.freq_ladder_mhz)):
            raise SimulationError(f"{self.name}: freq ladder must be sorted distinct")

    @property
    def max_freq_mhz(self) -> int:
        return self.freq_ladder_mhz[-1]

    def as_dict(self) -> dict:
        return {
            "name": self.name, "source_id": self.source_id, "dest_id": self.dest_id,
            "bandwidth_mbps": self.bandwidth_mbps, "rtt_ms": self.rtt_ms,
            "bdp_bytes": self.bdp_bytes, "cpu_cores": self.cpu_cores,
            "freq_ladder_mhz": list(self.freq_ladder_mhz),
        }


ENDPOINTS = {
    "chameleon": EndpointSpec(
        name="chameleon", source_id="uc", dest_id="tacc",
        bandwidth_mbps=10000.0, rtt_ms=32.0, bdp_bytes=40e6,
        cpu_cores=24, freq_ladder_mhz=(1200, 1800, 2300)),
    "cloudlab": EndpointSpec(
        name="cloudlab", source_id="wisc", dest_id="utah",
        bandwidth_mbps=1000.0, rtt_ms=36.0, bdp_bytes=4.5e6,
        cpu_cores=10, freq_ladder_mhz=(1200, 1800, 2400)),
    "intercloud": EndpointSpec(
        name="intercloud", source_id="tacc", dest_id="wisc",
        bandwidth_mbps=1000.0, rtt_ms=48.0, bdp_bytes=6e6,
        cpu_cores=16, freq_ladder_mhz=(1200, 1800, 2200)),
}

# file-set classes: ~102 KiB avg / 1.94 GiB, ~2.4 MiB avg / 11.70 GiB,
# ~223 MiB avg / 27.85 GiB
DATASET_CLASSES = {
    "small": DatasetMeta(num_files=20000, total_size_bytes=2083059302.0,
                         avg_file_size_bytes=104366.0,
                         file_size_stddev_bytes=29757.0),
    "medium": DatasetMeta(num_files=5000, total_size_bytes=12562779340.0,
                          avg_file_size_bytes=2516582.0,
                          file_size_stddev_bytes=283115.0),
    "large": DatasetMeta(num_files=128, total_size_bytes=29903709798.0,
                         avg_file_size_bytes=233596517.0,
                         file_size_stddev_bytes=15928917.0),
}

DEFAULT_LOADS = (0.2, 0.35, 0.5)


def default_lattice(spec: EndpointSpec) -> ParamLattice:
    return ParamLattice(
        cpu_num=tuple(v for v in (1, 2, 4, 8) if v <= spec.cpu_cores),
        cpu_freq_mhz=tuple(spec.freq_ladder_mhz),
        cc=(1, 4, 8, 16),
        p=(1, 4, 8),
        pp=(0, 4, 8),
    )


def baseline_config(spec: EndpointSpec) -> ParamConfig:
    """Untuned reference: single stream, no pipelining, node fully powered."""
    return ParamConfig(cpu_num=spec.cpu_cores, cpu_freq_mhz=spec.max_freq_mhz,
                       cc=1, p=1, pp=0)


def throughput_mbps(spec: EndpointSpec, params: ParamConfig, ext_load: float,
                    avg_file_size_bytes: float) -> float:
    """Achieved application throughput for one configuration."""
    if not 0.0 <= ext_load <= 1.0:
        raise SimulationError("ext_load must be in [0, 1]")
    share = (1.0 - ext_load) * spec.bandwidth_mbps
    window_cap = params.cc * params.p * spec.window_bytes * 8.0 / (spec.rtt_ms * 1000.0)
    cpu_cap = spec.core_mbps * params.cpu_num * (params.cpu_freq_mhz / spec.max_freq_mhz)
    raw = min(share, window_cap, cpu_cap)
    if raw <= 0.0:
        return 0.0
    # cc files in flight finish together, paying one amortized startup each
    file_time = avg_file_size_bytes * 8e-6 * params.cc / raw
    overhead = spec.file_overhead_s / (1.0 + params.pp)
    return raw * file_time / (file_time + overhead)


def power_above_base_watts(spec: EndpointSpec, params: ParamConfig,
                           tput_mbps: float) -> float:
    freq_frac = params.cpu_freq_mhz / spec.max_freq_mhz
    core = spec.core_power_watts * params.cpu_num * freq_frac ** spec.power_exponent
    return core + spec.net_power_watts_per_mbps * tput_mbps


def generate_training_logs(specs=None, lattice: ParamLattice | None = None,
                           loads=DEFAULT_LOADS, classes=None, sweeps: int = 1,
                           noise: float = 0.0, seed: int = 0):
    """Synthesize a historical log corpus over the full parameter lattice.

    One entry per (endpoint, sweep, load, file-class, configuration).
    noise > 0 perturbs throughput and power multiplicatively; energy is
    always power * duration exactly, so entries stay self-consistent.
    """
    specs = list(specs) if specs is not None else [ENDPOINTS["chameleon"]]
    classes = dict(classes) if classes is not None else dict(DATASET_CLASSES)
    if sweeps < 1:
        raise SimulationError("sweeps must be >= 1")
    if noise < 0:
        raise SimulationError("noise must be >= 0")
    for load in loads:
        if not 0.0 <= load < 1.0:
            raise SimulationError("training loads must be in [0, 1)")
    rng = np.random.default_rng(seed)
    entries = []
    ts = 0
    for spec in specs:
        lat = lattice or default_lattice(spec)
        for _ in range(sweeps):
            for load in loads:
                for ds in classes.values():
                    for cfg in lat.configs():
                        t = throughput_mbps(spec, cfg, load, ds.avg_file_size_bytes)
                        p = power_above_base_watts(spec, cfg, t)
                        if noise > 0.0:
                            t *= max(1e-9, 1.0 + noise * rng.standard_normal())
                            t = min(t, spec.bandwidth_mbps)
                            p *= max(0.0, 1.0 + noise * rng.standard_normal())
                        duration = ds.total_size_bytes * 8.0 / 1e6 / t
                        entries.append(TransferLogEntry(
                            params=cfg, dataset=ds,
                            network=NetworkMeta(
                                source_id=spec.source_id, dest_id=spec.dest_id,
                                bandwidth_mbps=spec.bandwidth_mbps,
                                rtt_ms=spec.rtt_ms, ext_load=load),
                            throughput_mbps=t, energy_joules=p * duration,
                            avg_power_watts=p, duration_s=duration,
                            timestamp_s=float(ts)))
                        ts += 1
    return entries


@dataclass(frozen=True)
class LoadScenario:
    """External load over time, piecewise constant. Segments are
    (start_s, load) with the first start at zero."""

    segments: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if not self.segments or self.segments[0][0] != 0.0:
            raise SimulationError("scenario must start at t=0")
        starts = [s for s, _ in self.segments]
        if starts != sorted(set(starts)):
            raise SimulationError("segment starts must be strictly increasing")
        for _, load in self.segments:
            if not 0.0 <= load < 1.0:
                raise SimulationError("scenario loads must be in [0, 1)")

    @classmethod
    def constant(cls, load: float) -> "LoadScenario":
        return cls(((0.0, load),))

    @classmethod
    def step(cls, before: float, after: float, at_s: float) -> "LoadScenario":
        return cls(((0.0, before), (float(at_s), after)))

    def load_at(self, t_s: float) -> float:
        load = self.segments[0][1]
        for start, value in self.segments:
            if start <= t_s:
                load = value
        return load

    def as_dict(self) -> dict:
        return {"segments": [list(s) for s in self.segments]}

    @classmethod
    def from_dict(cls, obj: dict) -> "LoadScenario":
        return cls(tuple((float(a), float(b)) for a, b in obj["segments"]))


class SimEndpoint:
    """Fixed-interval stepping endpoint over a load scenario.

    The clock persists across begin() calls so multi-class transfers see one
    continuous scenario. An optional fail_at_s raises EndpointFailure on the
    first step at or past that time.
    """

    def __init__(self, spec: EndpointSpec, scenario: LoadScenario | None = None,
                 interval_s: float = 1.0, fail_at_s: float | None = None):
        if interval_s <= 0:
            raise SimulationError("interval_s must be > 0")
        self.spec = spec
        self.scenario = scenario or LoadScenario.constant(0.0)
        self.interval_s = interval_s
        self.fail_at_s = fail_at_s
        self.clock_s = 0.0
        self._dataset: DatasetMeta | None = None
        self._params: ParamConfig | None = None
        self._remaining = 0.0

    def describe(self) -> NetworkMeta:
        return NetworkMeta(
            source_id=self.spec.source_id, dest_id=self.spec.dest_id,
            bandwidth_mbps=self.spec.bandwidth_mbps, rtt_ms=self.spec.rtt_ms,
            ext_load=self.scenario.load_at(self.clock_s))

    def begin(self, dataset: DatasetMeta, params: ParamConfig) -> None:
        self.set_params(params)
        self._dataset = dataset
        self._remaining = float(dataset.total_size_bytes)

    def set_params(self, params: ParamConfig) -> None:
        msg = validate_params(params)
        if msg is not None:
            raise SimulationError(msg)
        if params.cpu_num > self.spec.cpu_cores:
            raise SimulationError("cpu_num exceeds the endpoint's cores")
        self._params = params

    def step(self) -> MonitorSample | None:
        if self._dataset is None:
            raise SimulationError("begin a transfer before stepping")
        if self._remaining <= 0.0:
            return None
        if self.fail_at_s is not None and self.clock_s >= self.fail_at_s:
            raise EndpointFailure(f"endpoint failed at t={self.clock_s:.3f}s")
        load = self.scenario.load_at(self.clock_s)
        t = throughput_mbps(self.spec, self._params, load,
                            self._dataset.avg_file_size_bytes)
        capacity = t * 1e6 / 8.0 * self.interval_s
        if t <= 0.0:
            dt, moved = self.interval_s, 0.0
        elif self._remaining <= capacity:
            dt, moved = self._remaining * 8.0 / 1e6 / t, self._remaining
        else:
            dt, moved = self.interval_s, capacity
        power = power_above_base_watts(self.spec, self._params, t)
        self._remaining -= moved
        self.clock_s += dt
        return MonitorSample(dt_s=dt, throughput_mbps=t, power_watts=power,
                             ext_load=load, rtt_ms=self.spec.rtt_ms,
                             bytes_moved=moved)


def synth_file_sizes(meta: DatasetMeta) -> list:
    """Deterministic file set matching a class's mean and spread: half the
    files at avg - stddev, half at avg + stddev (even counts assumed)."""
    lo = int(round(meta.avg_file_size_bytes - meta.file_size_stddev_bytes))
    hi = int(round(meta.avg_file_size_bytes + meta.file_size_stddev_bytes))
    if lo < 1:
        raise SimulationError("stddev too large for synthetic file set")
    half = meta.num_files // 2
    return [lo] * half + [hi] * (meta.num_files - half)


def run_simulation(endpoint: SimEndpoint, file_sizes, policy):
    """Run a transfer under a controller, or a bare ParamConfig run fixed."""
    controller = FixedController(policy) if isinstance(policy, ParamConfig) else policy
    return run_transfer(endpoint, file_sizes, controller)
