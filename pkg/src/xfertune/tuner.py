"""Online tuning of an in-flight transfer from periodic monitor samples.

Two feedback loops share one structure. The energy loop predicts energy to
completion each tick and reacts when the prediction grows or the remaining
budget cannot cover it; the throughput loop reacts when smoothed throughput
falls below its recent level or the guaranteed floor. Either way the reaction
is the same ladder: switch to the parameter surface of a sibling stratum in
the direction of the measured external load change (at most three switches
per transfer), after that fall back to heuristic single-parameter nudges.

Which loop runs follows from the SLA: energy caps and the pure min-energy
objective run the energy loop, throughput floors and the pure max-throughput
objective run the throughput loop.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .clustering import StratifyConfig, Stratum, assign_stratum
from .logs import DatasetMeta, NetworkMeta, ParamConfig
from .optimizer import (KIND_ENERGY_CAP, KIND_THROUGHPUT_FLOOR, SLA,
                        InfeasibleSLAError, ParamTable)

MIB = 1 << 20
SMALL_MAX_BYTES = 1 * MIB          # < 1 MiB: small
MEDIUM_MAX_BYTES = 50 * MIB        # < 50 MiB: medium, else large
FILE_CLASSES = ("small", "medium", "large")

SWITCH_CAP = 3


class TunerError(ValueError):
    pass


class EndpointFailure(Exception):
    """Endpoint died mid-transfer. `report` holds progress up to the failure."""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class MonitorSample:
    """One monitoring interval as reported by the endpoint."""

    dt_s: float
    throughput_mbps: float
    power_watts: float
    ext_load: float
    rtt_ms: float
    bytes_moved: float


@dataclass(frozen=True)
class TickResult:
    action: str | None           # switch-high | switch-low | heuristic-up | heuristic-down
    triggered: bool              # degradation condition fired this tick
    stratum_id: str
    params: ParamConfig


def cluster_files(sizes) -> dict:
    """Group file sizes into small/medium/large classes (lower-inclusive
    thresholds: exactly 1 MiB is medium, exactly 50 MiB is large)."""
    out = {c: [] for c in FILE_CLASSES}
    for s in sizes:
        if s <= 0:
            raise TunerError("file sizes must be positive")
        if s < SMALL_MAX_BYTES:
            out["small"].append(s)
        elif s < MEDIUM_MAX_BYTES:
            out["medium"].append(s)
        else:
            out["large"].append(s)
    return out


def dataset_meta_for(sizes) -> DatasetMeta:
    n = len(sizes)
    total = float(sum(sizes))
    avg = total / n
    var = sum((s - avg) ** 2 for s in sizes) / n
    return DatasetMeta(num_files=n, total_size_bytes=total,
                       avg_file_size_bytes=avg, file_size_stddev_bytes=math.sqrt(var))


def select_loop(sla: SLA) -> str:
    """Which feedback loop an SLA runs: 'energy' or 'throughput'."""
    if sla.kind == KIND_ENERGY_CAP:
        return "energy" if math.isfinite(sla.bound) else "throughput"
    return "energy" if sla.bound == 0 else "throughput"


@dataclass
class _ClassState:
    t_avg: float = 0.0
    t_last: float = 0.0
    past_e_pred: float = math.inf
    ref_ext: float = 0.0
    ext_last: float = 0.0
    ticks: int = 0
    history: list = field(default_factory=list)   # recent t_avg values


class OnlineTuner:
    """Stateful per-transfer controller.

    Drive it with start_transfer, then per file class start_class (which
    assigns the stratum and returns the tuned initial parameters) and tick
    for every monitor sample. Energy, elapsed time and the switch budget
    persist across classes; smoothing state resets per class.
    """

    def __init__(self, strata, table: ParamTable, models_by_stratum: dict,
                 sla: SLA, *, alpha: float = 0.1, beta: float = 0.1,
                 ewma_weight: float = 0.5, switch_cap: int = SWITCH_CAP,
                 config: StratifyConfig | None = None):
        if not 0 < alpha < 1 or not 0 < beta < 1:
            raise TunerError("alpha and beta must be in (0, 1)")
        if not 0 < ewma_weight <= 1:
            raise TunerError("ewma_weight must be in (0, 1]")
        self.strata = list(strata)
        self.table = table
        self.models = models_by_stratum
        self.sla = sla
        self.alpha = alpha
        self.beta = beta
        self.w = ewma_weight
        self.switch_cap = switch_cap
        self.config = config or StratifyConfig()
        self.loop = select_loop(sla)
        self.e_sla = sla.bound if (sla.kind == KIND_ENERGY_CAP and
                                   math.isfinite(sla.bound)) else math.inf
        self.t_sla = sla.bound if sla.kind == KIND_THROUGHPUT_FLOOR else 0.0
        self._reset_transfer(0.0)

    def _reset_transfer(self, total_bytes: float):
        self.remaining_bytes = total_bytes
        self.e_consumed = 0.0
        self.elapsed_s = 0.0
        self.switch_count = 0
        self.stratum: Stratum | None = None
        self.params: ParamConfig | None = None
        self.cls = _ClassState()
        self.warnings: list[str] = []
        self.events: list[dict] = []
        self._up_rr = 0
        self._down_rr = 0
        self._last_nudge = None   # (param, direction) of last heuristic change

    def start_transfer(self, total_bytes: float):
        if total_bytes <= 0:
            raise TunerError("total_bytes must be > 0")
        self._reset_transfer(float(total_bytes))

    def start_class(self, dataset: DatasetMeta, network: NetworkMeta) -> ParamConfig:
        """Assign the class to a stratum (probing with zero external load, so
        transfers start on the lightest-load surface) and return its tuned
        parameters."""
        probe = NetworkMeta(source_id=network.source_id, dest_id=network.dest_id,
                            bandwidth_mbps=network.bandwidth_mbps,
                            rtt_ms=network.rtt_ms, ext_load=0.0)
        self.stratum = assign_stratum(dataset, probe, self.strata, self.config)
        self.params = self.table.lookup(self.stratum.id, self.sla.id).params
        self.cls = _ClassState()
        return self.params

    # -- per-tick pipeline -------------------------------------------------

    def tick(self, sample: MonitorSample) -> TickResult:
        if self.stratum is None:
            raise TunerError("start_class before tick")
        if sample.dt_s <= 0:
            raise TunerError("sample dt_s must be > 0")
        st = self.cls
        dt = sample.dt_s
        first = st.ticks == 0
        t_avg = sample.throughput_mbps if first else (
            self.w * st.t_avg + (1.0 - self.w) * sample.throughput_mbps)
        if first:
            st.t_last = t_avg
            st.ref_ext = sample.ext_load
            st.ext_last = sample.ext_load
        d_e = sample.power_watts * dt
        ext = sample.ext_load
        self.remaining_bytes = max(0.0, self.remaining_bytes - sample.bytes_moved)
        t_rem = (self.remaining_bytes * 8.0 / 1e6 / t_avg) if t_avg > 0 else math.inf
        p_avg = (self.e_consumed + d_e) / (self.elapsed_s + dt)
        e_pred = p_avg * t_rem
        st.history.append(t_avg)

        if self.loop == "energy":
            triggered = (d_e + e_pred > (1.0 + self.beta) * st.past_e_pred or
                         d_e + e_pred > self.e_sla - self.e_consumed)
        else:
            triggered = (t_avg < (1.0 - self.alpha) * st.t_last or
                         t_avg < self.t_sla)

        action = None
        if triggered:
            if ext > (1.0 + self.beta) * st.ref_ext:
                if self.switch_count < self.switch_cap:
                    action = self._switch("high", ext)
                else:
                    action = self._heuristic(allow_down=True)
            elif self.switch_count >= self.switch_cap:
                action = self._heuristic(allow_down=True)
            # below the cap with no load shift to blame: hold, the switch
            # budget is saved for attributable changes
        elif ext < (1.0 - self.alpha) * st.ref_ext:
            if self.switch_count < self.switch_cap:
                action = self._switch("low", ext)
            else:
                action = self._heuristic(allow_down=False)

        st.t_avg = t_avg
        st.t_last = t_avg
        st.past_e_pred = e_pred
        st.ext_last = ext
        st.ticks += 1
        self.e_consumed += d_e
        self.elapsed_s += dt
        if action is not None:
            self.events.append({"t_s": self.elapsed_s, "event": action,
                                "stratum_id": self.stratum.id,
                                "params": self.params.as_dict()})
        return TickResult(action=action, triggered=triggered,
                          stratum_id=self.stratum.id, params=self.params)

    # -- reactions ----------------------------------------------------------

    def _siblings(self, direction: str):
        cur = self.stratum
        lo = cur.ext_load_interval[0]
        out = []
        for s in self.strata:
            if s.id == cur.id or s.sibling_key != cur.sibling_key or s.route != cur.route:
                continue
            if direction == "high" and s.ext_load_interval[0] > lo:
                out.append(s)
            if direction == "low" and s.ext_load_interval[0] < lo:
                out.append(s)
        return out

    def _warn(self, msg: str):
        if not self.warnings or self.warnings[-1] != msg:
            self.warnings.append(msg)

    def _switch(self, direction: str, ext: float):
        sibs = sorted(self._siblings(direction), key=lambda s: s.ext_load_interval)
        if not sibs:
            self._warn(f"no {direction}er-load surface available from {self.stratum.id}")
            return None
        containing = [s for s in sibs if s.contains_load(ext)]
        if containing:
            target = containing[0]
        else:
            target = min(sibs, key=lambda s: (
                abs(ext - (s.ext_load_interval[0] + s.ext_load_interval[1]) / 2),
                s.ext_load_interval[0]))
        try:
            params = self.table.lookup(target.id, self.sla.id).params
        except InfeasibleSLAError:
            self._warn(f"surface {target.id} infeasible under sla {self.sla.id}, staying")
            return None
        self.stratum = target
        self.params = params
        self.switch_count += 1
        self.cls.ref_ext = ext   # reference load is pinned at surface adoption
        return f"switch-{direction}"

    def _heuristic(self, allow_down: bool):
        """Single-parameter nudge from the recent throughput trend.

        Falling trend raises the next of (cc, p, pp) to its next lattice
        value; rising trend while over budget lowers the next of (pp, p, cc).
        A nudge that exactly reverses the previous one is suppressed.
        """
        h = self.cls.history
        if len(h) < 2:
            return None
        slope = h[-1] - h[-3] if len(h) >= 3 else h[-1] - h[-2]
        tol = 1e-12 * max(1.0, abs(h[-1]))
        if slope < -tol:
            order, direction = ("cc", "p", "pp"), +1
        elif slope > tol and allow_down:
            order, direction = ("pp", "p", "cc"), -1
        else:
            return None
        if direction > 0:
            name = order[self._up_rr % 3]
            self._up_rr += 1
        else:
            name = order[self._down_rr % 3]
            self._down_rr += 1
        if self._last_nudge == (name, -direction):
            return None
        axis = self.models[self.stratum.id].axis_values(name)
        i = axis.index(self.params.get(name))
        j = i + direction
        if not 0 <= j < len(axis):
            return None
        self.params = self.params.with_value(name, axis[j])
        self._last_nudge = (name, direction)
        return "heuristic-up" if direction > 0 else "heuristic-down"


class FixedController:
    """Drop-in controller that never reacts; runs one static configuration."""

    def __init__(self, params: ParamConfig):
        self.params = params
        self.stratum = None
        self.e_consumed = 0.0
        self.elapsed_s = 0.0
        self.switch_count = 0
        self.warnings: list[str] = []
        self.events: list[dict] = []

    def start_transfer(self, total_bytes: float):
        self.e_consumed = 0.0
        self.elapsed_s = 0.0

    def start_class(self, dataset: DatasetMeta, network: NetworkMeta) -> ParamConfig:
        return self.params

    def tick(self, sample: MonitorSample) -> TickResult:
        self.e_consumed += sample.power_watts * sample.dt_s
        self.elapsed_s += sample.dt_s
        return TickResult(action=None, triggered=False, stratum_id="",
                          params=self.params)


@dataclass(frozen=True)
class TransferReport:
    completed: bool
    classes: tuple
    duration_s: float
    energy_joules: float
    avg_throughput_mbps: float
    switch_count: int
    warnings: tuple
    events: tuple

    def as_dict(self) -> dict:
        return {
            "completed": self.completed,
            "classes": [dict(c) for c in self.classes],
            "duration_s": self.duration_s,
            "energy_joules": self.energy_joules,
            "avg_throughput_mbps": self.avg_throughput_mbps,
            "switch_count": self.switch_count,
            "warnings": list(self.warnings),
            "events": list(self.events),
        }


def run_transfer(endpoint, file_sizes, controller) -> TransferReport:
    """Move a file set through an endpoint under a controller.

    Files are clustered by size and the classes transferred smallest first,
    each class re-assigned to its own stratum. If the endpoint fails midway
    the raised EndpointFailure carries the partial report.
    """
    classes = cluster_files(file_sizes)
    plan = [(c, classes[c]) for c in FILE_CLASSES if classes[c]]
    if not plan:
        raise TunerError("no files to transfer")
    total_bytes = float(sum(file_sizes))
    controller.start_transfer(total_bytes)
    rows = []
    moved_total = 0.0

    def report(completed: bool) -> TransferReport:
        dur = controller.elapsed_s
        return TransferReport(
            completed=completed, classes=tuple(rows),
            duration_s=dur, energy_joules=controller.e_consumed,
            avg_throughput_mbps=(moved_total * 8.0 / 1e6 / dur) if dur > 0 else 0.0,
            switch_count=controller.switch_count,
            warnings=tuple(controller.warnings), events=tuple(controller.events))

    for cname, sizes in plan:
        ds = dataset_meta_for(sizes)
        params = controller.start_class(ds, endpoint.describe())
        endpoint.begin(ds, params)
        t0, e0 = controller.elapsed_s, controller.e_consumed
        moved = 0.0
        initial = params
        while True:
            try:
                sample = endpoint.step()
            except EndpointFailure as exc:
                rows.append(_class_row(cname, controller, ds, initial, t0, e0, moved))
                exc.report = report(False)
                raise
            if sample is None:
                break
            moved += sample.bytes_moved
            moved_total += sample.bytes_moved
            res = controller.tick(sample)
            if res.params != params:
                params = res.params
                endpoint.set_params(params)
        rows.append(_class_row(cname, controller, ds, initial, t0, e0, moved))
    return report(True)


def _class_row(cname, controller, ds: DatasetMeta, initial: ParamConfig,
               t0: float, e0: float, moved: float) -> dict:
    dur = controller.elapsed_s - t0
    sid = controller.stratum.id if getattr(controller, "stratum", None) else ""
    return {
        "class": cname,
        "stratum_id": sid,
        "num_files": ds.num_files,
        "bytes": ds.total_size_bytes,
        "bytes_moved": moved,
        "duration_s": dur,
        "energy_joules": controller.e_consumed - e0,
        "avg_throughput_mbps": (moved * 8.0 / 1e6 / dur) if dur > 0 else 0.0,
        "initial_params": initial.as_dict(),
        "final_params": controller.params.as_dict() if controller.params else initial.as_dict(),
    }
