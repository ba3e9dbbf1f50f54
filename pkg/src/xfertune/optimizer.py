"""SLA-constrained parameter selection on fitted stratum models.

An SLA either caps predicted energy (maximize throughput under the cap) or
guarantees predicted throughput (minimize energy above the floor). Candidate
configurations come from critical points of every per-group model, found by
Newton iteration on the gradient from each cell center, rounded outward to
the observed parameter lattice, together with all grid knots. The best
feasible candidate wins with a deterministic tie-break.
"""
from __future__ import annotations

import itertools
import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass

import numpy as np

from .logs import PARAM_NAMES, ParamConfig
from .spline import Spline1D, Surface
from .surfaces import PARAM_GROUPS, StratumModels

NEWTON_MAX_ITER = 50
NEWTON_GRAD_TOL = 1e-10
EIGEN_TOL = 1e-9
DEDUPE_TOL = 1e-8

KIND_ENERGY_CAP = "energy-constrained"
KIND_THROUGHPUT_FLOOR = "throughput-guarantee"


class SLAError(ValueError):
    pass


class InfeasibleSLAError(Exception):
    """No lattice configuration satisfies the SLA under the fitted models."""

    def __init__(self, stratum_id: str, sla_id: str, reason: str):
        super().__init__(f"sla {sla_id} infeasible in stratum {stratum_id}: {reason}")
        self.stratum_id = stratum_id
        self.sla_id = sla_id
        self.reason = reason


@dataclass(frozen=True)
class SLA:
    """Service-level agreement: one bound, one objective.

    energy-constrained: predicted energy <= bound, maximize throughput.
    throughput-guarantee: predicted throughput >= bound, minimize energy.
    The extreme presets (bound=inf cap, bound=0 floor) express the pure
    max-throughput and min-energy objectives.
    """

    id: str
    kind: str
    bound: float

    def __post_init__(self):
        if self.kind not in (KIND_ENERGY_CAP, KIND_THROUGHPUT_FLOOR):
            raise SLAError(f"unknown sla kind: {self.kind}")
        if math.isnan(self.bound) or self.bound < 0:
            raise SLAError("sla bound must be a number >= 0")
        if self.kind == KIND_ENERGY_CAP and self.bound == 0:
            raise SLAError("energy cap must be > 0")
        if self.kind == KIND_THROUGHPUT_FLOOR and math.isinf(self.bound):
            raise SLAError("throughput floor must be finite")

    @classmethod
    def max_throughput(cls) -> "SLA":
        return cls(id="max-tput", kind=KIND_ENERGY_CAP, bound=math.inf)

    @classmethod
    def min_energy(cls) -> "SLA":
        return cls(id="min-energy", kind=KIND_THROUGHPUT_FLOOR, bound=0.0)

    def as_dict(self) -> dict:
        return {"id": self.id, "kind": self.kind,
                "bound": "inf" if math.isinf(self.bound) else self.bound}

    @classmethod
    def from_dict(cls, obj: dict) -> "SLA":
        bound = obj["bound"]
        return cls(id=obj["id"], kind=obj["kind"],
                   bound=math.inf if bound == "inf" else float(bound))


@dataclass(frozen=True)
class CriticalPoint:
    coords: tuple[float, ...]
    value: float
    kind: str                    # min | max | saddle | flat | boundary
    stationary: bool


def _classify_1d(s2: float) -> str:
    tol = EIGEN_TOL * max(1.0, abs(s2))
    if s2 > tol:
        return "min"
    if s2 < -tol:
        return "max"
    return "flat"


def _classify_2d(fxx: float, fxy: float, fyy: float) -> str:
    # closed-form eigenvalues of the symmetric 2x2 Hessian
    mean = 0.5 * (fxx + fyy)
    r = math.hypot(0.5 * (fxx - fyy), fxy)
    lo, hi = mean - r, mean + r
    tol = EIGEN_TOL * max(1.0, math.hypot(math.hypot(fxx, fyy), math.sqrt(2.0) * abs(fxy)))
    if lo > tol:
        return "min"
    if hi < -tol:
        return "max"
    if lo < -tol and hi > tol:
        return "saddle"
    return "flat"


def _cell_poly_1d(coeffs: np.ndarray, t: float, order: int) -> float:
    a0, a1, a2, a3 = coeffs
    if order == 0:
        return a0 + t * (a1 + t * (a2 + t * a3))
    if order == 1:
        return a1 + t * (2.0 * a2 + 3.0 * t * a3)
    return 2.0 * a2 + 6.0 * t * a3


def _newton_1d(coeffs: np.ndarray, lo: float, hi: float):
    t = 0.5 * (lo + hi)
    for _ in range(NEWTON_MAX_ITER):
        g = _cell_poly_1d(coeffs, t, 1)
        if abs(g) < NEWTON_GRAD_TOL:
            pad = 1e-9 * (hi - lo)
            if lo - pad <= t <= hi + pad:
                return min(max(t, lo), hi)
            return None
        h = _cell_poly_1d(coeffs, t, 2)
        if abs(h) < 1e-14 * max(1.0, abs(g)):
            return None
        t -= g / h
    return None


def _block_eval(block: np.ndarray, x: float, y: float, dx: int, dy: int) -> float:
    px = _pow_vec(x, dx)
    py = _pow_vec(y, dy)
    return float(px @ block @ py)


def _pow_vec(t: float, order: int) -> np.ndarray:
    if order == 0:
        return np.array([1.0, t, t * t, t ** 3])
    if order == 1:
        return np.array([0.0, 1.0, 2.0 * t, 3.0 * t * t])
    return np.array([0.0, 0.0, 2.0, 6.0 * t])


def _newton_2d(block: np.ndarray, xlo, xhi, ylo, yhi):
    x, y = 0.5 * (xlo + xhi), 0.5 * (ylo + yhi)
    for _ in range(NEWTON_MAX_ITER):
        gx = _block_eval(block, x, y, 1, 0)
        gy = _block_eval(block, x, y, 0, 1)
        if math.hypot(gx, gy) < NEWTON_GRAD_TOL:
            padx, pady = 1e-9 * (xhi - xlo), 1e-9 * (yhi - ylo)
            if xlo - padx <= x <= xhi + padx and ylo - pady <= y <= yhi + pady:
                return min(max(x, xlo), xhi), min(max(y, ylo), yhi)
            return None
        fxx = _block_eval(block, x, y, 2, 0)
        fxy = _block_eval(block, x, y, 1, 1)
        fyy = _block_eval(block, x, y, 0, 2)
        det = fxx * fyy - fxy * fxy
        if abs(det) < 1e-14 * max(1.0, (abs(fxx) + abs(fyy) + abs(fxy)) ** 2):
            return None
        x -= (fyy * gx - fxy * gy) / det
        y -= (fxx * gy - fxy * gx) / det
    return None


def _dedupe(points: list[CriticalPoint]) -> list[CriticalPoint]:
    kept: list[CriticalPoint] = []
    for p in sorted(points, key=lambda q: (not q.stationary, q.coords)):
        close = any(
            all(abs(a - b) <= DEDUPE_TOL * max(1.0, abs(a)) for a, b in zip(p.coords, k.coords))
            for k in kept)
        if not close:
            kept.append(p)
    return sorted(kept, key=lambda q: q.coords)


def find_critical_points(model) -> list[CriticalPoint]:
    """Stationary points of a fitted spline or surface plus all grid knots.

    Newton iteration runs from every cell center; converged interior points
    are classified by the sign pattern of the (closed-form) Hessian
    eigenvalues. Knots that are not stationary are kept as boundary
    candidates with kind "boundary".
    """
    points: list[CriticalPoint] = []
    if isinstance(model, Spline1D):
        knots = model.knots
        for i in range(len(knots) - 1):
            t = _newton_1d(model.coeffs[i], knots[i], knots[i + 1])
            if t is not None:
                points.append(CriticalPoint(
                    coords=(t,), value=float(_cell_poly_1d(model.coeffs[i], t, 0)),
                    kind=_classify_1d(_cell_poly_1d(model.coeffs[i], t, 2)),
                    stationary=True))
        for t in knots:
            g = model.deriv(float(t))
            stationary = abs(g) < NEWTON_GRAD_TOL * 10
            points.append(CriticalPoint(
                coords=(float(t),), value=model(float(t)),
                kind=_classify_1d(model.deriv2(float(t))) if stationary else "boundary",
                stationary=stationary))
        return _dedupe(points)
    if isinstance(model, Surface):
        xs, ys = model.xs, model.ys
        for i in range(len(xs) - 1):
            for j in range(len(ys) - 1):
                got = _newton_2d(model.coeffs[i, j], xs[i], xs[i + 1], ys[j], ys[j + 1])
                if got is None:
                    continue
                x, y = got
                block = model.coeffs[i, j]
                points.append(CriticalPoint(
                    coords=(x, y), value=_block_eval(block, x, y, 0, 0),
                    kind=_classify_2d(_block_eval(block, x, y, 2, 0),
                                      _block_eval(block, x, y, 1, 1),
                                      _block_eval(block, x, y, 0, 2)),
                    stationary=True))
        for x in xs:
            for y in ys:
                gx, gy = model.gradient(float(x), float(y))
                stationary = math.hypot(gx, gy) < NEWTON_GRAD_TOL * 10
                kind = "boundary"
                if stationary:
                    kind = _classify_2d(*model.hessian(float(x), float(y)))
                points.append(CriticalPoint(
                    coords=(float(x), float(y)), value=model(float(x), float(y)),
                    kind=kind, stationary=stationary))
        return _dedupe(points)
    raise TypeError("model must be Spline1D or Surface")


def _lattice_neighbors(value: float, axis: tuple[int, ...]) -> set[int]:
    """Nearest lattice values at or around a continuous coordinate."""
    out = set()
    i = bisect_right(axis, value)
    if i > 0:
        out.add(axis[i - 1])
    j = bisect_left(axis, value)
    if j < len(axis):
        out.add(axis[j])
    return out


def _group_candidates(models: StratumModels, group: tuple[str, ...]):
    """Candidate lattice tuples for one parameter group.

    All grid knots, plus every critical point of the group's energy and
    throughput models rounded to the enclosing lattice corners.
    """
    axes = [models.axis_values(p) for p in group]
    cands: set[tuple[int, ...]] = set(itertools.product(*axes))
    for metric_models in (models.energy, models.throughput):
        gm = next(m for m in metric_models if m.params == group)
        for cp in find_critical_points(gm.model):
            if not cp.stationary:
                continue
            per_axis = [_lattice_neighbors(c, axis) for c, axis in zip(cp.coords, axes)]
            cands.update(itertools.product(*per_axis))
    return sorted(cands)


@dataclass(frozen=True)
class OptimizationResult:
    stratum_id: str
    sla_id: str
    params: ParamConfig
    predicted_energy: float
    predicted_throughput: float
    candidate_count: int
    feasible_count: int

    def as_dict(self) -> dict:
        return {
            "stratum_id": self.stratum_id,
            "sla_id": self.sla_id,
            "params": self.params.as_dict(),
            "predicted_energy": self.predicted_energy,
            "predicted_throughput": self.predicted_throughput,
            "candidate_count": self.candidate_count,
            "feasible_count": self.feasible_count,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "OptimizationResult":
        return cls(
            stratum_id=obj["stratum_id"], sla_id=obj["sla_id"],
            params=ParamConfig(**obj["params"]),
            predicted_energy=obj["predicted_energy"],
            predicted_throughput=obj["predicted_throughput"],
            candidate_count=obj["candidate_count"],
            feasible_count=obj["feasible_count"],
        )


def candidate_configs(models: StratumModels) -> list[ParamConfig]:
    """Cross product of per-group candidate tuples, in lattice order."""
    per_group = [_group_candidates(models, g) for g in PARAM_GROUPS]
    configs = []
    for combo in itertools.product(*per_group):
        flat = {}
        for group, values in zip(PARAM_GROUPS, combo):
            flat.update(dict(zip(group, values)))
        configs.append(ParamConfig(**flat))
    return configs


def enumerate_lattice(models: StratumModels) -> list[ParamConfig]:
    """Every configuration on the observed parameter lattice."""
    axes = [models.axis_values(p) for p in PARAM_NAMES]
    return [ParamConfig(**dict(zip(PARAM_NAMES, combo)))
            for combo in itertools.product(*axes)]


def _sort_key(cfg: ParamConfig, objective: float):
    return (objective, cfg.cpu_num, cfg.cpu_freq_mhz, cfg.cc, cfg.p, cfg.pp)


def optimize_stratum(models: StratumModels, sla: SLA) -> OptimizationResult:
    """Best feasible lattice configuration for one stratum under one SLA."""
    cands = candidate_configs(models)
    best = None
    best_key = None
    feasible = 0
    for cfg in cands:
        e = models.predict_energy(cfg)
        t = models.predict_throughput(cfg)
        if sla.kind == KIND_ENERGY_CAP:
            if e > sla.bound:
                continue
            key = _sort_key(cfg, -t)
        else:
            if t < sla.bound:
                continue
            key = _sort_key(cfg, e)
        feasible += 1
        if best_key is None or key < best_key:
            best, best_key = (cfg, e, t), key
    if best is None:
        word = "cap" if sla.kind == KIND_ENERGY_CAP else "floor"
        raise InfeasibleSLAError(
            models.stratum_id, sla.id,
            f"no candidate satisfies the {word} {sla.bound} "
            f"({len(cands)} candidates checked)")
    cfg, e, t = best
    return OptimizationResult(
        stratum_id=models.stratum_id, sla_id=sla.id, params=cfg,
        predicted_energy=e, predicted_throughput=t,
        candidate_count=len(cands), feasible_count=feasible)


@dataclass(frozen=True)
class ParamTable:
    """Tuned parameters for every (stratum, SLA) pair.

    Infeasible pairs are kept with their reason so lookups fail loudly.
    """

    slas: tuple[SLA, ...]
    rows: dict                   # stratum_id -> sla_id -> row dict

    def lookup(self, stratum_id: str, sla_id: str) -> OptimizationResult:
        try:
            row = self.rows[stratum_id][sla_id]
        except KeyError:
            raise KeyError(f"no table row for ({stratum_id}, {sla_id})") from None
        if row["status"] != "ok":
            raise InfeasibleSLAError(stratum_id, sla_id, row["reason"])
        return OptimizationResult.from_dict(row["result"])

    def as_dict(self) -> dict:
        return {"slas": [s.as_dict() for s in self.slas], "rows": self.rows}

    @classmethod
    def from_dict(cls, obj: dict) -> "ParamTable":
        return cls(slas=tuple(SLA.from_dict(d) for d in obj["slas"]),
                   rows=obj["rows"])


def build_param_table(models_by_stratum: dict, slas: list[SLA]) -> ParamTable:
    ids = [s.id for s in slas]
    if len(set(ids)) != len(ids):
        raise SLAError("duplicate sla ids")
    rows: dict = {}
    for sid in sorted(models_by_stratum):
        rows[sid] = {}
        for sla in slas:
            try:
                res = optimize_stratum(models_by_stratum[sid], sla)
                rows[sid][sla.id] = {"status": "ok", "result": res.as_dict()}
            except InfeasibleSLAError as exc:
                rows[sid][sla.id] = {"status": "infeasible", "reason": exc.reason}
    return ParamTable(slas=tuple(slas), rows=rows)
