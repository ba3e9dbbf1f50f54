"""Per-stratum performance models fitted from transfer logs.

Each stratum gets six models: energy and throughput, each decomposed into
three parameter groups, (cpu_num, cpu_freq_mhz) and (cc, p) as bicubic
surfaces and pp as a 1-D spline. A group's model is fitted on the slice of
entries whose remaining parameters sit at their modal values, so the three
groups describe orthogonal cuts through the same operating point. Combined
predictions add the groups and subtract twice the stratum mean, which cancels
the double-counted baseline of the two extra slices.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .logs import PARAM_NAMES, ParamConfig, TransferLogEntry
from .spline import Spline1D, Surface, fit_bicubic_surface, fit_natural_spline

PARAM_GROUPS: tuple[tuple[str, ...], ...] = (
    ("cpu_num", "cpu_freq_mhz"),
    ("cc", "p"),
    ("pp",),
)
METRICS = ("energy_joules", "throughput_mbps")


class SurfaceFitError(ValueError):
    pass


def _group_label(params: tuple[str, ...]) -> str:
    return "+".join(params)


def _modal_value(values: list[int]) -> int:
    counts: dict[int, int] = {}
    for v in values:
        counts[v] = counts.get(v, 0) + 1
    best = max(counts.values())
    return max(v for v, c in counts.items() if c == best)


def _conditioning(members: list[TransferLogEntry],
                  group: tuple[str, ...]) -> dict[str, int]:
    """Modal values of the parameters outside the group, ties toward largest.

    If the marginal modes combine to an empty joint slice (possible on ragged
    logs), fall back to the most frequent full conditioning tuple.
    """
    others = [p for p in PARAM_NAMES if p not in group]
    cond = {p: _modal_value([e.params.get(p) for e in members]) for p in others}
    if any(all(e.params.get(p) == v for p, v in cond.items()) for e in members):
        return cond
    tuples = [tuple(e.params.get(p) for p in others) for e in members]
    best = _modal_value_tuple(tuples)
    return dict(zip(others, best))


def _modal_value_tuple(tuples: list[tuple[int, ...]]) -> tuple[int, ...]:
    counts: dict[tuple[int, ...], int] = {}
    for t in tuples:
        counts[t] = counts.get(t, 0) + 1
    best = max(counts.values())
    return max(t for t, c in counts.items() if c == best)


def _slice_members(members, cond: dict[str, int]):
    return [e for e in members
            if all(e.params.get(p) == v for p, v in cond.items())]


def _fill_grid(grid: np.ndarray) -> np.ndarray:
    """Fill NaN cells by 1-D linear interpolation along rows, then columns,
    repeating until stable; any still-missing cells take the known mean."""
    g = grid.copy()
    while np.isnan(g).any():
        before = int(np.isnan(g).sum())
        for axis_rows in (g, g.T):
            for row in axis_rows:
                known = ~np.isnan(row)
                if known.sum() >= 2 and (~known).any():
                    idx = np.arange(len(row))
                    row[~known] = np.interp(idx[~known], idx[known], row[known])
        remaining = np.isnan(g)
        if int(remaining.sum()) == before:
            if before == g.size:
                raise SurfaceFitError("no observations to fill grid from")
            g[remaining] = g[~remaining].mean()
    return g


def _grid_2d(slice_members, xname: str, yname: str, metric: str):
    xs = sorted({e.params.get(xname) for e in slice_members})
    ys = sorted({e.params.get(yname) for e in slice_members})
    if len(xs) < 2:
        raise SurfaceFitError(f"insufficient distinct {xname} values in conditioning slice")
    if len(ys) < 2:
        raise SurfaceFitError(f"insufficient distinct {yname} values in conditioning slice")
    xi = {v: i for i, v in enumerate(xs)}
    yi = {v: i for i, v in enumerate(ys)}
    total = np.zeros((len(xs), len(ys)))
    count = np.zeros((len(xs), len(ys)))
    for e in slice_members:
        i, j = xi[e.params.get(xname)], yi[e.params.get(yname)]
        total[i, j] += getattr(e, metric)
        count[i, j] += 1
    with np.errstate(invalid="ignore"):
        grid = np.where(count > 0, total / np.maximum(count, 1), np.nan)
    return np.array(xs, dtype=float), np.array(ys, dtype=float), _fill_grid(grid)


def _grid_1d(slice_members, name: str, metric: str):
    xs = sorted({e.params.get(name) for e in slice_members})
    if len(xs) < 2:
        raise SurfaceFitError(f"insufficient distinct {name} values in conditioning slice")
    vals = []
    for v in xs:
        obs = [getattr(e, metric) for e in slice_members if e.params.get(name) == v]
        vals.append(sum(obs) / len(obs))
    return np.array(xs, dtype=float), np.array(vals)


@dataclass(frozen=True)
class GroupModel:
    """One parameter group's fitted model plus the slice it was fitted on."""

    params: tuple[str, ...]
    conditioning: dict
    metric: str
    model: object                # Surface for 2-D groups, Spline1D for 1-D

    @property
    def label(self) -> str:
        return _group_label(self.params)

    def value(self, cfg: ParamConfig) -> float:
        if len(self.params) == 2:
            return self.model(cfg.get(self.params[0]), cfg.get(self.params[1]))
        return self.model(cfg.get(self.params[0]))

    def in_domain(self, cfg: ParamConfig) -> bool:
        if len(self.params) == 2:
            return self.model.in_domain(cfg.get(self.params[0]), cfg.get(self.params[1]))
        return self.model.in_domain(cfg.get(self.params[0]))

    def axis_values(self, name: str) -> tuple[int, ...]:
        if len(self.params) == 2:
            knots = self.model.xs if name == self.params[0] else self.model.ys
        else:
            knots = self.model.knots
        return tuple(int(round(v)) for v in knots)

    def matches_slice(self, cfg: ParamConfig) -> bool:
        return all(cfg.get(p) == v for p, v in self.conditioning.items())

    def as_dict(self) -> dict:
        d = {"params": list(self.params), "conditioning": dict(self.conditioning),
             "metric": self.metric}
        if len(self.params) == 2:
            d["surface"] = {
                "xs": self.model.xs.tolist(), "ys": self.model.ys.tolist(),
                "coeffs": self.model.coeffs.tolist(), "grid": self.model.grid.tolist(),
            }
        else:
            d["spline"] = {
                "knots": self.model.knots.tolist(),
                "coeffs": self.model.coeffs.tolist(),
                "values": self.model.values.tolist(),
            }
        return d

    @classmethod
    def from_dict(cls, obj: dict) -> "GroupModel":
        params = tuple(obj["params"])
        if "surface" in obj:
            s = obj["surface"]
            model = Surface(xs=np.array(s["xs"]), ys=np.array(s["ys"]),
                            coeffs=np.array(s["coeffs"]), grid=np.array(s["grid"]))
        else:
            s = obj["spline"]
            model = Spline1D(knots=np.array(s["knots"]), coeffs=np.array(s["coeffs"]),
                             values=np.array(s["values"]))
        return cls(params=params, conditioning=dict(obj["conditioning"]),
                   metric=obj["metric"], model=model)


@dataclass(frozen=True)
class StratumModels:
    """All fitted models for one stratum plus combined predictors."""

    stratum_id: str
    energy: tuple[GroupModel, ...]
    throughput: tuple[GroupModel, ...]
    mean_energy: float
    mean_throughput: float
    entry_count: int

    def predict_energy(self, cfg: ParamConfig) -> float:
        return sum(m.value(cfg) for m in self.energy) - 2.0 * self.mean_energy

    def predict_throughput(self, cfg: ParamConfig) -> float:
        return sum(m.value(cfg) for m in self.throughput) - 2.0 * self.mean_throughput

    def in_domain(self, cfg: ParamConfig) -> bool:
        return all(m.in_domain(cfg) for m in self.energy + self.throughput)

    def axis_values(self, name: str) -> tuple[int, ...]:
        for m in self.energy:
            if name in m.params:
                return m.axis_values(name)
        raise SurfaceFitError(f"unknown parameter {name}")

    def lattice_axes(self) -> dict:
        return {p: self.axis_values(p) for p in PARAM_NAMES}

    def as_dict(self) -> dict:
        return {
            "stratum_id": self.stratum_id,
            "energy": [m.as_dict() for m in self.energy],
            "throughput": [m.as_dict() for m in self.throughput],
            "mean_energy": self.mean_energy,
            "mean_throughput": self.mean_throughput,
            "entry_count": self.entry_count,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "StratumModels":
        return cls(
            stratum_id=obj["stratum_id"],
            energy=tuple(GroupModel.from_dict(d) for d in obj["energy"]),
            throughput=tuple(GroupModel.from_dict(d) for d in obj["throughput"]),
            mean_energy=obj["mean_energy"],
            mean_throughput=obj["mean_throughput"],
            entry_count=obj["entry_count"],
        )


def fit_stratum_models(members: list[TransferLogEntry], stratum_id: str) -> StratumModels:
    """Fit the six per-group models on a stratum's member entries."""
    if not members:
        raise SurfaceFitError("no entries to fit")
    by_metric = {}
    for metric in METRICS:
        models = []
        for group in PARAM_GROUPS:
            cond = _conditioning(members, group)
            sl = _slice_members(members, cond)
            if len(group) == 2:
                xs, ys, grid = _grid_2d(sl, group[0], group[1], metric)
                model = fit_bicubic_surface(xs, ys, grid)
            else:
                xs, vals = _grid_1d(sl, group[0], metric)
                model = fit_natural_spline(xs, vals)
            models.append(GroupModel(params=group, conditioning=cond,
                                     metric=metric, model=model))
        by_metric[metric] = tuple(models)
    return StratumModels(
        stratum_id=stratum_id,
        energy=by_metric["energy_joules"],
        throughput=by_metric["throughput_mbps"],
        mean_energy=float(np.mean([e.energy_joules for e in members])),
        mean_throughput=float(np.mean([e.throughput_mbps for e in members])),
        entry_count=len(members),
    )


@dataclass(frozen=True)
class HoldoutReport:
    """Holdout accuracy of each fitted model, one RMSE per parameter group."""

    energy_rmse: dict
    throughput_rmse: dict
    mean_energy: float
    mean_throughput: float
    train_count: int
    test_count: int

    def as_dict(self) -> dict:
        return {
            "energy_rmse": dict(self.energy_rmse),
            "throughput_rmse": dict(self.throughput_rmse),
            "mean_energy": self.mean_energy,
            "mean_throughput": self.mean_throughput,
            "train_count": self.train_count,
            "test_count": self.test_count,
        }


def holdout_split(members: list[TransferLogEntry], seed: int = 0,
                  train_frac: float = 0.7):
    """70/30 split stratified per observed parameter tuple.

    Every tuple keeps at least one entry in train, so the train grid covers
    every observed lattice point and refitting cannot lose axis values.
    """
    if not members:
        raise SurfaceFitError("no entries to split")
    rng = np.random.default_rng(seed)
    by_tuple: dict[tuple, list[int]] = {}
    for i, e in enumerate(members):
        key = tuple(e.params.get(p) for p in PARAM_NAMES)
        by_tuple.setdefault(key, []).append(i)
    train_idx, test_idx = [], []
    for key in sorted(by_tuple):
        idx = list(by_tuple[key])
        rng.shuffle(idx)
        n_train = max(1, math.floor(train_frac * len(idx)))
        train_idx.extend(idx[:n_train])
        test_idx.extend(idx[n_train:])
    train = [members[i] for i in sorted(train_idx)]
    test = [members[i] for i in sorted(test_idx)]
    return train, test


def rmse_holdout(members: list[TransferLogEntry], stratum_id: str = "",
                 seed: int = 0, train_frac: float = 0.7) -> HoldoutReport:
    """Fit on a stratified train split, report per-model RMSE on held-out
    entries from each model's own conditioning slice (None when the slice
    has no test entries)."""
    train, test = holdout_split(members, seed=seed, train_frac=train_frac)
    try:
        models = fit_stratum_models(train, stratum_id)
    except SurfaceFitError as exc:
        raise SurfaceFitError(f"insufficient train coverage: {exc}") from exc

    def per_model(group_models):
        out = {}
        for m in group_models:
            errs = [m.value(e.params) - getattr(e, m.metric)
                    for e in test if m.matches_slice(e.params)]
            out[m.label] = float(np.sqrt(np.mean(np.square(errs)))) if errs else None
        return out

    return HoldoutReport(
        energy_rmse=per_model(models.energy),
        throughput_rmse=per_model(models.throughput),
        mean_energy=float(np.mean([e.energy_joules for e in members])),
        mean_throughput=float(np.mean([e.throughput_mbps for e in members])),
        train_count=len(train),
        test_count=len(test),
    )
