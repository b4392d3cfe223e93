"""Depth sweeps, noise sweeps, scaling fits and persistent run records.

Records are JSON documents (one per sweep) with a CSV side table holding
one row per sampled fidelity. Both are written through
:func:`atomic_write_text` so an interrupted run never leaves a truncated
file behind.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .ansatz import QaoaSchedule, factor_unitaries
from .gates import ChainLayout
from .optimize import IDEAL, Objective, OptimizerConfig, dual_anneal
from .qcore import operator_fidelity
from .targets import TargetSpec, get_target

FORMAT_VERSION = 1
CSV_COLUMNS = ("target", "depth", "sample", "seed", "fidelity", "model", "R")

# Cost values at or below this are optimizer convergence, not signal. The
# L-BFGS-B polish stops once a step gains less than ~2e-9 (its tolerance is
# absolute for costs below 1), so exact runs end anywhere from 1e-12 to ~1e-7.
CONVERGED_INFIDELITY = 1e-6


def code_version() -> str:
    from . import __version__

    return __version__


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    """Write ``text`` to ``path`` via a temporary file and a rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _resolve(target: str | TargetSpec) -> TargetSpec:
    return get_target(target) if isinstance(target, str) else target


# -- noise ------------------------------------------------------------------


@dataclass(frozen=True)
class NoiseConfig:
    """Uniform angle noise of half-width ``pi * R``."""

    R: float
    trials: int = 100
    rng_seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.R <= 1.0):
            raise ValueError(f"noise magnitude R must lie in [0, 1], got {self.R}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")


def perturb_schedule(s: QaoaSchedule, noise: NoiseConfig, draw_index: int) -> QaoaSchedule:
    """Shift every angle by an independent ``Uniform[-pi R, pi R]`` draw.

    The draw depends only on ``(noise.rng_seed, draw_index)``.
    """
    if noise.R == 0:
        return s
    rng = np.random.default_rng([noise.rng_seed, draw_index])
    half = math.pi * noise.R
    shift = rng.uniform(-half, half, size=s.angles.shape)
    return QaoaSchedule(s.angles + shift)


@dataclass
class NoiseResult:
    R: float
    mean: float
    std: float
    fidelities: list[float]
    trials: int
    rng_seed: int

    @property
    def stderr(self) -> float:
        return self.std / math.sqrt(self.trials)

    def to_dict(self) -> dict:
        return {
            "R": self.R,
            "mean": self.mean,
            "std": self.std,
            "trials": self.trials,
            "rng_seed": self.rng_seed,
            "fidelities": list(self.fidelities),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseResult":
        return cls(float(d["R"]), float(d["mean"]), float(d["std"]),
                   [float(x) for x in d["fidelities"]], int(d["trials"]), int(d["rng_seed"]))


def noise_sweep(s: QaoaSchedule, target: str | TargetSpec, noise: NoiseConfig,
                model: str = IDEAL, device=None) -> NoiseResult:
    """Mean and spread of the fidelity over ``noise.trials`` perturbations."""
    obj = Objective.for_target(_resolve(target), s.depth, model=model, device=device)
    fids = [obj.fidelity(perturb_schedule(s, noise, i).flat()) for i in range(noise.trials)]
    arr = np.asarray(fids)
    if np.all(arr == arr[0]):
        # R = 0 (or a flat landscape): report the value itself, free of summation rounding
        return NoiseResult(noise.R, fids[0], 0.0, fids, noise.trials, noise.rng_seed)
    std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return NoiseResult(noise.R, float(arr.mean()), std, fids, noise.trials, noise.rng_seed)


# -- depth sweeps -------------------------------------------------------------


@dataclass(frozen=True)
class SweepCell:
    depth: int
    sample: int
    seed: int
    fidelity: float
    params: tuple[float, ...] = ()

    def to_dict(self) -> dict:
        return {"depth": self.depth, "sample": self.sample, "seed": self.seed,
                "fidelity": self.fidelity, "params": list(self.params)}

    @classmethod
    def from_dict(cls, d: dict) -> "SweepCell":
        return cls(int(d["depth"]), int(d["sample"]), int(d["seed"]), float(d["fidelity"]),
                   tuple(float(x) for x in d.get("params", ())))


@dataclass(frozen=True)
class FitResult:
    """``1 - F ~ a * exp(-lam * p)`` fitted in log space."""

    a: float
    lam: float
    correlation: float
    points_used: int
    excluded_depths: tuple[int, ...] = ()
    fixed_amplitude: bool = False

    def to_dict(self) -> dict:
        return {"a": self.a, "lambda": self.lam, "correlation": self.correlation,
                "points_used": self.points_used, "excluded_depths": list(self.excluded_depths),
                "fixed_amplitude": self.fixed_amplitude}

    @classmethod
    def from_dict(cls, d: dict) -> "FitResult":
        return cls(float(d["a"]), float(d["lambda"]), float(d["correlation"]), int(d["points_used"]),
                   tuple(int(x) for x in d["excluded_depths"]), bool(d["fixed_amplitude"]))


@dataclass
class SweepRecord:
    """Self-describing result of a depth or noise sweep.

    Cells and noise rows are only ever appended.
    """

    target: str
    model: str
    kind: str = "depth"
    depths: list[int] = field(default_factory=list)
    cells: list[SweepCell] = field(default_factory=list)
    noise: list[NoiseResult] = field(default_factory=list)
    fit: FitResult | None = None
    config: dict = field(default_factory=dict)
    schedule: list[float] | None = None
    code_version: str = field(default_factory=code_version)
    format_version: int = FORMAT_VERSION

    def add_cell(self, cell: SweepCell) -> None:
        if not 0.0 <= cell.fidelity <= 1.0:
            raise ValueError(f"fidelity {cell.fidelity} outside [0, 1]")
        self.cells.append(cell)

    def fidelities(self, depth: int) -> list[float]:
        return [c.fidelity for c in self.cells if c.depth == depth]

    def best_cell(self, depth: int) -> SweepCell:
        # first maximum wins, matching the optimizer's tie rule
        cells = [c for c in self.cells if c.depth == depth]
        return max(cells, key=lambda c: c.fidelity)

    def to_dict(self) -> dict:
        return {
            "format_version": self.format_version,
            "code_version": self.code_version,
            "kind": self.kind,
            "target": self.target,
            "model": self.model,
            "config": self.config,
            "depths": list(self.depths),
            "cells": [c.to_dict() for c in self.cells],
            "noise": [r.to_dict() for r in self.noise],
            "fit": None if self.fit is None else self.fit.to_dict(),
            "schedule": self.schedule,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SweepRecord":
        if d.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported record format {d.get('format_version')!r}")
        return cls(
            target=d["target"], model=d["model"], kind=d["kind"],
            depths=[int(x) for x in d["depths"]],
            cells=[SweepCell.from_dict(c) for c in d["cells"]],
            noise=[NoiseResult.from_dict(r) for r in d["noise"]],
            fit=None if d["fit"] is None else FitResult.from_dict(d["fit"]),
            config=d["config"], schedule=d.get("schedule"),
            code_version=d["code_version"], format_version=d["format_version"],
        )

    def to_json(self) -> str:
        # repr-based float output round-trips exactly
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SweepRecord":
        return cls.from_dict(json.loads(text))

    def csv_rows(self) -> list[tuple]:
        rows = [(self.target, c.depth, c.sample, c.seed, repr(c.fidelity), self.model, "")
                for c in self.cells]
        depth = len(self.schedule) // 5 if self.schedule else ""
        for r in self.noise:
            rows += [(self.target, depth, i, r.rng_seed, repr(f), self.model, repr(r.R))
                     for i, f in enumerate(r.fidelities)]
        return rows

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        w.writerows(self.csv_rows())
        return buf.getvalue()

    def save(self, json_path, csv_path=None) -> None:
        atomic_write_text(json_path, self.to_json())
        if csv_path is not None:
            atomic_write_text(csv_path, self.to_csv())

    @classmethod
    def load(cls, json_path) -> "SweepRecord":
        with open(json_path) as fh:
            return cls.from_json(fh.read())


def cell_seeds(master_seed: int, count: int) -> list[int]:
    """Independent 32-bit seeds, one per sweep cell, in cell order."""
    return [int(c.generate_state(1)[0]) for c in np.random.SeedSequence(master_seed).spawn(count)]


def _run_cell(args) -> tuple[float, tuple[float, ...]]:
    target, depth, model, device, cfg = args
    obj = Objective.for_target(target, depth, model=model, device=device)
    res = dual_anneal(obj, cfg)
    return res.best_fidelity, tuple(float(x) for x in res.best_x)


def depth_sweep(target: str | TargetSpec, depths: Sequence[int], samples_per_depth: int,
                cfg: OptimizerConfig, model: str = IDEAL, device=None, jobs: int = 1,
                fit: bool = True) -> SweepRecord:
    """Run ``samples_per_depth`` independent optimizations at every depth.

    Cell ``k`` (depth-major order) is seeded by child ``k`` of
    ``SeedSequence(cfg.rng_seed)``. Optimizer restarts run serially inside
    a cell; ``jobs`` parallelizes across cells.
    """
    spec = _resolve(target)
    depths = [int(p) for p in depths]
    if not depths:
        raise ValueError("depths must be nonempty")
    if any(p < 1 for p in depths):
        raise ValueError("every depth must be >= 1")
    if samples_per_depth < 1:
        raise ValueError("samples_per_depth must be >= 1")
    layout = [(p, k) for p in depths for k in range(samples_per_depth)]
    seeds = cell_seeds(cfg.rng_seed, len(layout))
    tasks = [(spec.key, p, model, device, replace(cfg, rng_seed=sd, jobs=1))
             for (p, _), sd in zip(layout, seeds)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_cell, tasks))
    else:
        results = [_run_cell(t) for t in tasks]
    rec = SweepRecord(spec.key, model, "depth", depths,
                      config={"optimizer": cfg.to_dict(), "samples_per_depth": samples_per_depth})
    for (p, k), sd, (fid, params) in zip(layout, seeds, results):
        rec.add_cell(SweepCell(p, k, sd, fid, params))
    if fit and spec.is_state:
        rec.fit = fit_sweep(rec, fixed_amplitude=initial_infidelity(spec))
    return rec


def initial_infidelity(target: str | TargetSpec) -> float:
    """``1 - F`` of the ansatz input state (|+>^n) against a state target."""
    spec = _resolve(target)
    n = spec.num_qubits
    plus = np.full(2**n, 2 ** (-n / 2))
    return float(1.0 - abs(np.vdot(spec.state().amplitudes, plus)) ** 2)


def fit_sweep(rec: SweepRecord, fixed_amplitude: float | None = None,
              floor: float = CONVERGED_INFIDELITY) -> FitResult:
    depths = [c.depth for c in rec.cells]
    infid = [1.0 - c.fidelity for c in rec.cells]
    return fit_exponential(depths, infid, fixed_amplitude=fixed_amplitude, floor=floor)


def fit_exponential(depths: Sequence[float], infidelities: Sequence[float],
                    fixed_amplitude: float | None = None, floor: float = 0.0) -> FitResult:
    """Least-squares fit of ``log(1 - F) = log(a) - lam * p``.

    Points with infidelity ``<= floor`` count as converged and are
    excluded (their depths are listed in the result). With
    ``fixed_amplitude`` only ``lam`` is fitted. ``correlation`` is the
    Pearson coefficient of the retained ``(p, log(1 - F))`` pairs, or
    ``nan`` when either coordinate is constant.
    """
    p = np.asarray(depths, dtype=float)
    y = np.asarray(infidelities, dtype=float)
    if p.shape != y.shape:
        raise ValueError("depths and infidelities differ in length")
    keep = y > floor
    excluded = tuple(sorted({int(d) for d in p[~keep]}))
    p, y = p[keep], np.log(y[keep])
    if fixed_amplitude is not None:
        if not fixed_amplitude > 0:
            raise ValueError("fixed_amplitude must be positive")
        if p.size < 1 or not np.any(p):
            raise ValueError("need at least one nonzero depth above the floor")
        log_a = math.log(fixed_amplitude)
        lam = -float(np.dot(p, y - log_a) / np.dot(p, p))
    else:
        if p.size < 2 or np.ptp(p) == 0:
            raise ValueError("need points at two or more distinct depths above the floor")
        slope, log_a = np.polyfit(p, y, 1)
        lam = -float(slope)
    if p.size > 1 and np.ptp(p) > 0 and np.ptp(y) > 0:
        r = float(np.corrcoef(p, y)[0, 1])
    else:
        r = float("nan")
    # an exactly flat series has no decay; keep the sign clean
    if np.ptp(y) == 0 and fixed_amplitude is None:
        lam = 0.0
    return FitResult(float(math.exp(log_a)), lam, r, int(p.size), excluded, fixed_amplitude is not None)


# -- trajectories -------------------------------------------------------------


def fidelity_trajectory(s: QaoaSchedule, target: str | TargetSpec) -> list[float]:
    """Fidelity after each of the ``5p`` factors, in the order they act."""
    spec = _resolve(target)
    layout = ChainLayout(spec.num_qubits)
    out: list[float] = []
    if spec.is_state:
        tgt = spec.state().amplitudes
        vec = np.full(layout.dim, 2 ** (-layout.num_qubits / 2), dtype=complex)
        for u in factor_unitaries(s, layout):
            vec = u @ vec
            out.append(float(abs(np.vdot(tgt, vec)) ** 2))
    else:
        tgt = spec.unitary()
        acc = np.eye(layout.dim, dtype=complex)
        for u in factor_unitaries(s, layout):
            acc = u @ acc
            out.append(operator_fidelity(acc, tgt, check_unitary=False))
    return out
