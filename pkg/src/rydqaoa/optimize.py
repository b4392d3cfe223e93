"""Gradient-free global search over schedule angles.

:func:`anneal` is a generalized simulated annealer: a heavy-tailed
(Tsallis) visiting distribution whose width follows a slowly decaying
temperature, a Metropolis-like acceptance rule with its own
``acceptance_parameter``, reheating when the temperature collapses, and
periodic local polishing of the best point. Local polishing uses
L-BFGS-B with finite-difference slopes, so only cost values are ever
requested from the objective.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.special import gammaln

from . import _backend
from .ansatz import QaoaSchedule, default_initial_state
from .gates import ChainLayout, diagonal_table
from .qcore import QuantumState
from .targets import TargetSpec, get_target

IDEAL = "ideal"
PHYSICAL = "physical"

DEFAULT_IDEAL_BUDGET = 200_000
DEFAULT_PHYSICAL_BUDGET = 20_000


class BudgetExhausted(Exception):
    pass


@dataclass(frozen=True, eq=False)
class Objective:
    """Infidelity of a schedule against a fixed target.

    ``target`` is a state vector (``kind="state"``) or a unitary
    (``kind="circuit"``). Use :meth:`for_target` to build one from the
    target registry.
    """

    target: np.ndarray
    kind: str
    num_qubits: int
    depth: int
    model: str = IDEAL
    device: object = None
    compensate: bool = False
    initial_state: np.ndarray | None = None
    label: str = ""

    def __post_init__(self):
        if self.kind not in ("state", "circuit"):
            raise ValueError(f"kind must be 'state' or 'circuit', got {self.kind!r}")
        if self.model not in (IDEAL, PHYSICAL):
            raise ValueError(f"model must be {IDEAL!r} or {PHYSICAL!r}")
        if self.depth < 1:
            raise ValueError("depth must be >= 1")
        tgt = np.ascontiguousarray(self.target, dtype=complex)
        object.__setattr__(self, "target", tgt)
        if self.kind == "state" and self.initial_state is None:
            object.__setattr__(
                self, "initial_state", default_initial_state(self.num_qubits).amplitudes.copy()
            )
        if self.initial_state is not None:
            object.__setattr__(
                self, "initial_state", np.ascontiguousarray(self.initial_state, dtype=complex)
            )
        if self.model == PHYSICAL and self.device is None:
            from .rydberg import DeviceConfig

            object.__setattr__(self, "device", DeviceConfig(self.num_qubits))

    @classmethod
    def for_target(cls, target: str | TargetSpec, depth: int, model: str = IDEAL, **kw) -> "Objective":
        spec = get_target(target) if isinstance(target, str) else target
        built = spec.state().amplitudes if spec.is_state else spec.unitary()
        return cls(built, spec.kind, spec.num_qubits, depth, model=model, label=spec.key, **kw)

    @property
    def dim(self) -> int:
        return 5 * self.depth

    @property
    def layout(self) -> ChainLayout:
        return ChainLayout(self.num_qubits)

    def fidelity(self, params) -> float:
        angles = QaoaSchedule.from_flat(params).angles
        if angles.shape[0] != self.depth:
            raise ValueError(f"expected {self.dim} parameters, got {angles.size}")
        n = self.num_qubits
        if self.model == IDEAL:
            diag = diagonal_table(self.layout)
            if self.kind == "state":
                f = _backend.apply_layers_overlap(self.initial_state, self.target, angles, diag, n)
            else:
                f = _backend.apply_layers_trace(self.target, angles, diag, n)
        else:
            f = self._physical_fidelity(QaoaSchedule(angles))
        return float(min(1.0, max(0.0, f)))

    def _physical_fidelity(self, s: QaoaSchedule) -> float:
        from .rydberg import embed_logical, evolve_vector, compile_schedule, physical_logical_operator, project_logical

        n = self.num_qubits
        try:
            if self.kind == "state":
                seq = compile_schedule(s, self.device, compensate=self.compensate)
                out = project_logical(evolve_vector(seq, self.device, embed_logical(self.initial_state, n)), n)
                # unnormalized projection: leaked population counts as infidelity
                return abs(np.vdot(self.target, out)) ** 2
            u = physical_logical_operator(s, self.device, compensate=self.compensate)
            return abs(np.vdot(self.target, u)) / 2**n
        except ValueError:
            # angle at the detuning singularity; not realizable
            return 0.0

    def cost(self, params) -> float:
        return 1.0 - self.fidelity(params)

    def __call__(self, params) -> float:
        return self.cost(params)


def evaluate_cost(obj: Objective, params: Sequence[float]) -> float:
    params = np.asarray(params, dtype=float).reshape(-1)
    if params.size == 0 or params.size % 5:
        raise ValueError(f"parameter vector length {params.size} is not a positive multiple of 5")
    if params.size != obj.dim:
        raise ValueError(f"objective has depth {obj.depth} ({obj.dim} parameters), got {params.size}")
    return obj.cost(params)


@dataclass(frozen=True)
class OptimizerConfig:
    bounds: tuple[float, float] = (-math.pi, math.pi)
    max_evaluations: int = DEFAULT_IDEAL_BUDGET
    restarts: int = 1
    initial_temperature: float = 5230.0
    visiting_parameter: float = 2.62
    acceptance_parameter: float = -5.0
    restart_temperature_ratio: float = 2e-5
    max_iterations: int = 1000
    local_refinement: bool = True
    local_maxiter: int = 1000
    periodic: bool = True
    stop_below: float = 1e-11
    rng_seed: int = 0
    jobs: int = 1

    def __post_init__(self):
        lo, hi = self.bounds
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise ValueError("bounds must be finite with lower < upper")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if not 1 < self.visiting_parameter < 3:
            raise ValueError("visiting_parameter must lie in (1, 3)")
        if not -1e4 < self.acceptance_parameter <= -5:
            raise ValueError("acceptance_parameter must lie in (-1e4, -5]")
        if self.max_evaluations < 0:
            raise ValueError("max_evaluations must be non-negative")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")

    def to_dict(self) -> dict:
        d = self.__dict__.copy()
        d["bounds"] = list(self.bounds)
        return d


@dataclass
class OptResult:
    best_x: np.ndarray
    best_cost: float
    evaluations_used: int
    restart_costs: list[float]
    seed: int
    budget_exhausted: bool = False
    restart_evaluations: list[int] = field(default_factory=list)

    @property
    def best_fidelity(self) -> float:
        return 1.0 - self.best_cost

    @property
    def restart_fidelities(self) -> list[float]:
        return [1.0 - c for c in self.restart_costs]

    @property
    def best_params(self) -> QaoaSchedule:
        return QaoaSchedule.from_flat(self.best_x)

    def to_dict(self) -> dict:
        return {
            "best_params": [float(v) for v in self.best_x],
            "best_cost": float(self.best_cost),
            "best_fidelity": float(self.best_fidelity),
            "evaluations_used": int(self.evaluations_used),
            "restart_fidelities": [float(v) for v in self.restart_fidelities],
            "restart_evaluations": [int(v) for v in self.restart_evaluations],
            "seed": int(self.seed),
            "budget_exhausted": bool(self.budget_exhausted),
        }


class _Counted:
    """Bounded, cached, counting wrapper around a cost function."""

    def __init__(self, func: Callable, lower: np.ndarray, upper: np.ndarray,
                 budget: int, periodic: bool, cache_size: int = 200_000):
        self.func = func
        self.lower = lower
        self.upper = upper
        self.budget = budget
        self.periodic = periodic
        self.nfev = 0
        self.cache: dict[bytes, float] = {}
        self.cache_size = cache_size
        self.best_x: np.ndarray | None = None
        self.best_f = math.inf

    def wrap(self, x: np.ndarray) -> np.ndarray:
        if self.periodic:
            span = self.upper - self.lower
            return self.lower + np.mod(x - self.lower, span)
        return np.clip(x, self.lower, self.upper)

    def __call__(self, x) -> float:
        x = self.wrap(np.asarray(x, dtype=float))
        key = x.tobytes()
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        if self.nfev >= self.budget:
            raise BudgetExhausted
        f = float(self.func(x))
        self.nfev += 1
        if len(self.cache) < self.cache_size:
            self.cache[key] = f
        # strict improvement keeps the earlier point on ties
        if f < self.best_f:
            self.best_f = f
            self.best_x = x.copy()
        return f


class _Visitor:
    """Tsallis visiting distribution of generalized simulated annealing."""

    TAIL_LIMIT = 1e8

    def __init__(self, qv: float, rng: np.random.Generator):
        self.qv = qv
        self.rng = rng
        f2 = math.exp((4.0 - qv) * math.log(qv - 1.0))
        f3 = math.exp((2.0 - qv) * math.log(2.0) / (qv - 1.0))
        self.f4p = math.sqrt(math.pi) * f2 / (f3 * (3.0 - qv))
        f5 = 1.0 / (qv - 1.0) - 0.5
        self.f6 = math.pi * (1.0 - f5) / math.sin(math.pi * (1.0 - f5)) / math.exp(gammaln(2.0 - f5))

    def step(self, temperature: float, size: int) -> np.ndarray:
        x, y = self.rng.normal(size=(2, size))
        f1 = math.exp(math.log(temperature) / (self.qv - 1.0))
        f4 = self.f4p * f1
        x = x * math.exp(-(self.qv - 1.0) * math.log(self.f6 / f4) / (3.0 - self.qv))
        den = np.exp((self.qv - 1.0) * np.log(np.abs(y)) / (3.0 - self.qv))
        out = x / den
        big = np.abs(out) > self.TAIL_LIMIT
        if np.any(big):
            out[big] = self.TAIL_LIMIT * self.rng.uniform(size=big.sum()) * np.sign(out[big])
        return out


def anneal(func: Callable, dim: int, cfg: OptimizerConfig, seed) -> tuple[np.ndarray, float, int, bool]:
    """One annealing run. Returns ``(best_x, best_f, evaluations, budget_exhausted)``."""
    rng = np.random.default_rng(seed)
    lower = np.full(dim, float(cfg.bounds[0]))
    upper = np.full(dim, float(cfg.bounds[1]))
    span = upper - lower
    f = _Counted(func, lower, upper, cfg.max_evaluations, cfg.periodic)
    visitor = _Visitor(cfg.visiting_parameter, rng)
    qv, qa = cfg.visiting_parameter, cfg.acceptance_parameter
    t1 = math.exp((qv - 1.0) * math.log(2.0)) - 1.0

    def local(x0):
        if not cfg.local_refinement or cfg.local_maxiter <= 0:
            return
        opts = {"maxiter": cfg.local_maxiter, "maxfun": max(1, cfg.max_evaluations - f.nfev)}
        if cfg.periodic:
            minimize(f, x0, method="L-BFGS-B", options=opts)
        else:
            minimize(f, x0, method="L-BFGS-B", bounds=list(zip(lower, upper)), options=opts)

    def done() -> bool:
        return f.best_f <= cfg.stop_below

    exhausted = False
    try:
        current = lower + rng.uniform(size=dim) * span
        e_cur = f(current)
        not_improved = 0
        it = 0
        while it < cfg.max_iterations and not done():
            temperature = cfg.initial_temperature * t1 / (math.exp((qv - 1.0) * math.log(it + 2.0)) - 1.0)
            if temperature < cfg.initial_temperature * cfg.restart_temperature_ratio:
                # reheat from a fresh random point
                current = lower + rng.uniform(size=dim) * span
                e_cur = f(current)
                it = 0
                continue
            t_step = temperature / float(it + 1)
            improved = False
            for j in range(2 * dim):
                if j < dim:
                    cand = current + visitor.step(temperature, dim)
                else:
                    cand = current.copy()
                    cand[j - dim] += visitor.step(temperature, 1)[0]
                cand = lower + np.mod(cand - lower, span)
                e = f(cand)
                if e < e_cur:
                    current, e_cur = cand, e
                    if e <= f.best_f:
                        improved = True
                        not_improved = 0
                else:
                    r = rng.uniform()
                    pqv_temp = 1.0 - (1.0 - qa) * (e - e_cur) / t_step
                    pqv = 0.0 if pqv_temp <= 0 else math.exp(math.log(pqv_temp) / (1.0 - qa))
                    if r <= pqv:
                        current, e_cur = cand, e
                    not_improved += 1
            if done():
                break
            if improved:
                local(f.best_x.copy())
                current, e_cur = f.best_x.copy(), f.best_f
            else:
                do_local = not_improved >= 1000
                if not do_local and not_improved < 90 * dim:
                    pls = math.exp(not_improved * (f.best_f - e_cur) / t_step)
                    do_local = pls >= rng.uniform()
                if do_local:
                    local(current.copy())
                    not_improved = 0
                    if f.best_f < e_cur:
                        current, e_cur = f.best_x.copy(), f.best_f
            it += 1
    except BudgetExhausted:
        exhausted = True
    if f.best_x is None:
        raise ValueError("no evaluations performed (max_evaluations is 0)")
    return f.best_x, f.best_f, f.nfev, exhausted


def _restart_seeds(seed: int, restarts: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(seed).spawn(restarts)


def _run_restart(args):
    func, dim, cfg, seed_seq = args
    return anneal(func, dim, cfg, seed_seq)


def dual_anneal(obj: Objective | Callable, cfg: OptimizerConfig, dim: int | None = None) -> OptResult:
    """Best of ``cfg.restarts`` independent annealing runs.

    Restart ``k`` is seeded by child ``k`` of ``SeedSequence(cfg.rng_seed)``,
    so adding restarts never changes the earlier ones. ``obj`` may also be
    any callable on a flat vector when ``dim`` is given.
    """
    if dim is None:
        dim = obj.dim
    seeds = _restart_seeds(cfg.rng_seed, cfg.restarts)
    tasks = [(obj, dim, cfg, s) for s in seeds]
    if cfg.jobs > 1 and cfg.restarts > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            runs = list(pool.map(_run_restart, tasks))
    else:
        runs = [_run_restart(t) for t in tasks]
    best_k = 0
    for k, run in enumerate(runs):
        if run[1] < runs[best_k][1]:
            best_k = k
    best_x = runs[best_k][0]
    best_cost = float(obj(best_x))  # recomputed for the report
    return OptResult(
        best_x=np.asarray(best_x, dtype=float),
        best_cost=best_cost,
        evaluations_used=int(sum(r[2] for r in runs)),
        restart_costs=[float(r[1]) for r in runs],
        seed=cfg.rng_seed,
        budget_exhausted=any(r[3] for r in runs),
        restart_evaluations=[int(r[2]) for r in runs],
    )


def warm_start_physical(obj_physical: Objective, ideal_result: OptResult, cfg: OptimizerConfig) -> OptResult:
    """Polish ideal-model angles under the physical model.

    The returned fidelity is never below that of the starting point.
    """
    x0 = np.asarray(ideal_result.best_x, dtype=float)
    if x0.size != obj_physical.dim:
        raise ValueError(
            f"ideal result has {x0.size // 5} layers, physical objective expects {obj_physical.depth}"
        )
    lower = np.full(x0.size, float(cfg.bounds[0]))
    upper = np.full(x0.size, float(cfg.bounds[1]))
    f = _Counted(obj_physical, lower, upper, max(1, cfg.max_evaluations), cfg.periodic)
    f0 = f(x0)
    start_x = f.best_x.copy()
    exhausted = False
    if cfg.local_refinement and cfg.local_maxiter > 0 and cfg.max_evaluations > 1:
        try:
            opts = {"maxiter": cfg.local_maxiter, "maxfun": cfg.max_evaluations}
            if cfg.periodic:
                minimize(f, start_x, method="L-BFGS-B", options=opts)
            else:
                minimize(f, start_x, method="L-BFGS-B", bounds=list(zip(lower, upper)), options=opts)
        except BudgetExhausted:
            exhausted = True
    best_x = f.best_x if f.best_f < f0 else start_x
    best_cost = float(obj_physical(best_x))
    return OptResult(best_x.copy(), best_cost, f.nfev, [best_cost], cfg.rng_seed, exhausted, [f.nfev])


def optimizer_config_for(model: str, **overrides) -> OptimizerConfig:
    budget = DEFAULT_PHYSICAL_BUDGET if model == PHYSICAL else DEFAULT_IDEAL_BUDGET
    return replace(OptimizerConfig(max_evaluations=budget), **overrides)
