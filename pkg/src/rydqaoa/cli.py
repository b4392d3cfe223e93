"""Command-line interface: optimize, verify, sweep, perturb, export.

Every output file embeds the full run configuration and a format
version. Exit codes: 0 success, 1 usage error, 2 verification failure,
3 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import replace

from .ansatz import QaoaSchedule
from .experiments import (
    FORMAT_VERSION, NoiseConfig, SweepRecord, atomic_write_text, code_version,
    depth_sweep, fidelity_trajectory, noise_sweep, perturb_schedule,
)
from .optimize import (
    IDEAL, PHYSICAL, Objective, OptimizerConfig, dual_anneal, optimizer_config_for,
    warm_start_physical,
)
from .rydberg import TWO_PI, DeviceConfig, compile_schedule, sequence_to_dict, staircase_rows
from .targets import TARGETS, get_target

EXIT_OK, EXIT_USAGE, EXIT_VERIFY, EXIT_RUNTIME = 0, 1, 2, 3

DEVICE_FLAGS = {
    "v_nn_mhz": "v_nn",
    "omega_b_mhz": "omega_b",
    "omega_r_mhz": "omega_r",
    "omega_r_weak_mhz": "omega_r_weak",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _depth_range(text: str) -> list[int]:
    """``"a:b"`` (inclusive), ``"a,b,c"`` or a single integer."""
    try:
        if ":" in text:
            a, b = (int(x) for x in text.split(":"))
            return list(range(a, b + 1))
        return [int(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad depth list {text!r}; use a:b or a,b,c") from None


def _r_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad noise magnitude list {text!r}") from None


def _common(p: argparse.ArgumentParser, *, target=True, seed=True, out=True, device=False):
    p.add_argument("--config", help="JSON file supplying defaults for any flag")
    if target:
        p.add_argument("--target", help=f"target key ({', '.join(sorted(TARGETS))})")
    if seed:
        p.add_argument("--seed", type=int, default=0, help="master RNG seed")
    if out:
        p.add_argument("--out", help="output path (JSON); side files share its stem")
    if device:
        g = p.add_argument_group("device overrides (frequencies in MHz, angular = 2 pi f)")
        for flag in DEVICE_FLAGS:
            g.add_argument("--" + flag.replace("_", "-"), type=float, dest=flag)
        g.add_argument("--spacing-um", type=float)
        g.add_argument("--compensate", action="store_true",
                       help="fold entangling-block phase corrections into the Z stage")


def _optimizer_flags(p):
    p.add_argument("--model", choices=(IDEAL, PHYSICAL), default=IDEAL)
    p.add_argument("--budget", type=int, help="cost evaluations per restart")
    p.add_argument("--restarts", type=int, default=1)
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rydqaoa", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("optimize", help="optimize a schedule for a target")
    _common(p, device=True)
    p.add_argument("--depth", type=int)
    _optimizer_flags(p)

    p = sub.add_parser("verify", help="check a registered target or a schedule file")
    _common(p, seed=False, out=False)
    p.add_argument("--schedule", help="schedule file written by optimize or perturb")
    p.add_argument("--threshold", type=float, default=0.99,
                   help="minimum fidelity for a schedule to pass")

    p = sub.add_parser("sweep", help="depth sweep or noise sweep")
    _common(p, device=True)
    p.add_argument("--kind", choices=("depth", "noise"), default="depth")
    p.add_argument("--depths", type=_depth_range)
    p.add_argument("--samples", type=int, default=5)
    p.add_argument("--schedule", help="schedule file for a noise sweep")
    p.add_argument("--noise-R", type=_r_list, dest="noise_R", default=[0.0, 0.001, 0.01])
    p.add_argument("--trials", type=int, default=100)
    _optimizer_flags(p)

    p = sub.add_parser("perturb", help="write one noisy copy of a schedule")
    _common(p, target=False)
    p.add_argument("--schedule", required=False)
    p.add_argument("--noise-R", type=float, dest="noise_R", default=0.01)
    p.add_argument("--draw", type=int, default=0)

    p = sub.add_parser("export", help="compile a schedule to Rydberg pulses")
    _common(p, target=False, seed=False, device=True)
    p.add_argument("--schedule")
    p.add_argument("--num-atoms", type=int, help="override the schedule file's qubit count")
    return parser


def parse_args(argv: list[str] | None) -> argparse.Namespace:
    """Parse ``argv``; a ``--config`` file supplies defaults the command line overrides."""
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    ns = parser.parse_args(argv)
    if ns.config:
        try:
            with open(ns.config) as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {ns.config}: {exc}") from None
        if not isinstance(cfg, dict):
            raise UsageError("config file must hold a JSON object")
        sub = parser._subparsers._group_actions[0].choices[ns.command]
        known = {a.dest for a in sub._actions}
        cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
        unknown = sorted(set(cfg) - known - {"command"})
        if unknown:
            raise UsageError(f"unknown keys in config for {ns.command!r}: {', '.join(unknown)}")
        for action in sub._actions:
            if action.dest in cfg and action.type is not None and isinstance(cfg[action.dest], str):
                cfg[action.dest] = action.type(cfg[action.dest])
        sub.set_defaults(**{k: v for k, v in cfg.items() if k != "command"})
        ns = parser.parse_args(argv)
    return ns


def run_config(ns: argparse.Namespace) -> dict:
    d = {k: v for k, v in vars(ns).items() if k != "config"}
    d["format_version"] = FORMAT_VERSION
    d["code_version"] = code_version()
    return d


def _require(ns, *names):
    for name in names:
        if getattr(ns, name, None) is None:
            raise UsageError(f"--{name.replace('_', '-')} is required for {ns.command}")


def _target(ns):
    try:
        return get_target(ns.target)
    except KeyError as exc:
        raise UsageError(exc.args[0]) from None


def _device(ns, n: int) -> DeviceConfig:
    kw = {}
    for flag, field_name in DEVICE_FLAGS.items():
        v = getattr(ns, flag, None)
        if v is not None:
            kw[field_name] = TWO_PI * v * 1e6
    if getattr(ns, "spacing_um", None) is not None:
        kw["spacing_um"] = ns.spacing_um
    return DeviceConfig(n, **kw)


def _stem(path: str) -> str:
    root, ext = os.path.splitext(path)
    return root if ext == ".json" else path


def _write_json(path: str, doc: dict) -> None:
    atomic_write_text(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _schedule_doc(cfg, target, num_qubits, s: QaoaSchedule, fidelity, model) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "run_config": cfg,
        "target": target,
        "num_qubits": num_qubits,
        "depth": s.depth,
        "model": model,
        "params": [float(x) for x in s.flat()],
        "fidelity": fidelity,
    }


def load_schedule(path: str) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise UsageError(f"schedule file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"schedule file {path} is not valid JSON: {exc}") from None
    if "params" not in doc:
        raise UsageError(f"{path} has no 'params' entry")
    doc["schedule"] = QaoaSchedule.from_flat(doc["params"])
    return doc


def _opt_cfg(ns, model) -> OptimizerConfig:
    over = {"rng_seed": ns.seed, "restarts": ns.restarts, "jobs": ns.jobs}
    if ns.budget is not None:
        over["max_evaluations"] = ns.budget
    return optimizer_config_for(model, **over)


def cmd_optimize(ns) -> int:
    _require(ns, "target", "depth")
    if ns.depth < 1:
        raise UsageError("--depth must be >= 1")
    spec = _target(ns)
    cfg = run_config(ns)
    ideal = dual_anneal(Objective.for_target(spec, ns.depth), _opt_cfg(ns, IDEAL))
    result, stages = ideal, {"ideal": ideal.to_dict()}
    if ns.model == PHYSICAL:
        obj = Objective.for_target(spec, ns.depth, model=PHYSICAL,
                                   device=_device(ns, spec.num_qubits), compensate=ns.compensate)
        result = warm_start_physical(obj, ideal, _opt_cfg(ns, PHYSICAL))
        stages["physical"] = result.to_dict()
    out = ns.out or f"{spec.key}-p{ns.depth}-{ns.model}.json"
    s = result.best_params
    sched_path = _stem(out) + ".schedule.json"
    _write_json(sched_path, _schedule_doc(cfg, spec.key, spec.num_qubits, s, result.best_fidelity, ns.model))
    _write_json(out, {
        "format_version": FORMAT_VERSION,
        "run_config": cfg,
        "target": spec.key,
        "depth": ns.depth,
        "model": ns.model,
        "best_fidelity": result.best_fidelity,
        "result": result.to_dict(),
        "stages": stages,
        "schedule_file": os.path.basename(sched_path),
    })
    print(f"{spec.key} p={ns.depth} {ns.model}: fidelity {result.best_fidelity:.9f} -> {out}")
    return EXIT_OK


def cmd_verify(ns) -> int:
    if ns.schedule:
        doc = load_schedule(ns.schedule)
        key = ns.target or doc.get("target")
        if key is None:
            raise UsageError("schedule file names no target; pass --target")
        spec = _target(argparse.Namespace(target=key))
        s = doc["schedule"]
        f = fidelity_trajectory(s, spec)[-1] if s.depth else 0.0
        ok = f >= ns.threshold
        print(f"{spec.key} p={s.depth}: ideal fidelity {f:.9f} "
              f"({'PASS' if ok else 'FAIL'} at threshold {ns.threshold})")
        return EXIT_OK if ok else EXIT_VERIFY
    _require(ns, "target")
    spec = _target(ns)
    report = spec.verify()
    print(f"{spec.key}: {'PASS' if report.passed else 'FAIL'}")
    for name, value in vars(report).items():
        if name != "passed":
            print(f"  {name}: {value}")
    return EXIT_OK if report.passed else EXIT_VERIFY


def cmd_sweep(ns) -> int:
    cfg = run_config(ns)
    if ns.kind == "depth":
        _require(ns, "target", "depths")
        if not ns.depths or min(ns.depths) < 1:
            raise UsageError("--depths must be nonempty and every depth >= 1")
        if ns.samples < 1:
            raise UsageError("--samples must be >= 1")
        spec = _target(ns)
        device = _device(ns, spec.num_qubits) if ns.model == PHYSICAL else None
        rec = depth_sweep(spec, ns.depths, ns.samples, replace(_opt_cfg(ns, ns.model), jobs=1),
                          model=ns.model, device=device, jobs=ns.jobs)
        out = ns.out or f"{spec.key}-depth-sweep.json"
    else:
        _require(ns, "schedule")
        doc = load_schedule(ns.schedule)
        spec = _target(argparse.Namespace(target=ns.target or doc.get("target")))
        s = doc["schedule"]
        rec = SweepRecord(spec.key, ns.model, "noise", [s.depth], schedule=[float(x) for x in s.flat()])
        device = _device(ns, spec.num_qubits) if ns.model == PHYSICAL else None
        for R in ns.noise_R:
            try:
                noise = NoiseConfig(R, ns.trials, ns.seed)
            except ValueError as exc:
                raise UsageError(str(exc)) from None
            rec.noise.append(noise_sweep(s, spec, noise, model=ns.model, device=device))
        out = ns.out or f"{spec.key}-noise-sweep.json"
    rec.config = {**rec.config, "run_config": cfg}
    rec.save(out, _stem(out) + ".csv")
    if rec.fit is not None:
        f = rec.fit
        print(f"fit: a={f.a:.6g} lambda={f.lam:.6g} r={f.correlation:.6g} "
              f"(excluded converged depths {list(f.excluded_depths)})")
    for r in rec.noise:
        print(f"R={r.R:g}: mean {r.mean:.6f} std {r.std:.6f} over {r.trials} trials")
    print(f"record -> {out}")
    return EXIT_OK


def cmd_perturb(ns) -> int:
    _require(ns, "schedule")
    doc = load_schedule(ns.schedule)
    try:
        noise = NoiseConfig(ns.noise_R, 1, ns.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    s = perturb_schedule(doc["schedule"], noise, ns.draw)
    out = ns.out or _stem(ns.schedule) + f".R{ns.noise_R:g}.d{ns.draw}.json"
    _write_json(out, _schedule_doc(run_config(ns), doc.get("target"), doc.get("num_qubits"),
                                   s, None, doc.get("model", IDEAL)))
    print(f"perturbed schedule -> {out}")
    return EXIT_OK


def cmd_export(ns) -> int:
    _require(ns, "schedule")
    doc = load_schedule(ns.schedule)
    n = ns.num_atoms or doc.get("num_qubits")
    if not n:
        raise UsageError("schedule file has no qubit count; pass --num-atoms")
    device = _device(ns, int(n))
    try:
        seq = compile_schedule(doc["schedule"], device, compensate=ns.compensate)
    except ValueError as exc:
        print(f"error: cannot compile schedule: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    out = ns.out or _stem(ns.schedule) + ".pulses.json"
    body = sequence_to_dict(seq)
    body.update({"format_version": FORMAT_VERSION, "run_config": run_config(ns)})
    _write_json(out, body)
    rows = staircase_rows(seq)
    buf = io.StringIO()
    cols = ["pulse", "atom", "transition", "time_s", "rabi_hz", "detuning_hz"]
    buf.write(f"# format_version={FORMAT_VERSION} run_config={json.dumps(run_config(ns), sort_keys=True)}\n")
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    atomic_write_text(_stem(out) + ".staircase.csv", buf.getvalue())
    print(f"{len(seq)} pulses, total {seq.total_duration * 1e9:.3f} ns -> {out}")
    return EXIT_OK


COMMANDS = {
    "optimize": cmd_optimize,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
    "perturb": cmd_perturb,
    "export": cmd_export,
}


def main(argv: list[str] | None = None) -> int:
    try:
        ns = parse_args(argv)
        return COMMANDS[ns.command](ns)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
