"""Command-line front-end.

Exit codes: 0 success, 1 resource error, 2 usage error, 3 singular
stochastic run, 4 verification failure.  Machine-readable output goes to
stdout, diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import exact
from .errors import GroverLangevinError, SingularOverlapError, UsageError
from .exact import GroverLayout
from .fields import enumerate_fields, field_count, parse_field_name, validate_field

EXIT_OK, EXIT_RESOURCE, EXIT_USAGE, EXIT_SINGULAR, EXIT_VERIFY = 0, 1, 2, 3, 4

#: Field count the two-qubit-gate decomposition needs for N = 4 (one iteration).
TWO_QUBIT_GATE_FIELDS_N4 = 28


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2)


def _layout(args) -> GroverLayout:
    return GroverLayout(args.qubits, getattr(args, "iterations", None), getattr(args, "marked", None))


# --- exact -----------------------------------------------------------------------

def cmd_exact(args) -> int:
    if not 2 <= args.qubits <= 12:
        raise UsageError(f"--qubits must lie in [2, 12], got {args.qubits}")
    layout = _layout(args)
    run = exact.run_full_circuit if args.mode == "full" else exact.run_phase_oracle
    dist = run(layout)
    print(_dump({
        "n": layout.n,
        "k0_used": layout.k0,
        "mode": args.mode,
        "marked": layout.marked,
        "probabilities": {str(i): p for i, p in dist.outcomes},
    }))
    return EXIT_OK


# --- stochastic --------------------------------------------------------------------

def _sim_config(args):
    from .langevin import SimConfig

    return SimConfig(
        layout=GroverLayout(args.qubits, args.iterations),
        dt=args.dt,
        steps=args.steps,
        seed=args.seed,
        noise=args.noise,
        init=args.init,
        init_std=args.init_std,
        estimator=args.estimator,
        window=args.window,
        normalize=args.normalize,
        guard_policy=args.guard_policy,
        sample_every=args.sample_every,
        conv_tol=args.conv_tol,
        primed_noise=args.primed_noise,
    )


def _traj_path(base: str, index: int) -> Path:
    p = Path(base)
    stem = p.name[:-4] if p.name.endswith(".csv") else p.name
    return p.with_name(f"{stem}-{index}.csv")


def cmd_stochastic(args) -> int:
    from .langevin import aggregate, run_ensemble

    if args.trajectories < 1:
        raise UsageError("--trajectories must be >= 1")
    cfg = _sim_config(args)
    t0 = time.perf_counter()
    try:
        results = run_ensemble(cfg, args.trajectories, args.jobs)
    except SingularOverlapError as exc:
        diag = {"error": str(exc), "qubit": exc.qubit, **getattr(exc, "diagnostics", {})}
        print(_dump(diag), file=sys.stderr)
        return EXIT_SINGULAR
    wall = time.perf_counter() - t0
    report = aggregate([r for _, r in results], cfg)
    if args.record_wallclock:
        report.diagnostics["wallclock_s"] = wall
    if args.out_traj:
        for i, (tr, _) in enumerate(results):
            path = _traj_path(args.out_traj, i)
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, "w", newline="") as fh:
                tr.write_csv(fh)
    if args.out_report:
        path = Path(args.out_report)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(report.to_json() + "\n")
    summary = report.to_dict()
    summary["diagnostics"] = {**summary["diagnostics"], "wallclock_s": wall}
    print(_dump({"estimates": summary["estimates"], "diagnostics": summary["diagnostics"]}))
    return EXIT_OK


# --- emit -----------------------------------------------------------------------------

def cmd_emit(args) -> int:
    from .emitter import emit

    layout = GroverLayout(args.qubits, args.iterations)
    if args.all:
        fields = list(enumerate_fields(layout))
    elif args.field:
        fields = []
        for name in args.field:
            try:
                fields.append(validate_field(layout, parse_field_name(name)))
            except UsageError:
                valid = ", ".join(f.name for f in enumerate_fields(layout))
                raise UsageError(f"unknown field {name!r}; valid names: {valid}") from None
    else:
        raise UsageError("pass --field NAME (repeatable) or --all")
    for line in emit(layout, fields, args.format):
        print(line)
    return EXIT_OK


# --- count-fields -----------------------------------------------------------------------

def cmd_count_fields(args) -> int:
    layout = GroverLayout(args.qubits, args.iterations)
    print(_dump({
        "n": layout.n,
        "k0": layout.k0,
        "ours": field_count(layout.n, layout.k0),
        "two_qubit_gate_decomposition": TWO_QUBIT_GATE_FIELDS_N4 if (layout.n, layout.k0) == (2, 1) else None,
    }))
    return EXIT_OK


# --- verify -------------------------------------------------------------------------------

def run_checks(n: int, seed: int = 0, points: int | None = None) -> list[dict]:
    """Cross-module invariant checks for an n-qubit register."""
    from .action import drift, drift_fd_check
    from .emitter import build_all, eval_expr
    from .fields import FieldAssignment

    checks = []

    def record(name, residual, threshold):
        checks.append({"name": name, "residual": residual, "threshold": threshold,
                       "pass": bool(residual <= threshold)})

    record("toffoli_decomposition", max(exact.decomposition_residual(m) for m in range(2, 7)), 1e-10)

    layout = GroverLayout(n)
    phase = exact.run_phase_oracle(layout)
    full = exact.run_full_circuit(layout)
    record("oracle_equivalence", float(np.max(np.abs(phase.probs - full.probs))), 1e-10)
    record("closed_form_success",
           abs(phase[layout.marked] - exact.success_probability(n, layout.k0)), 1e-10)
    record("field_count", float(len(enumerate_fields(layout)) != field_count(n, layout.k0)), 0.0)

    rng = np.random.default_rng(seed)
    nf = len(enumerate_fields(layout))
    if points is None:
        points = {2: 20, 3: 20}.get(n, 3)

    def random_point():
        return FieldAssignment(layout, rng.uniform(-0.5, 0.5, nf) + 1j * rng.uniform(-0.5, 0.5, nf))

    fd = [drift_fd_check(FieldAssignment.zeros(layout))]
    fd += [drift_fd_check(random_point()) for _ in range(points)]
    record("drift_vs_finite_differences", max(fd), 1e-6)

    exprs = build_all(layout)
    worst = 0.0
    for _ in range(points):
        a = random_point()
        k = drift(a)
        memo: dict = {}
        worst = max(worst, max(abs(eval_expr(e, a, memo) - k[f]) for f, e in exprs.items()))
    record("symbolic_vs_autodiff", worst, 1e-9)
    return checks


def cmd_verify(args) -> int:
    if not 2 <= args.qubits <= 4:
        raise UsageError(f"verify supports 2 <= --qubits <= 4, got {args.qubits}")
    t0 = time.perf_counter()
    checks = run_checks(args.qubits, args.seed)
    ok = all(c["pass"] for c in checks)
    print(_dump({"n": args.qubits, "checks": checks, "all_pass": ok}))
    print(f"verify finished in {time.perf_counter() - t0:.2f} s", file=sys.stderr)
    return EXIT_OK if ok else EXIT_VERIFY


# --- compare -------------------------------------------------------------------------------

def cmd_compare(args) -> int:
    from .compare import PUBLISHED_VALUES, comparison_markdown, run_comparison

    cfg = _sim_config(args)
    rows = run_comparison(cfg, args.trajectories)
    text = comparison_markdown(cfg, rows)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text)
    print(_dump({
        "published": PUBLISHED_VALUES,
        "ours": rows["estimates"],
        "completed": rows["completed"],
        "aborted": rows["aborted"],
    }))
    return EXIT_OK


# --- parser ----------------------------------------------------------------------------------

def _positive_float(s: str) -> float:
    v = float(s)
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {s}")
    return v


def _nonneg_int(s: str) -> int:
    v = int(s)
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected an integer >= 0, got {s}")
    return v


def _add_sim_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--qubits", type=int, required=True)
    p.add_argument("--iterations", type=_nonneg_int, default=None, help="Grover iterations (default: optimal k0)")
    p.add_argument("--dt", type=_positive_float, default=1e-3)
    p.add_argument("--steps", type=_nonneg_int, default=1000)
    p.add_argument("--seed", type=_nonneg_int, default=0)
    p.add_argument("--noise", type=float, default=1.0, help="noise amplitude nu (0 = pure drift)")
    p.add_argument("--init", choices=["zeros", "gaussian"], default="zeros")
    p.add_argument("--init-std", type=float, default=0.1)
    p.add_argument("--estimator", choices=["final", "time-average"], default="final")
    p.add_argument("--window", type=int, default=None, help="estimator window in samples")
    p.add_argument("--normalize", action="store_true", help="rescale estimates to sum to one")
    p.add_argument("--guard-policy", choices=["abort", "reject-step"], default="abort")
    p.add_argument("--sample-every", type=int, default=100)
    p.add_argument("--conv-tol", type=_positive_float, default=1e-3)
    p.add_argument("--primed-noise", choices=["independent", "shared"], default="independent")
    p.add_argument("--trajectories", type=int, default=1)
    p.add_argument("--config", help="key = value file mirroring these flags; flags win")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="grover-langevin",
        description="Exact and auxiliary-field complex Langevin simulation of Grover search.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("exact", help="exact statevector probabilities")
    p.add_argument("--qubits", type=int, required=True)
    p.add_argument("--iterations", type=_nonneg_int, default=None)
    p.add_argument("--marked", type=int, default=None)
    p.add_argument("--mode", choices=["phase", "full"], default="phase")
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("stochastic", help="complex Langevin run(s) with CSV/JSON output")
    _add_sim_flags(p)
    p.add_argument("--jobs", type=int, default=1, help="worker processes for --trajectories")
    p.add_argument("--out-traj", help="trajectory CSV base path; '-<index>.csv' is appended")
    p.add_argument("--out-report", help="EstimateReport JSON path")
    p.add_argument("--record-wallclock", action="store_true",
                   help="store wall-clock time in the report file (breaks byte-identical reruns)")
    p.set_defaults(func=cmd_stochastic)

    p = sub.add_parser("emit", help="print symbolic Langevin equations")
    p.add_argument("--qubits", type=int, required=True)
    p.add_argument("--iterations", type=_nonneg_int, default=None)
    p.add_argument("--field", action="append", help="canonical field name, e.g. sigma:1:2 (repeatable)")
    p.add_argument("--all", action="store_true")
    p.add_argument("--format", choices=["text", "latex"], default="text")
    p.set_defaults(func=cmd_emit)

    p = sub.add_parser("verify", help="run the cross-module invariant checks")
    p.add_argument("--qubits", type=int, required=True)
    p.add_argument("--seed", type=_nonneg_int, default=0)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("count-fields", help="auxiliary field count")
    p.add_argument("--qubits", type=int, required=True)
    p.add_argument("--iterations", type=_nonneg_int, default=None)
    p.set_defaults(func=cmd_count_fields)

    p = sub.add_parser("compare", help="seed-ensemble estimates next to the published N=4 values")
    _add_sim_flags(p)
    p.add_argument("--out", help="markdown file to write the comparison table to")
    p.set_defaults(func=cmd_compare)
    return parser


def read_config(path: str) -> list[str]:
    """Turn a ``key = value`` file into flag tokens."""
    tokens: list[str] = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        flag = "--" + key.replace("_", "-")
        if value.lower() in ("true", "yes", "on"):
            tokens.append(flag)
        elif value.lower() in ("false", "no", "off"):
            continue
        else:
            tokens += [flag, value]
    return tokens


def _expand_config(argv: list[str]) -> list[str]:
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    if i + 1 >= len(argv):
        raise UsageError("--config needs a path")
    path = argv[i + 1]
    rest = argv[:i] + argv[i + 2:]
    # config tokens go right after the subcommand so explicit flags parse later and win
    return rest[:1] + read_config(path) + rest[1:]


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _expand_config(argv)
    except (UsageError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except GroverLangevinError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
