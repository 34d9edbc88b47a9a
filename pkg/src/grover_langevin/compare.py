"""Seed-ensemble estimates for N = 4 set against the published values."""

from __future__ import annotations

import math
from dataclasses import replace

from .errors import SingularOverlapError
from .langevin import SimConfig, aggregate, run_trajectory

#: Published N = 4 estimates of <O_b>.
PUBLISHED_VALUES = {"00": 0.28, "01": 0.24, "10": 0.24, "11": 0.21}


def run_comparison(cfg: SimConfig, trajectories: int) -> dict:
    """Run trajectories 0..trajectories-1, keeping going past aborted ones."""
    if cfg.layout.n != 2:
        raise ValueError("published values exist only for n = 2")
    cfg = replace(cfg, normalize=True)
    reports, aborted = [], []
    for i in range(trajectories):
        try:
            _, rep = run_trajectory(cfg, i)
        except SingularOverlapError as exc:
            aborted.append({"trajectory": i, "t": getattr(exc, "diagnostics", {}).get("t"), "error": str(exc)})
            continue
        reports.append(rep)
    estimates = {}
    if reports:
        agg = aggregate(reports, cfg)
        for b, e in agg.estimates.items():
            estimates[b] = None if e.value is None else {"re": e.value.real, "im": e.value.imag,
                                                         "stderr": e.uncertainty}
    return {"estimates": estimates, "completed": len(reports), "aborted": aborted, "config": cfg.to_dict()}


def _fmt(x: float | None) -> str:
    return "n/a" if x is None or not math.isfinite(x) else f"{x:.4f}"


def comparison_markdown(cfg: SimConfig, result: dict) -> str:
    c = result["config"]
    lines = [
        "### Configuration",
        "",
        f"n = {c['n']}, k0 = {c['k0']}, dt = {c['dt']:g}, steps = {c['steps']}, noise = {c['noise']:g}, "
        f"init = {c['init']}" + (f" (std {c['init_std']:g})" if c["init"] == "gaussian" else "")
        + f", estimator = {c['estimator']}, guard policy = {c['guard_policy']}, "
        f"master seed = {c['seed']}, trajectories = {result['completed'] + len(result['aborted'])}, "
        "normalized",
        "",
        f"Completed trajectories: {result['completed']}; aborted on a singular overlap: {len(result['aborted'])}.",
        "",
        "| observable | published | this run (Re, normalized) | Im | std. error |",
        "|---|---|---|---|---|",
    ]
    for b, pub in PUBLISHED_VALUES.items():
        e = result["estimates"].get(b)
        if e is None:
            lines.append(f"| O_{b} | {pub:.2f} | n/a | n/a | n/a |")
        else:
            lines.append(f"| O_{b} | {pub:.2f} | {_fmt(e['re'])} | {_fmt(e['im'])} | {_fmt(e['stderr'])} |")
    lines.append("")
    return "\n".join(lines)
