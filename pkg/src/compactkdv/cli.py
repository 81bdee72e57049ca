"""Command line entry point: ``compactkdv run|resume|reproduce|batch|breakup|fit``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from pathlib import Path

import numpy as np

from .config import ConfigError, eval_number, load_config, parse_config
from .diagnostics import NoBreakup, NoRoot, breakup_point, fit_solitons
from .domain import make_grid
from .initial_data import make_family
from .problem import ProblemSpec
from .runner import CheckpointError, read_snapshot, resume, run

FIGURES = ("step_p2", "step_p4", "step2_fourier", "lorentz_p2", "root_p2", "lorentz_p4", "root_p4")


def shipped_config(name: str) -> str:
    if name not in FIGURES:
        raise ConfigError("figure", f"unknown figure id {name!r}; choose from {', '.join(FIGURES)}")
    return resources.files("compactkdv.configs").joinpath(f"{name}.cfg").read_text()


def _split_overrides(extra: list[str]) -> dict:
    overrides = {}
    for tok in extra:
        if not tok.startswith("--") or "=" not in tok:
            raise ConfigError(tok, "overrides must look like --key=value")
        key, _, value = tok[2:].partition("=")
        overrides[key] = value
    return overrides


def _report(result) -> int:
    m = result.manifest
    print(f"{m['status']}: {m['steps_completed']} steps -> {result.out}")
    if m.get("final_diagnostics"):
        print(json.dumps(m["final_diagnostics"], default=float))
    if m.get("failure"):
        print(m["failure"]["message"], file=sys.stderr)
    return 0 if result.ok else 1


def _run_file(path: str, overrides: dict) -> int:
    return _report(run(load_config(path, overrides)))


def _family_params(name: str, overrides: dict) -> dict:
    params = {}
    for key, raw in overrides.items():
        params[key] = int(raw) if key in ("n", "p") else eval_number(raw) if key != "path" else raw
    return params


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="compactkdv", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run a config file")
    p_run.add_argument("config")
    p_res = sub.add_parser("resume", help="continue an interrupted run directory")
    p_res.add_argument("directory")
    p_rep = sub.add_parser("reproduce", help="run one of the shipped reproduction configurations")
    p_rep.add_argument("figure", choices=FIGURES)
    p_bat = sub.add_parser("batch", help="run several config files in parallel processes")
    p_bat.add_argument("configs", nargs="+")
    p_bat.add_argument("--jobs", type=int, default=1)
    p_brk = sub.add_parser("breakup", help="break-up point of the dispersionless limit")
    p_brk.add_argument("family")
    p_brk.add_argument("p", type=int)
    p_fit = sub.add_parser("fit", help="fit solitons to the peaks of a snapshot")
    p_fit.add_argument("snapshot")
    p_fit.add_argument("--min-amplitude", type=float, default=0.1)

    args, extra = parser.parse_known_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        overrides = _split_overrides(extra)
        if args.command == "run":
            return _run_file(args.config, overrides)
        if args.command == "resume":
            return _report(resume(args.directory, overrides))
        if args.command == "reproduce":
            return _report(run(parse_config(shipped_config(args.figure), overrides)))
        if args.command == "batch":
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                codes = list(pool.map(_run_file, args.configs, [overrides] * len(args.configs)))
            return max(codes)
        if args.command == "breakup":
            params = _family_params(args.family, overrides)
            if args.family == "soliton":
                params.setdefault("p", args.p)
            bp = breakup_point(make_family(args.family, **params), args.p)
            print(f"x_c={bp.x_c!r} t_c={bp.t_c!r} u_c={bp.u_c!r}")
            return 0
        if args.command == "fit":
            return _fit(args.snapshot, args.min_amplitude, overrides)
    except (ConfigError, CheckpointError, NoBreakup, NoRoot, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def _fit(snapshot: str, min_amplitude: float, overrides: dict) -> int:
    t, cols = read_snapshot(snapshot)
    p, eps = 2, 1.0
    for parent in (Path(snapshot).parent, Path(snapshot).parent.parent):
        man = parent / "manifest.json"
        if man.exists():
            conf = json.loads(man.read_text())["config"]
            p, eps = conf["p"], conf["eps"]
            break
    p = int(overrides.get("p", p))
    eps = float(overrides.get("eps", eps))
    l, x, u = cols["l"], cols["x"], cols["u"]
    j = len(l) // 2
    c = x[j] / np.tan(0.5 * np.pi * l[j]) if l[j] != 0 else x[j + 1] / np.tan(0.5 * np.pi * l[j + 1])
    grid = make_grid(len(l) - 1, float(c))
    peaks = fit_solitons(u, grid, ProblemSpec(p=p, eps=eps), min_amplitude)
    print(f"# t={t!r} p={p} eps={eps}")
    print("position,amplitude,c_fit,misfit")
    for pk in peaks:
        print(f"{pk.position!r},{pk.amplitude!r},{pk.c_fit!r},{pk.misfit!r}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
