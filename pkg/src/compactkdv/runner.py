"""Run orchestration: snapshots, diagnostics CSV, checkpoints and manifest."""

from __future__ import annotations

import csv
import datetime as _dt
import io
import json
import logging
import math
import os
import traceback
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__
from .chebyshev import to_coefficients
from .config import RunConfig, dump_config, parse_config
from .diagnostics import choose_lambda, conserved_quantities
from .domain import make_grid
from .fourier import FourierGrid, evolve_periodic, periodic_diagnostics
from .initial_data import DataFamily, make_family
from .irk4 import NewtonSettings, NonConvergence, StageOperator, evolve
from .problem import FieldState, ProblemSpec, background_coeffs, decompose, reconstruct

log = logging.getLogger(__name__)

OUTPUT_ROOT_ENV = "COMPACTKDV_OUTPUT_ROOT"
DIAG_COLUMNS = ["step", "t", "mass", "l2sq", "energy", "modified_energy",
                "rel_drift_tracked", "coeff_floor", "newton_iters"]
MANIFEST_KEYS = ("config", "config_fingerprint", "code_version", "status", "start_time",
                 "end_time", "steps_completed", "final_diagnostics", "failure")
CHECKPOINT = "checkpoint.npz"


class CheckpointError(RuntimeError):
    pass


def family_from_config(cfg: RunConfig) -> DataFamily:
    d = cfg.data
    if d.family == "mollified_step":
        return make_family("mollified_step", n=d.n)
    if d.family == "finite_step":
        return make_family("finite_step", n=d.n, x0=-5 * math.pi if d.x0 is None else d.x0)
    if d.family == "algebraic_decay":
        return make_family("algebraic_decay", a=d.a)
    if d.family == "soliton":
        return make_family("soliton", c_speed=d.c_speed, p=cfg.p, x0=0.0 if d.x0 is None else d.x0)
    return make_family("tabulated", path=d.path)


def output_dir(cfg: RunConfig, root=None) -> Path:
    out = Path(cfg.output)
    if out.is_absolute():
        return out
    root = root if root is not None else os.environ.get(OUTPUT_ROOT_ENV, ".")
    return Path(root) / out


def problem_from_config(cfg: RunConfig, grid, family: DataFamily) -> ProblemSpec:
    bd = family.boundary_data(grid.c)
    coeffs = background_coeffs(*bd)
    lam = choose_lambda(bd.u_left, bd.u_right, cfg.p) if cfg.lam == "auto" else float(cfg.lam)
    return ProblemSpec(p=cfg.p, eps=cfg.eps, lam=lam).with_coeffs(coeffs)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_snapshot(path: Path, t: float, grid, state: FieldState, u: np.ndarray) -> None:
    buf = io.StringIO()
    buf.write(f"# t={t!r}\n")
    buf.write("l,x,v_tilde,u\n")
    for n in range(grid.N + 1):
        x = "" if not np.isfinite(grid.x[n]) else repr(float(grid.x[n]))
        buf.write(f"{float(grid.l[n])!r},{x},{float(state.vt[n])!r},{float(u[n])!r}\n")
    path.write_text(buf.getvalue())


def write_periodic_snapshot(path: Path, t: float, x: np.ndarray, u: np.ndarray) -> None:
    lines = [f"# t={t!r}", "x,u"] + [f"{float(a)!r},{float(b)!r}" for a, b in zip(x, u)]
    path.write_text("\n".join(lines) + "\n")


def write_spectrum(path: Path, coeffs: np.ndarray) -> None:
    lines = ["n,abs_coeff"] + [f"{n},{abs(float(c))!r}" for n, c in enumerate(coeffs)]
    path.write_text("\n".join(lines) + "\n")


def read_snapshot(path) -> tuple[float, dict[str, np.ndarray]]:
    text = Path(path).read_text().splitlines()
    if not text or not text[0].startswith("# t="):
        raise ValueError(f"{path} is not a snapshot file")
    t = float(text[0][4:])
    reader = csv.DictReader(text[1:])
    cols = {k: [] for k in reader.fieldnames}
    for row in reader:
        for k, v in row.items():
            cols[k].append(float(v) if v != "" else np.nan)
    return t, {k: np.array(v) for k, v in cols.items()}


class _DiagWriter:
    """Diagnostics CSV rows with the drift of the tracked functional."""

    def __init__(self, path: Path, tracked: str, rows=None, f0=None, drift=0.0):
        self.path = path
        self.tracked = tracked
        self.rows = rows if rows is not None else []
        self.f0 = f0
        self.drift = drift

    def add(self, step: int, values: dict) -> dict:
        f = values.get(self.tracked)
        if f is not None:
            if self.f0 is None:
                self.f0 = f
            if self.f0 != 0:
                self.drift = max(self.drift, abs(f - self.f0) / abs(self.f0))
        row = {"step": step, **values,
               "rel_drift_tracked": self.drift if self.f0 not in (None, 0) else None}
        self.rows.append(row)
        self.flush()
        return row

    def flush(self) -> None:
        buf = io.StringIO()
        buf.write(",".join(DIAG_COLUMNS) + "\n")
        for row in self.rows:
            buf.write(",".join(_fmt(row.get(c)) for c in DIAG_COLUMNS) + "\n")
        self.path.write_text(buf.getvalue())


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat()


def _write_manifest(out: Path, manifest: dict) -> None:
    doc = {k: manifest.get(k) for k in MANIFEST_KEYS}
    (out / "manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=False, default=float) + "\n")


def _save_checkpoint(out: Path, cfg: RunConfig, step: int, state: FieldState, diag: _DiagWriter) -> None:
    tmp = out / (CHECKPOINT + ".tmp.npz")
    np.savez(
        tmp,
        version=np.array(__version__),
        fingerprint=np.array(cfg.fingerprint()),
        N=np.array(cfg.N if cfg.N is not None else cfg.M),
        step=np.array(step),
        t=np.array(state.t),
        vt=state.vt,
        f0=np.array(np.nan if diag.f0 is None else diag.f0),
        drift=np.array(diag.drift),
        diag_rows=np.array(json.dumps(diag.rows, default=float)),
    )
    os.replace(tmp, out / CHECKPOINT)


def load_checkpoint(out: Path, cfg: RunConfig) -> dict:
    path = Path(out) / CHECKPOINT
    if not path.exists():
        raise CheckpointError(f"no checkpoint at {path}")
    try:
        with np.load(path, allow_pickle=False) as z:
            ck = {k: z[k] for k in z.files}
    except Exception as exc:
        raise CheckpointError(f"corrupt checkpoint {path}: {exc}") from exc
    required = {"version", "fingerprint", "N", "step", "t", "vt", "f0", "drift", "diag_rows"}
    if not required <= ck.keys():
        raise CheckpointError(f"corrupt checkpoint {path}: missing {sorted(required - ck.keys())}")
    if str(ck["version"]) != __version__:
        raise CheckpointError(f"checkpoint written by version {ck['version']}, this is {__version__}")
    size = cfg.N if cfg.solver == "compact_cheb" else cfg.M
    if int(ck["N"]) != size or len(ck["vt"]) != (size + 1 if cfg.solver == "compact_cheb" else size):
        raise CheckpointError(f"checkpoint grid size {int(ck['N'])} does not match config ({size})")
    if str(ck["fingerprint"]) != cfg.fingerprint():
        raise CheckpointError("checkpoint was written for a different configuration")
    return ck


@dataclass
class RunResult:
    manifest: dict
    out: Path
    state: object = None

    @property
    def ok(self) -> bool:
        return self.manifest["status"] in ("completed", "interrupted")


def run(cfg: RunConfig, root=None, resume_from: dict | None = None) -> RunResult:
    """Execute one run and write its outputs; never raises on solver failure."""
    out = output_dir(cfg, root)
    out.mkdir(parents=True, exist_ok=True)
    (out / "snapshots").mkdir(exist_ok=True)
    (out / "run.cfg").write_text(dump_config(cfg))
    manifest = {
        "config": cfg.to_dict(),
        "config_fingerprint": cfg.fingerprint(),
        "code_version": __version__,
        "status": "running",
        "start_time": _now(),
        "steps_completed": 0,
    }
    state = None
    try:
        if cfg.solver == "compact_cheb":
            state, steps, final = _run_compact(cfg, out, resume_from)
        else:
            state, steps, final = _run_fourier(cfg, out)
        manifest["steps_completed"] = steps
        manifest["final_diagnostics"] = final
        manifest["status"] = "completed" if steps == cfg.Nt else "interrupted"
    except (NonConvergence, FloatingPointError, np.linalg.LinAlgError, ValueError) as exc:
        manifest["status"] = "failed"
        manifest["failure"] = {
            "type": type(exc).__name__,
            "message": str(exc),
            "step": getattr(exc, "step", None),
            "traceback": traceback.format_exc(),
        }
        log.error("run failed: %s", exc)
    manifest["end_time"] = _now()
    _write_manifest(out, manifest)
    return RunResult(manifest=manifest, out=out, state=state)


def _run_compact(cfg: RunConfig, out: Path, resume_from):
    grid = make_grid(cfg.N, cfg.c)
    family = family_from_config(cfg)
    spec = problem_from_config(cfg, grid, family)
    # limits at -inf and +inf are C and A + B
    tracked = "modified_energy" if (spec.C != 0 or spec.A + spec.B != 0) else "energy"
    if resume_from is None:
        state = decompose(family.nodal_values(grid), grid, spec.coeffs)
        diag = _DiagWriter(out / "diagnostics.csv", tracked)
        start = 0
    else:
        state = FieldState(t=float(resume_from["t"]), vt=np.array(resume_from["vt"], dtype=float))
        rows = json.loads(str(resume_from["diag_rows"]))
        f0 = float(resume_from["f0"])
        diag = _DiagWriter(out / "diagnostics.csv", tracked, rows=rows,
                           f0=None if math.isnan(f0) else f0, drift=float(resume_from["drift"]))
        start = int(resume_from["step"])
    newton_log: list[int] = []
    settings = NewtonSettings(**vars(cfg.newton))
    h = cfg.T / cfg.Nt
    last = {"diag": None}

    def hook(k, t, st):
        iters = newton_log[-1] if (newton_log and k > start) else None
        if k % cfg.diagnostics_stride == 0 or k == cfg.Nt or k == cfg.stop_after:
            rec = conserved_quantities(st, grid, spec, newton_iters=iters)
            values = rec.as_dict()
            values["t"] = k * h
            last["diag"] = diag.add(k, values)
        if k % cfg.snapshot_stride == 0 or k == cfg.Nt or k == cfg.stop_after:
            u = reconstruct(st, grid, spec.coeffs)
            write_snapshot(out / "snapshots" / f"snap_{k:06d}.csv", k * h, grid, st, u)
            write_spectrum(out / "snapshots" / f"coeffs_{k:06d}.csv", to_coefficients(st.vt))
            _save_checkpoint(out, cfg, k, st, diag)

    every = math.gcd(cfg.snapshot_stride, cfg.diagnostics_stride)
    op = StageOperator(grid, spec, h)
    traj = evolve(state, grid, spec, settings, T=cfg.T, Nt=cfg.Nt, hooks=[hook], every=every,
                  op=op, start_step=start, newton_log=newton_log, stop_after=cfg.stop_after)
    return traj.state, traj.steps, last["diag"]


def _run_fourier(cfg: RunConfig, out: Path):
    fgrid = FourierGrid(cfg.M, cfg.L)
    family = family_from_config(cfg)
    bd = family.boundary_data(1.0)
    if bd.u_left != 0 or bd.u_right != 0:
        raise ValueError("fourier_ref needs data decaying at both ends of the period")
    lam = 0.0 if cfg.lam == "auto" else float(cfg.lam)
    u0 = family.values(fgrid.x)
    diag = _DiagWriter(out / "diagnostics.csv", "energy")
    last = {"diag": None, "u": None}

    def hook(k, t, u):
        values = periodic_diagnostics(u, fgrid, cfg.p, cfg.eps, lam)
        values.update(t=t, newton_iters=None)
        if k % cfg.diagnostics_stride == 0 or k == cfg.Nt:
            last["diag"] = diag.add(k, values)
        if k % cfg.snapshot_stride == 0 or k == cfg.Nt:
            write_periodic_snapshot(out / "snapshots" / f"snap_{k:06d}.csv", t, fgrid.x, u)
        last["u"] = u

    every = math.gcd(cfg.snapshot_stride, cfg.diagnostics_stride)
    evolve_periodic(u0, fgrid, cfg.p, cfg.eps, cfg.T, cfg.Nt, hook=hook, every=every)
    return last["u"], cfg.Nt, last["diag"]


def resume(out, overrides: dict | None = None, root=None) -> RunResult:
    """Continue an interrupted run from its checkpoint, up to the configured Nt."""
    out = Path(out)
    cfg_path = out / "run.cfg"
    if not cfg_path.exists():
        raise CheckpointError(f"{out} has no run.cfg")
    overrides = dict(overrides or {})
    overrides.setdefault("stop_after", None)
    stop = overrides.pop("stop_after")
    cfg = parse_config(cfg_path.read_text(), overrides)
    cfg = replace(cfg, stop_after=None if stop is None else int(stop), output=str(out.resolve()))
    if cfg.solver != "compact_cheb":
        raise CheckpointError("only compact_cheb runs can be resumed")
    ck = load_checkpoint(out, cfg)
    return run(cfg, root=root, resume_from=ck)
