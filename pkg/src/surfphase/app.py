"""Experiment registry, run configuration, output files and checkpoint/restart.

A run directory holds::

    config.txt            fully resolved configuration (re-runnable as is)
    energy.csv            one row per ``csv_stride`` steps plus the initial row
    snap_00001000.snap    snapshots at the requested times (optionally .vtk)
    checkpoint.snap       latest restart point (state, previous level, CSV row count)
"""

from __future__ import annotations

import csv
import dataclasses
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .diagnostics import CSV_COLUMNS, ConvergenceRow, EnergyRecord
from .harness import convergence_sweep, nsteps_for
from .io import ConfigError, format_config, parse_config_text, read_snapshot, truncate_csv, write_snapshot, write_vtk
from .linsolve import SolverConfig, SolverError
from .model import Model, ModelParams, State
from .rng import DEFAULT_SEED, SplitMix64
from .schemes import SchemeKind, initial_record, march
from .spectral import Grid

log = logging.getLogger(__name__)

OUTPUT_ROOT_ENV = "SURFPHASE_OUTPUT_ROOT"
EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_IO = 0, 2, 3, 4

CONFIG_NAME = "config.txt"
CSV_NAME = "energy.csv"
CHECKPOINT_NAME = "checkpoint.snap"


class CheckpointError(OSError):
    """Unreadable or inconsistent checkpoint file."""


# --- initial conditions -----------------------------------------------------


def _xy(grid: Grid):
    if grid.dim != 2:
        raise ValueError(f"this initial condition is two-dimensional, grid has dim={grid.dim}")
    return grid.coords


def ic_accuracy(grid: Grid):
    x, y = _xy(grid)
    return 0.1 * np.cos(3 * x) + 0.4 * np.cos(y), 0.2 * np.sin(2 * x) + 0.5 * np.sin(y)


def ic_spinodal(grid: Grid, phi_bar: float, seed: int = DEFAULT_SEED):
    """Mean-centered uniform noise of amplitude 0.001 around ``phi_bar`` and 0.3.

    Child stream 0 of ``SplitMix64(seed)`` perturbs phi, child 1 perturbs rho;
    values are drawn in C order over the grid.
    """
    gen = SplitMix64(seed)

    def noise(k):
        r = gen.split(k).uniform(-1.0, 1.0, grid.shape)
        return 0.001 * (r - r.mean())

    return phi_bar + noise(0), 0.3 + noise(1)


def ic_absorption_uniform(grid: Grid):
    x, y = _xy(grid)
    wave = np.cos(6 * x) * np.cos(6 * y)
    return 0.1 + 0.01 * wave, 0.2 + 0.01 * wave


def ic_absorption_local(grid: Grid):
    """Same phi as the uniform case; rho a centered Gaussian (not periodized)."""
    x, y = _xy(grid)
    phi = 0.1 + 0.01 * np.cos(6 * x) * np.cos(6 * y)
    rho = 0.8 * np.exp(-((x - np.pi) ** 2 + (y - np.pi) ** 2) / 1.25**2)
    return phi, rho


# --- configuration ----------------------------------------------------------

_PARAM_KEYS = tuple(f.name for f in dataclasses.fields(ModelParams))
_SOLVER_KEYS = ("rel_tol", "abs_tol", "max_iter", "precondition")


@dataclass(frozen=True)
class RunConfig:
    experiment: str = "spinodal2d"
    scale: str = "desk"
    n: int = 64
    dim: int = 2
    length: float = 2 * np.pi
    dealias: bool = False
    scheme: str = "bdf2"
    bootstrap: str = "cn"
    dt: float = 1e-2
    t_end: float = 1.0
    snapshot_times: tuple = ()
    output_dir: str = "run"
    seed: int = DEFAULT_SEED
    phi_bar: float = 0.0
    eps: float = 0.05
    alpha: float = 0.01
    beta: float = 0.05
    b_shift: float = 1.0
    m1: float = 0.01
    m2: float = 0.01
    eps_hat: float = 1e-4
    eta: float = 1e-6
    rel_tol: float = 1e-10
    abs_tol: float = 1e-14
    max_iter: int = 1000
    precondition: bool = True
    checkpoint_every: int = 0
    csv_stride: int = 1
    vtk: bool = False
    sweep_dts: tuple = ()
    benchmark_dt: float = 7.8125e-5
    benchmark_scheme: str = "bdf2"

    @classmethod
    def from_mapping(cls, values) -> "RunConfig":
        """Defaults, then the experiment's preset for ``scale``, then ``values``."""
        values = {k: v for k, v in values.items()}
        unknown = sorted(set(values) - {f.name for f in dataclasses.fields(cls)})
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        name = str(values.get("experiment", cls.experiment)).strip()
        scale = str(values.get("scale", cls.scale)).strip()
        exp = get_experiment(name)
        if scale not in ("desk", "paper"):
            raise ConfigError(f"scale must be 'desk' or 'paper', got {scale!r}")
        merged = dict(exp.desk if scale == "desk" else exp.paper)
        if "snapshot_times" not in values and "t_end" in values:
            # preset snapshot times past a shortened t_end are dropped
            t_end = _coerce("t_end", values["t_end"], 0.0)
            merged["snapshot_times"] = tuple(t for t in merged.get("snapshot_times", ()) if t <= t_end)
        merged.update(values)
        merged["experiment"], merged["scale"] = name, scale
        kwargs = {}
        defaults = cls()
        for f in dataclasses.fields(cls):
            if f.name in merged:
                kwargs[f.name] = _coerce(f.name, merged[f.name], getattr(defaults, f.name))
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        return cls.from_mapping(parse_config_text(text))

    def replace(self, **changes) -> "RunConfig":
        cfg = dataclasses.replace(self, **changes)
        cfg.validate()
        return cfg

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}

    def echo(self) -> str:
        return format_config(self.as_dict())

    def model_params(self) -> ModelParams:
        return ModelParams(**{k: getattr(self, k) for k in _PARAM_KEYS})

    def solver_config(self) -> SolverConfig:
        return SolverConfig(**{k: getattr(self, k) for k in _SOLVER_KEYS})

    def grid(self) -> Grid:
        return Grid(self.n, self.dim, self.length, self.dealias)

    @property
    def kind(self) -> SchemeKind:
        return SchemeKind.parse(self.scheme)

    @property
    def nsteps(self) -> int:
        return nsteps_for(self.t_end, self.dt)

    def snapshot_steps(self) -> dict[int, float]:
        return {round(t / self.dt): t for t in self.snapshot_times}

    def validate(self) -> None:
        exp = get_experiment(self.experiment)
        if self.dim not in exp.dims:
            raise ConfigError(f"experiment {self.experiment!r} supports dim in {exp.dims}, got {self.dim}")
        if self.n < 8:
            raise ConfigError(f"n must be at least 8, got {self.n}")
        if not (self.dt > 0 and self.t_end > 0 and self.length > 0):
            raise ConfigError("dt, t_end and length must be positive")
        try:
            self.nsteps
            SchemeKind.parse(self.scheme)
            SchemeKind.parse(self.benchmark_scheme)
            self.model_params()
            self.solver_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if self.bootstrap not in ("cn", "first"):
            raise ConfigError(f"bootstrap must be 'cn' or 'first', got {self.bootstrap!r}")
        for t in self.snapshot_times:
            if not 0 <= t <= self.t_end:
                raise ConfigError(f"snapshot time {t} outside [0, {self.t_end}]")
            if abs(round(t / self.dt) * self.dt - t) > 1e-9 * max(t, 1.0):
                raise ConfigError(f"snapshot time {t} is not a multiple of dt={self.dt}")
        if self.csv_stride < 1 or self.checkpoint_every < 0:
            raise ConfigError("csv_stride must be >= 1 and checkpoint_every >= 0")
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed}")


def _coerce(key: str, raw, default):
    if not isinstance(raw, str):
        return tuple(raw) if isinstance(default, tuple) else raw
    text = raw.strip()
    try:
        if isinstance(default, bool):
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if isinstance(default, int):
            return int(text, 0)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            return tuple(float(s) for s in text.replace(",", " ").split())
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    return text


# --- experiment registry ----------------------------------------------------


@dataclass(frozen=True)
class Experiment:
    name: str
    dims: tuple[int, ...]
    initial: Callable[[Grid, RunConfig], tuple[np.ndarray, np.ndarray]]
    desk: dict = field(default_factory=dict)
    paper: dict = field(default_factory=dict)


_SWEEP_DTS = tuple(1e-2 / 2**i for i in range(6))

EXPERIMENTS: dict[str, Experiment] = {
    e.name: e
    for e in (
        Experiment(
            "accuracy",
            (2,),
            lambda g, c: ic_accuracy(g),
            desk=dict(n=64, scheme="bdf2", dt=1e-3, t_end=0.5, snapshot_times=(0.5,), sweep_dts=_SWEEP_DTS),
            paper=dict(n=128, scheme="bdf2", dt=1e-3, t_end=0.5, snapshot_times=(0.5,), sweep_dts=_SWEEP_DTS),
        ),
        Experiment(
            "spinodal2d",
            (2,),
            lambda g, c: ic_spinodal(g, c.phi_bar, c.seed),
            desk=dict(n=64, scheme="bdf2", dt=1e-2, t_end=50.0, snapshot_times=(0.0, 10.0, 50.0), checkpoint_every=1000),
            paper=dict(
                n=128, scheme="bdf2", dt=5e-4, t_end=1500.0, csv_stride=100, checkpoint_every=20000,
                snapshot_times=(10.0, 50.0, 70.0, 200.0, 400.0, 1500.0),
            ),
        ),
        Experiment(
            "spinodal3d",
            (3,),
            lambda g, c: ic_spinodal(g, c.phi_bar, c.seed),
            desk=dict(dim=3, n=32, scheme="bdf2", dt=1e-2, t_end=10.0, snapshot_times=(0.0, 10.0), vtk=True),
            paper=dict(
                dim=3, n=128, scheme="bdf2", dt=5e-4, t_end=1500.0, csv_stride=100, checkpoint_every=20000,
                snapshot_times=(10.0, 200.0, 1500.0), vtk=True,
            ),
        ),
        Experiment(
            "absorption_uniform",
            (2,),
            lambda g, c: ic_absorption_uniform(g),
            desk=dict(n=64, scheme="bdf2", dt=1e-2, t_end=50.0, snapshot_times=(0.0, 10.0, 50.0), checkpoint_every=1000),
            paper=dict(
                n=128, scheme="bdf2", dt=1e-3, t_end=1000.0, csv_stride=100, checkpoint_every=20000,
                snapshot_times=(0.0, 10.0, 50.0, 200.0, 500.0, 1000.0),
            ),
        ),
        Experiment(
            "absorption_local",
            (2,),
            lambda g, c: ic_absorption_local(g),
            desk=dict(n=64, scheme="bdf2", dt=1e-2, t_end=50.0, snapshot_times=(0.0, 10.0, 50.0), checkpoint_every=1000),
            paper=dict(
                n=128, scheme="bdf2", dt=1e-3, t_end=1000.0, csv_stride=100, checkpoint_every=20000,
                snapshot_times=(0.0, 10.0, 50.0, 200.0, 500.0, 1000.0),
            ),
        ),
    )
}


def get_experiment(name: str) -> Experiment:
    try:
        return EXPERIMENTS[name]
    except KeyError:
        raise ConfigError(f"unknown experiment {name!r}; choose from {', '.join(EXPERIMENTS)}") from None


def initial_state(cfg: RunConfig, model: Model | None = None) -> State:
    model = model or Model(cfg.grid(), cfg.model_params())
    phi0, rho0 = get_experiment(cfg.experiment).initial(model.grid, cfg)
    return model.init_state(phi0, rho0)


def resolve_output_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not out.is_absolute():
        out = Path(root) / out
    return out


# --- running ----------------------------------------------------------------


@dataclass
class RunSummary:
    output_dir: Path
    steps: int
    final: State
    records: list[EnergyRecord]
    w_violations: int = 0
    completed: bool = True


def snapshot_meta(cfg: RunConfig, state: State, step: int) -> dict:
    return {
        "kind": "snapshot",
        "experiment": cfg.experiment,
        "time": state.time,
        "step": step,
        "n": cfg.n,
        "dim": cfg.dim,
        "length": cfg.length,
        "params": dataclasses.asdict(cfg.model_params()),
    }


def write_checkpoint(path, cfg: RunConfig, state: State, prev: State | None, step: int, csv_rows: int, w_violations: int = 0):
    fields = dict(state.as_dict())
    if prev is not None:
        fields.update({"prev_" + k: v for k, v in prev.as_dict().items()})
    meta = {
        "kind": "checkpoint",
        "step": step,
        "time": state.time,
        "prev_time": None if prev is None else prev.time,
        "csv_rows": csv_rows,
        "w_violations": w_violations,
        "config": cfg.echo(),
    }
    write_snapshot(path, fields, meta)


def read_checkpoint(path):
    """Returns ``(cfg, state, prev, step, csv_rows, w_violations)``."""
    try:
        header, fields = read_snapshot(path)
    except (ValueError, KeyError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if header.get("kind") != "checkpoint":
        raise CheckpointError(f"{path} is a snapshot, not a checkpoint")
    cfg = RunConfig.from_text(header["config"])
    state = State(*(fields[k] for k in State.fields), time=header["time"])
    prev = None
    if "prev_phi" in fields:
        prev = State(*(fields["prev_" + k] for k in State.fields), time=header["prev_time"])
    return cfg, state, prev, int(header["step"]), int(header["csv_rows"]), int(header.get("w_violations", 0))


def execute(cfg: RunConfig, max_steps: int | None = None, checkpoint=None, output_dir=None) -> RunSummary:
    """Run (or resume) a simulation; raises on configuration, solver or I/O errors.

    ``max_steps`` stops early after that many steps in this call (the
    checkpoint written then can be resumed).
    """
    cfg.validate()
    out = Path(output_dir) if output_dir is not None else resolve_output_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    model = Model(cfg.grid(), cfg.model_params())
    solver_cfg = cfg.solver_config()
    csv_path = out / CSV_NAME
    snaps = cfg.snapshot_steps()
    total = cfg.nsteps

    if checkpoint is None:
        state, prev, step, csv_rows, w_bad = initial_state(cfg, model), None, 0, 0, 0
        (out / CONFIG_NAME).write_text(cfg.echo())
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            w.writerow(initial_record(model, state).csv_row())
        csv_rows = 1
        records = [initial_record(model, state)]
        if 0 in snaps:
            _write_snapshot_files(out, cfg, state, 0)
    else:
        _, state, prev, step, csv_rows, w_bad = read_checkpoint(checkpoint)
        truncate_csv(csv_path, csv_rows)
        records = []
        log.info("resuming %s at step %d (t=%g)", cfg.experiment, step, state.time)

    remaining = total - step
    if max_steps is not None:
        remaining = min(remaining, max_steps)
    with open(csv_path, "a", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for report in march(model, state, cfg.dt, remaining, cfg.kind, solver_cfg, prev=prev, bootstrap=cfg.bootstrap):
            prev, state = state, report.state_new
            step += 1
            records.append(report.energies)
            if not report.w_positive:
                if w_bad == 0:
                    log.warning("W lost positivity at step %d (t=%g); counting further occurrences", step, state.time)
                w_bad += 1
            if step % cfg.csv_stride == 0 or step == total:
                writer.writerow(report.energies.csv_row())
                csv_rows += 1
            if step in snaps:
                fh.flush()
                _write_snapshot_files(out, cfg, state, step)
            if cfg.checkpoint_every and step % cfg.checkpoint_every == 0 and step < total:
                fh.flush()
                write_checkpoint(out / CHECKPOINT_NAME, cfg, state, prev, step, csv_rows, w_bad)
    write_checkpoint(out / CHECKPOINT_NAME, cfg, state, prev, step, csv_rows, w_bad)
    if w_bad:
        log.warning("W was non-positive somewhere on %d step(s)", w_bad)
    return RunSummary(out, step, state, records, w_bad, completed=step == total)


def _write_snapshot_files(out: Path, cfg: RunConfig, state: State, step: int) -> None:
    stem = out / f"snap_{step:08d}"
    write_snapshot(stem.with_suffix(".snap"), state.as_dict(), snapshot_meta(cfg, state, step))
    if cfg.vtk:
        write_vtk(stem.with_suffix(".vtk"), {"phi": state.phi, "rho": state.rho}, cfg.length / cfg.n)


def resume(checkpoint, max_steps: int | None = None) -> RunSummary:
    cfg = read_checkpoint(checkpoint)[0]
    return execute(cfg, max_steps=max_steps, checkpoint=checkpoint, output_dir=Path(checkpoint).parent)


def execute_sweep(cfg: RunConfig, output_dir=None) -> list[ConvergenceRow]:
    """Time-step refinement study; writes ``convergence_<scheme>.csv``."""
    out = Path(output_dir) if output_dir is not None else resolve_output_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    dts = cfg.sweep_dts or tuple(cfg.dt / 2**i for i in range(6))
    model = Model(cfg.grid(), cfg.model_params())
    try:
        rows = convergence_sweep(
            model, initial_state(cfg, model), cfg.kind, dts, cfg.t_end, cfg.benchmark_dt,
            benchmark_kind=SchemeKind.parse(cfg.benchmark_scheme), solver_cfg=cfg.solver_config(),
            bootstrap=cfg.bootstrap,
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    (out / CONFIG_NAME).write_text(cfg.echo())
    with open(out / f"convergence_{cfg.kind.value}.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("dt", "error_l2", "observed_order"))
        for r in rows:
            w.writerow((repr(r.dt), repr(r.error_l2), "" if r.observed_order is None else repr(r.observed_order)))
    return rows


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, SolverError):
        return EXIT_SOLVER
    if isinstance(exc, OSError):
        return EXIT_IO
    raise exc


def run(cfg: RunConfig) -> int:
    """Run a configuration and map failures to exit codes."""
    try:
        summary = execute(cfg)
    except (ConfigError, SolverError, OSError) as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return exit_code_for(exc)
    log.info("finished %d steps, output in %s", summary.steps, summary.output_dir)
    return EXIT_OK


def interface_concentration(model: Model, state: State, frac: float = 0.5) -> tuple[float, float]:
    """``(max rho on the band |Z.grad phi| > frac*max, mean rho)``."""
    g = model.grid
    grad = g.gradient(state.phi)
    zg = np.abs(np.sum(model.z_field(state.phi) * grad, axis=0))
    band = zg > frac * zg.max()
    return float(state.rho[band].max()), g.mean(state.rho)
