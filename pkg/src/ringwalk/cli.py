"""Command-line front end.

    ringwalk evolve     --nodes 8 --range 3 --gamma 0 --t-max 10
    ringwalk spectrum   --nodes 8 --range 3
    ringwalk degeneracy --nodes 10 --range 2 --format json
    ringwalk mixing     --nodes 100 --range 2 --gamma 0.001 --epsilon 0.1 --method perturbative
    ringwalk sweep      --config grid.cfg --output sweep.csv

Values come from built-in defaults, then ``--config`` (flat ``key = value``
text), then flags. Exit status: 0 success, 1 computational failure, 2 bad
configuration.
"""

from __future__ import annotations

import argparse
import itertools
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import __version__
from .errors import CapacityError, IntegrationError, ParameterError, UnsupportedCaseError
from .evolve import (
    DensityMatrix,
    Trajectory,
    classical_trajectory,
    coherent_trajectory,
    integrate_master,
    perturbative_trajectory,
    sample_times,
)
from .mixing import instantaneous_bound, mixing_report, tv_to_uniform
from .network import PRESETS, NetworkSpec
from .output import csv_text, json_text, write_atomic
from .spectral import bloch_system, classify_degeneracies, corrections, momentum_eigenvalues, resolve_sign

COMMANDS = ("evolve", "spectrum", "degeneracy", "mixing", "sweep")
METHODS = ("exact", "perturbative", "coherent", "classical")
FORMATS = ("csv", "json")
MODES = ("first", "permanent")

# config-file key -> RunConfig field
KEYS = {
    "nodes": "N", "n": "N",
    "range": "l", "l": "l",
    "gamma": "gamma",
    "epsilon": "epsilon",
    "t_max": "t_max",
    "stride": "stride",
    "method": "method",
    "preset": "preset",
    "initial_node": "initial_node",
    "output": "output",
    "format": "format",
    "mode": "mode",
    "rate": "rate",
    "jobs": "jobs",
}
GRID_FIELDS = {"N": int, "l": int, "gamma": float, "epsilon": float}
FIELD_TYPES = {
    "N": int, "l": int, "gamma": float, "epsilon": float, "t_max": float, "stride": float,
    "method": str, "preset": str, "initial_node": int, "output": str, "format": str,
    "mode": str, "rate": float, "jobs": int,
}


class ConfigError(Exception):
    """Invalid configuration; reported as a usage error (exit status 2)."""


@dataclass(frozen=True)
class RunConfig:
    command: str
    N: int | None = None
    l: int = 2
    gamma: float = 0.001
    epsilon: float = 0.1
    t_max: float | None = None
    stride: float = 0.5
    method: str = "exact"
    preset: str = "gurvitz"
    initial_node: int = 0
    output: str | None = None
    format: str = "csv"
    mode: str = "first"
    rate: float = 1.0
    jobs: int = 1
    grid: dict = field(default_factory=dict)

    def effective(self) -> dict:
        """Config as embedded in output headers (output path excluded)."""
        d = asdict(self)
        d.pop("output")
        d.pop("jobs")
        return d


# -- parsing --------------------------------------------------------------------


def _convert(key: str, raw: str, typ):
    try:
        return typ(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected {typ.__name__}, got {raw!r}") from None


def read_config_file(path: str) -> tuple[dict, dict]:
    """Parse flat ``key = value`` text. Keys ``grid.<name>`` hold comma-separated lists."""
    values: dict = {}
    grid: dict = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path!r}: {exc.strerror}") from None
    for lineno, line in enumerate(lines, 1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in text.split("=", 1))
        key = key.lower().replace("-", "_")
        if key.startswith("grid."):
            name = KEYS.get(key[5:])
            if name not in GRID_FIELDS:
                raise ConfigError(f"{path}:{lineno}: cannot sweep over {key[5:]!r}")
            items = [s.strip() for s in raw.split(",") if s.strip()]
            if not items:
                raise ConfigError(f"{path}:{lineno}: empty grid list for {key[5:]!r}")
            grid[name] = [_convert(key, s, GRID_FIELDS[name]) for s in items]
            continue
        name = KEYS.get(key)
        if name is None:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        values[name] = _convert(key, raw, FIELD_TYPES[name])
    return values, grid


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    S = argparse.SUPPRESS
    common.add_argument("--nodes", "-n", dest="N", type=int, default=S, help="node count N")
    common.add_argument("--range", "-l", dest="l", type=int, default=S, help="neighbours per side l")
    common.add_argument("--gamma", type=float, default=S, help="dephasing rate")
    common.add_argument("--epsilon", type=float, default=S, help="mixing threshold (sum |P-Q| scale)")
    common.add_argument("--t-max", dest="t_max", type=float, default=S, help="trajectory horizon")
    common.add_argument("--stride", type=float, default=S, help="sampling interval")
    common.add_argument("--method", choices=METHODS, default=S)
    common.add_argument("--preset", choices=sorted(PRESETS), default=S)
    common.add_argument("--initial-node", dest="initial_node", type=int, default=S)
    common.add_argument("--output", "-o", default=S, help="output path (default stdout)")
    common.add_argument("--format", choices=FORMATS, default=S)
    common.add_argument("--mode", choices=MODES, default=S, help="instantaneous mixing mode")
    common.add_argument("--rate", type=float, default=S, help="classical bond rate")
    common.add_argument("--jobs", type=int, default=S, help="parallel sweep workers")
    common.add_argument("--config", dest="config_path", default=S, help="key = value config file")

    parser = argparse.ArgumentParser(prog="ringwalk", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"ringwalk {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def validate(cfg: RunConfig) -> RunConfig:
    if cfg.command == "sweep":
        if not cfg.grid:
            raise ConfigError("sweep needs at least one grid.<name> list in the config file")
        if cfg.output in (None, "-"):
            raise ConfigError("output: sweep needs a file path (a manifest is written beside it)")
        for point in _grid_points(cfg):
            validate(replace(point, command="mixing"))
        return cfg
    if cfg.N is None:
        raise ConfigError("N: --nodes is required")
    if cfg.N < 3:
        raise ConfigError(f"N must satisfy N >= 3, got {cfg.N}")
    lmax = (cfg.N - 1) // 2
    if not 1 <= cfg.l <= lmax:
        raise ConfigError(f"l must satisfy 1 <= l <= floor((N-1)/2) = {lmax}, got {cfg.l}")
    if not cfg.gamma >= 0:
        raise ConfigError(f"gamma must satisfy gamma >= 0, got {cfg.gamma}")
    if not 0 < cfg.epsilon < 1:
        raise ConfigError(f"epsilon must satisfy 0 < epsilon < 1, got {cfg.epsilon}")
    if cfg.t_max is not None and not cfg.t_max >= 0:
        raise ConfigError(f"t_max must satisfy t_max >= 0, got {cfg.t_max}")
    if not cfg.stride > 0:
        raise ConfigError(f"stride must satisfy stride > 0, got {cfg.stride}")
    if not 0 <= cfg.initial_node < cfg.N:
        raise ConfigError(f"initial_node must satisfy 0 <= initial_node < N, got {cfg.initial_node}")
    if cfg.method not in METHODS:
        raise ConfigError(f"method must be one of {METHODS}, got {cfg.method!r}")
    if cfg.preset not in PRESETS:
        raise ConfigError(f"preset must be one of {tuple(sorted(PRESETS))}, got {cfg.preset!r}")
    if cfg.format not in FORMATS:
        raise ConfigError(f"format must be one of {FORMATS}, got {cfg.format!r}")
    if cfg.mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {cfg.mode!r}")
    if not cfg.rate >= 0:
        raise ConfigError(f"rate must satisfy rate >= 0, got {cfg.rate}")
    if cfg.jobs < 1:
        raise ConfigError(f"jobs must satisfy jobs >= 1, got {cfg.jobs}")
    if cfg.method == "perturbative" and cfg.command in ("evolve", "mixing") and cfg.l < 2:
        raise ConfigError("method perturbative requires l >= 2; use --method exact for the cycle")
    return cfg


def parse_config(argv: list[str] | None = None) -> RunConfig:
    """Resolve defaults < config file < flags into a validated ``RunConfig``."""
    args = vars(build_parser().parse_args(argv))
    command = args.pop("command")
    values: dict = {}
    grid: dict = {}
    path = args.pop("config_path", None)
    if path is not None:
        values, grid = read_config_file(path)
    values.update(args)
    return validate(RunConfig(command=command, grid=grid, **values))


# -- running --------------------------------------------------------------------


def _grid_points(cfg: RunConfig) -> list[RunConfig]:
    names = [n for n in GRID_FIELDS if n in cfg.grid]
    combos = itertools.product(*(cfg.grid[n] for n in names))
    return [replace(cfg, grid={}, **dict(zip(names, combo))) for combo in combos]


def _t_max(cfg: RunConfig) -> float:
    if cfg.t_max is not None:
        return cfg.t_max
    if cfg.command == "mixing" and cfg.gamma > 0:
        return float(np.ceil(1.2 * instantaneous_bound(cfg.N, cfg.gamma, cfg.epsilon)))
    return 1000.0 if cfg.command == "mixing" else 10.0


def _header(cfg: RunConfig, time_scale: float) -> dict:
    spec = NetworkSpec(cfg.N, cfg.l)
    return {
        "tool": f"ringwalk {__version__}",
        "config": cfg.effective(),
        "preset": cfg.preset,
        "sigma": resolve_sign(spec),
        "time_scale": time_scale,
    }


def build_trajectory(cfg: RunConfig) -> Trajectory:
    spec = NetworkSpec(cfg.N, cfg.l)
    times = sample_times(_t_max(cfg), cfg.stride)
    if cfg.method == "exact":
        rho0 = DensityMatrix.point(cfg.N, cfg.initial_node)
        return integrate_master(
            spec, cfg.gamma, rho0, float(times[-1]), times=times, preset=cfg.preset
        ).trajectory
    if cfg.method == "perturbative":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return perturbative_trajectory(spec, cfg.gamma, times, initial_node=cfg.initial_node)
    if cfg.method == "coherent":
        return coherent_trajectory(spec, times, cfg.initial_node)
    return classical_trajectory(spec, cfg.rate, times, cfg.initial_node)


def run_evolve(cfg: RunConfig) -> str:
    traj = build_trajectory(cfg)
    tv = tv_to_uniform(traj.distributions)
    header = _header(cfg, traj.time_scale)
    header["source"] = traj.source
    columns = ["t"] + [f"P_{j}" for j in range(cfg.N)] + ["tv_to_uniform"]
    if cfg.format == "json":
        return json_text(header, {"columns": columns, "t": traj.times,
                                  "P": traj.distributions, "tv_to_uniform": tv})
    rows = ([t, *p, d] for t, p, d in zip(traj.times, traj.distributions, tv))
    return csv_text(header, columns, rows)


def run_spectrum(cfg: RunConfig) -> str:
    spec = NetworkSpec(cfg.N, cfg.l)
    bloch = bloch_system(spec)
    lam = momentum_eigenvalues(cfg.N, cfg.l)
    corr = corrections(spec, cfg.gamma, "classes")
    header = _header(cfg, PRESETS["gurvitz"].hopping)
    if cfg.format == "json":
        return json_text(header, {"thetas": bloch.thetas, "energies": bloch.energies,
                                  "lambda": lam, "corrections": corr})
    rows = [["E", None, n, th, e] for n, (th, e) in enumerate(zip(bloch.thetas, bloch.energies))]
    rows += [["lambda", m, n, None, lam[m, n]] for m in range(cfg.N) for n in range(cfg.N)]
    rows += [["correction", m, n, None, corr[m, n]] for m in range(cfg.N) for n in range(cfg.N)]
    return csv_text(header, ["quantity", "m", "n", "theta", "value"], rows)


def run_degeneracy(cfg: RunConfig) -> str:
    spec = NetworkSpec(cfg.N, cfg.l)
    report = classify_degeneracies(spec)
    printed = corrections(spec, cfg.gamma, "printed", report)
    classes = corrections(spec, cfg.gamma, "classes", report)
    header = _header(cfg, PRESETS["gurvitz"].hopping)
    header["unexpected_degeneracies"] = len(report.unexpected)
    records = []
    for i, c in enumerate(report.classes):
        first = c.members[0]
        records.append({
            "class": i,
            "label": c.label,
            "group": c.group,
            "lambda": c.lam,
            "size": c.size,
            "excluded": c.excluded_from_initial_state,
            "correction_printed": printed[first],
            "correction_classes": classes[first],
            "members": ";".join(f"{m}:{n}" for m, n in c.members),
        })
    if cfg.format == "json":
        return json_text(header, {"classes": records})
    columns = list(records[0])
    return csv_text(header, columns, ([r[k] for k in columns] for r in records))


def _report_row(cfg: RunConfig) -> dict:
    traj = build_trajectory(cfg)
    mode = "first_crossing" if cfg.mode == "first" else "permanent_crossing"
    # sample grid is the quadrature grid; --stride controls averaging accuracy
    report = mixing_report(traj, cfg.l, cfg.gamma, cfg.epsilon, mode, max_dt=None)
    row = {"method": cfg.method}
    row.update(report.as_dict())
    row["time_scale"] = traj.time_scale
    return row


def run_mixing(cfg: RunConfig) -> str:
    row = _report_row(cfg)
    header = _header(cfg, row["time_scale"])
    if cfg.format == "json":
        return json_text(header, {"report": row})
    return csv_text(header, list(row), [list(row.values())])


def run_sweep(cfg: RunConfig) -> tuple[str, str]:
    points = [replace(p, command="mixing") for p in _grid_points(cfg)]
    with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
        rows = list(pool.map(_report_row, points))  # map preserves grid order
    header = {
        "tool": f"ringwalk {__version__}",
        "config": cfg.effective(),
        "preset": cfg.preset,
        "points": len(points),
    }
    if cfg.format == "json":
        body = json_text(header, {"rows": rows})
    else:
        body = csv_text(header, list(rows[0]), [list(r.values()) for r in rows])
    manifest = json_text(header, {
        "grid": cfg.grid,
        "order": [n for n in GRID_FIELDS if n in cfg.grid],
        "points": [p.effective() for p in points],
        "output": cfg.output.replace("\\", "/").rsplit("/", 1)[-1],
    })
    return body, manifest


def run(cfg: RunConfig, stdout=None) -> int:
    """Execute ``cfg``; returns the process exit status."""
    try:
        if cfg.command == "sweep":
            body, manifest = run_sweep(cfg)
            write_atomic(cfg.output + ".manifest.json", manifest)
            write_atomic(cfg.output, body)
            return 0
        text = {"evolve": run_evolve, "spectrum": run_spectrum,
                "degeneracy": run_degeneracy, "mixing": run_mixing}[cfg.command](cfg)
    except (IntegrationError, CapacityError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"ringwalk: computation failed: {exc}", file=sys.stderr)
        return 1
    except (ParameterError, UnsupportedCaseError) as exc:
        print(f"ringwalk: error: {exc}", file=sys.stderr)
        return 2
    write_atomic(cfg.output, text, stdout)
    return 0


def main(argv: list[str] | None = None) -> int:
    try:
        cfg = parse_config(argv)
    except ConfigError as exc:
        print(f"ringwalk: error: {exc}", file=sys.stderr)
        return 2
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
