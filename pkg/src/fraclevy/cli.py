"""Reproducible experiment runner.

Every experiment is described by an INI config file (sections and keys
documented in the README), runs as ``fraclevy run --config FILE``, and leaves
behind ``solution.csv``, ``diagnostics.csv``, and a ``manifest`` holding the
fully resolved configuration plus the package version and seed.  The manifest
is itself a valid config: replaying it reproduces the CSV outputs byte for
byte.

Exit codes: 0 success, 2 config validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .operators import Grid1D, OperatorSpec, assemble
from .registry import EXTERIOR_BUILDERS, forcing_builder
from .solvers import (
    DirichletProblem,
    NeumannProblem,
    SolverError,
    escape_probability,
    solve_steady_dirichlet,
    solve_transient,
)
from .spectral import (
    PeriodicField,
    energy_equivalence_check,
    verify_rows,
)
from .stochastic import (
    crossover_experiment,
    mc_escape_probability,
    power_jump_law,
    simulate_flight,
    tempered_jump_law,
)

COMMANDS = ("solve-dirichlet", "solve-neumann", "escape", "mc-escape",
            "simulate", "crossover", "verify-symbol", "verify-energy")


class ConfigError(ValueError):
    """Invalid or missing configuration field; message names the field."""


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


class Config:
    """Typed accessors over the INI sections, raising field-named errors."""

    def __init__(self, parser: configparser.ConfigParser):
        self.parser = parser

    @classmethod
    def load(cls, path) -> "Config":
        parser = configparser.ConfigParser()
        read = parser.read(path)
        if not read:
            raise ConfigError(f"config file not found: {path}")
        return cls(parser)

    def _get(self, section: str, key: str, required: bool = True,
             default=None):
        if not self.parser.has_option(section, key):
            if required:
                raise ConfigError(f"missing field [{section}] {key}")
            return default
        return self.parser.get(section, key)

    def str(self, section, key, required=True, default=None):
        return self._get(section, key, required, default)

    def float(self, section, key, required=True, default=None):
        raw = self._get(section, key, required, default)
        if raw is None or isinstance(raw, (int, float)):
            return raw
        try:
            return float(raw)
        except ValueError as exc:
            raise ConfigError(f"field [{section}] {key} is not a number: "
                              f"{raw!r}") from exc

    def int(self, section, key, required=True, default=None):
        raw = self._get(section, key, required, default)
        if raw is None or isinstance(raw, int):
            return raw
        try:
            return int(raw)
        except ValueError as exc:
            raise ConfigError(f"field [{section}] {key} is not an integer: "
                              f"{raw!r}") from exc

    def floats(self, section, key, required=True, default=()):
        raw = self._get(section, key, required, None)
        if raw is None:
            return tuple(default)
        raw = raw.strip()
        if not raw:
            return tuple(default)
        try:
            return tuple(float(tok) for tok in raw.replace(",", " ").split())
        except ValueError as exc:
            raise ConfigError(f"field [{section}] {key} is not a number list: "
                              f"{raw!r}") from exc

    def set(self, section, key, value):
        if not self.parser.has_section(section):
            self.parser.add_section(section)
        self.parser.set(section, key, _fmt(value))

    def write(self, path) -> None:
        with open(path, "w") as fh:
            self.parser.write(fh)


def _operator_spec(cfg: Config) -> OperatorSpec:
    kind = cfg.str("operator", "kind")
    beta = cfg.float("operator", "beta")
    lam = cfg.float("operator", "lambda", required=(kind == "tempered"),
                    default=0.0)
    try:
        return OperatorSpec(kind, beta, lam or 0.0, 1)
    except ValueError as exc:
        raise ConfigError(f"invalid [operator] section: {exc}") from exc


def _grid(cfg: Config) -> Grid1D:
    try:
        return Grid1D(cfg.float("grid", "a"), cfg.float("grid", "b"),
                      cfg.int("grid", "n"))
    except ValueError as exc:
        raise ConfigError(f"invalid [grid] section: {exc}") from exc


def _exterior(cfg: Config, key: str = "g"):
    name = cfg.str("data", key, required=False, default="zero")
    params = cfg.floats("data", f"{key}_params", required=False)
    if name not in EXTERIOR_BUILDERS:
        raise ConfigError(
            f"field [data] {key}: unknown builtin {name!r} "
            f"(choose from {sorted(EXTERIOR_BUILDERS)})"
        )
    try:
        return EXTERIOR_BUILDERS[name](*params)
    except TypeError as exc:
        raise ConfigError(f"field [data] {key}_params: {exc}") from exc


def _forcing(cfg: Config, key: str):
    name = cfg.str("data", key, required=False, default=None)
    if name is None or name == "zero":
        return None
    params = cfg.floats("data", f"{key}_params", required=False)
    try:
        return forcing_builder(name, params)
    except KeyError as exc:
        raise ConfigError(f"field [data] {key}: {exc}") from exc


def _jump_law(cfg: Config, beta: float, lam: float, width: float):
    r_min = cfg.float("stochastic", "r_min", required=False,
                      default=1e-3 * width)
    if lam > 0:
        return tempered_jump_law(beta, lam, r_min)
    return power_jump_law(beta, r_min)


def _cells(values) -> list[tuple[float, float]]:
    if len(values) % 2 or not values:
        raise ConfigError("field [data] H must hold pairs: lo, hi[, lo, hi...]")
    return [(values[i], values[i + 1]) for i in range(0, len(values), 2)]


def _cmd_solve_dirichlet(cfg: Config, out: Path, seed, threads) -> dict:
    spec = _operator_spec(cfg)
    grid = _grid(cfg)
    opr = assemble(grid, spec)
    g = _exterior(cfg)
    f = _forcing(cfg, "f")
    transient = cfg.parser.has_section("time")
    if transient:
        p0_fn = _forcing(cfg, "p0")
        p0 = p0_fn(grid.nodes, 0.0) if p0_fn is not None else None
        prob = DirichletProblem(opr, g, f, p0)
        rep = solve_transient(prob, cfg.float("time", "t"),
                              cfg.float("time", "tau"))
        steps = np.arange(len(rep.mass_history))
        write_csv(out / "diagnostics.csv",
                  ["step", "time", "mass", "energy", "seminorm"],
                  zip(steps, steps * cfg.float("time", "tau"),
                      rep.mass_history, rep.energy_history,
                      rep.seminorm_history))
    else:
        prob = DirichletProblem(opr, g, f)
        rep = solve_steady_dirichlet(prob)
        write_csv(out / "diagnostics.csv", ["residual_norm", "iterations"],
                  [[rep.residual_norm, rep.iterations]])
    write_csv(out / "solution.csv", ["node", "value"],
              zip(grid.nodes, rep.solution))
    return {"residual_norm": rep.residual_norm}


def _cmd_solve_neumann(cfg: Config, out: Path, seed, threads) -> dict:
    spec = _operator_spec(cfg)
    grid = _grid(cfg)
    opr = assemble(grid, spec)
    if not cfg.parser.has_section("time"):
        raise ConfigError("missing section [time] (Neumann runs are transient)")
    name = cfg.str("data", "g_ext", required=False, default="zero")
    g_ext = None if name == "zero" else _exterior(cfg, "g_ext")
    f = _forcing(cfg, "f")
    p0_fn = _forcing(cfg, "p0")
    p0 = p0_fn(grid.nodes, 0.0) if p0_fn is not None else None
    prob = NeumannProblem(opr, g_ext, f, p0)
    tau = cfg.float("time", "tau")
    rep = solve_transient(prob, cfg.float("time", "t"), tau)
    steps = np.arange(len(rep.mass_history))
    write_csv(out / "solution.csv", ["node", "value"],
              zip(grid.nodes, rep.solution))
    write_csv(out / "diagnostics.csv",
              ["step", "time", "mass", "energy", "seminorm"],
              zip(steps, steps * tau, rep.mass_history, rep.energy_history,
                  rep.seminorm_history))
    drift = np.max(np.abs(rep.mass_history - rep.mass_history[0]))
    return {"mass_drift": drift}


def _cmd_escape(cfg: Config, out: Path, seed, threads) -> dict:
    spec = _operator_spec(cfg)
    grid = _grid(cfg)
    cells = _cells(cfg.floats("data", "h"))
    try:
        rep = escape_probability(grid, spec, cells)
    except ValueError as exc:
        raise ConfigError(f"field [data] H: {exc}") from exc
    write_csv(out / "solution.csv", ["node", "value"],
              zip(grid.nodes, rep.solution))
    write_csv(out / "diagnostics.csv", ["residual_norm", "iterations"],
              [[rep.residual_norm, rep.iterations]])
    return {"residual_norm": rep.residual_norm}


def _cmd_mc_escape(cfg: Config, out: Path, seed, threads) -> dict:
    spec = _operator_spec(cfg)
    grid = _grid(cfg)
    cells = _cells(cfg.floats("data", "h"))
    x0 = cfg.float("stochastic", "x0")
    n_walkers = cfg.int("stochastic", "n_walkers")
    law = _jump_law(cfg, spec.beta, spec.lam, grid.width)
    res = mc_escape_probability((grid.a, grid.b), cells, law, x0, n_walkers,
                                seed, threads=threads)
    write_csv(out / "solution.csv", ["node", "value"], [[x0, res.estimate]])
    write_csv(out / "diagnostics.csv",
              ["stderr", "n_walkers", "hits", "capped", "flagged"],
              [[res.stderr, res.n_walkers, res.hits, res.capped,
                int(res.flagged)]])
    return {"estimate": res.estimate, "stderr": res.stderr}


def _cmd_simulate(cfg: Config, out: Path, seed, threads) -> dict:
    beta = cfg.float("stochastic", "beta")
    lam = cfg.float("stochastic", "lambda", required=False, default=0.0)
    r_min = cfg.float("stochastic", "r_min", required=False, default=1e-3)
    zeta = cfg.float("stochastic", "zeta", required=False, default=1.0)
    t_end = cfg.float("stochastic", "t_end", required=False, default=1.0)
    n_walkers = cfg.int("stochastic", "n_walkers", required=False, default=10)
    law = tempered_jump_law(beta, lam, r_min) if lam > 0 \
        else power_jump_law(beta, r_min)
    streams = np.random.SeedSequence(seed).spawn(n_walkers)
    rows = []
    finals = []
    for wid, s in enumerate(streams):
        traj = simulate_flight(law, zeta, t_end,
                               np.random.Generator(np.random.Philox(s)))
        rows.extend((wid, t, x) for t, x in zip(traj.times, traj.positions))
        finals.append((wid, traj.positions[-1]))
    write_csv(out / "trajectories.csv", ["walker_id", "t", "x"], rows)
    write_csv(out / "solution.csv", ["walker_id", "final_position"], finals)
    write_csv(out / "diagnostics.csv", ["n_walkers", "zeta", "t_end"],
              [[n_walkers, zeta, t_end]])
    return {"n_walkers": n_walkers}


def _cmd_crossover(cfg: Config, out: Path, seed, threads) -> dict:
    beta = cfg.float("stochastic", "beta")
    lams = cfg.floats("stochastic", "lambda_grid")
    threshold = cfg.float("stochastic", "threshold", required=False,
                          default=0.05)
    n_samples = cfg.int("stochastic", "n_samples", required=False,
                        default=100_000)
    r_min = cfg.float("stochastic", "r_min", required=False, default=1e-3)
    m_cap = cfg.int("stochastic", "m_cap", required=False, default=200_000)
    rep = crossover_experiment(beta, lams, threshold, n_samples, seed,
                               r_min, m_cap)
    write_csv(out / "solution.csv", ["lambda", "m_star"],
              zip(rep.lambda_grid, rep.m_star))
    write_csv(out / "diagnostics.csv",
              ["fitted_slope", "threshold", "n_samples", "unresolved"],
              [[rep.fitted_slope, threshold, n_samples,
                int(rep.unresolved.sum())]])
    return {"fitted_slope": rep.fitted_slope}


def _cmd_verify_symbol(cfg: Config, out: Path, seed, threads) -> dict:
    n = cfg.int("spectral", "n", required=False, default=1)
    betas = cfg.floats("spectral", "beta_grid", required=False,
                       default=(0.3, 0.5, 0.8, 1.2, 1.5, 1.8))
    lams = cfg.floats("spectral", "lambda_grid", required=False,
                      default=(0.1, 1.0, 10.0))
    ks = cfg.floats("spectral", "k_grid", required=False,
                    default=(0.1, 0.5, 1.0, 2.0, 5.0, 10.0))
    rows = []
    worst = 0.0
    for beta in betas:
        for lam in lams:
            for row in verify_rows(n, beta, lam, ks):
                rows.append([row["n"], row["beta"], row["lam"], row["k"],
                             row["closed_form"], row["quadrature"],
                             row["rel_error"]])
                worst = max(worst, row["rel_error"])
    write_csv(out / "solution.csv",
              ["n", "beta", "lambda", "k", "closed_form", "quadrature",
               "rel_error"], rows)
    write_csv(out / "diagnostics.csv", ["max_rel_error"], [[worst]])
    return {"max_rel_error": worst}


def _cmd_verify_energy(cfg: Config, out: Path, seed, threads) -> dict:
    m = cfg.int("spectral", "m", required=False, default=1024)
    length = cfg.float("spectral", "length", required=False, default=16.0)
    rng = np.random.Generator(np.random.Philox(seed))
    coeffs = np.zeros(m // 2 + 1, dtype=complex)
    band = slice(1, m // 8)
    coeffs[band] = rng.normal(size=m // 8 - 1) + 1j * rng.normal(size=m // 8 - 1)
    field = PeriodicField(np.fft.irfft(coeffs, n=m), length)
    e_half, e_grad = energy_equivalence_check(field)
    gap = abs(e_half - e_grad) / max(e_grad, 1e-300)
    write_csv(out / "solution.csv",
              ["half_order_energy", "gradient_energy", "rel_gap"],
              [[e_half, e_grad, gap]])
    write_csv(out / "diagnostics.csv", ["m", "length"], [[m, length]])
    return {"rel_gap": gap}


_DISPATCH = {
    "solve-dirichlet": _cmd_solve_dirichlet,
    "solve-neumann": _cmd_solve_neumann,
    "escape": _cmd_escape,
    "mc-escape": _cmd_mc_escape,
    "simulate": _cmd_simulate,
    "crossover": _cmd_crossover,
    "verify-symbol": _cmd_verify_symbol,
    "verify-energy": _cmd_verify_energy,
}

_STOCHASTIC_COMMANDS = {"mc-escape", "simulate", "crossover", "verify-energy"}


def run(config_path, out_dir=None, seed=None, threads=None,
        walkers=None) -> int:
    """Execute the configured experiment; returns the process exit code."""
    try:
        cfg = Config.load(config_path)
        if walkers is not None:
            cfg.set("stochastic", "n_walkers", walkers)
        command = cfg.str("run", "command")
        if command not in COMMANDS:
            raise ConfigError(
                f"field [run] command: unknown command {command!r} "
                f"(choose from {COMMANDS})"
            )
        if seed is None:
            seed = cfg.int("output", "seed",
                           required=command in _STOCHASTIC_COMMANDS,
                           default=None)
        if command in _STOCHASTIC_COMMANDS and seed is None:
            raise ConfigError("field [output] seed is mandatory for "
                              f"command {command!r} (or pass --seed)")
        if threads is None:
            threads = cfg.int("output", "threads", required=False, default=1)
        if out_dir is None:
            out_dir = cfg.str("output", "dir", required=False, default="out")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    try:
        summary = _DISPATCH[command](cfg, out, seed, threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (SolverError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        write_csv(out / "diagnostics.csv", ["error"], [[str(exc)]])
        return 3

    cfg.set("output", "dir", str(out_dir))
    if seed is not None:
        cfg.set("output", "seed", seed)
    cfg.set("output", "threads", threads)
    cfg.set("manifest", "package", "fraclevy")
    cfg.set("manifest", "version", __version__)
    cfg.write(out / "manifest")

    for key, val in summary.items():
        print(f"{key}: {val}")
    print(f"outputs written to {out}")
    return 0


def _read_solution(path: Path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    data = np.array([[float(v) for v in row] for row in rows[1:]])
    if data.size == 0 or data.shape[1] < 2:
        raise ConfigError(f"{path} has no (node, value) rows")
    return data[:, 0], data[:, 1]


def compare(dir_a, dir_b, tolerance: float) -> int:
    """Node-wise comparison of two run directories' solution files."""
    try:
        xa, va = _read_solution(Path(dir_a) / "solution.csv")
        xb, vb = _read_solution(Path(dir_b) / "solution.csv")
    except (OSError, ConfigError, ValueError) as exc:
        print(f"compare error: {exc}", file=sys.stderr)
        return 2
    # match common nodes (refined grids share the coarse nodes)
    ia, ib = [], []
    jb = {round(x, 12): j for j, x in enumerate(xb)}
    for i, x in enumerate(xa):
        j = jb.get(round(x, 12))
        if j is not None:
            ia.append(i)
            ib.append(j)
    if not ia:
        print("compare error: the runs share no grid nodes", file=sys.stderr)
        return 2
    diff = float(np.abs(va[np.array(ia)] - vb[np.array(ib)]).max())
    print(f"matched nodes: {len(ia)}")
    print(f"max_difference: {diff!r}")
    print(f"tolerance: {float(tolerance)!r}")
    print(f"within_tolerance: {diff <= tolerance}")
    return 0 if diff <= tolerance else 3


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="fraclevy",
        description="nonlocal boundary-problem solvers and Levy-flight "
                    "simulators, run from config files",
    )
    sub = parser.add_subparsers(dest="mode", required=True)

    p_run = sub.add_parser("run", help="execute a configured experiment")
    p_run.add_argument("--config", required=True, help="INI config file")
    p_run.add_argument("--seed", type=int, default=None,
                       help="random seed (mandatory for stochastic commands)")
    p_run.add_argument("--threads", type=int, default=None,
                       help="worker cap for data-parallel simulators")
    p_run.add_argument("--out", default=None, help="output directory")
    p_run.add_argument("--walkers", type=int, default=None,
                       help="override the configured walker count")

    p_cmp = sub.add_parser("compare", help="compare two run directories")
    p_cmp.add_argument("run_a")
    p_cmp.add_argument("run_b")
    p_cmp.add_argument("--tolerance", type=float, required=True)

    args = parser.parse_args(argv)
    if args.mode == "run":
        return run(args.config, args.out, args.seed, args.threads,
                   args.walkers)
    return compare(args.run_a, args.run_b, args.tolerance)


if __name__ == "__main__":
    sys.exit(main())
