"""Command-line surface: generation, statistics, simulation, suites, plots.

Every flag has a config-file equivalent (flat ``key = value`` text); values
given on the command line override the file, which overrides built-in
defaults. Each command writes its outputs plus a ``manifest.txt`` under the
--out directory. The manifest records the fully resolved configuration in
the same key-value format, so re-running a command with ``--config
manifest.txt`` reproduces the outputs byte for byte.

Exit codes: 0 success, 2 usage error, 3 validation or input-format error.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import random
import subprocess
import sys
from dataclasses import dataclass
from importlib import metadata
from typing import Callable, Dict, IO, List, Optional, Sequence, Tuple

from . import dist_core
from .algorithms import DEFAULT_EFFORT_CAP, GasConfig, MaoaConfig, gas_rotation_cap
from .dist_core import (
    DistributionError,
    FiniteDistribution,
    NormalDistribution,
    ValidationError,
)
from .grover_model import (
    count_extrema,
    expectation_response,
    export_response_csv,
    threshold_grid,
    threshold_response_curve,
)
from .harness import (
    ExperimentSpec,
    TargetSpec,
    analytic_classical,
    analytic_maoa,
    run_experiment,
    target_probability,
    write_curve_csv,
    write_spec_text,
)
from .problems import (
    generate_cvrp,
    cvrp_enumerate,
    generate_portfolio,
    ingest_prices,
    portfolio_enumerate,
    save_cvrp,
)
from .qwoa_lab import SuiteConfig, export_landscape_csv, export_suite_csv, run_appendix_suite
from .reduced_graph import export_partition_csv, partition_experiment

MANIFEST_NAME = "manifest.txt"
_RESERVED_KEYS = ("command", "version")


# =============================================================================
# Option plumbing
# =============================================================================


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise ValidationError(f"expected a boolean, got {text!r}")


def _parse_int_list(text: str) -> Tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise ValidationError(f"expected comma-separated integers: {exc}")


@dataclass(frozen=True)
class Option:
    name: str  # flag name with hyphens
    kind: Callable  # str -> value
    default: object
    help: str
    choices: Optional[Tuple[str, ...]] = None

    @property
    def dest(self) -> str:
        return self.name.replace("-", "_")


def _common(out_default: str = ".") -> List[Option]:
    return [
        Option("out", str, out_default, "output directory"),
        Option("seed", int, None, "master seed; omitted draws one from entropy"),
    ]


def _source_options() -> List[Option]:
    return [
        Option("input", str, None, "distribution file (csv or binary)"),
        Option("normal", _parse_bool, False, "use the analytic standard normal"),
    ]


def _target_options() -> List[Option]:
    return [
        Option("mu", float, None, "marked fraction of the solution space"),
        Option("cutoff", float, None, "mark qualities strictly below this value"),
        Option("target-best", _parse_bool, False, "mark exactly the minimal-quality solutions"),
    ]


def _run_options() -> List[Option]:
    return (
        _source_options()
        + _target_options()
        + [
            Option("runs", int, 10_000, "independent runs"),
            Option("effort-cap", int, DEFAULT_EFFORT_CAP, "per-run effort budget"),
            Option("workers", int, 1, "worker processes"),
            Option("simulate", str, "auto", "simulation route", ("auto", "loop", "geometric")),
            Option("r-final", int, 64, "final rotation count of the two-phase algorithm"),
            Option("initial-sample", int, 200, "threshold-phase initial sample size"),
            Option("sampling-only", _parse_bool, False,
                   "skip threshold navigation; sample the amplified state directly"),
            Option("threshold", float, None, "explicit sampling threshold"),
            Option("r-cap", int, None, "rotation cap of the restricted search"),
            Option("growth", float, 1.34, "rotation-cap growth factor"),
            Option("analytic", str, "auto", "analytic overlay column",
                   ("auto", "none", "classical", "amplified")),
        ]
        + _common()
    )


_OPTIONS: Dict[str, List[Option]] = {
    "gen-cvrp": [
        Option("l", int, 3, "location count"),
        Option("capacity", int, 20, "vehicle capacity"),
        Option("binary", _parse_bool, False, "also write the run-length binary form"),
    ] + _common(),
    "gen-portfolio": [
        Option("n", int, 12, "asset count"),
        Option("net-position", int, 3, "required long minus short positions"),
        Option("days", int, 500, "synthetic price history length"),
        Option("fraction", float, 0.10, "return fraction defining the conditional slice"),
        Option("binary", _parse_bool, False, "also write the run-length binary form"),
    ] + _common(),
    "ingest-prices": [
        Option("input", str, None, "price table csv"),
        Option("net-position", int, 0, "required long minus short positions"),
        Option("fraction", float, 0.10, "return fraction defining the conditional slice"),
        Option("binary", _parse_bool, False, "also write the run-length binary form"),
    ] + _common(),
    "dist-stats": _source_options() + _target_options() + _common(),
    "response-curve": _source_options() + [
        Option("r", int, 128, "rotation count"),
        Option("lo", float, -8.0, "threshold grid lower bound"),
        Option("hi", float, 0.0, "threshold grid upper bound"),
    ] + _common(),
    "expectation-curve": _source_options() + [
        Option("r", int, 128, "rotation count"),
        Option("lo", float, -8.0, "threshold grid lower bound"),
        Option("hi", float, 0.0, "threshold grid upper bound"),
        Option("points", int, 2001, "grid points"),
    ] + _common(),
    "run": [Option("algo", str, None, "algorithm", ("classical", "maoa", "gas", "rgas"))]
    + _run_options(),
    "sweep": [
        Option("algos", str, "classical,rgas,maoa", "comma-separated algorithms"),
        Option("r-values", _parse_int_list, (64,), "rotation counts to sweep"),
    ] + _run_options(),
    "verify-reduced": [
        Option("p-values", _parse_int_list, (2, 3, 5, 10), "partition counts"),
        Option("r-values", _parse_int_list, tuple(range(0, 11)), "iteration counts"),
        Option("n-total", int, 10**8, "modelled solution-space size"),
        Option("marked", int, 10, "marked-group size"),
        Option("starts", int, None, "random starts per optimisation"),
        Option("repeats", int, None, "independent optimisation repeats"),
        Option("full-budget", _parse_bool, False, "restore the full optimisation budget"),
        Option("workers", int, 1, "worker processes"),
    ] + _common(),
    "appendix-suite": [
        Option("cells", str, None, "comma-separated suite cells; omitted runs all"),
        Option("r", int, 3, "iteration count"),
        Option("starts", int, None, "random starts per optimisation"),
        Option("refine-top", int, 10, "starts continued into the simplex refiner"),
        Option("distributions", int, None, "quality assignments per graph"),
        Option("landscape-restarts", int, None, "refined restarts in the landscape study"),
        Option("grid-points", int, 65, "landscape grid resolution"),
        Option("full-budget", _parse_bool, False, "restore the full study budget"),
        Option("workers", int, 1, "worker processes"),
    ] + _common(),
    "plot": [
        Option("input", str, None, "csv file to render"),
        Option("output", str, "plot.svg", "vector graphic file name"),
        Option("kind", str, "auto", "chart family", ("auto", "series", "curve", "landscape")),
        Option("log-x", _parse_bool, False, "logarithmic x axis"),
        Option("log-y", _parse_bool, False, "logarithmic y axis"),
        Option("title", str, None, "chart title"),
    ] + _common(),
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="artifact", description="amplified-search simulation suite"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for command, options in _OPTIONS.items():
        p = sub.add_parser(command, argument_default=argparse.SUPPRESS)
        p.add_argument("--config", help="flat key = value option file")
        for opt in options:
            flag = f"--{opt.name}"
            if opt.kind is _parse_bool:
                p.add_argument(flag, nargs="?", const=True, type=_parse_bool,
                               choices=None, help=opt.help)
            elif opt.choices is not None:
                p.add_argument(flag, type=opt.kind, choices=opt.choices, help=opt.help)
            else:
                p.add_argument(flag, type=opt.kind, help=opt.help)
    return parser


def _load_config_file(path: str, command: str) -> Dict[str, object]:
    table = {opt.name: opt for opt in _OPTIONS[command]}
    values: Dict[str, object] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValidationError(f"{path}:{lineno}: expected key = value")
            key, value = key.strip(), value.strip()
            if key in _RESERVED_KEYS:
                if key == "command" and value != command:
                    raise ValidationError(
                        f"{path} was written by {value!r}, not {command!r}"
                    )
                continue
            if key not in table:
                raise ValidationError(f"{path}:{lineno}: unknown option {key!r}")
            if value == "none":
                values[table[key].dest] = None
            else:
                values[table[key].dest] = table[key].kind(value)
    return values


def _merge_options(command: str, namespace: argparse.Namespace) -> Dict[str, object]:
    merged = {opt.dest: opt.default for opt in _OPTIONS[command]}
    config_path = getattr(namespace, "config", None)
    if config_path is not None:
        merged.update(_load_config_file(config_path, command))
    cli_given = {k: v for k, v in vars(namespace).items() if k not in ("command", "config")}
    merged.update(cli_given)
    if merged.get("seed") is None and "seed" in merged:
        merged["seed"] = random.SystemRandom().randrange(2**63)
    return merged


def _format_value(value: object) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _version() -> str:
    try:
        base = metadata.version("artifact")
    except Exception:
        base = "0"
    try:
        described = subprocess.run(
            ["git", "describe", "--always"],
            cwd=os.path.dirname(os.path.abspath(__file__)),
            capture_output=True, text=True, timeout=5,
        )
        if described.returncode == 0 and described.stdout.strip():
            return f"artifact-{base}+g{described.stdout.strip()}"
    except Exception:
        pass
    return f"artifact-{base}"


def _out_path(opts: Dict[str, object], name: str) -> str:
    out_dir = str(opts["out"])
    os.makedirs(out_dir, exist_ok=True)
    return os.path.join(out_dir, name)


def _write_manifest(command: str, opts: Dict[str, object]) -> None:
    lines = [f"command = {command}", f"version = {_version()}"]
    for key in sorted(opts):
        if key == "out":
            continue  # the manifest lives inside it; replay picks its own
        lines.append(f"{key.replace('_', '-')} = {_format_value(opts[key])}")
    with open(_out_path(opts, MANIFEST_NAME), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


# =============================================================================
# Distribution files
# =============================================================================


def write_distribution_csv(dist: FiniteDistribution, fh: IO[str]) -> None:
    """One row per solution, ascending; exact round trip through text."""
    fh.write("quality\n")
    for value, count in zip(dist.values, dist.counts):
        row = f"{value:.17g}\n" * count
        fh.write(row)


def load_distribution(path: str) -> FiniteDistribution:
    with open(path, "rb") as probe:
        head = probe.read(8)
    if head == dist_core.MAGIC:
        return dist_core.load(path)
    values: List[float] = []
    with open(path, "r", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValidationError(f"{path}: empty distribution file")
        if header != ["quality"]:
            raise ValidationError(f"{path}: expected a single quality column")
        for row in reader:
            if row:
                values.append(float(row[0]))
    if not values:
        raise ValidationError(f"{path}: no solutions listed")
    ordered = sorted(values)
    runs: List[Tuple[float, int]] = []
    for v in ordered:
        if runs and runs[-1][0] == v:
            runs[-1] = (v, runs[-1][1] + 1)
        else:
            runs.append((v, 1))
    return FiniteDistribution([v for v, _ in runs], [c for _, c in runs])


def _emit_distribution(dist: FiniteDistribution, opts: Dict[str, object]) -> str:
    path = _out_path(opts, "distribution.csv")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        write_distribution_csv(dist, fh)
    if opts.get("binary"):
        dist_core.save(dist, _out_path(opts, "distribution.dist"))
    return path


def _resolve_source(opts: Dict[str, object]):
    if opts.get("normal") and opts.get("input"):
        raise ValidationError("give either --normal or --input, not both")
    if opts.get("normal"):
        return NormalDistribution()
    if opts.get("input"):
        return load_distribution(str(opts["input"]))
    raise ValidationError("no quality distribution: pass --normal or --input")


def _resolve_target(opts: Dict[str, object], dist) -> TargetSpec:
    picked = [k for k in ("mu", "cutoff", "target_best") if opts.get(k)]
    if len(picked) != 1:
        raise ValidationError("pick exactly one of --mu, --cutoff, --target-best")
    if picked[0] == "mu":
        return TargetSpec(ratio=float(opts["mu"]))
    if picked[0] == "cutoff":
        return TargetSpec(cutoff=float(opts["cutoff"]))
    if isinstance(dist, NormalDistribution):
        raise ValidationError("--target-best needs a finite solution space")
    best_count = dist.counts[0]
    return TargetSpec(ratio=best_count / dist.n_total)


# =============================================================================
# Commands
# =============================================================================


def _cmd_gen_cvrp(opts: Dict[str, object]) -> int:
    instance = generate_cvrp(int(opts["l"]), int(opts["seed"]), int(opts["capacity"]))
    dist = cvrp_enumerate(instance)
    path = _emit_distribution(dist, opts)
    save_cvrp(instance, _out_path(opts, "instance.txt"))
    print(f"{path}: {dist.n_total} solutions, best {dist.min_quality():g}")
    return 0


def _cmd_gen_portfolio(opts: Dict[str, object]) -> int:
    instance = generate_portfolio(
        int(opts["n"]), int(opts["net_position"]), int(opts["seed"]), int(opts["days"])
    )
    table = portfolio_enumerate(instance)
    dist = table.conditional_distribution(float(opts["fraction"]))
    path = _emit_distribution(dist, opts)
    print(f"{path}: {dist.n_total} conditioned solutions, best {dist.min_quality():g}")
    return 0


def _cmd_ingest_prices(opts: Dict[str, object]) -> int:
    if not opts.get("input"):
        raise ValidationError("ingest needs --input prices csv")
    instance = ingest_prices(str(opts["input"]), int(opts["net_position"]))
    table = portfolio_enumerate(instance)
    dist = table.conditional_distribution(float(opts["fraction"]))
    path = _emit_distribution(dist, opts)
    print(f"{path}: {dist.n_total} conditioned solutions, best {dist.min_quality():g}")
    return 0


def _cmd_dist_stats(opts: Dict[str, object]) -> int:
    dist = _resolve_source(opts)
    lines = []
    if isinstance(dist, NormalDistribution):
        lines.append("family = analytic-normal")
    else:
        lines.append("family = finite")
        lines.append(f"solutions = {dist.n_total}")
        lines.append(f"distinct = {len(dist.values)}")
        lines.append(f"best = {dist.min_quality():.17g}")
        lines.append(f"worst = {dist.max_quality():.17g}")
    if opts.get("cutoff") is not None:
        cutoff = float(opts["cutoff"])
        lines.append(f"ratio-below = {dist.ratio_below(cutoff):.17g}")
    if opts.get("mu") is not None:
        mu = float(opts["mu"])
        lines.append(f"quantile = {dist.quantile(mu):.17g}")
    text = "\n".join(lines) + "\n"
    with open(_out_path(opts, "stats.txt"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    print(text, end="")
    return 0


def _cmd_response_curve(opts: Dict[str, object]) -> int:
    dist = _resolve_source(opts)
    r = int(opts["r"])
    grid = threshold_grid(r, float(opts["lo"]), float(opts["hi"]))
    path = _out_path(opts, "response.csv")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        export_response_csv(dist, r, grid, fh)
    curve = threshold_response_curve(dist, r, grid)
    peaks, troughs = count_extrema([p for _, p in curve])
    print(f"{path}: {len(grid)} thresholds, {peaks} peaks, {troughs} troughs")
    return 0


def _cmd_expectation_curve(opts: Dict[str, object]) -> int:
    dist = _resolve_source(opts)
    r = int(opts["r"])
    lo, hi, points = float(opts["lo"]), float(opts["hi"]), int(opts["points"])
    if points < 2 or hi <= lo:
        raise ValidationError("need at least two grid points with lo < hi")
    path = _out_path(opts, "expectation.csv")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("threshold,expected_quality,tuned_envelope\n")
        for i in range(points):
            t = lo + (hi - lo) * i / (points - 1)
            exact, envelope = expectation_response(dist, r, t)
            fh.write(f"{t:.17g},{exact:.17g},{envelope:.17g}\n")
    print(f"{path}: {points} thresholds")
    return 0


def _experiment_spec(opts: Dict[str, object], algo: str, r: int) -> ExperimentSpec:
    dist = _resolve_source(opts)
    target = _resolve_target(opts, dist)
    config = None
    threshold = opts.get("threshold")
    algorithm = algo
    if algo == "maoa":
        algorithm = "maoa-sampling" if opts.get("sampling_only") else "maoa"
        config = MaoaConfig(r_f=r, initial_sample=int(opts["initial_sample"]))
    elif algo == "gas":
        if isinstance(dist, NormalDistribution):
            raise ValidationError("the unrestricted search needs a finite solution space")
        config = GasConfig(r_max=gas_rotation_cap(dist.n_total), growth=float(opts["growth"]))
    elif algo == "rgas":
        cap = opts.get("r_cap")
        config = GasConfig(r_max=int(cap) if cap is not None else r, growth=float(opts["growth"]))
    return ExperimentSpec(
        dist=dist,
        algorithm=algorithm,
        target=target,
        run_count=int(opts["runs"]),
        master_seed=int(opts["seed"]),
        workers=int(opts["workers"]),
        effort_cap=int(opts["effort_cap"]),
        config=config,
        threshold=None if threshold is None else float(threshold),
        simulate=str(opts["simulate"]),
    )


def _analytic_overlay(opts: Dict[str, object], spec: ExperimentSpec):
    choice = str(opts.get("analytic", "auto"))
    if choice == "auto":
        if spec.algorithm == "classical":
            choice = "classical"
        elif spec.algorithm == "maoa-sampling":
            choice = "amplified"
        else:
            choice = "none"
    if choice == "none":
        return None
    mu = target_probability(spec.dist, spec.target)
    if choice == "classical":
        return lambda effort: analytic_classical(effort, mu)
    r = spec.config.r_f if isinstance(spec.config, MaoaConfig) else 0
    return lambda effort: analytic_maoa(effort, mu, r)


def _cmd_run(opts: Dict[str, object]) -> int:
    algo = opts.get("algo")
    if not algo:
        raise ValidationError("run needs --algo")
    spec = _experiment_spec(opts, str(algo), int(opts["r_final"]))
    curve = run_experiment(spec)
    path = _out_path(opts, "curve.csv")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        write_curve_csv(curve, fh, analytic=_analytic_overlay(opts, spec))
    with open(_out_path(opts, "spec.txt"), "w", encoding="utf-8", newline="\n") as fh:
        write_spec_text(spec, fh)
    final = curve.fraction[-1] if len(curve.fraction) else 0.0
    print(f"{path}: {spec.run_count} runs, success at cap {final:.4f}")
    return 0


def _cmd_sweep(opts: Dict[str, object]) -> int:
    algos = [a.strip() for a in str(opts["algos"]).split(",") if a.strip()]
    known = ("classical", "maoa", "gas", "rgas")
    bad = [a for a in algos if a not in known]
    if bad:
        raise ValidationError(f"unknown algorithms in sweep: {bad}")
    r_values = opts["r_values"]
    if isinstance(r_values, str):
        r_values = _parse_int_list(r_values)
    summary_rows = []
    for algo in algos:
        sweep_rs: Sequence[int] = r_values if algo in ("maoa", "rgas") else (0,)
        for r in sweep_rs:
            spec = _experiment_spec(opts, algo, int(r))
            curve = run_experiment(spec)
            stem = spec.algorithm if algo not in ("maoa", "rgas") else f"{spec.algorithm}_r{r}"
            with open(_out_path(opts, f"{stem}.csv"), "w", encoding="utf-8", newline="\n") as fh:
                write_curve_csv(curve, fh, analytic=_analytic_overlay(opts, spec))
            final = curve.fraction[-1] if len(curve.fraction) else 0.0
            half = curve.effort_at(0.5) if final >= 0.5 else math.nan
            summary_rows.append((stem, final, half))
    with open(_out_path(opts, "summary.csv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("series,success_at_cap,effort_at_half\n")
        for stem, final, half in summary_rows:
            fh.write(f"{stem},{final:.17g},{half:.17g}\n")
    print(f"sweep: {len(summary_rows)} series")
    return 0


def _cmd_verify_reduced(opts: Dict[str, object]) -> int:
    points = []
    for p in opts["p_values"]:
        points.extend(
            partition_experiment(
                int(p),
                r_values=[int(r) for r in opts["r_values"]],
                n_total=int(opts["n_total"]),
                marked=int(opts["marked"]),
                seed=int(opts["seed"]),
                starts=opts.get("starts"),
                repeats=opts.get("repeats"),
                full_budget=bool(opts.get("full_budget")),
                workers=int(opts["workers"]),
            )
        )
    path = _out_path(opts, "partition.csv")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        export_partition_csv(points, fh)
    print(f"{path}: {len(points)} optimised points")
    return 0


def _cmd_appendix_suite(opts: Dict[str, object]) -> int:
    cells = opts.get("cells")
    config = SuiteConfig(
        seed=int(opts["seed"]),
        r=int(opts["r"]),
        full_budget=bool(opts.get("full_budget")),
        distributions_per_graph=opts.get("distributions"),
        starts=opts.get("starts"),
        refine_top=int(opts["refine_top"]),
        landscape_restarts=opts.get("landscape_restarts"),
        cells=tuple(c.strip() for c in str(cells).split(",") if c.strip()) if cells else None,
        grid_points=int(opts["grid_points"]),
        workers=int(opts["workers"]),
    )
    result = run_appendix_suite(config)
    path = _out_path(opts, "suite.csv")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        export_suite_csv(result, fh)
    for name, grid in sorted(result.grids.items()):
        with open(_out_path(opts, f"landscape_{name}.csv"), "w", encoding="utf-8",
                  newline="\n") as fh:
            export_landscape_csv(grid, fh)
    print(f"{path}: {len(result.rows)} rows, {len(result.grids)} landscape grids")
    return 0


# =============================================================================
# Plotting
# =============================================================================


def _read_csv_columns(path: str) -> Dict[str, List[float]]:
    """Numeric columns only; text columns (for example regime labels) drop out."""
    with open(path, "r", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise ValidationError(f"{path}: empty csv")
        columns: Dict[str, List[float]] = {name: [] for name in header}
        textual = set()
        for row in reader:
            for name, cell in zip(header, row):
                try:
                    columns[name].append(float(cell))
                except ValueError:
                    textual.add(name)
    for name in textual:
        del columns[name]
    if not columns or not any(columns.values()):
        raise ValidationError(f"{path}: csv has no numeric rows")
    return columns


def _sniff_kind(path: str, header: Sequence[str]) -> str:
    if header[:2] == ["effort", "empirical_p"]:
        return "curve"
    if header and header[0] == "gamma_by_t":
        return "landscape"
    return "series"


def render_plot(
    input_path: str,
    output_path: str,
    kind: str = "auto",
    log_x: bool = False,
    log_y: bool = False,
    title: Optional[str] = None,
) -> int:
    """Render a csv to a self-contained vector file; returns series drawn."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with open(input_path, "r", encoding="utf-8") as fh:
        header_line = fh.readline().strip()
    if not header_line:
        raise ValidationError(f"{input_path}: empty csv")
    header = header_line.split(",")
    if kind == "auto":
        kind = _sniff_kind(input_path, header)

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    series = 0
    if kind == "landscape":
        import numpy as np

        table = np.genfromtxt(input_path, delimiter=",", skip_header=1)
        if table.ndim != 2 or table.shape[0] < 2:
            raise ValidationError(f"{input_path}: landscape needs a value matrix")
        gammas = table[:, 0]
        times = np.asarray([float(x) for x in header[1:]])
        mesh = ax.pcolormesh(times, gammas, table[:, 1:], shading="auto")
        fig.colorbar(mesh, ax=ax, label="probability")
        ax.set_xlabel("walk time")
        ax.set_ylabel("phase strength")
        series = 1
    else:
        columns = _read_csv_columns(input_path)
        x_name = header[0]
        if x_name not in columns:
            raise ValidationError(f"{input_path}: first column must be numeric")
        x = columns[x_name]
        if kind == "curve":
            ax.plot(x, columns["empirical_p"], label="measured", color="#1f77b4")
            series += 1
            if "wilson_lo" in columns and "wilson_hi" in columns:
                ax.fill_between(x, columns["wilson_lo"], columns["wilson_hi"],
                                alpha=0.25, color="#1f77b4", linewidth=0)
            analytic = columns.get("analytic_p")
            if analytic and not all(math.isnan(v) for v in analytic):
                ax.plot(x, analytic, label="analytic", linestyle="--", color="#d62728")
                series += 1
            ax.set_ylabel("success probability")
            ax.legend()
        else:
            for name in header[1:]:
                if name not in columns:
                    continue
                ax.plot(x, columns[name], label=name)
                series += 1
            if series > 1:
                ax.legend()
            if series == 1:
                ax.set_ylabel(header[1])
        ax.set_xlabel(x_name)
    if log_x:
        ax.set_xscale("log")
    if log_y:
        ax.set_yscale("log")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(output_path, format="svg")
    plt.close(fig)
    return series


def _cmd_plot(opts: Dict[str, object]) -> int:
    if not opts.get("input"):
        raise ValidationError("plot needs --input")
    output = _out_path(opts, str(opts["output"]))
    series = render_plot(
        str(opts["input"]),
        output,
        kind=str(opts["kind"]),
        log_x=bool(opts.get("log_x")),
        log_y=bool(opts.get("log_y")),
        title=opts.get("title"),
    )
    print(f"{output}: {series} series")
    return 0


_HANDLERS: Dict[str, Callable[[Dict[str, object]], int]] = {
    "gen-cvrp": _cmd_gen_cvrp,
    "gen-portfolio": _cmd_gen_portfolio,
    "ingest-prices": _cmd_ingest_prices,
    "dist-stats": _cmd_dist_stats,
    "response-curve": _cmd_response_curve,
    "expectation-curve": _cmd_expectation_curve,
    "run": _cmd_run,
    "sweep": _cmd_sweep,
    "verify-reduced": _cmd_verify_reduced,
    "appendix-suite": _cmd_appendix_suite,
    "plot": _cmd_plot,
}


def dispatch(argv: Sequence[str]) -> int:
    """Parse, merge options, execute; exit status instead of exceptions."""
    parser = _build_parser()
    try:
        namespace = parser.parse_args(list(argv))
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        opts = _merge_options(namespace.command, namespace)
        status = _HANDLERS[namespace.command](opts)
        if status == 0:
            _write_manifest(namespace.command, opts)
        return status
    except (DistributionError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))
