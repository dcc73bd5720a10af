"""Command-line surface: parsing, config merging, outputs, manifests, plots."""

import os

import numpy as np
import pytest

from artifact import dist_core
from artifact.cli import dispatch, load_distribution, render_plot, write_distribution_csv
from artifact.dist_core import FiniteDistribution
from artifact.grover_model import count_extrema
from artifact.problems import cvrp_cardinality, generate_prices_csv


def read_manifest(path):
    out = {}
    for line in open(path, encoding="utf-8"):
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def read_bytes(path):
    with open(path, "rb") as fh:
        return fh.read()


# =============================================================================
# Generation commands
# =============================================================================


def test_gen_cvrp_writes_one_entry_per_solution(tmp_path):
    out = tmp_path / "cvrp"
    assert dispatch(["gen-cvrp", "--l", "3", "--seed", "1", "--out", str(out)]) == 0
    lines = (out / "distribution.csv").read_text().splitlines()
    assert lines[0] == "quality"
    assert len(lines) - 1 == cvrp_cardinality(3) == 13
    manifest = read_manifest(out / "manifest.txt")
    assert manifest["command"] == "gen-cvrp"
    assert manifest["seed"] == "1"
    assert manifest["l"] == "3"
    assert (out / "instance.txt").exists()


def test_distribution_csv_round_trip(tmp_path):
    dist = FiniteDistribution([-1.5, 0.25, 3.0], [2, 1, 4])
    path = tmp_path / "d.csv"
    with open(path, "w") as fh:
        write_distribution_csv(dist, fh)
    back = load_distribution(str(path))
    assert back.values == dist.values
    assert back.counts == dist.counts


def test_gen_cvrp_binary_form_matches_csv(tmp_path):
    out = tmp_path / "cvrp"
    assert dispatch(["gen-cvrp", "--l", "3", "--seed", "1", "--binary",
                     "--out", str(out)]) == 0
    from_csv = load_distribution(str(out / "distribution.csv"))
    from_bin = dist_core.load(str(out / "distribution.dist"))
    assert from_csv.values == from_bin.values
    assert from_csv.counts == from_bin.counts


def test_gen_portfolio_matches_price_ingestion(tmp_path):
    gen_out = tmp_path / "gen"
    ing_out = tmp_path / "ing"
    assert dispatch(["gen-portfolio", "--n", "6", "--net-position", "2", "--days", "60",
                     "--seed", "9", "--out", str(gen_out)]) == 0
    prices = tmp_path / "prices.csv"
    prices.write_text(generate_prices_csv(6, 60, 9))
    assert dispatch(["ingest-prices", "--input", str(prices), "--net-position", "2",
                     "--out", str(ing_out)]) == 0
    assert read_bytes(gen_out / "distribution.csv") == read_bytes(ing_out / "distribution.csv")


def test_dist_stats_reports_counts_and_ratio(tmp_path, capsys):
    src = tmp_path / "d.csv"
    src.write_text("quality\n1\n1\n2\n5\n")
    assert dispatch(["dist-stats", "--input", str(src), "--cutoff", "2",
                     "--out", str(tmp_path / "st")]) == 0
    stats = read_manifest(tmp_path / "st" / "stats.txt")
    assert stats["solutions"] == "4"
    assert stats["distinct"] == "3"
    assert float(stats["ratio-below"]) == 0.5
    assert "solutions = 4" in capsys.readouterr().out


# =============================================================================
# Analytic curves
# =============================================================================


def test_response_curve_resolves_all_extrema(tmp_path):
    out = tmp_path / "resp"
    assert dispatch(["response-curve", "--normal", "--r", "128", "--out", str(out)]) == 0
    rows = (out / "response.csv").read_text().splitlines()
    assert rows[0] == "threshold,rho,probability,regime"
    probabilities = [float(line.split(",")[2]) for line in rows[1:]]
    assert count_extrema(probabilities) == (64, 64)


def test_expectation_curve_grid(tmp_path):
    out = tmp_path / "exp"
    assert dispatch(["expectation-curve", "--normal", "--r", "8", "--points", "41",
                     "--lo", "-4", "--hi", "0", "--out", str(out)]) == 0
    rows = (out / "expectation.csv").read_text().splitlines()
    assert rows[0] == "threshold,expected_quality,tuned_envelope"
    assert len(rows) == 42
    first = rows[1].split(",")
    assert float(first[0]) == -4.0


# =============================================================================
# Experiment commands
# =============================================================================


def test_run_is_deterministic(tmp_path):
    args = ["run", "--algo", "classical", "--normal", "--mu", "1e-6",
            "--runs", "100", "--seed", "7"]
    assert dispatch(args + ["--out", str(tmp_path / "a")]) == 0
    assert dispatch(args + ["--out", str(tmp_path / "b")]) == 0
    assert read_bytes(tmp_path / "a" / "curve.csv") == read_bytes(tmp_path / "b" / "curve.csv")
    assert (tmp_path / "a" / "spec.txt").exists()


def test_manifest_replay_reproduces_outputs(tmp_path):
    assert dispatch(["run", "--algo", "rgas", "--input", _small_dist(tmp_path),
                     "--target-best", "--r-cap", "3", "--runs", "150", "--seed", "5",
                     "--out", str(tmp_path / "a")]) == 0
    assert dispatch(["run", "--config", str(tmp_path / "a" / "manifest.txt"),
                     "--out", str(tmp_path / "b")]) == 0
    assert read_bytes(tmp_path / "a" / "curve.csv") == read_bytes(tmp_path / "b" / "curve.csv")
    assert read_manifest(tmp_path / "a" / "manifest.txt")["r-cap"] == "3"


def _small_dist(tmp_path):
    path = tmp_path / "small.csv"
    if not path.exists():
        path.write_text("quality\n" + "\n".join(str(v) for v in range(40)) + "\n")
    return str(path)


def test_cli_overrides_config_file(tmp_path):
    cfg = tmp_path / "opts.cfg"
    cfg.write_text("normal = true\nmu = 0.01\nruns = 80\nseed = 1\n")
    out_file = tmp_path / "file"
    out_cli = tmp_path / "cli"
    assert dispatch(["run", "--algo", "classical", "--config", str(cfg),
                     "--out", str(out_file)]) == 0
    assert dispatch(["run", "--algo", "classical", "--config", str(cfg), "--seed", "2",
                     "--out", str(out_cli)]) == 0
    assert read_manifest(out_file / "manifest.txt")["seed"] == "1"
    assert read_manifest(out_cli / "manifest.txt")["seed"] == "2"
    assert read_bytes(out_file / "curve.csv") != read_bytes(out_cli / "curve.csv")


def test_missing_seed_draws_from_entropy(tmp_path):
    assert dispatch(["run", "--algo", "classical", "--normal", "--mu", "0.05",
                     "--runs", "20", "--out", str(tmp_path / "a")]) == 0
    assert dispatch(["run", "--algo", "classical", "--normal", "--mu", "0.05",
                     "--runs", "20", "--out", str(tmp_path / "b")]) == 0
    seed_a = int(read_manifest(tmp_path / "a" / "manifest.txt")["seed"])
    seed_b = int(read_manifest(tmp_path / "b" / "manifest.txt")["seed"])
    assert seed_a != seed_b


def test_run_worker_count_does_not_change_outputs(tmp_path):
    base = ["run", "--algo", "gas", "--input", _small_dist(tmp_path), "--target-best",
            "--runs", "120", "--seed", "11", "--effort-cap", "5000"]
    assert dispatch(base + ["--workers", "1", "--out", str(tmp_path / "w1")]) == 0
    assert dispatch(base + ["--workers", "4", "--out", str(tmp_path / "w4")]) == 0
    assert read_bytes(tmp_path / "w1" / "curve.csv") == read_bytes(tmp_path / "w4" / "curve.csv")


def test_run_two_phase_and_sampling_modes(tmp_path):
    base = ["--input", _small_dist(tmp_path), "--target-best", "--runs", "30",
            "--seed", "2", "--r-final", "4", "--effort-cap", "20000"]
    assert dispatch(["run", "--algo", "maoa"] + base + ["--out", str(tmp_path / "full")]) == 0
    assert dispatch(["run", "--algo", "maoa", "--sampling-only"] + base
                    + ["--out", str(tmp_path / "samp")]) == 0
    full = read_manifest(tmp_path / "full" / "spec.txt")
    samp = read_manifest(tmp_path / "samp" / "spec.txt")
    assert full["algorithm"] == "maoa"
    assert samp["algorithm"] == "maoa-sampling"


def test_sweep_emits_series_and_summary(tmp_path):
    out = tmp_path / "sw"
    assert dispatch(["sweep", "--algos", "classical,rgas", "--r-values", "2,4",
                     "--input", _small_dist(tmp_path), "--target-best",
                     "--runs", "150", "--seed", "3", "--out", str(out)]) == 0
    names = sorted(os.listdir(out))
    assert "classical.csv" in names
    assert "rgas_r2.csv" in names and "rgas_r4.csv" in names
    rows = (out / "summary.csv").read_text().splitlines()
    assert rows[0] == "series,success_at_cap,effort_at_half"
    assert len(rows) == 4
    efforts = {line.split(",")[0]: float(line.split(",")[2]) for line in rows[1:]}
    assert efforts["rgas_r4"] < efforts["classical"]


def test_verify_reduced_outputs_partition_table(tmp_path):
    out = tmp_path / "vr"
    assert dispatch(["verify-reduced", "--p-values", "2,3", "--r-values", "0,1",
                     "--starts", "40", "--repeats", "1", "--seed", "0",
                     "--out", str(out)]) == 0
    rows = (out / "partition.csv").read_text().splitlines()
    assert rows[0] == "p,r,optimised_probability,amplification,low_convergence_bound"
    assert len(rows) == 5
    zero_rows = [line for line in rows[1:] if line.split(",")[1] == "0"]
    assert all(float(line.split(",")[3]) == 1.0 for line in zero_rows)


def test_appendix_suite_writes_tables_and_grids(tmp_path):
    out = tmp_path / "suite"
    assert dispatch(["appendix-suite", "--cells", "grid,repeated_pair", "--grid-points", "9",
                     "--starts", "25", "--refine-top", "2", "--distributions", "1",
                     "--seed", "0", "--out", str(out)]) == 0
    rows = (out / "suite.csv").read_text().splitlines()
    assert rows[0] == "cell,label,degeneracy,r,mode,best,mean,deviation,budget_exhausted"
    assert all(line.startswith("repeated_pair,") for line in rows[1:])
    table = np.genfromtxt(str(out / "landscape_D23E2-binary.csv"), delimiter=",",
                          skip_header=1)
    assert table.shape == (9, 10)


# =============================================================================
# Exit codes and option plumbing
# =============================================================================


def test_usage_errors_exit_two(capsys, tmp_path):
    assert dispatch([]) == 2
    assert dispatch(["run", "--algo", "sideways"]) == 2
    assert dispatch(["run", "--no-such-flag"]) == 2
    capsys.readouterr()


def test_validation_errors_exit_three(tmp_path, capsys):
    out = str(tmp_path / "x")
    assert dispatch(["run", "--algo", "classical", "--normal", "--runs", "5",
                     "--seed", "1", "--out", out]) == 3
    assert dispatch(["run", "--algo", "classical", "--normal", "--input", "d.csv",
                     "--mu", "0.1", "--seed", "1", "--out", out]) == 3
    assert dispatch(["dist-stats", "--input", str(tmp_path / "missing.csv"),
                     "--out", out]) == 3
    assert dispatch(["run", "--algo", "gas", "--normal", "--mu", "1e-3",
                     "--runs", "5", "--seed", "1", "--out", out]) == 3
    capsys.readouterr()


def test_failed_command_writes_no_manifest(tmp_path, capsys):
    out = tmp_path / "failed"
    assert dispatch(["run", "--algo", "classical", "--normal", "--runs", "5",
                     "--seed", "1", "--out", str(out)]) == 3
    assert not (out / "manifest.txt").exists()
    capsys.readouterr()


def test_malformed_config_rejected(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("mu 0.1\n")
    assert dispatch(["run", "--algo", "classical", "--config", str(bad),
                     "--out", str(tmp_path / "o")]) == 3
    unknown = tmp_path / "unknown.cfg"
    unknown.write_text("flux-capacitance = 1.21\n")
    assert dispatch(["run", "--algo", "classical", "--config", str(unknown),
                     "--out", str(tmp_path / "o")]) == 3
    capsys.readouterr()


def test_manifest_from_other_command_rejected(tmp_path, capsys):
    out = tmp_path / "st"
    src = tmp_path / "d.csv"
    src.write_text("quality\n1\n2\n")
    assert dispatch(["dist-stats", "--input", str(src), "--out", str(out)]) == 0
    assert dispatch(["run", "--config", str(out / "manifest.txt"),
                     "--out", str(tmp_path / "o")]) == 3
    capsys.readouterr()


# =============================================================================
# Plots
# =============================================================================


def test_plot_success_curve_draws_measured_and_analytic(tmp_path):
    assert dispatch(["run", "--algo", "classical", "--normal", "--mu", "0.02",
                     "--runs", "60", "--seed", "4", "--out", str(tmp_path)]) == 0
    svg = tmp_path / "curve.svg"
    series = render_plot(str(tmp_path / "curve.csv"), str(svg), log_x=True)
    assert series == 2
    head = svg.read_text()[:400]
    assert "<svg" in head or "<?xml" in head


def test_plot_single_series_polyline(tmp_path):
    src = tmp_path / "xy.csv"
    src.write_text("x,y\n1,2\n2,4\n3,8\n")
    svg = tmp_path / "xy.svg"
    assert render_plot(str(src), str(svg)) == 1
    assert svg.exists()


def test_plot_empty_csv_rejected(tmp_path, capsys):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    assert dispatch(["plot", "--input", str(empty), "--out", str(tmp_path),
                     "--output", "e.svg"]) == 3
    header_only = tmp_path / "h.csv"
    header_only.write_text("x,y\n")
    assert dispatch(["plot", "--input", str(header_only), "--out", str(tmp_path),
                     "--output", "h.svg"]) == 3
    capsys.readouterr()


def test_plot_landscape_heatmap(tmp_path):
    out = tmp_path / "suite"
    assert dispatch(["appendix-suite", "--cells", "grid", "--grid-points", "7",
                     "--seed", "0", "--out", str(out)]) == 0
    svg = tmp_path / "land.svg"
    series = render_plot(str(out / "landscape_D23E2-binary.csv"), str(svg))
    assert series == 1
    assert svg.exists()
