"""Command-line experiment harness.

Subcommands wire the library into reproducible experiments: ``simulate``
draws mechanism answers, ``reconstruct`` runs the inversion attack,
``sweep`` grids it over noise scales and seeds, ``account`` prints the
privacy ledger, ``detect`` scores the consensus classifier on labeled
histograms, and ``e2e`` chains everything on a synthetic population.

All reports are CSV with a leading ``# pateprobe <version>`` comment
line; given the same seed they are bit-identical across runs. Files are
written to a temporary name and renamed into place so failures never
leave partial output. Exit codes: 0 success, 2 usage error, 3 invalid
input, 4 at least one reconstruction hit the iteration cap (the report
is still written, with the offending rows flagged by stop_reason).
"""

from __future__ import annotations

import csv
import json
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import click
import numpy as np

from . import __version__
from .attribute import (
    Group,
    SynthPopulationSpec,
    classify_by_consensus,
    evaluate,
    generate_population,
)
from .core import VoteHistogram, consensus, tertile_split
from .io import read_histograms, read_labeled_histograms
from .mechanism import NoiseSpec, sample
from .outcome import IntegrationGrid
from .privacy import PrivacyParams, account, max_queries_within_budget
from .reconstruct import (
    InitMode,
    OptimizerConfig,
    StopMode,
    StopReason,
    estimate_distribution,
    reconstruct,
)

__all__ = ["main", "RunConfig"]


class InputError(click.ClickException):
    """Invalid input content (exit code 3, distinct from usage errors)."""

    exit_code = 3


@dataclass(frozen=True)
class RunConfig:
    """Resolved settings of one attack run.

    Exactly one of ``m`` and ``budget`` must be supplied; in budget mode
    the query count is whatever the accountant allows.
    """

    sigma: float
    m: int | None
    budget: float | None
    delta: float
    seed: int
    optimizer: OptimizerConfig
    grid: IntegrationGrid
    workers: int = 1

    def __post_init__(self) -> None:
        if (self.m is None) == (self.budget is None):
            raise ValueError("exactly one of m and budget must be set")

    def resolve_m(self) -> int:
        if self.m is not None:
            if self.m < 1:
                raise ValueError("query count m must be >= 1")
            return self.m
        return max_queries_within_budget(self.sigma, self.delta, self.budget)


_STOP_MODES = {
    "loss-threshold": StopMode.LOSS_THRESHOLD,
    "negative-entry": StopMode.NEGATIVE_ENTRY,
    "both": StopMode.BOTH,
}
_INIT_MODES = {"zeros": InitMode.ZEROS, "uniform-n": InitMode.UNIFORM_N}


def _apply_config_file(ctx, param, value):
    """Merge a JSON config file into the command's defaults.

    Keys are option names with underscores. Explicit flags always win
    because the file only changes defaults.
    """
    if value:
        try:
            with open(value) as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise click.UsageError(f"config file is not valid JSON: {exc}")
        if not isinstance(data, dict):
            raise click.UsageError("config file must hold a JSON object")
        ctx.default_map = {**data, **(ctx.default_map or {})}
    return value


def _common_options(fn):
    fn = click.option(
        "--outdir",
        envvar="PATEPROBE_OUTDIR",
        default=".",
        show_default=True,
        type=click.Path(file_okay=False, path_type=Path),
        help="Output directory (env: PATEPROBE_OUTDIR).",
    )(fn)
    fn = click.option(
        "--config",
        type=click.Path(exists=True, dir_okay=False),
        callback=_apply_config_file,
        is_eager=True,
        expose_value=False,
        help="JSON file of option defaults; explicit flags win.",
    )(fn)
    return fn


def _optimizer_options(fn):
    fn = click.option(
        "--stop-mode",
        type=click.Choice(sorted(_STOP_MODES)),
        default="both",
        show_default=True,
        help="Stopping rule for the descent.",
    )(fn)
    fn = click.option(
        "--loss-threshold", type=float, default=0.01, show_default=True
    )(fn)
    fn = click.option(
        "--max-iters", type=int, default=200_000, show_default=True
    )(fn)
    fn = click.option(
        "--init",
        type=click.Choice(sorted(_INIT_MODES)),
        default="zeros",
        show_default=True,
        help="Starting point of the descent.",
    )(fn)
    fn = click.option(
        "--grid-step", type=float, default=1.0, show_default=True,
        help="Integration step in votes.",
    )(fn)
    fn = click.option(
        "--grid-half-width", type=float, default=6.0, show_default=True,
        help="Integration half width in sigmas.",
    )(fn)
    fn = click.option(
        "--workers", type=int, default=1, show_default=True,
        help="Worker processes for independent reconstructions.",
    )(fn)
    return fn


def _build_optimizer(stop_mode, loss_threshold, max_iters, init) -> OptimizerConfig:
    try:
        return OptimizerConfig(
            loss_threshold=loss_threshold,
            max_iters=max_iters,
            stop_mode=_STOP_MODES[stop_mode],
            init=_INIT_MODES[init],
        )
    except ValueError as exc:
        raise click.UsageError(str(exc))


def _build_grid(grid_step, grid_half_width) -> IntegrationGrid:
    try:
        return IntegrationGrid(half_width_sigmas=grid_half_width, step=grid_step)
    except ValueError as exc:
        raise click.UsageError(str(exc))


def _parse_float_list(text: str, what: str) -> list[float]:
    try:
        values = [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise click.UsageError(f"{what} must be a comma-separated number list")
    if not values:
        raise click.UsageError(f"{what} list is empty")
    return values


def _read_histograms(path) -> list[VoteHistogram]:
    try:
        return read_histograms(path)
    except (OSError, ValueError) as exc:
        raise InputError(str(exc))


def _child_seed(base_seed: int, index: int) -> int:
    """Stable per-work-item seed, independent of scheduling."""
    ss = np.random.SeedSequence(entropy=(base_seed, index))
    return int(ss.generate_state(1, np.uint64)[0])


def _write_csv(outdir: Path, name: str, header: list[str], rows) -> Path:
    """Atomic CSV write: temp file in the target dir, then rename."""
    outdir.mkdir(parents=True, exist_ok=True)
    target = outdir / name
    fd, tmp_name = tempfile.mkstemp(dir=outdir, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(f"# pateprobe {__version__}\n")
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
        os.replace(tmp_name, target)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
    return target


def _run_parallel(fn, items, workers: int):
    """Map ``fn`` over items, merging results in input order."""
    if workers <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _attack_item(args):
    """One simulate-then-reconstruct work unit (top level for pickling)."""
    counts, sigma, m, seed, cfg, grid = args
    truth = VoteHistogram(counts)
    drawn = sample(truth, NoiseSpec(sigma=sigma, seed=seed), m)
    estimate = estimate_distribution(drawn)
    return reconstruct(estimate, sigma, truth.n_teachers, cfg, grid, truth=truth)


def _invert_item(args):
    """Reconstruct from pre-drawn answer counts, no ground truth."""
    answer_counts, m, sigma, n_teachers, cfg, grid = args
    q_bar = np.asarray(answer_counts, dtype=float) / m
    return reconstruct(q_bar, sigma, n_teachers, cfg, grid)


def _epsilon_of(sigma: float, delta: float, m: int) -> float:
    return account(PrivacyParams(sigma=sigma, delta=delta), m).epsilon


def _exit_on_nonconvergence(ctx, results) -> None:
    if any(r.stop_reason is StopReason.MAX_ITERS for r in results):
        ctx.exit(4)


@click.group()
@click.version_option(version=__version__, prog_name="pateprobe")
def main() -> None:
    """Simulate PATE's noisy argmax and attack it."""


@main.command("simulate")
@click.option("--histograms", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--sigma", type=float, required=True)
@click.option("--m", type=int, default=None, help="Query count per histogram.")
@click.option("--budget", type=float, default=None, help="Epsilon budget gating the query count.")
@click.option("--delta", type=float, default=1e-5, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", default="samples.csv", show_default=True)
@_common_options
def cmd_simulate(histograms, sigma, m, budget, delta, seed, out, outdir) -> None:
    """Draw mechanism answers for every histogram in a file."""
    if sigma < 0:
        raise click.UsageError("sigma must be non-negative")
    try:
        cfg = RunConfig(
            sigma=sigma, m=m, budget=budget, delta=delta, seed=seed,
            optimizer=OptimizerConfig(), grid=IntegrationGrid(),
        )
        queries = cfg.resolve_m()
    except ValueError as exc:
        raise click.UsageError(str(exc))
    hists = _read_histograms(histograms)
    classes = {h.n_classes for h in hists}
    if len(classes) != 1:
        raise InputError("histograms in one file must share the class count")
    c = classes.pop()
    rows = []
    for i, h in enumerate(hists):
        child = _child_seed(seed, i)
        drawn = sample(h, NoiseSpec(sigma=sigma, seed=child), queries)
        rows.append(
            [i, h.n_teachers, queries, sigma, child, *drawn.counts]
        )
    header = ["histogram", "n_teachers", "m", "sigma", "seed"]
    header += [f"count_{k}" for k in range(c)]
    target = _write_csv(outdir, out, header, rows)
    click.echo(f"wrote {target} ({len(rows)} histograms, m={queries})")


def _read_sample_file(path) -> list[dict]:
    """Parse a simulate output file back into per-histogram records."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(str(exc))
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    if not lines:
        raise InputError(f"{path}: empty sample file")
    reader = csv.DictReader(lines)
    records = []
    for row_no, row in enumerate(reader, start=1):
        try:
            count_cols = sorted(
                (k for k in row if k.startswith("count_")),
                key=lambda k: int(k.split("_")[1]),
            )
            records.append(
                {
                    "histogram": int(row["histogram"]),
                    "n_teachers": int(row["n_teachers"]),
                    "m": int(row["m"]),
                    "sigma": float(row["sigma"]),
                    "counts": tuple(int(row[k]) for k in count_cols),
                }
            )
        except (KeyError, TypeError, ValueError):
            raise InputError(f"{path}, row {row_no}: not a simulate output row")
    return records


@main.command("reconstruct")
@click.option("--histograms", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Ground-truth histograms; samples are drawn internally.")
@click.option("--samples", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Pre-drawn sample file from 'simulate'; error column is omitted.")
@click.option("--sigma", type=float, default=40.0, show_default=True)
@click.option("--m", type=int, default=None)
@click.option("--budget", type=float, default=None)
@click.option("--delta", type=float, default=1e-5, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", default="results.csv", show_default=True)
@_optimizer_options
@_common_options
@click.pass_context
def cmd_reconstruct(
    ctx, histograms, samples, sigma, m, budget, delta, seed, out,
    stop_mode, loss_threshold, max_iters, init, grid_step, grid_half_width,
    workers, outdir,
) -> None:
    """Run the inversion attack and report per-histogram results."""
    if (histograms is None) == (samples is None):
        raise click.UsageError("supply exactly one of --histograms and --samples")
    optimizer = _build_optimizer(stop_mode, loss_threshold, max_iters, init)
    grid = _build_grid(grid_step, grid_half_width)
    rows = []
    if histograms is not None:
        try:
            cfg = RunConfig(
                sigma=sigma, m=m, budget=budget, delta=delta, seed=seed,
                optimizer=optimizer, grid=grid, workers=workers,
            )
            queries = cfg.resolve_m()
        except ValueError as exc:
            raise click.UsageError(str(exc))
        hists = _read_histograms(histograms)
        groups = tertile_split(hists)
        items = [
            (h.counts, sigma, queries, _child_seed(seed, i), optimizer, grid)
            for i, h in enumerate(hists)
        ]
        results = _run_parallel(_attack_item, items, workers)
        eps = _epsilon_of(sigma, delta, queries)
        for i, (h, res) in enumerate(zip(hists, results)):
            rows.append(
                [
                    i, groups[h].value, queries, sigma, res.error,
                    res.iterations, res.stop_reason.value, eps,
                ]
            )
    else:
        if m is not None or budget is not None:
            raise click.UsageError("--samples carries its own query counts")
        records = _read_sample_file(samples)
        items = [
            (r["counts"], r["m"], r["sigma"], r["n_teachers"], optimizer, grid)
            for r in records
        ]
        results = _run_parallel(_invert_item, items, workers)
        for r, res in zip(records, results):
            eps = _epsilon_of(r["sigma"], delta, r["m"])
            rows.append(
                [
                    r["histogram"], "", r["m"], r["sigma"], "",
                    res.iterations, res.stop_reason.value, eps,
                ]
            )
    header = [
        "histogram", "group", "m", "sigma", "error",
        "iterations", "stop_reason", "epsilon",
    ]
    target = _write_csv(outdir, out, header, rows)
    click.echo(f"wrote {target} ({len(rows)} rows)")
    _exit_on_nonconvergence(ctx, results)


@main.command("sweep")
@click.option("--histograms", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--sigmas", required=True, help="Comma-separated noise scales.")
@click.option("--m", type=int, required=True)
@click.option("--seeds", type=int, default=1, show_default=True,
              help="Number of replicate seeds per cell.")
@click.option("--delta", type=float, default=1e-5, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True, help="Base seed.")
@click.option("--out", default="sweep.csv", show_default=True)
@_optimizer_options
@_common_options
@click.pass_context
def cmd_sweep(
    ctx, histograms, sigmas, m, seeds, delta, seed, out,
    stop_mode, loss_threshold, max_iters, init, grid_step, grid_half_width,
    workers, outdir,
) -> None:
    """Grid the attack over noise scales and seeds, long-form CSV."""
    sigma_values = _parse_float_list(sigmas, "--sigmas")
    if any(s <= 0 for s in sigma_values):
        raise click.UsageError("sweep sigmas must be positive (inversion needs noise)")
    if m < 1:
        raise click.UsageError("query count m must be >= 1")
    if seeds < 1:
        raise click.UsageError("seeds must be >= 1")
    optimizer = _build_optimizer(stop_mode, loss_threshold, max_iters, init)
    grid = _build_grid(grid_step, grid_half_width)
    hists = _read_histograms(histograms)
    cells = [
        (i, sigma, rep)
        for i in range(len(hists))
        for sigma in sigma_values
        for rep in range(seeds)
    ]
    items = [
        (hists[i].counts, sigma, m, _child_seed(seed, idx), optimizer, grid)
        for idx, (i, sigma, rep) in enumerate(cells)
    ]
    results = _run_parallel(_attack_item, items, workers)
    eps_by_sigma = {s: _epsilon_of(s, delta, m) for s in sigma_values}
    rows = [
        [
            i, sigma, rep, m, res.error, res.iterations,
            res.stop_reason.value, eps_by_sigma[sigma],
        ]
        for (i, sigma, rep), res in zip(cells, results)
    ]
    header = [
        "histogram", "sigma", "seed", "m", "error",
        "iterations", "stop_reason", "epsilon",
    ]
    target = _write_csv(outdir, out, header, rows)
    click.echo(f"wrote {target} ({len(rows)} rows)")
    _exit_on_nonconvergence(ctx, results)


@main.command("account")
@click.option("--m", "m_list", required=True, help="Comma-separated query counts.")
@click.option("--sigma", "sigma_list", required=True, help="Comma-separated noise scales.")
@click.option("--delta", type=float, default=1e-5, show_default=True)
@click.option("--out", default="account.csv", show_default=True)
@_common_options
def cmd_account(m_list, sigma_list, delta, out, outdir) -> None:
    """Tabulate the privacy cost of query streams."""
    sigmas = _parse_float_list(sigma_list, "--sigma")
    ms = [int(v) for v in _parse_float_list(m_list, "--m")]
    if any(v < 0 for v in ms):
        raise click.UsageError("query counts must be non-negative")
    if any(s <= 0 for s in sigmas):
        raise click.UsageError("sigma must be positive")
    rows = []
    for m in ms:
        for sigma in sigmas:
            acct = account(PrivacyParams(sigma=sigma, delta=delta), m)
            rows.append([m, sigma, delta, acct.epsilon, acct.alpha_star])
    target = _write_csv(
        outdir, out, ["m", "sigma", "delta", "epsilon", "alpha_star"], rows
    )
    click.echo(f"wrote {target} ({len(rows)} rows)")


@main.command("detect")
@click.option("--labeled", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Histogram file with ;minority / ;majority tags.")
@click.option("--tau", type=float, default=0.75, show_default=True)
@click.option("--out", default="detect.csv", show_default=True)
@_common_options
def cmd_detect(labeled, tau, out, outdir) -> None:
    """Score the consensus-threshold classifier on labeled histograms."""
    if not 0 < tau < 1:
        raise click.UsageError("tau must lie in (0, 1)")
    try:
        members = read_labeled_histograms(labeled)
    except (OSError, ValueError) as exc:
        raise InputError(str(exc))
    predictions = {
        mb.id: classify_by_consensus(mb.histogram, tau) for mb in members
    }
    truths = {mb.id: mb.group for mb in members}
    metrics = evaluate(predictions, truths)
    rows = [
        [
            metrics.precision, metrics.recall, metrics.accuracy,
            metrics.true_positives, metrics.false_positives,
            metrics.true_negatives, metrics.false_negatives,
            metrics.degenerate_precision,
        ]
    ]
    header = [
        "precision", "recall", "accuracy", "tp", "fp", "tn", "fn",
        "degenerate_precision",
    ]
    target = _write_csv(outdir, out, header, rows)
    click.echo(f"wrote {target}")


@main.command("e2e")
@click.option("--size", type=int, default=20, show_default=True)
@click.option("--minority-fraction", type=float, default=0.5, show_default=True)
@click.option("--minority-consensus", type=float, default=0.55, show_default=True)
@click.option("--majority-consensus", type=float, default=0.95, show_default=True)
@click.option("--spread", type=float, default=0.03, show_default=True)
@click.option("--tau", type=float, default=0.75, show_default=True)
@click.option("--sigma", type=float, default=40.0, show_default=True)
@click.option("--m", type=int, default=None)
@click.option("--budget", type=float, default=None)
@click.option("--delta", type=float, default=1e-5, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", default="e2e_members.csv", show_default=True)
@click.option("--summary-out", default="e2e_summary.csv", show_default=True)
@_optimizer_options
@_common_options
@click.pass_context
def cmd_e2e(
    ctx, size, minority_fraction, minority_consensus, majority_consensus,
    spread, tau, sigma, m, budget, delta, seed, out, summary_out,
    stop_mode, loss_threshold, max_iters, init, grid_step, grid_half_width,
    workers, outdir,
) -> None:
    """Full attack chain on a synthetic population, one seed end to end."""
    optimizer = _build_optimizer(stop_mode, loss_threshold, max_iters, init)
    grid = _build_grid(grid_step, grid_half_width)
    try:
        cfg = RunConfig(
            sigma=sigma, m=m, budget=budget, delta=delta, seed=seed,
            optimizer=optimizer, grid=grid, workers=workers,
        )
        queries = cfg.resolve_m()
        population_spec = SynthPopulationSpec(
            minority_fraction=minority_fraction,
            majority_consensus_mean=majority_consensus,
            minority_consensus_mean=minority_consensus,
            spread=spread,
            seed=seed,
        )
    except ValueError as exc:
        raise click.UsageError(str(exc))
    if not 0 < tau < 1:
        raise click.UsageError("tau must lie in (0, 1)")
    population = generate_population(population_spec, size)
    items = [
        (mb.histogram.counts, sigma, queries, _child_seed(seed, i), optimizer, grid)
        for i, mb in enumerate(population)
    ]
    results = _run_parallel(_attack_item, items, workers)

    member_rows = []
    predicted_true = {}
    predicted_est = {}
    truths = {}
    agree = 0
    for mb, res in zip(population, results):
        from_truth = classify_by_consensus(mb.histogram, tau)
        from_est = classify_by_consensus(res.estimate, tau)
        predicted_true[mb.id] = from_truth
        predicted_est[mb.id] = from_est
        truths[mb.id] = mb.group
        agree += from_truth is from_est
        member_rows.append(
            [
                mb.id, mb.group.value, consensus(mb.histogram),
                from_truth.value, consensus(res.estimate), from_est.value,
                res.error, res.iterations, res.stop_reason.value,
            ]
        )
    metrics = evaluate(predicted_est, truths)
    agreement = agree / len(population)
    eps = _epsilon_of(sigma, delta, queries)

    member_header = [
        "id", "group", "consensus", "predicted_from_truth",
        "consensus_estimate", "predicted_from_estimate", "error",
        "iterations", "stop_reason",
    ]
    target = _write_csv(outdir, out, member_header, member_rows)
    summary_header = [
        "size", "m", "sigma", "delta", "seed", "tau", "agreement",
        "precision", "recall", "accuracy", "epsilon",
    ]
    summary_rows = [
        [
            size, queries, sigma, delta, seed, tau, agreement,
            metrics.precision, metrics.recall, metrics.accuracy, eps,
        ]
    ]
    summary_target = _write_csv(outdir, summary_out, summary_header, summary_rows)
    click.echo(f"wrote {target} and {summary_target} (agreement={agreement:.2f})")
    _exit_on_nonconvergence(ctx, results)


if __name__ == "__main__":
    main()
