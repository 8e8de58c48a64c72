"""Command line front end: ``vanetsim run | compare | trace``."""

from __future__ import annotations

import logging
import sys
import time

import click

from . import config as config_mod
from .config import ConfigError
from .simulation import ScenarioRun
from .sweep import compare as compare_results
from .sweep import format_comparison, read_aggregate, run_sweep, write_outputs


def _csv_list(kind):
    def convert(ctx, param, value):
        if value is None:
            return None
        try:
            return [kind(v.strip()) for v in value.split(",") if v.strip()]
        except ValueError as exc:
            raise click.BadParameter(str(exc)) from exc
    return convert


def _load(config_path, protocols, seeds, nodes, fractions):
    cfg = config_mod.load(config_path)
    overrides = {}
    if protocols:
        overrides["protocols"] = protocols
    if seeds:
        overrides["seeds"] = seeds
    if nodes:
        overrides["node_counts"] = nodes
    if fractions:
        overrides["stopped_fractions"] = fractions
    return cfg.replace(**overrides) if overrides else cfg


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def main(verbose):
    """Mobility-aware AOMDV variants on a Manhattan-grid VANET."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(message)s")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), help="YAML scenario file.")
@click.option("--out-dir", default="results", show_default=True, type=click.Path(file_okay=False))
@click.option("--protocols", callback=_csv_list(str), help="Comma list, e.g. aomdv,ssd-aomdv.")
@click.option("--seeds", callback=_csv_list(int), help="Comma list of integer seeds.")
@click.option("--nodes", callback=_csv_list(int), help="Comma list of node counts.")
@click.option("--fractions", callback=_csv_list(float), help="Comma list of stopped fractions in [0, 1].")
@click.option("--jobs", default=1, show_default=True, type=click.IntRange(min=1))
def run(config_path, out_dir, protocols, seeds, nodes, fractions, jobs):
    """Execute a sweep and write CSV tables, figure series and the effective config."""
    try:
        cfg = _load(config_path, protocols, seeds, nodes, fractions)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)
    total = cfg.n_runs()
    started = time.perf_counter()
    done = 0

    def progress(key, report):
        nonlocal done
        done += 1
        logging.info("[%d/%d] %s n=%d f=%.2f seed=%d %s", done, total, key.protocol, key.node_count,
                     key.fraction, key.seed, "FAILED" if report is None else "ok")

    result = run_sweep(cfg, jobs=jobs, progress=progress)
    paths = write_outputs(result, cfg, out_dir)
    click.echo(f"{total} runs in {time.perf_counter() - started:.1f} s -> {paths['raw_results.csv'].parent}")
    if result.failed:
        click.echo(f"{result.failed} run(s) failed", err=True)
        sys.exit(1)


@main.command()
@click.argument("result_file", type=click.Path(exists=True))
@click.option("--baseline", default="aomdv", show_default=True)
@click.option("--candidate", default="ssd-aomdv", show_default=True)
def compare(result_file, baseline, candidate):
    """Overall percentage change of CANDIDATE against BASELINE."""
    try:
        agg = read_aggregate(result_file)
        table = compare_results(agg, baseline, candidate)
    except (KeyError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    click.echo(format_comparison(table, baseline, candidate))


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--protocol", default="ssd-aomdv", show_default=True)
@click.option("--nodes", default=60, show_default=True, type=int)
@click.option("--fraction", default=0.3, show_default=True, type=float)
@click.option("--seed", default=1, show_default=True, type=int)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), help="Event log file (default stdout).")
@click.option("--mobility-trace", type=click.Path(dir_okay=False), help="Also write per-step vehicle samples.")
def trace(config_path, protocol, nodes, fraction, seed, out_path, mobility_trace):
    """Dump the event log of a single run."""
    try:
        cfg = config_mod.load(config_path).replace(protocols=[protocol], node_counts=[nodes],
                                                   stopped_fractions=[fraction], seeds=[seed])
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)
    sim = ScenarioRun(cfg, protocol, nodes, fraction, seed, keep_log=True)
    trace_fh = open(mobility_trace, "w") if mobility_trace else None
    if trace_fh:
        sim.mobility.listeners.append(lambda: sim.mobility.write_trace(trace_fh))
    report = sim.run()
    if trace_fh:
        trace_fh.close()
    text = "\n".join(sim.log) + "\n"
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)
    else:
        click.echo(text, nl=False)
    click.echo(f"# sent={report.sent} received={report.received} control_tx={report.control_tx} "
               f"pdf={report.pdf} nrl={report.nrl} mean_delay_s={report.mean_delay}", err=True)


if __name__ == "__main__":
    main()
