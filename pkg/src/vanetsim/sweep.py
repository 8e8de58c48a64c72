"""Sweeps over protocol x node count x stopped fraction x seed, aggregation and CSV output."""

from __future__ import annotations

import csv
import io
import logging
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from statistics import fmean

from . import config as config_mod
from .config import PROTOCOLS, ScenarioConfig
from .simulation import run_once
from .traffic import RunReport

log = logging.getLogger(__name__)

RAW_HEADER = ["protocol", "node_count", "percent_stopped", "seed", "mean_delay_s", "pdf", "nrl", "sent",
              "received", "control_tx"]
AGG_HEADER = ["protocol", "percent_stopped", "mean_delay_s", "pdf", "nrl", "runs", "failed"]
FIG_HEADER = ["percent_stopped", "aomdv", "sd_aomdv", "ssd_aomdv"]
METRICS = {"delay": "mean_delay", "pdf": "pdf", "nrl": "nrl"}
NA = "NA"
FAILED = "FAILED"

# overall changes quoted for the original ns-2 study, (baseline, candidate) -> metric -> percent
REFERENCE = {
    ("aomdv", "ssd-aomdv"): {"delay": 66.9, "pdf": 19.5, "nrl": 30.2},
    ("aomdv", "sd-aomdv"): {"delay": 54.0, "pdf": 15.0, "nrl": 27.5},
    ("sd-aomdv", "ssd-aomdv"): {"delay": 27.0, "pdf": 3.8, "nrl": 3.2},
}


def fmt(value) -> str:
    """Fixed numeric formatting: 6 significant digits, ``NA`` for undefined."""
    if value is None:
        return NA
    if isinstance(value, int):
        return str(value)
    return format(value, ".6g")


def percent(fraction: float) -> float:
    return round(fraction * 100, 6)


@dataclass(frozen=True, order=True)
class RunKey:
    protocol_rank: int
    node_count: int
    fraction: float
    seed: int

    @property
    def protocol(self) -> str:
        return PROTOCOLS[self.protocol_rank]


def run_keys(cfg: ScenarioConfig) -> list[RunKey]:
    keys = {
        RunKey(PROTOCOLS.index(p), n, float(f), s)
        for p in cfg.protocols for n in cfg.node_counts for f in cfg.stopped_fractions for s in cfg.seeds
    }
    return sorted(keys)


def _execute(args) -> tuple[RunKey, RunReport | None, str | None]:
    cfg_dict, key = args
    cfg = config_mod.from_mapping(cfg_dict)
    try:
        report = run_once(cfg, key.protocol, key.node_count, key.fraction, key.seed)
        return key, report, None
    except Exception:  # a broken run becomes a failed row; the sweep carries on
        return key, None, traceback.format_exc()


@dataclass
class SweepResult:
    rows: list[RunReport] = field(default_factory=list)
    errors: dict = field(default_factory=dict)

    @property
    def failed(self) -> int:
        return sum(r.failed for r in self.rows)

    def aggregate(self) -> dict[tuple[str, float], dict]:
        return aggregate(self.rows)


def run_sweep(cfg: ScenarioConfig, jobs: int = 1, progress=None) -> SweepResult:
    """Execute every run of ``cfg``; output order is canonical, not completion order."""
    keys = run_keys(cfg)
    cfg_dict = cfg.to_dict()
    tasks = [(cfg_dict, k) for k in keys]
    results: dict[RunKey, tuple] = {}
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for key, report, err in pool.map(_execute, tasks, chunksize=1):
                results[key] = (report, err)
                if progress:
                    progress(key, report)
    else:
        for task in tasks:
            key, report, err = _execute(task)
            results[key] = (report, err)
            if progress:
                progress(key, report)
    out = SweepResult()
    for key in keys:
        report, err = results[key]
        if report is None:
            log.error("run %s failed:\n%s", key, err)
            out.errors[key] = err
            report = RunReport(key.protocol, key.node_count, key.fraction, key.seed, None, None, None, 0, 0, 0,
                               failed=True)
        out.rows.append(report)
    return out


def aggregate(rows: list[RunReport]) -> dict[tuple[str, float], dict]:
    """Per (protocol, fraction): mean over node counts within each seed, then mean over seeds."""
    cells: dict[tuple[str, float], dict[int, dict[int, RunReport]]] = {}
    for r in rows:
        cells.setdefault((r.protocol, r.percent_stopped), {}).setdefault(r.seed, {})[r.node_count] = r
    out = {}
    for key in sorted(cells, key=lambda k: (PROTOCOLS.index(k[0]), k[1])):
        by_seed = cells[key]
        entry = {"runs": sum(len(v) for v in by_seed.values()),
                 "failed": sum(r.failed for v in by_seed.values() for r in v.values())}
        for attr in METRICS.values():
            seed_means = []
            for seed in sorted(by_seed):
                vals = [getattr(r, attr) for _, r in sorted(by_seed[seed].items()) if getattr(r, attr) is not None]
                if vals:
                    seed_means.append(fmean(vals))
            entry[attr] = fmean(seed_means) if seed_means else None
        out[key] = entry
    return out


def raw_csv(rows: list[RunReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RAW_HEADER)
    for r in rows:
        head = [r.protocol, r.node_count, fmt(percent(r.percent_stopped)), r.seed]
        if r.failed:
            w.writerow(head + [FAILED] * 6)
        else:
            w.writerow(head + [fmt(r.mean_delay), fmt(r.pdf), fmt(r.nrl), r.sent, r.received, r.control_tx])
    return buf.getvalue()


def aggregate_csv(agg: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(AGG_HEADER)
    for (proto, frac), e in agg.items():
        w.writerow([proto, fmt(percent(frac)), fmt(e["mean_delay"]), fmt(e["pdf"]), fmt(e["nrl"]), e["runs"],
                    e["failed"]])
    return buf.getvalue()


def figure_csv(agg: dict, metric: str) -> str:
    """Plot series for one metric: x = percent stopped, one column per protocol."""
    attr = METRICS[metric]
    fractions = sorted({f for _, f in agg})
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FIG_HEADER)
    for f in fractions:
        w.writerow([fmt(percent(f))] + [fmt(agg.get((p, f), {}).get(attr)) for p in PROTOCOLS])
    return buf.getvalue()


def write_outputs(result: SweepResult, cfg: ScenarioConfig, out_dir: str | Path) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    agg = result.aggregate()
    files = {
        "raw_results.csv": raw_csv(result.rows),
        "aggregate.csv": aggregate_csv(agg),
        "fig_delay.csv": figure_csv(agg, "delay"),
        "fig_pdf.csv": figure_csv(agg, "pdf"),
        "fig_nrl.csv": figure_csv(agg, "nrl"),
        "effective_config.yaml": config_mod.dump(cfg),
    }
    paths = {}
    for name, text in files.items():
        p = out / name
        p.write_text(text)
        paths[name] = p
    return paths


# -- comparison ---------------------------------------------------------------


def _num(text: str) -> float | None:
    return None if text in (NA, FAILED, "") else float(text)


def read_aggregate(path: str | Path) -> dict[tuple[str, float], dict]:
    """Load aggregate rows from ``aggregate.csv``, ``raw_results.csv`` or an output directory."""
    p = Path(path)
    if p.is_dir():
        p = p / "aggregate.csv"
    with p.open(newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        rows = list(reader)
    if header == RAW_HEADER:
        reports = []
        for row in rows:
            failed = row["pdf"] == FAILED
            reports.append(RunReport(
                row["protocol"], int(row["node_count"]), float(row["percent_stopped"]) / 100, int(row["seed"]),
                _num(row["mean_delay_s"]), _num(row["pdf"]), _num(row["nrl"]),
                0 if failed else int(row["sent"]), 0 if failed else int(row["received"]),
                0 if failed else int(row["control_tx"]), failed=failed,
            ))
        return aggregate(reports)
    if header[:5] != AGG_HEADER[:5]:
        raise ValueError(f"{p}: unrecognised result file header {header}")
    return {
        (row["protocol"], float(row["percent_stopped"]) / 100): {
            "mean_delay": _num(row["mean_delay_s"]), "pdf": _num(row["pdf"]), "nrl": _num(row["nrl"]),
            "runs": int(row["runs"]), "failed": int(row.get("failed") or 0),
        }
        for row in rows
    }


def overall(agg: dict, protocol: str, attr: str) -> float | None:
    vals = [e[attr] for (p, _), e in sorted(agg.items()) if p == protocol and e[attr] is not None]
    return fmean(vals) if vals else None


def compare(agg: dict, baseline: str, candidate: str) -> dict[str, dict]:
    """Overall percentage change of ``candidate`` against ``baseline`` per metric.

    Delay is reported as an improvement, ``(baseline - candidate) / baseline``;
    PDF and NRL as increases, ``(candidate - baseline) / baseline``.
    """
    present = {p for p, _ in agg}
    for proto in (baseline, candidate):
        if proto not in present:
            raise KeyError(f"protocol {proto!r} not in results (have {sorted(present)})")
    ref = REFERENCE.get((baseline, candidate), {})
    out = {}
    for metric, attr in METRICS.items():
        b = overall(agg, baseline, attr)
        c = overall(agg, candidate, attr)
        if b is None or c is None or b == 0:
            change = None
        elif metric == "delay":
            change = (b - c) / b * 100
        else:
            change = (c - b) / b * 100
        out[metric] = {"baseline": b, "candidate": c, "change_pct": change, "reference_pct": ref.get(metric)}
    return out


def format_comparison(table: dict, baseline: str, candidate: str) -> str:
    verbs = {"delay": "improved", "pdf": "increased", "nrl": "increased"}
    lines = [f"{candidate} vs {baseline}"]
    for metric, row in table.items():
        change = "NA" if row["change_pct"] is None else f"{row['change_pct']:.1f}%"
        ref = "" if row["reference_pct"] is None else f"  (reference {row['reference_pct']:.1f}%)"
        lines.append(f"  {metric:<5} {verbs[metric]} {change}  [{fmt(row['baseline'])} -> {fmt(row['candidate'])}]"
                     f"{ref}")
    return "\n".join(lines)
