"""Command-line driver: config in, CSV traces and partition snapshots out."""
from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import os
import sys
from typing import Iterable, Optional, Sequence, TextIO

from .config import POLICIES, STRATEGIES, ConfigError, RunConfig, format_config, parse_config
from .harness import Simulation, StepMetrics
from .partition import write_partition_map

logger = logging.getLogger("picbalance")

METRIC_COLUMNS = ("step", "imbalance", "max_load", "mean_load", "particles_migrated", "cost_migrated",
                  "perimeter", "locality_max", "solver_iters", "field_energy")
ENERGY_COLUMNS = ("step", "time", "field_energy", "solver_iters", "solver_residual", "solver_converged")


def _num(v) -> str:
    # repr is locale independent and round-trips floats exactly
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _writer(fh: TextIO):
    return csv.writer(fh, lineterminator="\n")


def metrics_row(m: StepMetrics):
    return [m.step, float(m.imbalance), m.max_load, m.mean_load, m.particles_migrated, m.cost_migrated,
            m.perimeter, m.locality_max, m.solver_iters, float(m.field_energy)]


def emit_metrics(series: Iterable[StepMetrics], fh: TextIO) -> None:
    w = _writer(fh)
    w.writerow(METRIC_COLUMNS)
    for m in series:
        w.writerow([_num(v) for v in metrics_row(m)])


def _snapshot(out_dir: str, step: int, sim: Simulation) -> None:
    with open(os.path.join(out_dir, f"partition_step{step:04d}.txt"), "w", newline="\n") as fh:
        write_partition_map(sim.pmap, fh)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="picbalance",
                                 description="Run the two-stream PIC load-balancing experiment.")
    ap.add_argument("--config", metavar="PATH", help="flat key = value config file")
    ap.add_argument("--out", metavar="DIR", help="output directory (overrides output_dir)")
    ap.add_argument("--seed", type=int, help="particle RNG seed")
    ap.add_argument("--steps", type=int, help="number of supersteps")
    ap.add_argument("--strategy", choices=STRATEGIES)
    ap.add_argument("--policy", choices=POLICIES)
    ap.add_argument("--quiet", action="store_true", help="suppress progress output")
    return ap


def load_config(args: argparse.Namespace) -> RunConfig:
    text = ""
    if args.config:
        with open(args.config) as fh:
            text = fh.read()
    cfg = parse_config(text, resolve=False)
    overrides = {k: v for k, v in (("output_dir", args.out), ("seed", args.seed), ("n_steps", args.steps),
                                   ("strategy", args.strategy), ("policy", args.policy)) if v is not None}
    return dataclasses.replace(cfg, **overrides).resolved()


def run_to_dir(cfg: RunConfig, quiet: bool = True) -> int:
    """Run ``cfg`` and write every output file; returns the number of unconverged solves."""
    out = cfg.output_dir
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "config.resolved"), "w", newline="\n") as fh:
        fh.write(format_config(cfg))

    sim = Simulation(cfg)
    _snapshot(out, 0, sim)
    unconverged = 0
    with open(os.path.join(out, "metrics.csv"), "w", newline="") as mf, \
            open(os.path.join(out, "energy.csv"), "w", newline="") as ef:
        mw, ew = _writer(mf), _writer(ef)
        mw.writerow(METRIC_COLUMNS)
        ew.writerow(ENERGY_COLUMNS)
        for m in sim.steps():
            mw.writerow([_num(v) for v in metrics_row(m)])
            ew.writerow([_num(v) for v in (m.step, m.step * cfg.dt, float(m.field_energy), m.solver_iters,
                                           float(m.solver_residual), bool(m.solver_converged))])
            unconverged += not m.solver_converged
            if cfg.snapshot_every and m.step % cfg.snapshot_every == 0:
                _snapshot(out, m.step, sim)
            if not quiet and m.step % 50 == 0:
                print(f"step {m.step:5d}  imbalance {m.imbalance:.3f}  energy {m.field_energy:.4e}",
                      file=sys.stderr)
    return unconverged


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    try:
        cfg = load_config(args)
    except ConfigError as exc:
        print(f"picbalance: config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"picbalance: cannot read config: {exc}", file=sys.stderr)
        return 2
    try:
        unconverged = run_to_dir(cfg, quiet=args.quiet)
    except OSError as exc:
        print(f"picbalance: cannot write output: {exc}", file=sys.stderr)
        return 3
    if unconverged and not args.quiet:
        print(f"picbalance: field solve stopped at max_iter on {unconverged} of {cfg.n_steps} steps "
              f"(see energy.csv)", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
