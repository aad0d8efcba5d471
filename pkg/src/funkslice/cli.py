"""Command-line driver: ``funkslice phantom|forward|invert|verify|plot --config <path>``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .fields import GridField
from .geometry import GeometryError
from .inversion import ReconstructionAccuracyError
from .pipelines import (
    AccuracyFailure,
    ConfigError,
    ExperimentConfig,
    check_tolerances,
    make_phantom,
    read_points,
    run_forward,
    run_invert,
    write_points,
)
from .storage import StorageError, _atomic_write
from .transforms import SectionProfile

EXIT_OK, EXIT_CONFIG, EXIT_ACCURACY, EXIT_IO = 0, 2, 3, 4

log = logging.getLogger("funkslice")


def _write_json(path: Path, payload: dict):
    _atomic_write(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def cmd_phantom(cfg: ExperimentConfig, args) -> int:
    out = cfg.path("phantom", "phantom.csv")
    ph = make_phantom(cfg)
    if isinstance(ph, GridField):
        ph.save(out)
        log.info("phantom %s, symmetry residual %.3g", out, ph.meta["symmetry_residual"])
    else:
        write_points(out, ph["points"], ph["values"], ph["meta"])
        log.info("phantom samples %s", out)
    return EXIT_OK


def cmd_forward(cfg: ExperimentConfig, args) -> int:
    out = cfg.path("profile", "profile.csv")
    prof = run_forward(cfg, args.threads)
    prof.save(out)
    log.info("%s profile on %s lattice -> %s (%d flagged)", prof.transform, prof.lattice.kind, out, len(prof.flags))
    return EXIT_ACCURACY if prof.flags else EXIT_OK


def cmd_invert(cfg: ExperimentConfig, args) -> int:
    prof = SectionProfile.load(cfg.path("profile", "profile.csv"))
    rec, metrics = run_invert(cfg, prof, args.threads)
    out = cfg.path("reconstruction", "reconstruction.csv")
    if isinstance(rec, GridField):
        rec.save(out)
    else:
        write_points(out, rec["points"], rec["values"], rec["meta"])
    _write_json(cfg.path("metrics", "metrics.json"), metrics)
    log.info("reconstruction -> %s; %s", out, metrics)
    check_tolerances(cfg, metrics)
    return EXIT_OK


def cmd_verify(cfg: ExperimentConfig, args) -> int:
    from .verify import run_suite

    if cfg.scenario != "verify":
        raise ConfigError("verify needs scenario 'verify'")
    opts = dict(cfg.verify)
    report = run_suite(
        cfg.a, cfg.k, cfg.seed, cfg.ell, cfg.tolerances, opts.get("mutation"), opts.get("checks"), opts.get("sizes")
    )
    _write_json(cfg.path("report", "report.json"), report.to_dict())
    for c in report.checks:
        print(f"{c.name:20s} residual={c.residual:.3e} tol={c.tolerance:.1e} {'PASS' if c.passed else 'FAIL'} ({c.runtime:.2f}s)")
    return EXIT_OK if report.passed else EXIT_ACCURACY


def cmd_plot(cfg: ExperimentConfig, args) -> int:
    from . import plotting

    outdir = cfg.path("plots", "plots")
    written = plotting.plot_all(cfg, outdir)
    if not written:
        raise ConfigError("nothing to plot: no profile, reconstruction or report files found")
    for p in written:
        print(p)
    return EXIT_OK


COMMANDS = {"phantom": cmd_phantom, "forward": cmd_forward, "invert": cmd_invert, "verify": cmd_verify, "plot": cmd_plot}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="funkslice", description="Funk-type transforms on the sphere: forward, inverse, verification.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="JSON experiment config")
    parser.add_argument("--threads", type=int, default=1, help="worker threads for sweeps and reconstructions")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("FUNKSLICE_LOG", "WARNING").upper(), format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = ExperimentConfig.load(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.threads < 1:
            raise ConfigError("--threads must be positive")
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, GeometryError, KeyError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (AccuracyFailure, ReconstructionAccuracyError) as exc:
        print(f"accuracy failure: {exc}", file=sys.stderr)
        return EXIT_ACCURACY
    except (StorageError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
