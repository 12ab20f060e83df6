"""Command-line entry point: ``epidermaquant run | single | calibrate-gate``.

Exit codes: 0 success, 1 usage or configuration error, 2 some images failed.
"""
import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .config import ENV_VAR, load_config
from .errors import ConfigError, EmptyInput
from .pipeline import (ManifestEntry, calibrate_gate_dirs, load_manifest, run_batch,
                       run_single)
from .quantify import report_csv


def _add_common(p):
    p.add_argument("--config", help=f"config file (default: ${ENV_VAR}, else built-in defaults)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--save-intermediates", action="store_true",
                   help="write tissue mask, rotated layers and cluster labels")
    p.add_argument("--save-rotated", action="store_true", help="write rotated, cropped layers")
    p.add_argument("--save-clusters", action="store_true", help="write cluster label image")
    p.add_argument("--no-mask", action="store_true", help="do not write the DAB mask PNG")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="epidermaquant", description="Quantify DAB staining in H-DAB images of epidermis.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="process a manifest or a marker-per-subdirectory tree")
    run.add_argument("--manifest", required=True, help="CSV (path,marker,control) or directory")
    run.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")
    _add_common(run)

    single = sub.add_parser("single", help="process one image")
    single.add_argument("--image", required=True)
    single.add_argument("--marker", required=True)
    _add_common(single)

    cal = sub.add_parser("calibrate-gate", help="calibrate the AP gate on control images")
    cal.add_argument("--positive", required=True, help="directory of positive controls")
    cal.add_argument("--negative", required=True, help="directory of negative controls")
    cal.add_argument("--config")
    cal.add_argument("--out", required=True)
    return parser


def _config(args):
    cfg = load_config(args.config)
    flags = {}
    if getattr(args, "save_intermediates", False):
        flags["output_save_intermediates"] = True
    if getattr(args, "save_rotated", False):
        flags["output_save_rotated"] = True
    if getattr(args, "save_clusters", False):
        flags["output_save_clusters"] = True
    if getattr(args, "no_mask", False):
        flags["output_save_mask"] = False
    return replace(cfg, output_dir=args.out, **flags)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
        out = Path(args.out)
        if args.command == "run":
            if args.jobs < 1:
                raise ConfigError("--jobs must be >= 1")
            entries = load_manifest(args.manifest)
            records, code = run_batch(entries, cfg, out, args.jobs)
            failed = sum(not r.ok for r in records)
            print(f"{len(records)} images, {failed} failed; report in {out / 'report.csv'}")
            return code
        if args.command == "single":
            entry = ManifestEntry(Path(args.image), args.marker)
            out.mkdir(parents=True, exist_ok=True)
            record = run_single(entry.path, entry.marker, cfg, out)
            sys.stdout.write(report_csv([record]))
            return 0 if record.ok else 2
        result, _, failures = calibrate_gate_dirs(args.positive, args.negative, cfg, out)
        print(f"ap_threshold={result.ap_threshold:.2f} youden_j={result.youden_j:.4f} "
              f"auc={result.auc:.4f}")
        return 2 if failures else 0
    except (ConfigError, EmptyInput) as exc:
        print(f"epidermaquant: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
