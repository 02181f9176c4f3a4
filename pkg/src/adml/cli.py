"""Command-line entry point.

    adml run --manifest <path>
    adml synth --out <dir> --n-per-class <a,b> --dims <x,y,z> \
              --informative <k> --effect <norm> --seed <s>
    adml convert-generic --tabular <tsv> --images <dir> --out <dir>
    adml report --results <dir> --svg

Exit codes: 0 success, 1 validation error, 2 runtime failure. ADML_WORKERS
caps the evaluation worker count (affects speed only, never results).
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from .dataset import convert_generic_tabular
from .errors import AdmlError, PipelineError
from .pipeline import run_experiment
from .report import emit_boxplot_svg
from .synthetic import SyntheticSpec, generate_synthetic_dataset


def _parse_ints(text, n, what):
    parts = text.split(",")
    if len(parts) != n:
        raise argparse.ArgumentTypeError(f"{what} needs {n} comma-separated integers")
    return tuple(int(p) for p in parts)


def _cmd_run(args):
    out = run_experiment(args.manifest)
    print(f"experiment written to {out}")


def _cmd_synth(args):
    spec = SyntheticSpec(
        n_per_class=_parse_ints(args.n_per_class, 2, "--n-per-class"),
        dims=_parse_ints(args.dims, 3, "--dims"),
        n_informative_voxels=args.informative,
        effect_vector_norm=args.effect,
        seed=args.seed,
    )
    out = generate_synthetic_dataset(spec, args.out)
    print(f"synthetic dataset written to {out}")


def _cmd_convert(args):
    out = convert_generic_tabular(args.tabular, args.images, args.out)
    print(f"BIDS-lite tree written to {out}")


def _cmd_report(args):
    results = Path(args.results)
    metrics_file = results / "metrics_per_split.tsv"
    with open(metrics_file, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh, delimiter="\t"))
    if not rows:
        raise AdmlError(f"{metrics_file} has no data rows")
    dists = {m: [float(r[m]) for r in rows]
             for m in ("accuracy", "balanced_accuracy", "sensitivity",
                       "specificity", "auc")}
    if args.svg:
        out = results / "metrics_boxplot.svg"
        emit_boxplot_svg(dists, out)
        print(f"box plot written to {out}")
    for m, vals in dists.items():
        mean = sum(vals) / len(vals)
        print(f"{m}: mean {mean:.4f} over {len(vals)} splits")


def build_parser():
    parser = argparse.ArgumentParser(prog="adml")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment from a manifest")
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("synth", help="generate a synthetic BIDS-lite dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--n-per-class", required=True)
    p.add_argument("--dims", required=True)
    p.add_argument("--informative", type=int, required=True)
    p.add_argument("--effect", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("convert-generic",
                       help="convert a generic tabular layout to BIDS-lite")
    p.add_argument("--tabular", required=True)
    p.add_argument("--images", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_convert)

    p = sub.add_parser("report", help="summarize an experiment directory")
    p.add_argument("--results", required=True)
    p.add_argument("--svg", action="store_true")
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except PipelineError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1 if isinstance(e.cause, AdmlError) else 2
    except AdmlError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except Exception as e:  # unexpected runtime failure
        print(f"internal error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
