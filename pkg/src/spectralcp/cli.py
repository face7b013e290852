"""Command-line entry point.

One JSON config drives everything; subcommands share it:

    spectralcp synth     --config cfg.json [--set key.path=value ...]
    spectralcp decompose --config cfg.json
    spectralcp autocut   --config cfg.json
    spectralcp evaluate  --config cfg.json

Exit codes: 0 success, 2 config error, 3 data error, 4 numeric failure.
"""

import argparse
import json
import os
import sys

from .data import save_series_csv
from .errors import ConfigError, DataError, NumericError
from .experiment import (
    build_graph_and_series,
    config_hash,
    load_config,
    run_autocut,
    run_decompose,
    run_evaluate,
)
from .graph import save_adjacency_csv

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

SUMMARY_COLUMNS = (
    "method", "alpha", "coverage_mean", "coverage_std", "width_mean",
    "width_std", "winkler_mean", "winkler_std", "infinite_cells",
)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="spectralcp",
        description="Spectral-domain conformal prediction experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, doc in (
        ("synth", "generate a synthetic series and adjacency CSV"),
        ("decompose", "correlation diagnostics of the raw/low/high bands"),
        ("autocut", "run the band cutoff diagnostic"),
        ("evaluate", "evaluate interval methods and write metric tables"),
    ):
        cmd = sub.add_parser(name, help=doc)
        cmd.add_argument("--config", default=None, help="JSON config path (defaults apply)")
        cmd.add_argument("--set", dest="overrides", action="append", default=[],
                         metavar="KEY.PATH=VALUE", help="override one config entry")
        cmd.add_argument("--output-dir", default=None, help="override the output directory")
    return parser


def _write_json(payload, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _write_summary_csv(summary, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(SUMMARY_COLUMNS) + "\n")
        for row in summary:
            cells = []
            for col in SUMMARY_COLUMNS:
                value = row[col]
                cells.append(repr(value) if isinstance(value, float) else str(value))
            fh.write(",".join(cells) + "\n")


def cmd_synth(cfg, out_dir):
    if "synthetic" not in cfg["data"]:
        raise ConfigError("synth needs a data.synthetic block")
    seed = int(cfg["seeds"][0])
    graph, series = build_graph_and_series(cfg, seed)
    series_path = os.path.join(out_dir, "series.csv")
    adjacency_path = os.path.join(out_dir, "adjacency.csv")
    save_series_csv(series, series_path)
    save_adjacency_csv(graph, adjacency_path)
    manifest = {
        "config_hash": config_hash(cfg),
        "seeds": [int(s) for s in cfg["seeds"]],
        "seed_used": seed,
        "synthetic": cfg["data"]["synthetic"],
        "files": {"series": "series.csv", "adjacency": "adjacency.csv"},
    }
    _write_json(manifest, os.path.join(out_dir, "manifest.json"))
    print(f"wrote {series_path} and {adjacency_path}")


def cmd_decompose(cfg, out_dir):
    payload = run_decompose(cfg)
    path = os.path.join(out_dir, "decompose.json")
    _write_json(payload, path)
    bands = payload["mean_abs_offdiag"]
    print(f"mean |corr|: raw={bands['raw']:.4f} low={bands['low']:.4f} high={bands['high']:.4f}")
    print(f"wrote {path}")


def cmd_autocut(cfg, out_dir):
    payload = run_autocut(cfg)
    path = os.path.join(out_dir, "cutoff.json")
    _write_json(payload, path)
    print(f"chosen_k={payload['chosen_k']} (cutoff index {payload['cutoff_index']})")
    print(f"wrote {path}")


def cmd_evaluate(cfg, out_dir):
    payload = run_evaluate(cfg)
    json_path = os.path.join(out_dir, "metrics.json")
    csv_path = os.path.join(out_dir, "metrics.csv")
    _write_json(payload, json_path)
    _write_summary_csv(payload["summary"], csv_path)
    for row in payload["summary"]:
        flag = "ok " if row["coverage_ok"] else "off"
        print(
            f"{row['method']:<12} alpha={row['alpha']:<5} "
            f"coverage={row['coverage_mean']:.4f}+-{row['coverage_std']:.4f} [{flag}] "
            f"width={row['width_mean']:.4f} winkler={row['winkler_mean']:.4f}"
        )
    print(f"wrote {json_path} and {csv_path}")


COMMANDS = {
    "synth": cmd_synth,
    "decompose": cmd_decompose,
    "autocut": cmd_autocut,
    "evaluate": cmd_evaluate,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.overrides)
        out_dir = args.output_dir or cfg.get("output_dir", "out")
        os.makedirs(out_dir, exist_ok=True)
        COMMANDS[args.command](cfg, out_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return 0


if __name__ == "__main__":
    sys.exit(main())
