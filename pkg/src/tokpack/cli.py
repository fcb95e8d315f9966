"""Command-line entry point.

Subcommands: run (full experiment), sweep-p (run + tidy p-sweep CSV),
sweep-k / sweep-m (encoding-step formula tables), inspect (print a
sentence's best grouping and sampled receptions).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .errors import TokpackError
from .harness import (
    ExperimentConfig,
    complexity_k_table,
    complexity_m_table,
    emit_plot_data,
    inspect_sentence,
    run_experiment,
    write_tidy_csv,
)
from .model import TokenizationMode


def _add_experiment_flags(parser: argparse.ArgumentParser, seed_required: bool) -> None:
    parser.add_argument("--config", type=Path, help="JSON file with ExperimentConfig fields")
    parser.add_argument("--corpus", type=Path, help="corpus file (text or JSON lines)")
    parser.add_argument(
        "--mode", choices=[m.value for m in TokenizationMode], help="tokenization mode"
    )
    parser.add_argument("--m", type=int, help="packet length M")
    parser.add_argument("--p-grid", help="comma-separated loss probabilities")
    parser.add_argument("--methods", help="comma-separated subset of gbeam,full,random,single_packet")
    parser.add_argument("--provider", help="hash | additive[:opts] | file-cache:PATH | remote:URL")
    parser.add_argument("--out", type=Path, help="output directory")
    parser.add_argument("--seed", type=int, required=seed_required, help="global seed")
    parser.add_argument("--population", type=int, help="beam-search population L")
    parser.add_argument("--beam-width", type=int, help="beam width B")
    parser.add_argument("--generations", type=int, help="beam-search generations")
    parser.add_argument("--no-elitism", action="store_true", help="drop parents from selection")
    parser.add_argument("--swap-count", type=int, help="token swaps per child")
    parser.add_argument("--random-trials", type=int, help="partitions averaged by the random baseline")
    parser.add_argument("--max-sentences", type=int, help="cap on corpus sentences")


def _build_config(args: argparse.Namespace, seed_required: bool = True) -> ExperimentConfig:
    raw: dict = {}
    if args.config:
        import json

        raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
    if args.corpus is not None:
        raw["corpus"] = str(args.corpus)
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.mode is not None:
        raw["mode"] = args.mode
    if args.m is not None:
        raw["m"] = args.m
    if args.p_grid is not None:
        raw["p_grid"] = [float(p) for p in args.p_grid.split(",")]
    if args.methods is not None:
        raw["methods"] = [m.strip() for m in args.methods.split(",") if m.strip()]
    if args.provider is not None:
        raw["provider"] = args.provider
    if args.out is not None:
        raw["out_dir"] = str(args.out)
    if args.random_trials is not None:
        raw["random_trials"] = args.random_trials
    if args.max_sentences is not None:
        raw["max_sentences"] = args.max_sentences

    gbeam = dict(raw.get("gbeam", {}))
    if args.population is not None:
        gbeam["population"] = args.population
    if args.beam_width is not None:
        gbeam["beam_width"] = args.beam_width
    if args.generations is not None:
        gbeam["generations"] = args.generations
    if args.no_elitism:
        gbeam["elitism"] = False
    if args.swap_count is not None:
        gbeam["swap_count"] = args.swap_count
    if gbeam:
        gbeam.setdefault("population", 10)
        gbeam.setdefault("beam_width", 2)
        gbeam.setdefault("generations", 5)
        raw["gbeam"] = gbeam

    if seed_required and "seed" not in raw:
        raise SystemExit("--seed is required (flag or config file)")
    cfg = ExperimentConfig.from_dict(raw)
    cfg.validate()
    return cfg


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="tokpack", description="semantics-aware packet aggregation experiments"
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run the configured experiment")
    _add_experiment_flags(run_p, seed_required=False)

    sweep_p = sub.add_parser("sweep-p", help="run and emit a tidy p-sweep CSV")
    _add_experiment_flags(sweep_p, seed_required=False)

    sweep_k = sub.add_parser("sweep-k", help="encoding-step formulas over K")
    sweep_k.add_argument("--k-values", type=_int_list, required=True)
    sweep_k.add_argument("--m", type=int, default=2)
    sweep_k.add_argument("--generations", type=int, default=5)
    sweep_k.add_argument("--population", type=int, default=10)
    sweep_k.add_argument("--out", type=Path, default=Path("results"))

    sweep_m = sub.add_parser("sweep-m", help="encoding-step formulas over M")
    sweep_m.add_argument("--k", type=int, required=True)
    sweep_m.add_argument("--m-values", type=_int_list, required=True)
    sweep_m.add_argument("--generations", type=int, default=5)
    sweep_m.add_argument("--population", type=int, default=10)
    sweep_m.add_argument("--out", type=Path, default=Path("results"))

    inspect_p = sub.add_parser("inspect", help="print best grouping and sample receptions")
    _add_experiment_flags(inspect_p, seed_required=False)
    inspect_p.add_argument("--sentence-id", required=True)
    inspect_p.add_argument("--p", type=float, default=0.3)
    inspect_p.add_argument("--samples", type=int, default=3)

    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )

    try:
        if args.command in ("run", "sweep-p"):
            cfg = _build_config(args)
            rows = run_experiment(cfg)
            print(f"wrote {len(rows)} rows to {cfg.out_dir}")
            if args.command == "sweep-p":
                path = emit_plot_data(rows, "p_sweep", Path(cfg.out_dir) / "plot_p_sweep.csv")
                print(f"wrote {path}")
        elif args.command == "sweep-k":
            table = complexity_k_table(args.k_values, args.m, args.generations, args.population)
            path = write_tidy_csv(table, args.out / "plot_complexity_k.csv")
            print(f"wrote {path}")
        elif args.command == "sweep-m":
            table = complexity_m_table(args.k, args.m_values, args.generations, args.population)
            path = write_tidy_csv(table, args.out / "plot_complexity_m.csv")
            print(f"wrote {path}")
        elif args.command == "inspect":
            cfg = _build_config(args)
            print(inspect_sentence(cfg, args.sentence_id, args.p, args.samples))
    except TokpackError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
