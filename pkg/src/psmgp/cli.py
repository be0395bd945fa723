"""Command-line entry point: ``psmgp {synth,features,train,rescore,evaluate}``.

Any long option can also be set in a ``key = value`` file given with
``--config`` (keys use underscores, e.g. ``pop_size = 300``); flags on the
command line win over the file.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import random
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ParseError, PsmGpError, ValidationError
from .features import (FeatureConfig, FeatureRow, extract_many, make_psm_id, read_feature_table,
                       write_feature_table)
from .gp import GPConfig, evolve, holdout_rss, read_model, write_model
from .rerank import (evaluate_ranked, read_candidates, read_ranked, report_json, report_table,
                     rescore_all, sets_from_feature_rows, write_ranked)
from .spectra import DEFAULT_MASSES, MassTable, read_key_values, read_mgf
from .synth import DEFAULT_PLANTED, TARGET_HEADER, SynthSpec, generate_dataset, write_dataset

logger = logging.getLogger("psmgp")

THREADS_ENV = "PSMGP_THREADS"
EXIT_FILE_NOT_FOUND = 3


def _default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def _positive_int(v):
    n = int(v)
    if n < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return n


def _rate(v):
    x = float(v)
    if not 0.0 <= x <= 1.0:
        raise argparse.ArgumentTypeError(f"expected a value in [0, 1], got {v}")
    return x


def _masses(path) -> MassTable:
    return MassTable.from_file(path) if path else DEFAULT_MASSES


def _need(path):
    if not Path(path).is_file():
        raise FileNotFoundError(f"input file not found: {path}")
    return path


def _add_common(p):
    p.add_argument("--config", help="key = value file overriding defaults")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=_positive_int, default=_default_threads(),
                   help=f"worker cap (default from ${THREADS_ENV}, else 1)")
    p.add_argument("-v", "--verbose", action="count", default=0)


def _add_feature_flags(p):
    p.add_argument("--tolerance", type=float, default=0.5, help="fragment tolerance, Da")
    p.add_argument("--bins", type=_positive_int, default=4000, help="fixed-length bin count")
    p.add_argument("--bin-width", type=float, default=0.5, help="fixed-length bin width, Da")
    p.add_argument("--masses", help="key = value residue/proton/water mass overrides")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="psmgp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write synthetic learning and evaluation sets")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--n-learn", type=int, default=1000)
    p.add_argument("--n-eval", type=int, default=120)
    p.add_argument("--candidates", type=_positive_int, default=5)
    p.add_argument("--min-length", type=int, default=7)
    p.add_argument("--max-length", type=int, default=12)
    p.add_argument("--max-precursor", type=float, default=1150.0)
    p.add_argument("--charge", type=_positive_int, default=2)
    p.add_argument("--noise-peaks", type=int, default=10)
    p.add_argument("--dropout", type=_rate, default=0.15)
    p.add_argument("--jitter", type=float, default=0.05, help="m/z jitter sd, Da")
    p.add_argument("--intensity-spread", type=_rate, default=0.8)
    p.add_argument("--planted", default=DEFAULT_PLANTED, help="target expression (s-expression)")
    p.add_argument("--target-noise", type=float, default=1.0)
    _add_common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("features", help="extract the 11 features for every candidate PSM")
    p.add_argument("--mgf", required=True)
    p.add_argument("--candidates", required=True, help="candidate TSV")
    p.add_argument("--targets", help="optional target-score TSV (spectrum_id, peptide, target)")
    p.add_argument("--out", required=True)
    _add_feature_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("train", help="evolve a scoring function on a feature table")
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True, help="model file")
    p.add_argument("--pop-size", type=_positive_int, default=300)
    p.add_argument("--generations", type=int, default=100)
    p.add_argument("--cxpb", type=_rate, default=0.9)
    p.add_argument("--mutpb", type=_rate, default=0.1)
    p.add_argument("--tournament", type=_positive_int, default=5)
    p.add_argument("--elitism", type=int, default=1)
    p.add_argument("--init-min-depth", type=int, default=2)
    p.add_argument("--init-max-depth", type=int, default=6)
    p.add_argument("--max-depth", type=int, default=17)
    p.add_argument("--const-min", type=float, default=-1.0)
    p.add_argument("--const-max", type=float, default=1.0)
    p.add_argument("--train-fraction", type=_rate, default=0.7)
    p.add_argument("--runs", type=_positive_int, default=1,
                   help="independent runs (seeds seed..seed+runs-1); best train RSS is kept")
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("rescore", help="re-score and re-rank candidate PSMs with a model")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True, help="ranked TSV")
    _add_common(p)
    p.set_defaults(func=cmd_rescore)

    p = sub.add_parser("evaluate", help="false-positive rate before and after re-ranking")
    p.add_argument("--ranked", required=True)
    p.add_argument("--out", required=True, help="JSON report")
    p.add_argument("--table", help="also write the text table here")
    _add_common(p)
    p.set_defaults(func=cmd_evaluate)
    return parser


def _apply_config(parser, argv):
    """Re-parse with defaults taken from ``--config`` when one is given."""
    args = parser.parse_args(argv)
    if not getattr(args, "config", None):
        return args
    values = read_key_values(_need(args.config))
    subparser = parser._subparsers._group_actions[0].choices[args.command]
    actions = {a.dest: a for a in subparser._actions}
    defaults = {}
    for key, raw in values.items():
        dest = key.replace("-", "_")
        if dest not in actions or dest in ("config", "help"):
            raise ValidationError(f"{args.config}: unknown option {key!r} for {args.command}")
        action = actions[dest]
        try:
            defaults[dest] = action.type(raw) if action.type else raw
        except (ValueError, argparse.ArgumentTypeError) as e:
            raise ValidationError(f"{args.config}: bad value for {key}: {e}") from None
    subparser.set_defaults(**defaults)
    return parser.parse_args(argv)


# --- subcommands ---------------------------------------------------------------

def cmd_synth(args) -> int:
    common = dict(peptide_length_range=(args.min_length, args.max_length), charge=args.charge,
                  max_precursor=args.max_precursor, noise_peaks_per_spectrum=args.noise_peaks,
                  peak_dropout_rate=args.dropout, mz_jitter_sd=args.jitter,
                  intensity_spread=args.intensity_spread, planted=args.planted,
                  target_noise_sd=args.target_noise)
    learn_seed, eval_seed = np.random.SeedSequence(args.seed).spawn(2)
    learn = SynthSpec(n_spectra=args.n_learn, n_candidates=1, seed=args.seed, **common)
    evals = SynthSpec(n_spectra=args.n_eval, n_candidates=args.candidates, seed=args.seed, **common)
    for spec, ss, prefix in ((learn, learn_seed, "learn"), (evals, eval_seed, "eval")):
        ds = generate_dataset(spec, np.random.default_rng(ss), prefix=prefix)
        paths = write_dataset(ds, args.out_dir, prefix)
        logger.info("wrote %d spectra to %s", spec.n_spectra, paths["mgf"])
    return 0


def _read_targets(path) -> dict[tuple[str, str], float]:
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter="\t")
        header = next(reader, None)
        if header is None or tuple(header) != TARGET_HEADER:
            raise ParseError(f"expected header {' '.join(TARGET_HEADER)!r}", line=1, source=str(path))
        for lineno, rec in enumerate(reader, 2):
            if not rec:
                continue
            try:
                out[(rec[0], rec[1])] = float(rec[2])
            except (ValueError, IndexError):
                raise ParseError("bad target row", line=lineno, source=str(path)) from None
    return out


def cmd_features(args) -> int:
    masses = _masses(args.masses)
    cfg = FeatureConfig(tolerance=args.tolerance, n_bins=args.bins, bin_width=args.bin_width)
    spectra = {s.id: s for s in read_mgf(_need(args.mgf), masses)}
    sets = read_candidates(_need(args.candidates))
    targets = _read_targets(_need(args.targets)) if args.targets else {}
    pairs, meta = [], []
    for cs in sets:
        if cs.spectrum_id not in spectra:
            raise ValidationError(f"candidate spectrum {cs.spectrum_id!r} not in {args.mgf}")
        for c in cs.candidates:
            pairs.append((spectra[cs.spectrum_id], c.peptide))
            meta.append(c)
    vectors = extract_many(pairs, cfg, masses, args.threads)
    rows = []
    for c, fv in zip(meta, vectors):
        target = targets.get((c.spectrum_id, c.peptide.sequence))
        rows.append(FeatureRow(make_psm_id(c.spectrum_id, c.rank), c.peptide.sequence,
                               fv.with_target(target), c.is_correct))
    write_feature_table(rows, args.out)
    logger.info("wrote %d PSM feature rows to %s", len(rows), args.out)
    return 0


def split_rows(rows, fraction, seed):
    """Deterministic shuffle then split into (train, test)."""
    order = np.random.default_rng(seed).permutation(len(rows))
    n_train = int(round(fraction * len(rows)))
    return [rows[i] for i in order[:n_train]], [rows[i] for i in order[n_train:]]


def cmd_train(args) -> int:
    rows = [r for r in read_feature_table(_need(args.features)) if r.features.target is not None]
    if not rows:
        raise ValidationError(f"{args.features}: no rows carry a target score")
    train, test = split_rows(rows, args.train_fraction, args.seed)
    if not train:
        raise ValidationError("training split is empty")
    train_fv = [r.features for r in train]
    best, run_rss = None, []
    for run in range(args.runs):
        cfg = GPConfig(population_size=args.pop_size, generations=args.generations,
                       crossover_rate=args.cxpb, mutation_rate=args.mutpb,
                       tournament_size=args.tournament, elitism=args.elitism,
                       init_min_depth=args.init_min_depth, init_max_depth=args.init_max_depth,
                       max_depth=args.max_depth, constant_range=(args.const_min, args.const_max),
                       seed=args.seed + run)
        model = evolve(train_fv, cfg, random.Random(cfg.seed), threads=args.threads)
        run_rss.append(model.train_rss)
        logger.info("run %d (seed %d): train RSS %.6g", run, cfg.seed, model.train_rss)
        if best is None or model.train_rss < best.train_rss:
            best = model
    if test:
        best.test_rss = holdout_rss(best, [r.features for r in test])
    extra = {"split_seed": args.seed, "train_fraction": args.train_fraction,
             "n_train": len(train), "n_test": len(test), "run_train_rss": tuple(run_rss)}
    write_model(best, args.out, extra)
    logger.info("best train RSS %.6g, test RSS %s", best.train_rss, best.test_rss)
    print(f"train_rss\t{best.train_rss:.6g}")
    print(f"test_rss\t{'NA' if best.test_rss is None else format(best.test_rss, '.6g')}")
    print(f"model\t{best.tree.to_sexpr()}")
    return 0


def cmd_rescore(args) -> int:
    model = read_model(_need(args.model))
    sets = sets_from_feature_rows(read_feature_table(_need(args.features)))
    ranked = rescore_all(model, sets, args.threads)
    write_ranked(ranked, args.out)
    logger.info("re-ranked %d spectra, %d tied at top", len(ranked), sum(cs.tied for cs in ranked))
    return 0


def cmd_evaluate(args) -> int:
    sets = read_ranked(_need(args.ranked))
    before, after, delta = evaluate_ranked(sets)
    Path(args.out).write_text(report_json(before, after, delta), encoding="utf-8")
    table = report_table(before, after, delta)
    if args.table:
        Path(args.table).write_text(table, encoding="utf-8")
    sys.stdout.write(table)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                            format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except FileNotFoundError as e:
        print(f"psmgp: {e}", file=sys.stderr)
        return EXIT_FILE_NOT_FOUND
    except PsmGpError as e:
        print(f"psmgp: {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
