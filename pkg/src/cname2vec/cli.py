"""Command-line pipeline: ingest, fingerprint, mine, train, index, match, eval, export-vectors.

Every command writes a JSON manifest next to its main output recording
inputs, parameters, seed, counts and wall time.  Exit status is 0 on
success, 1 on usage errors and 2 on data errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

from . import __version__, baselines, evalharness, miner, synthetic
from .corpus import GroundTruthError, InvalidNameError, load_ground_truth, load_job_ads, normalize_name
from .embedder import Dims, ModelParams, TrainConfig, TrainingError, encode, encode_many, train
from .fingerprint import WinnowParams, fingerprint_job
from .index import VectorIndex, build_index, query

log = logging.getLogger("cname2vec")

SEED_ENV = "CN2V_SEED"
EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class DataError(Exception):
    pass


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_help(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


# --------------------------------------------------------------------------
# helpers


def _manifest(path: Path, command: str, args: argparse.Namespace, started: float, **extra) -> None:
    params = {k: v for k, v in vars(args).items() if k not in ("func", "config", "verbose")}
    data = {
        "command": command,
        "version": __version__,
        "params": {k: (str(v) if isinstance(v, Path) else v) for k, v in params.items()},
        "seed": getattr(args, "seed", None),
        "wall_time_s": round(time.perf_counter() - started, 3),
        "created_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        **extra,
    }
    path.write_text(json.dumps(data, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")


def _manifest_path(out: Path) -> Path:
    return out.with_name(out.name + ".manifest.json")


def _require(path: Path | None, what: str) -> Path:
    if path is None:
        raise UsageError(f"missing required {what}")
    if not Path(path).exists():
        raise DataError(f"{what} not found: {path}")
    return Path(path)


def _winnow_params(args) -> WinnowParams:
    try:
        return WinnowParams(args.kgram_len, args.window_len, args.base, args.modulo)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _read_names(args):
    if args.gt is not None:
        return load_ground_truth(_require(args.gt, "ground truth")).canonicals
    if args.names is not None:
        lines = _require(args.names, "names file").read_text(encoding="utf-8").splitlines()
        out, seen = [], set()
        for line in lines:
            if line.strip():
                n = normalize_name(line)
                if n.key not in seen:
                    seen.add(n.key)
                    out.append(n)
        return out
    raise UsageError("one of --gt or --names is required")


def _load_model(path) -> ModelParams:
    try:
        return ModelParams.load(_require(path, "model"))
    except (ValueError, OSError) as exc:
        raise DataError(f"cannot load model {path}: {exc}") from exc


# --------------------------------------------------------------------------
# commands


def cmd_ingest(args) -> int:
    started = time.perf_counter()
    reader = load_job_ads(_require(args.input, "corpus"))
    names = set()
    out = Path(args.out) if args.out else None
    fh = open(out, "w", encoding="utf-8", newline="\n") if out else None
    try:
        for ad in reader:
            names.add(ad.company.key)
            if fh:
                fh.write(ad.to_json() + "\n")
    finally:
        if fh:
            fh.close()
    counts = {"ads": reader.read, "skipped": reader.skipped, "distinct_names": len(names)}
    print("\t".join(f"{k}={v}" for k, v in counts.items()))
    if out:
        _manifest(_manifest_path(out), "ingest", args, started, counts=counts)
    return EXIT_OK


def cmd_fingerprint(args) -> int:
    started = time.perf_counter()
    p = _winnow_params(args)
    reader = load_job_ads(_require(args.input, "corpus"))
    out = Path(args.out)
    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        for ad in reader:
            name = ad.company
            fh.write(f"{fingerprint_job(ad.description, p)}\t{name.key}\t{name.display}\n")
    _manifest(_manifest_path(out), "fingerprint", args, started,
              counts={"ads": reader.read, "skipped": reader.skipped})
    return EXIT_OK


def _read_fingerprints(path: Path):
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 3:
                raise DataError(f"{path}:{lineno}: expected 3 tab-separated fields")
            fp, _key, display = parts
            records.append((fp, normalize_name(display)))
    return records


def cmd_mine(args) -> int:
    started = time.perf_counter()
    records = _read_fingerprints(_require(args.input, "fingerprint file"))
    filters = [] if args.no_filter else [s.strip().lower() for s in args.filters.split(",") if s.strip()]
    before = miner.corpus_stats(records)
    after = miner.corpus_stats(records, filters)
    groups = miner.group_by_fingerprint(records)
    if filters:
        groups = [miner.filter_agency_names(g, filters) for g in groups]
    pairs = miner.make_pairs(groups)
    removed: set[str] = set()
    if args.gt is not None:
        gt = load_ground_truth(_require(args.gt, "ground truth"))
        pairs, removed = miner.exclude_eval_overlap(pairs, gt)
    try:
        ds = miner.split(pairs, args.seed, by=args.split_by)
    except miner.InsufficientDataError as exc:
        raise DataError(str(exc)) from exc

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    miner.write_pairs(out / "pairs.tsv", pairs)
    miner.write_pairs(out / "train.pairs", ds.train)
    miner.write_pairs(out / "test.pairs", ds.test)
    counts = {
        "unfiltered": vars(before),
        "filtered": vars(after),
        "pairs": len(pairs),
        "eval_overlap_names_removed": len(removed),
        "train": len(ds.train),
        "test": len(ds.test),
    }
    _manifest(out / "manifest.json", "mine", args, started, counts=counts, filters=filters)
    print(json.dumps(counts, sort_keys=True))
    return EXIT_OK


def _dims(args) -> Dims:
    if args.paper_dims:
        return Dims(args.buckets, 400, 400, 400)
    return Dims(args.buckets, args.embed_dim, args.enc_dim, args.out_dim)


def cmd_train(args) -> int:
    started = time.perf_counter()
    pairs = miner.read_pairs(_require(args.pairs, "pairs file"))
    try:
        config = TrainConfig(
            learning_rate=args.learning_rate, batch_size=args.batch_size, epochs=args.epochs,
            margin=args.margin, negatives=args.negatives, seed=args.seed,
        )
        dims = _dims(args)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    try:
        params, trace = train(pairs, config, dims)
    except TrainingError as exc:
        raise DataError(str(exc)) from exc
    out = Path(args.out)
    params.save(out)
    loss_tsv = out.with_name(out.name + ".loss.tsv")
    loss_tsv.write_text("epoch\tloss\n" + "".join(f"{i + 1}\t{v:.10f}\n" for i, v in enumerate(trace)))
    if not args.no_figures:
        from .plotting import plot_loss_curve

        plot_loss_curve(trace, out.with_name(out.name + ".loss.png"))
    _manifest(_manifest_path(out), "train", args, started,
              counts={"pairs": len(pairs)}, dims=vars(dims), loss_trace=trace)
    return EXIT_OK


def cmd_index(args) -> int:
    started = time.perf_counter()
    params = _load_model(args.model)
    names = _read_names(args)
    try:
        index = build_index(params, names)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    out = Path(args.out)
    index.save(out)
    _manifest(_manifest_path(out), "index", args, started,
              counts={"canonicals": len(index)}, model=str(Path(args.model).resolve()))
    return EXIT_OK


def cmd_match(args) -> int:
    index_path = _require(args.index, "index")
    try:
        index = VectorIndex.load(index_path)
    except (ValueError, OSError) as exc:
        raise DataError(f"cannot load index {index_path}: {exc}") from exc
    q = normalize_name(args.name)
    if args.metric == "embed":
        model_path = args.model
        if model_path is None:
            mf = _manifest_path(index_path)
            if mf.exists():
                model_path = json.loads(mf.read_text(encoding="utf-8")).get("model")
        if model_path is None:
            raise UsageError("--model is required (index has no manifest naming its model)")
        params = _load_model(model_path)
        ranked = query(index, encode(params, q), args.k)
    else:
        ranked = [(n, 1.0 - s) for n, s in baselines.baseline_rank(q, index.names, args.metric, args.k, args.seed)]
    for rank, (name, dist) in enumerate(ranked, 1):
        print(f"{q.display}\t{rank}\t{name.display}\t{dist:.6f}")
    return EXIT_OK


def cmd_eval(args) -> int:
    started = time.perf_counter()
    gt = load_ground_truth(_require(args.gt, "ground truth"))
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    unknown = [m for m in methods if m not in evalharness.METHODS]
    if unknown:
        raise UsageError(f"unknown method(s): {', '.join(unknown)}")
    model = _load_model(args.model) if "embed" in methods else None
    ks = sorted({int(k) for k in args.ks.split(",")})
    try:
        report = evalharness.compare(methods, gt, model, ks=ks, seed=args.seed, folds=args.folds)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    out = Path(args.out)
    summary = out.with_suffix(".tsv")
    report.write(out, summary)
    if not args.no_figures:
        from .plotting import plot_avg_success

        plot_avg_success(report, out.with_suffix(".png"))
    _manifest(_manifest_path(out), "eval", args, started,
              counts={"canonicals": len(gt.entries), "synonyms": len(gt.items())})
    print("\n".join(report.summary_lines()))
    return EXIT_OK


def cmd_export_vectors(args) -> int:
    started = time.perf_counter()
    params = _load_model(args.model)
    names = _read_names(args)
    if not names:
        raise DataError("no names to export")
    try:
        vecs = encode_many(params, names)
    except ValueError as exc:
        raise DataError(f"cannot encode names: {exc}") from exc
    out = Path(args.out)
    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        for name, v in zip(names, vecs):
            fh.write(name.key + "\t" + "\t".join(repr(float(x)) for x in v) + "\n")
    _manifest(_manifest_path(out), "export-vectors", args, started, counts={"names": len(names)})
    return EXIT_OK


def cmd_synth(args) -> int:
    started = time.perf_counter()
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sc = synthetic.generate(n_companies=args.companies, n_ads=args.ads, seed=args.seed)
    sc.write(out / "ads.jsonl", out / "gt.json")
    _manifest(out / "synth.manifest.json", "synth", args, started,
              counts={"ads": len(sc.ads), "canonicals": len(sc.ground_truth.entries)})
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cname2vec", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("--config", type=Path, help="JSON config; flags override its values")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True
    seed = _default_seed()

    def add(name, func, help):
        p = sub.add_parser(name, help=help, description=help)
        p.set_defaults(func=func)
        p.add_argument("--seed", type=int, default=seed, help=f"random seed (env {SEED_ENV})")
        return p

    p = add("ingest", cmd_ingest, "validate a job-ad corpus and report counts")
    p.add_argument("--in", dest="input", type=Path)
    p.add_argument("--out", type=Path, help="write valid records here")

    p = add("fingerprint", cmd_fingerprint, "fingerprint every job ad")
    p.add_argument("--in", dest="input", type=Path)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--kgram-len", type=int, default=4)
    p.add_argument("--window-len", type=int, default=5)
    p.add_argument("--base", type=int, default=10)
    p.add_argument("--modulo", type=int, default=1000)

    p = add("mine", cmd_mine, "mine synonym pairs and split them 9:1")
    p.add_argument("--in", dest="input", type=Path, help="fingerprint file")
    p.add_argument("--out-dir", type=Path, required=True)
    p.add_argument("--gt", type=Path, help="ground truth whose names are excluded")
    p.add_argument("--filters", default=",".join(miner.AGENCY_SUBSTRINGS))
    p.add_argument("--no-filter", action="store_true")
    p.add_argument("--split-by", choices=("pairs", "names"), default="pairs")

    p = add("train", cmd_train, "train the name encoder")
    d = TrainConfig()
    p.add_argument("--pairs", type=Path)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--epochs", type=int, default=d.epochs)
    p.add_argument("--batch-size", type=int, default=d.batch_size)
    p.add_argument("--learning-rate", type=float, default=d.learning_rate)
    p.add_argument("--margin", type=float, default=d.margin)
    p.add_argument("--negatives", type=int, default=d.negatives)
    p.add_argument("--buckets", type=int, default=Dims().buckets)
    p.add_argument("--embed-dim", type=int, default=Dims().embed_dim)
    p.add_argument("--enc-dim", type=int, default=Dims().enc_dim)
    p.add_argument("--out-dim", type=int, default=Dims().out_dim)
    p.add_argument("--paper-dims", action="store_true", help="use 400-dim embeddings and encoder")
    p.add_argument("--no-figures", action="store_true")

    p = add("index", cmd_index, "encode canonical names into a vector index")
    p.add_argument("--model", type=Path)
    p.add_argument("--gt", type=Path)
    p.add_argument("--names", type=Path, help="one canonical name per line")
    p.add_argument("--out", type=Path, required=True)

    p = add("match", cmd_match, "rank canonical names for one query name")
    p.add_argument("--name", required=True)
    p.add_argument("--index", type=Path)
    p.add_argument("--model", type=Path)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--metric", choices=("embed",) + baselines.METRICS, default="embed")

    p = add("eval", cmd_eval, "cross-validated AvgSuccess@k comparison")
    p.add_argument("--gt", type=Path)
    p.add_argument("--model", type=Path)
    p.add_argument("--methods", default="random,edit,ratio,partial,embed")
    p.add_argument("--ks", default="1,2,3")
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--no-figures", action="store_true")

    p = add("export-vectors", cmd_export_vectors, "write name vectors as TSV")
    p.add_argument("--model", type=Path)
    p.add_argument("--gt", type=Path)
    p.add_argument("--names", type=Path)
    p.add_argument("--out", type=Path, required=True)

    p = add("synth", cmd_synth, "generate a synthetic corpus and ground truth")
    p.add_argument("--out-dir", type=Path, required=True)
    p.add_argument("--companies", type=int, default=50)
    p.add_argument("--ads", type=int, default=200)

    return parser


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config is not None:
        try:
            cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise DataError(f"cannot read config {args.config}: {exc}") from exc
        # top-level scalars apply to every command; a section named after
        # the command overrides them
        values = {k: v for k, v in cfg.items() if not isinstance(v, dict)}
        values.update(cfg.get(args.command, {}))
        sp = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
        sp.choices[args.command].set_defaults(**{k.replace("-", "_"): v for k, v in values.items()})
        args = parser.parse_args(argv)
    return args


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        args = parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except (DataError, GroundTruthError, InvalidNameError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


run_command = main

if __name__ == "__main__":
    sys.exit(main())
