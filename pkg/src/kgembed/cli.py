"""Command-line frontend: ``prepare``, ``train``, ``eval`` and ``analyze``.

Exit codes: 0 ok, 2 usage or input error, 3 numerical failure,
4 checkpoint/store incompatibility.
"""

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np
from scipy.special import expit

from . import analysis
from .data import (
    add_reciprocals,
    build_filter_index,
    build_store,
    drop_relations,
    filter_relations_by_khs,
    load_triples,
    resplit_random,
)
from .evaluation import classify, evaluate_ranking
from .io import FormatError, load_checkpoint, load_store, read_config, save_checkpoint, save_store
from .models import MODELS, get_model
from .training import NumericalError, OptimizerState, TrainConfig, default_config, train_epoch

log = logging.getLogger("kgembed")

EXIT_USAGE, EXIT_NUMERIC, EXIT_INCOMPATIBLE = 2, 3, 4
METRICS = ("khs", "paths", "symmetry", "norms", "spectrum", "project")
CKPT_METRICS = {"symmetry", "norms", "spectrum", "project"}

# key -> parser for every RunConfig entry
CONFIG_KEYS = {
    "dim": int,
    "rel_dim": int,
    "n_filters": int,
    "filter_len": int,
    "curvature": float,
    "init_scale": float,
    "regime": str,
    "k": int,
    "lr": float,
    "lr_decay": float,
    "epochs": int,
    "batch_size": int,
    "label_smoothing": float,
    "optimizer": str,
    "seed": int,
    "threads": int,
    "eval_every": int,
    "dropout_input": float,
    "dropout_relation": float,
    "dropout_hidden": float,
    "dropout_feature": float,
}
SETTING_KEYS = ("dim", "rel_dim", "n_filters", "filter_len", "curvature")
DROPOUT_PREFIX = "dropout_"


class CLIError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _existing(path):
    path = Path(path)
    if not path.is_file():
        raise CLIError(EXIT_USAGE, f"file not found: {path}")
    return path


def _data_path(value):
    path = Path(value)
    root = os.environ.get("KGE_DATA_DIR")
    if not path.exists() and root and not path.is_absolute():
        path = Path(root) / path
    return _existing(path)


def _write_csv(path, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        csv.writer(fh).writerows(rows)


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# ---------------------------------------------------------------- prepare


def _split_paths(args):
    if args.dataset:
        root = os.environ.get("KGE_DATA_DIR")
        if not root:
            raise CLIError(EXIT_USAGE, "--dataset needs KGE_DATA_DIR to be set")
        return [_existing(Path(root) / args.dataset / f"{name}.txt") for name in ("train", "valid", "test")]
    given = (args.train, args.valid, args.test)
    if not all(given):
        raise CLIError(EXIT_USAGE, "give --train, --valid and --test, or --dataset")
    return [_data_path(p) for p in given]


def cmd_prepare(args):
    paths = _split_paths(args)
    try:
        raw = [load_triples(p) for p in paths]
        if args.exclude_relations:
            names = [
                line.strip()
                for line in _existing(args.exclude_relations).read_text(encoding="utf-8").splitlines()
                if line.strip()
            ]
            raw = [drop_relations(split, names) for split in raw]
        store = build_store(*raw)
        rng = np.random.Generator(np.random.Philox(args.seed))
        if args.resplit:
            store = resplit_random(store, args.resplit[0], args.resplit[1], rng)
        if args.khs_filter:
            threshold, keep_h, keep_o = args.khs_filter
            table = analysis.khs_table(store)
            khs = [table[name]["khs"] for name in store.relations]
            store = filter_relations_by_khs(store, khs, float(threshold), int(keep_h), int(keep_o), rng)
    except ValueError as exc:
        raise CLIError(EXIT_USAGE, str(exc)) from exc
    save_store(args.out, store)
    st = store.stats()
    print(f"entities: {st['entities']}, relations: {st['relations']}")
    print(f"train: {st['train']}, valid: {st['valid']}, test: {st['test']}")
    return 0


# ------------------------------------------------------------------ train


def resolve_run_config(kind, config_file=None, overrides=None):
    """Merge shipped defaults, a config file and flag overrides.

    Returns ``(model_settings, TrainConfig, extras)``.
    """
    settings, train_cfg = default_config(kind)
    flat = dict(settings)
    flat.update({k: v for k, v in train_cfg.to_dict().items() if k != "dropout"})
    for site, rate in train_cfg.dropout.items():
        flat[DROPOUT_PREFIX + site] = rate
    flat.setdefault("eval_every", 10)
    flat.setdefault("init_scale", 1.0)
    given = {}
    if config_file:
        try:
            given.update(read_config(_existing(config_file)))
        except FormatError as exc:
            raise CLIError(EXIT_USAGE, str(exc)) from exc
    given.update({k: v for k, v in (overrides or {}).items() if v is not None})
    unknown = sorted(set(given) - set(CONFIG_KEYS))
    if unknown:
        raise CLIError(
            EXIT_USAGE,
            f"unknown config keys {unknown}; valid keys: {', '.join(sorted(CONFIG_KEYS))}",
        )
    for key, value in given.items():
        try:
            flat[key] = CONFIG_KEYS[key](value)
        except ValueError as exc:
            raise CLIError(EXIT_USAGE, f"bad value for {key}: {value!r}") from exc
    model = get_model(kind)
    settings = {k: flat[k] for k in SETTING_KEYS if k in flat and k in model.default_settings()}
    dropout = {
        k[len(DROPOUT_PREFIX):]: v
        for k, v in flat.items()
        if k.startswith(DROPOUT_PREFIX) and k[len(DROPOUT_PREFIX):] in model.dropout_sites and v > 0
    }
    try:
        cfg = TrainConfig(
            regime=flat["regime"], k=flat["k"], lr=flat["lr"], lr_decay=flat["lr_decay"],
            epochs=flat["epochs"], batch_size=flat["batch_size"],
            label_smoothing=flat["label_smoothing"], dropout=dropout,
            optimizer=flat["optimizer"], seed=flat["seed"], threads=flat["threads"],
        )
    except ValueError as exc:
        raise CLIError(EXIT_USAGE, str(exc)) from exc
    extras = {"eval_every": flat["eval_every"], "init_scale": flat["init_scale"]}
    return settings, cfg, extras


def _best_path(out):
    out = Path(out)
    return out.with_name(out.stem + ".best" + out.suffix)


def cmd_train(args):
    store = add_reciprocals(_load_store(args.data))
    overrides = {k: getattr(args, k) for k in CONFIG_KEYS}
    settings, cfg, extras = resolve_run_config(args.model, args.config, overrides)
    model = get_model(args.model)
    rng = np.random.Generator(np.random.Philox(cfg.seed))
    params = model.init(store.n_e, store.n_r, rng, scale=extras["init_scale"], **settings)
    state = OptimizerState(lr=cfg.lr)
    filt = build_filter_index(store)
    log_fh = open(args.log, "w", encoding="utf-8") if args.log else None

    def emit(record):
        line = json.dumps(record, sort_keys=True)
        print(line, flush=True)
        if log_fh:
            log_fh.write(line + "\n")

    best = -1.0
    last_eval = None
    try:
        for epoch in range(1, cfg.epochs + 1):
            try:
                loss = train_epoch(model, params, store, cfg, state, rng)
            except NumericalError as exc:
                emit({"epoch": epoch, "error": str(exc)})
                raise CLIError(EXIT_NUMERIC, str(exc)) from exc
            record = {"epoch": epoch, "loss": loss, "lr": state.lr}
            every = extras["eval_every"]
            if len(store.valid) and every > 0 and (epoch % every == 0 or epoch == cfg.epochs):
                report = evaluate_ranking(model, params, store, filt, "valid", threads=cfg.threads)
                last_eval = {f"valid_{k}": v for k, v in report.overall.items()}
                record.update(last_eval)
                if report.mrr > best:
                    best = report.mrr
                    save_checkpoint(_best_path(args.out), params, reciprocal=True,
                                    extra={"epoch": epoch, "valid_mrr": best})
            emit(record)
        save_checkpoint(args.out, params, reciprocal=True, extra={"epoch": cfg.epochs})
        final = {"event": "final", "epochs": cfg.epochs}
        if last_eval:
            final.update(last_eval)
        emit(final)
    finally:
        if log_fh:
            log_fh.close()
    return 0


# ------------------------------------------------------------------- eval


def _load_store(path):
    try:
        return load_store(_existing(path))
    except FormatError as exc:
        raise CLIError(EXIT_USAGE, str(exc)) from exc


def _load_pair(data, ckpt):
    store = _load_store(data)
    try:
        params, header = load_checkpoint(_existing(ckpt))
    except FormatError as exc:
        raise CLIError(EXIT_USAGE, str(exc)) from exc
    if header.get("reciprocal") and not store.reciprocal:
        store = add_reciprocals(store)
    if (params.n_e, params.n_r) != (store.n_e, store.n_r):
        raise CLIError(
            EXIT_INCOMPATIBLE,
            f"checkpoint dims (n_e={params.n_e}, n_r={params.n_r}) do not match "
            f"store dims (n_e={store.n_e}, n_r={store.n_r})",
        )
    return store, params


def cmd_eval(args):
    store, params = _load_pair(args.data, args.ckpt)
    triples = store.split(args.split)
    if len(triples) == 0:
        raise CLIError(EXIT_INCOMPATIBLE, f"split {args.split!r} is empty")
    model = get_model(params.kind)
    filt = build_filter_index(store)
    report = evaluate_ranking(model, params, store, filt, args.split,
                              filtered=not args.raw, threads=args.threads)
    out = {"ranking": report.to_json(), "model": params.kind}
    out_path = Path(args.out)
    _write_csv(out_path.with_suffix(".csv"), report.csv_rows())
    if args.classify:
        cls = classify(model, params, store, filt)
        out["classification"] = cls.to_json()
        _write_csv(out_path.with_suffix(".classify.csv"), cls.csv_rows())
    _write_json(out_path, out)
    m = report.overall
    print(f"MR {m['mr']:.2f}  MRR {m['mrr']:.4f}  H@1 {m['hits@1']:.4f}  "
          f"H@3 {m['hits@3']:.4f}  H@10 {m['hits@10']:.4f}")
    return 0


# ---------------------------------------------------------------- analyze


def _parse_metrics(text):
    metrics = [m.strip() for m in text.split(",") if m.strip()]
    bad = [m for m in metrics if m not in METRICS]
    if bad:
        raise CLIError(EXIT_USAGE, f"unknown metrics {bad}; valid metrics: {', '.join(METRICS)}")
    return metrics


def cmd_analyze(args):
    metrics = _parse_metrics(args.metrics)
    needs = CKPT_METRICS.intersection(metrics)
    if needs and not args.ckpt:
        raise CLIError(EXIT_USAGE, f"metrics {sorted(needs)} require --ckpt")
    if args.ckpt:
        store, params = _load_pair(args.data, args.ckpt)
    else:
        store, params = _load_store(args.data), None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    names = store.relations[: store.n_r_base]

    if "khs" in metrics or "paths" in metrics:
        table = analysis.khs_table(store, tuple(args.splits.split(",")))
        _write_json(out / "khs.json", table)
        rows = [["relation", "khs", "max_path", "avg_path"]]
        rows += [[n, f"{t['khs']:.4f}", t["max_path"], f"{t['avg_path']:.4f}"] for n, t in table.items()]
        _write_csv(out / "khs.csv", rows)

    if "symmetry" in metrics:
        try:
            mats = analysis.relation_matrices(params)
        except ValueError as exc:
            raise CLIError(EXIT_USAGE, str(exc)) from exc
        scores = {names[r]: analysis.symmetry_score(mats[r]) for r in range(len(names))}
        _write_json(out / "symmetry.json", scores)
        _write_csv(out / "symmetry.csv", [["relation", "symmetry"]] + [
            [n, "undefined" if v is None else f"{v:.6f}"] for n, v in scores.items()
        ])

    if "norms" in metrics:
        try:
            norms = analysis.vector_norms(params)
        except ValueError as exc:
            raise CLIError(EXIT_USAGE, str(exc)) from exc
        order = sorted(range(len(names)), key=lambda r: -norms[r])
        _write_json(out / "norms.json", {names[r]: float(norms[r]) for r in order})
        _write_csv(out / "norms.csv", [["relation", "norm"]] + [[names[r], repr(float(norms[r]))] for r in order])

    if "spectrum" in metrics:
        try:
            mags, degenerate = analysis.spectrum_diagonal(params)
        except ValueError as exc:
            raise CLIError(EXIT_USAGE, str(exc)) from exc
        _write_json(out / "spectrum.json", {
            names[r]: {"magnitudes": mags[r].tolist(), "degenerate": bool(degenerate[r])}
            for r in range(len(names))
        })
        _write_csv(out / "spectrum.csv", [["relation", "rank", "magnitude"]] + [
            [names[r], i + 1, repr(float(v))] for r in range(len(names)) for i, v in enumerate(mags[r])
        ])

    if "project" in metrics:
        _project(args, store, params, out)
    return 0


def _project(args, store, params, out):
    if not args.subject or not args.relation:
        raise CLIError(EXIT_USAGE, "project requires --subject and --relation")
    ent, rel = store.entity_ids, store.relation_ids
    if args.subject not in ent:
        raise CLIError(EXIT_USAGE, f"unknown entity {args.subject!r}")
    if args.relation not in rel:
        raise CLIError(EXIT_USAGE, f"unknown relation {args.relation!r}")
    s, r = ent[args.subject], rel[args.relation]
    model = get_model(params.kind)
    objects = np.arange(store.n_e)
    if hasattr(model, "transformed"):
        subj_vec, obj_vecs = model.transformed(params, s, r, objects)
        subj_vec = np.asarray(subj_vec).reshape(-1)
    else:
        subj_vec, obj_vecs = params["E"][s], params["E"][objects]
    xy = analysis.project_2d(subj_vec, obj_vecs)
    sx, sy = float(np.linalg.norm(subj_vec)), 0.0
    predicted = expit(model.score_all(params, [s], [r])[0]) > 0.5
    filt = build_filter_index(store)
    rows = [["label", "x", "y", "predicted", "actual"], [args.subject, repr(float(sx)), repr(float(sy)), "", ""]]
    for o in objects:
        rows.append([store.entities[o], repr(float(xy[o, 0])), repr(float(xy[o, 1])),
                     int(predicted[o]), int((s, r, o) in filt)])
    _write_csv(out / "project.csv", rows)


# ----------------------------------------------------------------- parser


def build_parser():
    parser = argparse.ArgumentParser(prog="kgembed", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="encode raw triple files into a prepared store")
    p.add_argument("--dataset", help="directory name under $KGE_DATA_DIR holding train/valid/test.txt")
    p.add_argument("--train")
    p.add_argument("--valid")
    p.add_argument("--test")
    p.add_argument("--exclude-relations", help="file with one relation name per line")
    p.add_argument("--resplit", nargs=2, type=int, metavar=("VALID_SIZE", "TEST_SIZE"))
    p.add_argument("--khs-filter", nargs=3, metavar=("THRESHOLD", "KEEP_HIER", "KEEP_OTHER"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="train a model and write checkpoints")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True, choices=sorted(MODELS))
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--log", help="also write the JSON log lines to this file")
    for key, typ in CONFIG_KEYS.items():
        flags = [f"--{key}"]
        if "_" in key:
            flags.append(f"--{key.replace('_', '-')}")
        p.add_argument(*flags, dest=key, type=typ, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="filtered ranking (and classification) reports")
    p.add_argument("--data", required=True)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--split", default="test", choices=("test", "valid"))
    p.add_argument("--classify", action="store_true")
    p.add_argument("--raw", action="store_true", help="unfiltered setting")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("analyze", help="relation-structure reports")
    p.add_argument("--data", required=True)
    p.add_argument("--ckpt")
    p.add_argument("--metrics", required=True, help=f"comma list of {','.join(METRICS)}")
    p.add_argument("--splits", default="train", help="splits forming the relation graphs")
    p.add_argument("--subject")
    p.add_argument("--relation")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_analyze)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CLIError as exc:
        print(f"kgembed {args.command}: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
