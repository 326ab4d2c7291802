"""Command-line entry point: simulate, preprocess, train, evaluate, online, report."""

from __future__ import annotations

import argparse
import logging
import os
import platform
import sys

import numpy as np

from . import __version__
from .actions import AttackType
from .experiment import (
    DEFAULT_SEEDS,
    METHODS,
    WindowArrays,
    check_method,
    emit_report,
    evaluate,
    load_report,
    run_online_experiment,
    table_rows,
)
from .forest import RandomForest
from .hmm import SupervisedHMM, BaumWelchHMM, HmmModel
from .io import (
    Dataset,
    SchemaError,
    config_hash,
    file_sha256,
    read_dataset,
    read_json,
    simulate_to_dataset,
    write_dataset,
    write_json,
)
from .lstm import LSTMTagger
from .preprocess import AttributeReducer, AttributeReport, Symbolizer
from .sim import SampleWindow, SimConfig, generate_dataset

log = logging.getLogger("seqids")

MANIFEST = "pipeline_manifest.json"
MODEL_SCHEMA = "seqids.model/1"


class CliError(Exception):
    pass


def _versions():
    import scipy
    import sklearn

    return {
        "seqids": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "scikit-learn": sklearn.__version__,
    }


def _record(out_dir, command, config, seeds, artifacts):
    """Add an entry to the pipeline manifest that lives next to the artifacts."""
    path = os.path.join(out_dir or ".", MANIFEST)
    manifest = read_json(path) if os.path.exists(path) else {"schema": "seqids.pipeline/1",
                                                              "steps": []}
    manifest["steps"] = [s for s in manifest["steps"] if s["command"] != command]
    manifest["steps"].append({
        "command": command,
        "config_hash": config_hash(config),
        "config": config,
        "seeds": list(seeds),
        "versions": _versions(),
        "artifacts": {os.path.basename(a): file_sha256(a) for a in artifacts},
    })
    write_json(path, manifest)
    return path


def _parent(path):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    return d


def _seed_list(text):
    """``10`` means seeds 0..9; ``3,5,8`` is an explicit list."""
    try:
        if "," in text:
            seeds = [int(s) for s in text.split(",") if s.strip()]
        else:
            seeds = list(range(int(text)))
    except ValueError:
        raise CliError(f"invalid seed specification {text!r}") from None
    if not seeds:
        raise CliError("seed list is empty")
    return seeds


def _methods(text):
    out = []
    for m in text.split(","):
        m = m.strip()
        try:
            out.append(check_method(m))
        except ValueError as exc:
            raise CliError(str(exc)) from None
    return out


def _top_ks(text):
    try:
        ks = [int(k) for k in str(text).split(",")]
    except ValueError:
        raise CliError(f"invalid --top-k {text!r}") from None
    if any(k < 1 for k in ks):
        raise CliError("--top-k must be positive")
    return ks


def cmd_simulate(args):
    config = SimConfig.load(args.config) if args.config else SimConfig()
    if args.seed is not None:
        config.seed = args.seed
    if args.episodes is not None:
        config.episodes_per_type = args.episodes
    config.validate()
    out_dir = _parent(args.out)
    dataset = simulate_to_dataset(config, generate_dataset(config))
    write_dataset(args.out, dataset)
    _record(out_dir, "simulate", config.to_dict(), [config.seed],
            [args.out, f"{args.out}.manifest.json"])
    log.info("wrote %d windows to %s", len(dataset), args.out)


def cmd_preprocess(args):
    dataset = read_dataset(args.inp, symbolized=False)
    X = dataset.observations()
    reducer = AttributeReducer(attribute_names=dataset.attribute_names, top_k=args.top_k,
                               random_state=args.seed).fit(X, dataset.actions())
    report = reducer.report_
    cols = reducer.selected_index_
    sym = Symbolizer(n_symbols=args.symbols, random_state=args.seed,
                     attribute_names=reducer.selected_).fit(X[..., cols])
    os.makedirs(args.out, exist_ok=True)
    rpath = os.path.join(args.out, "attribute_report.json")
    spath = os.path.join(args.out, "symbolizer.json")
    dpath = os.path.join(args.out, "symbolized.jsonl")
    write_json(rpath, report.to_dict())
    write_json(spath, sym.to_dict())
    symbols = sym.transform(X[..., cols])
    windows = [SampleWindow(w.episode_id, w.attack_type, w.t_rand, w.actions, s, w.t_start_local)
               for w, s in zip(dataset.windows, symbols)]
    meta = dict(dataset.meta or {})
    meta["selected_attributes"] = list(reducer.selected_)
    write_dataset(dpath, Dataset(windows, list(reducer.selected_), None, meta), symbolized=True)
    _record(args.out, "preprocess",
            {"input": file_sha256(args.inp), "top_k": args.top_k, "symbols": args.symbols},
            [args.seed], [rpath, spath, dpath])
    log.info("kept %d attributes, selected %s", len(report.kept_attributes), reducer.selected_)


def _load_preprocess(model_dir):
    if model_dir is None:
        raise CliError("numeric datasets need --preprocess <model-dir> from the preprocess step")
    report = AttributeReport.from_dict(read_json(os.path.join(model_dir, "attribute_report.json")))
    sym = Symbolizer.from_dict(read_json(os.path.join(model_dir, "symbolizer.json")))
    return report, sym


def _columns(dataset, names):
    col = {n: j for j, n in enumerate(dataset.attribute_names)}
    missing = [n for n in names if n not in col]
    if missing:
        raise SchemaError(f"dataset lacks selected attribute(s) {missing}")
    return [col[n] for n in names]


def _symbol_data(args, dataset):
    """Symbol sequences for HMM training, symbolizing numeric data if needed."""
    if _is_symbolized(args.inp):
        n_symbols = args.symbols
        return dataset.observations().astype(int), n_symbols, None
    _, sym = _load_preprocess(args.preprocess)
    X = dataset.observations()[..., _columns(dataset, sym.attribute_names)]
    return sym.transform(X), sym.n_symbols, sym.attribute_names


def _is_symbolized(path):
    return read_json(f"{path}.manifest.json").get("schema") == "seqids.symbolized/1"


def _per_type_rows(dataset):
    if all(w.attack_type is not None for w in dataset.windows):
        types = dataset.attack_types()
        return {t.name: np.flatnonzero(types == int(t)) for t in AttackType
                if (types == int(t)).any()}
    return {"all": np.arange(len(dataset))}


def cmd_train(args):
    method = _methods(args.method)[0]
    dataset = read_dataset(args.inp)
    if len(dataset) == 0:
        raise CliError(f"{args.inp}: dataset is empty")
    payload = {"schema": MODEL_SCHEMA, "method": method, "seed": args.seed}
    if method in ("hmm-sup", "hmm-unsup"):
        S, n_symbols, names = _symbol_data(args, dataset)
        if S.max() >= n_symbols:
            raise CliError(f"symbol {int(S.max())} out of range for {n_symbols} symbols")
        payload["attributes"] = names
        payload["models"], payload["mappings"] = {}, {}
        for name, rows in _per_type_rows(dataset).items():
            if method == "hmm-sup":
                est = SupervisedHMM(n_symbols=n_symbols).fit(S[rows], dataset.actions()[rows])
            else:
                est = BaumWelchHMM(n_symbols=n_symbols, random_state=args.seed).fit(S[rows])
                if dataset.has_labels:
                    pairs = rows[:100]
                    est.fit_mapping(S[pairs], dataset.actions()[pairs])
                    payload["mappings"][name] = est.mapping_.to_dict()
            payload["models"][name] = est.model_.to_dict()
    else:
        if _is_symbolized(args.inp):
            raise CliError(f"{method} trains on numeric observations, got a symbolized dataset")
        report, sym = _load_preprocess(args.preprocess)
        names = sym.attribute_names
        X = dataset.observations()[..., _columns(dataset, names)]
        A = dataset.actions()
        payload["attributes"] = list(names)
        if method == "lstm":
            payload["model"] = LSTMTagger(random_state=args.seed).fit(X, A).to_dict()
        else:
            forest = RandomForest(random_state=args.seed)
            forest.fit(X.reshape(-1, X.shape[-1]), A.ravel(), feature_names=list(names))
            payload["model"] = forest.to_dict()
    _parent(args.out)
    write_json(args.out, payload)
    _record(os.path.dirname(os.path.abspath(args.out)), f"train:{method}",
            {"input": file_sha256(args.inp), "method": method}, [args.seed], [args.out])
    log.info("trained %s on %d windows", method, len(dataset))


def load_model(path):
    """Reconstruct estimators written by ``train``."""
    d = read_json(path)
    if d.get("schema") != MODEL_SCHEMA:
        raise SchemaError(f"{path}: not a model file")
    if d["method"] in ("hmm-sup", "hmm-unsup"):
        return {k: HmmModel.from_dict(v) for k, v in d["models"].items()}
    if d["method"] == "lstm":
        return LSTMTagger.from_dict(d["model"])
    return RandomForest.from_dict(d["model"])


def _arrays(path):
    dataset = read_dataset(path, symbolized=False)
    return WindowArrays.from_dataset(dataset), dataset


def cmd_evaluate(args):
    data, dataset = _arrays(args.dataset)
    methods = _methods(args.methods)
    seeds = _seed_list(args.seeds)
    online = [m for m in ("hmm-sup", "rfc") if m in methods] if not args.no_online else []
    top_ks = _top_ks(args.top_k)
    reports, curves = evaluate(data, methods, top_ks, seeds, online_methods=online,
                               online_top_k=top_ks[0])
    paths = emit_report(reports, args.out, curves)
    _record(args.out, "evaluate",
            {"dataset": file_sha256(args.dataset), "methods": methods, "top_k": top_ks,
             "sim_config": (dataset.meta or {}).get("sim_config")}, seeds, paths)
    _print_table(reports)


def cmd_online(args):
    data, dataset = _arrays(args.dataset)
    seeds = _seed_list(args.seeds)
    curves = list(run_online_experiment(data, _methods(args.methods), seeds, top_k=args.top_k).values())
    paths = emit_report([], args.out, curves)
    _record(args.out, "online", {"dataset": file_sha256(args.dataset), "top_k": args.top_k},
            seeds, paths)
    for c in curves:
        print(c.method, " ".join(f"{v:.3f}" for v in c.mean("Type1")))


def _print_table(reports, attack_type="Type1"):
    if not reports:
        return
    header, rows = table_rows(reports, attack_type)
    widths = [max(len(str(r[i])) for r in [header] + rows) for i in range(len(header))]
    for r in [header] + rows:
        print("  ".join(str(v).ljust(w) for v, w in zip(r, widths)))


def cmd_report(args):
    path = args.inp if args.inp.endswith(".json") else os.path.join(args.inp, "report.json")
    try:
        reports, curves = load_report(path)
    except FileNotFoundError:
        raise CliError(f"{path}: no report found") from None
    _print_table(reports, args.attack_type)
    for c in curves:
        if args.attack_type in c.per_seed:
            print(f"online {c.method}:", " ".join(f"{v:.3f}" for v in c.mean(args.attack_type)))


def build_parser():
    p = argparse.ArgumentParser(prog="seqids", description=__doc__)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="generate a labeled window dataset")
    s.add_argument("--config", help="SimConfig JSON file (defaults if omitted)")
    s.add_argument("--out", required=True, help="output JSON-Lines path")
    s.add_argument("--seed", type=int)
    s.add_argument("--episodes", type=int, help="episodes per attack type")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("preprocess", help="reduce attributes and fit the symbolizer")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--top-k", type=int, default=1)
    s.add_argument("--symbols", type=int, default=6)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True, help="model directory")
    s.set_defaults(func=cmd_preprocess)

    s = sub.add_parser("train", help="train one method on a dataset")
    s.add_argument("--method", required=True, choices=METHODS)
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--out", required=True, help="model JSON path")
    s.add_argument("--preprocess", help="model directory written by preprocess")
    s.add_argument("--symbols", type=int, default=6, help="alphabet size of symbolized input")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("evaluate", help="offline experiment over seeds")
    s.add_argument("--dataset", required=True)
    s.add_argument("--methods", default=",".join(METHODS))
    s.add_argument("--top-k", default="1", help="1, 4 or a list such as 1,4")
    s.add_argument("--seeds", default=str(len(DEFAULT_SEEDS)), help="count or comma list")
    s.add_argument("--no-online", action="store_true", help="skip the online curves")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("online", help="current-action accuracy per prefix length")
    s.add_argument("--dataset", required=True)
    s.add_argument("--methods", default="hmm-sup,rfc")
    s.add_argument("--top-k", type=int, default=1)
    s.add_argument("--seeds", default=str(len(DEFAULT_SEEDS)))
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_online)

    s = sub.add_parser("report", help="print a stored report")
    s.add_argument("--in", dest="inp", required=True, help="report directory or report.json")
    s.add_argument("--attack-type", default="Type1", choices=[t.name for t in AttackType])
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    level = os.environ.get("SEQIDS_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (CliError, SchemaError, ValueError, KeyError, OSError, FloatingPointError) as exc:
        msg = str(exc) if not isinstance(exc, KeyError) else f"missing field {exc}"
        print(f"seqids {args.command}: error: {msg}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
