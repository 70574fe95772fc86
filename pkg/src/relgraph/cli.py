"""Command-line interface.

Subcommands mirror the pipeline stages: ingest graph files, tokenize
instances, build subword graphs, generate the synthetic benchmark, train,
sweep, evaluate a checkpoint, merge reports, and compare two runs.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import data as data_mod
from .charts import svg_line_chart
from .encoders import load_params, save_params
from .errors import ConfigError, RelgraphError
from .gmr import Framework, parse_conllu, parse_graph_json, to_graph_json, validate_graph
from .graph import randomize_graph
from .model import RelationSchema, predictions_to_jsonl
from .stats import bootstrap_significance
from .tokenizer import (
    MarkerScheme,
    insert_markers,
    load_vocab,
    parse_instances,
    tokenize,
)
from .training import (
    GraphSource,
    SweepAxis,
    TrainConfig,
    evaluate,
    run_sweep,
    select_graphs,
    train,
)

log = logging.getLogger(__name__)


def _read(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _write(path: str, text: str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(text, encoding="utf-8")


# -- run configuration file --------------------------------------------------

_RUN_KEYS = {"version", "data_dir", "train", "na_label", "prune_punct"}


def load_run_config(path: str) -> dict:
    obj = json.loads(_read(path))
    unknown = set(obj) - _RUN_KEYS
    if unknown:
        raise ConfigError(f"unknown run config keys: {sorted(unknown)}")
    if obj.get("version", 1) != 1:
        raise ConfigError(f"unsupported run config version {obj.get('version')!r}")
    if "data_dir" not in obj:
        raise ConfigError("run config needs data_dir")
    obj["train"] = TrainConfig.from_dict(obj.get("train", {}))
    obj.setdefault("na_label", None)
    obj.setdefault("prune_punct", False)
    return obj


def _load_dataset_for(cfg_obj: dict) -> data_mod.PreparedDataset:
    cfg: TrainConfig = cfg_obj["train"]
    return data_mod.load_splits(
        cfg_obj["data_dir"],
        scheme=cfg.scheme,
        max_len=cfg.max_len,
        self_loops=cfg.encoder.self_loops,
        prune_punct=cfg_obj["prune_punct"],
        na_label=cfg_obj["na_label"],
    )


# -- subcommands ---------------------------------------------------------------


def cmd_ingest(args: argparse.Namespace) -> int:
    text = _read(args.input)
    if args.format == "conllu":
        graphs = parse_conllu(text, Framework(args.framework.upper()))
    else:
        graphs = parse_graph_json(text)
    if args.out:
        _write(args.out, to_graph_json(graphs))
    summary: dict = {"n_graphs": len(graphs)}
    if args.validate:
        reports = [validate_graph(g) for g in graphs]
        summary["n_violating"] = sum(1 for r in reports if r.violations)
        summary["violations"] = [v for r in reports for v in r.violations]
        summary["n_multi_headed"] = sum(1 for r in reports if not r.is_single_headed)
        summary["n_cyclic"] = sum(1 for r in reports if not r.is_acyclic)
        summary["n_disconnected"] = sum(1 for r in reports if not r.is_connected)
    print(json.dumps(summary, indent=2))
    return 0


def cmd_tokenize(args: argparse.Namespace) -> int:
    instances = parse_instances(_read(args.input))
    scheme = MarkerScheme(args.scheme)
    specials = data_mod.collect_marker_tokens(instances, scheme)
    vocab = load_vocab(args.vocab, special_tokens=specials)
    lines = []
    n_rejected = 0
    for inst in instances:
        marked = insert_markers(inst, scheme)
        try:
            seq = tokenize(marked, vocab, max_len=args.max_len)
        except RelgraphError:
            n_rejected += 1
            continue
        lines.append(
            json.dumps(
                {
                    "id": inst.instance_id,
                    "subwords": list(seq.surface),
                    "subword_ids": list(seq.subword_ids),
                    "word_of_subword": list(seq.word_of_subword),
                    "subj_anchor": seq.subj_anchor,
                    "obj_anchor": seq.obj_anchor,
                },
                ensure_ascii=False,
            )
        )
    _write(args.out, "\n".join(lines) + ("\n" if lines else ""))
    print(json.dumps({"n_tokenized": len(lines), "n_rejected": n_rejected}))
    return 0


def cmd_build_graph(args: argparse.Namespace) -> int:
    instances = parse_instances(_read(args.instances))
    graphs = parse_graph_json(_read(args.gmr))
    scheme = MarkerScheme(args.scheme)
    specials = data_mod.collect_marker_tokens(instances, scheme)
    vocab = load_vocab(args.vocab, special_tokens=specials)
    self_loops = args.self_loops == "on"
    items, n_rejected = data_mod.prepare_instances(
        instances, graphs, vocab, scheme, args.max_len, self_loops, args.prune_punct
    )
    lines = []
    for item in items:
        sg = item.graph
        if args.random_seed is not None:
            sg = randomize_graph(sg, args.random_seed)
        edges = sorted(
            [i, j, prov.value] for (i, j), prov in sg.edge_provenance.items()
        )
        lines.append(
            json.dumps(
                {"instance_id": item.instance_id, "n": sg.n, "edges": edges},
                ensure_ascii=False,
            )
        )
    _write(args.out, "\n".join(lines) + ("\n" if lines else ""))
    print(json.dumps({"n_graphs": len(lines), "n_rejected": n_rejected}))
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    spec = data_mod.SynthSpec.from_dict(json.loads(_read(args.spec)))
    dataset = data_mod.gen_synthetic(spec, args.seed)
    paths = data_mod.write_synthetic(dataset, args.out)
    print(json.dumps({name: str(p) for name, p in paths.items()}, indent=2))
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    cfg_obj = load_run_config(args.config)
    cfg: TrainConfig = cfg_obj["train"]
    dataset = _load_dataset_for(cfg_obj)
    params, report = train(cfg, dataset)
    if args.out:
        _write(args.out, json.dumps(report.to_dict(), indent=2))
    if args.save_params:
        meta = {
            "train_config": cfg.to_dict(),
            "seed": cfg.seeds[-1],
            "relations": list(dataset.schema.relations),
            "na_label": dataset.schema.na_label,
        }
        save_params(params, args.save_params, meta=meta)
    print(
        json.dumps(
            {
                "micro_mean": report.micro_mean,
                "micro_std": report.micro_std,
                "macro_mean": report.macro_mean,
                "macro_std": report.macro_std,
                "n_rejected": report.n_rejected,
            }
        )
    )
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg_obj = load_run_config(args.config)
    cfg: TrainConfig = cfg_obj["train"]
    axis = SweepAxis(args.axis)
    raw_values = [v for v in args.values.split(",") if v]
    values: list
    if axis is SweepAxis.LAYERS:
        values = [int(v) for v in raw_values]
    elif axis is SweepAxis.GRAPH_SOURCE:
        values = [GraphSource(v) for v in raw_values]
    else:
        values = raw_values
    dataset = None
    if axis is not SweepAxis.PARSER_SOURCE:
        dataset = _load_dataset_for(cfg_obj)
    reports = run_sweep(
        cfg, axis, values, dataset=dataset, data_dir=cfg_obj["data_dir"]
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for i, report in enumerate(reports):
        name = report.label.replace("=", "-").replace("/", "_") or f"run-{i}"
        _write(str(out_dir / f"{name}.json"), json.dumps(report.to_dict(), indent=2))
    if args.plot:
        _plot_reports([r.to_dict() for r in reports], out_dir / "sweep.svg")
    for report in reports:
        print(
            json.dumps(
                {
                    "label": report.label,
                    "micro_mean": report.micro_mean,
                    "micro_std": report.micro_std,
                }
            )
        )
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    params, meta = load_params(args.params)
    cfg = TrainConfig.from_dict(meta["train_config"])
    schema = RelationSchema(tuple(meta["relations"]), meta.get("na_label"))
    dataset = data_mod.load_splits(
        args.data,
        scheme=cfg.scheme,
        max_len=cfg.max_len,
        self_loops=cfg.encoder.self_loops,
        na_label=meta.get("na_label"),
    )
    items = dataset.test
    graphs = select_graphs(items, cfg.graph_source, int(meta.get("seed", 0)))
    preds, micro, macro = evaluate(
        params, items, graphs, cfg.effective_encoder(), schema
    )
    if args.out:
        _write(args.out, predictions_to_jsonl(preds))
    print(
        json.dumps(
            {
                "micro_f1": micro,
                "macro_f1": macro,
                "n": len(preds),
                "n_rejected": dataset.n_rejected,
            }
        )
    )
    return 0


def _plot_reports(reports: list[dict], path: Path) -> None:
    series: dict[str, list[tuple[float, float]]] = {}
    for i, rep in enumerate(reports):
        enc = rep["config"]["encoder"]
        name = f"{enc['graph_encoder']}/{rep['config']['graph_source']}"
        label = rep.get("label", "")
        x = float(label.split("=")[1]) if label.startswith("L=") else float(i)
        series.setdefault(name, []).append((x, rep["micro_mean"]))
    svg_line_chart(
        series, path, title="sweep", x_label="setting", y_label="micro F1"
    )


def cmd_report(args: argparse.Namespace) -> int:
    runs = []
    for p in sorted(Path(args.runs).glob("*.json")):
        runs.append(json.loads(p.read_text(encoding="utf-8")))
    if not runs:
        raise ConfigError(f"no report files under {args.runs}")
    merged = {"runs": runs}
    _write(args.out, json.dumps(merged, indent=2))
    if args.table:
        header = f"{'label':<24}{'micro':>10}{'std':>8}{'macro':>10}{'std':>8}"
        print(header)
        print("-" * len(header))
        for rep in runs:
            print(
                f"{rep.get('label', ''):<24}"
                f"{rep['micro_mean']:>10.4f}{rep['micro_std']:>8.4f}"
                f"{rep['macro_mean']:>10.4f}{rep['macro_std']:>8.4f}"
            )
    if args.plot:
        _plot_reports(runs, Path(args.out).with_suffix(".svg"))
    return 0


def _scores_from_file(path: str) -> list[float]:
    obj = json.loads(_read(path))
    if isinstance(obj, list):
        return [float(x) for x in obj]
    if isinstance(obj, dict) and "per_seed" in obj:
        return [float(s["micro_f1"]) for s in obj["per_seed"]]
    raise ConfigError(
        f"{path}: expected a JSON list of scores or an experiment report"
    )


def cmd_significance(args: argparse.Namespace) -> int:
    a = _scores_from_file(args.a)
    b = _scores_from_file(args.b)
    estimate = bootstrap_significance(
        a, b, resamples=args.resamples, seed=args.seed, paired=not args.unpaired
    )
    print(json.dumps({"p_mean_a_le_mean_b": estimate, "n_a": len(a), "n_b": len(b)}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relgraph",
        description="Relation classification over graph meaning representations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse graph files into canonical JSONL")
    p.add_argument("--format", choices=["conllu", "jsonl"], required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--framework", default="ud", choices=["ud", "dep", "dm", "sdp", "generic"])
    p.add_argument("--validate", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("tokenize", help="insert markers and tokenize instances")
    p.add_argument("--vocab", required=True)
    p.add_argument("--scheme", choices=["entity", "typed"], default="entity")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--max-len", type=int, default=256)
    p.set_defaults(func=cmd_tokenize)

    p = sub.add_parser("build-graph", help="build subword graphs for instances")
    p.add_argument("--gmr", required=True)
    p.add_argument("--instances", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--scheme", choices=["entity", "typed"], default="entity")
    p.add_argument("--self-loops", choices=["on", "off"], default="on")
    p.add_argument("--random-seed", type=int, default=None)
    p.add_argument("--prune-punct", action="store_true")
    p.add_argument("--max-len", type=int, default=256)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_graph)

    p = sub.add_parser("synth", help="generate the synthetic clue-word benchmark")
    p.add_argument("--spec", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train under a run config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="report JSON path")
    p.add_argument("--save-params", help="checkpoint path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sweep", help="multi-seed runs along one axis")
    p.add_argument("--config", required=True)
    p.add_argument("--axis", choices=[a.value for a in SweepAxis], required=True)
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--out", required=True, help="directory for report JSONs")
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a data directory")
    p.add_argument("--params", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", help="predictions JSONL path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="merge report JSONs; optional table/plot")
    p.add_argument("--runs", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--table", action="store_true")
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("significance", help="paired bootstrap comparison")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--resamples", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--unpaired", action="store_true")
    p.set_defaults(func=cmd_significance)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except RelgraphError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
