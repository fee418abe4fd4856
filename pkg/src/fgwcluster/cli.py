"""Command-line entry point: ``fgwcluster {train,eval,synth,convert}``.

Exit codes: 0 success, 1 configuration error, 2 data error, 3 numerical abort.
"""

from __future__ import annotations

import argparse
import contextlib
import hashlib
import json
import logging
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import io as fgmio
from .graph import GraphFormatError, find_graph_files, generate_sbm, load_graph, save_graph
from .metrics import evaluate
from .training import NumericalAbort, TrainConfig, TrainedModel, cluster, infer, train

logger = logging.getLogger("fgwcluster")

EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 1, 2, 3


class ConfigError(Exception):
    pass


class DataError(Exception):
    pass


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(canonical_json(cfg).encode("utf-8")).hexdigest()


def _parse_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def apply_overrides(cfg: dict, assignments) -> dict:
    """Apply ``key=value`` strings; dotted keys reach into nested sections."""
    for item in assignments or ():
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, raw = item.split("=", 1)
        *parents, leaf = key.strip().split(".")
        node = cfg
        for p in parents:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"--set {key}: {p} is not a section")
        node[leaf] = _parse_value(raw)
    return cfg


def _read_json(path, what: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"{what} not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{what} {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{what} {path} must hold a JSON object")
    return data


def load_config(path, overrides=(), seed=None) -> TrainConfig:
    raw = _read_json(path, "config") if path else {}
    raw = apply_overrides(raw, overrides)
    if seed is not None:
        raw["seed"] = seed
    try:
        return TrainConfig.from_dict(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config: {exc}") from None


def _load_data(data_dir):
    try:
        files = find_graph_files(data_dir)
        g = load_graph(files["edges"], files["features"], files["labels"])
    except (FileNotFoundError, GraphFormatError, ValueError) as exc:
        raise DataError(str(exc)) from None
    return g, files


def dataset_id(files: dict) -> str:
    h = hashlib.sha256()
    for role in ("edges", "features", "labels"):
        path = files.get(role)
        if path is not None:
            h.update(role.encode())
            h.update(Path(path).read_bytes())
    return h.hexdigest()[:16]


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def write_manifest(out_dir: Path, command: str, entry: dict) -> None:
    """Record ``entry`` under ``command`` in ``out_dir/manifest.json``."""
    path = out_dir / "manifest.json"
    manifest = {}
    if path.is_file():
        with contextlib.suppress(json.JSONDecodeError, OSError):
            manifest = json.loads(path.read_text(encoding="utf-8"))
    manifest[command] = entry
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def cmd_train(config_path, data_dir, out_dir, overrides=(), seed=None) -> int:
    start = _now()
    cfg = load_config(config_path, overrides, seed)
    g, files = _load_data(data_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model = train(g, cfg, callback=lambda e, l: logger.info("epoch %d loss %.6f", e, l))
    model.save(out_dir / "checkpoint.fgm")
    with open(out_dir / "loss.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("epoch,loss\n")
        fh.writelines(f"{i},{loss!r}\n" for i, loss in enumerate(model.loss_trace))
    cfg_dict = cfg.to_dict()
    write_manifest(
        out_dir,
        "train",
        {
            "config": cfg_dict,
            "config_hash": config_hash(cfg_dict),
            "seed": cfg.seed,
            "dataset_id": dataset_id(files),
            "data_dir": str(Path(data_dir).resolve()),
            "start": start,
            "end": _now(),
            "metrics": {"final_loss": model.loss_trace[-1] if model.loss_trace else None, "epochs": len(model.loss_trace)},
            "outputs": ["checkpoint.fgm", "loss.csv", "manifest.json"],
        },
    )
    return 0


def cmd_eval(checkpoint, data_dir, out_dir, seed=None, n_clusters=None) -> int:
    start = _now()
    try:
        model = TrainedModel.load(checkpoint)
    except FileNotFoundError:
        raise DataError(f"checkpoint not found: {checkpoint}") from None
    except (ValueError, KeyError, TypeError) as exc:
        raise DataError(f"unreadable checkpoint {checkpoint}: {exc}") from None
    g, files = _load_data(data_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        R = infer(g, model)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    fgmio.write_matrix(out_dir / "embeddings.fgm", R)
    outputs = ["embeddings.fgm"]
    seed = model.config.seed if seed is None else seed
    k = n_clusters or model.config.n_clusters or g.n_classes
    summary = None
    if k is None:
        logger.warning("no labels and no n_clusters: skipping K-means")
    else:
        km = cluster(g, model, k, seed)
        with open(out_dir / "predictions.txt", "w", encoding="utf-8", newline="\n") as fh:
            fh.writelines(f"{int(y)}\n" for y in km.labels)
        outputs.append("predictions.txt")
        if g.labels is not None:
            report = evaluate(km.labels, g.labels, max(k, g.n_classes))
            summary = report.summary()
            (out_dir / "metrics.json").write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
            _write_tables(out_dir, report)
            outputs += ["metrics.json", "confusion.tsv", "histograms.tsv"]
    write_manifest(
        out_dir,
        "eval",
        {
            "checkpoint": str(Path(checkpoint).resolve()),
            "config_hash": config_hash(model.config.to_dict()),
            "seed": seed,
            "n_clusters": k,
            "dataset_id": dataset_id(files),
            "data_dir": str(Path(data_dir).resolve()),
            "start": start,
            "end": _now(),
            "metrics": summary,
            "outputs": outputs + ["manifest.json"],
        },
    )
    return 0


def _write_tables(out_dir: Path, report) -> None:
    C = len(report.true_histogram)
    with open(out_dir / "confusion.tsv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("true\\pred\t" + "\t".join(str(j) for j in range(C)) + "\n")
        for i, row in enumerate(report.confusion):
            fh.write(f"{i}\t" + "\t".join(str(v) for v in row) + "\n")
    with open(out_dir / "histograms.tsv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("class\tpredicted\ttrue\tf1\n")
        for c in range(C):
            fh.write(f"{c}\t{report.pred_histogram[c]}\t{report.true_histogram[c]}\t{report.per_class_f1[c]!r}\n")


SBM_FIELDS = ("n_per_block", "p_in", "p_out", "feature_centers", "noise", "seed")


def cmd_synth(spec_path, out_dir, overrides=(), seed=None, features_format="fgm") -> int:
    spec = apply_overrides(_read_json(spec_path, "SBM spec"), overrides)
    if seed is not None:
        spec["seed"] = seed
    missing = [k for k in SBM_FIELDS if k not in spec]
    extra = sorted(set(spec) - set(SBM_FIELDS) - {"features_format"})
    if missing or extra:
        raise ConfigError(f"SBM spec: missing {missing}, unknown {extra}")
    try:
        g = generate_sbm(**{k: spec[k] for k in SBM_FIELDS})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid SBM spec: {exc}") from None
    save_graph(g, out_dir, spec.get("features_format", features_format))
    return 0


def cmd_convert(fmt, source, out_dir, name=None) -> int:
    source = Path(source)
    try:
        if fmt == "linqs":
            name = name or "cora"
            g = fgmio.convert_linqs(source / f"{name}.content", source / f"{name}.cites", out_dir)
        elif fmt == "planetoid":
            g = fgmio.convert_planetoid(source, name or "cora", out_dir)
        else:
            raise ConfigError(f"unknown source format {fmt!r}")
    except FileNotFoundError as exc:
        raise DataError(str(exc)) from None
    logger.info("converted %d nodes, %d edges, %s classes", g.n_nodes, g.n_edges, g.n_classes)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fgwcluster", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True, data=True):
        if config:
            sp.add_argument("--config", help="JSON config file")
        if data:
            sp.add_argument("--data", required=True, help="directory with edges.txt, features.{fgm,csv}, labels.txt")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config field")

    common(sub.add_parser("train", help="train a model"))
    ev = sub.add_parser("eval", help="infer, cluster and score")
    common(ev, config=False)
    ev.add_argument("--checkpoint", help="defaults to OUT/checkpoint.fgm")
    ev.add_argument("--n-clusters", type=int)
    sy = sub.add_parser("synth", help="write a stochastic-block-model dataset")
    common(sy, data=False)
    cv = sub.add_parser("convert", help="convert a public citation dataset")
    cv.add_argument("--format", required=True, choices=["linqs", "planetoid"])
    cv.add_argument("--source", required=True)
    cv.add_argument("--name")
    cv.add_argument("--out", required=True)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    threads = os.environ.get("FGW_THREADS")
    limiter = contextlib.nullcontext()
    if threads:
        from threadpoolctl import threadpool_limits

        limiter = threadpool_limits(limits=int(threads))
    try:
        with limiter:
            if args.command == "train":
                return cmd_train(args.config, args.data, args.out, args.set, args.seed)
            if args.command == "eval":
                ckpt = args.checkpoint or str(Path(args.out) / "checkpoint.fgm")
                return cmd_eval(ckpt, args.data, args.out, args.seed, args.n_clusters)
            if args.command == "synth":
                if not args.config:
                    raise ConfigError("synth needs --config pointing at an SBM spec")
                return cmd_synth(args.config, args.out, args.set, args.seed)
            return cmd_convert(args.format, args.source, args.out, args.name)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalAbort as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
