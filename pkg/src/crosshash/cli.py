"""Command line driver for the full pipeline.

Subcommands: synth, mine, train, encode, retrieve, eval, ablate, bench.
Every run resolves its configuration (defaults < config file < flags),
executes under the requested thread limit (default 1 for determinism),
writes its artifacts atomically, and records a manifest next to the main
output with the resolved config, seed, and content hashes of all inputs.
"""

import argparse
import hashlib
import json
import os
import sys
import time

import numpy as np

from . import evaluation, network, retrieval, store, structure
from .errors import ConfigError, CrosshashError
from .fileio import write_atomic


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_manifest(path, command: str, config: dict, inputs: dict, outputs: dict) -> None:
    lines = [f"command={command}"]
    for key in sorted(config):
        lines.append(f"config.{key}={config[key]}")
    for key in sorted(inputs):
        lines.append(f"input.{key}={inputs[key]}")
        lines.append(f"input.{key}.sha256={_sha256(inputs[key])}")
    for key in sorted(outputs):
        lines.append(f"output.{key}={outputs[key]}")
    write_atomic(path, ("\n".join(lines) + "\n").encode("utf-8"))


def _load_config_file(path) -> dict:
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(
                    f"malformed config line {line_no} in {path!r}: {line!r}",
                    module="cli",
                    hint="use key=value lines",
                )
            key, value = line.split("=", 1)
            values[key.strip()] = value.strip()
    return values


def _resolve(args, defaults: dict) -> dict:
    """Layer resolution: defaults, then config file, then explicit flags."""
    file_values = _load_config_file(args.config) if getattr(args, "config", None) else {}
    resolved = {}
    for key, default in defaults.items():
        flag = getattr(args, key, None)
        if flag is not None:
            resolved[key] = flag
        elif key in file_values:
            raw = file_values[key]
            if isinstance(default, bool):
                resolved[key] = raw.lower() in ("1", "true", "yes")
            elif default is None:
                resolved[key] = raw
            else:
                resolved[key] = type(default)(raw)
        else:
            resolved[key] = default
    return resolved


# ---------------------------------------------------------------- synth

_SYNTH_DEFAULTS = dict(
    clusters=8, samples=1800, views=5, dim_image=64, dim_text=64,
    center_spread=1.0, view_noise=0.05, seed=0, query_split=0,
)


def _cmd_synth(args) -> int:
    cfg = _resolve(args, _SYNTH_DEFAULTS)
    synth = store.SynthConfig(
        clusters=cfg["clusters"], samples=cfg["samples"], views=cfg["views"],
        image_dim=cfg["dim_image"], text_dim=cfg["dim_text"],
        center_spread=cfg["center_spread"], view_noise=cfg["view_noise"],
        seed=cfg["seed"],
    )
    data = store.generate_synthetic(synth)
    outputs = {"store": args.out}
    if cfg["query_split"]:
        if not args.query_out:
            raise ConfigError(
                "--query-split requires --query-out", module="cli",
                hint="pass a path for the held-out query store",
            )
        db_part, query_part = store.split_store(data, cfg["query_split"])
        store.write_feature_store(db_part, args.out)
        store.write_feature_store(query_part, args.query_out)
        outputs["query_store"] = args.query_out
    else:
        store.write_feature_store(data, args.out)
    _write_manifest(args.out + ".manifest", "synth", cfg, {}, outputs)
    return 0


# ----------------------------------------------------------------- mine

_MINE_DEFAULTS = dict(tau=1.25, alpha=0.5, views=0, row_block=1024, dump_divergence=False)


def _cmd_mine(args) -> int:
    cfg = _resolve(args, _MINE_DEFAULTS)
    data = store.load_feature_store(args.store)
    views_used = cfg["views"] or None
    div, built = structure.mine_structure(
        data, tau=cfg["tau"], alpha=cfg["alpha"],
        views_used=views_used, row_block=cfg["row_block"],
    )
    structure.save_structure(args.out, div if cfg["dump_divergence"] else None, built)
    variant = "w/o D" if views_used == 1 else "full"
    manifest_cfg = dict(cfg, variant=variant)
    _write_manifest(
        args.out + ".manifest", "mine", manifest_cfg,
        {"store": args.store}, {"structure": args.out},
    )
    return 0


# ---------------------------------------------------------------- train

_TRAIN_DEFAULTS = dict(
    bits=16, hidden=512, lr=1e-3, batch=128, epochs=100,
    temperature=0.25, gamma=1.5, seed=0,
    weight_guided=1.0, weight_retrieval=1.0, weight_cooccurrence=1.0,
    no_retrieval_loss=False, no_sharpen=False, early_stop_tol=0.0,
)


def _train_config(cfg: dict, tau: float, alpha: float) -> network.TrainConfig:
    return network.TrainConfig(
        bits=cfg["bits"], hidden=cfg["hidden"], learning_rate=cfg["lr"],
        batch_size=cfg["batch"], epochs=cfg["epochs"], tau=tau, alpha=alpha,
        temperature=1.0 if cfg["no_sharpen"] else cfg["temperature"],
        gamma=cfg["gamma"],
        weight_guided=cfg["weight_guided"],
        weight_retrieval=0.0 if cfg["no_retrieval_loss"] else cfg["weight_retrieval"],
        weight_cooccurrence=cfg["weight_cooccurrence"],
        early_stop_tol=cfg.get("early_stop_tol") or None,
        seed=cfg["seed"],
    )


def _train_variant(cfg: dict) -> str:
    tags = []
    if cfg["no_retrieval_loss"]:
        tags.append("w/o R")
    if cfg["no_sharpen"]:
        tags.append("w/o S")
    return " + ".join(tags) if tags else "full"


def _cmd_train(args) -> int:
    cfg = _resolve(args, _TRAIN_DEFAULTS)
    data = store.load_feature_store(args.store)
    _, built = structure.load_structure(args.structure)
    if built is None:
        raise ConfigError(
            f"{args.structure!r} holds no similarity structure", module="cli",
            hint="run mine without --dump-divergence-only inputs",
        )
    train_cfg = _train_config(cfg, built.tau, built.alpha)
    params, trace = network.train(data, built, train_cfg)
    network.save_params(args.out, params)
    outputs = {"checkpoint": args.out}
    if args.trace:
        network.write_loss_trace(args.trace, trace)
        outputs["trace"] = args.trace
    manifest_cfg = dict(cfg, variant=_train_variant(cfg))
    _write_manifest(
        args.out + ".manifest", "train", manifest_cfg,
        {"store": args.store, "structure": args.structure}, outputs,
    )
    return 0


# --------------------------------------------------------------- encode

def _cmd_encode(args) -> int:
    data = store.load_feature_store(args.store)
    params = network.load_params(args.checkpoint)
    codes_image = network.forward(params, network.image_inputs(data), "image")
    codes_text = network.forward(params, network.text_inputs(data), "text")
    retrieval.save_codebook(args.out_image, retrieval.binarize(codes_image, "image"))
    retrieval.save_codebook(args.out_text, retrieval.binarize(codes_text, "text"))
    _write_manifest(
        args.out_image + ".manifest", "encode", {},
        {"store": args.store, "checkpoint": args.checkpoint},
        {"image_codes": args.out_image, "text_codes": args.out_text},
    )
    return 0


# -------------------------------------------------------------- retrieve

def _cmd_retrieve(args) -> int:
    queries = retrieval.load_codebook(args.query)
    db = retrieval.load_codebook(args.db)
    if queries.bits != db.bits:
        raise ConfigError(
            f"code length mismatch: {queries.bits} vs {db.bits}", module="cli",
            hint="encode both codebooks with the same checkpoint",
        )
    top_k = args.top_k
    rows, dists = retrieval.rank_all(queries.codes, db)
    lines = ["query_id,rank,db_id,distance"]
    limit = min(top_k, db.num_samples)
    for q in range(queries.num_samples):
        for rank in range(limit):
            row = rows[q, rank]
            lines.append(f"{queries.ids[q]},{rank + 1},{db.ids[row]},{dists[q, row]}")
    write_atomic(args.out, ("\n".join(lines) + "\n").encode("utf-8"))
    _write_manifest(
        args.out + ".manifest", "retrieve", {"top_k": top_k},
        {"query": args.query, "db": args.db}, {"ranking": args.out},
    )
    return 0


# ----------------------------------------------------------------- eval

def _cmd_eval(args) -> int:
    query_image = retrieval.load_codebook(args.query_image)
    query_text = retrieval.load_codebook(args.query_text)
    db_image = retrieval.load_codebook(args.db_image)
    db_text = retrieval.load_codebook(args.db_text)
    query_store = store.load_feature_store(args.query_store)
    db_store = store.load_feature_store(args.db_store)
    if query_store.labels is None or db_store.labels is None:
        raise ConfigError(
            "evaluation requires labeled stores", module="evaluation",
            hint="generate stores with labels (the synthetic generator always does)",
        )
    config_echo = {
        "bits": query_image.bits,
        "query_store": args.query_store,
        "db_store": args.db_store,
        "include_zero_relevant": not args.exclude_zero_relevant,
    }
    report = evaluation.evaluate_pair(
        query_image, query_text, db_image, db_text,
        query_store.labels, db_store.labels,
        config=config_echo,
        include_zero_relevant=not args.exclude_zero_relevant,
    )
    os.makedirs(args.out_dir, exist_ok=True)
    paths = evaluation.write_report(report, args.out_dir, query_image.bits)
    _write_manifest(
        paths[0] + ".manifest", "eval", config_echo,
        {
            "query_image": args.query_image, "query_text": args.query_text,
            "db_image": args.db_image, "db_text": args.db_text,
            "query_store": args.query_store, "db_store": args.db_store,
        },
        {f"artifact_{i}": p for i, p in enumerate(paths)},
    )
    print(f"map_i2t={report.map_i2t:.6f} map_t2i={report.map_t2i:.6f}")
    return 0


# --------------------------------------------------------------- ablate

_ABLATE_VARIANTS = ("full", "w/o D", "w/o R", "w/o S")


def run_benchmark_variant(
    synth_cfg: store.SynthConfig,
    train_cfg: network.TrainConfig,
    num_query: int,
    variant: str = "full",
):
    """One in-memory pipeline pass; returns the EvalReport.

    Variants: "full", "w/o D" (single-view mining), "w/o R" (retrieval
    loss weight 0), "w/o S" (sharpening temperature 1).
    """
    if variant not in _ABLATE_VARIANTS:
        raise ConfigError(f"unknown variant {variant!r}", module="cli")
    data = store.generate_synthetic(synth_cfg)
    db_store, query_store = store.split_store(data, num_query)

    views_used = 1 if variant == "w/o D" else None
    cfg = network.TrainConfig(**{**train_cfg.__dict__})
    if variant == "w/o R":
        cfg.weight_retrieval = 0.0
    if variant == "w/o S":
        cfg.temperature = 1.0

    _, built = structure.mine_structure(
        db_store, tau=cfg.tau, alpha=cfg.alpha, views_used=views_used
    )
    params, _ = network.train(db_store, built, cfg)

    def encode(part):
        image = retrieval.binarize(
            network.forward(params, network.image_inputs(part), "image"), "image"
        )
        text = retrieval.binarize(
            network.forward(params, network.text_inputs(part), "text"), "text"
        )
        return image, text

    db_image, db_text = encode(db_store)
    query_image, query_text = encode(query_store)
    return evaluation.evaluate_pair(
        query_image, query_text, db_image, db_text,
        query_store.labels, db_store.labels,
        config={"variant": variant, "seed": cfg.seed},
    )


def _cmd_ablate(args) -> int:
    cfg = _resolve(args, {**_SYNTH_DEFAULTS, **_TRAIN_DEFAULTS, "seeds": 5})
    results = {variant: {"map_i2t": [], "map_t2i": []} for variant in _ABLATE_VARIANTS}
    for offset in range(cfg["seeds"]):
        seed = cfg["seed"] + offset
        synth_cfg = store.SynthConfig(
            clusters=cfg["clusters"], samples=cfg["samples"], views=cfg["views"],
            image_dim=cfg["dim_image"], text_dim=cfg["dim_text"],
            center_spread=cfg["center_spread"], view_noise=cfg["view_noise"],
            seed=seed,
        )
        train_cfg = _train_config(
            {**cfg, "seed": seed},
            tau=1.25 if args.tau is None else args.tau,
            alpha=0.5 if args.alpha is None else args.alpha,
        )
        for variant in _ABLATE_VARIANTS:
            report = run_benchmark_variant(
                synth_cfg, train_cfg, cfg["query_split"] or 200, variant
            )
            results[variant]["map_i2t"].append(report.map_i2t)
            results[variant]["map_t2i"].append(report.map_t2i)

    summary = {
        variant: {
            "map_i2t_mean": float(np.mean(scores["map_i2t"])),
            "map_t2i_mean": float(np.mean(scores["map_t2i"])),
            "map_i2t": scores["map_i2t"],
            "map_t2i": scores["map_t2i"],
        }
        for variant, scores in results.items()
    }
    out = args.out
    write_atomic(out, (json.dumps(summary, indent=2, sort_keys=True) + "\n").encode("utf-8"))
    _write_manifest(out + ".manifest", "ablate", cfg, {}, {"report": out})
    for variant in _ABLATE_VARIANTS:
        row = summary[variant]
        print(f"{variant:7s} map_i2t={row['map_i2t_mean']:.4f} map_t2i={row['map_t2i_mean']:.4f}")
    return 0


# ---------------------------------------------------------------- bench

def benchmark_inference(db_size: int, query_count: int, bits: int, seed: int = 0) -> dict:
    """Time a full cross-modal ranking over random codebooks.

    Reports wall time for ranking every query against the database plus a
    distance-only microbenchmark in code comparisons per second.
    """
    if db_size < 1:
        raise ConfigError("database must be nonempty", module="cli")
    if query_count < 1:
        raise ConfigError("query set must be nonempty", module="cli")
    rng = np.random.default_rng(seed)
    words = (bits + 63) // 64
    db = retrieval.BinaryCodebook(
        rng.integers(0, 1 << 63, size=(db_size, words), dtype=np.uint64),
        bits, "image", np.arange(db_size, dtype=np.int64),
    )
    queries = rng.integers(0, 1 << 63, size=(query_count, words), dtype=np.uint64)

    start = time.perf_counter()
    retrieval.rank_all(queries, db)
    rank_seconds = time.perf_counter() - start

    comparisons = db_size * query_count
    db_words = [np.ascontiguousarray(db.codes[:, w]) for w in range(words)]
    dist_dtype = np.uint8 if bits <= 255 else np.uint16
    out = np.empty((min(64, query_count), db_size), dtype=dist_dtype)
    start = time.perf_counter()
    for begin in range(0, query_count, 64):
        end = min(begin + 64, query_count)
        retrieval._distances_block(queries[begin:end], db_words, out[: end - begin])
    distance_seconds = time.perf_counter() - start

    return {
        "db_size": db_size,
        "query_count": query_count,
        "bits": bits,
        "rank_wall_seconds": rank_seconds,
        "distance_wall_seconds": distance_seconds,
        "comparisons": comparisons,
        "comparisons_per_second": comparisons / distance_seconds if distance_seconds else float("inf"),
    }


def _cmd_bench(args) -> int:
    report = benchmark_inference(args.db_size, args.queries, args.bits, args.seed or 0)
    write_atomic(args.out, (json.dumps(report, indent=2, sort_keys=True) + "\n").encode("utf-8"))
    print(
        f"ranked {report['query_count']} x {report['db_size']} in "
        f"{report['rank_wall_seconds']:.3f}s "
        f"({report['comparisons_per_second'] / 1e6:.1f}M cmp/s distance-only)"
    )
    return 0


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crosshash",
        description="unsupervised cross-modal hashing pipeline",
    )
    parser.add_argument("--threads", type=int, default=1,
                        help="BLAS thread limit (default 1 for determinism)")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config(p):
        p.add_argument("--config", help="flat key=value config file; flags override")

    p = sub.add_parser("synth", help="generate a synthetic clustered store")
    add_config(p)
    p.add_argument("--out", required=True)
    p.add_argument("--query-out")
    p.add_argument("--query-split", type=int, dest="query_split")
    p.add_argument("--clusters", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--views", type=int)
    p.add_argument("--dim-image", type=int, dest="dim_image")
    p.add_argument("--dim-text", type=int, dest="dim_text")
    p.add_argument("--center-spread", type=float, dest="center_spread")
    p.add_argument("--view-noise", type=float, dest="view_noise")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("mine", help="mine the similarity structure")
    add_config(p)
    p.add_argument("--store", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--tau", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--views", type=int,
                   help="restrict mining to the first M views (0 = all views)")
    p.add_argument("--row-block", type=int, dest="row_block")
    p.add_argument("--dump-divergence", action="store_const", const=True,
                   dest="dump_divergence")
    p.set_defaults(func=_cmd_mine)

    p = sub.add_parser("train", help="train the hashing networks")
    add_config(p)
    p.add_argument("--store", required=True)
    p.add_argument("--structure", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--trace")
    p.add_argument("--bits", type=int)
    p.add_argument("--hidden", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--temperature", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--weight-guided", type=float, dest="weight_guided")
    p.add_argument("--weight-retrieval", type=float, dest="weight_retrieval")
    p.add_argument("--weight-cooccurrence", type=float, dest="weight_cooccurrence")
    p.add_argument("--no-retrieval-loss", action="store_const", const=True,
                   dest="no_retrieval_loss")
    p.add_argument("--no-sharpen", action="store_const", const=True, dest="no_sharpen")
    p.add_argument("--early-stop-tol", type=float, dest="early_stop_tol",
                   help="stop when the 10-epoch mean loss improves by less than "
                        "this (0 disables)")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("encode", help="binarize a store with a trained checkpoint")
    p.add_argument("--store", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out-image", required=True, dest="out_image")
    p.add_argument("--out-text", required=True, dest="out_text")
    p.set_defaults(func=_cmd_encode)

    p = sub.add_parser("retrieve", help="rank a query codebook against a database")
    p.add_argument("--query", required=True)
    p.add_argument("--db", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--top-k", type=int, default=10, dest="top_k")
    p.set_defaults(func=_cmd_retrieve)

    p = sub.add_parser("eval", help="score retrieval against labels")
    p.add_argument("--query-image", required=True, dest="query_image")
    p.add_argument("--query-text", required=True, dest="query_text")
    p.add_argument("--db-image", required=True, dest="db_image")
    p.add_argument("--db-text", required=True, dest="db_text")
    p.add_argument("--query-store", required=True, dest="query_store")
    p.add_argument("--db-store", required=True, dest="db_store")
    p.add_argument("--out-dir", required=True, dest="out_dir")
    p.add_argument("--exclude-zero-relevant", action="store_true",
                   dest="exclude_zero_relevant")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("ablate", help="run the benchmark ablation grid")
    add_config(p)
    p.add_argument("--out", required=True)
    p.add_argument("--seeds", type=int)
    p.add_argument("--tau", type=float)
    p.add_argument("--alpha", type=float)
    for name, cast in (
        ("--clusters", int), ("--samples", int), ("--views", int),
        ("--dim-image", int), ("--dim-text", int),
        ("--center-spread", float), ("--view-noise", float), ("--seed", int),
        ("--query-split", int), ("--bits", int), ("--hidden", int),
        ("--lr", float), ("--batch", int), ("--epochs", int),
        ("--temperature", float), ("--gamma", float),
    ):
        p.add_argument(name, type=cast, dest=name.lstrip("-").replace("-", "_"))
    p.set_defaults(func=_cmd_ablate)

    p = sub.add_parser("bench", help="inference throughput benchmark")
    p.add_argument("--db-size", type=int, default=18015, dest="db_size")
    p.add_argument("--queries", type=int, default=2000)
    p.add_argument("--bits", type=int, default=128)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_bench)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        from threadpoolctl import threadpool_limits

        with threadpool_limits(limits=max(1, args.threads)):
            return args.func(args)
    except CrosshashError as exc:
        print(f"error [{exc.module}]: {exc} (hint: {exc.hint})", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error [cli]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
