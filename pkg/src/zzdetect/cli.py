"""Command-line interface: prepare, train, eval-matrix, ablate, detect, bench.

Results go to stdout, diagnostics to stderr. Exit codes: 0 success, 1 usage
error, 2 data/validation error. Configuration is flat dotted key=value (file
and/or flags with the same names); unknown keys are rejected by name.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import data as data_mod
from . import evaluation, infer, train as train_mod
from .embedding import FileEmbeddingSource, StubEncoder, read_embeddings, ZZEB_MAGIC
from .errors import DataError, ZZDetectError
from .model import ZigZagConfig, load_checkpoint, param_count, save_checkpoint, vanilla_config
from .optim import SGDConfig, SchedulerConfig
from .prng import fnv1a64


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); the contract wants 1
        raise _UsageError(message)


def _parse_bool(s: str) -> bool:
    if s.lower() in ("1", "true", "yes", "on"):
        return True
    if s.lower() in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {s!r}")


def _parse_int_list(s: str) -> tuple[int, ...]:
    return tuple(int(p) for p in s.split(",") if p.strip())


def _parse_optional_int(s: str):
    return None if s.lower() in ("none", "") else int(s)


# dotted key -> parser; defaults live in the dataclasses themselves
CONFIG_KEYS = {
    "epochs": int,
    "seed": int,
    "batch_size": int,
    "early_stop_patience": _parse_optional_int,
    "sgd.lr": float,
    "sgd.momentum": float,
    "sgd.weight_decay": float,
    "sgd.nesterov": _parse_bool,
    "scheduler.enabled": _parse_bool,
    "scheduler.mode": str,
    "scheduler.up_factor": float,
    "scheduler.down_factor": float,
    "scheduler.up_patience": int,
    "scheduler.down_patience": int,
    "scheduler.restart_after": int,
    "model.arch": str,
    "model.block_channels": _parse_int_list,
    "model.downsample_stages": _parse_int_list,
    "model.dropout_rate": float,
    "model.normalize_input": _parse_bool,
}


def read_config_file(path: str) -> dict:
    """Flat key=value lines; '#' comments; unknown keys rejected by name."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ZZDetectError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, _, raw = line.partition("=")
            key = key.strip()
            if key not in CONFIG_KEYS:
                raise ZZDetectError(f"{path}:{lineno}: unknown configuration key {key!r}")
            try:
                values[key] = CONFIG_KEYS[key](raw.strip())
            except ValueError as exc:
                raise ZZDetectError(f"{path}:{lineno}: bad value for {key!r}: {exc}") from exc
    return values


def build_train_config(values: dict) -> train_mod.TrainConfig:
    sgd = SGDConfig(
        lr=values.get("sgd.lr", 0.001),
        momentum=values.get("sgd.momentum", 0.8),
        weight_decay=values.get("sgd.weight_decay", 0.005),
        nesterov=values.get("sgd.nesterov", True),
    )
    scheduler = None
    if values.get("scheduler.enabled", True):
        scheduler = SchedulerConfig(
            mode=values.get("scheduler.mode", "max"),
            up_factor=values.get("scheduler.up_factor", 0.3),
            down_factor=values.get("scheduler.down_factor", 0.5),
            up_patience=values.get("scheduler.up_patience", 1),
            down_patience=values.get("scheduler.down_patience", 1),
            restart_after=values.get("scheduler.restart_after", 30),
        )
    arch = values.get("model.arch", "zigzag")
    if arch not in ("zigzag", "vanilla"):
        raise ZZDetectError(f"model.arch must be zigzag or vanilla, got {arch!r}")
    model = vanilla_config() if arch == "vanilla" else ZigZagConfig()
    overrides = {}
    if "model.block_channels" in values:
        overrides["block_channels"] = values["model.block_channels"]
    if "model.downsample_stages" in values:
        overrides["downsample_stages"] = frozenset(values["model.downsample_stages"])
    if "model.dropout_rate" in values:
        overrides["dropout_rate"] = values["model.dropout_rate"]
    if "model.normalize_input" in values:
        overrides["normalize_input"] = values["model.normalize_input"]
    if overrides:
        model = replace(model, **overrides)
    try:
        model.validate()
        return train_mod.TrainConfig(
            epochs=values.get("epochs", 10),
            seed=values.get("seed", 0),
            batch_size=values.get("batch_size", 32),
            sgd=sgd,
            scheduler=scheduler,
            model=model,
            early_stop_patience=values.get("early_stop_patience"),
        )
    except ValueError as exc:
        raise ZZDetectError(str(exc)) from exc


def _merge_config(args) -> dict:
    values = read_config_file(args.config) if args.config else {}
    for key in CONFIG_KEYS:
        flag_val = getattr(args, key.replace(".", "__"), None)
        if flag_val is not None:
            values[key] = flag_val
    return values


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key=value configuration file")
    for key, parse in CONFIG_KEYS.items():
        parser.add_argument(
            f"--{key}", dest=key.replace(".", "__"), type=parse, default=None, metavar="V"
        )


def _resolve_encoder(choice: str, stub_seed: int):
    if choice == "stub":
        return StubEncoder(seed=stub_seed)
    if choice.startswith("file:"):
        return FileEmbeddingSource(choice[5:])
    raise _UsageError(f"--encoder must be 'stub' or 'file:<path>', got {choice!r}")


def _load_records(path: str, encoder):
    """A dataset path is either a ZZEB embedding file or a chunk JSONL file."""
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == ZZEB_MAGIC:
        return read_embeddings(path)
    return encoder.encode_chunks(data_mod.read_chunk_file(path))


def _parse_named(pairs: list[str], what: str) -> dict[str, str]:
    out = {}
    for pair in pairs:
        name, sep, path = pair.partition("=")
        if not sep or not name or not path:
            raise _UsageError(f"--{what} expects NAME=PATH, got {pair!r}")
        out[name] = path
    return out


# ---------------------------------------------------------------------------
# Commands

def cmd_prepare(args) -> int:
    samples, warnings = data_mod.read_corpus(args.corpus, max_errors=args.error_budget)
    for w in warnings:
        print(f"warning: skipped {w}", file=sys.stderr)
    ratios = tuple(float(r) for r in args.ratios.split(","))
    if len(ratios) != 3:
        raise _UsageError(f"--ratios expects three comma-separated numbers, got {args.ratios!r}")

    chunks_by_source: dict[str, list] = {}
    for sample in samples:
        chunks_by_source.setdefault(sample.source_model, []).extend(
            data_mod.chunk_sample(sample, mode="train")
        )
    human_pool = [c for cs in chunks_by_source.values() for c in cs if c.label == data_mod.LABEL_HUMAN]
    ai_sources = {
        s: [c for c in cs if c.label == data_mod.LABEL_AI]
        for s, cs in chunks_by_source.items()
        if s != "human"
    }
    ai_sources = {s: cs for s, cs in ai_sources.items() if cs}
    if not ai_sources:
        raise ZZDetectError("corpus contains no AI-labeled samples")

    out = Path(args.out)
    (out / "chunks").mkdir(parents=True, exist_ok=True)
    manifest = {"seed": args.seed, "ratios": list(ratios), "sources": {}}
    for source, chunks in sorted(chunks_by_source.items()):
        data_mod.write_chunk_file(chunks, out / "chunks" / f"{source}.jsonl")

    for source, ai_chunks in sorted(ai_sources.items()):
        balance_seed = fnv1a64("prepare-balance", args.seed, source)
        split_seed = fnv1a64("prepare-split", args.seed, source)
        try:
            balanced = data_mod.build_balanced(ai_chunks, human_pool, balance_seed)
            split = data_mod.split_dataset(balanced, ratios, split_seed)
        except DataError as exc:
            raise DataError(f"source {source!r}: {exc}") from exc
        test_ai = [c for c in split.test if c.label == data_mod.LABEL_AI]
        sdir = out / "splits" / source
        sdir.mkdir(parents=True, exist_ok=True)
        data_mod.write_chunk_file(split.train, sdir / "train.jsonl")
        data_mod.write_chunk_file(split.val, sdir / "val.jsonl")
        data_mod.write_chunk_file(test_ai, sdir / "test.jsonl")
        manifest["sources"][source] = {
            "ai_chunks": len(ai_chunks),
            "balance_seed": balance_seed,
            "split_seed": split_seed,
            "train": len(split.train),
            "val": len(split.val),
            "test_pure_ai": len(test_ai),
        }
    manifest["human_pool_chunks"] = len(human_pool)
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(json.dumps({"sources": sorted(ai_sources), "out": str(out)}))
    return 0


def cmd_train(args) -> int:
    values = _merge_config(args)
    config = build_train_config(values)
    encoder = _resolve_encoder(args.encoder, args.stub_seed)
    split = train_mod.EmbeddedSplit(
        train=_load_records(args.train, encoder),
        val=_load_records(args.val, encoder),
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    net, history = train_mod.fit(split, config, checkpoint_path=out / "best.zzck")
    save_checkpoint(net, out / "final.zzck")
    train_mod.write_history(history, out / "history.jsonl")
    best = max(history, key=lambda h: h.val_acc)
    print(
        json.dumps(
            {
                "epochs_run": len(history),
                "best_epoch": best.epoch,
                "best_val_acc": best.val_acc,
                "param_count": param_count(net),
                "checkpoint": str(out / "best.zzck"),
            }
        )
    )
    return 0


def cmd_eval_matrix(args) -> int:
    encoder = _resolve_encoder(args.encoder, args.stub_seed)
    models = {}
    for name, path in _parse_named(args.model, "model").items():
        net, _ = load_checkpoint(path)
        models[name] = net
    testsets = {
        name: _load_records(path, encoder)
        for name, path in _parse_named(args.testset, "testset").items()
    }
    report = evaluation.cross_matrix(models, testsets)
    sys.stdout.write(report.to_text())
    if args.out:
        Path(args.out).write_text(report.to_csv(), encoding="utf-8")
        print(f"wrote {args.out}", file=sys.stderr)
    return 0


def cmd_ablate(args) -> int:
    values = _merge_config(args)
    config = build_train_config(values)
    encoder = _resolve_encoder(args.encoder, args.stub_seed)
    split = train_mod.EmbeddedSplit(
        train=_load_records(args.train, encoder),
        val=_load_records(args.val, encoder),
    )
    testsets = {
        name: _load_records(path, encoder)
        for name, path in _parse_named(args.testset, "testset").items()
    }
    report = evaluation.run_ablation(split, testsets, config)
    sys.stdout.write(report.to_text())
    if args.out:
        Path(args.out).write_text(report.to_csv(), encoding="utf-8")
        print(f"wrote {args.out}", file=sys.stderr)
    return 0


def cmd_detect(args) -> int:
    if (args.text is None) == (args.file is None):
        raise _UsageError("provide exactly one of --text or --file")
    text = args.text if args.text is not None else Path(args.file).read_text(encoding="utf-8")
    net, _ = load_checkpoint(args.model)
    encoder = _resolve_encoder(args.encoder, args.stub_seed)
    result = infer.detect(text, net, encoder)
    print(json.dumps(result.to_json_dict()))
    return 0


def cmd_bench(args) -> int:
    net, _ = load_checkpoint(args.model)
    encoder = _resolve_encoder(args.encoder, args.stub_seed)
    report = infer.benchmark(
        net,
        encoder,
        sentence_counts=_parse_int_list(args.counts),
        batch_sizes=_parse_int_list(args.batch_sizes),
        repetitions=args.repetitions,
        seed=args.stub_seed,
    )
    sys.stdout.write(report.to_csv())
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    if args.out:
        Path(args.out).write_text(report.to_csv(), encoding="utf-8")
        print(f"wrote {args.out}", file=sys.stderr)
    return 0


def make_parser() -> _Parser:
    parser = _Parser(prog="zzdetect", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="chunk a corpus into balanced splits")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ratios", default="0.8,0.1,0.1")
    p.add_argument("--error-budget", type=int, default=0)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="train a detector on chunk or embedding files")
    p.add_argument("--train", required=True, help="chunk .jsonl or .zzeb embeddings")
    p.add_argument("--val", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--encoder", default="stub")
    p.add_argument("--stub-seed", type=int, default=0)
    _add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval-matrix", help="cross-domain detection-rate matrix")
    p.add_argument("--model", action="append", required=True, metavar="NAME=CKPT")
    p.add_argument("--testset", action="append", required=True, metavar="NAME=PATH")
    p.add_argument("--encoder", default="stub")
    p.add_argument("--stub-seed", type=int, default=0)
    p.add_argument("--out", help="write the matrix as CSV here")
    p.set_defaults(func=cmd_eval_matrix)

    p = sub.add_parser("ablate", help="4-way architecture x scheduler ablation")
    p.add_argument("--train", required=True)
    p.add_argument("--val", required=True)
    p.add_argument("--testset", action="append", required=True, metavar="NAME=PATH")
    p.add_argument("--encoder", default="stub")
    p.add_argument("--stub-seed", type=int, default=0)
    p.add_argument("--out", help="write the report as CSV here")
    _add_config_flags(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("detect", help="score a document for AI-generated text")
    p.add_argument("--model", required=True)
    p.add_argument("--text")
    p.add_argument("--file")
    p.add_argument("--encoder", default="stub")
    p.add_argument("--stub-seed", type=int, default=0)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("bench", help="3-phase inference latency benchmark")
    p.add_argument("--model", required=True)
    p.add_argument("--counts", default="10,100,1000,10000")
    p.add_argument("--batch-sizes", default="1,32,128")
    p.add_argument("--repetitions", type=int, default=5)
    p.add_argument("--encoder", default="stub")
    p.add_argument("--stub-seed", type=int, default=0)
    p.add_argument("--out", help="write the report as CSV here")
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (ZZDetectError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
