"""Command-line front-end wiring the pipeline end to end.

Every run resolves its settings as: explicit flags > config file values >
built-in defaults, and writes a ``manifest.json`` recording the subcommand,
resolved configuration hash, input file hashes, seed, tool version and wall
clock next to its outputs.  All other outputs are byte-deterministic for
identical inputs and configuration.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .augment import (
    AttackBurst,
    SyntheticSpec,
    compose_scenario,
    generate_synthetic,
    identity_config,
    load_augment_config,
    load_library,
    split_corpus,
    write_library,
    Library,
)
from .core import AlertSequence, validate_sequence
from .embed import (
    ReadoutConfig,
    export_embeddings_csv,
    fit_pca,
    load_embeddings,
    load_pca,
    save_embeddings,
    save_pca,
    transform_pca,
    windowed_embed,
)
from .errors import AlertGroupingError, ConfigError, InputError
from .evaluate import (
    build_report,
    default_parameter_grid,
    emit_report,
    leaf_labels,
    pair_confusion,
    sweep_grid,
    sweep_time_delta,
)
from .group import GroupingParams, group_alerts, time_delta_group
from .ingest import CANONICAL_CONFIG, FeatureExtractionConfig, parse_stream, write_stream
from .model import (
    ModelConfig,
    TrainConfig,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .vocab import build_vocab, load_vocab, save_vocab, vocab_hash


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _require_inputs(*paths) -> None:
    for p in paths:
        if p is not None and not Path(p).exists():
            raise InputError(f"input not found: {p}")


def _write_manifest(out_dir, subcommand, settings, inputs, seed, elapsed) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "subcommand": subcommand,
        "tool_version": __version__,
        "seed": seed,
        "config": settings,
        "config_hash": hashlib.sha256(
            json.dumps(settings, sort_keys=True).encode()
        ).hexdigest(),
        "input_hashes": {str(p): _sha256(p) for p in inputs if p is not None},
        "wall_clock_s": round(elapsed, 3),
    }
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_config_file(path) -> dict:
    if path is None:
        return {}
    _require_inputs(path)
    with open(path, "r", encoding="utf-8") as fh:
        doc = yaml.safe_load(fh)
    if doc is None:
        return {}
    if not isinstance(doc, dict):
        raise ConfigError("config file must be a mapping")
    return doc


class _Settings:
    """Flag > config file > default resolution for one subcommand."""

    def __init__(self, args, config: dict):
        self._args = vars(args)
        self._config = config
        self.resolved: dict = {}

    def get(self, name, default=None, cast=None):
        value = self._args.get(name)
        if value is None:
            value = self._config.get(name, default)
        if value is not None and cast is not None:
            value = cast(value)
        self.resolved[name] = value
        return value


def _extraction_config(s: _Settings) -> FeatureExtractionConfig:
    paths = s.get("feature_paths", list(CANONICAL_CONFIG.feature_paths))
    if isinstance(paths, str):
        paths = paths.split(",")
    return FeatureExtractionConfig(
        feature_paths=tuple(paths),
        timestamp_path=s.get("timestamp_path", CANONICAL_CONFIG.timestamp_path),
        timestamp_format=s.get("timestamp_format", CANONICAL_CONFIG.timestamp_format),
    )


def _read_corpus(path, s: _Settings) -> AlertSequence:
    cfg = _extraction_config(s)
    skip_before = s.get("skip_before", None, float)
    seq = parse_stream(path, cfg, skip_before)
    validate_sequence(seq)
    return seq


def _parse_grid(text):
    if text is None:
        return None
    return np.array([float(v) for v in str(text).split(",")])


# --- subcommand implementations -------------------------------------------------


def _cmd_build_vocab(args):
    config = _load_config_file(args.config)
    s = _Settings(args, config)
    _require_inputs(args.input)
    seq = _read_corpus(args.input, s)
    vocab = build_vocab(seq, min_count=s.get("min_count", 10, int))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_vocab(vocab, out / "vocab.json")
    print(f"vocab: {[f.size for f in vocab.features]} tokens per feature")
    return s, [args.input]


def _cmd_train(args):
    config = _load_config_file(args.config)
    s = _Settings(args, config)
    _require_inputs(args.input, args.val, args.vocab)
    train_seq = _read_corpus(args.input, s)
    val_seqs = [_read_corpus(args.val, s)] if args.val else []
    vocab = load_vocab(args.vocab)
    model_cfg = ModelConfig(
        num_heads=s.get("heads", 1, int),
        head_dim=s.get("head_dim", 16, int),
        context_size=s.get("context", 4096, int),
        rotary_base=s.get("rotary_base", 1.0e6, float),
        rotary_keep_fraction=s.get("rotary_keep", 0.75, float),
        ffn_multiplier=s.get("ffn_multiplier", 4, int),
        seed=s.get("seed", 0, int),
    )
    train_cfg = TrainConfig(
        batch_size=s.get("batch_size", 16, int),
        total_steps=s.get("steps", 60000, int),
        max_lr=s.get("max_lr", 0.005, float),
        mask_prob=s.get("mask_prob", 0.15, float),
        warmup_steps=s.get("warmup", 600, int),
        log_every=s.get("log_every", 100, int),
    )
    state, curve = train(
        [train_seq], val_seqs, vocab, model_cfg, train_cfg,
        progress=lambda row: print(
            f"step {row['step']} lr {row['lr']:.6f} train_loss {row['train_loss']:.6f}"
            + (f" val_loss {row['val_loss']:.6f}" if row["val_loss"] is not None else "")
        ),
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(state, out / "model.ckpt")
    with open(out / "loss_curve.csv", "w", encoding="utf-8") as fh:
        fh.write("step,lr,train_loss,val_loss\n")
        for row in curve:
            val = "" if row["val_loss"] is None else repr(row["val_loss"])
            fh.write(f"{row['step']},{row['lr']!r},{row['train_loss']!r},{val}\n")
    return s, [args.input, args.val, args.vocab]


def _cmd_embed(args):
    config = _load_config_file(args.config)
    s = _Settings(args, config)
    _require_inputs(args.input, args.vocab, args.checkpoint, args.pca)
    seq = _read_corpus(args.input, s)
    vocab = load_vocab(args.vocab)
    state = load_checkpoint(args.checkpoint, expected_vocab_hash=vocab_hash(vocab))
    context = state.config.context_size
    readout = s.get("readout", context // 2, int)
    pad = s.get("pad", (context - readout) // 2, int)
    embeddings = windowed_embed(seq, vocab, state, ReadoutConfig(context, readout, pad))

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    pca_tag = ""
    if args.fit_pca:
        model = fit_pca(embeddings, k=s.get("pca_dim", 2, int), fitted_on=str(args.input))
        save_pca(model, out / "pca.json")
        embeddings = transform_pca(model, embeddings)
        pca_tag = f"fitted:{args.input}"
    elif args.pca:
        model = load_pca(args.pca)
        embeddings = transform_pca(model, embeddings)
        pca_tag = f"applied:{args.pca}"
    save_embeddings(embeddings, out / "embeddings.bin", source_path=args.input, pca_tag=pca_tag)
    if args.csv:
        export_embeddings_csv(embeddings, out / "embeddings.csv")
    print(f"embedded {embeddings.shape[0]} alerts into dimension {embeddings.shape[1]}")
    return s, [args.input, args.vocab, args.checkpoint, args.pca]


def _write_groups(out_dir, labels) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "groups.csv", "w", encoding="utf-8") as fh:
        fh.write("alert_index,group_id\n")
        for i, g in enumerate(labels):
            fh.write(f"{i},{int(g)}\n")
    unique, counts = np.unique(labels, return_counts=True)
    hist: dict[str, int] = {}
    for c in counts:
        hist[str(int(c))] = hist.get(str(int(c)), 0) + 1
    summary = {
        "num_alerts": int(len(labels)),
        "num_groups": int(unique.size),
        "group_size_histogram": dict(sorted(hist.items(), key=lambda kv: int(kv[0]))),
    }
    with open(out_dir / "group_summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _read_groups(path) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        if header.strip() != "alert_index,group_id":
            raise InputError(f"unexpected header in {path}")
        return np.array([int(line.strip().split(",")[1]) for line in fh], dtype=np.int64)


def _cmd_group(args):
    config = _load_config_file(args.config)
    s = _Settings(args, config)
    _require_inputs(args.input, args.embeddings)
    seq = _read_corpus(args.input, s)
    embeddings = load_embeddings(args.embeddings)
    params = GroupingParams(s.get("delta", 1.0, float), s.get("theta", 0.0, float))
    labels = group_alerts(seq.timestamps(), embeddings, params)
    _write_groups(args.out, labels)
    print(f"{len(labels)} alerts -> {len(np.unique(labels))} groups")
    return s, [args.input, args.embeddings]


def _cmd_time_delta(args):
    config = _load_config_file(args.config)
    s = _Settings(args, config)
    _require_inputs(args.input)
    seq = _read_corpus(args.input, s)
    labels = time_delta_group(seq.timestamps(), s.get("delta", 1.0, float))
    _write_groups(args.out, labels)
    print(f"{len(labels)} alerts -> {len(np.unique(labels))} groups")
    return s, [args.input]


def _cmd_augment(args):
    config = _load_config_file(args.config)
    s = _Settings(args, config)
    inputs = []
    if args.split_input:
        _require_inputs(args.split_input)
        inputs.append(args.split_input)
        seq = _read_corpus(args.split_input, s)
        split = split_corpus(seq, scenario=s.get("scenario_id", "0", str))
        library = load_library(args.library) if Path(args.library).exists() else Library()
        library.add_split(split)
        write_library(library, args.library)
        print(
            f"library now holds {len(library.noise)} noise days "
            f"and {len(library.attacks)} attacks"
        )
    if args.compose:
        _require_inputs(args.compose, args.library)
        inputs.append(args.compose)
        library = load_library(args.library)
        out = Path(args.out)
        for scenario_id, scen_cfg in load_augment_config(args.compose):
            seq = compose_scenario(scen_cfg, library)
            write_stream(seq, out / f"{scenario_id}.jsonl")
            print(f"scenario {scenario_id}: {len(seq)} alerts over {len(scen_cfg.days)} days")
    if not args.split_input and not args.compose:
        raise ConfigError("augment needs --split-input and/or --compose")
    return s, inputs


def _load_synth_spec(path) -> SyntheticSpec:
    with open(path, "r", encoding="utf-8") as fh:
        doc = yaml.safe_load(fh) or {}
    attacks = tuple(
        AttackBurst(
            event=str(a["event"]),
            stage=str(a["stage"]),
            instance=str(a["instance"]),
            start=float(a["start"]),
            n_alerts=int(a["n_alerts"]),
            spacing=float(a.get("spacing", 1.0)),
            alert_types=tuple(a["alert_types"]),
            devices=tuple(a["devices"]),
            jitter=float(a.get("jitter", 0.0)),
        )
        for a in doc.get("attacks", [])
    )
    return SyntheticSpec(
        seed=int(doc.get("seed", 0)),
        start=float(doc.get("start", SyntheticSpec.start)),
        duration=float(doc.get("duration", SyntheticSpec.duration)),
        noise_rate=float(doc.get("noise_rate", SyntheticSpec.noise_rate)),
        num_types=int(doc.get("num_types", SyntheticSpec.num_types)),
        num_devices=int(doc.get("num_devices", SyntheticSpec.num_devices)),
        attacks=attacks,
    )


def _cmd_synth(args):
    config = _load_config_file(args.config)
    s = _Settings(args, config)
    _require_inputs(args.spec)
    spec = _load_synth_spec(args.spec)
    if args.seed is not None:
        spec = SyntheticSpec(
            seed=int(args.seed), start=spec.start, duration=spec.duration,
            noise_rate=spec.noise_rate, num_types=spec.num_types,
            num_devices=spec.num_devices, attacks=spec.attacks,
        )
    s.resolved["seed"] = spec.seed
    seq, library = generate_synthetic(spec)
    out = Path(args.out)
    write_stream(seq, out / "synthetic.jsonl")
    if args.library:
        write_library(library, out / "library")
    print(f"generated {len(seq)} alerts ({len(library.attacks)} attacks)")
    return s, [args.spec]


def _cmd_sweep(args):
    config = _load_config_file(args.config)
    s = _Settings(args, config)
    _require_inputs(args.input, args.embeddings)
    seq = _read_corpus(args.input, s)
    labels = seq.labels()
    noise_mode = s.get("noise_mode", "include", str)
    deltas = _parse_grid(s.get("deltas", None))
    thetas = _parse_grid(s.get("thetas", None))
    threads = s.get("threads", os.cpu_count() or 1, int)
    if args.time_delta:
        points = sweep_time_delta(
            seq.timestamps(), labels,
            default_parameter_grid() if deltas is None else deltas,
            noise_mode,
        )
    else:
        if args.embeddings is None:
            raise ConfigError("sweep needs --embeddings unless --time-delta is given")
        embeddings = load_embeddings(args.embeddings)
        points = sweep_grid(
            seq.timestamps(), embeddings, labels, deltas, thetas, noise_mode,
            threads=threads,
            progress=lambda d, t: print(f"done delta={d!r} theta={t!r}", flush=True),
        )
    report = build_report(points, noise_mode)
    emit_report(report, args.out)
    print(f"macro AUC ({noise_mode} noise): {report.macro_auc:.5f}")
    return s, [args.input, args.embeddings]


def _cmd_evaluate(args):
    config = _load_config_file(args.config)
    s = _Settings(args, config)
    _require_inputs(args.input, args.groups)
    seq = _read_corpus(args.input, s)
    predicted = _read_groups(args.groups)
    noise_mode = s.get("noise_mode", "include", str)
    labels = seq.labels()
    result = {}
    for leaf in leaf_labels(labels):
        pc = pair_confusion(labels, predicted, leaf, noise_mode)
        result["/".join(leaf)] = {
            "tp": pc.tp, "fn": pc.fn, "fp": pc.fp, "tn": pc.tn,
            "tpr": pc.tpr, "tnr": pc.tnr,
        }
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "evaluation.json", "w", encoding="utf-8") as fh:
        json.dump(
            {"noise_mode": noise_mode, "labels": result}, fh, indent=2, sort_keys=True
        )
        fh.write("\n")
    for name, row in sorted(result.items()):
        print(f"{name}: tpr={row['tpr']:.4f} tnr={row['tnr']:.4f}")
    return s, [args.input, args.groups]


# --- argument parsing ------------------------------------------------------------


def _add_common(p, config_flag="--config"):
    p.add_argument(config_flag, dest="config", default=None, help="YAML config file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--feature-paths", dest="feature_paths", default=None)
    p.add_argument("--timestamp-path", dest="timestamp_path", default=None)
    p.add_argument("--timestamp-format", dest="timestamp_format", default=None)
    p.add_argument("--skip-before", dest="skip_before", type=float, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="alertgrouping",
        description="Self-supervised alert grouping: embed, group, augment, evaluate.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-vocab", help="build per-feature vocabularies")
    p.add_argument("--input", required=True)
    p.add_argument("--min-count", dest="min_count", type=int, default=None)
    _add_common(p)
    p.set_defaults(func=_cmd_build_vocab)

    p = sub.add_parser("train", help="train the masked-alert encoder")
    p.add_argument("--input", required=True)
    p.add_argument("--val", default=None)
    p.add_argument("--vocab", required=True)
    for flag, typ in [
        ("--heads", int), ("--head-dim", int), ("--context", int),
        ("--rotary-base", float), ("--rotary-keep", float), ("--ffn-multiplier", int),
        ("--batch-size", int), ("--steps", int), ("--max-lr", float),
        ("--mask-prob", float), ("--warmup", int), ("--log-every", int),
    ]:
        p.add_argument(flag, dest=flag[2:].replace("-", "_"), type=typ, default=None)
    _add_common(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("embed", help="produce per-alert output embeddings")
    p.add_argument("--input", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--readout", type=int, default=None)
    p.add_argument("--pad", type=int, default=None)
    p.add_argument("--fit-pca", dest="fit_pca", action="store_true")
    p.add_argument("--pca", default=None, help="apply an existing PCA model")
    p.add_argument("--pca-dim", dest="pca_dim", type=int, default=None)
    p.add_argument("--csv", action="store_true")
    _add_common(p)
    p.set_defaults(func=_cmd_embed)

    p = sub.add_parser("group", help="group alerts under the time-cosine metric")
    p.add_argument("--input", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--theta", type=float, default=None)
    _add_common(p)
    p.set_defaults(func=_cmd_group)

    p = sub.add_parser("time-delta", help="baseline time-threshold grouping")
    p.add_argument("--input", required=True)
    p.add_argument("--delta", type=float, default=None)
    _add_common(p)
    p.set_defaults(func=_cmd_time_delta)

    p = sub.add_parser("augment", help="split corpora into a library and compose configs")
    p.add_argument("--split-input", dest="split_input", default=None)
    p.add_argument("--scenario-id", dest="scenario_id", default=None)
    p.add_argument("--library", required=True)
    p.add_argument("--compose", default=None, help="augmentation config to materialize")
    _add_common(p, config_flag="--config-defaults")
    p.set_defaults(func=_cmd_augment)

    p = sub.add_parser("synth", help="generate a labelled synthetic corpus")
    p.add_argument("--spec", required=True)
    p.add_argument("--library", action="store_true", help="also write the split library")
    _add_common(p)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("sweep", help="parameter-grid sweep with ROC envelopes")
    p.add_argument("--input", required=True)
    p.add_argument("--embeddings", default=None)
    p.add_argument("--time-delta", dest="time_delta", action="store_true")
    p.add_argument("--noise-mode", dest="noise_mode", choices=["include", "exclude"], default=None)
    p.add_argument("--deltas", default=None, help="comma-separated override grid")
    p.add_argument("--thetas", default=None, help="comma-separated override grid")
    _add_common(p)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("evaluate", help="score one grouping against labels")
    p.add_argument("--input", required=True)
    p.add_argument("--groups", required=True)
    p.add_argument("--noise-mode", dest="noise_mode", choices=["include", "exclude"], default=None)
    _add_common(p)
    p.set_defaults(func=_cmd_evaluate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    started = time.monotonic()
    try:
        settings, inputs = args.func(args)
    except ConfigError as exc:
        print(f"error[config]: {exc}", file=sys.stderr)
        return 2
    except InputError as exc:
        print(f"error[input]: {exc}", file=sys.stderr)
        return 3
    except AlertGroupingError as exc:
        print(f"error[{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 4
    _write_manifest(
        args.out,
        args.command,
        settings.resolved,
        inputs,
        settings.resolved.get("seed"),
        time.monotonic() - started,
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
