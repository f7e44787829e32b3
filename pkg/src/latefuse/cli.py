"""Command-line pipelines: vocab, train-text, predict, import-scores, synth, fuse, eval, gradcheck.

Settings resolve in three layers: built-in defaults, then a flat
``key = value`` config file (``--config``), then command-line flags. The
resolved settings are written next to each command's outputs.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import gradcheck
from .evaluation import DEFAULT_TAU, DEFAULT_TOP_K, SkillProfile, emit_report, evaluate, generate_synthetic_modality
from .fusion import (
    apply_policy_network,
    apply_ridge,
    align,
    bimodal_policy_spec,
    fuse_max,
    fuse_mean,
    PolicyNetworkSpec,
    save_fusion_model,
    train_policy_network,
    train_ridge,
)
from .label_space import (
    LabelVocabulary,
    build_vocabulary,
    encode_many,
    filter_records,
    read_dataset,
    read_vocabulary,
    split_train_test,
    write_vocabulary,
)
from .matrix import PredictionMatrix, read_matrix, write_matrix
from .nn_engine import TrainConfig, build_text_cnn, fit, format_training_log, load_network, save_network
from .text_prep import (
    PROFILES,
    PrepProfile,
    TokenVocab,
    build_token_vocab,
    clean_text,
    coverage_ratio,
    default_stopwords,
    encode_corpus,
    init_embedding_table,
    load_pretrained_vectors,
    read_stopwords,
    write_token_vocab,
)

LOGGER = logging.getLogger("latefuse")
MODEL_FORMAT = 1


class CliError(Exception):
    pass


# setting name -> (type, default); None means "unset"
SETTINGS: dict[str, tuple[type, Any]] = {
    "dataset": (str, None),
    "vocab": (str, None),
    "embeddings": (str, None),
    "stopwords": (str, None),
    "out": (str, "."),
    "seed": (int, 0),
    "min_count": (int, 400),
    "n_train": (int, None),
    "split": (str, "all"),
    "embed_dim": (int, 50),
    "min_freq": (int, 1),
    "filters": (int, 200),
    "kernel_size": (int, 5),
    "hidden_units": (int, 170),
    "lr": (float, 1e-3),
    "batch": (int, 64),
    "epochs": (int, 10),
    "dropout": (float, 0.5),
    "policy": (str, None),
    "alpha": (float, 1.0),
    "hidden": (str, "200,150"),
    "activations": (str, None),
    "tau": (float, DEFAULT_TAU),
    "k": (int, DEFAULT_TOP_K),
    "temperature": (float, 0.0),
    "modality": (str, None),
    "configs": (int, gradcheck.N_CONFIGS),
}
PATH_SETTINGS = ("dataset", "vocab", "embeddings", "stopwords")


def parse_config_file(path: str | Path) -> dict[str, str]:
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise CliError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in SETTINGS:
                raise CliError(f"{path}:{lineno}: unknown setting {key!r}")
            values[key] = value
    return values


def resolve_settings(args: argparse.Namespace, used: Sequence[str]) -> dict[str, Any]:
    config = parse_config_file(args.config) if getattr(args, "config", None) else {}
    resolved = {}
    for key in ("out", "seed", *used):
        typ, default = SETTINGS[key]
        value = getattr(args, key, None)
        if value is None and key in config:
            try:
                value = typ(config[key])
            except ValueError as exc:
                raise CliError(f"config setting {key}: {exc}") from exc
        resolved[key] = default if value is None else value
    for key in PATH_SETTINGS:
        if resolved.get(key) is not None and not Path(resolved[key]).exists():
            raise CliError(f"{key} path does not exist: {resolved[key]}")
    if not 0 <= resolved["seed"] < 2**64:
        raise CliError("seed must be a 64-bit unsigned integer")
    if "tau" in resolved and not 0 < resolved["tau"] < 1:
        raise CliError("tau must lie in (0, 1)")
    return resolved


def _require(settings: dict, *keys: str) -> None:
    missing = [k for k in keys if settings.get(k) is None]
    if missing:
        raise CliError("missing required setting(s): " + ", ".join("--" + k.replace("_", "-") for k in missing))


def _out_path(settings: dict, name: str) -> Path:
    out = Path(settings["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out / name


def _echo_config(settings: dict, command: str) -> None:
    path = _out_path(settings, f"{command}.config")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# resolved settings for '{command}'\n")
        for key in sorted(settings):
            if settings[key] is not None:
                fh.write(f"{key} = {settings[key]}\n")


def _load_corpus(settings: dict) -> tuple[LabelVocabulary, list]:
    vocab = read_vocabulary(settings["vocab"])
    return vocab, filter_records(read_dataset(settings["dataset"]), vocab)


def _select_split(records: list, settings: dict) -> list:
    n_train = settings.get("n_train")
    split = settings.get("split", "all")
    if split == "all":
        return records
    if n_train is None:
        raise CliError("--n-train is required to select a train/test split")
    try:
        train, test = split_train_test(records, n_train)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    if split == "train":
        return train
    if split == "test":
        return test
    raise CliError(f"unknown split {split!r} (expected train, test or all)")


def _check_hash(found: str, vocab: LabelVocabulary, what: str) -> None:
    if found != vocab.labels_hash:
        raise CliError(
            f"{what} was built for label vocabulary {found}, but the vocabulary file hashes to "
            f"{vocab.labels_hash}; rebuild the stale artifact"
        )


# --- commands --------------------------------------------------------------------


def cmd_vocab(args) -> int:
    s = resolve_settings(args, ["dataset", "min_count"])
    _require(s, "dataset")
    records = read_dataset(s["dataset"])
    vocab = build_vocabulary(records, s["min_count"])
    kept = filter_records(records, vocab)
    all_labels = {label for r in records for label in r.labels}
    path = Path(args.output) if args.output else _out_path(s, "vocab.tsv")
    write_vocabulary(vocab, path)
    summary = (
        f"classes_kept={len(vocab)}\nclasses_total={len(all_labels)}\n"
        f"products_kept={len(kept)}\nproducts_dropped={len(records) - len(kept)}\nlabels_hash={vocab.labels_hash}\n"
    )
    _out_path(s, "vocab.summary.txt").write_text(summary, encoding="utf-8")
    _echo_config(s, "vocab")
    print(f"wrote {path}")
    print(summary, end="")
    return 0


def cmd_train_text(args) -> int:
    used = ["dataset", "vocab", "modality", "embeddings", "stopwords", "n_train", "embed_dim", "min_freq",
            "filters", "kernel_size", "hidden_units", "lr", "batch", "epochs", "dropout", "tau"]
    s = resolve_settings(args, used)
    _require(s, "dataset", "vocab", "modality")
    if s["modality"] not in PROFILES:
        raise CliError(f"unknown modality {s['modality']!r}; expected one of {sorted(PROFILES)}")
    profile = PROFILES[s["modality"]]()
    stop = read_stopwords(s["stopwords"]) if s["stopwords"] else default_stopwords()
    vocab, records = _load_corpus(s)
    train = _select_split(records, dict(s, split="train")) if s["n_train"] is not None else records
    if not train:
        raise CliError("training split is empty")

    field = s["modality"]
    docs = [clean_text(getattr(r, field), profile, stop) for r in train]
    tokens = build_token_vocab(docs, s["min_freq"])
    pretrained: dict = {}
    if s["embeddings"]:
        pretrained, _ = load_pretrained_vectors(s["embeddings"], s["embed_dim"])
    table = init_embedding_table(tokens, pretrained, s["embed_dim"], s["seed"])
    cover = coverage_ratio(tokens, pretrained)
    print(f"coverage_ratio={cover:.4f} ({len(tokens.real_tokens)} tokens)")

    x = encode_corpus(docs, tokens, profile.max_len)
    y = encode_many(train, vocab)
    net = build_text_cnn(
        table.matrix, len(vocab), profile.max_len, s["seed"],
        kernel_size=s["kernel_size"], filters=s["filters"], hidden=s["hidden_units"], dropout=s["dropout"],
    )
    config = TrainConfig(lr=s["lr"], batch_size=s["batch"], epochs=s["epochs"], seed=s["seed"], tau=s["tau"])
    history = fit(net, x, y, config)

    model_path = _out_path(s, f"{field}.model")
    save_network(model_path, net, {
        "model": "text_cnn",
        "format_version": MODEL_FORMAT,
        "modality": field,
        "labels_hash": vocab.labels_hash,
        "tokens_hash": tokens.tokens_hash,
        "tokens": list(tokens.tokens),
        "profile": profile.__dict__,
        "stopwords": sorted(stop) if profile.remove_stopwords else [],
        "seed": s["seed"],
        "coverage_ratio": cover,
        "train": {"lr": s["lr"], "batch": s["batch"], "epochs": s["epochs"], "dropout": s["dropout"]},
    })
    write_token_vocab(tokens, _out_path(s, f"{field}.tokens.tsv"))
    _out_path(s, f"{field}.train.log").write_text(f"# labels_hash={vocab.labels_hash}\n" + format_training_log(history), encoding="utf-8")
    _echo_config(s, "train-text")
    print(f"wrote {model_path}")
    return 0


def cmd_predict(args) -> int:
    s = resolve_settings(args, ["dataset", "vocab", "split", "n_train"])
    _require(s, "dataset", "vocab")
    net, manifest = load_network(args.model)
    if manifest.get("model") != "text_cnn":
        raise CliError(f"{args.model} is not a text classifier")
    vocab, records = _load_corpus(s)
    _check_hash(manifest["labels_hash"], vocab, str(args.model))
    rows = _select_split(records, s)
    profile = PrepProfile(**manifest["profile"])
    tokens = TokenVocab(tuple(manifest["tokens"]))
    stop = frozenset(manifest["stopwords"])
    field = manifest["modality"]
    docs = [clean_text(getattr(r, field), profile, stop) for r in rows]
    probs = net.predict(encode_corpus(docs, tokens, profile.max_len)) if rows else np.zeros((0, len(vocab)))
    matrix = PredictionMatrix(field, tuple(r.id for r in rows), probs)
    path = Path(args.output) if args.output else _out_path(s, f"{field}.{s['split']}.csv")
    write_matrix(matrix, path, vocab.labels_hash, {"split": s["split"]})
    _echo_config(s, "predict")
    print(f"wrote {path} ({len(matrix)} rows)")
    return 0


def cmd_import_scores(args) -> int:
    s = resolve_settings(args, ["vocab", "dataset", "modality"])
    _require(s, "vocab", "modality")
    vocab = read_vocabulary(s["vocab"])
    known = {r.id for r in read_dataset(s["dataset"])} if s["dataset"] else None
    L = len(vocab)
    ids, rows, clamped, unknown = [], [], 0, 0
    with open(args.scores, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if len(parts) != L + 1:
                raise CliError(f"{args.scores}:{lineno}: expected {L} scores, found {len(parts) - 1}")
            if known is not None and parts[0] not in known:
                unknown += 1
                continue
            try:
                values = np.array([float(v) for v in parts[1:]])
            except ValueError as exc:
                raise CliError(f"{args.scores}:{lineno}: {exc}") from exc
            if not np.all(np.isfinite(values)):
                raise CliError(f"{args.scores}:{lineno}: non-finite score")
            clamped += int(np.sum((values < 0) | (values > 1)))
            ids.append(parts[0])
            rows.append(np.clip(values, 0.0, 1.0))
    if unknown:
        LOGGER.warning("skipped %d row(s) with unknown product ids", unknown)
    if clamped:
        LOGGER.warning("clamped %d score(s) into [0, 1]", clamped)
    matrix = PredictionMatrix(s["modality"], tuple(ids), np.array(rows).reshape(len(rows), L))
    path = Path(args.output) if args.output else _out_path(s, f"{s['modality']}.csv")
    write_matrix(matrix, path, vocab.labels_hash, {"source": "import"})
    _echo_config(s, "import-scores")
    print(f"wrote {path} ({len(matrix)} rows, {unknown} unknown ids skipped, {clamped} values clamped)")
    return 0


def read_skill_profile(path: str | Path, vocab: LabelVocabulary, temperature: float) -> SkillProfile:
    index = vocab.index
    default = None
    skills = np.full(len(vocab), np.nan)
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            if "\t" not in line:
                raise CliError(f"{path}:{lineno}: expected 'label<TAB>skill'")
            label, value = line.rsplit("\t", 1)
            p = float(value)
            if not 0 <= p <= 1:
                raise CliError(f"{path}:{lineno}: skill {p} outside [0, 1]")
            if label == "*":
                default = p
            elif label.strip() in index:
                skills[index[label.strip()]] = p
            else:
                raise CliError(f"{path}:{lineno}: label {label!r} is not in the vocabulary")
    if default is not None:
        skills[np.isnan(skills)] = default
    if np.isnan(skills).any():
        missing = [vocab.labels[i] for i in np.flatnonzero(np.isnan(skills))]
        raise CliError(f"{path}: no skill for {missing[:5]} and no '*' default line")
    return SkillProfile(skills, temperature)


def cmd_synth(args) -> int:
    s = resolve_settings(args, ["dataset", "vocab", "split", "n_train", "temperature", "modality"])
    _require(s, "dataset", "vocab", "modality")
    vocab, records = _load_corpus(s)
    rows = _select_split(records, s)
    profile = read_skill_profile(args.profile, vocab, s["temperature"])
    truth = encode_many(rows, vocab)
    matrix = generate_synthetic_modality(truth, profile, s["seed"], [r.id for r in rows], s["modality"])
    path = Path(args.output) if args.output else _out_path(s, f"{s['modality']}.csv")
    write_matrix(matrix, path, vocab.labels_hash, {"source": "synth", "seed": str(s["seed"])})
    _echo_config(s, "synth")
    print(f"wrote {path} ({len(matrix)} rows)")
    return 0


def _policy_spec(arity: int, n_labels: int, s: dict) -> PolicyNetworkSpec:
    hidden = tuple(int(h) for h in s["hidden"].split(","))
    if s["activations"]:
        acts = tuple(a.strip() for a in s["activations"].split(","))
    elif arity == 2:
        acts = bimodal_policy_spec(n_labels).activations
    else:
        acts = ("sigmoid", "tanh", "sigmoid")
    if len(acts) != len(hidden) + 1:
        raise CliError(f"{len(acts)} activations for {len(hidden) + 1} layers")
    return PolicyNetworkSpec(arity, (*hidden, n_labels), acts)


def cmd_fuse(args) -> int:
    used = ["policy", "dataset", "vocab", "n_train", "alpha", "hidden", "activations", "lr", "batch", "epochs", "tau"]
    s = resolve_settings(args, used)
    _require(s, "policy")
    if len(args.matrices) < 2:
        raise CliError("fuse needs at least two prediction matrices")
    matrices = [read_matrix(p) for p in args.matrices]
    hashes = {m.header["labels_hash"] for m in matrices}
    if len(hashes) != 1:
        raise CliError(f"prediction matrices disagree on the label vocabulary: {sorted(hashes)}")
    labels_hash = hashes.pop()
    aligned, _ = align(matrices)
    inputs = "+".join(m.modality for m in matrices)
    header = {"policy": s["policy"], "inputs": inputs}
    model = None
    policy = s["policy"]
    if policy == "max":
        fused = fuse_max(aligned)
    elif policy == "mean":
        fused = fuse_mean(aligned)
    elif policy in ("ridge", "mlp"):
        _require(s, "dataset", "vocab", "n_train")
        vocab, records = _load_corpus(s)
        _check_hash(labels_hash, vocab, "prediction matrices")
        train_records, _ = split_train_test(records, s["n_train"])
        by_id = {r.id: r for r in train_records}
        train_ids = [pid for pid in aligned[0].ids if pid in by_id]
        if not train_ids:
            raise CliError("no aligned rows belong to the training split")
        targets = encode_many([by_id[pid] for pid in train_ids], vocab)
        train_in = [m.take(train_ids) for m in aligned]
        if policy == "ridge":
            model = train_ridge(train_in, targets, s["alpha"])
            fused = apply_ridge(model, aligned)
            header["alpha"] = repr(s["alpha"])
        else:
            spec = _policy_spec(len(aligned), aligned[0].n_labels, s)
            config = TrainConfig(lr=s["lr"], batch_size=s["batch"], epochs=s["epochs"], seed=s["seed"], tau=s["tau"])
            model = train_policy_network(spec, train_in, targets, config)
            fused = apply_policy_network(model, aligned)
            header.update(
                sizes="/".join(map(str, spec.sizes)),
                activations="/".join(spec.activations),
                lr=repr(s["lr"]), batch=str(s["batch"]), epochs=str(s["epochs"]), seed=str(s["seed"]),
            )
        header["n_train_rows"] = str(len(train_ids))
    else:
        raise CliError(f"unknown policy {policy!r}; expected max, mean, ridge or mlp")

    fused = PredictionMatrix(f"fused_{policy}", fused.ids, fused.values)
    path = Path(args.output) if args.output else _out_path(s, f"fused.{policy}.csv")
    write_matrix(fused, path, labels_hash, header)
    if model is not None:
        model_path = path.with_suffix(".model")
        save_fusion_model(model_path, model, {"labels_hash": labels_hash, "inputs": inputs, "format_version": MODEL_FORMAT})
        print(f"wrote {model_path}")
    _echo_config(s, "fuse")
    print(f"wrote {path} ({len(fused)} rows, policy={policy})")
    return 0


def cmd_eval(args) -> int:
    s = resolve_settings(args, ["dataset", "vocab", "split", "n_train", "tau", "k"])
    _require(s, "dataset", "vocab")
    matrix = read_matrix(args.matrix)
    vocab, records = _load_corpus(s)
    _check_hash(matrix.header["labels_hash"], vocab, str(args.matrix))
    by_id = {r.id: r for r in records}
    unknown = [pid for pid in matrix.ids if pid not in by_id]
    if unknown:
        raise CliError(f"{len(unknown)} matrix id(s) are not labelled products in the dataset, e.g. {unknown[:3]}")
    if s["split"] != "all":
        keep = {r.id for r in _select_split(records, s)}
        matrix = matrix.take([pid for pid in matrix.ids if pid in keep])
    truth = encode_many([by_id[pid] for pid in matrix.ids], vocab)
    report = evaluate(matrix.modality, matrix.values, truth, vocab.labels, s["tau"], s["k"])
    report = dataclasses.replace(report, labels_hash=vocab.labels_hash)
    stem = args.name or matrix.modality
    tsv, md = _out_path(s, f"{stem}.report.tsv"), _out_path(s, f"{stem}.report.md")
    tsv.write_text(emit_report(report, "tsv"), encoding="utf-8")
    md.write_text(emit_report(report, "markdown"), encoding="utf-8")
    _echo_config(s, "eval")
    print(f"micro_f1={report.micro_f1:.4f}")
    print(f"wrote {tsv} and {md}")
    return 0


def cmd_gradcheck(args) -> int:
    s = resolve_settings(args, ["configs"])
    corrupt = frozenset(args.corrupt or ())
    unknown = corrupt - set(gradcheck.KINDS)
    if unknown:
        raise CliError(f"unknown layer kind(s): {sorted(unknown)}")
    results = gradcheck.run_suite(s["seed"], s["configs"], corrupt)
    failed = False
    for kind, err in results.items():
        ok = err < gradcheck.TOLERANCE
        failed |= not ok
        print(f"{kind}\t{err:.3e}\t{'PASS' if ok else 'FAIL'}")
    return 1 if failed else 0


# --- parser ----------------------------------------------------------------------


def _flag(parser: argparse.ArgumentParser, key: str, help: str | None = None, **kw) -> None:
    typ = SETTINGS[key][0]
    parser.add_argument("--" + key.replace("_", "-"), dest=key, type=typ, default=None, help=help, **kw)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="flat 'key = value' settings file")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="run seed (64-bit unsigned)")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory")
    common.add_argument("-v", "--verbose", action="count", default=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(prog="latefuse", description=__doc__.splitlines()[0], parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("vocab", parents=[common], help="build the filtered label vocabulary")
    _flag(p, "dataset")
    _flag(p, "min_count", "drop labels carried by fewer products (default 400)")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_vocab)

    p = sub.add_parser("train-text", parents=[common], help="train a title or description text CNN")
    for key in ("dataset", "vocab", "embeddings", "stopwords", "n_train", "embed_dim", "min_freq",
                "filters", "kernel_size", "hidden_units", "lr", "batch", "epochs", "dropout", "tau"):
        _flag(p, key)
    p.add_argument("--modality", dest="modality", choices=sorted(PROFILES), default=None)
    p.set_defaults(func=cmd_train_text)

    p = sub.add_parser("predict", parents=[common], help="score products with a trained text CNN")
    p.add_argument("--model", required=True)
    for key in ("dataset", "vocab", "n_train"):
        _flag(p, key)
    p.add_argument("--split", choices=("train", "test", "all"), default=None)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("import-scores", parents=[common], help="validate externally produced scores")
    p.add_argument("--scores", required=True, help="CSV rows 'id,p1,...,pL'")
    for key in ("vocab", "dataset", "modality"):
        _flag(p, key)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_import_scores)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic modality from true labels")
    p.add_argument("--profile", required=True, help="'label<TAB>skill' lines, '*<TAB>p' for the default")
    for key in ("dataset", "vocab", "n_train", "temperature", "modality"):
        _flag(p, key)
    p.add_argument("--split", choices=("train", "test", "all"), default=None)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("fuse", parents=[common], help="fuse two or more prediction matrices")
    p.add_argument("matrices", nargs="+")
    p.add_argument("--policy", choices=("max", "mean", "ridge", "mlp"), default=None)
    for key in ("dataset", "vocab", "n_train", "alpha", "hidden", "activations", "lr", "batch", "epochs", "tau"):
        _flag(p, key)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("eval", parents=[common], help="micro-F1 and top-k missed classes")
    p.add_argument("--matrix", required=True)
    for key in ("dataset", "vocab", "n_train", "tau", "k"):
        _flag(p, key)
    p.add_argument("--split", choices=("train", "test", "all"), default=None, help="score only rows of this split")
    p.add_argument("--name", help="report file stem (default: the matrix modality)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", parents=[common], help="finite-difference gradient suite")
    _flag(p, "configs", "random configurations per layer kind")
    p.add_argument("--corrupt", action="append", metavar="KIND", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    verbosity = getattr(args, "verbose", 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(verbosity, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (CliError, OSError, ValueError, KeyError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
