"""Command-line interface.

Subcommands: extract-types, train, eval, predict, gradcheck.  Exit codes:
0 success, 1 check failure, 2 usage or I/O error.  ``train`` accepts a
flat ``key = value`` config file; flags given on the command line win.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
import time
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Sequence

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

log = logging.getLogger("mvmatch")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    train: str | None = None
    dev: str | None = None
    embeddings: str | None = None
    profiles: str | None = None
    out: str | None = None
    metrics_json: str | None = None
    hidden: int = 300
    perspectives: int = 20
    agg_hidden: int = 100
    mlp_hidden: int = 100
    char_dim: int = 20
    char_hidden: int = 50
    init_scale: float = 0.08
    precision: int = 64
    margin: float = 0.5
    lr: float = 1e-4
    epochs: int = 30
    optimizer: str = "adam"
    clip_norm: float | None = None
    seed: int = 0
    row: int | None = None
    use_entity_pair: bool | None = None
    use_type_view: bool | None = None
    concat_relation_and_type: bool | None = None
    abstract_question: bool | None = None
    use_char: bool | None = None

    def model_config(self):
        from .config import ModelConfig, ViewConfig
        base = ViewConfig.from_table_row(self.row) if self.row is not None else ViewConfig()
        flags = {f.name: getattr(self, f.name) for f in fields(ViewConfig)
                 if getattr(self, f.name) is not None}
        views = ViewConfig(**{**{f.name: getattr(base, f.name) for f in fields(ViewConfig)}, **flags})
        return ModelConfig(hidden=self.hidden, perspectives=self.perspectives,
                           agg_hidden=self.agg_hidden, mlp_hidden=self.mlp_hidden,
                           char_dim=self.char_dim, char_hidden=self.char_hidden,
                           init_scale=self.init_scale, seed=self.seed, precision=self.precision,
                           views=views)

    def train_config(self):
        from .config import TrainConfig
        return TrainConfig(lr=self.lr, epochs=self.epochs, margin=self.margin,
                           optimizer=self.optimizer, clip_norm=self.clip_norm, seed=self.seed)


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _convert(key: str, raw: str):
    kind = _FIELD_TYPES[key]
    text = raw.strip()
    if "None" in kind and text.lower() in ("", "none", "null"):
        return None
    if kind.startswith("bool"):
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise UsageError(f"{key}: expected a boolean, got {raw!r}")
    try:
        if kind.startswith("int"):
            return int(text)
        if kind.startswith("float"):
            return float(text)
    except ValueError:
        raise UsageError(f"{key}: cannot parse {raw!r}") from None
    return text


def read_config_file(path: str | Path) -> dict:
    out = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    for line_no, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{line_no}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _FIELD_TYPES:
            raise UsageError(f"{path}:{line_no}: unknown key {key!r}")
        out[key] = _convert(key, value)
    return out


def resolve_run_config(config_path: str | None, overrides: dict) -> RunConfig:
    values = read_config_file(config_path) if config_path else {}
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        rc = RunConfig(**values)
        rc.model_config()
        rc.train_config()
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid configuration: {exc}") from None
    return rc


def write_atomic(path: str | Path, data: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit_metrics(metrics: dict, json_path: str | None = None) -> None:
    for k, v in metrics.items():
        print(f"{k}\t{v}")
    if json_path:
        write_atomic(json_path, json.dumps(metrics, indent=2, sort_keys=True) + "\n")


# -- commands --------------------------------------------------------------

def cmd_extract_types(args) -> int:
    from .typeminer import TripleStore, format_profiles, mine_profiles
    if not 0.0 < args.threshold <= 1.0:
        raise UsageError("--threshold must be in (0, 1]")
    if args.cap < 1:
        raise UsageError("--cap must be positive")
    store = TripleStore.load(args.triples, args.types)
    profiles = mine_profiles(store, threshold=args.threshold, cap=args.cap, seed=args.seed)
    write_atomic(args.out, format_profiles(profiles))
    emit_metrics({"relations": len(profiles)})
    return EXIT_OK


def _load_split(path, split):
    from .data import load_dataset
    ds = load_dataset(path, split=split)
    for w in ds.warnings:
        print(w, file=sys.stderr)
    if not ds.instances:
        raise UsageError(f"{path}: no usable instances")
    return ds


def cmd_train(args) -> int:
    from .checkpoint import save_checkpoint
    from .embeddings import load_pretrained
    from .model import build_model
    from .training import train
    from .typeminer import parse_profiles

    overrides = {k: getattr(args, k, None) for k in _FIELD_TYPES}
    rc = resolve_run_config(args.config, overrides)
    for key in ("train", "embeddings", "out"):
        if getattr(rc, key) is None:
            raise UsageError(f"train needs --{key}")
    mc = rc.model_config()
    vocab, table, _ = load_pretrained(rc.embeddings, seed=rc.seed)
    profiles = parse_profiles(rc.profiles) if rc.profiles else {}
    train_set = _load_split(rc.train, "train")
    dev_set = _load_split(rc.dev, "dev") if rc.dev else None
    seen = train_set.instances + (dev_set.instances if dev_set else [])
    model = build_model(mc, vocab, table, seen, profiles)

    t0 = time.perf_counter()
    result = train(model, train_set.instances, rc.train_config(),
                   dev_set=dev_set.instances if dev_set else None,
                   on_epoch=lambda m: print(f"epoch\t{m.epoch}\tloss\t{m.loss:.6f}"
                                            + (f"\tdev_accuracy\t{m.dev_accuracy:.4f}"
                                               if m.dev_accuracy is not None else ""),
                                            file=sys.stderr))
    save_checkpoint(model, rc.out)
    metrics = {"train_instances": len(train_set), "epochs": len(result.history),
               "final_loss": result.final.loss if result.final else float("nan"),
               "seconds": round(time.perf_counter() - t0, 3)}
    if dev_set is not None:
        metrics["best_epoch"] = result.best_epoch
        metrics["dev_accuracy"] = result.best_dev_accuracy
    emit_metrics(metrics, rc.metrics_json)
    return EXIT_OK


def cmd_eval(args) -> int:
    from .checkpoint import load_checkpoint
    from .data import evaluate
    model = load_checkpoint(args.checkpoint)
    ds = _load_split(args.data, args.split)
    emit_metrics({"accuracy": evaluate(model, ds)}, args.metrics_json)
    return EXIT_OK


def cmd_predict(args) -> int:
    from .checkpoint import load_checkpoint
    model = load_checkpoint(args.checkpoint)
    ds = _load_split(args.data, "test")
    lines = []
    for inst in ds:
        ranked = model.rank_candidates(inst)[:args.top_k]
        lines.append(" ".join(inst.tokens) + "\t"
                     + "\t".join(f"{c.relation}:{c.score:.6f}" for c in ranked))
    text = "\n".join(lines) + "\n"
    if args.out:
        write_atomic(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    from .checks import model_case, module_cases, op_cases, run_suite
    if args.tolerance <= 0:
        raise UsageError("--tolerance must be positive")
    cases = op_cases(args.seed) + module_cases(args.seed)
    cases.append(model_case(args.seed, row=args.row))
    results = run_suite(cases, tolerance=args.tolerance, max_entries=args.max_entries,
                        corrupt=args.corrupt_gradient, seed=args.seed)
    failed = 0
    for case, r in results:
        status = "ok" if r.passed else "FAIL"
        failed += not r.passed
        if args.verbose or not r.passed:
            print(f"{status}\t{case}\t{r.name}\t{r.max_rel_error:.3e}\t{r.entries}\t{r.kinks}")
    emit_metrics({"checked": len(results), "failed": failed,
                  "max_rel_error": max(r.max_rel_error for _, r in results),
                  "kinks_skipped": sum(r.kinks for _, r in results)})
    return EXIT_OK if failed == 0 else EXIT_FAIL


# -- parser ----------------------------------------------------------------

def _bool(text: str) -> bool:
    try:
        return _convert("use_char", text)
    except UsageError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mvmatch", description=__doc__.split("\n")[0])
    p.add_argument("--backend", choices=("numba", "numpy"), help="kernel backend")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("extract-types", help="mine tail-type profiles from a triple dump")
    e.add_argument("--triples", required=True)
    e.add_argument("--types", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--threshold", type=float, default=0.95)
    e.add_argument("--cap", type=int, default=500)
    e.add_argument("--seed", type=int, default=0)
    e.set_defaults(func=cmd_extract_types)

    t = sub.add_parser("train", help="train a model and write a checkpoint")
    t.add_argument("--config", help="flat key = value file; flags override it")
    for name in ("train", "dev", "embeddings", "profiles", "out", "metrics_json"):
        t.add_argument("--" + name.replace("_", "-"), dest=name)
    numeric = {"hidden": int, "perspectives": int, "agg_hidden": int, "mlp_hidden": int,
               "char_dim": int, "char_hidden": int, "init_scale": float, "precision": int,
               "margin": float, "lr": float, "epochs": int, "clip_norm": float, "seed": int,
               "row": int}
    for name, kind in numeric.items():
        t.add_argument("--" + name.replace("_", "-"), dest=name, type=kind)
    t.add_argument("--optimizer", choices=("adam", "sgd"))
    for name in ("use_entity_pair", "use_type_view", "concat_relation_and_type",
                 "abstract_question", "use_char"):
        t.add_argument("--" + name.replace("_", "-"), dest=name, type=_bool, metavar="BOOL")
    t.set_defaults(func=cmd_train)

    v = sub.add_parser("eval", help="accuracy of a checkpoint on a dataset")
    v.add_argument("--checkpoint", required=True)
    v.add_argument("--data", required=True)
    v.add_argument("--split", default="test", choices=("train", "dev", "test"))
    v.add_argument("--metrics-json", dest="metrics_json")
    v.set_defaults(func=cmd_eval)

    r = sub.add_parser("predict", help="rank candidates for each question")
    r.add_argument("--checkpoint", required=True)
    r.add_argument("--data", required=True)
    r.add_argument("--top-k", type=int, default=1)
    r.add_argument("--out")
    r.set_defaults(func=cmd_predict)

    g = sub.add_parser("gradcheck", help="finite-difference check of all gradients")
    g.add_argument("--tolerance", type=float, default=1e-4)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--row", type=int, default=11, help="view preset for the full-model case")
    g.add_argument("--max-entries", type=int, default=None,
                   help="check a random subset of coordinates per tensor")
    g.add_argument("--corrupt-gradient", action="store_true", help=argparse.SUPPRESS)
    g.set_defaults(func=cmd_gradcheck)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.backend:
        from . import kernels
        kernels.set_backend(args.backend)
    from .checkpoint import CheckpointError
    from .data import DatasetFormatError
    from .embeddings import EmbeddingFormatError
    from .typeminer import TsvFormatError
    try:
        return args.func(args)
    except (UsageError, OSError, CheckpointError, DatasetFormatError, EmbeddingFormatError,
            TsvFormatError) as exc:
        print(f"mvmatch {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"mvmatch {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
