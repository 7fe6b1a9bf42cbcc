"""Command-line entry points: ``synth``, ``train``, ``eval`` and ``fuse``.

Settings come from an optional flat ``key=value`` file (``--config``)
overridden by command-line flags. The merged settings are echoed to
``run_config.txt`` in the output directory.

Exit codes: 0 success, 1 configuration error, 2 data error, 3 numerical
abort. Failures print one JSON line ``{"error": kind, "reason": text}`` on
standard error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import ConfigError, KBError
from .evaluation import TIE_POLICIES, evaluate_relation_prediction
from .fusion import (NORMALIZATIONS, SCOPES, STRATEGIES, FusionConfig, curve_auc, load_gold,
                     load_re_scores, precision_recall_curve, re_only_ranking, rescore,
                     write_curve_csv)
from .kg import PATTERNS, generate_synthetic_kb, load_kb, save_kb
from .models import load_checkpoint
from .trainer import TrainConfig, train, write_report


def _bool(text):
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _weights(text):
    parts = str(text).replace(",", ":").split(":")
    return tuple(float(p) for p in parts)


def _floats(text):
    return [float(p) for p in str(text).split(",") if p.strip()]


# key -> (type, default, help); None defaults defer to the library
OPTIONS = {
    "data": (str, None, "dataset directory (train/valid/test TSV or a KB manifest)"),
    "out": (str, None, "output directory"),
    "seed": (int, 0, "seed for all randomness"),
    # synth
    "entities": (int, 20, "number of synthetic entities"),
    "pattern": (str, "inverse-pair", f"synthetic pattern: {', '.join(PATTERNS)}"),
    "density": (float, 0.5, "fraction of candidate pairs/triples emitted"),
    # train
    "model_kind": (str, "TransE", "TransE, DistMult or ComplEx"),
    "K": (int, 100, "embedding dimension"),
    "norm": (str, "L1", "TransE norm, L1 or L2"),
    "margin": (float, 1.0, "TransE margin"),
    "lr": (float, None, "learning rate"),
    "optimizer": (str, None, "sgd or adagrad"),
    "epochs": (int, 1000, "training epochs"),
    "batch_size": (int, 100, "positives per batch"),
    "negatives": (int, None, "negatives per positive"),
    "corruption_weights": (_weights, (1.0, 1.0, 1.0), "subject:object:relation corruption weights"),
    "l2": (float, 1e-3, "L2 coefficient for DistMult/ComplEx"),
    "normalize_entities": (_bool, True, "renormalise TransE entity rows each epoch"),
    "filtered_negatives": (_bool, False, "redraw negatives found in train"),
    "workers": (int, 1, "training threads (>1 is not reproducible)"),
    # eval / fuse
    "checkpoint": (str, None, "checkpoint directory or manifest"),
    "split": (str, "test", "split to evaluate"),
    "tie_policy": (str, "mean", f"tie policy: {', '.join(TIE_POLICIES)}"),
    "dataset_name": (str, None, "dataset label for the TSV line"),
    "re_scores": (str, None, "JSON Lines file of relation-extraction scores"),
    "gold": (str, None, "gold triples TSV"),
    "alphas": (_floats, [1.0, 0.9, 0.5], "comma-separated alpha values"),
    "strategy": (str, "weighted", f"combination: {', '.join(STRATEGIES)}"),
    "scope": (str, "top-nonNA", f"re-scoring scope: {', '.join(SCOPES)}"),
    "kbe_normalization": (str, "minmax", f"KBE normalisation: {', '.join(NORMALIZATIONS)}"),
}

COMMAND_KEYS = {
    "synth": ["out", "seed", "entities", "pattern", "density"],
    "train": ["data", "out", "seed", "model_kind", "K", "norm", "margin", "lr", "optimizer",
              "epochs", "batch_size", "negatives", "corruption_weights", "l2",
              "normalize_entities", "filtered_negatives", "workers"],
    "eval": ["data", "out", "checkpoint", "split", "tie_policy", "dataset_name"],
    "fuse": ["data", "out", "checkpoint", "re_scores", "gold", "alphas", "strategy", "scope",
             "kbe_normalization"],
}


def read_config_file(path) -> dict:
    values = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{line_no}: expected key=value")
            key, value = (x.strip() for x in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in OPTIONS:
                raise ConfigError(f"{path}:{line_no}: unknown key {key!r}")
            values[key] = value
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kberel", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for command, keys in COMMAND_KEYS.items():
        p = sub.add_parser(command)
        p.add_argument("--config", help="flat key=value settings file")
        for key in keys:
            _, default, help_text = OPTIONS[key]
            p.add_argument("--" + key.replace("_", "-"), dest=key, default=None,
                           help=f"{help_text} (default: {default})")
    return parser


def resolve(command, args) -> dict:
    """Merge defaults, the config file and explicit flags (flags win)."""
    raw = {}
    if args.config:
        try:
            raw.update(read_config_file(args.config))
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
    for key in COMMAND_KEYS[command]:
        value = getattr(args, key, None)
        if value is not None:
            raw[key] = value
    settings = {}
    for key in COMMAND_KEYS[command]:
        conv, default, _ = OPTIONS[key]
        if key in raw:
            try:
                settings[key] = conv(raw[key])
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {exc}") from None
        else:
            settings[key] = default
    if not settings.get("out"):
        raise ConfigError("--out is required")
    return settings


def _echo(settings, out: Path):
    lines = []
    for key in sorted(settings):
        v = settings[key]
        if isinstance(v, (list, tuple)):
            sep = ":" if key == "corruption_weights" else ","
            v = sep.join(repr(x) for x in v)
        lines.append(f"{key}={v}")
    (out / "run_config.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


def _require(settings, *keys):
    for key in keys:
        if not settings.get(key):
            raise ConfigError(f"--{key.replace('_', '-')} is required")


def _progress(epoch, loss):
    print(f"{epoch}\t{loss!r}", file=sys.stderr, flush=True)


def run_synth(settings) -> int:
    out = Path(settings["out"])
    kb = generate_synthetic_kb(settings["entities"], settings["pattern"], settings["density"],
                               settings["seed"])
    save_kb(kb, out)
    _echo(settings, out)
    return 0


def run_train(settings) -> int:
    _require(settings, "data")
    kb = load_kb(settings["data"])
    cfg = TrainConfig(**{k: settings[k] for k in COMMAND_KEYS["train"] if k not in ("data", "out")})
    out = Path(settings["out"])
    out.mkdir(parents=True, exist_ok=True)
    report, _ = train(kb, cfg, progress=_progress, checkpoint_dir=out / "checkpoint")
    report.checkpoint = "checkpoint/checkpoint.json"
    write_report(report, out / "train_report.json")
    (out / "train_timing.json").write_text(json.dumps({"wall_time": report.wall_time}) + "\n")
    _echo(settings, out)
    return 0


def run_eval(settings) -> int:
    _require(settings, "data", "checkpoint")
    kb = load_kb(settings["data"])
    params = load_checkpoint(settings["checkpoint"])
    name = settings["dataset_name"] or Path(settings["data"]).resolve().name
    report = evaluate_relation_prediction(params, kb, settings["split"], settings["tie_policy"],
                                          dataset=name)
    out = Path(settings["out"])
    out.mkdir(parents=True, exist_ok=True)
    (out / "eval_report.json").write_text(report.to_json(), encoding="utf-8")
    line = report.tsv_line()
    (out / "eval.tsv").write_text(line + "\n", encoding="utf-8")
    _echo(settings, out)
    print(line)
    return 0


def _alpha_tag(alpha):
    return repr(float(alpha))


def run_fuse(settings) -> int:
    _require(settings, "data", "checkpoint", "re_scores", "gold")
    if not settings["alphas"]:
        raise ConfigError("alphas must list at least one value")
    kb = load_kb(settings["data"])
    params = load_checkpoint(settings["checkpoint"])
    table = load_re_scores(settings["re_scores"])
    gold = load_gold(settings["gold"])
    out = Path(settings["out"])
    out.mkdir(parents=True, exist_ok=True)
    configs = [FusionConfig(a, settings["strategy"], settings["scope"], settings["kbe_normalization"])
               for a in settings["alphas"]]

    baseline = precision_recall_curve(re_only_ranking(table), gold)
    write_curve_csv(baseline, out / "pr_re_only.csv")
    summary = {"re_only": {"auc": curve_auc(baseline), "points": len(baseline)}, "alphas": {}}
    for cfg in configs:
        preds, skipped = rescore(table, params, kb.vocab, cfg)
        points = precision_recall_curve(preds, gold)
        name = f"pr_alpha_{_alpha_tag(cfg.alpha)}.csv"
        write_curve_csv(points, out / name)
        summary["alphas"][_alpha_tag(cfg.alpha)] = {
            "auc": curve_auc(points), "points": len(points), "skipped": skipped, "csv": name}
    summary.update(strategy=settings["strategy"], scope=settings["scope"],
                   kbe_normalization=settings["kbe_normalization"])
    (out / "fusion_summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    _echo(settings, out)
    return 0


RUNNERS = {"synth": run_synth, "train": run_train, "eval": run_eval, "fuse": run_fuse}


def _fail(kind, code, reason):
    print(json.dumps({"error": kind, "reason": str(reason)}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        settings = resolve(args.command, args)
        return RUNNERS[args.command](settings)
    except KBError as exc:
        return _fail(exc.kind, exc.exit_code, exc)
    except FileNotFoundError as exc:
        return _fail("data", 2, exc)
    except OSError as exc:
        return _fail("data", 2, exc)


if __name__ == "__main__":
    sys.exit(main())
