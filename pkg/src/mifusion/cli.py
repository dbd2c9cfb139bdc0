"""Command-line surface: dataset synthesis, training, evaluation, the
Gaussian MI oracle, the ablation grid and loss-trace regeneration.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from . import dataio
from .errors import ConfigError, DataError, NumericError
from .metrics import compute_metrics
from .model import MultimodalModel
from .numeric import make_rng, spawn_rng
from .synthetic import (
    GaussianPairSpec,
    SynthMsaSpec,
    ba_estimate,
    fit_ba_predictor,
    fit_infonce_predictor,
    gen_msa_dataset,
    infonce_estimate,
    true_gaussian_mi,
)
from .trainer import build_trace, steps_from_csv, steps_to_csv, trace_to_csv, train

DROP_TOKENS = ("lba", "lcpc", "history", "gmm", "iba_tv", "iba_ta", "iba_va", "ln_t", "ln_v", "ln_a")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mifusion", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic multimodal dataset")
    p.add_argument("--spec", required=True, help="JSON generator spec")
    p.add_argument("--out", required=True, help="output directory for the JSONL splits")
    p.add_argument("--seed", type=int, help="override the spec's generator seed")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="run the two-stage training loop")
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--out", help="override the configured output directory")
    p.add_argument("--seed", type=int, help="override the configured seed")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--dump-scores", dest="dump_scores", help="write per-sample score CSV here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("mi-oracle", help="recover a known Gaussian MI with the trained bounds")
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--n", type=int, default=100_000, help="Monte-Carlo evaluation samples")
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_mi_oracle)

    p = sub.add_parser("ablate", help="train with loss terms or estimators removed")
    p.add_argument("--config", required=True)
    p.add_argument("--drop", required=True, help="comma-separated terms, e.g. lba,ln_v,history")
    p.add_argument("--out", help="override the configured output directory")
    p.add_argument("--seed", type=int, help="override the configured seed")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("trace", help="re-emit the interval-averaged loss trace from a run")
    p.add_argument("--run", required=True, help="directory containing steps.csv")
    p.set_defaults(func=cmd_trace)
    return parser


def cli_main(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    except SystemExit as exc:  # argparse -h
        return int(exc.code or 0)
    try:
        return args.func(args)
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


def main():
    sys.exit(cli_main(sys.argv[1:]))


# --- handlers ---


def cmd_synth(args) -> int:
    try:
        with open(args.spec, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read spec: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"spec is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("spec must be a JSON object")
    seed = doc.pop("seed", 0)
    if args.seed is not None:
        seed = args.seed
    known = {f.name for f in dataclasses.fields(SynthMsaSpec)}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ConfigError(f"unknown spec keys: {unknown}")
    try:
        spec = SynthMsaSpec(**doc)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad generator spec: {exc}") from exc
    splits = gen_msa_dataset(spec, make_rng(seed))
    os.makedirs(args.out, exist_ok=True)
    for name, samples in zip(("train", "val", "test"), splits):
        path = os.path.join(args.out, f"{name}.jsonl")
        dataio.save_jsonl(samples, path)
        print(f"wrote {len(samples)} samples to {path}")
    return 0


def _run_training(doc: dict, out_dir=None):
    train_data = dataio.load_jsonl(doc["train_path"])
    val_data = dataio.load_jsonl(doc["val_path"])
    if not train_data or not val_data:
        raise ConfigError("train and validation datasets must be nonempty")
    try:
        tcfg = dataio.build_train_config(doc)
        mcfg = dataio.build_model_config(doc, train_data)
    except TypeError as exc:
        raise ConfigError(f"bad configuration value: {exc}") from exc
    model = MultimodalModel(mcfg, spawn_rng(tcfg.seed, 0))
    result = train(model, train_data, val_data, tcfg)

    out = out_dir or doc["out_dir"]
    os.makedirs(out, exist_ok=True)
    model.load_param_arrays(result.best_params)
    dataio.save_checkpoint(model, tcfg, os.path.join(out, "checkpoint.json"))
    dataio.write_text(os.path.join(out, "trace.csv"), trace_to_csv(result.trace))
    dataio.write_text(
        os.path.join(out, "steps.csv"), steps_to_csv(result.stage2_rows, result.lld_rows)
    )
    keys = ["epoch", "mean_lld", "mae", "corr", "acc7", "acc2_nonneg", "acc2_pos", "f1_nonneg", "f1_pos"]
    lines = [",".join(keys)]
    for row in result.epoch_rows:
        lines.append(",".join(repr(float(row[k])) if k != "epoch" else str(row[k]) for k in keys))
    dataio.write_text(os.path.join(out, "epochs.csv"), "\n".join(lines) + "\n")

    test_path = doc.get("test_path")
    if test_path:
        test_data = dataio.load_jsonl(test_path)
        if test_data:
            preds = _predict_chunked(model, test_data)
            labels = np.array([s.label for s in test_data])
            report = compute_metrics(preds, labels)
            dataio.write_text(
                os.path.join(out, "test_metrics.json"),
                json.dumps(report.as_dict(), sort_keys=True) + "\n",
            )
    print(
        f"best epoch {result.best_epoch} with validation MAE {result.best_val_mae:.6f} "
        f"({result.epochs_run} epochs run); outputs in {out}"
    )
    return result


def cmd_train(args) -> int:
    doc = dataio.load_run_config(args.config)
    if args.seed is not None:
        doc["seed"] = args.seed
    _run_training(doc, out_dir=args.out)
    return 0


def apply_drops(doc: dict, drops) -> dict:
    """Translate ablation terms into configuration changes."""
    doc = dict(doc)
    for term in drops:
        if term == "lba":
            doc["beta"] = 0.0
        elif term == "lcpc":
            doc["alpha"] = 0.0
        elif term == "history":
            doc["memory_size_batches"] = 0
        elif term == "gmm":
            doc["pooled_entropy"] = True
        elif term.startswith("iba_") and term in DROP_TOKENS:
            pairs = [p for p in doc.get("ba_pairs", ["tv", "ta"]) if p != term[4:]]
            doc["ba_pairs"] = pairs
        elif term.startswith("ln_") and term in DROP_TOKENS:
            mods = [m for m in doc.get("cpc_modalities", ["t", "v", "a"]) if m != term[3:]]
            doc["cpc_modalities"] = mods
        else:
            raise ConfigError(f"unknown drop term {term!r}; choose from {DROP_TOKENS}")
    return doc


def cmd_ablate(args) -> int:
    doc = dataio.load_run_config(args.config)
    drops = [t.strip() for t in args.drop.split(",") if t.strip()]
    if not drops:
        raise ConfigError("--drop needs at least one term")
    doc = apply_drops(doc, drops)
    if args.seed is not None:
        doc["seed"] = args.seed
    _run_training(doc, out_dir=args.out)
    return 0


def _predict_chunked(model, samples, chunk=256):
    parts = []
    for lo in range(0, len(samples), chunk):
        parts.append(model.predict(samples[lo : lo + chunk]))
    return np.concatenate(parts)


def cmd_eval(args) -> int:
    model, _ = dataio.load_checkpoint(args.ckpt)
    data = dataio.load_jsonl(args.data)
    if not data:
        raise ConfigError("evaluation dataset is empty")
    preds = _predict_chunked(model, data)
    labels = np.array([s.label for s in data])
    report = compute_metrics(preds, labels)
    print(json.dumps(report.as_dict(), sort_keys=True))
    if args.dump_scores:
        dataio.dump_scores(model, data, args.dump_scores)
        print(f"wrote per-sample scores to {args.dump_scores}", file=sys.stderr)
    return 0


def cmd_mi_oracle(args) -> int:
    try:
        spec = GaussianPairSpec(dim=args.dim, rho=args.rho)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    rng = make_rng(args.seed)
    true_mi = true_gaussian_mi(spec)
    pred = fit_ba_predictor(spec, rng, steps=args.steps)
    ba = ba_estimate(pred, spec, rng, n=args.n)
    g = fit_infonce_predictor(spec, rng)
    nce = infonce_estimate(g, spec, rng)
    print(f"true_mi={true_mi!r}")
    print(f"i_ba={ba['i_ba']!r} se={ba['se']!r} gap={true_mi - ba['i_ba']!r}")
    print(f"infonce={nce['infonce']!r} se={nce['se']!r} gap={true_mi - nce['infonce']!r}")
    return 0


def cmd_trace(args) -> int:
    steps_path = os.path.join(args.run, "steps.csv")
    try:
        with open(steps_path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {steps_path}: {exc}") from exc
    try:
        stage2_rows, lld_rows = steps_from_csv(text)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    sys.stdout.write(trace_to_csv(build_trace(stage2_rows, lld_rows)))
    return 0


if __name__ == "__main__":
    main()
