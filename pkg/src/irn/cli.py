"""``irn`` command line: prepare | train | eval | crossval | ablation | synth | gradcheck.

Exit codes: 0 success, 1 usage or config error, 2 data error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from irn import experiments as ex
from irn.errors import ConfigError, DataError, NumericError

log = logging.getLogger("irn")

DATA_ROOT_VAR = "IRN_DATA_ROOT"
OUTPUT_ROOT_VAR = "IRN_OUTPUT_ROOT"

# flags that map one-to-one onto config keys
_FLAG_KEYS = ("preset", "variant", "T", "epochs", "seed", "lr", "batch_size", "protocol", "k", "fold",
              "fold_source", "init_std")


def _parse_value(text: str):
    import yaml

    try:
        return yaml.safe_load(text)
    except yaml.YAMLError:
        return text


def _overrides(args) -> dict:
    out = {}
    for key in _FLAG_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            out[key] = val
    for flag, key in (("use_h", "use_h"), ("lstm", "lstm"), ("pretrain", "pretrain"),
                      ("random_init", "random_init")):
        val = getattr(args, flag, None)
        if val is not None:
            out[key] = val
    for key in ("pretrained_inter", "pretrained_intra"):
        val = getattr(args, key, None)
        if val is not None:
            out[key] = str(ex.env_path(val, OUTPUT_ROOT_VAR))
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, val = item.split("=", 1)
        out[key.strip()] = _parse_value(val)
    return out


def _config(args) -> dict:
    file_values = ex.load_config_file(args.config) if getattr(args, "config", None) else {}
    return ex.resolve_config(file_values, _overrides(args))


def _data(path) -> Path:
    return ex.env_path(path, DATA_ROOT_VAR)


def _out(path) -> Path:
    return ex.env_path(path, OUTPUT_ROOT_VAR)


def cmd_prepare(args) -> int:
    manifest = ex.prepare_dataset(args.dataset, _out(args.out), _data(args.input), n=args.n, seed=args.seed,
                                  noise=args.noise, n_frames=args.frames)
    print(f"wrote {len(manifest['sequences'])} records to {_out(args.out)}")
    return 0


def cmd_train(args) -> int:
    cfg = _config(args)
    res = ex.run_train(cfg, _data(args.manifest), _out(args.out), force=args.force)
    final = res["final"] or {}
    print(f"trained {res['epochs']} epochs; final loss {final.get('loss', float('nan')):.4f}")
    return 0


def cmd_eval(args) -> int:
    cfg = _config(args) if (args.config or args.set) else None
    bundle = ex.run_eval(_out(args.checkpoint), _data(args.manifest), _out(args.out), cfg)
    print(f"accuracy {bundle.pooled_accuracy:.4f} on {int(bundle.confusion.sum())} samples")
    return 0


def cmd_crossval(args) -> int:
    cfg = _config(args)
    bundle = ex.run_crossval(cfg, _data(args.manifest), _out(args.out), force=args.force)
    folds = " ".join(f"{a:.3f}" for a in bundle.fold_accuracies)
    print(f"mean accuracy {bundle.mean_accuracy:.4f} over {len(bundle.fold_accuracies)} folds ({folds})")
    return 0


def cmd_ablation(args) -> int:
    cfg = _config(args)
    rows = args.rows.split(",") if args.rows else None
    table = ex.run_ablation(cfg, _data(args.manifest), _out(args.out), rows, force=args.force)
    sys.stdout.write(ex.format_table(table))
    return 0


def cmd_synth(args) -> int:
    res = ex.run_synthetic(_out(args.out) if args.out else None, n=args.n, n_test=args.n_test, seed=args.seed,
                           variant=args.variant, lstm=bool(args.lstm), epochs=args.epochs)
    print(f"train accuracy {res['train_acc']:.4f}  test accuracy {res['test_acc']:.4f}  "
          f"({res['epochs']} epochs, {res['seconds']:.1f}s)")
    return 0


def cmd_gradcheck(args) -> int:
    from irn.gradsuite import run_suite

    results = run_suite(eps=args.eps, tol=args.tol, seed=args.seed, which=args.which)
    failed = 0
    for name, rep in results:
        status = "ok" if rep.passed else "FAIL"
        failed += not rep.passed
        print(f"{status:4s} {name}  max rel err {rep.max_rel_err:.2e}")
    print(f"{len(results) - failed}/{len(results)} gradient checks passed")
    return 3 if failed else 0


def _bool_flag(p, name: str, help: str) -> None:
    dest = name.replace("-", "_")
    p.add_argument(f"--{name}", dest=dest, action="store_true", default=None, help=help)
    p.add_argument(f"--no-{name}", dest=dest, action="store_false")


def _run_flags(p, with_manifest: bool = True) -> None:
    p.add_argument("--config", help="flat YAML/JSON config file")
    if with_manifest:
        p.add_argument("--manifest", required=True, help="manifest.json written by 'irn prepare'")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--preset", choices=sorted(ex.PRESETS))
    p.add_argument("--variant", choices=["inter", "intra", "fused", "fc1_fused", "naive"])
    _bool_flag(p, "use-h", "append the joint-distance feature to each relation row")
    _bool_flag(p, "lstm", "classify a sequence of windows with the LSTM head")
    _bool_flag(p, "pretrain", "train the inter/intra models first (fused variants)")
    _bool_flag(p, "random-init", "train fused variants from scratch")
    p.add_argument("--pretrained-inter")
    p.add_argument("--pretrained-intra")
    p.add_argument("--T", type=int, help="frames per window")
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--init-std", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--protocol")
    p.add_argument("--k", type=int, help="number of folds for the kfold protocol")
    p.add_argument("--fold", type=int)
    p.add_argument("--fold-source", choices=["auto", "explicit", "grouped"])
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override any config key")
    p.add_argument("--force", action="store_true", help="overwrite an out dir holding a different config")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="irn", description="Interaction relational networks on skeleton data")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="convert a dataset into canonical records and a manifest")
    p.add_argument("--dataset", required=True, choices=ex.DATASETS)
    p.add_argument("--input", help="dataset root (not needed for synthetic)")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=1000, help="synthetic: number of sequences")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", type=float, default=0.02)
    p.add_argument("--frames", type=int, default=16, help="synthetic: frames per sequence")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="train one model")
    _run_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("crossval", help="train and evaluate on every fold")
    _run_flags(p)
    p.set_defaults(func=cmd_crossval)

    p = sub.add_parser("ablation", help="run ablation rows and emit one accuracy table")
    _run_flags(p)
    p.add_argument("--rows", help=f"comma-separated subset of: {','.join(ex.ABLATION_ROWS)}")
    p.set_defaults(func=cmd_ablation)

    p = sub.add_parser("synth", help="end-to-end run on the synthetic corpus")
    p.add_argument("--out")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--n-test", type=int, default=200)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--variant", default="inter", choices=["inter", "intra", "fused", "fc1_fused", "naive"])
    p.add_argument("--lstm", action="store_true")
    p.add_argument("--epochs", type=int, default=50)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("gradcheck", help="finite-difference gradient suite")
    p.add_argument("--eps", type=float, default=1e-5)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--which", choices=["all", "ops", "models"], default="all")
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code == 0 else 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    except (DataError, FileNotFoundError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return 2
    except NumericError as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return 3
    except json.JSONDecodeError as e:
        print(f"data error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
