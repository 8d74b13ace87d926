"""Command-line interface: ``fourmix {fit,eval,ecf,pseudo,scaling-study,bench}``.

Exit codes: 0 on success, 2 on configuration errors, 1 on runtime errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .errors import InvalidArgument, InvalidData

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2


class ConfigError(Exception):
    pass


def _count(text: str) -> int:
    """Accept integers written as ``1000000`` or ``1e6``."""
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if v != int(v):
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    return int(v)


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t]


def _ints(text: str) -> list[int]:
    return [_count(t) for t in text.split(",") if t]


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        with open(p) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{p}: top level must be an object")
    return data


def _make(cls, data: dict):
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(f"bad {cls.__name__} fields: {exc}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="run seed (default 1, or the config's seeds)")
    common.add_argument("--out", default=None, help="output directory")
    common.add_argument("--config", default=None, help="JSON config file; flags override its values")

    ap = argparse.ArgumentParser(prog="fourmix", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def training_flags(p):
        p.add_argument("--grid", default=None, help="uniform:ETA:P[:rule], tensor:ETA:N:D[:rule] or stretched:ETA:N:C[:D]")
        p.add_argument("--grid-file", default=None, help="grid JSON written by FourierGrid.save")
        p.add_argument("--epochs1", type=int, default=None, help="stage I epochs")
        p.add_argument("--epochs2", type=int, default=None, help="stage II epochs")
        p.add_argument("--lr1", type=float, default=None)
        p.add_argument("--lr2", type=float, default=None)
        p.add_argument("--lam", type=float, default=None, help="MAE weight in the loss")
        p.add_argument("--batch-size", type=int, default=None)

    p = sub.add_parser("fit", parents=[common], help="sample or load data, train, evaluate")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--target", default=None, help="analytic preset name")
    src.add_argument("--data", default=None, help="sample file (one value per line or CSV)")
    p.add_argument("--kg", type=int, default=None, help="Gaussian components")
    p.add_argument("--kl", type=int, default=None, help="Laplace components")
    p.add_argument("--m", type=_count, default=None, help="number of samples drawn from the target")
    p.add_argument("--split", type=_floats, default=None, help="train,val,test ratios")
    p.add_argument("--seeds", type=_ints, default=None, help="comma-separated seeds (overrides --seed)")
    p.add_argument("--preprocess", choices=("robust", "none"), default=None)
    p.add_argument("--em", action="store_true", help="also fit the EM baseline")
    training_flags(p)

    p = sub.add_parser("eval", parents=[common], help="evaluate a saved model without retraining")
    p.add_argument("model", help="model JSON")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--target", default=None)
    src.add_argument("--ecf", default=None, help="ECF CSV written by the ecf command")
    p.add_argument("--grid", default="uniform:50:1000:midpoint", help="window and node count for target errors")
    p.add_argument("--grid-file", default=None)
    p.add_argument("--test-data", default=None, help="samples for NLL")

    p = sub.add_parser("ecf", parents=[common], help="compute and save an ECF")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--target", default=None)
    src.add_argument("--data", default=None)
    p.add_argument("--m", type=_count, default=None)
    p.add_argument("--split", default="all", choices=("all", "train", "val", "test"),
                   help="which part of the seeded split to use (same split as fit)")
    p.add_argument("--grid", default=None)
    p.add_argument("--grid-file", default=None)

    p = sub.add_parser("pseudo", parents=[common], help="stationary-bootstrap pseudo-sampling experiment")
    p.add_argument("--series", default=None, help="'ar1', 'regime' or a CSV path")
    p.add_argument("--p", dest="restart_prob", type=float, default=None, help="restart probability")
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--n", type=_count, default=None, help="synthetic series length")
    p.add_argument("--m", type=_count, default=None, help="pseudo-samples")
    p.add_argument("--returns", choices=("log", "simple"), default=None)
    p.add_argument("--long-path", type=_count, default=None)
    p.add_argument("--alphas", type=_floats, default=None)
    training_flags(p)

    p = sub.add_parser("scaling-study", parents=[common], help="error decay in M and saturation in P")
    p.add_argument("--target", default=None)
    p.add_argument("--m-values", type=_ints, default=None)
    p.add_argument("--p-values", type=_ints, default=None)
    p.add_argument("--p-fixed", type=_count, default=None)
    p.add_argument("--m-fixed", type=_count, default=None)
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--p-reps", type=int, default=None)
    p.add_argument("--only", choices=("m", "p"), default=None)
    p.add_argument("--epochs1", type=int, default=None)
    p.add_argument("--epochs2", type=int, default=None)

    p = sub.add_parser("bench", parents=[common], help="timing sweeps")
    p.add_argument("--m-values", type=_ints, default=None)
    p.add_argument("--p-values", type=_ints, default=None)
    p.add_argument("--k-values", type=_ints, default=None)
    p.add_argument("--epochs", type=int, default=None)
    return ap


def _train_config(base, args):
    from .train import StageConfig, TrainConfig

    cfg = base if base is not None else TrainConfig()
    s1, s2 = cfg.stage1, cfg.stage2
    if getattr(args, "epochs1", None) is not None:
        s1 = replace(s1, epochs=args.epochs1)
    if getattr(args, "lr1", None) is not None:
        s1 = replace(s1, lr=args.lr1)
    if getattr(args, "epochs2", None) is not None:
        s2 = replace(s2, epochs=args.epochs2)
    if getattr(args, "lr2", None) is not None:
        s2 = replace(s2, lr=args.lr2)
    kw = {"stage1": StageConfig(s1.optimizer, s1.lr, s1.epochs), "stage2": StageConfig(s2.optimizer, s2.lr, s2.epochs)}
    if getattr(args, "lam", None) is not None:
        kw["lam"] = args.lam
    if getattr(args, "batch_size", None) is not None:
        kw["batch_size"] = args.batch_size
    return replace(cfg, **kw)


def _experiment_config(args):
    from .experiments import ExperimentConfig

    data = _load_config(args.config)
    flag_map = {"target": "target", "data": "data", "kg": "k_g", "kl": "k_l", "m": "m", "grid": "grid",
                "grid_file": "grid_file", "preprocess": "preprocess", "out": "out", "split": "split"}
    for flag, key in flag_map.items():
        v = getattr(args, flag, None)
        if v is not None:
            data[key] = v
    if getattr(args, "data", None) is not None:
        data["target"] = None
    elif getattr(args, "target", None) is not None:
        data["data"] = None
    if getattr(args, "seeds", None):
        data["seeds"] = args.seeds
    elif args.seed is not None:
        data["seeds"] = [args.seed]
    if getattr(args, "em", False):
        data["em_baseline"] = True
    cfg = ExperimentConfig.from_dict(data)
    return replace(cfg, train=_train_config(cfg.train, args))


def cmd_fit(args) -> int:
    from .experiments import run_fit

    cfg = _experiment_config(args)
    if cfg.data is not None and not Path(cfg.data).exists():
        raise FileNotFoundError(f"data file not found: {cfg.data}")
    cfg.load_grid()
    for seed in cfg.seeds:
        try:
            art = run_fit(cfg, seed)
        except (InvalidArgument, InvalidData, FileNotFoundError):
            raise
        except Exception as exc:
            raise RuntimeError(f"run seed={seed}: {exc}") from exc
        _print_summary(art.run_id, art.summary(), art.out_dir)
    return EXIT_OK


def _print_summary(run_id, summary, out_dir) -> None:
    e = summary["errors"]
    parts = [f"{k}={e[k]:.4g}" for k in ("l2_re", "l2_im", "mpe_re", "mpe_im", "density_l2_norm", "nll")
             if e.get(k) is not None]
    print(f"{run_id}: " + " ".join(parts))
    if out_dir is not None:
        print(f"  artifacts in {out_dir}")


def cmd_eval(args) -> int:
    from .ecf import SampleSet
    from .experiments import eval_model, read_ecf_csv, node_errors
    from .glmix import load_model
    from .grid import grid_from_dict, parse_grid_spec

    if not Path(args.model).exists():
        raise FileNotFoundError(f"model file not found: {args.model}")
    model = load_model(args.model)
    if args.grid_file:
        with open(args.grid_file) as fh:
            grid = grid_from_dict(json.load(fh))
    else:
        grid = parse_grid_spec(args.grid)
    test = SampleSet.load(args.test_data) if args.test_data else None
    if args.target is not None:
        out = eval_model(model, target=args.target, grid=grid, test=test)
    else:
        out = node_errors(read_ecf_csv(args.ecf, grid if args.grid_file else None), model)
    text = json.dumps(out, indent=1)
    print(text)
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "eval.json").write_text(text)
    return EXIT_OK


def cmd_ecf(args) -> int:
    from .ecf import compute_ecf
    from .experiments import ExperimentConfig, load_samples, split_samples, write_ecf
    from .streams import substream

    data = _load_config(args.config)
    for flag, key in (("target", "target"), ("data", "data"), ("m", "m"), ("grid", "grid"), ("grid_file", "grid_file")):
        v = getattr(args, flag)
        if v is not None:
            data[key] = v
    if args.data is not None:
        data["target"] = None
    elif args.target is not None:
        data["data"] = None
    cfg = ExperimentConfig.from_dict(data)
    seed = args.seed if args.seed is not None else cfg.seeds[0]
    samples, _ = load_samples(cfg, seed)
    if args.split != "all":
        parts = split_samples(samples, cfg.split, substream(seed, "split"))
        samples = parts[("train", "val", "test").index(args.split)]
    ecf = compute_ecf(samples, cfg.load_grid())
    out = Path(args.out or ".")
    path = out / f"ecf-{args.split}-seed{seed}.csv"
    write_ecf(ecf, path)
    print(f"wrote {path} ({ecf.grid.size} nodes, M={samples.count})")
    return EXIT_OK


def cmd_pseudo(args) -> int:
    from .experiments import PseudoConfig, run_pseudo

    data = _load_config(args.config)
    for key in ("series", "restart_prob", "horizon", "n", "m", "returns", "grid", "alphas"):
        v = getattr(args, key)
        if v is not None:
            data[key] = v
    if args.long_path is not None:
        data["long_path"] = args.long_path
    if args.seed is not None:
        data["seed"] = args.seed
    if "restart_prob" not in data:
        raise InvalidArgument("the restart probability --p is required")
    if "train" in data:
        from .train import TrainConfig

        data["train"] = TrainConfig.from_dict(data["train"])
    for key in ("glmm", "gmm", "alphas", "split"):
        if key in data:
            data[key] = tuple(data[key])
    cfg = _make(PseudoConfig, data)
    cfg = replace(cfg, train=_train_config(cfg.train, args))
    res = run_pseudo(cfg, Path(args.out) if args.out else None)
    print(f"pseudo-samples: mean={res['pseudo_moments']['mean']:.5g} variance={res['pseudo_moments']['variance']:.5g}")
    if "oracle" in res:
        print(f"  oracle variance: AR(1) {res['oracle']['ar1_variance']:.5g}, "
              f"bootstrap law {res['oracle']['bootstrap_law_variance']:.5g}")
    for name, r in res["models"].items():
        print(f"  {name}: l2_re={r['l2_re']:.4g} l2_im={r['l2_im']:.4g} mpe_re={r['mpe_re']:.4g} "
              f"mpe_im={r['mpe_im']:.4g} nll={r['nll']:.5g}")
    return EXIT_OK


def cmd_scaling(args) -> int:
    from .experiments import ScalingConfig, run_scaling

    data = _load_config(args.config)
    for flag, key in (("target", "target"), ("m_values", "m_values"), ("p_values", "p_values"),
                      ("p_fixed", "p_fixed"), ("m_fixed", "m_fixed"), ("reps", "reps"), ("p_reps", "p_reps"),
                      ("seed", "seed")):
        v = getattr(args, flag)
        if v is not None:
            data[key] = v
    if "train" in data:
        from .train import TrainConfig

        data["train"] = TrainConfig.from_dict(data["train"])
    for key in ("m_values", "p_values", "split"):
        if key in data:
            data[key] = tuple(data[key])
    cfg = _make(ScalingConfig, data)
    cfg = replace(cfg, train=_train_config(cfg.train, args))
    res = run_scaling(cfg, Path(args.out) if args.out else None, m_study=args.only != "p", p_study=args.only != "m")
    if "slope" in res:
        print(f"M-sweep slope {res['slope']:.4f} (R^2 = {res['r_squared']:.4f})")
        for m, v in res["m_means"].items():
            print(f"  M={m}: mean L2 {v:.4g}")
    for p, v in res.get("p_means", {}).items():
        print(f"  P={p}: mean L2 {v:.4g}")
    if res["failed"]:
        print(f"  {len(res['failed'])} failed cells recorded")
    return EXIT_OK


def cmd_bench(args) -> int:
    from .experiments import run_bench

    data = _load_config(args.config)
    for flag in ("m_values", "p_values", "k_values", "epochs", "seed"):
        v = getattr(args, flag)
        if v is not None:
            data[flag] = v
    unknown = set(data) - {"m_values", "p_values", "k_values", "m_train_values", "d_values", "epochs", "seed",
                          "repeats"}
    if unknown:
        raise ConfigError(f"unknown bench keys: {sorted(unknown)}")
    res = run_bench(**data, out=Path(args.out) if args.out else None)
    for key in ("ecf_slope_M", "epoch_slope_P", "epoch_slope_K", "train_time_spread_M"):
        print(f"{key}: {res[key]:.4f}")
    return EXIT_OK


COMMANDS = {"fit": cmd_fit, "eval": cmd_eval, "ecf": cmd_ecf, "pseudo": cmd_pseudo,
            "scaling-study": cmd_scaling, "bench": cmd_bench}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, InvalidArgument) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
