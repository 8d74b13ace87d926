"""End-to-end experiment pipelines shared by the CLI and the benchmark scripts."""

from __future__ import annotations

import csv
import json
import math
import os
import platform
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .ecf import EcfFunction, EmpiricalCF, SampleSet, compute_ecf
from .errors import InvalidArgument
from .grid import FourierGridMulti, parse_grid_spec, tensor_grid, uniform_grid
from .metrics import ErrorReport, TheoryDiagnostics, bound_assembly, error_report, loglog_slope, nll, tail_prob, theory_quantities
from .resample import (
    BootstrapConfig,
    TimeSeries,
    ar1_aggregate_variance,
    ar1_series,
    bootstrap_aggregate_variance,
    pseudo_samples,
    regime_switching_series,
)
from .streams import substream
from .targets import AnalyticTarget, em_fit_gmm, get_target
from .train import FitResult, StageConfig, TrainConfig, fit_samples

DEFAULT_SPLIT = (0.4, 0.3, 0.3)


@dataclass
class ExperimentConfig:
    target: str | None = "gmm3-separated"
    data: str | None = None
    grid: str = "uniform:50:1000:midpoint"
    grid_file: str | None = None
    k_g: int = 3
    k_l: int = 0
    m: int = 1_000_000
    split: tuple[float, float, float] = DEFAULT_SPLIT
    seeds: list[int] = field(default_factory=lambda: [1])
    train: TrainConfig = field(default_factory=TrainConfig)
    preprocess: str = "robust"
    out: str | None = None
    em_baseline: bool = False
    q_fourier: int = 4000
    eps_trunc: float = 0.0
    c_prime: float = 1.0

    def __post_init__(self):
        if (self.target is None) == (self.data is None):
            raise InvalidArgument("give exactly one of target or data")
        if len(self.split) != 3 or any(r <= 0 for r in self.split) or abs(sum(self.split) - 1) > 1e-9:
            raise InvalidArgument("split ratios must be three positive numbers summing to 1")
        if not self.seeds:
            raise InvalidArgument("at least one seed is required")
        if self.k_g < 0 or self.k_l < 0 or self.k_g + self.k_l < 1:
            raise InvalidArgument("need K_G + K_L >= 1")
        if self.m < 3:
            raise InvalidArgument("need at least three samples to split")

    def load_grid(self):
        if self.grid_file:
            from .grid import grid_from_dict

            with open(self.grid_file) as fh:
                return grid_from_dict(json.load(fh))
        return parse_grid_spec(self.grid)

    def to_dict(self) -> dict:
        out = {k: v for k, v in asdict(self).items() if k != "train"}
        out["split"] = list(self.split)
        out["train"] = self.train.to_dict()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise InvalidArgument(f"unknown config keys: {sorted(unknown)}")
        if "train" in data:
            data["train"] = TrainConfig.from_dict(data["train"])
        if "split" in data:
            data["split"] = tuple(data["split"])
        if "m" in data:
            data["m"] = int(float(data["m"]))
        return cls(**data)


@dataclass
class RunArtifact:
    run_id: str
    model: object
    fit: FitResult | None
    errors: ErrorReport
    errors_vs_test_ecf: dict
    diagnostics: TheoryDiagnostics
    timing: dict
    env: dict
    em: dict | None = None
    extra: dict = field(default_factory=dict)
    out_dir: Path | None = None

    def summary(self) -> dict:
        out = {
            "run_id": self.run_id,
            "errors": self.errors.to_dict(),
            "errors_vs_test_ecf": self.errors_vs_test_ecf,
            "diagnostics": self.diagnostics.to_dict(),
            "timing": self.timing,
        }
        if self.em is not None:
            out["em"] = self.em
        out.update(self.extra)
        return out


def environment_stamp() -> dict:
    import numba
    import scipy

    return {
        "fourmix": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
        "platform": platform.platform(),
        "cpus": os.cpu_count(),
    }


def split_samples(samples: SampleSet, ratios, rng) -> tuple[SampleSet, SampleSet, SampleSet]:
    """Seeded shuffle, then contiguous train/validation/test blocks."""
    n = samples.count
    perm = rng.permutation(n)
    n_tr = int(round(ratios[0] * n))
    n_va = int(round(ratios[1] * n))
    if n_tr < 1 or n_va < 1 or n - n_tr - n_va < 1:
        raise InvalidArgument("split leaves an empty part")
    idx = (perm[:n_tr], perm[n_tr:n_tr + n_va], perm[n_tr + n_va:])
    return tuple(samples.subset(np.sort(i)) for i in idx)


def load_samples(cfg: ExperimentConfig, seed: int) -> tuple[SampleSet, AnalyticTarget | None]:
    if cfg.target is not None:
        target = get_target(cfg.target)
        return target.sample(cfg.m, substream(seed, "sampler")), target
    return SampleSet.load(cfg.data), None


def node_errors(ref: EmpiricalCF, model) -> dict:
    """Grid-based CF errors: cell-weighted sums of squared part-differences and node maxima."""
    grid = ref.grid
    nodes = ref.nodes
    diff = ref.values - model.cf(nodes)
    if isinstance(grid, FourierGridMulti):
        w = grid.weights
    else:
        w = grid.widths
    return {
        "l2_re": float(np.sum(w * diff.real**2)),
        "l2_im": float(np.sum(w * diff.imag**2)),
        "mpe_re": float(np.max(np.abs(diff.real))),
        "mpe_im": float(np.max(np.abs(diff.imag))),
        "P": int(grid.size),
    }


def evaluate(model, grid, test: SampleSet, target: AnalyticTarget | None, q_fourier: int,
             test_ecf: EmpiricalCF | None = None) -> tuple[ErrorReport, dict]:
    """Truth-based report when a target is known, otherwise against the test-sample ECF."""
    d = test.d
    eta_max = grid.eta_max
    if target is not None:
        rep = error_report(target, model, eta_max, grid.size, test, q_fourier=q_fourier, d=d)
    elif d == 1:
        rep = error_report(EcfFunction(test), model, eta_max, grid.size, test, q_fourier=q_fourier, density=False)
    else:
        rep = ErrorReport(math.nan, math.nan, math.nan, math.nan, nll=nll(model, test))
    test_ecf = test_ecf if test_ecf is not None else compute_ecf(test, grid)
    return rep, node_errors(test_ecf, model)


def run_id_for(command: str, cfg: ExperimentConfig, seed: int) -> str:
    source = cfg.target if cfg.target is not None else Path(cfg.data).stem
    return f"{command}-{source}-kg{cfg.k_g}-kl{cfg.k_l}-seed{seed}"


def run_fit(cfg: ExperimentConfig, seed: int, write: bool = True) -> RunArtifact:
    """Sample or load, split, build the training ECF, fit, and evaluate on the test split."""
    t_all = time.perf_counter()
    samples, target = load_samples(cfg, seed)
    grid = cfg.load_grid()
    d = grid.d if isinstance(grid, FourierGridMulti) else 1
    if samples.d != d:
        raise InvalidArgument(f"{samples.d}-dimensional data on a {d}-dimensional grid")
    train, val, test = split_samples(samples, cfg.split, substream(seed, "split"))
    tcfg = replace(cfg.train, seed=seed)
    res = fit_samples(train, val, grid, (cfg.k_g, cfg.k_l, d), tcfg, cfg.preprocess)
    t_eval = time.perf_counter()
    rep, vs_ecf = evaluate(res.model, grid, test, target, cfg.q_fourier)
    ref = target.cf if target is not None else res.ecf_train
    diag = theory_quantities(ref, grid, model=res.model, lam=tcfg.lam)
    # achieved training loss in the original variable
    diag.eps1 = theory_quantities(res.ecf_train, grid, model=res.model, lam=tcfg.lam).loss_star
    diag.bound = bound_assembly(diag, cfg.eps_trunc, grid.c1, cfg.c_prime, tcfg.lam, train.count, grid.size, d)
    timing = {
        "ecf_seconds": res.ecf_seconds,
        "train_seconds": float(sum(res.report.stage_seconds)),
        "mean_epoch_seconds": float(np.mean(res.report.epoch_seconds)) if res.report.epoch_seconds else 0.0,
        "eval_seconds": time.perf_counter() - t_eval,
        "total_seconds": time.perf_counter() - t_all,
    }
    art = RunArtifact(
        run_id=run_id_for("fit", cfg, seed), model=res.model, fit=res, errors=rep, errors_vs_test_ecf=vs_ecf,
        diagnostics=diag, timing=timing, env=environment_stamp(),
        extra={"bound_note": "C' is a user-supplied placeholder; eps_trunc as configured",
               "sizes": {"train": train.count, "val": val.count, "test": test.count}},
    )
    if cfg.em_baseline and d == 1:
        t0 = time.perf_counter()
        em = em_fit_gmm(train, cfg.k_g + cfg.k_l, rng=substream(seed, "em"))
        em_rep, em_vs = evaluate(em, grid, test, target, cfg.q_fourier)
        art.em = {"model": em.to_dict(), "errors": em_rep.to_dict(), "errors_vs_test_ecf": em_vs,
                  "seconds": time.perf_counter() - t0}
    if write and cfg.out:
        write_artifact(art, Path(cfg.out), cfg)
    return art


def write_artifact(art: RunArtifact, out: Path, cfg: ExperimentConfig | None = None) -> Path:
    run_dir = out / art.run_id
    run_dir.mkdir(parents=True, exist_ok=True)
    eps = art.fit.raw.eps if art.fit is not None else 1e-4
    _dump(run_dir / "model.json", art.model.to_dict(eps))
    if art.fit is not None:
        _dump(run_dir / "raw.json", {**art.fit.raw.to_dict(), "affine": list(art.fit.affine)})
        art.fit.report.save(run_dir / "train_report.json", run_dir / "train_epochs.csv")
    _dump(run_dir / "errors.json", {"run_id": art.run_id, **art.errors.to_dict(),
                                    "vs_test_ecf": art.errors_vs_test_ecf})
    _dump(run_dir / "diagnostics.json", {"run_id": art.run_id, **art.diagnostics.to_dict()})
    _dump(run_dir / "timing.json", {"run_id": art.run_id, **art.timing})
    _dump(run_dir / "env.json", {"run_id": art.run_id, **art.env})
    if art.em is not None:
        _dump(run_dir / "em.json", {"run_id": art.run_id, **art.em})
    if art.extra:
        _dump(run_dir / "extra.json", {"run_id": art.run_id, **art.extra})
    if cfg is not None:
        _dump(run_dir / "config.json", cfg.to_dict())
    art.out_dir = run_dir
    return run_dir


def _dump(path: Path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, default=_json_default)


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def test_split_ecf(cfg: ExperimentConfig, seed: int) -> EmpiricalCF:
    """ECF of the test split that :func:`run_fit` would use for the same config and seed."""
    samples, _ = load_samples(cfg, seed)
    _, _, test = split_samples(samples, cfg.split, substream(seed, "split"))
    return compute_ecf(test, cfg.load_grid())


# ---------------------------------------------------------------------------
# scaling study
# ---------------------------------------------------------------------------


@dataclass
class ScalingConfig:
    target: str = "gmm3-separated"
    k_g: int = 3
    k_l: int = 0
    eta_max: float = 50.0
    m_values: tuple = (1_000, 4_000, 16_000, 64_000, 256_000)
    p_fixed: int = 4000
    p_values: tuple = (250, 500, 1000, 2000, 4000, 8000, 16000)
    m_fixed: int = 1_000_000
    reps: int = 10
    p_reps: int = 3
    seed: int = 0
    train: TrainConfig = field(default_factory=TrainConfig)
    split: tuple = DEFAULT_SPLIT


def _density_error_cell(target, m: int, p: int, cfg: ScalingConfig, seed: int) -> dict:
    samples = target.sample(m, substream(seed, "sampler"))
    train, val, _ = split_samples(samples, cfg.split, substream(seed, "split"))
    grid = uniform_grid(cfg.eta_max, p)
    t0 = time.perf_counter()
    res = fit_samples(train, val, grid, (cfg.k_g, cfg.k_l, 1), replace(cfg.train, seed=seed))
    from .metrics import density_error

    de = density_error(target, res.model)
    diag = theory_quantities(target.cf, grid, model=res.model, lam=cfg.train.lam)
    return {"M": m, "P": p, "seed": seed, "l2": de["density_l2_norm"], "l2_squared": de["density_l2"],
            "V_P": diag.v_p, "W_P": diag.w_p, "loss_star": diag.loss_star, "seconds": time.perf_counter() - t0}


def run_scaling(cfg: ScalingConfig, out: Path | None = None, m_study: bool = True, p_study: bool = True) -> dict:
    """M-sweep at fixed P (with log-log slope of the mean error) and P-sweep at fixed M."""
    target = get_target(cfg.target)
    rows_m, rows_p, failed = [], [], []
    if m_study:
        for m in cfg.m_values:
            for rep in range(cfg.reps):
                seed = cfg.seed * 100_000 + rep * 1000 + int(math.log2(m))
                try:
                    rows_m.append(_density_error_cell(target, m, cfg.p_fixed, cfg, seed))
                except Exception as exc:  # failed cells are recorded, not fatal
                    failed.append({"M": m, "P": cfg.p_fixed, "seed": seed, "error": repr(exc)})
    if p_study:
        for p in cfg.p_values:
            for rep in range(cfg.p_reps):
                seed = cfg.seed * 100_000 + 50_000 + rep * 1000 + int(math.log2(p))
                try:
                    rows_p.append(_density_error_cell(target, cfg.m_fixed, p, cfg, seed))
                except Exception as exc:
                    failed.append({"M": cfg.m_fixed, "P": p, "seed": seed, "error": repr(exc)})
    result = {"m_rows": rows_m, "p_rows": rows_p, "failed": failed}
    if rows_m:
        ms = sorted({r["M"] for r in rows_m})
        means = [float(np.mean([r["l2"] for r in rows_m if r["M"] == m])) for m in ms]
        result["m_means"] = dict(zip(ms, means))
        slope, intercept, r2 = loglog_slope(ms, means)
        result.update({"slope": slope, "intercept": intercept, "r_squared": r2})
    if rows_p:
        ps = sorted({r["P"] for r in rows_p})
        result["p_means"] = {p: float(np.mean([r["l2"] for r in rows_p if r["P"] == p])) for p in ps}
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        _write_rows(out / "scaling_m.csv", rows_m)
        _write_rows(out / "scaling_p.csv", rows_p)
        _dump(out / "scaling_summary.json", {k: v for k, v in result.items() if k not in ("m_rows", "p_rows")})
    return result


def _write_rows(path: Path, rows: list[dict]) -> None:
    if not rows:
        return
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)


# ---------------------------------------------------------------------------
# pseudo-sampling
# ---------------------------------------------------------------------------


@dataclass
class PseudoConfig:
    """Dependent-series experiment. ``series`` is 'ar1', 'regime' or a CSV path."""

    restart_prob: float
    series: str = "regime"
    n: int = 600
    phi: float = 0.5
    sigma: float = 1.0
    horizon: int = 12
    m: int = 100_000
    returns: str = "simple"
    long_path: int | None = None
    grid: str = "uniform:50:1000:midpoint"
    glmm: tuple[int, int] = (2, 2)
    gmm: tuple[int, int] = (4, 0)
    em_k: int = 4
    alphas: tuple = (0.01, 0.05)
    seed: int = 0
    split: tuple = DEFAULT_SPLIT
    train: TrainConfig = field(default_factory=TrainConfig)
    q_fourier: int = 4000

    def __post_init__(self):
        if not 0 < self.restart_prob <= 1:
            raise InvalidArgument("restart probability must lie in (0, 1]")
        if self.returns not in ("log", "simple"):
            raise InvalidArgument("returns must be 'log' or 'simple'")


def build_series(cfg: PseudoConfig) -> TimeSeries:
    rng = substream(cfg.seed, "series")
    if cfg.series == "ar1":
        return ar1_series(cfg.n, cfg.phi, cfg.sigma, rng)
    if cfg.series == "regime":
        return regime_switching_series(cfg.n, rng)
    return TimeSeries.from_csv(cfg.series)


def run_pseudo(cfg: PseudoConfig, out: Path | None = None) -> dict:
    """Pseudo-samples -> split -> pseudo-ECF -> Fourier GLMM, Fourier GMM and EM -> test-split errors."""
    series = build_series(cfg)
    bcfg = BootstrapConfig(cfg.restart_prob, cfg.horizon, cfg.m, seed=int(substream(cfg.seed, "bootstrap").integers(2**31)),
                           aggregation="sum" if cfg.returns == "log" else "compound", long_path_steps=cfg.long_path)
    t0 = time.perf_counter()
    pseudo = pseudo_samples(series, bcfg)
    boot_seconds = time.perf_counter() - t0
    train, val, test = split_samples(pseudo, cfg.split, substream(cfg.seed, "split"))
    grid = parse_grid_spec(cfg.grid)
    test_fn = EcfFunction(test)
    test_ecf = compute_ecf(test, grid)
    tcfg = replace(cfg.train, seed=cfg.seed)
    thresholds = {a: float(np.quantile(test.values, a)) for a in cfg.alphas}
    models = {}
    for name, shape in (("fourier_glmm", cfg.glmm), ("fourier_gmm", cfg.gmm)):
        res = fit_samples(train, val, grid, (shape[0], shape[1], 1), tcfg)
        models[name] = res.model
    models["em"] = em_fit_gmm(train, cfg.em_k, rng=substream(cfg.seed, "em"))
    rows = {}
    for name, model in models.items():
        rep = error_report(test_fn, model, grid.eta_max, grid.size, test, q_fourier=cfg.q_fourier, density=False)
        rows[name] = {
            **rep.to_dict(),
            "vs_test_ecf_nodes": node_errors(test_ecf, model),
            "mean": model.mean(),
            "variance": model.variance(),
            "tails": {str(a): {"threshold": t, "model_lower": tail_prob(model, t, "lower"), "empirical": a}
                      for a, t in thresholds.items()},
            "model": model.to_dict(),
        }
    result = {
        "series": {"source": cfg.series, "n": series.n, "mean": float(series.values.mean()),
                   "var": float(series.values.var())},
        "bootstrap": asdict(bcfg),
        "bootstrap_seconds": boot_seconds,
        "pseudo_moments": {"mean": float(pseudo.values.mean()), "variance": float(pseudo.values.var())},
        "models": rows,
    }
    if cfg.series == "ar1" and cfg.returns == "log":
        result["oracle"] = {
            "ar1_variance": ar1_aggregate_variance(cfg.phi, cfg.sigma, cfg.horizon),
            "bootstrap_law_variance": bootstrap_aggregate_variance(float(series.values.var()), cfg.phi, cfg.horizon,
                                                                   cfg.restart_prob),
        }
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        _dump(out / "pseudo_result.json", result)
        with open(out / "pseudo_table.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["model", "L2_re", "L2_im", "MPE_re", "MPE_im", "NLL"])
            for name, r in rows.items():
                w.writerow([name, r["l2_re"], r["l2_im"], r["mpe_re"], r["mpe_im"], r["nll"]])
    return result


# ---------------------------------------------------------------------------
# timing benchmarks
# ---------------------------------------------------------------------------


def _epoch_seconds(ecf: EmpiricalCF, val: EmpiricalCF, k: int, epochs: int, seed: int, summary) -> float:
    cfg = TrainConfig(stage1=StageConfig("amsgrad", 1e-2, epochs), stage2=StageConfig("adam", 1e-3, 0),
                      early_stop=None, seed=seed)
    from .train import fit

    _, rep = fit(ecf, val, (k, 0, 1), cfg, summary=summary)
    return float(np.median(rep.epoch_seconds))


def run_bench(m_values=(100_000, 200_000, 400_000, 800_000), p_values=(1024, 2048, 4096, 8192),
              k_values=(32, 64, 128, 256), m_train_values=(10_000, 100_000, 1_000_000), d_values=(1, 2, 3),
              epochs: int = 60, seed: int = 0, repeats: int = 5, out: Path | None = None) -> dict:
    """Wall-clock scaling of the ECF stage (vs M, d) and of training epochs (vs P, K, M).

    Per-epoch times are medians over ``epochs`` epochs; whole-run times
    against M are the minimum over ``repeats`` runs.
    """
    from .ecf import empirical_cf
    from .train import SampleSummary

    rng = substream(seed, "sampler")
    x_all = rng.standard_normal(max(max(m_values), max(m_train_values)))
    rows = []
    grid = uniform_grid(50.0, 1000)
    empirical_cf(x_all[:1000], grid)  # compile outside the timings
    for m in m_values:
        t0 = time.perf_counter()
        empirical_cf(x_all[:m], grid)
        rows.append({"stage": "ecf", "M": m, "P": grid.size, "K": 0, "d": 1, "seconds": time.perf_counter() - t0})
    for d in d_values:
        per_axis = {1: 1024, 2: 32, 3: 10}[d]
        g = tensor_grid(10.0, per_axis, d)
        xs = rng.standard_normal((100_000, d)) if d > 1 else x_all[:100_000]
        t0 = time.perf_counter()
        compute_ecf(xs, g)
        rows.append({"stage": "ecf", "M": 100_000, "P": g.size, "K": 0, "d": d, "seconds": time.perf_counter() - t0})
    summary = SampleSummary.from_samples(x_all[:100_000])
    for p in p_values:
        g = uniform_grid(10.0, p)
        e = empirical_cf(x_all[:20_000], g)
        rows.append({"stage": "epoch", "M": 20_000, "P": p, "K": 16, "d": 1,
                     "seconds": _epoch_seconds(e, e, 16, epochs, seed, summary)})
    g = uniform_grid(10.0, 1024)
    e = empirical_cf(x_all[:20_000], g)
    for k in k_values:
        rows.append({"stage": "epoch", "M": 20_000, "P": 1024, "K": k, "d": 1,
                     "seconds": _epoch_seconds(e, e, k, epochs, seed, summary)})
    for m in m_train_values:
        e = empirical_cf(x_all[:m], g)
        # a whole run is short, so keep the fastest of a few repeats (as timeit does)
        best = math.inf
        for _ in range(repeats):
            t0 = time.perf_counter()
            _epoch_seconds(e, e, 16, epochs, seed, summary)
            best = min(best, time.perf_counter() - t0)
        rows.append({"stage": "train", "M": m, "P": 1024, "K": 16, "d": 1, "seconds": best})

    def slope(stage, key, **fixed):
        sel = [r for r in rows if r["stage"] == stage and all(r[k] == v for k, v in fixed.items())]
        return loglog_slope([r[key] for r in sel], [r["seconds"] for r in sel])[0]

    train_times = [r["seconds"] for r in rows if r["stage"] == "train"]
    result = {
        "rows": rows,
        "ecf_slope_M": slope("ecf", "M", d=1, P=grid.size),
        "epoch_slope_P": slope("epoch", "P", K=16),
        "epoch_slope_K": slope("epoch", "K", P=1024),
        "train_time_spread_M": float((max(train_times) - min(train_times)) / np.mean(train_times)),
    }
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        _write_rows(out / "bench.csv", rows)
        _dump(out / "bench_summary.json", {k: v for k, v in result.items() if k != "rows"})
    return result


def load_eval_model(path):
    from .glmix import load_model

    return load_model(path)


def eval_model(model, target: str | None = None, ecf_file: str | None = None, grid=None, test=None,
               q_fourier: int = 4000) -> dict:
    """Error report of a saved model against a named target (needs ``grid``) or an ECF CSV file."""
    if (target is None) == (ecf_file is None):
        raise InvalidArgument("give exactly one of target or ECF file")
    if target is not None:
        if grid is None:
            raise InvalidArgument("evaluating against a target needs a grid for the window and MPE density")
        t = get_target(target)
        rep = error_report(t, model, grid.eta_max, grid.size, test, q_fourier=q_fourier, d=t.d)
        return rep.to_dict()
    ecf = read_ecf_csv(ecf_file, grid)
    return node_errors(ecf, model)


def read_ecf_csv(path, grid=None) -> EmpiricalCF:
    """Read an ECF written by :meth:`EmpiricalCF.to_csv` (grid from the sidecar JSON or ``grid``)."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"ECF file not found: {path}")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    values = data[:, -2] + 1j * data[:, -1]
    if grid is None:
        side = path.with_suffix(".grid.json")
        if not side.exists():
            raise InvalidArgument(f"no grid given and no sidecar {side.name}")
        from .grid import grid_from_dict

        with open(side) as fh:
            grid = grid_from_dict(json.load(fh))
    nodes = data[:, :-2] if data.shape[1] > 3 else data[:, 0]
    if not np.allclose(nodes.reshape(grid.nodes.shape), grid.nodes, rtol=0, atol=1e-12):
        raise InvalidArgument("ECF nodes do not match the grid")
    m_path = path.with_suffix(".meta.json")
    m = float("nan")
    if m_path.exists():
        with open(m_path) as fh:
            m = float(json.load(fh).get("m", "nan"))
    return EmpiricalCF(grid, values, m)


def write_ecf(ecf: EmpiricalCF, path) -> None:
    """CSV plus ``.grid.json`` and ``.meta.json`` sidecars."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    ecf.to_csv(path)
    _dump(path.with_suffix(".grid.json"), ecf.grid.to_dict())
    _dump(path.with_suffix(".meta.json"), {"m": ecf.m})


__all__ = [
    "ExperimentConfig", "RunArtifact", "ScalingConfig", "PseudoConfig", "run_fit", "run_scaling",
    "run_pseudo", "run_bench", "split_samples", "node_errors", "eval_model", "read_ecf_csv", "write_ecf",
    "test_split_ecf",
]
