"""Fourier-domain training of Gaussian-Laplace mixtures.

The objective at a set of nodes is

    (1/B) sum_p (dRe_p^2 + dIm_p^2) + lam * (1/B) sum_p (|dRe_p| + |dIm_p|)

with ``d = ECF - model CF``. Training runs a first stage with AMSGrad for a fixed number of epochs and
a second stage with Adam at a smaller learning rate, which may stop early
once the validation loss stalls. Node minibatches are reshuffled every epoch
from a seeded generator, validation loss is the full-grid loss against a
held-out ECF, and the best-validation parameters seen in either stage are
returned.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .ecf import EmpiricalCF, SampleSet, affine_transform_ecf, compute_ecf
from .errors import InvalidArgument, TrainingDiverged
from .streams import substream
from .glmix import (
    DEFAULT_EPS,
    Bounds,
    MultiRawParams,
    RawParams,
    cf_and_jacobian,
    project_raw,
    softplus_inv,
)

OPTIMIZERS = ("adam", "amsgrad")


@dataclass
class StageConfig:
    optimizer: str
    lr: float
    epochs: int

    def __post_init__(self):
        if self.optimizer not in OPTIMIZERS:
            raise InvalidArgument(f"optimizer must be one of {OPTIMIZERS}")
        if not self.lr > 0:
            raise InvalidArgument("learning rate must be positive")
        if self.epochs < 0:
            raise InvalidArgument("epochs must be non-negative")


@dataclass
class EarlyStop:
    patience: int = 50
    min_rel_improvement: float = 1e-6


@dataclass
class TrainConfig:
    """Hyperparameters of the two-stage loop. ``lam`` is the MAE weight (key ``lambda`` in files)."""

    lam: float = 1e-2
    stage1: StageConfig = field(default_factory=lambda: StageConfig("amsgrad", 1e-2, 2000))
    stage2: StageConfig = field(default_factory=lambda: StageConfig("adam", 1e-3, 3000))
    batch_size: int = 1024
    adam_betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8
    seed: int = 0
    early_stop: EarlyStop | None = field(default_factory=EarlyStop)
    bounds: Bounds | None = None
    eps: float = DEFAULT_EPS

    def __post_init__(self):
        if self.lam < 0:
            raise InvalidArgument("lambda must be non-negative")
        if self.batch_size < 1:
            raise InvalidArgument("batch_size must be at least 1")
        b1, b2 = self.adam_betas
        if not (0 <= b1 < 1 and 0 <= b2 < 1):
            raise InvalidArgument("Adam betas must lie in [0, 1)")
        if not self.adam_eps > 0:
            raise InvalidArgument("adam_eps must be positive")

    def to_dict(self) -> dict:
        out = {
            "lambda": self.lam,
            "stage1": asdict(self.stage1),
            "stage2": asdict(self.stage2),
            "batch_size": self.batch_size,
            "adam_betas": list(self.adam_betas),
            "adam_eps": self.adam_eps,
            "seed": self.seed,
            "early_stop": None if self.early_stop is None else asdict(self.early_stop),
            "bounds": None if self.bounds is None else self.bounds.to_dict(),
            "eps": self.eps,
        }
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        known = {"lambda", "stage1", "stage2", "batch_size", "adam_betas", "adam_eps", "seed", "early_stop", "bounds", "eps"}
        unknown = set(data) - known
        if unknown:
            raise InvalidArgument(f"unknown training keys: {sorted(unknown)}")
        kw = {}
        if "lambda" in data:
            kw["lam"] = float(data["lambda"])
        for key in ("stage1", "stage2"):
            if key in data:
                kw[key] = StageConfig(**data[key])
        for key in ("batch_size", "seed"):
            if key in data:
                kw[key] = int(data[key])
        if "adam_betas" in data:
            kw["adam_betas"] = tuple(float(b) for b in data["adam_betas"])
        for key in ("adam_eps", "eps"):
            if key in data:
                kw[key] = float(data[key])
        if "early_stop" in data:
            kw["early_stop"] = None if data["early_stop"] is None else EarlyStop(**data["early_stop"])
        if data.get("bounds") is not None:
            kw["bounds"] = Bounds(**data["bounds"])
        return cls(**kw)


@dataclass
class TrainReport:
    train_loss: list[float]
    val_loss: list[float]
    stage_boundary: int
    best_epoch: int
    best_val_loss: float
    final_raw: RawParams | MultiRawParams
    stage_seconds: list[float]
    epoch_seconds: list[float]
    config: TrainConfig
    stopped_early: list[bool]
    diagnostics: dict = field(default_factory=dict)

    @property
    def final_effective(self):
        return self.final_raw.effective()

    @property
    def eps1(self) -> float:
        """Training-objective value at the returned parameters."""
        return self.diagnostics.get("eps1", float("nan"))

    def to_dict(self) -> dict:
        return {
            "train_loss": self.train_loss,
            "val_loss": self.val_loss,
            "stage_boundary": self.stage_boundary,
            "best_epoch": self.best_epoch,
            "best_val_loss": self.best_val_loss,
            "stopped_early": self.stopped_early,
            "stage_seconds": self.stage_seconds,
            "mean_epoch_seconds": float(np.mean(self.epoch_seconds)) if self.epoch_seconds else 0.0,
            "raw": self.final_raw.to_dict(),
            "model": self.final_effective.to_dict(self.final_raw.eps),
            "config": self.config.to_dict(),
            "diagnostics": self.diagnostics,
        }

    def save(self, json_path, csv_path=None) -> None:
        with open(json_path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)
        if csv_path is not None:
            with open(csv_path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["epoch", "stage", "train_loss", "val_loss"])
                for e, (tl, vl) in enumerate(zip(self.train_loss, self.val_loss)):
                    w.writerow([e, 0 if e == 0 else (1 if e <= self.stage_boundary else 2), repr(tl), repr(vl)])


# ---------------------------------------------------------------------------
# objective
# ---------------------------------------------------------------------------


def _nodes(ecf: EmpiricalCF) -> np.ndarray:
    return ecf.nodes


def loss(raw, ecf: EmpiricalCF, lam: float, node_batch=None):
    """``(total, mse, mae, residuals)``; residuals are ``ECF - model`` (complex) at the used nodes."""
    nodes = _nodes(ecf)
    target = ecf.values
    if node_batch is not None:
        nodes, target = nodes[node_batch], target[node_batch]
    model = raw.effective().cf(nodes)
    res = target - model
    mse = float(np.mean(res.real**2 + res.imag**2))
    mae = float(np.mean(np.abs(res.real) + np.abs(res.imag)))
    return mse + lam * mae, mse, mae, res


def loss_grad(raw, ecf: EmpiricalCF, lam: float, node_batch=None):
    """Gradient of the minibatch objective w.r.t. the flat raw vector; returns ``(total, grad)``."""
    nodes = _nodes(ecf)
    target = ecf.values
    if node_batch is not None:
        nodes, target = nodes[node_batch], target[node_batch]
    model, jac = cf_and_jacobian(raw, nodes)
    res = target - model
    n = res.shape[0]
    dre, dim = res.real, res.imag
    # d(total)/d(model Re) and d(total)/d(model Im); sign(0) = 0
    g_re = (-2.0 * dre - lam * np.sign(dre)) / n
    g_im = (-2.0 * dim - lam * np.sign(dim)) / n
    grad = g_re @ jac.real + g_im @ jac.imag
    total = float(np.mean(dre**2 + dim**2) + lam * np.mean(np.abs(dre) + np.abs(dim)))
    return total, grad


# ---------------------------------------------------------------------------
# optimizers
# ---------------------------------------------------------------------------


@dataclass
class OptimizerState:
    m: np.ndarray
    v: np.ndarray
    v_hat: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, n: int) -> "OptimizerState":
        return cls(np.zeros(n), np.zeros(n), np.zeros(n), 0)


def optimizer_step(raw, state: OptimizerState, grad, config: TrainConfig, stage: StageConfig):
    """One Adam or AMSGrad update followed by projection onto the bounds."""
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != state.m.shape:
        raise InvalidArgument("gradient and optimizer state have different sizes")
    if not np.all(np.isfinite(grad)):
        bad = np.flatnonzero(~np.isfinite(grad))
        raise TrainingDiverged(f"non-finite gradient at step {state.t + 1} (entries {bad[:5].tolist()})")
    b1, b2 = config.adam_betas
    t = state.t + 1
    m = b1 * state.m + (1 - b1) * grad
    v = b2 * state.v + (1 - b2) * grad * grad
    if stage.optimizer == "amsgrad":
        v_hat = np.maximum(state.v_hat, v)
        second = v_hat
    else:
        v_hat = state.v_hat
        second = v
    m_corr = m / (1 - b1**t)
    denom = np.sqrt(second / (1 - b2**t)) + config.adam_eps
    vec = raw.to_vector() - stage.lr * m_corr / denom
    if not np.all(np.isfinite(vec)):
        raise TrainingDiverged(f"non-finite parameters after step {t}")
    new_raw = project_raw(raw.with_vector(vec), config.bounds)
    return new_raw, OptimizerState(m, v, v_hat, t)


# ---------------------------------------------------------------------------
# initialization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SampleSummary:
    """Location/scale summary used for initialization (per coordinate when d > 1)."""

    quantile: object  # callable q -> value(s)
    median: np.ndarray
    iqr: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    d: int = 1

    @classmethod
    def from_samples(cls, samples) -> "SampleSummary":
        x = samples.values if isinstance(samples, SampleSet) else np.asarray(samples, dtype=np.float64)
        xs = np.sort(x, axis=0)

        def quantile(q):
            return np.quantile(xs, q, axis=0)

        q1, med, q3 = quantile([0.25, 0.5, 0.75])
        d = 1 if x.ndim == 1 else x.shape[1]
        return cls(quantile, np.atleast_1d(med), np.atleast_1d(q3 - q1), np.atleast_1d(x.mean(axis=0)),
                   np.atleast_1d(x.std(axis=0)), d)

    def robust_scale(self) -> np.ndarray:
        """min(std, IQR / 1.349): a heavy tail cannot inflate the initial scale."""
        iqr_scale = self.iqr / 1.349
        s = np.where(iqr_scale > 0, np.minimum(self.std, iqr_scale), self.std)
        return np.where(s > 0, s, 1.0)


def _scale_ladder(lo: np.ndarray, hi: np.ndarray, centrality: np.ndarray) -> np.ndarray:
    """Geometric scales from ``lo`` to ``hi``; the widest go to the most central components."""
    n = centrality.size
    if n == 0:
        return np.zeros((0, lo.size))
    steps = np.linspace(0.0, 1.0, n)[:, None] if n > 1 else np.zeros((1, 1))
    ladder = lo * (hi / lo) ** steps
    out = np.empty_like(ladder)
    out[np.argsort(centrality, kind="stable")] = ladder[::-1]
    return out


def init_params(model_shape, summary: SampleSummary, seed, eps: float = DEFAULT_EPS,
                max_scale: float | None = None):
    """Deterministic spread-out initialization with 1% seeded jitter.

    Logits start at 0. Gaussian locations sit at the quantiles
    ``j / (K_G + 1)``; Laplace locations at
    ``median + (IQR / 2) * linspace(-1, 1, K_L)`` (the median alone for
    ``K_L = 1``).

    Scales start at ``s / sqrt(K)`` with ``s = min(std, IQR / 1.349)``. When
    the sample std exceeds that robust scale (heavy tails), scales of each
    kind instead run geometrically from ``s / sqrt(K)`` up to
    ``min(std / sqrt(K), max_scale)``, widest at the centre, so that
    tail-carrying components do not have to be grown by many small steps.
    ``max_scale`` is typically the reciprocal of the smallest nonzero grid
    frequency, beyond which a wider component is invisible to the loss.
    """
    k_g, k_l, d = model_shape
    if k_g < 0 or k_l < 0 or k_g + k_l < 1:
        raise InvalidArgument("need K_G, K_L >= 0 with K_G + K_L >= 1")
    if d != summary.d:
        raise InvalidArgument("model dimension does not match the sample summary")
    rng = np.random.default_rng(seed)
    scale = summary.robust_scale()
    k = k_g + k_l
    lo = scale / np.sqrt(k)
    std = np.where(summary.std > 0, summary.std, scale)
    hi = std / np.sqrt(k)
    if max_scale is not None:
        hi = np.minimum(hi, max_scale)
    hi = np.maximum(hi, lo)

    g_q = np.arange(1, k_g + 1) / (k_g + 1)
    g_locs = np.array(summary.quantile(g_q)).reshape(k_g, d)
    l_pos = np.linspace(-1, 1, k_l) if k_l > 1 else np.zeros(k_l)
    l_locs = summary.median + 0.5 * summary.iqr * l_pos[:, None]
    g_locs = g_locs + 1e-2 * scale * rng.standard_normal((k_g, d))
    l_locs = l_locs + 1e-2 * scale * rng.standard_normal((k_l, d))
    g_scale = _scale_ladder(lo, hi, np.abs(g_q - 0.5)) * (1 + 1e-2 * rng.standard_normal((k_g, d)))
    l_scale = _scale_ladder(lo, hi, np.abs(l_pos)) * (1 + 1e-2 * rng.standard_normal((k_l, d)))
    # softplus(w) + eps = scale
    g_w = softplus_inv(np.maximum(g_scale - eps, 1e-3 * g_scale))
    l_w = softplus_inv(np.maximum(l_scale - eps, 1e-3 * l_scale))
    if d == 1:
        return RawParams(np.zeros(k_g), g_locs[:, 0], g_w[:, 0], np.zeros(k_l), l_locs[:, 0], l_w[:, 0], eps)
    t = d * (d + 1) // 2
    rows, cols = np.tril_indices(d)
    diag = rows == cols

    def chol_entries(w):
        out = np.zeros((w.shape[0], t))
        out[:, diag] = w
        return out

    return MultiRawParams(d, np.zeros(k_g), g_locs, chol_entries(g_w), np.zeros(k_l), l_locs, chol_entries(l_w), eps)


def grid_max_scale(ecf: EmpiricalCF) -> float:
    """Reciprocal of the smallest nonzero node norm."""
    nodes = ecf.nodes
    norms = np.abs(nodes) if nodes.ndim == 1 else np.linalg.norm(nodes, axis=1)
    norms = norms[norms > 0]
    return float(1.0 / norms.min()) if norms.size else float("inf")


def default_bounds(summary_values: np.ndarray, eps: float = DEFAULT_EPS) -> Bounds:
    """``mu_bar = max|x|``, ``sigma_max = b_max = 10 * std``, ``sigma_min = b_min = eps``."""
    x = np.asarray(summary_values, dtype=np.float64)
    std = float(np.max(x.std(axis=0)))
    if not std > 0:
        std = 1.0
    mu_bar = float(np.max(np.abs(x)))
    return Bounds(mu_bar=max(mu_bar, eps), sigma_min=eps, sigma_max=10 * std, b_min=eps, b_max=10 * std)


# ---------------------------------------------------------------------------
# training loop
# ---------------------------------------------------------------------------


def _full_loss(raw, ecf, lam) -> float:
    return loss(raw, ecf, lam)[0]


def fit(ecf_train: EmpiricalCF, ecf_val: EmpiricalCF | None, model_shape, config: TrainConfig,
        init: RawParams | MultiRawParams | None = None, summary: SampleSummary | None = None):
    """Two-stage minimization; returns ``(best_raw, TrainReport)``.

    ``init`` overrides the quantile initialization (which needs ``summary``).
    Without a validation ECF the training loss drives model selection.
    """
    if ecf_val is not None and ecf_val.nodes.shape != ecf_train.nodes.shape:
        raise InvalidArgument("training and validation ECFs must share a grid")
    if ecf_val is not None and not np.allclose(ecf_val.nodes, ecf_train.nodes, rtol=1e-12, atol=0):
        raise InvalidArgument("training and validation ECFs must share a grid")
    if init is None:
        if summary is None:
            raise InvalidArgument("fit needs either init or a sample summary")
        init = init_params(model_shape, summary, substream(config.seed, "init"), config.eps,
                           max_scale=grid_max_scale(ecf_train))
    raw = project_raw(init, config.bounds)
    if raw.shape != tuple(model_shape):
        raise InvalidArgument(f"initial parameters have shape {raw.shape}, expected {tuple(model_shape)}")
    batch_rng = substream(config.seed, "batching")
    monitor = ecf_val if ecf_val is not None else ecf_train
    n_nodes = ecf_train.grid.size
    bs = min(config.batch_size, n_nodes)

    train_hist = [_full_loss(raw, ecf_train, config.lam)]
    val_hist = [_full_loss(raw, monitor, config.lam)]
    if not (np.isfinite(train_hist[0]) and np.isfinite(val_hist[0])):
        raise TrainingDiverged("initial loss is not finite")
    best_raw, best_val, best_epoch = raw, val_hist[0], 0
    stage_seconds, epoch_seconds, stopped = [], [], []
    boundary = 0

    for stage in (config.stage1, config.stage2):
        t_stage = time.perf_counter()
        raw = best_raw
        state = OptimizerState.zeros(raw.n_params)
        since_improve = 0
        ref = best_val
        early = False
        for _ in range(stage.epochs):
            t0 = time.perf_counter()
            order = batch_rng.permutation(n_nodes)
            for start in range(0, n_nodes, bs):
                _, grad = loss_grad(raw, ecf_train, config.lam, order[start:start + bs])
                raw, state = optimizer_step(raw, state, grad, config, stage)
            tl = _full_loss(raw, ecf_train, config.lam)
            vl = tl if monitor is ecf_train else _full_loss(raw, monitor, config.lam)
            if not (np.isfinite(tl) and np.isfinite(vl)):
                raise TrainingDiverged(f"loss became non-finite at epoch {len(train_hist)}")
            train_hist.append(tl)
            val_hist.append(vl)
            epoch_seconds.append(time.perf_counter() - t0)
            if vl < best_val:
                best_raw, best_val, best_epoch = raw, vl, len(val_hist) - 1
            if config.early_stop is not None and stage is config.stage2:
                if vl < ref * (1 - config.early_stop.min_rel_improvement):
                    ref = vl
                    since_improve = 0
                else:
                    since_improve += 1
                    if since_improve >= config.early_stop.patience:
                        early = True
                        break
        stopped.append(early)
        stage_seconds.append(time.perf_counter() - t_stage)
        if stage is config.stage1:
            boundary = len(train_hist) - 1

    report = TrainReport(
        train_loss=train_hist, val_loss=val_hist, stage_boundary=boundary, best_epoch=best_epoch,
        best_val_loss=best_val, final_raw=best_raw, stage_seconds=stage_seconds,
        epoch_seconds=epoch_seconds, config=config, stopped_early=stopped,
    )
    total, mse, mae, _ = loss(best_raw, ecf_train, config.lam)
    report.diagnostics.update({"eps1": total, "mse": mse, "mae": mae})
    return best_raw, report


# ---------------------------------------------------------------------------
# sample-level pipeline with affine preprocessing
# ---------------------------------------------------------------------------


@dataclass
class FitResult:
    """Outcome of :func:`fit_samples`: the model for the original variable plus training records."""

    model: object
    raw: RawParams | MultiRawParams
    affine: tuple[float, float]
    report: TrainReport
    ecf_train: EmpiricalCF
    ecf_val: EmpiricalCF | None
    ecf_seconds: float


def robust_affine(samples) -> tuple[float, float]:
    """``(a, c)`` mapping the median to 0 and IQR/1.349 to 1 (pooled over coordinates)."""
    x = samples.values if isinstance(samples, SampleSet) else np.asarray(samples, dtype=np.float64)
    q1, med, q3 = np.quantile(x, [0.25, 0.5, 0.75], axis=0)
    spread = float(np.max(np.atleast_1d(q3 - q1))) / 1.349
    if not spread > 0:
        spread = float(np.max(np.atleast_1d(x.std(axis=0))))
    if not spread > 0:
        spread = 1.0
    a = 1.0 / spread
    med = np.atleast_1d(med)
    # a single shift c must serve every axis, so centre only when the medians agree
    c = float(-a * med[0]) if np.allclose(med, med[0]) else 0.0
    return a, c


def fit_samples(train, val, grid, model_shape, config: TrainConfig, preprocess: str = "robust",
                init: RawParams | MultiRawParams | None = None) -> FitResult:
    """ECF on ``grid`` from ``train`` (and ``val``), optional affine standardization, then :func:`fit`.

    With ``preprocess='robust'`` training happens for ``Y = a X + c`` on the
    grid scaled by ``1 / a``; the fitted model is mapped back to ``X``.
    ``preprocess='none'`` trains directly on ``X``.
    """
    train = train if isinstance(train, SampleSet) else SampleSet(train)
    if val is not None and not isinstance(val, SampleSet):
        val = SampleSet(val)
    t0 = time.perf_counter()
    ecf_tr = compute_ecf(train, grid)
    ecf_va = compute_ecf(val, grid) if val is not None else None
    ecf_seconds = time.perf_counter() - t0
    if preprocess == "robust":
        a, c = robust_affine(train)
    elif preprocess == "none":
        a, c = 1.0, 0.0
    else:
        raise InvalidArgument(f"unknown preprocessing {preprocess!r}")
    y_train = a * train.values + c
    y_ecf_tr = affine_transform_ecf(ecf_tr, a, c)
    y_ecf_va = affine_transform_ecf(ecf_va, a, c) if ecf_va is not None else None
    cfg = config
    if cfg.bounds is None:
        cfg = TrainConfig(**{**config.__dict__, "bounds": default_bounds(y_train, config.eps)})
    else:
        cfg = TrainConfig(**{**config.__dict__, "bounds": config.bounds.scaled(a, c)})
    summary = SampleSummary.from_samples(y_train)
    raw, report = fit(y_ecf_tr, y_ecf_va, model_shape, cfg, init=init, summary=summary)
    model = raw.effective().affine_inverse(a, c)
    report.diagnostics["affine"] = [a, c]
    report.diagnostics["bounds_y"] = cfg.bounds.to_dict()
    return FitResult(model, raw, (a, c), report, ecf_tr, ecf_va, ecf_seconds)
