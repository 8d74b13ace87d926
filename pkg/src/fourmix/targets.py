"""Reference laws with closed-form CFs, and an EM baseline for Gaussian mixtures.

Each target exposes ``cf``, ``sample`` and (where available) ``density``,
``log_density``, ``cdf`` and ``sf``. The Kou increment has no closed-form
density and raises :class:`~fourmix.errors.NoClosedForm` for density calls.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .ecf import SampleSet
from .errors import DegenerateFit, InvalidArgument, NoClosedForm
from .glmix import EffectiveParams

_LOG_2PI = math.log(2.0 * math.pi)


class AnalyticTarget:
    """Interface shared by all reference laws."""

    name = "target"
    d = 1

    def cf(self, eta):
        raise NotImplementedError

    def density(self, x):
        raise NoClosedForm(f"{self.name} has no closed-form density")

    def log_density(self, x):
        return np.log(self.density(x))

    def sample(self, m: int, rng) -> SampleSet:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


def _rng(rng):
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


def _check_m(m) -> int:
    m = int(m)
    if m < 1:
        raise InvalidArgument("sample size must be at least 1")
    return m


@dataclass(frozen=True)
class GaussianMixtureTarget(AnalyticTarget):
    weights: tuple
    means: tuple
    sds: tuple
    name: str = "gmm"

    def __post_init__(self):
        w, mu, sd = (np.asarray(v, dtype=np.float64) for v in (self.weights, self.means, self.sds))
        if not (w.shape == mu.shape == sd.shape) or w.ndim != 1:
            raise InvalidArgument("weights, means and sds must be equal-length vectors")
        if np.any(w < 0) or abs(w.sum() - 1) > 1e-12:
            raise InvalidArgument("mixture weights must lie on the simplex")
        if np.any(sd <= 0):
            raise InvalidArgument("component sds must be positive")

    @property
    def as_model(self) -> EffectiveParams:
        return EffectiveParams(self.weights, self.means, self.sds)

    def cf(self, eta):
        return self.as_model.cf(eta)

    def density(self, x):
        return self.as_model.density(x)

    def log_density(self, x):
        return self.as_model.log_density(x)

    def cdf(self, x):
        return self.as_model.cdf(x)

    def sf(self, x):
        return self.as_model.sf(x)

    @property
    def extent(self) -> tuple[float, float]:
        """(largest |location|, largest scale): beyond the former every component tail decreases."""
        return float(np.max(np.abs(self.means))), float(np.max(self.sds))

    def sample(self, m, rng) -> SampleSet:
        m = _check_m(m)
        rng = _rng(rng)
        w = np.asarray(self.weights)
        labels = rng.choice(w.size, size=m, p=w)
        x = rng.normal(np.asarray(self.means)[labels], np.asarray(self.sds)[labels])
        return SampleSet(x)

    def to_dict(self) -> dict:
        return {"kind": "gmm", "weights": list(self.weights), "means": list(self.means), "sds": list(self.sds)}


@dataclass(frozen=True)
class CauchyTarget(AnalyticTarget):
    x0: float = 0.0
    gamma: float = 0.5
    name: str = "cauchy"

    def __post_init__(self):
        if not self.gamma > 0:
            raise InvalidArgument("Cauchy scale must be positive")

    def cf(self, eta):
        eta = np.asarray(eta, dtype=np.float64)
        return np.exp(1j * self.x0 * eta - self.gamma * np.abs(eta))

    def density(self, x):
        z = (np.asarray(x, dtype=np.float64) - self.x0) / self.gamma
        return 1.0 / (math.pi * self.gamma * (1.0 + z * z))

    def log_density(self, x):
        z = (np.asarray(x, dtype=np.float64) - self.x0) / self.gamma
        return -math.log(math.pi * self.gamma) - np.log1p(z * z)

    def cdf(self, x):
        return 0.5 + np.arctan((np.asarray(x, dtype=np.float64) - self.x0) / self.gamma) / math.pi

    def sf(self, x):
        return 0.5 - np.arctan((np.asarray(x, dtype=np.float64) - self.x0) / self.gamma) / math.pi

    @property
    def extent(self) -> tuple[float, float]:
        return abs(self.x0), self.gamma

    def sample(self, m, rng) -> SampleSet:
        m = _check_m(m)
        u = _rng(rng).random(m)
        return SampleSet(self.x0 + self.gamma * np.tan(math.pi * (u - 0.5)))

    def to_dict(self) -> dict:
        return {"kind": "cauchy", "x0": self.x0, "gamma": self.gamma}


@dataclass(frozen=True)
class KouIncrementTarget(AnalyticTarget):
    """Increment over time ``T`` of a diffusion with double-exponential compound-Poisson jumps.

    Upward jumps (probability ``p``) are Exp(zeta1), downward jumps Exp(zeta2).
    The drift ``mu`` enters arithmetically (no martingale correction).
    """

    T: float = 1e-3
    mu: float = 0.05
    sigma: float = 0.15
    lam: float = 0.1
    p: float = 0.3445
    zeta1: float = 3.0465
    zeta2: float = 3.0775
    name: str = "kou"

    def __post_init__(self):
        if not self.T > 0:
            raise InvalidArgument("horizon T must be positive")
        if self.sigma < 0 or self.lam < 0:
            raise InvalidArgument("sigma and the jump intensity must be non-negative")
        if not 0 <= self.p <= 1:
            raise InvalidArgument("upward-jump probability must lie in [0, 1]")
        if not (self.zeta1 > 0 and self.zeta2 > 0):
            raise InvalidArgument("jump rates must be positive")

    def cf(self, eta):
        eta = np.asarray(eta, dtype=np.float64)
        jumps = self.p * self.zeta1 / (self.zeta1 - 1j * eta) + (1 - self.p) * self.zeta2 / (self.zeta2 + 1j * eta) - 1.0
        return np.exp(self.T * (1j * self.mu * eta - 0.5 * self.sigma**2 * eta**2 + self.lam * jumps))

    def mean(self) -> float:
        return self.T * (self.mu + self.lam * (self.p / self.zeta1 - (1 - self.p) / self.zeta2))

    def variance(self) -> float:
        second_jump = 2 * self.p / self.zeta1**2 + 2 * (1 - self.p) / self.zeta2**2
        return self.T * (self.sigma**2 + self.lam * second_jump)

    def sample(self, m, rng) -> SampleSet:
        m = _check_m(m)
        rng = _rng(rng)
        x = self.mu * self.T + self.sigma * math.sqrt(self.T) * rng.standard_normal(m)
        counts = rng.poisson(self.lam * self.T, size=m)
        total = int(counts.sum())
        if total:
            owner = np.repeat(np.arange(m), counts)
            up = rng.random(total) < self.p
            size = np.where(up, rng.exponential(1.0 / self.zeta1, total), -rng.exponential(1.0 / self.zeta2, total))
            np.add.at(x, owner, size)
        return SampleSet(x)

    def to_dict(self) -> dict:
        return {"kind": "kou", "T": self.T, "mu": self.mu, "sigma": self.sigma, "lam": self.lam,
                "p": self.p, "zeta1": self.zeta1, "zeta2": self.zeta2}


@dataclass(frozen=True)
class ProductCauchy2D(AnalyticTarget):
    gamma: float = 0.5
    name: str = "cauchy2d"
    d: int = field(default=2, init=False)

    def __post_init__(self):
        if not self.gamma > 0:
            raise InvalidArgument("Cauchy scale must be positive")

    def _check(self, v):
        v = np.asarray(v, dtype=np.float64)
        if v.shape[-1] != 2:
            raise InvalidArgument("ProductCauchy2D expects points in R^2")
        return v

    def cf(self, eta):
        eta = self._check(eta)
        return np.exp(-self.gamma * np.abs(eta).sum(axis=-1)).astype(np.complex128)

    def density(self, x):
        return np.exp(self.log_density(x))

    def log_density(self, x):
        z = self._check(x) / self.gamma
        return -2 * math.log(math.pi * self.gamma) - np.log1p(z * z).sum(axis=-1)

    def sample(self, m, rng) -> SampleSet:
        m = _check_m(m)
        u = _rng(rng).random((m, 2))
        return SampleSet(self.gamma * np.tan(math.pi * (u - 0.5)))

    def to_dict(self) -> dict:
        return {"kind": "cauchy2d", "gamma": self.gamma}


PRESETS = {
    "gmm3-separated": lambda: GaussianMixtureTarget((0.5, 0.3, 0.2), (-4.0, 0.0, 4.0), (1.0, 1.0, 1.0), "gmm3-separated"),
    "gmm3-overlap": lambda: GaussianMixtureTarget((0.5, 0.3, 0.2), (-2.0, 0.0, 2.0), (1.0, 1.0, 2.0), "gmm3-overlap"),
    "cauchy": lambda: CauchyTarget(0.0, 0.5),
    "kou": lambda: KouIncrementTarget(),
    "cauchy2d": lambda: ProductCauchy2D(0.5),
}


def get_target(name: str) -> AnalyticTarget:
    try:
        return PRESETS[name]()
    except KeyError:
        raise InvalidArgument(f"unknown target {name!r}; choose from {sorted(PRESETS)}") from None


def target_cf(target: AnalyticTarget, eta):
    eta_arr = np.asarray(eta, dtype=np.float64)
    if target.d > 1 and (eta_arr.ndim == 0 or eta_arr.shape[-1] != target.d):
        raise InvalidArgument(f"{target.name} expects {target.d}-dimensional frequencies")
    if target.d == 1 and eta_arr.ndim > 1 and eta_arr.shape[-1] != 1:
        raise InvalidArgument(f"{target.name} expects scalar frequencies")
    return target.cf(eta_arr)


def target_density(target: AnalyticTarget, x):
    return target.density(x)


def sample(target: AnalyticTarget, m: int, rng) -> SampleSet:
    return target.sample(m, rng)


# ---------------------------------------------------------------------------
# EM baseline
# ---------------------------------------------------------------------------

COLLAPSE_SIGMA = 1e-8


@dataclass
class EMResult:
    model: EffectiveParams
    loglik: float
    history: list[float]
    restarts_failed: int
    n_iter: int


def _kmeanspp(u: np.ndarray, w: np.ndarray, k: int, rng) -> np.ndarray:
    centers = [u[rng.choice(u.size, p=w)]]
    d2 = (u - centers[0]) ** 2
    for _ in range(1, k):
        p = w * d2
        tot = p.sum()
        if tot <= 0:
            centers.append(u[rng.choice(u.size, p=w)])
        else:
            centers.append(u[rng.choice(u.size, p=p / tot)])
        d2 = np.minimum(d2, (u - centers[-1]) ** 2)
    return np.array(centers)


@njit(cache=True)
def _em_step(u, w, pi, mu, sd):
    """Weighted log-likelihood at the current parameters and the EM update (pi, mu, var)."""
    n = u.size
    k = mu.size
    logc = np.log(pi) - np.log(sd) - 0.5 * math.log(2.0 * math.pi)
    resp = np.empty((n, k))
    nk = np.zeros(k)
    sx = np.zeros(k)
    ll = 0.0
    for i in range(n):
        top = -np.inf
        for j in range(k):
            z = (u[i] - mu[j]) / sd[j]
            resp[i, j] = logc[j] - 0.5 * z * z
            if resp[i, j] > top:
                top = resp[i, j]
        acc = 0.0
        for j in range(k):
            resp[i, j] = math.exp(resp[i, j] - top)
            acc += resp[i, j]
        ll += w[i] * (top + math.log(acc))
        for j in range(k):
            r = w[i] * resp[i, j] / acc
            resp[i, j] = r
            nk[j] += r
            sx[j] += r * u[i]
    new_mu = sx / nk
    sq = np.zeros(k)
    for i in range(n):
        for j in range(k):
            dx = u[i] - new_mu[j]
            sq[j] += resp[i, j] * dx * dx
    return ll, nk / nk.sum(), new_mu, sq / nk, nk


def _loglik(u, w, pi, mu, sd) -> float:
    return float(EffectiveParams(pi, mu, sd).log_density(u) @ w)


def _em_run(u, w, k, centers, max_iter, tol):
    """One EM run on unique values ``u`` with empirical weights ``w``; ``None`` on collapse."""
    assign = np.argmin(np.abs(u[:, None] - centers[None, :]), axis=1)
    pi = np.array([w[assign == j].sum() for j in range(k)])
    mu = centers.astype(np.float64).copy()
    glob_var = float(w @ (u - w @ u) ** 2)
    var = np.empty(k)
    for j in range(k):
        mask = assign == j
        if pi[j] > 0:
            mu[j] = (w[mask] @ u[mask]) / pi[j]
            var[j] = (w[mask] @ (u[mask] - mu[j]) ** 2) / pi[j]
        if pi[j] <= 0 or not var[j] > 0:
            var[j] = glob_var
    pi = np.maximum(pi, 1e-12)
    pi /= pi.sum()
    history = []
    prev = -np.inf
    for it in range(max_iter):
        sd = np.sqrt(var)
        if np.any(sd < COLLAPSE_SIGMA):
            return None
        ll, pi, mu, var, nk = _em_step(u, w, pi, mu, sd)
        history.append(ll)
        if np.any(nk <= 0) or not np.all(np.isfinite(var)):
            return None
        if it > 0 and (ll - prev) < tol * abs(ll):
            break
        prev = ll
    sd = np.sqrt(var)
    if np.any(sd < COLLAPSE_SIGMA):
        return None
    final = _loglik(u, w, pi, mu, sd)
    history.append(final)
    return pi, mu, sd, final, history


def em_fit_gmm(samples, K: int, restarts: int = 5, max_iter: int = 500, tol: float = 1e-8, rng=None,
               return_result: bool = False):
    """Maximum-likelihood Gaussian mixture by EM with k-means++ seeding.

    The data enter only through their empirical measure (unique values and
    frequencies), so duplicating every sample leaves the fit unchanged.
    Log-likelihoods in the history are per sample.
    """
    if K < 1:
        raise InvalidArgument("K must be at least 1")
    if restarts < 1 or max_iter < 1:
        raise InvalidArgument("restarts and max_iter must be positive")
    s = samples if isinstance(samples, SampleSet) else SampleSet(samples)
    if s.d != 1:
        raise InvalidArgument("em_fit_gmm handles 1D samples")
    u, counts = np.unique(s.values, return_counts=True)
    w = counts / counts.sum()
    if K == 1:
        mean = float(w @ u)
        sd = math.sqrt(float(w @ (u - mean) ** 2))
        if sd < COLLAPSE_SIGMA:
            raise DegenerateFit("sample variance is zero")
        model = EffectiveParams([1.0], [mean], [sd])
        ll = float(np.mean(model.log_density(s.values)))
        res = EMResult(model, ll, [ll], 0, 0)
        return res if return_result else model
    if u.size < K:
        raise DegenerateFit(f"only {u.size} distinct values for {K} components")
    rng = _rng(rng)
    best = None
    failed = 0
    for _ in range(restarts):
        centers = _kmeanspp(u, w, K, rng)
        out = _em_run(u, w, K, centers, max_iter, tol)
        if out is None:
            failed += 1
            continue
        if best is None or out[3] > best[3]:
            best = out
    if best is None:
        raise DegenerateFit(f"all {restarts} EM restarts collapsed")
    pi, mu, sd, ll, history = best
    model = EffectiveParams(pi, mu, sd)
    res = EMResult(model, ll, history, failed, len(history) - 1)
    return res if return_result else model
