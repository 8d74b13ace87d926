"""Gaussian-Laplace mixtures: parametrization, densities, closed-form CFs and gradients.

Trainable ("raw") parameters are unconstrained reals. Mixture weights come
from one softmax over all Gaussian and Laplace logits, and scales from
``softplus(w) + eps``. Every member of the family is therefore a proper
density, and its CF is available in closed form:

    G(eta) = sum_k beta_k exp(i eta mu_k - sigma_k^2 eta^2 / 2)
           + sum_l beta_l exp(i eta nu_l) / (1 + b_l^2 eta^2)

The d-dimensional family uses full covariances through lower-triangular
Cholesky factors whose diagonals pass through the same softplus map.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import logsumexp, ndtr

from .bessel import EULER_GAMMA, k0e
from .errors import InvalidArgument, UnsupportedDimension

DEFAULT_EPS = 1e-4
FORMAT_VERSION = 1
# below this Mahalanobis radius the d >= 2 Laplace kernel is evaluated at the cap
R_CAP = 1e-8
_LOG_2PI = math.log(2.0 * math.pi)


def softplus(w):
    return np.logaddexp(0.0, w)


def softplus_inv(y):
    y = np.asarray(y, dtype=np.float64)
    if np.any(y <= 0):
        raise InvalidArgument("softplus inverse needs a positive argument")
    return y + np.log(-np.expm1(-y))


def sigmoid(w):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(w, dtype=np.float64)))


def softmax(z):
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(z - z.max())
    return e / e.sum()


def _arr(x, shape=None):
    a = np.array(x, dtype=np.float64)
    if shape is not None:
        a = a.reshape(shape)
    return a


def _gauss_kernel_m1(phase_arg, quad):
    """``exp(i * phase_arg - quad / 2) - 1`` without cancellation near zero frequency."""
    return np.expm1(1j * phase_arg - 0.5 * quad)


def _laplace_kernel_m1(phase_arg, quad):
    """``exp(i * phase_arg) / (1 + quad) - 1``."""
    return (np.expm1(1j * phase_arg) - quad) / (1.0 + quad)


@dataclass(frozen=True)
class Bounds:
    """Box constraints on effective parameters; ``None`` leaves a side open."""

    mu_bar: float | None = None
    sigma_min: float | None = None
    sigma_max: float | None = None
    b_min: float | None = None
    b_max: float | None = None

    def __post_init__(self):
        for name in ("sigma_min", "b_min"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise InvalidArgument(f"{name} must be positive")
        if self.mu_bar is not None and not self.mu_bar > 0:
            raise InvalidArgument("mu_bar must be positive")
        for lo, hi in (("sigma_min", "sigma_max"), ("b_min", "b_max")):
            a, b = getattr(self, lo), getattr(self, hi)
            if a is not None and b is not None and a > b:
                raise InvalidArgument(f"{lo} exceeds {hi}")

    def scaled(self, a: float, c: float = 0.0) -> "Bounds":
        """Bounds for the variable ``a * X + c`` given bounds for ``X``."""
        def mul(v):
            return None if v is None else v * a
        mu_bar = None if self.mu_bar is None else a * self.mu_bar + abs(c)
        return Bounds(mu_bar, mul(self.sigma_min), mul(self.sigma_max), mul(self.b_min), mul(self.b_max))

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("mu_bar", "sigma_min", "sigma_max", "b_min", "b_max")}


# ---------------------------------------------------------------------------
# one dimension
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EffectiveParams:
    """Weights, locations and scales of a 1D Gaussian-Laplace mixture."""

    gauss_weights: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray
    laplace_weights: np.ndarray = field(default_factory=lambda: np.zeros(0))
    nu: np.ndarray = field(default_factory=lambda: np.zeros(0))
    b: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        for name in ("gauss_weights", "mu", "sigma", "laplace_weights", "nu", "b"):
            object.__setattr__(self, name, np.atleast_1d(_arr(getattr(self, name))))
        if not (self.gauss_weights.shape == self.mu.shape == self.sigma.shape):
            raise InvalidArgument("Gaussian parameter arrays differ in length")
        if not (self.laplace_weights.shape == self.nu.shape == self.b.shape):
            raise InvalidArgument("Laplace parameter arrays differ in length")
        if self.k_g + self.k_l == 0:
            raise InvalidArgument("a mixture needs at least one component")
        if np.any(self.sigma <= 0) or np.any(self.b <= 0):
            raise InvalidArgument("scales must be positive")

    d = 1

    @property
    def k_g(self) -> int:
        return self.mu.size

    @property
    def k_l(self) -> int:
        return self.nu.size

    @property
    def weights(self) -> np.ndarray:
        return np.concatenate([self.gauss_weights, self.laplace_weights])

    def log_density(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        xs = x[..., None]
        parts = []
        if self.k_g:
            z = (xs - self.mu) / self.sigma
            parts.append(np.log(self.gauss_weights) - 0.5 * z * z - np.log(self.sigma) - 0.5 * _LOG_2PI)
        if self.k_l:
            parts.append(np.log(self.laplace_weights) - np.abs(xs - self.nu) / self.b - np.log(2.0 * self.b))
        with np.errstate(divide="ignore"):
            return logsumexp(np.concatenate(parts, axis=-1), axis=-1)

    def density(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        xs = x[..., None]
        out = np.zeros(x.shape)
        if self.k_g:
            z = (xs - self.mu) / self.sigma
            out = out + (np.exp(-0.5 * z * z) / (math.sqrt(2 * math.pi) * self.sigma)) @ self.gauss_weights
        if self.k_l:
            out = out + (np.exp(-np.abs(xs - self.nu) / self.b) / (2.0 * self.b)) @ self.laplace_weights
        return out

    def cf(self, eta) -> np.ndarray:
        eta = np.asarray(eta, dtype=np.float64)
        es = eta[..., None]
        # accumulate 1 + sum beta_k (h_k - 1) so that G(0) = 1 exactly
        out = np.zeros(eta.shape, dtype=np.complex128)
        if self.k_g:
            out = out + _gauss_kernel_m1(es * self.mu, (self.sigma * es) ** 2) @ self.gauss_weights
        if self.k_l:
            out = out + _laplace_kernel_m1(es * self.nu, (self.b * es) ** 2) @ self.laplace_weights
        return 1.0 + out

    def cdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        xs = x[..., None]
        out = np.zeros(x.shape)
        if self.k_g:
            out = out + ndtr((xs - self.mu) / self.sigma) @ self.gauss_weights
        if self.k_l:
            z = (xs - self.nu) / self.b
            lap = np.where(z < 0, 0.5 * np.exp(np.minimum(z, 0.0)), 1.0 - 0.5 * np.exp(-np.maximum(z, 0.0)))
            out = out + lap @ self.laplace_weights
        return out

    def sf(self, x) -> np.ndarray:
        """Upper tail ``P(X > x)`` computed without cancellation."""
        x = np.asarray(x, dtype=np.float64)
        xs = x[..., None]
        out = np.zeros(x.shape)
        if self.k_g:
            out = out + ndtr(-(xs - self.mu) / self.sigma) @ self.gauss_weights
        if self.k_l:
            z = (xs - self.nu) / self.b
            lap = np.where(z >= 0, 0.5 * np.exp(-np.maximum(z, 0.0)), 1.0 - 0.5 * np.exp(np.minimum(z, 0.0)))
            out = out + lap @ self.laplace_weights
        return out

    def mean(self) -> float:
        return float(self.gauss_weights @ self.mu + self.laplace_weights @ self.nu)

    def variance(self) -> float:
        second = self.gauss_weights @ (self.sigma**2 + self.mu**2) + self.laplace_weights @ (2 * self.b**2 + self.nu**2)
        return float(second - self.mean() ** 2)

    def affine_inverse(self, a: float, c: float) -> "EffectiveParams":
        """Model for ``X`` given this model for ``Y = a X + c``: ``g_X(x) = a g_Y(a x + c)``."""
        if not a > 0:
            raise InvalidArgument("affine scale a must be positive")
        return EffectiveParams(
            self.gauss_weights, (self.mu - c) / a, self.sigma / a,
            self.laplace_weights, (self.nu - c) / a, self.b / a,
        )

    def to_dict(self, eps: float = DEFAULT_EPS) -> dict:
        return {
            "kind": "glmix",
            "version": FORMAT_VERSION,
            "d": 1,
            "eps": eps,
            "gauss": [
                {"beta": float(w), "mu": float(m), "sigma": float(s)}
                for w, m, s in zip(self.gauss_weights, self.mu, self.sigma)
            ],
            "laplace": [
                {"beta": float(w), "nu": float(m), "b": float(s)}
                for w, m, s in zip(self.laplace_weights, self.nu, self.b)
            ],
        }


@dataclass(frozen=True)
class RawParams:
    """Unconstrained trainable parameters of a 1D mixture.

    The flat vector layout used by the optimizers is
    ``[gauss_logits, gauss_locs, gauss_raw_scales, laplace_logits, laplace_locs, laplace_raw_scales]``.
    """

    gauss_logits: np.ndarray
    gauss_locs: np.ndarray
    gauss_raw_scales: np.ndarray
    laplace_logits: np.ndarray = field(default_factory=lambda: np.zeros(0))
    laplace_locs: np.ndarray = field(default_factory=lambda: np.zeros(0))
    laplace_raw_scales: np.ndarray = field(default_factory=lambda: np.zeros(0))
    eps: float = DEFAULT_EPS

    d = 1

    def __post_init__(self):
        for name in ("gauss_logits", "gauss_locs", "gauss_raw_scales", "laplace_logits", "laplace_locs", "laplace_raw_scales"):
            object.__setattr__(self, name, np.atleast_1d(_arr(getattr(self, name))))
        if not (self.gauss_logits.shape == self.gauss_locs.shape == self.gauss_raw_scales.shape):
            raise InvalidArgument("Gaussian raw arrays differ in length")
        if not (self.laplace_logits.shape == self.laplace_locs.shape == self.laplace_raw_scales.shape):
            raise InvalidArgument("Laplace raw arrays differ in length")
        if self.k_g + self.k_l < 1:
            raise InvalidArgument("need K_G + K_L >= 1")
        if not self.eps > 0:
            raise InvalidArgument("eps must be positive")
        if not np.all(np.isfinite(self.to_vector())):
            raise InvalidArgument("raw parameters must be finite")

    @property
    def k_g(self) -> int:
        return self.gauss_logits.size

    @property
    def k_l(self) -> int:
        return self.laplace_logits.size

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.k_g, self.k_l, 1)

    @property
    def n_params(self) -> int:
        return 3 * (self.k_g + self.k_l)

    def to_vector(self) -> np.ndarray:
        return np.concatenate([
            self.gauss_logits, self.gauss_locs, self.gauss_raw_scales,
            self.laplace_logits, self.laplace_locs, self.laplace_raw_scales,
        ])

    def with_vector(self, vec) -> "RawParams":
        vec = np.asarray(vec, dtype=np.float64)
        kg, kl = self.k_g, self.k_l
        if vec.shape != (3 * (kg + kl),):
            raise InvalidArgument("parameter vector has the wrong length")
        g = vec[: 3 * kg].reshape(3, kg)
        lp = vec[3 * kg:].reshape(3, kl)
        return RawParams(g[0], g[1], g[2], lp[0], lp[1], lp[2], self.eps)

    def effective(self) -> EffectiveParams:
        return effective_params(self)

    def to_dict(self) -> dict:
        return {
            "kind": "glmix-raw",
            "version": FORMAT_VERSION,
            "d": 1,
            "eps": self.eps,
            "k_g": self.k_g,
            "k_l": self.k_l,
            "vector": self.to_vector().tolist(),
        }


def effective_params(raw: RawParams) -> EffectiveParams:
    """Joint softmax over all logits, ``softplus(w) + eps`` for every scale."""
    beta = softmax(np.concatenate([raw.gauss_logits, raw.laplace_logits]))
    return EffectiveParams(
        beta[: raw.k_g], raw.gauss_locs.copy(), softplus(raw.gauss_raw_scales) + raw.eps,
        beta[raw.k_g:], raw.laplace_locs.copy(), softplus(raw.laplace_raw_scales) + raw.eps,
    )


def density(eff, x):
    return eff.density(x)


def cf(eff, eta):
    return eff.cf(eta)


def cf_and_jacobian(raw: RawParams, nodes) -> tuple[np.ndarray, np.ndarray]:
    """Model CF at ``nodes`` and its complex Jacobian w.r.t. the raw vector.

    Returns ``(G, J)`` with ``G`` of shape ``(B,)`` and ``J`` of shape
    ``(B, n_params)``; ``Re J`` and ``Im J`` are the derivatives of
    ``Re G`` and ``Im G``.
    """
    if raw.d != 1:
        return _multi_cf_and_jacobian(raw, nodes)
    eff = effective_params(raw)
    eta = np.asarray(nodes, dtype=np.float64).reshape(-1, 1)
    eta2 = eta * eta
    # same expressions as EffectiveParams.cf so both give bit-identical values
    hg_m1 = _gauss_kernel_m1(eta * eff.mu, (eff.sigma * eta) ** 2)
    bq = (eff.b * eta) ** 2
    den = 1.0 + bq
    hl_m1 = _laplace_kernel_m1(eta * eff.nu, bq)
    g_m1 = hg_m1 @ eff.gauss_weights + hl_m1 @ eff.laplace_weights
    g = 1.0 + g_m1
    cg = (1.0 + hg_m1) * eff.gauss_weights
    cl = (1.0 + hl_m1) * eff.laplace_weights
    gcol = g_m1[:, None]
    jac = np.concatenate([
        eff.gauss_weights * (hg_m1 - gcol),
        1j * eta * cg,
        -eff.sigma * eta2 * cg * sigmoid(raw.gauss_raw_scales),
        eff.laplace_weights * (hl_m1 - gcol),
        1j * eta * cl,
        -2.0 * eff.b * eta2 / den * cl * sigmoid(raw.laplace_raw_scales),
    ], axis=1)
    return g, jac


def cf_grad(raw: RawParams, eta):
    """``(Re G, Im G, dRe/draw, dIm/draw)`` at a scalar or a batch of frequencies."""
    eta_arr = np.asarray(eta, dtype=np.float64)
    nodes = eta_arr.reshape(-1) if raw.d == 1 else eta_arr.reshape(-1, raw.d)
    g, jac = cf_and_jacobian(raw, nodes)
    if eta_arr.ndim == 0 or (raw.d > 1 and eta_arr.ndim == 1):
        return g.real[0], g.imag[0], jac.real[0], jac.imag[0]
    return g.real, g.imag, jac.real, jac.imag


def raw_unit_conversion(rho: float, w: float, bias: float, kind: str):
    """Map a hidden unit ``rho * phi(w x + bias)`` to ``(location, scale, coefficient)``.

    For ``kind='gauss'`` the unit is ``rho * exp(-(w x + bias)^2)``, for
    ``kind='laplace'`` it is ``rho * exp(-|w x + bias|)``. The coefficient is
    the unit's total mass.
    """
    if w == 0:
        raise InvalidArgument("hidden-unit weight must be nonzero")
    loc = -bias / w
    if kind == "gauss":
        return loc, 1.0 / (math.sqrt(2.0) * abs(w)), math.sqrt(math.pi) * rho / abs(w)
    if kind == "laplace":
        return loc, 1.0 / abs(w), 2.0 * rho / abs(w)
    raise InvalidArgument(f"unknown unit kind {kind!r}")


def clamp_to_bounds(eff, bounds: Bounds):
    """Clip locations to [-mu_bar, mu_bar] and scales to their boxes; weights untouched."""
    if isinstance(eff, MultiEffectiveParams):
        return _clamp_multi(eff, bounds)
    mu, nu, sigma, b = eff.mu, eff.nu, eff.sigma, eff.b
    if bounds.mu_bar is not None:
        mu = np.clip(mu, -bounds.mu_bar, bounds.mu_bar)
        nu = np.clip(nu, -bounds.mu_bar, bounds.mu_bar)
    sigma = np.clip(sigma, bounds.sigma_min, bounds.sigma_max) if _any_bound(bounds.sigma_min, bounds.sigma_max) else sigma
    b = np.clip(b, bounds.b_min, bounds.b_max) if _any_bound(bounds.b_min, bounds.b_max) else b
    return EffectiveParams(eff.gauss_weights, mu, sigma, eff.laplace_weights, nu, b)


def _any_bound(lo, hi) -> bool:
    return lo is not None or hi is not None


def _project_scale(w: np.ndarray, eps: float, lo, hi) -> np.ndarray:
    s = softplus(w) + eps
    out = w.copy()
    if hi is not None:
        over = s > hi
        if np.any(over):
            out[over] = softplus_inv(max(hi - eps, 1e-300))
    if lo is not None and lo > eps:
        under = s < lo
        if np.any(under):
            out[under] = softplus_inv(lo - eps)
    return out


def project_raw(raw, bounds: Bounds | None):
    """Raw parameters whose effective parameters satisfy ``bounds``."""
    if bounds is None:
        return raw
    if raw.d != 1:
        return _project_multi(raw, bounds)
    gl, ll = raw.gauss_locs, raw.laplace_locs
    if bounds.mu_bar is not None:
        gl = np.clip(gl, -bounds.mu_bar, bounds.mu_bar)
        ll = np.clip(ll, -bounds.mu_bar, bounds.mu_bar)
    return replace(
        raw,
        gauss_locs=gl,
        laplace_locs=ll,
        gauss_raw_scales=_project_scale(raw.gauss_raw_scales, raw.eps, bounds.sigma_min, bounds.sigma_max),
        laplace_raw_scales=_project_scale(raw.laplace_raw_scales, raw.eps, bounds.b_min, bounds.b_max),
    )


# ---------------------------------------------------------------------------
# d dimensions
# ---------------------------------------------------------------------------


def _tril_indices(d: int):
    return np.tril_indices(d)


def _chol_from_raw(entries: np.ndarray, d: int, eps: float) -> np.ndarray:
    """(K, d(d+1)/2) raw entries -> (K, d, d) lower-triangular factors."""
    k = entries.shape[0]
    rows, cols = _tril_indices(d)
    chol = np.zeros((k, d, d))
    chol[:, rows, cols] = entries
    diag = np.arange(d)
    chol[:, diag, diag] = softplus(chol[:, diag, diag]) + eps
    return chol


def _diag_positions(d: int) -> np.ndarray:
    rows, cols = _tril_indices(d)
    return np.flatnonzero(rows == cols)


@dataclass(frozen=True)
class MultiEffectiveParams:
    """Mixture in R^d with Cholesky factors ``L`` (``Sigma = L L^T``)."""

    gauss_weights: np.ndarray
    mu: np.ndarray
    gauss_chol: np.ndarray
    laplace_weights: np.ndarray
    nu: np.ndarray
    laplace_chol: np.ndarray

    def __post_init__(self):
        mu, nu = np.asarray(self.mu, dtype=np.float64), np.asarray(self.nu, dtype=np.float64)
        d = mu.shape[-1] if mu.size else nu.shape[-1]
        object.__setattr__(self, "gauss_weights", _arr(self.gauss_weights).reshape(-1))
        object.__setattr__(self, "laplace_weights", _arr(self.laplace_weights).reshape(-1))
        object.__setattr__(self, "mu", _arr(self.mu).reshape(-1, d))
        object.__setattr__(self, "nu", _arr(self.nu).reshape(-1, d))
        object.__setattr__(self, "gauss_chol", _arr(self.gauss_chol).reshape(-1, d, d))
        object.__setattr__(self, "laplace_chol", _arr(self.laplace_chol).reshape(-1, d, d))
        if d not in (1, 2, 3):
            raise UnsupportedDimension(f"d={d} not supported")
        for chol in (self.gauss_chol, self.laplace_chol):
            if chol.size:
                diag = np.diagonal(chol, axis1=1, axis2=2)
                if np.any(diag <= 0) or not np.allclose(chol, np.tril(chol)):
                    raise InvalidArgument("covariance factors must be lower triangular with positive diagonal")

    @property
    def d(self) -> int:
        return self.mu.shape[1]

    @property
    def k_g(self) -> int:
        return self.gauss_weights.size

    @property
    def k_l(self) -> int:
        return self.laplace_weights.size

    @property
    def gauss_cov(self) -> np.ndarray:
        return self.gauss_chol @ np.swapaxes(self.gauss_chol, 1, 2)

    @property
    def laplace_cov(self) -> np.ndarray:
        return self.laplace_chol @ np.swapaxes(self.laplace_chol, 1, 2)

    @classmethod
    def from_covariances(cls, gauss_weights, mu, gauss_cov, laplace_weights, nu, laplace_cov):
        def factor(covs):
            covs = np.asarray(covs, dtype=np.float64)
            if covs.size == 0:
                return covs
            try:
                return np.linalg.cholesky(covs)
            except np.linalg.LinAlgError as exc:
                raise InvalidArgument("covariance is not symmetric positive-definite") from exc
        for covs in (gauss_cov, laplace_cov):
            covs = np.asarray(covs, dtype=np.float64)
            if covs.size and not np.allclose(covs, np.swapaxes(covs, -1, -2)):
                raise InvalidArgument("covariance is not symmetric")
        return cls(gauss_weights, mu, factor(gauss_cov), laplace_weights, nu, factor(laplace_cov))

    def _whiten(self, x: np.ndarray, loc: np.ndarray, chol: np.ndarray) -> np.ndarray:
        """Squared Mahalanobis distances, shape (N, K)."""
        out = np.empty((x.shape[0], loc.shape[0]))
        for k in range(loc.shape[0]):
            z = solve_triangular(chol[k], (x - loc[k]).T, lower=True)
            out[:, k] = np.sum(z * z, axis=0)
        return out

    def _log_components(self, x: np.ndarray) -> np.ndarray:
        d = self.d
        parts = []
        if self.k_g:
            q = self._whiten(x, self.mu, self.gauss_chol)
            logdet = np.sum(np.log(np.diagonal(self.gauss_chol, axis1=1, axis2=2)), axis=1)
            parts.append(np.log(self.gauss_weights) - 0.5 * q - logdet - 0.5 * d * _LOG_2PI)
        if self.k_l:
            r = np.sqrt(self._whiten(x, self.nu, self.laplace_chol))
            logdet = np.sum(np.log(np.diagonal(self.laplace_chol, axis1=1, axis2=2)), axis=1)
            parts.append(np.log(self.laplace_weights) + log_laplace_radial(r, d) - logdet)
        return np.concatenate(parts, axis=1)

    def log_density(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        x2 = x.reshape(1, -1) if single else x
        if x2.shape[1] != self.d:
            raise InvalidArgument("point dimension does not match the model")
        with np.errstate(divide="ignore"):
            out = logsumexp(self._log_components(x2), axis=1)
        return out[0] if single else out

    def density(self, x) -> np.ndarray:
        return np.exp(self.log_density(x))

    def cf(self, eta) -> np.ndarray:
        eta = np.asarray(eta, dtype=np.float64)
        single = eta.ndim == 1
        e2 = eta.reshape(1, -1) if single else eta
        if e2.shape[1] != self.d:
            raise InvalidArgument("frequency dimension does not match the model")
        out = np.zeros(e2.shape[0], dtype=np.complex128)
        if self.k_g:
            q = np.einsum("pi,kij->pkj", e2, self.gauss_chol)
            quad = np.sum(q * q, axis=2)
            out += _gauss_kernel_m1(e2 @ self.mu.T, quad) @ self.gauss_weights
        if self.k_l:
            q = np.einsum("pi,kij->pkj", e2, self.laplace_chol)
            quad = np.sum(q * q, axis=2)
            out += _laplace_kernel_m1(e2 @ self.nu.T, quad) @ self.laplace_weights
        out = 1.0 + out
        return out[0] if single else out

    def affine_inverse(self, a: float, c: float) -> "MultiEffectiveParams":
        if not a > 0:
            raise InvalidArgument("affine scale a must be positive")
        return MultiEffectiveParams(
            self.gauss_weights, (self.mu - c) / a, self.gauss_chol / a,
            self.laplace_weights, (self.nu - c) / a, self.laplace_chol / a,
        )

    def to_dict(self, eps: float = DEFAULT_EPS) -> dict:
        return {
            "kind": "glmix",
            "version": FORMAT_VERSION,
            "d": self.d,
            "eps": eps,
            "gauss": [
                {"beta": float(w), "mu": m.tolist(), "chol": c.tolist()}
                for w, m, c in zip(self.gauss_weights, self.mu, self.gauss_chol)
            ],
            "laplace": [
                {"beta": float(w), "nu": m.tolist(), "chol": c.tolist()}
                for w, m, c in zip(self.laplace_weights, self.nu, self.laplace_chol)
            ],
        }


def log_laplace_radial(r: np.ndarray, d: int) -> np.ndarray:
    """log of ``(2 pi)^{-d/2} r^{1-d/2} K_{d/2-1}(r)`` (unit-determinant elliptical Laplace).

    For d >= 2 the profile diverges at r = 0; radii below ``R_CAP`` are
    evaluated at ``R_CAP`` (for d = 2 that is the small-argument value
    ``-ln(r/2) - gamma``, since the next series term is O(r^2 ln r)).
    """
    r = np.asarray(r, dtype=np.float64)
    if d == 1:
        # K_{-1/2}(r) = sqrt(pi/(2r)) e^{-r}; the r^{1/2} prefactor cancels the singularity
        return -r - math.log(2.0)
    rc = np.maximum(r, R_CAP)
    if d == 2:
        small = rc <= R_CAP
        out = np.empty_like(rc)
        out[small] = math.log(-math.log(R_CAP / 2.0) - EULER_GAMMA)
        big = ~small
        out[big] = np.log(k0e(rc[big])) - rc[big]
        return out - _LOG_2PI
    if d == 3:
        # r^{-1/2} K_{1/2}(r) = sqrt(pi/2) e^{-r} / r
        return -rc - np.log(rc) - math.log(4.0 * math.pi)
    raise UnsupportedDimension(f"d={d} not supported")


def density_multi(meff: MultiEffectiveParams, x):
    return meff.density(x)


def cf_multi(meff: MultiEffectiveParams, eta):
    return meff.cf(eta)


@dataclass(frozen=True)
class MultiRawParams:
    """Raw parameters of a d-dimensional mixture.

    ``gauss_chol`` / ``laplace_chol`` hold the lower-triangular entries in
    ``numpy.tril_indices`` order; diagonal entries are pre-softplus.
    Flat layout: ``[gauss_logits, gauss_locs.ravel(), gauss_chol.ravel(),
    laplace_logits, laplace_locs.ravel(), laplace_chol.ravel()]``.
    """

    d: int
    gauss_logits: np.ndarray
    gauss_locs: np.ndarray
    gauss_chol: np.ndarray
    laplace_logits: np.ndarray
    laplace_locs: np.ndarray
    laplace_chol: np.ndarray
    eps: float = DEFAULT_EPS

    def __post_init__(self):
        d = self.d
        if d not in (1, 2, 3):
            raise UnsupportedDimension(f"d={d} not supported")
        t = d * (d + 1) // 2
        object.__setattr__(self, "gauss_logits", _arr(self.gauss_logits).reshape(-1))
        object.__setattr__(self, "laplace_logits", _arr(self.laplace_logits).reshape(-1))
        kg, kl = self.gauss_logits.size, self.laplace_logits.size
        object.__setattr__(self, "gauss_locs", _arr(self.gauss_locs, (kg, d)))
        object.__setattr__(self, "laplace_locs", _arr(self.laplace_locs, (kl, d)))
        object.__setattr__(self, "gauss_chol", _arr(self.gauss_chol, (kg, t)))
        object.__setattr__(self, "laplace_chol", _arr(self.laplace_chol, (kl, t)))
        if kg + kl < 1:
            raise InvalidArgument("need K_G + K_L >= 1")
        if not self.eps > 0:
            raise InvalidArgument("eps must be positive")
        if not np.all(np.isfinite(self.to_vector())):
            raise InvalidArgument("raw parameters must be finite")

    @property
    def k_g(self) -> int:
        return self.gauss_logits.size

    @property
    def k_l(self) -> int:
        return self.laplace_logits.size

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.k_g, self.k_l, self.d)

    @property
    def n_params(self) -> int:
        t = self.d * (self.d + 1) // 2
        return (self.k_g + self.k_l) * (1 + self.d + t)

    def to_vector(self) -> np.ndarray:
        return np.concatenate([
            self.gauss_logits, self.gauss_locs.ravel(), self.gauss_chol.ravel(),
            self.laplace_logits, self.laplace_locs.ravel(), self.laplace_chol.ravel(),
        ])

    def with_vector(self, vec) -> "MultiRawParams":
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (self.n_params,):
            raise InvalidArgument("parameter vector has the wrong length")
        d, t = self.d, self.d * (self.d + 1) // 2
        parts = []
        pos = 0
        for k in (self.k_g, self.k_l):
            for size in (k, k * d, k * t):
                parts.append(vec[pos:pos + size])
                pos += size
        return MultiRawParams(d, parts[0], parts[1], parts[2], parts[3], parts[4], parts[5], self.eps)

    def effective(self) -> MultiEffectiveParams:
        beta = softmax(np.concatenate([self.gauss_logits, self.laplace_logits]))
        return MultiEffectiveParams(
            beta[: self.k_g], self.gauss_locs.copy(), _chol_from_raw(self.gauss_chol, self.d, self.eps),
            beta[self.k_g:], self.laplace_locs.copy(), _chol_from_raw(self.laplace_chol, self.d, self.eps),
        )

    def to_dict(self) -> dict:
        return {
            "kind": "glmix-raw",
            "version": FORMAT_VERSION,
            "d": self.d,
            "eps": self.eps,
            "k_g": self.k_g,
            "k_l": self.k_l,
            "vector": self.to_vector().tolist(),
        }


def _multi_cf_and_jacobian(raw: MultiRawParams, nodes):
    d = raw.d
    eta = np.asarray(nodes, dtype=np.float64).reshape(-1, d)
    eff = raw.effective()
    rows, cols = _tril_indices(d)
    diagpos = _diag_positions(d)
    beta = np.concatenate([eff.gauss_weights, eff.laplace_weights])

    blocks = []
    h_all = []
    for kind in ("gauss", "laplace"):
        loc = eff.mu if kind == "gauss" else eff.nu
        chol = eff.gauss_chol if kind == "gauss" else eff.laplace_chol
        rawchol = raw.gauss_chol if kind == "gauss" else raw.laplace_chol
        w = eff.gauss_weights if kind == "gauss" else eff.laplace_weights
        k = loc.shape[0]
        if k == 0:
            blocks.append(None)
            h_all.append(np.zeros((eta.shape[0], 0), dtype=np.complex128))
            continue
        q = np.einsum("pi,kij->pkj", eta, chol)  # (B, K, d) = L^T eta
        quad = np.sum(q * q, axis=2)
        if kind == "gauss":
            h_m1 = _gauss_kernel_m1(eta @ loc.T, quad)
            h = 1.0 + h_m1
            dquad_factor = -0.5 * h  # dh/d(quad)
        else:
            den = 1.0 + quad
            h_m1 = _laplace_kernel_m1(eta @ loc.T, quad)
            h = 1.0 + h_m1
            dquad_factor = -h / den
        c = h * w
        dloc = 1j * c[:, :, None] * eta[:, None, :]  # (B, K, d)
        # d quad / d L_ij = 2 * eta_i * q_j
        dq = 2.0 * eta[:, None, rows] * q[:, :, cols]  # (B, K, T)
        dchol = (dquad_factor * w)[:, :, None] * dq
        dchol[:, :, diagpos] *= sigmoid(rawchol[:, diagpos])[None, :, :]
        blocks.append((c, dloc, dchol, h_m1))
        h_all.append(h_m1)
    g_m1 = np.concatenate(h_all, axis=1) @ beta
    g = 1.0 + g_m1
    cols_out = []
    for i, blk in enumerate(blocks):
        if blk is None:
            continue
        c, dloc, dchol, h_m1 = blk
        w = eff.gauss_weights if i == 0 else eff.laplace_weights
        cols_out.append(w * (h_m1 - g_m1[:, None]))
        cols_out.append(dloc.reshape(eta.shape[0], -1))
        cols_out.append(dchol.reshape(eta.shape[0], -1))
    return g, np.concatenate(cols_out, axis=1)


def _clamp_multi(eff: MultiEffectiveParams, bounds: Bounds) -> MultiEffectiveParams:
    mu, nu = eff.mu, eff.nu
    if bounds.mu_bar is not None:
        mu = np.clip(mu, -bounds.mu_bar, bounds.mu_bar)
        nu = np.clip(nu, -bounds.mu_bar, bounds.mu_bar)

    def clip_diag(chol, lo, hi):
        if chol.size == 0 or not _any_bound(lo, hi):
            return chol
        chol = chol.copy()
        idx = np.arange(chol.shape[1])
        chol[:, idx, idx] = np.clip(chol[:, idx, idx], lo, hi)
        return chol

    return MultiEffectiveParams(
        eff.gauss_weights, mu, clip_diag(eff.gauss_chol, bounds.sigma_min, bounds.sigma_max),
        eff.laplace_weights, nu, clip_diag(eff.laplace_chol, bounds.b_min, bounds.b_max),
    )


def _project_multi(raw: MultiRawParams, bounds: Bounds) -> MultiRawParams:
    gl, ll = raw.gauss_locs, raw.laplace_locs
    if bounds.mu_bar is not None:
        gl = np.clip(gl, -bounds.mu_bar, bounds.mu_bar)
        ll = np.clip(ll, -bounds.mu_bar, bounds.mu_bar)
    diagpos = _diag_positions(raw.d)

    def proj(entries, lo, hi):
        if entries.size == 0:
            return entries
        out = entries.copy()
        out[:, diagpos] = _project_scale(entries[:, diagpos].ravel(), raw.eps, lo, hi).reshape(-1, diagpos.size)
        return out

    return replace(
        raw,
        gauss_locs=gl,
        laplace_locs=ll,
        gauss_chol=proj(raw.gauss_chol, bounds.sigma_min, bounds.sigma_max),
        laplace_chol=proj(raw.laplace_chol, bounds.b_min, bounds.b_max),
    )


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def model_from_dict(data: dict):
    """Rebuild effective parameters from :meth:`EffectiveParams.to_dict` output."""
    if data.get("kind") != "glmix":
        raise InvalidArgument(f"not a glmix model file (kind={data.get('kind')!r})")
    if data.get("version") != FORMAT_VERSION:
        raise InvalidArgument(f"unsupported model file version {data.get('version')!r}; expected {FORMAT_VERSION}")
    d = int(data["d"])
    gauss, lap = data.get("gauss", []), data.get("laplace", [])
    if d == 1:
        return EffectiveParams(
            [c["beta"] for c in gauss], [c["mu"] for c in gauss], [c["sigma"] for c in gauss],
            [c["beta"] for c in lap], [c["nu"] for c in lap], [c["b"] for c in lap],
        )
    return MultiEffectiveParams(
        [c["beta"] for c in gauss], np.array([c["mu"] for c in gauss]).reshape(-1, d),
        np.array([c["chol"] for c in gauss]).reshape(-1, d, d),
        [c["beta"] for c in lap], np.array([c["nu"] for c in lap]).reshape(-1, d),
        np.array([c["chol"] for c in lap]).reshape(-1, d, d),
    )


def raw_from_dict(data: dict):
    if data.get("kind") != "glmix-raw":
        raise InvalidArgument("not a raw-parameter file")
    if data.get("version") != FORMAT_VERSION:
        raise InvalidArgument(f"unsupported raw file version {data.get('version')!r}")
    d, kg, kl, eps = int(data["d"]), int(data["k_g"]), int(data["k_l"]), float(data["eps"])
    template = zero_raw(kg, kl, d, eps)
    return template.with_vector(np.asarray(data["vector"], dtype=np.float64))


def zero_raw(k_g: int, k_l: int, d: int = 1, eps: float = DEFAULT_EPS):
    if d == 1:
        return RawParams(np.zeros(k_g), np.zeros(k_g), np.zeros(k_g), np.zeros(k_l), np.zeros(k_l), np.zeros(k_l), eps)
    t = d * (d + 1) // 2
    return MultiRawParams(d, np.zeros(k_g), np.zeros((k_g, d)), np.zeros((k_g, t)),
                          np.zeros(k_l), np.zeros((k_l, d)), np.zeros((k_l, t)), eps)


def save_model(eff, path, eps: float = DEFAULT_EPS) -> None:
    with open(path, "w") as fh:
        json.dump(eff.to_dict(eps), fh, indent=1)


def load_model(path):
    with open(path) as fh:
        return model_from_dict(json.load(fh))
