"""Error metrics and error-bound diagnostics.

CF-space errors integrate squared real or imaginary differences over the
frequency window with composite Simpson (``scipy.integrate.simpson``) on a
uniform evaluation grid that is independent of the training grid.
Density errors integrate over ``[-A, A]`` after checking that the tails
beyond ``A`` cannot contribute more than ``1e-10``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.integrate import simpson

from .ecf import EmpiricalCF
from .errors import InvalidArgument, InvalidData, WidenDomainError
from .glmix import EffectiveParams, MultiEffectiveParams

TAIL_TOL = 1e-10
PARTS = ("re", "im")


def _cf_callable(obj):
    if callable(obj) and not hasattr(obj, "cf"):
        return obj
    if hasattr(obj, "cf"):
        return obj.cf
    raise InvalidArgument("expected a CF callable or an object with a .cf method")


def _part(z, part):
    if part == "re":
        return z.real
    if part == "im":
        return z.imag
    raise InvalidArgument("part must be 're' or 'im'")


def _window_axis(eta_max: float, q: int) -> np.ndarray:
    if not eta_max > 0:
        raise InvalidArgument("window half-width must be positive")
    if q < 64:
        raise InvalidArgument("use at least 64 quadrature intervals")
    return np.linspace(-eta_max, eta_max, q + 1)


def fourier_l2(ref_cf, model_cf, eta_max: float, q: int = 4000, part: str = "re", d: int = 1) -> float:
    """``int_{[-eta_max, eta_max]^d} |part(G) - part(G_hat)|^2`` by composite Simpson on ``(q+1)^d`` points."""
    ref, model = _cf_callable(ref_cf), _cf_callable(model_cf)
    axis = _window_axis(eta_max, q)
    if d == 1:
        diff = _part(np.asarray(ref(axis)) - np.asarray(model(axis)), part)
        return float(simpson(diff * diff, x=axis))
    if d == 2:
        e1, e2 = np.meshgrid(axis, axis, indexing="ij")
        pts = np.stack([e1.ravel(), e2.ravel()], axis=1)
        diff = _part(np.asarray(ref(pts)) - np.asarray(model(pts)), part).reshape(q + 1, q + 1)
        return float(simpson(simpson(diff * diff, x=axis, axis=1), x=axis))
    raise InvalidArgument("fourier_l2 supports d in {1, 2}")


def mpe_axis(eta_max: float, q: int) -> np.ndarray:
    """Centres of ``q`` equal cells of the window: half a fine cell away from any midpoint training node."""
    if not eta_max > 0 or q < 1:
        raise InvalidArgument("need eta_max > 0 and q >= 1")
    h = 2.0 * eta_max / q
    return -eta_max + h * (np.arange(q) + 0.5)


def mpe(ref_cf, model_cf, eta_max: float, q: int = 10000, part: str = "re", d: int = 1) -> float:
    """Maximum absolute part-difference over a dense evaluation grid (``q`` points per axis)."""
    ref, model = _cf_callable(ref_cf), _cf_callable(model_cf)
    axis = mpe_axis(eta_max, q)
    if d == 1:
        pts = axis
    elif d == 2:
        e1, e2 = np.meshgrid(axis, axis, indexing="ij")
        pts = np.stack([e1.ravel(), e2.ravel()], axis=1)
    else:
        raise InvalidArgument("mpe supports d in {1, 2}")
    return float(np.max(np.abs(_part(np.asarray(ref(pts)) - np.asarray(model(pts)), part))))


# ---------------------------------------------------------------------------
# density-space errors
# ---------------------------------------------------------------------------


def _extent(obj) -> tuple[float, float]:
    """(largest |location|, largest scale) of a model or target."""
    if isinstance(obj, EffectiveParams):
        locs = np.concatenate([obj.mu, obj.nu])
        scales = np.concatenate([obj.sigma, obj.b])
        return float(np.max(np.abs(locs))), float(np.max(scales))
    if hasattr(obj, "extent"):
        return obj.extent
    raise InvalidArgument(f"cannot determine the extent of {type(obj).__name__}")


def _min_scale(obj) -> float:
    if isinstance(obj, EffectiveParams):
        return float(np.min(np.concatenate([obj.sigma, obj.b])))
    if hasattr(obj, "sds"):
        return float(np.min(obj.sds))
    if hasattr(obj, "gamma"):
        return float(obj.gamma)
    return 1.0


def tail_l2_bound(obj, a: float) -> float:
    """Upper bound on ``int_{|x| > a} f^2`` for a density whose tails decrease beyond ``a``.

    Uses ``int_{x > a} f^2 <= f(a) P(X > a)`` and the mirror image.
    """
    loc, _ = _extent(obj)
    if a <= loc:
        return math.inf
    upper = float(obj.density(np.array([a]))[0]) * float(obj.sf(np.array([a]))[0])
    lower = float(obj.density(np.array([-a]))[0]) * float(obj.cdf(np.array([-a]))[0])
    return upper + lower


def choose_domain(ref, model, tol: float = TAIL_TOL) -> float:
    """Smallest ``A`` on a doubling ladder with ``2 * (tail(ref) + tail(model)) < tol``.

    ``(g - h)^2 <= 2 g^2 + 2 h^2`` turns the per-density tail bounds into a
    bound on the neglected part of the squared-difference integral.
    """
    loc = max(_extent(ref)[0], _extent(model)[0])
    scale = max(_extent(ref)[1], _extent(model)[1])
    a = loc + 8.0 * scale
    for _ in range(60):
        if 2.0 * (tail_l2_bound(ref, a) + tail_l2_bound(model, a)) < tol:
            return a
        a *= 2.0
    raise WidenDomainError("no finite window meets the tail criterion")


def _kinks(obj) -> np.ndarray:
    """Points where a density is not smooth (Laplace peaks)."""
    if isinstance(obj, EffectiveParams):
        return obj.nu
    return np.zeros(0)


def _piecewise_axes(a: float, q: int, breaks) -> list[np.ndarray]:
    """Split ``[-a, a]`` at ``breaks`` and share about ``q`` Simpson intervals by length."""
    inner = np.unique(np.asarray(breaks, dtype=np.float64))
    inner = inner[(inner > -a) & (inner < a)]
    edges = np.concatenate([[-a], inner, [a]])
    axes = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        n = max(2, int(math.ceil(q * (hi - lo) / (2 * a))))
        n += n % 2
        axes.append(np.linspace(lo, hi, n + 1))
    return axes


def density_l2(ref_density, model_density, a: float, q: int = 20000, tail=None, breaks=()) -> float:
    """``int_{[-A, A]} (g - g_hat)^2 dx`` by composite Simpson on about ``q + 1`` points.

    ``breaks`` lists kinks of either density; Simpson is applied separately
    on each smooth piece so that the kinks do not degrade its order.

    ``tail`` (``(ref, model)`` objects exposing ``density``, ``cdf`` and
    ``sf``) enables the check that the region beyond ``A`` adds less than
    ``1e-10``; a failure raises :class:`WidenDomainError` with a suggested
    window.
    """
    if not a > 0:
        raise InvalidArgument("A must be positive")
    if q < 64:
        raise InvalidArgument("use at least 64 quadrature intervals")
    if tail is not None:
        ref, model = tail
        bound = 2.0 * (tail_l2_bound(ref, a) + tail_l2_bound(model, a))
        if not bound < TAIL_TOL:
            raise WidenDomainError(
                f"tails beyond A={a:g} may contribute {bound:.3g} > {TAIL_TOL:g}; "
                f"try A >= {choose_domain(ref, model):g}"
            )
    g = ref_density.density if hasattr(ref_density, "density") else ref_density
    h = model_density.density if hasattr(model_density, "density") else model_density
    total = 0.0
    for x in _piecewise_axes(a, q, breaks):
        diff = np.asarray(g(x)) - np.asarray(h(x))
        total += float(simpson(diff * diff, x=x))
    return total


def density_error(ref, model, q: int | None = None) -> dict:
    """Squared density L2 error with automatic window and resolution, plus its square root."""
    a = choose_domain(ref, model)
    if q is None:
        step = min(_min_scale(ref), _min_scale(model)) / 20.0
        q = int(min(max(4096, math.ceil(2 * a / step)), 2_000_000))
        q += q % 2
    breaks = np.concatenate([_kinks(ref), _kinks(model)])
    value = density_l2(ref, model, a, q, tail=(ref, model), breaks=breaks)
    return {"density_l2": value, "density_l2_norm": math.sqrt(value), "A": a, "Q": q}


def density_l2_norm(ref, model, q: int | None = None) -> float:
    """``sqrt(int (g - g_hat)^2)``, the root form of :func:`density_l2`."""
    return density_error(ref, model, q)["density_l2_norm"]


def nll(model, test_samples) -> float:
    """Mean negative log density over the test points."""
    x = getattr(test_samples, "values", test_samples)
    x = np.asarray(x, dtype=np.float64)
    if hasattr(model, "log_density"):
        logd = model.log_density(x)
    else:
        logd = np.log(model(x))
    return float(-np.mean(logd))


def tail_prob(model: EffectiveParams, threshold: float, side: str = "lower") -> float:
    """``P(X <= t)`` (``side='lower'``) or ``P(X > t)`` (``'upper'``) of a 1D mixture."""
    if not isinstance(model, EffectiveParams):
        raise InvalidArgument("tail_prob needs a 1D mixture")
    if side == "lower":
        return float(model.cdf(np.array([threshold]))[0])
    if side == "upper":
        return float(model.sf(np.array([threshold]))[0])
    raise InvalidArgument("side must be 'lower' or 'upper'")


# ---------------------------------------------------------------------------
# theory diagnostics
# ---------------------------------------------------------------------------


@dataclass
class ErrorReport:
    l2_re: float
    l2_im: float
    mpe_re: float
    mpe_im: float
    density_l2: float | None = None
    density_l2_norm: float | None = None
    nll: float | None = None
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TheoryDiagnostics:
    v_p: float
    w_p: float
    mse_star: float | None = None
    r_star: float | None = None
    loss_star: float | None = None
    b1: float | None = None
    b2: float | None = None
    eps1: float | None = None
    bound: float | None = None
    pseudo: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def _values_at(ref, nodes) -> np.ndarray:
    if isinstance(ref, EmpiricalCF):
        if ref.values.shape[0] != nodes.shape[0]:
            raise InvalidArgument("reference ECF does not match the grid")
        return ref.values
    return np.asarray(_cf_callable(ref)(nodes), dtype=np.complex128)


def theory_quantities(ref, grid, model=None, second_ref=None, lam: float = 1e-2,
                      pseudo: bool = False) -> TheoryDiagnostics:
    """``V_P``, ``W_P`` from ``|G|`` at the nodes; exact-node losses if ``model`` is given;
    ``B1``, ``B2`` between ``ref`` and ``second_ref`` if given."""
    nodes = grid.nodes
    g = _values_at(ref, nodes)
    slack = np.clip(1.0 - np.abs(g) ** 2, 0.0, 1.0)
    diag = TheoryDiagnostics(v_p=float(slack.mean()), w_p=float(np.sqrt(slack).mean()), pseudo=pseudo)
    if model is not None:
        res = g - _values_at(model, nodes)
        diag.mse_star = float(np.mean(res.real**2 + res.imag**2))
        diag.r_star = float(np.mean(np.abs(res.real) + np.abs(res.imag)))
        diag.loss_star = diag.mse_star + lam * diag.r_star
    if second_ref is not None:
        diff = g - _values_at(second_ref, nodes)
        diag.b1 = float(np.mean(np.abs(diff.real) + np.abs(diff.imag)))
        diag.b2 = float(np.mean(np.abs(diff) ** 2))
    return diag


def bound_assembly(diag: TheoryDiagnostics, eps_trunc: float, c1: float, c_prime: float, lam: float,
                   m: float, p: int, d: int = 1, pseudo: bool | None = None) -> float:
    """Right-hand side of the expected density-error bound.

    Direct sampling:
        (2 pi)^-d [4 eps + C1^d (2 eps1 + 2 V/M + lam sqrt(2/M) W) + C' C1^(d+1) / P^(1/d)]
    Pseudo-sampling adds the pseudo-law terms and doubles the statistical ones:
        C1^d (4 eps1 + 2 B2 + lam B1 + 4 V/M + 2 lam sqrt(2/M) W)
    ``C'`` is a user-supplied placeholder; it is not computed here.
    """
    pseudo = diag.pseudo if pseudo is None else pseudo
    eps1 = diag.eps1 or 0.0
    vals = [eps_trunc, c1, c_prime, lam, eps1, diag.v_p, diag.w_p]
    if any(v < 0 for v in vals) or m <= 0 or p <= 0:
        raise InvalidArgument("bound inputs must be non-negative with M, P > 0")
    stat_v = 2.0 * diag.v_p / m
    stat_w = lam * math.sqrt(2.0 / m) * diag.w_p
    if pseudo:
        inner = 4.0 * eps1 + 2.0 * (diag.b2 or 0.0) + lam * (diag.b1 or 0.0) + 2.0 * stat_v + 2.0 * stat_w
    else:
        inner = 2.0 * eps1 + stat_v + stat_w
    total = 4.0 * eps_trunc + c1**d * inner + c_prime * c1 ** (d + 1) / p ** (1.0 / d)
    return total / (2.0 * math.pi) ** d


def loglog_slope(x_values, errors) -> tuple[float, float, float]:
    """OLS of ``ln(error)`` on ``ln(x)``: ``(slope, intercept, R^2)``."""
    x = np.asarray(x_values, dtype=np.float64)
    y = np.asarray(errors, dtype=np.float64)
    if x.shape != y.shape or x.size < 3:
        raise InvalidArgument("need at least three (x, error) pairs for a slope fit")
    if np.any(x <= 0) or np.any(y <= 0):
        raise InvalidData("log-log fit needs positive values")
    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    fitted = intercept + slope * lx
    ss_res = float(np.sum((ly - fitted) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return float(slope), float(intercept), r2


def error_report(ref, model, eta_max: float, p: int, test_samples=None, q_fourier: int = 4000,
                 density: bool = True, d: int = 1) -> ErrorReport:
    """Full report: CF errors on the window, MPE with ``Q = 10 P`` (per axis in 2D), density L2 and NLL."""
    q_mpe = 10 * p if d == 1 else 10 * int(round(p ** (1.0 / d)))
    rep = ErrorReport(
        l2_re=fourier_l2(ref, model, eta_max, q_fourier, "re", d),
        l2_im=fourier_l2(ref, model, eta_max, q_fourier, "im", d),
        mpe_re=mpe(ref, model, eta_max, q_mpe, "re", d),
        mpe_im=mpe(ref, model, eta_max, q_mpe, "im", d),
        meta={"fourier_rule": "composite simpson", "Q_fourier": q_fourier, "Q_mpe": q_mpe, "eta_max": eta_max},
    )
    if density and d == 1 and hasattr(ref, "density") and _has_density(ref):
        de = density_error(ref, model)
        rep.density_l2, rep.density_l2_norm = de["density_l2"], de["density_l2_norm"]
        rep.meta.update({"A": de["A"], "Q_density": de["Q"], "density_rule": "composite simpson"})
    if test_samples is not None:
        rep.nll = nll(model, test_samples)
    return rep


def _has_density(obj) -> bool:
    try:
        obj.density(np.zeros(1) if getattr(obj, "d", 1) == 1 else np.zeros((1, obj.d)))
    except Exception:
        return False
    return hasattr(obj, "cdf") or isinstance(obj, MultiEffectiveParams)
