"""Stationary-bootstrap pseudo-samples from a dependent series.

A pseudo-sample aggregates ``h`` consecutive per-step values along a
stationary-bootstrap path: blocks start at uniformly drawn positions and
continue (wrapping circularly) until a restart, which happens with
probability ``p`` at each step. Given the series the pseudo-samples are
i.i.d., so their ECF estimates the CF of the pseudo-law.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ecf import EmpiricalCF, SampleSet
from .errors import InvalidArgument, InvalidData

MAX_PATH_STEPS = 10**7
CHUNK = 1 << 15
CHUNK_STEPS = 1 << 22  # cap on random draws per chunk
AGGREGATIONS = ("sum", "compound")


@dataclass(frozen=True)
class TimeSeries:
    """Observed per-step values ``Y_1..Y_N``; ``step`` is the step length as a fraction of the horizon."""

    values: np.ndarray
    step: float = 1.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if v.size < 2:
            raise InvalidArgument("a series needs at least two observations")
        if not np.all(np.isfinite(v)):
            raise InvalidData("series contains non-finite values")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.size

    @classmethod
    def from_csv(cls, path, column: int | None = None, step: float = 1.0) -> "TimeSeries":
        """Read the last (or ``column``-th) column of a CSV; a non-numeric first row is a header."""
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"series file not found: {path}")
        vals = []
        with open(path, newline="") as fh:
            for i, row in enumerate(csv.reader(fh)):
                if not row or not "".join(row).strip():
                    continue
                cell = row[-1 if column is None else column]
                try:
                    vals.append(float(cell))
                except ValueError:
                    if i == 0:
                        continue
                    raise InvalidData(f"{path}: cannot parse {cell!r} on line {i + 1}") from None
        return cls(np.array(vals), step)

    @classmethod
    def from_prices(cls, prices, returns: str = "log", step: float = 1.0) -> "TimeSeries":
        p = np.asarray(prices, dtype=np.float64)
        if np.any(p <= 0):
            raise InvalidData("prices must be positive")
        if returns == "log":
            return cls(np.diff(np.log(p)), step)
        if returns == "simple":
            return cls(p[1:] / p[:-1] - 1.0, step)
        raise InvalidArgument("returns must be 'log' or 'simple'")


@dataclass(frozen=True)
class BootstrapConfig:
    """``restart_prob`` p (mean block length 1/p), ``horizon_steps`` h, ``m`` pseudo-samples.

    ``aggregation='sum'`` adds the steps (log returns); ``'compound'`` gives
    ``prod(1 + Y) - 1`` (simple returns). ``long_path_steps`` switches to
    simulating one long path per pseudo-sample and keeping its final ``h``
    steps.
    """

    restart_prob: float
    horizon_steps: int
    m: int
    seed: int = 0
    aggregation: str = "sum"
    long_path_steps: int | None = None

    def __post_init__(self):
        if not 0 < self.restart_prob <= 1:
            raise InvalidArgument("restart probability must lie in (0, 1]")
        if self.horizon_steps < 1:
            raise InvalidArgument("horizon must be at least one step")
        if self.m < 1:
            raise InvalidArgument("need at least one pseudo-sample")
        if self.aggregation not in AGGREGATIONS:
            raise InvalidArgument(f"aggregation must be one of {AGGREGATIONS}")
        length = self.long_path_steps or self.horizon_steps
        if length > MAX_PATH_STEPS:
            raise InvalidArgument(f"path length {length} exceeds the cap of {MAX_PATH_STEPS} steps")
        if self.long_path_steps is not None and self.long_path_steps < self.horizon_steps:
            raise InvalidArgument("long path must be at least one horizon long")


def _check_p(p: float) -> None:
    if not 0 < p <= 1:
        raise InvalidArgument("restart probability must lie in (0, 1]")


def _paths(n_paths: int, length: int, n: int, p: float, rng, start=None) -> np.ndarray:
    """(n_paths, length) zero-based indices, each row an independent stationary-bootstrap path."""
    restart = rng.random((n_paths, length)) < p
    restart[:, 0] = True
    flat = restart.ravel()
    n_blocks = int(flat.sum())
    starts = rng.integers(0, n, size=n_blocks)
    if start is not None:
        row_first = np.concatenate([[0], np.cumsum(restart.sum(axis=1))[:-1]])
        starts[row_first] = start
    block = np.cumsum(flat) - 1
    pos = np.arange(flat.size)
    block_begin = np.flatnonzero(flat)
    offset = pos - block_begin[block]
    return ((starts[block] + offset) % n).reshape(n_paths, length)


def stationary_bootstrap_indices(n_out: int, n: int, p: float, rng, start: int | None = None) -> np.ndarray:
    """Zero-based indices of one stationary-bootstrap path of length ``n_out`` over ``0..n-1``.

    ``start`` pins the first index (otherwise uniform).
    """
    _check_p(p)
    if n < 1:
        raise InvalidArgument("series length must be at least 1")
    if n_out < 1:
        raise InvalidArgument("path length must be at least 1")
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    return _paths(1, n_out, n, p, rng, start)[0]


def _aggregate(steps: np.ndarray, how: str) -> np.ndarray:
    if how == "sum":
        return steps.sum(axis=1)
    return np.expm1(np.log1p(steps).sum(axis=1))


def chunk_rows(length: int) -> int:
    """Pseudo-samples per chunk for paths of ``length`` steps."""
    return max(1, min(CHUNK, CHUNK_STEPS // length))


def pseudo_samples(series: TimeSeries, cfg: BootstrapConfig) -> SampleSet:
    """``cfg.m`` conditionally i.i.d. pseudo-samples of the ``h``-step aggregate.

    Paths are generated in fixed-size chunks, chunk ``c`` drawing from
    ``default_rng([seed, c])``. Chunks are always simulated in full and then
    truncated, so for a given seed and path length the first ``k``
    pseudo-samples do not depend on ``m``.
    """
    y = series.values
    if cfg.aggregation == "compound" and np.any(y <= -1):
        raise InvalidData("simple returns must exceed -1 for compounding")
    h = cfg.horizon_steps
    length = cfg.long_path_steps or h
    rows = chunk_rows(length)
    out = np.empty(cfg.m)
    for c, lo in enumerate(range(0, cfg.m, rows)):
        hi = min(lo + rows, cfg.m)
        rng = np.random.default_rng([cfg.seed, c])
        idx = _paths(rows, length, series.n, cfg.restart_prob, rng)[: hi - lo]
        out[lo:hi] = _aggregate(y[idx[:, length - h:]], cfg.aggregation)
    return SampleSet(out)


def pseudo_law_discrepancy(ref_cf, pseudo_ecf_big: EmpiricalCF, grid=None) -> tuple[float, float]:
    """Monte Carlo proxies for ``B1 = mean(|Re dG| + |Im dG|)`` and ``B2 = mean(|dG|^2)``.

    ``dG = G - G_dagger`` at the grid nodes, with the pseudo-law CF
    ``G_dagger`` replaced by an ECF of many pseudo-samples. ``ref_cf`` is a
    callable or an :class:`EmpiricalCF` on the same grid.
    """
    nodes = pseudo_ecf_big.nodes if grid is None else grid.nodes
    if grid is not None and not np.array_equal(np.asarray(grid.nodes), pseudo_ecf_big.nodes):
        raise InvalidArgument("grid does not match the pseudo ECF")
    g = ref_cf.values if isinstance(ref_cf, EmpiricalCF) else np.asarray(ref_cf(nodes), dtype=np.complex128)
    diff = g - pseudo_ecf_big.values
    b1 = float(np.mean(np.abs(diff.real) + np.abs(diff.imag)))
    b2 = float(np.mean(np.abs(diff) ** 2))
    return b1, b2


# ---------------------------------------------------------------------------
# synthetic dependent series and their aggregate-moment oracles
# ---------------------------------------------------------------------------


def ar1_series(n: int, phi: float, sigma: float, rng, mean: float = 0.0, burn_in: int = 1000) -> TimeSeries:
    """Stationary Gaussian AR(1): ``Y_t - mean = phi (Y_{t-1} - mean) + sigma * e_t``."""
    if not abs(phi) < 1:
        raise InvalidArgument("|phi| must be below 1 for stationarity")
    from scipy.signal import lfilter

    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    e = sigma * rng.standard_normal(n + burn_in)
    e[0] = rng.standard_normal() * sigma / np.sqrt(1 - phi * phi)
    y = lfilter([1.0], [1.0, -phi], e)[burn_in:]
    return TimeSeries(y + mean)


def ar1_aggregate_variance(phi: float, sigma: float, h: int) -> float:
    """``Var(Y_1 + ... + Y_h)`` for a stationary AR(1)."""
    k = np.arange(1, h)
    gamma0 = sigma**2 / (1 - phi**2)
    return float(gamma0 * (h + 2 * np.sum((h - k) * phi**k)))


def bootstrap_aggregate_variance(gamma0: float, phi: float, h: int, p: float) -> float:
    """Aggregate variance under the stationary-bootstrap law of a long AR(1) history.

    Two steps ``k`` apart share a block with probability ``(1 - p)^k`` and are
    otherwise independent draws, so lag-``k`` covariances shrink by that
    factor.
    """
    k = np.arange(1, h)
    return float(gamma0 * (h + 2 * np.sum((h - k) * (phi * (1 - p)) ** k)))


def regime_switching_series(n: int, rng, means=(0.01, -0.02), vols=(0.03, 0.08), stay=(0.97, 0.9),
                            burn_in: int = 200) -> TimeSeries:
    """Two-state Markov-switching Gaussian returns (calm and turbulent regimes)."""
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    means, vols, stay = (np.asarray(v, dtype=np.float64) for v in (means, vols, stay))
    total = n + burn_in
    u = rng.random(total)
    state = np.empty(total, dtype=np.int64)
    s = 0
    for t in range(total):
        state[t] = s
        if u[t] > stay[s]:
            s = 1 - s
    y = means[state] + vols[state] * rng.standard_normal(total)
    return TimeSeries(y[burn_in:])
