"""Empirical characteristic functions on frequency grids.

The heavy lifting is done by two compiled kernels. Both accumulate every
node's sum over the samples in a fixed order with Kahan compensation, so the
result does not depend on how nodes are distributed over workers.

* ``_ecf_direct`` evaluates ``cos``/``sin`` of ``eta_p * x_m`` for each pair.
* ``_ecf_sweep`` handles runs of equally spaced nodes: it evaluates the
  phase exactly at every ``_BLOCK``-th node and advances in between by
  complex multiplication with ``exp(i * delta * x_m)``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numba import njit

from .errors import InvalidArgument, InvalidData
from .grid import FourierGrid, FourierGridMulti

_BLOCK = 64


@dataclass(frozen=True)
class SampleSet:
    """Samples in R (shape ``(M,)``) or R^d (shape ``(M, d)``).

    ``affine`` holds ``(a, c)`` when the values were produced by
    :func:`affine_preprocess` from raw data ``X`` as ``a * X + c``.
    """

    values: np.ndarray
    affine: tuple[float, float] | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim == 2 and v.shape[1] == 1:
            v = v[:, 0]
        if v.ndim not in (1, 2):
            raise InvalidData("samples must be a vector or an (M, d) array")
        if v.shape[0] < 1:
            raise InvalidArgument("sample set is empty")
        if not np.all(np.isfinite(v)):
            raise InvalidData("samples contain non-finite values")
        object.__setattr__(self, "values", v)

    @property
    def count(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return 1 if self.values.ndim == 1 else self.values.shape[1]

    def subset(self, idx) -> "SampleSet":
        return SampleSet(self.values[idx], self.affine)

    def save(self, path) -> None:
        np.savetxt(path, self.values if self.d > 1 else self.values[:, None], delimiter=",", fmt="%.17g")

    @classmethod
    def load(cls, path) -> "SampleSet":
        """Read one value per line, or a CSV with one column per coordinate."""
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"sample file not found: {path}")
        try:
            data = np.loadtxt(path, delimiter="," if _looks_like_csv(path) else None, ndmin=2)
        except ValueError as exc:
            raise InvalidData(f"cannot parse samples in {path}: {exc}") from exc
        return cls(data)


def _looks_like_csv(path: Path) -> bool:
    with open(path) as fh:
        for line in fh:
            if line.strip():
                return "," in line
    return False


@dataclass(frozen=True)
class EmpiricalCF:
    """CF values at the nodes of ``grid``; ``m`` is the sample count (``inf`` for exact CFs)."""

    grid: FourierGrid | FourierGridMulti
    values: np.ndarray
    m: float

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.complex128)
        if vals.shape != (self.grid.size,):
            raise InvalidArgument("one CF value per grid node is required")
        object.__setattr__(self, "values", vals)

    @property
    def nodes(self) -> np.ndarray:
        return self.grid.nodes

    @property
    def d(self) -> int:
        return self.grid.d if isinstance(self.grid, FourierGridMulti) else 1

    def to_csv(self, path) -> None:
        nodes = self.nodes
        if nodes.ndim == 1:
            nodes = nodes[:, None]
        header = [f"eta{j + 1}" for j in range(nodes.shape[1])] if nodes.shape[1] > 1 else ["eta"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header + ["re", "im"])
            for row, v in zip(nodes, self.values):
                w.writerow([repr(float(e)) for e in row] + [repr(float(v.real)), repr(float(v.imag))])


def _check_samples(samples) -> SampleSet:
    if isinstance(samples, SampleSet):
        return samples
    return SampleSet(np.asarray(samples, dtype=np.float64))


@njit(cache=True)
def _ecf_direct(x, nodes, out_re, out_im):
    m_count = x.size
    for p in range(nodes.size):
        eta = nodes[p]
        s_re = 0.0
        c_re = 0.0
        s_im = 0.0
        c_im = 0.0
        for m in range(m_count):
            ph = eta * x[m]
            y = np.cos(ph) - c_re
            t = s_re + y
            c_re = (t - s_re) - y
            s_re = t
            y = np.sin(ph) - c_im
            t = s_im + y
            c_im = (t - s_im) - y
            s_im = t
        out_re[p] = s_re / m_count
        out_im[p] = s_im / m_count


@njit(cache=True)
def _ecf_sweep(base, x, nodes, delta, block, out_re, out_im):
    """Sum exp(i * (base + eta_k * x)) over samples for equally spaced nodes eta_k."""
    m_count = x.size
    n_nodes = nodes.size
    step_re = np.cos(delta * x)
    step_im = np.sin(delta * x)
    for k0 in range(0, n_nodes, block):
        nb = min(block, n_nodes - k0)
        anchor = nodes[k0]
        s_re = np.zeros(nb)
        c_re = np.zeros(nb)
        s_im = np.zeros(nb)
        c_im = np.zeros(nb)
        for m in range(m_count):
            ph = base[m] + anchor * x[m]
            zr = np.cos(ph)
            zi = np.sin(ph)
            wr = step_re[m]
            wi = step_im[m]
            for j in range(nb):
                y = zr - c_re[j]
                t = s_re[j] + y
                c_re[j] = (t - s_re[j]) - y
                s_re[j] = t
                y = zi - c_im[j]
                t = s_im[j] + y
                c_im[j] = (t - s_im[j]) - y
                s_im[j] = t
                zr, zi = zr * wr - zi * wi, zr * wi + zi * wr
        for j in range(nb):
            out_re[k0 + j] = s_re[j] / m_count
            out_im[k0 + j] = s_im[j] / m_count


def _node_step(grid: FourierGrid) -> float:
    return (grid.nodes[-1] - grid.nodes[0]) / (grid.size - 1)


def _ecf_1d(x: np.ndarray, grid: FourierGrid) -> np.ndarray:
    re = np.empty(grid.size)
    im = np.empty(grid.size)
    x = np.ascontiguousarray(x, dtype=np.float64)
    if grid.uniform:
        _ecf_sweep(np.zeros_like(x), x, np.ascontiguousarray(grid.nodes), _node_step(grid), _BLOCK, re, im)
    else:
        _ecf_direct(x, np.ascontiguousarray(grid.nodes), re, im)
    return re + 1j * im


def empirical_cf(samples, grid: FourierGrid) -> EmpiricalCF:
    """``(1/M) * sum_m exp(i * eta_p * X_m)`` at every node of a 1D grid.

    Examples
    --------
    >>> from fourmix.grid import uniform_grid
    >>> g = empirical_cf([0.0], uniform_grid(1.0, 4))
    >>> bool(np.all(g.values == 1))
    True
    """
    s = _check_samples(samples)
    if s.d != 1:
        raise InvalidArgument("empirical_cf expects 1D samples; use empirical_cf_multi")
    if isinstance(grid, FourierGridMulti):
        if grid.d != 1:
            raise InvalidArgument("grid dimension does not match samples")
        grid = grid.axis
    return EmpiricalCF(grid, _ecf_1d(s.values, grid), s.count)


def empirical_cf_multi(samples, grid: FourierGridMulti) -> EmpiricalCF:
    """ECF at the flattened nodes of a tensor grid (last axis fastest)."""
    s = _check_samples(samples)
    x = s.values if s.values.ndim == 2 else s.values[:, None]
    d = x.shape[1]
    if d != grid.d:
        raise InvalidArgument(f"samples are {d}-dimensional but grid is {grid.d}-dimensional")
    axis = grid.axis
    n = axis.size
    if d == 1:
        return EmpiricalCF(grid, _ecf_1d(x[:, 0], axis), s.count)
    last = np.ascontiguousarray(x[:, -1])
    out = np.empty(grid.size, dtype=np.complex128)
    re = np.empty(n)
    im = np.empty(n)
    prefixes = np.stack(
        [m.ravel() for m in np.meshgrid(*([axis.nodes] * (d - 1)), indexing="ij")], axis=1
    )
    for row, prefix in enumerate(prefixes):
        base = x[:, :-1] @ prefix
        if axis.uniform:
            _ecf_sweep(base, last, np.ascontiguousarray(axis.nodes), _node_step(axis), _BLOCK, re, im)
        else:
            # shift by the prefix phase: exp(i*base) * exp(i*eta*last)
            for j, eta in enumerate(axis.nodes):
                z = np.exp(1j * (base + eta * last))
                re[j] = z.real.sum() / s.count
                im[j] = z.imag.sum() / s.count
        out[row * n:(row + 1) * n] = re + 1j * im
    return EmpiricalCF(grid, out, s.count)


def compute_ecf(samples, grid) -> EmpiricalCF:
    if isinstance(grid, FourierGridMulti) and grid.d > 1:
        return empirical_cf_multi(samples, grid)
    return empirical_cf(samples, grid)


def ecf_at(samples, eta) -> np.ndarray:
    """ECF at arbitrary frequencies (scalar, ``(Q,)`` or ``(Q, d)``); plain vectorized sum."""
    s = _check_samples(samples)
    x = s.values
    eta = np.asarray(eta, dtype=np.float64)
    scalar = eta.ndim == 0
    if x.ndim == 1:
        eta1 = np.atleast_1d(eta)
        out = np.empty(eta1.size, dtype=np.complex128)
        for i, e in enumerate(eta1):
            out[i] = np.exp(1j * e * x).mean()
    else:
        eta2 = np.atleast_2d(eta)
        out = np.array([np.exp(1j * (x @ e)).mean() for e in eta2])
    return out[0] if scalar else out


def affine_preprocess(samples, a: float, c: float) -> SampleSet:
    """Return ``Y = a * X + c``; densities map back via ``g_X(x) = a * g_Y(a * x + c)``."""
    if not a > 0:
        raise InvalidArgument("affine scale a must be positive")
    s = _check_samples(samples)
    prev = s.affine
    record = (a, c) if prev is None else (a * prev[0], a * prev[1] + c)
    return SampleSet(a * s.values + c, record)


def affine_transform_ecf(ecf: EmpiricalCF, a: float, c: float) -> EmpiricalCF:
    """Exact ECF of ``Y = a X + c`` from the ECF of ``X``, on the grid scaled by ``1/a``.

    Uses ``G_Y(eta) = exp(i * eta * c) * G_X(a * eta)``, so no resummation is
    needed: node ``eta_X`` of the input becomes node ``eta_X / a``.
    """
    if not a > 0:
        raise InvalidArgument("affine scale a must be positive")
    grid = ecf.grid.scaled(1.0 / a)
    nodes = grid.nodes
    phase = nodes * c if nodes.ndim == 1 else nodes.sum(axis=1) * c
    return EmpiricalCF(grid, np.exp(1j * phase) * ecf.values, ecf.m)


def exact_cf_on_grid(cf, grid) -> EmpiricalCF:
    """Wrap a closed-form CF evaluated at grid nodes as a noise-free target (``m = inf``)."""
    return EmpiricalCF(grid, np.asarray(cf(grid.nodes), dtype=np.complex128), float("inf"))


def ecf_points(samples, eta) -> np.ndarray:
    """ECF at arbitrary 1D frequencies using the compiled kernels.

    Equally spaced inputs go through the sweep kernel, anything else through
    the direct kernel; both are deterministic.
    """
    s = _check_samples(samples)
    if s.d != 1:
        return ecf_at(s, eta)
    eta = np.ascontiguousarray(np.asarray(eta, dtype=np.float64))
    flat = eta.reshape(-1)
    re = np.empty(flat.size)
    im = np.empty(flat.size)
    x = np.ascontiguousarray(s.values)
    if flat.size > 2:
        step = (flat[-1] - flat[0]) / (flat.size - 1)
        uniform = step > 0 and np.allclose(np.diff(flat), step, rtol=1e-9, atol=0)
    else:
        uniform = False
    if uniform:
        _ecf_sweep(np.zeros_like(x), x, flat, step, _BLOCK, re, im)
    else:
        _ecf_direct(x, flat, re, im)
    return (re + 1j * im).reshape(eta.shape)


class EcfFunction:
    """Callable ``eta -> ECF(eta)`` bound to a sample set (usable wherever a CF callable is expected)."""

    def __init__(self, samples):
        self.samples = _check_samples(samples)

    def __call__(self, eta):
        return ecf_points(self.samples, eta)

    def cf(self, eta):
        return self(eta)
