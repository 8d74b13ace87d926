"""Deterministic frequency partitions of [-eta_max, eta_max] and their tensor products."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidArgument, UnsupportedDimension

NODE_RULES = ("left", "midpoint")
SUPPORTED_DIMS = (1, 2, 3)


def _place_nodes(edges: np.ndarray, node_rule: str) -> np.ndarray:
    if node_rule == "left":
        return edges[:-1].copy()
    if node_rule == "midpoint":
        return 0.5 * (edges[:-1] + edges[1:])
    raise InvalidArgument(f"unknown node rule {node_rule!r}; expected one of {NODE_RULES}")


@dataclass(frozen=True)
class FourierGrid:
    """A partition -eta_max = xi_0 < ... < xi_P = eta_max with one node per cell.

    ``widths[p]`` is the length of cell p and ``nodes[p]`` lies inside it.
    The partition constants are exposed as ``c0 = P * min(widths)`` and
    ``c1 = P * max(widths)``.
    """

    eta_max: float
    edges: np.ndarray
    nodes: np.ndarray
    node_rule: str = "midpoint"
    uniform: bool = field(default=False, compare=False)

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.float64)
        nodes = np.asarray(self.nodes, dtype=np.float64)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "nodes", nodes)
        edges.setflags(write=False)
        nodes.setflags(write=False)
        if edges.ndim != 1 or edges.size < 3:
            raise InvalidArgument("a grid needs at least two cells")
        if nodes.shape != (edges.size - 1,):
            raise InvalidArgument("need exactly one node per cell")
        if not np.all(np.isfinite(edges)):
            raise InvalidArgument("edges must be finite")
        if np.any(np.diff(edges) <= 0.0):
            raise InvalidArgument("edges must be strictly increasing (no zero-width cells)")
        if self.eta_max <= 0 or edges[0] != -self.eta_max or edges[-1] != self.eta_max:
            raise InvalidArgument("edges must run from -eta_max to +eta_max")
        if np.any(nodes < edges[:-1]) or np.any(nodes > edges[1:]):
            raise InvalidArgument("every node must lie inside its cell")

    @property
    def size(self) -> int:
        return self.nodes.size

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def delta_min(self) -> float:
        return float(self.widths.min())

    @property
    def delta_max(self) -> float:
        return float(self.widths.max())

    @property
    def c0(self) -> float:
        return self.size * self.delta_min

    @property
    def c1(self) -> float:
        return self.size * self.delta_max

    def scaled(self, factor: float) -> "FourierGrid":
        """The same partition with every frequency multiplied by ``factor > 0``."""
        if factor <= 0:
            raise InvalidArgument("scale factor must be positive")
        edges = self.edges * factor
        edges[0], edges[-1] = -self.eta_max * factor, self.eta_max * factor
        nodes = np.clip(self.nodes * factor, edges[:-1], edges[1:])
        return FourierGrid(self.eta_max * factor, edges, nodes, self.node_rule, self.uniform)

    def to_dict(self) -> dict:
        return {
            "eta_max": float(self.eta_max),
            "edges": self.edges.tolist(),
            "nodes": self.nodes.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FourierGrid":
        edges = np.asarray(data["edges"], dtype=np.float64)
        nodes = np.asarray(data["nodes"], dtype=np.float64)
        widths = np.diff(edges)
        uniform = bool(np.all(widths == widths[0]))
        rule = data.get("node_rule")
        if rule is None:
            rule = "left" if np.array_equal(nodes, edges[:-1]) else "midpoint"
        return cls(float(data["eta_max"]), edges, nodes, rule, uniform)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "FourierGrid":
        return cls.from_dict(json.loads(Path(path).read_text()))


def uniform_grid(eta_max: float, p_count: int, node_rule: str = "midpoint") -> FourierGrid:
    """Equal cells of width ``2 * eta_max / p_count``.

    >>> g = uniform_grid(50.0, 1000)
    >>> float(g.nodes[0]), float(g.widths[0])
    (-49.95, 0.1)
    """
    if not eta_max > 0:
        raise InvalidArgument("eta_max must be positive")
    if int(p_count) != p_count or p_count < 2:
        raise InvalidArgument("p_count must be an integer >= 2")
    p_count = int(p_count)
    edges = np.linspace(-eta_max, eta_max, p_count + 1)
    nodes = _place_nodes(edges, node_rule)
    return FourierGrid(float(eta_max), edges, nodes, node_rule, uniform=True)


def nonuniform_grid(cell_edges, node_rule: str = "midpoint") -> FourierGrid:
    edges = np.asarray(cell_edges, dtype=np.float64)
    if edges.ndim != 1 or edges.size < 3:
        raise InvalidArgument("need at least three edges")
    if np.any(np.diff(edges) <= 0.0):
        raise InvalidArgument("edges must be strictly increasing (no zero-width cells)")
    if edges[0] != -edges[-1]:
        raise InvalidArgument("edges must be symmetric: first edge must equal -last edge")
    nodes = _place_nodes(edges, node_rule)
    widths = np.diff(edges)
    return FourierGrid(float(edges[-1]), edges, nodes, node_rule, uniform=bool(np.all(widths == widths[0])))


@dataclass(frozen=True)
class FourierGridMulti:
    """Tensor product of ``d`` identical 1D grids.

    Flattened nodes are listed in row-major order: the last axis varies
    fastest, so node ``(i_1, ..., i_d)`` sits at flat index
    ``sum_j i_j * n ** (d - 1 - j)``.
    """

    axis: FourierGrid
    d: int

    def __post_init__(self):
        if self.d not in SUPPORTED_DIMS:
            raise UnsupportedDimension(f"d={self.d} not supported; use one of {SUPPORTED_DIMS}")

    @property
    def eta_max(self) -> float:
        return self.axis.eta_max

    @property
    def per_axis(self) -> int:
        return self.axis.size

    @property
    def size(self) -> int:
        return self.axis.size ** self.d

    @property
    def nodes(self) -> np.ndarray:
        axes = [self.axis.nodes] * self.d
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    @property
    def weights(self) -> np.ndarray:
        """Cell volumes in the flattened order."""
        w = self.axis.widths
        vol = w
        for _ in range(self.d - 1):
            vol = np.multiply.outer(vol, w)
        return np.asarray(vol).ravel()

    @property
    def c1(self) -> float:
        return self.axis.c1

    @property
    def delta_max(self) -> float:
        return self.axis.delta_max

    def scaled(self, factor: float) -> "FourierGridMulti":
        return FourierGridMulti(self.axis.scaled(factor), self.d)

    def to_dict(self) -> dict:
        out = self.axis.to_dict()
        out["d"] = self.d
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "FourierGridMulti":
        return cls(FourierGrid.from_dict(data), int(data["d"]))


def stretched_grid(eta_max: float, p_count: int, stretch: float, node_rule: str = "midpoint") -> FourierGrid:
    """Cells with edges ``eta_max * sinh(stretch * u) / sinh(stretch)`` for equally spaced ``u`` in [-1, 1].

    Cells are narrowest at the origin, so a grid of modest size still
    resolves sample-space features out to roughly ``pi / delta_min``.
    ``stretch -> 0`` recovers the uniform grid.
    """
    if not eta_max > 0:
        raise InvalidArgument("eta_max must be positive")
    if int(p_count) != p_count or p_count < 2:
        raise InvalidArgument("p_count must be an integer >= 2")
    if not stretch > 0:
        raise InvalidArgument("stretch must be positive")
    u = np.linspace(-1.0, 1.0, int(p_count) + 1)
    edges = eta_max * np.sinh(stretch * u) / np.sinh(stretch)
    edges[0], edges[-1] = -eta_max, eta_max
    edges = 0.5 * (edges - edges[::-1])  # exact symmetry
    return nonuniform_grid(edges, node_rule)


def tensor_grid(eta_max: float, per_axis_count: int, d: int, node_rule: str = "midpoint") -> FourierGridMulti:
    if d not in SUPPORTED_DIMS:
        raise UnsupportedDimension(f"d={d} not supported; use one of {SUPPORTED_DIMS}")
    return FourierGridMulti(uniform_grid(eta_max, per_axis_count, node_rule), d)


def parse_grid_spec(spec: str):
    """Parse ``uniform:ETA:P[:rule]``, ``tensor:ETA:N:D[:rule]`` or ``stretched:ETA:N:C[:D]``."""
    parts = spec.split(":")
    try:
        if parts[0] == "uniform" and len(parts) in (3, 4):
            rule = parts[3] if len(parts) == 4 else "midpoint"
            return uniform_grid(float(parts[1]), int(parts[2]), rule)
        if parts[0] == "stretched" and len(parts) in (4, 5):
            axis = stretched_grid(float(parts[1]), int(parts[2]), float(parts[3]))
            d = int(parts[4]) if len(parts) == 5 else 1
            return axis if d == 1 else FourierGridMulti(axis, d)
        if parts[0] == "tensor" and len(parts) in (4, 5):
            rule = parts[4] if len(parts) == 5 else "midpoint"
            return tensor_grid(float(parts[1]), int(parts[2]), int(parts[3]), rule)
    except ValueError as exc:
        raise InvalidArgument(f"bad grid spec {spec!r}: {exc}") from exc
    raise InvalidArgument(f"bad grid spec {spec!r}; expected uniform:ETA:P[:rule], "
                          "tensor:ETA:N:D[:rule] or stretched:ETA:N:C[:D]")


def grid_from_dict(data: dict):
    if "d" in data and int(data["d"]) > 1:
        return FourierGridMulti.from_dict(data)
    return FourierGrid.from_dict(data)


def cell_weights(grid) -> np.ndarray:
    if isinstance(grid, FourierGridMulti):
        return grid.weights
    return grid.widths


__all__ = [
    "FourierGrid",
    "FourierGridMulti",
    "uniform_grid",
    "nonuniform_grid",
    "stretched_grid",
    "tensor_grid",
    "parse_grid_spec",
    "grid_from_dict",
    "cell_weights",
]
