"""Uniform-grid scalar and vector fields with finite-difference stencils.

Every field in the package lives on a :class:`GridGeometry`: an axis-aligned
lattice with identical spacing ``h`` on all axes. Node ``i`` sits at
``origin + i * h``. Values are stored as C-ordered arrays, so the last axis
varies fastest when flattened; the container file format relies on this.
"""

from __future__ import annotations

import base64
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "GridError",
    "GridGeometry",
    "ScalarGrid",
    "VectorGrid",
    "gradient_central",
    "gradient_norm_godunov",
    "divergence",
    "laplacian",
    "multilinear_weights",
    "sample_trilinear",
    "sample_points",
    "save_grid",
    "load_grid",
]


class GridError(ValueError):
    """Raised for malformed grids, mismatched geometries and out-of-bounds queries."""


@dataclass(frozen=True)
class GridGeometry:
    dims: tuple[int, ...]
    origin: tuple[float, ...]
    spacing: float

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        origin = tuple(float(o) for o in np.broadcast_to(self.origin, (len(dims),)))
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "spacing", _isotropic(self.spacing))
        if len(dims) not in (2, 3):
            raise GridError(f"only 2 or 3 axes are supported, got {len(dims)}")
        if min(dims) < 4:
            raise GridError(f"every axis needs at least 4 nodes, got {dims}")
        if not (self.spacing > 0 and np.isfinite(self.spacing)):
            raise GridError(f"spacing must be positive, got {self.spacing}")
        if not all(np.isfinite(origin)):
            raise GridError("origin must be finite")

    @classmethod
    def from_bounds(cls, lower: Sequence[float], upper: Sequence[float], n: int | Sequence[int]):
        """Geometry with ``n`` nodes along the longest axis spanning ``[lower, upper]``.

        Shorter axes get as many nodes as fit at the same spacing (rounded up, so
        the box is always covered).
        """
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        extent = upper - lower
        if np.any(extent <= 0):
            raise GridError("upper bounds must exceed lower bounds")
        if np.ndim(n) == 0:
            h = float(extent.max()) / (int(n) - 1)
            dims = tuple(int(np.ceil(e / h - 1e-9)) + 1 for e in extent)
        else:
            dims = tuple(int(k) for k in n)
            hs = extent / (np.asarray(dims) - 1)
            h = _isotropic(hs)
        return cls(dims, tuple(lower), h)

    @classmethod
    def cube(cls, center: Sequence[float], side: float, n: int):
        center = np.asarray(center, dtype=float)
        return cls((n,) * len(center), tuple(center - side / 2), side / (n - 1))

    @property
    def ndim(self) -> int:
        return len(self.dims)

    @property
    def size(self) -> int:
        return int(np.prod(self.dims))

    @property
    def lower(self) -> np.ndarray:
        return np.asarray(self.origin)

    @property
    def upper(self) -> np.ndarray:
        return self.lower + self.spacing * (np.asarray(self.dims) - 1)

    def axes(self) -> list[np.ndarray]:
        return [o + self.spacing * np.arange(d) for o, d in zip(self.origin, self.dims)]

    def mesh(self) -> list[np.ndarray]:
        """Node coordinates, one array of shape ``dims`` per axis."""
        return np.meshgrid(*self.axes(), indexing="ij")

    def points(self) -> np.ndarray:
        """All node positions as an ``(size, ndim)`` array in storage order."""
        return np.stack([m.ravel() for m in self.mesh()], axis=1)

    def node(self, index: Sequence[int]) -> np.ndarray:
        return self.lower + self.spacing * np.asarray(index, dtype=float)

    def contains(self, x, tol: float = 1e-12) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        slack = tol * max(1.0, self.spacing)
        return np.all((x >= self.lower - slack) & (x <= self.upper + slack), axis=1)

    def check_same(self, other: "GridGeometry"):
        if self != other:
            raise GridError(f"geometry mismatch: {self} vs {other}")


def _isotropic(hs) -> float:
    hs = np.atleast_1d(np.asarray(hs, dtype=float))
    if np.ptp(hs) > 1e-12 * hs.max():
        raise GridError(f"anisotropic spacing {hs.tolist()} is not supported")
    return float(hs[0])


@dataclass(frozen=True)
class ScalarGrid:
    geometry: GridGeometry
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.size != self.geometry.size:
            raise GridError(f"expected {self.geometry.size} values, got {v.size}")
        v = np.ascontiguousarray(v.reshape(self.geometry.dims))
        if not np.all(np.isfinite(v)):
            raise GridError("grid values must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, geometry: GridGeometry, fn) -> "ScalarGrid":
        """Sample ``fn(points)`` where ``points`` has shape ``(size, ndim)``."""
        return cls(geometry, np.asarray(fn(geometry.points()), dtype=float))

    @property
    def flat(self) -> np.ndarray:
        return self.values.ravel()

    def with_values(self, values) -> "ScalarGrid":
        return ScalarGrid(self.geometry, values)


@dataclass(frozen=True)
class VectorGrid:
    geometry: GridGeometry
    components: tuple[np.ndarray, ...] = field(repr=False)

    def __post_init__(self):
        comps = []
        if len(self.components) != self.geometry.ndim:
            raise GridError("need one component per axis")
        for c in self.components:
            c = np.asarray(c, dtype=np.float64)
            if c.size != self.geometry.size:
                raise GridError("component length does not match geometry")
            c = np.ascontiguousarray(c.reshape(self.geometry.dims))
            if not np.all(np.isfinite(c)):
                raise GridError("vector components must be finite")
            c.flags.writeable = False
            comps.append(c)
        object.__setattr__(self, "components", tuple(comps))

    def stacked(self) -> np.ndarray:
        """Components as an array of shape ``dims + (ndim,)``."""
        return np.stack(self.components, axis=-1)

    def norm(self) -> np.ndarray:
        return np.sqrt(sum(c * c for c in self.components))


# --------------------------------------------------------------------------
# stencils


def gradient_central(f: ScalarGrid) -> VectorGrid:
    """Central differences inside, first-order one-sided differences on the faces."""
    h = f.geometry.spacing
    parts = np.gradient(f.values, h, edge_order=1)
    if f.geometry.ndim == 1:  # pragma: no cover - geometry forbids 1D
        parts = [parts]
    return VectorGrid(f.geometry, tuple(parts))


def divergence(v: VectorGrid) -> ScalarGrid:
    h = v.geometry.spacing
    out = np.zeros(v.geometry.dims)
    for axis, comp in enumerate(v.components):
        out += np.gradient(comp, h, axis=axis, edge_order=1)
    return ScalarGrid(v.geometry, out)


def laplacian(f: ScalarGrid) -> ScalarGrid:
    """Compact ``2*ndim + 1`` point Laplacian with mirror (reflect) padding."""
    h = f.geometry.spacing
    padded = np.pad(f.values, 1, mode="reflect")
    core = tuple(slice(1, -1) for _ in range(f.geometry.ndim))
    out = -2.0 * f.geometry.ndim * f.values
    for axis in range(f.geometry.ndim):
        lo = list(core)
        hi = list(core)
        lo[axis] = slice(0, -2)
        hi[axis] = slice(2, None)
        out = out + padded[tuple(lo)] + padded[tuple(hi)]
    return ScalarGrid(f.geometry, out / (h * h))


def one_sided_differences(values: np.ndarray, h: float, axis: int):
    """Backward and forward differences along ``axis``.

    Faces use linear extrapolation for the missing neighbour, which makes the
    backward and forward difference coincide there.
    """
    d = np.diff(values, axis=axis) / h
    first = [slice(None)] * values.ndim
    last = [slice(None)] * values.ndim
    first[axis] = slice(0, 1)
    last[axis] = slice(-1, None)
    backward = np.concatenate([d[tuple(first)], d], axis=axis)
    forward = np.concatenate([d, d[tuple(last)]], axis=axis)
    return backward, forward


def godunov_norm_values(values: np.ndarray, sign: np.ndarray, h: float) -> np.ndarray:
    """Array-level Godunov ``|grad f|``; ``sign`` selects the upwind branch per node."""
    pos = sign >= 0
    total = np.zeros_like(values)
    for axis in range(values.ndim):
        a, b = one_sided_differences(values, h, axis)
        plus = np.maximum(np.maximum(a, 0.0) ** 2, np.minimum(b, 0.0) ** 2)
        minus = np.maximum(np.minimum(a, 0.0) ** 2, np.maximum(b, 0.0) ** 2)
        total += np.where(pos, plus, minus)
    return np.sqrt(total)


def gradient_norm_godunov(f: ScalarGrid, sign_ref: ScalarGrid) -> ScalarGrid:
    """First-order Godunov upwind approximation of ``|grad f|``.

    The upwind direction at each node follows the sign of ``sign_ref``, i.e. the
    monotone Hamiltonian for ``sign * (|grad f| - 1)``. Zero signs use the
    positive branch.
    """
    f.geometry.check_same(sign_ref.geometry)
    return ScalarGrid(f.geometry, godunov_norm_values(f.values, sign_ref.values, f.geometry.spacing))


# --------------------------------------------------------------------------
# interpolation


def multilinear_weights(geometry: GridGeometry, points) -> tuple[np.ndarray, np.ndarray]:
    """Flat node indices and weights of the multilinear interpolant.

    Returns arrays of shape ``(n, 2**ndim)``; the weights of each row sum to one.
    Raises :class:`GridError` when a point falls outside the grid box.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != geometry.ndim:
        raise GridError(f"points must have {geometry.ndim} coordinates")
    inside = geometry.contains(pts)
    if not np.all(inside):
        bad = pts[~inside][0]
        raise GridError(f"point {bad.tolist()} lies outside the grid box")
    dims = np.asarray(geometry.dims)
    u = (pts - geometry.lower) / geometry.spacing
    # points at a node up to round-off return the nodal value exactly
    snapped = np.rint(u)
    u = np.where(np.abs(u - snapped) <= 1e-9, snapped, u)
    base = np.clip(np.floor(u).astype(np.int64), 0, dims - 2)
    t = np.clip(u - base, 0.0, 1.0)
    strides = np.array([int(np.prod(dims[k + 1:])) for k in range(geometry.ndim)])
    n_corner = 2 ** geometry.ndim
    idx = np.empty((len(pts), n_corner), dtype=np.int64)
    w = np.empty((len(pts), n_corner))
    for corner in range(n_corner):
        bits = np.array([(corner >> (geometry.ndim - 1 - k)) & 1 for k in range(geometry.ndim)])
        idx[:, corner] = (base + bits) @ strides
        w[:, corner] = np.prod(np.where(bits == 1, t, 1.0 - t), axis=1)
    return idx, w


def sample_points(f: ScalarGrid, points) -> np.ndarray:
    idx, w = multilinear_weights(f.geometry, points)
    return np.sum(f.flat[idx] * w, axis=1)


def sample_trilinear(f: ScalarGrid, x) -> float:
    """Multilinear interpolation of ``f`` at a single point ``x``."""
    return float(sample_points(f, np.asarray(x, dtype=float)[None, :])[0])


# --------------------------------------------------------------------------
# container files
#
# Header: ``key = value`` lines. The payload is little-endian float64 in C order,
# either base64 after a ``data =`` key or in a sibling binary file named by
# ``payload = file:<name>``.

_MAGIC = "palpsdf-grid 1"


def save_grid(path, grid: ScalarGrid, inline: bool = True) -> Path:
    path = Path(path)
    g = grid.geometry
    payload = grid.flat.astype("<f8").tobytes()
    lines = [
        f"# {_MAGIC}",
        f"dims = {' '.join(str(d) for d in g.dims)}",
        f"origin = {' '.join(repr(o) for o in g.origin)}",
        f"spacing = {g.spacing!r}",
        f"count = {g.size}",
        "dtype = float64",
        "byteorder = little",
        "layout = C",
    ]
    if inline:
        lines.append("payload = inline")
        lines.append("data = " + base64.b64encode(payload).decode("ascii"))
    else:
        sibling = path.name + ".bin"
        (path.parent / sibling).write_bytes(payload)
        lines.append(f"payload = file:{sibling}")
    path.write_text("\n".join(lines) + "\n")
    return path


def load_grid(path) -> ScalarGrid:
    path = Path(path)
    header = {}
    with open(path) as fh:
        first = fh.readline().strip()
        if first != f"# {_MAGIC}":
            raise GridError(f"{path}: not a grid container file")
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise GridError(f"{path}: malformed header line {line!r}")
            header[key.strip()] = value.strip()
    try:
        dims = tuple(int(t) for t in header["dims"].split())
        origin = tuple(float(t) for t in header["origin"].split())
        spacing = float(header["spacing"])
        count = int(header["count"])
        payload_spec = header["payload"]
    except KeyError as exc:
        raise GridError(f"{path}: missing header key {exc}") from None
    if header.get("dtype", "float64") != "float64" or header.get("byteorder", "little") != "little":
        raise GridError(f"{path}: only little-endian float64 payloads are supported")
    if payload_spec == "inline":
        raw = base64.b64decode(header["data"])
    elif payload_spec.startswith("file:"):
        raw = (path.parent / payload_spec[5:]).read_bytes()
    else:
        raise GridError(f"{path}: unknown payload {payload_spec!r}")
    values = np.frombuffer(raw, dtype="<f8")
    if values.size != count:
        raise GridError(f"{path}: header says {count} values, payload has {values.size}")
    return ScalarGrid(GridGeometry(dims, origin, spacing), values.astype(np.float64))
