"""Redistancing of a pseudo-SDF by pseudo-time evolution.

The field is advanced with forward Euler on

    d(phi)/dt + S(phi_hat) * (|grad phi| - 1) = 0,

where ``S`` is the smoothed sign of the input and ``|grad phi|`` the Godunov
upwind norm. Nodes on the input's zero set have ``S == 0`` and never move;
nodes straddling it are pinned to a subcell distance estimate so the zero set
stays within a small fraction of a cell of where it started.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .grid import ScalarGrid, godunov_norm_values, one_sided_differences

log = logging.getLogger(__name__)

__all__ = [
    "ReinitConfig",
    "ReinitError",
    "ReinitResult",
    "ReinitWarning",
    "smoothed_sign",
    "skeleton_band",
    "residual_mask",
    "reinitialize",
    "interface_nodes",
    "subcell_distance",
    "SKELETON_KINK",
    "ZERO_TOL",
]

#: Inputs with ``|phi_hat| <= ZERO_TOL * h`` are treated as lying on the interface.
ZERO_TOL = 1e-9

#: Jump between backward and forward slopes (along any axis) that marks a kink.
SKELETON_KINK = 1.0


class ReinitError(ValueError):
    pass


class ReinitWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class ReinitConfig:
    """``dt`` and ``band_width`` are in meters; ``dt=None`` means ``0.5 h``."""

    epsilon: float = 1e-2
    dt: float | None = None
    max_iterations: int = 500
    band_width: float | None = None
    subcell: bool = True

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ReinitError("epsilon must be positive")
        if self.dt is not None and not self.dt > 0:
            raise ReinitError("dt must be positive")
        if self.max_iterations < 0:
            raise ReinitError("max_iterations must be nonnegative")
        if self.band_width is not None and not self.band_width > 0:
            raise ReinitError("band_width must be positive")

    def step(self, h: float) -> float:
        dt = 0.5 * h if self.dt is None else self.dt
        if dt > 0.5 * h * (1 + 1e-12):
            raise ReinitError(f"dt = {dt} violates the CFL bound 0.5 h = {0.5 * h}")
        return dt


@dataclass
class ReinitResult:
    field: ScalarGrid
    iterations: int
    final_residual: float
    converged: bool
    history: list[float]

    def __iter__(self):
        # unpacks as (field, iterations, final_residual)
        return iter((self.field, self.iterations, self.final_residual))


def smoothed_sign(phi0: ScalarGrid, h: float | None = None) -> ScalarGrid:
    """``phi0 / sqrt(phi0^2 + h^2)``; exactly zero where ``phi0`` is zero."""
    if h is None:
        h = phi0.geometry.spacing
    v = phi0.values
    return phi0.with_values(v / np.sqrt(v * v + h * h))


def skeleton_band(values: np.ndarray, h: float, width: float | None = None) -> np.ndarray:
    """Boolean mask of nodes within ``width`` (default ``2 h``) of a kink.

    A node is a kink when, along some axis, the backward and forward slopes
    differ by at least :data:`SKELETON_KINK`. Distance fields are not
    differentiable there and no discrete scheme drives the residual to zero.
    """
    kink = np.zeros(values.shape, dtype=bool)
    for axis in range(values.ndim):
        a, b = one_sided_differences(values, h, axis)
        kink |= np.abs(b - a) >= SKELETON_KINK
    if not kink.any():
        return kink
    if width is None:
        width = 2.0 * h
    r = int(np.floor(width / h + 1e-9))
    if r <= 0:
        return kink
    grid = np.indices((2 * r + 1,) * values.ndim) - r
    ball = np.sum(grid * grid, axis=0) <= r * r
    return ndimage.binary_dilation(kink, structure=ball)


def residual_mask(values: np.ndarray, h: float, exclude: np.ndarray | None = None) -> np.ndarray:
    """Interior nodes outside the skeleton band (and outside ``exclude``)."""
    mask = np.zeros(values.shape, dtype=bool)
    mask[tuple(slice(1, -1) for _ in range(values.ndim))] = True
    mask &= ~skeleton_band(values, h)
    if exclude is not None:
        mask &= ~exclude
    return mask


def interface_nodes(values: np.ndarray) -> np.ndarray:
    """Nodes with a strict sign change to at least one axis neighbour."""
    near = np.zeros(values.shape, dtype=bool)
    for axis in range(values.ndim):
        lo = [slice(None)] * values.ndim
        hi = [slice(None)] * values.ndim
        lo[axis] = slice(0, -1)
        hi[axis] = slice(1, None)
        change = values[tuple(lo)] * values[tuple(hi)] < 0
        near[tuple(lo)] |= change
        near[tuple(hi)] |= change
    return near


def subcell_distance(values: np.ndarray, h: float) -> np.ndarray:
    """Distance-to-interface estimate ``phi / |grad phi|`` at every node.

    The gradient is taken with central differences, which is second-order
    accurate, so a field that already is a distance function maps to itself.
    Where the central estimate collapses (a node sitting at a local extremum
    along some axis) the largest one-sided slope is used instead.
    """
    central = np.zeros(values.shape)
    wide = np.zeros(values.shape)
    for axis in range(values.ndim):
        a, b = one_sided_differences(values, h, axis)
        c = 0.5 * (a + b)
        m = np.maximum(np.maximum(np.abs(a), np.abs(b)), np.abs(c))
        central += c * c
        wide += m * m
    central = np.sqrt(central)
    wide = np.sqrt(wide)
    grad = np.where(central >= 0.5 * wide, central, wide)
    return values / np.maximum(grad, 1e-12)


def _residual(phi, sign, h, fixed, near, target, band):
    """Max residual of the rule that drives each node.

    Godunov-driven nodes report ``| |grad phi| - 1 |`` (interior, outside the
    skeleton band); interface nodes report ``| |phi| - D | / h`` against their
    subcell distance ``D``.
    """
    g = godunov_norm_values(phi, sign, h)
    mask = residual_mask(phi, h, fixed | near)
    if band is not None:
        mask &= band
    res = float(np.max(np.abs(g[mask] - 1.0))) if mask.any() else 0.0
    if near.any():
        sub = np.abs(np.sign(target[near]) * np.abs(phi[near]) - target[near]) / h
        res = max(res, float(sub.max()))
    return res


def reinitialize(phihat: ScalarGrid, config: ReinitConfig = ReinitConfig()) -> ReinitResult:
    """Turn ``phihat`` into a signed distance field with the same zero set.

    Away from the interface each step is the explicit upwind update
    ``phi -= dt * S * (|grad phi| - 1)``. Nodes with a sign change to an axis
    neighbour are instead relaxed towards the distance estimate
    ``phi_hat / |grad phi_hat|`` of the input (subcell fix); without it the
    nodes on both sides of the interface upwind each other and the zero set
    creeps by several cells. Input values within ``ZERO_TOL * h`` of zero are
    frozen.

    Iteration stops when the residual (see :func:`_residual`) drops below
    ``epsilon``. Returns a :class:`ReinitResult`, which also unpacks as
    ``(field, iterations, final_residual)``. If ``epsilon`` is not reached
    within ``max_iterations`` the best iterate is returned with
    ``converged=False`` and a :class:`ReinitWarning` is issued.
    """
    v0 = phihat.values
    if not ((v0.min() < 0 < v0.max()) or np.any(v0 == 0)):
        raise ReinitError("input has an empty zero level set")
    h = phihat.geometry.spacing
    dt = config.step(h)
    # round-off zeros count as exact interface nodes
    fixed = np.abs(v0) <= ZERO_TOL * h
    sign = np.where(fixed, 0.0, smoothed_sign(phihat, h).values)
    band = None if config.band_width is None else np.abs(v0) < config.band_width
    if config.subcell:
        near = interface_nodes(v0) & ~fixed
    else:
        near = np.zeros(v0.shape, dtype=bool)
    target = subcell_distance(v0, h)
    hard_sign = np.sign(v0)

    phi = v0.copy()
    res = _residual(phi, sign, h, fixed, near, target, band)
    history = [res]
    best, best_res = phi.copy(), res
    k = 0
    while res >= config.epsilon and k < config.max_iterations:
        g = godunov_norm_values(phi, sign, h)
        update = dt * sign * (g - 1.0)
        update[near] = dt / h * (hard_sign[near] * np.abs(phi[near]) - target[near])
        if band is not None:
            update = np.where(band, update, 0.0)
        phi = phi - update
        k += 1
        res = _residual(phi, sign, h, fixed, near, target, band)
        history.append(res)
        if res < best_res:
            best, best_res = phi.copy(), res
    converged = res < config.epsilon
    if not converged:
        warnings.warn(f"reinitialization stopped after {k} iterations with residual "
                      f"{best_res:.3e} >= epsilon = {config.epsilon}", ReinitWarning, stacklevel=2)
        phi, res = best, best_res
    log.debug("reinit: %d iterations, residual %.3e", k, res)
    return ReinitResult(phihat.with_values(phi), k, res, converged, history)
