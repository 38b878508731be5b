"""Pseudo-SDF reconstruction from surface poses.

A pose is a surface point with its measured inward normal. The normals are
spread over the grid by normalised inverse-distance (Shepard) weighting and the
field ``phi`` whose gradient best matches them is found from

    laplacian(phi) = div(n_hat),   phi(p_i) = value_i,

with the point conditions imposed as quadratic penalties on the multilinear
interpolant at each ``p_i`` and the outer faces held at a circumscribing-sphere
guess.

Sign convention: poses carry *inward* normals ``q`` but ``phi`` is negative
inside, so the gradient is aligned with the outward field ``-q``. The flip
happens here and nowhere else.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.spatial import ConvexHull, QhullError
from scipy.spatial.distance import pdist

from .grid import (GridError, GridGeometry, ScalarGrid, VectorGrid, divergence,
                   multilinear_weights, sample_points)

log = logging.getLogger(__name__)

__all__ = [
    "ReconError",
    "SolverError",
    "Pose",
    "PoseSet",
    "DirichletConstraint",
    "PoissonConfig",
    "initial_sphere_guess",
    "interpolate_normal_field",
    "shepard_normals",
    "solve_poisson",
    "reconstruct_pseudo_sdf",
    "check_hull_margin",
    "HULL_MARGIN",
]

#: Fraction of the pose-hull extent the grid box must leave free on every side.
HULL_MARGIN = 0.15


class ReconError(ValueError):
    pass


class SolverError(RuntimeError):
    """The linear solve failed to converge or violates a point constraint."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class Pose:
    p: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        q = np.asarray(self.q, dtype=float)
        if p.shape != q.shape or p.ndim != 1:
            raise ReconError("pose position and normal must be vectors of equal length")
        if abs(np.linalg.norm(q) - 1.0) > 1e-9:
            raise ReconError(f"pose normal must have unit length, |q| = {np.linalg.norm(q)}")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)


class PoseSet:
    """Ordered poses with distinct positions.

    ``min_count`` is 4 in 3D (and 3 in 2D) for a full reconstruction; the
    low-level operations accept smaller sets through ``PoseSet.of(...,
    min_count=1)``.
    """

    def __init__(self, poses: Sequence[Pose], min_count: int | None = None):
        poses = list(poses)
        if not poses:
            raise ReconError("pose set is empty")
        dim = poses[0].p.size
        if min_count is None:
            min_count = dim + 1
        if len(poses) < min_count:
            raise ReconError(f"need at least {min_count} poses, got {len(poses)}")
        self.poses = poses
        self.positions = np.stack([z.p for z in poses])
        self.normals = np.stack([z.q for z in poses])
        if len(poses) > 1:
            dmin = pdist(self.positions).min()
            if dmin < 1e-9:
                raise ReconError(f"two pose positions are only {dmin:.3g} m apart")

    @classmethod
    def of(cls, positions, normals, min_count: int | None = None) -> "PoseSet":
        positions = np.atleast_2d(np.asarray(positions, dtype=float))
        normals = np.atleast_2d(np.asarray(normals, dtype=float))
        return cls([Pose(p, q) for p, q in zip(positions, normals)], min_count)

    def __len__(self):
        return len(self.poses)

    @property
    def dim(self) -> int:
        return self.positions.shape[1]


@dataclass(frozen=True)
class DirichletConstraint:
    point: np.ndarray
    value: float = 0.0


@dataclass(frozen=True)
class PoissonConfig:
    tolerance: float = 1e-8
    max_iterations: int = 10_000
    constraint_weight: float = 1e4
    idw_power: float = 2.0

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ReconError("tolerance must be positive")
        if not self.constraint_weight > 0:
            raise ReconError("constraint weight must be positive")
        if self.max_iterations < 1:
            raise ReconError("max_iterations must be positive")
        if not self.idw_power > 0:
            raise ReconError("idw_power must be positive")


def _hull_vertices(points: np.ndarray) -> np.ndarray:
    try:
        return points[ConvexHull(points).vertices]
    except (QhullError, ValueError):
        # flat or tiny point sets: every point is a candidate vertex
        return points


def initial_sphere_guess(points, geometry: GridGeometry) -> ScalarGrid:
    """SDF of the sphere centred at the hull-vertex centroid with the point-set diameter."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if len(pts) < 2:
        raise ReconError("need at least two points for the circumscribing sphere")
    diam = pdist(pts).max()
    if diam <= 0:
        raise ReconError("all points coincide")
    center = _hull_vertices(pts).mean(axis=0)
    return ScalarGrid.from_function(geometry, lambda x: np.linalg.norm(x - center, axis=1) - diam / 2)


def shepard_normals(poses: PoseSet, points, snap_radius: float, power: float = 2.0,
                    chunk: int = 8192) -> np.ndarray:
    """Unit outward normals at ``points`` by normalised Shepard weighting.

    Points within ``snap_radius`` of a pose take that pose's normal exactly;
    points where the weighted sum cancels fall back to the nearest pose.
    """
    pos = poses.positions
    nrm = -poses.normals  # outward
    x_all = np.atleast_2d(np.asarray(points, dtype=float))
    snap2 = snap_radius ** 2
    half_power = power / 2.0
    pos_sq = np.einsum("ij,ij->i", pos, pos)
    out = np.empty_like(x_all)
    for start in range(0, len(x_all), chunk):
        x = x_all[start:start + chunk]
        d2 = np.einsum("ij,ij->i", x, x)[:, None] + pos_sq[None, :] - 2.0 * (x @ pos.T)
        np.maximum(d2, 0.0, out=d2)
        nearest = np.argmin(d2, axis=1)
        dnear = d2[np.arange(len(x)), nearest]
        snapped = dnear <= snap2
        with np.errstate(divide="ignore"):
            w = d2 ** -half_power
        w[snapped] = 0.0
        w /= np.where(snapped, 1.0, w.max(axis=1))[:, None]
        s = w @ nrm
        norm = np.linalg.norm(s, axis=1)
        degenerate = snapped | (norm < 1e-9 * w.sum(axis=1))
        s[~degenerate] /= norm[~degenerate, None]
        s[degenerate] = nrm[nearest[degenerate]]
        out[start:start + chunk] = s
    return out


def interpolate_normal_field(poses: PoseSet, geometry: GridGeometry,
                             config: PoissonConfig = PoissonConfig(),
                             chunk: int = 8192) -> VectorGrid:
    """Unit outward normal field from Shepard interpolation of the pose normals.

    Nodes within ``h/10`` of a pose take that pose's normal exactly; nodes where
    the weighted sum cancels fall back to the nearest pose.
    """
    if len(poses) == 0:
        raise ReconError("pose set is empty")
    if not np.all(geometry.contains(poses.positions)):
        raise ReconError("all pose positions must lie inside the grid")
    out = shepard_normals(poses, geometry.points(), geometry.spacing / 10.0,
                          config.idw_power, chunk)
    return VectorGrid(geometry, tuple(out[:, k] for k in range(geometry.ndim)))


# --------------------------------------------------------------------------
# linear solve


class _PenalizedPoisson:
    """Matrix-free operator ``-h^2 laplacian + w * sum_c c c^T`` on interior nodes."""

    def __init__(self, geometry: GridGeometry, idx: np.ndarray, wts: np.ndarray, weight: float):
        self.dims = geometry.dims
        self.ndim = geometry.ndim
        self.interior = tuple(slice(1, -1) for _ in self.dims)
        self.idx = idx
        self.wts = wts
        self.weight = weight
        diag = np.full(self.dims, 2.0 * self.ndim)
        np.add.at(diag.reshape(-1), idx.ravel(), weight * (wts * wts).ravel())
        self.diag = diag

    def apply(self, x: np.ndarray) -> np.ndarray:
        """``x`` is a full-grid array with zero boundary; output has zero boundary."""
        y = np.zeros_like(x)
        core = self.interior
        y[core] = 2.0 * self.ndim * x[core]
        for axis in range(self.ndim):
            lo = list(core)
            hi = list(core)
            lo[axis] = slice(0, -2)
            hi[axis] = slice(2, None)
            y[core] -= x[tuple(lo)] + x[tuple(hi)]
        if len(self.idx):
            flat = x.reshape(-1)
            cx = np.sum(flat[self.idx] * self.wts, axis=1)
            np.add.at(y.reshape(-1), self.idx.ravel(), self.weight * (self.wts * cx[:, None]).ravel())
        y[~self._interior_mask()] = 0.0
        return y

    def _interior_mask(self):
        if not hasattr(self, "_mask"):
            m = np.zeros(self.dims, dtype=bool)
            m[self.interior] = True
            self._mask = m
        return self._mask


def _pcg(op: _PenalizedPoisson, b: np.ndarray, x0: np.ndarray, tol: float, maxiter: int):
    mask = op._interior_mask()
    inv_diag = np.where(mask, 1.0 / op.diag, 0.0)
    x = np.where(mask, x0, 0.0)
    r = b - op.apply(x)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        bnorm = 1.0
    z = inv_diag * r
    p = z.copy()
    rz = np.vdot(r, z)
    res = np.linalg.norm(r) / bnorm
    it = 0
    while res > tol and it < maxiter:
        Ap = op.apply(p)
        alpha = rz / np.vdot(p, Ap)
        x += alpha * p
        r -= alpha * Ap
        it += 1
        res = np.linalg.norm(r) / bnorm
        z = inv_diag * r
        rz_new = np.vdot(r, z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, it, res


def solve_poisson(qhat: VectorGrid, constraints: Sequence[DirichletConstraint],
                  guess: ScalarGrid, config: PoissonConfig = PoissonConfig(),
                  anchor_guess: bool = True, check_constraints: bool = True) -> ScalarGrid:
    """Field whose gradient best matches ``qhat`` subject to point values.

    Solves ``laplacian(phi) = div(qhat)`` at interior nodes with the outer faces
    fixed to ``guess`` and each constraint added as the penalty
    ``w / h^2 * (interp(phi, point) - value)^2``. Preconditioned conjugate
    gradients (Jacobi) run until the relative residual drops below
    ``config.tolerance``.

    With ``anchor_guess`` the guess is first shifted by the constant that best
    fits it to the constraint values, so the fixed faces agree with the targets
    on average. Adding ``c`` to every target then shifts the whole solution by
    exactly ``c``.

    Raises :class:`SolverError` when the iteration budget is exhausted or when a
    constraint ends up more than one grid spacing off its target.
    """
    geometry = qhat.geometry
    geometry.check_same(guess.geometry)
    if not constraints:
        raise ReconError("at least one point constraint is needed to fix the additive constant")
    h = geometry.spacing
    points = np.stack([np.asarray(c.point, dtype=float) for c in constraints])
    values = np.array([float(c.value) for c in constraints])
    try:
        idx, wts = multilinear_weights(geometry, points)
    except GridError as exc:
        raise ReconError(str(exc)) from None

    if anchor_guess:
        # least-squares constant offset of the guess onto the point targets
        guess = guess.with_values(guess.values + np.mean(values - sample_points(guess, points)))

    boundary = np.ones(geometry.dims, dtype=bool)
    boundary[tuple(slice(1, -1) for _ in geometry.dims)] = False
    bflat = boundary.reshape(-1)
    fixed = np.where(boundary, guess.values, 0.0)

    # corners sitting on the fixed faces move to the right-hand side
    on_face = bflat[idx]
    known = np.sum(np.where(on_face, fixed.reshape(-1)[idx] * wts, 0.0), axis=1)
    free_wts = np.where(on_face, 0.0, wts)
    weight = config.constraint_weight

    op = _PenalizedPoisson(geometry, idx, free_wts, weight)
    rhs = -h * h * divergence(qhat).values
    # boundary contributions of the stencil
    core = tuple(slice(1, -1) for _ in geometry.dims)
    bterm = np.zeros(geometry.dims)
    for axis in range(geometry.ndim):
        lo = list(core)
        hi = list(core)
        lo[axis] = slice(0, -2)
        hi[axis] = slice(2, None)
        bterm[core] += fixed[tuple(lo)] + fixed[tuple(hi)]
    rhs = rhs + bterm
    np.add.at(rhs.reshape(-1), idx.ravel(), (weight * free_wts * (values - known)[:, None]).ravel())
    rhs[boundary] = 0.0

    x, iterations, residual = _pcg(op, rhs, guess.values.copy(), config.tolerance, config.max_iterations)
    log.debug("poisson: %d iterations, relative residual %.3e", iterations, residual)
    if residual > config.tolerance:
        raise SolverError(f"conjugate gradients did not converge in {iterations} iterations "
                          f"(relative residual {residual:.3e})", residual, iterations)
    phi = ScalarGrid(geometry, np.where(boundary, guess.values, x))
    if check_constraints:
        miss = np.abs(sample_points(phi, points) - values)
        if miss.max() > h:
            raise SolverError(f"point constraint missed by {miss.max():.3g} m (> h = {h:.3g} m)",
                              residual, iterations)
    return phi


def check_hull_margin(points, geometry: GridGeometry, margin: float = HULL_MARGIN):
    """Require the grid box to clear the point hull by ``margin`` of its extent per side."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    pad = margin * (hi - lo)
    if np.any(geometry.lower > lo - pad + 1e-12) or np.any(geometry.upper < hi + pad - 1e-12):
        raise ReconError(f"grid box [{geometry.lower}, {geometry.upper}] must enclose the pose hull "
                         f"[{lo}, {hi}] with a {margin:.0%} margin on every side")


def reconstruct_pseudo_sdf(poses: PoseSet, values: Sequence[float] | None, geometry: GridGeometry,
                           config: PoissonConfig = PoissonConfig()) -> ScalarGrid:
    """Sphere guess, Shepard normal field and penalised Poisson solve in one call.

    ``values`` are the target field values at the pose positions (zero when
    omitted). Negative targets place the surface outside the poses, as happens
    when the poses were recorded under load.
    """
    if values is None:
        values = np.zeros(len(poses))
    values = np.asarray(values, dtype=float)
    if values.shape != (len(poses),):
        raise ReconError(f"got {values.size} target values for {len(poses)} poses")
    check_hull_margin(poses.positions, geometry)
    guess = initial_sphere_guess(poses.positions, geometry)
    qhat = interpolate_normal_field(poses, geometry, config)
    constraints = [DirichletConstraint(p, v) for p, v in zip(poses.positions, values)]
    return solve_poisson(qhat, constraints, guess, config)
