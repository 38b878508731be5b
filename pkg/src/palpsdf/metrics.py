"""Level-set comparison: zero crossings, Hausdorff distance, eikonal residual."""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from .grid import ScalarGrid, gradient_norm_godunov
from .reinit import residual_mask

log = logging.getLogger(__name__)

__all__ = [
    "MetricsError",
    "LevelSetPointCloud",
    "ConvergenceRow",
    "CSV_COLUMNS",
    "extract_zero_crossings",
    "hausdorff",
    "hausdorff_brute_force",
    "eikonal_residual",
    "convergence_study",
    "write_convergence_csv",
]

CSV_COLUMNS = ("N", "d_N_m", "eikonal_max", "eikonal_mean", "runtime_s")


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class LevelSetPointCloud:
    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2:
            raise MetricsError("point cloud must be a 2-d array")
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True)
class ConvergenceRow:
    N: int
    d_N: float
    eikonal_max: float
    eikonal_mean: float
    runtime: float


def extract_zero_crossings(f: ScalarGrid) -> LevelSetPointCloud:
    """Zero crossings of ``f`` along grid edges.

    Every edge whose endpoint values have strictly opposite signs contributes
    its linear-interpolation root; nodes holding an exact zero contribute their
    own position.
    """
    v = f.values
    geo = f.geometry
    axes = geo.axes()
    chunks = []
    for axis in range(v.ndim):
        lo = [slice(None)] * v.ndim
        hi = [slice(None)] * v.ndim
        lo[axis] = slice(0, -1)
        hi[axis] = slice(1, None)
        a = v[tuple(lo)]
        b = v[tuple(hi)]
        idx = np.nonzero(a * b < 0)
        if not idx[0].size:
            continue
        va = a[idx]
        t = va / (va - b[idx])
        coords = [axes[k][idx[k]] for k in range(v.ndim)]
        coords[axis] = coords[axis] + t * geo.spacing
        chunks.append(np.stack(coords, axis=1))
    zeros = np.nonzero(v == 0)
    if zeros[0].size:
        chunks.append(np.stack([axes[k][zeros[k]] for k in range(v.ndim)], axis=1))
    if not chunks:
        raise MetricsError("field does not change sign; zero level set is empty")
    return LevelSetPointCloud(np.concatenate(chunks))


def _check_clouds(a, b):
    pa = a.points if isinstance(a, LevelSetPointCloud) else np.atleast_2d(np.asarray(a, float))
    pb = b.points if isinstance(b, LevelSetPointCloud) else np.atleast_2d(np.asarray(b, float))
    if pa.size == 0 or pb.size == 0:
        raise MetricsError("Hausdorff distance of an empty point set")
    if pa.shape[1] != pb.shape[1]:
        raise MetricsError("point clouds live in different dimensions")
    return pa, pb


def hausdorff(a: LevelSetPointCloud, b: LevelSetPointCloud) -> float:
    """Two-sided Hausdorff distance between finite point sets (m)."""
    pa, pb = _check_clouds(a, b)
    dab = cKDTree(pb).query(pa, k=1)[0].max()
    dba = cKDTree(pa).query(pb, k=1)[0].max()
    return float(max(dab, dba))


def hausdorff_brute_force(a, b) -> float:
    """O(n m) reference implementation of :func:`hausdorff`."""
    pa, pb = _check_clouds(a, b)
    d = np.sqrt(((pa[:, None, :] - pb[None, :, :]) ** 2).sum(axis=2))
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def eikonal_residual(f: ScalarGrid) -> tuple[float, float]:
    """Max and mean of ``| |grad f| - 1 |`` (Godunov norm, upwinded on ``f``).

    Taken over interior nodes outside the skeleton band, the same set the
    reinitializer measures.
    """
    g = gradient_norm_godunov(f, f).values
    mask = residual_mask(f.values, f.geometry.spacing)
    if not mask.any():
        return 0.0, 0.0
    r = np.abs(g[mask] - 1.0)
    return float(r.max()), float(r.mean())


def convergence_study(shape, material, template, N_list: Sequence[int], geometry,
                      seed: int, config=None) -> list[ConvergenceRow]:
    """Hausdorff distance of the reconstruction against ``shape`` for growing N.

    ``template`` is a :class:`~palpsdf.sim.CampaignConfig` whose sample count and
    noise are overridden (N from ``N_list``, zero noise); every row uses
    ``seed``, so the sites of a smaller campaign are a prefix of the next one.
    ``config`` is an optional :class:`~palpsdf.pipeline.PipelineConfig`
    (its geometry is replaced by ``geometry``).
    """
    from dataclasses import replace

    from .pipeline import PipelineConfig, reconstruct_undeformed
    from .sim import simulate_campaign

    N_list = [int(n) for n in N_list]
    if not N_list:
        raise MetricsError("empty N list")
    if any(b <= a for a, b in zip(N_list, N_list[1:])):
        raise MetricsError(f"N values must be strictly increasing, got {N_list}")
    if config is None:
        config = PipelineConfig(nu=material.nu)
    config = replace(config, geometry=geometry)
    truth = ScalarGrid.from_function(geometry, shape.sdf)
    reference = extract_zero_crossings(truth)
    rows = []
    for n in N_list:
        t0 = time.perf_counter()
        campaign = replace(template, n_samples=n, noise_sigma=0.0, rng_seed=seed)
        sites = simulate_campaign(shape, material, campaign)
        field, _ = reconstruct_undeformed([s.probes for s in sites], config)
        d = hausdorff(extract_zero_crossings(field), reference)
        emax, emean = eikonal_residual(field)
        rows.append(ConvergenceRow(n, d, emax, emean, time.perf_counter() - t0))
        log.info("N=%d d_N=%.4g m eikonal max %.3g", n, d, emax)
    return rows


def write_convergence_csv(rows: Sequence[ConvergenceRow], path) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in rows:
            w.writerow([r.N, repr(r.d_N), repr(r.eikonal_max), repr(r.eikonal_mean),
                        f"{r.runtime:.3f}"])
    return path
