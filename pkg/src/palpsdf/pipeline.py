"""End-to-end reconstruction of the unloaded body from a palpation campaign.

Stages:

1. per site, Young's modulus from the two highest force levels (the ones
   furthest into the punch regime); the pooled estimate is the mean over sites;
2. per probe, the unloaded field value ``-(delta_flat + delta_geom)`` at the
   loaded contact point, using the pooled plane-strain modulus;
3. pseudo-SDF from the poses and those values (penalised Poisson solve);
4. redistancing.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .contact import (CurvatureModel, EstimateReport, ProbeRecord,
                      estimate_E_kappa_compliance, estimate_youngs_two_point, plane_strain_modulus,
                      undeformed_sdf_value)
from .files import group_sites, read_probe_file
from .grid import GridGeometry
from .recon import PoissonConfig, PoseSet, SolverError, reconstruct_pseudo_sdf
from .reinit import ReinitConfig, reinitialize

log = logging.getLogger(__name__)

__all__ = [
    "PipelineError",
    "PipelineConfig",
    "ReconstructionReport",
    "default_geometry",
    "load_sites",
    "estimate_modulus",
    "reconstruct_undeformed",
]

DEFAULT_NODES = 96
DEFAULT_SIDE = 0.3


class PipelineError(ValueError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    """Settings for :func:`reconstruct_undeformed`.

    ``geometry=None`` places a cube of side ``grid_side`` (m) with
    ``grid_nodes`` nodes per axis at the center of the probe bounding box.
    ``kappa`` is the curvature (1/m) used to undo the geometric indentation;
    with ``estimate_kappa=True`` it is replaced by the pooled compliance
    estimate over ``low_window`` / ``high_window`` (indices into each site's
    force-ordered probes).
    """

    nu: float = 0.45
    geometry: GridGeometry | None = None
    grid_nodes: int = DEFAULT_NODES
    grid_side: float = DEFAULT_SIDE
    poisson: PoissonConfig = field(default_factory=PoissonConfig)
    reinit: ReinitConfig = field(default_factory=ReinitConfig)
    kappa: float = 0.0
    estimate_kappa: bool = False
    low_window: tuple = (0,)
    high_window: tuple = (-1,)
    projected: bool = False
    output_dir: str | None = None

    def __post_init__(self):
        if not 0.0 <= self.nu < 0.5:
            raise PipelineError(f"Poisson's ratio must lie in [0, 0.5), got {self.nu}")
        if self.geometry is None and (self.grid_nodes < 4 or not self.grid_side > 0):
            raise PipelineError("grid needs at least 4 nodes per axis and a positive side")
        if not np.isfinite(self.kappa):
            raise PipelineError("kappa must be finite")

    def to_dict(self) -> dict:
        geo = self.geometry
        return {
            "nu": self.nu,
            "geometry": None if geo is None else {"dims": list(geo.dims), "origin": list(geo.origin),
                                                  "spacing": geo.spacing},
            "grid_nodes": self.grid_nodes,
            "grid_side": self.grid_side,
            "poisson": vars(self.poisson).copy(),
            "reinit": vars(self.reinit).copy(),
            "kappa": self.kappa,
            "estimate_kappa": self.estimate_kappa,
            "low_window": list(self.low_window),
            "high_window": list(self.high_window),
            "projected": self.projected,
        }


@dataclass
class ReconstructionReport(EstimateReport):
    kappa_used: float = 0.0
    reinit_iterations: int = 0
    reinit_residual: float = float("nan")
    reinit_converged: bool = True

    def to_dict(self) -> dict:
        d = super().to_dict()
        d.update(kappa_used=self.kappa_used, reinit_iterations=self.reinit_iterations,
                 reinit_residual=self.reinit_residual, reinit_converged=self.reinit_converged)
        return d


def load_sites(probes) -> list[list[ProbeRecord]]:
    """Accept a probe file path, a list of sites or a list of ``ProbeSite``."""
    if isinstance(probes, (str, Path)):
        return group_sites(read_probe_file(probes))
    sites = []
    for s in probes:
        recs = list(getattr(s, "probes", s))
        sites.append(sorted(recs, key=lambda r: r.F))
    if not sites:
        raise PipelineError("no probe sites")
    return sites


def default_geometry(points: np.ndarray, nodes: int = DEFAULT_NODES,
                     side: float = DEFAULT_SIDE) -> GridGeometry:
    center = 0.5 * (points.min(axis=0) + points.max(axis=0))
    return GridGeometry.cube(center, side, nodes)


def estimate_modulus(sites: Sequence[Sequence[ProbeRecord]], nu: float,
                     projected: bool = False) -> EstimateReport:
    """Two-point estimate per site from its two highest forces; pooled by the mean."""
    per_site = []
    for i, site in enumerate(sites):
        if len(site) < 2:
            raise PipelineError(f"site {i} has {len(site)} force level(s); two are needed")
        per_site.append(estimate_youngs_two_point(site[-2], site[-1], nu, projected=projected))
    per_site = np.asarray(per_site)
    return EstimateReport(float(per_site.mean()), per_site.tolist())


def _pooled_kappa(sites, nu, low, high) -> float:
    kappas = []
    for site in sites:
        rep = estimate_E_kappa_compliance(site, nu, low_window=low, high_window=high)
        if rep.kappa_hat is not None:
            kappas.append(rep.kappa_hat)
    if not kappas:
        raise PipelineError("no site yielded a curvature estimate; the low window must reach the Hertz regime")
    return float(np.mean(kappas))


def reconstruct_undeformed(probes, config: PipelineConfig = PipelineConfig()):
    """Reconstruct the unloaded signed distance field.

    Returns ``(field, report)``; ``report`` is a :class:`ReconstructionReport`
    with the pooled and per-site modulus estimates and reinit diagnostics.
    Solver failures are re-raised with the failing stage in the message.
    """
    sites = load_sites(probes)
    est = estimate_modulus(sites, config.nu, projected=config.projected)
    estar = plane_strain_modulus(est.E_hat, config.nu)
    kappa = config.kappa
    note = ""
    if config.estimate_kappa:
        kappa = _pooled_kappa(sites, config.nu, config.low_window, config.high_window)
        note = "kappa from compliance variation"
    model = CurvatureModel.constant(kappa)

    records = [r for site in sites for r in site]
    positions = np.stack([r.p for r in records])
    normals = np.stack([r.q for r in records])
    values = np.array([undeformed_sdf_value(r.F, estar, r.R, model) for r in records])
    geometry = config.geometry or default_geometry(positions, config.grid_nodes, config.grid_side)
    poses = PoseSet.of(positions, normals)

    try:
        pseudo = reconstruct_pseudo_sdf(poses, values, geometry, config.poisson)
    except SolverError as exc:
        exc.args = (f"poisson stage: {exc}",)
        raise
    result = reinitialize(pseudo, config.reinit)
    report = ReconstructionReport(est.E_hat, est.per_sample_E, kappa_hat=kappa if config.estimate_kappa else None,
                                  note=note, kappa_used=kappa, reinit_iterations=result.iterations,
                                  reinit_residual=result.final_residual,
                                  reinit_converged=result.converged)
    log.info("E_hat = %.1f Pa (std %.1f), reinit %d iterations", report.mean, report.std,
             result.iterations)
    return result.field, report
