"""Shape and stiffness of soft bodies from force-controlled palpation.

Modules
-------
grid      uniform grids, finite-difference stencils, grid container files
contact   flat-punch and Hertz contact models, stiffness and curvature estimators
recon     normal-field interpolation and the penalised Poisson solve
reinit    redistancing of a pseudo signed distance field
sim       virtual palpation campaigns on analytic shapes
metrics   zero crossings, Hausdorff distance, eikonal residual, convergence studies
pipeline  end-to-end reconstruction of the unloaded body
mesh      OBJ export of the zero level set
cli       command-line interface (``palpsdf``)
"""

__version__ = "0.1.0"

from .grid import GridGeometry, ScalarGrid, VectorGrid, load_grid, save_grid  # noqa: E402
from .contact import MaterialParams, ProbeRecord, CurvatureModel, EstimateReport  # noqa: E402
from .recon import PoissonConfig, PoseSet, reconstruct_pseudo_sdf  # noqa: E402
from .reinit import ReinitConfig, reinitialize  # noqa: E402
from .sim import CampaignConfig, ShapeSpec, simulate_campaign  # noqa: E402
from .metrics import eikonal_residual, extract_zero_crossings, hausdorff  # noqa: E402
from .pipeline import PipelineConfig, reconstruct_undeformed  # noqa: E402

__all__ = [
    "GridGeometry",
    "ScalarGrid",
    "VectorGrid",
    "load_grid",
    "save_grid",
    "MaterialParams",
    "ProbeRecord",
    "CurvatureModel",
    "EstimateReport",
    "PoissonConfig",
    "PoseSet",
    "reconstruct_pseudo_sdf",
    "ReinitConfig",
    "reinitialize",
    "CampaignConfig",
    "ShapeSpec",
    "simulate_campaign",
    "extract_zero_crossings",
    "hausdorff",
    "eikonal_residual",
    "PipelineConfig",
    "reconstruct_undeformed",
]
