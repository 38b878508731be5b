"""Triangle mesh export of a zero level set."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from skimage import measure

from .grid import ScalarGrid

__all__ = ["MeshError", "zero_level_mesh", "export_mesh", "write_obj"]


class MeshError(ValueError):
    pass


def zero_level_mesh(f: ScalarGrid) -> tuple[np.ndarray, np.ndarray]:
    """Vertices (world coordinates, m) and 0-based triangles of ``f = 0``.

    Uses the classic marching-cubes case table with linear edge interpolation.
    """
    if f.geometry.ndim != 3:
        raise MeshError("mesh export needs a 3-d grid")
    v = f.values
    if not (v.min() < 0 < v.max()):
        raise MeshError("field does not change sign; zero level set is empty")
    h = f.geometry.spacing
    verts, faces, _, _ = measure.marching_cubes(v, level=0.0, spacing=(h, h, h),
                                                method="lorensen", allow_degenerate=False)
    verts = verts + np.asarray(f.geometry.origin)
    return verts, faces


def write_obj(path, verts: np.ndarray, faces: np.ndarray) -> Path:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for x, y, z in verts.tolist():
            fh.write(f"v {x!r} {y!r} {z!r}\n")
        for a, b, c in (faces + 1).tolist():
            fh.write(f"f {a} {b} {c}\n")
    return path


def export_mesh(f: ScalarGrid, path) -> Path:
    """Write the zero level set of ``f`` as an OBJ file (``v`` and ``f`` records only)."""
    verts, faces = zero_level_mesh(f)
    return write_obj(path, np.asarray(verts, dtype=float), faces)
