"""Virtual palpation of analytic shapes.

A campaign picks ``n_samples`` sites uniformly on the surface and presses the
punch at each of them once per force level. Indentation follows the two-regime
forward model of :mod:`palpsdf.contact`; the recorded contact point and
(inward) normal are then perturbed with zero-mean Gaussian noise.

Every site draws from its own generator, ``PCG64`` seeded through
``SeedSequence([rng_seed, site])``, so any site can be regenerated on its own
and the result does not depend on the order in which sites are produced.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .contact import MaterialParams, ProbeRecord, total_indentation

__all__ = [
    "SimError",
    "ShapeSpec",
    "CampaignConfig",
    "ProbeSite",
    "site_rng",
    "sample_surface_point",
    "simulate_probe",
    "simulate_campaign",
    "RNG_ALGORITHM",
]

RNG_ALGORITHM = "PCG64, SeedSequence([rng_seed, site_index])"

#: Largest |sdf(x0)| accepted as "on the surface", in meters.
SURFACE_TOL = 1e-9


class SimError(ValueError):
    pass


def _unit(v, name="vector"):
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if not n > 0:
        raise SimError(f"{name} must be nonzero")
    return v / n


def _ellipsoid_distance(y: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Unsigned distance from points ``y`` (m, 3) to the ellipsoid with semi-axes ``a``.

    Works in the first octant with the axes sorted so that ``a[2]`` is the
    smallest. The closest point is ``x_i = a_i^2 y_i / (u + a_i^2 - a_2^2)``
    where ``u > 0`` solves ``sum (a_i y_i / (u + a_i^2 - a_2^2))^2 = 1``; the
    root is bracketed and found by bisection (geometric once the bracket is
    positive). Interior points on the plane ``y_2 = 0`` may have no such root,
    in which case the closest point leaves that plane and has a closed form.
    """
    order = np.argsort(-a)
    a = a[order]
    y = np.abs(y[:, order])
    a2 = a * a
    shift = a2 - a2[2]

    def excess(u):
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.sum((a * y / (u[:, None] + shift)) ** 2, axis=1) - 1.0
        return np.where(np.isnan(t), -1.0, t)

    lo = a[2] * y[:, 2]
    hi = np.maximum(np.linalg.norm(a * y, axis=1), lo)
    inside = np.sum((y / a) ** 2, axis=1) <= 1.0
    # interior points on the minor plane: closed form when it lands on the surface
    special = np.zeros(len(y), dtype=bool)
    x_special = np.zeros_like(y)
    flat = inside & (y[:, 2] == 0)
    if flat.any():
        with np.errstate(divide="ignore", invalid="ignore"):
            xs = np.where(shift > 0, a2 * y[flat] / np.where(shift > 0, shift, 1.0), 0.0)
        # axes tied with the smallest one must be zero for the point to be degenerate
        tied = (shift == 0)[None, :] & (y[flat] != 0)
        rest = 1.0 - np.sum((xs / a) ** 2, axis=1)
        ok = (rest >= 0) & ~tied.any(axis=1)
        xs[:, 2] = a[2] * np.sqrt(np.maximum(rest, 0.0))
        idx = np.flatnonzero(flat)[ok]
        special[idx] = True
        x_special[idx] = xs[ok]
    for _ in range(200):
        mid = np.where(lo > 0, np.sqrt(lo * np.maximum(hi, lo)), 0.5 * (lo + hi))
        pos = excess(mid) > 0
        lo = np.where(pos, mid, lo)
        hi = np.where(pos, hi, mid)
    u = 0.5 * (lo + hi)
    with np.errstate(divide="ignore", invalid="ignore"):
        x = a2 * y / (u[:, None] + shift)
    x = np.where(np.isfinite(x), x, 0.0)
    x[special] = x_special[special]
    return np.linalg.norm(x - y, axis=1)


@dataclass(frozen=True)
class ShapeSpec:
    """Analytic ground-truth body.

    ``kind`` is ``"sphere"`` (``center``, ``radius``), ``"plane"`` (``point``,
    outward unit ``normal``, sampled on a square patch of half-width
    ``patch_half_width`` around ``point``) or ``"ellipsoid"`` (``center``,
    axis-aligned ``semi_axes``). Lengths in meters.
    """

    kind: str
    center: tuple = (0.0, 0.0, 0.0)
    radius: float = 0.0
    point: tuple = (0.0, 0.0, 0.0)
    normal: tuple = (0.0, 0.0, 1.0)
    semi_axes: tuple = (0.0, 0.0, 0.0)
    patch_half_width: float = 0.1

    def __post_init__(self):
        if self.kind == "sphere":
            if not self.radius > 0:
                raise SimError(f"sphere radius must be positive, got {self.radius}")
        elif self.kind == "plane":
            if abs(np.linalg.norm(self.normal) - 1.0) > 1e-9:
                raise SimError("plane normal must have unit length")
            if not self.patch_half_width > 0:
                raise SimError("plane patch half-width must be positive")
        elif self.kind == "ellipsoid":
            if len(self.semi_axes) != 3 or not all(s > 0 for s in self.semi_axes):
                raise SimError(f"ellipsoid semi-axes must be three positive lengths, got {self.semi_axes}")
        else:
            raise SimError(f"unknown shape kind {self.kind!r}")
        for name in ("center", "point", "normal", "semi_axes"):
            object.__setattr__(self, name, tuple(float(c) for c in getattr(self, name)))

    @classmethod
    def sphere(cls, center, radius: float) -> "ShapeSpec":
        return cls("sphere", center=tuple(center), radius=float(radius))

    @classmethod
    def plane(cls, point, normal, patch_half_width: float = 0.1) -> "ShapeSpec":
        return cls("plane", point=tuple(point), normal=tuple(_unit(normal, "plane normal")),
                   patch_half_width=float(patch_half_width))

    @classmethod
    def ellipsoid(cls, center, semi_axes) -> "ShapeSpec":
        return cls("ellipsoid", center=tuple(center), semi_axes=tuple(semi_axes))

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "sphere":
            out.update(center=list(self.center), radius=self.radius)
        elif self.kind == "plane":
            out.update(point=list(self.point), normal=list(self.normal),
                       patch_half_width=self.patch_half_width)
        else:
            out.update(center=list(self.center), semi_axes=list(self.semi_axes))
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "ShapeSpec":
        return cls(**d)

    def sdf(self, x) -> np.ndarray:
        """Exact signed distance, negative inside. ``x`` is ``(3,)`` or ``(m, 3)``."""
        x = np.asarray(x, dtype=float)
        pts = np.atleast_2d(x)
        if self.kind == "sphere":
            d = np.linalg.norm(pts - self.center, axis=1) - self.radius
        elif self.kind == "plane":
            d = (pts - self.point) @ np.asarray(self.normal)
        else:
            y = pts - self.center
            a = np.asarray(self.semi_axes)
            inside = np.sum((y / a) ** 2, axis=1) < 1.0
            d = _ellipsoid_distance(y, a)
            d = np.where(inside, -d, d)
        return d[0] if x.ndim == 1 else d

    def outward_normal(self, x) -> np.ndarray:
        """Unit outward normal at a surface point."""
        x = np.asarray(x, dtype=float)
        if self.kind == "sphere":
            return _unit(x - self.center)
        if self.kind == "plane":
            return np.asarray(self.normal)
        a = np.asarray(self.semi_axes)
        return _unit((x - self.center) / (a * a))

    def mean_curvature(self, x) -> float:
        """Mean curvature at a surface point, positive for convex bodies (1/m)."""
        if self.kind == "sphere":
            return 1.0 / self.radius
        if self.kind == "plane":
            return 0.0
        a2 = np.asarray(self.semi_axes) ** 2
        g = 2.0 * (np.asarray(x, dtype=float) - self.center) / a2
        hess = 2.0 / a2
        gn = np.linalg.norm(g)
        return float((gn * gn * hess.sum() - np.sum(g * g * hess)) / (2.0 * gn ** 3))


@dataclass(frozen=True)
class CampaignConfig:
    """``forces`` in N, ``punch_radius`` in m, ``noise_sigma`` in m for positions
    and dimensionless for normal components."""

    n_samples: int
    forces: tuple
    punch_radius: float
    noise_sigma: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        forces = tuple(float(f) for f in self.forces)
        object.__setattr__(self, "forces", forces)
        if int(self.n_samples) != self.n_samples or self.n_samples < 1:
            raise SimError(f"n_samples must be a positive integer, got {self.n_samples}")
        if not forces:
            raise SimError("at least one force level is required")
        if any(f < 0 for f in forces) or any(b <= a for a, b in zip(forces, forces[1:])):
            raise SimError(f"forces must be nonnegative and strictly increasing, got {forces}")
        if not self.punch_radius > 0:
            raise SimError("punch radius must be positive")
        if not self.noise_sigma >= 0:
            raise SimError("noise sigma must be nonnegative")
        if not 0 <= int(self.rng_seed) < 2 ** 64:
            raise SimError("rng_seed must fit in an unsigned 64-bit integer")

    def to_dict(self) -> dict:
        return {"n_samples": int(self.n_samples), "forces": list(self.forces),
                "punch_radius": self.punch_radius, "noise_sigma": self.noise_sigma,
                "rng_seed": int(self.rng_seed)}


@dataclass
class ProbeSite:
    """All probes taken at one surface point ``x0``, ordered by force."""

    index: int
    x0: np.ndarray
    n_out: np.ndarray
    kappa: float
    probes: list[ProbeRecord] = field(default_factory=list)


def site_rng(seed: int, site: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(site)])))


def sample_surface_point(shape: ShapeSpec, rng: np.random.Generator):
    """Uniform random surface point with its outward normal and mean curvature."""
    if shape.kind == "sphere":
        while True:
            d = rng.standard_normal(3)
            n = np.linalg.norm(d)
            if n > 1e-12:
                break
        u = d / n
        x0 = np.asarray(shape.center) + shape.radius * u
        return x0, u, 1.0 / shape.radius
    if shape.kind == "plane":
        n = np.asarray(shape.normal)
        # any tangent basis works; pick the axis least aligned with n
        t1 = np.cross(n, np.eye(3)[int(np.argmin(np.abs(n)))])
        t1 /= np.linalg.norm(t1)
        t2 = np.cross(n, t1)
        s, t = rng.uniform(-shape.patch_half_width, shape.patch_half_width, size=2)
        x0 = np.asarray(shape.point) + s * t1 + t * t2
        return x0, n.copy(), 0.0
    # ellipsoid: map the unit sphere and accept with probability proportional
    # to the area stretch a1 a2 a3 |u / a|
    a = np.asarray(shape.semi_axes)
    bound = 1.0 / a.min()
    while True:
        d = rng.standard_normal(3)
        nd = np.linalg.norm(d)
        if nd < 1e-12:
            continue
        u = d / nd
        if rng.uniform() * bound <= np.linalg.norm(u / a):
            break
    x0 = np.asarray(shape.center) + a * u
    return x0, shape.outward_normal(x0), shape.mean_curvature(x0)


def simulate_probe(shape: ShapeSpec, material: MaterialParams, x0, n_out, kappa: float,
                   F: float, R: float, noise_sigma: float, rng: np.random.Generator) -> ProbeRecord:
    """One noisy probe at ``x0`` with force ``F``.

    The contact point sinks by the forward indentation along ``-n_out``. Six
    normal deviates are always drawn (three for the position, three for the
    normal) so the stream position does not depend on ``noise_sigma``.
    """
    x0 = np.asarray(x0, dtype=float)
    n_out = np.asarray(n_out, dtype=float)
    off = abs(float(shape.sdf(x0)))
    if off >= SURFACE_TOL:
        raise SimError(f"probe point is {off:.3g} m off the surface")
    if not F >= 0:
        raise SimError(f"force must be nonnegative, got {F}")
    delta = total_indentation(F, material.Estar, R, kappa)
    eps_p = rng.standard_normal(3)
    eps_q = rng.standard_normal(3)
    p = x0 - delta * n_out
    q = -n_out
    if noise_sigma > 0:
        p = p + noise_sigma * eps_p
        q = q + noise_sigma * eps_q
        q = q / np.linalg.norm(q)
    return ProbeRecord(p, q, F, R)


def simulate_campaign(shape: ShapeSpec, material: MaterialParams,
                      config: CampaignConfig) -> list[ProbeSite]:
    sites = []
    for i in range(int(config.n_samples)):
        rng = site_rng(config.rng_seed, i)
        x0, n_out, kappa = sample_surface_point(shape, rng)
        site = ProbeSite(i, x0, n_out, kappa)
        for F in config.forces:
            site.probes.append(simulate_probe(shape, material, x0, n_out, kappa, F,
                                              config.punch_radius, config.noise_sigma, rng))
        sites.append(site)
    return sites
