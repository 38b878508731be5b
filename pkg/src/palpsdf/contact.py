"""Contact mechanics for force-controlled probing of soft bodies.

Two loading regimes are modelled for a rigid flat-ended cylindrical punch of
radius ``R`` pressed along the surface normal:

* punch regime, contact radius saturated at ``R``: indentation is the flat
  half-space result ``F / (2 E* R)`` plus the mean curvature gap over the
  contact disk;
* Hertz regime at small loads, a sphere of radius ``1/kappa`` on a half-space:
  ``delta = C F**(2/3)`` with ``C = (9 kappa / (16 E*^2))**(1/3)``.

The switch between them happens at ``F_trans = 4/3 E* R^3 kappa``.

Units are SI throughout (N, m, Pa, s).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "ContactError",
    "MaterialParams",
    "ProbeRecord",
    "CurvatureModel",
    "EstimateReport",
    "plane_strain_modulus",
    "flat_indentation",
    "geometric_indentation_constant",
    "geometric_indentation_varying",
    "contact_disk_quadrature",
    "undeformed_sdf_value",
    "estimate_youngs_two_point",
    "hertz_constant",
    "hertz_indentation",
    "transition_force",
    "total_indentation",
    "estimate_E_kappa_compliance",
    "settling_time_check",
    "SETTLING_FACTOR",
]

#: "T_c >> T_e" is read as a factor-ten separation.
SETTLING_FACTOR = 10.0


class ContactError(ValueError):
    pass


@dataclass(frozen=True)
class MaterialParams:
    """Homogeneous isotropic linear-elastic material.

    ``gamma`` (damping) is carried along for bookkeeping only; nothing in the
    package integrates the dynamics.
    """

    E: float
    nu: float
    rho: float | None = None
    gamma: float | None = None

    def __post_init__(self):
        if not self.E > 0:
            raise ContactError(f"Young's modulus must be positive, got {self.E}")
        if not 0.0 <= self.nu < 0.5:
            raise ContactError(f"Poisson's ratio must lie in [0, 0.5), got {self.nu}")
        if self.rho is not None and not self.rho > 0:
            raise ContactError(f"density must be positive, got {self.rho}")

    @property
    def Estar(self) -> float:
        return plane_strain_modulus(self.E, self.nu)


@dataclass(frozen=True)
class ProbeRecord:
    """One palpation sample.

    ``p`` is the measured contact point, ``q`` the measured *inward* unit normal,
    ``F`` the applied normal force and ``R`` the punch radius.
    """

    p: np.ndarray
    q: np.ndarray
    F: float
    R: float

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        q = np.asarray(self.q, dtype=float)
        if p.shape != q.shape or p.ndim != 1:
            raise ContactError("p and q must be vectors of equal length")
        if not self.F >= 0:
            raise ContactError(f"force must be nonnegative, got {self.F}")
        if not self.R > 0:
            raise ContactError(f"punch radius must be positive, got {self.R}")
        if abs(np.linalg.norm(q) - 1.0) > 1e-9:
            raise ContactError(f"normal must have unit length, |q| = {np.linalg.norm(q)}")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "F", float(self.F))
        object.__setattr__(self, "R", float(self.R))


@dataclass(frozen=True)
class CurvatureModel:
    """Surface curvature over the contact disk.

    ``kappa`` is either a number (constant curvature, 1/m) or a callable
    ``kappa(rho, theta)`` accepting broadcast arrays of polar coordinates on the
    tangent plane, or an array of samples on the lattice returned by
    :func:`contact_disk_quadrature`.
    """

    kappa: float | Callable | np.ndarray = 0.0

    @property
    def is_constant(self) -> bool:
        return np.ndim(self.kappa) == 0 and not callable(self.kappa)

    @classmethod
    def constant(cls, kappa: float) -> "CurvatureModel":
        if not np.isfinite(kappa):
            raise ContactError("curvature must be finite")
        return cls(float(kappa))


@dataclass
class EstimateReport:
    """Stiffness (and optionally curvature) estimate with per-sample spread.

    ``std`` is the sample standard deviation (``ddof=1``) of ``per_sample_E``;
    zero when there is a single sample.
    """

    E_hat: float
    per_sample_E: list[float]
    kappa_hat: float | None = None
    compliances: list[float] = field(default_factory=list)
    note: str = ""

    @property
    def sample_count(self) -> int:
        return len(self.per_sample_E)

    @property
    def mean(self) -> float:
        return float(np.mean(self.per_sample_E))

    @property
    def std(self) -> float:
        if len(self.per_sample_E) < 2:
            return 0.0
        return float(np.std(self.per_sample_E, ddof=1))

    def to_dict(self) -> dict:
        return {
            "E_hat_Pa": self.E_hat,
            "kappa_hat_per_m": self.kappa_hat,
            "mean_Pa": self.mean,
            "std_Pa": self.std,
            "sample_count": self.sample_count,
            "compliances_m_per_N": list(self.compliances),
            "per_sample_E_Pa": list(self.per_sample_E),
            "note": self.note,
        }


def plane_strain_modulus(E: float, nu: float) -> float:
    if not -1.0 < nu < 0.5:
        raise ContactError(f"Poisson's ratio must lie in (-1, 0.5), got {nu}")
    if not E > 0:
        raise ContactError(f"Young's modulus must be positive, got {E}")
    return E / (1.0 - nu * nu)


def _require_positive(**kw):
    for name, value in kw.items():
        if not value > 0:
            raise ContactError(f"{name} must be positive, got {value}")


def flat_indentation(F, Estar: float, R: float):
    """Rigid flat punch on an elastic half-space: ``F / (2 E* R)``."""
    _require_positive(Estar=Estar, R=R)
    return F / (2.0 * Estar * R)


def geometric_indentation_constant(kappa: float, R: float) -> float:
    """Mean gap ``kappa rho^2 / 2`` over a disk of radius ``R``: ``kappa R^2 / 4``."""
    _require_positive(R=R)
    return kappa * R * R / 4.0


def contact_disk_quadrature(R: float, n_rho: int = 64, n_theta: int = 64):
    """Polar tensor lattice on the contact disk.

    Returns ``(rho, theta, weights)`` as ``(n_rho, n_theta)`` arrays. Radial
    nodes are Gauss-Legendre on ``[0, R]`` and angular nodes are the periodic
    midpoint rule; the weights already include the area element ``rho``.
    """
    if n_rho < 4 or n_theta < 4:
        raise ContactError("quadrature needs at least 4 nodes per direction")
    x, w = np.polynomial.legendre.leggauss(n_rho)
    rho = 0.5 * R * (x + 1.0)
    w_rho = 0.5 * R * w
    theta = (np.arange(n_theta) + 0.5) * (2.0 * np.pi / n_theta)
    w_theta = np.full(n_theta, 2.0 * np.pi / n_theta)
    rr, tt = np.meshgrid(rho, theta, indexing="ij")
    weights = np.outer(w_rho, w_theta) * rr
    return rr, tt, weights


def geometric_indentation_varying(model: CurvatureModel, R: float,
                                  n_rho: int = 64, n_theta: int = 64) -> float:
    """Average initial gap ``<kappa(rho, theta) rho^2 / 2>`` over the contact disk."""
    _require_positive(R=R)
    rr, tt, weights = contact_disk_quadrature(R, n_rho, n_theta)
    k = model.kappa
    if callable(k):
        kappa = np.broadcast_to(np.asarray(k(rr, tt), dtype=float), rr.shape)
    elif np.ndim(k) == 0:
        kappa = np.full(rr.shape, float(k))
    else:
        kappa = np.asarray(k, dtype=float)
        if kappa.shape != rr.shape:
            raise ContactError(f"sampled curvature has shape {kappa.shape}, lattice is {rr.shape}")
    if not np.all(np.isfinite(kappa)):
        raise ContactError("curvature samples must be finite")
    integral = np.sum(kappa * rr * rr / 2.0 * weights)
    return float(integral / (np.pi * R * R))


def _geometric_term(model: CurvatureModel | float | None, R: float) -> float:
    if model is None:
        return 0.0
    if not isinstance(model, CurvatureModel):
        model = CurvatureModel.constant(model)
    if model.is_constant:
        return geometric_indentation_constant(float(model.kappa), R)
    return geometric_indentation_varying(model, R)


def undeformed_sdf_value(F: float, Estar: float, R: float,
                         model: CurvatureModel | float | None = None) -> float:
    """Value of the unloaded SDF at a loaded contact point.

    The contact point sits below the unloaded surface by the elastic flat-punch
    indentation plus the geometric flattening of the curved cap, so the value
    is ``-(delta_flat + delta_geom)``.
    """
    return -(flat_indentation(F, Estar, R) + _geometric_term(model, R))


def estimate_youngs_two_point(a: ProbeRecord, b: ProbeRecord, nu: float,
                              projected: bool = False) -> float:
    """Young's modulus from two probes at the same site.

    The curvature term is identical for both probes and cancels from the
    indentation difference, leaving ``E = dF (1 - nu^2) / (2 R d_delta)``. With
    ``projected=True`` the displacement is measured along the mean normal
    instead of as a plain distance.
    """
    dF = b.F - a.F
    if not dF > 0:
        raise ContactError(f"second probe must use a larger force ({a.F} -> {b.F})")
    if not math.isclose(a.R, b.R, rel_tol=1e-12):
        raise ContactError(f"punch radii differ ({a.R} vs {b.R})")
    dp = b.p - a.p
    cos_angle = float(np.clip(a.q @ b.q, -1.0, 1.0))
    if math.degrees(math.acos(cos_angle)) > 5.0:
        warnings.warn("probe normals differ by more than 5 degrees", RuntimeWarning, stacklevel=2)
    if projected:
        n = a.q + b.q
        d_delta = abs(float(dp @ n)) / np.linalg.norm(n)
    else:
        d_delta = float(np.linalg.norm(dp))
    if not d_delta > 0:
        raise ContactError("probe positions coincide; indentation change is zero")
    return dF * (1.0 - nu * nu) / (2.0 * a.R * d_delta)


def hertz_constant(kappa: float, Estar: float) -> float:
    _require_positive(kappa=kappa, Estar=Estar)
    return (9.0 * kappa / (16.0 * Estar * Estar)) ** (1.0 / 3.0)


def hertz_indentation(F, C: float):
    """``C F^(2/3)``."""
    if np.any(np.asarray(F) < 0):
        raise ContactError("force must be nonnegative")
    return C * np.power(F, 2.0 / 3.0)


def transition_force(Estar: float, R: float, kappa: float) -> float:
    """Load at which the Hertz contact radius reaches the punch radius.

    Flat surfaces (``kappa == 0``) are in the punch regime for every load.
    """
    _require_positive(Estar=Estar, R=R)
    if kappa < 0:
        raise ContactError(f"curvature must be nonnegative, got {kappa}")
    return 4.0 / 3.0 * Estar * R ** 3 * kappa


def total_indentation(F: float, Estar: float, R: float, kappa: float) -> float:
    """Forward two-regime model used by the simulator.

    Hertz below the transition force, additive punch model at or above it.
    Concave or flat surfaces (``kappa <= 0``) always use the punch model.
    """
    if kappa > 0 and F < transition_force(Estar, R, kappa):
        return float(hertz_indentation(F, hertz_constant(kappa, Estar)))
    return float(flat_indentation(F, Estar, R) + geometric_indentation_constant(kappa, R))


def _window_mean(values: np.ndarray, window) -> tuple[float, list[int]]:
    if isinstance(window, slice):
        idx = list(range(len(values)))[window]
    else:
        idx = [int(i) % len(values) for i in np.atleast_1d(window)]
    if not idx:
        raise ContactError("empty compliance window")
    return float(np.mean(values[idx])), idx


def estimate_E_kappa_compliance(probes: Sequence[ProbeRecord], nu: float,
                                low_window=(0,), high_window=(-1,)) -> EstimateReport:
    """Young's modulus and curvature from the change of incremental compliance.

    Compliances ``m_j = |p_{j+1} - p_j| / (F_{j+1} - F_j)`` are formed for each
    consecutive pair. The high-force window sets ``E* = 1 / (2 R m_high)``; the
    low-force window, read as the derivative of the Hertz law at the window's
    mid force, gives ``kappa = 3/2 F_low m_low^3 / (R^2 m_high^2)``.

    Windows index the compliance intervals (``0`` is the first interval, ``-1``
    the last); slices are accepted. When ``m_low`` does not exceed ``m_high`` by
    more than 1 % no regime transition is visible and ``kappa_hat`` is ``None``.
    """
    if len(probes) < 3:
        raise ContactError(f"need at least 3 probes, got {len(probes)}")
    forces = np.array([pr.F for pr in probes])
    if np.any(np.diff(forces) <= 0):
        raise ContactError("forces must be strictly increasing")
    R = probes[0].R
    if any(not math.isclose(pr.R, R, rel_tol=1e-12) for pr in probes):
        raise ContactError("all probes must share one punch radius")
    positions = np.stack([pr.p for pr in probes])
    d_delta = np.linalg.norm(np.diff(positions, axis=0), axis=1)
    if np.any(d_delta <= 0):
        raise ContactError("consecutive probe positions coincide")
    m = d_delta / np.diff(forces)

    m_high, high_idx = _window_mean(m, high_window)
    m_low, low_idx = _window_mean(m, low_window)
    Estar_hat = 1.0 / (2.0 * R * m_high)
    E_hat = Estar_hat * (1.0 - nu * nu)
    per_sample = [(1.0 - nu * nu) / (2.0 * R * m[j]) for j in high_idx]

    f_lo = forces[min(low_idx)]
    f_hi = forces[max(low_idx) + 1]
    F_low = 0.5 * (f_lo + f_hi)
    if m_low <= 1.01 * m_high:
        return EstimateReport(E_hat, per_sample, None, m.tolist(),
                              note="no regime transition observed; curvature not estimable")
    kappa_hat = 1.5 * F_low * m_low ** 3 / (R * R * m_high ** 2)
    return EstimateReport(E_hat, per_sample, float(kappa_hat), m.tolist())


def settling_time_check(material: MaterialParams, ell: float, T_c: float) -> tuple[float, bool]:
    """Elastic wave transit time ``T_e = ell / sqrt(E / rho)`` and whether ``T_c >= 10 T_e``."""
    if material.rho is None:
        raise ContactError("settling check needs the material density")
    _require_positive(ell=ell, T_c=T_c)
    T_e = ell * math.sqrt(material.rho / material.E)
    return T_e, T_c >= SETTLING_FACTOR * T_e
