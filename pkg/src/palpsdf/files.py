"""Probe files and run manifests.

Probe files hold one JSON object per line::

    {"px": .., "py": .., "pz": .., "qx": .., "qy": .., "qz": ..,
     "force_N": .., "punch_radius_m": .., "value_m": .., "site": ..}

``q`` is the measured *inward* unit normal. Only the six pose fields are
required. Floats are written with ``repr`` precision so a round trip is exact.

Manifests are pretty-printed JSON documents with sorted keys.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .contact import ProbeRecord

__all__ = [
    "FormatError",
    "ProbeLine",
    "NORMAL_TOL",
    "sites_to_lines",
    "write_probe_file",
    "read_probe_file",
    "group_sites",
    "write_manifest",
    "read_manifest",
    "sha256_file",
]

#: Largest accepted deviation of a stored normal from unit length.
NORMAL_TOL = 1e-3

_POSE_KEYS = ("px", "py", "pz", "qx", "qy", "qz")


class FormatError(ValueError):
    pass


@dataclass
class ProbeLine:
    p: np.ndarray
    q: np.ndarray
    force_N: float | None = None
    punch_radius_m: float | None = None
    value_m: float | None = None
    site: int | None = None

    def record(self) -> ProbeRecord:
        if self.force_N is None or self.punch_radius_m is None:
            raise FormatError("probe line has no force_N / punch_radius_m")
        return ProbeRecord(self.p, self.q, self.force_N, self.punch_radius_m)

    def to_json(self) -> str:
        d = dict(zip(_POSE_KEYS, (float(c) for c in (*self.p, *self.q))))
        for key in ("force_N", "punch_radius_m", "value_m"):
            v = getattr(self, key)
            if v is not None:
                d[key] = float(v)
        if self.site is not None:
            d["site"] = int(self.site)
        return json.dumps(d)


def sites_to_lines(sites) -> list[ProbeLine]:
    """Flatten :class:`~palpsdf.sim.ProbeSite` objects into probe lines."""
    out = []
    for site in sites:
        for rec in site.probes:
            out.append(ProbeLine(rec.p, rec.q, rec.F, rec.R, None, site.index))
    return out


def write_probe_file(path, lines: Iterable[ProbeLine]) -> Path:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for line in lines:
            fh.write(line.to_json() + "\n")
    return path


def read_probe_file(path) -> list[ProbeLine]:
    """Parse a probe file, renormalizing normals within :data:`NORMAL_TOL` of unit length."""
    path = Path(path)
    out = []
    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            if not raw.strip():
                continue
            try:
                d = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from None
            missing = [k for k in _POSE_KEYS if k not in d]
            if missing:
                raise FormatError(f"{path}:{lineno}: missing fields {missing}")
            p = np.array([d["px"], d["py"], d["pz"]], dtype=float)
            q = np.array([d["qx"], d["qy"], d["qz"]], dtype=float)
            nq = np.linalg.norm(q)
            if not abs(nq - 1.0) <= NORMAL_TOL:
                raise FormatError(f"{path}:{lineno}: normal has length {nq:.6g}")
            if not (np.all(np.isfinite(p)) and np.all(np.isfinite(q))):
                raise FormatError(f"{path}:{lineno}: non-finite pose")
            if abs(nq - 1.0) > 1e-12:
                q = q / nq  # unit normals pass through untouched so round trips are exact
            site = d.get("site")
            out.append(ProbeLine(p, q, d.get("force_N"), d.get("punch_radius_m"),
                                 d.get("value_m"), None if site is None else int(site)))
    if not out:
        raise FormatError(f"{path}: no probe records")
    return out


def group_sites(lines: Sequence[ProbeLine]) -> list[list[ProbeRecord]]:
    """Group probe lines into sites, each ordered by force.

    Lines carrying a ``site`` field are grouped by it. Otherwise consecutive
    lines belong to the same site while the force keeps increasing.
    """
    if all(line.site is not None for line in lines):
        groups: dict[int, list[ProbeRecord]] = {}
        for line in lines:
            groups.setdefault(line.site, []).append(line.record())
        sites = [groups[k] for k in sorted(groups)]
    else:
        sites = []
        for line in lines:
            rec = line.record()
            if sites and rec.F > sites[-1][-1].F:
                sites[-1].append(rec)
            else:
                sites.append([rec])
    return [sorted(s, key=lambda r: r.F) for s in sites]


def write_manifest(path, manifest: dict) -> Path:
    path = Path(path)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def read_manifest(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
