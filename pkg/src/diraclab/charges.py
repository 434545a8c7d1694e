"""Finite attractive charge distributions and their Coulomb potentials.

A distribution is a finite set of point charges ("atoms") plus optional
origin-centered radial layers (spherical shells and uniformly charged
balls).  Strengths are in units of the critical coupling, so an atom may
not exceed 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import (ChargeModelError, MergedAtomTooHeavyError,
                     SingularLocationError)

# Distance under which a potential evaluation counts as sitting on an atom.
SINGULAR_EPS = 1e-14
# Pushforward images closer than this merge into a single atom.
MERGE_TOL = 1e-12

LAYER_KINDS = ("point", "sphere-shell", "uniform-ball")

_GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))


@dataclass(frozen=True)
class PointCharge:
    """An atom: strength 0 < theta <= 1 at a fixed location."""

    position: tuple[float, float, float]
    strength: float

    def __post_init__(self):
        pos = tuple(float(c) for c in self.position)
        if len(pos) != 3 or not all(math.isfinite(c) for c in pos):
            raise ChargeModelError(f"bad point position {self.position!r}")
        object.__setattr__(self, "position", pos)
        s = float(self.strength)
        if not (0.0 < s <= 1.0):
            # an atom heavier than the critical coupling has no
            # distinguished self-adjoint realization
            raise ChargeModelError(f"point strength must be in (0, 1], got {s}")
        object.__setattr__(self, "strength", s)

    @property
    def xyz(self) -> np.ndarray:
        return np.array(self.position, dtype=float)


@dataclass(frozen=True)
class RadialLayer:
    """Origin-centered layer: a point, a sphere shell, or a uniform ball."""

    kind: str
    radius: float
    strength: float

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ChargeModelError(f"unknown layer kind {self.kind!r}")
        rho = float(self.radius)
        s = float(self.strength)
        if s <= 0.0 or not math.isfinite(s):
            raise ChargeModelError(f"layer strength must be positive, got {s}")
        if self.kind == "point":
            if rho != 0.0:
                raise ChargeModelError("point layer must have radius 0")
            if s > 1.0:
                raise ChargeModelError("point layer strength must not exceed 1")
        elif rho <= 0.0 or not math.isfinite(rho):
            raise ChargeModelError(f"{self.kind} layer needs radius > 0, got {rho}")
        object.__setattr__(self, "radius", rho)
        object.__setattr__(self, "strength", s)


@dataclass(frozen=True)
class ChargeDistribution:
    """A finite collection of atoms and origin-centered radial layers."""

    points: tuple[PointCharge, ...] = ()
    layers: tuple[RadialLayer, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        object.__setattr__(self, "layers", tuple(self.layers))

    @property
    def total_charge(self) -> float:
        return math.fsum([p.strength for p in self.points]
                         + [l.strength for l in self.layers])

    @property
    def radially_symmetric(self) -> bool:
        return all(p.position == (0.0, 0.0, 0.0) for p in self.points)

    @property
    def origin_point_strength(self) -> float:
        """Combined strength of point mass at the origin (atoms + point layers)."""
        tot = [p.strength for p in self.points if p.position == (0.0, 0.0, 0.0)]
        tot += [l.strength for l in self.layers if l.kind == "point"]
        return math.fsum(tot)

    def centers(self) -> np.ndarray:
        """Distinct atom positions plus the origin when layers are present."""
        locs = [p.position for p in self.points]
        if self.layers and (0.0, 0.0, 0.0) not in locs:
            locs.append((0.0, 0.0, 0.0))
        seen: list[tuple[float, float, float]] = []
        for loc in locs:
            if loc not in seen:
                seen.append(loc)
        return np.array(seen, dtype=float)


def atom(position, strength) -> ChargeDistribution:
    return ChargeDistribution(points=(PointCharge(tuple(position), strength),))


def atoms(positions, strengths) -> ChargeDistribution:
    pts = tuple(PointCharge(tuple(p), s) for p, s in zip(positions, strengths))
    return ChargeDistribution(points=pts)


def shell(strength, radius) -> ChargeDistribution:
    return ChargeDistribution(layers=(RadialLayer("sphere-shell", radius, strength),))


def ball(strength, radius) -> ChargeDistribution:
    return ChargeDistribution(layers=(RadialLayer("uniform-ball", radius, strength),))


def _layer_profile(layer: RadialLayer, r: np.ndarray) -> np.ndarray:
    """Convolution of the layer with 1/|x| as a function of radius r."""
    if layer.kind == "point":
        return layer.strength / r
    if layer.kind == "sphere-shell":
        return layer.strength / np.maximum(r, layer.radius)
    # uniform ball: harmonic outside, parabolic inside
    rho = layer.radius
    out = layer.strength / np.maximum(r, rho)
    inside = r < rho
    out = np.where(inside,
                   layer.strength * (3.0 - (r / rho) ** 2) / (2.0 * rho),
                   out)
    return out


def radial_profile(mu: ChargeDistribution, r) -> np.ndarray:
    """Potential of a radially symmetric distribution at radii r > 0."""
    if not mu.radially_symmetric:
        raise ChargeModelError("radial profile needs a radially symmetric charge")
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0.0):
        raise ChargeModelError("radial profile needs r > 0")
    out = np.zeros_like(r)
    nu_pt = math.fsum(p.strength for p in mu.points)
    if nu_pt > 0.0:
        out += nu_pt / r
    for layer in mu.layers:
        out += _layer_profile(layer, r)
    return out


def potential_grid(mu: ChargeDistribution, pts: np.ndarray) -> np.ndarray:
    """Coulomb potential mu * 1/|x| at an (m, 3) array of locations.

    Raises SingularLocationError when any location sits within
    SINGULAR_EPS of an atom (or of the origin when a point layer exists).
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    out = np.zeros(len(pts))
    for p in mu.points:
        d = np.linalg.norm(pts - p.xyz[None, :], axis=1)
        if np.any(d < SINGULAR_EPS):
            raise SingularLocationError(
                f"potential evaluated within {SINGULAR_EPS} of atom at {p.position}")
        out += p.strength / d
    if mu.layers:
        r = np.linalg.norm(pts, axis=1)
        for layer in mu.layers:
            if layer.kind == "point" and np.any(r < SINGULAR_EPS):
                raise SingularLocationError(
                    "potential evaluated at the origin point layer")
            out += _layer_profile(layer, np.maximum(r, SINGULAR_EPS))
    return out


def potential_at(mu: ChargeDistribution, x) -> float:
    """Coulomb potential at a single location."""
    return float(potential_grid(mu, np.asarray(x, dtype=float)[None, :])[0])


def pushforward(mu: ChargeDistribution, matrix, scale: float,
                offset=(0.0, 0.0, 0.0)) -> ChargeDistribution:
    """Image of an atomic distribution under x -> scale * matrix @ x + offset.

    matrix must be orthogonal and 0 <= scale <= 1, so the map is a
    contraction.  Atom images that collide within MERGE_TOL merge; a merged
    strength above 1 is rejected.
    """
    if mu.layers:
        raise ChargeModelError("pushforward is defined for atomic distributions only")
    A = np.asarray(matrix, dtype=float)
    if A.shape != (3, 3) or np.max(np.abs(A.T @ A - np.eye(3))) > 1e-12:
        raise ChargeModelError("pushforward matrix must be orthogonal")
    s = float(scale)
    if not (0.0 <= s <= 1.0):
        raise ChargeModelError(f"pushforward scale must lie in [0, 1], got {s}")
    b = np.asarray(offset, dtype=float)
    images = [(s * (A @ p.xyz) + b, p.strength) for p in mu.points]

    groups: list[list[int]] = []
    for i, (pos, _) in enumerate(images):
        for g in groups:
            if np.linalg.norm(images[g[0]][0] - pos) <= MERGE_TOL:
                g.append(i)
                break
        else:
            groups.append([i])

    merged = []
    for g in groups:
        strength = math.fsum(images[i][1] for i in g)
        if strength > 1.0:
            raise MergedAtomTooHeavyError(
                f"merged atom of strength {strength} > 1 under contraction")
        w = np.array([images[i][1] for i in g])
        pos = np.average([images[i][0] for i in g], axis=0, weights=w)
        merged.append(PointCharge(tuple(pos), strength))
    return ChargeDistribution(points=tuple(merged))


def _fibonacci_sphere(k: int, phase: float = 0.0) -> np.ndarray:
    """k near-equal-area unit vectors; antipodal pairs when k is even."""
    if k % 2 == 0:
        half = _fibonacci_sphere_raw(k // 2, phase)
        return np.concatenate([half, -half])
    return _fibonacci_sphere_raw(k, phase)


def _fibonacci_sphere_raw(k: int, phase: float) -> np.ndarray:
    i = np.arange(k)
    z = 1.0 - (2.0 * i + 1.0) / k
    az = i * _GOLDEN_ANGLE + phase
    s = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    return np.column_stack([s * np.cos(az), s * np.sin(az), z])


def _split_strength(theta: float, k: int) -> np.ndarray:
    """k pieces summing to theta exactly (telescoping cumulative sums)."""
    cuts = theta * np.arange(k + 1) / k
    return np.diff(cuts)


def atomize_radial(mu: ChargeDistribution, k: int) -> ChargeDistribution:
    """Replace each layer of a radially symmetric charge by k point charges.

    Shells become k points on the sphere of the layer radius; balls are cut
    into equal-mass radial bands first.  Point layers and origin atoms pass
    through unchanged.  Total charge is preserved exactly.
    """
    if not mu.radially_symmetric:
        raise ChargeModelError("atomize_radial needs a radially symmetric charge")
    if k < 1:
        raise ChargeModelError("atomize_radial needs k >= 1")
    new_points = list(mu.points)
    for li, layer in enumerate(mu.layers):
        if layer.kind == "point":
            new_points.append(PointCharge((0.0, 0.0, 0.0), layer.strength))
            continue
        strengths = _split_strength(layer.strength, k)
        if layer.kind == "sphere-shell":
            dirs = _fibonacci_sphere(k, phase=li * _GOLDEN_ANGLE)
            radii = np.full(k, layer.radius)
        else:
            n_bands = max(1, round(k ** (1.0 / 3.0)))
            base, extra = divmod(k, n_bands)
            sizes = [base + (1 if b < extra else 0) for b in range(n_bands)]
            dirs_list = []
            radii_list = []
            for b, size in enumerate(sizes):
                if size == 0:
                    continue
                # mass-median radius of the b-th equal-mass band
                r_b = layer.radius * ((b + 0.5) / n_bands) ** (1.0 / 3.0)
                dirs_list.append(_fibonacci_sphere(size, phase=(li + b) * _GOLDEN_ANGLE))
                radii_list.append(np.full(size, r_b))
            dirs = np.concatenate(dirs_list)
            radii = np.concatenate(radii_list)
        for d, r, s in zip(dirs, radii, strengths):
            new_points.append(PointCharge(tuple(r * d), s))
    return ChargeDistribution(points=tuple(new_points))


def scale_strengths(mu: ChargeDistribution, factor: float) -> ChargeDistribution:
    """Same geometry with all strengths multiplied by factor > 0."""
    if factor <= 0.0:
        raise ChargeModelError("strength scale factor must be positive")
    pts = tuple(PointCharge(p.position, factor * p.strength) for p in mu.points)
    lys = tuple(RadialLayer(l.kind, l.radius, factor * l.strength) for l in mu.layers)
    return ChargeDistribution(points=pts, layers=lys)


def combine(mu1: ChargeDistribution, mu2: ChargeDistribution) -> ChargeDistribution:
    """Superposition mu1 + mu2 (no merging of coincident pieces)."""
    return ChargeDistribution(points=mu1.points + mu2.points,
                              layers=mu1.layers + mu2.layers)


def mix(mu1: ChargeDistribution, mu2: ChargeDistribution, t: float) -> ChargeDistribution:
    """Convex combination t*mu1 + (1-t)*mu2 for 0 < t < 1."""
    if not (0.0 < t < 1.0):
        raise ChargeModelError("mixing weight must lie strictly between 0 and 1")
    return combine(scale_strengths(mu1, t), scale_strengths(mu2, 1.0 - t))


def sorted_canonical(mu: ChargeDistribution) -> ChargeDistribution:
    """Deterministic ordering used by the config writer."""
    pts = tuple(sorted(mu.points, key=lambda p: (p.position, p.strength)))
    order = {k: i for i, k in enumerate(LAYER_KINDS)}
    lys = tuple(sorted(mu.layers, key=lambda l: (order[l.kind], l.radius, l.strength)))
    return ChargeDistribution(points=pts, layers=lys)
