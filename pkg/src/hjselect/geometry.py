"""Star-shaped domains and masked uniform grids in dimension 1 and 2."""

from __future__ import annotations

import math
import warnings
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, GridTooCoarse, ScaleExceedsAmbient, SeparationViolated

INTERIOR, BAND, OUTSIDE = 0, 1, 2
MASK_NAMES = {INTERIOR: "interior", BAND: "boundary_band", OUTSIDE: "outside"}

_KINDS = ("interval", "ball", "box", "radial")


def _polygon_radius(vertices, angles):
    """Radius along ``angles`` of the star-shaped polygon with ``vertices``.

    Vertices are ordered by angle, uniformly spaced on [0, 2pi).
    """
    n = len(vertices)
    step = 2 * math.pi / n
    phi = np.mod(angles, 2 * math.pi)
    k = np.floor(phi / step).astype(int) % n
    p = vertices[k]
    q = vertices[(k + 1) % n]
    e = q - p
    d = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
    num = p[..., 0] * e[..., 1] - p[..., 1] * e[..., 0]
    den = d[..., 0] * e[..., 1] - d[..., 1] * e[..., 0]
    return num / den


def _segment_distance(points, a, b):
    """Distance from each point (N,2) to the segments a[k]-b[k]; returns (N,K)."""
    ab = b - a
    ap = points[:, None, :] - a[None, :, :]
    denom = np.einsum("kd,kd->k", ab, ab)
    t = np.clip(np.einsum("nkd,kd->nk", ap, ab) / denom, 0.0, 1.0)
    proj = a[None] + t[..., None] * ab[None]
    return np.linalg.norm(points[:, None, :] - proj, axis=-1)


@dataclass(frozen=True)
class StarDomain:
    """Bounded domain, star-shaped with respect to the origin.

    ``params`` depends on ``kind``: interval ``(a, b)``; ball ``(radius, dim)``;
    box ``half_widths``; radial ``radii`` sampled at uniform angles (2D polygon).
    """

    kind: str
    params: tuple
    theta: float
    ambient_radius: float

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ConfigError(f"unknown domain kind {self.kind!r}")
        if not self.theta > 0 or not self.ambient_radius > 0:
            raise ConfigError("theta and ambient_radius must be positive")
        if self.kind == "interval":
            a, b = self.params
            if not a < 0 < b:
                raise ConfigError("interval must satisfy a < 0 < b")
        elif self.kind == "ball":
            radius, dim = self.params
            if radius <= 0 or dim not in (1, 2):
                raise ConfigError("ball needs radius > 0 and dim in {1, 2}")
        elif self.kind == "box":
            if len(self.params) not in (1, 2) or min(self.params) <= 0:
                raise ConfigError("box needs 1 or 2 positive half-widths")
        else:
            if len(self.params) < 64 or min(self.params) <= 0:
                raise ConfigError("radial profile needs >= 64 positive samples")
        if self.max_radius > self.ambient_radius * (1 + 1e-12):
            raise ScaleExceedsAmbient("domain is not contained in the ambient ball")

    # -- constructors -------------------------------------------------------
    @classmethod
    def interval(cls, a, b, theta=None, ambient_radius=None):
        theta = 0.9 * min(-a, b) if theta is None else theta
        ambient = 2.0 * max(-a, b) if ambient_radius is None else ambient_radius
        return cls("interval", (float(a), float(b)), float(theta), float(ambient))

    @classmethod
    def ball(cls, radius, dim=2, theta=None, ambient_radius=None):
        theta = 0.9 * radius if theta is None else theta
        ambient = 2.0 * radius if ambient_radius is None else ambient_radius
        return cls("ball", (float(radius), int(dim)), float(theta), float(ambient))

    @classmethod
    def box(cls, half_widths, theta=None, ambient_radius=None):
        hw = tuple(float(w) for w in half_widths)
        theta = 0.9 * min(hw) if theta is None else theta
        ambient = 2.0 * math.hypot(*hw) if ambient_radius is None else ambient_radius
        return cls("box", hw, float(theta), float(ambient))

    @classmethod
    def radial(cls, radii, theta, ambient_radius=None):
        radii = tuple(float(r) for r in radii)
        ambient = 2.0 * max(radii) if ambient_radius is None else ambient_radius
        return cls("radial", radii, float(theta), float(ambient))

    # -- basic shape data ----------------------------------------------------
    @property
    def dim(self):
        if self.kind == "interval":
            return 1
        if self.kind == "ball":
            return self.params[1]
        if self.kind == "box":
            return len(self.params)
        return 2

    @property
    def min_radius(self):
        if self.kind == "interval":
            return min(-self.params[0], self.params[1])
        if self.kind == "ball":
            return self.params[0]
        if self.kind == "box":
            return min(self.params)
        v = self._vertices()
        # closest point of the polygon boundary to the origin
        return float(_segment_distance(np.zeros((1, 2)), v, np.roll(v, -1, axis=0)).min())

    @property
    def max_radius(self):
        if self.kind == "interval":
            return max(-self.params[0], self.params[1])
        if self.kind == "ball":
            return self.params[0]
        if self.kind == "box":
            return math.hypot(*self.params)
        return max(self.params)

    def bounding_box(self):
        """(lo, hi) arrays of the axis-aligned box around the closure."""
        if self.kind == "interval":
            return np.array([self.params[0]]), np.array([self.params[1]])
        if self.kind == "ball":
            r, d = self.params
            return -r * np.ones(d), r * np.ones(d)
        if self.kind == "box":
            w = np.array(self.params)
            return -w, w
        v = self._vertices()
        return v.min(axis=0), v.max(axis=0)

    def _vertices(self):
        radii = np.asarray(self.params)
        ang = 2 * math.pi * np.arange(len(radii)) / len(radii)
        return np.stack([radii * np.cos(ang), radii * np.sin(ang)], axis=-1)

    def radius(self, directions):
        """Boundary radius along unit direction(s); shape (..., dim) -> (...)."""
        d = np.asarray(directions, dtype=float)
        if self.dim == 1:
            if d.ndim and d.shape[-1] == 1:
                d = d[..., 0]
            if self.kind == "interval":
                a, b = self.params
            else:
                a, b = -self.params[0], self.params[0]
            return np.where(d >= 0, b, -a)
        if self.kind == "ball":
            return np.full(d.shape[:-1], self.params[0])
        if self.kind == "box":
            w = np.array(self.params)
            with np.errstate(divide="ignore"):
                t = np.where(np.abs(d) > 0, w / np.abs(d), np.inf)
            return t.min(axis=-1)
        return _polygon_radius(self._vertices(), np.arctan2(d[..., 1], d[..., 0]))

    # -- distances ------------------------------------------------------------
    def _as_points(self, x):
        x = np.asarray(x, dtype=float)
        if self.dim == 1 and (x.ndim == 0 or x.shape[-1] != 1):
            x = x[..., None]
        return x

    def signed_distance(self, x):
        """Signed distance to the boundary: negative inside, positive outside."""
        p = self._as_points(x)
        shape = p.shape[:-1]
        p = p.reshape(-1, self.dim)
        if self.kind == "interval":
            a, b = self.params
            s = np.maximum(a - p[:, 0], p[:, 0] - b)
        elif self.kind == "ball":
            s = np.linalg.norm(p, axis=1) - self.params[0]
        elif self.kind == "box":
            w = np.array(self.params)
            q = np.abs(p) - w
            outside = np.linalg.norm(np.maximum(q, 0.0), axis=1)
            inside = np.minimum(q.max(axis=1), 0.0)
            s = outside + inside
        else:
            v = self._vertices()
            dist = _segment_distance(p, v, np.roll(v, -1, axis=0)).min(axis=1)
            s = np.where(self._inside_polygon(p), -dist, dist)
        return s.reshape(shape)

    def _inside_polygon(self, p):
        r = np.linalg.norm(p, axis=1)
        rho = _polygon_radius(self._vertices(), np.arctan2(p[:, 1], p[:, 0]))
        return r < rho

    def dist_to_closure(self, x):
        return np.maximum(self.signed_distance(x), 0.0)

    def dist_to_boundary(self, x):
        return np.abs(self.signed_distance(x))

    def in_closure(self, x, tol=1e-10):
        return self.signed_distance(x) <= tol

    def contains(self, x):
        """Open-set membership; points beyond the ambient radius are outside."""
        p = self._as_points(x)
        s = self.signed_distance(p)
        far = np.linalg.norm(p, axis=-1) > self.ambient_radius
        out = (s < 0) & ~far
        return bool(out) if np.ndim(out) == 0 else out

    # -- transforms -------------------------------------------------------------
    def scale(self, factor):
        factor = float(factor)
        if factor <= 0:
            raise ConfigError("scale factor must be positive")
        if factor * self.max_radius > self.ambient_radius * (1 + 1e-12):
            raise ScaleExceedsAmbient(
                f"scaled radius {factor * self.max_radius:g} exceeds ambient "
                f"radius {self.ambient_radius:g}")
        if self.kind == "ball":
            params = (self.params[0] * factor, self.params[1])
        else:
            params = tuple(p * factor for p in self.params)
        return StarDomain(self.kind, params, self.theta, self.ambient_radius)

    # -- serialization -------------------------------------------------------
    def to_dict(self):
        out = {"kind": self.kind}
        if self.kind == "interval":
            out.update(a=self.params[0], b=self.params[1])
        elif self.kind == "ball":
            out.update(radius=self.params[0], dim=self.params[1])
        elif self.kind == "box":
            out.update(half_widths=list(self.params))
        else:
            out.update(radii=list(self.params))
        out.update(theta=self.theta, ambient_radius=self.ambient_radius)
        return out

    @classmethod
    def from_dict(cls, d):
        kind = d["kind"]
        if kind == "interval":
            params = (float(d["a"]), float(d["b"]))
        elif kind == "ball":
            params = (float(d["radius"]), int(d.get("dim", 2)))
        elif kind == "box":
            params = tuple(float(w) for w in d["half_widths"])
        elif kind == "radial":
            params = tuple(float(r) for r in d["radii"])
        else:
            raise ConfigError(f"unknown domain kind {kind!r}")
        return cls(kind, params, float(d["theta"]), float(d["ambient_radius"]))


def contains(domain, x):
    return domain.contains(x)


def scale(domain, factor):
    return domain.scale(factor)


@dataclass
class SeparationReport:
    theta: float
    min_ratio: float
    passed: bool
    witnesses: list = field(default_factory=list)  # (eps, direction, ratio)


def _sample_directions(domain, dir_samples):
    if domain.dim == 1:
        return np.array([[1.0], [-1.0]])
    ang = 2 * math.pi * np.arange(dir_samples) / dir_samples
    if domain.kind == "radial":
        n = len(domain.params)
        ang = np.concatenate([ang, 2 * math.pi * np.arange(n) / n])
    return np.stack([np.cos(ang), np.sin(ang)], axis=-1)


def check_separation(domain, eps_samples, dir_samples=64, raise_on_fail=True):
    """Check dist((1+eps) x, closure) > theta * eps for sampled boundary points x."""
    eps_samples = [float(e) for e in eps_samples]
    if any(not 0 < e <= 0.5 for e in eps_samples):
        raise ConfigError("eps samples must lie in (0, 0.5]")
    if dir_samples < 16:
        raise ConfigError("need at least 16 direction samples")
    dirs = _sample_directions(domain, dir_samples)
    rho = domain.radius(dirs)
    boundary = rho[:, None] * dirs
    worst = math.inf
    bad = []
    for eps in eps_samples:
        dist = domain.dist_to_closure((1 + eps) * boundary)
        ratio = dist / eps
        worst = min(worst, float(ratio.min()))
        for k in np.flatnonzero(ratio <= domain.theta):
            bad.append((eps, dirs[k].tolist(), float(ratio[k])))
    report = SeparationReport(domain.theta, worst, not bad, bad)
    if bad and raise_on_fail:
        raise SeparationViolated(
            f"separation ratio {worst:.6g} <= theta {domain.theta:g}", bad)
    return report


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform lattice ``h * k`` (integer k) over the bounding box of a closed domain.

    Solvers work on the *active* nodes (mask != outside); ``points`` holds their
    coordinates and ``neighbor_index`` their axis neighbors (-1 when absent).
    """

    domain: StarDomain
    spacing: float
    lo: tuple          # integer lattice index of the first box node per axis
    shape: tuple       # box node counts per axis
    mask: np.ndarray   # (prod(shape),) codes over the full box
    active: np.ndarray  # box indices of active nodes
    lookup: np.ndarray  # box index -> active index or -1
    points: np.ndarray  # (N, dim) active coordinates
    neighbor_index: np.ndarray  # (N, 2*dim)

    @property
    def dimension(self):
        return len(self.shape)

    @property
    def h(self):
        return self.spacing

    @property
    def n(self):
        return len(self.active)

    @property
    def nodes(self):
        """Coordinates of every box node, including outside ones."""
        axes = [self.spacing * (self.lo[d] + np.arange(self.shape[d]))
                for d in range(self.dimension)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    @property
    def node_mask(self):
        return self.mask[self.active]

    def physical_points(self, r=0.0):
        """Coordinates of active nodes in the scaled domain (1+r) * Omega."""
        return (1.0 + r) * self.points

    def box_index(self, lattice_idx):
        """Flattened box index for integer lattice coordinates (..., dim); -1 if off-box."""
        rel = np.asarray(lattice_idx) - np.asarray(self.lo)
        ok = np.all((rel >= 0) & (rel < np.asarray(self.shape)), axis=-1)
        flat = np.ravel_multi_index(tuple(np.moveaxis(np.where(rel >= 0, rel, 0), -1, 0)),
                                    self.shape, mode="clip")
        return np.where(ok, flat, -1)

    def active_index(self, lattice_idx):
        b = self.box_index(lattice_idx)
        return np.where(b >= 0, self.lookup[np.maximum(b, 0)], -1)

    def nearest_node(self, x):
        """Active index of the active node nearest to each point in x."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[-1] != self.dimension:
            x = x.reshape(-1, self.dimension)
        k = np.rint(x / self.spacing).astype(int)
        idx = self.active_index(k)
        miss = np.flatnonzero(idx < 0)
        for m in miss:
            d = np.linalg.norm(self.points - x[m], axis=1)
            idx[m] = int(np.argmin(d))
        return idx

    def is_connected(self):
        seen = np.zeros(self.n, dtype=bool)
        queue = deque([0])
        seen[0] = True
        while queue:
            i = queue.popleft()
            for j in self.neighbor_index[i]:
                if j >= 0 and not seen[j]:
                    seen[j] = True
                    queue.append(j)
        return bool(seen.all())


def build_grid(domain, h):
    h = float(h)
    if h <= 0:
        raise ConfigError("grid spacing must be positive")
    if h > domain.min_radius / 8 * (1 + 1e-12):
        warnings.warn(f"grid spacing {h:g} exceeds min radius / 8; grid is coarse",
                      stacklevel=2)
    blo, bhi = domain.bounding_box()
    tol = 1e-9 * h
    lo = tuple(int(math.ceil(v / h - 1e-9)) for v in blo)
    hi = tuple(int(math.floor(v / h + 1e-9)) for v in bhi)
    shape = tuple(b - a + 1 for a, b in zip(lo, hi))
    axes = [h * (lo[d] + np.arange(shape[d])) for d in range(len(shape))]
    mesh = np.meshgrid(*axes, indexing="ij")
    coords = np.stack([m.ravel() for m in mesh], axis=-1)

    sd = domain.signed_distance(coords)
    mask = np.full(len(coords), OUTSIDE, dtype=np.int8)
    inside = sd <= tol
    mask[inside] = np.where(-sd[inside] < h * (1 - 1e-9), BAND, INTERIOR)
    active = np.flatnonzero(mask != OUTSIDE)
    if len(active) < 3 ** len(shape):
        raise GridTooCoarse(f"only {len(active)} nodes fall inside the closed domain")
    lookup = np.full(len(coords), -1, dtype=np.int64)
    lookup[active] = np.arange(len(active))

    dim = len(shape)
    multi = np.stack(np.unravel_index(active, shape), axis=-1)
    nbr = np.full((len(active), 2 * dim), -1, dtype=np.int64)
    for d in range(dim):
        for s, col in ((-1, 2 * d), (1, 2 * d + 1)):
            m = multi.copy()
            m[:, d] += s
            ok = (m[:, d] >= 0) & (m[:, d] < shape[d])
            flat = np.ravel_multi_index(tuple(np.clip(m, 0, np.array(shape) - 1).T), shape)
            nbr[:, col] = np.where(ok, lookup[flat], -1)
    return Grid(domain, h, lo, shape, mask, active, lookup, coords[active].copy(), nbr)


def interpolation_stencil(grid, pts):
    """Multilinear interpolation data for points ``pts`` (P, dim).

    Returns (idx, w, ok): active indices and weights of the 2**dim cell
    corners, and whether every corner with nonzero weight is an active node.
    Weights below 1e-14 count as zero.
    """
    pts = np.asarray(pts, dtype=float).reshape(-1, grid.dimension)
    d = grid.dimension
    t = pts / grid.spacing - np.asarray(grid.lo)
    base = np.floor(t).astype(np.int64)
    frac = t - base
    up = frac > 1 - 1e-9
    base[up] += 1
    frac[up] = 0.0
    frac[frac < 1e-9] = 0.0
    corners = np.array(np.meshgrid(*[[0, 1]] * d, indexing="ij")).reshape(d, -1).T
    idx = np.empty((len(pts), len(corners)), dtype=np.int64)
    w = np.empty((len(pts), len(corners)))
    shape = np.asarray(grid.shape)
    for c, off in enumerate(corners):
        b = base + off
        inbox = np.all((b >= 0) & (b < shape), axis=1)
        flat = np.ravel_multi_index(tuple(np.clip(b, 0, shape - 1).T), grid.shape)
        idx[:, c] = np.where(inbox, grid.lookup[flat], -1)
        w[:, c] = np.prod(np.where(off == 1, frac, 1.0 - frac), axis=1)
    w[w < 1e-14] = 0.0
    ok = np.all((idx >= 0) | (w == 0.0), axis=1)
    return idx, w, ok


def interpolate(grid, values, pts):
    """Multilinear interpolant of node ``values`` at ``pts``; NaN where undefined."""
    idx, w, ok = interpolation_stencil(grid, pts)
    vals = np.einsum("pc,pc->p", w, np.asarray(values)[np.maximum(idx, 0)])
    return np.where(ok, vals, np.nan)
