"""Bounded grid domains, distance-to-boundary fields, and sampled fields.

Domains are open bounded regions of R^N (N = 1, 2, 3) represented on uniform
Cartesian vertex grids.  Box and ball domains carry exact closed-form distance
functions; arbitrary regions are given by an inside mask and get their
distance field from boundary-face midpoints (brute force on small grids, an
exact Euclidean distance transform on large ones).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "Domain",
    "ScalarField",
    "VectorField",
    "distance_field",
    "boundary_shell",
    "read_field_csv",
    "write_field_csv",
    "domain_from_json",
]

# Node count below which mask-domain distances are done by brute force.
BRUTE_FORCE_NODE_LIMIT = 10**6
_CHUNK = 1 << 18


def _as_bbox(bbox) -> tuple[tuple[float, float], ...]:
    out = tuple((float(lo), float(hi)) for lo, hi in bbox)
    for lo, hi in out:
        if not hi > lo:
            raise ValueError(f"degenerate bbox interval ({lo}, {hi})")
    return out


@dataclass
class Domain:
    """Open bounded domain on a uniform vertex grid.

    The grid covers the closed bounding box with ``shape[i]`` nodes along
    axis i (spacing ``(hi - lo) / (shape[i] - 1)``).  ``inside_mask`` marks
    the nodes lying in the open region; nodes on the bbox faces are never
    inside.  ``delta_mask`` marks an optional closed interior node set, and
    ``gamma_mask`` an optional subset of the boundary nodes.
    """

    kind: str
    bbox: tuple[tuple[float, float], ...]
    shape: tuple[int, ...]
    inside_mask: np.ndarray
    delta_mask: np.ndarray | None = None
    gamma_mask: np.ndarray | None = None
    _sigma_values: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.bbox = _as_bbox(self.bbox)
        self.shape = tuple(int(n) for n in self.shape)
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim {self.dim} unsupported (need 1, 2 or 3)")
        if any(n < 3 for n in self.shape):
            raise ValueError("need at least 3 nodes per axis")
        if self.inside_mask.shape != self.shape:
            raise ValueError("inside_mask shape mismatch")
        if not self.inside_mask.any():
            raise ValueError("empty domain: no inside nodes")
        for axis in range(self.dim):
            for idx in (0, -1):
                face = np.take(self.inside_mask, idx, axis=axis)
                if face.any():
                    raise ValueError("inside nodes on bbox face: domain must be open")
        if self.delta_mask is not None:
            if self.delta_mask.shape != self.shape:
                raise ValueError("delta_mask shape mismatch")
            if (self.delta_mask & ~self.inside_mask).any():
                raise ValueError("delta nodes must be interior")
        if self.gamma_mask is not None:
            if self.gamma_mask.shape != self.shape:
                raise ValueError("gamma_mask shape mismatch")
            if (self.gamma_mask & self.inside_mask).any():
                raise ValueError("gamma nodes must be boundary nodes")

    # ------------------------------------------------------------------ #
    # constructors

    @classmethod
    def box(cls, bbox, resolution) -> "Domain":
        bbox = _as_bbox(bbox)
        shape = _resolution_tuple(resolution, len(bbox))
        inside = np.ones(shape, dtype=bool)
        for axis in range(len(shape)):
            sl = [slice(None)] * len(shape)
            for idx in (0, -1):
                sl[axis] = idx
                inside[tuple(sl)] = False
        return cls("box", bbox, shape, inside)

    @classmethod
    def ball(cls, bbox, resolution) -> "Domain":
        bbox = _as_bbox(bbox)
        shape = _resolution_tuple(resolution, len(bbox))
        center = [(lo + hi) / 2.0 for lo, hi in bbox]
        radius = min((hi - lo) / 2.0 for lo, hi in bbox)
        axes = [np.linspace(lo, hi, n) for (lo, hi), n in zip(bbox, shape)]
        grids = np.meshgrid(*axes, indexing="ij")
        r = np.sqrt(sum((g - c) ** 2 for g, c in zip(grids, center)))
        return cls("ball", bbox, shape, r < radius)

    @classmethod
    def from_mask(cls, bbox, inside_mask) -> "Domain":
        return cls("mask", _as_bbox(bbox), inside_mask.shape, inside_mask.astype(bool))

    def with_delta(self, delta_mask: np.ndarray) -> "Domain":
        """Copy of the domain with a closed interior zero-set attached."""
        return Domain(self.kind, self.bbox, self.shape, self.inside_mask,
                      delta_mask.astype(bool), self.gamma_mask)

    def with_gamma(self, gamma_mask: np.ndarray) -> "Domain":
        return Domain(self.kind, self.bbox, self.shape, self.inside_mask,
                      self.delta_mask, gamma_mask.astype(bool))

    # ------------------------------------------------------------------ #
    # grid geometry

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def lo(self) -> np.ndarray:
        return np.array([b[0] for b in self.bbox])

    @property
    def hi(self) -> np.ndarray:
        return np.array([b[1] for b in self.bbox])

    @property
    def spacing(self) -> np.ndarray:
        return np.array([(hi - lo) / (n - 1) for (lo, hi), n in zip(self.bbox, self.shape)])

    @property
    def h(self) -> float:
        """Coarsest grid spacing; the subgrid-step threshold."""
        return float(self.spacing.max())

    @property
    def diameter(self) -> float:
        return float(np.sqrt(((self.hi - self.lo) ** 2).sum()))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def axis_coords(self, axis: int) -> np.ndarray:
        lo, hi = self.bbox[axis]
        return np.linspace(lo, hi, self.shape[axis])

    def node_grids(self) -> list[np.ndarray]:
        return np.meshgrid(*[self.axis_coords(a) for a in range(self.dim)], indexing="ij")

    def node_coords(self, mask: np.ndarray | None = None) -> np.ndarray:
        """(M, N) coordinates of the masked nodes (default: inside nodes)."""
        if mask is None:
            mask = self.inside_mask
        grids = self.node_grids()
        return np.stack([g[mask] for g in grids], axis=-1)

    @property
    def theta_mask(self) -> np.ndarray:
        """Closed zero-set Theta: boundary nodes plus the delta set."""
        theta = ~self.inside_mask
        if self.delta_mask is not None:
            theta = theta | self.delta_mask
        return theta

    # ------------------------------------------------------------------ #
    # distances

    def sigma(self) -> "ScalarField":
        """Distance to the domain boundary, cached; negative outside."""
        if self._sigma_values is None:
            self._sigma_values = self._compute_sigma()
        return ScalarField(self, self._sigma_values.copy())

    def _compute_sigma(self) -> np.ndarray:
        if self.kind == "box":
            grids = self.node_grids()
            per_axis = [np.minimum(g - lo, hi - g) for g, (lo, hi) in zip(grids, self.bbox)]
            out = per_axis[0]
            for arr in per_axis[1:]:
                out = np.minimum(out, arr)
            return out
        if self.kind == "ball":
            center = (self.lo + self.hi) / 2.0
            radius = min((hi - lo) / 2.0 for lo, hi in self.bbox)
            r = np.sqrt(sum((g - c) ** 2 for g, c in zip(self.node_grids(), center)))
            return radius - r
        return self._mask_sigma()

    def _mask_sigma(self) -> np.ndarray:
        if np.prod(self.shape) <= BRUTE_FORCE_NODE_LIMIT:
            dist = self._mask_sigma_brute()
        else:
            dist = self._mask_sigma_edt()
        return np.where(self.inside_mask, dist, -dist)

    def boundary_face_midpoints(self) -> np.ndarray:
        """Midpoints of grid faces separating inside from outside nodes."""
        mids = []
        grids = self.node_grids()
        half = self.spacing / 2.0
        for axis in range(self.dim):
            a = self.inside_mask
            lo_sl = [slice(None)] * self.dim
            hi_sl = [slice(None)] * self.dim
            lo_sl[axis] = slice(None, -1)
            hi_sl[axis] = slice(1, None)
            crossing = a[tuple(lo_sl)] ^ a[tuple(hi_sl)]
            if not crossing.any():
                continue
            pts = np.stack([g[tuple(lo_sl)][crossing] for g in grids], axis=-1)
            pts[:, axis] += half[axis]
            mids.append(pts)
        if not mids:
            raise ValueError("mask domain has no boundary faces")
        return np.concatenate(mids, axis=0)

    def _mask_sigma_brute(self) -> np.ndarray:
        mids = self.boundary_face_midpoints()
        nodes = self.node_coords(np.ones(self.shape, dtype=bool))
        out = np.empty(len(nodes))
        for start in range(0, len(nodes), max(1, _CHUNK // max(1, len(mids)))):
            chunk = nodes[start:start + max(1, _CHUNK // max(1, len(mids)))]
            d2 = ((chunk[:, None, :] - mids[None, :, :]) ** 2).sum(-1)
            out[start:start + len(chunk)] = np.sqrt(d2.min(axis=1))
        return out.reshape(self.shape)

    def _mask_sigma_edt(self) -> np.ndarray:
        # Face midpoints live on the half-spacing lattice, so the transform
        # runs on a doubled grid and stays exact.
        from scipy.ndimage import distance_transform_edt

        dbl_shape = tuple(2 * n - 1 for n in self.shape)
        target = np.zeros(dbl_shape, dtype=bool)
        a = self.inside_mask
        for axis in range(self.dim):
            lo_sl = [slice(None)] * self.dim
            hi_sl = [slice(None)] * self.dim
            lo_sl[axis] = slice(None, -1)
            hi_sl[axis] = slice(1, None)
            crossing = a[tuple(lo_sl)] ^ a[tuple(hi_sl)]
            dbl_sl = [slice(None, None, 2)] * self.dim
            dbl_sl[axis] = slice(1, None, 2)
            target[tuple(dbl_sl)] |= crossing
        dist = distance_transform_edt(~target, sampling=self.spacing / 2.0)
        node_sl = tuple(slice(None, None, 2) for _ in range(self.dim))
        return np.asarray(dist)[node_sl]

    def sigma_at(self, points: np.ndarray) -> np.ndarray:
        """Exact boundary distance at arbitrary points (signed for box/ball)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if self.kind == "box":
            per_axis = np.minimum(points - self.lo, self.hi - points)
            return per_axis.min(axis=1)
        if self.kind == "ball":
            center = (self.lo + self.hi) / 2.0
            radius = min((hi - lo) / 2.0 for lo, hi in self.bbox)
            return radius - np.sqrt(((points - center) ** 2).sum(axis=1))
        mids = self.boundary_face_midpoints()
        out = np.empty(len(points))
        step = max(1, _CHUNK // max(1, len(mids)))
        for start in range(0, len(points), step):
            chunk = points[start:start + step]
            d2 = ((chunk[:, None, :] - mids[None, :, :]) ** 2).sum(-1)
            out[start:start + len(chunk)] = np.sqrt(d2.min(axis=1))
        return out

    def delta_coords(self) -> np.ndarray | None:
        if self.delta_mask is None or not self.delta_mask.any():
            return None
        return self.node_coords(self.delta_mask)

    def theta_dist_at(self, points: np.ndarray) -> np.ndarray:
        """Distance to Theta = boundary + delta set at arbitrary points."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        d = self.sigma_at(points)
        deltas = self.delta_coords()
        if deltas is None:
            return d
        d_delta = np.empty(len(points))
        step = max(1, _CHUNK // max(1, len(deltas)))
        for start in range(0, len(points), step):
            chunk = points[start:start + step]
            d2 = ((chunk[:, None, :] - deltas[None, :, :]) ** 2).sum(-1)
            d_delta[start:start + len(chunk)] = np.sqrt(d2.min(axis=1))
        return np.minimum(d, d_delta)

    # ------------------------------------------------------------------ #
    # interpolation

    def interpolate(self, values: np.ndarray, points: np.ndarray,
                    clamp: bool = False) -> np.ndarray:
        """Multilinear interpolation of a node array at (M, N) points.

        Points outside the closed bounding box raise unless ``clamp`` pulls
        them onto it.  Uses the delta form ``a + t*(b - a)`` per axis so that
        constant data interpolates exactly.
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if points.shape[1] != self.dim:
            raise ValueError(f"points have dim {points.shape[1]}, domain has {self.dim}")
        if clamp:
            points = np.clip(points, self.lo, self.hi)
        else:
            bad = (points < self.lo) | (points > self.hi)
            if bad.any():
                i = int(np.argwhere(bad.any(axis=1))[0][0])
                raise ValueError(
                    f"evaluation outside the closed domain bbox at point {points[i]}")
        idx = []
        frac = []
        for axis in range(self.dim):
            t = (points[:, axis] - self.bbox[axis][0]) / self.spacing[axis]
            i0 = np.clip(np.floor(t).astype(np.int64), 0, self.shape[axis] - 2)
            idx.append(i0)
            frac.append(t - i0)
        corner_vals = []
        for corner in product((0, 1), repeat=self.dim):
            sel = tuple(idx[a] + corner[a] for a in range(self.dim))
            corner_vals.append(values[sel])
        # Reduce per axis, last axis first (matches corner enumeration order).
        for axis in range(self.dim - 1, -1, -1):
            t = frac[axis]
            corner_vals = [v0 + t * (v1 - v0)
                           for v0, v1 in zip(corner_vals[0::2], corner_vals[1::2])]
        return corner_vals[0]


def _resolution_tuple(resolution, dim: int) -> tuple[int, ...]:
    if np.isscalar(resolution):
        return (int(resolution),) * dim
    res = tuple(int(r) for r in resolution)
    if len(res) != dim:
        raise ValueError("resolution length must match bbox length")
    return res


# ---------------------------------------------------------------------- #
# fields


@dataclass
class ScalarField:
    """Real values sampled on every grid node of a domain."""

    domain: Domain
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.domain.shape:
            raise ValueError(
                f"field shape {self.values.shape} != grid shape {self.domain.shape}")
        if not np.isfinite(self.values[self.domain.inside_mask]).all():
            raise ValueError("field has non-finite values at inside nodes")

    @classmethod
    def from_function(cls, domain: Domain, fn: Callable) -> "ScalarField":
        grids = domain.node_grids()
        return cls(domain, np.asarray(fn(*grids), dtype=float))

    @classmethod
    def constant(cls, domain: Domain, c: float) -> "ScalarField":
        return cls(domain, np.full(domain.shape, float(c)))

    def at(self, points: np.ndarray, clamp: bool = False) -> np.ndarray:
        return self.domain.interpolate(self.values, points, clamp=clamp)

    def inside(self) -> np.ndarray:
        return self.values[self.domain.inside_mask]

    def copy(self) -> "ScalarField":
        return ScalarField(self.domain, self.values.copy())


@dataclass
class VectorField:
    """One scalar component per domain axis."""

    domain: Domain
    components: list[ScalarField]

    def __post_init__(self):
        if len(self.components) != self.domain.dim:
            raise ValueError("component count must equal domain dim")

    @classmethod
    def from_arrays(cls, domain: Domain, arrays: Sequence[np.ndarray]) -> "VectorField":
        return cls(domain, [ScalarField(domain, a) for a in arrays])

    def arrays(self) -> list[np.ndarray]:
        return [c.values for c in self.components]

    def magnitude(self) -> ScalarField:
        mag = np.sqrt(sum(c.values ** 2 for c in self.components))
        return ScalarField(self.domain, mag)


def gradient_central(f: ScalarField) -> VectorField:
    """Central-difference gradient, one-sided at the grid edges."""
    spacings = f.domain.spacing
    if f.domain.dim == 1:
        parts = [np.gradient(f.values, spacings[0])]
    else:
        parts = list(np.gradient(f.values, *spacings))
    return VectorField.from_arrays(f.domain, parts)


def second_differences(f: ScalarField) -> np.ndarray:
    """Max over axes of |undivided second central difference| per node."""
    out = np.zeros(f.domain.shape)
    for axis in range(f.domain.dim):
        d2 = np.zeros(f.domain.shape)
        mid = [slice(1, -1)] * f.domain.dim
        lo = [slice(None, -2)] * f.domain.dim
        hi = [slice(2, None)] * f.domain.dim
        for sl in (mid, lo, hi):
            for a in range(f.domain.dim):
                if a != axis:
                    sl[a] = slice(None)
        d2[tuple(mid)] = np.abs(f.values[tuple(hi)] - 2.0 * f.values[tuple(mid)]
                                + f.values[tuple(lo)])
        out = np.maximum(out, d2)
    return out


# ---------------------------------------------------------------------- #
# operations


def distance_field(domain: Domain, target: str = "boundary") -> ScalarField:
    """Distance to the boundary (``target='boundary'``) or to Theta.

    With ``target='theta'`` the distance also sees the interior delta set;
    when the delta set is empty this coincides with the boundary distance.
    Values at nodes outside the open region carry a negative sign.
    """
    if target not in ("boundary", "theta"):
        raise ValueError(f"unknown distance target {target!r}")
    sigma = domain.sigma()
    if target == "boundary":
        return sigma
    deltas = domain.delta_coords()
    if deltas is None:
        return sigma
    nodes = domain.node_coords(np.ones(domain.shape, dtype=bool))
    d_delta = np.empty(len(nodes))
    step = max(1, _CHUNK // max(1, len(deltas)))
    for start in range(0, len(nodes), step):
        chunk = nodes[start:start + step]
        d2 = ((chunk[:, None, :] - deltas[None, :, :]) ** 2).sum(-1)
        d_delta[start:start + len(chunk)] = np.sqrt(d2.min(axis=1))
    return ScalarField(domain, np.minimum(sigma.values, d_delta.reshape(domain.shape)))


def boundary_shell(domain: Domain, width: float) -> np.ndarray:
    """Boolean mask of inside nodes within ``width`` of the boundary."""
    if width <= 0:
        raise ValueError("shell width must be positive")
    sigma = domain.sigma()
    return domain.inside_mask & (sigma.values <= width)


# ---------------------------------------------------------------------- #
# I/O


def write_field_csv(f: ScalarField, path) -> None:
    dom = f.domain
    shape = ",".join(str(n) for n in dom.shape)
    bbox = ",".join(f"{float(lo)!r},{float(hi)!r}" for lo, hi in dom.bbox)
    with open(path, "w") as fh:
        fh.write(f"# dim={dom.dim} shape={shape} bbox={bbox}\n")
        for v in f.values.reshape(-1):
            fh.write(f"{float(v)!r}\n")


def read_field_csv(path, domain: Domain | None = None) -> ScalarField:
    """Read a field CSV; builds a box domain from the header if none given."""
    with open(path) as fh:
        header = fh.readline().strip()
        values = np.array([float(line) for line in fh if line.strip()])
    if not header.startswith("#"):
        raise ValueError(f"{path}: missing field CSV header")
    meta = dict(tok.split("=", 1) for tok in header[1:].split())
    shape = tuple(int(s) for s in meta["shape"].split(","))
    nums = [float(s) for s in meta["bbox"].split(",")]
    bbox = tuple((nums[2 * i], nums[2 * i + 1]) for i in range(len(shape)))
    if domain is None:
        domain = Domain.box(bbox, shape)
    elif domain.shape != shape or domain.bbox != _as_bbox(bbox):
        raise ValueError(f"{path}: field grid does not match the given domain")
    return ScalarField(domain, values.reshape(shape))


def domain_from_json(spec, base_dir=".") -> Domain:
    """Build a domain from its JSON spec (string, path, or dict)."""
    import os

    if isinstance(spec, str):
        spec = json.loads(spec) if spec.lstrip().startswith("{") else json.load(open(spec))
    kind = spec.get("kind", "box")
    bbox = [tuple(b) for b in spec["bbox"]]
    resolution = spec["resolution"]
    if kind == "box":
        dom = Domain.box(bbox, resolution)
    elif kind == "ball":
        dom = Domain.ball(bbox, resolution)
    elif kind == "mask":
        mask_field = read_field_csv(os.path.join(base_dir, spec["mask"]))
        dom = Domain.from_mask(bbox, mask_field.values != 0.0)
    else:
        raise ValueError(f"unknown domain kind {kind!r}")
    delta = spec.get("delta")
    if delta:
        f = read_field_csv(os.path.join(base_dir, delta), dom)
        dom = dom.with_delta((f.values == 0.0) & dom.inside_mask)
    gamma = spec.get("gamma")
    if gamma:
        f = read_field_csv(os.path.join(base_dir, gamma), dom)
        dom = dom.with_gamma((f.values != 0.0) & ~dom.inside_mask)
    return dom
