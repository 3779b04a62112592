"""Statistical shape priors over signed distance functions.

Training masks are embedded as signed distance fields (negative inside the
object), a PCA over the stack gives a mean field plus orthonormal variation
modes, and new shapes are synthesized as mean + modes @ coefficients. A rigid
pose (scale, rotation, translation) warps a synthesized shape onto the image
grid.
"""

import struct
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import field

SMDL_MAGIC = b"SMDL"

# Default rigid-scale bounds; deliberately tighter than a degenerate [0, 255].
TAU_MIN_DEFAULT = 0.25
TAU_MAX_DEFAULT = 4.0


def as_mask(data) -> np.ndarray:
    """Validate a boolean object mask: 2D, with both inside and outside pixels."""
    m = np.asarray(data, dtype=bool)
    if m.ndim != 2:
        raise ValueError(f"mask must be 2D, got shape {m.shape}")
    if not m.any() or m.all():
        raise ValueError("degenerate mask: needs at least one inside and one outside pixel")
    return m


def _edt_1d_sq(f: np.ndarray) -> np.ndarray:
    """Lower-envelope 1D squared distance transform along the last axis.

    ``f`` holds per-site squared costs (0 at sites, a large finite sentinel
    elsewhere); returns min over j of f[j] + (i - j)^2 for every i.
    """
    n = f.shape[-1]
    out = np.empty_like(f)
    for r in range(f.shape[0]):
        row = f[r]
        v = np.empty(n, dtype=np.intp)      # parabola sites
        z = np.empty(n + 1, dtype=np.float64)  # envelope breakpoints
        k = 0
        v[0] = 0
        z[0] = -np.inf
        z[1] = np.inf
        for q in range(1, n):
            s = ((row[q] + q * q) - (row[v[k]] + v[k] * v[k])) / (2 * q - 2 * v[k])
            while s <= z[k]:
                k -= 1
                s = ((row[q] + q * q) - (row[v[k]] + v[k] * v[k])) / (2 * q - 2 * v[k])
            k += 1
            v[k] = q
            z[k] = s
            z[k + 1] = np.inf
        k = 0
        for q in range(n):
            while z[k + 1] < q:
                k += 1
            out[r, q] = (q - v[k]) ** 2 + row[v[k]]
    return out


def edt_sq(sites: np.ndarray) -> np.ndarray:
    """Exact squared Euclidean distance to the nearest True pixel (two separable passes)."""
    sites = np.asarray(sites, dtype=bool)
    if not sites.any():
        raise ValueError("no sites for distance transform")
    h, w = sites.shape
    # finite sentinel larger than any attainable squared distance keeps the
    # envelope arithmetic free of inf - inf
    f = np.where(sites, 0.0, 2.0 * (h * h + w * w) + 1.0)
    d = _edt_1d_sq(f)           # along x
    d = _edt_1d_sq(d.T).T       # along y
    return d


def sdf_from_mask(m) -> np.ndarray:
    """Signed Euclidean distance field of a mask, negative inside.

    The zero level set sits halfway between adjacent inside/outside pixels
    (half-pixel offset off the exact nearest-opposite-pixel distance), so
    complementing the mask exactly negates the result.
    """
    m = as_mask(m)
    d_out = np.sqrt(edt_sq(m)) - 0.5       # distance for outside pixels
    d_in = np.sqrt(edt_sq(~m)) - 0.5       # distance for inside pixels
    return np.where(m, -d_in, d_out)


def centroid_align(masks):
    """Translate each mask (nearest-integer) so its centroid is the domain center.

    Raises ValueError if any inside pixel would be shifted out of the domain.
    """
    out = []
    for m in masks:
        m = as_mask(m)
        h, w = m.shape
        ys, xs = np.nonzero(m)
        cx, cy = xs.mean(), ys.mean()
        dx = int(round((w - 1) / 2.0 - cx))
        dy = int(round((h - 1) / 2.0 - cy))
        nx = xs + dx
        ny = ys + dy
        if nx.min() < 0 or ny.min() < 0 or nx.max() >= w or ny.max() >= h:
            raise ValueError("centroid alignment would clip the mask")
        shifted = np.zeros_like(m)
        shifted[ny, nx] = True
        out.append(shifted)
    return out


@dataclass
class Pose:
    """Rigid transform parameters: scale tau, rotation theta, translation (tx, ty)."""

    tau: float = 1.0
    theta: float = 0.0
    tx: float = 0.0
    ty: float = 0.0
    tau_min: float = TAU_MIN_DEFAULT
    tau_max: float = TAU_MAX_DEFAULT

    def __post_init__(self):
        if not (self.tau_min > 0 and self.tau_min <= self.tau_max):
            raise ValueError("invalid tau bounds")
        self.clamp()

    def clamp(self):
        """Project the parameters into their admissible box (theta wraps)."""
        self.tau = float(min(max(self.tau, self.tau_min), self.tau_max))
        self.theta = float((self.theta + np.pi) % (2 * np.pi) - np.pi)
        return self

    def as_vector(self) -> np.ndarray:
        return np.array([self.tau, self.theta, self.tx, self.ty])

    def replaced(self, v) -> "Pose":
        return Pose(float(v[0]), float(v[1]), float(v[2]), float(v[3]),
                    self.tau_min, self.tau_max)


def warp(f: np.ndarray, pose: Pose, outside: float,
         center_on_domain: bool = True) -> np.ndarray:
    """Resample ``f`` through the rigid map h(x) = tau*R(x - c) + c + T.

    By default c is the domain center; set ``center_on_domain=False`` for the
    literal origin-centered map h(x) = tau*R*x + T.
    """
    h, w = f.shape
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    if center_on_domain:
        cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    else:
        cx = cy = 0.0
    ct, st = np.cos(pose.theta), np.sin(pose.theta)
    dx = xs - cx
    dy = ys - cy
    hx = pose.tau * (ct * dx - st * dy) + cx + pose.tx
    hy = pose.tau * (st * dx + ct * dy) + cy + pose.ty
    return field.bilinear_sample(f, hx, hy, outside)


@dataclass
class ShapeModel:
    """PCA shape model: mean SDF, orthonormal modes, eigenvalue variances."""

    mean: np.ndarray
    modes: np.ndarray            # (p, h, w), L2-orthonormal
    variances: np.ndarray        # (p,), descending
    lambda_box: np.ndarray = dc_field(default=None)  # (p, 2)
    center_on_domain: bool = True
    degenerate: bool = False     # True when the training set had zero spread

    def __post_init__(self):
        if self.lambda_box is None:
            s = 3.0 * np.sqrt(np.maximum(self.variances, 0.0))
            self.lambda_box = np.stack([-s, s], axis=1)

    @property
    def p(self) -> int:
        return self.modes.shape[0]

    def project(self, sdf: np.ndarray) -> np.ndarray:
        """Coefficients of a field in the mode basis (after subtracting the mean)."""
        d = (sdf - self.mean).ravel()
        return self.modes.reshape(self.p, -1) @ d

    def clamp_lambda(self, lam: np.ndarray) -> np.ndarray:
        return np.clip(lam, self.lambda_box[:, 0], self.lambda_box[:, 1])


def build_shape_model(sdfs, p: int, lambda_box_scale: str = "stddev") -> ShapeModel:
    """PCA over a stack of SDFs via the N x N Gram matrix.

    ``lambda_box_scale`` selects the shape-parameter box: "stddev" gives
    +-3*sqrt(variance) per mode, "eigenvalue" the literal +-3*variance.
    """
    sdfs = [field.as_field(s) for s in sdfs]
    n = len(sdfs)
    if n < 2:
        raise ValueError("need at least 2 training shapes")
    shape = sdfs[0].shape
    if any(s.shape != shape for s in sdfs):
        raise ValueError("training SDFs must share dimensions")
    if not (1 <= p <= n - 1):
        raise ValueError(f"p must be in [1, {n - 1}], got {p}")

    stack = np.stack([s.ravel() for s in sdfs])      # (N, M)
    mean = stack.mean(axis=0)
    centered = stack - mean
    gram = centered @ centered.T
    evals, evecs = np.linalg.eigh(gram)              # ascending
    order = np.argsort(evals)[::-1][:p]
    evals = np.maximum(evals[order], 0.0)
    degenerate = bool(evals[0] <= 1e-10 * max(1.0, float(np.abs(gram).max())))

    modes = np.empty((p, stack.shape[1]))
    for k in range(p):
        u = centered.T @ evecs[:, order[k]]
        norm = np.linalg.norm(u)
        if norm <= 1e-12:
            # zero-spread direction: fall back to an arbitrary unit vector
            # orthogonal to the ones already chosen
            u = np.zeros(stack.shape[1])
            u[k] = 1.0
            for j in range(k):
                u -= (u @ modes[j]) * modes[j]
            norm = np.linalg.norm(u)
        modes[k] = u / norm

    variances = evals / n
    box = 3.0 * (np.sqrt(variances) if lambda_box_scale == "stddev" else variances)
    return ShapeModel(
        mean=mean.reshape(shape),
        modes=modes.reshape(p, *shape),
        variances=variances,
        lambda_box=np.stack([-box, box], axis=1),
        degenerate=degenerate,
    )


def synthesize_shape(model: ShapeModel, lam) -> np.ndarray:
    """Build mean + sum_i lam[i] * mode[i]; only approximately an SDF for lam != 0."""
    lam = np.asarray(lam, dtype=np.float64)
    if lam.shape != (model.p,):
        raise ValueError(f"lambda must have length {model.p}, got shape {lam.shape}")
    return model.mean + np.tensordot(lam, model.modes, axes=1)


def write_smdl(model: ShapeModel, path, n_training: int = 0) -> None:
    """Write a shape model in the SMDL binary format (bit-exact round trip)."""
    h, w = model.mean.shape
    with open(path, "wb") as fh:
        fh.write(SMDL_MAGIC)
        fh.write(struct.pack("<IIIII", 1, w, h, n_training, model.p))
        fh.write(model.mean.astype("<f8").tobytes(order="C"))
        for k in range(model.p):
            fh.write(model.modes[k].astype("<f8").tobytes(order="C"))
        fh.write(model.variances.astype("<f8").tobytes())
        cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
        fh.write(struct.pack("<ddd", 1.0 if model.center_on_domain else 0.0, cx, cy))


def read_smdl(path) -> ShapeModel:
    """Read a shape model written by :func:`write_smdl`."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != SMDL_MAGIC:
            raise ValueError(f"bad SMDL magic: {magic!r}")
        version, w, h, _n, p = struct.unpack("<IIIII", fh.read(20))
        if version != 1:
            raise ValueError(f"unsupported SMDL version {version}")
        m = w * h
        mean = np.frombuffer(fh.read(8 * m), dtype="<f8").reshape(h, w).copy()
        modes = np.stack([
            np.frombuffer(fh.read(8 * m), dtype="<f8").reshape(h, w).copy()
            for _ in range(p)
        ])
        variances = np.frombuffer(fh.read(8 * p), dtype="<f8").copy()
        center_flag, _cx, _cy = struct.unpack("<ddd", fh.read(24))
    return ShapeModel(mean=mean, modes=modes, variances=variances,
                      center_on_domain=center_flag != 0.0)
