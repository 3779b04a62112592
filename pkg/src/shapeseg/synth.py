"""Deterministic synthetic scenes: two-phase shapes, occlusions, noise.

Noise comes from a fully specified splitmix64 generator (documented below) so
renders are bit-identical across platforms and languages:

    state_{k+1} = (state_k + 0x9E3779B97F4A7C15) mod 2^64
    z = state_{k+1}; z ^= z >> 30; z *= 0xBF58476D1CE4E5B9 (mod 2^64)
    z ^= z >> 27; z *= 0x94D049BB133111EB (mod 2^64); z ^= z >> 31

Each output z maps to a uniform double in [0, 1) via (z >> 11) * 2^-53;
pairs of uniforms feed a Box-Muller transform for Gaussian samples.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

_MASK64 = (1 << 64) - 1


def splitmix64_uniforms(seed: int, count: int) -> np.ndarray:
    """``count`` uniform doubles in [0, 1) from a splitmix64 stream."""
    state = seed & _MASK64
    out = np.empty(count, dtype=np.float64)
    for i in range(count):
        state = (state + 0x9E3779B97F4A7C15) & _MASK64
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        z = z ^ (z >> 31)
        out[i] = (z >> 11) * 2.0 ** -53
    return out


def gaussian_noise(seed: int, count: int) -> np.ndarray:
    """Standard normal samples via Box-Muller over splitmix64 uniforms."""
    n_pairs = (count + 1) // 2
    u = splitmix64_uniforms(seed, 2 * n_pairs)
    u1 = np.maximum(u[0::2], 2.0 ** -53)  # guard log(0)
    u2 = u[1::2]
    r = np.sqrt(-2.0 * np.log(u1))
    z = np.empty(2 * n_pairs)
    z[0::2] = r * np.cos(2.0 * np.pi * u2)
    z[1::2] = r * np.sin(2.0 * np.pi * u2)
    return z[:count]


@dataclass
class SceneSpec:
    """Recipe for one two-phase scene.

    ``shape`` is one of
      ("disk", cx, cy, r)
      ("ellipse", cx, cy, a, b, angle)
      ("halfplane", nx, ny, offset)   -- inside where nx*x + ny*y < offset
    ``occlusion`` is None, ("arc", theta0, theta1) masking that angular wedge
    of the shape to background, or ("box", x0, y0, x1, y1).
    """

    width: int = 128
    height: int = 128
    shape: tuple = ("disk", 63.5, 63.5, 20.0)
    fg: float = 200.0
    bg: float = 50.0
    noise_std: float = 0.0
    noise_seed: int = 0
    occlusion: Optional[tuple] = None


def _shape_mask(spec: SceneSpec) -> np.ndarray:
    ys, xs = np.mgrid[0 : spec.height, 0 : spec.width].astype(np.float64)
    kind = spec.shape[0]
    if kind == "disk":
        _, cx, cy, r = spec.shape
        _check_margin(cx - r, cy - r, cx + r, cy + r, spec)
        return (xs - cx) ** 2 + (ys - cy) ** 2 < r * r
    if kind == "ellipse":
        _, cx, cy, a, b, angle = spec.shape
        ext = max(a, b)
        _check_margin(cx - ext, cy - ext, cx + ext, cy + ext, spec)
        ct, st = np.cos(angle), np.sin(angle)
        u = (xs - cx) * ct + (ys - cy) * st
        v = -(xs - cx) * st + (ys - cy) * ct
        return (u / a) ** 2 + (v / b) ** 2 < 1.0
    if kind == "halfplane":
        _, nx, ny, offset = spec.shape
        return nx * xs + ny * ys < offset
    raise ValueError(f"unknown shape kind {kind!r}")


def _check_margin(x0, y0, x1, y1, spec: SceneSpec) -> None:
    if x0 < 2 or y0 < 2 or x1 > spec.width - 3 or y1 > spec.height - 3:
        raise ValueError("shape does not fit inside the domain with a 2 px margin")


def _occlusion_mask(spec: SceneSpec) -> np.ndarray:
    """Pixels whose image value is forced to background (truth unaffected)."""
    occ = np.zeros((spec.height, spec.width), dtype=bool)
    if spec.occlusion is None:
        return occ
    ys, xs = np.mgrid[0 : spec.height, 0 : spec.width].astype(np.float64)
    kind = spec.occlusion[0]
    if kind == "arc":
        _, t0, t1 = spec.occlusion
        cx, cy = spec.shape[1], spec.shape[2]
        ang = np.arctan2(ys - cy, xs - cx)
        span = (t1 - t0) % (2 * np.pi)
        rel = (ang - t0) % (2 * np.pi)
        return rel < span
    if kind == "box":
        _, x0, y0, x1, y1 = spec.occlusion
        return (xs >= x0) & (xs < x1) & (ys >= y0) & (ys < y1)
    raise ValueError(f"unknown occlusion kind {kind!r}")


def render(spec: SceneSpec):
    """Render (image, truth_mask); the truth is the un-occluded geometry."""
    truth = _shape_mask(spec)
    visible = truth & ~_occlusion_mask(spec)
    image = np.where(visible, spec.fg, spec.bg).astype(np.float64)
    if spec.noise_std > 0:
        noise = gaussian_noise(spec.noise_seed, image.size).reshape(image.shape)
        image = image + spec.noise_std * noise
    return image, truth


def ellipse_training_set(n: int, a_range, b_range, width: int, height: int,
                         seed: int = 0, jitter: float = 0.0):
    """n centered ellipse masks with semi-axes evenly spaced across the ranges.

    Deterministic by construction; ``jitter`` (off by default) adds seeded
    splitmix64 perturbations to the semi-axes.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    a_vals = np.linspace(a_range[0], a_range[1], n)
    b_vals = np.linspace(b_range[0], b_range[1], n)
    if jitter > 0:
        u = splitmix64_uniforms(seed, 2 * n)
        a_vals = a_vals + jitter * (2 * u[:n] - 1)
        b_vals = b_vals + jitter * (2 * u[n:] - 1)
    cx, cy = (width - 1) / 2.0, (height - 1) / 2.0
    masks = []
    for a, b in zip(a_vals, b_vals):
        spec = SceneSpec(width=width, height=height,
                         shape=("ellipse", cx, cy, float(a), float(b), 0.0))
        masks.append(_shape_mask(spec))
    return masks


# flat key=value serialization, shared with the run-config format

def scene_to_kv(spec: SceneSpec) -> str:
    lines = [
        f"width={spec.width}",
        f"height={spec.height}",
        "shape=" + ",".join(str(v) for v in spec.shape),
        f"fg={spec.fg!r}",
        f"bg={spec.bg!r}",
        f"noise_std={spec.noise_std!r}",
        f"noise_seed={spec.noise_seed}",
    ]
    if spec.occlusion is not None:
        lines.append("occlusion=" + ",".join(str(v) for v in spec.occlusion))
    return "\n".join(lines) + "\n"


def scene_from_kv(text: str) -> SceneSpec:
    kv = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"malformed scene line: {raw!r}")
        key, val = line.split("=", 1)
        kv[key.strip()] = val.strip()

    def parse_tuple(s):
        parts = s.split(",")
        return (parts[0],) + tuple(float(p) for p in parts[1:])

    spec = SceneSpec(
        width=int(kv.get("width", 128)),
        height=int(kv.get("height", 128)),
        shape=parse_tuple(kv["shape"]) if "shape" in kv else SceneSpec.shape,
        fg=float(kv.get("fg", 200.0)),
        bg=float(kv.get("bg", 50.0)),
        noise_std=float(kv.get("noise_std", 0.0)),
        noise_seed=int(kv.get("noise_seed", 0)),
        occlusion=parse_tuple(kv["occlusion"]) if "occlusion" in kv else None,
    )
    return spec
