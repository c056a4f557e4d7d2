"""Deterministic procedural generator of labeled synthetic face images.

Identity parameters shape the durable geometry of a face (head aspect,
eye placement, tone); expression parameters shape per-shot variation
(mouth curvature, eye openness, tilt, lighting). Both are sampled
uniformly within fixed ranges from seeded PRNGs, so a dataset is a pure
function of its seed.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .errors import ImageTooSmallError, InvalidInputError
from .imaging import FaceImage, load_pgm, save_pgm

MIN_RENDER_SIDE = 32

IDENTITY_RANGES = {
    "face_aspect": (0.75, 1.0),
    "eye_separation": (0.28, 0.42),
    "eye_height": (0.35, 0.45),
    "nose_length": (0.15, 0.30),
    "mouth_width": (0.25, 0.45),
    "brow_thickness": (0.01, 0.04),
    "base_tone": (0.35, 0.75),
}

EXPRESSION_RANGES = {
    "mouth_curvature": (-1.0, 1.0),
    "eye_openness": (0.2, 1.0),
    "head_tilt": (-0.15, 0.15),
    "illumination": (0.85, 1.15),
}

BACKGROUND = 0.12


def _check_ranges(obj, ranges):
    for name, (lo, hi) in ranges.items():
        v = getattr(obj, name)
        if not (lo <= v <= hi):
            raise InvalidInputError(f"{name}={v} outside [{lo}, {hi}]")


@dataclass(frozen=True)
class IdentityParams:
    """Durable facial geometry; each field confined to its IDENTITY_RANGES band."""

    face_aspect: float
    eye_separation: float
    eye_height: float
    nose_length: float
    mouth_width: float
    brow_thickness: float
    base_tone: float

    def __post_init__(self):
        _check_ranges(self, IDENTITY_RANGES)


@dataclass(frozen=True)
class ExpressionParams:
    """Per-shot variation; defaults are the midpoints of EXPRESSION_RANGES."""

    mouth_curvature: float = 0.0
    eye_openness: float = 0.6
    head_tilt: float = 0.0
    illumination: float = 1.0

    def __post_init__(self):
        _check_ranges(self, EXPRESSION_RANGES)


@dataclass(frozen=True)
class LabeledImage:
    """A rendered face together with the ground truth that produced it."""

    image: FaceImage
    label: str
    identity: IdentityParams
    expression: ExpressionParams
    sample_id: str


def _sample_params(cls, ranges, rng: np.random.Generator):
    values = {}
    for f in fields(cls):
        lo, hi = ranges[f.name]
        values[f.name] = float(rng.uniform(lo, hi))
    return cls(**values)


def gen_identity(seed: int) -> IdentityParams:
    """Sample identity geometry uniformly within ranges; deterministic in seed."""
    return _sample_params(IdentityParams, IDENTITY_RANGES, np.random.default_rng(seed))


def gen_expression(rng: np.random.Generator) -> ExpressionParams:
    """Sample a per-shot expression from an already-seeded generator."""
    return _sample_params(ExpressionParams, EXPRESSION_RANGES, rng)


def _ellipse_mask(x, y, cx, cy, rx, ry, feather):
    """Soft-edged ellipse coverage in [0,1]; feather is the edge width in f-units."""
    f = ((x - cx) / rx) ** 2 + ((y - cy) / ry) ** 2
    return np.clip((1.0 - f) / feather + 0.5, 0.0, 1.0)


def _band_mask(d, half_width, feather):
    """Soft band around d == 0 with the given half width."""
    return np.clip((half_width - np.abs(d)) / feather + 0.5, 0.0, 1.0)


def render(identity: IdentityParams, expression: ExpressionParams, side: int) -> FaceImage:
    """Rasterize a face at side x side pixels.

    Geometry lives in a unit square with y growing downward; the whole
    face is rotated by head_tilt about the image center, intensities are
    scaled by illumination and clamped to [0, 1].
    """
    if side < MIN_RENDER_SIDE:
        raise ImageTooSmallError(f"render side {side} below minimum {MIN_RENDER_SIDE}")

    px = 1.0 / side
    u, v = np.meshgrid(
        (np.arange(side) + 0.5) * px, (np.arange(side) + 0.5) * px, indexing="xy"
    )
    # Rotate the sampling grid by -tilt: the rendered face appears tilted by +tilt.
    ct, st = np.cos(expression.head_tilt), np.sin(expression.head_tilt)
    du, dv = u - 0.5, v - 0.5
    x = ct * du + st * dv + 0.5
    y = -st * du + ct * dv + 0.5

    tone = identity.base_tone
    img = np.full((side, side), BACKGROUND)

    # Head: ellipse whose width tracks face_aspect.
    head_ry = 0.44
    head_rx = head_ry * identity.face_aspect
    feather = 2.5 * px
    head = _ellipse_mask(x, y, 0.5, 0.52, head_rx, head_ry, feather / head_rx)
    img = img + head * (tone - img)

    def paint(mask, value):
        nonlocal img
        img = img + mask * (value - img)

    # Eyes: dark ellipses; openness scales the vertical radius only.
    eye_dx = identity.eye_separation / 2.0
    eye_y = identity.eye_height
    eye_rx = 0.055
    eye_ry = 0.004 + 0.038 * expression.eye_openness
    eye_tone = tone * 0.25
    for cx in (0.5 - eye_dx, 0.5 + eye_dx):
        paint(_ellipse_mask(x, y, cx, eye_y, eye_rx, eye_ry, feather / eye_rx), eye_tone)

    # Brows: horizontal bars above the eyes.
    brow_y = eye_y - 0.075
    brow_half = identity.brow_thickness
    brow_tone = tone * 0.35
    for cx in (0.5 - eye_dx, 0.5 + eye_dx):
        in_x = _band_mask(x - cx, 0.075, feather)
        in_y = _band_mask(y - brow_y, brow_half, feather)
        paint(in_x * in_y, brow_tone)

    # Nose: thin vertical line below eye level.
    nose_top = eye_y + 0.05
    nose_len = identity.nose_length * 0.6
    in_x = _band_mask(x - 0.5, 0.009, feather)
    in_y = _band_mask(y - (nose_top + nose_len / 2.0), nose_len / 2.0, feather)
    paint(in_x * in_y, tone * 0.55)

    # Mouth: thick curve; positive curvature lowers the center (a smile
    # with corners up in image coordinates), negative raises it.
    mouth_y = 0.78
    half_w = identity.mouth_width / 2.0
    s = (x - 0.5) / half_w
    curve_y = mouth_y + 0.05 * expression.mouth_curvature * (0.5 - s**2)
    along = np.clip((1.0 - np.abs(s)) * half_w / feather + 0.5, 0.0, 1.0)
    across = _band_mask(y - curve_y, 0.013, feather)
    paint(along * across, tone * 0.3)

    img = np.clip(img * expression.illumination, 0.0, 1.0)
    return FaceImage(img)


def gen_dataset(
    num_identities: int = 2,
    samples_per_identity: int = 100,
    side: int = 64,
    seed: int = 7,
) -> list[LabeledImage]:
    """Generate a labeled dataset, deterministic in seed.

    Labels are "id00".."idNN"; each sample draws its own expression from
    the master stream while identity geometry is fixed per label.
    """
    if num_identities < 2:
        raise InvalidInputError("need at least 2 identities")
    if samples_per_identity < 2:
        raise InvalidInputError("need at least 2 samples per identity")
    rng = np.random.default_rng(seed)
    identity_seeds = rng.integers(0, 2**63 - 1, size=num_identities)
    out = []
    for k in range(num_identities):
        label = f"id{k:02d}"
        identity = gen_identity(int(identity_seeds[k]))
        for j in range(samples_per_identity):
            expression = gen_expression(rng)
            out.append(
                LabeledImage(
                    image=render(identity, expression, side),
                    label=label,
                    identity=identity,
                    expression=expression,
                    sample_id=f"{label}-s{j:03d}",
                )
            )
    return out


def save_dataset(samples: list[LabeledImage], directory) -> Path:
    """Write PGM files plus manifest.json; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = []
    for s in samples:
        fname = f"{s.sample_id}.pgm"
        save_pgm(s.image, directory / fname)
        manifest.append(
            {
                "sample_id": s.sample_id,
                "label": s.label,
                "file": fname,
                "identity": asdict(s.identity),
                "expression": asdict(s.expression),
            }
        )
    path = directory / "manifest.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def load_dataset(directory) -> list[LabeledImage]:
    """Read back a dataset written by save_dataset."""
    directory = Path(directory)
    with open(directory / "manifest.json") as fh:
        manifest = json.load(fh)
    out = []
    for entry in manifest:
        out.append(
            LabeledImage(
                image=load_pgm(directory / entry["file"]),
                label=entry["label"],
                identity=IdentityParams(**entry["identity"]),
                expression=ExpressionParams(**entry["expression"]),
                sample_id=entry["sample_id"],
            )
        )
    return out
