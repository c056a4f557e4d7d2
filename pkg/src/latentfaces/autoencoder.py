"""Fully-connected autoencoder with a fixed 64-wide latent bottleneck.

Dense layers only: tanh hidden activations, a linear latent layer, and a
sigmoid output so reconstructions stay in (0, 1). Training is plain
mini-batch gradient descent with momentum; everything is seeded, so a
trained model is a pure function of (architecture seed, data, config).
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DivergenceError,
    FormatError,
    InsufficientDataError,
    InvalidArchitectureError,
    InvalidInputError,
    InvalidLatentError,
    ModelTooLargeError,
    ShapeError,
)
from .imaging import FaceImage

LATENT_DIM = 64
MODEL_MAGIC = b"LF01"
SUPPORTED_SIDES = (64, 128, 256)
DEFAULT_HIDDEN = {64: [512, 128], 128: [1024, 256], 256: [2048, 512]}

MOMENTUM = 0.9
GRADCHECK_MAX_PARAMS = 10_000
GRADCHECK_EPS_RANGE = (1e-6, 1e-3)


def _activate(name: str, z: np.ndarray) -> np.ndarray:
    if name == "tanh":
        return np.tanh(z)
    if name == "linear":
        return z
    if name == "sigmoid":
        return 1.0 / (1.0 + np.exp(-z))
    raise InvalidArchitectureError(f"unknown activation {name!r}")


def _activate_deriv(name: str, a: np.ndarray) -> np.ndarray:
    """Derivative expressed through the activation output a."""
    if name == "tanh":
        return 1.0 - a**2
    if name == "linear":
        return np.ones_like(a)
    if name == "sigmoid":
        return a * (1.0 - a)
    raise InvalidArchitectureError(f"unknown activation {name!r}")


@dataclass
class Layer:
    in_size: int
    out_size: int
    activation: str
    weights: np.ndarray  # (out_size, in_size)
    bias: np.ndarray  # (out_size,)
    kind: str = "dense"


@dataclass
class AutoencoderModel:
    input_side: int
    encoder: list[Layer]
    decoder: list[Layer]

    @property
    def layers(self) -> list[Layer]:
        return self.encoder + self.decoder

    @property
    def input_pixels(self) -> int:
        return self.encoder[0].in_size

    def param_count(self) -> int:
        return sum(l.weights.size + l.bias.size for l in self.layers)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 60
    batch_size: int = 16
    learning_rate: float = 0.03
    seed: int = 7
    validation_fraction: float = 0.0

    def __post_init__(self):
        if self.epochs < 1:
            raise InvalidInputError("epochs must be >= 1")
        if self.batch_size < 1:
            raise InvalidInputError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise InvalidInputError("learning_rate must be positive")
        if not (0.0 <= self.validation_fraction < 0.5):
            raise InvalidInputError("validation_fraction must be in [0, 0.5)")


def _glorot_layer(in_size: int, out_size: int, activation: str, rng) -> Layer:
    limit = np.sqrt(6.0 / (in_size + out_size))
    w = rng.uniform(-limit, limit, size=(out_size, in_size))
    return Layer(in_size, out_size, activation, w, np.zeros(out_size))


def build_model(input_pixels: int, hidden_sizes: list[int], input_side: int, seed: int) -> AutoencoderModel:
    """Symmetric dense autoencoder around a 64-wide linear latent layer.

    The encoder narrows input_pixels through hidden_sizes (tanh) to the
    latent layer; the decoder mirrors it, ending in a sigmoid layer back
    to input_pixels.
    """
    sizes = [input_pixels, *hidden_sizes, LATENT_DIM]
    # Hidden sizes must shrink strictly toward the latent width. Toy models
    # with fewer input pixels than the latent (harness-sized) skip the
    # input-edge check since there is nothing to funnel down.
    chain = sizes if input_pixels > LATENT_DIM else sizes[1:]
    for a, b in zip(chain, chain[1:]):
        if b >= a:
            raise InvalidArchitectureError(
                f"sizes must decrease strictly toward {LATENT_DIM}: {sizes}"
            )
    rng = np.random.default_rng(seed)
    encoder = []
    for i, (a, b) in enumerate(zip(sizes, sizes[1:])):
        act = "linear" if b == LATENT_DIM else "tanh"
        encoder.append(_glorot_layer(a, b, act, rng))
    rev = sizes[::-1]
    decoder = []
    for i, (a, b) in enumerate(zip(rev, rev[1:])):
        act = "sigmoid" if b == input_pixels else "tanh"
        decoder.append(_glorot_layer(a, b, act, rng))
    return AutoencoderModel(input_side=input_side, encoder=encoder, decoder=decoder)


def init_model(input_side: int, hidden_sizes: list[int] | None = None, seed: int = 7) -> AutoencoderModel:
    """Default architecture for a supported square input side."""
    if input_side not in SUPPORTED_SIDES:
        raise InvalidArchitectureError(
            f"input_side must be one of {SUPPORTED_SIDES}, got {input_side}"
        )
    if hidden_sizes is None:
        hidden_sizes = DEFAULT_HIDDEN[input_side]
    return build_model(input_side * input_side, list(hidden_sizes), input_side, seed)


def _forward_batch(model: AutoencoderModel, x: np.ndarray) -> list[np.ndarray]:
    """Activations per layer, starting with the input batch."""
    acts = [x]
    for layer in model.layers:
        z = acts[-1] @ layer.weights.T + layer.bias
        acts.append(_activate(layer.activation, z))
    return acts


def _loss_and_grads(model: AutoencoderModel, x: np.ndarray):
    """Half squared error, averaged over the batch: J = (1/2B) sum (out - x)^2.

    Returns (J, per-layer (weight, bias) gradients). The classic 1/2 makes
    delta at the output simply diff * act'.
    """
    acts = _forward_batch(model, x)
    out = acts[-1]
    batch = x.shape[0]
    diff = out - x
    loss = float(np.sum(diff**2) / (2.0 * batch))
    delta = (1.0 / batch) * diff * _activate_deriv(model.layers[-1].activation, out)
    grads = []
    for i in range(len(model.layers) - 1, -1, -1):
        layer = model.layers[i]
        grads.append((delta.T @ acts[i], delta.sum(axis=0)))
        if i > 0:
            delta = (delta @ layer.weights) * _activate_deriv(
                model.layers[i - 1].activation, acts[i]
            )
    grads.reverse()
    return loss, grads


def _as_batch(model: AutoencoderModel, images) -> np.ndarray:
    rows = []
    for img in images:
        px = img.pixels if isinstance(img, FaceImage) else np.asarray(img, dtype=np.float64)
        if px.size != model.input_pixels:
            raise ShapeError(
                f"image has {px.size} pixels, model expects {model.input_pixels}"
            )
        rows.append(px.ravel())
    return np.stack(rows)


def train(model: AutoencoderModel, data, cfg: TrainConfig):
    """Mini-batch SGD with momentum 0.9 on reconstruction MSE.

    Returns (model, loss_history) where loss_history holds one mean
    per-pixel training loss per epoch. Shuffling, and the optional
    validation split, are seeded by cfg.seed.
    """
    if len(data) == 0:
        raise InsufficientDataError("training data is empty")
    x = _as_batch(model, data)
    rng = np.random.default_rng(cfg.seed)
    n_val = int(len(data) * cfg.validation_fraction)
    if n_val:
        order = rng.permutation(len(data))
        x = x[order[n_val:]]
    n, pixels = x.shape
    velocity = [(np.zeros_like(l.weights), np.zeros_like(l.bias)) for l in model.layers]
    history = []
    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        epoch_sse = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            loss, grads = _loss_and_grads(model, x[idx])
            # loss is J = SSE/(2*batch); history records plain per-pixel MSE
            epoch_sse += loss * 2.0 * len(idx)
            if not np.isfinite(loss):
                raise DivergenceError(epoch)
            for layer, vel, (gw, gb) in zip(model.layers, velocity, grads):
                vw, vb = vel
                vw *= MOMENTUM
                vw -= cfg.learning_rate * gw
                vb *= MOMENTUM
                vb -= cfg.learning_rate * gb
                layer.weights += vw
                layer.bias += vb
        history.append(epoch_sse / (n * pixels))
    return model, history


def encode(model: AutoencoderModel, img) -> np.ndarray:
    """Feed-forward through the encoder to the 64-d latent."""
    x = _as_batch(model, [img])
    a = x
    for layer in model.encoder:
        a = _activate(layer.activation, a @ layer.weights.T + layer.bias)
    return a[0]


def encode_many(model: AutoencoderModel, images) -> np.ndarray:
    a = _as_batch(model, images)
    for layer in model.encoder:
        a = _activate(layer.activation, a @ layer.weights.T + layer.bias)
    return a


def decode(model: AutoencoderModel, z) -> FaceImage:
    """Feed-forward through the decoder; sigmoid keeps pixels in (0, 1)."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (LATENT_DIM,):
        raise InvalidLatentError(f"latent must have {LATENT_DIM} values, got {z.shape}")
    if not np.all(np.isfinite(z)):
        raise InvalidLatentError("non-finite latent values")
    a = z[None, :]
    for layer in model.decoder:
        a = _activate(layer.activation, a @ layer.weights.T + layer.bias)
    side = model.input_side
    return FaceImage(a[0].reshape(side, side))


def reconstruct(model: AutoencoderModel, img) -> FaceImage:
    return decode(model, encode(model, img))


def gradient_check(model: AutoencoderModel, img, epsilon: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    Only sensible on tiny models; the parameter budget keeps the
    finite-difference loop exhaustive yet fast.
    """
    lo, hi = GRADCHECK_EPS_RANGE
    if not (lo <= epsilon <= hi):
        raise InvalidInputError(f"epsilon must be in [{lo}, {hi}], got {epsilon}")
    if model.param_count() > GRADCHECK_MAX_PARAMS:
        raise ModelTooLargeError(
            f"{model.param_count()} parameters exceeds {GRADCHECK_MAX_PARAMS}"
        )
    x = _as_batch(model, [img])

    def loss_at() -> float:
        acts = _forward_batch(model, x)
        return float(np.sum((acts[-1] - x) ** 2) / 2.0)

    _, grads = _loss_and_grads(model, x)
    worst = 0.0
    for layer, (gw, gb) in zip(model.layers, grads):
        for arr, grad in ((layer.weights, gw), (layer.bias, gb)):
            flat = arr.reshape(-1)
            gflat = grad.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + epsilon
                up = loss_at()
                flat[i] = orig - epsilon
                down = loss_at()
                flat[i] = orig
                numeric = (up - down) / (2.0 * epsilon)
                denom = max(abs(gflat[i]), abs(numeric), 1e-8)
                worst = max(worst, abs(gflat[i] - numeric) / denom)
    return worst


def _descriptor(model: AutoencoderModel) -> dict:
    def layers(ls):
        return [
            {"kind": l.kind, "in": l.in_size, "out": l.out_size, "activation": l.activation}
            for l in ls
        ]

    return {
        "input_side": model.input_side,
        "encoder": layers(model.encoder),
        "decoder": layers(model.decoder),
    }


def save_model(model: AutoencoderModel, path) -> None:
    """Magic "LF01", u32-length JSON descriptor, then per-layer f32 weights+bias."""
    desc = json.dumps(_descriptor(model), sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<I", len(desc)))
        fh.write(desc)
        for layer in model.layers:
            fh.write(layer.weights.astype("<f4").tobytes())
            fh.write(layer.bias.astype("<f4").tobytes())


def load_model(path) -> AutoencoderModel:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != MODEL_MAGIC:
        raise FormatError(f"bad model magic {data[:4]!r}")
    if len(data) < 8:
        raise FormatError("model file truncated before descriptor length")
    (desc_len,) = struct.unpack("<I", data[4:8])
    desc_end = 8 + desc_len
    if len(data) < desc_end:
        raise FormatError("model file truncated inside descriptor")
    try:
        desc = json.loads(data[8:desc_end].decode("utf-8"))
        input_side = int(desc["input_side"])
        specs = [(part, layer) for part in ("encoder", "decoder") for layer in desc[part]]
    except (ValueError, KeyError, TypeError) as exc:
        raise FormatError(f"malformed model descriptor: {exc}") from exc

    payload = 4 * sum(int(l["out"]) * int(l["in"]) + int(l["out"]) for _, l in specs)
    if len(data) != desc_end + payload:
        raise FormatError(
            f"model payload is {len(data) - desc_end} bytes, descriptor implies {payload}"
        )
    pos = desc_end
    parts = {"encoder": [], "decoder": []}
    for part, spec in specs:
        rows, cols = int(spec["out"]), int(spec["in"])
        w = np.frombuffer(data[pos : pos + 4 * rows * cols], dtype="<f4")
        pos += 4 * rows * cols
        b = np.frombuffer(data[pos : pos + 4 * rows], dtype="<f4")
        pos += 4 * rows
        parts[part].append(
            Layer(
                cols,
                rows,
                str(spec["activation"]),
                w.astype(np.float64).reshape(rows, cols),
                b.astype(np.float64),
                kind=str(spec.get("kind", "dense")),
            )
        )
    return AutoencoderModel(input_side=input_side, encoder=parts["encoder"], decoder=parts["decoder"])
