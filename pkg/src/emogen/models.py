"""The two member architectures, the averaging ensemble, and prediction heads.

Both builders take 48x48 single-channel inputs and end in a softmax over
the class count. The emotion head averages the probability outputs of a
compact fully-convolutional network built from residual depthwise-
separable blocks and a plain 4-convolution network; the gender head uses
the former alone.
"""

from __future__ import annotations

import numpy as np

from .data import EMOTIONS, FACE_SIZE, GENDERS, EmotionLabel
from .errors import ConfigError, ShapeError
from .layers import (BatchNorm, Conv2D, Dense, GlobalAvgPool, MaxPool2D, ReLU,
                     SeparableConv2D, Softmax)
from .network import Network, ResidualBlock, Sequential
from .tensor import Tensor

MINI_XCEPTION = "mini_xception"
SIMPLE_CNN = "simple_cnn"


def _rng(seed_or_rng) -> np.random.Generator:
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)


def build_mini_xception(class_count: int, seed=0) -> Network:
    """Entry convolutions, four residual separable blocks (16/32/64/128
    filters), a class-count convolution, and global average pooling; no
    dense layer anywhere."""
    if class_count < 2:
        raise ConfigError(f"class_count must be >= 2, got {class_count}")
    rng = _rng(seed)
    spec = [{"kind": "conv2d", "filters": 8, "kernel": 3},
            {"kind": "conv2d", "filters": 8, "kernel": 3}]
    items = [
        ("conv1", Conv2D(1, 8, 3, padding="same", rng=rng)),
        ("bn1", BatchNorm(8)),
        ("relu1", ReLU()),
        ("conv2", Conv2D(8, 8, 3, padding="same", rng=rng)),
        ("bn2", BatchNorm(8)),
        ("relu2", ReLU()),
    ]
    in_ch = 8
    for i, filters in enumerate((16, 32, 64, 128), start=1):
        main = Sequential([
            ("sep1", SeparableConv2D(in_ch, filters, 3, padding="same", rng=rng)),
            ("bn1", BatchNorm(filters)),
            ("relu", ReLU()),
            ("sep2", SeparableConv2D(filters, filters, 3, padding="same", rng=rng)),
            ("bn2", BatchNorm(filters)),
            ("pool", MaxPool2D(3, 2, padding="same")),
        ])
        shortcut = Sequential([
            ("proj", Conv2D(in_ch, filters, 1, stride=2, padding="same", rng=rng)),
            ("bn", BatchNorm(filters)),
        ])
        items.append((f"block{i}", ResidualBlock(main, shortcut)))
        spec.append({"kind": "residual_sep_block", "filters": filters, "kernel": 3})
        in_ch = filters
    items += [
        ("head_conv", Conv2D(in_ch, class_count, 3, padding="same", rng=rng)),
        ("gap", GlobalAvgPool()),
        ("softmax", Softmax()),
    ]
    spec += [{"kind": "conv2d", "filters": class_count, "kernel": 3},
             {"kind": "global_avg_pool"}, {"kind": "softmax"}]
    return Network(MINI_XCEPTION, Sequential(items), class_count, spec=spec)


def build_simple_cnn4(class_count: int, seed=0) -> Network:
    """Four 3x3 convolutions (32/64/128/128 filters) with pooling after the
    first three, then global average pooling and a dense classifier."""
    if class_count < 2:
        raise ConfigError(f"class_count must be >= 2, got {class_count}")
    rng = _rng(seed)
    items = []
    spec = []
    in_ch = 1
    for i, filters in enumerate((32, 64, 128, 128), start=1):
        items.append((f"conv{i}", Conv2D(in_ch, filters, 3, padding="same", rng=rng)))
        items.append((f"relu{i}", ReLU()))
        spec.append({"kind": "conv2d", "filters": filters, "kernel": 3})
        if i <= 3:
            items.append((f"pool{i}", MaxPool2D(2, 2, padding="valid")))
            spec.append({"kind": "maxpool", "window": 2, "stride": 2})
        in_ch = filters
    items += [
        ("gap", GlobalAvgPool()),
        ("fc", Dense(128, class_count, rng=rng)),
        ("softmax", Softmax()),
    ]
    spec += [{"kind": "global_avg_pool"}, {"kind": "dense", "out": class_count},
             {"kind": "softmax"}]
    return Network(SIMPLE_CNN, Sequential(items), class_count, spec=spec)


def ensemble_average(p1: Tensor, p2: Tensor) -> Tensor:
    """Arithmetic mean of two probability tensors; rows stay on the simplex."""
    if p1.shape != p2.shape:
        raise ShapeError(f"ensemble_average: shapes {p1.shape} and {p2.shape} differ")
    return Tensor(0.5 * (p1.data + p2.data), dtype=p1.dtype)


class Model:
    """One or more member networks behind a single averaged probability head.

    Gradients flow through the average into every member, so a two-member
    model trains jointly.
    """

    def __init__(self, members: dict[str, Network]):
        if not members:
            raise ConfigError("model needs at least one member network")
        counts = {net.class_count for net in members.values()}
        if len(counts) != 1:
            raise ConfigError(f"members disagree on class count: {counts}")
        self.members = dict(members)
        self.class_count = counts.pop()

    def forward(self, x: np.ndarray, train=False):
        probs, caches = [], {}
        for name, net in self.members.items():
            p, c = net.forward(x, train=train)
            probs.append(p)
            caches[name] = c
        avg = probs[0] if len(probs) == 1 else np.mean(probs, axis=0)
        return avg, caches

    def backward(self, grad_probs, caches):
        share = grad_probs / len(self.members)
        grads = {}
        for name, net in self.members.items():
            _, g = net.backward(share, caches[name])
            for k, v in g.items():
                grads[f"{name}/{k}"] = v
        return grads

    def member_probs(self, x: np.ndarray) -> dict[str, np.ndarray]:
        return {name: net.predict_probs(x) for name, net in self.members.items()}

    def predict_probs(self, x: np.ndarray) -> np.ndarray:
        out = None
        for net in self.members.values():
            p = net.predict_probs(x)
            out = p if out is None else out + p
        return out / len(self.members)

    def named_params(self):
        out = {}
        for name, net in self.members.items():
            for k, v in net.named_params().items():
                out[f"{name}/{k}"] = v
        return out

    def named_state(self):
        out = {}
        for name, net in self.members.items():
            for k, v in net.named_state().items():
                out[f"{name}/{k}"] = v
        return out

    def param_count(self):
        return sum(net.param_count() for net in self.members.values())


def build_emotion_ensemble(seed=0) -> Model:
    rng = _rng(seed)
    return Model({MINI_XCEPTION: build_mini_xception(len(EMOTIONS), rng),
                  SIMPLE_CNN: build_simple_cnn4(len(EMOTIONS), rng)})


def build_gender_model(seed=0) -> Model:
    return Model({MINI_XCEPTION: build_mini_xception(len(GENDERS), seed)})


def _check_face(face: Tensor):
    if face.shape != (1, 1, FACE_SIZE, FACE_SIZE):
        raise ShapeError(f"expected a preprocessed (1, 1, 48, 48) face, got {face.shape}")


def predict_emotion(ensemble: Model, face: Tensor) -> tuple[EmotionLabel, np.ndarray]:
    """Averaged 7-class probabilities and the argmax label (first index wins ties)."""
    _check_face(face)
    if ensemble.class_count != len(EMOTIONS):
        raise ConfigError(f"emotion model must have 7 classes, found {ensemble.class_count}")
    probs = ensemble.predict_probs(face.data)[0]
    return EmotionLabel(int(probs.argmax())), probs


def predict_gender(model: Model, face: Tensor) -> tuple[str, np.ndarray]:
    """Two-class probabilities and the argmax name; (0.5, 0.5) ties go to index 0."""
    _check_face(face)
    if model.class_count != len(GENDERS):
        raise ConfigError(f"gender model must have 2 classes, found {model.class_count}")
    probs = model.predict_probs(face.data)[0]
    return GENDERS[int(probs.argmax())], probs
