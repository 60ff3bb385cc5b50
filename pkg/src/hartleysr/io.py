"""Model files, run configs and raw matrix dumps.

Model file layout (little-endian)::

    magic    4 bytes  b"HSRN"
    version  u16      FORMAT_VERSION
    L K N H W s       u32 each (layers, kernels/layer, kernel half-width,
                      height, width, upscale factor)
    loss     u8       0 = l1, 1 = l2, 2 = exp_l2
    tie      u8       0 or 1
    payload  float64  W, B (layer-major then kernel-major), C, alpha,
                      W_final; each row-major
"""

import csv
import logging
import os
import struct
from dataclasses import dataclass, field, fields

import numpy as np

from .network import NetworkArch, NetworkParams
from .training import LossKind, TrainingConfig

logger = logging.getLogger(__name__)

MAGIC = b"HSRN"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sH6IBB")
_LOSS_CODES = [LossKind.L1, LossKind.L2, LossKind.EXP_L2]


class ModelFormatError(ValueError):
    """Corrupt or incompatible model file."""


class ConfigError(ValueError):
    """Invalid run configuration; ``line`` is the offending line number, if any."""

    def __init__(self, message, line=None):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line


@dataclass
class ModelFile:
    params: NetworkParams
    upscale: int = 2
    loss_kind: LossKind = LossKind.L2
    tie_symmetric_weights: bool = False

    @property
    def arch(self):
        return self.params.arch


def model_to_bytes(model):
    arch = model.params.arch
    header = _HEADER.pack(
        MAGIC, FORMAT_VERSION,
        arch.num_layers, arch.kernels_per_layer, arch.half_width,
        arch.height, arch.width, model.upscale,
        _LOSS_CODES.index(LossKind.parse(model.loss_kind)),
        int(bool(model.tie_symmetric_weights)),
    )
    payload = b"".join(t.astype("<f8").tobytes(order="C") for t in model.params.tensors())
    return header + payload


def _tensor_shapes(arch):
    L, K, N = arch.num_layers, arch.kernels_per_layer, arch.half_width
    H, W = arch.shape
    n = 2 * N + 1
    return [(L, K, H, W), (L, K, H, W), (L, K, n, n), (L,), (H, W)]


def model_from_bytes(data):
    if len(data) < _HEADER.size:
        raise ModelFormatError(f"file too short for header ({len(data)} bytes)")
    magic, version, L, K, N, H, W, upscale, loss_code, tie = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ModelFormatError(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported format version {version}")
    if loss_code >= len(_LOSS_CODES) or tie > 1 or upscale < 2:
        raise ModelFormatError("invalid header fields")
    try:
        arch = NetworkArch(L, K, N, H, W)
    except ValueError as exc:
        raise ModelFormatError(f"invalid architecture in header: {exc}") from None
    shapes = _tensor_shapes(arch)
    expected = 8 * sum(int(np.prod(s)) for s in shapes)
    if len(data) - _HEADER.size != expected:
        raise ModelFormatError(
            f"payload is {len(data) - _HEADER.size} bytes, header implies {expected}"
        )
    tensors = []
    offset = _HEADER.size
    for shape in shapes:
        count = int(np.prod(shape))
        arr = np.frombuffer(data, dtype="<f8", count=count, offset=offset)
        tensors.append(arr.astype(np.float64).reshape(shape))
        offset += 8 * count
    return ModelFile(NetworkParams(*tensors), upscale, _LOSS_CODES[loss_code], bool(tie))


def save_model(path, model):
    with open(path, "wb") as fh:
        fh.write(model_to_bytes(model))


def load_model(path):
    with open(path, "rb") as fh:
        return model_from_bytes(fh.read())


def write_matrix_csv(path, matrix):
    """Write a 2D array as CSV with round-trip exact float formatting."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in matrix:
            writer.writerow([repr(float(v)) for v in row])


def read_matrix_csv(path):
    with open(path, newline="") as fh:
        return np.array([[float(v) for v in row] for row in csv.reader(fh)], dtype=np.float64)


def _parse_bool(text):
    value = text.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass
class RunConfig:
    """Flat ``key = value`` run configuration for ``hartleysr train``."""

    num_layers: int = 6
    kernels_per_layer: int = 5
    half_width: int = 5
    height: int = 96
    width: int = 96
    upscale: int = 2
    loss: str = "l2"
    beta: float = 0.01
    theta: float = 1e3
    gamma: float = 1e-5
    batch_size: int = 1
    max_iters: int = 1000
    seed: int = 0
    tie_symmetric_weights: bool = False
    intensity_scale: float = 255.0
    dataset_dir: str = None
    validation_dir: str = ""
    validate_every: int = 0
    model_out: str = "model.hsrn"
    loss_csv: str = "loss.csv"
    checkpoint_every: int = 0
    checkpoint_path: str = "checkpoint.hsrn"
    tile_overlap: int = 16
    output_dir: str = "."
    base_dir: str = field(default=".", repr=False)

    _PATH_KEYS = ("dataset_dir", "validation_dir", "model_out", "loss_csv",
                  "checkpoint_path", "output_dir")

    @property
    def arch(self):
        return NetworkArch(self.num_layers, self.kernels_per_layer, self.half_width,
                           self.height, self.width)

    def training_config(self):
        return TrainingConfig(
            loss_kind=self.loss, beta=self.beta, theta=self.theta, gamma=self.gamma,
            batch_size=self.batch_size, max_iters=self.max_iters, seed=self.seed,
            train_height=self.height, train_width=self.width,
            upscale_factor=self.upscale, tie_symmetric_weights=self.tie_symmetric_weights,
            intensity_scale=self.intensity_scale,
        )

    def path(self, key):
        value = getattr(self, key)
        if not value:
            return value
        return os.path.normpath(os.path.join(self.base_dir, value))


_REQUIRED = ("dataset_dir",)


def parse_config(text, base_dir="."):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    types = {f.name: f.type for f in fields(RunConfig) if f.name != "base_dir"}
    converters = {int: int, float: float, bool: _parse_bool, str: str,
                  "int": int, "float": float, "bool": _parse_bool, "str": str}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in types:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in values:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        try:
            values[key] = converters[types[key]](value)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {exc}", lineno) from None
    for key in _REQUIRED:
        if key not in values:
            raise ConfigError(f"missing required key {key!r}")
    for key in types:
        if key not in values:
            logger.info("config: %s not set, using default %r", key, getattr(RunConfig, key))
    cfg = RunConfig(base_dir=base_dir, **values)
    try:
        cfg.arch
        cfg.training_config()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def load_config(path):
    with open(path) as fh:
        text = fh.read()
    return parse_config(text, base_dir=os.path.dirname(os.path.abspath(path)))
