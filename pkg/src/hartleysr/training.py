"""Frequency-domain losses and clamped mini-batch gradient descent."""

import enum
import logging
import time
from dataclasses import dataclass

import numpy as np

from ._validation import check_plane, check_same_shape
from .network import NetworkArch, NetworkParams, backward, forward, init_params, symmetrize_weights

logger = logging.getLogger(__name__)


class LossKind(str, enum.Enum):
    L1 = "l1"
    L2 = "l2"
    EXP_L2 = "exp_l2"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        aliases = {"expl2": "exp_l2"}
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            raise ValueError(f"unknown loss kind {value!r}") from None


class TrainingDivergenceError(RuntimeError):
    """Raised when a loss or gradient becomes non-finite.

    ``last_good`` holds the most recent finite parameters, ``iteration`` the
    step at which training stopped.
    """

    def __init__(self, message, last_good=None, iteration=None):
        super().__init__(message)
        self.last_good = last_good
        self.iteration = iteration


@dataclass
class TrainingConfig:
    loss_kind: LossKind = LossKind.L2
    beta: float = 0.01
    theta: float = 1e3
    gamma: float = 1e-5
    batch_size: int = 1
    max_iters: int = 1000
    seed: int = 0
    train_height: int = 96
    train_width: int = 96
    upscale_factor: int = 2
    tie_symmetric_weights: bool = False
    intensity_scale: float = 255.0

    def __post_init__(self):
        self.loss_kind = LossKind.parse(self.loss_kind)
        if not self.theta > 0:
            raise ValueError("theta must be > 0")
        if not self.gamma >= 0:
            raise ValueError("gamma must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")
        if self.upscale_factor < 2:
            raise ValueError("upscale_factor must be >= 2")
        if not self.intensity_scale > 0:
            raise ValueError("intensity_scale must be > 0")


@dataclass
class TrainingSample:
    """Network input ``F1`` and target ``I``, both Hartley coefficients."""

    input_freq: np.ndarray
    target_freq: np.ndarray

    def __post_init__(self):
        self.input_freq = check_plane(self.input_freq, "input_freq")
        self.target_freq = check_plane(self.target_freq, "target_freq")
        check_same_shape(self.input_freq, self.target_freq, names=("input_freq", "target_freq"))


def frequency_distance(shape):
    """Circular L1 distance of each coefficient from DC."""
    rows, cols = shape
    r = np.arange(rows)
    c = np.arange(cols)
    return np.minimum(r, rows - r)[:, None] + np.minimum(c, cols - c)[None, :]


def loss_and_grad(I_star, I, loss_kind=LossKind.L2, beta=0.01):
    """Loss between prediction ``I_star`` and target ``I`` and its gradient.

    ``l1``: sum |I - I*|; ``l2``: sum (I - I*)^2; ``exp_l2``: the l2 terms
    weighted by ``exp(beta * d)`` with ``d`` the circular distance from DC.
    ``loss_kind`` may also be a :class:`TrainingConfig`.
    """
    if isinstance(loss_kind, TrainingConfig):
        loss_kind, beta = loss_kind.loss_kind, loss_kind.beta
    kind = LossKind.parse(loss_kind)
    I_star = check_plane(I_star, "I_star")
    I = check_plane(I, "I")
    check_same_shape(I_star, I, names=("I_star", "I"))
    diff = I_star - I
    if kind is LossKind.L1:
        return float(np.sum(np.abs(diff))), np.sign(diff)
    if kind is LossKind.L2:
        return float(np.sum(diff * diff)), 2.0 * diff
    weight = np.exp(beta * frequency_distance(diff.shape))
    return float(np.sum(weight * diff * diff)), 2.0 * weight * diff


def residual_compose(P, F1):
    P = check_plane(P, "P")
    F1 = check_plane(F1, "F1")
    check_same_shape(P, F1, names=("P", "F1"))
    return P + F1


def sgd_step(params, grads, cfg):
    """Clamp every gradient entry to [-theta, theta], then step by -gamma.

    Each parameter therefore moves by at most ``gamma * theta``.
    """
    new = []
    for p, g in zip(params.tensors(), grads.tensors()):
        if p.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        if not np.all(np.isfinite(g)):
            raise TrainingDivergenceError("non-finite gradient", last_good=params)
        new.append(p - cfg.gamma * np.clip(g, -cfg.theta, cfg.theta))
    return NetworkParams(*new)


def sample_loss_and_grads(params, sample, cfg):
    I_star, trace = forward(sample.input_freq, params)
    loss, g = loss_and_grad(I_star, sample.target_freq, cfg.loss_kind, cfg.beta)
    grads, _ = backward(trace, params, g)
    return loss, grads


def evaluate_loss(params, dataset, cfg):
    """Mean per-sample loss of ``params`` over ``dataset``."""
    total = 0.0
    for sample in dataset:
        I_star, _ = forward(sample.input_freq, params)
        total += loss_and_grad(I_star, sample.target_freq, cfg.loss_kind, cfg.beta)[0]
    return total / len(dataset)


def _rescale(params, scale):
    """Params of the same network acting on inputs multiplied by ``scale``.

    The network is affine in its input, so only the biases change.
    """
    out = params.copy()
    out.B *= scale
    return out


def _batch_loss_and_grads(params, dataset, batch, cfg):
    loss = 0.0
    acc = None
    # fixed summation order keeps runs bit-identical
    for idx in sorted(batch):
        sample_loss, grads = sample_loss_and_grads(params, dataset[idx], cfg)
        loss += sample_loss
        if acc is None:
            acc = grads
        else:
            for a, g in zip(acc.tensors(), grads.tensors()):
                a += g
    for a in acc.tensors():
        a /= len(batch)
    return loss / len(batch), acc


def train(dataset, arch, cfg, callbacks=(), params=None, checkpoint=None,
          checkpoint_every=0, validation=None, validate_every=0):
    """Mini-batch gradient descent with clamped gradients.

    Each iteration draws ``batch_size`` samples uniformly with replacement,
    averages their gradients in sample-index order and applies :func:`sgd_step`.

    Optimisation runs on maps multiplied by ``cfg.intensity_scale`` (255
    puts ``theta`` and ``gamma`` in 8-bit intensity units); the returned
    parameters always act on [0, 1] data, and reported losses are in [0, 1]
    units too.

    Every callback is called as ``cb(iteration, loss, elapsed_ms)`` with the
    batch loss measured before the step. ``checkpoint(iteration, params)``
    runs every ``checkpoint_every`` iterations. When ``validation`` samples
    are given, their mean loss is measured every ``validate_every``
    iterations (and at the end) and the best parameters seen are returned.
    """
    dataset = list(dataset)
    if not dataset:
        raise ValueError("dataset is empty")
    for i, s in enumerate(list(dataset) + list(validation or [])):
        if s.input_freq.shape != arch.shape:
            raise ValueError(f"sample {i} has shape {s.input_freq.shape}, network is {arch.shape}")
    if params is None:
        params = init_params(arch, seed=cfg.seed, tie_symmetric_weights=cfg.tie_symmetric_weights)
    elif params.arch != arch:
        raise ValueError(f"params architecture {params.arch} != {arch}")

    scale = cfg.intensity_scale
    loss_unit = scale if cfg.loss_kind is LossKind.L1 else scale * scale
    scaled = [TrainingSample(s.input_freq * scale, s.target_freq * scale) for s in dataset]
    params = _rescale(params, scale)

    best, best_loss = None, np.inf
    if validation:
        validate_every = validate_every or max(cfg.max_iters // 10, 1)

    def validate(p):
        nonlocal best, best_loss
        unscaled = _rescale(p, 1.0 / scale)
        val_loss = evaluate_loss(unscaled, validation, cfg)
        if val_loss < best_loss:
            best, best_loss = unscaled, val_loss
        return val_loss

    if validation:
        validate(params)

    rng = np.random.default_rng(cfg.seed)
    start = time.perf_counter()
    for it in range(cfg.max_iters):
        batch = rng.integers(0, len(scaled), size=cfg.batch_size)
        loss, grads = _batch_loss_and_grads(params, scaled, batch, cfg)
        if not np.isfinite(loss):
            raise TrainingDivergenceError(
                f"non-finite loss at iteration {it}",
                last_good=_rescale(params, 1.0 / scale), iteration=it,
            )
        if cfg.tie_symmetric_weights:
            grads.W = symmetrize_weights(grads.W)
        try:
            params = sgd_step(params, grads, cfg)
        except TrainingDivergenceError as exc:
            exc.last_good = _rescale(exc.last_good, 1.0 / scale)
            exc.iteration = it
            raise
        elapsed_ms = (time.perf_counter() - start) * 1e3
        for cb in callbacks:
            cb(it, loss / loss_unit, elapsed_ms)
        done = it + 1
        if checkpoint is not None and checkpoint_every and done % checkpoint_every == 0:
            checkpoint(done, _rescale(params, 1.0 / scale))
        if validation and done % validate_every == 0:
            val_loss = validate(params)
            logger.debug("iteration %d validation loss %.6g", done, val_loss)

    if validation:
        validate(params)
        return best
    return _rescale(params, 1.0 / scale)


def arch_from_config(cfg, num_layers=6, kernels_per_layer=5, half_width=5):
    return NetworkArch(num_layers, kernels_per_layer, half_width, cfg.train_height, cfg.train_width)
