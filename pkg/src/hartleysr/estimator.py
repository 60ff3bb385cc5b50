"""scikit-learn style wrappers around the transform and the network."""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_planes
from .hartley import dht2
from .imaging import psnr, super_resolve, super_resolve_tiled
from .network import NetworkArch
from .training import TrainingConfig, TrainingSample, train


class HartleyTransform(TransformerMixin, BaseEstimator):
    """Stateless transformer mapping planes to Hartley coefficients and back.

    The transform is its own inverse, so ``inverse_transform`` is the same
    operation as ``transform``.
    """

    def fit(self, X, y=None):
        X = check_planes(X)
        self.plane_shape_ = X.shape[1:]
        return self

    def transform(self, X):
        X = check_planes(X)
        return np.stack([dht2(x) for x in X])

    def inverse_transform(self, X):
        return self.transform(X)


class HartleySR(RegressorMixin, BaseEstimator):
    """Frequency-domain residual super-resolution network.

    ``X`` holds bicubic-upscaled low-resolution planes and ``y`` the matching
    ground-truth planes, both of shape (n_samples, rows, cols) in [0, 1].
    The network is bound to the training resolution; :meth:`predict`
    tiles planes of any other size.

    Parameters
    ----------
    num_layers, kernels_per_layer, half_width : int
        Network depth ``L``, branches per layer ``K`` and smoothing kernel
        half-width ``N`` (kernels are (2N+1) x (2N+1)).
    loss : {"l1", "l2", "exp_l2"}
    beta : float
        Decay rate of the exp_l2 frequency weighting.
    theta, gamma : float
        Gradient clamp bound and learning rate.
    batch_size, max_iter : int
    intensity_scale : float
        Intensity units in which ``theta`` and ``gamma`` are expressed.
    validation_fraction : float
        Fraction of the training pairs held out for best-checkpoint
        selection. 0 disables it.
    tile_overlap : int
        Blend band used by :meth:`predict` on off-size planes.
    random_state : int
    tie_symmetric_weights : bool
    """

    def __init__(self, num_layers=6, kernels_per_layer=5, half_width=5, loss="l2",
                 beta=0.01, theta=1e3, gamma=1e-5, batch_size=1, max_iter=1000,
                 intensity_scale=255.0, validation_fraction=0.0, tile_overlap=16,
                 random_state=0, tie_symmetric_weights=False):
        self.num_layers = num_layers
        self.kernels_per_layer = kernels_per_layer
        self.half_width = half_width
        self.loss = loss
        self.beta = beta
        self.theta = theta
        self.gamma = gamma
        self.batch_size = batch_size
        self.max_iter = max_iter
        self.intensity_scale = intensity_scale
        self.validation_fraction = validation_fraction
        self.tile_overlap = tile_overlap
        self.random_state = random_state
        self.tie_symmetric_weights = tie_symmetric_weights

    def _training_config(self, shape):
        return TrainingConfig(
            loss_kind=self.loss, beta=self.beta, theta=self.theta, gamma=self.gamma,
            batch_size=self.batch_size, max_iters=self.max_iter, seed=self.random_state,
            train_height=shape[0], train_width=shape[1],
            tie_symmetric_weights=self.tie_symmetric_weights,
            intensity_scale=self.intensity_scale,
        )

    def fit(self, X, y, params=None):
        X = check_planes(X, "X")
        y = check_planes(y, "y")
        if X.shape != y.shape:
            raise ValueError(f"X {X.shape} and y {y.shape} differ in shape")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must be in [0, 1)")
        shape = X.shape[1:]
        arch = NetworkArch(self.num_layers, self.kernels_per_layer, self.half_width, *shape)
        cfg = self._training_config(shape)
        samples = [TrainingSample(dht2(a), dht2(b)) for a, b in zip(X, y)]

        validation = None
        n_val = int(round(self.validation_fraction * len(samples)))
        if n_val:
            order = np.random.default_rng(self.random_state).permutation(len(samples))
            validation = [samples[i] for i in order[:n_val]]
            samples = [samples[i] for i in order[n_val:]]

        self.loss_curve_ = []
        self.params_ = train(
            samples, arch, cfg, params=params, validation=validation,
            callbacks=[lambda it, loss, ms: self.loss_curve_.append(loss)],
        )
        self.arch_ = arch
        self.n_iter_ = cfg.max_iters
        return self

    def predict(self, X):
        check_is_fitted(self, "params_")
        X = check_planes(X, "X")
        if X.shape[1:] == self.arch_.shape:
            return np.stack([super_resolve(x, self.params_) for x in X])
        return np.stack([super_resolve_tiled(x, self.params_, self.tile_overlap) for x in X])

    def score(self, X, y, sample_weight=None):
        """Mean PSNR (dB) of the predictions against ``y``."""
        y = check_planes(y, "y")
        pred = self.predict(X)
        values = np.array([psnr(p, t) for p, t in zip(pred, y)])
        return float(np.average(values, weights=sample_weight))
