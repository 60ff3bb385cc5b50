"""Frequency-domain network: weighting, smoothing, additive output layer.

Each layer maps one frequency map to one frequency map through ``K``
parallel branches. A branch weights the input entrywise, adds a bias and
applies a small circular convolution over the frequency grid; the branch
outputs are summed into the layer output ``S_i``, which feeds both the next
layer and the additive output layer::

    Q_ij = F_i * W_ij + B_ij
    R_ij = Q_ij (*) C_ij            (circular, kernel (2N+1)x(2N+1))
    S_i  = sum_j R_ij,  F_{i+1} = S_i
    P    = (sum_i alpha_i S_i) * W_final
    I*   = P + F_1

Tensors are stacked numpy arrays: ``W`` and ``B`` have shape (L, K, H, W),
``C`` has shape (L, K, 2N+1, 2N+1) with the kernel centre at ``[N, N]``.
"""

from dataclasses import dataclass, field, fields

import numpy as np

from ._validation import check_plane, check_same_shape


@dataclass(frozen=True)
class NetworkArch:
    num_layers: int = 6
    kernels_per_layer: int = 5
    half_width: int = 5
    height: int = 96
    width: int = 96

    def __post_init__(self):
        if self.num_layers < 1:
            raise ValueError("num_layers must be >= 1")
        if self.kernels_per_layer < 1:
            raise ValueError("kernels_per_layer must be >= 1")
        if self.half_width < 0:
            raise ValueError("half_width must be >= 0")
        if self.height < 1 or self.width < 1:
            raise ValueError("height and width must be >= 1")
        if self.kernel_size > min(self.height, self.width):
            raise ValueError(
                f"kernel size {self.kernel_size} does not fit a "
                f"{self.height}x{self.width} map"
            )

    @property
    def kernel_size(self):
        return 2 * self.half_width + 1

    @property
    def shape(self):
        return (self.height, self.width)


@dataclass
class NetworkParams:
    """All learnable tensors. Also used to hold gradients of the same shape."""

    W: np.ndarray
    B: np.ndarray
    C: np.ndarray
    alpha: np.ndarray
    W_final: np.ndarray

    def __post_init__(self):
        for f in fields(self):
            setattr(self, f.name, np.asarray(getattr(self, f.name), dtype=np.float64))
        L, K, H, Wd = self.W.shape
        if self.B.shape != self.W.shape:
            raise ValueError(f"B shape {self.B.shape} != W shape {self.W.shape}")
        if self.C.ndim != 4 or self.C.shape[:2] != (L, K):
            raise ValueError(f"C shape {self.C.shape} inconsistent with W {self.W.shape}")
        if self.C.shape[2] != self.C.shape[3] or self.C.shape[2] % 2 == 0:
            raise ValueError(f"smoothing kernels must be odd and square, got {self.C.shape[2:]}")
        if self.alpha.shape != (L,):
            raise ValueError(f"alpha shape {self.alpha.shape} != ({L},)")
        if self.W_final.shape != (H, Wd):
            raise ValueError(f"W_final shape {self.W_final.shape} != {(H, Wd)}")

    @property
    def arch(self):
        L, K, H, Wd = self.W.shape
        return NetworkArch(L, K, (self.C.shape[2] - 1) // 2, H, Wd)

    def tensors(self):
        """Tensors in the fixed declared order (W, B, C, alpha, W_final)."""
        return [getattr(self, f.name) for f in fields(self)]

    def copy(self):
        return NetworkParams(*(t.copy() for t in self.tensors()))

    def zeros_like(self):
        return NetworkParams(*(np.zeros_like(t) for t in self.tensors()))

    def all_finite(self):
        return all(np.all(np.isfinite(t)) for t in self.tensors())

    def __eq__(self, other):
        if not isinstance(other, NetworkParams):
            return NotImplemented
        return all(np.array_equal(a, b) for a, b in zip(self.tensors(), other.tensors()))


ParamGradients = NetworkParams


@dataclass
class ForwardTrace:
    """Everything :func:`backward` needs; nothing is recomputed there."""

    layer_inputs: np.ndarray  # (L, H, W), F_i
    Q: np.ndarray  # (L, K, H, W)
    R: np.ndarray  # (L, K, H, W)
    S: np.ndarray  # (L, H, W)
    mixed: np.ndarray  # (H, W), sum_i alpha_i S_i
    P: np.ndarray  # (H, W)
    Q_spec: np.ndarray = field(repr=False)  # rfft2 of Q
    C_spec: np.ndarray = field(repr=False)  # rfft2 of grid-embedded kernels


def init_params(arch, seed=0, sigma=0.1, tie_symmetric_weights=False):
    """Near-identity initialization.

    Branch weights ``U[1-sigma, 1+sigma]``, zero biases, kernels a centre
    delta plus ``U[-0.01, 0.01]`` noise, ``alpha = 1/L`` and
    ``W_final ~ U[-0.01, 0.01]``.
    """
    rng = np.random.default_rng(seed)
    L, K, N = arch.num_layers, arch.kernels_per_layer, arch.half_width
    H, Wd = arch.shape
    W = rng.uniform(1.0 - sigma, 1.0 + sigma, size=(L, K, H, Wd))
    if tie_symmetric_weights:
        W = symmetrize_weights(W)
    B = np.zeros((L, K, H, Wd))
    C = rng.uniform(-0.01, 0.01, size=(L, K, 2 * N + 1, 2 * N + 1))
    C[:, :, N, N] += 1.0
    alpha = np.full(L, 1.0 / L)
    W_final = rng.uniform(-0.01, 0.01, size=(H, Wd))
    return NetworkParams(W, B, C, alpha, W_final)


def mirror_index(x):
    """Map entry ``(l, k)`` to ``(-l mod R, -k mod C)`` over the last two axes."""
    return np.roll(np.flip(x, axis=(-2, -1)), 1, axis=(-2, -1))


def symmetrize_weights(x):
    return 0.5 * (x + mirror_index(x))


def _embed_kernels(C, shape):
    """Place (..., 2N+1, 2N+1) kernels onto a periodic grid of ``shape``."""
    N = (C.shape[-1] - 1) // 2
    grid = np.zeros(C.shape[:-2] + tuple(shape))
    grid[..., : 2 * N + 1, : 2 * N + 1] = C
    return np.roll(grid, (-N, -N), axis=(-2, -1))


def _extract_kernels(grid, N):
    """Inverse of :func:`_embed_kernels`: read offsets -N..N from a periodic grid."""
    rolled = np.roll(grid, (N, N), axis=(-2, -1))
    return rolled[..., : 2 * N + 1, : 2 * N + 1]


def _kernel_spectra(C, shape):
    return np.fft.rfft2(_embed_kernels(C, shape))


def weighting_forward(F, W, B):
    """``Q = F * W + B`` entrywise."""
    F = check_plane(F, "F")
    W = check_plane(W, "W")
    B = check_plane(B, "B")
    check_same_shape(F, W, B, names=("F", "W", "B"))
    return F * W + B


def smoothing_forward(Q, C):
    """``R(l,k) = sum_{m,n in [-N,N]} Q(l-m mod H, k-n mod W) C(m,n)``."""
    Q = check_plane(Q, "Q")
    C = check_plane(C, "C")
    if C.shape[0] != C.shape[1] or C.shape[0] % 2 == 0:
        raise ValueError(f"kernel must be odd-sized and square, got {C.shape}")
    if C.shape[0] > min(Q.shape):
        raise ValueError(f"kernel {C.shape} does not fit map {Q.shape}")
    spec = np.fft.rfft2(Q) * _kernel_spectra(C, Q.shape)
    return np.fft.irfft2(spec, s=Q.shape)


def layer_forward(F, W, B, C):
    """Sum over the branches of one layer. ``W``, ``B``: (K, H, W); ``C``: (K, n, n)."""
    F = check_plane(F, "F")
    W = np.asarray(W, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    C = np.asarray(C, dtype=np.float64)
    if W.ndim == 2:
        W, B, C = W[None], B[None], C[None]
    if W.shape[1:] != F.shape or B.shape != W.shape or C.shape[0] != W.shape[0]:
        raise ValueError(
            f"layer shapes inconsistent: F {F.shape}, W {W.shape}, B {B.shape}, C {C.shape}"
        )
    Q = F[None] * W + B
    R = np.fft.irfft2(np.fft.rfft2(Q) * _kernel_spectra(C, F.shape), s=F.shape)
    return R.sum(axis=0)


def additive_forward(S, alpha, W_final):
    """``P = (sum_i alpha_i S_i) * W_final``."""
    S = np.asarray(S, dtype=np.float64)
    alpha = np.asarray(alpha, dtype=np.float64)
    W_final = check_plane(W_final, "W_final")
    if S.ndim != 3 or S.shape[1:] != W_final.shape:
        raise ValueError(f"S shape {S.shape} inconsistent with W_final {W_final.shape}")
    if alpha.shape != (S.shape[0],):
        raise ValueError(f"alpha has {alpha.shape} entries, expected ({S.shape[0]},)")
    return np.tensordot(alpha, S, axes=1) * W_final


def weighting_backward(dQ, F, W):
    """Gradients of ``Q = F * W + B``: returns ``(dF, dW, dB)``."""
    dQ = check_plane(dQ, "dQ")
    check_same_shape(dQ, F, W, names=("dQ", "F", "W"))
    return dQ * W, dQ * F, dQ.copy()


def smoothing_backward(dR, Q, C):
    """Gradients of the circular smoothing: returns ``(dQ, dC)``.

    ``dQ`` is ``dR`` correlated with the kernel; ``dC(m, n)`` is the
    correlation of ``dR`` with ``Q`` at offset ``(m, n)``.
    """
    dR = check_plane(dR, "dR")
    Q = check_plane(Q, "Q")
    check_same_shape(dR, Q, names=("dR", "Q"))
    C = check_plane(C, "C")
    N = (C.shape[0] - 1) // 2
    g_spec = np.fft.rfft2(dR)
    dQ = np.fft.irfft2(g_spec * np.conj(_kernel_spectra(C, Q.shape)), s=Q.shape)
    corr = np.fft.irfft2(g_spec * np.conj(np.fft.rfft2(Q)), s=Q.shape)
    return dQ, _extract_kernels(corr, N)


def additive_backward(dP, S, alpha, W_final):
    """Gradients of ``P = (sum_i alpha_i S_i) * W_final``: ``(dS, dalpha, dW_final)``."""
    dP = check_plane(dP, "dP")
    S = np.asarray(S, dtype=np.float64)
    alpha = np.asarray(alpha, dtype=np.float64)
    g_mixed = dP * W_final
    return (alpha[:, None, None] * g_mixed[None], np.einsum("lhw,hw->l", S, g_mixed),
            np.tensordot(alpha, S, axes=1) * dP)


def forward(F1, params):
    """Run the network on input frequency map ``F1``.

    Returns ``(I_star, trace)`` with ``I_star = P + F1``.
    """
    F1 = check_plane(F1, "F1")
    L, K, H, Wd = params.W.shape
    if F1.shape != (H, Wd):
        raise ValueError(f"input {F1.shape} does not match network {(H, Wd)}")

    C_spec = _kernel_spectra(params.C, (H, Wd))
    layer_inputs = np.empty((L, H, Wd))
    Q = np.empty((L, K, H, Wd))
    R = np.empty((L, K, H, Wd))
    Q_spec = np.empty((L, K) + C_spec.shape[2:], dtype=C_spec.dtype)
    S = np.empty((L, H, Wd))

    F = F1
    for i in range(L):
        layer_inputs[i] = F
        Q[i] = F[None] * params.W[i] + params.B[i]
        Q_spec[i] = np.fft.rfft2(Q[i])
        R[i] = np.fft.irfft2(Q_spec[i] * C_spec[i], s=(H, Wd))
        S[i] = R[i].sum(axis=0)
        F = S[i]

    mixed = np.tensordot(params.alpha, S, axes=1)
    P = mixed * params.W_final
    trace = ForwardTrace(layer_inputs, Q, R, S, mixed, P, Q_spec, C_spec)
    return P + F1, trace


def backward(trace, params, dloss_distar):
    """Exact gradients of a scalar loss given ``dLoss/dI*``.

    Returns ``(grads, dloss_dF1)`` where ``grads`` is a :class:`NetworkParams`
    holding the gradient of every parameter tensor.
    """
    g = check_plane(dloss_distar, "dloss_distar")
    L, K, H, Wd = params.W.shape
    if trace.S.shape != (L, H, Wd) or trace.C_spec.shape[:2] != (L, K):
        raise ValueError("trace does not match params")
    if g.shape != (H, Wd):
        raise ValueError(f"gradient {g.shape} does not match network {(H, Wd)}")
    N = (params.C.shape[-1] - 1) // 2

    grads = params.zeros_like()
    grads.W_final = trace.mixed * g
    g_mixed = params.W_final * g
    grads.alpha = np.einsum("lhw,hw->l", trace.S, g_mixed)

    carry = np.zeros((H, Wd))
    for i in reversed(range(L)):
        g_S = params.alpha[i] * g_mixed + carry
        # every branch R_ij receives the same upstream gradient g_S
        g_S_spec = np.fft.rfft2(g_S)
        g_Q = np.fft.irfft2(g_S_spec[None] * np.conj(trace.C_spec[i]), s=(H, Wd))
        corr = np.fft.irfft2(g_S_spec[None] * np.conj(trace.Q_spec[i]), s=(H, Wd))
        grads.C[i] = _extract_kernels(corr, N)
        grads.W[i] = g_Q * trace.layer_inputs[i][None]
        grads.B[i] = g_Q
        carry = np.einsum("khw,khw->hw", g_Q, params.W[i])

    return grads, g + carry
