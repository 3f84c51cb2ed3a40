"""Layers with explicit forward/backward passes.

Every layer caches what its backward pass needs during forward; calling
backward without a prior forward raises ValidationError.  Activations are
(N, C, H, W) for the 2-d layers and (N, F) after Flatten.  Dtype follows
the parameters, float64 by default.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError

_MODES = ("train", "eval")


@dataclass(frozen=True)
class LayerSpec:
    """Static description of one layer, used by the profiler."""

    kind: str
    k: int | None = None
    s: int | None = None
    padding: int | None = None
    c_in: int | None = None
    c_out: int | None = None
    p: float | None = None

    def __post_init__(self):
        if self.k is not None and self.k < 1:
            raise ValidationError(f"kernel size must be >= 1, got {self.k}")
        if self.s is not None and self.s < 1:
            raise ValidationError(f"stride must be >= 1, got {self.s}")
        if self.p is not None and not 0.0 <= self.p < 1.0:
            raise ValidationError(f"dropout rate must be in [0, 1), got {self.p}")


def _check_mode(mode):
    if mode not in _MODES:
        raise ValidationError(f"mode must be one of {_MODES}, got {mode!r}")


def _need_cache(cache, kind):
    if cache is None:
        raise ValidationError(f"{kind}: backward called without a cached forward")
    return cache


def kaiming_uniform(shape, fan_in, rng):
    # He init for ReLU nets: bound = sqrt(2) * sqrt(3 / fan_in)
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Layer:
    """Base: parameterless, cache-free passthrough hooks."""

    kind = "?"

    def params(self) -> list:
        return []

    def grads(self) -> list:
        return []

    def state_tensors(self) -> list:
        """Tensors persisted by the model file (params, then buffers)."""
        return self.params()

    def spec(self) -> LayerSpec:
        return LayerSpec(kind=self.kind)

    def forward(self, x, mode="train"):
        raise NotImplementedError

    def backward(self, grad_out):
        raise NotImplementedError


def _im2col(xp, k, s, h_out, w_out):
    # (N, C, Hp, Wp) -> (N, C, k, k, h_out, w_out) as strided views copied once
    n, c = xp.shape[:2]
    cols = np.empty((n, c, k, k, h_out, w_out), dtype=xp.dtype)
    for i in range(k):
        for j in range(k):
            cols[:, :, i, j] = xp[:, :, i : i + s * h_out : s, j : j + s * w_out : s]
    return cols


def _col2im(gcols, xp_shape, k, s, h_out, w_out):
    gxp = np.zeros(xp_shape, dtype=gcols.dtype)
    for i in range(k):
        for j in range(k):
            gxp[:, :, i : i + s * h_out : s, j : j + s * w_out : s] += gcols[:, :, i, j]
    return gxp


def _out_size(h, k, s, pad):
    span = h + 2 * pad - k
    if span < 0:
        raise ValidationError(
            f"kernel {k} with padding {pad} does not fit input of size {h}"
        )
    return span // s + 1


class Conv2d(Layer):
    """Cross-correlation (no kernel flip), weights (c_out, c_in, k, k)."""

    kind = "conv2d"

    def __init__(self, c_in, c_out, k, stride=1, padding=0, rng=None, dtype=np.float64):
        if k < 1 or stride < 1 or padding < 0:
            raise ValidationError("conv2d: k, stride >= 1 and padding >= 0 required")
        rng = rng if rng is not None else np.random.default_rng(0)
        fan_in = c_in * k * k
        self.c_in, self.c_out, self.k, self.s, self.pad = c_in, c_out, k, stride, padding
        self.w = kaiming_uniform((c_out, c_in, k, k), fan_in, rng).astype(dtype)
        self.b = rng.uniform(-1.0, 1.0, size=c_out) / np.sqrt(fan_in)
        self.b = self.b.astype(dtype)
        self.gw = np.zeros_like(self.w)
        self.gb = np.zeros_like(self.b)
        self._cache = None

    def params(self):
        return [self.w, self.b]

    def grads(self):
        return [self.gw, self.gb]

    def spec(self):
        return LayerSpec("conv2d", k=self.k, s=self.s, padding=self.pad,
                         c_in=self.c_in, c_out=self.c_out)

    def forward(self, x, mode="train"):
        _check_mode(mode)
        x = np.asarray(x)
        if x.ndim != 4 or x.shape[1] != self.c_in:
            raise ValidationError(
                f"conv2d: expected (N, {self.c_in}, H, W), got {x.shape}"
            )
        n, _, h, w = x.shape
        k, s = self.k, self.s
        ho = _out_size(h, k, s, self.pad)
        wo = _out_size(w, k, s, self.pad)
        p = self.pad
        xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p))) if p else x
        # channel-major column matrix so the whole batch is one GEMM
        cols = np.empty((self.c_in, k, k, n, ho, wo), dtype=xp.dtype)
        for i in range(k):
            for j in range(k):
                cols[:, i, j] = xp[
                    :, :, i : i + s * ho : s, j : j + s * wo : s
                ].transpose(1, 0, 2, 3)
        flat = cols.reshape(self.c_in * k * k, n * ho * wo)
        w2 = self.w.reshape(self.c_out, -1)
        y = w2 @ flat + self.b[:, None]
        self._cache = (flat, xp.shape, (n, h, w, ho, wo))
        return y.reshape(self.c_out, n, ho, wo).transpose(1, 0, 2, 3)

    def backward(self, grad_out):
        flat, xp_shape, (n, h, w, ho, wo) = _need_cache(self._cache, self.kind)
        k, s = self.k, self.s
        g2 = np.ascontiguousarray(
            np.asarray(grad_out).transpose(1, 0, 2, 3)
        ).reshape(self.c_out, n * ho * wo)
        self.gb[...] = g2.sum(axis=1)
        self.gw[...] = (g2 @ flat.T).reshape(self.w.shape)
        w2 = self.w.reshape(self.c_out, -1)
        gflat = w2.T @ g2
        gcols = gflat.reshape(self.c_in, k, k, n, ho, wo)
        gxp = np.zeros(xp_shape, dtype=gcols.dtype)
        for i in range(k):
            for j in range(k):
                gxp[:, :, i : i + s * ho : s, j : j + s * wo : s] += gcols[
                    :, i, j
                ].transpose(1, 0, 2, 3)
        p = self.pad
        return gxp[:, :, p : p + h, p : p + w] if p else gxp


class Dense(Layer):
    kind = "dense"

    def __init__(self, n_in, n_out, rng=None, dtype=np.float64):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.n_in, self.n_out = n_in, n_out
        self.w = kaiming_uniform((n_out, n_in), n_in, rng).astype(dtype)
        self.b = (rng.uniform(-1.0, 1.0, size=n_out) / np.sqrt(n_in)).astype(dtype)
        self.gw = np.zeros_like(self.w)
        self.gb = np.zeros_like(self.b)
        self._cache = None

    def params(self):
        return [self.w, self.b]

    def grads(self):
        return [self.gw, self.gb]

    def spec(self):
        return LayerSpec("dense", c_in=self.n_in, c_out=self.n_out)

    def forward(self, x, mode="train"):
        _check_mode(mode)
        x = np.asarray(x)
        if x.ndim != 2 or x.shape[1] != self.n_in:
            raise ValidationError(f"dense: expected (N, {self.n_in}), got {x.shape}")
        self._cache = x
        return x @ self.w.T + self.b

    def backward(self, grad_out):
        x = _need_cache(self._cache, self.kind)
        g = np.asarray(grad_out)
        self.gw[...] = g.T @ x
        self.gb[...] = g.sum(axis=0)
        return g @ self.w


class BatchNorm2d(Layer):
    """Per-channel normalization over (N, H, W); momentum 0.1 running stats."""

    kind = "batchnorm"

    def __init__(self, c, momentum=0.1, eps=1e-5, dtype=np.float64):
        self.c = c
        self.momentum = momentum
        self.eps = eps
        self.gamma = np.ones(c, dtype=dtype)
        self.beta = np.zeros(c, dtype=dtype)
        self.running_mean = np.zeros(c, dtype=dtype)
        self.running_var = np.ones(c, dtype=dtype)
        self.ggamma = np.zeros_like(self.gamma)
        self.gbeta = np.zeros_like(self.beta)
        self._cache = None

    def params(self):
        return [self.gamma, self.beta]

    def grads(self):
        return [self.ggamma, self.gbeta]

    def state_tensors(self):
        return [self.gamma, self.beta, self.running_mean, self.running_var]

    def spec(self):
        return LayerSpec("batchnorm", c_in=self.c, c_out=self.c)

    def forward(self, x, mode="train"):
        _check_mode(mode)
        x = np.asarray(x)
        if x.ndim != 4 or x.shape[1] != self.c:
            raise ValidationError(
                f"batchnorm: expected (N, {self.c}, H, W), got {x.shape}"
            )
        if mode == "train":
            if x.shape[0] == 1:
                raise ValidationError("batchnorm: train mode needs batch size >= 2")
            mean = x.mean(axis=(0, 2, 3))
            var = x.var(axis=(0, 2, 3))
            m = self.momentum
            self.running_mean[...] = (1 - m) * self.running_mean + m * mean
            self.running_var[...] = (1 - m) * self.running_var + m * var
        else:
            mean, var = self.running_mean, self.running_var
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean[:, None, None]) * inv_std[:, None, None]
        self._cache = (xhat, inv_std, mode)
        return self.gamma[:, None, None] * xhat + self.beta[:, None, None]

    def backward(self, grad_out):
        xhat, inv_std, mode = _need_cache(self._cache, self.kind)
        g = np.asarray(grad_out)
        self.ggamma[...] = (g * xhat).sum(axis=(0, 2, 3))
        self.gbeta[...] = g.sum(axis=(0, 2, 3))
        gxhat = g * self.gamma[:, None, None]
        if mode == "eval":
            return gxhat * inv_std[:, None, None]
        n, _, h, w = g.shape
        m = n * h * w
        s1 = gxhat.sum(axis=(0, 2, 3))
        s2 = (gxhat * xhat).sum(axis=(0, 2, 3))
        return (inv_std[:, None, None] / m) * (
            m * gxhat - s1[:, None, None] - xhat * s2[:, None, None]
        )


class ReLU(Layer):
    kind = "relu"

    def __init__(self):
        self._cache = None

    def forward(self, x, mode="train"):
        _check_mode(mode)
        x = np.asarray(x)
        mask = x > 0
        self._cache = mask
        return x * mask

    def backward(self, grad_out):
        mask = _need_cache(self._cache, self.kind)
        return np.asarray(grad_out) * mask


class MaxPool2d(Layer):
    kind = "maxpool"

    def __init__(self, k, stride, padding=0):
        if k < 1 or stride < 1 or padding < 0:
            raise ValidationError("maxpool: k, stride >= 1 and padding >= 0 required")
        self.k, self.s, self.pad = k, stride, padding
        self._cache = None

    def spec(self):
        return LayerSpec("maxpool", k=self.k, s=self.s, padding=self.pad)

    def forward(self, x, mode="train"):
        _check_mode(mode)
        x = np.asarray(x)
        if x.ndim != 4:
            raise ValidationError(f"maxpool: expected 4-d input, got {x.shape}")
        n, c, h, w = x.shape
        ho = _out_size(h, self.k, self.s, self.pad)
        wo = _out_size(w, self.k, self.s, self.pad)
        p = self.pad
        # pad with -inf so padding never wins the max
        xp = (
            np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)), constant_values=-np.inf)
            if p
            else x
        )
        cols = _im2col(xp, self.k, self.s, ho, wo)
        windows = cols.reshape(n, c, self.k * self.k, ho, wo)
        amax = windows.argmax(axis=2)
        y = np.take_along_axis(windows, amax[:, :, None], axis=2)[:, :, 0]
        self._cache = (amax, xp.shape, (h, w, ho, wo))
        return y

    def backward(self, grad_out):
        amax, xp_shape, (h, w, ho, wo) = _need_cache(self._cache, self.kind)
        g = np.asarray(grad_out)
        gcols = np.zeros(
            (g.shape[0], g.shape[1], self.k, self.k, ho, wo), dtype=g.dtype
        )
        flat = gcols.reshape(g.shape[0], g.shape[1], self.k * self.k, ho, wo)
        np.put_along_axis(flat, amax[:, :, None], g[:, :, None], axis=2)
        gxp = _col2im(gcols, xp_shape, self.k, self.s, ho, wo)
        p = self.pad
        return gxp[:, :, p : p + h, p : p + w] if p else gxp


class AvgPool2d(Layer):
    """Mean over k x k windows; padded cells count toward the divisor."""

    kind = "avgpool"

    def __init__(self, k, stride, padding=0):
        if k < 1 or stride < 1 or padding < 0:
            raise ValidationError("avgpool: k, stride >= 1 and padding >= 0 required")
        self.k, self.s, self.pad = k, stride, padding
        self._cache = None

    def spec(self):
        return LayerSpec("avgpool", k=self.k, s=self.s, padding=self.pad)

    def forward(self, x, mode="train"):
        _check_mode(mode)
        x = np.asarray(x)
        if x.ndim != 4:
            raise ValidationError(f"avgpool: expected 4-d input, got {x.shape}")
        n, c, h, w = x.shape
        ho = _out_size(h, self.k, self.s, self.pad)
        wo = _out_size(w, self.k, self.s, self.pad)
        p = self.pad
        xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p))) if p else x
        cols = _im2col(xp, self.k, self.s, ho, wo)
        self._cache = (xp.shape, (h, w, ho, wo), x.dtype)
        return cols.mean(axis=(2, 3))

    def backward(self, grad_out):
        xp_shape, (h, w, ho, wo), dtype = _need_cache(self._cache, self.kind)
        g = np.asarray(grad_out) / (self.k * self.k)
        gcols = np.broadcast_to(
            g[:, :, None, None], (g.shape[0], g.shape[1], self.k, self.k, ho, wo)
        ).astype(dtype)
        gxp = _col2im(gcols, xp_shape, self.k, self.s, ho, wo)
        p = self.pad
        return gxp[:, :, p : p + h, p : p + w] if p else gxp


class Dropout(Layer):
    """Inverted dropout; owns its RNG stream so reruns reproduce exactly."""

    kind = "dropout"

    def __init__(self, p, seed=0):
        if not 0.0 <= p < 1.0:
            raise ValidationError(f"dropout rate must be in [0, 1), got {p}")
        self.p = p
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self._cache = None

    def reseed(self, seed):
        self.seed = seed
        self.rng = np.random.default_rng(seed)

    def spec(self):
        return LayerSpec("dropout", p=self.p)

    def forward(self, x, mode="train"):
        _check_mode(mode)
        x = np.asarray(x)
        if mode == "eval" or self.p == 0.0:
            self._cache = "identity"
            return x
        keep = self.rng.random(x.shape) >= self.p
        scale = 1.0 / (1.0 - self.p)
        self._cache = (keep, scale)
        return x * keep * np.asarray(scale, dtype=x.dtype)

    def backward(self, grad_out):
        cache = _need_cache(self._cache, self.kind)
        g = np.asarray(grad_out)
        if cache == "identity":
            return g
        keep, scale = cache
        return g * keep * np.asarray(scale, dtype=g.dtype)


class Flatten(Layer):
    kind = "flatten"

    def __init__(self):
        self._cache = None

    def forward(self, x, mode="train"):
        _check_mode(mode)
        x = np.asarray(x)
        self._cache = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad_out):
        shape = _need_cache(self._cache, self.kind)
        return np.asarray(grad_out).reshape(shape)


class Softmax(Layer):
    kind = "softmax"

    def __init__(self):
        self._cache = None

    def forward(self, x, mode="train"):
        _check_mode(mode)
        from .loss import softmax

        y = softmax(x)
        self._cache = y
        return y

    def backward(self, grad_out):
        y = _need_cache(self._cache, self.kind)
        g = np.asarray(grad_out)
        return y * (g - (g * y).sum(axis=1, keepdims=True))


class Residual(Layer):
    """Post-activation residual block: relu(body(x) + shortcut(x)).

    body and shortcut are layer lists; an empty shortcut is the identity.
    """

    kind = "residual_add"

    def __init__(self, body, shortcut=()):
        self.body = list(body)
        self.shortcut = list(shortcut)
        self._relu = ReLU()

    def params(self):
        out = []
        for layer in self.body + self.shortcut:
            out.extend(layer.params())
        return out

    def grads(self):
        out = []
        for layer in self.body + self.shortcut:
            out.extend(layer.grads())
        return out

    def state_tensors(self):
        # flatten_layers already walks the branches; the block itself is
        # just a structural marker in the parameter file
        return []

    def spec(self):
        c_in = next((s.c_in for l in self.body if (s := l.spec()).c_in), None)
        c_out = next(
            (s.c_out for l in reversed(self.body) if (s := l.spec()).c_out), None
        )
        return LayerSpec("residual_add", c_in=c_in, c_out=c_out)

    def forward(self, x, mode="train"):
        _check_mode(mode)
        main = run_forward(self.body, x, mode)
        side = run_forward(self.shortcut, x, mode) if self.shortcut else x
        if main.shape != side.shape:
            raise ValidationError(
                f"residual_add: branch shapes differ, {main.shape} vs {side.shape}"
            )
        return self._relu.forward(main + side, mode)

    def backward(self, grad_out):
        g = self._relu.backward(grad_out)
        g_main = run_backward(self.body, g)
        g_side = run_backward(self.shortcut, g) if self.shortcut else g
        return g_main + g_side


def run_forward(layers, x, mode="train"):
    for layer in layers:
        x = layer.forward(x, mode)
    return x


def run_backward(layers, grad):
    for layer in reversed(layers):
        grad = layer.backward(grad)
    return grad


def flatten_layers(layers):
    """Leaf layers in execution order; residual blocks contribute their
    body, then shortcut, then a parameterless marker entry."""
    out = []
    for layer in layers:
        if isinstance(layer, Residual):
            out.extend(flatten_layers(layer.body))
            out.extend(flatten_layers(layer.shortcut))
            out.append(layer)
        else:
            out.append(layer)
    return out


def cast_layers(layers, dtype):
    """Cast parameters, gradients, and buffers in place (returns layers)."""
    for layer in flatten_layers(layers):
        if isinstance(layer, Residual):
            continue
        for name in ("w", "b", "gw", "gb", "gamma", "beta", "ggamma", "gbeta",
                     "running_mean", "running_var"):
            arr = getattr(layer, name, None)
            if arr is not None:
                setattr(layer, name, arr.astype(dtype))
    return layers
