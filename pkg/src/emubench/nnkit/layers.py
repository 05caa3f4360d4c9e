"""Neural-network layers with hand-written forward and backward passes.

All arithmetic is float64. Each layer caches what its backward pass needs
during forward; ``backward`` consumes the upstream gradient, accumulates
parameter gradients, and returns the input gradient (or None for a leading
layer flagged with ``need_input_grad = False``).
"""

from __future__ import annotations

import numpy as np


def _uniform_init(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Layer:
    need_input_grad = True

    def init_params(self, rng: np.random.Generator) -> None:
        pass

    def params(self) -> dict[str, np.ndarray]:
        return {}

    def grads(self) -> dict[str, np.ndarray]:
        return {}

    def state(self) -> dict[str, np.ndarray]:
        """Non-trained state carried into checkpoints (e.g. running stats)."""
        return {}

    def param_count(self) -> int:
        return sum(p.size for p in self.params().values())

    def zero_grads(self) -> None:
        for g in self.grads().values():
            g[...] = 0.0

    def forward(self, x: np.ndarray, training: bool) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad_out: np.ndarray):
        raise NotImplementedError


class Dense(Layer):
    """Affine map (B, n_in) -> (B, n_out)."""

    def __init__(self, n_in: int, n_out: int):
        self.n_in, self.n_out = n_in, n_out
        self.w = np.zeros((n_in, n_out))
        self.b = np.zeros(n_out)
        self.dw = np.zeros_like(self.w)
        self.db = np.zeros_like(self.b)

    def init_params(self, rng):
        self.w = _uniform_init(rng, (self.n_in, self.n_out), self.n_in)
        self.b = np.zeros(self.n_out)

    def params(self):
        return {"w": self.w, "b": self.b}

    def grads(self):
        return {"w": self.dw, "b": self.db}

    def forward(self, x, training):
        self._x = x
        return x @ self.w + self.b

    def backward(self, grad_out):
        self.dw += self._x.T @ grad_out
        self.db += grad_out.sum(axis=0)
        if not self.need_input_grad:
            return None
        return grad_out @ self.w.T


class ReLU(Layer):
    def forward(self, x, training):
        self._mask = x > 0
        return np.where(self._mask, x, 0.0)

    def backward(self, grad_out):
        return np.where(self._mask, grad_out, 0.0)


class BatchNorm(Layer):
    """Per-feature batch normalization over the leading batch axis."""

    def __init__(self, n_features: int, momentum: float = 0.9, eps: float = 1e-7):
        self.n = n_features
        self.momentum = momentum
        self.eps = eps
        self.gamma = np.ones(n_features)
        self.beta = np.zeros(n_features)
        self.dgamma = np.zeros(n_features)
        self.dbeta = np.zeros(n_features)
        self.running_mean = np.zeros(n_features)
        self.running_var = np.ones(n_features)

    def params(self):
        return {"gamma": self.gamma, "beta": self.beta}

    def grads(self):
        return {"gamma": self.dgamma, "beta": self.dbeta}

    def state(self):
        return {"running_mean": self.running_mean, "running_var": self.running_var}

    def forward(self, x, training):
        if training:
            mean = x.mean(axis=0)
            var = x.var(axis=0)
            self.running_mean = self.momentum * self.running_mean + (1 - self.momentum) * mean
            self.running_var = self.momentum * self.running_var + (1 - self.momentum) * var
            self._train = True
        else:
            mean, var = self.running_mean, self.running_var
            self._train = False
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean) * inv_std
        self._cache = (xhat, inv_std)
        return self.gamma * xhat + self.beta

    def backward(self, grad_out):
        xhat, inv_std = self._cache
        self.dgamma += (grad_out * xhat).sum(axis=0)
        self.dbeta += grad_out.sum(axis=0)
        dxhat = grad_out * self.gamma
        if not self._train:
            return dxhat * inv_std
        B = xhat.shape[0]
        # standard batch-norm gradient with batch statistics
        return (inv_std / B) * (
            B * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0)
        )


class Conv2D(Layer):
    """3x3 convolution, stride 1, padding 'same' (zero) or 'valid'.

    Input (B, C, H, W) -> (B, F, H', W'). Spatially constant inputs under
    'valid' padding take an exact collapsed path: every window sees the same
    patch, so the layer reduces to a dense map through the kernel tap sums.
    """

    def __init__(self, in_channels: int, out_channels: int, padding: str = "same"):
        if padding not in ("same", "valid"):
            raise ValueError(f"unknown padding {padding!r}")
        self.c, self.f = in_channels, out_channels
        self.padding = padding
        self.kernel = np.zeros((out_channels, in_channels, 3, 3))
        self.bias = np.zeros(out_channels)
        self.dkernel = np.zeros_like(self.kernel)
        self.dbias = np.zeros_like(self.bias)

    def init_params(self, rng):
        fan_in = self.c * 9
        self.kernel = _uniform_init(rng, self.kernel.shape, fan_in)
        self.bias = np.zeros(self.f)

    def params(self):
        return {"kernel": self.kernel, "bias": self.bias}

    def grads(self):
        return {"kernel": self.dkernel, "bias": self.dbias}

    def _pad(self, x):
        if self.padding == "same":
            return np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
        return x

    def forward(self, x, training):
        B, C, H, W = x.shape
        if C != self.c:
            raise ValueError(f"expected {self.c} input channels, got {C}")
        use_const = (
            self.padding == "valid"
            and not getattr(self, "force_general_path", False)
            and bool(np.all(x == x[:, :, :1, :1]))
        )
        if use_const:
            ho, wo = H - 2, W - 2
            v = x[:, :, 0, 0]                       # (B, C)
            tap_sums = self.kernel.sum(axis=(2, 3))  # (F, C)
            z = v @ tap_sums.T + self.bias
            self._cache = ("const", v, (B, C, H, W))
            return np.broadcast_to(z[:, :, None, None], (B, self.f, ho, wo)).copy()
        xp = self._pad(x)
        windows = np.lib.stride_tricks.sliding_window_view(xp, (3, 3), axis=(2, 3))
        ho, wo = windows.shape[2], windows.shape[3]
        cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(B * ho * wo, C * 9)
        kmat = self.kernel.reshape(self.f, C * 9)
        out = cols @ kmat.T + self.bias
        self._cache = ("full", cols, (B, C, H, W))
        return out.reshape(B, ho, wo, self.f).transpose(0, 3, 1, 2)

    def backward(self, grad_out):
        kind, cached, (B, C, H, W) = self._cache
        _, F, ho, wo = grad_out.shape
        if kind == "const":
            v = cached
            dz = grad_out.sum(axis=(2, 3))          # (B, F)
            # every tap saw the same input value, so taps share one gradient
            self.dkernel += np.einsum("bf,bc->fc", dz, v)[:, :, None, None]
            self.dbias += dz.sum(axis=0)
            if not self.need_input_grad:
                return None
            return self._input_grad(grad_out, B, C, H, W)
        cols = cached
        gmat = grad_out.transpose(0, 2, 3, 1).reshape(B * ho * wo, F)
        self.dkernel += (gmat.T @ cols).reshape(self.kernel.shape)
        self.dbias += gmat.sum(axis=0)
        if not self.need_input_grad:
            return None
        return self._input_grad(grad_out, B, C, H, W)

    def _input_grad(self, grad_out, B, C, H, W):
        _, F, ho, wo = grad_out.shape
        if self.padding == "same":
            dxp = np.zeros((B, C, H + 2, W + 2))
        else:
            dxp = np.zeros((B, C, H, W))
        for i in range(3):
            for j in range(3):
                contrib = np.tensordot(grad_out, self.kernel[:, :, i, j], axes=([1], [0]))
                dxp[:, :, i : i + ho, j : j + wo] += contrib.transpose(0, 3, 1, 2)
        if self.padding == "same":
            return dxp[:, :, 1 : 1 + H, 1 : 1 + W]
        return dxp


class AvgPool2D(Layer):
    """2x2 average pooling, stride 2; odd trailing rows/columns are dropped."""

    def forward(self, x, training):
        B, C, H, W = x.shape
        ho, wo = H // 2, W // 2
        if ho == 0 or wo == 0:
            raise ValueError(f"spatial dims ({H}, {W}) too small for 2x2 pooling")
        self._shape = (B, C, H, W)
        xt = x[:, :, : ho * 2, : wo * 2].reshape(B, C, ho, 2, wo, 2)
        return xt.mean(axis=(3, 5))

    def backward(self, grad_out):
        B, C, H, W = self._shape
        ho, wo = H // 2, W // 2
        dx = np.zeros((B, C, H, W))
        spread = np.repeat(np.repeat(grad_out, 2, axis=2), 2, axis=3) / 4.0
        dx[:, :, : ho * 2, : wo * 2] = spread
        return dx


class GlobalAvgPool(Layer):
    """(B, C, H, W) -> (B, C) spatial mean."""

    def forward(self, x, training):
        self._shape = x.shape
        return x.mean(axis=(2, 3))

    def backward(self, grad_out):
        B, C, H, W = self._shape
        return np.broadcast_to(grad_out[:, :, None, None] / (H * W), self._shape).copy()


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


class Lstm(Layer):
    """LSTM over (B, T, F) returning the last hidden state (B, H).

    Gates use sigmoid; the cell candidate and the cell-to-hidden transform
    use the configurable activation (ReLU by default). Gate order in the
    stacked kernels is [input, forget, candidate, output]; the forget-gate
    bias starts at 1.
    """

    def __init__(self, input_size: int, hidden_size: int, activation: str = "relu"):
        self.fi, self.h = input_size, hidden_size
        if activation == "relu":
            self.act = lambda a: np.maximum(a, 0.0)
            self.dact = lambda a: (a > 0.0).astype(np.float64)
        elif activation == "tanh":
            self.act = np.tanh
            self.dact = lambda a: 1.0 - np.tanh(a) ** 2
        else:
            raise ValueError(f"unknown activation {activation!r}")
        self.w = np.zeros((input_size, 4 * hidden_size))
        self.u = np.zeros((hidden_size, 4 * hidden_size))
        self.b = np.zeros(4 * hidden_size)
        self.dw = np.zeros_like(self.w)
        self.du = np.zeros_like(self.u)
        self.db = np.zeros_like(self.b)

    def init_params(self, rng):
        self.w = _uniform_init(rng, self.w.shape, self.fi)
        self.u = _uniform_init(rng, self.u.shape, self.h)
        self.b = np.zeros(4 * self.h)
        self.b[self.h : 2 * self.h] = 1.0  # forget gate open at start

    def params(self):
        return {"w": self.w, "u": self.u, "b": self.b}

    def grads(self):
        return {"w": self.dw, "u": self.du, "b": self.db}

    def forward(self, x, training):
        B, T, F = x.shape
        H = self.h
        h = np.zeros((B, H))
        c = np.zeros((B, H))
        # one fused input projection for all timesteps
        xw = (x.reshape(B * T, F) @ self.w).reshape(B, T, 4 * H)
        steps = []
        for t in range(T):
            a = xw[:, t] + h @ self.u + self.b
            ai, af, ag, ao = a[:, :H], a[:, H : 2 * H], a[:, 2 * H : 3 * H], a[:, 3 * H :]
            gi, gf, go = _sigmoid(ai), _sigmoid(af), _sigmoid(ao)
            gg = self.act(ag)
            c_prev = c
            c = gf * c_prev + gi * gg
            h = go * self.act(c)
            steps.append((x[:, t], h, c, c_prev, gi, gf, gg, go, ag))
        self._steps = steps
        self._hprev = [np.zeros((B, H))] + [s[1] for s in steps[:-1]]
        return h

    def backward(self, grad_out):
        B, H = grad_out.shape
        T = len(self._steps)
        dh_next = grad_out
        dc_next = np.zeros((B, H))
        da_all = np.empty((B, T, 4 * H))
        for t in reversed(range(T)):
            xt, h_t, c_t, c_prev, gi, gf, gg, go, ag = self._steps[t]
            dh = dh_next
            dc = dc_next + dh * go * self.dact(c_t)
            dgo = dh * self.act(c_t)
            dgi = dc * gg
            dgg = dc * gi
            dgf = dc * c_prev
            dc_next = dc * gf
            da = da_all[:, t]
            da[:, :H] = dgi * gi * (1 - gi)
            da[:, H : 2 * H] = dgf * gf * (1 - gf)
            da[:, 2 * H : 3 * H] = dgg * self.dact(ag)
            da[:, 3 * H :] = dgo * go * (1 - go)
            self.du += self._hprev[t].T @ da
            dh_next = da @ self.u.T
        # fused input-side parameter and input gradients over all timesteps
        x_flat = np.concatenate([s[0][:, None, :] for s in self._steps], axis=1)
        da_flat = da_all.reshape(B * T, 4 * H)
        self.dw += x_flat.reshape(B * T, self.fi).T @ da_flat
        self.db += da_flat.sum(axis=0)
        if not self.need_input_grad:
            return None
        return (da_flat @ self.w.T).reshape(B, T, self.fi)


class TimeDistributed(Layer):
    """Apply an inner layer independently to every step of (B, T, ...)."""

    def __init__(self, inner: Layer):
        self.inner = inner

    @property
    def need_input_grad(self):
        return self.inner.need_input_grad

    @need_input_grad.setter
    def need_input_grad(self, value):
        self.inner.need_input_grad = value

    def init_params(self, rng):
        self.inner.init_params(rng)

    def params(self):
        return self.inner.params()

    def grads(self):
        return self.inner.grads()

    def state(self):
        return self.inner.state()

    def forward(self, x, training):
        B, T = x.shape[:2]
        self._bt = (B, T)
        out = self.inner.forward(x.reshape(B * T, *x.shape[2:]), training)
        return out.reshape(B, T, *out.shape[1:])

    def backward(self, grad_out):
        B, T = self._bt
        grad_in = self.inner.backward(grad_out.reshape(B * T, *grad_out.shape[2:]))
        if grad_in is None:
            return None
        return grad_in.reshape(B, T, *grad_in.shape[1:])


class Sequential:
    """Ordered layer chain with shared forward/backward/parameter plumbing."""

    def __init__(self, layers: list[Layer], need_input_grad: bool = False):
        self.layers = list(layers)
        if self.layers:
            self.layers[0].need_input_grad = need_input_grad

    def initialize(self, seed: int) -> None:
        from .. import seeds as seedmod

        rng = seedmod.rng_for(seed, seedmod.WEIGHT_INIT)
        for layer in self.layers:
            layer.init_params(rng)

    def forward(self, x, training: bool):
        for layer in self.layers:
            x = layer.forward(x, training)
        return x

    def backward(self, grad_out):
        for layer in reversed(self.layers):
            grad_out = layer.backward(grad_out)
        return grad_out

    def params(self) -> dict[str, np.ndarray]:
        out = {}
        for i, layer in enumerate(self.layers):
            for name, p in layer.params().items():
                out[f"{i}.{type(layer).__name__}.{name}"] = p
        return out

    def grads(self) -> dict[str, np.ndarray]:
        out = {}
        for i, layer in enumerate(self.layers):
            for name, g in layer.grads().items():
                out[f"{i}.{type(layer).__name__}.{name}"] = g
        return out

    def zero_grads(self) -> None:
        for layer in self.layers:
            layer.zero_grads()

    def param_count(self) -> int:
        return sum(layer.param_count() for layer in self.layers)

    def state_dict(self) -> dict[str, np.ndarray]:
        out = {name: p.copy() for name, p in self.params().items()}
        for i, layer in enumerate(self.layers):
            for name, s in layer.state().items():
                out[f"{i}.{type(layer).__name__}.state.{name}"] = s.copy()
        return out

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        for name, p in self.params().items():
            p[...] = state[name]
        for i, layer in enumerate(self.layers):
            for name, s in layer.state().items():
                s[...] = state[f"{i}.{type(layer).__name__}.state.{name}"]
