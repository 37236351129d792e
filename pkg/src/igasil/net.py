"""Dense feed-forward networks with manual backprop and Adam.

Everything is float64 and deterministic: actors, critics and
discriminators in this package are all instances of :class:`Mlp`.
Parameters live in one flat vector with per-layer matrix/bias views, so
optimizer steps and norm clipping touch a single array.
"""

from __future__ import annotations

import numpy as np

HIDDEN_ACTIVATIONS = ("relu",)
OUTPUT_HEADS = ("tanh", "softmax", "sigmoid", "linear")

_WEIGHT_MAGIC = "MLPV1"


class GradTape:
    """Cached intermediates of one forward pass, consumed by one backward pass."""

    __slots__ = ("net_id", "x", "pre", "post", "consumed")

    def __init__(self, net_id, x, pre, post):
        self.net_id = net_id
        self.x = x          # (B, d0)
        self.pre = pre      # pre-activations per layer, (B, d_{i+1})
        self.post = post    # activations per layer; post[-1] is the head output
        self.consumed = False


class Gradients:
    """Flat gradient vector plus matrix/bias views and the input gradient."""

    __slots__ = ("flat", "weights", "biases", "inputs")

    def __init__(self, flat, weights, biases, inputs):
        self.flat = flat
        self.weights = weights
        self.biases = biases
        self.inputs = inputs

    def arrays(self):
        return self.weights + self.biases


def relu(z):
    return np.maximum(z, 0.0)


def softmax(z):
    # max-subtraction keeps exp() finite for any finite logits
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def sigmoid(z):
    # exp(-softplus(-z)) is exact and never overflows
    return np.exp(-np.logaddexp(0.0, -z))


def _layout(layer_dims):
    """(weight view specs, bias view specs, total size) for the flat vector."""
    specs = []
    offset = 0
    for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
        w = (offset, fan_out, fan_in)
        offset += fan_out * fan_in
        b = (offset, fan_out)
        offset += fan_out
        specs.append((w, b))
    return specs, offset


class Mlp:
    """Fully connected net: relu hidden layers and a configurable output head.

    weights[i] has shape (layer_dims[i+1], layer_dims[i]); a forward pass
    computes x @ W.T + b per layer. Two hidden layers is the default
    architecture used throughout the package.
    """

    def __init__(self, layer_dims, output_head, hidden_activation="relu", init_rng=None):
        layer_dims = [int(d) for d in layer_dims]
        if len(layer_dims) < 2 or any(d < 1 for d in layer_dims):
            raise ValueError(f"bad layer dims {layer_dims}")
        if output_head not in OUTPUT_HEADS:
            raise ValueError(f"unknown output head {output_head!r}, expected one of {OUTPUT_HEADS}")
        if hidden_activation not in HIDDEN_ACTIVATIONS:
            raise ValueError(f"unknown hidden activation {hidden_activation!r}")
        self.layer_dims = layer_dims
        self.output_head = output_head
        self.hidden_activation = hidden_activation

        specs, total = _layout(layer_dims)
        self.flat = np.zeros(total)
        self.weights = []
        self.biases = []
        for (wo, fan_out, fan_in), (bo, _) in specs:
            self.weights.append(self.flat[wo:wo + fan_out * fan_in].reshape(fan_out, fan_in))
            self.biases.append(self.flat[bo:bo + fan_out])
        if init_rng is not None:
            for w, b, fan_in in zip(self.weights, self.biases, layer_dims[:-1]):
                bound = 1.0 / np.sqrt(fan_in)
                w[...] = init_rng.uniform(-bound, bound, size=w.shape)
                b[...] = init_rng.uniform(-bound, bound, size=b.shape)

    @property
    def in_dim(self):
        return self.layer_dims[0]

    @property
    def out_dim(self):
        return self.layer_dims[-1]

    def params(self):
        """Parameter arrays (views into the flat vector), weights then biases."""
        return self.weights + self.biases

    def copy(self):
        clone = Mlp(self.layer_dims, self.output_head, self.hidden_activation)
        clone.flat[...] = self.flat
        return clone

    def _grad_buffer(self):
        flat = np.zeros_like(self.flat)
        specs, _ = _layout(self.layer_dims)
        ws, bs = [], []
        for (wo, fan_out, fan_in), (bo, _) in specs:
            ws.append(flat[wo:wo + fan_out * fan_in].reshape(fan_out, fan_in))
            bs.append(flat[bo:bo + fan_out])
        return flat, ws, bs

    # ---- forward ----------------------------------------------------

    def _apply_head(self, z):
        head = self.output_head
        if head == "linear":
            return z
        if head == "tanh":
            return np.tanh(z)
        if head == "sigmoid":
            return sigmoid(z)
        return softmax(z)

    def predict_logits(self, x):
        """Pre-head activations without a tape (fast path, no head applied)."""
        x = np.asarray(x, dtype=float)
        squeeze = x.ndim == 1
        h = x.reshape(1, -1) if squeeze else x
        if h.shape[-1] != self.layer_dims[0]:
            raise ValueError(f"input dim {h.shape[-1]} != expected {self.layer_dims[0]}")
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w.T + b
            if i < last:
                h = relu(h)
        return h[0] if squeeze else h

    def predict(self, x):
        """Forward pass without a tape (fast path for acting/eval)."""
        return self._apply_head(self.predict_logits(x))

    def forward(self, x):
        """Forward pass returning (output, tape). Input may be a vector or a (B, d) batch."""
        x = np.asarray(x, dtype=float)
        squeeze = x.ndim == 1
        h = x.reshape(1, -1) if squeeze else x
        if h.shape[-1] != self.layer_dims[0]:
            raise ValueError(f"input dim {h.shape[-1]} != expected {self.layer_dims[0]}")
        pre, post = [], []
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w.T + b
            pre.append(z)
            h = relu(z) if i < last else self._apply_head(z)
            post.append(h)
        tape = GradTape(id(self), x.reshape(1, -1) if squeeze else x, pre, post)
        y = post[-1]
        return (y[0], tape) if squeeze else (y, tape)

    # ---- backward ---------------------------------------------------

    def _check_tape(self, tape):
        if tape.consumed:
            raise RuntimeError("gradient tape already consumed by a backward pass")
        if tape.net_id != id(self) or tape.x.shape[-1] != self.layer_dims[0]:
            raise ValueError("tape does not belong to this network")

    def _head_to_logit_grad(self, tape, out_grad):
        """Convert dL/d(head output) into dL/d(pre-head logits)."""
        y = tape.post[-1]
        head = self.output_head
        if head == "linear":
            return out_grad
        if head == "tanh":
            return out_grad * (1.0 - y * y)
        if head == "sigmoid":
            return out_grad * y * (1.0 - y)
        # softmax Jacobian: dz_j = y_j * (g_j - sum_i g_i y_i)
        inner = (out_grad * y).sum(axis=-1, keepdims=True)
        return y * (out_grad - inner)

    def backward(self, tape, out_grad):
        """Backpropagate dL/d(output); returns summed-over-batch gradients."""
        self._check_tape(tape)
        out_grad = np.asarray(out_grad, dtype=float)
        if out_grad.ndim == 1:
            out_grad = out_grad.reshape(1, -1)
        dz = self._head_to_logit_grad(tape, out_grad)
        return self._backprop_from_logits(tape, dz)

    def backward_logits(self, tape, logit_grad):
        """Backpropagate dL/d(pre-head logits) directly (stable for softmax losses)."""
        self._check_tape(tape)
        logit_grad = np.asarray(logit_grad, dtype=float)
        if logit_grad.ndim == 1:
            logit_grad = logit_grad.reshape(1, -1)
        return self._backprop_from_logits(tape, logit_grad)

    def _backprop_from_logits(self, tape, dz):
        tape.consumed = True
        flat, dws, dbs = self._grad_buffer()
        for i in range(len(self.weights) - 1, -1, -1):
            act_in = tape.x if i == 0 else tape.post[i - 1]
            np.matmul(dz.T, act_in, out=dws[i])
            dz.sum(axis=0, out=dbs[i])
            dx = dz @ self.weights[i]
            if i > 0:
                dz = dx * (tape.pre[i - 1] > 0)
        return Gradients(flat, dws, dbs, dx)

    # ---- persistence ------------------------------------------------

    def save(self, path):
        lines = [
            f"{_WEIGHT_MAGIC} {len(self.layer_dims)} " + " ".join(str(d) for d in self.layer_dims),
            f"{self.hidden_activation} {self.output_head}",
        ]
        for w, b in zip(self.weights, self.biases):
            for row in w:
                lines.append(" ".join(format(v, ".17g") for v in row))
            lines.append(" ".join(format(v, ".17g") for v in b))
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            raw = fh.read().split("\n")
        lines = [ln for ln in raw if ln.strip()]
        if not lines:
            raise ValueError(f"{path}: empty weight file")
        header = lines[0].split()
        if not header or not header[0].startswith("MLPV"):
            raise ValueError(f"{path}: not a weight file")
        if header[0] != _WEIGHT_MAGIC:
            raise ValueError(f"{path}: unsupported weight format version {header[0]}")
        try:
            n_dims = int(header[1])
            dims = [int(t) for t in header[2:]]
        except (IndexError, ValueError) as exc:
            raise ValueError(f"{path}: malformed header") from exc
        if len(dims) != n_dims or n_dims < 2:
            raise ValueError(f"{path}: header claims {n_dims} dims, found {len(dims)}")
        if len(lines) < 2:
            raise ValueError(f"{path}: missing activation line")
        acts = lines[1].split()
        if len(acts) != 2:
            raise ValueError(f"{path}: malformed activation line")

        def parse_row(line, expect, what):
            tokens = line.split()
            if len(tokens) != expect:
                raise ValueError(f"{path}: {what} has {len(tokens)} values, expected {expect}")
            try:
                return np.array([float(t) for t in tokens])
            except ValueError as exc:
                raise ValueError(f"{path}: non-numeric value in {what}") from exc

        net = cls(dims, output_head=acts[1], hidden_activation=acts[0])
        cursor = 2
        for i, (fan_in, fan_out) in enumerate(zip(dims[:-1], dims[1:])):
            need = fan_out + 1  # matrix rows plus one bias line
            if cursor + need > len(lines):
                raise ValueError(f"{path}: truncated file (layer {i})")
            for r in range(fan_out):
                net.weights[i][r] = parse_row(lines[cursor + r], fan_in, f"row {r} of layer {i}")
            net.biases[i][...] = parse_row(lines[cursor + fan_out], fan_out, f"bias of layer {i}")
            cursor += need
        if cursor != len(lines):
            raise ValueError(f"{path}: {len(lines) - cursor} unexpected trailing lines")
        return net


class AdamState:
    """Adam moments for a fixed list of parameter arrays."""

    def __init__(self, params, alpha=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.alpha = float(alpha)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.step = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]


def adam_step(params, grads, state):
    """One in-place Adam update with bias correction.

    Raises on non-finite gradients: adversarially reshaped rewards can blow
    up and silently poisoning the moments is the worst failure mode.
    """
    if len(params) != len(state.m) or len(params) != len(grads):
        raise ValueError("params/grads/state length mismatch")
    for g in grads:
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(
                f"non-finite gradient at step {state.step + 1}: "
                f"|g|_max={np.abs(g[np.isfinite(g)]).max() if np.isfinite(g).any() else 'n/a'}"
            )
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1 ** state.step
    bc2 = 1.0 - b2 ** state.step
    # equivalent bias-corrected form with fewer temporaries:
    # m_hat/(sqrt(v_hat)+eps) == sqrt(bc2)/bc1 * m/(sqrt(v)+eps*sqrt(bc2))
    sq = np.sqrt(bc2)
    alpha_t = state.alpha * sq / bc1
    eps_t = state.eps * sq
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= alpha_t * m / (np.sqrt(v) + eps_t)


def clip_global_norm(grads, max_norm):
    """Scale gradient arrays in place so their global L2 norm is <= max_norm."""
    total = 0.0
    for g in grads:
        gf = g.ravel()
        total += float(gf @ gf)
    norm = np.sqrt(total)
    if max_norm > 0 and norm > max_norm:
        scale = max_norm / norm
        for g in grads:
            g *= scale
    return norm
