"""Decoder-only transformer in plain numpy with hand-written backprop.

The network is deliberately small (8 layers, 2 heads, width 64 by default)
and trains on a single CPU; forward activations are cached per layer so the
backward pass is a straight mirror of the forward code.  An optional
auxiliary linear head reads the residual stream entering the final layer and
produces one score row per position, used for rank or distribution-shaping
losses on the answer steps.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

LN_EPS = 1e-5
_GELU_C = math.sqrt(2.0 / math.pi)


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    max_len: int
    layers: int = 8
    heads: int = 2
    dim: int = 64
    ff_dim: int = 256
    aux_head: bool = False
    dtype: str = "float32"
    init_std: float = 0.02

    def __post_init__(self):
        if self.dim % self.heads:
            raise ValueError("dim must divide evenly into heads")
        if self.aux_head and self.layers < 2:
            raise ValueError("aux head needs an interior layer to read")


def gelu(x: np.ndarray) -> np.ndarray:
    # tanh approximation; x*x*x sidesteps the slow pow() path for negatives
    return 0.5 * x * (1.0 + np.tanh(_GELU_C * (x + 0.044715 * (x * x * x))))


def gelu_grad(x: np.ndarray) -> np.ndarray:
    t = np.tanh(_GELU_C * (x + 0.044715 * (x * x * x)))
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * _GELU_C * (
        1.0 + 3 * 0.044715 * x * x
    )


@dataclass
class ForwardTrace:
    """Activations of one forward pass, retained for backprop."""

    tokens: np.ndarray
    logits: np.ndarray
    aux_scores: np.ndarray | None
    caches: list = field(default_factory=list)
    x0: np.ndarray | None = None
    interior: np.ndarray | None = None
    final_cache: tuple | None = None


def _layer_norm(x, g, b):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + LN_EPS)
    xhat = xc * inv
    return xhat * g + b, (xhat, inv)


def _layer_norm_grad(dy, cache, g):
    xhat, inv = cache
    dxhat = dy * g
    mean1 = dxhat.mean(axis=-1, keepdims=True)
    mean2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
    dx = inv * (dxhat - mean1 - xhat * mean2)
    dg = (dy * xhat).sum(axis=(0, 1))
    db = dy.sum(axis=(0, 1))
    return dx, dg, db


class Transformer:
    """Causal LM over a fixed token space.

    Parameters live in a flat name->array dict.  Construction seeds every
    randomly initialized tensor from its own derived stream, so the backbone
    comes out identical whether or not the auxiliary head exists.
    """

    def __init__(self, config: ModelConfig, seed: int = 0):
        self.config = config
        self.params: dict[str, np.ndarray] = {}
        dt = np.dtype(config.dtype)
        c = config

        def randn(name, shape, stream):
            rng = np.random.default_rng(stream)
            self.params[name] = (rng.normal(0.0, c.init_std, shape)).astype(dt)

        def zeros(name, shape):
            self.params[name] = np.zeros(shape, dtype=dt)

        def ones(name, shape):
            self.params[name] = np.ones(shape, dtype=dt)

        # Backbone streams are indexed by creation order and never depend on
        # whether the aux head is enabled.
        k = 0

        def backbone(name, shape):
            nonlocal k
            randn(name, shape, [seed, 1000 + k])
            k += 1

        backbone("tok_emb", (c.vocab_size, c.dim))
        backbone("pos_emb", (c.max_len, c.dim))
        for i in range(c.layers):
            p = f"l{i}."
            ones(p + "ln1.g", (c.dim,))
            zeros(p + "ln1.b", (c.dim,))
            backbone(p + "attn.w_qkv", (c.dim, 3 * c.dim))
            zeros(p + "attn.b_qkv", (3 * c.dim,))
            backbone(p + "attn.w_out", (c.dim, c.dim))
            zeros(p + "attn.b_out", (c.dim,))
            ones(p + "ln2.g", (c.dim,))
            zeros(p + "ln2.b", (c.dim,))
            backbone(p + "ff.w1", (c.dim, c.ff_dim))
            zeros(p + "ff.b1", (c.ff_dim,))
            backbone(p + "ff.w2", (c.ff_dim, c.dim))
            zeros(p + "ff.b2", (c.dim,))
        ones("ln_f.g", (c.dim,))
        zeros("ln_f.b", (c.dim,))
        backbone("head.w", (c.dim, c.vocab_size))
        zeros("head.b", (c.vocab_size,))
        if c.aux_head:
            randn("aux.w", (c.dim, c.vocab_size), [seed, 500000])
            zeros("aux.b", (c.vocab_size,))

        self._mask_cache: dict[int, np.ndarray] = {}

    def _causal_bias(self, t: int, dt) -> np.ndarray:
        m = self._mask_cache.get(t)
        if m is None or m.dtype != dt:
            m = np.triu(np.full((t, t), -1e9, dtype=dt), k=1)
            self._mask_cache[t] = m
        return m

    def forward(self, tokens: np.ndarray, need_cache: bool = True) -> ForwardTrace:
        """Run the network over int tokens [B, T]."""
        c = self.config
        p = self.params
        tokens = np.asarray(tokens)
        B, T = tokens.shape
        if T > c.max_len:
            raise ValueError(f"sequence length {T} exceeds max_len {c.max_len}")
        dt = p["tok_emb"].dtype
        H, dh = c.heads, c.dim // c.heads
        scale = dt.type(1.0 / math.sqrt(dh))
        bias = self._causal_bias(T, dt)

        x = p["tok_emb"][tokens] + p["pos_emb"][:T]
        trace = ForwardTrace(tokens=tokens, logits=None, aux_scores=None)
        if need_cache:
            trace.x0 = x
        interior = None
        for i in range(c.layers):
            pre = f"l{i}."
            a, ln1c = _layer_norm(x, p[pre + "ln1.g"], p[pre + "ln1.b"])
            qkv = a @ p[pre + "attn.w_qkv"] + p[pre + "attn.b_qkv"]
            qkv = qkv.reshape(B, T, 3, H, dh).transpose(2, 0, 3, 1, 4)
            q, k, v = qkv[0], qkv[1], qkv[2]
            scores = q @ k.transpose(0, 1, 3, 2) * scale + bias
            scores -= scores.max(axis=-1, keepdims=True)
            att = np.exp(scores)
            att /= att.sum(axis=-1, keepdims=True)
            mixed = (att @ v).transpose(0, 2, 1, 3).reshape(B, T, c.dim)
            x = x + (mixed @ p[pre + "attn.w_out"] + p[pre + "attn.b_out"])
            a2, ln2c = _layer_norm(x, p[pre + "ln2.g"], p[pre + "ln2.b"])
            h_pre = a2 @ p[pre + "ff.w1"] + p[pre + "ff.b1"]
            t = np.tanh(_GELU_C * (h_pre + 0.044715 * (h_pre * h_pre * h_pre)))
            h = 0.5 * h_pre * (1.0 + t)
            x = x + (h @ p[pre + "ff.w2"] + p[pre + "ff.b2"])
            if need_cache:
                trace.caches.append(
                    dict(a=a, ln1=ln1c, q=q, k=k, v=v, att=att, mixed=mixed,
                         a2=a2, ln2=ln2c, h_pre=h_pre, h=h, gelu_t=t)
                )
            if i == c.layers - 2:
                interior = x
        xf, lnfc = _layer_norm(x, p["ln_f.g"], p["ln_f.b"])
        trace.logits = xf @ p["head.w"] + p["head.b"]
        if need_cache:
            trace.final_cache = (xf, lnfc)
            trace.interior = interior
        if c.aux_head:
            trace.aux_scores = interior @ p["aux.w"] + p["aux.b"]
        return trace

    def backward(
        self,
        trace: ForwardTrace,
        dlogits: np.ndarray,
        daux: np.ndarray | None = None,
    ) -> dict[str, np.ndarray]:
        """Gradients of a scalar loss given d(loss)/d(logits) and optionally
        d(loss)/d(aux scores)."""
        c = self.config
        p = self.params
        B, T = trace.tokens.shape
        H, dh = c.heads, c.dim // c.heads
        scale = 1.0 / math.sqrt(dh)
        grads: dict[str, np.ndarray] = {}
        flat = lambda z: z.reshape(B * T, -1)

        xf, lnfc = trace.final_cache
        grads["head.w"] = flat(xf).T @ flat(dlogits)
        grads["head.b"] = dlogits.sum(axis=(0, 1))
        dxf = dlogits @ p["head.w"].T
        dx, dg, db = _layer_norm_grad(dxf, lnfc, p["ln_f.g"])
        grads["ln_f.g"], grads["ln_f.b"] = dg, db

        if daux is not None:
            if trace.aux_scores is None:
                raise ValueError("no aux head in this model")
            grads["aux.w"] = flat(trace.interior).T @ flat(daux)
            grads["aux.b"] = daux.sum(axis=(0, 1))
            d_interior = daux @ p["aux.w"].T
        else:
            d_interior = None

        for i in reversed(range(c.layers)):
            pre = f"l{i}."
            cache = trace.caches[i]
            if d_interior is not None and i == c.layers - 2:
                dx = dx + d_interior
            # ff block
            dh_out = dx
            grads[pre + "ff.w2"] = flat(cache["h"]).T @ flat(dh_out)
            grads[pre + "ff.b2"] = dh_out.sum(axis=(0, 1))
            dhh = dh_out @ p[pre + "ff.w2"].T
            hp, t = cache["h_pre"], cache["gelu_t"]
            dh_pre = dhh * (
                0.5 * (1.0 + t)
                + 0.5 * hp * (1.0 - t * t) * _GELU_C * (1.0 + 0.134145 * hp * hp)
            )
            grads[pre + "ff.w1"] = flat(cache["a2"]).T @ flat(dh_pre)
            grads[pre + "ff.b1"] = dh_pre.sum(axis=(0, 1))
            da2 = dh_pre @ p[pre + "ff.w1"].T
            dx2, dg, db = _layer_norm_grad(da2, cache["ln2"], p[pre + "ln2.g"])
            grads[pre + "ln2.g"], grads[pre + "ln2.b"] = dg, db
            dx = dx + dx2
            # attention block
            datt_out = dx
            grads[pre + "attn.w_out"] = flat(cache["mixed"]).T @ flat(datt_out)
            grads[pre + "attn.b_out"] = datt_out.sum(axis=(0, 1))
            dmixed = (datt_out @ p[pre + "attn.w_out"].T).reshape(
                B, T, H, dh
            ).transpose(0, 2, 1, 3)
            att, q, k, v = cache["att"], cache["q"], cache["k"], cache["v"]
            datt = dmixed @ v.transpose(0, 1, 3, 2)
            dv = att.transpose(0, 1, 3, 2) @ dmixed
            dscore = att * (datt - (datt * att).sum(axis=-1, keepdims=True))
            dq = dscore @ k * scale
            dk = dscore.transpose(0, 1, 3, 2) @ q * scale
            dqkv = np.stack([dq, dk, dv])  # [3, B, H, T, dh]
            dqkv = dqkv.transpose(1, 3, 0, 2, 4).reshape(B, T, 3 * c.dim)
            grads[pre + "attn.w_qkv"] = flat(cache["a"]).T @ flat(dqkv)
            grads[pre + "attn.b_qkv"] = dqkv.sum(axis=(0, 1))
            da = dqkv @ p[pre + "attn.w_qkv"].T
            dx1, dg, db = _layer_norm_grad(da, cache["ln1"], p[pre + "ln1.g"])
            grads[pre + "ln1.g"], grads[pre + "ln1.b"] = dg, db
            dx = dx + dx1

        # embeddings: scatter token grads with a one-hot matmul, which beats
        # indexed accumulation at these vocab sizes
        onehot = np.zeros((B * T, c.vocab_size), dtype=dx.dtype)
        onehot[np.arange(B * T), trace.tokens.reshape(-1)] = 1.0
        grads["tok_emb"] = onehot.T @ flat(dx)
        grads["pos_emb"] = np.zeros_like(p["pos_emb"])
        grads["pos_emb"][:T] = dx.sum(axis=0)
        return grads


def next_token_loss(
    logits: np.ndarray,
    labels: np.ndarray,
    loss_mask: np.ndarray,
    dense_targets: np.ndarray | None = None,
    reduction: str = "mean",
):
    """Cross entropy between next-token logits and labels.

    ``loss_mask`` selects positions that contribute.  ``dense_targets``
    optionally replaces the one-hot labels with full distributions of the
    same [B, T, V] shape (rows outside the mask are ignored).  Returns
    (loss, dlogits).
    """
    mask = loss_mask.astype(logits.dtype)
    n = mask.sum()
    if n == 0:
        raise ValueError("empty loss mask")
    z = logits - logits.max(axis=-1, keepdims=True)
    expz = np.exp(z)
    sumexp = expz.sum(axis=-1, keepdims=True)
    logp = z - np.log(sumexp)
    soft = expz / sumexp
    if dense_targets is None:
        B, T = labels.shape
        picked = logp[np.arange(B)[:, None], np.arange(T)[None, :], labels]
        loss = -(picked * mask).sum()
        dlogits = soft
        dlogits[np.arange(B)[:, None], np.arange(T)[None, :], labels] -= 1.0
    else:
        loss = -((dense_targets * logp).sum(axis=-1) * mask).sum()
        dlogits = soft - dense_targets
    dlogits *= mask[:, :, None]
    denom = n if reduction == "mean" else logits.dtype.type(1.0)
    return float(loss / denom), dlogits / denom


class Adam:
    """Adam with bias correction; no weight decay, no schedule."""

    def __init__(self, params, lr=5e-4, betas=(0.9, 0.999), eps=1e-8):
        self.lr, self.betas, self.eps = lr, betas, eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params, grads):
        self.t += 1
        b1, b2 = self.betas
        c1 = 1.0 - b1**self.t
        c2 = 1.0 - b2**self.t
        for name, g in grads.items():
            g = g.astype(params[name].dtype, copy=False)
            m, v = self.m[name], self.v[name]
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * (g * g)
            params[name] -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def save_checkpoint(path, model: Transformer, optimizer: Adam | None = None, extra=None):
    """Write params, optimizer state, and a JSON meta blob to one npz file."""
    meta = {
        "config": asdict(model.config),
        "adam": None,
        "extra": extra or {},
    }
    arrays = {f"param.{k}": v for k, v in model.params.items()}
    if optimizer is not None:
        meta["adam"] = {
            "lr": optimizer.lr,
            "betas": list(optimizer.betas),
            "eps": optimizer.eps,
            "t": optimizer.t,
        }
        arrays.update({f"adam_m.{k}": v for k, v in optimizer.m.items()})
        arrays.update({f"adam_v.{k}": v for k, v in optimizer.v.items()})
    arrays["meta"] = np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path):
    """Inverse of save_checkpoint; returns (model, optimizer_or_None, extra)."""
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode())
        model = Transformer(ModelConfig(**meta["config"]), seed=0)
        for k in list(model.params):
            model.params[k] = data[f"param.{k}"]
        opt = None
        if meta["adam"] is not None:
            a = meta["adam"]
            opt = Adam(model.params, lr=a["lr"], betas=tuple(a["betas"]), eps=a["eps"])
            opt.t = a["t"]
            for k in list(opt.m):
                opt.m[k] = data[f"adam_m.{k}"]
                opt.v[k] = data[f"adam_v.{k}"]
    return model, opt, meta["extra"]


def numerical_gradients(loss_fn, params: dict[str, np.ndarray], eps: float = 1e-5):
    """Central-difference gradients of ``loss_fn()`` wrt every param element.

    Mutates each parameter in place and restores it; use on small models and
    float64 parameters only.
    """
    out = {}
    for name, arr in params.items():
        g = np.zeros_like(arr, dtype=np.float64)
        flat = arr.reshape(-1)
        gf = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            hi = loss_fn()
            flat[i] = orig - eps
            lo = loss_fn()
            flat[i] = orig
            gf[i] = (hi - lo) / (2 * eps)
        out[name] = g
    return out
