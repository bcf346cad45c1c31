"""Masked-alert transformer encoder, trained from scratch in numpy.

A single pre-norm encoder block with timestamp-driven rotary attention and
two per-feature classification heads.  Forward, loss and backward passes are
written out by hand in float64; :func:`gradient_check` verifies the analytic
gradients against central finite differences.  The optimizer is Adam with a
linear warmup/decay schedule.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import AlertSequence
from .errors import (
    ContextOverflow,
    CorruptCheckpoint,
    EmptyTrainingData,
    NoMaskedPositions,
    TrainingDiverged,
    VocabHashMismatch,
)
from .vocab import Vocabulary, embed_token_ids, token_id_matrix, vocab_hash

_LN_EPS = 1e-5
_GELU_C = math.sqrt(2.0 / math.pi)


@dataclass(frozen=True)
class ModelConfig:
    """Architecture hyper-parameters of the encoder."""

    num_heads: int = 1
    head_dim: int = 16
    num_layers: int = 1
    context_size: int = 4096
    rotary_base: float = 1.0e6
    rotary_keep_fraction: float = 0.75
    ffn_multiplier: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.num_heads not in (1, 2, 4):
            raise ValueError("num_heads must be 1, 2 or 4")
        if self.head_dim < 2 or self.head_dim % 2:
            raise ValueError("head_dim must be even and >= 2")
        if self.num_layers != 1:
            raise ValueError("only a single encoder layer is supported")
        if self.context_size < 1:
            raise ValueError("context_size must be >= 1")
        if not 0.0 < self.rotary_keep_fraction <= 1.0:
            raise ValueError("rotary_keep_fraction must be in (0, 1]")

    @property
    def d(self) -> int:
        return self.num_heads * self.head_dim


@dataclass(frozen=True)
class TrainConfig:
    """Optimization hyper-parameters."""

    batch_size: int = 16
    total_steps: int = 60000
    max_lr: float = 0.005
    schedule: str = "linear"
    mask_prob: float = 0.15
    warmup_steps: int = 600
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    log_every: int = 100

    def __post_init__(self):
        if not 0.0 < self.mask_prob < 1.0:
            raise ValueError("mask_prob must be in (0, 1)")
        if self.total_steps > 0 and not 1 <= self.warmup_steps < self.total_steps:
            raise ValueError("need 1 <= warmup_steps < total_steps")
        if self.schedule != "linear":
            raise ValueError("only the linear schedule is supported")


@dataclass
class ModelState:
    """All learnable tensors plus optimizer moments and the step counter."""

    config: ModelConfig
    params: dict[str, np.ndarray]
    adam_m: dict[str, np.ndarray]
    adam_v: dict[str, np.ndarray]
    step: int
    vocab_hash: str

    @property
    def tables(self) -> list[np.ndarray]:
        f = 0
        out = []
        while f"emb{f}" in self.params:
            out.append(self.params[f"emb{f}"])
            f += 1
        return out

    def num_features(self) -> int:
        return len(self.tables)


def _param_names(num_features: int) -> list[str]:
    names = [f"emb{f}" for f in range(num_features)]
    names += ["ln1_g", "ln1_b", "wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo"]
    names += ["ln2_g", "ln2_b", "w1", "b1", "w2", "b2"]
    for f in range(num_features):
        names += [f"head{f}_w", f"head{f}_b"]
    return names


def init_state(vocab: Vocabulary, cfg: ModelConfig) -> ModelState:
    """Seeded initialization: normal(0, 0.02) weights, zero biases, unit gains."""
    rng = np.random.default_rng(cfg.seed)
    d, ff = cfg.d, cfg.ffn_multiplier * cfg.d
    sizes = vocab.sizes()

    def w(*shape):
        return rng.normal(0.0, 0.02, size=shape)

    params: dict[str, np.ndarray] = {}
    for f, v in enumerate(sizes):
        params[f"emb{f}"] = w(v, d)
    params["ln1_g"] = np.ones(d)
    params["ln1_b"] = np.zeros(d)
    for name in ("wq", "wk", "wv", "wo"):
        params[name] = w(d, d)
        params["b" + name[1]] = np.zeros(d)
    params["ln2_g"] = np.ones(d)
    params["ln2_b"] = np.zeros(d)
    params["w1"] = w(d, ff)
    params["b1"] = np.zeros(ff)
    params["w2"] = w(ff, d)
    params["b2"] = np.zeros(d)
    for f, v in enumerate(sizes):
        params[f"head{f}_w"] = w(d, v)
        params[f"head{f}_b"] = np.zeros(v)

    zeros = {k: np.zeros_like(p) for k, p in params.items()}
    return ModelState(
        config=cfg,
        params=params,
        adam_m=zeros,
        adam_v={k: np.zeros_like(p) for k, p in params.items()},
        step=0,
        vocab_hash=vocab_hash(vocab),
    )


# --- rotary encoding ------------------------------------------------------

def rotary_frequencies(cfg: ModelConfig) -> np.ndarray:
    """Per-pair rotation frequencies with the lowest quarter zeroed.

    Frequency of pair j is base^(-2j / head_dim); zeroing the lowest
    ``1 - rotary_keep_fraction`` of pairs means those dimensions are never
    rotated.
    """
    half = cfg.head_dim // 2
    j = np.arange(half, dtype=np.float64)
    freqs = cfg.rotary_base ** (-2.0 * j / cfg.head_dim)
    n_zero = int(math.floor((1.0 - cfg.rotary_keep_fraction) * half + 1e-12))
    if n_zero:
        freqs[half - n_zero:] = 0.0
    return freqs


def rotary_angles(timestamps: np.ndarray, cfg: ModelConfig) -> np.ndarray:
    """Rotation angle matrix (n, head_dim / 2): angle[i, j] = t_i * f_j."""
    t = np.asarray(timestamps, dtype=np.float64)
    return t[:, None] * rotary_frequencies(cfg)[None, :]


def _rotate(x: np.ndarray, cos: np.ndarray, sin: np.ndarray) -> np.ndarray:
    # x: (H, n, hd); cos/sin: (n, hd/2)
    xe, xo = x[..., 0::2], x[..., 1::2]
    out = np.empty_like(x)
    out[..., 0::2] = xe * cos - xo * sin
    out[..., 1::2] = xe * sin + xo * cos
    return out


def _rotate_back(x: np.ndarray, cos: np.ndarray, sin: np.ndarray) -> np.ndarray:
    xe, xo = x[..., 0::2], x[..., 1::2]
    out = np.empty_like(x)
    out[..., 0::2] = xe * cos + xo * sin
    out[..., 1::2] = -xe * sin + xo * cos
    return out


# --- layer pieces ---------------------------------------------------------

def _layernorm(x, g, b):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + _LN_EPS)
    xhat = xc * inv
    return xhat * g + b, (xhat, inv)


def _layernorm_backward(dy, g, cache):
    xhat, inv = cache
    dxhat = dy * g
    dg = (dy * xhat).sum(axis=0)
    db = dy.sum(axis=0)
    dx = inv * (
        dxhat
        - dxhat.mean(axis=-1, keepdims=True)
        - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
    )
    return dx, dg, db


def _gelu(x):
    u = _GELU_C * (x + 0.044715 * x ** 3)
    t = np.tanh(u)
    return 0.5 * x * (1.0 + t), t


def _gelu_backward(dy, x, t):
    du = _GELU_C * (1.0 + 3 * 0.044715 * x ** 2)
    return dy * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du)


def _split_heads(x, cfg):
    n = x.shape[0]
    return x.reshape(n, cfg.num_heads, cfg.head_dim).transpose(1, 0, 2)


def _merge_heads(x, cfg):
    return x.transpose(1, 0, 2).reshape(x.shape[1], cfg.d)


# --- forward / loss / backward ---------------------------------------------

def forward(embeddings: np.ndarray, timestamps: np.ndarray, state: ModelState):
    """Run the encoder over one window of (already masked) initial embeddings.

    Full bidirectional self-attention, no causal mask.  Timestamps are
    re-anchored to the window start before the rotary encoding; attention
    depends only on time differences, so this changes nothing semantically
    while keeping trigonometric arguments small.

    Returns ``(outputs, logits, cache)``: per-position output embeddings
    (n, d), one logit matrix per feature, and the cache consumed by
    :func:`backward`.
    """
    cfg = state.config
    p = state.params
    x0 = np.asarray(embeddings, dtype=np.float64)
    n = x0.shape[0]
    if n > cfg.context_size:
        raise ContextOverflow(n, cfg.context_size)
    t = np.asarray(timestamps, dtype=np.float64)
    t_rel = t - t[0] if n else t

    ang = rotary_angles(t_rel, cfg)
    cos, sin = np.cos(ang), np.sin(ang)

    h1, ln1 = _layernorm(x0, p["ln1_g"], p["ln1_b"])
    q = h1 @ p["wq"] + p["bq"]
    k = h1 @ p["wk"] + p["bk"]
    v = h1 @ p["wv"] + p["bv"]
    qh, kh, vh = (_split_heads(a, cfg) for a in (q, k, v))
    qr = _rotate(qh, cos, sin)
    kr = _rotate(kh, cos, sin)

    scale = 1.0 / math.sqrt(cfg.head_dim)
    scores = (qr @ kr.transpose(0, 2, 1)) * scale
    scores -= scores.max(axis=-1, keepdims=True)
    e = np.exp(scores)
    attn = e / e.sum(axis=-1, keepdims=True)

    ctxh = attn @ vh
    ctx = _merge_heads(ctxh, cfg)
    x1 = x0 + ctx @ p["wo"] + p["bo"]

    h2, ln2 = _layernorm(x1, p["ln2_g"], p["ln2_b"])
    a1 = h2 @ p["w1"] + p["b1"]
    g1, gtanh = _gelu(a1)
    x2 = x1 + g1 @ p["w2"] + p["b2"]

    logits = [x2 @ p[f"head{f}_w"] + p[f"head{f}_b"] for f in range(state.num_features())]
    cache = {
        "x0": x0, "h1": h1, "ln1": ln1, "qr": qr, "kr": kr, "vh": vh,
        "attn": attn, "ctx": ctx, "x1": x1, "h2": h2, "ln2": ln2,
        "a1": a1, "gtanh": gtanh, "g1": g1, "x2": x2,
        "cos": cos, "sin": sin, "scale": scale, "logits": logits,
    }
    return x2, logits, cache


def attention_scores(embeddings, timestamps, state: ModelState) -> np.ndarray:
    """Pre-softmax attention logits (H, n, n), without max-shift."""
    cfg = state.config
    p = state.params
    x0 = np.asarray(embeddings, dtype=np.float64)
    t = np.asarray(timestamps, dtype=np.float64)
    t_rel = t - t[0] if len(t) else t
    ang = rotary_angles(t_rel, cfg)
    cos, sin = np.cos(ang), np.sin(ang)
    h1, _ = _layernorm(x0, p["ln1_g"], p["ln1_b"])
    qh = _split_heads(h1 @ p["wq"] + p["bq"], cfg)
    kh = _split_heads(h1 @ p["wk"] + p["bk"], cfg)
    qr = _rotate(qh, cos, sin)
    kr = _rotate(kh, cos, sin)
    return (qr @ kr.transpose(0, 2, 1)) / math.sqrt(cfg.head_dim)


def masked_loss(logits: Sequence[np.ndarray], targets: np.ndarray, mask: np.ndarray) -> float:
    """Mean cross-entropy over masked positions, averaged across feature heads.

    ``targets`` holds the pre-mask token ids, one column per feature.
    """
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise NoMaskedPositions("loss needs at least one masked position")
    idx = np.flatnonzero(mask)
    total = 0.0
    for f, lg in enumerate(logits):
        z = lg[idx]
        z = z - z.max(axis=1, keepdims=True)
        logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
        total += -logp[np.arange(len(idx)), targets[idx, f]].mean()
    return total / len(logits)


def backward(cache, targets: np.ndarray, mask: np.ndarray, input_ids: np.ndarray,
             state: ModelState) -> dict[str, np.ndarray]:
    """Analytic gradients of :func:`masked_loss` w.r.t. every parameter."""
    cfg = state.config
    p = state.params
    nf = state.num_features()
    mask = np.asarray(mask, dtype=bool)
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        raise NoMaskedPositions("backward needs at least one masked position")
    weight = 1.0 / (nf * idx.size)

    grads: dict[str, np.ndarray] = {}
    x2 = cache["x2"]
    dx2 = np.zeros_like(x2)
    for f in range(nf):
        lg = cache["logits"][f]
        z = lg - lg.max(axis=1, keepdims=True)
        e = np.exp(z)
        prob = e / e.sum(axis=1, keepdims=True)
        dlg = np.zeros_like(lg)
        dlg[idx] = prob[idx] * weight
        dlg[idx, targets[idx, f]] -= weight
        grads[f"head{f}_w"] = x2.T @ dlg
        grads[f"head{f}_b"] = dlg.sum(axis=0)
        dx2 += dlg @ p[f"head{f}_w"].T

    # FFN block (pre-norm residual)
    dg1 = dx2 @ p["w2"].T
    grads["w2"] = cache["g1"].T @ dx2
    grads["b2"] = dx2.sum(axis=0)
    da1 = _gelu_backward(dg1, cache["a1"], cache["gtanh"])
    grads["w1"] = cache["h2"].T @ da1
    grads["b1"] = da1.sum(axis=0)
    dh2 = da1 @ p["w1"].T
    dx1, grads["ln2_g"], grads["ln2_b"] = _layernorm_backward(dh2, p["ln2_g"], cache["ln2"])
    dx1 += dx2

    # attention block
    dctx_out = dx1
    dctx = dctx_out @ p["wo"].T
    grads["wo"] = cache["ctx"].T @ dctx_out
    grads["bo"] = dctx_out.sum(axis=0)
    dctxh = _split_heads(dctx, cfg)

    attn, vh = cache["attn"], cache["vh"]
    dattn = dctxh @ vh.transpose(0, 2, 1)
    dvh = attn.transpose(0, 2, 1) @ dctxh
    dscores = attn * (dattn - (dattn * attn).sum(axis=-1, keepdims=True))

    qr, kr, scale = cache["qr"], cache["kr"], cache["scale"]
    dqr = (dscores @ kr) * scale
    dkr = (dscores.transpose(0, 2, 1) @ qr) * scale
    cos, sin = cache["cos"], cache["sin"]
    dq = _merge_heads(_rotate_back(dqr, cos, sin), cfg)
    dk = _merge_heads(_rotate_back(dkr, cos, sin), cfg)
    dv = _merge_heads(dvh, cfg)

    h1 = cache["h1"]
    grads["wq"] = h1.T @ dq
    grads["bq"] = dq.sum(axis=0)
    grads["wk"] = h1.T @ dk
    grads["bk"] = dk.sum(axis=0)
    grads["wv"] = h1.T @ dv
    grads["bv"] = dv.sum(axis=0)
    dh1 = dq @ p["wq"].T + dk @ p["wk"].T + dv @ p["wv"].T
    dx0, grads["ln1_g"], grads["ln1_b"] = _layernorm_backward(dh1, p["ln1_g"], cache["ln1"])
    dx0 += dx1

    for f in range(nf):
        demb = np.zeros_like(p[f"emb{f}"])
        np.add.at(demb, input_ids[:, f], dx0)
        grads[f"emb{f}"] = demb
    return grads


def apply_mask(token_ids: np.ndarray, mask: np.ndarray, vocab: Vocabulary) -> np.ndarray:
    """Replace the token ids at masked positions with the per-feature mask id."""
    out = token_ids.copy()
    for f, fv in enumerate(vocab.features):
        out[mask, f] = fv.mask_id
    return out


def loss_and_grads(token_ids, timestamps, mask, state: ModelState, vocab: Vocabulary):
    """Masked-objective loss and gradients for one context window."""
    input_ids = apply_mask(token_ids, mask, vocab)
    x0 = embed_token_ids(input_ids, state.tables)
    _, logits, cache = forward(x0, timestamps, state)
    loss = masked_loss(logits, token_ids, mask)
    grads = backward(cache, token_ids, mask, input_ids, state)
    return loss, grads


def window_loss(token_ids, timestamps, mask, state: ModelState, vocab: Vocabulary) -> float:
    input_ids = apply_mask(token_ids, mask, vocab)
    x0 = embed_token_ids(input_ids, state.tables)
    _, logits, _ = forward(x0, timestamps, state)
    return masked_loss(logits, token_ids, mask)


# --- optimizer --------------------------------------------------------------

def linear_lr(step: int, cfg: TrainConfig) -> float:
    """Linear warmup to max_lr at ``warmup_steps``, then linear decay to 0."""
    if step <= cfg.warmup_steps:
        return cfg.max_lr * step / cfg.warmup_steps
    return cfg.max_lr * (cfg.total_steps - step) / (cfg.total_steps - cfg.warmup_steps)


def adam_step(state: ModelState, grads: dict[str, np.ndarray], lr: float, cfg: TrainConfig):
    state.step += 1
    t = state.step
    b1, b2, eps = cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for name, g in grads.items():
        m = state.adam_m[name]
        v = state.adam_v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        state.params[name] -= lr * (m / c1) / (np.sqrt(v / c2) + eps)


def _validation_mask(n: int, mask_prob: float) -> np.ndarray:
    stride = max(2, int(round(1.0 / mask_prob)))
    mask = np.zeros(n, dtype=bool)
    mask[::stride] = True
    return mask


def train(
    train_seqs: Sequence[AlertSequence],
    val_seqs: Sequence[AlertSequence],
    vocab: Vocabulary,
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    progress=None,
):
    """Train the encoder on context windows sampled from the training split.

    Windows are contiguous slices of at most ``context_size`` alerts; window
    start positions are drawn uniformly over alert positions (sequences are
    weighted by length).  Returns the trained state and the loss curve as a
    list of row dicts.
    """
    ids_list, ts_list = [], []
    for seq in train_seqs:
        if len(seq) == 0:
            continue
        ids_list.append(token_id_matrix(seq, vocab))
        ts_list.append(seq.timestamps())
    if not ids_list:
        raise EmptyTrainingData("no non-empty training sequences")
    lengths = np.array([len(ts) for ts in ts_list], dtype=np.float64)
    seq_probs = lengths / lengths.sum()

    val_windows = []
    for seq in val_seqs:
        if len(seq) == 0:
            continue
        w = min(len(seq), model_cfg.context_size)
        ids = token_id_matrix(seq, vocab)[:w]
        ts = seq.timestamps()[:w]
        val_windows.append((ids, ts, _validation_mask(w, train_cfg.mask_prob)))

    state = init_state(vocab, model_cfg)
    rng = np.random.default_rng(model_cfg.seed)
    curve: list[dict] = []

    for step in range(1, train_cfg.total_steps + 1):
        batch_grads: Optional[dict[str, np.ndarray]] = None
        batch_loss = 0.0
        for _ in range(train_cfg.batch_size):
            si = int(rng.choice(len(ids_list), p=seq_probs))
            ids, ts = ids_list[si], ts_list[si]
            w = min(len(ts), model_cfg.context_size)
            start = int(rng.integers(0, len(ts) - w + 1))
            win_ids = ids[start:start + w]
            win_ts = ts[start:start + w]
            mask = rng.random(w) < train_cfg.mask_prob
            if not mask.any():
                mask[int(rng.integers(0, w))] = True
            loss, grads = loss_and_grads(win_ids, win_ts, mask, state, vocab)
            batch_loss += loss
            if batch_grads is None:
                batch_grads = grads
            else:
                for name in batch_grads:
                    batch_grads[name] += grads[name]
        batch_loss /= train_cfg.batch_size
        if not math.isfinite(batch_loss):
            raise TrainingDiverged(f"non-finite loss at step {step}")
        for name in batch_grads:
            batch_grads[name] /= train_cfg.batch_size
        lr = linear_lr(step, train_cfg)
        adam_step(state, batch_grads, lr, train_cfg)

        if step % train_cfg.log_every == 0 or step == train_cfg.total_steps:
            val_loss = None
            if val_windows:
                val_loss = float(np.mean([
                    window_loss(ids, ts, m, state, vocab) for ids, ts, m in val_windows
                ]))
            row = {"step": step, "lr": lr, "train_loss": batch_loss, "val_loss": val_loss}
            curve.append(row)
            if progress is not None:
                progress(row)
    return state, curve


# --- gradient-check harness --------------------------------------------------

def gradient_check(state: ModelState, vocab: Vocabulary, token_ids, timestamps, mask,
                   h: float = 1e-5) -> dict[str, float]:
    """Max relative error of analytic vs central-finite-difference gradients.

    Relative error per entry is |a - fd| / max(1e-6, |a| + |fd|); the report
    maps parameter name to the maximum over its entries.  The finite
    differences touch only the forward/loss path, never :func:`backward`.
    """
    _, analytic = loss_and_grads(token_ids, timestamps, mask, state, vocab)
    report: dict[str, float] = {}
    for name, arr in state.params.items():
        worst = 0.0
        flat = arr.ravel()
        ga = analytic[name].ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = window_loss(token_ids, timestamps, mask, state, vocab)
            flat[i] = orig - h
            down = window_loss(token_ids, timestamps, mask, state, vocab)
            flat[i] = orig
            fd = (up - down) / (2.0 * h)
            rel = abs(ga[i] - fd) / max(1e-6, abs(ga[i]) + abs(fd))
            worst = max(worst, rel)
        report[name] = worst
    return report


# --- checkpointing -----------------------------------------------------------

_MAGIC = b"AGRPCKP1"
_CKPT_VERSION = 1


def save_checkpoint(state: ModelState, path) -> None:
    """Versioned binary container: header JSON + named float64 tensors."""
    names = _param_names(state.num_features())
    header = {
        "version": _CKPT_VERSION,
        "model_config": asdict(state.config),
        "vocab_hash": state.vocab_hash,
        "step": state.step,
        "tensors": [
            {"name": n, "shape": list(state.params[n].shape)} for n in names
        ],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(len(blob).to_bytes(8, "little"))
        fh.write(blob)
        for group in (state.params, state.adam_m, state.adam_v):
            for n in names:
                fh.write(np.ascontiguousarray(group[n], dtype=np.float64).tobytes())


def load_checkpoint(path, expected_vocab_hash: Optional[str] = None) -> ModelState:
    with open(path, "rb") as fh:
        data = fh.read()
    buf = io.BytesIO(data)
    if buf.read(8) != _MAGIC:
        raise CorruptCheckpoint("bad magic")
    raw_len = buf.read(8)
    if len(raw_len) != 8:
        raise CorruptCheckpoint("truncated header length")
    hlen = int.from_bytes(raw_len, "little")
    blob = buf.read(hlen)
    if len(blob) != hlen:
        raise CorruptCheckpoint("truncated header")
    try:
        header = json.loads(blob.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptCheckpoint("unreadable header") from exc
    if header.get("version") != _CKPT_VERSION:
        raise CorruptCheckpoint(f"unsupported version {header.get('version')!r}")
    if expected_vocab_hash is not None and header["vocab_hash"] != expected_vocab_hash:
        raise VocabHashMismatch(
            f"checkpoint was trained with vocabulary {header['vocab_hash'][:12]}..."
        )
    cfg = ModelConfig(**header["model_config"])
    names = [t["name"] for t in header["tensors"]]
    shapes = {t["name"]: tuple(t["shape"]) for t in header["tensors"]}
    groups = []
    for _ in range(3):
        group = {}
        for n in names:
            shape = shapes[n]
            count = int(np.prod(shape)) if shape else 1
            raw = buf.read(count * 8)
            if len(raw) != count * 8:
                raise CorruptCheckpoint(f"truncated tensor {n}")
            group[n] = np.frombuffer(raw, dtype=np.float64).reshape(shape).copy()
        groups.append(group)
    if buf.read(1):
        raise CorruptCheckpoint("trailing bytes")
    return ModelState(
        config=cfg,
        params=groups[0],
        adam_m=groups[1],
        adam_v=groups[2],
        step=int(header["step"]),
        vocab_hash=header["vocab_hash"],
    )
