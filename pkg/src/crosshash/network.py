"""Modality-specific hashing networks, loss terms, and the trainer.

Each modality owns a two-layer feed-forward network ``tanh(W2' relu(W1' x +
b1) + b2)`` producing relaxed codes in (-1, 1); sign-thresholding them at
inference time yields the binary codes (see :mod:`crosshash.retrieval`).

Training couples three objectives over a mini-batch:

* guided consistency: cosine similarities between relaxed codes of every
  modality pair (image-image, image-text, text-image, text-text) are pulled
  toward the mined structure block, normalized by B^2;
* retrieval consistency: in-batch retrieval distributions from both
  directions (softmax over code cosines) are pulled toward each other via
  symmetric KL against sharpened, gradient-free targets;
* co-occurrence: the cosine of each paired image/text code is pulled toward
  a target ``gamma`` (> 1, so paired codes saturate toward alignment).

All gradients are derived by hand and validated against central finite
differences by :func:`gradient_check`; no autodiff framework is involved.
"""

import io
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DegenerateInputError, TrainingDivergedError
from .fileio import U32, U64, check_crc, check_magic, crc_of, read_exact, write_atomic
from .store import FeatureStore
from .structure import SimilarityStructure

MAGIC = b"DEMONN1\x00"

_PARAM_ORDER = ("w1_v", "b1_v", "w2_v", "b2_v", "w1_t", "b1_t", "w2_t", "b2_t")


@dataclass
class HashNetParams:
    """Weights of the two modality-specific hashing networks (float64)."""

    w1_v: np.ndarray
    b1_v: np.ndarray
    w2_v: np.ndarray
    b2_v: np.ndarray
    w1_t: np.ndarray
    b1_t: np.ndarray
    w2_t: np.ndarray
    b2_t: np.ndarray

    @property
    def hidden(self) -> int:
        return self.w1_v.shape[1]

    @property
    def bits(self) -> int:
        return self.w2_v.shape[1]

    def modality(self, which: str):
        if which == "image":
            return self.w1_v, self.b1_v, self.w2_v, self.b2_v
        if which == "text":
            return self.w1_t, self.b1_t, self.w2_t, self.b2_t
        raise ConfigError(f"unknown modality {which!r}", module="hashing-network")

    def arrays(self):
        return [(name, getattr(self, name)) for name in _PARAM_ORDER]

    def copy(self) -> "HashNetParams":
        return HashNetParams(*(getattr(self, n).copy() for n in _PARAM_ORDER))


@dataclass
class RelaxedBatch:
    """Paired relaxed codes of one mini-batch; rows index the same samples."""

    codes_image: np.ndarray
    codes_text: np.ndarray
    indices: np.ndarray

    def validate(self) -> None:
        for name, codes in (("image", self.codes_image), ("text", self.codes_text)):
            if np.abs(codes).max() >= 1.0:
                raise ConfigError(
                    f"relaxed {name} codes must lie strictly inside (-1, 1)",
                    module="hashing-network",
                )


@dataclass
class TrainConfig:
    bits: int = 16
    hidden: int = 512
    learning_rate: float = 1e-3
    batch_size: int = 128
    epochs: int = 100
    tau: float = 1.25
    alpha: float = 0.5
    temperature: float = 0.25
    gamma: float = 1.5
    weight_guided: float = 1.0
    weight_retrieval: float = 1.0
    weight_cooccurrence: float = 1.0
    early_stop_tol: float | None = None
    seed: int = 0

    def validate(self) -> None:
        if self.bits < 1 or self.hidden < 1:
            raise ConfigError("bits and hidden width must be >= 1", module="hashing-network")
        if self.batch_size < 2:
            raise ConfigError("batch_size must be >= 2", module="hashing-network")
        if not self.temperature > 0:
            raise ConfigError("temperature must be > 0", module="hashing-network")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be > 0", module="hashing-network")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0", module="hashing-network")
        if min(self.weight_guided, self.weight_retrieval, self.weight_cooccurrence) < 0:
            raise ConfigError("loss weights must be >= 0", module="hashing-network")
        if not self.tau > 0:
            raise ConfigError("tau must be > 0", module="hashing-network")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError("alpha must lie in [0, 1]", module="hashing-network")

    @property
    def weights(self) -> tuple[float, float, float]:
        return (self.weight_guided, self.weight_retrieval, self.weight_cooccurrence)


def init_params(cfg: TrainConfig, d_v: int, d_t: int, seed=None) -> HashNetParams:
    """Uniform +-1/sqrt(fan_in) weights, zero biases, deterministic per seed."""
    if d_v < 1 or d_t < 1:
        raise ConfigError("feature dims must be positive", module="hashing-network")
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    h, k = cfg.hidden, cfg.bits

    def layer(fan_in, fan_out):
        bound = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=(fan_in, fan_out))

    w1_v = layer(d_v, h)
    w2_v = layer(h, k)
    w1_t = layer(d_t, h)
    w2_t = layer(h, k)
    return HashNetParams(
        w1_v, np.zeros(h), w2_v, np.zeros(k),
        w1_t, np.zeros(h), w2_t, np.zeros(k),
    )


def _forward_cached(params: HashNetParams, feats: np.ndarray, modality: str):
    w1, b1, w2, b2 = params.modality(modality)
    x = np.asarray(feats, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != w1.shape[0]:
        raise ConfigError(
            f"{modality} features have shape {x.shape}, expected (B, {w1.shape[0]})",
            module="hashing-network",
        )
    z1 = x @ w1 + b1
    hidden = np.maximum(z1, 0.0)
    out = np.tanh(hidden @ w2 + b2)
    return x, z1, hidden, out


def forward(params: HashNetParams, feats: np.ndarray, modality: str) -> np.ndarray:
    """Relaxed codes ``tanh(relu(x W1 + b1) W2 + b2)`` for one modality."""
    return _forward_cached(params, feats, modality)[3]


def _backprop(cache, w2: np.ndarray, d_out: np.ndarray):
    """Parameter gradients given the gradient at the tanh output."""
    x, z1, hidden, out = cache
    dz2 = d_out * (1.0 - out * out)
    dw2 = hidden.T @ dz2
    db2 = dz2.sum(axis=0)
    dz1 = (dz2 @ w2.T) * (z1 > 0)
    dw1 = x.T @ dz1
    db1 = dz1.sum(axis=0)
    return dw1, db1, dw2, db2


def _unit_codes(codes: np.ndarray, which: str):
    codes = np.asarray(codes, dtype=np.float64)
    norms = np.linalg.norm(codes, axis=1)
    dead = np.flatnonzero(norms < 1e-12)
    if dead.size:
        raise DegenerateInputError(
            f"relaxed {which} code {int(dead[0])} has zero norm",
            module="hashing-network",
        )
    return codes / norms[:, None], norms


def _unit_backward(d_hat: np.ndarray, hat: np.ndarray, norms: np.ndarray) -> np.ndarray:
    inner = np.einsum("bk,bk->b", d_hat, hat)
    return (d_hat - inner[:, None] * hat) / norms[:, None]


def loss_guided(codes_image, codes_text, s_block):
    """Structure-preservation loss over all four modality pairings.

    Returns (loss, d_codes_image, d_codes_text). The loss averages the
    squared gap between code cosines and the structure block over B^2
    ordered pairs, summed over the (v,v), (v,t), (t,v), (t,t) pairings.
    """
    a_hat, a_norm = _unit_codes(codes_image, "image")
    c_hat, c_norm = _unit_codes(codes_text, "text")
    b = a_hat.shape[0]
    s_block = np.asarray(s_block, dtype=np.float64)
    if s_block.shape != (b, b):
        raise ConfigError(
            f"structure block has shape {s_block.shape}, expected {(b, b)}",
            module="hashing-network",
        )

    c_vv = a_hat @ a_hat.T
    c_vt = a_hat @ c_hat.T
    c_tv = c_hat @ a_hat.T
    c_tt = c_hat @ c_hat.T

    scale = 1.0 / (b * b)
    loss = 0.0
    d_a = np.zeros_like(a_hat)
    d_c = np.zeros_like(c_hat)
    for mat, left, right in (
        (c_vv, "a", "a"), (c_vt, "a", "c"), (c_tv, "c", "a"), (c_tt, "c", "c"),
    ):
        diff = mat - s_block
        loss += scale * float(np.sum(diff * diff))
        grad = (2.0 * scale) * diff
        if left == "a":
            d_a += grad @ (c_hat if right == "c" else a_hat)
        else:
            d_c += grad @ (a_hat if right == "a" else c_hat)
        if right == "a":
            d_a += grad.T @ (c_hat if left == "c" else a_hat)
        else:
            d_c += grad.T @ (a_hat if left == "a" else c_hat)

    return (
        loss,
        _unit_backward(d_a, a_hat, a_norm),
        _unit_backward(d_c, c_hat, c_norm),
    )


def _softmax_rows(raw: np.ndarray) -> np.ndarray:
    shifted = raw - raw.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def retrieval_distributions(codes_image, codes_text):
    """In-batch retrieval distributions (text-to-image, image-to-text).

    Row i of the text-to-image matrix holds the cosine of text code i
    against every image code, mapped through an exponential (softmax)
    normalization so each row is a strictly positive distribution.
    """
    a_hat, _ = _unit_codes(codes_image, "image")
    c_hat, _ = _unit_codes(codes_text, "text")
    p_t2i = _softmax_rows(c_hat @ a_hat.T)
    p_i2t = _softmax_rows(a_hat @ c_hat.T)
    return p_t2i, p_i2t


def sharpen(p: np.ndarray, temperature: float) -> np.ndarray:
    """Raise a distribution to 1/T and renormalize (rows of 2-d input).

    Concentrates mass on high-probability entries for T < 1 while
    preserving the ranking; T = 1 leaves the distribution unchanged.
    """
    if not temperature > 0:
        raise ConfigError("sharpen temperature must be > 0", module="hashing-network")
    p = np.asarray(p, dtype=np.float64)
    if p.min() < -1e-9:
        raise ConfigError("sharpen input has negative entries", module="hashing-network")
    sums = p.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > 1e-9):
        raise ConfigError(
            "sharpen input rows must sum to 1 within 1e-9", module="hashing-network"
        )
    powered = np.clip(p, 0.0, None) ** (1.0 / temperature)
    total = powered.sum(axis=-1, keepdims=True)
    if np.any(total == 0.0):
        raise DegenerateInputError("sharpen input is all zeros", module="hashing-network")
    return powered / total


def loss_retrieval(p_i2t, p_t2i, temperature: float, targets=None):
    """Symmetric KL between the two retrieval directions (batch mean).

    Each direction's sharpened distribution serves as a fixed target for
    the other direction: ``(1/B) * sum_i [KL(sharpen(p_i2t_i) || p_t2i_i)
    + KL(sharpen(p_t2i_i) || p_i2t_i)]``. The batch-mean reduction keeps
    the term's gradient scale independent of the batch size, matching the
    other objectives. No gradient flows through the targets; the returned
    gradients are w.r.t. the raw distribution entries (``-q/p`` of the
    cross-entropy part, scaled by 1/B).

    ``targets`` overrides the sharpened targets, which the finite
    difference oracle uses to freeze them across perturbations.
    """
    p_i2t = np.atleast_2d(np.asarray(p_i2t, dtype=np.float64))
    p_t2i = np.atleast_2d(np.asarray(p_t2i, dtype=np.float64))
    if p_i2t.shape != p_t2i.shape:
        raise ConfigError("retrieval distributions must share a shape", module="hashing-network")
    if p_i2t.min() <= 0.0 or p_t2i.min() <= 0.0:
        raise DegenerateInputError(
            "retrieval distributions must be strictly positive", module="hashing-network"
        )
    if targets is None:
        q_i2t = sharpen(p_i2t, temperature)
        q_t2i = sharpen(p_t2i, temperature)
    else:
        q_i2t, q_t2i = targets
    b = p_i2t.shape[0]

    def kl(q, p):
        ratio = np.where(q > 0, q / p, 1.0)
        return float(np.sum(np.where(q > 0, q * np.log(ratio), 0.0)))

    loss = (kl(q_i2t, p_t2i) + kl(q_t2i, p_i2t)) / b
    d_p_i2t = -q_t2i / p_i2t / b
    d_p_t2i = -q_i2t / p_t2i / b
    return loss, d_p_i2t, d_p_t2i


def _softmax_backward(p: np.ndarray, d_p: np.ndarray) -> np.ndarray:
    inner = np.einsum("bk,bk->b", d_p, p)
    return p * (d_p - inner[:, None])


def retrieval_consistency(codes_image, codes_text, temperature: float, targets=None):
    """Retrieval-consistency loss with gradients w.r.t. the relaxed codes.

    Chains :func:`loss_retrieval` through the softmax normalization and the
    code cosines. Returns (loss, d_codes_image, d_codes_text, (p_t2i, p_i2t)).
    """
    a_hat, a_norm = _unit_codes(codes_image, "image")
    c_hat, c_norm = _unit_codes(codes_text, "text")
    p_t2i = _softmax_rows(c_hat @ a_hat.T)
    p_i2t = _softmax_rows(a_hat @ c_hat.T)
    loss, d_p_i2t, d_p_t2i = loss_retrieval(p_i2t, p_t2i, temperature, targets=targets)

    g_raw_t2i = _softmax_backward(p_t2i, d_p_t2i)
    g_raw_i2t = _softmax_backward(p_i2t, d_p_i2t)

    d_a = g_raw_t2i.T @ c_hat + g_raw_i2t @ c_hat
    d_c = g_raw_t2i @ a_hat + g_raw_i2t.T @ a_hat
    return (
        loss,
        _unit_backward(d_a, a_hat, a_norm),
        _unit_backward(d_c, c_hat, c_norm),
        (p_t2i, p_i2t),
    )


def loss_cooccurrence(codes_image, codes_text, gamma: float):
    """Pull each paired image/text cosine toward ``gamma`` (mean over the batch)."""
    a_hat, a_norm = _unit_codes(codes_image, "image")
    c_hat, c_norm = _unit_codes(codes_text, "text")
    b = a_hat.shape[0]
    sims = np.einsum("bk,bk->b", a_hat, c_hat)
    diff = sims - gamma
    loss = float(np.mean(diff * diff))
    ds = (2.0 / b) * diff
    d_a = ds[:, None] * c_hat
    d_c = ds[:, None] * a_hat
    return (
        loss,
        _unit_backward(d_a, a_hat, a_norm),
        _unit_backward(d_c, c_hat, c_norm),
    )


def total_loss(
    codes_image,
    codes_text,
    s_block,
    *,
    temperature: float = 0.25,
    gamma: float = 1.5,
    weights: tuple[float, float, float] = (1.0, 1.0, 1.0),
    ret_targets=None,
):
    """Weighted sum of the three objectives with summed gradients.

    Returns (total, components, d_codes_image, d_codes_text) where
    components maps "guided"/"retrieval"/"cooccurrence" to their
    unweighted values.
    """
    w_gui, w_ret, w_co = weights
    l_gui, gv_gui, gt_gui = loss_guided(codes_image, codes_text, s_block)
    l_ret, gv_ret, gt_ret, _ = retrieval_consistency(
        codes_image, codes_text, temperature, targets=ret_targets
    )
    l_co, gv_co, gt_co = loss_cooccurrence(codes_image, codes_text, gamma)

    total = w_gui * l_gui + w_ret * l_ret + w_co * l_co
    d_image = w_gui * gv_gui + w_ret * gv_ret + w_co * gv_co
    d_text = w_gui * gt_gui + w_ret * gt_ret + w_co * gt_co
    components = {"guided": l_gui, "retrieval": l_ret, "cooccurrence": l_co}
    return total, components, d_image, d_text


def image_inputs(store: FeatureStore) -> np.ndarray:
    """Per-sample image representation: re-normalized mean of the view set."""
    means = store.image_views.astype(np.float64).mean(axis=1)
    norms = np.linalg.norm(means, axis=1)
    dead = np.flatnonzero(norms < 1e-12)
    if dead.size:
        raise DegenerateInputError(
            f"view mean of sample {int(dead[0])} has zero norm",
            module="hashing-network",
        )
    return means / norms[:, None]


def text_inputs(store: FeatureStore) -> np.ndarray:
    text = store.text_embeddings.astype(np.float64)
    return text / np.linalg.norm(text, axis=1)[:, None]


def train(store: FeatureStore, structure: SimilarityStructure, cfg: TrainConfig):
    """Mini-batch SGD over shuffled epochs (single-threaded, deterministic).

    Returns (params, trace) where trace holds one row per epoch:
    (epoch, mean guided, mean retrieval, mean co-occurrence, mean total).
    """
    cfg.validate()
    n = store.num_samples
    s = structure.s
    if s.shape != (n, n):
        raise ConfigError(
            f"structure is {s.shape} but store has {n} samples",
            module="hashing-network",
        )

    x_image = image_inputs(store)
    x_text = text_inputs(store)

    init_seed, shuffle_seed = np.random.SeedSequence(cfg.seed).spawn(2)
    params = init_params(cfg, store.image_dim, store.text_dim, seed=init_seed)
    rng = np.random.default_rng(shuffle_seed)

    lr = cfg.learning_rate
    trace: list[tuple[int, float, float, float, float]] = []
    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        sums = np.zeros(4)
        batches = 0
        for start in range(0, n, cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            # Overflow in a diverging run is diagnosed by the finiteness
            # check below, not by numpy warnings.
            with np.errstate(over="ignore", invalid="ignore"):
                cache_v = _forward_cached(params, x_image[idx], "image")
                cache_t = _forward_cached(params, x_text[idx], "text")
                batch = RelaxedBatch(cache_v[3], cache_t[3], idx)

                total, comps, d_bv, d_bt = total_loss(
                    batch.codes_image,
                    batch.codes_text,
                    s[np.ix_(idx, idx)],
                    temperature=cfg.temperature,
                    gamma=cfg.gamma,
                    weights=cfg.weights,
                )
            _check_finite(comps, total, epoch, batches)

            with np.errstate(over="ignore", invalid="ignore"):
                dw1v, db1v, dw2v, db2v = _backprop(cache_v, params.w2_v, d_bv)
                dw1t, db1t, dw2t, db2t = _backprop(cache_t, params.w2_t, d_bt)
                params.w1_v -= lr * dw1v
                params.b1_v -= lr * db1v
                params.w2_v -= lr * dw2v
                params.b2_v -= lr * db2v
                params.w1_t -= lr * dw1t
                params.b1_t -= lr * db1t
                params.w2_t -= lr * dw2t
                params.b2_t -= lr * db2t

            sums += (comps["guided"], comps["retrieval"], comps["cooccurrence"], total)
            batches += 1

        means = sums / batches
        trace.append((epoch, float(means[0]), float(means[1]), float(means[2]), float(means[3])))
        if cfg.early_stop_tol is not None and len(trace) >= 20:
            last = np.mean([row[4] for row in trace[-10:]])
            prev = np.mean([row[4] for row in trace[-20:-10]])
            if prev - last < cfg.early_stop_tol:
                break
    return params, trace


def _check_finite(comps: dict, total: float, epoch: int, batch: int) -> None:
    for name, value in comps.items():
        if not np.isfinite(value):
            raise TrainingDivergedError(
                f"{name} loss is {value} at epoch {epoch}, batch {batch}"
            )
    if not np.isfinite(total):
        raise TrainingDivergedError(f"total loss is {total} at epoch {epoch}, batch {batch}")


def gradient_check(
    params: HashNetParams,
    feats_image: np.ndarray,
    feats_text: np.ndarray,
    s_block: np.ndarray,
    cfg: TrainConfig,
    step: float = 1e-5,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Covers each loss term and the total. The retrieval targets are frozen
    at the unperturbed parameters so the finite differences probe the same
    stop-gradient objective the analytic path implements. Relative error
    is measured per parameter block as ``||ga - gfd|| / max(||ga|| +
    ||gfd||, 1e-12)``.
    """
    base_bv = forward(params, feats_image, "image")
    base_bt = forward(params, feats_text, "text")
    p_t2i, p_i2t = retrieval_distributions(base_bv, base_bt)
    frozen = (sharpen(p_i2t, cfg.temperature), sharpen(p_t2i, cfg.temperature))

    def eval_loss(which: str, p: HashNetParams) -> float:
        bv = forward(p, feats_image, "image")
        bt = forward(p, feats_text, "text")
        if which == "guided":
            return loss_guided(bv, bt, s_block)[0]
        if which == "retrieval":
            return retrieval_consistency(bv, bt, cfg.temperature, targets=frozen)[0]
        if which == "cooccurrence":
            return loss_cooccurrence(bv, bt, cfg.gamma)[0]
        return total_loss(
            bv, bt, s_block,
            temperature=cfg.temperature, gamma=cfg.gamma,
            weights=cfg.weights, ret_targets=frozen,
        )[0]

    def analytic(which: str) -> dict[str, np.ndarray]:
        cache_v = _forward_cached(params, feats_image, "image")
        cache_t = _forward_cached(params, feats_text, "text")
        bv, bt = cache_v[3], cache_t[3]
        if which == "guided":
            _, d_bv, d_bt = loss_guided(bv, bt, s_block)
        elif which == "retrieval":
            _, d_bv, d_bt, _ = retrieval_consistency(
                bv, bt, cfg.temperature, targets=frozen
            )
        elif which == "cooccurrence":
            _, d_bv, d_bt = loss_cooccurrence(bv, bt, cfg.gamma)
        else:
            _, _, d_bv, d_bt = total_loss(
                bv, bt, s_block,
                temperature=cfg.temperature, gamma=cfg.gamma,
                weights=cfg.weights, ret_targets=frozen,
            )
        gv = _backprop(cache_v, params.w2_v, d_bv)
        gt = _backprop(cache_t, params.w2_t, d_bt)
        return {
            "w1_v": gv[0], "b1_v": gv[1], "w2_v": gv[2], "b2_v": gv[3],
            "w1_t": gt[0], "b1_t": gt[1], "w2_t": gt[2], "b2_t": gt[3],
        }

    worst = 0.0
    for which in ("guided", "retrieval", "cooccurrence", "total"):
        exact = analytic(which)
        for name, array in params.arrays():
            fd = np.zeros_like(array)
            flat = array.ravel()
            fd_flat = fd.ravel()
            for j in range(flat.size):
                original = flat[j]
                flat[j] = original + step
                hi = eval_loss(which, params)
                flat[j] = original - step
                lo = eval_loss(which, params)
                flat[j] = original
                fd_flat[j] = (hi - lo) / (2.0 * step)
            ga = exact[name]
            err = np.linalg.norm(ga - fd) / max(np.linalg.norm(ga) + np.linalg.norm(fd), 1e-12)
            worst = max(worst, float(err))
    return worst


def write_loss_trace(path, trace) -> None:
    """Emit the per-epoch loss trace as CSV."""
    lines = ["epoch,loss_guided,loss_retrieval,loss_cooccurrence,loss_total"]
    for epoch, gui, ret, co, total in trace:
        lines.append(f"{epoch},{gui!r},{ret!r},{co!r},{total!r}")
    write_atomic(path, ("\n".join(lines) + "\n").encode("utf-8"))


def save_params(path, params: HashNetParams) -> None:
    """Serialize network weights (DEMONN1: shapes header, float64 payload, CRC32)."""
    d_v = params.w1_v.shape[0]
    d_t = params.w1_t.shape[0]
    header = b"".join(
        U64.pack(v) for v in (d_v, d_t, params.hidden, params.bits)
    )
    payload = io.BytesIO()
    for _, array in params.arrays():
        payload.write(np.ascontiguousarray(array, dtype="<f8").tobytes())
    body = payload.getvalue()
    write_atomic(path, MAGIC + header + body + U32.pack(crc_of(body)))


def load_params(path) -> HashNetParams:
    with open(path, "rb") as fh:
        check_magic(fh, MAGIC, path)
        header = read_exact(fh, 4 * 8, "header")
        d_v, d_t, hidden, bits = (U64.unpack_from(header, i * 8)[0] for i in range(4))
        shapes = {
            "w1_v": (d_v, hidden), "b1_v": (hidden,),
            "w2_v": (hidden, bits), "b2_v": (bits,),
            "w1_t": (d_t, hidden), "b1_t": (hidden,),
            "w2_t": (hidden, bits), "b2_t": (bits,),
        }
        count = sum(int(np.prod(s)) for s in shapes.values())
        body = read_exact(fh, count * 8, "payload")
        stored = U32.unpack(read_exact(fh, 4, "checksum"))[0]
        check_crc(body, stored, path)
    arrays = {}
    offset = 0
    for name in _PARAM_ORDER:
        shape = shapes[name]
        size = int(np.prod(shape))
        arrays[name] = (
            np.frombuffer(body, dtype="<f8", count=size, offset=offset)
            .reshape(shape)
            .copy()
        )
        offset += size * 8
    return HashNetParams(**arrays)
