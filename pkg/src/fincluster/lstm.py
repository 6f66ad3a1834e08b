"""LSTM autoencoder with a 1-D bottleneck for temporal feature fusion.

One recurrent layer with peephole gates compresses each company's F ratio
features per quarter into a single latent value z; a per-step affine head
reconstructs the F inputs from z so the mean-squared reconstruction error is
defined through the bottleneck. Per step:

    g  = tanh(Wg x + Rg h + bg)                block input
    i  = sigmoid(Wi x + Ri h + pi*c  + bi)     input gate   (old cell state)
    f  = sigmoid(Wf x + Rf h + pf*c  + bf)     forget gate  (old cell state)
    c' = f*c + i*g                             cell update
    o  = sigmoid(Wo x + Ro h + po*c' + bo)     output gate  (new cell state)
    h' = tanh(c') * o                          hidden update
    z  = wz . h' + bz                          bottleneck output
    x^ = wr z + br                             reconstruction

Training is plain backpropagation through time with Adam, double precision,
deterministic given the seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields as dc_fields
from pathlib import Path

import numpy as np

CHECKPOINT_VERSION = 1

#: Parameter fields in fixed serialization order.
PARAM_FIELDS = (
    "w_g", "w_i", "w_f", "w_o",
    "r_g", "r_i", "r_f", "r_o",
    "b_g", "b_i", "b_f", "b_o",
    "p_i", "p_f", "p_o",
    "w_z", "b_z", "w_r", "b_r",
)


class LstmError(ValueError):
    """Invalid LSTM input or configuration."""


class TrainingDiverged(RuntimeError):
    """A non-finite value appeared during training."""


@dataclass
class LstmParams:
    """All learnable tensors of the autoencoder."""

    hidden: int
    n_features: int
    w_g: np.ndarray  # (y, F)
    w_i: np.ndarray
    w_f: np.ndarray
    w_o: np.ndarray
    r_g: np.ndarray  # (y, y)
    r_i: np.ndarray
    r_f: np.ndarray
    r_o: np.ndarray
    b_g: np.ndarray  # (y,)
    b_i: np.ndarray
    b_f: np.ndarray
    b_o: np.ndarray
    p_i: np.ndarray  # (y,)
    p_f: np.ndarray
    p_o: np.ndarray
    w_z: np.ndarray  # (y,)
    b_z: np.ndarray  # ()
    w_r: np.ndarray  # (F,)
    b_r: np.ndarray  # (F,)

    def tensors(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAM_FIELDS}

    def copy(self) -> "LstmParams":
        return LstmParams(
            hidden=self.hidden,
            n_features=self.n_features,
            **{name: getattr(self, name).copy() for name in PARAM_FIELDS},
        )


@dataclass
class LstmState:
    """Cell and hidden state, zero-initialized at the first step."""

    c: np.ndarray
    h: np.ndarray

    @classmethod
    def zeros(cls, batch: int, hidden: int) -> "LstmState":
        return cls(c=np.zeros((batch, hidden)), h=np.zeros((batch, hidden)))


@dataclass
class LatentSeries:
    """One fused 1-D trajectory per company: the (N, J, 1) latent grid with
    its company and period labels."""

    companies: list
    periods: list
    z: np.ndarray

    @property
    def n_companies(self) -> int:
        return len(self.companies)

    @property
    def n_periods(self) -> int:
        return len(self.periods)


@dataclass
class TrainConfig:
    """Optimizer and schedule settings. Learning rate 0 is allowed and acts
    as an evaluation-only run (constant loss history)."""

    hidden: int = 64
    epochs: int = 12
    batch_size: int = 16
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0

    def validate(self) -> None:
        if self.epochs < 1:
            raise LstmError("epochs must be >= 1")
        if self.batch_size < 1:
            raise LstmError("batch size must be >= 1")
        if self.learning_rate < 0:
            raise LstmError("learning rate must be >= 0")
        if self.hidden < 1:
            raise LstmError("hidden size must be >= 1")


def init_params(hidden: int, n_features: int, rng: np.random.Generator) -> LstmParams:
    """Uniform [-k, k] with k = 1/sqrt(hidden) for weight matrices; zero
    biases and peepholes."""
    k = 1.0 / np.sqrt(hidden)

    def w(*shape):
        return rng.uniform(-k, k, size=shape)

    return LstmParams(
        hidden=hidden,
        n_features=n_features,
        w_g=w(hidden, n_features), w_i=w(hidden, n_features),
        w_f=w(hidden, n_features), w_o=w(hidden, n_features),
        r_g=w(hidden, hidden), r_i=w(hidden, hidden),
        r_f=w(hidden, hidden), r_o=w(hidden, hidden),
        b_g=np.zeros(hidden), b_i=np.zeros(hidden),
        b_f=np.zeros(hidden), b_o=np.zeros(hidden),
        p_i=np.zeros(hidden), p_f=np.zeros(hidden), p_o=np.zeros(hidden),
        w_z=w(hidden), b_z=np.zeros(()),
        w_r=w(n_features), b_r=np.zeros(n_features),
    )


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-x))


def lstm_step(
    params: LstmParams,
    state: LstmState,
    x: np.ndarray,
) -> tuple[LstmState, np.ndarray, np.ndarray]:
    """One recurrent step. ``x`` is (F,) or (B, F); returns the new state,
    the bottleneck output z, and the reconstruction of x."""
    single = x.ndim == 1
    xb = np.atleast_2d(np.asarray(x, dtype=float))
    c, h = np.atleast_2d(state.c), np.atleast_2d(state.h)

    g = np.tanh(xb @ params.w_g.T + h @ params.r_g.T + params.b_g)
    i = _sigmoid(xb @ params.w_i.T + h @ params.r_i.T + c * params.p_i + params.b_i)
    f = _sigmoid(xb @ params.w_f.T + h @ params.r_f.T + c * params.p_f + params.b_f)
    c_new = f * c + i * g
    o = _sigmoid(xb @ params.w_o.T + h @ params.r_o.T + c_new * params.p_o + params.b_o)
    h_new = np.tanh(c_new) * o
    z = h_new @ params.w_z + params.b_z
    x_hat = z[:, None] * params.w_r + params.b_r

    if single:
        return LstmState(c=c_new[0], h=h_new[0]), float(z[0]), x_hat[0]
    return LstmState(c=c_new, h=h_new), z, x_hat


def _forward_cached(params: LstmParams, batch: np.ndarray) -> dict[str, np.ndarray]:
    """Forward over (B, J, F), caching everything the backward pass needs."""
    b, j, n_feat = batch.shape
    y = params.hidden
    cache = {
        "x": batch,
        "g": np.empty((b, j, y)), "i": np.empty((b, j, y)),
        "f": np.empty((b, j, y)), "o": np.empty((b, j, y)),
        "c_prev": np.empty((b, j, y)), "c": np.empty((b, j, y)),
        "tanh_c": np.empty((b, j, y)),
        "h_prev": np.empty((b, j, y)), "h": np.empty((b, j, y)),
        "z": np.empty((b, j)), "x_hat": np.empty((b, j, n_feat)),
    }
    c = np.zeros((b, y))
    h = np.zeros((b, y))
    for t in range(j):
        x_t = batch[:, t, :]
        g = np.tanh(x_t @ params.w_g.T + h @ params.r_g.T + params.b_g)
        i = _sigmoid(x_t @ params.w_i.T + h @ params.r_i.T + c * params.p_i + params.b_i)
        f = _sigmoid(x_t @ params.w_f.T + h @ params.r_f.T + c * params.p_f + params.b_f)
        c_new = f * c + i * g
        o = _sigmoid(x_t @ params.w_o.T + h @ params.r_o.T + c_new * params.p_o + params.b_o)
        tanh_c = np.tanh(c_new)
        h_new = tanh_c * o
        z = h_new @ params.w_z + params.b_z
        if not np.all(np.isfinite(c_new)):
            raise TrainingDiverged(f"non-finite cell state at step {t}")
        cache["g"][:, t] = g
        cache["i"][:, t] = i
        cache["f"][:, t] = f
        cache["o"][:, t] = o
        cache["c_prev"][:, t] = c
        cache["c"][:, t] = c_new
        cache["tanh_c"][:, t] = tanh_c
        cache["h_prev"][:, t] = h
        cache["h"][:, t] = h_new
        cache["z"][:, t] = z
        cache["x_hat"][:, t] = z[:, None] * params.w_r + params.b_r
        c, h = c_new, h_new
    return cache


def forward_sequence(
    params: LstmParams,
    series: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Thread the state through a full series from the zero initial state.

    ``series`` is (J, F) or (B, J, F); returns the per-step bottleneck values
    and reconstructions with matching leading dimensions.
    """
    arr = np.asarray(series, dtype=float)
    single = arr.ndim == 2
    if single:
        arr = arr[None]
    if arr.ndim != 3 or arr.shape[1] < 1:
        raise LstmError(f"expected (B, J, F) with J >= 1, got shape {arr.shape}")
    cache = _forward_cached(params, arr)
    z, x_hat = cache["z"][..., None], cache["x_hat"]
    if single:
        return z[0], x_hat[0]
    return z, x_hat


def mse_loss(target: np.ndarray, reconstruction: np.ndarray) -> float:
    """Mean over all N*J*F squared residuals."""
    target = np.asarray(target, dtype=float)
    reconstruction = np.asarray(reconstruction, dtype=float)
    if target.shape != reconstruction.shape:
        raise LstmError(f"shape mismatch: {target.shape} vs {reconstruction.shape}")
    return float(np.mean((target - reconstruction) ** 2))


def backward_sequence(
    params: LstmParams,
    cache: dict[str, np.ndarray],
    d_x_hat: np.ndarray,
) -> dict[str, np.ndarray]:
    """Exact gradients of a loss with the given d(loss)/d(x_hat), through the
    bottleneck, both peephole paths, and the recurrence."""
    x = cache["x"]
    b, j, _ = x.shape
    grads = {name: np.zeros_like(getattr(params, name)) for name in PARAM_FIELDS}

    dh_next = np.zeros((b, params.hidden))
    dc_next = np.zeros((b, params.hidden))
    for t in range(j - 1, -1, -1):
        dxh = d_x_hat[:, t, :]
        z_t = cache["z"][:, t]
        dz = dxh @ params.w_r
        grads["w_r"] += (dxh * z_t[:, None]).sum(axis=0)
        grads["b_r"] += dxh.sum(axis=0)

        dh = dz[:, None] * params.w_z + dh_next
        grads["w_z"] += (cache["h"][:, t] * dz[:, None]).sum(axis=0)
        grads["b_z"] += dz.sum()

        o = cache["o"][:, t]
        tanh_c = cache["tanh_c"][:, t]
        do = dh * tanh_c
        da_o = do * o * (1.0 - o)

        dc = dh * o * (1.0 - tanh_c**2) + da_o * params.p_o + dc_next

        g = cache["g"][:, t]
        i = cache["i"][:, t]
        f = cache["f"][:, t]
        c_prev = cache["c_prev"][:, t]
        da_i = dc * g * i * (1.0 - i)
        da_f = dc * c_prev * f * (1.0 - f)
        da_g = dc * i * (1.0 - g**2)

        x_t = x[:, t, :]
        h_prev = cache["h_prev"][:, t]
        for name, da in (("g", da_g), ("i", da_i), ("f", da_f), ("o", da_o)):
            grads[f"w_{name}"] += da.T @ x_t
            grads[f"r_{name}"] += da.T @ h_prev
            grads[f"b_{name}"] += da.sum(axis=0)
        grads["p_i"] += (da_i * c_prev).sum(axis=0)
        grads["p_f"] += (da_f * c_prev).sum(axis=0)
        grads["p_o"] += (da_o * cache["c"][:, t]).sum(axis=0)

        dh_next = da_g @ params.r_g + da_i @ params.r_i + da_f @ params.r_f + da_o @ params.r_o
        dc_next = dc * f + da_i * params.p_i + da_f * params.p_f
    return grads


def _per_item_losses_and_gradients(
    params: LstmParams,
    batch: np.ndarray,
) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    """Per-company summed squared residuals (B,) and the exact gradients of
    their batch mean. The per-item sums only depend on each company's own
    data, so epoch aggregates are independent of batch composition."""
    cache = _forward_cached(params, batch)
    residual = cache["x_hat"] - batch
    per_item = (residual**2).reshape(batch.shape[0], -1).sum(axis=1)
    d_x_hat = 2.0 * residual / residual.size
    return per_item, backward_sequence(params, cache, d_x_hat)


def loss_and_gradients(
    params: LstmParams,
    batch: np.ndarray,
) -> tuple[float, dict[str, np.ndarray]]:
    """Reconstruction MSE of a (B, J, F) batch and its exact gradients."""
    batch = np.asarray(batch, dtype=float)
    per_item, grads = _per_item_losses_and_gradients(params, batch)
    return float(per_item.sum() / batch.size), grads


@dataclass
class AdamState:
    """First/second moment accumulators, persisted across steps."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def zeros(cls, params: LstmParams) -> "AdamState":
        return cls(
            m={name: np.zeros_like(getattr(params, name)) for name in PARAM_FIELDS},
            v={name: np.zeros_like(getattr(params, name)) for name in PARAM_FIELDS},
        )


def adam_update(
    params: LstmParams,
    grads: dict[str, np.ndarray],
    state: AdamState,
    config: TrainConfig,
) -> None:
    """Bias-corrected Adam step, in place."""
    state.t += 1
    b1, b2 = config.beta1, config.beta2
    correction1 = 1.0 - b1**state.t
    correction2 = 1.0 - b2**state.t
    for name in PARAM_FIELDS:
        g = grads[name]
        state.m[name] = b1 * state.m[name] + (1.0 - b1) * g
        state.v[name] = b2 * state.v[name] + (1.0 - b2) * g**2
        m_hat = state.m[name] / correction1
        v_hat = state.v[name] / correction2
        tensor = getattr(params, name)
        tensor -= config.learning_rate * m_hat / (np.sqrt(v_hat) + config.epsilon)


def train(
    values: np.ndarray,
    config: TrainConfig,
) -> tuple[LstmParams, list[float]]:
    """Train the autoencoder on a standardized (N, J, F) grid.

    Companies are shuffled each epoch by the seeded generator and split into
    batches of the configured size; the last partial batch is trained too.
    The loss history holds one company-weighted mean loss per epoch.
    """
    config.validate()
    data = np.asarray(getattr(values, "values", values), dtype=float)
    if data.ndim != 3:
        raise LstmError(f"expected (N, J, F) tensor, got shape {data.shape}")
    if not np.all(np.isfinite(data)):
        raise LstmError("training tensor must be finite")
    n = data.shape[0]

    rng = np.random.default_rng(config.seed)
    params = init_params(config.hidden, data.shape[2], rng)
    adam = AdamState.zeros(params)

    history: list[float] = []
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        # Company-indexed accumulation keeps the epoch mean independent of
        # batch composition (so an lr=0 run has an exactly constant history).
        company_sq = np.zeros(n)
        for batch_no, start in enumerate(range(0, n, config.batch_size)):
            idx = order[start:start + config.batch_size]
            try:
                per_item, grads = _per_item_losses_and_gradients(params, data[idx])
            except TrainingDiverged as exc:
                raise TrainingDiverged(f"epoch {epoch}, batch {batch_no}: {exc}") from exc
            if not np.all(np.isfinite(per_item)):
                raise TrainingDiverged(f"epoch {epoch}, batch {batch_no}: non-finite loss")
            company_sq[idx] = per_item
            adam_update(params, grads, adam, config)
        history.append(float(company_sq.sum() / data.size))
    return params, history


def encode(params: LstmParams, values: np.ndarray) -> np.ndarray:
    """The (N, J, 1) latent grid for a standardized (N, J, F) tensor."""
    data = np.asarray(getattr(values, "values", values), dtype=float)
    if data.ndim != 3:
        raise LstmError(f"expected (N, J, F) tensor, got shape {data.shape}")
    z, _ = forward_sequence(params, data)
    return z


def encode_series(params: LstmParams, tensor) -> LatentSeries:
    """Encode a labeled ratio tensor into a labeled latent series."""
    return LatentSeries(
        companies=list(tensor.companies),
        periods=list(tensor.periods),
        z=encode(params, tensor.values),
    )


def params_to_vector(params: LstmParams) -> np.ndarray:
    """Flatten all parameters in the fixed field order."""
    return np.concatenate([np.ravel(getattr(params, name)) for name in PARAM_FIELDS])


def vector_to_params(vector: np.ndarray, like: LstmParams) -> LstmParams:
    """Rebuild parameters from a flat vector (inverse of params_to_vector)."""
    out = like.copy()
    offset = 0
    for name in PARAM_FIELDS:
        shape = getattr(like, name).shape
        size = int(np.prod(shape)) if shape else 1
        setattr(out, name, vector[offset:offset + size].reshape(shape).copy())
        offset += size
    if offset != vector.size:
        raise LstmError(f"vector length {vector.size} != parameter count {offset}")
    return out


def save_params(
    params: LstmParams,
    path: str | Path,
    config: TrainConfig | None = None,
) -> None:
    """Versioned checkpoint: shapes, config, and tensors in fixed order."""
    payload: dict = {
        "format_version": CHECKPOINT_VERSION,
        "hidden": params.hidden,
        "n_features": params.n_features,
    }
    if config is not None:
        payload["config"] = {f.name: getattr(config, f.name) for f in dc_fields(config)}
    payload["tensors"] = {name: getattr(params, name).tolist() for name in PARAM_FIELDS}
    Path(path).write_text(json.dumps(payload, indent=2))


def load_params(path: str | Path) -> LstmParams:
    payload = json.loads(Path(path).read_text())
    if payload.get("format_version") != CHECKPOINT_VERSION:
        raise LstmError(f"unsupported checkpoint version {payload.get('format_version')}")
    tensors = {
        name: np.asarray(payload["tensors"][name], dtype=float) for name in PARAM_FIELDS
    }
    return LstmParams(hidden=payload["hidden"], n_features=payload["n_features"], **tensors)
