"""Deep-unrolled completion network.

K blocks replay one ADMM iteration each: closed-form X/E/N updates with the
same algebra as the classical solver, but the P/Q proximal steps are replaced
by small learned convolutional mappers and the five per-block scalars
(mu, theta, beta, lambda, delta) are trainable. Positivity is enforced by
storing logs and decoding through exp inside the graph, so gradients flow
through the decode. alpha and rho stay fixed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .errors import InvalidArgumentError, NumericalFailureError
from .propagation import ldpl_interpolate
from .tensors import ObservationMask, as_tensor

_SCALAR_NAMES = ("log_mu", "log_theta", "log_beta", "log_lambda", "log_delta")


@dataclass(frozen=True)
class MapperSpec:
    """Shared topology of the V/W proximal mappers (weights are per block)."""

    hidden_channels: tuple = (16, 16)
    kernel: int = 3
    residual: bool = True

    def __post_init__(self):
        if self.kernel < 1 or self.kernel % 2 == 0:
            raise InvalidArgumentError(f"kernel must be odd and positive, got {self.kernel}")
        try:
            channels = tuple(int(c) for c in self.hidden_channels)
        except TypeError:
            raise InvalidArgumentError(
                f"hidden_channels must be a sequence of counts, got {self.hidden_channels!r}")
        if any(c <= 0 for c in channels):
            raise InvalidArgumentError(f"hidden channels must be positive, got {self.hidden_channels}")
        object.__setattr__(self, "hidden_channels", channels)

    def layer_dims(self, k_bands: int) -> list:
        widths = (k_bands,) + self.hidden_channels + (k_bands,)
        return [(widths[i], widths[i + 1]) for i in range(len(widths) - 1)]


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    batch_size: int = 1
    lr: float = 1e-3
    seed: int = 0
    val_split: float = 0.2

    def __post_init__(self):
        if self.epochs < 1:
            raise InvalidArgumentError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size != 1:
            raise InvalidArgumentError("only batch size 1 is supported")
        if not 0.0 < self.val_split < 1.0:
            raise InvalidArgumentError(f"val_split must be in (0, 1), got {self.val_split}")
        if not np.isfinite(self.lr) or self.lr < 0:
            raise InvalidArgumentError(f"lr must be finite and >= 0, got {self.lr}")


class BlockParams:
    """Learnable state of one unrolled block: five log scalars + two mappers."""

    def __init__(self, scalars, v_layers, w_layers):
        self.log_mu, self.log_theta, self.log_beta, self.log_lambda, self.log_delta = scalars
        self.v_layers = v_layers  # list of (weight Node, bias Node)
        self.w_layers = w_layers

    def scalar_nodes(self):
        return [getattr(self, n) for n in _SCALAR_NAMES]

    def decoded_scalars(self) -> dict:
        return {n[4:]: float(np.exp(getattr(self, n).value)) for n in _SCALAR_NAMES}

    def params(self):
        out = list(self.scalar_nodes())
        for wn, bn in self.v_layers + self.w_layers:
            out.append(wn)
            out.append(bn)
        return out


class UnrolledModel:
    def __init__(self, k_blocks, k_bands, blocks, mapper_spec, loss_omega, alpha, rho):
        self.k_blocks = k_blocks
        self.k_bands = k_bands
        self.blocks = blocks
        self.mapper_spec = mapper_spec
        self.loss_omega = loss_omega
        self.alpha = tuple(float(a) for a in alpha)
        self.rho = float(rho)

    @classmethod
    def create(cls, h: int = 64, w: int = 64, k_bands: int = 3, k_blocks: int = 5,
               mapper: MapperSpec | None = None, loss_omega: float = 0.8,
               alpha=(1 / 3, 1 / 3, 1 / 3), rho: float = 1e-2, seed: int = 0) -> "UnrolledModel":
        if k_blocks < 1:
            raise InvalidArgumentError(f"k_blocks must be >= 1, got {k_blocks}")
        if k_bands < 1 or h < 1 or w < 1:
            raise InvalidArgumentError(f"bad dims {h}x{w}x{k_bands}")
        if not 0.0 <= loss_omega <= 1.0:
            raise InvalidArgumentError(f"loss_omega must be in [0, 1], got {loss_omega}")
        if len(alpha) != 3 or any(a < 0 for a in alpha) or abs(sum(alpha) - 1.0) > 1e-12:
            raise InvalidArgumentError(f"alpha must be three nonneg weights summing to 1, got {alpha}")
        if not rho > 0:
            raise InvalidArgumentError(f"rho must be positive, got {rho}")
        mapper = mapper or MapperSpec()
        rng = np.random.default_rng(seed)
        # scalar inits match the classical solver so an untrained net behaves
        # like truncated classical ADMM; delta starts small but positive so
        # log-decode and the ball gradient are well defined
        inits = (1e-2, 1e-2, 1e-2, 1.0 / math.sqrt(max(h, w)), 1e-3)
        blocks = []
        for _ in range(k_blocks):
            scalars = [ad.Node(np.asarray(math.log(v))) for v in inits]
            blocks.append(BlockParams(
                scalars,
                _init_mapper(rng, mapper, k_bands),
                _init_mapper(rng, mapper, k_bands),
            ))
        return cls(k_blocks, k_bands, blocks, mapper, loss_omega, alpha, rho)

    def params(self):
        out = []
        for b in self.blocks:
            out.extend(b.params())
        return out

    def live_params(self):
        """Parameters that can receive gradient. The final block's mappers and
        its delta are structurally dead: P/Q and N of that block only feed the
        multiplier updates, which never reach D_hat = X + E."""
        out = []
        last = self.k_blocks - 1
        for i, b in enumerate(self.blocks):
            for name in _SCALAR_NAMES:
                if i == last and name == "log_delta":
                    continue
                out.append(getattr(b, name))
            if i < last:
                for wn, bn in b.v_layers + b.w_layers:
                    out.append(wn)
                    out.append(bn)
        return out


def _init_mapper(rng, spec: MapperSpec, k_bands: int):
    layers = []
    dims = spec.layer_dims(k_bands)
    k = spec.kernel
    for i, (ci, co) in enumerate(dims):
        if i == len(dims) - 1:
            w = rng.normal(0.0, 1e-3, (k, k, ci, co))  # near-zero output at init
        else:
            w = rng.normal(0.0, math.sqrt(2.0 / (k * k * ci)), (k, k, ci, co))
        layers.append((ad.Node(w), ad.Node(np.zeros(co))))
    return layers


def _apply_mapper(layers, spec: MapperSpec, x: ad.Node) -> ad.Node:
    y = x
    for i, (wn, bn) in enumerate(layers):
        y = ad.bias_add(ad.conv2d(y, wn), bn)
        if i < len(layers) - 1:
            y = ad.relu(y)
    return ad.add(x, y) if spec.residual else y


def forward(model: UnrolledModel, d, mask: ObservationMask):
    """Run all blocks; returns (x, e, d_hat) Nodes plus per-block on-mask
    residual norms ||P_o(X+E+N-D)||_F recorded from the forward values."""
    d = as_tensor(d)
    if d.shape[2] != model.k_bands:
        raise InvalidArgumentError(f"model expects {model.k_bands} bands, got {d.shape[2]}")
    if d.shape[:2] != mask.sampled.shape:
        raise InvalidArgumentError(f"mask dims {mask.sampled.shape} do not match tensor {d.shape[:2]}")
    if mask.count == 0:
        raise InvalidArgumentError("mask selects no observed cells")
    shape = d.shape
    on = mask.sampled[:, :, None]
    pd = ad.Node(np.where(on, d, 0.0))
    zero = np.zeros(shape)
    x = ad.Node(pd.value.copy())
    e = ad.Node(zero.copy())
    n = ad.Node(zero.copy())
    p = ad.Node(zero.copy())
    q = ad.Node(zero.copy())
    lam = ad.Node(zero.copy())
    gam = ad.Node(zero.copy())
    phi = ad.Node(zero.copy())
    y = [ad.Node(zero.copy()) for _ in range(3)]
    rho = model.rho
    c_rho = ad.Node(np.asarray(rho))
    c_inv_rho = ad.Node(np.asarray(1.0 / rho))
    residuals = []
    for k, blk in enumerate(model.blocks):
        mu = ad.exp(blk.log_mu)
        theta = ad.exp(blk.log_theta)
        beta = ad.exp(blk.log_beta)
        lam_w = ad.exp(blk.log_lambda)
        delta = ad.exp(blk.log_delta)
        # M_i = fold(svt(X_(i) + Y_i_(i)/rho, alpha_i/rho)); alpha, rho fixed
        m = []
        for i in range(3):
            shifted = ad.add(x, ad.smul(c_inv_rho, y[i]))
            m.append(ad.fold(ad.svt(ad.unfold(shifted, i + 1), np.asarray(model.alpha[i] / rho)),
                             i + 1, shape))
        # X = [rho*sum(M_i) - sum(Y_i) + (Lam + mu(P(D)-E-N) + theta*P - Gam)] / (3rho+mu+theta)
        psi_num = ad.add(ad.sub(ad.add(lam, ad.smul(mu, ad.sub(ad.sub(pd, e), n))), gam),
                         ad.smul(theta, p))
        msum = ad.add(ad.add(m[0], m[1]), m[2])
        ysum = ad.add(ad.add(y[0], y[1]), y[2])
        numer = ad.add(ad.sub(ad.smul(c_rho, msum), ysum), psi_num)
        x_new = ad.smul(ad.recip(ad.add(ad.Node(np.asarray(3.0 * rho)), ad.add(mu, theta))), numer)
        if not np.all(np.isfinite(x_new.value)):
            raise NumericalFailureError(
                f"block {k} produced non-finite X; scalars {blk.decoded_scalars()}")
        # E = soft(Psi_E, lambda/(mu+beta))
        inv_mb = ad.recip(ad.add(mu, beta))
        psi_e = ad.smul(inv_mb, ad.add(ad.sub(ad.add(lam, ad.smul(mu, ad.sub(ad.sub(pd, x_new), n))),
                                              phi),
                                       ad.smul(beta, q)))
        e_new = ad.soft_threshold(psi_e, ad.smul(inv_mb, lam_w))
        # N = off-mask part of Psi_N plus the on-mask part shrunk into the delta ball
        psi_n = ad.add(ad.sub(ad.sub(pd, x_new), e_new), ad.smul(ad.recip(mu), lam))
        n_new = ad.add(ad.project(psi_n, mask, complement=True),
                       ad.scale_to_ball(ad.project(psi_n, mask), delta))
        # learned proximal steps stand in for the closed-form P/Q updates
        p_new = _apply_mapper(blk.v_layers, model.mapper_spec,
                              ad.add(x_new, ad.smul(ad.recip(theta), gam)))
        q_new = _apply_mapper(blk.w_layers, model.mapper_spec,
                              ad.add(e_new, ad.smul(ad.recip(beta), phi)))
        fit = ad.sub(ad.sub(ad.sub(pd, x_new), e_new), n_new)
        lam = ad.add(lam, ad.smul(mu, fit))
        gam = ad.add(gam, ad.smul(theta, ad.sub(x_new, p_new)))
        phi = ad.add(phi, ad.smul(beta, ad.sub(e_new, q_new)))
        y = [ad.add(y[i], ad.smul(c_rho, ad.sub(x_new, m[i]))) for i in range(3)]
        x, e, n, p, q = x_new, e_new, n_new, p_new, q_new
        residuals.append(float(np.linalg.norm(
            np.where(on, x.value + e.value + n.value - d, 0.0))))
    d_hat = ad.add(x, e)
    return x, e, d_hat, residuals


def loss(d_hat, ground_truth, ldpl_map, omega: float) -> ad.Node:
    """omega * mean-l1 against truth + (1-omega) * MSE against the LDPL prior."""
    if not 0.0 <= omega <= 1.0:
        raise InvalidArgumentError(f"omega must be in [0, 1], got {omega}")
    recon = ad.l1_loss(d_hat, ground_truth)
    phy = ad.mse_loss(d_hat, ldpl_map)
    return ad.add(ad.smul(np.asarray(omega), recon), ad.smul(np.asarray(1.0 - omega), phy))


def infer(model: UnrolledModel, d, mask: ObservationMask) -> np.ndarray:
    """Forward without graph construction; raw values (no clamping)."""
    with ad.no_grad():
        _, _, d_hat, _ = forward(model, d, mask)
    return d_hat.value


def _data_fidelity(model, d, mask) -> float:
    with ad.no_grad():
        _, _, d_hat, _ = forward(model, d, mask)
    return float(np.linalg.norm(np.where(mask.sampled[:, :, None], d_hat.value - d, 0.0)))


def train(model: UnrolledModel, dataset, cfg: TrainConfig | None = None):
    """Adam training, one gradient step per sample (batch size 1).

    dataset: sequence of (d_full, mask) pairs. Returns (model, history) where
    history carries per-step training losses, per-epoch validation losses, and
    the best-so-far validation curve.
    """
    cfg = cfg or TrainConfig()
    pairs = [(as_tensor(d), mask) for d, mask in dataset]
    if not pairs:
        raise InvalidArgumentError("dataset is empty")
    # the physics prior is a fixed target per sample; fit it once
    ldpl_maps = [ldpl_interpolate(d, mask).values for d, mask in pairs]
    rng = np.random.default_rng(cfg.seed)
    n_val = int(round(len(pairs) * cfg.val_split)) if len(pairs) >= 2 else 0
    order = rng.permutation(len(pairs))
    val_idx = list(order[:n_val])
    train_idx = list(order[n_val:])
    params = model.params()
    state = ad.AdamState.for_params(params)
    history = {"train": [], "val": [], "best_val": []}
    best = math.inf
    for _ in range(cfg.epochs):
        for j in rng.permutation(len(train_idx)):
            i = train_idx[j]
            d, mask = pairs[i]
            _, _, d_hat, _ = forward(model, d, mask)
            step_loss = loss(d_hat, d, ldpl_maps[i], model.loss_omega)
            lv = float(step_loss.value)
            if not np.isfinite(lv):
                raise NumericalFailureError(
                    f"training diverged on sample {i}: loss {lv}; block scalars "
                    f"{[b.decoded_scalars() for b in model.blocks]}")
            ad.zero_grads(params)
            ad.backward(step_loss)
            grads = [p.grad for p in params]
            ad.adam_step(params, grads, state, lr=cfg.lr)
            history["train"].append(lv)
        if val_idx:
            vl = 0.0
            for i in val_idx:
                d, mask = pairs[i]
                with ad.no_grad():
                    _, _, d_hat, _ = forward(model, d, mask)
                    vl += float(loss(d_hat, d, ldpl_maps[i], model.loss_omega).value)
            vl /= len(val_idx)
            history["val"].append(vl)
            best = min(best, vl)
            history["best_val"].append(best)
    return model, history
