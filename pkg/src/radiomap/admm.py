"""Low-rank plus sparse completion of partially observed map tensors.

Observed cells of a tensor d are explained as x + e + n: a background x
whose three unfoldings all have small nuclear norm, a sparse foreground
e, and a noise term n whose energy on the observed cells stays inside a
ball of radius delta.  The solver is an augmented-Lagrangian scheme with
one auxiliary matrix per unfolding (m[i], multiplier y[i]) plus split
variables p, q so that extra priors on x and e can be plugged in as
proximal mappings; the classical solver uses the identity mapping.

solve_halrtc keeps only the unfolding machinery and re-imposes the data
exactly each sweep, giving the standard baseline for pure low-rank
completion.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidArgumentError, NumericalFailureError
from .shrinkage import soft_threshold, svt
from .tensors import MODES, ObservationMask, as_tensor, fold, fro_norm, project, unfold


@dataclass(frozen=True)
class AdmmHyperParams:
    """Solver weights and penalties.

    alpha   weights of the three unfolding nuclear norms, must sum to 1
    lam     sparsity weight; None picks 1/sqrt(max(h, w)) at solve time
    mu      penalty on the data-fit constraint
    theta   penalty tying x to its split variable p
    beta    penalty tying e to its split variable q
    rho     penalty tying x to the unfolding auxiliaries (fixed, no growth)
    delta   noise ball radius on observed cells
    """

    alpha: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)
    lam: float | None = None
    mu: float = 1e-2
    theta: float = 1e-2
    beta: float = 1e-2
    rho: float = 1e-2
    delta: float = 0.0
    max_iters: int = 200
    tol: float = 1e-5
    penalty_growth: float = 1.05
    penalty_cap: float = 1e2

    def __post_init__(self):
        if len(self.alpha) != 3 or any(a <= 0 for a in self.alpha):
            raise InvalidArgumentError(f"alpha needs three positive weights, got {self.alpha}")
        if abs(sum(self.alpha) - 1.0) > 1e-12:
            raise InvalidArgumentError(f"alpha must sum to 1, got sum {sum(self.alpha)!r}")
        if self.lam is not None and not self.lam > 0:
            raise InvalidArgumentError(f"lam must be positive, got {self.lam}")
        for name in ("mu", "theta", "beta", "rho"):
            if not getattr(self, name) > 0:
                raise InvalidArgumentError(f"{name} must be positive, got {getattr(self, name)}")
        if self.delta < 0:
            raise InvalidArgumentError(f"delta must be >= 0, got {self.delta}")
        if self.max_iters < 1:
            raise InvalidArgumentError(f"max_iters must be >= 1, got {self.max_iters}")
        if not self.tol > 0:
            raise InvalidArgumentError(f"tol must be positive, got {self.tol}")
        if self.penalty_growth < 1.0:
            raise InvalidArgumentError(f"penalty_growth must be >= 1, got {self.penalty_growth}")
        if self.penalty_cap < max(self.mu, self.theta, self.beta):
            raise InvalidArgumentError("penalty_cap below an initial penalty")

    def resolved(self, dims) -> "AdmmHyperParams":
        """Concrete copy with lam filled in for the given (h, w, k) dims."""
        if self.lam is not None:
            return self
        return replace(self, lam=1.0 / np.sqrt(float(max(dims[0], dims[1]))))


@dataclass
class AdmmState:
    """All iterates of one solve.

    lam, gam, phi are the multipliers of the data-fit, x-split, and
    e-split constraints; y[i] are the multipliers tying x to m[i].
    """

    x: np.ndarray
    e: np.ndarray
    n: np.ndarray
    p: np.ndarray
    q: np.ndarray
    lam: np.ndarray
    gam: np.ndarray
    phi: np.ndarray
    m: list = field(default_factory=list)
    y: list = field(default_factory=list)
    iteration: int = 0
    primal_residual: float = 0.0

    @classmethod
    def initial(cls, d: np.ndarray, mask: ObservationMask) -> "AdmmState":
        """Zero everything except x, which starts at the observed cells."""
        x = project(d, mask)
        zeros = lambda: np.zeros_like(d)
        return cls(
            x=x, e=zeros(), n=zeros(), p=zeros(), q=zeros(),
            lam=zeros(), gam=zeros(), phi=zeros(),
            m=[zeros() for _ in MODES], y=[zeros() for _ in MODES],
        )


def psi_x(state: AdmmState, d, mask, hp: AdmmHyperParams) -> np.ndarray:
    """Consensus target pulling x towards the data and its split variable."""
    pd = project(d, mask)
    num = state.lam + hp.mu * (pd - state.e - state.n) + hp.theta * state.p - state.gam
    return num / (hp.mu + hp.theta)


def update_m_i(state: AdmmState, hp: AdmmHyperParams) -> list:
    """Shrink each unfolding of x (offset by its multiplier) towards low rank."""
    dims = state.x.shape
    out = []
    for i, mode in enumerate(MODES):
        g = unfold(state.x, mode) + unfold(state.y[i], mode) / hp.rho
        out.append(fold(svt(g, hp.alpha[i] / hp.rho), mode, dims))
    return out


def update_x(state: AdmmState, psi: np.ndarray, hp: AdmmHyperParams) -> np.ndarray:
    """Closed-form x step: average of the auxiliaries and the consensus target."""
    acc = np.zeros_like(state.x)
    for mi, yi in zip(state.m, state.y):
        acc += hp.rho * mi - yi
    return (acc + (hp.mu + hp.theta) * psi) / (3.0 * hp.rho + hp.mu + hp.theta)


def update_e(state: AdmmState, d, mask, hp: AdmmHyperParams) -> np.ndarray:
    """Sparse step: soft-threshold the residual left after the new x."""
    pd = project(d, mask)
    num = state.lam + hp.mu * (pd - state.x - state.n) + hp.beta * state.q - state.phi
    psi_e = num / (hp.mu + hp.beta)
    return soft_threshold(psi_e, hp.lam / (hp.mu + hp.beta))


def update_n(state: AdmmState, d, mask, hp: AdmmHyperParams) -> np.ndarray:
    """Noise step: keep the off-mask residual, clip the on-mask part to the ball."""
    psi_n = project(d, mask) - state.x - state.e + state.lam / hp.mu
    on = project(psi_n, mask)
    r = fro_norm(on)
    factor = 1.0 if r == 0.0 else min(hp.delta / r, 1.0)
    return (psi_n - on) + factor * on


def update_pq_classical(state: AdmmState, hp: AdmmHyperParams, prox_mode: str = "identity"):
    """Split-variable step with the identity proximal mapping ("none" skips it)."""
    if prox_mode == "identity":
        return state.x + state.gam / hp.theta, state.e + state.phi / hp.beta
    if prox_mode == "none":
        return state.p, state.q
    raise InvalidArgumentError(f"prox_mode must be 'identity' or 'none', got {prox_mode!r}")


def update_multipliers(state: AdmmState, d, mask, hp: AdmmHyperParams) -> AdmmState:
    """Dual ascent on every constraint at the current penalties."""
    pd = project(d, mask)
    return replace(
        state,
        lam=state.lam + hp.mu * (pd - state.x - state.e - state.n),
        gam=state.gam + hp.theta * (state.x - state.p),
        phi=state.phi + hp.beta * (state.e - state.q),
        y=[yi + hp.rho * (state.x - mi) for yi, mi in zip(state.y, state.m)],
    )


def primal_residual(state: AdmmState, d, mask) -> float:
    return fro_norm(project(d, mask) - state.x - state.e - state.n)


@dataclass
class AdmmResult:
    x: np.ndarray
    e: np.ndarray
    n: np.ndarray
    history: list
    state: AdmmState
    converged: bool

    @property
    def d_hat(self) -> np.ndarray:
        return self.x + self.e


def solve_admm(d, mask: ObservationMask, hp: AdmmHyperParams | None = None,
               check_contracts: bool = False, prox_mode: str = "identity") -> AdmmResult:
    """Run the full splitting scheme until the estimate stops moving.

    check_contracts turns on in-loop assertions of solver internals (the
    noise ball bound after every n step); meant for tests, off by default.
    prox_mode="none" zeroes the P/Q steps, which matches an unrolled block
    whose mappers output zero.
    """
    d = as_tensor(d)
    if mask.count == 0:
        raise InvalidArgumentError("mask selects no observed cells")
    hp = (hp if hp is not None else AdmmHyperParams()).resolved(d.shape)
    state = AdmmState.initial(d, mask)
    mu, theta, beta = hp.mu, hp.theta, hp.beta
    history = []
    prev = state.x + state.e
    converged = False
    for it in range(hp.max_iters):
        hpk = replace(hp, mu=mu, theta=theta, beta=beta)
        state.m = update_m_i(state, hpk)
        state.x = update_x(state, psi_x(state, d, mask, hpk), hpk)
        state.e = update_e(state, d, mask, hpk)
        state.n = update_n(state, d, mask, hpk)
        if check_contracts:
            ball = fro_norm(project(state.n, mask))
            if not ball <= hpk.delta + 1e-12:
                raise AssertionError(
                    f"noise ball violated at iteration {it}: {ball!r} > {hpk.delta!r} + 1e-12"
                )
        state.p, state.q = update_pq_classical(state, hpk, prox_mode)
        state = update_multipliers(state, d, mask, hpk)
        state.iteration = it + 1
        state.primal_residual = primal_residual(state, d, mask)
        history.append(state.primal_residual)
        if not np.isfinite(state.primal_residual):
            raise NumericalFailureError(
                f"primal residual became non-finite at iteration {it} "
                f"(mu={mu:.3e}, theta={theta:.3e}, beta={beta:.3e})"
            )
        cur = state.x + state.e
        rel = fro_norm(cur - prev) / max(fro_norm(cur), 1e-12)
        prev = cur
        mu = min(mu * hp.penalty_growth, hp.penalty_cap)
        theta = min(theta * hp.penalty_growth, hp.penalty_cap)
        beta = min(beta * hp.penalty_growth, hp.penalty_cap)
        if rel < hp.tol:
            converged = True
            break
    return AdmmResult(x=state.x, e=state.e, n=state.n, history=history,
                      state=state, converged=converged)


def solve_halrtc(d, mask: ObservationMask, alpha=(1 / 3, 1 / 3, 1 / 3), rho: float = 0.1,
                 max_iters: int = 200, tol: float = 1e-5) -> np.ndarray:
    """Pure low-rank completion baseline; observed cells are pinned to the data."""
    d = as_tensor(d)
    if mask.count == 0:
        raise InvalidArgumentError("mask selects no observed cells")
    if len(alpha) != 3 or any(a <= 0 for a in alpha) or abs(sum(alpha) - 1.0) > 1e-12:
        raise InvalidArgumentError(f"alpha must be three positive weights summing to 1, got {alpha}")
    if not rho > 0:
        raise InvalidArgumentError(f"rho must be positive, got {rho}")
    pd = project(d, mask)
    x = pd.copy()
    y = [np.zeros_like(d) for _ in MODES]
    on = mask.sampled[:, :, None]
    for _ in range(max_iters):
        ms = [
            fold(svt(unfold(x, mode) + unfold(y[i], mode) / rho, alpha[i] / rho), mode, d.shape)
            for i, mode in enumerate(MODES)
        ]
        x_new = sum(mi - yi / rho for mi, yi in zip(ms, y)) / 3.0
        x_new = np.where(on, pd, x_new)
        y = [yi + rho * (x_new - mi) for yi, mi in zip(y, ms)]
        rel = fro_norm(x_new - x) / max(fro_norm(x_new), 1e-12)
        x = x_new
        if rel < tol:
            break
    return x
