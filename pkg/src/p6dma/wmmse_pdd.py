"""Fast-timescale polarforming and precoding via penalty dual decomposition.

The weighted sum-rate problem is recast in WMMSE form and the discrete
polarformer constraints are moved onto copies ``w_bar``/``v_bar`` tied to the
continuous variables by consensus constraints. An inner block coordinate
descent loop minimises the augmented Lagrangian

    sum_k rho_k (eps_k e_k - ln eps_k)
      + 1/(2 mu) sum_k ||w_k - w_bar_k + mu t_k||^2 + 1/(2 mu) ||v - v_bar + mu t_bar||^2

over the blocks ``w, w_bar, v, v_bar, xi, eps, c``; the outer loop updates
the duals ``t``/``t_bar`` and shrinks the penalty ``mu``. Every block update is
an exact minimiser, so the Lagrangian never increases across a sweep.

Conventions: the effective channel is ``h_k = h_los_k (v^H A_k w_k)``, the
received amplitude is ``h_k^H c_j``, and the MSE is

    e_k = |xi_k|^2 (sum_j |h_k^H c_j|^2 + sigma^2) - 2 Re{conj(xi_k) h_k^H c_k} + 1.

The log in the weight term is natural so that ``eps_k = 1 / e_k`` is the exact
minimiser; rates are still reported in bits.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .channel import ChannelSet, achievable_rate, effective_channels, mrt_precoders
from .polarization import BS_SCALE, QuantizationConfig, codebook, project_to_codebook

logger = logging.getLogger(__name__)

INITIALIZATIONS = ("rate_proxy", "cophased")


class SolverError(RuntimeError):
    """Raised on a broken invariant (non-finite iterate, non-positive MSE, singular block)."""


@dataclass(frozen=True)
class SolverConfig:
    power_budget: float = 1.0
    noise_power: float = 1e-12
    inner_tol: float = 1e-4
    outer_tol: float = 1e-3
    penalty_shrink: float = 0.7
    initial_penalty: float = 1.0
    max_inner: int = 30
    max_outer: int = 50
    initialization: str = "rate_proxy"  # or "cophased"

    def __post_init__(self):
        if self.initialization not in INITIALIZATIONS:
            raise ValueError(f"initialization must be one of {INITIALIZATIONS}")
        if not (self.inner_tol > 0 and self.outer_tol > 0):
            raise ValueError("tolerances must be positive")
        if not (0 < self.penalty_shrink < 1):
            raise ValueError("penalty_shrink must lie in (0, 1)")
        if not self.initial_penalty > 0:
            raise ValueError("initial_penalty must be positive")
        if not self.noise_power > 0:
            raise ValueError("noise_power must be positive")
        if self.power_budget < 0:
            raise ValueError("power_budget must be non-negative")


@dataclass
class PddState:
    w: np.ndarray  # (K, 2) continuous user polarformers
    w_bar: np.ndarray  # (K, 2) codebook copies
    v: np.ndarray  # (2,) continuous BS polarformer
    v_bar: np.ndarray  # (2,) codebook copy (includes the 1/sqrt(2) prefactor)
    xi: np.ndarray  # (K,) equalizers
    eps: np.ndarray  # (K,) MSE weights
    c: np.ndarray  # (K, N) precoders, row k belongs to user k
    t: np.ndarray  # (K, 2) duals of w = w_bar
    t_bar: np.ndarray  # (2,) dual of v = v_bar
    mu: float

    def copy(self) -> "PddState":
        return PddState(**{k: (np.array(x, copy=True) if isinstance(x, np.ndarray) else x)
                           for k, x in self.__dict__.items()})


@dataclass(frozen=True)
class TraceRow:
    outer: int
    inner: int
    lagrangian: float
    sum_rate: float
    consensus: float
    mu: float


@dataclass
class SolveResult:
    state: PddState
    rates: np.ndarray
    weighted_sum_rate: float
    converged: bool
    outer_iterations: int
    sweeps: int
    trace: list[TraceRow] = field(default_factory=list)


# ---------------------------------------------------------------------------
# shared link quantities

def _polar_gains(ch: ChannelSet, w, v) -> np.ndarray:
    return np.einsum("i,kij,kj->k", np.conj(v), ch.depol, w)


def _los_cross(ch: ChannelSet, c) -> np.ndarray:
    # E[k, j] = h_los_k^H c_j
    return ch.hlos.conj() @ c.T


def _cross(state: PddState, ch: ChannelSet) -> np.ndarray:
    # X[k, j] = h_k^H c_j
    s = _polar_gains(ch, state.w, state.v)
    return np.conj(s)[:, None] * _los_cross(ch, state.c)


def mse(state: PddState, ch: ChannelSet, noise_power: float) -> np.ndarray:
    X = _cross(state, ch)
    total = np.sum(np.abs(X) ** 2, axis=1) + noise_power
    xi = state.xi
    return np.abs(xi) ** 2 * total - 2.0 * np.real(np.conj(xi) * np.diag(X)) + 1.0


def update_equalizers(state: PddState, ch: ChannelSet, noise_power: float) -> np.ndarray:
    """LMMSE equalizers ``h_k^H c_k / (sum_j |h_k^H c_j|^2 + sigma^2)``."""
    X = _cross(state, ch)
    total = np.sum(np.abs(X) ** 2, axis=1) + noise_power
    return np.diag(X) / total


def update_weights(e: np.ndarray) -> np.ndarray:
    e = np.asarray(e, dtype=float)
    if np.any(e <= 0) or not np.all(np.isfinite(e)):
        raise SolverError(f"non-positive or non-finite MSE {e}; equalizer convention broken upstream")
    return 1.0 / e


def update_user_polarformers(state: PddState, ch: ChannelSet) -> np.ndarray:
    """Closed-form minimiser of the Lagrangian over each ``w_k``.

    With ``M_k = h_los_k v^H A_k`` the block is ``C_k^{-1} b_k`` where
    ``C_k = 2 a_k |xi_k|^2 sum_j M_k^H c_j c_j^H M_k + I/mu`` and
    ``b_k = 2 a_k conj(xi_k) M_k^H c_k + (w_bar_k - mu t_k)/mu``, ``a_k = rho_k eps_k``.
    """
    mu = state.mu
    a = ch.weights * state.eps
    q = np.einsum("kji,j->ki", ch.depol, state.v)  # A_k^T v (A is real)
    E = _los_cross(ch, state.c)
    spread = np.sum(np.abs(E) ** 2, axis=1)
    alpha = 2.0 * a * np.abs(state.xi) ** 2 * spread
    C = alpha[:, None, None] * (q[:, :, None] * np.conj(q)[:, None, :])
    C[:, 0, 0] += 1.0 / mu
    C[:, 1, 1] += 1.0 / mu
    b = (2.0 * a * np.conj(state.xi) * np.diag(E))[:, None] * q + (state.w_bar - mu * state.t) / mu
    return kernels.solve_2x2(C, b)


def update_user_copies(state: PddState, q: QuantizationConfig) -> np.ndarray:
    return project_to_codebook(state.w + state.mu * state.t, q)


def update_bs_polarformer(state: PddState, ch: ChannelSet) -> np.ndarray:
    """Closed-form minimiser over ``v`` with ``m_k = A_k w_k`` and ``E_kj = h_los_k^H c_j``."""
    mu = state.mu
    a = ch.weights * state.eps
    m = np.einsum("kij,kj->ki", ch.depol, state.w)
    E = _los_cross(ch, state.c)
    spread = np.sum(np.abs(E) ** 2, axis=1)
    coef = 2.0 * a * np.abs(state.xi) ** 2 * spread
    C = np.einsum("k,ki,kj->ij", coef, m, np.conj(m))
    C[0, 0] += 1.0 / mu
    C[1, 1] += 1.0 / mu
    b = (2.0 * a * state.xi * np.conj(np.diag(E))) @ m + (state.v_bar - mu * state.t_bar) / mu
    return kernels.solve_2x2(C[None], b[None])[0]


def update_bs_copy(state: PddState, q: QuantizationConfig) -> np.ndarray:
    return project_to_codebook(state.v + state.mu * state.t_bar, q, BS_SCALE)


def update_precoders(state: PddState, ch: ChannelSet, power_budget: float,
                     return_multiplier: bool = False):
    """Minimise ``sum_k rho_k eps_k e_k`` subject to ``sum_k ||c_k||^2 <= P``.

    Stationarity gives ``c_k = (B + eta I)^{-1} a_k xi_k h_k`` with
    ``B = sum_j d_j h_j h_j^H``, ``d_j = a_j |xi_j|^2``; ``eta >= 0`` is found by
    bisection on the eigen-decomposed power function. ``B = G G^H`` with
    ``G = [sqrt(d_j) h_j]`` has rank at most K, so its nonzero eigenpairs come
    from the K x K Gram matrix ``G^H G`` and the update costs O(K^2 N + K^3).
    Components in the null space of ``B`` carry no signal and are dropped
    (minimum-norm solution at ``eta = 0``).
    """
    K, N = state.c.shape
    H = effective_channels(ch, state.w, state.v)
    a = ch.weights * state.eps
    sd = np.sqrt(a * np.abs(state.xi) ** 2)
    if power_budget <= 0 or not np.any(sd[:, None] * H):
        out = np.zeros((K, N), dtype=complex)
        return (out, 0.0) if return_multiplier else out
    gram = H.conj() @ H.T  # gram[j, k] = h_j^H h_k
    lam, V = np.linalg.eigh(sd[:, None] * gram * sd[None, :])
    keep = lam > 1e-12 * max(lam[-1], np.finfo(float).tiny)
    lam, V = lam[keep], V[:, keep]
    root = np.sqrt(lam)
    # P[k, i] = u_i^H (a_k xi_k h_k) with eigenvectors u_i = G V[:, i] / sqrt(lam_i) of B
    P = ((sd[:, None] * gram * (a * state.xi)[None, :]).T @ V.conj()) / root
    power = np.sum(np.abs(P) ** 2, axis=0)
    eta = float(kernels.precoder_eta(np.ascontiguousarray(lam), np.ascontiguousarray(power), float(power_budget)))
    c = (((P / (root * (lam + eta))) @ V.T) * sd[None, :]) @ H
    return (c, eta) if return_multiplier else c


def augmented_lagrangian(state: PddState, ch: ChannelSet, noise_power: float) -> float:
    if np.any(state.eps <= 0):
        raise SolverError("weights must be positive")
    e = mse(state, ch, noise_power)
    obj = float(np.sum(ch.weights * (state.eps * e - np.log(state.eps))))
    pen = np.sum(np.abs(state.w - state.w_bar + state.mu * state.t) ** 2)
    pen += np.sum(np.abs(state.v - state.v_bar + state.mu * state.t_bar) ** 2)
    return obj + float(pen) / (2.0 * state.mu)


def dual_and_penalty_update(state: PddState, shrink: float) -> PddState:
    if not 0 < shrink < 1:
        raise ValueError("shrink must lie in (0, 1)")
    return replace(
        state,
        t=state.t + (state.w - state.w_bar) / state.mu,
        t_bar=state.t_bar + (state.v - state.v_bar) / state.mu,
        mu=state.mu * shrink,
    )


def consensus_violation(state: PddState) -> float:
    return float(max(np.max(np.abs(state.w - state.w_bar), initial=0.0),
                     np.max(np.abs(state.v - state.v_bar))))


def wmmse_objective(state: PddState, ch: ChannelSet, noise_power: float) -> float:
    e = mse(state, ch, noise_power)
    return float(np.sum(ch.weights * (state.eps * e - np.log(state.eps))))


# ---------------------------------------------------------------------------

def _codebook_pairs(q: QuantizationConfig) -> np.ndarray:
    F = codebook(q)
    return np.stack(np.meshgrid(F, F, indexing="ij"), axis=-1).reshape(-1, 2)


def _best_response_users(ch: ChannelSet, v: np.ndarray, pairs: np.ndarray) -> np.ndarray:
    gains = np.abs(np.einsum("i,kij,mj->km", np.conj(v), ch.depol, pairs))
    return pairs[np.argmax(gains, axis=1)].astype(complex)


def _proxy_bs_polarformer(ch: ChannelSet, cfg: SolverConfig, pairs: np.ndarray) -> np.ndarray:
    # interference-free equal-power rate with best-response users, for every BS candidate
    K = ch.num_users
    V = BS_SCALE * pairs
    Aw = np.einsum("kij,wj->ikw", ch.depol, pairs)  # A_k w for every user and candidate
    s = np.abs(np.tensordot(np.conj(V), Aw, axes=1)).max(axis=2)  # (candidates, K)
    snr = (cfg.power_budget / K) * np.sum(np.abs(ch.hlos) ** 2, axis=1) / cfg.noise_power
    proxy = np.log2(1.0 + snr[None, :] * s**2) @ ch.weights
    return V[int(np.argmax(proxy))].astype(complex)


def rzf_precoders(H: np.ndarray, power_budget: float, noise_power: float) -> np.ndarray:
    """Regularised zero-forcing ``(H^H H + (K sigma^2/P) I)^{-1} H^H`` at full power."""
    K, N = H.shape
    if power_budget <= 0 or not np.any(H):
        return np.zeros((K, N), dtype=complex)
    G = H.conj() @ H.T + (K * noise_power / power_budget) * np.eye(K)  # G[k, j] = h_k^H h_j
    C = np.linalg.solve(G, H.conj()).conj()  # row k: sum_j (G^-1)_{kj}^* h_j
    return C * np.sqrt(power_budget) / np.linalg.norm(C)


def single_user_precoders(H: np.ndarray, power_budget: float, noise_power: float, weights) -> np.ndarray:
    """All power on the user with the largest weighted single-user rate (MRT)."""
    K, N = H.shape
    out = np.zeros((K, N), dtype=complex)
    g = np.sum(np.abs(H) ** 2, axis=1)
    k = int(np.argmax(np.asarray(weights) * np.log2(1.0 + power_budget * g / noise_power)))
    if g[k] > 0 and power_budget > 0:
        out[k] = H[k] / np.sqrt(g[k]) * np.sqrt(power_budget)
    return out


def initial_state(ch: ChannelSet, cfg: SolverConfig, q: QuantizationConfig,
                  precoders: np.ndarray | None = None) -> PddState:
    """Starting point of the PDD loop.

    ``rate_proxy`` picks the BS codebook vector maximising an interference-free
    equal-power rate proxy, sets each user to its best-response codebook vector
    and starts the precoders from the best of MRT, regularised ZF and
    single-user MRT.
    ``cophased`` starts the BS at full amplitude with zero phase and uses MRT.
    """
    K, N = ch.hlos.shape
    pairs = _codebook_pairs(q)
    if cfg.initialization == "rate_proxy":
        v = _proxy_bs_polarformer(ch, cfg, pairs)
    else:
        v = BS_SCALE * float(q.amplitudes.max()) * np.ones(2, dtype=complex)
    w = _best_response_users(ch, v, pairs)
    H = effective_channels(ch, w, v)
    if precoders is not None:
        c = np.array(precoders, dtype=complex)
    else:
        c = mrt_precoders(H, cfg.power_budget, fallback=ch.hlos)
        if cfg.initialization == "rate_proxy":
            cands = [c, rzf_precoders(H, cfg.power_budget, cfg.noise_power),
                     single_user_precoders(H, cfg.power_budget, cfg.noise_power, ch.weights)]
            c = max(cands, key=lambda x: achievable_rate(H, x, cfg.noise_power, ch.weights)[1])
    state = PddState(
        w=w, w_bar=w.copy(), v=v, v_bar=v.copy(),
        xi=np.zeros(K, dtype=complex), eps=np.ones(K), c=c,
        t=np.zeros((K, 2), dtype=complex), t_bar=np.zeros(2, dtype=complex),
        mu=cfg.initial_penalty,
    )
    state.xi = update_equalizers(state, ch, cfg.noise_power)
    state.eps = update_weights(mse(state, ch, cfg.noise_power))
    return state


def feasible_rates(state: PddState, ch: ChannelSet, noise_power: float):
    """Rates evaluated at the codebook copies ``w_bar``, ``v_bar``."""
    H = effective_channels(ch, state.w_bar, state.v_bar)
    return achievable_rate(H, state.c, noise_power, ch.weights)


def bcd_sweep(state: PddState, ch: ChannelSet, cfg: SolverConfig, q: QuantizationConfig,
              update_c: bool = True) -> PddState:
    """One pass over the blocks in the order w, w_bar, v, v_bar, xi, eps, c (in place)."""
    state.w = update_user_polarformers(state, ch)
    state.w_bar = update_user_copies(state, q)
    state.v = update_bs_polarformer(state, ch)
    state.v_bar = update_bs_copy(state, q)
    state.xi = update_equalizers(state, ch, cfg.noise_power)
    state.eps = update_weights(mse(state, ch, cfg.noise_power))
    if update_c:
        state.c = update_precoders(state, ch, cfg.power_budget)
    return state


def _compiled_sweep(state: PddState, ch: ChannelSet, cfg: SolverConfig, grid, update_c: bool) -> float:
    val = kernels.pdd_sweep(ch.hlos, ch.depol, ch.weights, state.w, state.w_bar, state.v, state.v_bar,
                            state.xi, state.eps, state.c, state.t, state.t_bar, float(state.mu),
                            float(cfg.noise_power), float(cfg.power_budget), grid[0], grid[1],
                            float(BS_SCALE), bool(update_c))
    if np.isnan(val):
        raise SolverError(f"non-positive MSE or eigensolver failure; state={state}")
    return val


def _contiguous(ch: ChannelSet) -> ChannelSet:
    return ChannelSet(np.ascontiguousarray(ch.hlos, dtype=complex), np.ascontiguousarray(ch.depol, dtype=float),
                      np.ascontiguousarray(ch.weights, dtype=float))


def solve(ch: ChannelSet, cfg: SolverConfig, q: QuantizationConfig, state: PddState | None = None,
          fixed_precoders: np.ndarray | None = None, record_trace: bool = True,
          compiled: bool | None = None) -> SolveResult:
    """Run the nested PDD loop until both consensus gaps drop below ``outer_tol``.

    ``fixed_precoders`` freezes the precoder block at the given (K, N) array.
    The reported rates use the codebook copies and are the only values that
    should be treated as results. ``compiled`` selects the sweep backend
    (default: compiled when available).
    """
    if compiled is None:
        compiled = kernels.pdd_sweep is not None
    elif compiled and kernels.pdd_sweep is None:
        raise RuntimeError("compiled kernels are not available")
    ch = _contiguous(ch)
    grid = (q.phases, q.amplitudes)
    K, N = ch.hlos.shape
    if cfg.power_budget == 0:
        st = state.copy() if state is not None else initial_state(ch, cfg, q, np.zeros((K, N), complex))
        st.c = np.zeros((K, N), dtype=complex)
        return SolveResult(st, np.zeros(K), 0.0, True, 0, 0, [])

    st = state.copy() if state is not None else initial_state(ch, cfg, q, fixed_precoders)
    update_c = fixed_precoders is None
    trace: list[TraceRow] = []
    sweeps = 0
    converged = False
    outer = 0
    for outer in range(1, cfg.max_outer + 1):
        prev = augmented_lagrangian(st, ch, cfg.noise_power)
        for inner in range(1, cfg.max_inner + 1):
            if compiled:
                cur = _compiled_sweep(st, ch, cfg, grid, update_c)
            else:
                bcd_sweep(st, ch, cfg, q, update_c)
                cur = augmented_lagrangian(st, ch, cfg.noise_power)
            sweeps += 1
            if not np.isfinite(cur):
                raise SolverError(f"non-finite Lagrangian at outer {outer} inner {inner}: state={st}")
            if record_trace:
                trace.append(TraceRow(outer, inner, cur, feasible_rates(st, ch, cfg.noise_power)[1],
                                      consensus_violation(st), st.mu))
            if abs(prev - cur) <= cfg.inner_tol * max(abs(prev), 1e-12):
                break
            prev = cur
        gap = consensus_violation(st)
        st = dual_and_penalty_update(st, cfg.penalty_shrink)
        if gap < cfg.outer_tol:
            converged = True
            break
    if not converged:
        logger.debug("PDD stopped at max_outer=%d with consensus gap %.3g", cfg.max_outer, gap)
    rates, wsr = feasible_rates(st, ch, cfg.noise_power)
    return SolveResult(st, rates, wsr, converged, outer, sweeps, trace)


def write_trace_csv(trace, path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["outer", "inner", "lagrangian", "sum_rate", "consensus", "mu"])
        for r in trace:
            wr.writerow([r.outer, r.inner, repr(r.lagrangian), repr(r.sum_rate), repr(r.consensus), repr(r.mu)])
