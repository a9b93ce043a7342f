"""Adaptive parameter estimators for a network of sensing agents.

Every agent runs the integrators ``dLam/dt = s k k^T``, ``dlam/dt = s k (phi - c)``
and the update ``da/dt = -Gamma (Lam a - lam) - Gamma zeta sum_j l_ij (a_i - a_j)``.
The algorithms differ in which kernels ``k`` an agent integrates, whether
the consensus term is on, and the compensation ``c``:

* ``single``: one agent, full kernel vector.
* ``s1``: every agent estimates the full vector, Laplacian consensus coupling.
* ``s2``: each agent estimates only its own block; foreign kernels act as
  an uncompensated disturbance.
* ``s3``: as ``s2``, plus cross-estimates of the other blocks relayed down
  a rooted spanning tree, used to subtract the foreign contribution.

All agents' states live in one padded bank so a tick is a single call to
the backend integrator.  Padding slots have zero kernels and stay zero.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .errors import InvalidArgument
from .rbf import KernelBasis, gaussian_lipschitz

log = logging.getLogger(__name__)

ALGORITHMS = ("single", "s1", "s2", "s3")


@dataclass
class EstimatorState:
    """One agent's filter and estimate, over the global kernel ``indices`` it owns."""

    indices: np.ndarray
    Lambda: np.ndarray
    lam: np.ndarray
    a_hat: np.ndarray
    gamma: np.ndarray
    zeta: float = 0.0
    s: float = 1.0
    b: dict = field(default_factory=dict)

    @classmethod
    def zeros(cls, indices, gamma=1.0, zeta=0.0, a_init=None):
        idx = np.asarray(indices, dtype=np.int64)
        m = len(idx)
        a = np.zeros(m) if a_init is None else np.asarray(a_init, dtype=float)[idx].copy()
        g = np.broadcast_to(np.asarray(gamma, dtype=float), (m,)).copy()
        return cls(idx, np.zeros((m, m)), np.zeros(m), a, g, zeta)


class EstimatorBank:
    """Padded, stacked states for ``N`` agents.

    Args:
        algorithm: one of :data:`ALGORITHMS`.
        blocks: per-agent global index arrays (the partition of ``0..p-1``).
        p: number of kernels.
        gamma: adaptation gain, scalar or per-kernel diagonal ``(p,)``.
        zeta: consensus gain (``s1`` only).
        laplacian: ``(N, N)`` graph Laplacian (``s1``).
        parent: ``(N, N)`` tree parent table (``s3``).
        cross_weight: directed consensus edge weight (``s3``).
        a_init: initial estimate of the full vector, zeros by default.
    """

    def __init__(self, algorithm, blocks, p, gamma=1.0, zeta=1.0, laplacian=None,
                 parent=None, cross_weight=1.0, a_init=None):
        if algorithm not in ALGORITHMS:
            raise InvalidArgument(f"unknown algorithm {algorithm!r}")
        n = len(blocks)
        if algorithm == "single" and n != 1:
            raise InvalidArgument("the single-agent estimator needs exactly one agent")
        self.algorithm = algorithm
        self.p = p
        self.n = n
        self.blocks = [np.asarray(b, dtype=np.int64) for b in blocks]
        if algorithm in ("single", "s1"):
            own = [np.arange(p, dtype=np.int64) for _ in range(n)]
        else:
            own = self.blocks
        self.indices = own
        m = max(1, max(len(b) for b in own))
        self.m = m
        pad = np.full((n, m), p, dtype=np.int64)
        mask = np.zeros((n, m), dtype=bool)
        for i, b in enumerate(own):
            pad[i, : len(b)] = b
            mask[i, : len(b)] = True
        self.pad = pad
        self.mask = mask

        gamma_full = np.broadcast_to(np.asarray(gamma, dtype=float), (p,))
        if np.any(gamma_full <= 0):
            raise InvalidArgument("adaptation gain must be positive definite")
        self.gamma_full = np.append(gamma_full, 1.0)
        self.gamma = np.ascontiguousarray(self.gamma_full[pad])

        self.zeta = float(zeta) if algorithm == "s1" else 0.0
        self.laplacian = np.ascontiguousarray(
            np.zeros((n, n)) if laplacian is None else np.asarray(laplacian, dtype=float)
        )
        if self.zeta and laplacian is None:
            raise InvalidArgument("consensus needs a Laplacian")
        self.use_cross = algorithm == "s3"
        if self.use_cross and parent is None:
            raise InvalidArgument("cross-estimation needs outbranching parents")
        self.parent = np.ascontiguousarray(
            np.full((n, n), -1, dtype=np.int64) if parent is None else np.asarray(parent, dtype=np.int64)
        )
        self.cross_weight = float(cross_weight)

        a0 = np.zeros(p + 1)
        if a_init is not None:
            a0[:p] = np.asarray(a_init, dtype=float)
        self.Lambda = np.zeros((n, m, m))
        self.lam = np.zeros((n, m))
        self.a_hat = np.ascontiguousarray(np.where(mask, a0[pad], 0.0))
        self.cross = np.zeros((n, n, m) if self.use_cross else (1, 1, 1))
        self.s = np.ones(n)

    def gather(self, k_full):
        """Own-slot kernels ``(..., N, M)`` from full kernel rows ``(..., N, p)``."""
        aug = np.concatenate([k_full, np.zeros(k_full.shape[:-1] + (1,))], axis=-1)
        idx = np.broadcast_to(self.pad, aug.shape[:-2] + self.pad.shape)
        return np.ascontiguousarray(np.take_along_axis(aug, idx, axis=-1))

    def gather_blocks(self, k_full):
        """Per-block kernels ``(..., N, N, M)``: ``[.., i, j, :]`` is block ``j`` seen by agent ``i``."""
        aug = np.concatenate([k_full, np.zeros(k_full.shape[:-1] + (1,))], axis=-1)
        return np.ascontiguousarray(aug[..., self.pad])

    def tick(self, k_stages, phi_stages, dt):
        """Advance every agent one RK4 step.

        ``k_stages``: full kernel rows at the four stage positions, ``(4, N, p)``.
        ``phi_stages``: measurements at the same positions, ``(4, N)``.
        """
        k_own = self.gather(k_stages)
        k_blocks = self.gather_blocks(k_stages) if self.use_cross else None
        _backend.estimator_tick(
            self.Lambda, self.lam, self.a_hat, self.cross, k_own, k_blocks,
            np.ascontiguousarray(phi_stages, dtype=float), self.s, self.gamma,
            self.zeta, self.laplacian, self.parent, self.cross_weight, dt,
        )

    def freeze(self, i):
        self.s[i] = 0.0

    # -- read-outs ---------------------------------------------------------

    def own(self, i):
        k = len(self.indices[i])
        return self.indices[i], self.a_hat[i, :k]

    def state(self, i):
        k = len(self.indices[i])
        b = {}
        if self.use_cross:
            for j in range(self.n):
                if j != i:
                    b[j] = self.cross[i, j, : len(self.blocks[j])].copy()
        return EstimatorState(self.indices[i].copy(), self.Lambda[i, :k, :k].copy(),
                              self.lam[i, :k].copy(), self.a_hat[i, :k].copy(),
                              self.gamma[i, :k].copy(), self.zeta, float(self.s[i]), b)

    def composite(self):
        """Network estimate of the full vector: consensus mean for s1, block union otherwise."""
        if self.algorithm in ("single", "s1"):
            return self.a_hat[:, : self.p].mean(axis=0)
        out = np.zeros(self.p)
        for i, b in enumerate(self.blocks):
            out[b] = self.a_hat[i, : len(b)]
        return out

    def errors(self, a_true):
        """Per-agent error vectors over each agent's estimated indices."""
        a_aug = np.append(np.asarray(a_true, dtype=float), 0.0)
        return np.where(self.mask, self.a_hat - a_aug[self.pad], 0.0)

    def error_norms(self, a_true):
        return np.linalg.norm(self.errors(a_true), axis=1)

    def lyapunov(self, a_true):
        e = self.errors(a_true)
        with np.errstate(over="ignore", invalid="ignore"):
            return 0.5 * float(np.sum(e * e / self.gamma))

    def disagreement(self):
        if self.algorithm != "s1" or self.n < 2:
            return 0.0
        a = self.a_hat
        return float(max(np.linalg.norm(a[i] - a[j]) for i in range(self.n) for j in range(i + 1, self.n)))


def _as_stages(x, tail):
    x = np.asarray(x, dtype=float)
    if x.shape == tail:
        return np.broadcast_to(x, (4,) + tail).copy()
    if x.shape == (4,) + tail:
        return x
    raise InvalidArgument(f"expected samples of shape {tail} or {(4,) + tail}, got {x.shape}")


def _bank_from_states(algorithm, states, p, laplacian=None, parent=None, cross_weight=1.0, blocks=None):
    blocks = blocks if blocks is not None else [st.indices for st in states]
    gamma = np.ones(p)
    for b, st in zip(blocks, states):
        gamma[np.asarray(b, dtype=int)] = st.gamma
    bank = EstimatorBank(algorithm, blocks, p, gamma=gamma, zeta=states[0].zeta,
                         laplacian=laplacian, parent=parent, cross_weight=cross_weight)
    for i, st in enumerate(states):
        k = len(st.indices)
        bank.Lambda[i, :k, :k] = st.Lambda
        bank.lam[i, :k] = st.lam
        bank.a_hat[i, :k] = st.a_hat
        bank.s[i] = st.s
        if bank.use_cross:
            for j, v in st.b.items():
                bank.cross[i, j, : len(v)] = v
    return bank


def _write_back(bank, states):
    for i, st in enumerate(states):
        fresh = bank.state(i)
        st.Lambda, st.lam, st.a_hat, st.b = fresh.Lambda, fresh.lam, fresh.a_hat, fresh.b


def single_agent_step(state, k_sample, phi_sample, dt):
    """One RK4 step of the single-agent law.

    ``k_sample`` is the kernel vector over ``state.indices`` (or four RK4
    stage samples); ``phi_sample`` the matching measurement(s).
    """
    if dt <= 0:
        raise InvalidArgument("dt must be positive")
    m = len(state.indices)
    k = _as_stages(k_sample, (m,))
    phi = _as_stages(phi_sample, ())
    bank = _bank_from_states("single", [state], m, blocks=[np.arange(m)])
    bank.tick(k[:, None, :], phi[:, None], dt)
    _write_back(bank, [state])
    return state


def s1_step(states, k_samples, phi_samples, laplacian, dt):
    """Full-vector estimation with consensus. ``k_samples``: ``(N, p)`` or ``(4, N, p)``."""
    n = len(states)
    p = len(states[0].indices)
    k = _as_stages(k_samples, (n, p))
    phi = _as_stages(phi_samples, (n,))
    bank = _bank_from_states("s1", states, p, laplacian=laplacian,
                             blocks=[np.arange(p)] * n)
    bank.tick(k, phi, dt)
    _write_back(bank, states)
    return states


def s2_step(state, k_block_sample, phi_sample, dt):
    """Block estimation with the foreign-kernel disturbance left in ``phi``."""
    m = len(state.indices)
    if m == 0:
        return state
    k = _as_stages(k_block_sample, (m,))
    phi = _as_stages(phi_sample, ())
    bank = _bank_from_states("s2", [state], m, blocks=[np.arange(m)])
    bank.tick(k[:, None, :], phi[:, None], dt)
    _write_back(bank, [state])
    return state


def s3_step(states, k_full_samples, phi_samples, parent, dt, cross_weight=1.0):
    """Block estimation with cross-estimate compensation.

    ``k_full_samples`` holds every agent's full kernel vector, ``(N, p)`` or
    ``(4, N, p)``; ``parent`` is the tree parent table.
    """
    n = len(states)
    p = sum(len(st.indices) for st in states)
    k = _as_stages(k_full_samples, (n, p))
    phi = _as_stages(phi_samples, (n,))
    bank = _bank_from_states("s3", states, p, parent=parent, cross_weight=cross_weight)
    bank.tick(k, phi, dt)
    _write_back(bank, states)
    return states


def lyapunov_value(states, a_true):
    """``1/2 sum_i e_i^T Gamma^{-1} e_i`` over each agent's estimated indices."""
    a_true = np.asarray(a_true, dtype=float)
    total = 0.0
    for st in states:
        e = st.a_hat - a_true[st.indices]
        total += 0.5 * float(np.sum(e * e / st.gamma))
    return total


# -- ultimate bounds ---------------------------------------------------------


@dataclass
class ErrorBound:
    r: float
    constituents: dict

    def __post_init__(self):
        if not self.r >= 0:
            raise InvalidArgument("bound radius must be nonnegative")


def block_separation(basis: KernelBasis, block):
    """Smallest distance between the block's centres and all other centres."""
    block = np.asarray(block, dtype=int)
    others = np.setdiff1d(np.arange(basis.p), block)
    if len(block) == 0 or len(others) == 0:
        return np.inf
    c = basis.centres
    diff = c[block][:, None, :] - c[others][None, :, :]
    return float(np.sqrt(np.min(np.einsum("abk,abk->ab", diff, diff))))


def leakage_factor(basis: KernelBasis, block):
    """Largest foreign-kernel value that can reach the block's centres."""
    d = block_separation(basis, block)
    if not np.isfinite(d):
        return 0.0
    return float(np.max(np.exp(-(d**2) / basis.widths**2)))


def _check_alpha(alpha):
    if not 0.0 < alpha < 1.0:
        raise InvalidArgument("alpha must lie in (0, 1)")


def partial_bound(T, p, delta, a_max, eta, alpha=0.99):
    """Ultimate error radius of a block estimator with uncompensated leakage."""
    _check_alpha(alpha)
    r = T * p * delta * a_max / (alpha * eta)
    return ErrorBound(r, dict(T=T, p=p, delta=delta, a_max=a_max, eta=eta, alpha=alpha))


def partial_bound_inexact(T, p, delta, a_max, eta, lipschitz, eps_c, alpha=0.99):
    """Block estimator radius when kernel centres are only known to ``eps_c``."""
    _check_alpha(alpha)
    r = T * p * a_max * (np.sqrt(p) * lipschitz * eps_c + delta) / (alpha * eta)
    return ErrorBound(r, dict(T=T, p=p, delta=delta, a_max=a_max, eta=eta,
                              k=lipschitz, eps_c=eps_c, alpha=alpha))


def full_bound_inexact(T, p, a_max, eta_min, lipschitz, eps_c, alpha=0.99):
    """Consensus estimator radius when kernel centres are only known to ``eps_c``."""
    _check_alpha(alpha)
    r = T * p * np.sqrt(p) * lipschitz * eps_c * a_max / (alpha * eta_min)
    return ErrorBound(r, dict(T=T, p=p, a_max=a_max, eta_min=eta_min,
                              k=lipschitz, eps_c=eps_c, alpha=alpha))


def consensus_excitation(lambdas, laplacian, zeta):
    """Smallest eigenvalue of ``blockdiag(Lambda_i) + zeta * (L kron I_p)``."""
    n = len(lambdas)
    p = lambdas[0].shape[0]
    big = np.kron(np.asarray(laplacian, dtype=float) * zeta, np.eye(p))
    for i, lm in enumerate(lambdas):
        big[i * p:(i + 1) * p, i * p:(i + 1) * p] += lm
    return float(np.linalg.eigvalsh(big)[0])


def basis_lipschitz(basis: KernelBasis):
    return float(gaussian_lipschitz(basis.widths.min()))


# -- inexact centres ---------------------------------------------------------


def perturb_centres(basis: KernelBasis, eps_c, rng, box=None):
    """Shift each centre by an offset drawn uniformly from the disc of radius ``eps_c``.

    Shifted centres falling outside ``box`` are clamped back onto it.
    """
    if eps_c < 0:
        raise InvalidArgument("centre accuracy must be nonnegative")
    p = basis.p
    angle = rng.uniform(0.0, 2.0 * np.pi, size=p)
    radius = eps_c * np.sqrt(rng.uniform(0.0, 1.0, size=p))
    offset = np.column_stack([radius * np.cos(angle), radius * np.sin(angle)])
    moved = basis.centres + offset
    if box is not None:
        clamped = box.clamp(moved)
        n_out = int(np.sum(np.any(clamped != moved, axis=1)))
        if n_out:
            log.info("clamped %d perturbed centres back into the domain", n_out)
        moved = clamped
    return KernelBasis(moved, basis.widths)
