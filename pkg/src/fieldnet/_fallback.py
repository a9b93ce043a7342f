"""Pure NumPy implementations of the hot kernels.

These are selected when the compiled ``_core`` extension is unavailable and
serve as the reference the compiled versions are tested against.  The tick
integrator here forms every RK4 stage explicitly; the compiled version uses
rank-one corrections instead, so the two agree to rounding only.
"""

import numpy as np

_RK4_WEIGHTS = (1.0, 2.0, 2.0, 1.0)


def gaussian_kernels(points, centres, inv_sigma2):
    """Kernel matrix ``out[m, i] = exp(-|points[m] - centres[i]|^2 * inv_sigma2[i])``."""
    diff = points[:, None, :] - centres[None, :, :]
    d2 = np.einsum("mpk,mpk->mp", diff, diff)
    return np.exp(-d2 * inv_sigma2[None, :])


def _derivative(lam_mat, lam_vec, a_hat, cross, k_own, k_blocks, phi, s,
                gamma, zeta, laplacian, parent, cross_weight):
    sk = s[:, None] * k_own
    d_mat = sk[:, :, None] * k_own[:, None, :]

    if k_blocks is not None:
        # compensation with the cross-estimates of foreign blocks
        contrib = np.einsum("ijm,ijm->ij", k_blocks, cross)
        np.fill_diagonal(contrib, 0.0)
        comp = contrib.sum(axis=1)
    else:
        comp = 0.0
    d_vec = sk * (phi - comp)[:, None]

    resid = np.einsum("imn,in->im", lam_mat, a_hat) - lam_vec
    if zeta != 0.0:
        resid = resid + zeta * (laplacian @ a_hat)
    d_a = -gamma * resid

    d_cross = None
    if k_blocks is not None:
        n = a_hat.shape[0]
        src = cross.copy()
        for j in range(n):
            src[j, j] = a_hat[j]
        d_cross = np.zeros_like(cross)
        for j in range(n):
            for i in range(n):
                par = parent[j, i]
                if i == j or par < 0:
                    continue
                d_cross[i, j] = -cross_weight * (src[i, j] - src[par, j])
    return d_mat, d_vec, d_a, d_cross


def estimator_tick(lam_mat, lam_vec, a_hat, cross, k_own, k_blocks, phi, s,
                   gamma, zeta, laplacian, parent, cross_weight, dt):
    """Advance all agents' estimator states by one RK4 step, in place.

    Shapes: ``lam_mat (N, M, M)``, ``lam_vec``/``a_hat``/``gamma`` ``(N, M)``,
    ``cross (N, N, M)``, ``k_own (4, N, M)``, ``k_blocks (4, N, N, M)`` or
    ``None`` when cross-estimation is off, ``phi (4, N)``, ``s (N,)``,
    ``laplacian (N, N)``, ``parent (N, N)`` with ``parent[j, i]`` the
    in-neighbour of agent ``i`` in the tree rooted at ``j`` (-1 for the root).
    """
    use_cross = k_blocks is not None
    base = (lam_mat.copy(), lam_vec.copy(), a_hat.copy(),
            cross.copy() if use_cross else cross)
    acc = [np.zeros_like(lam_mat), np.zeros_like(lam_vec),
           np.zeros_like(a_hat), np.zeros_like(cross) if use_cross else None]
    stage = base
    offsets = (0.5 * dt, 0.5 * dt, dt)
    for st in range(4):
        derivs = _derivative(*stage, k_own[st],
                             k_blocks[st] if use_cross else None,
                             phi[st], s, gamma, zeta, laplacian, parent,
                             cross_weight)
        w = _RK4_WEIGHTS[st]
        for slot in range(4):
            if derivs[slot] is not None:
                acc[slot] += w * derivs[slot]
        if st < 3:
            h = offsets[st]
            stage = tuple(
                b + h * d if d is not None else b for b, d in zip(base, derivs)
            )
    lam_mat[...] = base[0] + (dt / 6.0) * acc[0]
    lam_vec[...] = base[1] + (dt / 6.0) * acc[1]
    a_hat[...] = base[2] + (dt / 6.0) * acc[2]
    if use_cross:
        cross[...] = base[3] + (dt / 6.0) * acc[3]
