"""Pure-numpy implementations of the hot kernels.

Every function here has a twin in ``_core.pyx`` with the same signature and
semantics. Transition rows are stored padded: ``nxt[s, a, k]`` is a next-state
id and ``prob[s, a, k]`` its probability (0 on padding).
"""

import numpy as np

MAX_BISECTION_STEPS = 200


def propagate(occ, pi, nxt, prob):
    """Push a state distribution one step forward under ``pi``."""
    weights = occ[:, None, None] * pi[:, :, None] * prob
    return np.bincount(nxt.ravel(), weights=weights.ravel(), minlength=occ.shape[0])


def expected_next(values, nxt, prob):
    """``q[s, a] = sum_k prob[s, a, k] * values[nxt[s, a, k]]``."""
    return np.einsum("sak,sak->sa", prob, values[nxt])


def backup(rewards, pi, values_next, nxt, prob, gamma):
    """One Bellman backup under a fixed policy row."""
    q = expected_next(values_next, nxt, prob)
    return rewards + gamma * np.einsum("sa,sa->s", pi, q)


def simplex_solve(k, b, lam_v, tol, split_ties):
    """Maximize ``sum_a k_a log pi_a + sum_a pi_a b_a`` over the simplex, per row.

    Returns ``(pi, lam_state, lam_action, case, root)``. ``case`` is 0 for rows
    without counts, 1 when the bisection root dominates every ``b_a`` and 2
    when the row's mass is topped up on the best zero-count action(s).
    ``root`` is the bisection root (NaN for case 0).
    """
    num_rows, num_actions = k.shape
    pos = k > 0
    has = pos.any(axis=1)
    bmax = b.max(axis=1)
    tie_tol = 1e-12 * np.maximum(1.0, np.abs(bmax))

    pi = np.zeros((num_rows, num_actions))
    lam_state = np.zeros(num_rows)
    lam_action = np.zeros((num_rows, num_actions))
    case = np.zeros(num_rows, dtype=np.int8)
    root = np.full(num_rows, np.nan)

    # rows without counts: the objective is linear in pi
    empty = ~has
    if empty.any():
        be = b[empty]
        tied = be >= (bmax[empty] - tie_tol[empty])[:, None]
        reachable = lam_v[empty] != 0
        if not split_ties:
            # lowest index among the tied actions, uniform on unreachable rows
            first = np.argmax(tied, axis=1)
            tied = np.zeros_like(tied)
            tied[np.arange(tied.shape[0]), first] = True
            tied[~reachable] = True
        row = tied / tied.sum(axis=1, keepdims=True)
        pi[empty] = row
        lam_state[empty] = bmax[empty]
        lam_action[empty] = np.maximum(bmax[empty][:, None] - be, 0.0)

    if not has.any():
        return pi, lam_state, lam_action, case, root

    kh = k[has]
    bh = b[has]
    ph = pos[has]
    b_pos_max = np.where(ph, bh, -np.inf).max(axis=1)
    k_min = np.where(ph, kh, np.inf).min(axis=1)
    k_max = kh.max(axis=1)
    lo = k_min + b_pos_max
    hi = num_actions * k_max + b_pos_max

    for _ in range(MAX_BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        active = (hi - lo > tol) & (mid > lo) & (mid < hi)
        if not active.any():
            break
        denom = np.where(ph, mid[:, None] - bh, 1.0)
        f = np.where(ph, kh / denom, 0.0).sum(axis=1) - 1.0
        up = active & (f > 0)
        down = active & ~(f > 0)
        lo = np.where(up, mid, lo)
        hi = np.where(down, mid, hi)
    lam = 0.5 * (lo + hi)

    bmax_h = bmax[has]
    first_case = lam >= bmax_h
    lam_s = np.where(first_case, lam, bmax_h)
    denom = np.where(ph, lam_s[:, None] - bh, 1.0)
    ph_pi = np.where(ph, kh / denom, 0.0)

    total = ph_pi.sum(axis=1)
    out = np.where(first_case[:, None], ph_pi / total[:, None], ph_pi)
    second = ~first_case
    if second.any():
        rest = 1.0 - total[second]
        tt = tie_tol[has][second]
        tied = (~ph[second]) & (bh[second] >= (bmax_h[second] - tt)[:, None])
        if not split_ties:
            first = np.argmax(tied, axis=1)
            tied = np.zeros_like(tied)
            tied[np.arange(tied.shape[0]), first] = True
        share = np.maximum(rest, 0.0) / tied.sum(axis=1)
        out[second] = np.where(tied, share[:, None], out[second])

    pi[has] = out
    lam_state[has] = lam_s
    lam_action[has] = np.where(ph, 0.0, np.maximum(lam_s[:, None] - bh, 0.0))
    case[has] = np.where(first_case, 1, 2)
    root[has] = lam
    return pi, lam_state, lam_action, case, root
