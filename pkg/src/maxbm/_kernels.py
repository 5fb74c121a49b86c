"""Jitted inner loops for posterior sweeps and the margin solver.

Everything here operates on plain float64/int64 arrays so the call sites
stay deterministic and the hot paths run at native speed on one core.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def project_simplex(v, z):
    """Euclidean projection of v onto {m : m >= 0, sum(m) = z}."""
    n = v.shape[0]
    out = np.zeros(n)
    if z <= 0.0:
        return out
    u = np.sort(v)[::-1]
    css = 0.0
    theta = 0.0
    for j in range(n):
        css += u[j]
        t = (css - z) / (j + 1.0)
        if u[j] - t > 0.0:
            theta = t
    for j in range(n):
        d = v[j] - theta
        if d > 0.0:
            out[j] = d
    return out


@njit(cache=True)
def accumulate_counts(lam, senders, receivers, d, n_vk, n_k):
    """Rebuild expected counts from scratch (d = sum lam, n_vk from marginals)."""
    d[:, :] = 0.0
    n_vk[:, :] = 0.0
    n_k[:] = 0.0
    m = lam.shape[0]
    k_roles = lam.shape[1]
    for i in range(m):
        s = senders[i]
        r = receivers[i]
        for k1 in range(k_roles):
            for k2 in range(k_roles):
                v = lam[i, k1, k2]
                d[k1, k2] += v
                n_vk[s, k1] += v
                n_vk[r, k2] += v
    for k in range(k_roles):
        t = 0.0
        for v in range(n_vk.shape[0]):
            t += n_vk[v, k]
        n_k[k] = t


@njit(cache=True)
def cvb_update_edge(lam, i, s, r, d, n_vk, n_k, alpha, beta, n_nodes,
                    tilt_s, tilt_r, logits):
    """One collapsed-variational edge update, in place.

    Removes interaction i from the counts, evaluates the categorical
    update over role pairs in log space (with the same-role denominator
    correction for the second draw), writes the normalized cell values
    back, and restores the counts. Returns the L-inf change of lam[i].
    """
    k_roles = d.shape[0]
    nb = n_nodes * beta
    for k1 in range(k_roles):
        srow = 0.0
        scol = 0.0
        for k2 in range(k_roles):
            srow += lam[i, k1, k2]
            scol += lam[i, k2, k1]
        n_vk[s, k1] -= srow
        n_vk[r, k1] -= scol
        n_k[k1] -= srow + scol
        for k2 in range(k_roles):
            d[k1, k2] -= lam[i, k1, k2]

    maxlog = -1.0e300
    for k1 in range(k_roles):
        ns = n_vk[s, k1]
        if ns < 0.0:
            ns = 0.0
        nk1 = n_k[k1]
        if nk1 < 0.0:
            nk1 = 0.0
        for k2 in range(k_roles):
            nr = n_vk[r, k2]
            if nr < 0.0:
                nr = 0.0
            nk2 = n_k[k2]
            if nk2 < 0.0:
                nk2 = 0.0
            dc = d[k1, k2]
            if dc < 0.0:
                dc = 0.0
            same = 1.0 if k1 == k2 else 0.0
            ll = (np.log(dc + alpha)
                  + np.log(ns + beta) + np.log(nr + beta)
                  - np.log(nk1 + nb) - np.log(nk2 + nb + same)
                  + tilt_s[k1] + tilt_r[k2])
            logits[k1, k2] = ll
            if ll > maxlog:
                maxlog = ll

    tot = 0.0
    for k1 in range(k_roles):
        for k2 in range(k_roles):
            e = np.exp(logits[k1, k2] - maxlog)
            logits[k1, k2] = e
            tot += e

    change = 0.0
    for k1 in range(k_roles):
        for k2 in range(k_roles):
            new = logits[k1, k2] / tot
            diff = abs(new - lam[i, k1, k2])
            if diff > change:
                change = diff
            lam[i, k1, k2] = new

    for k1 in range(k_roles):
        srow = 0.0
        scol = 0.0
        for k2 in range(k_roles):
            srow += lam[i, k1, k2]
            scol += lam[i, k2, k1]
        n_vk[s, k1] += srow
        n_vk[r, k1] += scol
        n_k[k1] += srow + scol
        for k2 in range(k_roles):
            d[k1, k2] += lam[i, k1, k2]

    return change


@njit(cache=True)
def cvb_sweep_kernel(lam, senders, receivers, d, n_vk, n_k, alpha, beta,
                     n_nodes, tilt):
    """Update every interaction once in ascending index order."""
    m = lam.shape[0]
    k_roles = lam.shape[1]
    logits = np.empty((k_roles, k_roles))
    max_change = 0.0
    for i in range(m):
        s = senders[i]
        r = receivers[i]
        ch = cvb_update_edge(lam, i, s, r, d, n_vk, n_k, alpha, beta,
                             n_nodes, tilt[s], tilt[r], logits)
        if ch > max_change:
            max_change = ch
    return max_change


@njit(cache=True)
def _cs_objectives(x, y, w, alpha, cost):
    """Primal value, dual value and slacks of the multiclass margin QP."""
    n = x.shape[0]
    n_classes = w.shape[1]
    reg = 0.0
    for j in range(w.shape[0]):
        for c in range(n_classes):
            reg += w[j, c] * w[j, c]
    reg *= 0.5

    xi = np.empty(n)
    dual_lin = 0.0
    slack_sum = 0.0
    for v in range(n):
        best = -1.0e300
        score_true = 0.0
        for c in range(n_classes):
            sc = 0.0
            for j in range(x.shape[1]):
                sc += w[j, c] * x[v, j]
            e = 0.0 if c == y[v] else 1.0
            if sc + e > best:
                best = sc + e
            if c == y[v]:
                score_true = sc
            dual_lin += e * alpha[v, c]
        xi[v] = best - score_true
        slack_sum += xi[v]

    primal = reg + cost * slack_sum
    dual = reg + dual_lin
    return primal, dual, xi


@njit(cache=True)
def cs_solve_kernel(x, y, cost, n_classes, tol, max_epochs, alpha_init):
    """Cyclic exact block-coordinate descent on the multiclass margin dual.

    Each row's subproblem is solved exactly by projecting onto the scaled
    simplex; the coefficient matrix is kept in sync incrementally.
    ``alpha_init`` warm-starts the duals (pass an (n, C) zero array for a
    cold start; it must satisfy the dual feasibility constraints).
    """
    n, n_feat = x.shape
    alpha = alpha_init.copy()
    w = np.zeros((n_feat, n_classes))
    for v in range(n):
        for c in range(n_classes):
            a = alpha[v, c]
            if a != 0.0:
                for j in range(n_feat):
                    w[j, c] += x[v, j] * a
    xn2 = np.empty(n)
    for v in range(n):
        t = 0.0
        for j in range(n_feat):
            t += x[v, j] * x[v, j]
        xn2[v] = t if t > 1e-12 else 1e-12

    b = np.empty(n_classes)
    epochs = 0
    primal = 0.0
    dual = 0.0
    gap = 0.0
    prev_dual = 1.0e300
    max_dual_increase = 0.0
    xi = np.zeros(n)
    for epoch in range(1, max_epochs + 1):
        epochs = epoch
        for v in range(n):
            a_norm = xn2[v]
            for c in range(n_classes):
                sc = 0.0
                for j in range(n_feat):
                    sc += w[j, c] * x[v, j]
                e = 0.0 if c == y[v] else 1.0
                cap = cost if c == y[v] else 0.0
                b[c] = cap - alpha[v, c] + (sc + e) / a_norm
            m = project_simplex(b, cost)
            for c in range(n_classes):
                cap = cost if c == y[v] else 0.0
                new_a = cap - m[c]
                delta = new_a - alpha[v, c]
                if delta != 0.0:
                    for j in range(n_feat):
                        w[j, c] += x[v, j] * delta
                    alpha[v, c] = new_a
        primal, dual, xi = _cs_objectives(x, y, w, alpha, cost)
        if dual > prev_dual and dual - prev_dual > max_dual_increase:
            max_dual_increase = dual - prev_dual
        prev_dual = dual
        gap = primal + dual
        if gap <= tol * max(1.0, abs(primal)):
            break
    return w, alpha, xi, epochs, primal, dual, gap, max_dual_increase
