"""Compiled kernels for the streaming pipeline and batch audits.

Everything here is a plain function over preallocated numpy arrays so that
numba can compile it once (cached on disk) and the sequential estimation loop
runs at native speed on a single core.  The vectorized estimator classes in
:mod:`arkde.regression` and :mod:`arkde.density` implement the same math
independently; the test suite holds the two routes together to 1e-12.
"""

import math

import numpy as np
from numba import njit

# drift family codes
DRIFT_ZERO, DRIFT_LINEAR, DRIFT_TANH, DRIFT_SINE = 0, 1, 2, 3


@njit(cache=True, inline="always")
def _k1(kid, t):
    """1-d base kernel by integer code: 0 epanechnikov, 1 triweight, 2 quartic."""
    u = 1.0 - t * t
    if u <= 0.0:
        return 0.0
    if kid == 0:
        return 0.75 * u
    if kid == 1:
        return 1.09375 * u * u * u
    return 0.9375 * u * u


@njit(cache=True, inline="always")
def _drift_component(drift_id, theta, scale, shift, amplitude, x, j):
    """Coordinate j of f(x); the single code path shared by simulation and evaluation."""
    if drift_id == DRIFT_ZERO:
        return 0.0
    if drift_id == DRIFT_LINEAR:
        fj = 0.0
        for k in range(x.shape[0]):
            fj += theta[j, k] * x[k]
        return fj
    if drift_id == DRIFT_TANH:
        return scale * math.tanh(x[j]) + shift[j]
    return amplitude * math.sin(x[j])


@njit(cache=True)
def drift_batch(drift_id, theta, scale, shift, amplitude, pts):
    """f applied to every row of pts, bit-identical to the simulation recursion."""
    m, d = pts.shape
    out = np.empty((m, d))
    for i in range(m):
        for j in range(d):
            out[i, j] = _drift_component(drift_id, theta, scale, shift, amplitude, pts[i], j)
    return out


@njit(cache=True)
def simulate_states(drift_id, theta, scale, shift, amplitude, x0, eps):
    """Iterate X_i = f(X_{i-1}) + eps_i; returns (states, first_bad_step or 0)."""
    n, d = eps.shape
    states = np.empty((n + 1, d))
    for j in range(d):
        states[0, j] = x0[j]
    for i in range(1, n + 1):
        bad = False
        for j in range(d):
            fj = _drift_component(drift_id, theta, scale, shift, amplitude, states[i - 1], j)
            v = fj + eps[i - 1, j]
            if not np.isfinite(v):
                bad = True
            states[i, j] = v
        if bad:
            return states, i
    return states, 0


@njit(cache=True, inline="always")
def _query_csr(
    xq, apred, aresp, ascale, awt, start, fill,
    lo, inv_side, ncells, strides, offsets, kid, num_out,
):
    """Weighted kernel sums over bucketed samples around ``xq``.

    Probes the 3^d cells adjacent to the query's cell and filters every
    candidate by its own shrinking support radius (|u| <= 1 in the scaled
    argument).  Returns the denominator; ``num_out`` receives the weighted
    response sum.
    """
    d = xq.shape[0]
    den = 0.0
    for j in range(d):
        num_out[j] = 0.0
    for r in range(offsets.shape[0]):
        flat = 0
        ok = True
        for j in range(d):
            cj = int(math.floor((xq[j] - lo[j]) * inv_side))
            if cj < 0:
                cj = 0
            elif cj >= ncells[j]:
                cj = ncells[j] - 1
            cj += offsets[r, j]
            if cj < 0 or cj >= ncells[j]:
                ok = False
                break
            flat += cj * strides[j]
        if not ok:
            continue
        s0 = start[flat]
        s1 = s0 + fill[flat]
        for k in range(s0, s1):
            kv = 1.0
            for j in range(d):
                t = ascale[k] * (apred[k, j] - xq[j])
                b = _k1(kid, t)
                if b == 0.0:
                    kv = 0.0
                    break
                kv *= b
            if kv > 0.0:
                w = awt[k] * kv
                den += w
                for j in range(d):
                    num_out[j] += w * aresp[k, j]
    return den


@njit(cache=True)
def nw_batch_csr(
    xs, apred, aresp, ascale, awt, start, fill,
    lo, inv_side, ncells, strides, offsets, kid,
):
    """Batch Nadaraya-Watson evaluation over a frozen CSR bucket index."""
    m, d = xs.shape
    out = np.zeros((m, d))
    dens = np.empty(m)
    num = np.empty(d)
    for q in range(m):
        den = _query_csr(
            xs[q], apred, aresp, ascale, awt, start, fill,
            lo, inv_side, ncells, strides, offsets, kid, num,
        )
        dens[q] = den
        if den > 0.0:
            for j in range(d):
                out[q, j] = num[j] / den
    return out, dens


@njit(cache=True, inline="always")
def _grid_push(accum, glo, gstep, gn, e, s, w, kid):
    """Add one kernel bump (scale s, weight w) centered at ``e`` to the node accumulator."""
    d = e.shape[0]
    r = 1.0 / s
    lo0 = int(math.ceil((e[0] - r - glo[0]) / gstep[0]))
    hi0 = int(math.floor((e[0] + r - glo[0]) / gstep[0]))
    if lo0 < 0:
        lo0 = 0
    if hi0 > gn[0] - 1:
        hi0 = gn[0] - 1
    if d == 1:
        for k in range(lo0, hi0 + 1):
            b = _k1(kid, s * (e[0] - (glo[0] + k * gstep[0])))
            if b > 0.0:
                accum[k] += w * b
    else:
        lo1 = int(math.ceil((e[1] - r - glo[1]) / gstep[1]))
        hi1 = int(math.floor((e[1] + r - glo[1]) / gstep[1]))
        if lo1 < 0:
            lo1 = 0
        if hi1 > gn[1] - 1:
            hi1 = gn[1] - 1
        for k0 in range(lo0, hi0 + 1):
            b0 = _k1(kid, s * (e[0] - (glo[0] + k0 * gstep[0])))
            if b0 == 0.0:
                continue
            base = k0 * gn[1]
            for k1 in range(lo1, hi1 + 1):
                b1 = _k1(kid, s * (e[1] - (glo[1] + k1 * gstep[1])))
                if b1 > 0.0:
                    accum[base + k1] += w * b0 * b1


@njit(cache=True)
def accum_batch(resid, scales, wts, glo, gstep, gn, kid):
    """Dense recomputation of the grid accumulator from stored residuals (audit path)."""
    d = resid.shape[1]
    total = 1
    for j in range(d):
        total *= gn[j]
    accum = np.zeros(total)
    n = resid.shape[0]
    if d == 1:
        for k in range(gn[0]):
            y = glo[0] + k * gstep[0]
            acc = 0.0
            for i in range(n):
                b = _k1(kid, scales[i] * (resid[i, 0] - y))
                if b > 0.0:
                    acc += wts[i] * b
            accum[k] = acc
    else:
        for k0 in range(gn[0]):
            y0 = glo[0] + k0 * gstep[0]
            for k1 in range(gn[1]):
                y1 = glo[1] + k1 * gstep[1]
                acc = 0.0
                for i in range(n):
                    b0 = _k1(kid, scales[i] * (resid[i, 0] - y0))
                    if b0 == 0.0:
                        continue
                    b1 = _k1(kid, scales[i] * (resid[i, 1] - y1))
                    if b1 > 0.0:
                        acc += wts[i] * b0 * b1
                accum[k0 * gn[1] + k1] = acc
    return accum


@njit(cache=True)
def density_points(resid, scales, wts, ys, kid):
    """Unnormalized recursive KDE sums at arbitrary points (divide by n for the density)."""
    n, d = resid.shape
    q = ys.shape[0]
    out = np.zeros(q)
    for p in range(q):
        acc = 0.0
        for i in range(n):
            kv = 1.0
            for j in range(d):
                b = _k1(kid, scales[i] * (resid[i, j] - ys[p, j]))
                if b == 0.0:
                    kv = 0.0
                    break
                kv *= b
            acc += wts[i] * kv
        out[p] = acc
    return out


@njit(cache=True)
def pipeline_core(
    X, fX, eps, have_eps, diag, oracle_resid,
    trunc, keep, has_v, inside,
    rscale, rwt, slot, pair_cell,
    apred, aresp, ascale, awt, start, fill,
    lo, inv_side, ncells, strides, offsets, kid_f,
    dscale, dwt, kid_p, has_grid, accum, glo, gstep, gn,
    resid_out, q_out, pred_err_out, gap_out,
    ckpt, avg_pred_ck, ins_ck, out_ck, gap_ck, accum_snap,
    nodes, nodes_f, node_off, supf_ck, minden_ck,
):
    """One full pass of the simulate -> predict -> residual -> update recursion.

    Step i computes the residual with the drift estimate built from pairs
    1..i-2, pushes it into the density accumulator, and only then inserts the
    pair (X_{i-1}, X_i); the update ordering of the estimator is therefore
    enforced structurally.  Checkpoint rows snapshot the running averages,
    the node accumulator, and the sup error of the drift estimate over the
    dilated ball supplied in ``nodes``.
    """
    n = X.shape[0] - 1
    d = X.shape[1]
    num = np.empty(d)
    pred_run = 0.0
    gap_run = 0.0
    ins_run = 0.0
    out_run = 0.0
    t = 0
    nck = ckpt.shape[0]
    for i in range(1, n + 1):
        # prediction q = fhat_{i-1}(X_{i-1}) from pairs 1..i-2
        den = _query_csr(
            X[i - 1], apred, aresp, ascale, awt, start, fill,
            lo, inv_side, ncells, strides, offsets, kid_f, num,
        )
        if den > 0.0:
            for j in range(d):
                q_out[i - 1, j] = num[j] / den
        else:
            for j in range(d):
                q_out[i - 1, j] = 0.0

        # residual (optionally truncated by the threshold indicator on X_{i-1})
        if oracle_resid:
            for j in range(d):
                resid_out[i - 1, j] = eps[i - 1, j]
        elif trunc and keep[i - 1] == 0:
            for j in range(d):
                resid_out[i - 1, j] = X[i, j]
        else:
            for j in range(d):
                resid_out[i - 1, j] = X[i, j] - q_out[i - 1, j]

        if has_grid:
            _grid_push(accum, glo, gstep, gn, resid_out[i - 1], dscale[i], dwt[i], kid_p)

        if diag:
            s2 = 0.0
            for j in range(d):
                dv = q_out[i - 1, j] - fX[i - 1, j]
                s2 += dv * dv
            pe = math.sqrt(s2)
            pred_err_out[i - 1] = pe
            pred_run += pe
            if has_v and i >= 2:
                if inside[i - 1] == 1:
                    ins_run += pe
                else:
                    out_run += pe
            if have_eps:
                s2 = 0.0
                for j in range(d):
                    dv = resid_out[i - 1, j] - eps[i - 1, j]
                    s2 += dv * dv
                g = math.sqrt(s2)
                gap_out[i - 1] = g
                gap_run += g

        # insert pair (X_{i-1}, X_i) with pair index i-1 (weights (i-1)^{beta d})
        if i >= 2:
            jp = i - 1
            s = slot[jp]
            for j in range(d):
                apred[s, j] = X[jp, j]
                aresp[s, j] = X[i, j]
            ascale[s] = rscale[jp]
            awt[s] = rwt[jp]
            fill[pair_cell[jp]] += 1

        if t < nck and i == ckpt[t]:
            avg_pred_ck[t] = pred_run / i
            gap_ck[t] = gap_run / i if have_eps else 0.0
            if has_v and diag:
                den2 = _query_csr(
                    X[i], apred, aresp, ascale, awt, start, fill,
                    lo, inv_side, ncells, strides, offsets, kid_f, num,
                )
                s2 = 0.0
                for j in range(d):
                    qj = num[j] / den2 if den2 > 0.0 else 0.0
                    dv = qj - fX[i, j]
                    s2 += dv * dv
                pe2 = math.sqrt(s2)
                a = ins_run
                b = out_run
                if inside[i] == 1:
                    a += pe2
                else:
                    b += pe2
                ins_ck[t] = a / i
                out_ck[t] = b / i
            if has_grid:
                for g2 in range(accum.shape[0]):
                    accum_snap[t, g2] = accum[g2]
            sup = 0.0
            mind = np.inf
            for kn in range(node_off[t], node_off[t + 1]):
                den3 = _query_csr(
                    nodes[kn], apred, aresp, ascale, awt, start, fill,
                    lo, inv_side, ncells, strides, offsets, kid_f, num,
                )
                s2 = 0.0
                for j in range(d):
                    qj = num[j] / den3 if den3 > 0.0 else 0.0
                    dv = qj - nodes_f[kn, j]
                    s2 += dv * dv
                e3 = math.sqrt(s2)
                if e3 > sup:
                    sup = e3
                if den3 < mind:
                    mind = den3
            supf_ck[t] = sup
            minden_ck[t] = mind if node_off[t + 1] > node_off[t] else 0.0
            t += 1
    return 0
