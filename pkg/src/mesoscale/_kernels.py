"""Compiled inner loops for the jump process and its post-hoc replays.

Channel layout: with ``R`` reactions and ``K = R + 2``, channel ``j*K + k``
is reaction ``k`` in cell ``j`` for ``k < R``, the right diffusion jump
``j -> j+1`` for ``k == R`` and the left jump ``j -> j-1`` for ``k == R+1``.
Leaves of the binary sum tree sit at ``P + channel`` with ``P`` a power of 2.

Reactions arrive as one float table (see the ``COL_*`` constants) so that the
hot loops touch a single array.

Status codes returned by the kernels: 0 ok, 1 negative rate, 2 negative
count, 3 event cap reached, 4 rate-tree audit mismatch.
"""

import math

import numpy as np
from numba import njit

OK, NEG_RATE, NEG_COUNT, EVENT_CAP, AUDIT_FAIL = 0, 1, 2, 3, 4

# columns of the packed reaction table (one row per reaction)
COL_SPECIES, COL_GAMMA, COL_A, COL_D, COL_BKIND, COL_VMAX, COL_HILL_K, COL_HILL_H = range(8)
COL_POLY = 8


@njit(cache=True, inline="always")
def _b(r, u, net):
    if net[r, COL_BKIND] == 0.0:
        acc = 0.0
        for k in range(net.shape[1] - 1, COL_POLY - 1, -1):
            acc = acc * u + net[r, k]
        return acc
    vmax = net[r, COL_VMAX]
    if vmax == 0.0 or u <= 0.0:
        return 0.0
    h = net[r, COL_HILL_H]
    uh = u ** h
    return vmax * uh / (net[r, COL_HILL_K] ** h + uh)


@njit(cache=True, inline="always")
def reaction_rate(r, u, v, net):
    return net[r, COL_A] * u * v + _b(r, u, net) + net[r, COL_D] * v


@njit(cache=True, inline="always")
def cell_drifts(u, v, net):
    """``(R_C, R_D, R~_C)`` at one cell."""
    rc = 0.0
    rd = 0.0
    rt = 0.0
    for r in range(net.shape[0]):
        lam = reaction_rate(r, u, v, net)
        g = net[r, COL_GAMMA]
        if net[r, COL_SPECIES] == 0.0:
            rc += g * lam
            rt += g * g * lam
        else:
            rd += g * lam
    return rc, rd, rt


@njit(cache=True)
def drift_field(u, v, net, outc, outd):
    for j in range(u.shape[0]):
        rc, rd, rt = cell_drifts(u[j], v[j], net)
        outc[j] = rc
        outd[j] = rd


# ---------------------------------------------------------------------------
# sum tree
# ---------------------------------------------------------------------------

@njit(cache=True)
def tree_size(nch):
    P = 1
    while P < nch:
        P *= 2
    return P


@njit(cache=True, inline="always")
def set_cell_leaves(j, countsC, countsD, l, n, net, K, tree, P):
    """Refresh the K leaves of cell ``j`` and their ancestors.  Returns status."""
    R = K - 2
    u = countsC[j] / l
    v = float(countsD[j])
    base = P + j * K
    status = OK
    for k in range(R):
        lam = reaction_rate(k, u, v, net)
        if lam < 0.0:
            status = NEG_RATE
            lam = 0.0
        if net[k, COL_SPECIES] == 0.0:
            lam *= l
        tree[base + k] = lam
    diff = float(n) * float(n) * countsC[j]
    tree[base + R] = diff
    tree[base + R + 1] = diff
    lo = base // 2
    hi = (base + K - 1) // 2
    while lo >= 1:
        for i in range(lo, hi + 1):
            tree[i] = tree[2 * i] + tree[2 * i + 1]
        lo //= 2
        hi //= 2
    return status


@njit(cache=True, inline="always")
def update_cell(j, countsC, countsD, l, n, net, K, tree, P, cache):
    """:func:`set_cell_leaves` plus the cell's drift cache, sharing one rate
    evaluation per reaction."""
    R = K - 2
    u = countsC[j] / l
    v = float(countsD[j])
    base = P + j * K
    status = OK
    rc = 0.0
    rd = 0.0
    for k in range(R):
        lam = reaction_rate(k, u, v, net)
        if lam < 0.0:
            status = NEG_RATE
        if net[k, COL_SPECIES] == 0.0:
            rc += net[k, COL_GAMMA] * lam
            tree[base + k] = max(lam, 0.0) * l
        else:
            rd += net[k, COL_GAMMA] * lam
            tree[base + k] = max(lam, 0.0)
    cache[0, j] = rc
    cache[1, j] = rd
    cache[2, j] = u
    diff = float(n) * float(n) * countsC[j]
    tree[base + R] = diff
    tree[base + R + 1] = diff
    lo = base // 2
    hi = (base + K - 1) // 2
    while lo >= 1:
        for i in range(lo, hi + 1):
            tree[i] = tree[2 * i] + tree[2 * i + 1]
        lo //= 2
        hi //= 2
    return status


@njit(cache=True)
def build_tree(countsC, countsD, l, n, net, K, tree, P):
    tree[:] = 0.0
    status = OK
    for j in range(n):
        s = set_cell_leaves(j, countsC, countsD, l, n, net, K, tree, P)
        if s != OK:
            status = s
    return status


@njit(cache=True, inline="always")
def tree_select(tree, P, r):
    i = 1
    while i < P:
        left = 2 * i
        if r < tree[left]:
            i = left
        else:
            r -= tree[left]
            i = left + 1
    return i - P


@njit(cache=True)
def audit_tree(countsC, countsD, l, n, net, K, tree, P):
    """Compare leaves with a fresh evaluation; rebuild internal nodes."""
    fresh = np.zeros_like(tree)
    build_tree(countsC, countsD, l, n, net, K, fresh, P)
    worst = 0.0
    for c in range(n * K):
        dev = abs(fresh[P + c] - tree[P + c]) / max(1.0, abs(fresh[P + c]))
        if dev > worst:
            worst = dev
    tree[:] = fresh
    return worst


# ---------------------------------------------------------------------------
# compensated accumulation
# ---------------------------------------------------------------------------

@njit(cache=True, inline="always")
def kahan_add(acc, comp, j, x):
    y = x - comp[j]
    t = acc[j] + y
    comp[j] = (t - acc[j]) - y
    acc[j] = t


@njit(cache=True, inline="always")
def flush_cell(j, t, last, cache, acc, comp):
    """Advance the three integrals of cell ``j`` (rows of ``acc``: int R_C,
    int R_D, int u) to time ``t`` at the cached, piecewise-constant values."""
    dt = t - last[j]
    if dt > 0.0:
        for q in range(3):
            y = cache[q, j] * dt - comp[q, j]
            s = acc[q, j] + y
            comp[q, j] = (s - acc[q, j]) - y
            acc[q, j] = s
    last[j] = t


@njit(cache=True, inline="always")
def refresh_cell_cache(j, countsC, countsD, l, net, cache):
    u = countsC[j] / l
    rc, rd, rt = cell_drifts(u, float(countsD[j]), net)
    cache[0, j] = rc
    cache[1, j] = rd
    cache[2, j] = u


@njit(cache=True, inline="always")
def apply_channel(c, K, n, countsC, countsD, net):
    """Mutate counts for channel ``c``; returns (first cell, second cell or -1)."""
    j = c // K
    k = c - j * K
    R = K - 2
    if k < R:
        g = int(net[k, COL_GAMMA])
        if net[k, COL_SPECIES] == 0.0:
            countsC[j] += g
        else:
            countsD[j] += g
        return j, -1
    if k == R:
        dst = (j + 1) % n
    else:
        dst = (j - 1 + n) % n
    countsC[j] -= 1
    countsC[dst] += 1
    return j, dst


@njit(cache=True)
def neg_sobolev_sq(v, weights, cos_tab, sin_tab):
    n = v.shape[0]
    total = 0.0
    for m in range(weights.shape[0]):
        a = 0.0
        b = 0.0
        for j in range(n):
            a += v[j] * cos_tab[m, j]
            b += v[j] * sin_tab[m, j]
        a /= n
        b /= n
        total += weights[m] * (a * a + b * b)
    return total


# ---------------------------------------------------------------------------
# deterministic flow after truncation
# ---------------------------------------------------------------------------

@njit(cache=True)
def _flow_rhs(u, v, net, du, dv, rc, rd):
    n = u.shape[0]
    nn = float(n) * float(n)
    for j in range(n):
        c, d, t = cell_drifts(u[j], v[j], net)
        rc[j] = c
        rd[j] = d
        du[j] = nn * (u[(j + 1) % n] - 2.0 * u[j] + u[(j - 1 + n) % n]) + c
        dv[j] = d


@njit(cache=True)
def flow_step(u, v, h, net, acc, comp):
    """One RK4 step of ``u' = Delta_N u + R_C``, ``v' = R_D``; drift integrals
    use the same stage weights so the martingale parts stay frozen."""
    n = u.shape[0]
    k1u = np.empty(n); k1v = np.empty(n); r1c = np.empty(n); r1d = np.empty(n)
    k2u = np.empty(n); k2v = np.empty(n); r2c = np.empty(n); r2d = np.empty(n)
    k3u = np.empty(n); k3v = np.empty(n); r3c = np.empty(n); r3d = np.empty(n)
    k4u = np.empty(n); k4v = np.empty(n); r4c = np.empty(n); r4d = np.empty(n)
    _flow_rhs(u, v, net, k1u, k1v, r1c, r1d)
    u2 = u + 0.5 * h * k1u
    v2 = v + 0.5 * h * k1v
    _flow_rhs(u2, v2, net, k2u, k2v, r2c, r2d)
    u3 = u + 0.5 * h * k2u
    v3 = v + 0.5 * h * k2v
    _flow_rhs(u3, v3, net, k3u, k3v, r3c, r3d)
    u4 = u + h * k3u
    v4 = v + h * k3v
    _flow_rhs(u4, v4, net, k4u, k4v, r4c, r4d)
    w = h / 6.0
    for j in range(n):
        kahan_add(acc[0], comp[0], j, w * (r1c[j] + 2.0 * r2c[j] + 2.0 * r3c[j] + r4c[j]))
        kahan_add(acc[1], comp[1], j, w * (r1d[j] + 2.0 * r2d[j] + 2.0 * r3d[j] + r4d[j]))
        kahan_add(acc[2], comp[2], j, w * (u[j] + 2.0 * u2[j] + 2.0 * u3[j] + u4[j]))
        u[j] += w * (k1u[j] + 2.0 * k2u[j] + 2.0 * k3u[j] + k4u[j])
        v[j] += w * (k1v[j] + 2.0 * k2v[j] + 2.0 * k3v[j] + k4v[j])


# ---------------------------------------------------------------------------
# exact simulation
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def simulate_exact(net, n, l, T, sample_times, seed, M, weights, cos_tab, sin_tab,
                   check_every, countsC0, countsD0, log_events, max_events, audit_every):
    np.random.seed(seed)
    R = net.shape[0]
    K = R + 2
    P = tree_size(n * K)
    tree = np.zeros(2 * P)
    countsC = countsC0.copy()
    countsD = countsD0.copy()
    S = sample_times.shape[0]
    out_u = np.zeros((S, n))
    out_v = np.zeros((S, n))
    out_c = np.zeros((S, n))
    out_d = np.zeros((S, n))
    out_i = np.zeros((S, n))
    acc = np.zeros((3, n))
    comp = np.zeros((3, n))
    cache = np.zeros((3, n))
    last = np.zeros(n)
    for j in range(n):
        refresh_cell_cache(j, countsC, countsD, l, net, cache)

    cap = 1024 if log_events else 1
    ev_t = np.empty(cap)
    ev_c = np.empty(cap, dtype=np.int64)
    n_log = 0

    status = build_tree(countsC, countsD, l, n, net, K, tree, P)
    u_limit = (M + 1.0) * l
    v_limit = (M + 1.0) * (M + 1.0)
    tau = -1.0
    window = 0.0
    last_check = 0.0
    v_dirty = True
    since_check = 0
    events = 0
    worst_audit = 0.0
    t = 0.0
    si = 0

    if neg_sobolev_sq(countsD.astype(np.float64), weights, cos_tab, sin_tab) > v_limit:
        tau = 0.0
    for j in range(n):
        if countsC[j] > u_limit:
            tau = 0.0

    while status == OK and tau < 0.0:
        total = tree[1]
        if total > 0.0:
            dt = -math.log(1.0 - np.random.random()) / total
        else:
            dt = np.inf
        t_next = t + dt
        while si < S and sample_times[si] < t_next and tau < 0.0:
            s = sample_times[si]
            if v_dirty:
                if neg_sobolev_sq(countsD.astype(np.float64), weights, cos_tab, sin_tab) > v_limit:
                    tau = s
                    window = s - last_check
                    break
                v_dirty = False
                last_check = s
            for j in range(n):
                flush_cell(j, s, last, cache, acc, comp)
                out_u[si, j] = countsC[j] / l
                out_v[si, j] = countsD[j]
                out_c[si, j] = acc[0, j]
                out_d[si, j] = acc[1, j]
                out_i[si, j] = acc[2, j]
            si += 1
        if tau >= 0.0 or t_next > T:
            break
        t = t_next
        c = tree_select(tree, P, np.random.random() * total)
        if tree[P + c] <= 0.0:
            continue  # rounding landed on an empty leaf; redraw at the same time
        j = c // K
        k = c - j * K
        if k < R:
            flush_cell(j, t, last, cache, acc, comp)
            apply_channel(c, K, n, countsC, countsD, net)
            s1 = update_cell(j, countsC, countsD, l, n, net, K, tree, P, cache)
            if s1 != OK:
                status = s1
            if countsC[j] < 0 or countsD[j] < 0:
                status = NEG_COUNT
            if net[k, COL_SPECIES] == 0.0:
                if int(net[k, COL_GAMMA]) > 0 and countsC[j] > u_limit:
                    tau = t
            else:
                v_dirty = True
        else:
            dst = (j + 1) % n if k == R else (j - 1 + n) % n
            flush_cell(j, t, last, cache, acc, comp)
            flush_cell(dst, t, last, cache, acc, comp)
            countsC[j] -= 1
            countsC[dst] += 1
            s1 = update_cell(j, countsC, countsD, l, n, net, K, tree, P, cache)
            s2 = update_cell(dst, countsC, countsD, l, n, net, K, tree, P, cache)
            if s1 != OK:
                status = s1
            if s2 != OK:
                status = s2
            if countsC[j] < 0:
                status = NEG_COUNT
            if countsC[dst] > u_limit:
                tau = t
        events += 1
        if log_events:
            if n_log == cap:
                cap *= 2
                nt = np.empty(cap)
                nc = np.empty(cap, dtype=np.int64)
                nt[:n_log] = ev_t[:n_log]
                nc[:n_log] = ev_c[:n_log]
                ev_t = nt
                ev_c = nc
            ev_t[n_log] = t
            ev_c[n_log] = c
            n_log += 1
        if events >= max_events:
            status = EVENT_CAP
        if audit_every > 0 and events % audit_every == 0:
            dev = audit_tree(countsC, countsD, l, n, net, K, tree, P)
            if dev > worst_audit:
                worst_audit = dev
            if dev > 1e-9:
                status = AUDIT_FAIL
        since_check += 1
        if tau < 0.0 and v_dirty and since_check >= check_every:
            since_check = 0
            if neg_sobolev_sq(countsD.astype(np.float64), weights, cos_tab, sin_tab) > v_limit:
                tau = t
                window = t - last_check
            v_dirty = False
            last_check = t

    if tau >= 0.0 and status == OK:
        # jumps frozen: follow the drift ODE from the detection time
        for j in range(n):
            flush_cell(j, tau, last, cache, acc, comp)
        u = countsC.astype(np.float64) / l
        v = countsD.astype(np.float64)
        h = 1.0 / (4.0 * n * n)
        tc = tau
        while si < S:
            s = sample_times[si]
            while tc < s:
                step = min(h, s - tc)
                flow_step(u, v, step, net, acc, comp)
                tc += step
            for j in range(n):
                out_u[si, j] = u[j]
                out_v[si, j] = v[j]
                out_c[si, j] = acc[0, j]
                out_d[si, j] = acc[1, j]
                out_i[si, j] = acc[2, j]
            si += 1

    return (out_u, out_v, out_c, out_d, out_i, tau, window, events, status,
            ev_t[:n_log].copy(), ev_c[:n_log].copy(), worst_audit)


@njit(cache=True)
def fire_once(net, n, l, countsC, countsD, tree, P, u1, u2):
    """Single direct-method step driven by two supplied uniforms.

    Returns ``(waiting time, channel, status)``; channel is -1 when the total
    rate vanishes.
    """
    K = net.shape[0] + 2
    total = tree[1]
    if total <= 0.0:
        return np.inf, -1, OK
    dt = -math.log(1.0 - u1) / total
    c = tree_select(tree, P, u2 * total)
    j, dst = apply_channel(c, K, n, countsC, countsD, net)
    status = set_cell_leaves(j, countsC, countsD, l, n, net, K, tree, P)
    if dst >= 0:
        s2 = set_cell_leaves(dst, countsC, countsD, l, n, net, K, tree, P)
        if s2 != OK:
            status = s2
    for i in range(n):
        if countsC[i] < 0 or countsD[i] < 0:
            status = NEG_COUNT
    return dt, c, status


# ---------------------------------------------------------------------------
# approximate tau-leaping
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def simulate_tau_leap(net, n, l, T, sample_times, seed, M, dt, countsC0, countsD0):
    np.random.seed(seed)
    R = net.shape[0]
    countsC = countsC0.copy()
    countsD = countsD0.copy()
    S = sample_times.shape[0]
    out_u = np.zeros((S, n)); out_v = np.zeros((S, n))
    out_c = np.zeros((S, n)); out_d = np.zeros((S, n)); out_i = np.zeros((S, n))
    accC = np.zeros(n); accD = np.zeros(n); accU = np.zeros(n)
    t = 0.0
    si = 0
    steps = 0
    nn = float(n) * float(n)
    while si < S:
        while si < S and sample_times[si] <= t + 1e-15:
            for j in range(n):
                out_u[si, j] = countsC[j] / l
                out_v[si, j] = countsD[j]
                out_c[si, j] = accC[j]
                out_d[si, j] = accD[j]
                out_i[si, j] = accU[j]
            si += 1
        if si >= S:
            break
        h = min(dt, sample_times[si] - t)
        dC = np.zeros(n, dtype=np.int64)
        dD = np.zeros(n, dtype=np.int64)
        for j in range(n):
            u = countsC[j] / l
            v = float(countsD[j])
            rc, rd, rt = cell_drifts(u, v, net)
            accC[j] += rc * h
            accD[j] += rd * h
            accU[j] += u * h
            outC = 0
            for r in range(R):
                lam = reaction_rate(r, u, v, net)
                if net[r, COL_SPECIES] == 0.0:
                    lam *= l
                k = np.random.poisson(max(lam, 0.0) * h)
                if net[r, COL_SPECIES] == 0.0:
                    if int(net[r, COL_GAMMA]) < 0:
                        outC += k
                    else:
                        dC[j] += int(net[r, COL_GAMMA]) * k
                else:
                    if int(net[r, COL_GAMMA]) < 0:
                        k = min(k, countsD[j])
                    dD[j] += int(net[r, COL_GAMMA]) * k
            kr = np.random.poisson(nn * countsC[j] * h)
            kl = np.random.poisson(nn * countsC[j] * h)
            avail = countsC[j]
            take = outC + kr + kl
            if take > avail and take > 0:
                scale = avail / take
                outC = int(outC * scale)
                kr = int(kr * scale)
                kl = int(kl * scale)
            dC[j] -= outC + kr + kl
            dC[(j + 1) % n] += kr
            dC[(j - 1 + n) % n] += kl
        for j in range(n):
            countsC[j] += dC[j]
            countsD[j] += dD[j]
            if countsC[j] < 0:
                countsC[j] = 0
        t += h
        steps += 1
    return out_u, out_v, out_c, out_d, out_i, steps


# ---------------------------------------------------------------------------
# replays over an event log
# ---------------------------------------------------------------------------

@njit(cache=True)
def replay_compensator(net, n, l, K, countsC0, countsD0, ev_t, ev_c, stop, phi, sample_times):
    """Quadratic variation of ``<Z_C, phi>`` and its compensator, sampled.

    ``stop`` is ``min(T, tau)``: the compensator integrates up to it.
    """
    R = K - 2
    countsC = countsC0.copy()
    countsD = countsD0.copy()
    S = sample_times.shape[0]
    out_s = np.zeros(S)
    out_g = np.zeros(S)
    nn = float(n) * float(n)
    gsum = np.empty(n)
    phi2 = np.empty(n)
    for j in range(n):
        gp = n * (phi[(j + 1) % n] - phi[j])
        gm = n * (phi[(j - 1 + n) % n] - phi[j])
        gsum[j] = gp * gp + gm * gm
        phi2[j] = phi[j] * phi[j]
    scale = 1.0 / (nn * l)
    f = np.empty(n)
    for j in range(n):
        u = countsC[j] / l
        rc, rd, rt = cell_drifts(u, float(countsD[j]), net)
        f[j] = scale * (u * gsum[j] + rt * phi2[j])
    G = np.zeros(n); compG = np.zeros(n)
    last = np.zeros(n)
    qv = 0.0
    qv_comp = 0.0
    si = 0
    for e in range(ev_t.shape[0] + 1):
        te = ev_t[e] if e < ev_t.shape[0] else np.inf
        while si < S and sample_times[si] < te:
            s = min(sample_times[si], stop)
            tot = 0.0
            for j in range(n):
                tot += G[j] + f[j] * (s - last[j])
            out_s[si] = qv
            out_g[si] = tot
            si += 1
        if e == ev_t.shape[0]:
            break
        c = ev_c[e]
        j = c // K
        k = c - j * K
        if k < R:
            if net[k, COL_SPECIES] == 0.0:
                jump = int(net[k, COL_GAMMA]) * phi[j] / (n * l)
                y = jump * jump - qv_comp
                tq = qv + y
                qv_comp = (tq - qv) - y
                qv = tq
            kahan_add(G, compG, j, f[j] * (te - last[j]))
            last[j] = te
            apply_channel(c, K, n, countsC, countsD, net)
            u = countsC[j] / l
            rc, rd, rt = cell_drifts(u, float(countsD[j]), net)
            f[j] = scale * (u * gsum[j] + rt * phi2[j])
        else:
            dst = (j + 1) % n if k == R else (j - 1 + n) % n
            jump = (phi[dst] - phi[j]) / (n * l)
            y = jump * jump - qv_comp
            tq = qv + y
            qv_comp = (tq - qv) - y
            qv = tq
            for i in (j, dst):
                kahan_add(G, compG, i, f[i] * (te - last[i]))
                last[i] = te
            countsC[j] -= 1
            countsC[dst] += 1
            for i in (j, dst):
                u = countsC[i] / l
                rc, rd, rt = cell_drifts(u, float(countsD[i]), net)
                f[i] = scale * (u * gsum[i] + rt * phi2[i])
    return out_s, out_g


@njit(cache=True)
def _coeffs_from_counts(x, cos_tab, sin_tab, ca, cb):
    n = x.shape[0]
    for m in range(cos_tab.shape[0]):
        a = 0.0
        b = 0.0
        for j in range(n):
            a += x[j] * cos_tab[m, j]
            b += x[j] * sin_tab[m, j]
        ca[m] = a / n
        cb[m] = b / n


@njit(cache=True, nogil=True)
def replay_convolution(net, n, l, K, countsC0, countsD0, ev_t, ev_c, tau, lam,
                       cos_tab, sin_tab, sample_times, refresh_every):
    """Spectral coefficients of ``Y_t = int_0^t T_N(t - s) dZ_C(s ^ tau)`` at samples.

    Between events every mode obeys ``Y' = -lam Y + lam u_hat - r_hat``, solved
    in closed form over each inter-event gap (only decaying exponentials);
    jumps of ``u`` add their single-cell coefficients.  After ``tau`` the
    compensator vanishes and ``Y`` only decays.
    """
    R = K - 2
    H = lam.shape[0]
    countsC = countsC0.copy()
    countsD = countsD0.copy()
    u = countsC.astype(np.float64) / l
    rfield = np.empty(n)
    for j in range(n):
        rc, rd, rt = cell_drifts(u[j], float(countsD[j]), net)
        rfield[j] = rc
    ua = np.empty(H); ub = np.empty(H)
    ra = np.empty(H); rb = np.empty(H)
    _coeffs_from_counts(u, cos_tab, sin_tab, ua, ub)
    _coeffs_from_counts(rfield, cos_tab, sin_tab, ra, rb)
    Ya = np.zeros(H); Yb = np.zeros(H)
    S = sample_times.shape[0]
    out_a = np.zeros((S, H))
    out_b = np.zeros((S, H))
    t = 0.0
    si = 0
    stop = tau if tau >= 0.0 else np.inf
    nE = ev_t.shape[0]
    for e in range(nE + 1):
        te = ev_t[e] if e < nE else np.inf
        while si < S and sample_times[si] < te:
            s = sample_times[si]
            _advance_modes(Ya, Yb, ua, ub, ra, rb, lam, t, s, stop)
            t = s
            for m in range(H):
                out_a[si, m] = Ya[m]
                out_b[si, m] = Yb[m]
            si += 1
        if e == nE or si >= S:
            break
        _advance_modes(Ya, Yb, ua, ub, ra, rb, lam, t, te, stop)
        t = te
        c = ev_c[e]
        j = c // K
        k = c - j * K
        if k < R:
            apply_channel(c, K, n, countsC, countsD, net)
            if net[k, COL_SPECIES] == 0.0:
                du = int(net[k, COL_GAMMA]) / l
                u[j] += du
                for m in range(H):
                    Ya[m] += du * cos_tab[m, j] / n
                    Yb[m] += du * sin_tab[m, j] / n
                    ua[m] += du * cos_tab[m, j] / n
                    ub[m] += du * sin_tab[m, j] / n
            rc, rd, rt = cell_drifts(u[j], float(countsD[j]), net)
            dr = rc - rfield[j]
            rfield[j] = rc
            for m in range(H):
                ra[m] += dr * cos_tab[m, j] / n
                rb[m] += dr * sin_tab[m, j] / n
        else:
            dst = (j + 1) % n if k == R else (j - 1 + n) % n
            countsC[j] -= 1
            countsC[dst] += 1
            du = 1.0 / l
            u[j] -= du
            u[dst] += du
            rc1, rd1, rt1 = cell_drifts(u[j], float(countsD[j]), net)
            rc2, rd2, rt2 = cell_drifts(u[dst], float(countsD[dst]), net)
            dr1 = rc1 - rfield[j]
            dr2 = rc2 - rfield[dst]
            rfield[j] = rc1
            rfield[dst] = rc2
            for m in range(H):
                ja = (cos_tab[m, dst] - cos_tab[m, j]) * du / n
                jb = (sin_tab[m, dst] - sin_tab[m, j]) * du / n
                Ya[m] += ja
                Yb[m] += jb
                ua[m] += ja
                ub[m] += jb
                ra[m] += (dr1 * cos_tab[m, j] + dr2 * cos_tab[m, dst]) / n
                rb[m] += (dr1 * sin_tab[m, j] + dr2 * sin_tab[m, dst]) / n
        if refresh_every > 0 and (e + 1) % refresh_every == 0:
            _coeffs_from_counts(u, cos_tab, sin_tab, ua, ub)
            _coeffs_from_counts(rfield, cos_tab, sin_tab, ra, rb)
    while si < S:
        s = sample_times[si]
        _advance_modes(Ya, Yb, ua, ub, ra, rb, lam, t, s, stop)
        t = s
        for m in range(H):
            out_a[si, m] = Ya[m]
            out_b[si, m] = Yb[m]
        si += 1
    return out_a, out_b


@njit(cache=True, inline="always")
def _advance_modes(Ya, Yb, ua, ub, ra, rb, lam, t0, t1, stop):
    if t1 <= t0:
        return
    # part of [t0, t1] before tau carries the compensator
    tc = min(t1, stop)
    if tc > t0:
        h = tc - t0
        for m in range(lam.shape[0]):
            L = lam[m]
            if L > 0.0:
                E = math.exp(-L * h)
                g = -math.expm1(-L * h) / L
            else:
                E = 1.0
                g = h
            Ya[m] = E * Ya[m] + g * (L * ua[m] - ra[m])
            Yb[m] = E * Yb[m] + g * (L * ub[m] - rb[m])
        t0 = tc
    if t1 > t0:
        h = t1 - t0
        for m in range(lam.shape[0]):
            E = math.exp(-lam[m] * h)
            Ya[m] *= E
            Yb[m] *= E
