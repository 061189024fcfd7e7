"""Compiled inner loops shared by the Python API and the run loop.

All functions operate on the dense per-site orientation array ``theta``
(``-1`` marks an empty site), the ``(N, 6)`` neighbour table and, for the run
loop, the particle bookkeeping arrays ``positions`` (particle -> site) and
``slot`` (site -> particle or ``-1``).  Random numbers are drawn in numpy
ahead of time and passed in as arrays, so a chunk is a pure function of its
inputs.
"""

from __future__ import annotations

import numpy as np
from numba import njit

SPATIAL = 0
REORIENT = 1


@njit(cache=True)
def _adjacent(nbr, a, b):  # type: ignore[no-untyped-def]
    for k in range(6):
        if nbr[a, k] == b:
            return True
    return False


@njit(cache=True)
def _reaches_all(nbr, members, count, seeds):  # type: ignore[no-untyped-def]
    """True when every member is reachable from a seed through members."""

    if count == 0:
        return True
    visited = np.zeros(count, dtype=np.bool_)
    stack = np.empty(count, dtype=np.int64)
    top = 0
    for i in range(count):
        if seeds[i]:
            visited[i] = True
            stack[top] = i
            top += 1
    if top == 0:
        visited[0] = True
        stack[0] = 0
        top = 1
    while top > 0:
        top -= 1
        cur = members[stack[top]]
        for j in range(count):
            if not visited[j] and _adjacent(nbr, cur, members[j]):
                visited[j] = True
                stack[top] = j
                top += 1
    for i in range(count):
        if not visited[i]:
            return False
    return True


@njit(cache=True)
def occupied_neighbors(theta, nbr, site):  # type: ignore[no-untyped-def]
    count = 0
    for k in range(6):
        if theta[nbr[site, k]] >= 0:
            count += 1
    return count


@njit(cache=True)
def valid_spatial(theta, nbr, src, dst):  # type: ignore[no-untyped-def]
    """Validity of moving the particle at ``src`` to the adjacent ``dst``."""

    if theta[dst] >= 0:
        return False
    if occupied_neighbors(theta, nbr, src) >= 5:
        return False

    union = np.empty(12, dtype=np.int64)
    common = np.zeros(12, dtype=np.bool_)
    count = 0
    n_common = 0
    for k in range(6):
        s = nbr[src, k]
        if s == dst or theta[s] < 0:
            continue
        union[count] = s
        if _adjacent(nbr, s, dst):
            common[count] = True
            n_common += 1
        count += 1
    for k in range(6):
        s = nbr[dst, k]
        if s == src or theta[s] < 0:
            continue
        seen = False
        for j in range(count):
            if union[j] == s:
                seen = True
                break
        if not seen:
            union[count] = s
            count += 1

    if n_common >= 1:
        return _reaches_all(nbr, union, count, common)

    # No occupied common neighbour: both sides must be internally connected.
    side = np.empty(6, dtype=np.int64)
    no_seeds = np.zeros(6, dtype=np.bool_)
    m = 0
    for k in range(6):
        s = nbr[src, k]
        if s != dst and theta[s] >= 0:
            side[m] = s
            m += 1
    if m == 0 or not _reaches_all(nbr, side, m, no_seeds):
        return False
    m = 0
    for k in range(6):
        s = nbr[dst, k]
        if s != src and theta[s] >= 0:
            side[m] = s
            m += 1
    if m == 0:
        return False
    return _reaches_all(nbr, side, m, no_seeds)


@njit(cache=True)
def spatial_delta(theta, nbr, dist, q, src, dst):  # type: ignore[no-untyped-def]
    """Return ``(da, dh, dd)`` for moving the particle at ``src`` to ``dst``."""

    t = theta[src]
    k_src = 0
    h_src = 0
    d_src = 0.0
    for k in range(6):
        s = theta[nbr[src, k]]
        if s >= 0:
            k_src += 1
            if s != t:
                h_src += 1
            d_src += dist[(t - s) % q]
    k_dst = 0
    h_dst = 0
    d_dst = 0.0
    for k in range(6):
        site = nbr[dst, k]
        if site == src:
            continue
        s = theta[site]
        if s >= 0:
            k_dst += 1
            if s != t:
                h_dst += 1
            d_dst += dist[(t - s) % q]
    return 2 * (k_src - k_dst), h_dst - h_src, d_dst - d_src


@njit(cache=True)
def reorient_delta(theta, nbr, dist, q, site, new):  # type: ignore[no-untyped-def]
    """Return ``(dh, dd)`` for changing the orientation at ``site`` to ``new``."""

    old = theta[site]
    dh = 0
    dd = 0.0
    for k in range(6):
        s = theta[nbr[site, k]]
        if s >= 0:
            if s != new:
                dh += 1
            if s != old:
                dh -= 1
            dd += dist[(new - s) % q] - dist[(old - s) % q]
    return dh, dd


@njit(cache=True)
def log_ratio(connected, clock, log_lg, log_g, log_l, da, dh, dd):  # type: ignore[no-untyped-def]
    """Log of the stationary weight ratio for the given local deltas."""

    disagreement = dd if clock else float(dh)
    if connected:
        return -(da / 2.0) * log_lg - disagreement * log_g
    return -(da + disagreement) * log_l


@njit(cache=True)
def attempt(  # type: ignore[no-untyped-def]
    theta,
    positions,
    slot,
    nbr,
    dist,
    q,
    connected,
    clock,
    log_lg,
    log_g,
    log_l,
    k,
    kind,
    direction,
    new_theta,
    log_u,
):
    """One activation of particle ``k``; returns 1 when the move is applied."""

    src = positions[k]
    if kind == SPATIAL:
        dst = nbr[src, direction]
        if theta[dst] >= 0:
            return 0
        if connected and not valid_spatial(theta, nbr, src, dst):
            return 0
        da, dh, dd = spatial_delta(theta, nbr, dist, q, src, dst)
        if log_u <= log_ratio(connected, clock, log_lg, log_g, log_l, da, dh, dd):
            theta[dst] = theta[src]
            theta[src] = -1
            positions[k] = dst
            slot[dst] = k
            slot[src] = -1
            return 1
        return 0
    if new_theta == theta[src]:
        return 1
    dh, dd = reorient_delta(theta, nbr, dist, q, src, new_theta)
    if log_u <= log_ratio(connected, clock, log_lg, log_g, log_l, 0, dh, dd):
        theta[src] = new_theta
        return 1
    return 0


@njit(cache=True)
def run_chunk(  # type: ignore[no-untyped-def]
    theta,
    positions,
    slot,
    nbr,
    dist,
    q,
    connected,
    clock,
    log_lg,
    log_g,
    log_l,
    ks,
    kinds,
    directions,
    news,
    log_us,
):
    accepted = 0
    for i in range(ks.shape[0]):
        accepted += attempt(
            theta,
            positions,
            slot,
            nbr,
            dist,
            q,
            connected,
            clock,
            log_lg,
            log_g,
            log_l,
            ks[i],
            kinds[i],
            directions[i],
            news[i],
            log_us[i],
        )
    return accepted


@njit(cache=True)
def state_code(theta, q):  # type: ignore[no-untyped-def]
    """Canonical integer code of a configuration (small instances only)."""

    base = theta.shape[0] * q
    code = 0
    mult = 1
    for site in range(theta.shape[0]):
        if theta[site] >= 0:
            code += (site * q + theta[site]) * mult
            mult *= base
    return code


@njit(cache=True)
def run_chunk_encoded(  # type: ignore[no-untyped-def]
    theta,
    positions,
    slot,
    nbr,
    dist,
    q,
    connected,
    clock,
    log_lg,
    log_g,
    log_l,
    ks,
    kinds,
    directions,
    news,
    log_us,
    codes,
):
    """Like :func:`run_chunk` but records the state code after every step."""

    accepted = 0
    for i in range(ks.shape[0]):
        accepted += attempt(
            theta,
            positions,
            slot,
            nbr,
            dist,
            q,
            connected,
            clock,
            log_lg,
            log_g,
            log_l,
            ks[i],
            kinds[i],
            directions[i],
            news[i],
            log_us[i],
        )
        codes[i] = state_code(theta, q)
    return accepted
