"""Platoon time-stepping kernels.

``run_platoon`` dispatches to a numba-compiled scalar loop when numba is
available (see ``_accel``) and to a numpy implementation vectorised across
vehicles otherwise. Both implement the same update:

1. sample links from step k-1 positions, pick each follower's gain row,
2. compute every follower's command from step k-1 quantities only,
3. advance all plants, record step k.

Status codes: 0 completed, 1 collision (run truncated), 2 non-finite state.
"""

from __future__ import annotations

import math

import numpy as np

from ._accel import HAVE_NUMBA, njit

OK, COLLISION, NONFINITE = 0, 1, 2
SCHEME_DIFT, SCHEME_FIFT = 0, 1
LINK_LOGISTIC, LINK_FIXED = 0, 1
ROW_CACC1, ROW_CACC2, ROW_CACC3, ROW_ACC = 0, 1, 2, 3


@njit(cache=True)
def _link_prob(link_mode, p_max, d_half, steep, d):
    if link_mode == LINK_FIXED:
        return p_max
    a = steep * (d - d_half)
    if a > 700.0:
        return 0.0
    return p_max * (1.0 + math.exp(-steep * d_half)) / (1.0 + math.exp(a))


@njit(cache=True)
def _select_row(alpha, beta, i, scheme):
    if i == 1:
        beta = 0
    if scheme == SCHEME_FIFT and not (alpha == 1 and (beta == 1 or i == 1)):
        return ROW_ACC
    if alpha == 1:
        return ROW_CACC1 if beta == 1 else ROW_CACC2
    return ROW_CACC3 if beta == 1 else ROW_ACC


@njit(cache=True, nogil=True)
def _run_numba(a_lead, x_init, v_init, gains, flags, L, T, scheme, link_mode, p_max, d_half,
               steep, uniforms, noise, u_min, u_max, implicit, zoh,
               pos, vel, u, e, dv, mode, alpha, beta):
    K = a_lead.shape[0]
    n = x_init.shape[0]
    ff1 = np.zeros(n)
    ff2 = np.zeros(n)
    u_new = np.zeros(n)
    for i in range(n):
        pos[0, i] = x_init[i]
        vel[0, i] = v_init[i]
    for k in range(K + 1):
        src = k - 1 if k > 0 else 0
        # topology and gain rows for step k from step k-1 positions
        for i in range(1, n):
            alpha[k, i] = 1 if uniforms[k, i, 0] < _link_prob(
                link_mode, p_max, d_half, steep, pos[src, i - 1] - pos[src, i]) else 0
            if i >= 2:
                beta[k, i] = 1 if uniforms[k, i, 1] < _link_prob(
                    link_mode, p_max, d_half, steep, pos[src, i - 2] - pos[src, i]) else 0
            mode[k, i] = _select_row(alpha[k, i], beta[k, i], i, scheme)
        if k > 0:
            u_new[0] = a_lead[k - 1]
            for i in range(1, n):
                r = mode[k, i]
                w = gains[r, 0]
                h = gains[r, 1]
                xp = pos[k - 1, i - 1] + noise[k, i, 0]
                vp = vel[k - 1, i - 1] + noise[k, i, 1]
                err = xp - pos[k - 1, i] - h * vel[k - 1, i] - L
                g1 = u[k - 1, i - 1] if flags[r, 0] == 1 else 0.0
                g2 = u[k - 1, i - 2] if (flags[r, 1] == 1 and i >= 2) else 0.0
                ff1[i] = ff1[i] + (T / h) * (g1 - ff1[i])
                ff2[i] = ff2[i] + (T / h) * (g2 - ff2[i])
                if implicit:
                    c = (w * w * err + w * (vp - vel[k - 1, i]) + ff1[i] + ff2[i]) / (1.0 + w * h)
                else:
                    c = w * w * err + w * (vp - vel[k - 1, i] - h * u[k - 1, i]) + ff1[i] + ff2[i]
                if c < u_min:
                    c = u_min
                if c > u_max:
                    c = u_max
                u_new[i] = c
            for i in range(n):
                c = u_new[i]
                x = pos[k - 1, i] + vel[k - 1, i] * T
                if zoh:
                    x += 0.5 * c * T * T
                pos[k, i] = x
                vel[k, i] = vel[k - 1, i] + c * T
                u[k, i] = c
        bad = False
        hit = False
        for i in range(n):
            if not (math.isfinite(pos[k, i]) and math.isfinite(vel[k, i])):
                bad = True
        for i in range(1, n):
            h = gains[mode[k, i], 1]
            e[k, i] = pos[k, i - 1] - pos[k, i] - h * vel[k, i] - L
            dv[k, i] = vel[k, i - 1] - vel[k, i]
            if pos[k, i - 1] - pos[k, i] <= 0.0:
                hit = True
        if bad:
            return NONFINITE, k
        if hit:
            return COLLISION, k
    return OK, K


def _link_prob_np(link_mode, p_max, d_half, steep, d):
    if link_mode == LINK_FIXED:
        return np.full(d.shape, p_max)
    a = steep * (d - d_half)
    with np.errstate(over="ignore"):
        p = p_max * (1.0 + math.exp(-steep * d_half)) / (1.0 + np.exp(a))
    return np.where(a > 700.0, 0.0, p)


def _select_rows_np(alpha, beta, scheme):
    beta = beta.copy()
    beta[1] = 0
    rows = np.where(alpha == 1, np.where(beta == 1, ROW_CACC1, ROW_CACC2),
                    np.where(beta == 1, ROW_CACC3, ROW_ACC))
    if scheme == SCHEME_FIFT:
        full = (alpha == 1) & ((beta == 1) | (np.arange(alpha.size) == 1))
        rows = np.where(full, rows, ROW_ACC)
    return rows.astype(np.int8)


def _run_numpy(a_lead, x_init, v_init, gains, flags, L, T, scheme, link_mode, p_max, d_half,
               steep, uniforms, noise, u_min, u_max, implicit, zoh,
               pos, vel, u, e, dv, mode, alpha, beta):
    K = a_lead.shape[0]
    n = x_init.shape[0]
    f = slice(1, n)
    ff1 = np.zeros(n)
    ff2 = np.zeros(n)
    pos[0] = x_init
    vel[0] = v_init
    for k in range(K + 1):
        x_src = pos[k - 1] if k > 0 else pos[0]
        d1 = x_src[:-1] - x_src[1:]
        alpha[k, f] = uniforms[k, f, 0] < _link_prob_np(link_mode, p_max, d_half, steep, d1)
        if n > 2:
            d2 = x_src[:-2] - x_src[2:]
            beta[k, 2:] = uniforms[k, 2:, 1] < _link_prob_np(link_mode, p_max, d_half, steep, d2)
        rows = _select_rows_np(alpha[k], beta[k], scheme)
        mode[k, f] = rows[f]
        r = mode[k, f]
        h = gains[r, 1]
        if k > 0:
            w = gains[r, 0]
            xp = pos[k - 1, :-1] + noise[k, f, 0]
            vp = vel[k - 1, :-1] + noise[k, f, 1]
            err = xp - pos[k - 1, f] - h * vel[k - 1, f] - L
            g1 = np.where(flags[r, 0] == 1, u[k - 1, :-1], 0.0)
            up2 = np.concatenate(([0.0], u[k - 1, : n - 2]))
            second = np.arange(1, n) >= 2
            g2 = np.where((flags[r, 1] == 1) & second, up2, 0.0)
            ff1[f] = ff1[f] + (T / h) * (g1 - ff1[f])
            ff2[f] = ff2[f] + (T / h) * (g2 - ff2[f])
            if implicit:
                c = (w * w * err + w * (vp - vel[k - 1, f]) + ff1[f] + ff2[f]) / (1.0 + w * h)
            else:
                c = w * w * err + w * (vp - vel[k - 1, f] - h * u[k - 1, f]) + ff1[f] + ff2[f]
            c = np.minimum(np.maximum(c, u_min), u_max)
            u_k = np.concatenate(([a_lead[k - 1]], c))
            x = pos[k - 1] + vel[k - 1] * T
            if zoh:
                x = x + 0.5 * u_k * T * T
            pos[k] = x
            vel[k] = vel[k - 1] + u_k * T
            u[k] = u_k
        e[k, f] = pos[k, :-1] - pos[k, f] - h * vel[k, f] - L
        dv[k, f] = vel[k, :-1] - vel[k, f]
        if not (np.all(np.isfinite(pos[k])) and np.all(np.isfinite(vel[k]))):
            return NONFINITE, k
        if np.any(pos[k, :-1] - pos[k, f] <= 0.0):
            return COLLISION, k
    return OK, K


def run_platoon(a_lead, x_init, v_init, gains, flags, L, T, scheme, link_mode, p_max, d_half,
                steep, uniforms, noise, u_min=-np.inf, u_max=np.inf, implicit=True, zoh=True,
                use_numba: bool | None = None):
    """Run the platoon loop; returns ``(status, last_step, arrays)``.

    ``arrays`` maps ``pos, vel, u, e, dv`` (float, shape ``(K+1, n)``) and
    ``mode, alpha, beta`` (int8) to their full-length buffers; rows past
    ``last_step`` are unused when the run was cut short.
    """
    K = len(a_lead)
    n = len(x_init)
    shape = (K + 1, n)
    arrays = {name: np.zeros(shape) for name in ("pos", "vel", "u", "e", "dv")}
    arrays.update({name: np.zeros(shape, dtype=np.int8) for name in ("mode", "alpha", "beta")})
    args = (
        np.ascontiguousarray(a_lead, dtype=np.float64),
        np.ascontiguousarray(x_init, dtype=np.float64),
        np.ascontiguousarray(v_init, dtype=np.float64),
        np.ascontiguousarray(gains, dtype=np.float64),
        np.ascontiguousarray(flags, dtype=np.int64),
        float(L), float(T), int(scheme), int(link_mode), float(p_max), float(d_half), float(steep),
        np.ascontiguousarray(uniforms, dtype=np.float64),
        np.ascontiguousarray(noise, dtype=np.float64),
        float(u_min), float(u_max), bool(implicit), bool(zoh),
    )
    outs = tuple(arrays[name] for name in ("pos", "vel", "u", "e", "dv", "mode", "alpha", "beta"))
    if use_numba is None:
        use_numba = HAVE_NUMBA
    if use_numba and not HAVE_NUMBA:
        raise RuntimeError("numba requested but not available or disabled")
    fn = _run_numba if use_numba else _run_numpy
    status, last = fn(*args, *outs)
    return int(status), int(last), arrays
