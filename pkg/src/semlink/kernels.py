"""Hot numeric kernels: numba-jitted with a pure-numpy fallback.

The jitted path is the default. Set the environment variable
``SEMLINK_NUMBA=0`` before import to force the numpy fallback (the two
paths agree to floating-point roundoff; see tests/test_kernels.py and
benchmarks/bench_kernels.py).

Sequential scans (per-slot channel estimation, recurrent cells over time)
are written as explicit loops and compiled with numba; their fallbacks are
either the same source executed by CPython or a vectorized-numpy rewrite
where the plain loop would be too slow.
"""

from __future__ import annotations

import os
import warnings

import numpy as np

_env = os.environ.get("SEMLINK_NUMBA", "1").strip().lower()
_want_numba = _env not in ("0", "false", "no", "off")

if _want_numba:
    try:
        from numba import njit

        USE_NUMBA = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        USE_NUMBA = False
        warnings.warn("numba unavailable; semlink falls back to pure numpy kernels")
else:
    USE_NUMBA = False


def _maybe_jit(fn):
    if USE_NUMBA:
        return njit(cache=True)(fn)
    return fn


# ---------------------------------------------------------------------------
# matmul with pinned left-to-right summation order
# ---------------------------------------------------------------------------


def _matmul_loops(a, b):
    """Triple-loop product; accumulates strictly left-to-right over k."""
    n, m = a.shape[0], b.shape[1]
    kk = a.shape[1]
    out = np.zeros((n, m), dtype=a.dtype)
    for i in range(n):
        for j in range(m):
            acc = out[i, j]
            for k in range(kk):
                acc = acc + a[i, k] * b[k, j]
            out[i, j] = acc
    return out


def _matmul_blas(a, b):
    return a @ b


# ---------------------------------------------------------------------------
# per-slot least-squares channel scan
# ---------------------------------------------------------------------------
#
# One user transmits a known scalar per slot. Each slot updates that user's
# column estimate y_t * conj(x_t) / |x_t|^2; a full matrix assembles the most
# recent estimate of every column. Slots where some column has never been
# estimated cannot be scored and get +inf error.


def _ls_scan_loop(y, x_active, slot_user, n_users):
    m, n_slots = y.shape
    h_cur = np.zeros((m, n_users), dtype=np.complex128)
    hist = np.zeros((n_slots, m, n_users), dtype=np.complex128)
    seen = np.zeros(n_users, dtype=np.bool_)
    n_seen = 0
    per_t = np.empty(n_slots, dtype=np.float64)
    for t in range(n_slots):
        k = slot_user[t]
        x = x_active[t]
        w = np.conj(x) / (x.real * x.real + x.imag * x.imag)
        if not seen[k]:
            seen[k] = True
            n_seen += 1
        for i in range(m):
            h_cur[i, k] = y[i, t] * w
        hist[t] = h_cur
        if n_seen == n_users:
            err = 0.0
            for i in range(m):
                d = h_cur[i, k] * x - y[i, t]
                err += d.real * d.real + d.imag * d.imag
            per_t[t] = err
        else:
            per_t[t] = np.inf
    t_min = int(np.argmin(per_t))
    return per_t, t_min, hist[t_min].copy()


def _ls_scan_vec(y, x_active, slot_user, n_users):
    m, n_slots = y.shape
    w = np.conj(x_active) / np.abs(x_active) ** 2
    col_est = y * w[None, :]
    t_idx = np.arange(n_slots)
    last = np.empty((n_users, n_slots), dtype=np.int64)
    for k in range(n_users):
        last[k] = np.maximum.accumulate(np.where(slot_user == k, t_idx, -1))
    complete = (last >= 0).all(axis=0)
    resid = col_est * x_active[None, :] - y
    per_t = np.where(complete, (resid.real**2 + resid.imag**2).sum(axis=0), np.inf)
    t_min = int(np.argmin(per_t))
    h_best = np.zeros((m, n_users), dtype=np.complex128)
    for k in range(n_users):
        slot = last[k, t_min]
        if slot >= 0:
            h_best[:, k] = col_est[:, slot]
    return per_t, t_min, h_best


# ---------------------------------------------------------------------------
# recurrent tanh cell (time-sequential scan, batched over samples)
# ---------------------------------------------------------------------------


def _rnn_tanh_forward(x, h0, wx, wh, b):
    """x: (T, B, d_in) -> hidden states (T+1, B, h), states[0] = h0."""
    t_steps = x.shape[0]
    states = np.empty((t_steps + 1, x.shape[1], wx.shape[1]), dtype=x.dtype)
    states[0] = h0
    for t in range(t_steps):
        states[t + 1] = np.tanh(np.dot(x[t], wx) + np.dot(states[t], wh) + b)
    return states


def _rnn_tanh_backward(x, states, wx, wh, d_out):
    """Backprop through time; d_out is the gradient w.r.t. states[1:]."""
    t_steps = x.shape[0]
    d_wx = np.zeros_like(wx)
    d_wh = np.zeros_like(wh)
    d_b = np.zeros(wx.shape[1], dtype=wx.dtype)
    d_x = np.empty_like(x)
    d_h = np.zeros((x.shape[1], wx.shape[1]), dtype=wx.dtype)
    for t in range(t_steps - 1, -1, -1):
        h_t = states[t + 1]
        d_pre = (d_out[t] + d_h) * (1.0 - h_t * h_t)
        d_wx += np.dot(x[t].T, d_pre)
        d_wh += np.dot(states[t].T, d_pre)
        d_b += d_pre.sum(axis=0)
        d_x[t] = np.dot(d_pre, wx.T)
        d_h = np.dot(d_pre, wh.T)
    return d_x, d_h, d_wx, d_wh, d_b


# ---------------------------------------------------------------------------
# full-gate LSTM cell (optional recurrent variant)
# ---------------------------------------------------------------------------
#
# Gate layout along the last axis of wx/wh/b: [input, forget, cell, output].


def _lstm_forward(x, h0, c0, wx, wh, b):
    t_steps, bsz = x.shape[0], x.shape[1]
    nh = wh.shape[0]
    hs = np.empty((t_steps + 1, bsz, nh), dtype=x.dtype)
    cs = np.empty((t_steps + 1, bsz, nh), dtype=x.dtype)
    gates = np.empty((t_steps, bsz, 4 * nh), dtype=x.dtype)
    hs[0] = h0
    cs[0] = c0
    for t in range(t_steps):
        pre = np.dot(x[t], wx) + np.dot(hs[t], wh) + b
        ig = 1.0 / (1.0 + np.exp(-pre[:, :nh]))
        fg = 1.0 / (1.0 + np.exp(-pre[:, nh : 2 * nh]))
        gg = np.tanh(pre[:, 2 * nh : 3 * nh])
        og = 1.0 / (1.0 + np.exp(-pre[:, 3 * nh :]))
        cs[t + 1] = fg * cs[t] + ig * gg
        hs[t + 1] = og * np.tanh(cs[t + 1])
        gates[t, :, :nh] = ig
        gates[t, :, nh : 2 * nh] = fg
        gates[t, :, 2 * nh : 3 * nh] = gg
        gates[t, :, 3 * nh :] = og
    return hs, cs, gates


def _lstm_backward(x, hs, cs, gates, wx, wh, d_out):
    t_steps, bsz = x.shape[0], x.shape[1]
    nh = wh.shape[0]
    d_wx = np.zeros_like(wx)
    d_wh = np.zeros_like(wh)
    d_b = np.zeros(4 * nh, dtype=wx.dtype)
    d_x = np.empty_like(x)
    d_h = np.zeros((bsz, nh), dtype=wx.dtype)
    d_c = np.zeros((bsz, nh), dtype=wx.dtype)
    d_pre = np.empty((bsz, 4 * nh), dtype=wx.dtype)
    for t in range(t_steps - 1, -1, -1):
        ig = gates[t, :, :nh]
        fg = gates[t, :, nh : 2 * nh]
        gg = gates[t, :, 2 * nh : 3 * nh]
        og = gates[t, :, 3 * nh :]
        tc = np.tanh(cs[t + 1])
        d_ht = d_out[t] + d_h
        d_og = d_ht * tc
        d_ct = d_c + d_ht * og * (1.0 - tc * tc)
        d_ig = d_ct * gg
        d_fg = d_ct * cs[t]
        d_gg = d_ct * ig
        d_c = d_ct * fg
        d_pre[:, :nh] = d_ig * ig * (1.0 - ig)
        d_pre[:, nh : 2 * nh] = d_fg * fg * (1.0 - fg)
        d_pre[:, 2 * nh : 3 * nh] = d_gg * (1.0 - gg * gg)
        d_pre[:, 3 * nh :] = d_og * og * (1.0 - og)
        d_wx += np.dot(x[t].T, d_pre)
        d_wh += np.dot(hs[t].T, d_pre)
        d_b += d_pre.sum(axis=0)
        d_x[t] = np.dot(d_pre, wx.T)
        d_h = np.dot(d_pre, wh.T)
    return d_x, d_h, d_c, d_wx, d_wh, d_b


# Bound kernels: jitted when numba is active, plain/vectorized otherwise.
matmul_pinned = _maybe_jit(_matmul_loops) if USE_NUMBA else _matmul_blas
ls_scan = _maybe_jit(_ls_scan_loop) if USE_NUMBA else _ls_scan_vec
rnn_tanh_forward = _maybe_jit(_rnn_tanh_forward)
rnn_tanh_backward = _maybe_jit(_rnn_tanh_backward)
lstm_forward = _maybe_jit(_lstm_forward)
lstm_backward = _maybe_jit(_lstm_backward)


def warmup() -> None:
    """Trigger JIT compilation of every kernel on tiny inputs."""
    a = np.eye(2, dtype=np.complex128)
    matmul_pinned(a, a)
    matmul_pinned(np.eye(2), np.eye(2))
    y = np.ones((1, 2), dtype=np.complex128)
    ls_scan(y, np.ones(2, dtype=np.complex128), np.zeros(2, dtype=np.int64), 1)
    x = np.zeros((2, 1, 2))
    h0 = np.zeros((1, 3))
    wx = np.zeros((2, 3))
    wh = np.zeros((3, 3))
    states = rnn_tanh_forward(x, h0, wx, wh, np.zeros(3))
    rnn_tanh_backward(x, states, wx, wh, np.zeros((2, 1, 3)))
    wx4 = np.zeros((2, 12))
    wh4 = np.zeros((3, 12))
    hs, cs, gates = lstm_forward(x, h0, h0, wx4, wh4, np.zeros(12))
    lstm_backward(x, hs, cs, gates, wx4, wh4, np.zeros((2, 1, 3)))
