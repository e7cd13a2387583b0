"""Shared test utilities: finite differences and tiny parameter factories."""

import numpy as np


def fd_grad(f, x, h=1e-6):
    """Central finite-difference gradient of scalar f at array x."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        hi = f(x)
        flat[i] = orig - h
        lo = f(x)
        flat[i] = orig
        gf[i] = (hi - lo) / (2 * h)
    return g


def rel_err(a, b, floor=1e-8):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / denom))


def fd_param_check(loss_fn, params, key, h=1e-6):
    """Central FD of loss_fn(params) w.r.t. params[key]; returns the FD array."""
    p = params[key]
    g = np.zeros_like(p)
    flat = p.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        hi = loss_fn(params)
        flat[i] = orig - h
        lo = loss_fn(params)
        flat[i] = orig
        gf[i] = (hi - lo) / (2 * h)
    return g
