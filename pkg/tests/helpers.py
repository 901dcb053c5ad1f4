"""Shared test utilities: random smooth graphs and finite-difference oracles."""

from __future__ import annotations

import numpy as np

from apexgame import autodiff as ad


def random_smooth_graph(rng, n_vars, n_ops):
    """Build a random expression graph that is smooth on |x| <= 3.

    Arguments of guarded ops (div, log, fractional powers, exp) are routed
    through saturating functions so every generated graph is globally safe
    to evaluate and differentiate near the test points.
    """
    g = ad.Graph()
    xs = g.vars(n_vars)
    pool = list(xs)
    for _ in range(3):
        pool.append(g.const(rng.uniform(-1.5, 1.5)))

    def pick():
        return pool[rng.integers(0, len(pool))]

    for _ in range(n_ops):
        kind = rng.integers(0, 10)
        a = pick()
        b = pick()
        if kind == 0:
            e = a + b
        elif kind == 1:
            e = a - b
        elif kind == 2:
            e = a * b
        elif kind == 3:
            e = a / (2.5 + ad.tanh(b))  # |den| >= 1.5
        elif kind == 4:
            e = ad.exp(ad.tanh(a) * 1.5)
        elif kind == 5:
            e = ad.log(0.2 + ad.logistic(b))
        elif kind == 6:
            e = ad.sin(a)
        elif kind == 7:
            e = ad.tanh(a * 0.7)
        elif kind == 8:
            e = ad.smooth_max(a, b)
        else:
            e = (0.1 + ad.logistic(a)) ** rng.choice([0.5, 2.0, 3.0])
        if not isinstance(e, ad.Expr):
            e = g.const(e)
        pool.append(e)

    out = pool[-1]
    for _ in range(min(3, len(pool) - 1)):
        out = out + pool[rng.integers(0, len(pool))] * g.const(rng.uniform(-1, 1))
    if not isinstance(out, ad.Expr):
        out = g.const(out)
    return g, xs, out


def fd_gradient(fun, x, h=None):
    """Central-difference gradient of a scalar callable."""
    x = np.asarray(x, dtype=float)
    if h is None:
        h = float(np.cbrt(np.finfo(float).eps))
    grad = np.zeros_like(x)
    for i in range(len(x)):
        step = h * max(1.0, abs(x[i]))
        xp = x.copy()
        xm = x.copy()
        xp[i] += step
        xm[i] -= step
        grad[i] = (fun(xp) - fun(xm)) / (2.0 * step)
    return grad


def fd_jacobian(fun, x, h=None):
    """Central-difference Jacobian of a vector callable."""
    x = np.asarray(x, dtype=float)
    if h is None:
        h = float(np.cbrt(np.finfo(float).eps))
    f0 = np.asarray(fun(x))
    J = np.zeros((len(f0), len(x)))
    for i in range(len(x)):
        step = h * max(1.0, abs(x[i]))
        xp = x.copy()
        xm = x.copy()
        xp[i] += step
        xm[i] -= step
        J[:, i] = (np.asarray(fun(xp)) - np.asarray(fun(xm))) / (2.0 * step)
    return J


def rel_err(a, b, floor=1.0):
    """Max elementwise |a-b| / max(floor, |b|)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    denom = np.maximum(floor, np.abs(b))
    return float(np.max(np.abs(a - b) / denom)) if a.size else 0.0
