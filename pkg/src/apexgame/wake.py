"""Slipstream drag-reduction model.

The fraction ``delta`` by which the free-stream drag coefficient of a
following car drops is a function of the relative gap time to the car
ahead: zero when in front or once an overtake manoeuvre begins (below the
gap threshold), maximal just above the threshold, exponentially decaying
with distance.  Two providers are available:

* an analytic base model (piecewise, reference only),
* a smooth C2 blend of the same shape, suitable for the NLP, which can be
  swapped for a fitted small tanh network with identical smoothness.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from . import autodiff as ad

__all__ = [
    "WakeModel",
    "SurrogateNet",
    "FitError",
    "relative_gap_time",
    "delta_base",
    "delta_smooth",
    "fit_surrogate",
]

# Calibration anchors: maximum reduction at the upper end of the range
# reported for modern open-wheel cars, decay rate chosen so that a car
# 0.32 s behind sees an 11.6 % drag-coefficient reduction.
DEFAULT_DELTA_MAX = 0.40
DEFAULT_LAMBDA = 5.6
OVERTAKE_THRESHOLD = 0.1
DEFAULT_K_BLEND = 200.0


class FitError(RuntimeError):
    """Surrogate training failed to reach the residual target."""


@dataclass(frozen=True)
class SurrogateNet:
    """Tiny MLP delta(t_gap): tanh hidden layers, scaled-logistic output.

    The output squashing confines the prediction to (0, output_scale), so
    evaluation is smooth everywhere and cannot produce negative reductions.
    """

    layers: tuple
    weights: tuple   # one (n_out, n_in) matrix per layer
    biases: tuple    # one (n_out,) vector per layer
    activation: str = "tanh"
    output_scale: float = DEFAULT_DELTA_MAX * 1.05

    def __post_init__(self):
        if self.layers[0] != 1 or self.layers[-1] != 1:
            raise ValueError("surrogate must map one input to one output")
        if self.activation != "tanh":
            raise ValueError("only tanh hidden activations are supported")

    def __call__(self, t_gap):
        if isinstance(t_gap, ad.Expr):
            return self._expr(t_gap)
        t = np.asarray(t_gap, dtype=float)
        h = t.reshape(1, -1)
        for W, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.tanh(W @ h + b[:, None])
        W, b = self.weights[-1], self.biases[-1]
        out = self.output_scale * expit((W @ h + b[:, None])[0])
        if np.ndim(t_gap) == 0:
            return float(out[0])
        return out.reshape(np.shape(t_gap))

    def _expr(self, t_gap):
        h = [t_gap]
        for W, b in zip(self.weights[:-1], self.biases[:-1]):
            h = [ad.tanh(sum((float(W[i, j]) * h[j] for j in range(len(h))),
                             start=t_gap.graph.const(0.0)) + float(b[i]))
                 for i in range(W.shape[0])]
        W, b = self.weights[-1], self.biases[-1]
        z = sum((float(W[0, j]) * h[j] for j in range(len(h))),
                start=t_gap.graph.const(0.0)) + float(b[0])
        return self.output_scale * ad.logistic(z)

    def to_json(self) -> str:
        return json.dumps({
            "layers": list(self.layers),
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "activation": self.activation,
            "output_scale": self.output_scale,
        })

    @classmethod
    def from_json(cls, text: str) -> "SurrogateNet":
        d = json.loads(text)
        return cls(
            layers=tuple(d["layers"]),
            weights=tuple(np.asarray(w, dtype=float) for w in d["weights"]),
            biases=tuple(np.asarray(b, dtype=float) for b in d["biases"]),
            activation=d.get("activation", "tanh"),
            output_scale=float(d.get("output_scale", DEFAULT_DELTA_MAX * 1.05)),
        )


@dataclass(frozen=True)
class WakeModel:
    """Drag-reduction interaction model parameters."""

    delta_max: float = DEFAULT_DELTA_MAX
    lam: float = DEFAULT_LAMBDA          # decay rate [1/s]
    t_ovt: float = OVERTAKE_THRESHOLD    # overtake threshold [s]
    k_blend: float = DEFAULT_K_BLEND     # smooth-step steepness [1/s]
    surrogate: SurrogateNet | None = None

    def __post_init__(self):
        if not 0 < self.delta_max < 1:
            raise ValueError("delta_max must lie in (0, 1)")
        if self.lam <= 0 or self.t_ovt <= 0 or self.k_blend <= 0:
            raise ValueError("lam, t_ovt and k_blend must be positive")


def relative_gap_time(t_i, t_other):
    """Relative temporal position: positive when agent i is behind."""
    return t_i - t_other


def delta_base(model: WakeModel, t_gap):
    """Piecewise reference model: hard threshold, exponential decay."""
    t = np.asarray(t_gap, dtype=float)
    out = np.where(t < model.t_ovt, 0.0,
                   model.delta_max * np.exp(-model.lam * np.maximum(t - model.t_ovt, 0.0)))
    return float(out) if np.ndim(t_gap) == 0 else out


def delta_smooth(model: WakeModel, t_gap):
    """C2 drag-reduction fraction; accepts floats, arrays or expressions.

    Without a surrogate this evaluates the closed-form blend
    ``delta_max * step(t - t_ovt) * exp(-lam * smoothmax(t - t_ovt, 0))``
    with a logistic step; with a surrogate attached, the network is used.
    """
    if model.surrogate is not None:
        return model.surrogate(t_gap)
    if isinstance(t_gap, ad.Expr):
        x = t_gap - model.t_ovt
        step = ad.logistic(model.k_blend * x)
        decay = ad.exp(-model.lam * ad.smooth_max(x, 0.0))
        return model.delta_max * step * decay
    x = np.asarray(t_gap, dtype=float) - model.t_ovt
    beta = ad.SMOOTH_MAX_BETA
    smax = 0.5 * (x + np.sqrt(x * x + beta * beta))
    out = model.delta_max * expit(model.k_blend * x) * np.exp(-model.lam * smax)
    return float(out) if np.ndim(t_gap) == 0 else out


def _net_shapes(arch):
    shapes = []
    for n_in, n_out in zip(arch[:-1], arch[1:]):
        shapes.append((n_out, n_in))
        shapes.append((n_out,))
    return shapes


def _unpack(theta, arch):
    shapes = _net_shapes(arch)
    weights, biases = [], []
    pos = 0
    for i, shape in enumerate(shapes):
        size = int(np.prod(shape))
        block = theta[pos:pos + size].reshape(shape)
        pos += size
        (weights if i % 2 == 0 else biases).append(block)
    return tuple(weights), tuple(biases)


def fit_surrogate(samples, arch, seed: int = 0, restarts: int = 5,
                  residual_target: float = 0.01,
                  output_scale: float = DEFAULT_DELTA_MAX * 1.05) -> SurrogateNet:
    """Least-squares fit of the surrogate network to (t_gap, delta) samples.

    Deterministic for a fixed seed; tries up to ``restarts`` seeded
    initializations and raises :class:`FitError` if the maximum absolute
    residual never reaches the target.
    """
    from scipy.optimize import least_squares

    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2 or samples.shape[1] != 2:
        raise ValueError("samples must be an (n, 2) array of (t_gap, delta)")
    if len(samples) < 50:
        raise ValueError("need at least 50 samples")
    t, target = samples[:, 0], samples[:, 1]
    span = t.max() - t.min()
    if span < 1.5:
        raise ValueError("samples must span at least [-0.5, 2.0]-like range")

    arch = list(arch)
    n_params = sum(int(np.prod(s)) for s in _net_shapes(arch))

    def residuals(theta):
        w, b = _unpack(theta, arch)
        net = SurrogateNet(layers=tuple(arch), weights=w, biases=b,
                           output_scale=output_scale)
        return net(t) - target

    best = None
    for attempt in range(restarts):
        rng = np.random.default_rng(seed + attempt)
        theta0 = rng.normal(0.0, 0.8, n_params)
        sol = least_squares(residuals, theta0, method="lm", max_nfev=4000)
        res = float(np.max(np.abs(sol.fun)))
        if best is None or res < best[0]:
            best = (res, sol.x)
        if res <= residual_target:
            break
    res, theta = best
    if res > residual_target:
        raise FitError(f"max residual {res:.4g} above target {residual_target}")
    w, b = _unpack(theta, arch)
    return SurrogateNet(layers=tuple(arch), weights=w, biases=b,
                        output_scale=output_scale)
