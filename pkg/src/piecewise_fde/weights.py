"""Quadrature weights from integrating a quadratic Newton interpolant against a kernel.

All schemes share one idea: on each step interval ``[t_j, t_{j+1}]`` the drift
is replaced by the quadratic through its values at ``t_{j-2}, t_{j-1}, t_j``,
and that quadratic is integrated exactly against the memory kernel. In step
units ``tau = (s - t_j)/h`` the power-law kernel seen from ``t_{n+1}`` is
``(n - j + 1 - tau)^(delta - 1)``; everything below reduces to its first three
moments over ``tau in [0, 1]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .special_functions import FractionalOrder

__all__ = [
    "NewtonQuadratic",
    "newton_polynomial",
    "kernel_moments",
    "interval_weights",
    "caputo_weights",
    "FractionalWeights",
    "caputo_weight_table",
    "startup_weights",
    "AB3_COEFFICIENTS",
]

AB3_COEFFICIENTS = (23.0 / 12.0, -16.0 / 12.0, 5.0 / 12.0)

# Below this kernel offset the closed-form moments lose at most ~3 digits;
# above it the binomial series converges at least as fast as 9**-k.
_SERIES_THRESHOLD = 9.0
_SERIES_MAX_TERMS = 60


@dataclass(frozen=True)
class NewtonQuadratic:
    """``c0 + c1 (t - t0) + c2 (t - t0)(t - t0 - h)``, forward form anchored at ``t0``."""

    t0: float
    h: float
    c0: float
    c1: float
    c2: float

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        u = t - self.t0
        return self.c0 + self.c1 * u + self.c2 * u * (u - self.h)


def newton_polynomial(e_vals, h: float, t0: float = 0.0) -> NewtonQuadratic:
    """Quadratic through ``(t0, e0), (t0+h, e1), (t0+2h, e2)`` via divided differences."""
    if not h > 0:
        raise ValueError(f"step must be positive, got {h!r}")
    e0, e1, e2 = (float(v) for v in e_vals)
    return NewtonQuadratic(
        t0=t0,
        h=h,
        c0=e0,
        c1=(e1 - e0) / h,
        c2=(e2 - 2.0 * e1 + e0) / (2.0 * h * h),
    )


def kernel_moments(delta: float, a) -> np.ndarray:
    """``int_0^1 (a - tau)^(delta-1) tau^p dtau`` for ``p = 0, 1, 2``.

    ``a`` may be an array; every entry must be ``>= 1``. Returns shape
    ``(..., 3)``. Small offsets use the closed form, large ones the
    all-positive binomial series, which avoids the catastrophic cancellation
    the closed form suffers for long memories.
    """
    a = np.asarray(a, dtype=float)
    if np.any(a < 1.0):
        raise ValueError("kernel offset must be >= 1")
    d = float(delta)
    out = np.empty(a.shape + (3,))

    small = a < _SERIES_THRESHOLD
    if np.any(small):
        s = a[small]
        b = s - 1.0
        A0 = (s**d - b**d) / d
        A1 = (s ** (d + 1.0) - b ** (d + 1.0)) / (d + 1.0)
        A2 = (s ** (d + 2.0) - b ** (d + 2.0)) / (d + 2.0)
        # tau = s - u with u the kernel variable
        out[small, 0] = A0
        out[small, 1] = s * A0 - A1
        out[small, 2] = s * s * A0 - 2.0 * s * A1 + A2

    big = ~small
    if np.any(big):
        s = a[big]
        inv = 1.0 / s
        acc = np.zeros(s.shape + (3,))
        coeff = 1.0
        power = np.ones_like(s)
        p = np.arange(3.0)
        for k in range(_SERIES_MAX_TERMS):
            term = (coeff * power)[:, None] / (p + k + 1.0)
            acc += term
            if coeff == 0.0 or np.all(term[:, 0] <= 1e-18 * acc[:, 0]):
                break
            coeff *= (k + 1.0 - d) / (k + 1.0)
            power = power * inv
        out[big] = acc * (s ** (d - 1.0))[:, None]
    return out


def _lagrange_monomials(nodes, lo: float) -> np.ndarray:
    """Monomial coefficients in ``s = tau - lo`` of the Lagrange basis on ``nodes``."""
    rows = []
    for k in range(3):
        o1, o2 = (nodes[i] for i in range(3) if i != k)
        den = (nodes[k] - o1) * (nodes[k] - o2)
        rows.append([(lo - o1) * (lo - o2) / den, ((lo - o1) + (lo - o2)) / den, 1.0 / den])
    return np.array(rows)


def interval_weights(delta: float, a, nodes, lo: float) -> np.ndarray:
    """Kernel integrals of the Lagrange basis over one step interval.

    Integrates ``(a - tau)^(delta-1) L_k(tau)`` over ``tau in [lo, lo+1]``,
    where ``L_k`` is the Lagrange basis on the three ``nodes`` (in step
    units). Returns shape ``(..., 3)`` ordered like ``nodes``.
    """
    M = kernel_moments(delta, np.asarray(a, dtype=float) - lo)
    return M @ _lagrange_monomials(nodes, lo).T


# stencil seen from the interval [t_j, t_j+1]: e_j, e_{j-1}, e_{j-2}
_EXTRAPOLATION_NODES = (0.0, -1.0, -2.0)


def caputo_weights(delta: FractionalOrder | float, lag: int) -> tuple[float, float, float]:
    """Weights ``(w0, w1, w2)`` on ``e_j, e_{j-1}, e_{j-2}`` for interval ``j``.

    ``lag = n - j`` counts intervals between ``[t_j, t_{j+1}]`` and the
    target time ``t_{n+1}``. The weights exclude the ``h^delta / Gamma(delta)``
    prefactor; at ``delta = 1`` they are the AB3 coefficients for every lag.
    """
    if lag < 0:
        raise ValueError(f"lag must be >= 0, got {lag!r}")
    d = float(delta)
    w = interval_weights(d, float(lag) + 1.0, _EXTRAPOLATION_NODES, 0.0)
    return float(w[0]), float(w[1]), float(w[2])


@dataclass(frozen=True)
class FractionalWeights:
    """Per-lag weight triples for one order; row ``m`` holds lag ``m``."""

    delta: float
    table: np.ndarray

    @property
    def w0(self) -> np.ndarray:
        return self.table[:, 0]

    @property
    def w1(self) -> np.ndarray:
        return self.table[:, 1]

    @property
    def w2(self) -> np.ndarray:
        return self.table[:, 2]


def caputo_weight_table(delta: FractionalOrder | float, max_lag: int) -> FractionalWeights:
    d = float(delta)
    lags = np.arange(max_lag + 1, dtype=float)
    return FractionalWeights(d, interval_weights(d, lags + 1.0, _EXTRAPOLATION_NODES, 0.0))


def startup_weights(delta: FractionalOrder | float, n_target: int) -> np.ndarray:
    """Weights on ``e_0, e_1, e_2`` covering ``[t_0, t_min(n_target, 2)]``.

    The first two intervals have no three-point history behind them, so they
    use the interpolating quadratic through ``t_0, t_1, t_2`` instead.
    """
    d = float(delta)
    total = np.zeros(3)
    for lo in range(min(n_target, 2)):
        total += interval_weights(d, float(n_target), (0.0, 1.0, 2.0), float(lo))
    return total
