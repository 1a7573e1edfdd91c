"""Independent oracles for the solvers.

Nothing here reuses the solver weight code: piecewise integrals use the
classic product-trapezoid formulas, weights are re-derived with adaptive
quadrature, and the linear test problems have closed-form solutions.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import quad

from . import solvers
from .model import LotkaVolterraParams, vector_field
from .solvers import SegmentKind
from .special_functions import (
    FractionalOrder,
    ab_normalization,
    cf_normalization,
    gamma,
    mittag_leffler,
)
from .weights import caputo_weight_table

__all__ = [
    "piecewise_integral",
    "rl_trapezoid_weights",
    "analytic_caputo_relaxation",
    "analytic_abc_relaxation",
    "analytic_cf_relaxation",
    "quadrature_weights",
    "OrderEstimate",
    "estimate_order",
    "CheckResult",
    "run_checks",
    "VERIFY_DELTAS",
]

VERIFY_DELTAS = (0.5, 0.8, 0.95)
WEIGHT_TOL = 1e-8
CLASSICAL_LIMIT_TOL = 1e-8
ANALYTIC_RTOL = 1e-3

CASE1_PARAMS = LotkaVolterraParams(r=1.0, lambda1=2.0, lambda2=1.0, lambda3=1.5, lambda4=1.0)


def _trapezoid(samples: np.ndarray, h: float) -> float:
    if samples.size < 2:
        return 0.0
    return float(h * (samples.sum() - 0.5 * (samples[0] + samples[-1])))


def rl_trapezoid_weights(delta: float, n: int) -> np.ndarray:
    """Product-trapezoid weights for ``(1/Gamma(d)) int_0^{t_n} (t_n - s)^(d-1) f(s) ds``.

    Returned without the ``h^d`` factor; at ``d = 1`` they are ``(1/2, 1, ..., 1, 1/2)``.
    """
    d = float(delta)
    if n == 0:
        return np.zeros(1)
    j = np.arange(n + 1, dtype=float)
    a = (n - j + 1.0) ** (d + 1.0) + np.abs(n - j - 1.0) ** (d + 1.0) - 2.0 * (n - j) ** (d + 1.0)
    a[0] = (n - 1.0) ** (d + 1.0) - (n - d - 1.0) * n**d
    a[n] = 1.0
    return a / gamma(d + 2.0)


def piecewise_integral(
    kind: SegmentKind | str,
    samples: Sequence[float],
    h: float,
    split: int,
    delta: FractionalOrder | float = 1.0,
) -> float:
    """Piecewise integral of a uniformly sampled function up to its last sample.

    The part ``[t_0, t_split]`` is integrated classically (trapezoid); the tail
    ``[t_split, t_N]`` uses the operator matching ``kind``:

    * ``CAPUTO``: Riemann-Liouville integral of order ``delta``.
    * ``CAPUTO_FABRIZIO``: ``(1-d)/M f(t) + d/M int f``.
    * ``ATANGANA_BALEANU``: ``(1-d)/AB f(t) + d/AB * RL integral``.
    * ``CLASSICAL``: plain trapezoid.

    The two parts are added.
    """
    kind = SegmentKind(kind)
    f = np.asarray(samples, dtype=float)
    d = float(FractionalOrder(float(delta)))
    if not 0 <= split < f.size:
        raise ValueError(f"split index {split} outside the sample range")
    head = _trapezoid(f[: split + 1], h)
    tail_samples = f[split:]
    n = tail_samples.size - 1

    if kind in (SegmentKind.CLASSICAL, SegmentKind.STOCHASTIC):
        tail = _trapezoid(tail_samples, h)
    elif kind is SegmentKind.CAPUTO:
        tail = h**d * float(rl_trapezoid_weights(d, n) @ tail_samples)
    elif kind is SegmentKind.CAPUTO_FABRIZIO:
        m = cf_normalization(d)
        tail = (1.0 - d) / m * tail_samples[-1] + d / m * _trapezoid(tail_samples, h)
    else:
        ab = ab_normalization(d)
        rl = h**d * float(rl_trapezoid_weights(d, n) @ tail_samples)
        tail = (1.0 - d) / ab * tail_samples[-1] + d / ab * rl
    return head + tail


def analytic_caputo_relaxation(delta: FractionalOrder | float, rate: float, t: float) -> float:
    """Solution of ``D^d Q = -rate Q``, ``Q(0) = 1`` (Caputo): ``E_d(-rate t^d)``."""
    if t < 0:
        raise ValueError("t must be >= 0")
    d = float(FractionalOrder(float(delta)))
    return mittag_leffler(d, -rate * t**d)


def analytic_abc_relaxation(delta: FractionalOrder | float, rate: float, t: float) -> float:
    """Solution of the Atangana-Baleanu relaxation equation, ``Q(0) = 1``, for ``t > 0``.

    Via Laplace transform of the integral form
    ``Q = 1 + (1-d)/AB e + d/AB * RL[e]`` with ``e = -rate Q``::

        Q(t) = E_d(-rate d t^d / (AB + rate (1-d))) / (1 + rate (1-d)/AB)

    The prefactor is the instantaneous drop at ``t = 0+`` that the local term
    of the operator produces.
    """
    d = float(FractionalOrder(float(delta)))
    if t <= 0:
        raise ValueError("t must be > 0")
    ab = ab_normalization(d)
    c = rate * (1.0 - d) / ab
    return mittag_leffler(d, -rate * d * t**d / (ab + rate * (1.0 - d))) / (1.0 + c)


def analytic_cf_relaxation(delta: FractionalOrder | float, rate: float, t: float) -> float:
    """Solution of ``Q = 1 + (1-d)/M (e - e(0)) + d/M int e`` with ``e = -rate Q``.

    This is the continuous form the increment scheme integrates;
    differentiating gives ``Q' = -rate d / (M + rate (1-d)) Q``.
    """
    d = float(FractionalOrder(float(delta)))
    if t < 0:
        raise ValueError("t must be >= 0")
    m = cf_normalization(d)
    return math.exp(-rate * d * t / (m + rate * (1.0 - d)))


_BASIS = (
    lambda tau: 0.5 * (tau + 1.0) * (tau + 2.0),
    lambda tau: -tau * (tau + 2.0),
    lambda tau: 0.5 * tau * (tau + 1.0),
)


def quadrature_weights(delta: float, lag: int) -> np.ndarray:
    """Adaptive-quadrature values of the three Newton-stencil weights at ``lag``.

    The kernel singularity at the right end (``lag = 0``) is integrated
    analytically by QUADPACK's algebraic-weight rule.
    """
    d = float(delta)
    a = lag + 1.0
    out = np.empty(3)
    for k, basis in enumerate(_BASIS):
        if lag == 0 and d < 1.0:
            val, _ = quad(basis, 0.0, 1.0, weight="alg", wvar=(0.0, d - 1.0), epsabs=1e-13, epsrel=1e-13)
        else:
            val, _ = quad(
                lambda tau: (a - tau) ** (d - 1.0) * basis(tau),
                0.0,
                1.0,
                epsabs=1e-13,
                epsrel=1e-13,
                limit=200,
            )
        out[k] = val
    return out


@dataclass(frozen=True)
class OrderEstimate:
    observed_order: float
    step_pairs: list[tuple[float, float]]
    monotone: bool = True
    skipped: bool = False
    pair_orders: list[float] = field(default_factory=list)


def estimate_order(
    run: Callable[[float], float],
    exact: float,
    h_list: Sequence[float],
    *,
    finest: int = 2,
    floor: float = 1e-13,
) -> OrderEstimate:
    """Observed convergence order from endpoint errors on a halving sequence.

    ``run(h)`` returns the numerical endpoint value. The order is the mean of
    ``log2(err(h)/err(h/2))`` over the ``finest`` smallest-step pairs. If all
    errors sit at rounding level the estimate is skipped (``nan``). A
    non-decreasing error sequence is flagged and warned about, not hidden.
    """
    hs = [float(h) for h in h_list]
    if len(hs) < 3:
        raise ValueError("need at least three step sizes")
    for a, b in zip(hs, hs[1:]):
        if not math.isclose(b, a / 2.0, rel_tol=1e-12):
            raise ValueError("step sizes must form a halving sequence")
    errors = [abs(run(h) - exact) for h in hs]
    pairs = list(zip(hs, errors))
    scale = max(1.0, abs(exact))
    if max(errors) <= floor * scale:
        return OrderEstimate(math.nan, pairs, True, True, [])
    monotone = all(b < a for a, b in zip(errors, errors[1:]))
    if not monotone:
        warnings.warn(f"error sequence is not monotonically decreasing: {errors}", RuntimeWarning, stacklevel=2)
    orders = [math.log2(a / b) if b > 0 else math.inf for a, b in zip(errors, errors[1:])]
    use = orders[-finest:]
    return OrderEstimate(float(np.mean(use)), pairs, monotone, False, orders)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    observed: float
    expected: str

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"[{flag}] {self.name}: observed {self.observed:.3e}, expected {self.expected}"


def _weight_checks(weight_fn, deltas, max_lag: int) -> list[CheckResult]:
    out = []
    for d in deltas:
        table = np.asarray(weight_fn(d, max_lag))
        ref = np.array([quadrature_weights(d, m) for m in range(max_lag + 1)])
        err = float(np.max(np.abs(table - ref)))
        out.append(CheckResult(f"weights vs quadrature, delta={d}, lags 0..{max_lag}", err <= WEIGHT_TOL, err, f"<= {WEIGHT_TOL:g}"))
    return out


def _classical_limit_checks(horizon: float, h: float) -> list[CheckResult]:
    f = vector_field(CASE1_PARAMS)
    n = round(horizon / h)
    ref = solvers.classical_segment(f, [1.0, 2.0], h, n)
    out = []
    for name, seg in (("caputo", solvers.caputo_segment), ("atangana-baleanu", solvers.abc_segment), ("caputo-fabrizio", solvers.cf_segment)):
        err = float(np.max(np.abs(seg(f, [1.0, 2.0], 1.0, h, n) - ref)))
        out.append(CheckResult(f"classical limit, {name} at delta=1", err <= CLASSICAL_LIMIT_TOL, err, f"<= {CLASSICAL_LIMIT_TOL:g}"))
    noise = np.zeros((n, 2))
    sto = solvers.stochastic_segment(f, [1.0, 2.0], h, n, [0.0, 0.0], noise)
    same = bool(np.array_equal(sto, ref))
    out.append(CheckResult("zero-noise stochastic equals classical", same, 0.0 if same else float(np.max(np.abs(sto - ref))), "bit-identical"))
    return out


def _mittag_leffler_checks() -> list[CheckResult]:
    zs = np.linspace(-5.0, 5.0, 41)
    err = max(abs(mittag_leffler(1.0, z) - math.exp(z)) / math.exp(z) for z in zs)
    zero = max(abs(mittag_leffler(d, 0.0) - 1.0) for d in VERIFY_DELTAS)
    return [
        CheckResult("Mittag-Leffler E_1(z) = exp(z), z in [-5, 5]", err < 1e-8, err, "< 1e-8 relative"),
        CheckResult("Mittag-Leffler E_d(0) = 1", zero == 0.0, zero, "== 0"),
    ]


def _ab3_order_check() -> CheckResult:
    f = lambda t, q: -q  # noqa: E731

    def run(h: float) -> float:
        return float(solvers.classical_segment(f, [1.0], h, round(1.0 / h))[-1, 0])

    est = estimate_order(run, math.exp(-1.0), [0.02, 0.01, 0.005, 0.0025])
    ok = abs(est.observed_order - 3.0) <= 0.3
    return CheckResult("AB3 observed order on Q' = -Q", ok, est.observed_order, "3.0 +- 0.3")


def _analytic_checks(deltas=(0.5, 0.9), h: float = 1e-3) -> list[CheckResult]:
    f = lambda t, q: -q  # noqa: E731
    n = round(1.0 / h)
    cases = (
        ("caputo", solvers.caputo_segment, analytic_caputo_relaxation),
        ("atangana-baleanu", solvers.abc_segment, analytic_abc_relaxation),
        ("caputo-fabrizio", solvers.cf_segment, analytic_cf_relaxation),
    )
    out = []
    for name, seg, exact_fn in cases:
        for d in deltas:
            exact = exact_fn(d, 1.0, 1.0)
            err = abs(float(seg(f, [1.0], d, h, n)[-1, 0]) - exact) / abs(exact)
            out.append(CheckResult(f"{name} relaxation vs analytic, delta={d}", err < ANALYTIC_RTOL, err, f"< {ANALYTIC_RTOL:g} relative"))
    return out


def default_weight_fn(delta: float, max_lag: int) -> np.ndarray:
    return caputo_weight_table(delta, max_lag).table


def run_checks(
    weight_fn: Callable[[float, int], np.ndarray] = default_weight_fn,
    *,
    deltas: Sequence[float] = VERIFY_DELTAS,
    max_lag: int = 50,
) -> list[CheckResult]:
    """Run the oracle suite. ``weight_fn`` is injectable so tests can perturb it."""
    results = _weight_checks(weight_fn, deltas, max_lag)
    results += _classical_limit_checks(horizon=2.0, h=1e-3)
    results += _mittag_leffler_checks()
    results.append(_ab3_order_check())
    results += _analytic_checks()
    return results
