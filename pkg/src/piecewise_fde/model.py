"""Lotka-Volterra predator-prey vector field and its local analysis."""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .special_functions import FractionalOrder, gamma

__all__ = [
    "LotkaVolterraParams",
    "State",
    "Stability",
    "EquilibriumReport",
    "UniquenessQuery",
    "drift",
    "vector_field",
    "jacobian",
    "eigenvalues",
    "equilibria",
    "omitted_equilibria",
    "classify",
    "lipschitz_constants",
    "uniqueness_criterion",
    "first_integral",
]


@dataclass(frozen=True)
class LotkaVolterraParams:
    """Rates of the predator-prey system.

    ``lambda1`` prey self-limitation, ``lambda2`` predation, ``lambda3``
    predator conversion, ``lambda4`` predator death; ``sigma1``/``sigma2``
    scale multiplicative noise on prey/predator.
    """

    r: float = 1.0
    lambda1: float = 0.0
    lambda2: float = 0.0
    lambda3: float = 0.0
    lambda4: float = 0.0
    sigma1: float = 0.0
    sigma2: float = 0.0

    def __post_init__(self) -> None:
        for name in ("r", "lambda1", "lambda2", "lambda3", "lambda4", "sigma1", "sigma2"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
            if name != "r" and value < 0.0:
                raise ValueError(f"{name} must be >= 0, got {value!r}")
            object.__setattr__(self, name, value)

    @property
    def sigma(self) -> np.ndarray:
        return np.array([self.sigma1, self.sigma2])


class State(NamedTuple):
    x: float
    y: float


class Stability(str, enum.Enum):
    UNSTABLE_NODE = "UnstableNode"
    STABLE_NODE = "StableNode"
    SADDLE = "Saddle"
    UNSTABLE_SPIRAL = "UnstableSpiral"
    STABLE_SPIRAL = "StableSpiral"
    CENTER = "Center"
    DEGENERATE = "Degenerate"

    @property
    def is_stable(self) -> bool:
        """Lyapunov stable (centres included)."""
        return self in (Stability.STABLE_NODE, Stability.STABLE_SPIRAL, Stability.CENTER)

    @property
    def is_asymptotically_stable(self) -> bool:
        return self in (Stability.STABLE_NODE, Stability.STABLE_SPIRAL)


@dataclass(frozen=True)
class EquilibriumReport:
    label: str
    point: State
    eigenvalues: tuple[complex, complex]
    classification: Stability
    feasible: bool


@dataclass(frozen=True)
class UniquenessQuery:
    k: float
    delta: FractionalOrder
    T: float
    a: float = 1.0
    b: float = 0.0

    def __post_init__(self) -> None:
        if not isinstance(self.delta, FractionalOrder):
            object.__setattr__(self, "delta", FractionalOrder(self.delta))
        if not self.k >= 0:
            raise ValueError(f"Lipschitz constant k must be >= 0, got {self.k!r}")
        if not self.T > 0:
            raise ValueError(f"horizon T must be > 0, got {self.T!r}")
        if self.a + self.b == 0:
            raise ValueError("boundary weights must satisfy a + b != 0")


def drift(params: LotkaVolterraParams, s) -> np.ndarray:
    x, y = float(s[0]), float(s[1])
    p = params
    return np.array([x * (p.r - p.lambda1 * x - p.lambda2 * y), y * (-p.lambda4 + p.lambda3 * x)])


def vector_field(params: LotkaVolterraParams) -> Callable[[float, np.ndarray], np.ndarray]:
    """Return ``f(t, q)`` for the solvers; the system is autonomous."""
    r, l1, l2, l3, l4 = params.r, params.lambda1, params.lambda2, params.lambda3, params.lambda4

    def f(t: float, q: np.ndarray) -> np.ndarray:
        x, y = q[0], q[1]
        return np.array([x * (r - l1 * x - l2 * y), y * (-l4 + l3 * x)])

    return f


def jacobian(params: LotkaVolterraParams, s) -> np.ndarray:
    x, y = float(s[0]), float(s[1])
    p = params
    return np.array(
        [
            [p.r - 2.0 * p.lambda1 * x - p.lambda2 * y, -p.lambda2 * x],
            [p.lambda3 * y, -p.lambda4 + p.lambda3 * x],
        ]
    )


def eigenvalues(matrix) -> tuple[complex, complex]:
    """Roots of ``nu^2 - tr*nu + det`` for a 2x2 matrix.

    Uses the cancellation-free form of the quadratic formula; triangular
    matrices return their diagonal exactly.
    """
    (a, b), (c, d) = np.asarray(matrix, dtype=float)
    if b == 0.0 or c == 0.0:
        return complex(a), complex(d)
    tr = a + d
    det = a * d - b * c
    disc = tr * tr - 4.0 * det
    if disc < 0.0:
        root = cmath.sqrt(disc)
        return (tr + root) / 2.0, (tr - root) / 2.0
    sq = math.sqrt(disc)
    big = (tr + math.copysign(sq, tr)) / 2.0
    if big == 0.0:
        return 0j, 0j
    return complex(big), complex(det / big)


def classify(eigs: tuple[complex, complex], tol: float = 1e-12) -> Stability:
    """Classify an equilibrium from its two Jacobian eigenvalues.

    Node for real eigenvalues of one sign, saddle for opposite signs, spiral
    for complex pairs with nonzero real part, centre for a purely imaginary
    pair. A zero eigenvalue is ``DEGENERATE``. Components smaller than
    ``tol`` times the eigenvalue scale count as zero.
    """
    n1, n2 = complex(eigs[0]), complex(eigs[1])
    scale = max(1.0, abs(n1), abs(n2))
    eps = tol * scale
    if abs(n1) <= eps or abs(n2) <= eps:
        return Stability.DEGENERATE
    re1, re2 = n1.real, n2.real
    if abs(n1.imag) > eps or abs(n2.imag) > eps:
        re = 0.5 * (re1 + re2)
        if abs(re) <= eps:
            return Stability.CENTER
        return Stability.STABLE_SPIRAL if re < 0 else Stability.UNSTABLE_SPIRAL
    if re1 > 0 and re2 > 0:
        return Stability.UNSTABLE_NODE
    if re1 < 0 and re2 < 0:
        return Stability.STABLE_NODE
    return Stability.SADDLE


def _report(params: LotkaVolterraParams, label: str, x: float, y: float) -> EquilibriumReport:
    eigs = eigenvalues(jacobian(params, (x, y)))
    return EquilibriumReport(
        label=label,
        point=State(x, y),
        eigenvalues=eigs,
        classification=classify(eigs),
        feasible=(x >= 0.0 and y >= 0.0),
    )


def equilibria(params: LotkaVolterraParams) -> list[EquilibriumReport]:
    """Equilibria that exist for ``params``: origin, prey-only and coexistence.

    The coexistence point is returned even when a coordinate is negative
    (``feasible=False``). Points whose closed form divides by a zero rate are
    left out; see :func:`omitted_equilibria`.
    """
    p = params
    out = [_report(p, "extinction", 0.0, 0.0)]
    if p.lambda1 != 0.0:
        out.append(_report(p, "prey-only", p.r / p.lambda1, 0.0))
    if p.lambda2 != 0.0 and p.lambda3 != 0.0:
        x = p.lambda4 / p.lambda3
        y = (p.lambda3 * p.r - p.lambda1 * p.lambda4) / (p.lambda3 * p.lambda2)
        out.append(_report(p, "coexistence", x, y))
    return out


def omitted_equilibria(params: LotkaVolterraParams) -> list[str]:
    notes = []
    if params.lambda1 == 0.0:
        notes.append("prey-only point (r/lambda1, 0) omitted: lambda1 = 0")
    if params.lambda2 == 0.0 or params.lambda3 == 0.0:
        zero = "lambda2" if params.lambda2 == 0.0 else "lambda3"
        notes.append(f"coexistence point omitted: {zero} = 0")
    return notes


def lipschitz_constants(
    params: LotkaVolterraParams, *, x_max: float = 1.0, y_max: float = 1.0
) -> tuple[float, float]:
    """Per-equation Lipschitz bounds ``(k1, k2)`` on the box ``[0, x_max] x [0, y_max]``.

    ``k1`` bounds the prey rate in ``x`` and ``k2`` the predator rate in ``y``.
    On the unit box these are ``|r| + 2*lambda1 + lambda2`` and
    ``lambda3 + lambda4``. The field is not globally Lipschitz, so the box
    matters.
    """
    p = params
    k1 = abs(p.r) + 2.0 * p.lambda1 * x_max + p.lambda2 * y_max
    k2 = p.lambda3 * x_max + p.lambda4
    return k1, k2


def uniqueness_criterion(q: UniquenessQuery) -> tuple[float, bool]:
    """Evaluate ``k T^d (1 + |b|/|a+b|) / Gamma(d+1)`` and whether it is < 1."""
    d = q.delta.delta
    value = q.k * q.T**d * (1.0 + abs(q.b) / abs(q.a + q.b)) / gamma(d + 1.0)
    return value, value < 1.0


def first_integral(params: LotkaVolterraParams, s) -> float:
    """``lambda3 x - lambda4 ln x + lambda2 y - r ln y``, conserved when lambda1 = 0."""
    x, y = float(s[0]), float(s[1])
    p = params
    return p.lambda3 * x - p.lambda4 * math.log(x) + p.lambda2 * y - p.r * math.log(y)
