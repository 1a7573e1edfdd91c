"""Scalar special functions and the normalisations used by the fractional kernels."""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "FractionalOrder",
    "SeriesTolerance",
    "MittagLefflerConvergenceError",
    "gamma",
    "mittag_leffler",
    "ab_normalization",
    "cf_normalization",
]

GAMMA_MAX_ARG = 170.0
ML_MAX_ABS_Z = 50.0


@dataclass(frozen=True)
class FractionalOrder:
    """Order of a fractional operator, restricted to (0, 1].

    ``delta == 1`` is the classical limit and is accepted on purpose.
    """

    delta: float

    def __post_init__(self) -> None:
        d = float(self.delta)
        if not (math.isfinite(d) and 0.0 < d <= 1.0):
            raise ValueError(f"fractional order must lie in (0, 1], got {self.delta!r}")
        object.__setattr__(self, "delta", d)

    def __float__(self) -> float:
        return self.delta


@dataclass(frozen=True)
class SeriesTolerance:
    abs_tol: float = 1e-17
    max_terms: int = 500

    def __post_init__(self) -> None:
        if not self.abs_tol > 0:
            raise ValueError(f"abs_tol must be positive, got {self.abs_tol!r}")
        if int(self.max_terms) < 1:
            raise ValueError(f"max_terms must be >= 1, got {self.max_terms!r}")


class MittagLefflerConvergenceError(ArithmeticError):
    """Raised when the truncated series cannot deliver a trustworthy value."""

    def __init__(self, message: str, residual: float) -> None:
        super().__init__(f"{message} (residual estimate {residual:.3e})")
        self.residual = residual


def _as_order(delta: FractionalOrder | float) -> float:
    if isinstance(delta, FractionalOrder):
        return delta.delta
    return FractionalOrder(delta).delta


def gamma(x: float) -> float:
    """Gamma function on (0, 170].

    Raises ``ValueError`` for non-positive or too-large arguments.
    """
    x = float(x)
    if not math.isfinite(x) or x <= 0.0:
        raise ValueError(f"gamma is only defined here for x > 0, got {x!r}")
    if x > GAMMA_MAX_ARG:
        raise ValueError(f"gamma argument {x!r} exceeds supported range (0, {GAMMA_MAX_ARG}]")
    return math.gamma(x)


def mittag_leffler(
    delta: FractionalOrder | float,
    z: float,
    tol: SeriesTolerance | None = None,
) -> float:
    """One-parameter Mittag-Leffler function ``E_delta(z)`` by direct power series.

    The partial sum stops once the magnitude of the next term drops below
    ``tol.abs_tol``. Terms are formed in log space so that large ``|z|`` does
    not overflow before the factorial-like denominator catches up.

    Parameters
    ----------
    delta : FractionalOrder or float
        Order in (0, 1].
    z : float
        Real argument with ``|z| <= 50``.
    tol : SeriesTolerance, optional
        Stopping rule; defaults to ``SeriesTolerance()``.

    Raises
    ------
    MittagLefflerConvergenceError
        If ``max_terms`` is exhausted, or if cancellation between terms of
        alternating sign leaves fewer than ~8 reliable digits.
    """
    d = _as_order(delta)
    tol = tol or SeriesTolerance()
    z = float(z)
    if not math.isfinite(z) or abs(z) > ML_MAX_ABS_Z:
        raise MittagLefflerConvergenceError(f"|z| must be <= {ML_MAX_ABS_Z}, got {z!r}", math.inf)
    if z == 0.0:
        return 1.0

    log_abs_z = math.log(abs(z))
    negative = z < 0.0
    terms = [1.0]
    abs_sum = 1.0
    for n in range(1, int(tol.max_terms)):
        magnitude = math.exp(n * log_abs_z - math.lgamma(d * n + 1.0))
        if magnitude < tol.abs_tol:
            break
        terms.append(-magnitude if (negative and n % 2) else magnitude)
        abs_sum += magnitude
    else:
        raise MittagLefflerConvergenceError(
            f"series did not converge within {tol.max_terms} terms", terms[-1]
        )

    value = math.fsum(terms)
    rounding = 4.0 * math.ulp(1.0) * abs_sum
    if rounding > 1e-8 * max(abs(value), tol.abs_tol):
        raise MittagLefflerConvergenceError(
            f"cancellation in series for E_{d}({z}) destroys accuracy", rounding
        )
    return value


def ab_normalization(delta: FractionalOrder | float) -> float:
    """Atangana-Baleanu normalisation ``1 - delta + delta / Gamma(delta)``."""
    d = _as_order(delta)
    return 1.0 - d + d / gamma(d)


def cf_normalization(delta: FractionalOrder | float) -> float:
    """Caputo-Fabrizio normalisation, taken as the constant 1.

    Only ``M(0) = M(1) = 1`` is pinned down; the boundary ``delta = 0`` is
    accepted here even though it is not a valid :class:`FractionalOrder`.
    """
    d = float(delta.delta if isinstance(delta, FractionalOrder) else delta)
    if not (math.isfinite(d) and 0.0 <= d <= 1.0):
        raise ValueError(f"normalisation defined for delta in [0, 1], got {delta!r}")
    return 1.0
