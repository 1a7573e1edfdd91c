"""Segment integrators and the piecewise orchestrator.

Every integrator works on a uniform grid ``t0 + i*h`` and returns the states
at all ``n_steps + 1`` grid points of its slice, row 0 being the initial
value it was handed. Drift functions have the signature ``f(t, q) -> dq``
with ``q`` a 1-D float array.

Fractional segments keep their full memory, but that memory starts at the
segment's own left endpoint. The first two steps of every segment are
start-up steps; after that the three-point Newton stencil is available.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import root

from . import weights as W
from .model import LotkaVolterraParams, vector_field
from .special_functions import FractionalOrder, ab_normalization, cf_normalization, gamma
from .stochastic import BrownianPath, generate_path

__all__ = [
    "SegmentKind",
    "SegmentSpec",
    "PiecewiseSchedule",
    "Trajectory",
    "IntegrationDivergedError",
    "StartupError",
    "rk4_step",
    "bootstrap_steps",
    "ab3_step",
    "classical_segment",
    "caputo_segment",
    "abc_segment",
    "cf_segment",
    "stochastic_segment",
    "solve_schedule",
    "solve_piecewise",
]

Drift = Callable[[float, np.ndarray], np.ndarray]

_GRID_RTOL = 1e-9


class SegmentKind(str, enum.Enum):
    CLASSICAL = "classical"
    CAPUTO = "caputo"
    CAPUTO_FABRIZIO = "caputo-fabrizio"
    ATANGANA_BALEANU = "atangana-baleanu"
    STOCHASTIC = "stochastic"

    @property
    def is_fractional(self) -> bool:
        return self in (SegmentKind.CAPUTO, SegmentKind.CAPUTO_FABRIZIO, SegmentKind.ATANGANA_BALEANU)


class IntegrationDivergedError(ArithmeticError):
    reason = "non-finite state"

    def __init__(self, step: int, segment: int | None = None, state=None) -> None:
        self.step = step
        self.segment = segment
        self.state = state
        where = f"step {step}" if segment is None else f"segment {segment}, step {step}"
        super().__init__(f"{self.reason} at {where}: {state!r}")

    def in_segment(self, segment: int, offset: int) -> "IntegrationDivergedError":
        return type(self)(self.step + offset, segment, self.state)


class StartupError(IntegrationDivergedError):
    """The implicit start-up system of a fractional segment had no solution."""

    reason = "start-up system unsolved"


@dataclass(frozen=True)
class SegmentSpec:
    kind: SegmentKind
    t_start: float
    t_end: float
    delta: FractionalOrder = field(default_factory=lambda: FractionalOrder(1.0))

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", SegmentKind(self.kind))
        if not isinstance(self.delta, FractionalOrder):
            object.__setattr__(self, "delta", FractionalOrder(self.delta))
        if not (math.isfinite(self.t_start) and math.isfinite(self.t_end)):
            raise ValueError("segment endpoints must be finite")
        if not self.t_start < self.t_end:
            raise ValueError(f"segment needs t_start < t_end, got [{self.t_start}, {self.t_end}]")


@dataclass(frozen=True)
class PiecewiseSchedule:
    """Abutting segments on one uniform grid of spacing ``step``."""

    segments: tuple[SegmentSpec, ...]
    step: float

    def __post_init__(self) -> None:
        segs = tuple(self.segments)
        object.__setattr__(self, "segments", segs)
        if not segs:
            raise ValueError("schedule needs at least one segment")
        if not (math.isfinite(self.step) and self.step > 0):
            raise ValueError(f"step must be positive, got {self.step!r}")
        for i, (a, b) in enumerate(zip(segs, segs[1:])):
            if a.t_end != b.t_start:
                raise ValueError(f"segments {i} and {i + 1} do not abut: {a.t_end} != {b.t_start}")
        for i, seg in enumerate(segs):
            span = (seg.t_end - seg.t_start) / self.step
            n = round(span)
            if abs(span - n) > _GRID_RTOL * max(1.0, span):
                raise ValueError(
                    f"segment {i} length {seg.t_end - seg.t_start} is not a multiple of step {self.step}"
                )
            if n < 3:
                raise ValueError(f"segment {i} spans {n} steps; at least 3 are required")

    @property
    def steps_per_segment(self) -> list[int]:
        return [round((s.t_end - s.t_start) / self.step) for s in self.segments]

    @property
    def n_steps(self) -> int:
        return sum(self.steps_per_segment)

    @property
    def t_start(self) -> float:
        return self.segments[0].t_start

    @property
    def t_end(self) -> float:
        return self.segments[-1].t_end

    @property
    def boundaries(self) -> tuple[int, ...]:
        """Grid indices at which each segment after the first begins."""
        counts = np.cumsum(self.steps_per_segment)
        return tuple(int(c) for c in counts[:-1])


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    segment_boundaries: tuple[int, ...] = ()

    @property
    def h(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def x(self) -> np.ndarray:
        return self.states[:, 0]

    @property
    def y(self) -> np.ndarray:
        return self.states[:, 1]

    def segment_labels(self) -> np.ndarray:
        """Segment index for each row; a breakpoint row belongs to the segment it starts."""
        labels = np.zeros(len(self.times), dtype=int)
        for k, b in enumerate(self.segment_boundaries, start=1):
            labels[b:] = k
        return labels


def _check_finite(q: np.ndarray, step: int) -> None:
    if not np.all(np.isfinite(q)):
        raise IntegrationDivergedError(step, state=q.copy())


def rk4_step(f: Drift, t: float, q: np.ndarray, h: float) -> np.ndarray:
    k1 = f(t, q)
    k2 = f(t + 0.5 * h, q + 0.5 * h * k1)
    k3 = f(t + 0.5 * h, q + 0.5 * h * k2)
    k4 = f(t + h, q + h * k3)
    return q + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def bootstrap_steps(f: Drift, initial, h: float, t0: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Two classical RK4 steps: the start-up values the AB3 stencil needs."""
    if not h > 0:
        raise ValueError(f"step must be positive, got {h!r}")
    q0 = np.asarray(initial, dtype=float)
    q1 = rk4_step(f, t0, q0, h)
    q2 = rk4_step(f, t0 + h, q1, h)
    return q1, q2


def ab3_step(drift_history: Sequence[np.ndarray], state, h: float) -> np.ndarray:
    """One Adams-Bashforth 3 update; ``drift_history`` is ``(e_{n-2}, e_{n-1}, e_n)``."""
    e2, e1, e0 = (np.asarray(e, dtype=float) for e in drift_history)
    return np.asarray(state, dtype=float) + (h / 12.0) * (23.0 * e0 - 16.0 * e1 + 5.0 * e2)


def _grid(t0: float, h: float, n: int) -> np.ndarray:
    return t0 + h * np.arange(n + 1)


def _prepare(initial, n_steps: int, h: float) -> tuple[np.ndarray, np.ndarray]:
    if n_steps < 3:
        raise ValueError(f"a segment needs at least 3 steps, got {n_steps}")
    if not h > 0:
        raise ValueError(f"step must be positive, got {h!r}")
    q0 = np.array(initial, dtype=float).reshape(-1)
    _check_finite(q0, 0)
    Q = np.empty((n_steps + 1, q0.size))
    E = np.empty_like(Q)
    Q[0] = q0
    return Q, E


def classical_segment(f: Drift, initial, h: float, n_steps: int, t0: float = 0.0) -> np.ndarray:
    """Integer-order segment: RK4 start-up, then AB3."""
    Q, E = _prepare(initial, n_steps, h)
    t = _grid(t0, h, n_steps)
    Q[1], Q[2] = bootstrap_steps(f, Q[0], h, t0)
    for i in range(3):
        _check_finite(Q[i], i)
        E[i] = f(t[i], Q[i])
    for n in range(2, n_steps):
        Q[n + 1] = Q[n] + (h / 12.0) * (23.0 * E[n] - 16.0 * E[n - 1] + 5.0 * E[n - 2])
        _check_finite(Q[n + 1], n + 1)
        E[n + 1] = f(t[n + 1], Q[n + 1])
    return Q


def stochastic_segment(
    f: Drift,
    initial,
    h: float,
    n_steps: int,
    sigma,
    noise: BrownianPath | np.ndarray,
    t0: float = 0.0,
) -> np.ndarray:
    """AB3 drift plus multiplicative Euler-Maruyama noise ``sigma * Q_n * dB_n``.

    The two start-up steps use RK4 for the drift, with the same noise term.
    """
    dB = noise.increments if isinstance(noise, BrownianPath) else np.asarray(noise, dtype=float)
    if dB.shape[0] != n_steps:
        raise ValueError(f"noise path has {dB.shape[0]} increments, segment has {n_steps} steps")
    sigma = np.asarray(sigma, dtype=float)
    Q, E = _prepare(initial, n_steps, h)
    t = _grid(t0, h, n_steps)
    for n in range(2):
        Q[n + 1] = rk4_step(f, t[n], Q[n], h) + sigma * Q[n] * dB[n]
        _check_finite(Q[n + 1], n + 1)
    for i in range(3):
        E[i] = f(t[i], Q[i])
    for n in range(2, n_steps):
        drift_part = Q[n] + (h / 12.0) * (23.0 * E[n] - 16.0 * E[n - 1] + 5.0 * E[n - 2])
        Q[n + 1] = drift_part + sigma * Q[n] * dB[n]
        _check_finite(Q[n + 1], n + 1)
        E[n + 1] = f(t[n + 1], Q[n + 1])
    return Q


def _solve_startup(residual, guess: np.ndarray, dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Solve the coupled start-up equations for ``Q_1, Q_2``."""
    if not np.any(residual(guess)):
        z = guess
    else:
        # hybr may report "no progress" once it sits at rounding level, so the
        # residual itself decides acceptance
        z = root(residual, guess, method="hybr", options={"xtol": 1e-14}).x
        if not np.all(np.isfinite(z)):
            raise StartupError(1, state=z.copy())
        if np.max(np.abs(residual(z))) > 1e-12 * max(1.0, np.max(np.abs(z))):
            raise StartupError(1, state=z.copy())
    return z[:dim].copy(), z[dim:].copy()


def _power_law_segment(
    f: Drift,
    initial,
    delta: float,
    h: float,
    n_steps: int,
    t0: float,
    local_coef: float,
    memory_coef: float,
) -> np.ndarray:
    """``Q_{n+1} = Q_0 + local_coef * e_n + memory_coef * sum(weights * e)``.

    Shared by Caputo (``local_coef = 0``) and Atangana-Baleanu. The memory sum
    is the Riemann-Liouville integral of the Newton interpolant, with the
    ``h^delta / Gamma(delta)`` factor folded into ``memory_coef``.
    """
    Q, E = _prepare(initial, n_steps, h)
    t = _grid(t0, h, n_steps)
    q0 = Q[0]
    dim = q0.size

    table = W.caputo_weight_table(delta, n_steps).table
    targets = np.arange(n_steps + 1, dtype=float)
    start = np.zeros((n_steps + 1, 3))
    start[1] = W.interval_weights(delta, 1.0, (0.0, 1.0, 2.0), 0.0)
    for lo in (0.0, 1.0):
        start[2:] += W.interval_weights(delta, targets[2:], (0.0, 1.0, 2.0), lo)

    e0 = f(t[0], q0)

    def residual(z: np.ndarray) -> np.ndarray:
        q1, q2 = z[:dim], z[dim:]
        e1, e2 = f(t[1], q1), f(t[2], q2)
        out = []
        for k, (qk, ek) in ((1, (q1, e1)), (2, (q2, e2))):
            s = start[k]
            mem = s[0] * e0 + s[1] * e1 + s[2] * e2
            out.append(qk - (q0 + local_coef * ek + memory_coef * mem))
        return np.concatenate(out)

    guess = np.concatenate(bootstrap_steps(f, q0, h, t0))
    Q[1], Q[2] = _solve_startup(residual, guess, dim)
    for i in range(3):
        _check_finite(Q[i], i)
        E[i] = f(t[i], Q[i])

    for n in range(2, n_steps):
        rows = table[n - 2 :: -1]
        mem = start[n + 1] @ E[:3]
        mem = mem + rows[:, 0] @ E[2 : n + 1] + rows[:, 1] @ E[1:n] + rows[:, 2] @ E[0 : n - 1]
        Q[n + 1] = q0 + local_coef * E[n] + memory_coef * mem
        _check_finite(Q[n + 1], n + 1)
        E[n + 1] = f(t[n + 1], Q[n + 1])
    return Q


def caputo_segment(
    f: Drift, initial, delta: FractionalOrder | float, h: float, n_steps: int, t0: float = 0.0
) -> np.ndarray:
    """Caputo segment: ``Q_{n+1} = Q(P1) + h^d/Gamma(d) * sum_j weights * e``."""
    d = float(FractionalOrder(float(delta)))
    return _power_law_segment(f, initial, d, h, n_steps, t0, 0.0, h**d / gamma(d))


def abc_segment(
    f: Drift, initial, delta: FractionalOrder | float, h: float, n_steps: int, t0: float = 0.0
) -> np.ndarray:
    """Atangana-Baleanu (Caputo sense) segment.

    ``Q_{n+1} = Q(P1) + (1-d)/AB(d) * e_n + d/AB(d) * RL_sum``, where
    ``RL_sum`` is the Caputo memory sum including its ``h^d/Gamma(d)``.
    """
    d = float(FractionalOrder(float(delta)))
    ab = ab_normalization(d)
    return _power_law_segment(f, initial, d, h, n_steps, t0, (1.0 - d) / ab, d / ab * h**d / gamma(d))


def cf_segment(
    f: Drift, initial, delta: FractionalOrder | float, h: float, n_steps: int, t0: float = 0.0
) -> np.ndarray:
    """Caputo-Fabrizio segment in increment form.

    ``Q_{n+1} = Q_n + (1-d)/M (e_n - e_{n-1}) + d/M * h/12 (23 e_n - 16 e_{n-1} + 5 e_{n-2})``.
    Summed up, this is ``Q(P1) + (1-d)/M (e - e(P1)) + d/M * integral(e)``,
    which keeps the state continuous at the breakpoint.
    """
    d = float(FractionalOrder(float(delta)))
    m = cf_normalization(d)
    a, b = (1.0 - d) / m, d / m
    Q, E = _prepare(initial, n_steps, h)
    t = _grid(t0, h, n_steps)
    q0 = Q[0]
    dim = q0.size
    e0 = f(t[0], q0)
    # Simpson-type collocation on [t0, t2] with the quadratic through e0, e1, e2
    c1 = np.array([5.0, 8.0, -1.0]) * h / 12.0
    c2 = np.array([1.0, 4.0, 1.0]) * h / 3.0

    def residual(z: np.ndarray) -> np.ndarray:
        q1, q2 = z[:dim], z[dim:]
        e1, e2 = f(t[1], q1), f(t[2], q2)
        r1 = q1 - (q0 + a * (e1 - e0) + b * (c1[0] * e0 + c1[1] * e1 + c1[2] * e2))
        r2 = q2 - (q0 + a * (e2 - e0) + b * (c2[0] * e0 + c2[1] * e1 + c2[2] * e2))
        return np.concatenate([r1, r2])

    guess = np.concatenate(bootstrap_steps(f, q0, h, t0))
    Q[1], Q[2] = _solve_startup(residual, guess, dim)
    for i in range(3):
        _check_finite(Q[i], i)
        E[i] = f(t[i], Q[i])
    for n in range(2, n_steps):
        ab3 = (h / 12.0) * (23.0 * E[n] - 16.0 * E[n - 1] + 5.0 * E[n - 2])
        Q[n + 1] = Q[n] + a * (E[n] - E[n - 1]) + b * ab3
        _check_finite(Q[n + 1], n + 1)
        E[n + 1] = f(t[n + 1], Q[n + 1])
    return Q


def _run_segment(
    f: Drift, seg: SegmentSpec, q0: np.ndarray, h: float, n: int, sigma, seed: int, index: int
) -> np.ndarray:
    kind = seg.kind
    if kind is SegmentKind.CLASSICAL:
        return classical_segment(f, q0, h, n, seg.t_start)
    if kind is SegmentKind.CAPUTO:
        return caputo_segment(f, q0, seg.delta, h, n, seg.t_start)
    if kind is SegmentKind.ATANGANA_BALEANU:
        return abc_segment(f, q0, seg.delta, h, n, seg.t_start)
    if kind is SegmentKind.CAPUTO_FABRIZIO:
        return cf_segment(f, q0, seg.delta, h, n, seg.t_start)
    path = generate_path(seed, n, h, stream=index, components=q0.size)
    return stochastic_segment(f, q0, h, n, sigma, path, seg.t_start)


def solve_schedule(
    f: Drift, schedule: PiecewiseSchedule, initial, *, sigma=None, seed: int = 0
) -> Trajectory:
    """Integrate ``f`` across every segment of ``schedule``.

    The last state of each segment is handed unchanged to the next one.
    Stochastic segment ``i`` draws its noise from substream ``i`` of ``seed``.
    """
    h = schedule.step
    q0 = np.array(initial, dtype=float).reshape(-1)
    sigma = np.zeros_like(q0) if sigma is None else np.asarray(sigma, dtype=float)
    n_total = schedule.n_steps
    states = np.empty((n_total + 1, q0.size))
    states[0] = q0
    offset = 0
    for index, (seg, n) in enumerate(zip(schedule.segments, schedule.steps_per_segment)):
        try:
            # overflow is reported through IntegrationDivergedError instead
            with np.errstate(over="ignore", invalid="ignore"):
                block = _run_segment(f, seg, states[offset], h, n, sigma, seed, index)
        except IntegrationDivergedError as exc:
            raise exc.in_segment(index, offset) from exc
        states[offset + 1 : offset + n + 1] = block[1:]
        offset += n
    times = schedule.t_start + h * np.arange(n_total + 1)
    return Trajectory(times, states, schedule.boundaries)


def solve_piecewise(
    params: LotkaVolterraParams, schedule: PiecewiseSchedule, initial, seed: int = 0
) -> Trajectory:
    """Piecewise Lotka-Volterra run; noise intensities come from ``params``."""
    return solve_schedule(vector_field(params), schedule, initial, sigma=params.sigma, seed=seed)
