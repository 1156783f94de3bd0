"""Adaptive Dormand-Prince 5(4) integrator with quartic dense output.

Serves as the reference integrator the collocation solver is checked
against.  The implementation is the textbook embedded pair: a fifth-order
solution is advanced, the embedded fourth-order solution provides the
error estimate, and the step size follows the standard controller
``h * clamp(0.9 * err**(-1/5), 0.2, 5)``.  Every accepted step stores the
coefficients of the quartic interpolant so the solution can later be
sampled at arbitrary times without re-integrating.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import OdeSystem, Trajectory
from .errors import ConvergenceError, DomainViolationError

__all__ = ["RkConfig", "RkTrajectory", "rk45_integrate", "sample_at"]

# Dormand-Prince coefficients.  _B holds the fifth-order weights, _E the
# difference between the fifth- and fourth-order weights (so h * _E @ K is
# the embedded error estimate), and _P maps the seven stages onto the
# quartic dense-output polynomial in the normalized step coordinate.
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])

_A = (
    np.empty(0),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
)

_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])

_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200,
               22 / 525, -1 / 40])

_P = np.array([
    [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608,
     -12715105075 / 11282082432],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933,
     87487479700 / 32700410799],
    [0.0, -1754552775 / 470086768, 14199869525 / 1410260304,
     -10690763975 / 1880347072],
    [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408,
     701980252875 / 199316789632],
    [0.0, -282668133 / 205662961, 2019193451 / 616988883,
     -1453857185 / 822651844],
    [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0
_SAFETY = 0.9


@dataclass(frozen=True)
class RkConfig:
    """Tolerances and step limits for one adaptive integration."""

    rel_tol: float = 1e-12
    abs_tol: float = 1e-15
    h_init: Optional[float] = None
    h_max: float = np.inf
    max_steps: int = 1_000_000

    def __post_init__(self):
        if not self.rel_tol > 0.0:
            raise ValueError(f"rel_tol must be positive, got {self.rel_tol}")
        if not self.abs_tol > 0.0:
            raise ValueError(f"abs_tol must be positive, got {self.abs_tol}")
        if self.h_init is not None and not self.h_init > 0.0:
            raise ValueError(f"h_init must be positive, got {self.h_init}")
        if self.max_steps < 1:
            raise ValueError(f"max_steps must be >= 1, got {self.max_steps}")


@dataclass
class RkTrajectory(Trajectory):
    """Trajectory of accepted steps plus dense-output data.

    ``dense_q[i]`` holds the ``D x 4`` interpolation coefficients of step
    ``i`` (from ``times[i]`` to ``times[i+1]``) and ``step_h[i]`` its
    size.  ``segment_iterations`` is empty: there is no per-segment
    iteration in a single-pass integrator.
    """

    steps_accepted: int = 0
    steps_rejected: int = 0
    step_h: Optional[np.ndarray] = None
    dense_q: Optional[np.ndarray] = None


def _initial_step(system, t0, x0, f0, cfg, span):
    """Standard two-probe heuristic for the starting step size."""
    sc = cfg.abs_tol + cfg.rel_tol * np.abs(x0)
    d0 = np.max(np.abs(x0) / sc)
    d1 = np.max(np.abs(f0) / sc)
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h0 = min(h0, span)
    f1 = system.eval_rhs(t0 + h0, x0 + h0 * f0)
    d2 = np.max(np.abs(f1 - f0) / sc) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100.0 * h0, h1, cfg.h_max, span)


def rk45_integrate(system: OdeSystem, t0: float, tf: float, x0: np.ndarray,
                   cfg: Optional[RkConfig] = None) -> RkTrajectory:
    """Integrate ``[t0, tf]`` adaptively and return the accepted steps.

    The error test is the mixed-tolerance max norm
    ``max_i |e_i| / (abs_tol + rel_tol * max(|x_i|, |x_new_i|)) <= 1``.
    Rejected attempts shrink the step without advancing time but are
    counted, both as rejections and through the system's rhs counter.
    Raises :class:`ConvergenceError` when ``max_steps`` attempts are
    exhausted and :class:`DomainViolationError` when the state or rhs
    leaves the finite domain.
    """
    if cfg is None:
        cfg = RkConfig()
    if not tf > t0:
        raise ValueError(f"need tf > t0, got t0={t0}, tf={tf}")
    x = np.asarray(x0, dtype=float)
    if x.ndim != 1 or x.size != system.dim:
        raise ValueError(
            f"initial state has shape {x.shape}, expected ({system.dim},)")
    if not np.all(np.isfinite(x)):
        raise DomainViolationError("initial state is not finite", t=t0, state=x)

    import time as _time
    t_wall = _time.perf_counter()
    evals_before = system.rhs_evals

    t = t0
    f_cur = system.eval_rhs(t, x)
    h = cfg.h_init if cfg.h_init is not None else \
        _initial_step(system, t0, x, f_cur, cfg, tf - t0)
    h = min(h, cfg.h_max, tf - t0)

    times = [t0]
    states = [x.copy()]
    step_h = []
    dense_q = []
    n_acc = 0
    n_rej = 0
    attempts = 0
    k = np.empty((7, system.dim))

    while t < tf:
        if attempts >= cfg.max_steps:
            raise ConvergenceError(
                f"step budget of {cfg.max_steps} exhausted at t={t:g} "
                f"(accepted {n_acc}, rejected {n_rej})")
        attempts += 1
        h = min(h, tf - t)

        k[0] = f_cur
        for s in range(1, 7):
            xs = x + h * (_A[s] @ k[:s])
            k[s] = system.eval_rhs(t + _C[s] * h, xs)
        x_new = x + h * (_B @ k)
        if not np.all(np.isfinite(x_new)):
            raise DomainViolationError(
                f"state became non-finite during the step at t={t!r}",
                t=t, state=x_new)

        e = h * (_E @ k)
        sc = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(x), np.abs(x_new))
        err = float(np.max(np.abs(e) / sc))

        if err <= 1.0:
            step_h.append(h)
            dense_q.append(k.T @ _P)
            t_new = tf if h == tf - t else t + h
            times.append(t_new)
            states.append(x_new)
            x = x_new
            t = t_new
            n_acc += 1
            if t < tf:
                f_cur = system.eval_rhs(t, x)
            factor = _MAX_FACTOR if err == 0.0 else \
                min(_MAX_FACTOR, max(_MIN_FACTOR, _SAFETY * err ** -0.2))
        else:
            n_rej += 1
            factor = min(_MAX_FACTOR, max(_MIN_FACTOR, _SAFETY * err ** -0.2))
        h = min(h * factor, cfg.h_max)

    wall = _time.perf_counter() - t_wall
    return RkTrajectory(times=np.array(times), states=np.array(states),
                        segment_iterations=np.empty(0, dtype=int),
                        total_rhs_evals=system.rhs_evals - evals_before,
                        wall_time=wall,
                        steps_accepted=n_acc, steps_rejected=n_rej,
                        step_h=np.array(step_h), dense_q=np.array(dense_q))


def sample_at(traj: RkTrajectory, times: np.ndarray) -> np.ndarray:
    """Sample a trajectory at arbitrary times via its dense output.

    Times that coincide with an accepted step return the stored state
    exactly.  Queries outside the integrated span raise ``ValueError``.
    Returns an ``len(times) x D`` array.
    """
    if getattr(traj, "dense_q", None) is None or len(traj.dense_q) == 0:
        raise ValueError("trajectory carries no dense-output data")
    query = np.atleast_1d(np.asarray(times, dtype=float))
    t_lo = traj.times[0]
    t_hi = traj.times[-1]
    slack = 1e-12 * max(1.0, abs(t_hi - t_lo))
    if np.any(query < t_lo - slack) or np.any(query > t_hi + slack):
        raise ValueError(
            f"sample times outside the integrated span [{t_lo!r}, {t_hi!r}]")

    out = np.empty((query.size, traj.states.shape[1]))
    for i, tq in enumerate(query):
        pos = int(np.searchsorted(traj.times, tq))
        if pos < traj.times.size and traj.times[pos] == tq:
            out[i] = traj.states[pos]
            continue
        idx = min(max(pos - 1, 0), traj.step_h.size - 1)
        h = traj.step_h[idx]
        theta = (tq - traj.times[idx]) / h
        tv = np.array([theta, theta ** 2, theta ** 3, theta ** 4])
        out[i] = traj.states[idx] + h * (traj.dense_q[idx] @ tv)
    return out
