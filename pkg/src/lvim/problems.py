"""Benchmark problem factories.

Each factory returns a ProblemSpec bundling the ODE system, its
initial state, the default span, and the default solver settings the
benchmark is normally run with.  Systems carry analytic Jacobians.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Tuple

import numpy as np

from .cheb import CollocationGrid, interpolate
from .core import OdeSystem, SolverConfig, march
from .errors import ConvergenceError, DomainViolationError
from .gravity import GravityModel, gravity_accel
from .rk45 import RkConfig, rk45_integrate, sample_at

__all__ = [
    "ProblemSpec",
    "blasius_pair",
    "emden_chandrasekhar",
    "white_dwarf",
    "mathieu",
    "pendulum",
    "pendulum_frequency_sweep",
    "buckled_bar",
    "BAR_LOAD_TYPES",
    "elastica",
    "elastica_regime",
    "leo",
    "orbital_period",
]

_ORACLE_DEFAULTS = RkConfig(rel_tol=1e-12, abs_tol=1e-15)


@dataclass(frozen=True)
class ProblemSpec:
    """A benchmark instance: system, initial data, span, default configs."""

    name: str
    system: OdeSystem
    x0: np.ndarray
    t0: float
    tf: float
    lvim_defaults: SolverConfig
    rk_defaults: RkConfig
    state_names: Tuple[str, ...]
    notes: str = ""

    def __post_init__(self) -> None:
        x0 = np.asarray(self.x0, dtype=float)
        x0.setflags(write=False)
        object.__setattr__(self, "x0", x0)
        if x0.shape != (self.system.dim,):
            raise ValueError("x0 dimension does not match the system")
        if len(self.state_names) != self.system.dim:
            raise ValueError("state_names length does not match the system")
        if not self.tf > self.t0:
            raise ValueError("tf must exceed t0")


def blasius_pair(xi_max: float = 10.0, stage1: str = "lvim"):
    """Flat-plate boundary-layer similarity solve, as two initial value stages.

    Stage one integrates the companion problem with unit curvature at the
    wall; the far-field slope it reaches fixes the true wall curvature
    through a scaling, and that value seeds the returned ProblemSpec.
    Returns (f2_at_0, spec).
    """
    if xi_max <= 0:
        raise ValueError("xi_max must be positive")
    if stage1 not in ("lvim", "rk45"):
        raise ValueError("stage1 must be 'lvim' or 'rk45'")

    def rhs(t, x):
        return np.array([x[1], x[2], -0.5 * x[0] * x[2]])

    def jac(t, x):
        return np.array([
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [-0.5 * x[2], 0.0, -0.5 * x[0]],
        ])

    stage1_sys = OdeSystem(dim=3, rhs=rhs, jac=jac, name="blasius-stage1")
    x0 = np.array([0.0, 0.0, 1.0])
    cfg = SolverConfig(n_basis=5, dt=0.5, tol=1e-10)
    if stage1 == "lvim":
        traj = march(stage1_sys, 0.0, xi_max, x0, cfg)
    else:
        traj = rk45_integrate(stage1_sys, 0.0, xi_max, x0, _ORACLE_DEFAULTS)
    slope_inf = traj.states[-1, 1]
    if slope_inf <= 0:
        raise ValueError(f"far-field slope {slope_inf:g} is not positive; xi_max too small")
    f2_at_0 = slope_inf ** -1.5

    spec = ProblemSpec(
        name="blasius",
        system=OdeSystem(dim=3, rhs=rhs, jac=jac, name="blasius"),
        x0=np.array([0.0, 0.0, f2_at_0]),
        t0=0.0,
        tf=xi_max,
        lvim_defaults=cfg,
        rk_defaults=_ORACLE_DEFAULTS,
        state_names=("f", "f_prime", "f_double_prime"),
        notes=f"wall curvature {f2_at_0:.12g} from a {stage1} stage-one solve",
    )
    return f2_at_0, spec


def emden_chandrasekhar(xi_start: float = 1e-3) -> ProblemSpec:
    """Isothermal self-gravitating sphere in dimensionless form.

    The radial coordinate starts slightly off zero and the state is
    seeded with a two-term series, because the drag term 2/xi has no
    value at the origin itself.
    """
    if xi_start <= 0:
        raise ValueError("xi_start must be positive")

    def rhs(t, x):
        return np.array([x[1], math.exp(-x[0]) - 2.0 / t * x[1]])

    def jac(t, x):
        return np.array([[0.0, 1.0], [-math.exp(-x[0]), -2.0 / t]])

    psi0 = xi_start**2 / 6.0 - xi_start**4 / 120.0
    dpsi0 = xi_start / 3.0 - xi_start**3 / 30.0
    return ProblemSpec(
        name="emden",
        system=OdeSystem(dim=2, rhs=rhs, jac=jac, name="emden"),
        x0=np.array([psi0, dpsi0]),
        t0=xi_start,
        tf=8.0,
        lvim_defaults=SolverConfig(n_basis=13, dt=1.0, tol=1e-10),
        rk_defaults=_ORACLE_DEFAULTS,
        state_names=("psi", "psi_prime"),
        notes=f"series start at xi = {xi_start:g}",
    )


def _white_dwarf_edge(c: float, eta_start: float, x0: np.ndarray) -> float:
    """Default span end: 2% inside the first phi^2 = c crossing.

    Found with the adaptive oracle on a clamped-radicand copy of the
    field, which continues smoothly through the crossing and lets the
    crossing itself be located by a sign scan.  Profiles that never
    reach the edge get a plain fixed span.
    """
    if c == 0.0:
        return 8.0

    def rhs(t, x):
        rad = max(x[0] * x[0] - c, 0.0)
        return np.array([x[1], -rad * math.sqrt(rad) - 2.0 / t * x[1]])

    from scipy.optimize import brentq

    sys_free = OdeSystem(dim=2, rhs=rhs, name="white-dwarf-edge-scan")
    traj = rk45_integrate(sys_free, eta_start, 50.0, x0, RkConfig(rel_tol=1e-10, abs_tol=1e-12))
    edge = math.sqrt(c)
    gap = traj.states[:, 0] - edge
    # strict downward crossing; a profile pinned on the edge has no exit
    sign_flip = np.nonzero((gap[:-1] > 0.0) & (gap[1:] < 0.0))[0]
    if len(sign_flip) == 0:
        return 8.0
    i = int(sign_flip[0])

    def f(t):
        return float(sample_at(traj, np.array([t]))[0, 0]) - edge

    crossing = brentq(f, traj.times[i], traj.times[i + 1], xtol=1e-12)
    return 0.98 * crossing


def white_dwarf(c_param: float = 0.3, eta_start: float = 1e-3) -> ProblemSpec:
    """Degenerate-star density profile with a square-root domain edge.

    The rhs is only defined while phi^2 stays above c_param; crossing
    that line raises DomainViolationError carrying the radius where it
    happened.  The default span ends just short of the first crossing
    for the default c_param (measured against the adaptive oracle).
    """
    if not 0.0 <= c_param <= 1.0:
        raise ValueError("c_param must lie in [0, 1]")
    if eta_start <= 0:
        raise ValueError("eta_start must be positive")
    c = c_param
    # roundoff slack keeps an exactly-on-edge profile (phi^2 = c) evaluable
    slack = 1e-13 * (1.0 + c)

    def radicand(t, x):
        rad = x[0] * x[0] - c
        if rad < 0.0:
            if rad < -slack:
                raise DomainViolationError(
                    f"phi^2 - c = {rad:.3e} went negative at eta = {t:.6g}",
                    t=t,
                    state=np.asarray(x),
                )
            rad = 0.0
        return rad

    def rhs(t, x):
        rad = radicand(t, x)
        return np.array([x[1], -rad * math.sqrt(rad) - 2.0 / t * x[1]])

    def jac(t, x):
        rad = radicand(t, x)
        return np.array([[0.0, 1.0], [-3.0 * x[0] * math.sqrt(rad), -2.0 / t]])

    lead = (1.0 - c) ** 1.5
    phi0 = 1.0 - lead * eta_start**2 / 6.0
    dphi0 = -lead * eta_start / 3.0
    tf = _white_dwarf_edge(c, eta_start, np.array([phi0, dphi0]))
    return ProblemSpec(
        name="white-dwarf",
        system=OdeSystem(dim=2, rhs=rhs, jac=jac, name="white-dwarf"),
        x0=np.array([phi0, dphi0]),
        t0=eta_start,
        tf=tf,
        lvim_defaults=SolverConfig(n_basis=5, dt=0.1, tol=1e-10),
        rk_defaults=_ORACLE_DEFAULTS,
        state_names=("phi", "phi_prime"),
        notes=f"series start at eta = {eta_start:g}, c = {c:g}",
    )


def mathieu(delta: float = 0.5, epsilon: float = 0.1) -> ProblemSpec:
    """Parametrically forced linear oscillator."""

    def rhs(t, x):
        return np.array([x[1], -(delta - epsilon * math.cos(t)) * x[0]])

    def jac(t, x):
        return np.array([[0.0, 1.0], [-(delta - epsilon * math.cos(t)), 0.0]])

    return ProblemSpec(
        name="mathieu",
        system=OdeSystem(dim=2, rhs=rhs, jac=jac, name="mathieu"),
        x0=np.array([1.0, 0.0]),
        t0=0.0,
        tf=100.0,
        lvim_defaults=SolverConfig(n_basis=5, dt=0.5, tol=1e-10),
        rk_defaults=_ORACLE_DEFAULTS,
        state_names=("x", "x_dot"),
        notes=f"delta = {delta:g}, epsilon = {epsilon:g}",
    )


def pendulum(g_over_l: float = 1.0) -> ProblemSpec:
    """Rigid pendulum released nearly inverted."""
    if g_over_l <= 0:
        raise ValueError("g_over_l must be positive")
    w = g_over_l

    def rhs(t, x):
        return np.array([x[1], -w * math.sin(x[0])])

    def jac(t, x):
        return np.array([[0.0, 1.0], [-w * math.cos(x[0]), 0.0]])

    return ProblemSpec(
        name="pendulum",
        system=OdeSystem(dim=2, rhs=rhs, jac=jac, name="pendulum"),
        x0=np.array([3.1329, 0.0]),
        t0=0.0,
        tf=50.0,
        lvim_defaults=SolverConfig(n_basis=5, dt=0.1, tol=1e-10),
        rk_defaults=_ORACLE_DEFAULTS,
        state_names=("theta", "theta_dot"),
        notes=f"g/l = {g_over_l:g}",
    )


def _refine_crossing(config: SolverConfig, t_grid, thdot, i: int):
    """Root of the velocity between grid points i and i+1 by local interpolation."""
    from scipy.optimize import brentq

    # join-deduplicated grid: segment k owns indices k*(m-1) .. k*(m-1)+m-1,
    # so the owning segment falls out of index arithmetic exactly
    m = config.n_basis
    lo = (i // (m - 1)) * (m - 1)
    times = t_grid[lo:lo + m]
    vals = thdot[lo:lo + m]
    if len(times) < m:
        f0, f1 = thdot[i], thdot[i + 1]
        return t_grid[i] + (t_grid[i + 1] - t_grid[i]) * f0 / (f0 - f1)
    grid = CollocationGrid(n_basis=m, t_start=float(times[0]),
                           t_len=float(times[-1] - times[0]))

    def f(t):
        return float(interpolate(grid, vals, float(t)))

    a, b = t_grid[i], t_grid[i + 1]
    fa, fb = f(a), f(b)
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    return brentq(f, a, b, xtol=1e-12)


def pendulum_frequency_sweep(amplitudes: Sequence[float]) -> np.ndarray:
    """(amplitude, frequency) rows for release-from-rest pendulum swings.

    The period is taken as the time of the first velocity zero with the
    angle back on the release side, refined on the local polynomial.
    Uses unit g/l and the pendulum's default solver settings.
    """
    spec = pendulum(1.0)
    cfg = spec.lvim_defaults
    out = []
    for amp in amplitudes:
        amp = float(amp)
        if not 0.0 < amp < math.pi:
            raise ValueError(f"amplitude {amp:g} outside (0, pi): no oscillation")
        chunk = 40.0
        t0, x = 0.0, np.array([amp, 0.0])
        period = None
        while period is None:
            traj = march(spec.system, t0, t0 + chunk, x, cfg)
            th, thd = traj.states[:, 0], traj.states[:, 1]
            for i in range(len(traj.times) - 1):
                if traj.times[i] == 0.0 and thd[i] == 0.0:
                    continue
                if thd[i] == 0.0 or thd[i] * thd[i + 1] > 0.0:
                    continue
                if th[i] + th[i + 1] <= 0.0:
                    continue
                period = _refine_crossing(cfg, traj.times, thd, i)
                break
            if period is None:
                t0, x = traj.times[-1], traj.states[-1]
                if t0 > 4000.0:
                    raise ConvergenceError(f"no period found for amplitude {amp:g} within t = 4000")
        out.append((amp, 2.0 * math.pi / period))
    return np.array(out)


BAR_LOAD_TYPES = ("dead", "perpendicular_follower", "tangent_follower")


def buckled_bar(load_type: str, load: float, alpha: float = 0.0) -> ProblemSpec:
    """Post-buckling rod bending in arc length, unit stiffness and length.

    The load direction follows the named convention: fixed for a dead
    load, or slaved to the tip angle alpha for the follower variants.
    alpha is a plain parameter here; the shooting layer is what makes
    it consistent with the tip rotation.
    """
    if load < 0:
        raise ValueError("load must be nonnegative")
    if load_type not in BAR_LOAD_TYPES:
        raise ValueError(f"load_type must be one of {BAR_LOAD_TYPES}")
    P, al = load, alpha

    if load_type == "dead":
        def rhs(t, x):
            return np.array([x[1], -P * math.sin(x[0])])

        def jac(t, x):
            return np.array([[0.0, 1.0], [-P * math.cos(x[0]), 0.0]])
    elif load_type == "perpendicular_follower":
        def rhs(t, x):
            return np.array([x[1], -P * math.cos(x[0] - al) * math.sin(x[0])])

        def jac(t, x):
            return np.array([[0.0, 1.0], [-P * math.cos(2.0 * x[0] - al), 0.0]])
    else:
        def rhs(t, x):
            return np.array([x[1], -P * math.sin(x[0] - al) * math.sin(x[0])])

        def jac(t, x):
            return np.array([[0.0, 1.0], [-P * math.sin(2.0 * x[0] - al), 0.0]])

    return ProblemSpec(
        name="buckled-bar",
        system=OdeSystem(dim=2, rhs=rhs, jac=jac, name=f"bar-{load_type}"),
        x0=np.array([0.0, 0.0]),
        t0=0.0,
        tf=1.0,
        lvim_defaults=SolverConfig(n_basis=7, dt=0.1, tol=1e-10),
        rk_defaults=_ORACLE_DEFAULTS,
        state_names=("theta", "theta_prime"),
        notes=f"{load_type} load P = {load:g}, alpha = {alpha:g}",
    )


# squared c/a ratios separating the three planar-curve families
_ELASTICA_SPLIT_SQ = (1.0, 1.651868, 2.0)


def elastica_regime(a: float, c: float) -> int:
    """Classify (a, c) into curve family 1, 2 or 3; boundaries are rejected."""
    if a <= 0 or c <= 0:
        raise ValueError("a and c must be positive")
    r2 = (c / a) ** 2
    if r2 < _ELASTICA_SPLIT_SQ[0]:
        return 1
    if _ELASTICA_SPLIT_SQ[0] < r2 < _ELASTICA_SPLIT_SQ[1]:
        return 2
    if _ELASTICA_SPLIT_SQ[1] < r2 < _ELASTICA_SPLIT_SQ[2]:
        return 3
    raise ValueError(f"(a, c) = ({a:g}, {c:g}) sits on or outside the family boundaries")


def elastica(a: float, c: float, x_margin: float = 1e-3) -> ProblemSpec:
    """Planar rod centerline as a single quadrature in x.

    The slope field blows up at |x| = c, so the span stops short of it
    by the relative margin.  The rhs never reads the state.
    """
    if c <= 0:
        raise ValueError("c must be positive")
    if not 0.0 < x_margin < 1.0:
        raise ValueError("x_margin must lie in (0, 1)")
    if 2.0 * a * a - c * c <= 0.0:
        raise ValueError("need c < a*sqrt(2) for a real slope field at x = 0")
    a2, c2 = a * a, c * c

    def rhs(t, x):
        if abs(t) >= c:
            raise DomainViolationError(
                f"|x| = {abs(t):.6g} reached the slope-field edge at c = {c:g}",
                t=t,
                state=np.asarray(x),
            )
        rad = (c2 - t * t) * (2.0 * a2 - c2 + t * t)
        if rad <= 0.0:
            raise DomainViolationError(
                f"radicand {rad:.3e} not positive at x = {t:.6g}", t=t, state=np.asarray(x)
            )
        return np.array([(a2 - c2 + t * t) / math.sqrt(rad)])

    def jac(t, x):
        return np.zeros((1, 1))

    try:
        notes = f"curve family {elastica_regime(a, c)}, a = {a:g}, c = {c:g}"
    except ValueError:
        notes = f"family boundary, a = {a:g}, c = {c:g}"
    return ProblemSpec(
        name="elastica",
        system=OdeSystem(dim=1, rhs=rhs, jac=jac, name="elastica"),
        x0=np.array([0.0]),
        t0=0.0,
        tf=c * (1.0 - x_margin),
        lvim_defaults=SolverConfig(n_basis=7, dt=0.12, tol=1e-10),
        rk_defaults=_ORACLE_DEFAULTS,
        state_names=("y",),
        notes=notes,
    )


def orbital_period(model: GravityModel, state: np.ndarray) -> float:
    """Two-body period of the osculating orbit at the given 6-state."""
    q, v = np.asarray(state[:3], dtype=float), np.asarray(state[3:], dtype=float)
    r = float(np.linalg.norm(q))
    v2 = float(v @ v)
    inv_a = 2.0 / r - v2 / model.mu
    if inv_a <= 0:
        raise ValueError("state is not on a closed orbit")
    a_sma = 1.0 / inv_a
    return 2.0 * math.pi * math.sqrt(a_sma**3 / model.mu)


_LEO_STATE = np.array([-0.3889e6, 7.7388e6, 0.6736e6, -3.5794e3, 0.0, 6.1997e3])


def leo(model: GravityModel) -> ProblemSpec:
    """Low orbit under the given gravity field, spanning one period.

    The update weights use the plain inverse-cube gradient at any field
    degree; the harmonic terms are small enough that the correction
    iteration does not need them.
    """
    eye = np.eye(3)

    def rhs(t, x):
        acc = gravity_accel(model, x[:3])
        return np.array([x[3], x[4], x[5], acc[0], acc[1], acc[2]])

    def jac(t, x):
        q = x[:3]
        r = math.sqrt(float(q @ q))
        qh = q / r
        grad = model.mu * (3.0 * np.outer(qh, qh) - eye) / r**3
        out = np.zeros((6, 6))
        out[:3, 3:] = eye
        out[3:, :3] = grad
        return out

    period = orbital_period(model, _LEO_STATE)
    return ProblemSpec(
        name="leo",
        system=OdeSystem(dim=6, rhs=rhs, jac=jac, name="leo"),
        x0=_LEO_STATE.copy(),
        t0=0.0,
        tf=period,
        lvim_defaults=SolverConfig(n_basis=26, dt=500.0, tol=1e-8, jacobian_mode="frozen"),
        rk_defaults=_ORACLE_DEFAULTS,
        state_names=("x", "y", "z", "vx", "vy", "vz"),
        notes=f"degree {model.degree} field, one period = {period:.6g} s",
    )
