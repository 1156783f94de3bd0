"""Spherical-harmonic gravity field: file loading, acceleration, potential.

The acceleration is evaluated with the recursive V/W formulation in
body-fixed Cartesian coordinates (no frame rotation is applied). The
potential is evaluated through fully normalized associated Legendre
functions; it exists so the acceleration can be cross-checked against
a finite-difference gradient computed by an unrelated code path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Dict, Tuple

import numpy as np

from .errors import DomainViolationError

__all__ = [
    "GravityModel",
    "load_gravity_model",
    "bundled_gravity_path",
    "gravity_accel",
    "gravity_potential",
]


def _denorm_factor(n: int, m: int) -> float:
    # ratio between fully normalized and unnormalized coefficients
    k = (2 * n + 1) if m == 0 else (4 * n + 2)
    return math.sqrt(k * math.factorial(n - m) / math.factorial(n + m))


@dataclass(frozen=True)
class GravityModel:
    """Immutable gravity field truncated at a maximum degree.

    mu is the gravitational parameter in m^3/s^2, r_ref the reference
    radius in meters.  coeffs maps (degree, order) to a fully
    normalized (Cbar, Sbar) pair; absent entries are zero and the
    central (0, 0) term defaults to 1.
    """

    mu: float
    r_ref: float
    degree: int
    coeffs: Dict[Tuple[int, int], Tuple[float, float]]
    _c: np.ndarray = field(init=False, repr=False, compare=False)
    _s: np.ndarray = field(init=False, repr=False, compare=False)
    _cbar: np.ndarray = field(init=False, repr=False, compare=False)
    _sbar: np.ndarray = field(init=False, repr=False, compare=False)
    _c_rows: tuple = field(init=False, repr=False, compare=False)
    _s_rows: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.mu <= 0:
            raise ValueError("mu must be positive")
        if self.r_ref <= 0:
            raise ValueError("r_ref must be positive")
        if self.degree < 0:
            raise ValueError("degree must be >= 0")
        for (n, m), (cb, sb) in self.coeffs.items():
            if not (0 <= m <= n <= self.degree):
                raise ValueError(f"coefficient index ({n},{m}) out of range")
            if not (math.isfinite(cb) and math.isfinite(sb)):
                raise ValueError(f"non-finite coefficient at ({n},{m})")
        if (0, 0) in self.coeffs:
            cb, sb = self.coeffs[(0, 0)]
            if cb != 1.0 or sb != 0.0:
                raise ValueError("(0,0) coefficient must be (1, 0)")
        nmax = self.degree
        cbar = np.zeros((nmax + 1, nmax + 1))
        sbar = np.zeros((nmax + 1, nmax + 1))
        cbar[0, 0] = 1.0
        for (n, m), (cb, sb) in self.coeffs.items():
            cbar[n, m] = cb
            sbar[n, m] = sb
        c = np.zeros_like(cbar)
        s = np.zeros_like(sbar)
        for n in range(nmax + 1):
            for m in range(n + 1):
                f = _denorm_factor(n, m)
                c[n, m] = cbar[n, m] * f
                s[n, m] = sbar[n, m] * f
        for arr in (cbar, sbar, c, s):
            arr.setflags(write=False)
        object.__setattr__(self, "_cbar", cbar)
        object.__setattr__(self, "_sbar", sbar)
        object.__setattr__(self, "_c", c)
        object.__setattr__(self, "_s", s)
        # plain-float copies keep the evaluation loop off numpy scalars
        object.__setattr__(
            self, "_c_rows", tuple(tuple(float(v) for v in c[n, : n + 1]) for n in range(nmax + 1))
        )
        object.__setattr__(
            self, "_s_rows", tuple(tuple(float(v) for v in s[n, : n + 1]) for n in range(nmax + 1))
        )

    def truncate(self, degree: int) -> "GravityModel":
        """Return a copy keeping only terms of degree <= the given degree."""
        if degree < 0:
            raise ValueError("degree must be >= 0")
        degree = min(degree, self.degree)
        kept = {k: v for k, v in self.coeffs.items() if k[0] <= degree}
        return GravityModel(self.mu, self.r_ref, degree, kept)


def load_gravity_model(path) -> GravityModel:
    """Parse a coefficient file.

    Line one: ``mu <value> r_ref <value> degree <n>``.  Every further
    non-comment line: ``n m Cbar Sbar`` with fully normalized values.
    ``#`` starts a comment, either full-line or trailing.
    """
    header = None
    coeffs: Dict[Tuple[int, int], Tuple[float, float]] = {}
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if header is None:
                parts = line.split()
                if len(parts) != 6 or parts[0] != "mu" or parts[2] != "r_ref" or parts[4] != "degree":
                    raise ValueError(f"malformed header line: {raw.strip()!r}")
                header = (float(parts[1]), float(parts[3]), int(parts[5]))
                continue
            parts = line.split()
            if len(parts) != 4:
                raise ValueError(f"malformed coefficient line: {raw.strip()!r}")
            n, m = int(parts[0]), int(parts[1])
            if (n, m) in coeffs:
                raise ValueError(f"duplicate coefficient ({n},{m})")
            coeffs[(n, m)] = (float(parts[2]), float(parts[3]))
    if header is None:
        raise ValueError("empty gravity file")
    mu, r_ref, degree = header
    return GravityModel(mu=mu, r_ref=r_ref, degree=degree, coeffs=coeffs)


def bundled_gravity_path(name: str = "egm_test.txt"):
    """Path to a coefficient file shipped with the package."""
    p = resources.files("lvim").joinpath("data", name)
    if not p.is_file():
        raise FileNotFoundError(f"no bundled gravity file named {name!r}")
    return p


def gravity_accel(model: GravityModel, q) -> np.ndarray:
    """Acceleration -dU/dq at body-fixed position q (meters).

    Positions inside 0.9*r_ref are rejected: the expansion diverges
    below the reference sphere and a trajectory that deep is a crash,
    not an orbit.  Complex q is accepted and propagated analytically
    (the guard uses the real part), which supports complex-step
    derivative checks.
    """
    q = np.asarray(q)
    if q.shape != (3,):
        raise ValueError("position must be a 3-vector")
    if np.iscomplexobj(q):
        x, y, z = complex(q[0]), complex(q[1]), complex(q[2])
    else:
        x, y, z = float(q[0]), float(q[1]), float(q[2])
    r_real = math.sqrt(float(np.real(x)) ** 2 + float(np.real(y)) ** 2 + float(np.real(z)) ** 2)
    if not r_real > 0.9 * model.r_ref:
        raise DomainViolationError(
            f"|q| = {r_real:.6g} m is not above 0.9 * r_ref = {0.9 * model.r_ref:.6g} m",
            state=np.asarray(q),
        )
    nmax = model.degree
    R = model.r_ref
    r2 = x * x + y * y + z * z
    # scaled coordinates shared by every recursion step
    xf = x * R / r2
    yf = y * R / r2
    zf = z * R / r2
    rf = R * R / r2

    size = nmax + 2
    V = [[0.0] * size for _ in range(size)]
    W = [[0.0] * size for _ in range(size)]
    V[0][0] = R / r2 ** 0.5
    for m in range(1, size):
        V[m][m] = (2 * m - 1) * (xf * V[m - 1][m - 1] - yf * W[m - 1][m - 1])
        W[m][m] = (2 * m - 1) * (xf * W[m - 1][m - 1] + yf * V[m - 1][m - 1])
    for m in range(size - 1):
        V[m + 1][m] = (2 * m + 1) * zf * V[m][m]
        W[m + 1][m] = (2 * m + 1) * zf * W[m][m]
        for n in range(m + 2, size):
            V[n][m] = ((2 * n - 1) * zf * V[n - 1][m] - (n + m - 1) * rf * V[n - 2][m]) / (n - m)
            W[n][m] = ((2 * n - 1) * zf * W[n - 1][m] - (n + m - 1) * rf * W[n - 2][m]) / (n - m)

    C, S = model._c_rows, model._s_rows
    ax = 0.0
    ay = 0.0
    az = 0.0
    for n in range(nmax + 1):
        for m in range(n + 1):
            c = C[n][m]
            s = S[n][m]
            if m == 0:
                ax += -c * V[n + 1][1]
                ay += -c * W[n + 1][1]
            else:
                fac = (n - m + 1) * (n - m + 2)
                ax += 0.5 * (
                    -c * V[n + 1][m + 1]
                    - s * W[n + 1][m + 1]
                    + fac * (c * V[n + 1][m - 1] + s * W[n + 1][m - 1])
                )
                ay += 0.5 * (
                    -c * W[n + 1][m + 1]
                    + s * V[n + 1][m + 1]
                    + fac * (-c * W[n + 1][m - 1] + s * V[n + 1][m - 1])
                )
            az += (n - m + 1) * (-c * V[n + 1][m] - s * W[n + 1][m])
    scale = model.mu / (R * R)
    return np.array([scale * ax, scale * ay, scale * az])


def gravity_potential(model: GravityModel, q) -> float:
    """Potential U such that the acceleration equals -grad U.

    Deliberately written with normalized Legendre recursions and
    explicit latitude/longitude angles rather than the V/W scheme, so
    a finite-difference gradient of this routine is an independent
    check on gravity_accel.
    """
    q = np.asarray(q, dtype=float)
    if q.shape != (3,):
        raise ValueError("position must be a 3-vector")
    x, y, z = q
    r = math.sqrt(x * x + y * y + z * z)
    if not r > 0.9 * model.r_ref:
        raise DomainViolationError(
            f"|q| = {r:.6g} m is not above 0.9 * r_ref = {0.9 * model.r_ref:.6g} m",
            state=q,
        )
    nmax = model.degree
    sphi = z / r
    cphi = math.sqrt(x * x + y * y) / r
    lam = math.atan2(y, x)

    # fully normalized associated Legendre values at sin(latitude)
    P = np.zeros((nmax + 1, nmax + 1))
    P[0, 0] = 1.0
    if nmax >= 1:
        P[1, 0] = math.sqrt(3.0) * sphi
        P[1, 1] = math.sqrt(3.0) * cphi
    for m in range(2, nmax + 1):
        P[m, m] = cphi * math.sqrt((2 * m + 1) / (2.0 * m)) * P[m - 1, m - 1]
    for m in range(0, nmax):
        if m + 1 <= nmax and m >= 1:
            P[m + 1, m] = math.sqrt(2 * m + 3.0) * sphi * P[m, m]
    for m in range(0, nmax + 1):
        for n in range(m + 2, nmax + 1):
            alpha = math.sqrt((2 * n - 1.0) * (2 * n + 1.0) / ((n - m) * (n + m)))
            beta = math.sqrt(
                (2 * n + 1.0) * (n + m - 1.0) * (n - m - 1.0) / ((n - m) * (n + m) * (2 * n - 3.0))
            )
            P[n, m] = alpha * sphi * P[n - 1, m] - beta * P[n - 2, m]

    Cb, Sb = model._cbar, model._sbar
    total = 0.0
    ratio = model.r_ref / r
    pw = 1.0
    for n in range(nmax + 1):
        inner = 0.0
        for m in range(n + 1):
            inner += P[n, m] * (Cb[n, m] * math.cos(m * lam) + Sb[n, m] * math.sin(m * lam))
        total += pw * inner
        pw *= ratio
    # sign puts the field on the physics convention: accel = -grad U
    return -model.mu / r * total
