"""Benchmark catalog: Hamiltonian systems with analytic derivative maps.

Every problem supplies the Hamiltonian, the first-order right-hand side
(dX/dt = grad_P H, dP/dt = -grad_X H), its analytic time derivative (the
second-order right-hand side used by ZDS), the conserved quantities to
monitor, and, where available, a closed-form solution or reference endpoint
values.  Second derivatives are hand-coded per problem so that call counting
stays meaningful; a finite-difference test suite cross-checks all of them.

States are body-space matrices of shape (I, K): K bodies in dimension I,
one column per body.  Scalar problems use (1, 1).  All numeric constants go
through the problem's precision backend so the same definitions run in
double or double-double arithmetic.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, NamedTuple

import numpy as np

from .numerics import NATIVE, Precision, cos as ncos, log as nlog, sin as nsin, sqrt as nsqrt

__all__ = [
    "HamiltonianProblem",
    "InvariantSpec",
    "ReferenceValue",
    "SingularityError",
    "make_mass_spring",
    "make_two_spring",
    "make_pendulum",
    "pendulum_period",
    "make_kepler",
    "lrl_scalar",
    "lrl_gradient",
    "project_lrl",
    "make_nbody",
    "make_three_body_eight",
    "make_outer_solar",
    "make_em_particle",
    "PROBLEM_NAMES",
    "build_problem",
]


class SingularityError(RuntimeError):
    """Evaluation hit a pole of the problem (collision, x1 = 0, ...)."""


class InvariantSpec(NamedTuple):
    name: str  # 'H', 'L' or 'A'
    evaluator: Callable  # (X, P) -> scalar or small vector


class ReferenceValue(NamedTuple):
    t: float
    quantity: str  # 'x' or 'p'
    value: object


@dataclass
class HamiltonianProblem:
    name: str
    dim: int  # I
    nbodies: int  # K
    x0: np.ndarray
    p0: np.ndarray
    separable: bool
    hamiltonian: Callable = field(repr=False, default=None)
    first_rhs: Callable = field(repr=False, default=None)
    second_rhs: Callable = field(repr=False, default=None)
    invariants: tuple = ()
    exact_solution: Callable | None = field(repr=False, default=None)
    reference_values: tuple = ()
    parameters: dict = field(default_factory=dict)
    precision: Precision = NATIVE


def _scalar_state(precision, value):
    return precision.asarray([[value]])


# ---------------------------------------------------------------------------
# mass-spring
# ---------------------------------------------------------------------------

def make_mass_spring(m=1.0, kappa=1.0, x0=1.0, p0=0.0, precision=NATIVE) -> HamiltonianProblem:
    """Linear one-dimensional oscillator, H = p^2/(2m) + kappa x^2/2."""
    if not (float(m) > 0 and float(kappa) > 0):
        raise ValueError("mass and stiffness must be positive")
    m_ = precision.real(m)
    k_ = precision.real(kappa)
    x0_ = precision.real(x0)
    p0_ = precision.real(p0)
    omega = nsqrt(k_ / m_)

    def hamiltonian(X, P):
        x, p = X[0, 0], P[0, 0]
        return p * p / (2 * m_) + k_ * x * x * 0.5

    def first_rhs(X, P):
        return P / m_, -(k_ * X)

    def second_rhs(X, P, DX, DP):
        return DP / m_, -(k_ * DX)

    def exact(t):
        c, s = ncos(t * omega), nsin(t * omega)
        x = x0_ * c + (p0_ / (m_ * omega)) * s
        p = p0_ * c - (m_ * omega * x0_) * s
        return precision.asarray([[x]]), precision.asarray([[p]])

    return HamiltonianProblem(
        name="mass_spring",
        dim=1,
        nbodies=1,
        x0=_scalar_state(precision, x0_),
        p0=_scalar_state(precision, p0_),
        separable=True,
        hamiltonian=hamiltonian,
        first_rhs=first_rhs,
        second_rhs=second_rhs,
        invariants=(InvariantSpec("H", hamiltonian),),
        exact_solution=exact,
        parameters={"m": m_, "kappa": k_, "omega": omega},
        precision=precision,
    )


# ---------------------------------------------------------------------------
# two springs, two masses
# ---------------------------------------------------------------------------

def make_two_spring(
    k1=1.0, k2=5.0, m1=2.0, m2=1.0, A=1.0, B=2.0, alpha1=None, alpha2=None,
    precision=NATIVE,
) -> HamiltonianProblem:
    """Two bodies chained by two springs; normal-mode closed-form solution.

    H = p1^2/(2 m1) + p2^2/(2 m2) + k1 x1^2/2 + k2 (x2 - x1)^2/2.
    The mode frequencies solve m1 m2 w^4 - (m1 k2 + m2 k1 + m2 k2) w^2 + k1 k2 = 0.
    """
    if not all(float(v) > 0 for v in (k1, k2, m1, m2)):
        raise ValueError("all two-spring parameters must be positive")
    pi = precision.pi()
    if alpha1 is None:
        alpha1 = pi / 2
    if alpha2 is None:
        alpha2 = -pi / 4
    k1_, k2_ = precision.real(k1), precision.real(k2)
    m1_, m2_ = precision.real(m1), precision.real(m2)
    A_, B_ = precision.real(A), precision.real(B)
    a1_, a2_ = precision.real(alpha1), precision.real(alpha2)

    b = m1_ * k2_ + m2_ * k1_ + m2_ * k2_
    disc = nsqrt(b * b - 4 * (m1_ * m2_) * (k1_ * k2_))
    w1 = nsqrt((b - disc) / (2 * m1_ * m2_))
    w2 = nsqrt((b + disc) / (2 * m1_ * m2_))
    if abs(float(w2 - w1)) < 1e-12 * abs(float(w2)):
        raise ValueError("degenerate two-spring configuration: w1 == w2")
    denom2 = k2_ - m2_ * w2 * w2
    if abs(float(denom2)) < 1e-12 * abs(float(k2_)):
        raise ValueError("degenerate two-spring configuration: k2 == m2 w2^2")
    c1 = (k1_ + k2_ - m1_ * w1 * w1) / k2_  # mode-1 amplitude ratio x2/x1
    c2 = k2_ / denom2  # mode-2 amplitude ratio x2/x1

    def hamiltonian(X, P):
        x1, x2 = X[0, 0], X[0, 1]
        p1, p2 = P[0, 0], P[0, 1]
        d = x2 - x1
        return p1 * p1 / (2 * m1_) + p2 * p2 / (2 * m2_) + k1_ * x1 * x1 * 0.5 + k2_ * d * d * 0.5

    def first_rhs(X, P):
        x1, x2 = X[0, 0], X[0, 1]
        DX = np.empty_like(X)
        DX[0, 0] = P[0, 0] / m1_
        DX[0, 1] = P[0, 1] / m2_
        DP = np.empty_like(P)
        DP[0, 0] = -(k1_ * x1 + k2_ * (x1 - x2))
        DP[0, 1] = -(k2_ * (x2 - x1))
        return DX, DP

    def second_rhs(X, P, DX, DP):
        SX = np.empty_like(X)
        SX[0, 0] = DP[0, 0] / m1_
        SX[0, 1] = DP[0, 1] / m2_
        SP = np.empty_like(P)
        SP[0, 0] = -(k1_ * DX[0, 0] + k2_ * (DX[0, 0] - DX[0, 1]))
        SP[0, 1] = -(k2_ * (DX[0, 1] - DX[0, 0]))
        return SX, SP

    def exact(t):
        ph1 = w1 * t + a1_
        ph2 = w2 * t + a2_
        c_1, s_1 = ncos(ph1), nsin(ph1)
        c_2, s_2 = ncos(ph2), nsin(ph2)
        x1 = A_ * c_1 + B_ * c_2
        x2 = A_ * c1 * c_1 + B_ * c2 * c_2
        p1 = -m1_ * (A_ * w1 * s_1 + B_ * w2 * s_2)
        p2 = -m2_ * (A_ * w1 * c1 * s_1 + B_ * w2 * c2 * s_2)
        return precision.asarray([[x1, x2]]), precision.asarray([[p1, p2]])

    X0, P0 = exact(precision.real(0))
    return HamiltonianProblem(
        name="two_spring",
        dim=1,
        nbodies=2,
        x0=X0,
        p0=P0,
        separable=True,
        hamiltonian=hamiltonian,
        first_rhs=first_rhs,
        second_rhs=second_rhs,
        invariants=(InvariantSpec("H", hamiltonian),),
        exact_solution=exact,
        parameters={"omega1": w1, "omega2": w2, "k1": k1_, "k2": k2_, "m1": m1_, "m2": m2_},
        precision=precision,
    )


# ---------------------------------------------------------------------------
# pendulum
# ---------------------------------------------------------------------------

_PENDULUM_REF_X = -0.2633498226088722
_PENDULUM_REF_P = -0.7189111241830892


def make_pendulum(m=1.0, g=1.0, length=1.0, x0=None, p0=0.0, precision=NATIVE) -> HamiltonianProblem:
    """Planar pendulum, H = p^2/(2 m l^2) + m g l (1 - cos x).

    For the standard setup (m = g = l = 1, x0 = pi/4, p0 = 0) the problem
    carries double-precision reference values of x and p at t = 100.
    """
    if not all(float(v) > 0 for v in (m, g, length)):
        raise ValueError("pendulum parameters must be positive")
    default_x0 = x0 is None
    if default_x0:
        x0 = precision.pi() / 4
    m_, g_, l_ = precision.real(m), precision.real(g), precision.real(length)
    ml2 = m_ * l_ * l_
    mgl = m_ * g_ * l_
    x0_, p0_ = precision.real(x0), precision.real(p0)

    def hamiltonian(X, P):
        x, p = X[0, 0], P[0, 0]
        return p * p / (2 * ml2) + mgl * (1 - ncos(x))

    def first_rhs(X, P):
        return P / ml2, -(mgl * np.sin(X))

    def second_rhs(X, P, DX, DP):
        return DP / ml2, -(mgl * np.cos(X) * DX)

    refs = ()
    if default_x0 and float(m_) == 1.0 and float(g_) == 1.0 and float(l_) == 1.0 and float(p0_) == 0.0:
        refs = (
            ReferenceValue(100.0, "x", _PENDULUM_REF_X),
            ReferenceValue(100.0, "p", _PENDULUM_REF_P),
        )

    return HamiltonianProblem(
        name="pendulum",
        dim=1,
        nbodies=1,
        x0=_scalar_state(precision, x0_),
        p0=_scalar_state(precision, p0_),
        separable=True,
        hamiltonian=hamiltonian,
        first_rhs=first_rhs,
        second_rhs=second_rhs,
        invariants=(InvariantSpec("H", hamiltonian),),
        reference_values=refs,
        parameters={"m": m_, "g": g_, "l": l_},
        precision=precision,
    )


def pendulum_period(m=1.0, g=1.0, length=1.0, modulus=None) -> float:
    """Oscillation period 4 sqrt(l/(m g)) K(modulus) via the arithmetic-geometric mean.

    K is the complete elliptic integral of the first kind; the AGM iteration
    converges quadratically, giving ~1e-15 relative accuracy in a few steps.
    """
    if modulus is None:
        modulus = math.sin(math.pi / 8)
    w = float(modulus)
    if not 0.0 <= w < 1.0:
        raise ValueError(f"modulus must lie in [0, 1), got {w}")
    a, b = 1.0, math.sqrt(1.0 - w * w)
    while abs(a - b) > 1e-17 * a:
        a, b = 0.5 * (a + b), math.sqrt(a * b)
    K = math.pi / (2.0 * a)
    return 4.0 * math.sqrt(float(length) / (float(m) * float(g))) * K


# ---------------------------------------------------------------------------
# Kepler
# ---------------------------------------------------------------------------

def make_kepler(x0=(0.4, 0.0), p0=(0.0, 2.0), precision=NATIVE) -> HamiltonianProblem:
    """Planar Kepler problem, H = |p|^2/2 - 1/|x|, with H, L and LRL invariants."""
    X0 = precision.asarray([[x0[0]], [x0[1]]])
    P0 = precision.asarray([[p0[0]], [p0[1]]])
    if float((X0 * X0).sum()) == 0.0:
        raise ValueError("Kepler initial position must be nonzero")

    def _r3(X):
        r2 = X[0, 0] * X[0, 0] + X[1, 0] * X[1, 0]
        if float(r2) == 0.0:
            raise SingularityError("Kepler evaluation at |x| = 0")
        r = nsqrt(r2)
        return r, r2 * r

    def hamiltonian(X, P):
        r, _ = _r3(X)
        return (P[0, 0] * P[0, 0] + P[1, 0] * P[1, 0]) * 0.5 - 1 / r

    def first_rhs(X, P):
        _, r3 = _r3(X)
        return P.copy(), -(X / r3)

    def second_rhs(X, P, DX, DP):
        r, r3 = _r3(X)
        r5 = r3 * r * r
        dot = X[0, 0] * P[0, 0] + X[1, 0] * P[1, 0]
        SP = -(P / r3) + X * (3 * dot / r5)
        return DP.copy(), SP

    def angular_momentum(X, P):
        return P[1, 0] * X[0, 0] - P[0, 0] * X[1, 0]

    def lrl(X, P):
        return lrl_scalar(X[:, 0], P[:, 0])

    return HamiltonianProblem(
        name="kepler",
        dim=2,
        nbodies=1,
        x0=X0,
        p0=P0,
        separable=True,
        hamiltonian=hamiltonian,
        first_rhs=first_rhs,
        second_rhs=second_rhs,
        invariants=(
            InvariantSpec("H", hamiltonian),
            InvariantSpec("L", angular_momentum),
            InvariantSpec("A", lrl),
        ),
        precision=precision,
    )


def lrl_scalar(x, p):
    """Scalar Laplace-Runge-Lenz invariant: (p2 x1 - p1 x2)(p2 - p1) - (x1 + x2)/|x|."""
    r = nsqrt(x[0] * x[0] + x[1] * x[1])
    L = p[1] * x[0] - p[0] * x[1]
    return L * (p[1] - p[0]) - (x[0] + x[1]) / r


def lrl_gradient(x, p):
    """Exact phase-space gradient of the scalar LRL invariant.

    Returns (d/dx1, d/dx2, d/dp1, d/dp2).  Validated against central finite
    differences of :func:`lrl_scalar`.
    """
    r2 = x[0] * x[0] + x[1] * x[1]
    r3 = r2 * nsqrt(r2)
    dpm = p[1] - p[0]
    gx1 = p[1] * dpm - x[1] * (x[1] - x[0]) / r3
    gx2 = -(p[0] * dpm) - x[0] * (x[0] - x[1]) / r3
    gp1 = 2 * x[1] * p[0] - x[0] * p[1] - x[1] * p[1]
    gp2 = 2 * x[0] * p[1] - x[0] * p[0] - x[1] * p[0]
    return gx1, gx2, gp1, gp2


def project_lrl(X, P, R0):
    """One first-order projection step onto the manifold lrl_scalar = R0.

    Moves (x, p) along -lambda grad(R) with lambda = (R - R0)/|grad R|^2,
    shrinking |R - R0| quadratically when the deviation is small.  Skipped
    with a warning if the gradient nearly vanishes.
    """
    x, p = X[:, 0], P[:, 0]
    g = lrl_gradient(x, p)
    gnorm2 = g[0] * g[0] + g[1] * g[1] + g[2] * g[2] + g[3] * g[3]
    if float(gnorm2) < 1e-28:
        warnings.warn("LRL projection skipped: gradient nearly vanishes", stacklevel=2)
        return X, P
    lam = (lrl_scalar(x, p) - R0) / gnorm2
    Xn = X.copy()
    Pn = P.copy()
    Xn[0, 0] = x[0] - lam * g[0]
    Xn[1, 0] = x[1] - lam * g[1]
    Pn[0, 0] = p[0] - lam * g[2]
    Pn[1, 0] = p[1] - lam * g[3]
    return Xn, Pn


# ---------------------------------------------------------------------------
# n-body
# ---------------------------------------------------------------------------

def make_nbody(masses, G, X0, P0, name="nbody", precision=NATIVE) -> HamiltonianProblem:
    """Gravitational K-body problem in dimension I (2 or 3).

    H = sum_k |p^k|^2/(2 m_k) - sum_{k != l} G m_k m_l / (2 |x^k - x^l|).
    The angular momentum invariant is a scalar for I = 2 and the full
    3-vector for I = 3 (monitored in max-norm).
    """
    m = precision.asarray(masses)
    K = m.shape[0]
    if K < 2:
        raise ValueError("n-body problem needs at least two bodies")
    if any(float(v) <= 0 for v in m.flat):
        raise ValueError("masses must be positive")
    G_ = precision.real(G)
    X0 = precision.asarray(X0)
    P0 = precision.asarray(P0)
    I = X0.shape[0]
    if I not in (2, 3):
        raise ValueError("n-body supports I = 2 or 3")
    mm = m[:, None] * m[None, :]  # (K, K)
    one = precision.real(1)

    def _pair_geometry(X):
        diff = X[:, None, :] - X[:, :, None]  # diff[i, k, l] = x^l_i - x^k_i
        d2 = (diff * diff).sum(axis=0)  # (K, K)
        for k in range(K):
            for l in range(k + 1, K):
                if float(d2[k, l]) == 0.0:
                    raise SingularityError(f"bodies {k} and {l} collide")
        d2 = d2.copy()
        np.fill_diagonal(d2, one)
        return diff, d2

    def hamiltonian(X, P):
        kin = ((P * P).sum(axis=0) / (2 * m)).sum()
        pot = 0 * kin
        for k in range(K):
            for l in range(k + 1, K):
                dx = X[:, k] - X[:, l]
                pot = pot - G_ * m[k] * m[l] / nsqrt((dx * dx).sum())
        return kin + pot

    def first_rhs(X, P):
        diff, d2 = _pair_geometry(X)
        d = np.sqrt(d2)
        w = (G_ * mm) / (d2 * d)  # (K, K)
        np.fill_diagonal(w, 0 * one)
        DP = (w[None, :, :] * diff).sum(axis=2)  # (I, K)
        return P / m[None, :], DP

    def second_rhs(X, P, DX, DP):
        diff, d2 = _pair_geometry(X)
        d = np.sqrt(d2)
        d3 = d2 * d
        vdiff = DX[:, None, :] - DX[:, :, None]
        w3 = (G_ * mm) / d3
        np.fill_diagonal(w3, 0 * one)
        inner = (diff * vdiff).sum(axis=0)  # <u, v> per pair
        w5 = 3 * (G_ * mm) * inner / (d3 * d2)
        np.fill_diagonal(w5, 0 * one)
        SP = (w3[None, :, :] * vdiff - w5[None, :, :] * diff).sum(axis=2)
        return DP / m[None, :], SP

    if I == 2:
        def angular_momentum(X, P):
            return (X[0, :] * P[1, :] - X[1, :] * P[0, :]).sum()
    else:
        def angular_momentum(X, P):
            lx = (X[1, :] * P[2, :] - X[2, :] * P[1, :]).sum()
            ly = (X[2, :] * P[0, :] - X[0, :] * P[2, :]).sum()
            lz = (X[0, :] * P[1, :] - X[1, :] * P[0, :]).sum()
            out = np.empty(3, dtype=X.dtype)
            out[0], out[1], out[2] = lx, ly, lz
            return out

    return HamiltonianProblem(
        name=name,
        dim=I,
        nbodies=K,
        x0=X0,
        p0=P0,
        separable=True,
        hamiltonian=hamiltonian,
        first_rhs=first_rhs,
        second_rhs=second_rhs,
        invariants=(InvariantSpec("H", hamiltonian), InvariantSpec("L", angular_momentum)),
        parameters={"masses": m, "G": G_},
        precision=precision,
    )


def make_three_body_eight(precision=NATIVE) -> HamiltonianProblem:
    """Equal-mass planar three-body problem on the figure-eight orbit.

    Period T_p = 6.32591401228; total linear momentum and angular momentum
    both vanish at t = 0.
    """
    X0 = [
        ["0.97000436", "-0.97000436", "0"],
        ["-0.24308753", "0.24308753", "0"],
    ]
    P0 = [
        ["0.466203685", "0.466203685", "-0.93240737"],
        ["0.43236573", "0.43236573", "-0.86473146"],
    ]
    prob = make_nbody([1, 1, 1], 1, X0, P0, name="three_body_eight", precision=precision)
    prob.parameters["period"] = 6.32591401228
    return prob


_OUTER_SOLAR = [
    # name, mass (solar masses), position (au), velocity (au/day)
    ("sun", "1.00000597682", ("0", "0", "0"), ("0", "0", "0")),
    ("jupiter", "9.547861040430e-04",
     ("-3.5023653", "-3.8169847", "-1.5507963"),
     ("0.00565429", "-0.00412490", "-0.00190589")),
    ("saturn", "2.855837331510e-04",
     ("9.0755314", "-3.0458353", "-1.6483708"),
     ("0.00168318", "0.00483525", "0.00192462")),
    ("uranus", "4.37273164546e-05",
     ("8.3101420", "-16.2901086", "-7.2521278"),
     ("0.00354178", "0.00137102", "0.00055029")),
    ("neptune", "5.17759138449e-05",
     ("11.4707666", "-25.7294829", "-10.8169456"),
     ("0.00288930", "0.00114527", "0.00039677")),
    ("pluto", Fraction(10, 13 * 10**8),
     ("-15.5387357", "-25.2225594", "-3.1902382"),
     ("0.00276725", "-0.00170702", "-0.00136504")),
]

OUTER_SOLAR_G = "2.95912208286e-04"


def make_outer_solar(precision=NATIVE) -> HamiltonianProblem:
    """Sun plus the five outer bodies; au / day / solar-mass units, momenta = m v."""
    masses = [row[1] for row in _OUTER_SOLAR]
    X0 = [[row[2][i] for row in _OUTER_SOLAR] for i in range(3)]
    m_ = [precision.real(v) for v in masses]
    V0 = [[precision.real(row[3][i]) for row in _OUTER_SOLAR] for i in range(3)]
    P0 = np.empty((3, len(m_)), dtype=precision.dtype)
    for i in range(3):
        for k in range(len(m_)):
            P0[i, k] = m_[k] * V0[i][k]
    prob = make_nbody(masses, OUTER_SOLAR_G, X0, P0, name="outer_solar", precision=precision)
    prob.parameters["bodies"] = tuple(row[0] for row in _OUTER_SOLAR)
    return prob


# ---------------------------------------------------------------------------
# charged particle in a static electromagnetic field
# ---------------------------------------------------------------------------

def _mv(M, v):
    # (3,3) @ (3,) for either dtype
    return (M * v[None, :]).sum(axis=1)


def make_em_particle(variant="scb", m=1.0, e=1.0, x0=None, p0=None, precision=NATIVE) -> HamiltonianProblem:
    """Charged particle with H = |p - e A(x)|^2/(2m) + e phi(x); non-separable.

    Variants:

    * ``scb`` -- smooth pseudo-2D potentials phi = -1/(0.1 + |x|),
      A = (0, 1000 x1, 0); defaults x0 = (1, 0, 0), p0 = (0, 101, 0).
    * ``challenging`` -- trigonometric electrostatic potential and a magnetic
      potential (r^2, r^2 x2/x1, -2 log(1 + r^2)) singular at x1 = 0;
      defaults x0 = (0.5, -0.25, -0.25), p0 = (0, 0, -1).

    Both variants are static (the explicit time derivative of A vanishes).
    """
    if variant not in ("scb", "challenging"):
        raise ValueError(f"unknown EM variant {variant!r}")
    m_ = precision.real(m)
    e_ = precision.real(e)
    zero = precision.real(0)
    one = precision.real(1)

    if variant == "scb":
        if x0 is None:
            x0 = (1, 0, 0)
        if p0 is None:
            p0 = (0, 101, 0)
        soft = precision.real("0.1")
        big = precision.real(1000)

        def phi(x):
            r = nsqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])
            return -(1 / (soft + r))

        def grad_phi(x):
            r = nsqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])
            c = 1 / (r * (soft + r) * (soft + r))
            return np.array([x[0] * c, x[1] * c, x[2] * c], dtype=x.dtype)

        def hess_phi(x):
            r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2]
            r = nsqrt(r2)
            sr = soft + r
            diag = 1 / (r * sr * sr)
            mix = 1 / (r2 * r * sr * sr) + 2 / (r2 * sr * sr * sr)
            H = np.empty((3, 3), dtype=x.dtype)
            for i in range(3):
                for j in range(3):
                    H[i, j] = (diag if i == j else zero) - x[i] * x[j] * mix
            return H

        def vec_A(x):
            return np.array([zero, big * x[0], zero], dtype=x.dtype)

        def jac_A(x):
            J = np.empty((3, 3), dtype=x.dtype)
            J[...] = zero
            J[1, 0] = big
            return J

        def hess_A(x):
            H = np.empty((3, 3, 3), dtype=x.dtype)
            H[...] = zero
            return H

    else:
        if x0 is None:
            x0 = (0.5, -0.25, -0.25)
        if p0 is None:
            p0 = (0, 0, -1)

        def _trig(x):
            s1, c1 = nsin(x[0]), ncos(x[0])
            s2, c2 = nsin(x[1]), ncos(x[1])
            s3, c3 = nsin(x[2]), ncos(x[2])
            return s1, c1, s2, c2, s3, c3

        def phi(x):
            s1, c1, s2, c2, s3, c3 = _trig(x)
            return 2 * c1 * c1 + s1 * s1 * (s2 * c2 + s3 * c3)

        def grad_phi(x):
            s1, c1, s2, c2, s3, c3 = _trig(x)
            g = s2 * c2 + s3 * c3
            return np.array(
                [2 * s1 * c1 * (g - 2), s1 * s1 * (c2 * c2 - s2 * s2), s1 * s1 * (c3 * c3 - s3 * s3)],
                dtype=x.dtype,
            )

        def hess_phi(x):
            s1, c1, s2, c2, s3, c3 = _trig(x)
            g = s2 * c2 + s3 * c3
            sin2x1 = 2 * s1 * c1
            cos2x2 = c2 * c2 - s2 * s2
            cos2x3 = c3 * c3 - s3 * s3
            H = np.empty((3, 3), dtype=x.dtype)
            H[0, 0] = 2 * (c1 * c1 - s1 * s1) * (g - 2)
            H[0, 1] = H[1, 0] = sin2x1 * cos2x2
            H[0, 2] = H[2, 0] = sin2x1 * cos2x3
            H[1, 1] = -2 * s1 * s1 * (2 * s2 * c2)
            H[1, 2] = H[2, 1] = zero
            H[2, 2] = -2 * s1 * s1 * (2 * s3 * c3)
            return H

        def _q(x):
            if float(x[0]) == 0.0:
                raise SingularityError("EM challenging potential at x1 = 0")
            return x[0] * x[0] + x[1] * x[1] + x[2] * x[2]

        def vec_A(x):
            q = _q(x)
            return np.array([q, q * x[1] / x[0], -2 * nlog(1 + q)], dtype=x.dtype)

        def jac_A(x):
            q = _q(x)
            x1sq = x[0] * x[0]
            tail = x[1] * x[1] + x[2] * x[2]
            c = -4 / (1 + q)
            J = np.empty((3, 3), dtype=x.dtype)
            J[0, 0], J[0, 1], J[0, 2] = 2 * x[0], 2 * x[1], 2 * x[2]
            J[1, 0] = x[1] - x[1] * tail / x1sq
            J[1, 1] = (q + 2 * x[1] * x[1]) / x[0]
            J[1, 2] = 2 * x[1] * x[2] / x[0]
            J[2, 0], J[2, 1], J[2, 2] = c * x[0], c * x[1], c * x[2]
            return J

        def hess_A(x):
            q = _q(x)
            x1sq = x[0] * x[0]
            H = np.empty((3, 3, 3), dtype=x.dtype)
            # A1 = r^2
            H[0, ...] = zero
            H[0, 0, 0] = H[0, 1, 1] = H[0, 2, 2] = 2 * one
            # A2 = r^2 x2 / x1
            tail = x[1] * x[1] + x[2] * x[2]
            H[1, 0, 0] = 2 * x[1] * tail / (x1sq * x[0])
            H[1, 0, 1] = H[1, 1, 0] = one - (3 * x[1] * x[1] + x[2] * x[2]) / x1sq
            H[1, 0, 2] = H[1, 2, 0] = -2 * x[1] * x[2] / x1sq
            H[1, 1, 1] = 6 * x[1] / x[0]
            H[1, 1, 2] = H[1, 2, 1] = 2 * x[2] / x[0]
            H[1, 2, 2] = 2 * x[1] / x[0]
            # A3 = -2 log(1 + r^2)
            u = 1 + q
            a = -4 / u
            b = 8 / (u * u)
            for i in range(3):
                for j in range(3):
                    H[2, i, j] = (a if i == j else zero) + b * x[i] * x[j]
            return H

    X0 = precision.asarray([[x0[0]], [x0[1]], [x0[2]]])
    P0 = precision.asarray([[p0[0]], [p0[1]], [p0[2]]])

    def hamiltonian(X, P):
        x = X[:, 0]
        v = P[:, 0] - e_ * vec_A(x)
        return (v * v).sum() / (2 * m_) + e_ * phi(x)

    def first_rhs(X, P):
        x = X[:, 0]
        dx = (P[:, 0] - e_ * vec_A(x)) / m_
        J = jac_A(x)
        dp = e_ * (_mv(J.T, dx) - grad_phi(x))
        return dx[:, None], dp[:, None]

    def second_rhs(X, P, DX, DP):
        x = X[:, 0]
        dx = DX[:, 0]
        J = jac_A(x)
        sx = (DP[:, 0] - e_ * _mv(J, dx)) / m_
        HA = hess_A(x)
        w = np.empty(3, dtype=x.dtype)
        for ell in range(3):
            acc = zero
            for i in range(3):
                for j in range(3):
                    acc = acc + HA[j, ell, i] * dx[i] * dx[j]
            w[ell] = acc
        sp = e_ * (_mv(J.T, sx) + w - _mv(hess_phi(x), dx))
        return sx[:, None], sp[:, None]

    return HamiltonianProblem(
        name=f"em_{variant}",
        dim=3,
        nbodies=1,
        x0=X0,
        p0=P0,
        separable=False,
        hamiltonian=hamiltonian,
        first_rhs=first_rhs,
        second_rhs=second_rhs,
        invariants=(InvariantSpec("H", hamiltonian),),
        parameters={"m": m_, "e": e_, "variant": variant},
        precision=precision,
    )


# ---------------------------------------------------------------------------
# catalog
# ---------------------------------------------------------------------------

_BUILDERS = {
    "mass_spring": make_mass_spring,
    "two_spring": make_two_spring,
    "pendulum": make_pendulum,
    "kepler": make_kepler,
    "three_body_eight": make_three_body_eight,
    "outer_solar": make_outer_solar,
    "em_scb": lambda precision=NATIVE: make_em_particle("scb", precision=precision),
    "em_challenging": lambda precision=NATIVE: make_em_particle("challenging", precision=precision),
}

PROBLEM_NAMES = tuple(_BUILDERS)


def build_problem(name: str, precision=NATIVE) -> HamiltonianProblem:
    """Instantiate a catalog problem with its standard parameters."""
    try:
        builder = _BUILDERS[name]
    except KeyError:
        raise ValueError(f"unknown problem {name!r}; choose from {PROBLEM_NAMES}") from None
    return builder(precision=precision)
