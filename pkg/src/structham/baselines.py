"""Classical symplectic baselines: Stormer-Verlet raised by composition.

The separable path is the standard kick-drift-kick leapfrog.  The
non-separable path is the symmetric semi-implicit form (two adjoint
half-maps, each implicit relation solved by plain fixed point, for parity
with the structural solver's accounting).  Orders 4, 6 and 8 come from the
Yoshida triple jump applied recursively, so stage counts are 3, 9 and 27.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .blocksolver import DivergenceError, NonConvergenceError, Trajectory
from .numerics import all_finite, max_abs
from .secoeff import ConfigurationError

__all__ = [
    "CompositionSchedule",
    "yoshida_schedule",
    "sv_step_separable",
    "sv_step_nonseparable",
    "integrate_sv",
    "compose_steps",
]


@dataclass(frozen=True)
class CompositionSchedule:
    order: int
    gammas: tuple


def yoshida_schedule(order: int) -> CompositionSchedule:
    """Triple-jump sub-step fractions for even orders 2..8.

    Order 2k+2 replays the order-2k schedule with weights
    g1 = 1/(2 - 2**(1/(2k+1))), g2 = 1 - 2 g1, g1; fractions sum to 1 and the
    order-4 jump satisfies sum of cubes = 0.
    """
    if order == 2:
        return CompositionSchedule(2, (1.0,))
    if order not in (4, 6, 8):
        raise ConfigurationError(f"unsupported composition order {order}; use 2, 4, 6 or 8")
    inner = yoshida_schedule(order - 2)
    k = (order - 2) // 2
    g1 = 1.0 / (2.0 - 2.0 ** (1.0 / (2 * k + 1)))
    g2 = 1.0 - 2.0 * g1
    gammas = (
        tuple(g1 * g for g in inner.gammas)
        + tuple(g2 * g for g in inner.gammas)
        + tuple(g1 * g for g in inner.gammas)
    )
    return CompositionSchedule(order, gammas)


def compose_steps(step, gammas, state, dt):
    """Apply a one-step map through a weighted sub-step schedule."""
    for g in gammas:
        state = step(state, g * dt)
    return state


def sv_step_separable(problem, X, P, dt):
    """Kick-drift-kick leapfrog for H = T(P) + V(X); symmetric and symplectic.

    Returns (X', P', rhs_calls).
    """
    _, F0 = problem.first_rhs(X, P)
    Ph = P + (0.5 * dt) * F0
    V, _ = problem.first_rhs(X, Ph)
    Xn = X + dt * V
    _, F1 = problem.first_rhs(Xn, Ph)
    Pn = Ph + (0.5 * dt) * F1
    return Xn, Pn, 3


def _fixed_point(update, start, tol, max_iter, tag):
    y = start
    iters = 0
    while True:
        y_new = update(y)
        iters += 1
        if not all_finite(y_new):
            raise DivergenceError(f"non-finite value in SV {tag}")
        d = max_abs(y_new - y)
        y = y_new
        if d <= tol:
            return y, iters
        if iters >= max_iter:
            raise NonConvergenceError(
                f"SV {tag} fixed point not converged after {max_iter} iterations "
                f"(last change {d:.3e})",
                residual=d,
            )


def sv_step_nonseparable(problem, X, P, dt, tol, max_iter=100):
    """Symmetric semi-implicit Stormer-Verlet step for general H(X, P).

    P_half solves  P_half = P + (dt/2) rhs_p(X, P_half)          (implicit),
    X' solves      X' = X + (dt/2)[rhs_x(X, P_half) + rhs_x(X', P_half)],
    then the mirrored momentum update is explicit.  For separable problems
    both implicit relations collapse and the step equals the leapfrog.

    Returns (X', P', fixed_point_iters, rhs_calls).
    """
    calls = 0

    def kick(y):
        nonlocal calls
        _, Fp = problem.first_rhs(X, y)
        calls += 1
        return P + (0.5 * dt) * Fp

    Ph, it1 = _fixed_point(kick, P, tol, max_iter, "momentum half-step")

    A0, _ = problem.first_rhs(X, Ph)
    calls += 1

    def drift(y):
        nonlocal calls
        Vn, _ = problem.first_rhs(y, Ph)
        calls += 1
        return X + (0.5 * dt) * (A0 + Vn)

    Xn, it2 = _fixed_point(drift, X, tol, max_iter, "position half-step")

    _, Fp = problem.first_rhs(Xn, Ph)
    calls += 1
    Pn = Ph + (0.5 * dt) * Fp
    return Xn, Pn, it1 + it2, calls


def integrate_sv(
    problem,
    order: int,
    N: int,
    T: float,
    tol: float | None = None,
    max_iter: int = 100,
    observer=None,
    store_every: int = 1,
) -> Trajectory:
    """Composed Stormer-Verlet integration over [0, T] in N steps.

    Counters match the harness accounting: total_sweeps accumulates the
    fixed-point iterations of the implicit sub-steps (zero on the separable
    path) and pe1_calls the right-hand-side evaluations.
    """
    schedule = yoshida_schedule(order)
    if N < 1 or T <= 0:
        raise ConfigurationError(f"need N >= 1 and T > 0, got N={N}, T={T}")
    precision = problem.precision
    if tol is None:
        tol = precision.default_tol
    dt = float(T) / N

    X, P = problem.x0, problem.p0
    traj = Trajectory(n_steps=N, r_block=0)

    def record(idx, Xv, Pv):
        t = idx * dt
        if observer is not None:
            observer(idx, precision.real(idx) * precision.real(dt), Xv, Pv)
        if idx % store_every == 0 or idx == N:
            traj.times.append(t)
            traj.xs.append(Xv.copy())
            traj.ps.append(Pv.copy())

    record(0, X, P)
    # overflow in a diverging sub-step is handled by the finiteness checks
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for n in range(1, N + 1):
            try:
                for g in schedule.gammas:
                    h = g * dt
                    if problem.separable:
                        X, P, calls = sv_step_separable(problem, X, P, h)
                    else:
                        X, P, iters, calls = sv_step_nonseparable(problem, X, P, h, tol, max_iter)
                        traj.total_sweeps += iters
                    traj.pe1_calls += calls
                if not (all_finite(X) and all_finite(P)):
                    raise DivergenceError("non-finite state in SV step")
            except (NonConvergenceError, DivergenceError) as err:
                raise type(err)(f"SV step {n}: {err}") from err
            record(n, X, P)
    return traj
