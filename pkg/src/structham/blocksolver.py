"""Block fixed-point engine for the ZD/ZDS structural schemes.

One implicit solve advances the trajectory R steps at a time.  The unknowns
are the position and momentum blocks (values plus first, and for ZDS second,
derivative approximations at the R future nodes).  Each fixed-point sweep
alternates:

* a structural update -- new Z blocks from the coefficient table, pure
  linear algebra, no physics;
* a physical update -- derivative blocks refreshed from the problem's
  Hamiltonian right-hand sides, no discretization.

The x and p blocks use the same structural coefficients and couple only
through the physical equations, so their updates are independent within a
sweep.  State arrays live in body space: shape (I, K) for K bodies in
dimension I, with blocks stacked as (R, I, K).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numerics import NATIVE, Precision, all_finite, max_abs
from .secoeff import CoeffTable, ConfigurationError, Formulation, coeff_table

__all__ = [
    "SolverConfig",
    "IterStats",
    "BlockAnchor",
    "BlockState",
    "Trajectory",
    "NonConvergenceError",
    "DivergenceError",
    "make_anchor",
    "init_block",
    "se_update",
    "pe_update",
    "solve_block",
    "integrate",
]


class NonConvergenceError(RuntimeError):
    """Fixed point failed to meet the tolerance within the iteration cap."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class DivergenceError(RuntimeError):
    """Non-finite values or runaway growth during a block solve."""


@dataclass
class SolverConfig:
    tol: float | None = None  # None: precision default (1e-14 double, 1e-30 ddouble)
    max_iter: int = 200
    precision: Precision = NATIVE
    growth_limit: float = 1e6

    def resolved_tol(self) -> float:
        return self.precision.default_tol if self.tol is None else self.tol


@dataclass
class IterStats:
    """Fixed-point effort for one block: sweeps (excluding init) and PE calls."""

    iterations: int = 0
    pe1_calls: int = 0
    pe2_calls: int = 0

    def add(self, other: "IterStats") -> None:
        self.iterations += other.iterations
        self.pe1_calls += other.pe1_calls
        self.pe2_calls += other.pe2_calls


@dataclass
class BlockAnchor:
    """Known values at the block's entry node t_n (all body-space arrays)."""

    t: object
    Zx: np.ndarray
    Zp: np.ndarray
    Dx: np.ndarray
    Dp: np.ndarray
    Sx: np.ndarray | None = None
    Sp: np.ndarray | None = None


@dataclass
class BlockState:
    """The R future nodes of one block; arrays are (R, I, K)."""

    Zx: np.ndarray
    Zp: np.ndarray
    Dx: np.ndarray
    Dp: np.ndarray
    Sx: np.ndarray | None = None
    Sp: np.ndarray | None = None


def make_anchor(problem, t, X, P, formulation) -> BlockAnchor:
    """Anchor with derivatives computed from the physical equations at (X, P)."""
    form = Formulation.parse(formulation)
    Dx, Dp = problem.first_rhs(X, P)
    Sx = Sp = None
    if form is Formulation.ZDS:
        Sx, Sp = problem.second_rhs(X, P, Dx, Dp)
    return BlockAnchor(t=t, Zx=X, Zp=P, Dx=Dx, Dp=Dp, Sx=Sx, Sp=Sp)


def _stack(arrays) -> np.ndarray:
    out = np.empty((len(arrays),) + arrays[0].shape, dtype=arrays[0].dtype)
    for i, a in enumerate(arrays):
        out[i] = a
    return out


def init_block(anchor: BlockAnchor, problem, table: CoeffTable) -> BlockState:
    """Taylor predictor swept node by node, derivatives refreshed from the PE."""
    R = table.R
    dt = problem.precision.real(table.dt)
    second = table.has_second
    half_dt2 = dt * dt * 0.5 if second else None

    Zx, Zp, Dx, Dp = anchor.Zx, anchor.Zp, anchor.Dx, anchor.Dp
    Sx, Sp = anchor.Sx, anchor.Sp
    zx, zp, dx, dp = [], [], [], []
    sx, sp = [], []
    for r in range(R):
        if second:
            Zx = Zx + dt * Dx + half_dt2 * Sx
            Zp = Zp + dt * Dp + half_dt2 * Sp
        else:
            Zx = Zx + dt * Dx
            Zp = Zp + dt * Dp
        if not (all_finite(Zx) and all_finite(Zp)):
            raise DivergenceError(f"non-finite predictor value at block node {r + 1}")
        Dx, Dp = problem.first_rhs(Zx, Zp)
        if second:
            Sx, Sp = problem.second_rhs(Zx, Zp, Dx, Dp)
            sx.append(Sx)
            sp.append(Sp)
        zx.append(Zx)
        zp.append(Zp)
        dx.append(Dx)
        dp.append(Dp)
    return BlockState(
        Zx=_stack(zx),
        Zp=_stack(zp),
        Dx=_stack(dx),
        Dp=_stack(dp),
        Sx=_stack(sx) if second else None,
        Sp=_stack(sp) if second else None,
    )


def _block_matvec(A: np.ndarray, blk: np.ndarray) -> np.ndarray:
    # (R, R) x (R, I, K) -> (R, I, K), contraction over the block index
    if blk.dtype != object:
        return np.tensordot(A, blk, axes=(1, 0))
    R = A.shape[0]
    out = np.empty_like(blk)
    for r in range(R):
        acc = A[r, 0] * blk[0]
        for m in range(1, R):
            acc = acc + A[r, m] * blk[m]
        out[r] = acc
    return out


def _block_outer(vec: np.ndarray, value: np.ndarray) -> np.ndarray:
    # (R,) x (I, K) -> (R, I, K)
    return vec[:, None, None] * value[None, :, :]


def se_update(table: CoeffTable, anchor: BlockAnchor, state: BlockState):
    """New Z blocks from the structural equations (no physics evaluated).

    The x and p updates are independent; they may run concurrently but
    correctness does not rely on it.
    """
    def one(z0, d0, s0, Dblk, Sblk):
        acc = _block_outer(table.b_z, z0) + _block_outer(table.b_d, d0)
        acc = acc + _block_matvec(table.B_d, Dblk)
        if table.has_second:
            acc = acc + _block_outer(table.b_s, s0) + _block_matvec(table.B_s, Sblk)
        return -acc

    Zx_new = one(anchor.Zx, anchor.Dx, anchor.Sx, state.Dx, state.Sx)
    Zp_new = one(anchor.Zp, anchor.Dp, anchor.Sp, state.Dp, state.Sp)
    return Zx_new, Zp_new


def pe_update(problem, Zx_blk: np.ndarray, Zp_blk: np.ndarray, second: bool):
    """Derivative blocks refreshed node by node from the physical equations.

    Nodes are independent (parallelizable); returns the per-level call count R.
    """
    R = Zx_blk.shape[0]
    dx, dp, sx, sp = [], [], [], []
    for r in range(R):
        Dx, Dp = problem.first_rhs(Zx_blk[r], Zp_blk[r])
        dx.append(Dx)
        dp.append(Dp)
        if second:
            Sx, Sp = problem.second_rhs(Zx_blk[r], Zp_blk[r], Dx, Dp)
            sx.append(Sx)
            sp.append(Sp)
    return (
        _stack(dx),
        _stack(dp),
        _stack(sx) if second else None,
        _stack(sp) if second else None,
        R,
    )


def solve_block(anchor: BlockAnchor, problem, table: CoeffTable, config: SolverConfig):
    """Fixed-point solve of one R-block.

    Alternates se_update / pe_update from the Taylor predictor until the
    max-norm difference of successive Z blocks (positions and momenta, all
    nodes) drops to tol.  The returned state satisfies the physical
    equations exactly at every node and the structural equations to
    tolerance.
    """
    tol = config.resolved_tol()
    second = table.has_second
    stats = IterStats()

    # overflow during a diverging sweep is expected and handled via the
    # finiteness checks; keep numpy quiet about it
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        return _solve_block_inner(anchor, problem, table, config, tol, second, stats)


def _solve_block_inner(anchor, problem, table, config, tol, second, stats):
    state = init_block(anchor, problem, table)
    stats.pe1_calls += table.R
    if second:
        stats.pe2_calls += table.R

    scale_ref = max(max_abs(anchor.Zx), max_abs(anchor.Zp), 1.0)
    prev_norm = max(max_abs(state.Zx), max_abs(state.Zp))

    diff = None
    for sweep in range(1, config.max_iter + 1):
        Zx_new, Zp_new = se_update(table, anchor, state)
        if not (all_finite(Zx_new) and all_finite(Zp_new)):
            raise DivergenceError("non-finite block value during fixed-point sweep")
        # both components enter the stopping norm: the x-block alone can
        # stagnate for one sweep of the alternating map while p still moves
        diff = max(max_abs(Zx_new - state.Zx), max_abs(Zp_new - state.Zp))
        state.Zx, state.Zp = Zx_new, Zp_new
        state.Dx, state.Dp, state.Sx, state.Sp, calls = pe_update(
            problem, state.Zx, state.Zp, second
        )
        stats.pe1_calls += calls
        if second:
            stats.pe2_calls += calls
        stats.iterations = sweep
        if diff <= tol:
            return state, stats
        norm = max(max_abs(state.Zx), max_abs(state.Zp))
        if norm > config.growth_limit * max(prev_norm, scale_ref):
            raise DivergenceError(
                f"block norm grew from {prev_norm:.3e} to {norm:.3e} in one sweep"
            )
        prev_norm = norm

    raise NonConvergenceError(
        f"fixed point not converged after {config.max_iter} sweeps "
        f"(last Zx-block change {diff:.3e}, tol {tol:.1e})",
        residual=diff,
    )


@dataclass
class Trajectory:
    """Recorded nodes plus aggregate fixed-point effort for one integration."""

    times: list = field(default_factory=list)
    xs: list = field(default_factory=list)
    ps: list = field(default_factory=list)
    n_steps: int = 0
    r_block: int = 0
    n_blocks: int = 0
    total_sweeps: int = 0
    pe1_calls: int = 0
    pe2_calls: int = 0

    @property
    def total_iter(self) -> int:
        """Fixed-point iterations including one initialization unit per block."""
        return self.total_sweeps + self.n_blocks


def integrate(
    problem,
    formulation,
    R: int,
    N: int,
    T: float,
    config: SolverConfig | None = None,
    observer=None,
    block_observer=None,
    project=None,
    store_every: int = 1,
) -> Trajectory:
    """Advance the problem over [0, T] in N uniform steps by R-sized blocks.

    The trajectory has N+1 nodes including t=0.  When R does not divide N the
    final block uses a freshly assembled table of size N mod R.  ``observer``
    (if given) receives every accepted node as (step_index, t, X, P);
    ``block_observer`` receives each block's IterStats.  ``project``, if set,
    maps (X, P) -> (X, P) after each accepted node; the anchor of the next
    block is then rebuilt from the projected state.  ``store_every``
    decimates what the returned Trajectory keeps (metrics consumers should
    stream through observers instead).
    """
    form = Formulation.parse(formulation)
    if config is None:
        config = SolverConfig(precision=problem.precision)
    if config.precision is not problem.precision:
        raise ConfigurationError(
            f"solver precision {config.precision.name} does not match "
            f"problem precision {problem.precision.name}"
        )
    if N < 1 or T <= 0:
        raise ConfigurationError(f"need N >= 1 and T > 0, got N={N}, T={T}")
    if N < R:
        raise ConfigurationError(f"need N >= R, got N={N}, R={R}")

    precision = problem.precision
    dt = float(T) / N
    dt_scalar = precision.real(dt)
    main_table = coeff_table(R, form, dt, precision)

    X = problem.x0
    P = problem.p0
    anchor = make_anchor(problem, precision.real(0), X, P, form)
    traj = Trajectory(n_steps=N, r_block=R)
    traj.pe1_calls += 1
    if form is Formulation.ZDS:
        traj.pe2_calls += 1

    def record(idx, t, Xv, Pv):
        if observer is not None:
            observer(idx, t, Xv, Pv)
        if idx % store_every == 0 or idx == N:
            traj.times.append(float(t))
            traj.xs.append(Xv.copy())
            traj.ps.append(Pv.copy())

    record(0, anchor.t, X, P)

    step = 0
    while step < N:
        r_this = min(R, N - step)
        table = main_table if r_this == R else coeff_table(r_this, form, dt, precision)
        try:
            state, stats = solve_block(anchor, problem, table, config)
        except (NonConvergenceError, DivergenceError) as err:
            raise type(err)(f"block starting at step {step}: {err}") from err
        traj.n_blocks += 1
        traj.total_sweeps += stats.iterations
        traj.pe1_calls += stats.pe1_calls
        traj.pe2_calls += stats.pe2_calls
        if block_observer is not None:
            block_observer(stats)

        Xl = Pl = None
        for r in range(1, r_this + 1):
            idx = step + r
            t_r = precision.real(idx) * dt_scalar
            Xr, Pr = state.Zx[r - 1], state.Zp[r - 1]
            if project is not None:
                Xr, Pr = project(Xr, Pr)
            record(idx, t_r, Xr, Pr)
            Xl, Pl = Xr, Pr

        step += r_this
        if project is not None:
            anchor = make_anchor(problem, precision.real(step) * dt_scalar, Xl, Pl, form)
            traj.pe1_calls += 1
            if form is Formulation.ZDS:
                traj.pe2_calls += 1
        else:
            anchor = BlockAnchor(
                t=precision.real(step) * dt_scalar,
                Zx=state.Zx[r_this - 1],
                Zp=state.Zp[r_this - 1],
                Dx=state.Dx[r_this - 1],
                Dp=state.Dp[r_this - 1],
                Sx=state.Sx[r_this - 1] if state.Sx is not None else None,
                Sp=state.Sp[r_this - 1] if state.Sp is not None else None,
            )
    return traj
