"""Run/measure layer: error series, convergence orders, sweeps, drift, CSV.

A run integrates one (problem, scheme, R, N, T, precision) configuration and
streams every accepted node through error trackers:

* position error against the closed-form solution when one exists (max over
  all nodes), or against a reference endpoint when only that is known;
* deviation of each conserved quantity from its initial value (vector
  invariants in max-norm), tracked as a streaming maximum over all nodes
  regardless of trajectory decimation.

Iteration accounting follows nb_iter_avg = total_iter / N (total_iter counts
one initialization unit per block plus all fixed-point sweeps) and
nb_call_avg = R * nb_iter_avg for the structural schemes; Stormer-Verlet
rows report measured right-hand-side calls per step instead.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .baselines import integrate_sv
from .blocksolver import SolverConfig, Trajectory, integrate
from .numerics import PRECISIONS, max_abs
from .problems import PROBLEM_NAMES, build_problem, lrl_scalar, project_lrl
from .secoeff import ConfigurationError

__all__ = [
    "RunConfig",
    "ErrorReport",
    "run",
    "convergence_order",
    "sweep",
    "SweepResult",
    "drift_series",
    "CSV_COLUMNS",
]

STRUCTURAL_SCHEMES = ("zd", "zds")
SV_SCHEMES = ("sv2", "sv4", "sv6", "sv8")

CSV_COLUMNS = [
    "problem", "scheme", "R", "precision", "N", "dt",
    "ex", "ordx", "eH", "ordH", "eL", "ordL", "eA", "ordA",
    "total_iter", "nb_iter_avg", "nb_call_avg", "status",
]


@dataclass(frozen=True)
class RunConfig:
    problem: str
    scheme: str
    N: int
    T: float
    R: int | None = None
    tol: float | None = None
    precision: str = "double"
    project_lrl: bool = False
    decimation: int | None = None
    max_iter: int = 200

    def validated(self) -> "RunConfig":
        if self.problem not in PROBLEM_NAMES:
            raise ConfigurationError(f"unknown problem {self.problem!r}")
        if self.scheme not in STRUCTURAL_SCHEMES + SV_SCHEMES:
            raise ConfigurationError(f"unknown scheme {self.scheme!r}")
        if self.scheme in STRUCTURAL_SCHEMES:
            if self.R is None or self.R < 1:
                raise ConfigurationError(f"scheme {self.scheme} requires a block size R >= 1")
        elif self.R is not None:
            raise ConfigurationError(f"scheme {self.scheme} does not take a block size R")
        if self.N < 1:
            raise ConfigurationError(f"need N >= 1, got N={self.N}")
        if not self.T > 0:
            raise ConfigurationError(f"need T > 0, got T={self.T}")
        if self.precision not in PRECISIONS:
            raise ConfigurationError(f"unknown precision {self.precision!r}")
        if self.project_lrl and self.problem != "kepler":
            raise ConfigurationError("LRL projection applies to the kepler problem only")
        return self

    def manifest(self) -> str:
        return json.dumps(self.__dict__, sort_keys=True)


@dataclass
class ErrorReport:
    config: RunConfig
    dt: float
    errors: dict = field(default_factory=dict)  # keys among 'x', 'H', 'L', 'A'
    total_iter: int = 0
    nb_iter_avg: float = 0.0
    nb_call_avg: float = 0.0
    drift: dict = field(default_factory=dict)  # quantity -> list[(t, deviation)]


class _InvariantTracker:
    def __init__(self, name, evaluator, sample_idx=None):
        self.name = name
        self.evaluator = evaluator
        self.q0 = None
        self.max_dev = 0.0
        self.sample_idx = sample_idx
        self.series = [] if sample_idx is not None else None

    def update(self, idx, t, X, P):
        q = self.evaluator(X, P)
        if self.q0 is None:
            self.q0 = q
        dev = max_abs(q - self.q0)
        self.max_dev = max(self.max_dev, dev)
        if self.series is not None and idx in self.sample_idx:
            self.series.append((float(t), dev))


class _PositionTracker:
    def __init__(self, problem, T):
        self.problem = problem
        self.max_err = None
        self.endpoint_err = None
        self._refs = [r for r in problem.reference_values if r.quantity == "x"]
        self._T = T

    def update(self, idx, t, X, P):
        if self.problem.exact_solution is not None:
            Xe, _ = self.problem.exact_solution(t)
            err = max_abs(X - Xe)
            self.max_err = err if self.max_err is None else max(self.max_err, err)
        elif self._refs:
            for ref in self._refs:
                if abs(float(t) - ref.t) <= 1e-9 * max(1.0, self._T):
                    self.endpoint_err = max_abs(X - self.problem.precision.real(ref.value))

    def result(self):
        if self.max_err is not None:
            return self.max_err
        return self.endpoint_err


def run(config: RunConfig, drift_quantities=(), drift_samples: int = 200) -> ErrorReport:
    """Integrate one configuration and collect error metrics.

    ``drift_quantities`` selects invariants whose deviation series is sampled
    at ``drift_samples`` evenly spaced nodes and returned in the report.
    """
    config = config.validated()
    precision = PRECISIONS[config.precision]
    problem = build_problem(config.problem, precision)
    N, T = config.N, config.T
    dt = float(T) / N

    sample_idx = None
    if drift_quantities:
        picks = np.unique(np.round(np.linspace(0, N, min(drift_samples, N + 1))).astype(int))
        sample_idx = set(int(i) for i in picks)

    trackers = []
    for inv in problem.invariants:
        want = inv.name in drift_quantities
        trackers.append(_InvariantTracker(inv.name, inv.evaluator, sample_idx if want else None))
    pos = _PositionTracker(problem, T)

    def observer(idx, t, X, P):
        pos.update(idx, t, X, P)
        for tr in trackers:
            tr.update(idx, t, X, P)

    store_every = config.decimation
    if store_every is None:
        store_every = 1 if N <= 100_000 else math.ceil(N / 100_000)

    if config.scheme in STRUCTURAL_SCHEMES:
        solver_cfg = SolverConfig(tol=config.tol, max_iter=config.max_iter, precision=precision)
        project = None
        if config.project_lrl:
            R0 = lrl_scalar(problem.x0[:, 0], problem.p0[:, 0])
            project = lambda X, P: project_lrl(X, P, R0)
        traj = integrate(
            problem, config.scheme, config.R, N, T,
            config=solver_cfg, observer=observer, project=project, store_every=store_every,
        )
        total_iter = traj.total_iter
        nb_iter_avg = total_iter / N
        nb_call_avg = config.R * nb_iter_avg
    else:
        order = int(config.scheme[2:])
        traj = integrate_sv(
            problem, order, N, T, tol=config.tol, max_iter=config.max_iter,
            observer=observer, store_every=store_every,
        )
        total_iter = traj.total_iter
        nb_iter_avg = total_iter / N
        nb_call_avg = traj.pe1_calls / N

    report = ErrorReport(
        config=config, dt=dt,
        total_iter=total_iter, nb_iter_avg=nb_iter_avg, nb_call_avg=nb_call_avg,
    )
    if pos.result() is not None:
        report.errors["x"] = float(pos.result())
    for tr in trackers:
        report.errors[tr.name] = float(tr.max_dev)
        if tr.series is not None:
            report.drift[tr.name] = tr.series
    return report


def convergence_order(e1: float, e2: float, dt1: float, dt2: float) -> float:
    """log(e1/e2) / log(dt1/dt2); NaN when an error underflows the metric floor."""
    if dt1 <= 0 or dt2 <= 0 or dt1 == dt2:
        raise ValueError("need positive, distinct step sizes")
    if e1 <= 0 or e2 <= 0:
        return math.nan
    return math.log(e1 / e2) / math.log(dt1 / dt2)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return "" if math.isnan(value) else f"{value:.5e}"
    return str(value)


@dataclass
class SweepResult:
    rows: list

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(CSV_COLUMNS) + "\n")
        for row in self.rows:
            buf.write(",".join(_fmt(row.get(col)) for col in CSV_COLUMNS) + "\n")
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_csv())


def _report_row(config, report) -> dict:
    row = {
        "problem": config.problem,
        "scheme": config.scheme,
        "R": config.R,
        "precision": config.precision,
        "N": config.N,
        "dt": float(config.T) / config.N,
        "status": "ok",
    }
    if report is not None:
        for q in ("x", "H", "L", "A"):
            if q in report.errors:
                row["e" + ("x" if q == "x" else q)] = report.errors[q]
        row["total_iter"] = report.total_iter
        row["nb_iter_avg"] = report.nb_iter_avg
        row["nb_call_avg"] = report.nb_call_avg
    return row


def sweep(base: RunConfig, Ns) -> SweepResult:
    """Run ``base`` at each N (ascending) and tabulate errors with orders.

    A row whose run raises a solver error is tagged in the status column and
    the sweep continues; order entries compare successive successful rows.
    """
    Ns = list(Ns)
    if Ns != sorted(Ns):
        raise ConfigurationError("Ns must be ascending")
    rows = []
    prev = None  # (dt, errors) of last successful row
    for N in Ns:
        config = replace(base, N=N).validated()
        try:
            report = run(config)
        except Exception as err:  # row failure is recorded, sweep continues
            row = _report_row(config, None)
            row["status"] = f"error: {type(err).__name__}"
            rows.append(row)
            continue
        row = _report_row(config, report)
        dt = row["dt"]
        if prev is not None:
            pdt, perrs = prev
            for q in ("x", "H", "L", "A"):
                key = "e" + ("x" if q == "x" else q)
                if key in row and q in perrs:
                    row["ord" + ("x" if q == "x" else q)] = convergence_order(
                        perrs[q], report.errors[q], pdt, dt
                    )
        prev = (dt, dict(report.errors))
        rows.append(row)
    return SweepResult(rows)


def drift_series(config: RunConfig, quantity: str, samples: int = 200):
    """Deviation |q(t) - q(0)| sampled at ``samples`` evenly spaced nodes."""
    config = config.validated()
    problem_invariants = [inv.name for inv in build_problem(config.problem).invariants]
    if quantity not in problem_invariants:
        raise ConfigurationError(
            f"quantity {quantity!r} is not an invariant of {config.problem} "
            f"(available: {problem_invariants})"
        )
    report = run(config, drift_quantities=(quantity,), drift_samples=samples)
    return report.drift[quantity]
