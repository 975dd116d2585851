"""Implicit-midpoint time stepping with per-step energy/power bookkeeping.

For the linear system M qdd + D qd + A q = F(t) the midpoint update solves

    (M + dt/2 D + dt^2/4 A) p_mid = M p_n + dt/2 (F(t_mid) - A q_n)

and sets q_{n+1} = q_n + dt p_mid, p_{n+1} = 2 p_mid - p_n. Because A is
symmetric and D skew-symmetric, the scheme satisfies the exact discrete
energy identity E_{n+1} - E_n = dt * p_mid . F(t_mid), so the unforced
system conserves energy to linear-solver roundoff at any dt.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SolverFailure
from .model import ActuationSignals, FemSystem, energy, input_vector


@dataclass(frozen=True)
class TimeGrid:
    t_final: float
    dt: float

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.t_final < self.dt:
            raise ValueError("t_final must be at least dt")

    @property
    def n_steps(self) -> int:
        return math.ceil(self.t_final / self.dt)

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.n_steps + 1)


@dataclass
class StateVector:
    """Positions and velocities of all fields as flat coefficient vectors."""

    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        self.p = np.asarray(self.p, dtype=float)
        if self.q.shape != self.p.shape or self.q.ndim != 1:
            raise ValueError("q and p must be 1-d vectors of equal length")

    @classmethod
    def zeros(cls, n: int) -> "StateVector":
        return cls(np.zeros(n), np.zeros(n))

    def copy(self) -> "StateVector":
        return StateVector(self.q.copy(), self.p.copy())


class MidpointStepper:
    """Factorized one-step operator for a fixed (system, dt) pair."""

    def __init__(self, system: FemSystem, dt: float):
        self.system = system
        self.dt = float(dt)
        S = system.M + (dt / 2.0) * system.D + (dt * dt / 4.0) * system.A
        try:
            self._lu = spla.splu(S.tocsc())
        except RuntimeError as exc:
            raise SolverFailure(f"step matrix factorization failed: {exc}", step=0) from exc

    def advance(self, state: StateVector, t: float, load: np.ndarray):
        """One midpoint step given the load vector at t + dt/2.

        Returns (new_state, p_mid); p_mid is the midpoint velocity used by the
        power-balance residual.
        """
        dt = self.dt
        rhs = self.system.M @ state.p + (dt / 2.0) * (load - self.system.A @ state.q)
        p_mid = self._lu.solve(rhs)
        if not np.all(np.isfinite(p_mid)):
            raise SolverFailure("step solve produced non-finite values")
        q_new = state.q + dt * p_mid
        p_new = 2.0 * p_mid - state.p
        return StateVector(q_new, p_new), p_mid


def step_midpoint(system: FemSystem, state: StateVector, t: float, dt: float,
                  signals: ActuationSignals) -> StateVector:
    """Single midpoint step; the factorization is cached on the system per dt."""
    stepper = system.stepper(dt)
    load = input_vector(system, signals, t + dt / 2.0)
    new_state, _ = stepper.advance(state, t, load)
    return new_state


@dataclass
class Trajectory:
    """Time series of states, energies, and power-balance residuals."""

    times: np.ndarray
    energies: np.ndarray
    residuals: np.ndarray
    input_work: np.ndarray
    probe_names: tuple[str, ...] = ()
    probe_values: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    snapshots: list = field(default_factory=list)
    final_state: StateVector | None = None


def simulate(system: FemSystem, signals: ActuationSignals, grid: TimeGrid,
             initial: StateVector | None = None, snapshot_stride: int = 0,
             probes=None) -> Trajectory:
    """Advance the system over the grid, recording E and the power residual.

    probes is an optional sequence of (name, row_vector) pairs evaluated
    against q at every step; snapshot_stride > 0 stores every stride-th state
    (plus the final one).
    """
    n = system.n_positions
    state = StateVector.zeros(n) if initial is None else initial.copy()
    if state.q.size != n:
        raise SolverFailure(f"initial state has length {state.q.size}, expected {n}")

    stepper = system.stepper(grid.dt)
    n_steps = grid.n_steps
    times = grid.times
    energies = np.zeros(n_steps + 1)
    residuals = np.zeros(n_steps)
    work = np.zeros(n_steps + 1)
    probes = list(probes or [])
    probe_rows = np.array([row for _, row in probes]) if probes else np.zeros((0, n))
    probe_values = np.zeros((n_steps + 1, len(probes)))
    snapshots = []

    energies[0] = energy(system, state.q, state.p)
    if probes:
        probe_values[0] = probe_rows @ state.q
    if snapshot_stride > 0:
        snapshots.append((0, state.copy()))

    for k in range(n_steps):
        t = times[k]
        try:
            load = input_vector(system, signals, t + grid.dt / 2.0)
            state, p_mid = stepper.advance(state, t, load)
        except SolverFailure as exc:
            raise SolverFailure(f"step {k + 1}: {exc}", step=k + 1) from exc
        energies[k + 1] = energy(system, state.q, state.p)
        step_work = grid.dt * float(p_mid @ load)
        residuals[k] = abs(energies[k + 1] - energies[k] - step_work)
        work[k + 1] = work[k] + step_work
        if probes:
            probe_values[k + 1] = probe_rows @ state.q
        if snapshot_stride > 0 and ((k + 1) % snapshot_stride == 0 or k + 1 == n_steps):
            snapshots.append((k + 1, state.copy()))

    return Trajectory(
        times=times,
        energies=energies,
        residuals=residuals,
        input_work=work,
        probe_names=tuple(name for name, _ in probes),
        probe_values=probe_values,
        snapshots=snapshots,
        final_state=state,
    )
