"""
Integration of semiclassical right-hand sides, trajectory recording,
Newton refinement of fixed points and convergence detection.
"""
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Dict, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.integrate import solve_ivp

from model import (STATE_COMPONENTS, ModelParams, ParameterError, SemiclassicalState,
                   as_state_array, energy, sr_minimum)
from semiclassical import unitary_rhs

METHODS = ("rk45", "rk4")


class IntegrationError(RuntimeError):
    """Integrator aborted (step-size underflow or non-finite state)."""


class ConvergenceError(RuntimeError):
    """Newton refinement failed."""


@dataclass(frozen=True)
class SolverConfig:
    method: str = "rk45"
    dt: float = 0.01
    rtol: float = 1e-9
    atol: float = 1e-12
    t_end: float = 100.0
    record_stride: int = 10

    def __post_init__(self):
        if self.method not in METHODS:
            raise ParameterError(f"unknown solver method {self.method!r} (choose from {METHODS})")
        if not self.dt > 0:
            raise ParameterError(f"dt must be positive, got {self.dt}")
        if not (self.rtol > 0 and self.atol > 0):
            raise ParameterError(f"tolerances must be positive, got rtol={self.rtol}, atol={self.atol}")
        if not self.t_end > 0:
            raise ParameterError(f"t_end must be positive, got {self.t_end}")
        if int(self.record_stride) < 1:
            raise ParameterError(f"record_stride must be >= 1, got {self.record_stride}")

    @classmethod
    def from_dict(cls, block: Dict[str, Any]) -> "SolverConfig":
        try:
            return cls(
                method=str(block.get("method", cls.method)).lower(),
                dt=float(block.get("dt", cls.dt)),
                rtol=float(block.get("rtol", cls.rtol)),
                atol=float(block.get("atol", cls.atol)),
                t_end=float(block.get("t_end", cls.t_end)),
                record_stride=int(block.get("record_stride", cls.record_stride)),
            )
        except (TypeError, ValueError) as e:
            raise ParameterError(f"bad solver block: {e}")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        if len(self.times) != len(self.states):
            raise ValueError(f"{len(self.times)} time stamps for {len(self.states)} states")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory time stamps must be strictly increasing")
        self.times.setflags(write=False)
        self.states.setflags(write=False)

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def columns(self) -> Tuple[str, ...]:
        return STATE_COMPONENTS if self.states.shape[1] == 5 else ("q", "p")

    def to_frame(self, params: Optional[ModelParams] = None) -> pd.DataFrame:
        frame = pd.DataFrame(self.states, columns=list(self.columns()))
        frame.insert(0, "t", self.times)
        if params is not None and self.states.shape[1] == 5:
            frame["energy"] = energy(self.states, params)
        return frame


def rk4_step(rhs, t: float, y: np.ndarray, dt: float) -> np.ndarray:
    """One classical fourth-order Runge-Kutta step of y' = rhs(t, y)."""
    k1 = rhs(t, y)
    k2 = rhs(t + 0.5 * dt, y + 0.5 * dt * k1)
    k3 = rhs(t + 0.5 * dt, y + 0.5 * dt * k2)
    k4 = rhs(t + dt, y + dt * k3)
    return y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _sample_times(solver: SolverConfig) -> np.ndarray:
    spacing = solver.dt * solver.record_stride
    times = np.arange(0.0, solver.t_end, spacing)
    if times[-1] < solver.t_end:
        times = np.append(times, solver.t_end)
    return times


def _integrate_rk4(rhs, y0: np.ndarray, solver: SolverConfig):
    n_steps = max(1, int(round(solver.t_end / solver.dt)))
    dt = solver.t_end / n_steps
    times, states = [0.0], [y0.copy()]
    y = y0.copy()
    for step in range(1, n_steps + 1):
        y = rk4_step(rhs, (step - 1) * dt, y, dt)
        if not np.all(np.isfinite(y)):
            raise IntegrationError(f"non-finite state at t={step * dt:.6g}")
        if step % solver.record_stride == 0 or step == n_steps:
            times.append(step * dt)
            states.append(y.copy())
    return np.array(times), np.array(states)


def _integrate_rk45(rhs, y0: np.ndarray, solver: SolverConfig):
    t_eval = _sample_times(solver)
    sol = solve_ivp(rhs, (0.0, solver.t_end), y0, method="RK45",
                    rtol=solver.rtol, atol=solver.atol, t_eval=t_eval)
    if not sol.success:
        raise IntegrationError(f"RK45 aborted at t={sol.t[-1] if sol.t.size else 0.0:.6g}: {sol.message}")
    if not np.all(np.isfinite(sol.y)):
        raise IntegrationError("non-finite state in RK45 solution")
    logging.debug(f"RK45: {sol.nfev} rhs evaluations")
    return sol.t, sol.y.T


def integrate(rhs, initial_state, solver: SolverConfig,
              metadata: Optional[Dict[str, Any]] = None) -> Trajectory:
    """Integrate rhs from initial_state to solver.t_end and sample every record_stride steps.

    rk4 uses the fixed step dt, shrunk so that t_end is hit exactly. rk45 uses scipy's
    adaptive solver with rtol/atol and reports on the same sample grid. Raises
    IntegrationError on a non-finite state or a solver abort.
    """
    y0 = as_state_array(initial_state).astype(float)
    if not np.all(np.isfinite(y0)):
        raise IntegrationError(f"non-finite initial state {y0}")
    logging.info(f"integrating {solver.method} to t={solver.t_end:g}")
    if solver.method == "rk4":
        times, states = _integrate_rk4(rhs, y0, solver)
    else:
        times, states = _integrate_rk45(rhs, y0, solver)
    info = {"solver": solver.to_dict()}
    info.update(metadata or {})
    return Trajectory(times, states, info)


def numerical_jacobian(fun: Callable[[np.ndarray], np.ndarray], x: np.ndarray,
                       rel_step: float = 1e-6) -> np.ndarray:
    """Central finite differences, one column per component."""
    x = np.asarray(x, dtype=float)
    f0 = np.asarray(fun(x))
    jac = np.empty((f0.size, x.size))
    for j in range(x.size):
        h = rel_step * max(1.0, abs(x[j]))
        dx = np.zeros_like(x)
        dx[j] = h
        jac[:, j] = (np.asarray(fun(x + dx)) - np.asarray(fun(x - dx))) / (2.0 * h)
    return jac


def refine_fixed_point(rhs, guess, tol: float = 1e-12, max_iter: int = 50):
    """Newton iteration on rhs(0, x) = 0; rhs has the integrator signature f(t, y)."""
    x = as_state_array(guess).astype(float)
    fun = lambda y: np.asarray(rhs(0.0, y), dtype=float)
    for iteration in range(max_iter + 1):
        residual = fun(x)
        rnorm = float(np.max(np.abs(residual)))
        logging.debug(f"Newton iteration {iteration}: |rhs| = {rnorm:.3e}")
        if rnorm < tol:
            return SemiclassicalState.from_array(x) if x.size == 5 else x
        if iteration == max_iter:
            break
        jac = numerical_jacobian(fun, x)
        try:
            if np.linalg.cond(jac) > 1e13:
                raise np.linalg.LinAlgError("ill-conditioned")
            x = x - np.linalg.solve(jac, residual)
        except np.linalg.LinAlgError:
            raise ConvergenceError(f"singular Jacobian at {x}")
        if not np.all(np.isfinite(x)):
            raise ConvergenceError("Newton step produced a non-finite point")
    raise ConvergenceError(f"no convergence after {max_iter} iterations (|rhs| = {rnorm:.3e})")


def energy_series(traj: Trajectory, params: ModelParams) -> pd.DataFrame:
    """Columns t, energy."""
    return pd.DataFrame({"t": traj.times, "energy": energy(traj.states, params)})


def detect_convergence(traj: Trajectory, target_state, eps: float) -> Optional[float]:
    """First time after which the inf-norm distance to target stays below eps."""
    target = as_state_array(target_state)
    distance = np.max(np.abs(traj.states - target), axis=1)
    outside = np.nonzero(distance >= eps)[0]
    if outside.size == 0:
        return float(traj.times[0])
    last = outside[-1]
    if last == len(traj.times) - 1:
        return None
    return float(traj.times[last + 1])


def linearized_frequencies(params: ModelParams, branch: int = 1) -> Tuple[float, float]:
    """Normal-mode frequencies of the unitary flow linearized at the SR minimum."""
    minimum = sr_minimum(params, branch).state.as_array()
    jac = numerical_jacobian(lambda y: unitary_rhs(y, params), minimum)
    freqs = np.sort(np.abs(np.linalg.eigvals(jac).imag))
    # spectrum is {0, +-i eps1, +-i eps2}
    return float(freqs[1]), float(freqs[3])
