"""
Brute-force quantum check: the polaritons d1, d2 built as matrices on a
truncated two-mode Fock space (photon c, Holstein-Primakoff boson b) and a
Lindblad master equation stepped with RK4 or solved for its steady state.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve
from sklearn.linear_model import LinearRegression
from sklearn.metrics import r2_score

from diag import BogoliubovCoefficients, DiagonalizationResult, bogoliubov_coefficients
from model import ParameterError


class TruncationError(RuntimeError):
    """Population reached the top Fock level: the truncation is too small."""


@dataclass(frozen=True)
class FockTruncation:
    n_c: int = 8
    n_b: int = 8
    edge_threshold: float = 1e-4

    def __post_init__(self):
        if int(self.n_c) < 1 or int(self.n_b) < 1:
            raise ParameterError(f"Fock truncation needs n >= 1, got ({self.n_c}, {self.n_b})")
        if not self.edge_threshold > 0:
            raise ParameterError(f"edge threshold must be positive, got {self.edge_threshold}")

    @property
    def dim(self) -> int:
        return (self.n_c + 1) * (self.n_b + 1)

    def require_dynamics(self):
        if self.n_c < 2 or self.n_b < 2:
            raise ParameterError(f"evolution needs n >= 2 per mode, got ({self.n_c}, {self.n_b})")


@dataclass(frozen=True)
class OperatorMatrix:
    matrix: np.ndarray
    label: str = ""

    @property
    def dag(self) -> np.ndarray:
        return self.matrix.conj().T


class Channel(NamedTuple):
    operator: Any
    rate: float
    n_th: float


@dataclass
class OracleTrajectory:
    times: np.ndarray
    states: List[np.ndarray]
    diagnostics: Dict[str, float] = field(default_factory=dict)


def _matrix(op) -> np.ndarray:
    return op.matrix if isinstance(op, OperatorMatrix) else np.asarray(op)


def ladder(n: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n + 1, dtype=float)), 1)


def build_mode_operators(trunc: FockTruncation) -> Tuple[OperatorMatrix, OperatorMatrix]:
    c = np.kron(ladder(trunc.n_c), np.eye(trunc.n_b + 1))
    b = np.kron(np.eye(trunc.n_c + 1), ladder(trunc.n_b))
    return OperatorMatrix(c.astype(complex), "c"), OperatorMatrix(b.astype(complex), "b")


def interior_mask(trunc: FockTruncation) -> np.ndarray:
    """True on basis states below the top level of both modes."""
    n_c, n_b = np.meshgrid(np.arange(trunc.n_c + 1), np.arange(trunc.n_b + 1), indexing="ij")
    return ((n_c < trunc.n_c) & (n_b < trunc.n_b)).ravel()


def interior_block(op: np.ndarray, trunc: FockTruncation) -> np.ndarray:
    mask = interior_mask(trunc)
    return op[np.ix_(mask, mask)]


def build_dressed_operators(trunc: FockTruncation,
                            coeffs: BogoliubovCoefficients) -> Tuple[OperatorMatrix, OperatorMatrix]:
    c, b = build_mode_operators(trunc)
    dressed = []
    for m in (1, 2):
        alpha, beta, gamma, delta = coeffs.channel(m)
        d = alpha * c.matrix + beta * c.dag + gamma * b.matrix + delta * b.dag
        dressed.append(OperatorMatrix(d, f"d{m}"))
    return dressed[0], dressed[1]


def hamiltonian_matrix(diag: DiagonalizationResult, d1, d2) -> OperatorMatrix:
    d1, d2 = _matrix(d1), _matrix(d2)
    h = diag.eps1 * d1.conj().T @ d1 + diag.eps2 * d2.conj().T @ d2
    return OperatorMatrix(h, "H")


def bose_einstein(nu: float, temperature: float) -> float:
    if nu <= 0:
        raise ParameterError(f"occupation needs a positive frequency, got {nu}")
    if temperature < 0:
        raise ParameterError(f"temperature must be non-negative, got {temperature}")
    if temperature == 0:
        return 0.0
    return float(1.0 / np.expm1(nu / temperature))


def _prepared_channels(channels: Sequence, dim: int):
    prepared = []
    for op, rate, n_th in channels:
        L = _matrix(op)
        if L.shape != (dim, dim):
            raise ParameterError(f"jump operator shape {L.shape} does not match ({dim}, {dim})")
        if rate < 0 or n_th < 0:
            raise ParameterError(f"channel rate and occupation must be non-negative, got {rate}, {n_th}")
        if rate == 0:
            continue
        Ld = L.conj().T
        prepared.append((L, Ld, rate * (n_th + 1.0), rate * n_th))
    return prepared


def _effective_hamiltonian(H: np.ndarray, prepared) -> np.ndarray:
    h_eff = H.astype(complex)
    for L, Ld, down, up in prepared:
        h_eff = h_eff - 1j * (down * Ld @ L + up * L @ Ld)
    return h_eff


def _flow(rho: np.ndarray, h_eff: np.ndarray, prepared) -> np.ndarray:
    drho = -1j * (h_eff @ rho - rho @ h_eff.conj().T)
    for L, Ld, down, up in prepared:
        drho = drho + 2.0 * down * L @ rho @ Ld
        if up:
            drho = drho + 2.0 * up * Ld @ rho @ L
    return drho


def lindblad_rhs(rho, H, channels: Sequence) -> np.ndarray:
    """rate [(n+1)(2 L rho L^+ - {L^+ L, rho}) + n (2 L^+ rho L - {L L^+, rho})] per channel."""
    rho, H = np.asarray(rho), _matrix(H)
    if rho.shape != H.shape or rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ParameterError(f"rho {rho.shape} and H {H.shape} must be equal square matrices")
    prepared = _prepared_channels(channels, H.shape[0])
    return _flow(rho, _effective_hamiltonian(H, prepared), prepared)


def check_density_matrix(rho: np.ndarray, herm_tol: float = 1e-10,
                         trace_tol: float = 1e-9, eig_tol: float = 1e-8):
    if np.max(np.abs(rho - rho.conj().T)) > herm_tol:
        raise ParameterError("density matrix is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > trace_tol:
        raise ParameterError(f"density matrix trace is {np.trace(rho).real}")
    if np.linalg.eigvalsh(rho).min() < -eig_tol:
        raise ParameterError("density matrix has a negative eigenvalue")


def edge_populations(rho: np.ndarray, trunc: FockTruncation) -> Tuple[float, float]:
    populations = np.real(np.diag(rho)).reshape(trunc.n_c + 1, trunc.n_b + 1)
    return float(populations[-1, :].sum()), float(populations[:, -1].sum())


def _guard(rho: np.ndarray, trunc: FockTruncation, t: float):
    top_c, top_b = edge_populations(rho, trunc)
    if max(top_c, top_b) > trunc.edge_threshold:
        logging.warning(f"edge population c={top_c:.2e}, b={top_b:.2e} at t={t:.4g}")
        raise TruncationError(
            f"truncation too small: top Fock level population {max(top_c, top_b):.2e} "
            f"exceeds {trunc.edge_threshold:.1e}")


def default_time_step(diag: DiagonalizationResult, channels: Sequence) -> float:
    scale = max([diag.eps1, diag.eps2] + [rate for _, rate, _ in channels])
    return 0.01 / scale


def evolve(rho0, H, channels: Sequence, t_end: float, dt: float,
           trunc: FockTruncation, record_every: int = 10) -> OracleTrajectory:
    trunc.require_dynamics()
    H = _matrix(H)
    rho = np.array(rho0, dtype=complex)
    check_density_matrix(rho)
    prepared = _prepared_channels(channels, H.shape[0])
    h_eff = _effective_hamiltonian(H, prepared)
    n_steps = max(1, int(math.ceil(t_end / dt)))
    dt = t_end / n_steps

    def step(r):
        k1 = _flow(r, h_eff, prepared)
        k2 = _flow(r + 0.5 * dt * k1, h_eff, prepared)
        k3 = _flow(r + 0.5 * dt * k2, h_eff, prepared)
        k4 = _flow(r + dt * k3, h_eff, prepared)
        return r + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    times, states = [0.0], [rho.copy()]
    max_trace_error, min_eig = 0.0, float(np.linalg.eigvalsh(rho).min())
    _guard(rho, trunc, 0.0)
    logging.info(f"oracle evolution: dim={H.shape[0]}, {n_steps} RK4 steps of {dt:.3g}")
    for k in range(1, n_steps + 1):
        rho = step(rho)
        if k % record_every == 0 or k == n_steps:
            rho = 0.5 * (rho + rho.conj().T)
            t = k * dt
            _guard(rho, trunc, t)
            max_trace_error = max(max_trace_error, abs(np.trace(rho).real - 1.0))
            min_eig = min(min_eig, float(np.linalg.eigvalsh(rho).min()))
            times.append(t)
            states.append(rho.copy())
    diagnostics = {"max_trace_error": max_trace_error, "min_eigenvalue": min_eig}
    return OracleTrajectory(np.array(times), states, diagnostics)


def liouvillian(H, channels: Sequence) -> sp.csc_matrix:
    """Sparse generator acting on the row-major vectorization of rho."""
    H = sp.csr_matrix(_matrix(H))
    dim = H.shape[0]
    eye = sp.identity(dim, format="csr", dtype=complex)
    gen = -1j * (sp.kron(H, eye) - sp.kron(eye, H.T))
    for op, rate, n_th in channels:
        if rate == 0:
            continue
        L = sp.csr_matrix(_matrix(op))
        Ld = L.conj().T
        for jump, weight in ((L, rate * (n_th + 1.0)), (Ld, rate * n_th)):
            if weight == 0:
                continue
            jd = jump.conj().T
            jdj = jd @ jump
            gen = gen + weight * (2.0 * sp.kron(jump, jump.conj())
                                  - sp.kron(jdj, eye) - sp.kron(eye, jdj.T))
    return gen.tocsc()


def steady_state(H, channels: Sequence, trunc: FockTruncation) -> np.ndarray:
    trunc.require_dynamics()
    if not any(rate > 0 for _, rate, _ in channels):
        raise ParameterError("steady state needs at least one damped channel")
    dim = _matrix(H).shape[0]
    gen = liouvillian(H, channels).tolil()
    # replace one equation by tr(rho) = 1
    trace_row = np.zeros(dim * dim, dtype=complex)
    trace_row[np.arange(dim) * (dim + 1)] = 1.0
    gen[0, :] = trace_row
    rhs = np.zeros(dim * dim, dtype=complex)
    rhs[0] = 1.0
    rho = spsolve(gen.tocsc(), rhs).reshape(dim, dim)
    rho = 0.5 * (rho + rho.conj().T)
    rho = rho / np.trace(rho).real
    _guard(rho, trunc, math.inf)
    return rho


def expectation(rho: np.ndarray, op) -> float:
    return float(np.real(np.trace(rho @ _matrix(op))))


def ground_state(H) -> Tuple[float, np.ndarray]:
    values, vectors = np.linalg.eigh(_matrix(H))
    return float(values[0]), vectors[:, 0]


def fidelity(rho: np.ndarray, psi: np.ndarray) -> float:
    return float(np.real(psi.conj() @ rho @ psi))


def thermal_occupations(steady: np.ndarray, d1, d2) -> Tuple[float, float]:
    d1, d2 = _matrix(d1), _matrix(d2)
    return (expectation(steady, d1.conj().T @ d1),
            expectation(steady, d2.conj().T @ d2))


def dressed_channels(diag: DiagonalizationResult, d1, d2, rates: Tuple[float, float],
                     temperature: float) -> List[Channel]:
    return [Channel(d1, rates[0], bose_einstein(diag.eps1, temperature)),
            Channel(d2, rates[1], bose_einstein(diag.eps2, temperature))]


def bare_channels(diag: DiagonalizationResult, c, b, rates: Tuple[float, float],
                  temperature: float) -> List[Channel]:
    return [Channel(c, rates[0], bose_einstein(diag.params.omega, temperature)),
            Channel(b, rates[1], bose_einstein(diag.f_cap, temperature))]


def cmn_identity_residual(diag: DiagonalizationResult, trunc: FockTruncation) -> float:
    """Max interior residual of the photon and spin quadrature identities.

    The HP factor multiplies both sides of the spin identity, so it is checked unscaled.
    """
    coeffs = bogoliubov_coefficients(diag)
    c, b = build_mode_operators(trunc)
    d1, d2 = build_dressed_operators(trunc, coeffs)
    omega, f_cap = diag.params.omega, diag.f_cap
    cos, sin = math.cos(diag.chi), math.sin(diag.chi)
    x1 = d1.matrix + d1.dag
    x2 = d2.matrix + d2.dag
    photon = (c.matrix + c.dag
              - cos * math.sqrt(diag.eps1 / omega) * x1
              + sin * math.sqrt(diag.eps2 / omega) * x2)
    spin = (b.matrix + b.dag
            - sin * math.sqrt(diag.eps1 / f_cap) * x1
            - cos * math.sqrt(diag.eps2 / f_cap) * x2)
    return float(max(np.max(np.abs(interior_block(photon, trunc))),
                     np.max(np.abs(interior_block(spin, trunc)))))


def fit_decay_rate(times, values) -> Tuple[float, float]:
    """Exponential rate of a decaying positive series, with the r^2 of the log fit."""
    t = np.asarray(times, dtype=float).reshape(-1, 1)
    y = np.log(np.asarray(values, dtype=float))
    model = LinearRegression().fit(t, y)
    return float(-model.coef_[0]), float(r2_score(y, model.predict(t)))


def run_oracle(diag: DiagonalizationResult, trunc: FockTruncation, temperature: float,
               channel_kind: str, rates: Tuple[float, float], method: str = "steady",
               t_end: Optional[float] = None) -> Dict[str, Any]:
    """Steady state (or evolved state) for one channel set, with diagnostics."""
    coeffs = bogoliubov_coefficients(diag)
    c, b = build_mode_operators(trunc)
    d1, d2 = build_dressed_operators(trunc, coeffs)
    H = hamiltonian_matrix(diag, d1, d2)
    e0, psi0 = ground_state(H)
    if channel_kind == "dressed":
        channels = dressed_channels(diag, d1, d2, rates, temperature)
    elif channel_kind == "bare":
        channels = bare_channels(diag, c, b, rates, temperature)
    elif channel_kind == "none":
        channels = []
    else:
        raise ParameterError(f"unknown oracle channel set {channel_kind!r}")

    diagnostics: Dict[str, float] = {}
    if method == "steady":
        rho = steady_state(H, channels, trunc)
        diagnostics["trace_error"] = abs(np.trace(rho).real - 1.0)
        diagnostics["min_eigenvalue"] = float(np.linalg.eigvalsh(rho).min())
    elif method == "evolve":
        rho0 = np.zeros((trunc.dim, trunc.dim), dtype=complex)
        rho0[0, 0] = 1.0
        dt = default_time_step(diag, channels)
        horizon = t_end if t_end is not None else 10.0 / min([r for r in rates if r > 0] or [0.1])
        traj = evolve(rho0, H, channels, horizon, dt, trunc)
        rho = traj.states[-1]
        energies = [expectation(r, H) for r in traj.states]
        diagnostics.update(traj.diagnostics)
        diagnostics["energy_drift"] = float(max(energies) - min(energies))
    else:
        raise ParameterError(f"unknown oracle method {method!r}")

    n1, n2 = thermal_occupations(rho, d1, d2)
    diagnostics["cmn_identity"] = cmn_identity_residual(diag, trunc)
    report = {
        "params": diag.params.to_dict(),
        "branch": diag.branch,
        "truncation": {"n_c": trunc.n_c, "n_b": trunc.n_b, "edge_threshold": trunc.edge_threshold},
        "T": temperature,
        "channels": channel_kind,
        "rates": list(rates),
        "steady_energy": expectation(rho, H),
        "ground_energy": e0,
        "fidelity": fidelity(rho, psi0),
        "occupations": [n1, n2],
        "residuals": diagnostics,
    }
    logging.info(f"oracle {channel_kind}: <H>={report['steady_energy']:.6g}, "
                 f"E0={e0:.6g}, fidelity={report['fidelity']:.6f}")
    return report
