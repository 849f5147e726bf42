"""
Semiclassical equations of motion (operators replaced by c-numbers,
{A, B} -> 2AB) for every dissipator family, plus the shifted harmonic
oscillator toy model.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, List, Optional, Tuple

import numpy as np

from diag import DiagonalizationResult, dressed_coefficients
from model import (ModelParams, ParameterError, PhaseError, SemiclassicalState,
                   SRMinimum, SUPERRADIANT, as_state_array, classify_phase,
                   sr_minimum)

Rhs = Callable[[float, np.ndarray], np.ndarray]


class DissipatorKind(Enum):
    NONE = "none"
    BARE = "bare"
    ADHOC = "adhoc"
    DRESSED = "dressed"

    @classmethod
    def parse(cls, value) -> "DissipatorKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            choices = ", ".join(k.value for k in cls)
            raise ParameterError(f"unknown dissipator '{value}' (choose from {choices})")


@dataclass(frozen=True)
class ShiftedHOParams:
    omega: float = 1.0
    p0: float = 1.0
    kappa: float = 0.1
    shifted_dissipator: bool = False

    def __post_init__(self):
        if self.omega <= 0:
            raise ParameterError(f"omega must be positive, got {self.omega}")
        if self.kappa < 0:
            raise ParameterError(f"kappa must be non-negative, got {self.kappa}")


def _hamiltonian_flow(y: np.ndarray, params: ModelParams) -> np.ndarray:
    q, p, sx, sy, sz = y
    g, e_z = params.g, params.e_z
    dipole = (1.0 + params.eps) * g ** 2
    return np.array([
        p + g * sy,
        -params.omega ** 2 * q,
        g * p * sz + e_z * sy + dipole * sy * sz,
        -e_z * sx,
        -g * p * sx - dipole * sx * sy,
    ])


def _rates(params: ModelParams) -> np.ndarray:
    return np.array([params.kappa1, params.kappa1, params.kappa2, params.kappa2, params.kappa2])


def unitary_rhs(state, params: ModelParams) -> np.ndarray:
    """Hamiltonian flow (dq, dp, dS) for one state; conserves energy and |S|."""
    return _hamiltonian_flow(as_state_array(state), params)


def bare_dissipator(state, params: ModelParams) -> np.ndarray:
    """Unrotated photon loss and spin relaxation toward S_z = N/2, before the rates."""
    q, p, sx, sy, sz = as_state_array(state)
    return np.array([-q, -p, -sx, -sy, params.n - 2.0 * sz])


def bare_rhs(state, params: ModelParams) -> np.ndarray:
    """Unitary flow plus the bare dissipator.

    Its nontrivial fixed points share the energy of the trivial point for any damping,
    above the superradiant minimum.
    """
    y = as_state_array(state)
    return _hamiltonian_flow(y, params) + _rates(params) * bare_dissipator(y, params)


def adhoc_dissipator(state, s: float, theta: float, p0: float) -> np.ndarray:
    """Bare dissipator shifted by p0 and rotated by theta onto the condensate."""
    q, p, sx, sy, sz = as_state_array(state)
    sin, cos = math.sin(theta), math.cos(theta)
    return np.array([
        -q,
        -(p - p0),
        -sx,
        2.0 * sin * s - (1.0 + sin ** 2) * sy - sin * cos * sz,
        2.0 * cos * s - sin * cos * sy - (1.0 + cos ** 2) * sz,
    ])


def _require_superradiant(params: ModelParams, what: str):
    if classify_phase(params) != SUPERRADIANT:
        raise PhaseError(f"{what} dissipator needs the superradiant phase "
                         f"(g={params.g}, eps={params.eps})")


def adhoc_rotated_rhs(state, params: ModelParams, sr: SRMinimum) -> np.ndarray:
    _require_superradiant(params, "ad-hoc rotated")
    y = as_state_array(state)
    damping = _rates(params) * adhoc_dissipator(y, params.s, sr.theta, sr.p_sr)
    return _hamiltonian_flow(y, params) + damping


def dressed_channel_dissipator(state, s: float, theta: float, p0: float, table) -> np.ndarray:
    """One polariton channel in the lab frame; table = (A, B, C, D, E, F)."""
    a, b, c, d, e, f = table
    q, p, sx, sy, sz = as_state_array(state)
    sin, cos = math.sin(theta), math.cos(theta)
    sin2 = math.sin(2.0 * theta)
    dp = p - p0
    return np.array([
        -a * q + b * sx,
        -a * dp + c * cos * sy - c * sin * sz,
        -d * sx + e * q,
        (f * cos * dp + c * sin * q * sx + 2.0 * d * sin * s
         - (d * (1.0 + sin ** 2) - 0.5 * b * sin2 * dp) * sy
         + (-b * sin ** 2 * dp - 0.5 * d * sin2) * sz),
        (2.0 * d * cos * s - f * sin * dp + c * cos * q * sx
         - (0.5 * d * sin2 - b * cos ** 2 * dp) * sy
         + (-0.5 * b * sin2 * dp - d * (1.0 + cos ** 2)) * sz),
    ])


def _check_dressed(params: ModelParams, diag: DiagonalizationResult, branch: Optional[int]):
    _require_superradiant(params, "dressed")
    if diag.params != params:
        raise PhaseError("diagonalization was computed for different model parameters")
    if branch is not None and branch != diag.branch:
        raise PhaseError(f"diagonalization is for branch {diag.branch:+d}, requested {branch:+d}")


def _dressed_flow(y: np.ndarray, params: ModelParams, diag: DiagonalizationResult,
                  tables, kappa_eff) -> np.ndarray:
    derivative = _hamiltonian_flow(y, params)
    for kappa, table in zip(kappa_eff, tables):
        if kappa:
            derivative = derivative + kappa * dressed_channel_dissipator(
                y, params.s, diag.theta, diag.p0, table)
    return derivative


def dressed_rhs(state, params: ModelParams, diag: DiagonalizationResult,
                kappa_eff: Tuple[float, float], branch: Optional[int] = None) -> np.ndarray:
    _check_dressed(params, diag, branch)
    table = dressed_coefficients(diag)
    return _dressed_flow(as_state_array(state), params, diag,
                         (table.channel(1), table.channel(2)), kappa_eff)


def make_rhs(kind, params: ModelParams, branch: int = 1,
             diag: Optional[DiagonalizationResult] = None,
             kappa_eff: Optional[Tuple[float, float]] = None) -> Rhs:
    """Closure f(t, y) for the integrator; phase and branch are checked once here."""
    kind = DissipatorKind.parse(kind)
    if kind is DissipatorKind.NONE:
        return lambda t, y: _hamiltonian_flow(y, params)
    if kind is DissipatorKind.BARE:
        return lambda t, y: bare_rhs(y, params)
    if kind is DissipatorKind.ADHOC:
        _require_superradiant(params, "ad-hoc rotated")
        sr = sr_minimum(params, branch)
        rates = _rates(params)
        return lambda t, y: (_hamiltonian_flow(y, params)
                             + rates * adhoc_dissipator(y, params.s, sr.theta, sr.p_sr))
    if diag is None:
        raise ParameterError("dressed dissipator needs a diagonalization result")
    _check_dressed(params, diag, branch)
    if kappa_eff is None:
        kappa_eff = (params.kappa1, params.kappa2)
    rates = (float(kappa_eff[0]), float(kappa_eff[1]))
    table = dressed_coefficients(diag)
    tables = (table.channel(1), table.channel(2))
    logging.info(f"dressed dissipator, branch {branch:+d}, kappa_eff = ({rates[0]:.6g}, {rates[1]:.6g})")
    return lambda t, y: _dressed_flow(y, params, diag, tables, rates)


def u_factor(params: ModelParams) -> float:
    return 1.0 + params.kappa1 ** 2 / params.omega ** 2


def v_factor(params: ModelParams) -> float:
    if params.e_z == 0:
        raise ParameterError("v = 1 + kappa2^2 / E_Z^2 is undefined for e_z = 0")
    return 1.0 + params.kappa2 ** 2 / params.e_z ** 2


def damped_critical_values(params: ModelParams) -> Tuple[float, float]:
    """(g_c, eps_c) beyond which the bare flow has superradiant fixed points."""
    u, v = u_factor(params), v_factor(params)
    denominator = 1.0 - (1.0 + params.eps) * u
    if denominator <= 0:
        raise ParameterError(
            f"no damped critical coupling: 1 - (1 + eps) u = {denominator:.6g} is not positive")
    g_c = math.sqrt(2.0 * params.e_z / params.n * u * v / denominator)
    return g_c, 1.0 / u - 1.0


def bare_fixed_points(params: ModelParams) -> List[SemiclassicalState]:
    """Trivial point first, then the +/- pair when the damped thresholds are crossed."""
    points = [SemiclassicalState(0.0, 0.0, 0.0, 0.0, params.n / 2.0)]
    if params.e_z == 0:
        return points
    u, v = u_factor(params), v_factor(params)
    denominator = 1.0 - (1.0 + params.eps) * u
    if denominator <= 0:
        return points
    g_c, eps_c = damped_critical_values(params)
    if params.eps > eps_c or params.g < g_c:
        return points
    sz = params.e_z / params.g ** 2 * u * v / denominator
    sy_abs = math.sqrt(max(sz * (params.n - 2.0 * sz) / v, 0.0))
    for sign in (1.0, -1.0):
        sy = sign * sy_abs
        p = -params.g / u * sy
        points.append(SemiclassicalState(
            q=-params.kappa1 / params.omega ** 2 * p,
            p=p,
            sx=-params.kappa2 / params.e_z * sy,
            sy=sy,
            sz=sz,
        ))
    return points


def shifted_ho_rhs(state, hop: ShiftedHOParams) -> np.ndarray:
    q, p = np.asarray(state, dtype=float)
    damped_p = p - hop.p0 if hop.shifted_dissipator else p
    return np.array([p - hop.p0 - hop.kappa * q,
                     -hop.omega ** 2 * q - hop.kappa * damped_p])


def shifted_ho_fixed_point(hop: ShiftedHOParams) -> Tuple[float, float]:
    if hop.shifted_dissipator:
        return 0.0, hop.p0
    q = -hop.kappa / (hop.omega ** 2 + hop.kappa ** 2) * hop.p0
    p = hop.p0 / (1.0 + (hop.kappa / hop.omega) ** 2)
    return q, p


def shifted_ho_solution(state0, hop: ShiftedHOParams, t: float) -> np.ndarray:
    """Closed-form (q, p) at time t; both variants are linear about their fixed point."""
    fixed = np.array(shifted_ho_fixed_point(hop))
    dq, dp = np.asarray(state0, dtype=float) - fixed
    w = hop.omega
    decay = math.exp(-hop.kappa * t)
    cos, sin = math.cos(w * t), math.sin(w * t)
    return fixed + decay * np.array([cos * dq + sin / w * dp, -w * sin * dq + cos * dp])
