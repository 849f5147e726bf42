"""
Superradiant-frame diagonalization of the extended Dicke model.

Around one SR minimum the photon is shifted by p0 and the spin rotated by
theta; with J_x = sqrt(S/2)(b + b^+) the quadratic Hamiltonian couples a
photon of frequency omega to a spin mode of frequency F.  A rotation by chi
and a Bogoliubov transform give the polaritons d1, d2 with energies eps1,
eps2.  This module also carries the dressed-dissipator constants A..F and
the effective viscosities built from the bath spectral densities.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from model import ModelParams, ParameterError, PhaseError, sr_minimum

HP_NORMALIZATIONS = ("compact", "conventional")


@dataclass(frozen=True)
class DiagonalizationResult:
    theta: float
    chi: float
    f_cap: float
    g_cap: float
    k_cap: float
    eps1: float
    eps2: float
    p0: float
    branch: int
    params: ModelParams = field(repr=False)
    # spin-mode frequency squared and photon-spin coupling of the quadratic form
    omega_s_sq: float = 0.0
    coupling: float = 0.0

    def to_dict(self) -> Dict[str, float]:
        return {
            "theta": self.theta,
            "chi": self.chi,
            "F": self.f_cap,
            "G": self.g_cap,
            "K": self.k_cap,
            "eps1": self.eps1,
            "eps2": self.eps2,
            "p0": self.p0,
            "branch": self.branch,
        }


@dataclass(frozen=True)
class BogoliubovCoefficients:
    alpha: Tuple[float, float]
    beta: Tuple[float, float]
    gamma: Tuple[float, float]
    delta: Tuple[float, float]

    def channel(self, m: int) -> Tuple[float, float, float, float]:
        i = m - 1
        return self.alpha[i], self.beta[i], self.gamma[i], self.delta[i]

    def norms(self) -> np.ndarray:
        a, b, c, d = (np.array(x) for x in (self.alpha, self.beta, self.gamma, self.delta))
        return a ** 2 - b ** 2 + c ** 2 - d ** 2

    def to_dict(self) -> Dict[str, list]:
        return {"alpha": list(self.alpha), "beta": list(self.beta),
                "gamma": list(self.gamma), "delta": list(self.delta)}


@dataclass(frozen=True)
class DressedCoefficients:
    a1: float
    a2: float
    b1: float
    b2: float
    c1: float
    c2: float
    d1: float
    d2: float
    e1: float
    e2: float
    f1: float
    f2: float

    def channel(self, m: int) -> Tuple[float, ...]:
        """(A, B, C, D, E, F) of channel m."""
        return tuple(getattr(self, f"{name}{m}") for name in "abcdef")

    def as_array(self) -> np.ndarray:
        return np.array([self.channel(1), self.channel(2)])

    def to_dict(self) -> Dict[str, float]:
        return {f"{name.upper()}{m}": getattr(self, f"{name}{m}")
                for m in (1, 2) for name in "abcdef"}


class OhmicSpectralDensity:
    """g(nu) alpha^2(nu) = (eta / pi) nu exp(-nu / cutoff)."""

    def __init__(self, eta: float, cutoff: float = 10.0):
        if eta < 0 or cutoff <= 0:
            raise ParameterError(f"ohmic bath needs eta >= 0 and cutoff > 0, got {eta}, {cutoff}")
        self.eta = eta
        self.cutoff = cutoff

    def __call__(self, nu):
        return self.eta / math.pi * nu * np.exp(-np.abs(nu) / self.cutoff)

    def __repr__(self):
        return f"OhmicSpectralDensity(eta={self.eta}, cutoff={self.cutoff})"


class FlatSpectralDensity:
    def __init__(self, eta: float):
        if eta < 0:
            raise ParameterError(f"flat bath needs eta >= 0, got {eta}")
        self.eta = eta

    def __call__(self, nu):
        return self.eta / math.pi + 0.0 * np.asarray(nu, dtype=float)

    def __repr__(self):
        return f"FlatSpectralDensity(eta={self.eta})"


@dataclass(frozen=True)
class BathSpec:
    spectral: Callable[[float], float]
    temperature: float = 0.0
    label: str = "a"

    def __post_init__(self):
        if self.temperature < 0:
            raise ParameterError(f"bath temperature must be non-negative, got {self.temperature}")
        if self.label not in ("a", "S"):
            raise ParameterError(f"bath label must be 'a' or 'S', got {self.label!r}")
        samples = np.asarray(self.spectral(np.geomspace(1e-3, 1e2, 25)), dtype=float)
        if np.any(samples < 0):
            raise ParameterError(f"spectral density of bath '{self.label}' is negative")

    def kappa(self, nu: float) -> float:
        """Decay rate pi g(nu) alpha^2(nu)."""
        value = float(self.spectral(nu))
        if value < 0:
            raise ParameterError(f"spectral density of bath '{self.label}' is negative at nu={nu}")
        return math.pi * value


def hp_scale_sq(s: float, normalization: str = "compact") -> float:
    """Square of the Holstein-Primakoff factor h in S^- -> h b."""
    if normalization == "compact":
        return s / 2.0
    if normalization == "conventional":
        return 2.0 * s
    raise ParameterError(f"unknown HP normalization {normalization!r} (choose from {HP_NORMALIZATIONS})")


def closed_form_energies_sq(omega: float, coupling: float, two_chi: float) -> Tuple[float, float]:
    ratio = coupling / math.sin(two_chi)
    cos2 = math.cos(two_chi)
    return omega ** 2 + ratio * (cos2 - 1.0), omega ** 2 + ratio * (cos2 + 1.0)


def diagonalize(params: ModelParams, branch: int = 1) -> DiagonalizationResult:
    sr = sr_minimum(params, branch)
    cos = math.cos(sr.theta)
    s, omega = params.s, params.omega
    if params.e_z <= 0 or cos <= 1e-12:
        raise PhaseError(f"degenerate superradiant frame: E_Z={params.e_z:.6g}, cos(theta)={cos:.3g}; "
                         f"the spin mode has no restoring field F = E_Z/cos(theta)")
    f_cap = params.e_z / cos
    g_cap = -0.5 * params.e_z * s * (1.0 + cos ** 2) / cos
    k_cap = 0.5 * (1.0 + params.eps) * params.g ** 2
    omega_s_sq = f_cap ** 2 + 2.0 * s * k_cap * f_cap * cos ** 2
    coupling = params.g * omega * math.sqrt(s * f_cap) * cos
    two_chi = math.atan2(2.0 * coupling, omega_s_sq - omega ** 2)
    eps1_sq, eps2_sq = closed_form_energies_sq(omega, coupling, two_chi)
    if eps1_sq <= 0 or eps2_sq <= 0:
        raise PhaseError(f"unstable polariton spectrum: eps^2 = ({eps1_sq:.6g}, {eps2_sq:.6g})")
    result = DiagonalizationResult(
        theta=sr.theta,
        chi=0.5 * two_chi,
        f_cap=f_cap,
        g_cap=g_cap,
        k_cap=k_cap,
        eps1=math.sqrt(eps1_sq),
        eps2=math.sqrt(eps2_sq),
        p0=sr.p_sr,
        branch=branch,
        params=params,
        omega_s_sq=omega_s_sq,
        coupling=coupling,
    )
    logging.info(f"diagonalized branch {branch:+d}: chi={result.chi:.6f}, "
                 f"eps1={result.eps1:.6f}, eps2={result.eps2:.6f}")
    return result


def energies_full(params: ModelParams, diag: DiagonalizationResult,
                  chi: Optional[float] = None) -> Tuple[float, float]:
    """Unsimplified two-mode energies, evaluated at diag.chi or a forced chi."""
    if diag.params != params:
        raise PhaseError("diagonalization was computed for different model parameters")
    chi = diag.chi if chi is None else chi
    omega_sq = params.omega ** 2
    mixing = (diag.omega_s_sq - omega_sq) * math.cos(2.0 * chi) + 2.0 * diag.coupling * math.sin(2.0 * chi)
    eps1_sq = 0.5 * (omega_sq + diag.omega_s_sq - mixing)
    eps2_sq = 0.5 * (omega_sq + diag.omega_s_sq + mixing)
    if eps1_sq <= 0 or eps2_sq <= 0:
        raise PhaseError(f"unstable polariton spectrum: eps^2 = ({eps1_sq:.6g}, {eps2_sq:.6g})")
    return math.sqrt(eps1_sq), math.sqrt(eps2_sq)


def bogoliubov_coefficients(diag: DiagonalizationResult) -> BogoliubovCoefficients:
    omega, f_cap = diag.params.omega, diag.f_cap
    cos, sin = math.cos(diag.chi), math.sin(diag.chi)

    def pair(weight: float, scale: float, energy: float) -> Tuple[float, float]:
        x = math.sqrt(scale / energy)
        return 0.5 * weight * (x + 1.0 / x), 0.5 * weight * (x - 1.0 / x)

    alpha1, beta1 = pair(cos, omega, diag.eps1)
    gamma1, delta1 = pair(sin, f_cap, diag.eps1)
    alpha2, beta2 = pair(-sin, omega, diag.eps2)
    gamma2, delta2 = pair(cos, f_cap, diag.eps2)
    return BogoliubovCoefficients(
        alpha=(alpha1, alpha2),
        beta=(beta1, beta2),
        gamma=(gamma1, gamma2),
        delta=(delta1, delta2),
    )


def bogoliubov_matrix(coeffs: BogoliubovCoefficients) -> np.ndarray:
    """Rows d1, d1^+, d2, d2^+ in the basis (c, c^+, b, b^+)."""
    rows = []
    for m in (1, 2):
        a, b, g, d = coeffs.channel(m)
        rows.append([a, b, g, d])
        rows.append([b, a, d, g])
    return np.array(rows)


def inverse_bogoliubov_matrix(coeffs: BogoliubovCoefficients) -> np.ndarray:
    """Rows c, c^+, b, b^+ in the basis (d1, d1^+, d2, d2^+)."""
    (a1, b1, g1, d1), (a2, b2, g2, d2) = coeffs.channel(1), coeffs.channel(2)
    return np.array([
        [a1, -b1, a2, -b2],
        [-b1, a1, -b2, a2],
        [g1, -d1, g2, -d2],
        [-d1, g1, -d2, g2],
    ])


def dressed_coefficients(diag: DiagonalizationResult) -> DressedCoefficients:
    omega, s, f_cap = diag.params.omega, diag.params.s, diag.f_cap
    cos, sin = math.cos(diag.chi), math.sin(diag.chi)
    sc = 0.5 * sin * cos
    b = sc / omega * math.sqrt(f_cap / s)
    c = sc * omega / math.sqrt(s * f_cap)
    e = sc * omega * math.sqrt(s / f_cap)
    f = sc * math.sqrt(s * f_cap) / omega
    return DressedCoefficients(
        a1=0.5 * cos ** 2, a2=0.5 * sin ** 2,
        b1=-b, b2=b,
        c1=-c, c2=c,
        d1=0.5 * sin ** 2, d2=0.5 * cos ** 2,
        e1=-e, e2=e,
        f1=-f, f2=f,
    )


def generic_dressed_coefficients(diag: DiagonalizationResult,
                                 coeffs: BogoliubovCoefficients) -> DressedCoefficients:
    """A..F from the rotated-frame dissipator of a generic d = alpha c + beta c^+ + gamma b + delta b^+."""
    omega, s = diag.params.omega, diag.params.s
    values = {}
    for m in (1, 2):
        a, b, g, d = coeffs.channel(m)
        values[f"a{m}"] = 0.5 * (a ** 2 - b ** 2)
        values[f"b{m}"] = 0.5 * math.sqrt(1.0 / (omega * s)) * (b - a) * (d + g)
        values[f"c{m}"] = 0.5 * (a + b) * (d - g) * math.sqrt(omega / s)
        values[f"d{m}"] = 0.5 * (g ** 2 - d ** 2)
        values[f"e{m}"] = 0.5 * (d - g) * (a + b) * math.sqrt(omega * s)
        values[f"f{m}"] = 0.5 * (d + g) * (b - a) * math.sqrt(s / omega)
    return DressedCoefficients(**values)


def effective_viscosities(diag: DiagonalizationResult, bath_a: BathSpec, bath_s: BathSpec,
                          params: ModelParams, hp_normalization: str = "compact") -> Tuple[float, float]:
    if diag.params != params:
        raise PhaseError("diagonalization was computed for different model parameters")
    coeffs = bogoliubov_coefficients(diag)
    h_sq = hp_scale_sq(params.s, hp_normalization)
    rates = []
    for m, energy in ((1, diag.eps1), (2, diag.eps2)):
        alpha, beta, gamma, delta = coeffs.channel(m)
        photon_weight = (alpha - beta) ** 2
        spin_weight = h_sq * (gamma - delta) ** 2
        rates.append(bath_a.kappa(energy) * photon_weight + bath_s.kappa(energy) * spin_weight)
    logging.info(f"effective viscosities: kappa_eff1={rates[0]:.6g}, kappa_eff2={rates[1]:.6g}")
    return rates[0], rates[1]
