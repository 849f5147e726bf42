"""
Extended Dicke model: physical parameters, semiclassical energy and the
closed-form equilibrium points of the normal and superradiant phases.

    H = 1/2 (p^2 + w^2 q^2) + g p S_y - E_Z S_z + (1 + eps) g^2/2 S_y^2
"""
import logging
import math
from dataclasses import asdict, dataclass, fields, replace
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np

NORMAL = "Normal"
SUPERRADIANT = "Superradiant"

STATE_COMPONENTS = ("q", "p", "sx", "sy", "sz")


class ParameterError(ValueError):
    """Invalid physical or numerical parameter."""


class PhaseError(ValueError):
    """Operation requested in the wrong phase or for the wrong branch."""


@dataclass(frozen=True)
class ModelParams:
    omega: float = 1.0
    e_z: float = 0.2
    g: float = 0.46
    eps: float = -1.0
    s: float = 1.0
    kappa1: float = 0.0
    kappa2: float = 0.0
    # N in the bare spin pump term; None means N = 2S
    n_atoms: Optional[float] = None

    def __post_init__(self):
        for name in ("omega", "e_z", "g", "eps", "s", "kappa1", "kappa2"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ParameterError(f"{name} must be finite, got {value}")
        if self.omega <= 0:
            raise ParameterError(f"omega must be positive, got {self.omega}")
        if self.e_z < 0:
            raise ParameterError(f"e_z must be non-negative, got {self.e_z}")
        if self.s <= 0:
            raise ParameterError(f"s must be positive, got {self.s}")
        if self.kappa1 < 0 or self.kappa2 < 0:
            raise ParameterError(f"damping rates must be non-negative, got {self.kappa1}, {self.kappa2}")
        if self.n_atoms is not None and self.n_atoms <= 0:
            raise ParameterError(f"n_atoms must be positive, got {self.n_atoms}")

    @property
    def n(self) -> float:
        return 2.0 * self.s if self.n_atoms is None else float(self.n_atoms)

    @classmethod
    def from_dict(cls, block: Dict[str, Any]) -> "ModelParams":
        known = {f.name for f in fields(cls)}
        unknown = set(block) - known
        if unknown:
            raise ParameterError(f"unknown model keys: {sorted(unknown)}")
        values = {}
        for key, value in block.items():
            if key == "n_atoms" and value is None:
                values[key] = None
                continue
            try:
                values[key] = float(value)
            except (TypeError, ValueError):
                raise ParameterError(f"model.{key} is not a number: {value!r}")
        return cls(**values)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def with_changes(self, **changes) -> "ModelParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class SemiclassicalState:
    q: float
    p: float
    sx: float
    sy: float
    sz: float

    def as_array(self) -> np.ndarray:
        return np.array([self.q, self.p, self.sx, self.sy, self.sz], dtype=float)

    @classmethod
    def from_array(cls, values) -> "SemiclassicalState":
        arr = np.asarray(values, dtype=float)
        if arr.shape != (5,):
            raise ParameterError(f"expected 5 state components, got shape {arr.shape}")
        return cls(*(float(v) for v in arr))

    def spin_norm(self) -> float:
        return math.sqrt(self.sx ** 2 + self.sy ** 2 + self.sz ** 2)


@dataclass(frozen=True)
class SRMinimum:
    theta: float
    sy_sr: float
    sz_sr: float
    p_sr: float
    energy: float
    branch: int

    @property
    def state(self) -> SemiclassicalState:
        return SemiclassicalState(0.0, self.p_sr, 0.0, self.sy_sr, self.sz_sr)


StateLike = Union[SemiclassicalState, np.ndarray, Tuple[float, ...]]


def as_state_array(state: StateLike) -> np.ndarray:
    if isinstance(state, SemiclassicalState):
        return state.as_array()
    return np.asarray(state, dtype=float)


def energy(state: StateLike, params: ModelParams):
    """Semiclassical energy; accepts one state or an (n, 5) stack."""
    arr = as_state_array(state)
    q, p, _, sy, sz = np.moveaxis(arr, -1, 0)
    value = (0.5 * (p ** 2 + params.omega ** 2 * q ** 2)
             + params.g * p * sy
             - params.e_z * sz
             + (1.0 + params.eps) * 0.5 * params.g ** 2 * sy ** 2)
    if np.ndim(value) == 0:
        return float(value)
    return value


def normal_minimum(params: ModelParams) -> Tuple[SemiclassicalState, float]:
    state = SemiclassicalState(0.0, 0.0, 0.0, 0.0, params.s)
    return state, -params.e_z * params.s


def critical_coupling_undamped(params: ModelParams) -> float:
    """g_c = sqrt(-E_Z / (eps S)); only defined for eps < 0."""
    if params.eps >= 0:
        raise ParameterError(f"critical coupling needs eps < 0, got eps={params.eps}")
    return math.sqrt(-params.e_z / (params.eps * params.s))


def classify_phase(params: ModelParams) -> str:
    if params.eps < 0 and params.g > critical_coupling_undamped(params):
        return SUPERRADIANT
    return NORMAL


def _sr_branch(params: ModelParams, branch: int) -> SRMinimum:
    sz = -params.e_z / (params.eps * params.g ** 2)
    sy = branch * math.sqrt(max(params.s ** 2 - sz ** 2, 0.0))
    e_sr = -params.e_z * sz + 0.5 * params.eps * params.g ** 2 * (params.s ** 2 - sz ** 2)
    return SRMinimum(
        theta=math.atan2(sy, sz),
        sy_sr=sy,
        sz_sr=sz,
        p_sr=-params.g * sy,
        energy=e_sr,
        branch=branch,
    )


def superradiant_minima(params: ModelParams) -> Optional[Tuple[SRMinimum, SRMinimum]]:
    """Both degenerate minima (branch +1, branch -1), or None in the normal phase."""
    if classify_phase(params) != SUPERRADIANT:
        return None
    return _sr_branch(params, +1), _sr_branch(params, -1)


def sr_minimum(params: ModelParams, branch: int = 1) -> SRMinimum:
    """Superradiant minimum on one branch; PhaseError in the normal phase."""
    if branch not in (1, -1):
        raise ParameterError(f"branch must be +1 or -1, got {branch}")
    minima = superradiant_minima(params)
    if minima is None:
        raise PhaseError(
            f"no superradiant minimum: g={params.g}, eps={params.eps} is in the normal phase")
    return minima[0] if branch == 1 else minima[1]


def phase_summary(params: ModelParams) -> Dict[str, Any]:
    """Phase label and both minimum energies, as used by the sweep grid."""
    phase = classify_phase(params)
    _, e_normal = normal_minimum(params)
    minima = superradiant_minima(params)
    summary = {
        "phase": phase,
        "e_normal": e_normal,
        "e_sr": minima[0].energy if minima else float("nan"),
        "g_c": critical_coupling_undamped(params) if params.eps < 0 else float("nan"),
    }
    logging.debug(f"phase at g={params.g}, eps={params.eps}: {phase}")
    return summary
