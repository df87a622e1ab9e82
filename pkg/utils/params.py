"""
Physical and dimensionless parameters

PhysicalParams carries mu, k, alpha and the derived coefficients every
assembly routine needs; DimensionlessParams carries (S, Da, alpha) plus the
characteristic scales and maps onto PhysicalParams.
"""

import itertools
import logging
import math
import numbers
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .errors import ParameterError

logger = logging.getLogger(__name__)

DEFAULT_S_VALUES = (1e1, 1e-1, 1e-3, 1e-5)
DEFAULT_DA_VALUES = (1.0, 1e-2, 1e-4, 1e-8, 1e-11, 1e-14)
DEFAULT_ALPHA_VALUES = (0.0, 1.0, 10.0, 100.0)
DEFAULT_NX_VALUES = (16, 32, 64, 128)


def _require_positive(name: str, value: float):
    if isinstance(value, bool) or not (isinstance(value, numbers.Real) and math.isfinite(value) and value > 0):
        raise ParameterError(f"{name} must be a positive finite number, got {value!r}")


@dataclass(frozen=True)
class BetaNMode:
    """
    Choice of the interface Robin coefficient beta_n

    consistent: beta_n = h_K / kappa per facet (the only consistent choice)
    fixed: beta_n = value for every facet (model-parameter studies)
    """
    kind: str = "consistent"
    value: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("consistent", "fixed"):
            raise ParameterError(f"Unknown beta_n mode '{self.kind}'")
        if self.kind == "fixed":
            _require_positive("beta_n", self.value)

    @classmethod
    def consistent(cls) -> "BetaNMode":
        return cls("consistent")

    @classmethod
    def fixed(cls, value: float) -> "BetaNMode":
        return cls("fixed", float(value))

    @classmethod
    def parse(cls, text) -> "BetaNMode":
        """Parse 'consistent' or a positive number"""
        if isinstance(text, BetaNMode):
            return text
        token = str(text).strip().lower()
        if token == "consistent":
            return cls.consistent()
        try:
            value = float(token)
        except ValueError:
            raise ParameterError(f"beta_n must be 'consistent' or a positive number, got {text!r}")
        return cls.fixed(value)

    def label(self) -> str:
        return "consistent" if self.kind == "consistent" else repr(self.value)


@dataclass(frozen=True)
class PhysicalParams:
    """
    Viscosity mu [Pa s], permeability k [m^2], slip coefficient alpha [-]

    kappa = k / mu and beta_tau = mu * alpha / sqrt(k) are stored at
    construction so every consumer sees the same rounded values.
    """
    mu: float
    k: float
    alpha: float = 1.0
    beta_n_mode: BetaNMode = field(default_factory=BetaNMode.consistent)
    kappa: float = field(init=False)
    beta_tau: float = field(init=False)

    def __post_init__(self):
        _require_positive("mu", self.mu)
        _require_positive("k", self.k)
        if not (math.isfinite(self.alpha) and self.alpha >= 0):
            raise ParameterError(f"alpha must be a nonnegative finite number, got {self.alpha!r}")
        object.__setattr__(self, "kappa", self.k / self.mu)
        object.__setattr__(self, "beta_tau", self.mu * self.alpha / math.sqrt(self.k))

    def beta_n(self, h_K: float) -> float:
        """Robin coefficient of a facet whose Darcy centroid lies h_K away"""
        if self.beta_n_mode.kind == "fixed":
            return self.beta_n_mode.value
        return h_K / self.kappa

    def to_dict(self) -> Dict[str, float]:
        return {
            "mu": self.mu,
            "k": self.k,
            "alpha": self.alpha,
            "kappa": self.kappa,
            "beta_tau": self.beta_tau,
            "beta_n": self.beta_n_mode.label(),
        }


@dataclass(frozen=True)
class DimensionlessParams:
    """
    Free-flow number S, Darcy number Da and slip coefficient alpha, with the
    characteristic velocity U0, pressure difference DeltaP0, length L0 and
    density rho0
    """
    S: float
    Da: float
    alpha: float = 1.0
    U0: float = 1.0
    DeltaP0: float = 1.0
    L0: float = 1.0
    rho0: float = 1.0


def from_dimensionless(d: DimensionlessParams, beta_n_mode: BetaNMode = None) -> PhysicalParams:
    """
    Map (S, Da, alpha) to (mu, k, alpha)

    S = U0 mu / (L0 DeltaP0) and Da = k / L0^2, so with unit scales mu = S and k = Da.
    """
    for name in ("S", "Da", "U0", "DeltaP0", "L0", "rho0"):
        _require_positive(name, getattr(d, name))
    mu = d.S * d.L0 * d.DeltaP0 / d.U0
    k = d.Da * d.L0 ** 2
    return PhysicalParams(
        mu=mu, k=k, alpha=d.alpha,
        beta_n_mode=beta_n_mode if beta_n_mode is not None else BetaNMode.consistent(),
    )


def scales_to_dimensionless(
    mu: float, k: float, U0: float = 1.0, DeltaP0: float = 1.0, L0: float = 1.0
) -> Tuple[float, float]:
    """Inverse of from_dimensionless: returns (S, Da)"""
    for name, value in (("mu", mu), ("k", k), ("U0", U0), ("DeltaP0", DeltaP0), ("L0", L0)):
        _require_positive(name, value)
    return U0 * mu / (L0 * DeltaP0), k / L0 ** 2


@dataclass(frozen=True)
class SweepCase:
    """One point of a parameter sweep"""
    index: int
    S: float
    Da: float
    alpha: float
    nx: int
    params: PhysicalParams


def sweep_grid(
    S_values: Iterable[float] = DEFAULT_S_VALUES,
    Da_values: Iterable[float] = DEFAULT_DA_VALUES,
    alpha_values: Iterable[float] = DEFAULT_ALPHA_VALUES,
    nx_values: Iterable[int] = DEFAULT_NX_VALUES,
    scales: Optional[DimensionlessParams] = None,
    beta_n_mode: BetaNMode = None,
) -> List[SweepCase]:
    """
    Cartesian product of the sweep axes in (S, Da, alpha, nx) order

    Args:
        S_values, Da_values, alpha_values, nx_values: Axis ticks
        scales: Supplies U0, DeltaP0, L0, rho0 (unit scales when omitted)
        beta_n_mode: Robin coefficient mode applied to every case

    Returns:
        Cases in deterministic grid order
    """
    axes = [tuple(S_values), tuple(Da_values), tuple(alpha_values), tuple(nx_values)]
    if any(len(axis) == 0 for axis in axes):
        raise ParameterError("Every sweep axis needs at least one value")
    base = scales if scales is not None else DimensionlessParams(S=1.0, Da=1.0)
    cases = []
    for index, (S, Da, alpha, nx) in enumerate(itertools.product(*axes)):
        d = DimensionlessParams(
            S=S, Da=Da, alpha=alpha,
            U0=base.U0, DeltaP0=base.DeltaP0, L0=base.L0, rho0=base.rho0,
        )
        cases.append(SweepCase(index, S, Da, alpha, int(nx), from_dimensionless(d, beta_n_mode)))
    logger.debug(f"Sweep grid with {len(cases)} cases")
    return cases


@dataclass(frozen=True)
class ApplicationPreset:
    """Parameter window of one application scenario"""
    name: str
    description: str
    S_values: Tuple[float, ...]
    Da_values: Tuple[float, ...]
    alpha_values: Tuple[float, ...]


def application_presets() -> Dict[str, ApplicationPreset]:
    """Application scenarios motivating the sweep ranges"""
    presets = [
        ApplicationPreset(
            name="microchannel",
            description="Water channel over a regular micro-model porous medium",
            S_values=(1.0,),
            Da_values=(4e-4, 4.0),
            alpha_values=(2.26,),
        ),
        ApplicationPreset(
            name="wind_tunnel",
            description="Low-Reynolds air flow over a sand box",
            S_values=(10.0,),
            Da_values=(1e-10,),
            alpha_values=(1.0, 10.0),
        ),
        ApplicationPreset(
            name="csf",
            description="Cerebrospinal fluid in the sub-arachnoid space over brain tissue",
            S_values=(5e-4, 5e-1),
            Da_values=(2.5e-13, 2.5e-11),
            alpha_values=(1.0, 10.0),
        ),
    ]
    return {p.name: p for p in presets}


def parse_float_list(text: str) -> Sequence[float]:
    """Parse a comma separated list of numbers"""
    try:
        values = tuple(float(token) for token in str(text).split(",") if token.strip())
    except ValueError:
        raise ParameterError(f"Expected a comma separated list of numbers, got {text!r}")
    if not values:
        raise ParameterError("Empty value list")
    return values
