"""SI physical constants and reference collapse-model parameters.

Values come from :mod:`scipy.constants` (CODATA 2018). The Planck units are
derived from hbar, G and c rather than taken from the CODATA table so that
the defining identities hold to rounding error.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import scipy.constants as sc

from .errors import InvalidArgumentError


@dataclass(frozen=True)
class PhysicalConstants:
    hbar: float
    G: float
    c: float
    amu: float
    m_nucleon: float
    g_earth: float
    planck_length: float
    planck_mass: float
    e_charge: float
    eps0: float
    k_B: float
    m_electron: float
    bohr_radius: float

    @property
    def h(self) -> float:
        return 2.0 * math.pi * self.hbar

    @classmethod
    def codata(cls) -> "PhysicalConstants":
        hbar, G, c = sc.hbar, sc.G, sc.c
        return cls(
            hbar=hbar,
            G=G,
            c=c,
            amu=sc.physical_constants["atomic mass constant"][0],
            m_nucleon=sc.m_p,
            g_earth=sc.g,
            planck_length=math.sqrt(hbar * G / c**3),
            planck_mass=math.sqrt(hbar * c / G),
            e_charge=sc.e,
            eps0=sc.epsilon_0,
            k_B=sc.k,
            m_electron=sc.m_e,
            bohr_radius=sc.physical_constants["Bohr radius"][0],
        )


CONST = PhysicalConstants.codata()

# Reference parameter values used throughout the literature on collapse models.
LAMBDA0_QMUPL = 1e-2  # m^-2 s^-1
LAMBDA_GRW = 1e-16  # s^-1
R_C = 1e-7  # m
GAMMA_CSL = 1e-36  # m^3 s^-1  (1e-30 cm^3 s^-1)
LAMBDA_CSL = 2.2e-17  # s^-1
LAMBDA_ADLER = 2.2e-8  # s^-1, centre of the 10^(-8 +/- 2) band
# Lower edge of Adler's band; gives 2.2e-2 s^-1 for 1e4 and 2.2e2 s^-1 for 1e6
# nucleons at full separation.
LAMBDA_ADLER_LOW = 2.2e-10  # s^-1


class ModelKind(enum.Enum):
    QMUPL = "qmupl"
    GRW = "grw"
    CSL = "csl"


@dataclass(frozen=True)
class CollapseModelParams:
    """Parameters of one collapse-model instance.

    ``lambda0`` is in m^-2 s^-1 for QMUPL and s^-1 for GRW/CSL. ``r_c`` is
    ignored by QMUPL.
    """

    model_kind: ModelKind
    lambda0: float
    r_c: float = R_C
    m0: float = CONST.m_nucleon

    def __post_init__(self):
        if not isinstance(self.model_kind, ModelKind):
            object.__setattr__(self, "model_kind", ModelKind(self.model_kind))
        if not self.lambda0 >= 0:
            raise InvalidArgumentError(f"lambda0 must be >= 0, got {self.lambda0}")
        if not self.r_c > 0:
            raise InvalidArgumentError(f"r_c must be > 0, got {self.r_c}")
        if not self.m0 > 0:
            raise InvalidArgumentError(f"m0 must be > 0, got {self.m0}")

    @classmethod
    def qmupl(cls, lambda0: float = LAMBDA0_QMUPL) -> "CollapseModelParams":
        return cls(ModelKind.QMUPL, lambda0)

    @classmethod
    def grw(cls, lambda_grw: float = LAMBDA_GRW, r_c: float = R_C) -> "CollapseModelParams":
        return cls(ModelKind.GRW, lambda_grw, r_c)

    @classmethod
    def csl(cls, lambda_csl: float = LAMBDA_CSL, r_c: float = R_C) -> "CollapseModelParams":
        return cls(ModelKind.CSL, lambda_csl, r_c)
