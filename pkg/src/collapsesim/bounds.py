"""Bounds on the collapse rate from heating, photon emission and the literature table."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ._toml import load_data
from .core.constants import CONST, R_C
from .core.errors import DomainError, InvalidArgumentError

EXCLUDED = "Excluded"
XRAY_CUTOFF = 1e18  # s^-1


class Category(enum.Enum):
    LABORATORY = "laboratory"
    COSMOLOGICAL = "cosmological"


@dataclass(frozen=True)
class BoundEntry:
    name: str
    lambda_max: float
    r_c_assumed: float = R_C
    category: Category = Category.LABORATORY
    note: str = ""
    source: str = ""

    def __post_init__(self):
        if not self.lambda_max > 0:
            raise InvalidArgumentError(f"lambda_max must be positive for {self.name!r}")
        if not isinstance(self.category, Category):
            object.__setattr__(self, "category", Category(self.category))


@dataclass(frozen=True)
class Catalog:
    entries: tuple[BoundEntry, ...]
    reference: dict
    igm_budget: dict


def load_catalog() -> Catalog:
    data = load_data("bounds.toml")
    return Catalog(tuple(BoundEntry(**row) for row in data["bound"]), dict(data["reference"]),
                   dict(data["igm_budget"]))


def heating_rate(total_mass: float, r_c: float, lam: float) -> float:
    """Collapse-driven power (W): (3/4) lam hbar^2 M / (r_c^2 m_N^2)."""
    if total_mass < 0 or lam < 0 or not r_c > 0:
        raise InvalidArgumentError("need total_mass >= 0, lam >= 0, r_c > 0")
    return 0.75 * lam * CONST.hbar**2 * total_mass / (r_c**2 * CONST.m_nucleon**2)


def igm_heating_budget(temperature: float, duration: float) -> float:
    """Power per proton needed to deposit (3/2) k_B T over ``duration``."""
    return 1.5 * CONST.k_B * temperature / duration


def igm_lambda_bound(temperature: float, duration: float, r_c: float = R_C) -> float:
    """lambda at which proton heating alone matches the IGM budget."""
    return igm_heating_budget(temperature, duration) / heating_rate(CONST.m_nucleon, r_c, 1.0)


def _check_k(k):
    k = np.asarray(k, dtype=float)
    if np.any(k <= 0):
        raise DomainError("photon momentum k must be positive")
    return k


def _out(v):
    return float(v) if np.ndim(v) == 0 else v


def photon_emission_rate_free(k, lam: float, m0: float = CONST.m_nucleon):
    """dGamma/dk for a free charged particle: e^2 lam hbar / (2 pi^2 eps0 m0^2 c^3 k)."""
    k = _check_k(k)
    if lam < 0:
        raise InvalidArgumentError("lam must be non-negative")
    pref = CONST.e_charge**2 * CONST.hbar / (2.0 * math.pi**2 * CONST.eps0 * m0**2 * CONST.c**3)
    return _out(pref * lam / k)


def hydrogen_factor(k, a0_bohr: float = CONST.bohr_radius):
    """2[1 - (1 + (k a0 / 2)^2)^-2]: 0 for k -> 0, 2 for k a0 >> 1."""
    k = _check_k(k)
    u = (k * a0_bohr / 2.0) ** 2
    # 1 - (1+u)^-2 = u (2 + u) / (1 + u)^2, exact for small u
    return _out(2.0 * u * (2.0 + u) / (1.0 + u) ** 2)


def photon_emission_rate_hydrogen(k, lam: float, a0_bohr: float = CONST.bohr_radius,
                                  m0: float = CONST.m_nucleon):
    return _out(hydrogen_factor(k, a0_bohr) * np.asarray(photon_emission_rate_free(k, lam, m0)))


def white_spectrum(omega):
    return np.ones_like(np.asarray(omega, dtype=float))


def cutoff_spectrum(cutoff: float = XRAY_CUTOFF) -> Callable:
    """Flat spectrum up to ``cutoff`` (s^-1) and zero above."""
    def gamma(omega):
        return np.where(np.asarray(omega, dtype=float) <= cutoff, 1.0, 0.0)
    return gamma


def colored_noise_multiplier(gamma_of_omega: Callable, omega_k):
    """Noise spectrum value multiplying emission rates at photon frequency omega_k."""
    return _out(np.asarray(gamma_of_omega(omega_k), dtype=float))


def distance(bound: float, reference: float):
    """Orders of magnitude between a bound and a reference rate, or ``EXCLUDED``."""
    d = int(round(math.log10(bound / reference)))
    return EXCLUDED if d < 0 else d


@dataclass(frozen=True)
class TableRow:
    name: str
    category: str
    lambda_max: float
    csl_distance: object
    adler_distance: object


def table1(catalog: Catalog | None = None) -> list[TableRow]:
    catalog = catalog or load_catalog()
    ref = catalog.reference
    return [TableRow(e.name, e.category.value, e.lambda_max, distance(e.lambda_max, ref["csl"]),
                     distance(e.lambda_max, ref["adler"])) for e in catalog.entries]


@dataclass(frozen=True)
class ExclusionPoint:
    lam: float
    excluded_by: str | None
    csl_distance: float
    adler_distance: float

    @property
    def allowed(self) -> bool:
        return self.excluded_by is None


def exclusion_map(catalog: Sequence[BoundEntry], lambda_grid, reference_values: dict | None = None,
                  r_c: float | None = None) -> list[ExclusionPoint]:
    """For each lambda, the tightest bound it violates (or None) and its log10 distance to the references.

    With ``r_c`` given, only entries derived for that localization length are used.
    """
    entries = [e for e in catalog if r_c is None or math.isclose(e.r_c_assumed, r_c, rel_tol=1e-9)]
    if not entries:
        raise InvalidArgumentError("catalog is empty")
    ref = reference_values or {"csl": 1e-17, "adler": 1e-9}
    binding = min(entries, key=lambda e: e.lambda_max)
    out = []
    for lam in np.asarray(lambda_grid, dtype=float).ravel():
        if not lam > 0:
            raise InvalidArgumentError("lambda grid values must be positive")
        hit = binding.name if lam > binding.lambda_max else None
        out.append(ExclusionPoint(float(lam), hit, math.log10(lam / ref["csl"]), math.log10(lam / ref["adler"])))
    return out
