"""Physical constants in Hartree atomic units and the nuclear isotope registry.

Magnetons carry the Gaussian-units factor of the fine-structure constant,
``mu_e = alpha / 2`` and ``mu_N = mu_e / (m_p / m_e)``, so that the atomic-unit
contact and dipolar formulas give energies in Hartree directly.
"""
from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path


@dataclass(frozen=True)
class PhysicalConstants:
    g_e: float
    alpha: float
    hartree_to_MHz: float
    proton_electron_mass_ratio: float

    def __post_init__(self):
        for name in ("g_e", "alpha", "hartree_to_MHz", "proton_electron_mass_ratio"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")

    @property
    def mu_e(self) -> float:
        """Bohr magneton in atomic units."""
        return self.alpha / 2.0

    @property
    def mu_N(self) -> float:
        """Nuclear magneton in atomic units."""
        return self.alpha / (2.0 * self.proton_electron_mass_ratio)


# CODATA 2018 recommended values.
CODATA2018 = PhysicalConstants(
    g_e=2.00231930436256,  # |g_e|, free electron
    alpha=7.2973525693e-3,  # fine-structure constant
    hartree_to_MHz=6.579683920502e9,  # E_h / h in MHz
    proton_electron_mass_ratio=1836.15267343,  # m_p / m_e
)

CONSTANTS = CODATA2018


def coupling_prefactor(g_nuc: float, constants: PhysicalConstants = CONSTANTS) -> float:
    """g_e mu_e g_l mu_N expressed in MHz bohr^3 (multiplies a density or a
    dipolar kernel integral in atomic units)."""
    c = constants
    return c.g_e * c.mu_e * g_nuc * c.mu_N * c.hartree_to_MHz


def thomson_radius(Z: int, constants: PhysicalConstants = CONSTANTS) -> float:
    """Thomson radius ``Z * alpha**2`` in bohr."""
    if Z < 1:
        raise ValueError(f"atomic number must be >= 1, got {Z}")
    return Z * constants.alpha ** 2


ELEMENTS = (
    "H He Li Be B C N O F Ne Na Mg Al Si P S Cl Ar K Ca Sc Ti V Cr Mn Fe Co Ni "
    "Cu Zn Ga Ge As Se Br Kr"
).split()


def element_symbol(Z: int) -> str:
    if not 1 <= Z <= len(ELEMENTS):
        raise ValueError(f"no element symbol for Z={Z}")
    return ELEMENTS[Z - 1]


def atomic_number(symbol: str) -> int:
    try:
        return ELEMENTS.index(symbol.capitalize()) + 1
    except ValueError:
        raise ValueError(f"unknown element symbol {symbol!r}") from None


@dataclass(frozen=True)
class Isotope:
    symbol: str
    Z: int
    mass_number: int
    spin: float
    g_factor: float

    def __post_init__(self):
        if self.Z < 1:
            raise ValueError(f"Z must be >= 1 for {self.symbol}")
        if self.spin < 0 or (2 * self.spin) % 1:
            raise ValueError(f"nuclear spin must be a non-negative half-integer, got {self.spin}")

    @property
    def name(self) -> str:
        return f"{self.mass_number}{self.symbol}"

    @property
    def multiplicity(self) -> int:
        return int(round(2 * self.spin)) + 1


class UnknownIsotopeError(KeyError):
    def __init__(self, symbol, mass_number):
        super().__init__(f"isotope {mass_number}{symbol} is not registered")
        self.symbol = symbol
        self.mass_number = mass_number

    def __str__(self):
        return self.args[0]


def _read_registry(text: str) -> dict[tuple[str, int], Isotope]:
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    out = {}
    for row in csv.DictReader(io.StringIO("\n".join(lines))):
        iso = Isotope(
            symbol=row["symbol"].strip().capitalize(),
            Z=int(row["Z"]),
            mass_number=int(row["mass_number"]),
            spin=float(row["spin"]),
            g_factor=float(row["g_factor"]),
        )
        out[(iso.symbol, iso.mass_number)] = iso
    return out


def _builtin_registry():
    text = resources.files("hfitensor").joinpath("data/isotopes.csv").read_text()
    return _read_registry(text)


_REGISTRY = _builtin_registry()

# Default magnetic isotope per element, used when only Z is known.
_DEFAULT_MASS = {"H": 1, "C": 13, "N": 14, "O": 17, "F": 19, "Si": 29, "P": 31, "S": 33}


def load_registry(path: str | Path | None = None) -> dict[tuple[str, int], Isotope]:
    """Built-in registry, optionally overridden/extended by a CSV file with
    columns ``symbol,Z,mass_number,spin,g_factor``."""
    reg = dict(_REGISTRY)
    if path is not None:
        reg.update(_read_registry(Path(path).read_text()))
    return reg


def lookup_isotope(symbol: str, mass_number: int, registry=None) -> Isotope:
    reg = _REGISTRY if registry is None else registry
    key = (symbol.strip().capitalize(), int(mass_number))
    try:
        return reg[key]
    except KeyError:
        raise UnknownIsotopeError(symbol, mass_number) from None


_ISO_RE = re.compile(r"^\s*(?:(\d+)-?([A-Za-z]{1,2})|([A-Za-z]{1,2})-?(\d+))\s*$")


def parse_isotope(text: str, registry=None) -> Isotope:
    """Resolve strings such as ``"13C"``, ``"C13"`` or ``"C-13"``."""
    m = _ISO_RE.match(text)
    if not m:
        raise ValueError(f"cannot parse isotope {text!r}")
    if m.group(1):
        mass, sym = int(m.group(1)), m.group(2)
    else:
        sym, mass = m.group(3), int(m.group(4))
    return lookup_isotope(sym, mass, registry)


def default_isotope(Z: int, registry=None) -> Isotope:
    sym = element_symbol(Z)
    if sym not in _DEFAULT_MASS:
        raise UnknownIsotopeError(sym, 0)
    return lookup_isotope(sym, _DEFAULT_MASS[sym], registry)
