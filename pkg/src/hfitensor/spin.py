"""Hyperfine spin Hamiltonian for one electron spin and N nuclear spins,
unitary evolution, and screening of candidates against a coupling window.

Energies are in MHz (frequency units) and times in microseconds, so the
propagator is ``exp(-2 pi i H t)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from itertools import combinations
from typing import Sequence

import numpy as np

from .constants import Isotope
from .hfi import HyperfineTensor

MAX_DIMENSION = 4096

PRESETS = {
    # coupling window of the nuclear-entanglement criteria for bis-adducts
    "default": {"window": (2.0, 16.0), "optimum": 6.0},
    # maximal-entangling-power window of the original protocol
    "protocol-2010": {"window": (2.0, 12.0), "optimum": 6.0},
}
DEFAULT_SIMILARITY_TOL = 0.10


class DimensionError(ValueError):
    pass


def _check_spin(s):
    if s <= 0 or (2 * s) % 1:
        raise ValueError(f"spin must be a positive half-integer, got {s}")


def spin_operators(s: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Angular momentum matrices (hbar = 1) in the basis m = s, s-1, ..., -s."""
    _check_spin(s)
    m = s - np.arange(int(round(2 * s)) + 1)
    # <m+1|S+|m> = sqrt(s(s+1) - m(m+1))
    sp = np.diag(np.sqrt(s * (s + 1) - m[1:] * (m[1:] + 1)), 1).astype(complex)
    sm = sp.conj().T
    sx = 0.5 * (sp + sm)
    sy = -0.5j * (sp - sm)
    sz = np.diag(m).astype(complex)
    return sx, sy, sz


@dataclass(frozen=True, eq=False)
class SpinSystem:
    electron_spin: float
    nuclei: tuple  # (Isotope, HyperfineTensor | 3x3 array) pairs

    def __post_init__(self):
        _check_spin(self.electron_spin)
        object.__setattr__(self, "nuclei", tuple(self.nuclei))
        for iso, _ in self.nuclei:
            if iso.spin <= 0:
                raise ValueError(f"{iso.name} has no nuclear spin")

    @property
    def spins(self) -> list[float]:
        return [self.electron_spin] + [iso.spin for iso, _ in self.nuclei]

    @property
    def dimension(self) -> int:
        return int(np.prod([int(round(2 * s)) + 1 for s in self.spins]))

    def tensors(self) -> list[np.ndarray]:
        out = []
        for _, A in self.nuclei:
            A = A.full if isinstance(A, HyperfineTensor) else np.asarray(A, dtype=float)
            if A.shape != (3, 3):
                raise ValueError("hyperfine tensors must be 3x3")
            out.append(A)
        return out

    def basis_labels(self) -> list[tuple[float, ...]]:
        """Magnetic quantum numbers of each product basis state, electron first."""
        ms = [s - np.arange(int(round(2 * s)) + 1) for s in self.spins]
        grids = np.meshgrid(*ms, indexing="ij")
        return [tuple(float(g.flat[i]) for g in grids) for i in range(self.dimension)]


def _embed(ops_by_site: dict[int, np.ndarray], dims: Sequence[int]) -> np.ndarray:
    mats = [ops_by_site.get(k, np.eye(d)) for k, d in enumerate(dims)]
    return reduce(np.kron, mats)


def build_hamiltonian(system: SpinSystem) -> np.ndarray:
    """H = sum_l S^T A^(l) I_l in MHz, electron spin as the first tensor factor."""
    dim = system.dimension
    if dim > MAX_DIMENSION:
        raise DimensionError(f"Hilbert space dimension {dim} exceeds {MAX_DIMENSION}")
    dims = [int(round(2 * s)) + 1 for s in system.spins]
    S = spin_operators(system.electron_spin)
    H = np.zeros((dim, dim), dtype=complex)
    for l, A in enumerate(system.tensors(), start=1):
        I = spin_operators(system.spins[l])
        for i in range(3):
            for j in range(3):
                if A[i, j] != 0:
                    H += A[i, j] * _embed({0: S[i], l: I[j]}, dims)
    return H


@dataclass(frozen=True, eq=False)
class SpinState:
    amplitudes: np.ndarray

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=complex)
        if abs(np.linalg.norm(amp) - 1) > 1e-10:
            raise ValueError("state is not normalized")
        object.__setattr__(self, "amplitudes", amp)

    @property
    def populations(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    @classmethod
    def basis(cls, system: SpinSystem, ms: Sequence[float]) -> "SpinState":
        """Product state with the given magnetic quantum numbers (electron first)."""
        labels = system.basis_labels()
        target = tuple(float(m) for m in ms)
        try:
            idx = labels.index(target)
        except ValueError:
            raise ValueError(f"no basis state with quantum numbers {target}") from None
        amp = np.zeros(system.dimension, dtype=complex)
        amp[idx] = 1
        return cls(amp)


def _check_hermitian(H):
    H = np.asarray(H)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError("Hamiltonian must be square")
    if np.max(np.abs(H - H.conj().T), initial=0.0) > 1e-10 * max(1.0, np.max(np.abs(H), initial=0.0)):
        raise ValueError("Hamiltonian is not Hermitian")


def evolve(H, psi0: SpinState, t):
    """psi(t) = exp(-2 pi i H t) psi0 for H in MHz and t in microseconds.

    ``t`` may be a scalar (returns a SpinState) or an array of times (returns
    an array of amplitude vectors, one row per time).
    """
    _check_hermitian(H)
    w, V = np.linalg.eigh(np.asarray(H, dtype=complex))
    c = V.conj().T @ psi0.amplitudes
    times = np.atleast_1d(np.asarray(t, dtype=float))
    phases = np.exp(-2j * np.pi * np.outer(times, w))
    amps = (phases * c) @ V.T
    if np.ndim(t) == 0:
        return SpinState(amps[0])
    return amps


@dataclass(frozen=True)
class ScreeningVerdict:
    candidate_id: str
    contacts: tuple[float, ...]
    in_window: tuple[bool, ...]
    similar: bool
    passed: bool
    distance_from_optimum: float
    window: tuple[float, float]
    similarity_tol: float
    optimum: float

    def csv_row(self) -> list[str]:
        fmt = lambda seq: ";".join(seq)
        return [self.candidate_id,
                fmt(repr(float(a)) for a in self.contacts),
                fmt(str(b).lower() for b in self.in_window),
                str(self.similar).lower(),
                str(self.passed).lower(),
                repr(round(self.distance_from_optimum, 12))]


VERDICT_HEADER = ["id", "a_values", "in_window", "similar", "pass", "distance_from_optimum_MHz"]


def max_relative_difference(contacts: Sequence[float]) -> float:
    """Largest pairwise ``||a_i| - |a_j|| / max(|a_i|, |a_j|)``."""
    mags = [abs(a) for a in contacts]
    worst = 0.0
    for x, y in combinations(mags, 2):
        top = max(x, y)
        if top > 0:
            worst = max(worst, abs(x - y) / top)
    return worst


def screen(candidates, window=PRESETS["default"]["window"],
           similarity_tol: float = DEFAULT_SIMILARITY_TOL,
           optimum: float = PRESETS["default"]["optimum"]) -> list[ScreeningVerdict]:
    """Apply the coupling-window and similarity criteria to each candidate.

    ``candidates`` is a sequence of ``(id, contacts)`` with one contact term
    (MHz) per labelled nucleus. A candidate passes when every ``|a|`` lies in
    ``window`` and the contacts agree to within ``similarity_tol``.
    """
    lo, hi = map(float, window)
    if not lo < hi:
        raise ValueError("screening window needs lo < hi")
    candidates = list(candidates)
    if not candidates:
        raise ValueError("no candidates to screen")
    out = []
    for cid, contacts in candidates:
        contacts = tuple(float(a) for a in contacts)
        if not contacts:
            raise ValueError(f"candidate {cid!r} has no contact terms")
        inw = tuple(lo <= abs(a) <= hi for a in contacts)
        similar = max_relative_difference(contacts) <= similarity_tol
        mean_mag = float(np.mean(np.abs(contacts)))
        out.append(ScreeningVerdict(str(cid), contacts, inw, similar, all(inw) and similar,
                                    abs(mean_mag - optimum), (lo, hi), similarity_tol, optimum))
    return out
