"""Empirical core-polarization corrections for pseudopotential contact terms.

A :class:`CoreCorrectionTable` stores, per element, the additive shifts
``a_PPCP - a_PP`` observed in paired reference calculations. Applying the
mean shift is a low-fidelity estimate: the shifts for carbon are strongly
molecule dependent, which is why every sample is retained.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

FIDELITY = {"mean_shift": "low", "passthrough": "none"}


@dataclass(frozen=True)
class CorrectionStats:
    mean_delta: float
    sample_deltas: tuple[float, ...]

    @property
    def count(self) -> int:
        return len(self.sample_deltas)

    @property
    def spread(self) -> float:
        return max(self.sample_deltas) - min(self.sample_deltas)


@dataclass(frozen=True)
class CoreCorrectionTable:
    entries: dict[str, CorrectionStats] = field(default_factory=dict)

    def __post_init__(self):
        h = self.entries.get("H")
        if h is not None and h.mean_delta != 0:
            raise ValueError("hydrogen has no core electrons; its mean shift must be 0")

    def __contains__(self, element):
        return element in self.entries

    def __getitem__(self, element) -> CorrectionStats:
        return self.entries[element]

    def to_csv(self, sink) -> None:
        w = csv.writer(sink, lineterminator="\n")
        w.writerow(["element", "mean_delta_MHz", "count", "sample_deltas_MHz"])
        for el in sorted(self.entries):
            st = self.entries[el]
            w.writerow([el, repr(st.mean_delta), st.count,
                        ";".join(repr(d) for d in st.sample_deltas)])

    @classmethod
    def from_csv(cls, stream) -> "CoreCorrectionTable":
        entries = {}
        for row in csv.DictReader(stream):
            raw = (row.get("sample_deltas_MHz") or "").strip()
            samples = tuple(float(x) for x in raw.split(";")) if raw else ()
            count = int(row["count"])
            if samples and len(samples) != count:
                raise ValueError(f"{row['element']}: count does not match sample deltas")
            if not samples:
                # table written without samples: keep the mean, replicate it
                samples = (float(row["mean_delta_MHz"]),) * count
            entries[row["element"]] = CorrectionStats(float(row["mean_delta_MHz"]), samples)
        return cls(entries)


def calibrate_table(paired_records: Iterable[Sequence]) -> CoreCorrectionTable:
    """Per-element shifts from ``(element, a_PP, a_PPCP)`` triples."""
    deltas: dict[str, list[float]] = {}
    for element, a_pp, a_ppcp in paired_records:
        d = float(a_ppcp) - float(a_pp)
        if element == "H" and d != 0:
            raise ValueError("hydrogen pair with non-zero core-polarization shift")
        deltas.setdefault(element, []).append(d)
    if not deltas:
        raise ValueError("no paired records to calibrate from")
    return CoreCorrectionTable({
        el: CorrectionStats(float(np.mean(ds)), tuple(ds)) for el, ds in deltas.items()
    })


def pairs_from_records(records, calc="PP", corrected="PP-CP"):
    """Extract ``(element, a_PP, a_PPCP)`` triples from reference records."""
    by_key = {}
    for r in records:
        if r.quantity != "contact" or r.value is None:
            continue
        by_key.setdefault((r.molecule, r.atom_label, r.element), {})[r.method] = r.value
    return [(el, vals[calc], vals[corrected])
            for (mol, lab, el), vals in by_key.items()
            if calc in vals and corrected in vals]


def apply_correction(a_pp: float, element: str, table: CoreCorrectionTable | None,
                     mode: str = "mean_shift") -> float:
    """Corrected contact term in MHz. Hydrogen is always passed through."""
    if mode not in FIDELITY:
        raise ValueError(f"unknown correction mode {mode!r}")
    if mode == "passthrough" or element == "H":
        return float(a_pp)
    if table is None or element not in table:
        raise KeyError(f"no core-polarization calibration for element {element!r}")
    return float(a_pp) + table[element].mean_delta
