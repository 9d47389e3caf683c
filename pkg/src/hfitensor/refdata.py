"""Reference hyperfine datasets for small radicals and fullerene adducts, and
the deviation statistics computed against the experimental values."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable

import numpy as np

METHODS = ("PP", "PP-CP", "AE", "Expt")
QUANTITIES = ("contact", "b_xx", "b_yy", "b_zz")
DIPOLAR = ("b_xx", "b_yy", "b_zz")
COLUMNS = ("molecule", "atom_label", "element", "method", "quantity", "value_MHz")
SHIPPED = ("table1_contact.csv", "table2_dipolar.csv", "table3_fullerene.csv")


class SchemaError(ValueError):
    def __init__(self, message, row=None):
        self.row = row
        super().__init__(f"row {row}: {message}" if row is not None else message)


class NoPairsError(ValueError):
    pass


@dataclass(frozen=True)
class ReferenceRecord:
    molecule: str
    atom_label: str
    element: str
    method: str
    quantity: str
    value: float | None

    def __post_init__(self):
        if not self.molecule:
            raise ValueError("molecule must be non-empty")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.quantity not in QUANTITIES:
            raise ValueError(f"unknown quantity {self.quantity!r}")


def load_dataset(stream) -> list[ReferenceRecord]:
    """Parse a dataset CSV; blank values become ``None``."""
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    reader = csv.reader(stream)
    header = next(reader, None)
    if header is None:
        return []
    header = [h.strip() for h in header]
    if tuple(header) != COLUMNS:
        raise SchemaError(f"expected columns {','.join(COLUMNS)}", 1)
    out = []
    for rowno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(COLUMNS):
            raise SchemaError(f"expected {len(COLUMNS)} fields, got {len(row)}", rowno)
        mol, lab, el, method, qty, val = (c.strip() for c in row)
        try:
            value = float(val) if val else None
            out.append(ReferenceRecord(mol, lab, el, method, qty, value))
        except ValueError as exc:
            raise SchemaError(str(exc), rowno) from None
    return out


def shipped_dataset(name: str) -> list[ReferenceRecord]:
    text = resources.files("hfitensor").joinpath("data", name).read_text()
    return load_dataset(io.StringIO(text))


def shipped_records() -> list[ReferenceRecord]:
    return [r for name in SHIPPED for r in shipped_dataset(name)]


def _quantity_set(quantity):
    if quantity is None:
        return set(QUANTITIES)
    if quantity == "dipolar":
        return set(DIPOLAR)
    if isinstance(quantity, str):
        return {quantity}
    return set(quantity)


@dataclass(frozen=True)
class Pair:
    molecule: str
    atom_label: str
    element: str
    quantity: str
    calc: float
    expt: float

    @property
    def abs_dev(self) -> float:
        return abs(self.calc - self.expt)

    @property
    def rel_dev(self) -> float | None:
        return 100.0 * self.abs_dev / abs(self.expt) if self.expt != 0 else None


def pair_records(records: Iterable[ReferenceRecord], method: str, reference: str = "Expt",
                 element=None, quantity=None) -> list[Pair]:
    """Match ``method`` values with ``reference`` values on (molecule, atom, quantity)."""
    qset = _quantity_set(quantity)
    calc, ref = {}, {}
    for r in records:
        if r.value is None or r.quantity not in qset:
            continue
        if element is not None and r.element != element:
            continue
        key = (r.molecule, r.atom_label, r.quantity)
        if r.method == method:
            calc[key] = r
        if r.method == reference:
            ref[key] = r
    pairs = []
    for key, c in calc.items():
        if key in ref:
            pairs.append(Pair(c.molecule, c.atom_label, c.element, c.quantity,
                              c.value, ref[key].value))
    return pairs


@dataclass(frozen=True)
class DeviationStats:
    max_abs: float
    mean_abs: float
    max_rel_percent: float | None
    count: int
    worst: Pair

    @classmethod
    def from_pairs(cls, pairs: list[Pair]) -> "DeviationStats":
        devs = np.array([p.abs_dev for p in pairs])
        rels = [p.rel_dev for p in pairs if p.rel_dev is not None]
        worst = pairs[int(np.argmax(devs))]
        return cls(float(devs.max()), float(devs.mean()),
                   max(rels) if rels else None, len(pairs), worst)


@dataclass(frozen=True)
class DeviationReport:
    method: str
    reference: str
    quantity: str
    overall: DeviationStats
    per_element: dict[str, DeviationStats] = field(default_factory=dict)


def deviation_stats(records, method: str, element=None, quantity=None,
                    reference: str = "Expt") -> DeviationReport:
    pairs = pair_records(records, method, reference, element, quantity)
    if not pairs:
        raise NoPairsError(f"no complete ({method}, {reference}) pairs for "
                           f"element={element} quantity={quantity}")
    per = {}
    for el in sorted({p.element for p in pairs}):
        per[el] = DeviationStats.from_pairs([p for p in pairs if p.element == el])
    qname = quantity if isinstance(quantity, str) or quantity is None else ",".join(quantity)
    return DeviationReport(method, reference, qname or "all", DeviationStats.from_pairs(pairs), per)


def traceless_audit(records, tol: float) -> list[tuple[str, str, str, float]]:
    """Rows whose published dipolar principal values do not sum to zero within ``tol``."""
    triples = {}
    for r in records:
        if r.quantity in DIPOLAR and r.value is not None:
            triples.setdefault((r.molecule, r.atom_label, r.method), {})[r.quantity] = r.value
    flagged = []
    for (mol, lab, method), vals in triples.items():
        if len(vals) != 3:
            continue
        s = vals["b_xx"] + vals["b_yy"] + vals["b_zz"]
        if abs(s) > tol:
            flagged.append((mol, lab, method, s))
    return flagged


def scatter_export(records, method: str, quantity, sink, reference: str = "Expt",
                   element=None) -> int:
    """Write (calc, expt, molecule, atom_label) rows for a parity plot."""
    pairs = pair_records(records, method, reference, element, quantity)
    if not pairs:
        raise NoPairsError(f"no complete ({method}, {reference}) pairs to export")
    w = csv.writer(sink, lineterminator="\n")
    w.writerow(["calc_value", "expt_value", "molecule", "atom_label"])
    for p in pairs:
        w.writerow([p.calc, p.expt, p.molecule, p.atom_label])
    return len(pairs)


# headline comparisons: (method, element, quantity)
HEADLINES = (
    ("PP-CP", "C", "contact"),
    ("AE", "C", "contact"),
    ("PP", "H", "contact"),
    ("AE", "H", "contact"),
    ("PP", None, "dipolar"),
    ("AE", None, "dipolar"),
)
