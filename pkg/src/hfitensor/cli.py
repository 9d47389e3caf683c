"""Command-line front end: ``hfitensor {compute,screen,compare,synth,evolve}``.

Exit codes: 0 success, 1 usage, 2 parse/schema, 3 empty result,
4 numeric/domain error. Every run writes its fully resolved configuration
to stderr as ``# key=value`` lines.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import warnings
from contextlib import contextmanager

import numpy as np

from . import kernels
from .constants import UnknownIsotopeError, default_isotope, parse_isotope
from .corepol import FIDELITY, CoreCorrectionTable, apply_correction
from .hfi import CONTACT_MODES, DEFAULT_CONTACT_MODE, compute_tensor
from .radial import DEFAULT_ANGULAR_ORDER, DEFAULT_NPOINTS, DEFAULT_RMAX, DEFAULT_RMIN, LogRadialGrid
from .refdata import (HEADLINES, SHIPPED, NoPairsError, SchemaError, deviation_stats, load_dataset,
                      scatter_export, shipped_dataset, traceless_audit)
from .spin import (DEFAULT_SIMILARITY_TOL, PRESETS, VERDICT_HEADER, DimensionError, SpinState,
                   SpinSystem, build_hamiltonian, evolve, screen)
from .volumetric import (AtomSite, Cell, CubeFormatError, TailTruncationWarning, integrate,
                         read_cube, save_cube, synth_gaussian)

EXIT_OK, EXIT_USAGE, EXIT_PARSE, EXIT_EMPTY, EXIT_DOMAIN = 0, 1, 2, 3, 4


class ParseFailure(Exception):
    pass


class EmptyResult(Exception):
    pass


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


DEFAULTS = {
    "compute": dict(nucleus="0", isotope=None, mode=DEFAULT_CONTACT_MODE, cutoff_bohr=None,
                    epsilon_bohr=None, rmin=DEFAULT_RMIN, rmax=DEFAULT_RMAX, npoints=DEFAULT_NPOINTS,
                    angular_order=DEFAULT_ANGULAR_ORDER, extrapolation="quadratic",
                    periodic=None, corepol_table=None, format="structured-text", out=None),
    "screen": dict(window_lo=None, window_hi=None, similarity_tol=DEFAULT_SIMILARITY_TOL,
                   optimum=None, preset="default", format="csv", out=None),
    "compare": dict(dataset=None, audit_tol=3.0, scatter_out=None, scatter_method="PP-CP",
                    scatter_quantity="contact", scatter_element=None, format="structured-text",
                    out=None),
    "synth": dict(sigma=1.0, total_spin=1.0, box=12.0, dims=[96], center=None, nonperiodic=False,
                  atom_z=1, out=None),
    "evolve": dict(t_max_us=1.0, n_steps=101, format="csv", out=None),
}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hfitensor", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="JSON file of option defaults (flags take precedence)")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads for voxel reductions (default: all cores)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, formats):
        sp.add_argument("--format", choices=formats, default=None)
        sp.add_argument("--out", default=None, help="output file (default: stdout)")
        sp.add_argument("--config", default=argparse.SUPPRESS)
        sp.add_argument("--threads", type=int, default=argparse.SUPPRESS)

    c = sub.add_parser("compute", help="hyperfine tensor from a cube file")
    c.add_argument("--cube", required=True)
    c.add_argument("--nucleus", help="atom index (0-based), atom label, or 'all'")
    c.add_argument("--isotope", help="e.g. 1H, 13C (default: magnetic isotope of the atom)")
    c.add_argument("--mode", choices=CONTACT_MODES)
    c.add_argument("--cutoff-bohr", type=float)
    c.add_argument("--epsilon-bohr", type=float)
    c.add_argument("--rmin", type=float)
    c.add_argument("--rmax", type=float)
    c.add_argument("--npoints", type=int)
    c.add_argument("--angular-order", type=int)
    c.add_argument("--extrapolation", choices=("quadratic", "linear"))
    g = c.add_mutually_exclusive_group()
    g.add_argument("--periodic", dest="periodic", action="store_const", const=True)
    g.add_argument("--nonperiodic", dest="periodic", action="store_const", const=False)
    c.add_argument("--corepol-table", help="CSV correction table; adds a mean-shift corrected contact")
    common(c, ("structured-text", "text", "csv"))

    s = sub.add_parser("screen", help="screen candidates against the coupling window")
    s.add_argument("--candidates", required=True, help="CSV with columns id,[nucleus,]a_MHz")
    s.add_argument("--window-lo", type=float)
    s.add_argument("--window-hi", type=float)
    s.add_argument("--similarity-tol", type=float)
    s.add_argument("--optimum", type=float)
    s.add_argument("--preset", choices=tuple(PRESETS))
    common(s, ("csv",))

    m = sub.add_parser("compare", help="deviation statistics of the reference tables")
    m.add_argument("--dataset", action="append", help="dataset CSV (repeatable; default: shipped tables)")
    m.add_argument("--audit-tol", type=float)
    m.add_argument("--scatter-out")
    m.add_argument("--scatter-method")
    m.add_argument("--scatter-quantity")
    m.add_argument("--scatter-element")
    common(m, ("structured-text", "text"))

    y = sub.add_parser("synth", help="write a Gaussian spin-density cube")
    y.add_argument("--sigma", type=float)
    y.add_argument("--total-spin", type=float)
    y.add_argument("--box", type=float, help="cubic box edge, bohr")
    y.add_argument("--dims", type=int, nargs="+", help="one or three grid sizes")
    y.add_argument("--center", type=float, nargs=3)
    y.add_argument("--nonperiodic", action="store_true", default=None)
    y.add_argument("--atom-z", type=int, help="atomic number of the atom placed at the center (0: none)")
    y.add_argument("--out", required=True)
    y.add_argument("--config", default=argparse.SUPPRESS)
    y.add_argument("--threads", type=int, default=argparse.SUPPRESS)

    e = sub.add_parser("evolve", help="population dynamics under the hyperfine Hamiltonian")
    e.add_argument("--system", required=True, help="JSON spin-system description")
    e.add_argument("--t-max-us", type=float)
    e.add_argument("--n-steps", type=int)
    common(e, ("csv",))
    return p


def resolve(args) -> dict:
    """Merge flags over the optional config file over defaults."""
    cfg = dict(DEFAULTS[args.command])
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                from_file = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ParseFailure(f"config file: {exc}") from None
        section = from_file.get(args.command, from_file)
        for k, v in section.items():
            k = k.replace("-", "_")
            if k not in cfg and k != "threads":
                raise UsageError(f"unknown config key {k!r} for {args.command}")
            cfg[k] = v
    for k, v in vars(args).items():
        if k in ("config", "command"):
            continue
        if v is not None:
            cfg[k] = v
    if cfg.get("threads") is None:
        cfg["threads"] = os.cpu_count() or 1
    cfg["command"] = args.command
    if args.command == "screen":
        preset = PRESETS[cfg["preset"]]
        if cfg["window_lo"] is None:
            cfg["window_lo"] = preset["window"][0]
        if cfg["window_hi"] is None:
            cfg["window_hi"] = preset["window"][1]
        if cfg["optimum"] is None:
            cfg["optimum"] = preset["optimum"]
    if cfg.get("format") == "text":
        cfg["format"] = "structured-text"
    _validate(cfg)
    return cfg


def _validate(cfg):
    cmd = cfg["command"]
    if cfg["threads"] < 1:
        raise UsageError("--threads must be >= 1")
    if cmd == "compute":
        if not 0 < cfg["rmin"] < cfg["rmax"]:
            raise UsageError("need 0 < --rmin < --rmax")
        if cfg["npoints"] < 3:
            raise UsageError("--npoints must be >= 3")
        for k in ("cutoff_bohr", "epsilon_bohr"):
            if cfg[k] is not None and not cfg[k] > 0:
                raise UsageError(f"--{k.replace('_', '-')} must be positive")
    elif cmd == "screen":
        if not cfg["window_lo"] < cfg["window_hi"]:
            raise UsageError("need --window-lo < --window-hi")
        if cfg["similarity_tol"] < 0:
            raise UsageError("--similarity-tol must be non-negative")
    elif cmd == "synth":
        if not cfg["sigma"] > 0 or not cfg["box"] > 0:
            raise UsageError("--sigma and --box must be positive")
        if len(cfg["dims"]) not in (1, 3) or min(cfg["dims"]) < 1:
            raise UsageError("--dims takes one or three positive integers")
    elif cmd == "evolve":
        if cfg["n_steps"] < 1 or cfg["t_max_us"] < 0:
            raise UsageError("need --n-steps >= 1 and --t-max-us >= 0")


def _log_config(cfg, stream):
    for k in sorted(cfg):
        v = cfg[k]
        if isinstance(v, (list, tuple)):
            v = ",".join(str(x) for x in v)
        stream.write(f"# {k}={v}\n")
    stream.write(f"# kernel_backend={kernels.BACKEND}\n")


@contextmanager
def _output(path):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (list, tuple, np.ndarray)):
        return ",".join(_fmt(x) for x in v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


# -- subcommands ------------------------------------------------------------

def _select_nuclei(grid, selector):
    if not grid.atoms:
        raise ValueError("cube file contains no atoms to select")
    if selector == "all":
        return list(enumerate(grid.atoms))
    try:
        idx = int(selector)
    except ValueError:
        for i, atom in enumerate(grid.atoms):
            if atom.label == selector:
                return [(i, atom)]
        raise ValueError(f"no atom labelled {selector!r}") from None
    if not 0 <= idx < len(grid.atoms):
        raise ValueError(f"nucleus index {idx} out of range (0..{len(grid.atoms) - 1})")
    return [(idx, grid.atoms[idx])]


def cmd_compute(cfg, out) -> int:
    try:
        grid = read_cube(cfg["cube"], cfg["periodic"])
    except OSError as exc:
        raise ParseFailure(str(exc)) from None
    rgrid = LogRadialGrid(cfg["rmin"], cfg["rmax"], cfg["npoints"])
    table = None
    if cfg["corepol_table"]:
        try:
            with open(cfg["corepol_table"]) as fh:
                table = CoreCorrectionTable.from_csv(fh)
        except (OSError, KeyError) as exc:
            raise ParseFailure(f"correction table: {exc}") from None
    records = []
    for idx, atom in _select_nuclei(grid, cfg["nucleus"]):
        iso = parse_isotope(cfg["isotope"]) if cfg["isotope"] else default_isotope(atom.Z)
        t = compute_tensor(grid, atom, iso, cfg["mode"], cfg["cutoff_bohr"], cfg["epsilon_bohr"],
                           rgrid, cfg["angular_order"], cfg["extrapolation"], cfg["threads"])
        rec = t.record(idx)
        rec["label"] = atom.label
        rec["total_spin"] = integrate(grid)
        if table is not None:
            rec["a_corrected_MHz"] = apply_correction(t.fermi_contact, iso.symbol, table)
            rec["corepol_fidelity"] = "none" if iso.symbol == "H" else FIDELITY["mean_shift"]
        records.append(rec)
    if cfg["format"] == "csv":
        w = csv.writer(out, lineterminator="\n")
        keys = list(records[0])
        w.writerow(keys)
        for rec in records:
            w.writerow([_fmt(rec.get(k)).replace(",", ";") for k in keys])
    else:
        for n, rec in enumerate(records):
            if n:
                out.write("\n")
            for k, v in rec.items():
                out.write(f"{k}={_fmt(v)}\n")
    return EXIT_OK


def read_candidates(path):
    """Candidates CSV: columns ``id,a_MHz`` or ``id,nucleus,a_MHz``; one row per nucleus."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise ParseFailure(str(exc)) from None
    if not rows:
        raise ParseFailure(f"{path}: no candidate rows")
    if "id" not in rows[0] or "a_MHz" not in rows[0]:
        raise ParseFailure(f"{path}: expected columns id,[nucleus,]a_MHz")
    grouped = {}
    for n, row in enumerate(rows, start=2):
        try:
            grouped.setdefault(row["id"].strip(), []).append(float(row["a_MHz"]))
        except (TypeError, ValueError):
            raise ParseFailure(f"{path}: row {n}: bad a_MHz value") from None
    return list(grouped.items())


def cmd_screen(cfg, out) -> int:
    cands = read_candidates(cfg["candidates"])
    verdicts = screen(cands, (cfg["window_lo"], cfg["window_hi"]), cfg["similarity_tol"],
                      cfg["optimum"])
    w = csv.writer(out, lineterminator="\n")
    w.writerow(VERDICT_HEADER)
    for v in verdicts:
        w.writerow(v.csv_row())
    return EXIT_OK if any(v.passed for v in verdicts) else EXIT_EMPTY


def _load_datasets(paths):
    records = []
    if not paths:
        for name in SHIPPED:
            records.extend(shipped_dataset(name))
        return records
    for path in paths:
        try:
            with open(path, newline="") as fh:
                records.extend(load_dataset(fh))
        except OSError as exc:
            raise ParseFailure(str(exc)) from None
    return records


def cmd_compare(cfg, out) -> int:
    records = _load_datasets(cfg["dataset"])
    lines = 0
    for method, element, quantity in HEADLINES:
        try:
            rep = deviation_stats(records, method, element, quantity)
        except NoPairsError:
            continue
        st = rep.overall
        rel = "" if st.max_rel_percent is None else f"{st.max_rel_percent:.1f}"
        out.write(f"deviation method={method} element={element or 'all'} quantity={quantity} "
                  f"max_abs_MHz={_fmt(st.max_abs)} mean_abs_MHz={st.mean_abs:.3f} "
                  f"max_rel_percent={rel} count={st.count} "
                  f"worst={st.worst.molecule}/{st.worst.atom_label}/{st.worst.quantity} "
                  f"calc={_fmt(st.worst.calc)} expt={_fmt(st.worst.expt)}\n")
        lines += 1
    if not lines:
        raise NoPairsError("no complete calculation/experiment pairs in the datasets")
    flagged = traceless_audit(records, cfg["audit_tol"])
    out.write(f"traceless_audit tol_MHz={_fmt(float(cfg['audit_tol']))} flagged={len(flagged)}\n")
    for mol, lab, method, s in flagged:
        out.write(f"flagged molecule={mol} atom={lab} method={method} sum_MHz={_fmt(s)}\n")
    if cfg["scatter_out"]:
        with _output(cfg["scatter_out"]) as fh:
            n = scatter_export(records, cfg["scatter_method"], cfg["scatter_quantity"], fh,
                               element=cfg["scatter_element"])
        out.write(f"scatter method={cfg['scatter_method']} quantity={cfg['scatter_quantity']} "
                  f"points={n} path={cfg['scatter_out']}\n")
    return EXIT_OK


def cmd_synth(cfg, out) -> int:
    dims = cfg["dims"] * 3 if len(cfg["dims"]) == 1 else cfg["dims"]
    box = float(cfg["box"])
    cell = Cell.cubic(box, periodic=not cfg["nonperiodic"])
    center = cfg["center"] if cfg["center"] is not None else [box / 2] * 3
    atoms = [AtomSite(int(cfg["atom_z"]), center)] if cfg["atom_z"] else []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", TailTruncationWarning)
        grid = synth_gaussian(center, cfg["sigma"], cfg["total_spin"], cell, dims, atoms=atoms)
    for wmsg in caught:
        sys.stderr.write(f"warning: {wmsg.message}\n")
    save_cube(grid, cfg["out"], comment=f"gaussian sigma={cfg['sigma']} total_spin={cfg['total_spin']}")
    out.write(f"path={cfg['out']}\ndims={_fmt(list(dims))}\nintegral={_fmt(integrate(grid))}\n")
    return EXIT_OK


def load_system(path):
    """Spin system JSON:

    {"electron_spin": 0.5,
     "nuclei": [{"isotope": "1H", "a_MHz": 100.0,
                 "b_MHz": [[...], [...], [...]]          # or
                 "b_principal_MHz": [bxx, byy, bzz]}],
     "initial_state": [0.5, -0.5]}                     # m values, electron first
    """
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseFailure(f"system file: {exc}") from None
    try:
        nuclei = []
        for nuc in doc["nuclei"]:
            iso = parse_isotope(nuc["isotope"])
            if "b_MHz" in nuc:
                b = np.asarray(nuc["b_MHz"], dtype=float)
            else:
                b = np.diag(np.asarray(nuc.get("b_principal_MHz", [0, 0, 0]), dtype=float))
            nuclei.append((iso, float(nuc.get("a_MHz", 0.0)) * np.eye(3) + b))
        system = SpinSystem(float(doc["electron_spin"]), nuclei)
    except UnknownIsotopeError:
        raise
    except (KeyError, TypeError) as exc:
        raise ParseFailure(f"system file: missing or malformed field {exc}") from None
    init = doc.get("initial_state")
    if init is None:
        init = [system.electron_spin] + [-iso.spin for iso, _ in nuclei]
    return system, init


def cmd_evolve(cfg, out) -> int:
    system, init = load_system(cfg["system"])
    H = build_hamiltonian(system)
    psi0 = SpinState.basis(system, init)
    n = cfg["n_steps"]
    times = np.linspace(0.0, cfg["t_max_us"], n) if n > 1 else np.array([0.0])
    pops = np.abs(evolve(H, psi0, times)) ** 2
    labels = ["p(" + ";".join(f"{m:+g}" for m in lab) + ")" for lab in system.basis_labels()]
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["t_us"] + labels)
    for t, row in zip(times, pops):
        w.writerow([repr(float(t))] + [f"{p:.12f}" for p in row])
    return EXIT_OK


COMMANDS = {"compute": cmd_compute, "screen": cmd_screen, "compare": cmd_compare,
            "synth": cmd_synth, "evolve": cmd_evolve}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve(args)
        _log_config(cfg, sys.stderr)
        out_path = None if args.command == "synth" else cfg.get("out")
        with _output(out_path) as out:
            return COMMANDS[args.command](cfg, out)
    except UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return EXIT_USAGE
    except (ParseFailure, CubeFormatError, SchemaError, FileNotFoundError) as exc:
        sys.stderr.write(f"parse error: {exc}\n")
        return EXIT_PARSE
    except (NoPairsError, EmptyResult) as exc:
        sys.stderr.write(f"empty result: {exc}\n")
        return EXIT_EMPTY
    except (UnknownIsotopeError, DimensionError, ValueError, ArithmeticError) as exc:
        sys.stderr.write(f"domain error: {exc}\n")
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
