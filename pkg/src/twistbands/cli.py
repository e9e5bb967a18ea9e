"""Command-line front end: angle tables, twisted potentials, bands, Dirac reports.

Exit codes: 0 success, 2 invalid input, 3 compute-guard violation, 4 I/O
failure.  TBG_THREADS sets the default worker count; all outputs are
byte-stable and independent of the thread count (gathering is order
preserving and no randomness is used anywhere).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from contextlib import nullcontext

import numpy as np

from . import lattice as lat
from . import potential as pot
from . import spectra as sp
from . import perturbation as pert

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_GUARD = 3
EXIT_IO = 4

DEFAULT_ORBITS = [((1, 0), 1.0)]


def _default_threads() -> int:
    try:
        return max(1, int(os.environ.get("TBG_THREADS", "1")))
    except ValueError:
        return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="twistbands",
        description="Commensurate twisted bilayer potentials and Bloch spectra")
    parser.add_argument("--config", help="JSON file with default argument values")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, need_angle=True):
        if need_angle:
            # not marked required so that --config files can supply them
            p.add_argument("--a", type=int)
            p.add_argument("--b", type=int)
        p.add_argument("--stacking", choices=["AA", "AB"], default="AA")
        p.add_argument("--combiner", choices=["Additive", "PointwiseProduct"],
                       default="Additive")
        p.add_argument("--potential", help="single-layer potential JSON file")
        p.add_argument("--out", help="output file path")
        p.add_argument("--threads", type=int, default=_default_threads())

    p = sub.add_parser("angles", help="classify all coprime angles up to a_max")
    p.add_argument("--a-max", type=int, required=True)
    p.add_argument("--out")

    p = sub.add_parser("potential", help="build and dump a twisted potential")
    common(p)

    p = sub.add_parser("bands", help="band structure along Gamma -> K*")
    common(p)
    p.add_argument("--lambda", dest="lam", type=float, default=0.0)
    p.add_argument("--cutoff-shells", type=float, default=8.0)
    p.add_argument("--n-k", type=int, default=25)
    p.add_argument("--n-bands", type=int, default=8)

    p = sub.add_parser("dirac", help="Dirac detection, velocity, and cone fit")
    common(p)
    p.add_argument("--lambda", dest="lam", type=float, default=0.5)
    p.add_argument("--cutoff-shells", type=float, default=8.0)
    p.add_argument("--ring-radius", type=float, default=None)
    p.add_argument("--n-angles", type=int, default=12)

    p = sub.add_parser("scaling", help="N |v_d| flattening study over angle family")
    common(p, need_angle=False)
    p.add_argument("--angles", required=True,
                   help="semicolon-separated a,b pairs, e.g. 2,1;5,1;7,1")
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--cutoff-shells", type=float, default=8.0)
    parser.subcommand_parsers = list(sub.choices.values())
    return parser


def _angle(args) -> lat.CommensurationData:
    if getattr(args, "a", None) is None or getattr(args, "b", None) is None:
        raise ValueError("--a and --b are required (flags or --config file)")
    return lat.classify_angle(args.a, args.b)


def _load_orbits(args):
    path = getattr(args, "potential", None)
    if not path:
        return DEFAULT_ORBITS, 1
    if not os.path.exists(path):
        raise OSError("potential file not found: %s" % path)
    return pot.load_potential_spec(path)


def _twisted(args, data):
    orbits, sign = _load_orbits(args)
    V = pot.build_cosine_family(orbits, sign=sign)
    return pot.twist(V, pot.TwistSpec(data, args.stacking, args.combiner))


def _setting(data):
    sup = lat.superlattice_basis(data)
    sym = lat.symmetry_data(sup.kind)
    K, _ = lat.high_symmetry_points(sup)
    return sup, sym, K


def _basis(sup, sym, K, W, cutoff_shells):
    support_r = max((np.linalg.norm(sup.dual_matrix @ np.array(m, dtype=float))
                     for m in W.modes()), default=0.0)
    cutoff = max(cutoff_shells * np.linalg.norm(sup.dual_matrix[:, 0]),
                 1.1 * support_r + np.linalg.norm(K))
    return sp.build_basis(sym, sup.dual_matrix, K, cutoff)


def _emit(text, out_path):
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_angles(args) -> int:
    rows = lat.angle_table(args.a_max)
    _emit(json.dumps(rows, indent=1) + "\n", args.out)
    return EXIT_OK


def cmd_potential(args) -> int:
    data = _angle(args)
    W = _twisted(args, data)
    if not args.out:
        raise OSError("potential dump requires --out")
    pot.save_twisted(args.out, W, data, args.stacking)
    return EXIT_OK


def cmd_bands(args) -> int:
    data = _angle(args)
    W = _twisted(args, data)
    sup, sym, K = _setting(data)
    basis = _basis(sup, sym, K, W, args.cutoff_shells)
    ks = [t * K for t in np.linspace(0.0, 1.0, args.n_k)]
    pool = ThreadPoolExecutor(max_workers=args.threads) if args.threads > 1 \
        else nullcontext()
    with pool as ex:
        mapper = ex.map if ex is not None else None
        bands = sp.band_path(basis, W, args.lam, ks, n_bands=args.n_bands,
                             parallel_map=mapper)
    if not args.out:
        raise OSError("band output requires --out")
    sp.write_band_csv(args.out, ks, bands)
    return EXIT_OK


def cmd_dirac(args) -> int:
    data = _angle(args)
    path = getattr(args, "potential", None)
    if path and os.path.exists(path) and "modes" in json.load(open(path)):
        W, data_file, stacking = pot.load_twisted(path)
        if (data_file.a, data_file.b) != (args.a, args.b):
            raise ValueError("twisted dump is for (%d, %d), not (%d, %d)"
                             % (data_file.a, data_file.b, args.a, args.b))
    else:
        W = _twisted(args, data)
    sup, sym, K = _setting(data)
    basis = _basis(sup, sym, K, W, args.cutoff_shells)

    ok, offending = pot.support_check(W, lat.coupling_matrices(data))
    condition = "inconclusive"
    if abs(pot.fw_condition(W, sym)) > pot.ZERO_TOL:
        condition = "first-order coefficient nonzero"
    else:
        orbits = lat.orbit_representatives(sym, sup, K, basis.shell_cutoff)
        try:
            S = pot.choose_S_with_zero_pattern(W, sym, orbits)
            sos = pot.second_order_sum(W, sym, S, K, sup.dual_matrix)
            if not sos.inconclusive:
                condition = "second-order sum nonzero"
        except pot.ZeroPatternError:
            condition = "zero-pattern selection failed"

    report = sp.find_dirac(basis, W, args.lam)
    ring = args.ring_radius
    if ring is None:
        # stay well inside the linear regime: the ring must not climb past
        # the nearest sector-1 level, which sits separation above the cone tip
        ring = np.linalg.norm(sup.dual_matrix[:, 0]) / 20.0
        sep = report.separation_from_sector1
        if np.isfinite(sep) and report.v_d_magnitude > 0:
            ring = min(ring, 0.25 * sep / report.v_d_magnitude)
    try:
        slope, resid = sp.cone_fit(basis, W, args.lam, report.E0, K, ring,
                                   args.n_angles)
        report = sp.DiracReport(report.E0, report.multiplicity, report.v_d_formula,
                                report.v_d_magnitude, slope, resid, report.lam,
                                report.K_star, report.separation_from_sector1,
                                report.basis_size, report.shell_cutoff)
    except sp.ConeFitError:
        condition += "; cone fit ambiguous"
    doc = sp.dirac_report_dict(report, condition)
    doc["support_check"] = bool(ok)
    if not ok:
        doc["support_offending"] = [list(m) for m in offending[:10]]
    _emit(json.dumps(doc, indent=1) + "\n", args.out)
    return EXIT_OK


def cmd_scaling(args) -> int:
    try:
        angles = [tuple(int(x) for x in pair.split(","))
                  for pair in args.angles.split(";") if pair]
    except ValueError as exc:
        raise ValueError("bad --angles list: %s" % exc)
    orbits, sign = _load_orbits(args)
    pool = ThreadPoolExecutor(max_workers=args.threads) if args.threads > 1 \
        else nullcontext()
    with pool as ex:
        mapper = ex.map if ex is not None else None
        rows = pert.scaling_study(orbits, angles, args.delta, args.cutoff_shells,
                                  sign=sign, stacking=args.stacking,
                                  parallel_map=mapper)
    if not args.out:
        raise OSError("scaling output requires --out")
    pert.write_scaling_csv(args.out, rows)
    return EXIT_OK


COMMANDS = {
    "angles": cmd_angles,
    "potential": cmd_potential,
    "bands": cmd_bands,
    "dirac": cmd_dirac,
    "scaling": cmd_scaling,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        if argv is None:
            argv = sys.argv[1:]
        argv = list(argv)
        if "--config" in argv:
            cfg_path = argv[argv.index("--config") + 1]
            if not os.path.exists(cfg_path):
                sys.stderr.write("config file not found: %s\n" % cfg_path)
                return EXIT_IO
            with open(cfg_path) as fh:
                defaults = json.load(fh)
            # subparser defaults clobber values set on the root namespace,
            # so the config has to be pushed into every subcommand parser
            parser.set_defaults(**defaults)
            for sp_ in parser.subcommand_parsers:
                sp_.set_defaults(**defaults)
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except (ValueError, pot.ZeroPatternError, pot.DegenerateDenominatorError,
            sp.DiracDetectionError) as exc:
        sys.stderr.write("error: %s\n" % exc)
        return EXIT_INVALID
    except sp.ComputeGuardError as exc:
        sys.stderr.write("compute guard: %s\n" % exc)
        return EXIT_GUARD
    except OSError as exc:
        sys.stderr.write("i/o error: %s\n" % exc)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
