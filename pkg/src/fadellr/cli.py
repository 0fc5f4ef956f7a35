"""Command-line entry point.

Subcommands: constellation, llr-table, fit, pdf, de-threshold, code-gen,
ber.  Every file output is written atomically (temp file + rename) with a
sibling JSON manifest recording the resolved parameters, seed and toolkit
version; re-running from those parameters reproduces the file byte for
byte.  Report-style subcommands accept --plot to render a PNG next to the
CSV.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .approx_llr import (ApproxLlr, Poly2D, eval_approx, fit_constellation,
                         make_bpsk_approx)
from .constellation import KINDS, SnrSpec, build_constellation, snr_to_sigma
from .density_evolution import (BracketError, DeParams, Ensemble, SnrAxis,
                                de_threshold, auto_bracket,
                                fixed_point_taylor_threshold, load_ensemble)
from .exact_llr import bit_llr_grid
from .ldpc import load_code, sample_code, save_code
from .llr_density import LlrGrid, bicm_channel_density, grid_for

EXIT_USAGE = 2
EXIT_MISSING_FILE = 3
EXIT_BAD_COMBINATION = 4
EXIT_BAD_BRACKET = 5


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return f"{x:.9g}"
    return str(x)


def write_csv(path, header, rows) -> None:
    text = ",".join(header) + "\n"
    text += "\n".join(",".join(_fmt(v) for v in row) for row in rows)
    if rows:
        text += "\n"
    atomic_write(path, text)


def atomic_write(path, text: str) -> None:
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_manifest(out_path, subcommand: str, params: dict,
                   seed=None, outputs=None) -> None:
    manifest = {
        "subcommand": subcommand,
        "parameters": params,
        "seed": seed,
        "version": __version__,
        "outputs": outputs or [str(out_path)],
    }
    atomic_write(f"{out_path}.manifest.json",
                 json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _sigma_for(kind: str, snr_db: float, rate: float) -> float:
    c = build_constellation(kind)
    conv = "ebn0" if kind == "bpsk" else "esn0"
    return snr_to_sigma(c, SnrSpec(snr_db, conv, rate))


def _parse_orders(spec: str, m: int):
    parts = spec.split(",")
    orders = tuple(int(p) for p in parts)
    if len(orders) == 1:
        orders = orders * m
    if len(orders) != m:
        raise ValueError(f"need 1 or {m} Taylor orders, got {spec!r}")
    return orders


def resolve_llr_method(method: str, kind: str, sigma_fit: float):
    """'true' | 'hou' | 'optlinear' | 'taylor:SPEC' -> 'exact' or ApproxLlr."""
    if method in ("true", "exact"):
        return "exact"
    c = build_constellation(kind)
    if kind == "bpsk":
        if method in ("hou", "optlinear", "taylor:1", "taylor:3"):
            return make_bpsk_approx(method, sigma_fit)
        raise ValueError(f"unsupported BPSK method {method!r}")
    if method in ("hou", "optlinear"):
        raise ValueError(f"{method} is a BPSK-only approximation")
    if not method.startswith("taylor:"):
        raise ValueError(f"unknown LLR method {method!r}")
    return fit_constellation(c, sigma_fit, _parse_orders(method[7:], c.m))


# ----------------------------------------------------------------------
# subcommands

def cmd_constellation(args) -> int:
    c = build_constellation(args.kind)
    header = ["point_re", "point_im", "label", "avg_energy"]
    rows = [[p.real, p.imag, "".join(str(b) for b in lab), c.avg_energy]
            for p, lab in zip(c.points, c.labels)]
    if args.out:
        write_csv(args.out, header, rows)
        write_manifest(args.out, "constellation", {"kind": args.kind})
    else:
        print(",".join(header))
        for r in rows:
            print(",".join(_fmt(v) for v in r))
    return 0


def _grid_spec(spec: str):
    lo, hi, step = (float(t) for t in spec.split(":"))
    if step <= 0 or hi <= lo:
        raise ValueError(f"bad grid spec {spec!r}")
    n = int(np.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(n)


def cmd_llr_table(args) -> int:
    c = build_constellation(args.kind)
    sigma = _sigma_for(args.kind, args.snr, args.rate)
    ys = _grid_spec(args.grid)
    bits = [args.bit] if args.bit else list(range(1, c.m + 1))
    if c.is_2d:
        yr, yi = np.meshgrid(ys, ys, indexing="ij")
        ll = bit_llr_grid(c, (yr + 1j * yi).ravel(), sigma)
        header = ["y", "y_i"] + [f"l{i}" for i in bits]
        rows = np.column_stack([yr.ravel(), yi.ravel()]
                               + [ll[i - 1] for i in bits])
    else:
        ll = bit_llr_grid(c, ys + 0j, sigma)
        header = ["y"] + [f"l{i}" for i in bits]
        rows = np.column_stack([ys] + [ll[i - 1] for i in bits])
    rows = rows.tolist()
    if args.out:
        write_csv(args.out, header, rows)
        write_manifest(args.out, "llr-table", {
            "kind": args.kind, "snr": args.snr, "grid": args.grid,
            "bit": args.bit, "rate": args.rate})
        if args.plot:
            from .plotting import plot_llr_table
            plot_llr_table(rows, header, args.out + ".png",
                           f"{args.kind} exact LLRs at {args.snr} dB")
    else:
        print(",".join(header))
        for r in rows:
            print(",".join(_fmt(v) for v in r))
    return 0


def cmd_fit(args) -> int:
    sigma = _sigma_for(args.kind, args.snr, args.rate)
    approx = resolve_llr_method(args.method, args.kind, sigma)
    if approx == "exact":
        raise ValueError("'true' is not a fittable method")
    header = ["bit", "piece", "center", "k", "coefficient", "lo", "hi"]
    rows = []
    for bit, pay in enumerate(approx.payload, start=1):
        if approx.kind in ("hou", "optlinear", "taylor_bpsk_linear",
                           "taylor_bpsk_cubic"):
            for k, coef in zip((1, 3), pay):
                rows.append([bit, 0, 0.0, k, coef, "-inf", "inf"])
        elif approx.kind == "piecewise1d":
            pieces, _ = pay
            for pi, p in enumerate(pieces):
                for k, coef in enumerate(p.coeffs):
                    if coef != 0.0:
                        rows.append([bit, pi, p.center, k, coef,
                                     _fmt(p.lo), _fmt(p.hi)])
        else:  # taylor2d
            for (l, m), coef in sorted(pay.coeffs.items()):
                rows.append([bit, 0, pay.center[0], f"{l}:{m}", coef,
                             pay.pre, ""])
    write_csv(args.out, header, rows)
    write_manifest(args.out, "fit", {
        "kind": args.kind, "snr": args.snr, "method": args.method,
        "rate": args.rate})
    return 0


def cmd_pdf(args) -> int:
    c = build_constellation(args.kind)
    sigma = _sigma_for(args.kind, args.snr, args.rate)
    llr = resolve_llr_method(args.llr, args.kind, sigma)
    grid = grid_for(llr if llr != "exact" else None, bits=args.bits,
                    l_max=args.lmax)
    if args.bit < 1 or args.bit > c.m:
        raise ValueError(f"bit must be in 1..{c.m}")
    if c.kind == "bpsk":
        from .llr_density import bpsk_llr_density
        dens = bpsk_llr_density(sigma, grid, llr)
    else:
        from .llr_density import (bit_channel_densities_2d,
                                  bit_channel_density_1d, symmetrize)
        if c.is_2d:
            dd = bit_channel_densities_2d(c, sigma, grid, llr)
            dens = symmetrize(dd[(args.bit, 0)], dd[(args.bit, 1)])
        else:
            dens = symmetrize(
                bit_channel_density_1d(c, args.bit, 0, sigma, grid, llr),
                bit_channel_density_1d(c, args.bit, 1, sigma, grid, llr))
    centers = grid.values()
    rows = np.column_stack([centers, dens.mass]).tolist()
    write_csv(args.out, ["llr", "mass"], rows)
    write_manifest(args.out, "pdf", {
        "kind": args.kind, "snr": args.snr, "bit": args.bit,
        "llr": args.llr, "bits": args.bits, "lmax": grid.l_max,
        "rate": args.rate})
    if args.plot:
        from .plotting import plot_density
        plot_density(centers, dens.mass, args.out + ".png",
                     f"{args.kind} bit {args.bit} {args.llr} density, "
                     f"{args.snr} dB")
    return 0


def cmd_de_threshold(args) -> int:
    ens = load_ensemble(args.ensemble)
    c = build_constellation(args.kind)
    conv = "ebn0" if args.kind == "bpsk" else "esn0"
    rate = ens.rate if args.kind == "bpsk" else 1.0
    axis = SnrAxis(c, conv, rate)
    nonlinear = args.llr == "taylor:3" or (
        args.llr.startswith("taylor:") and
        any(int(t) > 1 for t in args.llr[7:].split(",")))
    params = DeParams(bits=args.bits,
                      l_max=args.lmax or (35.0 if nonlinear else 25.0),
                      max_iter=args.max_iter)

    if args.fixed_point:
        if not args.llr.startswith("taylor:"):
            raise ValueError("--fixed-point applies to taylor methods only")
        if c.kind == "bpsk":
            raise ValueError("the fixed-point iteration targets BICM "
                             "constellations; BPSK coefficients are "
                             "closed-form per-sigma")
        orders = _parse_orders(args.llr[7:], c.m)
        res, approx, traj = fixed_point_taylor_threshold(
            ens, c, orders, axis, params,
            start_snr=args.start)
        extra = {"trajectory": [round(t, 4) for t in traj],
                 "fit_snr": traj[-1]}
    else:
        if args.kind == "bpsk":
            from .llr_density import bpsk_llr_density

            def builder(sigma, grid):
                llr = ("exact" if args.llr in ("true", "exact")
                       else make_bpsk_approx(args.llr, sigma))
                return bpsk_llr_density(sigma, grid, llr)
        else:
            fit_snr = args.fit_snr if args.fit_snr is not None else args.start
            if args.llr in ("true", "exact"):
                method = "exact"
            else:
                if fit_snr is None:
                    raise ValueError("taylor methods need --fit-snr (or "
                                     "--fixed-point)")
                method = resolve_llr_method(args.llr, args.kind,
                                            axis.sigma(fit_snr))

            def builder(sigma, grid):
                return bicm_channel_density(c, sigma, grid, method)

        if args.bracket:
            lo, hi = (float(t) for t in args.bracket.split(":"))
            bracket = (lo, hi)
        elif args.start is not None:
            bracket = auto_bracket(ens, builder, axis, args.start, params)
        else:
            raise ValueError("give --bracket lo:hi or --start")
        res = de_threshold(ens, builder, axis, bracket, params)
        extra = {}

    rows = [[res.snr_db, res.sigma, res.iterations]]
    header = ["snr_db", "sigma", "iterations"]
    if args.out:
        write_csv(args.out, header, rows)
        write_manifest(args.out, "de-threshold", {
            "ensemble": str(args.ensemble), "kind": args.kind,
            "llr": args.llr, "bracket": args.bracket, "start": args.start,
            "fixed_point": args.fixed_point, "bits": args.bits,
            "lmax": params.l_max, **extra})
    print(",".join(header))
    print(",".join(_fmt(v) for v in rows[0]))
    for k, v in extra.items():
        print(f"# {k}: {v}")
    return 0


def cmd_code_gen(args) -> int:
    dv, dc = (int(t) for t in args.profile.split(","))
    code = sample_code((dv, dc), args.n, seed=args.seed)
    save_code(code, args.out)
    write_manifest(args.out, "code-gen", {
        "profile": args.profile, "n": args.n}, seed=args.seed)
    return 0


def _parse_config(path) -> dict:
    cfg = {}
    with open(path) as fh:
        for ln, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{ln}: expected key=value")
            k, v = line.split("=", 1)
            cfg[k.strip()] = v.strip()
    return cfg


def cmd_ber(args) -> int:
    from .bicm_sim import SimConfig, run_ber

    raw = _parse_config(args.config)
    kind = raw["kind"]
    code = load_code(raw["code"])
    rate = float(raw.get("rate", 0.5))
    method = raw.get("llr", "true")
    fit_snr = raw.get("fit_snr")
    if method in ("true", "exact"):
        llr = "exact"
    else:
        if kind != "bpsk" and method.startswith("taylor:") and fit_snr is None:
            raise ValueError("taylor BER runs need fit_snr in the config")
        sig = _sigma_for(kind, float(fit_snr), rate) if fit_snr else None
        llr = resolve_llr_method(method, kind, sig)
    snrs = tuple(float(t) for t in raw["snr"].split(","))
    workers = int(raw.get("workers", os.environ.get("FADELLR_WORKERS", 1)))
    cfg = SimConfig(
        constellation=kind, code=code, llr=llr, snr_list=snrs,
        max_iter=int(raw.get("max_iter", 100)),
        clip=float(raw.get("clip", 25)),
        min_frame_errors=int(raw.get("min_frame_errors", 100)),
        max_frames=int(raw.get("max_frames", 100000)),
        seed=int(raw.get("seed", 1)),
        codewords=raw.get("codewords", "allzero"),
        workers=workers)
    conv = "ebn0" if kind == "bpsk" else "esn0"
    c = build_constellation(kind)
    sigma_of = lambda s: snr_to_sigma(c, SnrSpec(s, conv, rate))
    records = run_ber(cfg, sigma_of)
    header = ["snr_db", "frames", "bit_errors", "frame_errors", "ber",
              "fer", "mean_iterations"]
    rows = [[r.snr_db, r.frames, r.bit_errors, r.frame_errors, r.ber,
             r.fer, r.mean_iterations] for r in records]
    write_csv(args.out, header, rows)
    write_manifest(args.out, "ber", dict(raw), seed=cfg.seed)
    if args.plot:
        from .plotting import plot_ber
        plot_ber(records, args.out + ".png", f"{kind} {method}")
    return 0


# ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="fadellr",
        description="LDPC-coded BICM toolkit for the uncorrelated flat "
                    "Rayleigh fading channel without CSI")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("constellation", help="print a signal set as CSV")
    p.add_argument("--kind", required=True, choices=KINDS)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_constellation)

    p = sub.add_parser("llr-table", help="exact LLRs on an output grid")
    p.add_argument("--kind", required=True, choices=KINDS)
    p.add_argument("--snr", type=float, required=True)
    p.add_argument("--grid", required=True, metavar="MIN:MAX:STEP")
    p.add_argument("--bit", type=int)
    p.add_argument("--rate", type=float, default=0.5,
                   help="code rate for the BPSK Eb/N0 convention")
    p.add_argument("--out")
    p.add_argument("--plot", action="store_true")
    p.set_defaults(fn=cmd_llr_table)

    p = sub.add_parser("fit", help="fit an LLR approximation")
    p.add_argument("--kind", required=True, choices=KINDS)
    p.add_argument("--snr", type=float, required=True)
    p.add_argument("--method", required=True,
                   help="hou | optlinear | taylor:ORDER[,ORDER...]")
    p.add_argument("--rate", type=float, default=0.5)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_fit)

    p = sub.add_parser("pdf", help="quantized bit-channel LLR density")
    p.add_argument("--kind", required=True, choices=KINDS)
    p.add_argument("--snr", type=float, required=True)
    p.add_argument("--bit", type=int, default=1)
    p.add_argument("--llr", default="true",
                   help="true | hou | optlinear | taylor:SPEC")
    p.add_argument("--bits", type=int, default=11)
    p.add_argument("--lmax", type=float)
    p.add_argument("--rate", type=float, default=0.5)
    p.add_argument("--out", required=True)
    p.add_argument("--plot", action="store_true")
    p.set_defaults(fn=cmd_pdf)

    p = sub.add_parser("de-threshold", help="density-evolution threshold")
    p.add_argument("--ensemble", required=True)
    p.add_argument("--kind", required=True, choices=KINDS)
    p.add_argument("--llr", default="true")
    p.add_argument("--bracket", metavar="LO:HI")
    p.add_argument("--start", type=float,
                   help="auto-bracket around this SNR")
    p.add_argument("--fit-snr", type=float,
                   help="fitting SNR for fixed taylor approximations")
    p.add_argument("--fixed-point", action="store_true",
                   help="alternate fitting and thresholding to a fixed point")
    p.add_argument("--bits", type=int, default=11)
    p.add_argument("--lmax", type=float)
    p.add_argument("--max-iter", type=int, default=1000)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_de_threshold)

    p = sub.add_parser("code-gen", help="sample a girth-6 LDPC code")
    p.add_argument("--profile", required=True, metavar="DV,DC")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_code_gen)

    p = sub.add_parser("ber", help="Monte Carlo BER/FER sweep")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--plot", action="store_true")
    p.set_defaults(fn=cmd_ber)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return e.code if e.code is not None else EXIT_USAGE
    try:
        return args.fn(args)
    except BracketError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_BAD_BRACKET
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_MISSING_FILE
    except (ValueError, RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_BAD_COMBINATION


if __name__ == "__main__":
    sys.exit(main())
