"""Command-line front end.

Exit codes: 0 success, 1 verification failed, 2 usage or validation error,
3 I/O or parse error, 4 solver did not converge (output is still written).
Set ``AEROMAP_NUM_THREADS`` to cap BLAS threads (needs threadpoolctl).
"""

import argparse
import contextlib
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import fileio, verify
from .errors import AeromapError, FileFormatError, ScenarioError
from .geometry import forward_csm
from .recon import (
    ReconConfig,
    beamform,
    cmf_solve,
    damas_gauss_seidel,
    damas_tikhonov,
    normalize_map,
    psf_matrix,
)
from .scenario import load as load_scenario
from .synth import add_noise, estimate_csm, simulate_ensemble

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_NONCONVERGED = 4
THREADS_ENV = "AEROMAP_NUM_THREADS"

log = logging.getLogger("aeromap")


class UsageError(AeromapError):
    pass


def _thread_limit():
    value = os.environ.get(THREADS_ENV)
    if not value:
        return contextlib.nullcontext()
    try:
        n = int(value)
    except ValueError:
        raise UsageError(f"{THREADS_ENV} must be an integer, got {value!r}") from None
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        log.warning("%s set but threadpoolctl is not installed; ignoring", THREADS_ENV)
        return contextlib.nullcontext()
    return threadpool_limits(limits=n)


def _scenario(args):
    scn = load_scenario(args.scenario)
    if getattr(args, "seed", None) is not None:
        scn = scn.with_seed(args.seed)
    return scn


def _csm_for(args, G):
    C = fileio.read_csm(args.csm)
    if C.size != G.shape[0]:
        raise ScenarioError(f"CSM has {C.size} channels, scenario array has {G.shape[0]}")
    return C


def _normalized_path(args):
    if args.normalized_out:
        return args.normalized_out
    p = Path(args.out)
    return str(p.with_name(p.stem + ".normalized" + p.suffix))


def _write_map(args, values, grid, kind="raw"):
    fileio.write_source_map(args.out, values, grid.points, kind)
    log.info("wrote %s map to %s", kind, args.out)
    if getattr(args, "normalize", False):
        norm, mask = normalize_map(values, args.threshold)
        shown = np.where(mask, norm.values, np.nan)
        path = _normalized_path(args)
        fileio.write_source_map(path, shown, grid.points, "normalized")
        log.info("wrote normalized map (threshold %g) to %s", args.threshold, path)


def _finish(result, what):
    info = result.info
    log.info("%s: %s after %d iterations", what, info.status, info.iterations)
    if not info.converged:
        log.error("%s did not converge (status %s); partial result written", what, info.status)
        return EXIT_NONCONVERGED
    return EXIT_OK


def _recon_config(args):
    return ReconConfig(alpha=args.alpha, penalty=args.penalty, max_iter=args.max_iter, tol=args.tol)


def cmd_synth(args):
    scn = _scenario(args)
    G = scn.propagation()
    q = scn.source_powers()
    exact = args.exact or scn.exact or scn.snapshots == 0
    if exact:
        C = forward_csm(q, G)
        log.info("exact CSM (snapshot count 0)")
    else:
        C = estimate_csm(simulate_ensemble(q, G, scn.seed, scn.snapshots))
        log.info("estimated CSM from L=%d snapshots, seed %d", scn.snapshots, scn.seed)
    if scn.noise > 0:
        C = add_noise(C, scn.noise)
    lam = np.linalg.eigvalsh(C.entries)
    rank = int(np.sum(lam > lam[-1] * C.size * np.finfo(float).eps))
    cond = lam[-1] / lam[0] if lam[0] > 0 else np.inf
    log.info("CSM eigenvalues in [%.3e, %.3e], numerical rank %d/%d, condition %.3e",
             lam[0], lam[-1], rank, C.size, cond)
    fileio.write_csm(args.out, C)
    return EXIT_OK


def cmd_beamform(args):
    scn = _scenario(args)
    G = scn.propagation()
    I = beamform(_csm_for(args, G), G)
    _write_map(args, I.values, G.grid)
    return EXIT_OK


def cmd_damas(args):
    scn = _scenario(args)
    G = scn.propagation()
    I = beamform(_csm_for(args, G), G)
    psi = psf_matrix(G)
    cfg = _recon_config(args)
    if args.solver == "gauss-seidel":
        if cfg.alpha > 0:
            raise UsageError("--alpha needs --solver tikhonov")
        result = damas_gauss_seidel(I, psi, cfg)
    else:
        result = damas_tikhonov(I, psi, cfg)
    _write_map(args, result.values, G.grid)
    return _finish(result, f"DAMAS ({args.solver})")


def cmd_cmf(args):
    scn = _scenario(args)
    G = scn.propagation()
    result = cmf_solve(_csm_for(args, G), G, _recon_config(args))
    _write_map(args, result.values, G.grid)
    return _finish(result, "CMF")


def cmd_psf(args):
    scn = _scenario(args)
    G = scn.propagation()
    if not 0 <= args.index < G.shape[1]:
        raise UsageError(f"focus index {args.index} outside 0..{G.shape[1] - 1}")
    psi = psf_matrix(G)
    _write_map(args, psi.entries[:, args.index], G.grid, "psf")
    return EXIT_OK


def _overrides(items):
    out = {}
    for item in items or ():
        name, sep, value = item.partition("=")
        if not sep or name not in verify.TOLERANCES:
            raise UsageError(f"bad --tol-override {item!r}; names: {', '.join(verify.TOLERANCES)}")
        try:
            nums = tuple(float(v) for v in value.split(","))
        except ValueError:
            raise UsageError(f"bad tolerance value in {item!r}") from None
        if len(nums) != np.size(verify.TOLERANCES[name]):
            raise UsageError(f"{name} takes {np.size(verify.TOLERANCES[name])} value(s)")
        out[name] = nums if len(nums) > 1 else nums[0]
    return out


def cmd_verify(args):
    scn = _scenario(args)
    report = verify.run_all(scn.mic_array(), scn.focus_grid(), scn.flow, scn.source_powers(),
                            seed=scn.seed, tolerances=_overrides(args.tol_override))
    text = report.to_text()
    sys.stdout.write(text)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        json_path = args.json or str(Path(args.out).with_suffix(".json"))
        Path(json_path).write_text(report.to_json(), encoding="utf-8")
        log.info("wrote %s and %s", args.out, json_path)
    return EXIT_OK if report.passed else EXIT_VERIFY


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser():
    p = argparse.ArgumentParser(prog="aeromap", description="Aeroacoustic source mapping in uniform flow.")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, csm=True, out_required=True):
        sp.add_argument("--scenario", required=True, help="scenario file")
        if csm:
            sp.add_argument("--csm", required=True, help="CSM file")
        sp.add_argument("--out", required=out_required, help="output file")
        sp.add_argument("--seed", type=int, help="override the scenario seed")

    def mapping(sp):
        sp.add_argument("--normalize", action="store_true",
                        help="also write a map scaled to max 1 with sub-threshold entries as nan")
        sp.add_argument("--threshold", type=float, default=0.1)
        sp.add_argument("--normalized-out", help="path of the normalized map")

    def solver(sp):
        sp.add_argument("--alpha", type=float, default=0.0)
        sp.add_argument("--penalty", choices=("l2", "l1"), default="l2")
        sp.add_argument("--max-iter", type=_positive_int, default=5000)
        sp.add_argument("--tol", type=float, default=1e-12)

    s = sub.add_parser("synth", help="synthesize a CSM from the scenario's sources")
    common(s, csm=False)
    s.add_argument("--exact", action="store_true", help="write forward_csm(q) instead of an estimate")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("beamform", help="conventional beamforming map")
    common(s)
    mapping(s)
    s.set_defaults(func=cmd_beamform)

    s = sub.add_parser("damas", help="DAMAS deconvolution")
    common(s)
    mapping(s)
    solver(s)
    s.add_argument("--solver", choices=("gauss-seidel", "tikhonov"), default="gauss-seidel")
    s.set_defaults(func=cmd_damas)

    s = sub.add_parser("cmf", help="covariance matrix fitting")
    common(s)
    mapping(s)
    solver(s)
    s.set_defaults(func=cmd_cmf)

    s = sub.add_parser("psf", help="point-spread function of one focus point")
    common(s, csm=False)
    mapping(s)
    s.add_argument("--index", type=int, required=True, help="focus point index of the unit source")
    s.set_defaults(func=cmd_psf)

    s = sub.add_parser("verify", help="run the numerical verification suite")
    common(s, csm=False, out_required=False)
    s.add_argument("--json", help="machine-readable report path (default: --out with .json)")
    s.add_argument("--tol-override", action="append", metavar="NAME=VALUE",
                   help="replace a check tolerance (repeatable)")
    s.set_defaults(func=cmd_verify)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    level = logging.WARNING - 10 * min(args.verbose + 1, 2)
    logging.basicConfig(level=level, format="%(levelname)s: %(message)s", stream=sys.stderr, force=True)
    try:
        with _thread_limit():
            return args.func(args)
    except FileFormatError as exc:
        log.error("parse error: %s", exc)
        return EXIT_IO
    except OSError as exc:
        log.error("I/O error: %s", exc)
        return EXIT_IO
    except (AeromapError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
