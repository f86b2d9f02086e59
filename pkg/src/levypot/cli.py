"""Command line front end.

Each subcommand wraps one library layer and writes its artifact under an
output directory:

    kernels   j and g tables for a catalog phi on a log radius grid
    scaling   weak scaling exponents, global comparability, transience
    fatness   propose and verify a fatness-at-infinity certificate
    exit      simulate first exits, write the per-path sample table
    verify    run a named experiment and write its report
    martin    Martin kernel limit along an escaping dyadic ray

Common flags: --phi, --domain, --seed, --samples, --out, --format.
Any flag may instead come from a JSON config file (--config); explicit
flags win over the file.  The LEVYPOT_OUT environment variable supplies
the default output directory when --out is absent.

Exit status: 0 when every verdict produced by the run is non-violated,
1 when a verdict is violated or a certificate fails, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys

import numpy as np

from .bernstein import (check_global_scaling, estimate_scaling_profile,
                        parse_phi, transience_check)
from .errors import LevypotError
from .geometry import parse_domain, propose_witness, verify_fatness
from .harness import EXPERIMENT_IDS, ExperimentConfig, run_experiment
from .kernels import build_kernel_table
from .montecarlo import (PathConfig, estimate_green, simulate_exits,
                         write_exits_csv)
from .potential import StableOracle, estimate_martin_limit

__all__ = ["cli_main"]

_ENV_OUT = "LEVYPOT_OUT"
_DIM = 3


def _jsonable(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return _jsonable(dataclasses.asdict(obj))
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if callable(obj):
        return getattr(obj, "__name__", "callable")
    return obj


def _slug(text):
    out = []
    for ch in text:
        out.append(ch if ch.isalnum() or ch in ".-" else "_")
    return "".join(out)


def _write_payload(payload, out_dir, stem, fmt):
    """JSON always; a flat key,value CSV beside it when asked for."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    jp = os.path.join(out_dir, stem + ".json")
    with open(jp, "w") as fh:
        fh.write(json.dumps(_jsonable(payload), sort_keys=True, indent=2)
                 + "\n")
    paths.append(jp)
    if fmt == "csv":
        cp = os.path.join(out_dir, stem + ".csv")
        with open(cp, "w") as fh:
            fh.write("key,value\n")
            for key, val in sorted(_flatten(payload)):
                fh.write(f"{key},{val!r}\n".replace("'", ""))
        paths.append(cp)
    return paths


def _flatten(obj, prefix=""):
    obj = _jsonable(obj)
    if isinstance(obj, dict):
        for k, v in obj.items():
            yield from _flatten(v, f"{prefix}{k}.")
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            yield from _flatten(v, f"{prefix}{i}.")
    else:
        yield prefix.rstrip("."), obj


def _default_start(D):
    """An interior point with clearance, for exit sampling."""
    for s in np.geomspace(0.25, 64.0, 33):
        p = np.zeros(D.dim)
        p[-1] = s
        if D.contains(p) and D.dist_to_complement(p) > 0.05 * max(1.0, s):
            return p
    origin = np.zeros(D.dim)
    if D.contains(origin):
        return origin
    cert = propose_witness(D)
    return np.asarray(cert.witness(cert.R), dtype=float)


# -- subcommand bodies -----------------------------------------------------

def _cmd_kernels(ns):
    f = parse_phi(ns.phi)
    radii = np.geomspace(1e-3, 1e3, 121)
    table = build_kernel_table(f, _DIM, radii, tol=1e-8)
    os.makedirs(ns.out, exist_ok=True)
    stem = os.path.join(ns.out, "kernels_" + _slug(f.spec_id))
    if ns.format == "csv":
        path = stem + ".csv"
        table.to_csv(path)
    else:
        path = stem + ".json"
        table.to_json(path)
    flagged = sum(table.flags)
    print(f"kernels {f.spec_id} route={table.green_route} "
          f"flagged={flagged}/{len(table.radii)} -> {path}")
    return 0


def _cmd_scaling(ns):
    f = parse_phi(ns.phi)
    profile = estimate_scaling_profile(f)
    glob = check_global_scaling(f, profile)
    trans = transience_check(f, _DIM, profile)
    payload = {
        "schema": "levypot.scaling.v1",
        "phi": f.spec_id,
        "profile": profile,
        "global_scaling": glob,
        "transience": trans,
    }
    paths = _write_payload(payload, ns.out, "scaling_" + _slug(f.spec_id),
                           ns.format)
    print(f"scaling {f.spec_id} delta=[{profile.delta_low:.6g}, "
          f"{profile.delta_high:.6g}] global={'pass' if glob.passed else 'fail'} "
          f"transience={trans.verdict} -> {paths[0]}")
    return 0 if glob.passed else 1


def _cmd_fatness(ns):
    D = parse_domain(ns.domain, dim=_DIM)
    cert = propose_witness(D)
    report = verify_fatness(D, cert)
    payload = {
        "schema": "levypot.fatness.v1",
        "domain": D.spec_id,
        "kappa": cert.kappa,
        "R": cert.R,
        "witness": cert.witness_desc,
        "report": report,
    }
    paths = _write_payload(payload, ns.out, "fatness_" + _slug(D.spec_id),
                           ns.format)
    status = "pass" if report.all_passed else "fail"
    print(f"fatness {D.spec_id} kappa={cert.kappa:.6g} R={cert.R:.6g} "
          f"{status} -> {paths[0]}")
    return 0 if report.all_passed else 1


def _cmd_exit(ns):
    f = parse_phi(ns.phi)
    D = parse_domain(ns.domain, dim=_DIM)
    n = ns.samples if ns.samples is not None else 5000
    cfg = PathConfig(seed=ns.seed, n_paths=n)
    start = _default_start(D)
    batch = simulate_exits(D, start, f, cfg)
    os.makedirs(ns.out, exist_ok=True)
    stem = "exit_" + _slug(D.spec_id) + "_" + _slug(f.spec_id)
    paths = []
    if ns.format == "csv":
        cp = os.path.join(ns.out, stem + ".csv")
        write_exits_csv(batch, cp)
        paths.append(cp)
    summary = {
        "schema": "levypot.exit.v1",
        "phi": f.spec_id,
        "domain": D.spec_id,
        "seed": ns.seed,
        "n_paths": batch.n,
        "start": list(start),
        "exited_fraction": float(np.mean(batch.exited)),
        "censored_fraction": batch.censored_fraction,
        "jump_exit_fraction": float(np.mean(batch.jump_exit)),
        "mean_exit_time": float(np.mean(batch.times[batch.exited]))
        if np.any(batch.exited) else math.nan,
    }
    if ns.format != "csv":
        summary["positions"] = batch.positions
        summary["times"] = batch.times
        summary["status"] = batch.status
    jp = _write_payload(summary, ns.out, stem, "json")[0]
    paths.append(jp)
    print(f"exit {D.spec_id} {f.spec_id} n={batch.n} "
          f"exited={summary['exited_fraction']:.4f} -> {paths[0]}")
    return 0


def _cmd_verify(ns):
    if ns.experiment not in EXPERIMENT_IDS:
        known = ", ".join(sorted(EXPERIMENT_IDS))
        print(f"unknown experiment {ns.experiment!r}; known: {known}",
              file=sys.stderr)
        return 2
    kwargs = dict(experiment=ns.experiment, phi=ns.phi, domain=ns.domain,
                  seed=ns.seed, out_dir=ns.out, fmt=ns.format)
    if ns.samples is not None:
        kwargs["n_paths"] = ns.samples
    cfg = ExperimentConfig(**kwargs)
    report = run_experiment(cfg)
    print(f"verify {ns.experiment} phi={ns.phi} domain={ns.domain} "
          f"verdict={report.verdict} spread={report.spread:.6g}")
    return 0 if report.verdict != "violated" else 1


def _cmd_martin(ns):
    f = parse_phi(ns.phi)
    D = parse_domain(ns.domain, dim=_DIM)
    cert = propose_witness(D)
    a = np.asarray(cert.witness(cert.R), dtype=float)
    ray = a / np.linalg.norm(a)
    # reference points sit off the ray so no dyadic shell lands on them;
    # an offset below dist_to_complement keeps a point interior
    perp = np.zeros(D.dim)
    perp[0] = 1.0
    perp -= ray * float(perp @ ray)
    nrm = np.linalg.norm(perp)
    if nrm < 1e-12:
        perp = np.zeros(D.dim)
        perp[1] = 1.0
        perp -= ray * float(perp @ ray)
        nrm = np.linalg.norm(perp)
    perp /= nrm
    b = np.asarray(cert.witness(4.0 * cert.R), dtype=float)
    x0 = a + 0.5 * float(D.dist_to_complement(a)) * perp
    x = b + 0.5 * float(D.dist_to_complement(b)) * perp
    oracle = green_fn = None
    if f.kind == "stable":
        oracle = StableOracle(_DIM, f.params[0])
    else:
        n = ns.samples if ns.samples is not None else 4000
        pcfg = PathConfig(seed=ns.seed, n_paths=n)
        batches = {}

        def green_fn(p, q):
            # one exit batch per start point, shared across shells
            key = tuple(p)
            if key not in batches:
                batches[key] = simulate_exits(D, p, f, pcfg)
            est = estimate_green(D, p, q, f, pcfg, batch=batches[key])
            return est.value, est.stderr

    # the first shell sits at the witness itself, so every dyadic shell
    # along the ray stays inside the domain
    est = estimate_martin_limit(D, x, x0, ray, oracle=oracle,
                                green_fn=green_fn, phi_id=f.spec_id,
                                base_radius=float(np.linalg.norm(a)))
    payload = {"schema": "levypot.martin.v1", "estimate": est}
    stem = "martin_" + _slug(D.spec_id) + "_" + _slug(f.spec_id)
    paths = _write_payload(payload, ns.out, stem, ns.format)
    print(f"martin {D.spec_id} {f.spec_id} limit={est.limit:.8g} "
          f"+-{est.limit_err:.3g} declared={est.declared} -> {paths[0]}")
    return 0


# -- argument plumbing -----------------------------------------------------

def _build_parser():
    parser = argparse.ArgumentParser(
        prog="levypot",
        description="kernels, certificates, exit sampling and experiment "
                    "verification for subordinate Brownian motions")
    sub = parser.add_subparsers(dest="command")

    def common(p):
        p.add_argument("--phi", default=None, help="catalog phi id")
        p.add_argument("--domain", default=None, help="domain spec string")
        p.add_argument("--seed", type=int, default=None, help="RNG seed")
        p.add_argument("--samples", type=int, default=None,
                       help="Monte Carlo path count")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--format", choices=("csv", "json"), default=None)
        p.add_argument("--config", default=None,
                       help="JSON file supplying any of the flags above")

    common(sub.add_parser("kernels", help="tabulate j and g"))
    common(sub.add_parser("scaling", help="scaling and transience report"))
    common(sub.add_parser("fatness", help="fatness certificate check"))
    common(sub.add_parser("exit", help="simulate first exits"))
    pv = sub.add_parser("verify", help="run a named experiment")
    pv.add_argument("experiment", help="experiment id")
    common(pv)
    common(sub.add_parser("martin", help="Martin limit along a ray"))
    return parser


_DEFAULTS = {"phi": "stable:alpha=1", "domain": "extball:r=1", "seed": 42,
             "samples": None, "out": None, "format": "json"}


def _resolve(ns):
    """Fill unset flags from the config file, then from defaults."""
    fromfile = {}
    if ns.config:
        with open(ns.config) as fh:
            fromfile = json.load(fh)
        if not isinstance(fromfile, dict):
            raise LevypotError("config file must hold a JSON object")
        unknown = set(fromfile) - set(_DEFAULTS)
        if unknown:
            raise LevypotError(
                "unknown config keys: " + ", ".join(sorted(unknown)))
    for key, default in _DEFAULTS.items():
        if getattr(ns, key) is None:
            value = fromfile.get(key, default)
            if key == "seed" and value is not None:
                value = int(value)
            if key == "samples" and value is not None:
                value = int(value)
            setattr(ns, key, value)
    if ns.out is None:
        ns.out = os.environ.get(_ENV_OUT, "reports")
    if ns.format not in ("csv", "json"):
        raise LevypotError(f"format must be csv or json, got {ns.format!r}")
    if ns.seed < 0 or ns.seed >= 2 ** 64:
        raise LevypotError("seed must fit in an unsigned 64-bit integer")
    return ns


_COMMANDS = {
    "kernels": _cmd_kernels,
    "scaling": _cmd_scaling,
    "fatness": _cmd_fatness,
    "exit": _cmd_exit,
    "verify": _cmd_verify,
    "martin": _cmd_martin,
}


def cli_main(argv=None):
    if argv is None:
        argv = sys.argv[1:]
    parser = _build_parser()
    if not argv:
        parser.print_help()
        return 2
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if ns.command is None:
        parser.print_help()
        return 2
    try:
        ns = _resolve(ns)
        return _COMMANDS[ns.command](ns)
    except LevypotError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(cli_main())
