"""Command-line experiment runner.

Every subcommand reads one JSON config, writes CSV/JSON outputs into the
output directory and a ``<file>.provenance.json`` sidecar next to each.
Exit codes: 0 success, 1 inconclusive or negative result, 2 error.

Example config for ``detect``::

    {
      "map": {"type": "circle", "k": 2, "eps": 0.0},
      "basis": {"family": "fourier", "N": 64},
      "observable": "cos1",
      "t_grid": {"n": 21, "t_max": 0.5}
    }
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import platform
import re
import sys
import time
from pathlib import Path

import jsonschema
import numpy as np
import scipy

from . import __version__
from .basis import FourierBasis, UlamBasis, basis_from_spec, project, rep_to_csv
from .coboundary import (
    COBOUNDARY,
    INCONCLUSIVE,
    Tolerances,
    default_t_grid,
    detect,
    periodic_obstructions,
    recover,
)
from .errors import ConfigInvalid, LivsicError, NoneCertified
from .maps import AnalyticCircleMap, BetaTransformation, TsujiiSkewProduct, map_from_spec, map_to_spec
from .spectral import TwistedFamily, lambda_curve_csv
from .vexp import certificates_csv, certify, min_expanding_m

__all__ = ["main", "build_parser", "load_config", "make_observable", "CONFIG_SCHEMA"]

log = logging.getLogger("livsic")

TWO_PI = 2.0 * np.pi
SUBCOMMANDS = ("density", "lambda-curve", "detect", "recover", "periodic", "vexp-certify", "selftest")

_OBSERVABLE = {
    "oneOf": [
        {"type": "string"},
        {"type": "number"},
        {
            "type": "array",
            "items": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 3},
        },
        {
            "type": "object",
            "properties": {"coboundary_of": {"$ref": "#/$defs/observable"}},
            "required": ["coboundary_of"],
            "additionalProperties": False,
        },
    ]
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "$defs": {"observable": _OBSERVABLE},
    "type": "object",
    "properties": {
        "map": {
            "type": "object",
            "properties": {
                "type": {"enum": ["circle", "beta", "tsujii"]},
                "k": {"type": "integer", "minimum": 2},
                "eps": {"type": "number"},
                "beta": {"oneOf": [{"type": "number", "exclusiveMinimum": 1}, {"const": "golden"}]},
                "m": {"type": "integer", "minimum": 2},
            },
            "required": ["type"],
            "additionalProperties": False,
        },
        "basis": {
            "type": "object",
            "properties": {
                "family": {"enum": ["fourier", "ulam"]},
                "N": {"type": "integer", "minimum": 1},
            },
            "required": ["family", "N"],
            "additionalProperties": False,
        },
        "observable": {"$ref": "#/$defs/observable"},
        "t_grid": {
            "oneOf": [
                {"type": "array", "items": {"type": "number"}, "minItems": 1},
                {
                    "type": "object",
                    "properties": {
                        "n": {"type": "integer", "minimum": 1},
                        "t_max": {"type": "number", "minimum": 0},
                    },
                    "additionalProperties": False,
                },
            ]
        },
        "tolerances": {
            "type": "object",
            "properties": {
                "drift": {"type": "number", "exclusiveMinimum": 0},
                "variance": {"type": "number", "exclusiveMinimum": 0},
                "lam": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
        "method": {"enum": ["cauchy", "resolvent"]},
        "residual_tol": {"type": "number", "exclusiveMinimum": 0},
        "detect_first": {"type": "boolean"},
        "n_max": {"type": "integer", "minimum": 1},
        "s": {"type": "number", "exclusiveMinimum": 0},
        "m_range": {"type": "array", "items": {"type": "integer", "minimum": 2}, "minItems": 2, "maxItems": 2},
        "variant": {"enum": ["printed", "reciprocal", "reciprocal-pullback"]},
        "x_resolution": {"type": "integer", "minimum": 64},
        "angle_resolution": {"type": "integer", "minimum": 64},
        "criteria": {"type": "array", "items": {"type": "integer", "minimum": 1, "maximum": 11}},
        "out": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0},
    },
    "additionalProperties": False,
}

DEFAULTS = {
    "t_grid": {"n": 21, "t_max": 0.5},
    "n_max": 6,
    "s": 2.0,
    "variant": "reciprocal",
    "x_resolution": 256,
    "angle_resolution": 256,
    "detect_first": False,
    "out": "out",
    "seed": 0,
}


def load_config(path) -> dict:
    """Read, validate and fill defaults. Raises :class:`ConfigInvalid`."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigInvalid(f"{path}: cannot read config ({exc.strerror})") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise ConfigInvalid(f"{path}: field '{where}': {err.message}")
    return {**DEFAULTS, **cfg}


def _need(cfg: dict, *keys) -> None:
    missing = [k for k in keys if k not in cfg]
    if missing:
        raise ConfigInvalid(f"field '{missing[0]}': required for this subcommand")


_INDICATOR = re.compile(r"^indicator-([0-9.eE+]+)-([0-9.eE+]+)$")
_CONSTANT = re.compile(r"^constant[ -]?(-?[0-9.eE+-]+)$")


def _observable_function(spec):
    """Pointwise callable for an observable spec (before any coboundary wrapping)."""
    if isinstance(spec, (int, float)):
        c = float(spec)
        return lambda x: np.full_like(np.asarray(x, dtype=float), c)
    if isinstance(spec, list):
        terms = [(int(t[0]), complex(t[1], t[2] if len(t) > 2 else 0.0)) for t in spec]

        def trig(x):
            x = np.asarray(x, dtype=float)
            out = sum(c * np.exp(TWO_PI * 1j * n * x) for n, c in terms)
            return out + 0.0 * x

        return trig
    if spec == "cos1":
        return lambda x: np.cos(TWO_PI * np.asarray(x, dtype=float))
    if spec == "cos2-minus-cos1":
        return lambda x: np.cos(4 * np.pi * np.asarray(x, dtype=float)) - np.cos(TWO_PI * np.asarray(x, dtype=float))
    m = _INDICATOR.match(spec)
    if m:
        a, b = float(m.group(1)), float(m.group(2))
        return lambda x: ((np.asarray(x) >= a) & (np.asarray(x) < b)).astype(float)
    m = _CONSTANT.match(spec)
    if m:
        c = float(m.group(1))
        return lambda x: np.full_like(np.asarray(x, dtype=float), c)
    raise ConfigInvalid(f"field 'observable': unknown builtin {spec!r}")


def make_observable(spec, tmap):
    """Pointwise callable; ``{"coboundary_of": g}`` yields ``g o T - g``."""
    if isinstance(spec, dict):
        g = make_observable(spec["coboundary_of"], tmap)
        return lambda x: g(tmap(x)) - g(x)
    return _observable_function(spec)


def _t_grid(cfg: dict) -> np.ndarray:
    g = cfg["t_grid"]
    if isinstance(g, list):
        return np.asarray(g, dtype=float)
    return default_t_grid(g.get("n", 21), g.get("t_max", 0.5))


class Run:
    """Output bookkeeping for one invocation."""

    def __init__(self, command: str, cfg: dict, out: Path, threads: int):
        self.command = command
        self.cfg = cfg
        self.out = out
        self.threads = threads
        self.t0 = time.perf_counter()
        self.timings: dict = {}
        self.written: list = []
        out.mkdir(parents=True, exist_ok=True)

    def write(self, name: str, text: str, extra: dict | None = None) -> Path:
        path = self.out / name
        path.write_text(text)
        digest = hashlib.sha256(text.encode()).hexdigest()
        prov = {
            "file": name,
            "sha256": digest,
            "command": self.command,
            "config": self.cfg,
            "versions": {
                "livsic": __version__,
                "python": platform.python_version(),
                "numpy": np.__version__,
                "scipy": scipy.__version__,
            },
            "threads": self.threads,
            "timings": {**self.timings, "total_s": time.perf_counter() - self.t0},
        }
        if extra:
            prov.update(extra)
        (self.out / f"{name}.provenance.json").write_text(json.dumps(prov, indent=2, sort_keys=True, default=str))
        self.written.append(path)
        return path


def _setup(cfg: dict):
    _need(cfg, "map", "basis")
    tmap = map_from_spec(cfg["map"])
    basis = basis_from_spec(cfg["basis"])
    return tmap, basis


def _family(cfg, tmap, basis, need_observable=True):
    if need_observable:
        _need(cfg, "observable")
        f = project(make_observable(cfg["observable"], tmap), basis)
    else:
        f = basis.constant(0.0)
    return f, TwistedFamily(tmap, basis, f)


def cmd_density(run: Run, args) -> int:
    tmap, basis = _setup(run.cfg)
    t = time.perf_counter()
    f, fam = _family(run.cfg, tmap, basis, need_observable=False)
    run.timings["eigen_s"] = time.perf_counter() - t
    eig = fam.eig
    chi = eig.density
    if isinstance(basis, FourierBasis):
        x = np.arange(512) / 512
    else:
        x = basis.midpoints
    vals = chi(x)
    lines = ["x,chi"] + [f"{xi!r},{float(v.real)!r}" for xi, v in zip(x.tolist(), vals)]
    run.write("density.csv", "\n".join(lines) + "\n")
    run.write("density_coefficients.csv", rep_to_csv(chi))
    summary = {
        "eigenvalue": [eig.eigenvalue.real, eig.eigenvalue.imag],
        "gap": eig.gap,
        "second_modulus": eig.second_modulus,
        "residual": eig.residual,
        "contour_radius": fam.contour.radius,
    }
    run.write("density_summary.json", json.dumps(summary, indent=2, sort_keys=True))
    if args.dump_operator:
        run.write("operator.csv", fam.plain.to_csv())
    return 0


def cmd_lambda_curve(run: Run, args) -> int:
    tmap, basis = _setup(run.cfg)
    f, fam = _family(run.cfg, tmap, basis)
    data = fam.lambda_curve(_t_grid(run.cfg), workers=run.threads)
    run.write("lambda_curve.csv", lambda_curve_csv(data))
    if args.dump_operator:
        run.write("operator.csv", fam.plain.to_csv())
    return 0


def _tolerances(cfg, basis) -> Tolerances:
    base = Tolerances.for_basis(basis)
    return Tolerances(**{**base.__dict__, **cfg.get("tolerances", {})})


def cmd_detect(run: Run, args) -> int:
    tmap, basis = _setup(run.cfg)
    f, fam = _family(run.cfg, tmap, basis)
    tol = _tolerances(run.cfg, basis)
    report = detect(tmap, f, basis, _t_grid(run.cfg), tol, fam, workers=run.threads)
    if isinstance(tmap, AnalyticCircleMap) and "n_max" in run.cfg:
        report.periodic_obstruction_max = periodic_obstructions(
            tmap, make_observable(run.cfg["observable"], tmap), run.cfg["n_max"]
        ).max_abs
    run.write("report.json", report.to_json(), {"tolerances": tol.__dict__})
    return 1 if report.verdict == INCONCLUSIVE else 0


def cmd_recover(run: Run, args) -> int:
    tmap, basis = _setup(run.cfg)
    f, fam = _family(run.cfg, tmap, basis)
    method = args.method or run.cfg.get("method") or ("cauchy" if isinstance(basis, FourierBasis) else "resolvent")
    report = None
    if run.cfg["detect_first"]:
        report = detect(tmap, f, basis, _t_grid(run.cfg), _tolerances(run.cfg, basis), fam, workers=run.threads)
        if report.verdict != COBOUNDARY:
            run.write("report.json", report.to_json())
            log.warning("detect verdict %s; recovery skipped", report.verdict)
            return 1
    rec = recover(tmap, f, basis, method=method, family=fam)
    run.write("h.csv", rep_to_csv(rec.h))
    summary = {
        "method": rec.method,
        "residual_max": rec.residual,
        "residual_mean": rec.mean_residual,
        "imag_leak": rec.imag_leak,
        "fd_deviation": rec.fd_deviation,
    }
    if report is not None:
        report.h = rec.h
        report.cocycle_residual = rec.residual
        summary["report"] = report.to_dict()
    # BV recoveries are judged by the cell-averaged residual
    if isinstance(basis, UlamBasis):
        measured, tol = rec.mean_residual, run.cfg.get("residual_tol", 0.02)
    else:
        measured, tol = rec.residual, run.cfg.get("residual_tol", 1e-6)
    summary["residual_tol"] = tol
    run.write("recovery.json", json.dumps(summary, indent=2, sort_keys=True), {"residual_tol": tol})
    return 0 if measured <= tol else 1


def cmd_periodic(run: Run, args) -> int:
    _need(run.cfg, "map", "observable")
    tmap = map_from_spec(run.cfg["map"])
    f = make_observable(run.cfg["observable"], tmap)
    obs = periodic_obstructions(tmap, f, run.cfg["n_max"])
    lines = ["period,start,points,sum_re,sum_im,closure_residual"]
    for orbit, s in obs.entries:
        pts = " ".join(repr(p) for p in orbit.points)
        lines.append(f"{orbit.period},{orbit.start!r},{pts},{s.real!r},{s.imag!r},{orbit.closure_residual!r}")
    run.write("periodic.csv", "\n".join(lines) + "\n", {"max_abs": obs.max_abs, "heuristic": obs.heuristic})
    return 0


def cmd_vexp(run: Run, args) -> int:
    cfg = run.cfg
    variant = args.variant or cfg["variant"]
    res = (cfg["x_resolution"], cfg["angle_resolution"])
    if "m_range" in cfg:
        lo, hi = cfg["m_range"]
        family = "circle" if cfg.get("map", {}).get("type") == "circle" else "tsujii"
        try:
            m_star, cert = min_expanding_m(cfg["s"], cfg["n_max"], range(lo, hi + 1), variant, family, *res)
        except NoneCertified as exc:
            log.warning("%s", exc)
            run.write("certificates.csv", certificates_csv([]), {"certified": False, "message": str(exc)})
            return 1
        run.write("certificates.csv", certificates_csv([cert]), {"m_star": m_star})
        return 0
    _need(cfg, "map")
    tmap = map_from_spec(cfg["map"])
    cert = certify(tmap, cfg["s"], cfg["n_max"], variant, *res)
    run.write("certificates.csv", certificates_csv([cert]), {"certified": cert.certified})
    return 0 if cert.certified else 1


def cmd_selftest(run: Run, args) -> int:
    from .selftest import run_all

    results = run_all(run.cfg.get("criteria"))
    lines = ["criterion,name,passed,seconds,measured"]
    for r in results:
        print(r.line())
        measured = json.dumps(r.measured, sort_keys=True, default=float).replace('"', "'")
        lines.append(f'{r.number},{r.name},{int(r.passed)},{r.seconds:.3f},"{measured}"')
    run.write("selftest.csv", "\n".join(lines) + "\n")
    return 0 if all(r.passed for r in results) else 1


HANDLERS = {
    "density": cmd_density,
    "lambda-curve": cmd_lambda_curve,
    "detect": cmd_detect,
    "recover": cmd_recover,
    "periodic": cmd_periodic,
    "vexp-certify": cmd_vexp,
    "selftest": cmd_selftest,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="livsic",
        description="Coboundary detection and transfer-operator experiments for expanding maps.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        # selftest has built-in experiments, so its config is optional
        p.add_argument("--config", required=name != "selftest", help="JSON experiment config")
        p.add_argument("--out", help="output directory (overrides the config)")
        p.add_argument("--threads", type=int, default=1, help="worker threads, 0 = auto")
        if name == "vexp-certify":
            p.add_argument("--variant", choices=["printed", "reciprocal"], help="cotangent weight variant")
        if name == "recover":
            p.add_argument("--method", choices=["cauchy", "resolvent"], help="recovery method")
        if name in ("density", "lambda-curve"):
            p.add_argument("--dump-operator", action="store_true", help="also write the operator matrix CSV")
    return parser


def _configure_logging() -> None:
    level = {"quiet": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}.get(
        os.environ.get("LIVSIC_LOG", "quiet").lower(), logging.WARNING
    )
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def main(argv=None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    for attr in ("variant", "method", "dump_operator"):
        if not hasattr(args, attr):
            setattr(args, attr, None)
    try:
        cfg = load_config(args.config) if args.config else dict(DEFAULTS)
        out = Path(args.out or cfg["out"])
        threads = args.threads if args.threads > 0 else (os.cpu_count() or 1)
        run = Run(args.command, cfg, out, threads)
        return HANDLERS[args.command](run, args)
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (LivsicError, ValueError, TypeError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
