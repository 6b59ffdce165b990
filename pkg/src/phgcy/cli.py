"""Command-line front end.

Subcommands::

    phgcy indicial SPECTRUM.json            indicial root table
    phgcy pushforward FAMILY.json MATRIX.json
    phgcy glue    CONFIG.json [--eps-grid ...] [--out DIR]
    phgcy formal  CONFIG.json [--order N] ...
    phgcy newton  CONFIG.json ...
    phgcy sweep   CONFIG.json ...

Exit codes: 0 ok, 2 input error, 3 hypothesis violation, 4 solver failure.
Every run that writes files also writes ``manifest.json`` listing them.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import platform
import sys
import time
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional

import numpy as np

from . import __version__
from .cone import ConeError, IndicialWeightError, round_sphere_spectrum, spectrum_from_json
from .faces import FaceError
from .index_algebra import (
    IndexAlgebraError,
    NullFaceHypothesisError,
    exponent_matrix_from_json,
    index_family_from_json,
)
from .log_series import LogSeriesError
from .metrics import MetricError, SolverError, loglog_fit
from .presets import ConfigError, RunConfig, load_config
from .surgery import GluingPositivityError, SurgeryError

EXIT_OK, EXIT_INPUT, EXIT_HYPOTHESIS, EXIT_SOLVER = 0, 2, 3, 4


class HypothesisViolation(RuntimeError):
    """The requested computation lies outside the setting the solver is valid in."""


# ---------------------------------------------------------------------------
# manifest


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _versions() -> Dict[str, str]:
    import scipy

    return {"phgcy": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


@dataclass
class RunManifest:
    command: str
    config_hash: Optional[str]
    versions: Dict[str, str]
    inputs: Dict[str, str]  # path -> sha256
    outputs: List[str] = field(default_factory=list)
    wall_time: float = 0.0
    config: Optional[dict] = None
    report: dict = field(default_factory=dict)

    def write(self, out_dir) -> str:
        path = os.path.join(out_dir, "manifest.json")
        data = asdict(self)
        data["outputs"] = sorted(self.outputs + [path])
        with open(path, "w") as fh:
            json.dump(data, fh, indent=2, sort_keys=True, default=str)
            fh.write("\n")
        return path


def config_hash(cfg: RunConfig) -> str:
    # thread count does not change the numbers
    data = {k: v for k, v in cfg.to_json().items() if k != "workers"}
    text = json.dumps(data, sort_keys=True, default=str)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


class _Run:
    """Collects output paths and builds the manifest at the end."""

    def __init__(self, command, out_dir, inputs, cfg: Optional[RunConfig] = None, t0=None):
        self.t0 = time.perf_counter() if t0 is None else t0
        self.out_dir = out_dir
        os.makedirs(out_dir, exist_ok=True)
        self.manifest = RunManifest(
            command, config_hash(cfg) if cfg else None, _versions(),
            {str(p): _sha256(p) for p in inputs}, config=cfg.to_json() if cfg else None,
        )

    def path(self, name) -> str:
        p = os.path.join(self.out_dir, name)
        self.manifest.outputs.append(p)
        return p

    def finish(self) -> str:
        self.manifest.wall_time = time.perf_counter() - self.t0
        return self.manifest.write(self.out_dir)


def _write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(repr(v) if isinstance(v, float) else str(v) for v in row) + "\n")


def _fit(eps, vals):
    """Slope report, or None for fewer than two points."""
    if len(eps) < 2:
        return None
    slope, _, r2 = loglog_fit(eps, vals)
    return {"slope": float(slope), "r2": float(r2)}


# ---------------------------------------------------------------------------
# commands


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None


def cmd_indicial(args) -> int:
    data = _read_json(args.spectrum)
    if isinstance(data, dict) and "round_sphere" in data:
        spec = data["round_sphere"]
        try:
            spectrum = round_sphere_spectrum(int(spec["m"]), int(spec["jmax"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConeError(f"malformed round_sphere entry: {exc}") from None
    else:
        spectrum = spectrum_from_json(data)
    rows = []
    for md in spectrum.modes:
        ap, am = spectrum.root_table()[md.label]
        rows.append({"label": md.label, "lambda": str(md.lam), "mult": md.mult,
                     "a_plus": str(ap), "a_minus": str(am),
                     "a_plus_value": float(ap), "a_minus_value": float(am)})
    table = {"m": spectrum.m, "roots": rows}
    if args.out:
        run = _Run("indicial", args.out, [args.spectrum], t0=args.t0)
        with open(run.path("roots.json"), "w") as fh:
            json.dump(table, fh, indent=2)
            fh.write("\n")
        _write_csv(run.path("roots.csv"), ["label", "lambda", "mult", "a_plus", "a_minus"],
                   [[r["label"], r["lambda"], r["mult"], r["a_plus"], r["a_minus"]] for r in rows])
        run.finish()
    else:
        json.dump(table, sys.stdout, indent=2)
        sys.stdout.write("\n")
    return EXIT_OK


def cmd_pushforward(args) -> int:
    from .index_algebra import pushforward_index

    K = index_family_from_json(_read_json(args.family))
    e = exponent_matrix_from_json(_read_json(args.matrix))
    out = pushforward_index(K, e, cap=args.cap).to_json()
    text = json.dumps(out, indent=2, sort_keys=True) + "\n"
    if args.out:
        d = os.path.dirname(os.path.abspath(args.out))
        run = _Run("pushforward", d, [args.family, args.matrix], t0=args.t0)
        run.manifest.outputs.append(args.out)
        with open(args.out, "w") as fh:
            fh.write(text)
        run.finish()
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _load(args) -> RunConfig:
    return load_config(args.config, eps_grid=args.eps_grid, order=args.order, workers=args.workers)


def cmd_glue(args) -> int:
    from .surgery import SurgeryConfig, gluing_sweep, write_fit_json

    cfg = _load(args)
    scfg = SurgeryConfig.for_model(cfg.ansatz, kappa=cfg.kappa, X=cfg.X, gluing=cfg.gluing, neck=cfg.neck)
    res = gluing_sweep(scfg, cfg.eps_grid)
    run = _Run("glue", args.out, [args.config], cfg, args.t0)
    cols = ["eps", "sup_to_II", "sup_to_I", "max_v", "face_I_v", "face_II_v"]
    data = [res.eps, res.sup_to_II, res.sup_to_I, res.max_v, res.face_I_v, res.face_II_v]
    _write_csv(run.path("glue.csv"), cols, [[float(c[i]) for c in data] for i in range(res.eps.size)])
    if res.fits:
        write_fit_json(run.path("fits.json"), list(res.fits.values()))
    run.manifest.report = {"predicted_restriction_rate": scfg.predicted_gluing_rate,
                           "fits": {k: f.to_json() for k, f in res.fits.items()}}
    for k, f in res.fits.items():
        pred = f" (predicted {f.predicted:g})" if f.predicted is not None else ""
        print(f"{k}: slope {f.exponent:.4f}, R^2 {f.r2_of_fit:.6f}{pred}")
    if not res.fits:
        print("single eps value: no fit")
    run.finish()
    return EXIT_OK


def _formal_config(cfg: RunConfig):
    from .ma_solver import FormalConfig

    if cfg.family != "unitary":
        raise HypothesisViolation(
            f"the two-face formal solver needs a unitary family with exact far-end expansions; "
            f"{cfg.ansatz!r} is {cfg.family}")
    if cfg.X != 1.0:
        raise HypothesisViolation("the compact face must be normalized to X = 1")
    return FormalConfig(model=cfg.ansatz, kappa=cfg.kappa, order=cfg.order, per_decade=cfg.per_decade)


def _formal_outputs(run: _Run, sol):
    _write_csv(run.path("formal.csv"), ["eps", "max_residual"],
               [[float(e), float(r)] for e, r in zip(sol.eps, sol.max_residual)])
    with open(run.path("formal.json"), "w") as fh:
        json.dump(sol.to_json(), fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
    fit = _fit(sol.eps, sol.max_residual)
    audit = sol.support_audit()
    run.manifest.report.update({"residual_fit": fit, "ledger": [e.to_json() for e in sol.ledger],
                                "max_moment": sol.max_moment, "support_audit": audit})
    if fit:
        print(f"residual slope {fit['slope']:.4f} (R^2 {fit['r2']:.6f}), order {sol.cfg.order}")
    else:
        print(f"single eps value: max residual {float(sol.max_residual[0]):.3e}, no fit")
    print(f"support audit: within bound {audit['within_bound']}, exact {audit['exact']}")


def cmd_formal(args) -> int:
    from .ma_solver import formal_solve

    cfg = _load(args)
    sol = formal_solve(_formal_config(cfg), cfg.eps_grid)
    run = _Run("formal", args.out, [args.config], cfg, args.t0)
    _formal_outputs(run, sol)
    run.finish()
    return EXIT_OK


def _newton_rows(cfg: RunConfig, fcfg):
    from .ma_solver import sweep

    return sweep(fcfg, cfg.eps_grid, cfg.nu, cfg.start, cfg.workers)


def cmd_newton(args) -> int:
    cfg = _load(args)
    _, rows = _newton_rows(cfg, _formal_config(cfg))
    run = _Run("newton", args.out, [args.config], cfg, args.t0)
    _write_csv(run.path("newton.csv"), ["eps", "start", "iterations", "correction_norm"],
               [[r.eps, cfg.start, r.iterations, r.correction_norm] for r in rows])
    fit = _fit([r.eps for r in rows], [r.correction_norm for r in rows])
    run.manifest.report = {"correction_norm_fit": fit, "nu": cfg.nu, "start": cfg.start}
    if fit:
        print(f"correction norm slope {fit['slope']:.4f} (R^2 {fit['r2']:.6f}) from the {cfg.start} start")
    else:
        print(f"single eps value: correction norm {rows[0].correction_norm:.3e}, no fit")
    run.finish()
    return EXIT_OK


def cmd_sweep(args) -> int:
    from .ma_solver import write_sweep_csv

    cfg = _load(args)
    sol, rows = _newton_rows(cfg, _formal_config(cfg))
    run = _Run("sweep", args.out, [args.config], cfg, args.t0)
    write_sweep_csv(run.path("sweep.csv"), rows)
    _formal_outputs(run, sol)
    fit = _fit([r.eps for r in rows], [r.correction_norm for r in rows])
    run.manifest.report["correction_norm_fit"] = fit
    if fit:
        print(f"correction norm slope {fit['slope']:.4f}")
    run.finish()
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point


def _eps_list(text: str):
    try:
        vals = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"--eps-grid expects comma-separated numbers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("--eps-grid is empty")
    return vals


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="phgcy", description="Polyhomogeneous gluing toolkit.")
    ap.add_argument("--version", action="version", version=f"phgcy {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("indicial", help="indicial root table of a link spectrum")
    p.add_argument("spectrum")
    p.add_argument("--out", help="output directory (default: print JSON)")
    p.set_defaults(func=cmd_indicial)

    p = sub.add_parser("pushforward", help="push-forward of an index family")
    p.add_argument("family")
    p.add_argument("matrix")
    p.add_argument("--cap", help="lower the target cap")
    p.add_argument("--out", help="output file (default: stdout)")
    p.set_defaults(func=cmd_pushforward)

    for name, func, doc in (
        ("glue", cmd_glue, "glued family: restriction errors and Ricci potential"),
        ("formal", cmd_formal, "order-N formal solution and residual slope"),
        ("newton", cmd_newton, "exact solve at each eps"),
        ("sweep", cmd_sweep, "formal solve plus exact solves over the eps grid"),
    ):
        p = sub.add_parser(name, help=doc)
        p.add_argument("config", help="JSON config file")
        p.add_argument("--eps-grid", type=_eps_list, help="comma-separated eps values")
        p.add_argument("--order", type=int, help="formal order N")
        p.add_argument("--workers", type=int, help="threads for the per-eps solves")
        p.add_argument("--out", default="phgcy_out", help="output directory")
        p.set_defaults(func=func)
    return ap


_INPUT = (ConfigError, SurgeryError, ConeError, IndexAlgebraError, LogSeriesError, MetricError, ValueError)
_HYPOTHESIS = (HypothesisViolation, NullFaceHypothesisError, IndicialWeightError)
_SOLVER = (GluingPositivityError, SolverError, FaceError, RuntimeError, ArithmeticError)


def _classify(exc) -> int:
    from .ma_solver import MomentConditionError, WeightWindowError

    if isinstance(exc, _HYPOTHESIS + (MomentConditionError, WeightWindowError)):
        return EXIT_HYPOTHESIS
    if isinstance(exc, _SOLVER):
        return EXIT_SOLVER
    if isinstance(exc, _INPUT):
        return EXIT_INPUT
    return EXIT_SOLVER


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    args.t0 = time.perf_counter()
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - every failure maps to an exit code
        code = _classify(exc)
        print(f"phgcy {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
