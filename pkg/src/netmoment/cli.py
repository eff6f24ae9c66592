"""Command-line front end.

Exit codes: 0 success, 2 usage or input error, 3 numerical failure.
"""

import argparse
from dataclasses import dataclass, field, replace
import csv
import json
import logging
import os
from pathlib import Path
import sys

import numpy as np

from . import experiments as ex
from .bep import fmt, lambda_sweep, spectral_decay
from .errors import AssemblyError, BracketError, ContractError, DomainError, SolverError
from .kernels import Geometry
from .operators import FieldSamples, Magnetization, sample_field
from .spectral import gram_assemble, normalize_space, rhs_vector, target_norm2

log = logging.getLogger("netmoment")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3
DEFAULT_LAMBDAS = [10.0 ** -k for k in range(1, 10)]
GRID = 4096
EDGE_FRACTION = 0.05


class UsageError(Exception):
    pass


@dataclass
class ExperimentConfig:
    geometry: Geometry = field(default_factory=Geometry.reference)
    N: int = 250
    space: str = "L2"
    lam: float | None = None
    M: float | None = None
    magnetization: str = "constant"
    noise: ex.NoiseSpec | None = None
    output: str = "."
    keep_zero_mode: bool = False
    seed: int = 0
    cache: bool = True
    method: str = "quadrature"

    def __post_init__(self):
        if self.N < 1:
            raise ContractError("order N must be >= 1")
        self.space = normalize_space(self.space)
        if self.lam is not None and self.M is not None:
            raise ContractError("give either a lambda or a target M, not both")
        for name in ("lam", "M"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise ContractError(f"{name} must be > 0")

    @classmethod
    def from_json(cls, data):
        kwargs = {}
        if "geometry" in data:
            g = data["geometry"]
            if isinstance(g, str):
                kwargs["geometry"] = Geometry.parse(g)
            elif isinstance(g, dict):
                kwargs["geometry"] = Geometry(float(g["s"]), float(g["q"]), float(g["h"]))
            else:
                kwargs["geometry"] = Geometry(*(float(v) for v in g))
        for key, attr, conv in (("N", "N", int), ("space", "space", str), ("lambda", "lam", float),
                                ("M", "M", float), ("magnetization", "magnetization", str),
                                ("output", "output", str), ("keep_zero_mode", "keep_zero_mode", bool),
                                ("seed", "seed", int), ("method", "method", str)):
            if data.get(key) is not None:
                kwargs[attr] = conv(data[key])
        if data.get("noise"):
            try:
                kwargs["noise"] = ex.NoiseSpec(**data["noise"])
            except TypeError as exc:
                raise ContractError(f"bad noise specification: {exc}") from exc
        unknown = set(data) - {"geometry", "N", "space", "lambda", "M", "magnetization",
                               "output", "keep_zero_mode", "seed", "method", "noise"}
        if unknown:
            raise ContractError(f"unknown config keys: {sorted(unknown)}")
        return cls(**kwargs)

    def cache_dir(self):
        if not self.cache:
            return False
        return os.environ.get("NETMOMENT_CACHE_DIR") or str(Path.home() / ".cache" / "netmoment")


def resolve_magnetization(spec):
    if spec in ex.BUILTINS:
        return ex.BUILTINS[spec]
    path = Path(spec)
    if not path.is_file():
        raise UsageError(f"{spec!r} is neither a builtin magnetisation {sorted(ex.BUILTINS)} nor a file")
    try:
        return Magnetization.load(path)
    except json.JSONDecodeError as exc:
        raise UsageError(f"cannot parse magnetisation file {spec}: {exc}") from exc


def _gram(cfg):
    return gram_assemble(cfg.geometry, cfg.N, cfg.space, method=cfg.method,
                         cache_dir=cfg.cache_dir(), seed=cfg.seed)


def _write_csv(path, header, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([v if isinstance(v, str) else fmt(v) for v in row])


def _write_json(path, data):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _out(cfg):
    return Path(cfg.output)


def _estimators(cfg, gram=None):
    lam = cfg.lam
    if lam is None and cfg.M is None:
        lam = ex.TABLE_LAMBDA[cfg.space]
    return ex.estimators(cfg.geometry, cfg.N, cfg.space, lam=lam, M=cfg.M,
                         gram=gram if gram is not None else _gram(cfg),
                         keep_zero_mode=cfg.keep_zero_mode)


def cmd_sweep(cfg, args):
    lambdas = DEFAULT_LAMBDAS if args.lambdas is None else args.lambdas
    if not lambdas:
        raise UsageError("empty lambda list")
    gram = _gram(cfg)
    norm2 = target_norm2(cfg.geometry, "e1")
    rows, failed = [], False
    for target in ("e1", "e2"):
        r = rhs_vector(cfg.geometry, cfg.N, target)
        for row in lambda_sweep(gram, r, lambdas, cfg.space, norm2, cfg.keep_zero_mode):
            failed |= row.error is not None
            rows.append([target, row.lam, row.M, row.residual, row.error or "ok"])
            print(f"{target} lambda={row.lam:.3e} M={row.M:.6g} residual={row.residual:.6g}"
                  + (f" ERROR {row.error}" if row.error else ""))
    _write_csv(_out(cfg) / "sweep.csv", ["target", "lambda", "M", "residual", "status"], rows)
    return EXIT_NUMERIC if failed else EXIT_OK


def cmd_estimator(cfg, args):
    sols = _estimators(cfg)
    q = cfg.geometry.q
    x = np.linspace(-q, q, GRID)
    edge = np.abs(x) >= (1.0 - EDGE_FRACTION) * q
    for i, sol in enumerate(sols, start=1):
        values = sol.coeffs.evaluate(x)
        imag = float(np.max(np.abs(values.imag)))
        _write_json(_out(cfg) / f"phi_{i}.json", sol.to_json())
        _write_csv(_out(cfg) / f"phi_{i}.csv", ["x", f"phi_{i}"], zip(x, values.real))
        ends = sol.evaluate(np.array([-q, q]))
        print(f"phi_{i}: space={sol.space} lambda={sol.lam:.6g} M={sol.M_achieved:.6g} "
              f"residual={sol.residual:.6g} phi(-q)={ends[0]:.6g} phi(q)={ends[1]:.6g} "
              f"edge_max={np.max(np.abs(values.real[edge])):.6g} imag_max={imag:.2e}")
    return EXIT_OK


def _noise_on_grid(cfg, x):
    eta = cfg.noise.coefficients(cfg.geometry, cfg.N)
    return eta.evaluate(x).real


def cmd_forward(cfg, args):
    m = resolve_magnetization(cfg.magnetization).validate(cfg.geometry)
    samples = sample_field(m, cfg.geometry, GRID)
    x = samples.grid
    values = samples.values
    if cfg.noise is not None:
        values = values + _noise_on_grid(cfg, x)
        samples = FieldSamples(samples.grid_lo, samples.grid_hi, values)
    _write_csv(_out(cfg) / "field.csv", ["x", "b2"], zip(x, values))
    _write_json(_out(cfg) / "field.json", samples.to_json())
    s = cfg.geometry.s
    xs = np.linspace(-s, s, GRID)
    m1, m2 = m.values(xs)
    _write_csv(_out(cfg) / "magnetization.csv", ["x", "m1", "m2"], zip(xs, m1, m2))
    print(f"field written on {GRID} points; moments (m1, m2) = {m.moments()}")
    return EXIT_OK


def _load_samples(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return FieldSamples.from_json(json.load(fh))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read field samples {path}: {exc}") from exc


def cmd_estimate(cfg, args):
    samples = _load_samples(args.field)
    sols = _estimators(cfg)
    est = [ex.estimate_moment(samples, sol, cfg.geometry) for sol in sols]
    _write_csv(_out(cfg) / "moments.csv", ["space", "lambda", "m1e", "m2e"],
               [[sols[0].space, sols[0].lam, est[0], est[1]]])
    print(f"estimated moments: m1e={est[0]:.10g} m2e={est[1]:.10g}")
    return EXIT_OK


def cmd_reproduce(cfg, args):
    comparison, norms = [], []
    reports = {name: [] for name in ex.BUILTINS}
    for space, lam in ex.TABLE_LAMBDA.items():
        sols = _estimators(replace(cfg, space=space, lam=lam, M=None))
        for name, m in ex.BUILTINS.items():
            rep = ex.moment_report(m, sols, cfg.geometry, name=name)
            entry = ex.compare_reference(rep, name)
            reports[name].append(rep)
            comparison.append(entry)
            status = "pass" if entry["pass"] else "FAIL"
            flag = f" [{entry['flag']}]" if "flag" in entry else ""
            print(f"{name:14s} {space:5s} m1e={rep.estimated[0]: .5f} m2e={rep.estimated[1]: .5f} "
                  f"ref=({entry['reference']['m1e']}, {entry['reference']['m2e']}) {status}{flag}")
    for name, reps in reports.items():
        _write_csv(_out(cfg) / f"moments_{name}.csv", ex.REPORT_HEADER, [rep.row() for rep in reps])
    for (space, lam), ref in ex.REFERENCE_NORMS.items():
        sols = _estimators(replace(cfg, space=space, lam=lam, M=None))
        computed = [s.M_achieved for s in sols]
        norms.append({"space": space, "lambda": lam, "reference": list(ref), "computed": computed})
        print(f"norms {space:5s} lambda={lam:.0e} M=({computed[0]:.4g}, {computed[1]:.4g}) ref={ref}")
    _write_json(_out(cfg) / "comparison.json", {"band": ex.MOMENT_BAND, "moments": comparison, "norms": norms})
    return EXIT_OK


def cmd_spectrum(cfg, args):
    eig = spectral_decay(_gram(cfg))
    _write_csv(_out(cfg) / "spectrum.csv", ["index", "eigenvalue"], [[str(i + 1), v] for i, v in enumerate(eig)])
    k = min(50, eig.size)
    print(f"largest={eig[0]:.6g} ratio_{k}_1={eig[k - 1] / eig[0]:.3e} smallest={eig[-1]:.3e}")
    return EXIT_OK


def _lambda_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad lambda list {text!r}") from exc


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment configuration")
    common.add_argument("--geometry", help="s,q,h (default 1,1.5,0.1)")
    common.add_argument("--order", type=int, help="truncation order N (default 250)")
    common.add_argument("--space", choices=["l2", "w012"], type=str.lower)
    group = common.add_mutually_exclusive_group()
    group.add_argument("--lambda", dest="lam", type=float)
    group.add_argument("--target-m", dest="M", type=float)
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output directory (default .)")
    common.add_argument("--no-cache", action="store_true", help="do not read or write the Gram cache")
    common.add_argument("--keep-zero-mode", action="store_true", default=None,
                        help="W012: keep the constant mode in the unknowns")
    common.add_argument("--method", choices=["quadrature", "fft"], help="Gram assembly method")
    common.add_argument("--magnetization", help="builtin name or JSON file")
    common.add_argument("--noise-level", type=float)
    common.add_argument("--noise-shape", choices=list(ex.NOISE_SHAPES))
    common.add_argument("--noise-frequency", type=int)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="netmoment", description="Net-moment estimators from planar field data.")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("sweep", parents=[common], help="M(lambda) and residual for e1, e2")
    p.add_argument("--lambdas", type=_lambda_list, help="comma-separated lambdas (default 1e-1..1e-9)")
    p.set_defaults(func=cmd_sweep)
    sub.add_parser("estimator", parents=[common], help="solve and sample phi_1, phi_2").set_defaults(func=cmd_estimator)
    sub.add_parser("forward", parents=[common], help="field of a magnetisation").set_defaults(func=cmd_forward)
    p = sub.add_parser("estimate", parents=[common], help="moments from a field.json")
    p.add_argument("field", help="FieldSamples JSON as written by 'forward'")
    p.set_defaults(func=cmd_estimate)
    sub.add_parser("reproduce", parents=[common], help="moment tables and comparison report").set_defaults(
        func=cmd_reproduce)
    sub.add_parser("spectrum", parents=[common], help="Gram eigenvalues").set_defaults(func=cmd_spectrum)
    return parser


def config_from_args(args):
    data = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise UsageError("config must be a JSON object")
    overrides = {"geometry": args.geometry, "N": args.order, "space": args.space, "lambda": args.lam,
                 "M": args.M, "seed": args.seed, "output": args.out, "keep_zero_mode": args.keep_zero_mode,
                 "method": args.method, "magnetization": args.magnetization}
    for key, value in overrides.items():
        if value is not None:
            data[key] = value
    if args.lam is not None or args.M is not None:
        data.pop("M" if args.lam is not None else "lambda", None)
    noise = dict(data.get("noise") or {})
    for key, value in (("level", args.noise_level), ("shape", args.noise_shape),
                       ("frequency", args.noise_frequency)):
        if value is not None:
            noise[key] = value
    if noise:
        noise.setdefault("seed", data.get("seed", 0))
        data["noise"] = noise
    cfg = ExperimentConfig.from_json(data)
    if args.no_cache:
        cfg.cache = False
    return cfg


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        return args.func(cfg, args)
    except (UsageError, ContractError, DomainError) as exc:
        print(f"netmoment: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (BracketError, SolverError, AssemblyError) as exc:
        print(f"netmoment: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
